use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// One layer of a [`NetworkSpec`]. Shapes are per sample: dense layers see
/// `[features]`, convolutional layers `[channels, height, width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Per-feature for `[features]` inputs, per-channel (spatial) for
    /// `[channels, h, w]` inputs. Running statistics follow
    /// `r = momentum * r + (1 - momentum) * batch`.
    BatchNorm {
        features: usize,
        eps: f64,
        momentum: f64,
    },
    Dropout {
        rate: f64,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    Flatten,
    Activation {
        kind: ActivationKind,
    },
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense { inputs, outputs }
    }

    /// 3x3-style "same" convolution with stride 1.
    pub fn conv_same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
        }
    }

    pub fn batch_norm(features: usize) -> Self {
        LayerSpec::BatchNorm {
            features,
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn activation(kind: ActivationKind) -> Self {
        LayerSpec::Activation { kind }
    }

    /// Shape of the trainable parameter tensors, in gradient order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            ],
            LayerSpec::BatchNorm { features, .. } => vec![vec![features], vec![features]],
            _ => Vec::new(),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| Err(Error::Spec(format!("{self:?} on input {input:?}: {msg}")));
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return bad("zero-sized dense layer".into());
                }
                if input != [inputs] {
                    return bad(format!("expected [{inputs}]"));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let &[c, h, w] = input else {
                    return bad("convolution needs [channels, height, width]".into());
                };
                if c != in_channels {
                    return bad(format!("expected {in_channels} channels"));
                }
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return bad("channels, kernel and stride must be >= 1".into());
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return bad("kernel larger than padded input".into());
                }
                Ok(vec![
                    out_channels,
                    (h + 2 * padding - kernel) / stride + 1,
                    (w + 2 * padding - kernel) / stride + 1,
                ])
            }
            LayerSpec::BatchNorm {
                features,
                eps,
                momentum,
            } => {
                if input.first() != Some(&features) || !(input.len() == 1 || input.len() == 3) {
                    return bad(format!("expected [{features}] or [{features}, h, w]"));
                }
                if !(eps > 0.0) || !(0.0..1.0).contains(&momentum) {
                    return bad("need eps > 0 and momentum in [0, 1)".into());
                }
                Ok(input.to_vec())
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return bad(format!("dropout rate {rate} outside [0, 1)"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::MaxPool { kernel, stride } => {
                let &[c, h, w] = input else {
                    return bad("pooling needs [channels, height, width]".into());
                };
                if kernel == 0 || stride == 0 || h < kernel || w < kernel {
                    return bad("invalid pooling window".into());
                }
                Ok(vec![c, (h - kernel) / stride + 1, (w - kernel) / stride + 1])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Activation { kind } => {
                kind.validate().map_err(|e| Error::Spec(e.to_string()))?;
                Ok(input.to_vec())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`
    GlorotUniform,
    /// `N(0, 1 / fan_in)`
    LecunNormal,
    /// `U(-a, a)`, `a = sqrt(6 / fan_in)`
    HeUniform,
}

impl Initializer {
    pub fn all() -> [Initializer; 3] {
        [
            Initializer::GlorotUniform,
            Initializer::LecunNormal,
            Initializer::HeUniform,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Initializer::GlorotUniform => "glorot_uniform",
            Initializer::LecunNormal => "lecun_normal",
            Initializer::HeUniform => "he_uniform",
        }
    }
}

impl std::fmt::Display for Initializer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Declarative network description; [`crate::nn::Network::new`] turns it into
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Per-sample input shape, `[features]` or `[channels, height, width]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub initializer: Initializer,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec {
            input_shape,
            layers,
            initializer: Initializer::GlorotUniform,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_initializer(mut self, initializer: Initializer) -> Self {
        self.initializer = initializer;
        self
    }

    /// Replaces every activation layer's kind.
    pub fn with_activation(mut self, kind: ActivationKind) -> Self {
        for l in &mut self.layers {
            if let LayerSpec::Activation { kind: k } = l {
                *k = kind;
            }
        }
        self
    }

    /// Checks that layers compose and returns the per-sample shape entering
    /// each layer followed by the output shape (`layers.len() + 1` entries).
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Spec(format!(
                "input shape {:?} must be nonempty with nonzero dimensions",
                self.input_shape
            )));
        }
        match self.layers.last() {
            Some(LayerSpec::Dense { .. }) => {}
            _ => return Err(Error::Spec("the last layer must be the dense classifier head".into())),
        }
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn num_classes(&self) -> Result<usize> {
        Ok(self.shapes()?.last().unwrap()[0])
    }

    pub fn num_params(&self) -> Result<usize> {
        self.validate()?;
        Ok(self
            .layers
            .iter()
            .flat_map(|l| l.param_shapes())
            .map(|s| s.iter().product::<usize>())
            .sum())
    }
}

/// `depth` blocks of `Dense(width) -> BatchNorm -> activation -> Dropout(0.25)`
/// followed by a dense head, for flattened 28x28 inputs and 10 classes.
pub fn build_mlp(depth: usize, width: usize, activation: ActivationKind) -> Result<NetworkSpec> {
    build_mlp_for(784, 10, depth, width, activation)
}

/// [`build_mlp`] with explicit input size and class count.
pub fn build_mlp_for(
    inputs: usize,
    classes: usize,
    depth: usize,
    width: usize,
    activation: ActivationKind,
) -> Result<NetworkSpec> {
    if depth == 0 {
        return Err(Error::argument("depth must be >= 1"));
    }
    let mut layers = Vec::with_capacity(4 * depth + 1);
    let mut prev = inputs;
    for _ in 0..depth {
        layers.push(LayerSpec::dense(prev, width));
        layers.push(LayerSpec::batch_norm(width));
        layers.push(LayerSpec::activation(activation));
        layers.push(LayerSpec::Dropout { rate: 0.25 });
        prev = width;
    }
    layers.push(LayerSpec::dense(prev, classes));
    let spec = NetworkSpec::new(vec![inputs], layers);
    spec.validate()?;
    Ok(spec)
}

/// Plain MLP without normalization or dropout: `inputs -> width x (depth-1)
/// hidden -> outputs`, with `depth` dense layers in total.
pub fn build_plain_mlp(
    inputs: usize,
    width: usize,
    outputs: usize,
    depth: usize,
    activation: ActivationKind,
) -> Result<NetworkSpec> {
    if depth == 0 {
        return Err(Error::argument("depth must be >= 1"));
    }
    let mut layers = Vec::new();
    let mut prev = inputs;
    for _ in 0..depth - 1 {
        layers.push(LayerSpec::dense(prev, width));
        layers.push(LayerSpec::activation(activation));
        prev = width;
    }
    layers.push(LayerSpec::dense(prev, outputs));
    let spec = NetworkSpec::new(vec![inputs], layers);
    spec.validate()?;
    Ok(spec)
}

/// Six 3x3 same-padded convolutions in three pooled stages of widths
/// `b, b | 2b, 2b | 4b, 4b`, then `Dense(4b) -> Dense(10)`. With `b = 32`
/// this is 32-32-64-64-128-128 and a 128-unit hidden layer.
///
/// `input` is `[channels, height, width]`.
pub fn build_cnn6(
    activation: ActivationKind,
    input: [usize; 3],
    base_channels: usize,
) -> Result<NetworkSpec> {
    let b = base_channels;
    if b == 0 {
        return Err(Error::argument("base_channels must be >= 1"));
    }
    let [c, h, w] = input;
    let act = LayerSpec::activation(activation);
    let pool = LayerSpec::MaxPool { kernel: 2, stride: 2 };
    let mut layers = Vec::new();
    let mut prev = c;
    for out in [b, 2 * b, 4 * b] {
        layers.push(LayerSpec::conv_same(prev, out, 3));
        layers.push(act);
        layers.push(LayerSpec::conv_same(out, out, 3));
        layers.push(act);
        layers.push(pool);
        prev = out;
    }
    let flat = 4 * b * (h / 8) * (w / 8);
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::dense(flat, 4 * b));
    layers.push(act);
    layers.push(LayerSpec::dense(4 * b, 10));
    let spec = NetworkSpec::new(vec![c, h, w], layers);
    spec.validate()?;
    Ok(spec)
}

/// Five weight layers: three same-padded 3x3 convolutions (`b`, `2b`, `4b`
/// channels, each followed by 2x2 pooling) and `Dense(4b) -> Dense(10)`.
pub fn build_cnn5(
    activation: ActivationKind,
    input: [usize; 3],
    base_channels: usize,
) -> Result<NetworkSpec> {
    let b = base_channels;
    if b == 0 {
        return Err(Error::argument("base_channels must be >= 1"));
    }
    let [c, h, w] = input;
    let act = LayerSpec::activation(activation);
    let mut layers = Vec::new();
    let mut prev = c;
    for out in [b, 2 * b, 4 * b] {
        layers.push(LayerSpec::conv_same(prev, out, 3));
        layers.push(act);
        layers.push(LayerSpec::MaxPool { kernel: 2, stride: 2 });
        prev = out;
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::dense(4 * b * (h / 8) * (w / 8), 4 * b));
    layers.push(act);
    layers.push(LayerSpec::dense(4 * b, 10));
    let spec = NetworkSpec::new(vec![c, h, w], layers);
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_layer_arithmetic() {
        assert_eq!(build_mlp(1, 500, ActivationKind::Mish).unwrap().layers.len(), 5);
        let deep = build_mlp(20, 500, ActivationKind::Relu).unwrap();
        assert_eq!(deep.layers.len(), 81);
        assert_eq!(deep.shapes().unwrap().last().unwrap(), &vec![10]);
        assert!(build_mlp(0, 500, ActivationKind::Mish).is_err());
    }

    #[test]
    fn cnn6_plan() {
        let s = build_cnn6(ActivationKind::Mish, [3, 32, 32], 32).unwrap();
        let convs: Vec<usize> = s
            .layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Conv2d { out_channels, .. } => Some(*out_channels),
                _ => None,
            })
            .collect();
        assert_eq!(convs, [32, 32, 64, 64, 128, 128]);
        assert!(build_cnn6(ActivationKind::Mish, [1, 28, 28], 4).is_ok());
        let n = s.num_params().unwrap();
        for k in ActivationKind::all() {
            assert_eq!(s.clone().with_activation(k).num_params().unwrap(), n);
        }
    }

    #[test]
    fn rejects_bad_compositions() {
        let mut s = build_mlp(1, 8, ActivationKind::Mish).unwrap();
        s.layers[0] = LayerSpec::dense(783, 8);
        assert!(matches!(s.validate(), Err(Error::Spec(_))));

        let s = NetworkSpec::new(vec![4], vec![LayerSpec::dense(4, 2), LayerSpec::Flatten]);
        assert!(s.validate().is_err());

        let s = NetworkSpec::new(
            vec![4],
            vec![LayerSpec::Dropout { rate: 1.0 }, LayerSpec::dense(4, 2)],
        );
        assert!(s.validate().is_err());

        let s = NetworkSpec::new(vec![4], vec![LayerSpec::conv_same(1, 2, 3), LayerSpec::dense(4, 2)]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = build_cnn5(ActivationKind::Swish { beta: 1.5 }, [1, 28, 28], 8)
            .unwrap()
            .with_initializer(Initializer::HeUniform)
            .with_seed(42);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"type\":\"conv2d\""));
        assert_eq!(serde_json::from_str::<NetworkSpec>(&json).unwrap(), s);
    }
}
