use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::conv::{conv2d_backward, conv2d_forward, ConvGeometry};
use super::loss::softmax_cross_entropy;
use super::spec::{Initializer, LayerSpec, NetworkSpec};
use super::Tensor;
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, Variant};
use crate::linalg::gemm;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Batch statistics and active dropout.
    Train,
    /// Running statistics, dropout off.
    Eval,
}

/// Batch-norm running statistics for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Instantiated parameters and state for a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    spec: NetworkSpec,
    /// Per-layer trainable tensors, `[W, b]` or `[gamma, beta]`.
    params: Vec<Vec<Tensor<T>>>,
    running: Vec<Option<RunningStats<T>>>,
    #[serde(skip)]
    shapes: Vec<Vec<usize>>,
}

/// Gradients laid out exactly like [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub per_layer: Vec<Vec<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.per_layer.iter().flatten()
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|t| t.all_finite())
    }

    pub fn flatten_f64(&self) -> Vec<f64> {
        self.iter().flat_map(|t| t.to_f64_vec()).collect()
    }
}

enum Cache<T> {
    None,
    Input(Tensor<T>),
    BatchNorm {
        xhat: Vec<T>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Mask(Option<Vec<T>>),
    Argmax(Vec<usize>),
    Activation {
        input: Vec<T>,
        gate: Option<Vec<T>>,
    },
}

/// Per-layer state recorded by [`Network::forward`] for the backward pass.
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
    batch: usize,
    logits: Tensor<T>,
}

impl<T> Tape<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn logits(&self) -> &Tensor<T> {
        &self.logits
    }
}

struct Run<T> {
    out: Tensor<T>,
    caches: Vec<Cache<T>>,
    /// `(mean, unbiased variance)` per batch-norm layer in train mode.
    stats: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

fn fans(layer: &LayerSpec) -> (usize, usize) {
    match *layer {
        LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            ..
        } => (in_channels * kernel * kernel, out_channels * kernel * kernel),
        _ => (0, 0),
    }
}

fn conv_geometry(layer: &LayerSpec, input: &[usize]) -> ConvGeometry {
    let LayerSpec::Conv2d {
        in_channels,
        out_channels,
        kernel,
        stride,
        padding,
    } = *layer
    else {
        unreachable!("conv_geometry on {layer:?}")
    };
    ConvGeometry {
        in_channels,
        out_channels,
        kernel,
        stride,
        padding,
        height: input[1],
        width: input[2],
    }
}

/// Mish uses the fused kernel (saves `tanh(softplus(x))`); everything else
/// the naive one.
fn kernel_for(kind: ActivationKind) -> Kernel {
    let variant = if kind == ActivationKind::Mish {
        Variant::Fused
    } else {
        Variant::Naive
    };
    Kernel::new(kind).variant(variant)
}

impl<T: Real> Network<T> {
    /// Draws parameters from `spec.initializer` seeded by `spec.seed`. Draws
    /// happen in `f64`, so `f32` and `f64` networks from one spec start from
    /// the same rounded values. Biases and `beta` are zero, `gamma` is one.
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut params = Vec::with_capacity(spec.layers.len());
        let mut running = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let ps = layer.param_shapes();
            let tensors = match layer {
                LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } => {
                    let (fan_in, fan_out) = fans(layer);
                    let n: usize = ps[0].iter().product();
                    let w: Vec<f64> = (0..n)
                        .map(|_| match spec.initializer {
                            Initializer::GlorotUniform => {
                                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                                rng.random_range(-a..=a)
                            }
                            Initializer::HeUniform => {
                                let a = (6.0 / fan_in as f64).sqrt();
                                rng.random_range(-a..=a)
                            }
                            Initializer::LecunNormal => {
                                let z: f64 = rng.sample(StandardNormal);
                                z / (fan_in as f64).sqrt()
                            }
                        })
                        .collect();
                    vec![
                        Tensor::from_f64(ps[0].clone(), &w)?,
                        Tensor::zeros(ps[1].clone()),
                    ]
                }
                LayerSpec::BatchNorm { features, .. } => {
                    let mut gamma = Tensor::zeros(vec![*features]);
                    gamma.fill(T::one());
                    vec![gamma, Tensor::zeros(vec![*features])]
                }
                _ => Vec::new(),
            };
            running.push(match layer {
                LayerSpec::BatchNorm { features, .. } => Some(RunningStats {
                    mean: vec![T::zero(); *features],
                    var: vec![T::one(); *features],
                }),
                _ => None,
            });
            params.push(tensors);
        }
        Ok(Network {
            spec: spec.clone(),
            params,
            running,
            shapes,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Vec<Tensor<T>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Tensor<T>>] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[Option<RunningStats<T>>] {
        &self.running
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().flatten().map(|t| t.len()).sum()
    }

    /// Output classes of the head.
    pub fn num_classes(&self) -> usize {
        self.shapes.last().map_or(0, |s| s[0])
    }

    /// Checks that parameter and state shapes match the spec; useful after
    /// deserializing. Restores derived shape information.
    pub fn check(&mut self) -> Result<()> {
        self.shapes = self.spec.shapes()?;
        if self.params.len() != self.spec.layers.len() || self.running.len() != self.spec.layers.len() {
            return Err(Error::State("layer count does not match spec".into()));
        }
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let want = layer.param_shapes();
            let got: Vec<Vec<usize>> = self.params[i].iter().map(|t| t.shape().to_vec()).collect();
            if want != got {
                return Err(Error::State(format!(
                    "layer {i}: parameter shapes {got:?}, spec wants {want:?}"
                )));
            }
            let bn_ok = match (layer, &self.running[i]) {
                (LayerSpec::BatchNorm { features, .. }, Some(r)) => {
                    r.mean.len() == *features && r.var.len() == *features
                }
                (LayerSpec::BatchNorm { .. }, None) => false,
                (_, r) => r.is_none(),
            };
            if !bn_ok {
                return Err(Error::State(format!("layer {i}: bad running statistics")));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self
                .params
                .iter()
                .map(|l| l.iter().map(|t| t.cast()).collect())
                .collect(),
            running: self
                .running
                .iter()
                .map(|r| {
                    r.as_ref().map(|r| RunningStats {
                        mean: r.mean.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                        var: r.var.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                    })
                })
                .collect(),
            shapes: self.shapes.clone(),
        }
    }

    /// Forward pass that records a tape. In train mode batch-norm running
    /// statistics are updated and `rng` drives dropout masks.
    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Tensor<T>, Tape<T>)> {
        let run = self.run(x, mode, Some(rng), true)?;
        for (i, s) in run.stats.into_iter().enumerate() {
            let (Some((mean, var)), LayerSpec::BatchNorm { momentum, .. }) = (s, self.spec.layers[i])
            else {
                continue;
            };
            let r = self.running[i].as_mut().expect("batch norm has running stats");
            for c in 0..mean.len() {
                let (rm, rv) = (r.mean[c].as_f64(), r.var[c].as_f64());
                r.mean[c] = T::from_f64(momentum * rm + (1.0 - momentum) * mean[c]);
                r.var[c] = T::from_f64(momentum * rv + (1.0 - momentum) * var[c]);
            }
        }
        let tape = Tape {
            caches: run.caches,
            batch: x.batch(),
            logits: run.out.clone(),
        };
        Ok((run.out, tape))
    }

    /// Eval-mode logits without recording a tape.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(x, Mode::Eval, None, false)?.out)
    }

    /// Mean softmax cross-entropy of the tape's logits and gradients of it
    /// with respect to every parameter.
    pub fn backward(&self, tape: &Tape<T>, labels: &[usize]) -> Result<(f64, Gradients<T>)> {
        if labels.len() != tape.batch {
            return Err(Error::argument(format!(
                "{} labels for a tape of batch {}",
                labels.len(),
                tape.batch
            )));
        }
        let (loss, dlogits) = softmax_cross_entropy(&tape.logits, labels)?;
        Ok((loss, self.backward_from(tape, dlogits)?))
    }

    /// Backpropagates an arbitrary upstream gradient on the logits.
    pub fn backward_from(&self, tape: &Tape<T>, dlogits: Tensor<T>) -> Result<Gradients<T>> {
        let n = tape.batch;
        if tape.caches.len() != self.spec.layers.len() {
            return Err(Error::State("tape does not belong to this network".into()));
        }
        let mut want = vec![n];
        want.extend_from_slice(self.shapes.last().unwrap());
        if dlogits.shape() != want {
            return Err(Error::argument(format!(
                "upstream gradient {:?} does not match logits {want:?}",
                dlogits.shape()
            )));
        }
        let mut per_layer: Vec<Vec<Tensor<T>>> = self
            .params
            .iter()
            .map(|l| l.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect())
            .collect();
        let mut g = dlogits.into_data();
        for i in (0..self.spec.layers.len()).rev() {
            let layer = &self.spec.layers[i];
            let in_shape = &self.shapes[i];
            let in_len: usize = in_shape.iter().product();
            let need_dx = i > 0;
            let grads = &mut per_layer[i];
            g = match (layer, &tape.caches[i]) {
                (&LayerSpec::Dense { inputs, outputs }, Cache::Input(x)) => {
                    let (dw, db) = split2(grads);
                    gemm(true, false, outputs, inputs, n, T::one(), &g, x.data(), T::zero(), dw.data_mut());
                    let db = db.data_mut();
                    for row in g.chunks_exact(outputs) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += *v;
                        }
                    }
                    if need_dx {
                        let mut dx = vec![T::zero(); n * inputs];
                        gemm(false, false, n, inputs, outputs, T::one(), &g, self.params[i][0].data(), T::zero(), &mut dx);
                        dx
                    } else {
                        Vec::new()
                    }
                }
                (LayerSpec::Conv2d { .. }, Cache::Input(x)) => {
                    let geom = conv_geometry(layer, in_shape);
                    let (dw, db) = split2(grads);
                    let mut dx = vec![T::zero(); n * in_len];
                    conv2d_backward(&geom, n, x.data(), self.params[i][0].data(), &g, &mut dx, dw.data_mut(), db.data_mut());
                    dx
                }
                (&LayerSpec::BatchNorm { features, .. }, Cache::BatchNorm { xhat, inv_std, train }) => {
                    let inner = in_len / features;
                    let m = (n * inner) as f64;
                    let gamma = self.params[i][0].data();
                    let mut dgamma = vec![0.0; features];
                    let mut dbeta = vec![0.0; features];
                    for (b, (gb, xb)) in g.chunks_exact(inner).zip(xhat.chunks_exact(inner)).enumerate() {
                        let c = b % features;
                        for (gv, xv) in gb.iter().zip(xb) {
                            dgamma[c] += gv.as_f64() * xv.as_f64();
                            dbeta[c] += gv.as_f64();
                        }
                    }
                    let mut dx = vec![T::zero(); g.len()];
                    for (b, ((db, gb), xb)) in dx
                        .chunks_exact_mut(inner)
                        .zip(g.chunks_exact(inner))
                        .zip(xhat.chunks_exact(inner))
                        .enumerate()
                    {
                        let c = b % features;
                        let scale = gamma[c].as_f64() * inv_std[c];
                        for ((d, gv), xv) in db.iter_mut().zip(gb).zip(xb) {
                            *d = T::from_f64(if *train {
                                scale / m * (m * gv.as_f64() - dbeta[c] - xv.as_f64() * dgamma[c])
                            } else {
                                scale * gv.as_f64()
                            });
                        }
                    }
                    let (dg, dbt) = split2(grads);
                    for c in 0..features {
                        dg.data_mut()[c] = T::from_f64(dgamma[c]);
                        dbt.data_mut()[c] = T::from_f64(dbeta[c]);
                    }
                    dx
                }
                (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                    if let Some(mask) = mask {
                        for (v, m) in g.iter_mut().zip(mask) {
                            *v *= *m;
                        }
                    }
                    g
                }
                (LayerSpec::MaxPool { .. }, Cache::Argmax(idx)) => {
                    let mut dx = vec![T::zero(); n * in_len];
                    for (v, &j) in g.iter().zip(idx) {
                        dx[j] += *v;
                    }
                    dx
                }
                (LayerSpec::Flatten, Cache::None) => g,
                (&LayerSpec::Activation { kind }, Cache::Activation { input, gate }) => {
                    let mut dx = vec![T::zero(); g.len()];
                    kernel_for(kind).backward_slice(input, gate.as_deref(), &g, &mut dx)?;
                    dx
                }
                _ => return Err(Error::State(format!("tape entry {i} does not match layer {layer:?}"))),
            };
        }
        Ok(Gradients { per_layer })
    }

    fn run(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        mut rng: Option<&mut dyn RngCore>,
        record: bool,
    ) -> Result<Run<T>> {
        let n = x.batch();
        if n == 0 {
            return Err(Error::argument("empty batch"));
        }
        if x.shape()[1..] != self.spec.input_shape[..] {
            return Err(Error::argument(format!(
                "input batch {:?} does not match network input {:?}",
                x.shape(),
                self.spec.input_shape
            )));
        }
        let train = mode == Mode::Train;
        let layers = self.spec.layers.len();
        let mut caches = Vec::with_capacity(layers);
        let mut stats = vec![None; layers];
        let mut cur = x.data().to_vec();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let in_shape = &self.shapes[i];
            let out_len: usize = self.shapes[i + 1].iter().product();
            let keep = |v: &Vec<T>, shape: &[usize]| -> Result<Cache<T>> {
                let mut s = vec![n];
                s.extend_from_slice(shape);
                Ok(Cache::Input(Tensor::from_vec(s, v.clone())?))
            };
            let (next, cache) = match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    let (w, b) = (self.params[i][0].data(), self.params[i][1].data());
                    let mut y = vec![T::zero(); n * outputs];
                    for row in y.chunks_exact_mut(outputs) {
                        row.copy_from_slice(b);
                    }
                    gemm(false, true, n, outputs, inputs, T::one(), &cur, w, T::one(), &mut y);
                    let c = if record { keep(&cur, in_shape)? } else { Cache::None };
                    (y, c)
                }
                LayerSpec::Conv2d { .. } => {
                    let geom = conv_geometry(layer, in_shape);
                    let mut y = vec![T::zero(); n * out_len];
                    conv2d_forward(&geom, n, &cur, self.params[i][0].data(), self.params[i][1].data(), &mut y);
                    let c = if record { keep(&cur, in_shape)? } else { Cache::None };
                    (y, c)
                }
                LayerSpec::BatchNorm { features, eps, .. } => {
                    let inner = cur.len() / (n * features);
                    let m = (n * inner) as f64;
                    let (mean, var) = if train {
                        let mut mean = vec![0.0; features];
                        for (b, blk) in cur.chunks_exact(inner).enumerate() {
                            mean[b % features] += blk.iter().map(|v| v.as_f64()).sum::<f64>();
                        }
                        mean.iter_mut().for_each(|v| *v /= m);
                        let mut var = vec![0.0; features];
                        for (b, blk) in cur.chunks_exact(inner).enumerate() {
                            let c = b % features;
                            var[c] += blk.iter().map(|v| (v.as_f64() - mean[c]).powi(2)).sum::<f64>();
                        }
                        let unbiased: Vec<f64> = var
                            .iter()
                            .map(|v| if m > 1.0 { v / (m - 1.0) } else { *v })
                            .collect();
                        var.iter_mut().for_each(|v| *v /= m);
                        stats[i] = Some((mean.clone(), unbiased));
                        (mean, var)
                    } else {
                        let r = self.running[i].as_ref().expect("batch norm has running stats");
                        (
                            r.mean.iter().map(|v| v.as_f64()).collect(),
                            r.var.iter().map(|v| v.as_f64()).collect(),
                        )
                    };
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
                    let (gamma, beta) = (self.params[i][0].data(), self.params[i][1].data());
                    let mut xhat = vec![T::zero(); cur.len()];
                    let mut y = vec![T::zero(); cur.len()];
                    for (b, ((xb, hb), yb)) in cur
                        .chunks_exact(inner)
                        .zip(xhat.chunks_exact_mut(inner))
                        .zip(y.chunks_exact_mut(inner))
                        .enumerate()
                    {
                        let c = b % features;
                        let (g, bt) = (gamma[c].as_f64(), beta[c].as_f64());
                        for ((xv, h), yv) in xb.iter().zip(hb.iter_mut()).zip(yb.iter_mut()) {
                            let xh = (xv.as_f64() - mean[c]) * inv_std[c];
                            *h = T::from_f64(xh);
                            *yv = T::from_f64(g * xh + bt);
                        }
                    }
                    let c = if record {
                        Cache::BatchNorm { xhat, inv_std, train }
                    } else {
                        Cache::None
                    };
                    (y, c)
                }
                LayerSpec::Dropout { rate } => {
                    if train && rate > 0.0 {
                        let rng = rng
                            .as_deref_mut()
                            .ok_or_else(|| Error::State("train-mode dropout needs an rng".into()))?;
                        let scale = T::from_f64(1.0 / (1.0 - rate));
                        let mask: Vec<T> = (0..cur.len())
                            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { scale })
                            .collect();
                        for (v, m) in cur.iter_mut().zip(&mask) {
                            *v *= *m;
                        }
                        (cur, if record { Cache::Mask(Some(mask)) } else { Cache::None })
                    } else {
                        (cur, if record { Cache::Mask(None) } else { Cache::None })
                    }
                }
                LayerSpec::MaxPool { kernel, stride } => {
                    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
                    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
                    let mut y = Vec::with_capacity(n * out_len);
                    let mut arg = Vec::with_capacity(if record { n * out_len } else { 0 });
                    for plane in 0..n * c {
                        let base = plane * h * w;
                        for oi in 0..oh {
                            for oj in 0..ow {
                                let mut best = base + oi * stride * w + oj * stride;
                                for ki in 0..kernel {
                                    for kj in 0..kernel {
                                        let j = base + (oi * stride + ki) * w + oj * stride + kj;
                                        if cur[j] > cur[best] {
                                            best = j;
                                        }
                                    }
                                }
                                y.push(cur[best]);
                                if record {
                                    arg.push(best);
                                }
                            }
                        }
                    }
                    (y, if record { Cache::Argmax(arg) } else { Cache::None })
                }
                LayerSpec::Flatten => (cur, Cache::None),
                LayerSpec::Activation { kind } => {
                    let k = kernel_for(kind);
                    let mut y = vec![T::zero(); cur.len()];
                    let mut gate = (k.saves_gate() && record).then(|| vec![T::zero(); cur.len()]);
                    if k.saves_gate() && !record {
                        Kernel::new(kind).forward_slice(&cur, &mut y, None)?;
                    } else {
                        k.forward_slice(&cur, &mut y, gate.as_deref_mut())?;
                    }
                    let c = if record {
                        Cache::Activation { input: cur, gate }
                    } else {
                        Cache::None
                    };
                    (y, c)
                }
            };
            cur = next;
            caches.push(cache);
        }
        let mut shape = vec![n];
        shape.extend_from_slice(self.shapes.last().unwrap());
        Ok(Run {
            out: Tensor::from_vec(shape, cur)?,
            caches,
            stats,
        })
    }
}

fn split2<T>(v: &mut [Tensor<T>]) -> (&mut Tensor<T>, &mut Tensor<T>) {
    let (a, b) = v.split_at_mut(1);
    (&mut a[0], &mut b[0])
}
