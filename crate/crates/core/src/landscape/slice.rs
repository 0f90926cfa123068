use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Field2D, GridSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{evaluate, Network, Tensor};

/// Evaluation subset size for loss slices.
pub const SLICE_SUBSET: usize = 2048;

const MAX_REDRAWS: usize = 8;

/// Two filter-normalized directions in parameter space, laid out like
/// [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Directions {
    pub d1: Vec<Vec<Tensor<f64>>>,
    pub d2: Vec<Vec<Tensor<f64>>>,
}

impl Directions {
    /// Gaussian directions where each output neuron or filter (leading-axis
    /// slice of a weight tensor) is rescaled to the norm of the matching
    /// slice of `net`. One-dimensional tensors (biases, batch-norm affine
    /// parameters) get a zero direction.
    pub fn draw(net: &Network<f64>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d1 = Self::one(net, &mut rng)?;
        let d2 = Self::one(net, &mut rng)?;
        Ok(Directions { d1, d2 })
    }

    fn one(net: &Network<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Tensor<f64>>>> {
        let mut out = Vec::with_capacity(net.params().len());
        for layer in net.params() {
            let mut dl = Vec::with_capacity(layer.len());
            for t in layer {
                let mut d = Tensor::zeros(t.shape().to_vec());
                if t.shape().len() > 1 {
                    let row = t.len() / t.shape()[0];
                    for (dr, tr) in d.data_mut().chunks_exact_mut(row).zip(t.data().chunks_exact(row)) {
                        let target = tr.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let mut tries = 0;
                        let norm = loop {
                            dr.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                            let n = dr.iter().map(|v| v * v).sum::<f64>().sqrt();
                            if n > 0.0 {
                                break n;
                            }
                            tries += 1;
                            if tries == MAX_REDRAWS {
                                return Err(Error::Domain("zero-norm direction after redraws".into()));
                            }
                        };
                        dr.iter_mut().for_each(|v| *v *= target / norm);
                    }
                }
                dl.push(d);
            }
            out.push(dl);
        }
        Ok(out)
    }

    /// Multiplies `d1` by `c1` and `d2` by `c2`.
    pub fn scaled(&self, c1: f64, c2: f64) -> Self {
        let scale = |d: &Vec<Vec<Tensor<f64>>>, c: f64| {
            d.iter()
                .map(|l| {
                    l.iter()
                        .map(|t| {
                            let mut t = t.clone();
                            t.data_mut().iter_mut().for_each(|v| *v *= c);
                            t
                        })
                        .collect()
                })
                .collect()
        };
        Directions {
            d1: scale(&self.d1, c1),
            d2: scale(&self.d2, c2),
        }
    }
}

/// Mean eval-mode loss over `subset` at `theta + alpha d1 + beta d2`.
pub fn loss_at(
    net: &Network<f64>,
    dirs: &Directions,
    subset: &Dataset,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let mut moved = net.clone();
    for (l, layer) in moved.params_mut().iter_mut().enumerate() {
        for (t, p) in layer.iter_mut().enumerate() {
            let (a, b) = (dirs.d1[l][t].data(), dirs.d2[l][t].data());
            for (k, v) in p.data_mut().iter_mut().enumerate() {
                *v += alpha * a[k] + beta * b[k];
            }
        }
    }
    Ok(evaluate(&moved, subset)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSlice {
    pub field: Field2D,
    /// Loss at `alpha = beta = 0`, through the same code path as the field.
    pub center_loss: f64,
    /// Indices of the evaluation subset in the source dataset.
    pub subset: Vec<usize>,
}

/// Seeded evaluation subset of at most [`SLICE_SUBSET`] samples, in index
/// order.
pub fn slice_subset(dataset: &Dataset, seed: u64) -> Vec<usize> {
    if dataset.len() <= SLICE_SUBSET {
        return (0..dataset.len()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b5e7);
    let mut idx = sample(&mut rng, dataset.len(), SLICE_SUBSET).into_vec();
    idx.sort_unstable();
    idx
}

/// 2-D slice of the loss surface around `net` along two filter-normalized
/// random directions; grid `x` is the `d1` coefficient and `y` the `d2`
/// coefficient.
pub fn loss_slice(net: &Network<f64>, dataset: &Dataset, seed: u64, grid: GridSpec) -> Result<LossSlice> {
    grid.validate()?;
    if dataset.is_empty() {
        return Err(Error::argument("loss slice needs a nonempty evaluation set"));
    }
    let idx = slice_subset(dataset, seed);
    let subset = dataset.subset(&idx);
    let dirs = Directions::draw(net, seed)?;
    let n = grid.resolution;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            values.push(loss_at(net, &dirs, &subset, grid.x(i), grid.y(j))?);
        }
    }
    Ok(LossSlice {
        field: Field2D::new(grid, values)?,
        center_loss: loss_at(net, &dirs, &subset, 0.0, 0.0)?,
        subset: idx,
    })
}
