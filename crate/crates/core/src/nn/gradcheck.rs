use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loss::softmax_cross_entropy;
use super::{Mode, Network, Tensor};
use crate::error::Result;

/// Result of comparing backpropagated gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    /// `max |a - n| / max(|a|, |n|, floor)` over all parameters.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index (in parameter order) of the worst relative error.
    pub worst_index: usize,
}

/// Step used by [`gradcheck`] callers unless they need something else.
/// The fourth-order stencil keeps truncation error near `h^4`, so a
/// larger step than the usual `1e-5` cuts rounding noise without losing
/// accuracy.
pub const GRADCHECK_STEP: f64 = 1e-3;
/// Denominator floor for the relative error; keeps parameters whose true
/// gradient is ~0 from dividing rounding noise by ~0.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

fn loss_at(net: &mut Network<f64>, x: &Tensor<f64>, labels: &[usize], mode: Mode, seed: u64) -> Result<f64> {
    // Same seed on every call, so train-mode dropout draws the same mask.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (logits, _) = net.forward(x, mode, &mut rng)?;
    Ok(softmax_cross_entropy(&logits, labels)?.0)
}

/// Checks every parameter gradient of mean cross-entropy against the
/// fourth-order central difference
/// `(-L(p+2h) + 8 L(p+h) - 8 L(p-h) + L(p-2h)) / 12h`.
pub fn gradcheck(
    net: &Network<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    mode: Mode,
    h: f64,
) -> Result<GradCheckReport> {
    let seed = 0x6c0c;
    let mut work = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, tape) = work.forward(x, mode, &mut rng)?;
    let (_, grads) = work.backward(&tape, labels)?;
    let analytic = grads.flatten_f64();

    let shape: Vec<(usize, usize, usize)> = work
        .params()
        .iter()
        .enumerate()
        .flat_map(|(l, ts)| ts.iter().enumerate().map(move |(t, tn)| (l, t, tn.len())))
        .collect();
    let (mut max_rel, mut max_abs, mut worst, mut flat) = (0.0f64, 0.0f64, 0, 0);
    for (l, t, len) in shape {
        for i in 0..len {
            let orig = work.params()[l][t].data()[i];
            let mut at = |d: f64| -> Result<f64> {
                work.params_mut()[l][t].data_mut()[i] = orig + d;
                loss_at(&mut work, x, labels, mode, seed)
            };
            let numeric = (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
            work.params_mut()[l][t].data_mut()[i] = orig;
            let a = analytic[flat];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            if rel > max_rel || rel.is_nan() {
                max_rel = rel;
                worst = flat;
            }
            max_abs = max_abs.max(abs);
            flat += 1;
        }
    }
    Ok(GradCheckReport {
        n_params: flat,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        worst_index: worst,
    })
}
