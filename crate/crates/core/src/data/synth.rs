use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Split};
use crate::error::{Error, Result};

/// Isotropic Gaussian blobs around class centers drawn uniformly from
/// `[0, 1]^dim`. Samples are interleaved by class (sample `i` has label
/// `i % num_classes`), so every prefix is close to balanced.
///
/// Images have shape `[1, dim, 1]`.
pub fn synth_blobs(
    n_per_class: usize,
    num_classes: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || num_classes == 0 || dim == 0 {
        return Err(Error::argument("synth_blobs counts must all be >= 1"));
    }
    if num_classes > 256 {
        return Err(Error::argument("at most 256 classes"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::argument(format!("spread must be finite and >= 0, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..num_classes * dim).map(|_| rng.random::<f64>()).collect();
    let n = n_per_class * num_classes;
    let mut images = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % num_classes;
        labels.push(c as u8);
        for d in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            images.push((centers[c * dim + d] + spread * z) as f32);
        }
    }
    Dataset::new(images, labels, [1, dim, 1], num_classes, Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_collapses_to_centers() {
        let ds = synth_blobs(4, 3, 5, 0.0, 1).unwrap();
        assert_eq!(ds.len(), 12);
        for i in 3..12 {
            assert_eq!(ds.image(i), ds.image(i % 3));
        }
        assert_ne!(ds.image(0), ds.image(1));
    }

    #[test]
    fn deterministic_and_validated() {
        assert_eq!(synth_blobs(3, 2, 2, 0.1, 4).unwrap(), synth_blobs(3, 2, 2, 0.1, 4).unwrap());
        assert!(synth_blobs(0, 2, 2, 0.1, 4).is_err());
        assert!(synth_blobs(1, 2, 2, -1.0, 4).is_err());
    }
}
