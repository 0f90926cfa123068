use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};

/// Adds independent `N(0, sigma^2)` noise to every pixel. Values are not
/// clamped back into `[0, 1]`; clamping would bias the noise.
pub fn corrupt_gaussian(ds: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::argument(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let mut out = ds.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.images_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = (*v as f64 + sigma * z) as f32;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn flat(n: usize) -> Dataset {
        Dataset::new(vec![0.5; n], vec![0; n], [1, 1, 1], 1, Split::Test).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let ds = flat(10);
        assert_eq!(corrupt_gaussian(&ds, 0.0, 1).unwrap(), ds);
    }

    #[test]
    fn rejects_negative_sigma() {
        assert!(corrupt_gaussian(&flat(1), -0.1, 1).is_err());
        assert!(corrupt_gaussian(&flat(1), f64::NAN, 1).is_err());
    }

    #[test]
    fn seeded_and_unclamped() {
        let ds = flat(1000);
        let a = corrupt_gaussian(&ds, 1.0, 9).unwrap();
        assert_eq!(a, corrupt_gaussian(&ds, 1.0, 9).unwrap());
        assert_ne!(a, corrupt_gaussian(&ds, 1.0, 10).unwrap());
        assert!(a.images().iter().any(|&v| !(0.0..=1.0).contains(&v)));
        assert_eq!(a.labels(), ds.labels());
    }
}
