use std::path::Path;

use mishbench_core::data::{corrupt_gaussian, load_mnist_dir, synth_blobs};
use mishbench_core::{Dataset, Split};

fn mnist_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist-5k"))
}

#[test]
fn vendored_mnist_subset_loads() {
    let d = load_mnist_dir(mnist_dir()).unwrap();
    assert_eq!((d.train.len(), d.test.len()), (4000, 1000));
    assert_eq!(d.train.shape(), [28, 28, 1]);
    assert_eq!(d.train.num_classes(), 10);
    assert_eq!(d.test.split(), Split::Test);
    let (lo, hi) = d.train.images().iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo >= 0.0 && hi <= 1.0 && hi > 0.9);
    let mut seen = [false; 10];
    d.test.labels().iter().for_each(|&l| seen[l as usize] = true);
    assert!(seen.iter().all(|&s| s));
}

fn flat(n: usize, v: f32) -> Dataset {
    Dataset::new(vec![v; n], vec![0; n], [1, 1, 1], 1, Split::Test).unwrap()
}

#[test]
fn noise_has_requested_moments() {
    let clean = flat(200_000, 0.25);
    let noisy = corrupt_gaussian(&clean, 0.5, 7).unwrap();
    let d: Vec<f64> = noisy.images().iter().map(|&v| v as f64 - 0.25).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
    assert!(mean.abs() < 0.005, "{mean}");
    assert!((var.sqrt() - 0.5).abs() < 0.005, "{}", var.sqrt());
    // not clamped
    assert!(noisy.images().iter().any(|&v| v < 0.0) && noisy.images().iter().any(|&v| v > 1.0));
}

#[test]
fn noise_is_seeded_and_grows_with_sigma() {
    let clean = flat(20_000, 0.5);
    assert_eq!(corrupt_gaussian(&clean, 0.3, 1).unwrap(), corrupt_gaussian(&clean, 0.3, 1).unwrap());
    assert_ne!(corrupt_gaussian(&clean, 0.3, 1).unwrap(), corrupt_gaussian(&clean, 0.3, 2).unwrap());
    let mut last = 0.0;
    for sigma in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let n = corrupt_gaussian(&clean, sigma, 3).unwrap();
        let ms = n.images().iter().map(|&v| (v as f64 - 0.5).powi(2)).sum::<f64>() / 20_000.0;
        assert!(sigma == 0.0 || ms > last);
        last = ms;
    }
    assert!(corrupt_gaussian(&clean, -0.1, 0).is_err());
    assert!(corrupt_gaussian(&clean, f64::NAN, 0).is_err());
}

#[test]
fn blobs_are_balanced_and_deterministic() {
    let a = synth_blobs(30, 3, 5, 0.2, 9).unwrap();
    assert_eq!(a, synth_blobs(30, 3, 5, 0.2, 9).unwrap());
    assert_eq!(a.len(), 90);
    for c in 0..3u8 {
        assert_eq!(a.labels().iter().filter(|&&l| l == c).count(), 30);
    }
    let split = a.train_test_split(30).unwrap();
    assert_eq!((split.train.len(), split.test.len()), (60, 30));
}
