//! Microbenchmark harness for the elementwise kernels.
//!
//! Each configuration runs `warmup` untimed passes and then `n_total` timed
//! passes over a seeded random buffer. Samples outside
//! `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]` are discarded before the mean and standard
//! deviation are computed.

use std::hint::black_box;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Buffer, Kernel, Pass, Precision, Variant};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};

pub const PROFILE_CSV_HEADER: [&str; 10] = [
    "kind",
    "variant",
    "pass",
    "precision",
    "buffer_len",
    "n_total",
    "n_kept",
    "mean_ns",
    "std_ns",
    "workers",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub kind: ActivationKind,
    pub variant: Variant,
    pub pass: Pass,
    pub precision: Precision,
    pub buffer_len: usize,
    pub n_total: usize,
    pub warmup: usize,
    pub workers: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(kind: ActivationKind, variant: Variant, pass: Pass, precision: Precision) -> Self {
        BenchConfig {
            kind,
            variant,
            pass,
            precision,
            buffer_len: 1 << 20,
            n_total: 100,
            warmup: 10,
            workers: 1,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub kind: ActivationKind,
    pub variant: Variant,
    pub pass: Pass,
    pub precision: Precision,
    pub n_total: usize,
    pub n_kept: usize,
    pub warmup: usize,
    pub mean_ns: f64,
    pub std_ns: f64,
    pub buffer_len: usize,
    pub workers: usize,
    /// Set when the clock resolution exceeds 1% of the measured mean.
    pub timer_warning: bool,
}

/// Statistics of a timing sample after outlier removal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n_total: usize,
    pub n_kept: usize,
    pub mean: f64,
    pub std: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Applies the 1.5 IQR rule and summarizes the survivors (sample standard
/// deviation, n - 1 denominator).
pub fn summarize_samples(samples: &[f64]) -> Result<SampleSummary> {
    if samples.is_empty() {
        return Err(Error::argument("no samples"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::argument("non-finite timing sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let kept: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&s| s >= lo && s <= hi)
        .collect();
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let std = if kept.len() > 1 {
        (kept.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SampleSummary {
        n_total: samples.len(),
        n_kept: kept.len(),
        mean,
        std,
    })
}

/// Smallest observable nonzero step of the monotonic clock.
fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..64 {
        let start = Instant::now();
        let mut now = Instant::now();
        while now == start {
            now = Instant::now();
        }
        best = best.min(now - start);
    }
    best
}

fn random_buffer(precision: Precision, len: usize, seed: u64) -> Buffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..len).map(|_| rng.random_range(-8.0..8.0)).collect();
    Buffer::from_f64(precision, &values)
}

fn checksum(b: &Buffer) -> f64 {
    match b {
        Buffer::Single(v) => v[0] as f64 + v[v.len() / 2] as f64 + v[v.len() - 1] as f64,
        Buffer::Double(v) => v[0] + v[v.len() / 2] + v[v.len() - 1],
    }
}

/// Times one kernel configuration.
pub fn benchmark_op(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.buffer_len == 0 {
        return Err(Error::argument("buffer_len must be >= 1"));
    }
    if cfg.n_total < 10 {
        return Err(Error::argument(format!(
            "n_total must be >= 10, got {}",
            cfg.n_total
        )));
    }
    let kernel = Kernel::new(cfg.kind)
        .variant(cfg.variant)
        .workers(cfg.workers);
    let input = random_buffer(cfg.precision, cfg.buffer_len, cfg.seed);
    let upstream = random_buffer(cfg.precision, cfg.buffer_len, cfg.seed ^ 0x9e37_79b9);
    let mut output = Buffer::zeros(cfg.precision, cfg.buffer_len);
    let cache = kernel.forward(&input, &mut output)?;

    let mut sink = 0.0;
    let mut run_once = |output: &mut Buffer| -> Result<()> {
        match cfg.pass {
            Pass::Forward => {
                kernel.forward(black_box(&input), output)?;
            }
            Pass::Backward => kernel.backward(black_box(&cache), &upstream, output)?,
        }
        sink += checksum(output);
        Ok(())
    };

    for _ in 0..cfg.warmup {
        run_once(&mut output)?;
    }
    let mut samples = Vec::with_capacity(cfg.n_total);
    for _ in 0..cfg.n_total {
        let start = Instant::now();
        run_once(&mut output)?;
        samples.push(start.elapsed().as_nanos() as f64);
    }
    black_box(sink);

    let summary = summarize_samples(&samples)?;
    let resolution = timer_resolution().as_nanos() as f64;
    Ok(BenchReport {
        kind: cfg.kind,
        variant: cfg.variant,
        pass: cfg.pass,
        precision: cfg.precision,
        n_total: summary.n_total,
        n_kept: summary.n_kept,
        warmup: cfg.warmup,
        mean_ns: summary.mean,
        std_ns: summary.std,
        buffer_len: cfg.buffer_len,
        workers: kernel.workers,
        timer_warning: resolution > 0.01 * summary.mean,
    })
}

/// ReLU, SoftPlus, naive Mish and fused Mish, each for forward and backward
/// in both precisions: sixteen reports in a fixed order.
pub fn speed_profile(
    buffer_len: usize,
    n_total: usize,
    warmup: usize,
    workers: usize,
) -> Result<Vec<BenchReport>> {
    let rows = [
        (ActivationKind::Relu, Variant::Naive),
        (ActivationKind::Softplus, Variant::Naive),
        (ActivationKind::Mish, Variant::Naive),
        (ActivationKind::Mish, Variant::Fused),
    ];
    let mut reports = Vec::with_capacity(16);
    for precision in [Precision::Single, Precision::Double] {
        for (kind, variant) in rows {
            for pass in [Pass::Forward, Pass::Backward] {
                let cfg = BenchConfig {
                    buffer_len,
                    n_total,
                    warmup,
                    workers,
                    ..BenchConfig::new(kind, variant, pass, precision)
                };
                reports.push(benchmark_op(&cfg)?);
            }
        }
    }
    Ok(reports)
}

/// Writes reports as RFC 4180 CSV with [`PROFILE_CSV_HEADER`].
pub fn write_profile_csv<W: Write>(reports: &[BenchReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROFILE_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.kind.to_string(),
            r.variant.to_string(),
            r.pass.to_string(),
            r.precision.to_string(),
            r.buffer_len.to_string(),
            r.n_total.to_string(),
            r.n_kept.to_string(),
            format!("{:.1}", r.mean_ns),
            format!("{:.1}", r.std_ns),
            r.workers.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_keep_everything() {
        let s = summarize_samples(&[5.0; 100]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.n_kept, 100);
    }

    #[test]
    fn single_outlier_is_discarded() {
        let mut samples = vec![1.0; 10];
        samples.push(100.0);
        let s = summarize_samples(&samples).unwrap();
        assert_eq!(s.n_total, 11);
        assert_eq!(s.n_kept, 10);
        assert_eq!(s.mean, 1.0);
    }

    #[test]
    fn iqr_fences_by_hand() {
        // sorted 1..=9 plus 40: Q1 = 3.25, Q3 = 7.75, fences [-3.5, 14.5]
        let mut samples: Vec<f64> = (1..=9).map(f64::from).collect();
        samples.push(40.0);
        let s = summarize_samples(&samples).unwrap();
        assert_eq!(s.n_kept, 9);
        assert_eq!(s.mean, 5.0);
        assert!((s.std - 7.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = BenchConfig::new(
            ActivationKind::Relu,
            Variant::Naive,
            Pass::Forward,
            Precision::Single,
        );
        cfg.n_total = 5;
        assert!(benchmark_op(&cfg).is_err());
        cfg.n_total = 10;
        cfg.buffer_len = 0;
        assert!(benchmark_op(&cfg).is_err());
        assert!(summarize_samples(&[]).is_err());
    }

    #[test]
    fn non_timing_fields_are_deterministic() {
        let mut cfg = BenchConfig::new(
            ActivationKind::Mish,
            Variant::Fused,
            Pass::Backward,
            Precision::Double,
        );
        cfg.buffer_len = 1024;
        cfg.n_total = 20;
        cfg.warmup = 3;
        let a = benchmark_op(&cfg).unwrap();
        let b = benchmark_op(&cfg).unwrap();
        assert_eq!(
            (a.n_total, a.warmup, a.buffer_len, a.workers),
            (b.n_total, b.warmup, b.buffer_len, b.workers)
        );
        assert!(a.mean_ns > 0.0 && a.n_kept <= a.n_total);
        assert_eq!(
            random_buffer(Precision::Single, 64, 7),
            random_buffer(Precision::Single, 64, 7)
        );
    }

    #[test]
    fn profile_csv_layout() {
        let reports = speed_profile(256, 10, 1, 1).unwrap();
        assert_eq!(reports.len(), 16);
        let mut out = Vec::new();
        write_profile_csv(&reports, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "kind,variant,pass,precision,buffer_len,n_total,n_kept,mean_ns,std_ns,workers"
        );
        assert_eq!(lines.count(), 16);
    }
}
