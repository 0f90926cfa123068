//! The `bench` experiment: the kernel speed profile, its ordering checks and
//! a rerun-stability check.

use std::time::Instant;

use mishbench_core::kernels::{speed_profile, write_profile_csv};
use mishbench_core::{ActivationKind, BenchReport, Pass, Precision, Variant};
use serde_json::json;

use super::gradcheck::CheckRecord;
use crate::config::{ExperimentConfig, ScaleOptions};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Fused Mish backward must take at most this fraction of the naive time.
pub const FUSED_BACKWARD_RATIO: f64 = 0.8;

fn find(reports: &[BenchReport], kind: ActivationKind, variant: Variant, pass: Pass) -> f64 {
    reports
        .iter()
        .find(|r| r.kind == kind && r.variant == variant && r.pass == pass && r.precision == Precision::Single)
        .map_or(f64::NAN, |r| r.mean_ns)
}

/// Single-precision ordering checks on one profile. Errors are ratios:
/// `relu / mish` for the forward pass (must stay below 1) and
/// `fused / naive` for the backward pass.
pub fn ordering_checks(reports: &[BenchReport]) -> Vec<CheckRecord> {
    let relu = find(reports, ActivationKind::Relu, Variant::Naive, Pass::Forward);
    let mish = find(reports, ActivationKind::Mish, Variant::Naive, Pass::Forward);
    let naive = find(reports, ActivationKind::Mish, Variant::Naive, Pass::Backward);
    let fused = find(reports, ActivationKind::Mish, Variant::Fused, Pass::Backward);
    let fwd = relu / mish;
    let mut c1 = CheckRecord::named("relu_forward_faster_than_mish", fwd, 1.0);
    c1.passed = fwd < 1.0;
    vec![c1, CheckRecord::named("fused_backward_ratio", fused / naive, FUSED_BACKWARD_RATIO)]
}

pub fn run_bench(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let b = cfg.bench.clone().expect("resolved");
    let (len, n_total, warmup, workers) = (
        b.buffer_len.expect("resolved"),
        b.n_total.expect("resolved"),
        b.warmup.expect("resolved"),
        b.workers.expect("resolved"),
    );
    let mut profiles = Vec::new();
    let mut seconds = Vec::new();
    for k in 0..b.repeats.expect("resolved") {
        let start = Instant::now();
        let reports = speed_profile(len, n_total, warmup, workers)?;
        seconds.push(start.elapsed().as_secs_f64());
        let name = if k == 0 { "bench.csv".to_string() } else { format!("bench_rerun{k}.csv") };
        let mut buf = Vec::new();
        write_profile_csv(&reports, &mut buf).map_err(|e| CliError::io(out.path(&name), std::io::Error::other(e)))?;
        out.write_bytes(&name, &buf)?;
        profiles.push(reports);
    }

    let mut checks = ordering_checks(&profiles[0]);
    if profiles.len() > 1 {
        let tol = b.max_rerun_change.expect("resolved");
        let change = profiles[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&profiles[0]).map(|(r, r0)| (r.mean_ns - r0.mean_ns).abs() / r0.mean_ns))
            .fold(0.0, f64::max);
        checks.push(CheckRecord::named("rerun_max_relative_change", change, tol));
    }
    let warnings: Vec<String> = profiles[0]
        .iter()
        .filter(|r| r.timer_warning)
        .map(|r| format!("{} {} {} {}", r.kind, r.variant, r.pass, r.precision))
        .collect();
    for w in &warnings {
        eprintln!("warning: timer resolution exceeds 1% of the mean for {w}");
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    out.write_sidecar(
        "bench",
        cfg,
        opts,
        json!({
            "passed": failed.is_empty(),
            "failed": failed,
            "checks": checks,
            "profile_seconds": seconds,
            "timer_warnings": warnings,
            "reports": profiles,
        }),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("failing checks: {}", failed.join(", "))))
    }
}
