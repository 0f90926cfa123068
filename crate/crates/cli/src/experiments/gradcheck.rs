//! The `gradcheck` experiment: scalar identities, finite-difference
//! conformance, stability, kernel agreement and whole-network gradients.

use mishbench_core::activation::{
    mish_grad_decomposed, mish_grad_rational, minimum_of, softplus, SOFTPLUS_THRESHOLD,
};
use mishbench_core::data::synth_blobs;
use mishbench_core::kernels::Kernel;
use mishbench_core::landscape::{loss_slice, slice_subset};
use mishbench_core::nn::{build_cnn6, build_mlp_for, evaluate, gradcheck, Mode, Tensor, GRADCHECK_STEP};
use mishbench_core::{ActivationKind, Buffer, GridSpec, Network, Precision, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, ScaleOptions};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Finite-difference step and tolerance for the scalar derivative check.
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-6;
pub const NETWORK_TOLERANCE: f64 = 1e-5;

/// Offset added by the injected wrong-derivative stub.
const FAULT: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    fn new(name: &str, kind: Option<ActivationKind>, max_error: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            kind: kind.map(|k| k.to_string()),
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }

    /// Check without an activation kind.
    pub fn named(name: &str, max_error: f64, tolerance: f64) -> Self {
        Self::new(name, None, max_error, tolerance)
    }

    fn label(&self) -> String {
        match &self.kind {
            Some(k) => format!("{}[{k}]", self.name),
            None => self.name.clone(),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn fd_conformance(kind: ActivationKind, grad: impl Fn(f64) -> f64) -> f64 {
    let kinks = kind.kinks();
    linspace(-6.0, 6.0, 1201)
        .filter(|x| kinks.iter().all(|c| (x - c).abs() > 2.0 * FD_STEP))
        .map(|x| {
            let fd = (kind.eval(x + FD_STEP) - kind.eval(x - FD_STEP)) / (2.0 * FD_STEP);
            (grad(x) - fd).abs()
        })
        .fold(0.0, f64::max)
}

/// 1 when any single-precision kernel output on `[-1e4, 1e4]` is not finite.
fn single_precision_blowups(kind: ActivationKind) -> f64 {
    let xs: Vec<f64> = linspace(-1e4, 1e4, 20_001).collect();
    let x = Buffer::from_f64(Precision::Single, &xs);
    let ones = Buffer::from_f64(Precision::Single, &vec![1.0; xs.len()]);
    let mut y = Buffer::zeros(Precision::Single, xs.len());
    let mut g = Buffer::zeros(Precision::Single, xs.len());
    let k = Kernel::new(kind);
    let bad = match k.forward(&x, &mut y).and_then(|c| k.backward(&c, &ones, &mut g)) {
        Ok(()) => y.to_f64_vec().iter().chain(&g.to_f64_vec()).any(|v| !v.is_finite()),
        Err(_) => true,
    };
    f64::from(u8::from(bad))
}

fn kernel_agreement(precision: Precision, seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let us: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let run = |variant| -> CliResult<Vec<f64>> {
        let k = Kernel::new(ActivationKind::Mish).variant(variant);
        let x = Buffer::from_f64(precision, &xs);
        let u = Buffer::from_f64(precision, &us);
        let mut y = Buffer::zeros(precision, n);
        let mut g = Buffer::zeros(precision, n);
        let cache = k.forward(&x, &mut y)?;
        k.backward(&cache, &u, &mut g)?;
        Ok(g.to_f64_vec())
    };
    let (a, b) = (run(Variant::Naive)?, run(Variant::Fused)?);
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
}

fn network_checks(kind: ActivationKind, seed: u64, out: &mut Vec<CheckRecord>) -> CliResult<()> {
    let spec = build_mlp_for(6, 3, 2, 8, kind)?.with_seed(seed);
    let net = Network::<f64>::new(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_vec(vec![8, 6], (0..48).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();
    for (mode, name) in [(Mode::Train, "network_gradcheck_train"), (Mode::Eval, "network_gradcheck_eval")] {
        let r = gradcheck(&net, &x, &labels, mode, GRADCHECK_STEP)?;
        out.push(CheckRecord::new(name, Some(kind), r.max_rel_error, NETWORK_TOLERANCE));
    }
    Ok(())
}

fn cnn_check(seed: u64) -> CliResult<CheckRecord> {
    let spec = build_cnn6(ActivationKind::Mish, [1, 8, 8], 2)?.with_seed(seed);
    let net = Network::<f64>::new(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let x = Tensor::from_vec(vec![2, 1, 8, 8], (0..128).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    // pooling is piecewise, so a narrow stencil keeps argmaxes fixed
    let r = gradcheck(&net, &x, &[3, 7], Mode::Train, 1e-5)?;
    Ok(CheckRecord::new("cnn6_gradcheck", Some(ActivationKind::Mish), r.max_rel_error, 1e-4))
}

fn slice_center(seed: u64) -> CliResult<CheckRecord> {
    let data = synth_blobs(20, 3, 4, 0.3, seed)?;
    let net = Network::<f64>::new(&build_mlp_for(4, 3, 1, 8, ActivationKind::Mish)?.with_seed(seed))?;
    let s = loss_slice(&net, &data, seed, GridSpec::square(1.0, 3)?)?;
    let base = evaluate(&net, &data.subset(&slice_subset(&data, seed)))?.0;
    Ok(CheckRecord::new("loss_slice_center", None, (s.center_loss - base).abs(), 1e-9))
}

pub fn run_gradcheck(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let params = cfg.gradcheck.clone().unwrap_or_default();
    let fault = params.inject_fault;
    let seed = cfg.seeds[0];
    let mut checks = Vec::new();

    let g0 = ActivationKind::Mish.grad(0.0);
    checks.push(CheckRecord::new("mish_grad_at_zero", None, (g0 - 0.6).abs(), 1e-12));

    let gap = linspace(-20.0, 20.0, 10_001)
        .map(|x| (mish_grad_rational(x) - mish_grad_decomposed(x).total).abs())
        .fold(0.0, f64::max);
    checks.push(CheckRecord::new("derivative_identity", None, gap, 1e-9));

    for &kind in cfg.activations() {
        let err = if fault == Some(kind) {
            fd_conformance(kind, |x| kind.grad(x) + FAULT)
        } else {
            fd_conformance(kind, |x| kind.grad(x))
        };
        checks.push(CheckRecord::new("fd_conformance", Some(kind), err, FD_TOLERANCE));
    }

    let (x_min, f_min) = minimum_of(ActivationKind::Mish)?;
    let outside = |v: f64, lo: f64, hi: f64| if (lo..=hi).contains(&v) { 0.0 } else { (v - lo).abs().min((v - hi).abs()) };
    checks.push(CheckRecord::new("mish_min_location", None, outside(x_min, -1.1930, -1.1918), 0.0));
    checks.push(CheckRecord::new("mish_min_value", None, outside(f_min, -0.3095, -0.3080), 0.0));

    checks.push(CheckRecord::new(
        "mish_large_input",
        None,
        (ActivationKind::Mish.eval(1000.0) - 1000.0).abs() / 1000.0,
        1e-6,
    ));
    let above = [SOFTPLUS_THRESHOLD, 25.0, 1e4]
        .iter()
        .map(|&x| (softplus(x) - x).abs())
        .fold(0.0, f64::max);
    checks.push(CheckRecord::new("softplus_threshold", None, above, 0.0));
    for &kind in cfg.activations() {
        checks.push(CheckRecord::new("single_precision_finite", Some(kind), single_precision_blowups(kind), 0.0));
    }

    checks.push(CheckRecord::new("fused_vs_naive_single", None, kernel_agreement(Precision::Single, seed)?, 1e-6));
    checks.push(CheckRecord::new("fused_vs_naive_double", None, kernel_agreement(Precision::Double, seed)?, 1e-12));

    for &kind in params.network_kinds.as_deref().unwrap_or(&[]) {
        network_checks(kind, seed, &mut checks)?;
    }
    checks.push(cnn_check(seed)?);
    checks.push(slice_center(seed)?);

    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(CheckRecord::label).collect();
    let passed = failed.is_empty();
    out.write_sidecar(
        "gradcheck",
        cfg,
        opts,
        json!({ "passed": passed, "failed": failed, "checks": checks }),
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check(format!("failing checks: {}", failed.join(", "))))
    }
}
