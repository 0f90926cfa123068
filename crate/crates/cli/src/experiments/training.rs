//! Experiments that train networks: `train`, the three sweeps and `stats`.

use std::time::Instant;

use mishbench_core::data::{corrupt_gaussian, load_cifar10_binary, load_mnist_dir};
use mishbench_core::nn::{
    aggregate_runs, build_cnn5, build_cnn6, build_mlp_for, evaluate, train_network, Initializer,
};
use mishbench_core::{ActivationKind, DataSplit, Network, NetworkSpec, RunResult, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::{act_label, mean};
use crate::config::{extend_seeds, DatasetKind, ExperimentConfig, Model, ScaleOptions, TrainingConfig};
use crate::error::{CliError, CliResult};
use crate::output::{metric, OutputDir};

pub(crate) fn load_data(cfg: &ExperimentConfig) -> CliResult<DataSplit> {
    let d = cfg.data();
    let mut split = match d.dataset.unwrap_or(DatasetKind::Mnist) {
        DatasetKind::Mnist => load_mnist_dir(d.mnist_dir.as_ref().expect("resolved"))?,
        DatasetKind::Cifar10 => load_cifar10_binary(d.cifar_dir.as_ref().expect("resolved"))?,
    };
    if let Some(n) = d.train_limit {
        split.train = split.train.take(n);
    }
    if let Some(n) = d.test_limit {
        split.test = split.test.take(n);
    }
    Ok(split)
}

/// Network for one cell. `depth` overrides the configured MLP depth.
pub(crate) fn build_spec(
    t: &TrainingConfig,
    data: &DataSplit,
    activation: ActivationKind,
    depth: Option<usize>,
    initializer: Option<Initializer>,
    seed: u64,
) -> CliResult<NetworkSpec> {
    let [h, w, c] = data.train.shape();
    let classes = data.train.num_classes().max(data.test.num_classes());
    let spec = match t.model.expect("resolved") {
        Model::Mlp => build_mlp_for(
            h * w * c,
            classes,
            depth.or(t.depth).expect("resolved"),
            t.width.expect("resolved"),
            activation,
        )?,
        Model::Cnn5 => build_cnn5(activation, [c, h, w], t.base_channels.expect("resolved"))?,
        Model::Cnn6 => build_cnn6(activation, [c, h, w], t.base_channels.expect("resolved"))?,
    };
    let init = initializer.or(t.initializer).unwrap_or(Initializer::GlorotUniform);
    Ok(spec.with_initializer(init).with_seed(seed))
}

pub(crate) fn train_config(t: &TrainingConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        optimizer: t.optimizer.expect("resolved"),
        batch_size: t.batch_size.expect("resolved"),
        epochs: t.epochs.expect("resolved"),
        seed,
    }
}

/// Runs `f` over every cell on `workers` threads. Each cell is
/// single-threaded and seeded, and results come back in cell order no matter
/// which finishes first.
pub(crate) fn run_cells<C, R, F>(cells: &[C], workers: usize, label: impl Fn(&C) -> String + Sync, f: F) -> CliResult<Vec<R>>
where
    C: Sync,
    R: Send,
    F: Fn(&C) -> CliResult<R> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::config(format!("cannot start {workers} workers: {e}")))?;
    let total = cells.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let start = Instant::now();
                let r = f(c);
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                eprintln!("[{k}/{total}] {} ({:.1}s)", label(c), start.elapsed().as_secs_f64());
                r
            })
            .collect()
    })
}

fn train_one(spec: &NetworkSpec, cfg: &TrainConfig, data: &DataSplit) -> CliResult<(Network<f32>, RunResult)> {
    Ok(train_network::<f32>(spec, cfg, data, |_| {})?)
}

#[derive(Serialize)]
struct GroupMean {
    key: Value,
    activation: String,
    mean_test_acc: Option<f64>,
    mean_test_loss: Option<f64>,
    n_runs: usize,
    n_diverged: usize,
}

fn group_mean(key: Value, activation: ActivationKind, runs: &[&RunResult]) -> GroupMean {
    let ok: Vec<&&RunResult> = runs.iter().filter(|r| !r.diverged).collect();
    let finite = |v: f64| v.is_finite().then_some(v);
    GroupMean {
        key,
        activation: activation.to_string(),
        mean_test_acc: finite(mean(ok.iter().map(|r| r.final_test_acc))),
        mean_test_loss: finite(mean(ok.iter().map(|r| r.final_test_loss))),
        n_runs: runs.len(),
        n_diverged: runs.len() - ok.len(),
    }
}

pub fn run_train(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let data = load_data(cfg)?;
    let t = cfg.training();
    let cells: Vec<(ActivationKind, u64)> = cfg
        .activations()
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let results = run_cells(&cells, cfg.workers(), |(a, s)| format!("train {a} seed {s}"), |&(a, s)| {
        let spec = build_spec(t, &data, a, None, None, s)?;
        train_one(&spec, &train_config(t, s), &data)
    })?;
    let mut rows = Vec::new();
    for ((a, s), (net, run)) in cells.iter().zip(&results) {
        let name = format!("train_{}_{s}", act_label(*a));
        let mut buf = Vec::new();
        run.write_epochs_csv(&mut buf)?;
        out.write_bytes(&format!("{name}.csv"), &buf)?;
        out.write_json(&format!("{name}.ckpt.json"), &net.cast::<f64>())?;
        rows.push(vec![
            a.to_string(),
            s.to_string(),
            metric(run.final_test_acc, run.diverged),
            metric(run.final_test_loss, run.diverged),
            run.per_epoch.len().to_string(),
        ]);
    }
    out.write_csv(
        "train.csv",
        &["activation", "seed", "test_acc", "test_loss", "epochs_completed"],
        rows,
    )?;
    let runs: Vec<Value> = cells
        .iter()
        .zip(&results)
        .map(|((a, s), (_, r))| json!({"activation": a, "seed": s, "run": r}))
        .collect();
    out.write_sidecar("train", cfg, opts, json!({ "runs": runs }))?;
    Ok(())
}

pub fn run_sweep_depth(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let data = load_data(cfg)?;
    let t = cfg.training();
    let depths = cfg.depths.clone().expect("resolved");
    let mut cells = Vec::new();
    for &d in &depths {
        for &a in cfg.activations() {
            for &s in &cfg.seeds {
                cells.push((d, a, s));
            }
        }
    }
    let results = run_cells(
        &cells,
        cfg.workers(),
        |(d, a, s)| format!("depth {d} {a} seed {s}"),
        |&(d, a, s)| {
            let spec = build_spec(t, &data, a, Some(d), None, s)?;
            Ok(train_one(&spec, &train_config(t, s), &data)?.1)
        },
    )?;
    let rows = cells.iter().zip(&results).map(|((d, a, s), r)| {
        vec![
            d.to_string(),
            a.to_string(),
            s.to_string(),
            metric(r.final_test_acc, r.diverged),
            metric(r.final_test_loss, r.diverged),
        ]
    });
    out.write_csv("sweep_depth.csv", &["depth", "activation", "seed", "test_acc", "test_loss"], rows)?;
    let mut means = Vec::new();
    for &d in &depths {
        for &a in cfg.activations() {
            let runs: Vec<&RunResult> = cells
                .iter()
                .zip(&results)
                .filter(|((cd, ca, _), _)| *cd == d && *ca == a)
                .map(|(_, r)| r)
                .collect();
            means.push(group_mean(json!({ "depth": d }), a, &runs));
        }
    }
    out.write_sidecar("sweep_depth", cfg, opts, json!({ "means": means }))?;
    Ok(())
}

pub fn run_sweep_noise(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let data = load_data(cfg)?;
    let t = cfg.training();
    let sigmas = cfg.sigmas.clone().expect("resolved");
    let cells: Vec<(ActivationKind, u64)> = cfg
        .activations()
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    // Noise draws depend only on the seed, so every activation sees the
    // same corrupted test sets.
    let results = run_cells(&cells, cfg.workers(), |(a, s)| format!("noise {a} seed {s}"), |&(a, s)| {
        let spec = build_spec(t, &data, a, None, None, s)?;
        let (net, run) = train_one(&spec, &train_config(t, s), &data)?;
        let mut per_sigma = Vec::with_capacity(sigmas.len());
        for &sigma in &sigmas {
            if run.diverged {
                per_sigma.push((f64::NAN, f64::NAN));
                continue;
            }
            let noisy = corrupt_gaussian(&data.test, sigma, s)?;
            per_sigma.push(evaluate(&net, &noisy)?);
        }
        Ok((run, per_sigma))
    })?;
    let mut rows = Vec::new();
    for ((a, s), (run, per_sigma)) in cells.iter().zip(&results) {
        for (&sigma, &(loss, acc)) in sigmas.iter().zip(per_sigma) {
            rows.push(vec![
                a.to_string(),
                s.to_string(),
                sigma.to_string(),
                metric(loss, run.diverged),
                metric(acc, run.diverged),
            ]);
        }
    }
    out.write_csv("sweep_noise.csv", &["activation", "seed", "sigma", "test_loss", "test_acc"], rows)?;
    let mut means = Vec::new();
    for (k, &sigma) in sigmas.iter().enumerate() {
        for &a in cfg.activations() {
            let vals: Vec<(f64, f64)> = cells
                .iter()
                .zip(&results)
                .filter(|((ca, _), (run, _))| *ca == a && !run.diverged)
                .map(|(_, (_, ps))| ps[k])
                .collect();
            let n_runs = cfg.seeds.len();
            let finite = |v: f64| v.is_finite().then_some(v);
            means.push(json!({
                "sigma": sigma,
                "activation": a,
                "mean_test_loss": finite(mean(vals.iter().map(|v| v.0))),
                "mean_test_acc": finite(mean(vals.iter().map(|v| v.1))),
                "n_runs": n_runs,
                "n_diverged": n_runs - vals.len(),
            }));
        }
    }
    out.write_sidecar("sweep_noise", cfg, opts, json!({ "means": means }))?;
    Ok(())
}

pub fn run_sweep_init(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let data = load_data(cfg)?;
    let t = cfg.training();
    let inits = cfg.initializers.clone().expect("resolved");
    let mut cells = Vec::new();
    for &i in &inits {
        for &a in cfg.activations() {
            for &s in &cfg.seeds {
                cells.push((i, a, s));
            }
        }
    }
    let results = run_cells(
        &cells,
        cfg.workers(),
        |(i, a, s)| format!("init {i} {a} seed {s}"),
        |&(i, a, s)| {
            let spec = build_spec(t, &data, a, None, Some(i), s)?;
            Ok(train_one(&spec, &train_config(t, s), &data)?.1)
        },
    )?;
    let rows = cells.iter().zip(&results).map(|((i, a, s), r)| {
        vec![
            i.to_string(),
            a.to_string(),
            s.to_string(),
            metric(r.final_test_acc, r.diverged),
            metric(r.final_test_loss, r.diverged),
        ]
    });
    out.write_csv("sweep_init.csv", &["initializer", "activation", "seed", "test_acc", "test_loss"], rows)?;
    let mut means = Vec::new();
    for &i in &inits {
        for &a in cfg.activations() {
            let runs: Vec<&RunResult> = cells
                .iter()
                .zip(&results)
                .filter(|((ci, ca, _), _)| *ci == i && *ca == a)
                .map(|(_, r)| r)
                .collect();
            means.push(group_mean(json!({ "initializer": i }), a, &runs));
        }
    }
    out.write_sidecar("sweep_init", cfg, opts, json!({ "means": means }))?;
    Ok(())
}

/// Column names of the summary table.
pub const STATS_HEADER: [&str; 4] = ["activation", "mu_acc", "mu_loss", "sigma_acc"];

pub fn run_stats(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let data = load_data(cfg)?;
    let t = cfg.training();
    let seeds = extend_seeds(&cfg.seeds, cfg.n_runs.expect("resolved"));
    let cells: Vec<(ActivationKind, u64)> = cfg
        .activations()
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let results = run_cells(&cells, cfg.workers(), |(a, s)| format!("stats {a} seed {s}"), |&(a, s)| {
        let spec = build_spec(t, &data, a, None, None, s)?;
        Ok(train_one(&spec, &train_config(t, s), &data)?.1)
    })?;
    let run_rows = cells.iter().zip(&results).map(|((a, s), r)| {
        vec![
            a.to_string(),
            s.to_string(),
            metric(r.final_test_acc, r.diverged),
            metric(r.final_test_loss, r.diverged),
        ]
    });
    out.write_csv("stats_runs.csv", &["activation", "seed", "test_acc", "test_loss"], run_rows)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &a in cfg.activations() {
        let runs: Vec<RunResult> = cells
            .iter()
            .zip(&results)
            .filter(|((ca, _), _)| *ca == a)
            .map(|(_, r)| r.clone())
            .collect();
        let n_diverged = runs.iter().filter(|r| r.diverged).count();
        if n_diverged > 0 {
            rows.push(vec![a.to_string(), metric(0.0, true), metric(0.0, true), metric(0.0, true)]);
            summaries.push(json!({"activation": a, "summary": null, "n_diverged": n_diverged}));
            continue;
        }
        let s = aggregate_runs(&runs)?;
        // accuracies in percent, as in the reference table
        rows.push(vec![
            a.to_string(),
            (100.0 * s.mean_acc).to_string(),
            s.mean_loss.to_string(),
            (100.0 * s.std_acc).to_string(),
        ]);
        summaries.push(json!({"activation": a, "summary": s, "n_diverged": 0}));
    }
    out.write_csv("stats.csv", &STATS_HEADER, rows)?;
    out.write_sidecar("stats", cfg, opts, json!({ "run_seeds": seeds, "summaries": summaries }))?;
    Ok(())
}
