//! Experiment configuration: strict JSON parsing and default resolution.
//!
//! Every optional field is filled in by [`ExperimentConfig::resolve`]. The
//! resolved config is what gets written next to the outputs, and feeding it
//! back in (with no seed offset) replays the run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mishbench_core::nn::{Initializer, OptimizerConfig};
use mishbench_core::{ActivationKind, GridSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Gradcheck,
    Bench,
    Landscape,
    Train,
    SweepDepth,
    SweepNoise,
    SweepInit,
    Stats,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Gradcheck => "gradcheck",
            Experiment::Bench => "bench",
            Experiment::Landscape => "landscape",
            Experiment::Train => "train",
            Experiment::SweepDepth => "sweep-depth",
            Experiment::SweepNoise => "sweep-noise",
            Experiment::SweepInit => "sweep-init",
            Experiment::Stats => "stats",
        }
    }

    /// File stem used for this experiment's outputs.
    pub fn stem(&self) -> String {
        self.name().replace('-', "_")
    }

    fn trains(&self) -> bool {
        matches!(
            self,
            Experiment::Train
                | Experiment::SweepDepth
                | Experiment::SweepNoise
                | Experiment::SweepInit
                | Experiment::Stats
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Dense/BatchNorm/activation/Dropout blocks.
    Mlp,
    /// Three conv+pool stages and a dense head.
    Cnn5,
    /// Six convolutions in three pooled stages and a dense head.
    Cnn6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mnist,
    Cifar10,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetKind>,
    /// Directory with the four MNIST IDX files (optionally gzipped).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_dir: Option<PathBuf>,
    /// Directory with the CIFAR-10 binary batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cifar_dir: Option<PathBuf>,
    /// Keep only the first `n` training samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    /// Hidden blocks of the MLP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Hidden width of the MLP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    /// First-stage channel count of the CNNs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initializer: Option<Initializer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_total: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Number of back-to-back profiles; the second one is compared with the
    /// first for stability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    /// Largest accepted relative change of a mean between repeats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rerun_change: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceParams {
    /// Network checkpoint written by the `train` experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    /// Seeds used for the roughness comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roughness_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_slice: Option<SliceParams>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckParams {
    /// Kinds whose whole-network gradient is checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network_kinds: Option<Vec<ActivationKind>>,
    /// Test hook: replaces this kind's derivative with a wrong stub in the
    /// finite-difference check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_fault: Option<ActivationKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<Vec<ActivationKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Concurrent training cells; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initializers: Option<Vec<Initializer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckParams>,
}

/// Default MNIST location, relative to the working directory.
pub const DEFAULT_MNIST_DIR: &str = "data/mnist-5k";

/// Command-line modifiers applied on top of a config file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScaleOptions {
    pub paper_scale: bool,
    pub seed_offset: u64,
}

fn pick<T>(desk: T, paper: T, opts: ScaleOptions) -> T {
    if opts.paper_scale {
        paper
    } else {
        desk
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::config(format!("{}: no such config file", path.display())),
            _ => CliError::io(path, e),
        })?;
        Self::from_json(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), strip(e))))
    }

    fn present_blocks(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut add = |on: bool, name| {
            if on {
                v.push(name)
            }
        };
        add(self.data.is_some(), "data");
        add(self.training.is_some(), "training");
        add(self.depths.is_some(), "depths");
        add(self.sigmas.is_some(), "sigmas");
        add(self.initializers.is_some(), "initializers");
        add(self.n_runs.is_some(), "n_runs");
        add(self.bench.is_some(), "bench");
        add(self.landscape.is_some(), "landscape");
        add(self.gradcheck.is_some(), "gradcheck");
        add(self.workers.is_some(), "workers");
        v
    }

    fn allowed_blocks(&self) -> &'static [&'static str] {
        match self.experiment {
            Experiment::Gradcheck => &["gradcheck"],
            Experiment::Bench => &["bench"],
            Experiment::Landscape => &["landscape", "data"],
            Experiment::Train => &["data", "training", "workers"],
            Experiment::SweepDepth => &["data", "training", "depths", "workers"],
            Experiment::SweepNoise => &["data", "training", "sigmas", "workers"],
            Experiment::SweepInit => &["data", "training", "initializers", "workers"],
            Experiment::Stats => &["data", "training", "n_runs", "workers"],
        }
    }

    /// Validates the config and fills every default. `paper_scale` switches
    /// the defaults (explicit values always win); `seed_offset` is added to
    /// every seed.
    pub fn resolve(&self, opts: ScaleOptions) -> CliResult<ExperimentConfig> {
        let bad = |m: String| Err(CliError::config(m));
        if self.seeds.is_empty() {
            return bad("`seeds` must be nonempty".into());
        }
        let allowed = self.allowed_blocks();
        for key in self.present_blocks() {
            if !allowed.contains(&key) {
                return bad(format!("key `{key}` is not used by experiment {}", self.experiment));
            }
        }
        let mut seeds = Vec::with_capacity(self.seeds.len());
        for &s in &self.seeds {
            match s.checked_add(opts.seed_offset) {
                Some(v) => seeds.push(v),
                None => return bad(format!("seed {s} + offset {} overflows", opts.seed_offset)),
            }
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return bad("`seeds` contains duplicates".into());
        }
        let exp = self.experiment;
        let mut r = self.clone();
        r.seeds = seeds;

        let default_acts: Vec<ActivationKind> = match exp {
            Experiment::Gradcheck => ActivationKind::all().to_vec(),
            Experiment::Bench => vec![],
            Experiment::Landscape => vec![ActivationKind::Relu, ActivationKind::Mish, ActivationKind::swish()],
            Experiment::Train => vec![ActivationKind::Mish],
            Experiment::SweepInit => vec![ActivationKind::Mish, ActivationKind::swish()],
            _ => vec![ActivationKind::Mish, ActivationKind::swish(), ActivationKind::Relu],
        };
        let acts = r.activations.get_or_insert(default_acts);
        if exp != Experiment::Bench && acts.is_empty() {
            return bad("`activations` must be nonempty".into());
        }
        for a in acts.iter() {
            a.validate().map_err(|e| CliError::config(e.to_string()))?;
        }

        match exp {
            Experiment::Gradcheck => {
                let g = r.gradcheck.get_or_insert_with(Default::default);
                g.network_kinds.get_or_insert_with(|| {
                    vec![
                        ActivationKind::Mish,
                        ActivationKind::swish(),
                        ActivationKind::Gelu,
                        ActivationKind::TanhSoftplus,
                    ]
                });
            }
            Experiment::Bench => {
                let b = r.bench.get_or_insert_with(Default::default);
                let len = *b.buffer_len.get_or_insert(1 << 20);
                let n_total = *b.n_total.get_or_insert(100);
                b.warmup.get_or_insert(10);
                b.workers.get_or_insert(1);
                let repeats = *b.repeats.get_or_insert(2);
                let tol = *b.max_rerun_change.get_or_insert(0.15);
                if len == 0 || n_total < 10 || repeats == 0 || !(tol > 0.0) {
                    return bad("bench needs buffer_len >= 1, n_total >= 10, repeats >= 1, max_rerun_change > 0".into());
                }
            }
            Experiment::Landscape => {
                let l = r.landscape.get_or_insert_with(Default::default);
                let grid = *l.grid.get_or_insert_with(GridSpec::default);
                grid.validate().map_err(|e| CliError::config(e.to_string()))?;
                let depth = *l.depth.get_or_insert(5);
                let width = *l.width.get_or_insert(64);
                let n = *l.roughness_seeds.get_or_insert(10);
                if depth == 0 || width == 0 || n == 0 {
                    return bad("landscape depth, width and roughness_seeds must be >= 1".into());
                }
                if let Some(s) = &mut l.loss_slice {
                    let g = *s.grid.get_or_insert(GridSpec::square(1.0, 41).expect("valid grid"));
                    g.validate().map_err(|e| CliError::config(e.to_string()))?;
                    match &s.checkpoint {
                        None => return bad("loss_slice needs a `checkpoint` path".into()),
                        Some(p) if !p.is_file() => {
                            return bad(format!("loss_slice checkpoint {} does not exist", p.display()))
                        }
                        Some(_) => {}
                    }
                    resolve_data(&mut r.data)?;
                } else if r.data.is_some() {
                    return bad("`data` is only used by landscape together with `loss_slice`".into());
                }
            }
            _ => {}
        }

        if exp.trains() {
            resolve_data(&mut r.data)?;
            let t = r.training.get_or_insert_with(Default::default);
            let (model, optimizer) = match exp {
                Experiment::Train | Experiment::SweepDepth => (Model::Mlp, OptimizerConfig::sgd(0.01, 0.9)),
                Experiment::SweepNoise => (Model::Cnn5, OptimizerConfig::sgd(0.01, 0.9)),
                Experiment::SweepInit => (Model::Cnn6, OptimizerConfig::rmsprop(1e-3)),
                _ => (Model::Cnn5, OptimizerConfig::adam(1e-3)),
            };
            if exp == Experiment::SweepDepth && t.depth.is_some() {
                return bad("sweep-depth takes its depths from `depths`, not `training.depth`".into());
            }
            if exp == Experiment::SweepInit && t.initializer.is_some() {
                return bad("sweep-init takes its initializers from `initializers`".into());
            }
            let model = *t.model.get_or_insert(model);
            t.optimizer.get_or_insert(optimizer);
            if exp != Experiment::SweepInit {
                t.initializer.get_or_insert(Initializer::GlorotUniform);
            }
            t.batch_size.get_or_insert(128);
            let desk_epochs = match exp {
                Experiment::SweepDepth => 40,
                Experiment::SweepNoise => 15,
                _ => 5,
            };
            t.epochs.get_or_insert(pick(desk_epochs, 50, opts));
            match model {
                Model::Mlp => {
                    if exp != Experiment::SweepDepth {
                        t.depth.get_or_insert(5);
                    }
                    t.width.get_or_insert(pick(128, 500, opts));
                }
                Model::Cnn5 | Model::Cnn6 => {
                    t.base_channels.get_or_insert(pick(8, 32, opts));
                }
            }
            let t = t.clone();
            if t.epochs == Some(0) || t.batch_size == Some(0) {
                return bad("epochs and batch_size must be >= 1".into());
            }
            if [t.depth, t.width, t.base_channels].contains(&Some(0)) {
                return bad("depth, width and base_channels must be >= 1".into());
            }
            t.optimizer
                .expect("set above")
                .validate()
                .map_err(|e| CliError::config(e.to_string()))?;
            r.workers.get_or_insert_with(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        }
        match exp {
            Experiment::SweepDepth => {
                let d = r.depths.get_or_insert_with(|| vec![5, 10, 15, 20, 25]);
                if d.is_empty() || d.contains(&0) {
                    return bad("`depths` must be nonempty and >= 1".into());
                }
                if r.training.as_ref().and_then(|t| t.model) != Some(Model::Mlp) {
                    return bad("sweep-depth trains the MLP model".into());
                }
            }
            Experiment::SweepNoise => {
                let s = r.sigmas.get_or_insert_with(|| vec![0.0, 0.25, 0.5, 0.75, 1.0]);
                if s.is_empty() || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("`sigmas` must be nonempty, finite and >= 0".into());
                }
            }
            Experiment::SweepInit => {
                let i = r.initializers.get_or_insert_with(|| Initializer::all().to_vec());
                if i.is_empty() {
                    return bad("`initializers` must be nonempty".into());
                }
            }
            Experiment::Stats => {
                let n = *r.n_runs.get_or_insert(pick(5, 23, opts));
                if n < 2 {
                    return bad("`n_runs` must be >= 2".into());
                }
            }
            _ => {}
        }
        Ok(r)
    }

    pub fn activations(&self) -> &[ActivationKind] {
        self.activations.as_deref().unwrap_or(&[])
    }

    pub fn training(&self) -> &TrainingConfig {
        self.training.as_ref().expect("resolved config")
    }

    pub fn data(&self) -> &DataConfig {
        self.data.as_ref().expect("resolved config")
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1).max(1)
    }
}

fn resolve_data(data: &mut Option<DataConfig>) -> CliResult<()> {
    let d = data.get_or_insert_with(Default::default);
    let kind = *d.dataset.get_or_insert(DatasetKind::Mnist);
    let (dir, other) = match kind {
        DatasetKind::Mnist => (
            d.mnist_dir.get_or_insert_with(|| PathBuf::from(DEFAULT_MNIST_DIR)).clone(),
            d.cifar_dir.is_some(),
        ),
        DatasetKind::Cifar10 => match &d.cifar_dir {
            Some(p) => (p.clone(), d.mnist_dir.is_some()),
            None => return Err(CliError::config("dataset cifar10 needs `cifar_dir`")),
        },
    };
    if other {
        return Err(CliError::config("set only the directory of the selected dataset"));
    }
    if !dir.is_dir() {
        return Err(CliError::config(format!("dataset directory {} does not exist", dir.display())));
    }
    if d.train_limit == Some(0) || d.test_limit == Some(0) {
        return Err(CliError::config("train_limit and test_limit must be >= 1"));
    }
    Ok(())
}

fn strip(e: CliError) -> String {
    match e {
        CliError::Config(m) => m,
        other => other.to_string(),
    }
}

/// `seeds` followed by consecutive integers above its maximum until `n`
/// seeds are available; the first `n` entries when there are more.
pub fn extend_seeds(seeds: &[u64], n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = seeds.iter().copied().take(n).collect();
    let mut next = seeds.iter().copied().max().map_or(0, |m| m + 1);
    while out.len() < n {
        out.push(next);
        next += 1;
    }
    out
}
