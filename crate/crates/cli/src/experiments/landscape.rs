//! The `landscape` experiment: paired output landscapes with a roughness
//! comparison, and an optional loss slice around a saved network.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use mishbench_core::landscape::{
    export_field, field_file_name, loss_slice, output_landscape, roughness, total_variation, ExportFormat,
};
use mishbench_core::nn::{evaluate, LayerSpec};
use mishbench_core::{ActivationKind, Field2D, Network};
use serde_json::{json, Value};

use super::gradcheck::CheckRecord;
use super::training::load_data;
use crate::config::{extend_seeds, ExperimentConfig, ScaleOptions};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

fn export_both(out: &mut OutputDir, field: &Field2D, stem: &str, act: ActivationKind, seed: u64) -> CliResult<Value> {
    let mut info = Vec::new();
    for fmt in [ExportFormat::Pgm, ExportFormat::Csv] {
        let path = out.path(&field_file_name(stem, act, seed, fmt));
        info.push(export_field(field, &path, fmt)?);
        out.register(path);
    }
    Ok(json!({ "degenerate_scale": info[0].degenerate_scale, "min": info[0].min, "max": info[0].max }))
}

/// Loads a checkpoint written by the `train` experiment.
pub fn load_checkpoint(path: &Path) -> CliResult<Network<f64>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut net: Network<f64> = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| CliError::io(path, std::io::Error::other(format!("not a network checkpoint: {e}"))))?;
    net.check()?;
    Ok(net)
}

fn first_activation(net: &Network<f64>) -> Option<ActivationKind> {
    net.spec().layers.iter().find_map(|l| match l {
        LayerSpec::Activation { kind } => Some(*kind),
        _ => None,
    })
}

pub fn run_landscape(cfg: &ExperimentConfig, opts: ScaleOptions, out: &mut OutputDir) -> CliResult<()> {
    let l = cfg.landscape.clone().expect("resolved");
    let grid = l.grid.expect("resolved");
    let (depth, width) = (l.depth.expect("resolved"), l.width.expect("resolved"));
    let acts = cfg.activations();
    let seeds = extend_seeds(&cfg.seeds, l.roughness_seeds.expect("resolved"));

    // roughness[a][s]; the first seed's fields are exported
    let mut rough = vec![Vec::with_capacity(seeds.len()); acts.len()];
    let mut fields = Vec::new();
    for (k, &seed) in seeds.iter().enumerate() {
        for (i, &a) in acts.iter().enumerate() {
            let f = output_landscape(a, seed, grid, depth, width)?;
            rough[i].push(if f.diverged { f64::NAN } else { roughness(&f)? });
            if k == 0 {
                let tv = if f.diverged { f64::NAN } else { total_variation(&f)? };
                let scale = export_both(out, &f, "landscape", a, seed)?;
                fields.push(json!({
                    "activation": a,
                    "seed": seed,
                    "roughness": rough[i][0],
                    "total_variation": tv,
                    "diverged": f.diverged,
                    "pgm_scale": scale,
                }));
            }
        }
    }

    let per_act: Vec<Value> = acts
        .iter()
        .zip(&rough)
        .map(|(a, r)| json!({ "activation": a, "roughness": r }))
        .collect();
    let mut comparisons = Vec::new();
    for (i, &a) in acts.iter().enumerate() {
        for (j, &b) in acts.iter().enumerate() {
            if i != j {
                let wins = rough[i].iter().zip(&rough[j]).filter(|(x, y)| x > y).count();
                comparisons.push(json!({
                    "rougher": a, "than": b, "seeds": wins, "of": seeds.len(),
                }));
            }
        }
    }

    let mut results = json!({
        "grid": grid,
        "depth": depth,
        "width": width,
        "roughness_seeds": seeds,
        "fields": fields,
        "roughness": per_act,
        "comparisons": comparisons,
    });

    let mut failed = Vec::new();
    if let Some(s) = &l.loss_slice {
        let ckpt = s.checkpoint.as_ref().expect("resolved");
        let net = load_checkpoint(ckpt)?;
        let data = load_data(cfg)?;
        let seed = cfg.seeds[0];
        let slice = loss_slice(&net, &data.test, seed, s.grid.expect("resolved"))?;
        let base = evaluate(&net, &data.test.subset(&slice.subset))?.0;
        let act = first_activation(&net).unwrap_or(ActivationKind::Relu);
        let scale = export_both(out, &slice.field, "loss_slice", act, seed)?;
        let check = CheckRecord::named("loss_slice_center", (slice.center_loss - base).abs(), 1e-9);
        if !check.passed {
            failed.push(check.name.clone());
        }
        let (ai, aj) = slice.field.argmin();
        results["loss_slice"] = json!({
            "checkpoint": ckpt,
            "activation": act,
            "subset_size": slice.subset.len(),
            "center_loss": slice.center_loss,
            "base_loss": base,
            "center_check": check,
            "argmin": [slice.field.grid.x(ai), slice.field.grid.y(aj)],
            "min_loss": slice.field.at(ai, aj),
            "diverged": slice.field.diverged,
            "pgm_scale": scale,
        });
    }
    out.write_sidecar("landscape", cfg, opts, results)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("failing checks: {}", failed.join(", "))))
    }
}
