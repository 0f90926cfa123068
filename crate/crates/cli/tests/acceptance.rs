//! Acceptance run: executes every experiment at desk scale and prints one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//!
//! Outputs are kept under the cargo target tmpdir for inspection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mishbench_cli::{run, Cli, CliError, Experiment};
use serde_json::Value;

/// Tolerances and budgets.
const GRAD_AT_ZERO_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-9;
const FD_TOL: f64 = 1e-6;
const NETWORK_TOL: f64 = 1e-5;
const FUSED_SINGLE_TOL: f64 = 1e-6;
const FUSED_DOUBLE_TOL: f64 = 1e-12;
const SLICE_CENTER_TOL: f64 = 1e-9;
const FUSED_BACKWARD_RATIO: f64 = 0.8;
const PROFILE_BUDGET_S: f64 = 120.0;
const DEPTH_SWEEP_BUDGET_S: f64 = 40.0 * 60.0;
const SHALLOW_SPREAD_POINTS: f64 = 1.5;
const ROUGHNESS_MIN_WINS: u64 = 9;
const ROUGHNESS_SEEDS: u64 = 10;
const LANDSCAPE_BUDGET_S: f64 = 60.0;
const ALL_KINDS: usize = 17;
const NETWORK_KINDS: [&str; 4] = ["mish", "swish", "gelu", "tanh_softplus"];

struct Report {
    lines: Vec<(bool, String, String)>,
}

impl Report {
    fn add(&mut self, pass: bool, name: &str, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((pass, name.into(), detail));
    }
}

struct Run {
    dir: PathBuf,
    seconds: f64,
    outcome: Result<(), String>,
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn execute(exp: Experiment, name: &str, config: &str) -> Run {
    let base = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&base).unwrap();
    let cfg = base.join(format!("{name}.config.json"));
    std::fs::write(&cfg, config).unwrap();
    let dir = base.join(name);
    let _ = std::fs::remove_dir_all(&dir);
    let cli = Cli {
        experiment: exp,
        config: cfg,
        output_dir: Some(dir.clone()),
        paper_scale: false,
        seed_offset: 0,
    };
    eprintln!("running {name} ...");
    let start = Instant::now();
    let outcome = match run(&cli, None) {
        Ok(_) => Ok(()),
        Err(CliError::Check(m)) => Err(format!("check failed: {m}")),
        Err(e) => panic!("{name} could not run: {e}"),
    };
    let seconds = start.elapsed().as_secs_f64();
    eprintln!("{name} finished in {seconds:.1}s");
    Run { dir, seconds, outcome }
}

fn sidecar(run: &Run, stem: &str) -> Value {
    serde_json::from_slice(&std::fs::read(run.dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

fn checks(side: &Value) -> Vec<Value> {
    side["results"]["checks"].as_array().cloned().unwrap_or_default()
}

/// Largest error among checks named `name` (optionally of one kind) and
/// how many there were.
fn worst(checks: &[Value], name: &str, kind: Option<&str>) -> (f64, usize) {
    let sel: Vec<&Value> = checks
        .iter()
        .filter(|c| c["name"] == name && kind.is_none_or(|k| c["kind"] == k))
        .collect();
    let err = sel.iter().map(|c| c["max_error"].as_f64().unwrap_or(f64::NAN)).fold(0.0, |a: f64, b| {
        if b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    });
    (err, sel.len())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<BTreeMap<String, String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(String::from)).collect())
        .collect();
    (header, rows)
}

/// Mean of `value` grouped by `keys`; a "diverged" cell makes the group NaN.
fn group_means(rows: &[BTreeMap<String, String>], keys: &[&str], value: &str) -> BTreeMap<Vec<String>, f64> {
    let mut acc: BTreeMap<Vec<String>, (f64, usize)> = BTreeMap::new();
    for row in rows {
        let k: Vec<String> = keys.iter().map(|c| row[*c].clone()).collect();
        let v = row[value].parse::<f64>().unwrap_or(f64::NAN);
        let e = acc.entry(k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn key(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn main() {
    std::env::set_current_dir(root()).unwrap();
    let mut report = Report { lines: Vec::new() };
    let mnist = root().join("data/mnist-5k");
    let mnist = mnist.display();

    // exact and analytic checks
    let g = execute(Experiment::Gradcheck, "gradcheck", r#"{"experiment": "gradcheck", "seeds": [0]}"#);
    let gc = checks(&sidecar(&g, "gradcheck"));
    let (e, _) = worst(&gc, "mish_grad_at_zero", None);
    report.add(e <= GRAD_AT_ZERO_TOL, "mish_grad_at_zero", format!("|grad(0) - 0.6| = {e:.3e} <= {GRAD_AT_ZERO_TOL:e}"));
    let (e, _) = worst(&gc, "derivative_identity", None);
    report.add(e <= IDENTITY_TOL, "derivative_identity_sweep", format!("max gap {e:.3e} <= {IDENTITY_TOL:e} over 10001 points"));
    let (e, n) = worst(&gc, "fd_conformance", None);
    report.add(
        e <= FD_TOL && n == ALL_KINDS,
        "finite_difference_conformance",
        format!("{n} kinds, max error {e:.3e} <= {FD_TOL:e}"),
    );
    let (lo, _) = worst(&gc, "mish_min_location", None);
    let (lv, _) = worst(&gc, "mish_min_value", None);
    report.add(
        lo == 0.0 && lv == 0.0,
        "mish_minimum",
        format!("distance outside bracket: x_min {lo:.2e}, f_min {lv:.2e}"),
    );
    let (big, _) = worst(&gc, "mish_large_input", None);
    let (sp, _) = worst(&gc, "softplus_threshold", None);
    let (fin, nfin) = worst(&gc, "single_precision_finite", None);
    report.add(
        big <= 1e-6 && sp == 0.0 && fin == 0.0 && nfin == ALL_KINDS,
        "stability",
        format!("rel err at 1000 {big:.2e}, softplus threshold gap {sp:e}, non-finite kinds in f32 {fin}"),
    );
    let mut net_ok = true;
    let mut net_detail = Vec::new();
    for k in NETWORK_KINDS {
        let (a, na) = worst(&gc, "network_gradcheck_train", Some(k));
        let (b, nb) = worst(&gc, "network_gradcheck_eval", Some(k));
        net_ok &= na == 1 && nb == 1 && a <= NETWORK_TOL && b <= NETWORK_TOL;
        net_detail.push(format!("{k} {:.2e}", a.max(b)));
    }
    report.add(net_ok, "network_gradcheck", format!("{} (tol {NETWORK_TOL:e})", net_detail.join(", ")));
    let (s, _) = worst(&gc, "fused_vs_naive_single", None);
    let (d, _) = worst(&gc, "fused_vs_naive_double", None);
    report.add(
        s <= FUSED_SINGLE_TOL && d <= FUSED_DOUBLE_TOL,
        "fused_vs_naive_backward",
        format!("single {s:.2e} <= {FUSED_SINGLE_TOL:e}, double {d:.2e} <= {FUSED_DOUBLE_TOL:e}"),
    );

    // loss slice around a trained network
    let t = execute(
        Experiment::Train,
        "train",
        &format!(r#"{{"experiment": "train", "seeds": [0], "activations": ["mish"], "data": {{"mnist_dir": "{mnist}"}}}}"#),
    );
    let ckpt = t.dir.join("train_mish_0.ckpt.json");

    let l = execute(
        Experiment::Landscape,
        "landscape",
        r#"{"experiment": "landscape", "seeds": [0], "activations": ["relu", "mish", "swish"]}"#,
    );
    let ls = execute(
        Experiment::Landscape,
        "loss_slice",
        &format!(
            r#"{{"experiment": "landscape", "seeds": [0], "activations": ["mish"],
                "data": {{"mnist_dir": "{mnist}"}},
                "landscape": {{"roughness_seeds": 1, "loss_slice": {{"checkpoint": "{}"}}}}}}"#,
            ckpt.display()
        ),
    );
    let (synthetic, _) = worst(&gc, "loss_slice_center", None);
    let center = sidecar(&ls, "landscape")["results"]["loss_slice"]["center_check"]["max_error"]
        .as_f64()
        .unwrap_or(f64::NAN);
    report.add(
        synthetic <= SLICE_CENTER_TOL && center <= SLICE_CENTER_TOL,
        "loss_slice_center",
        format!("trained MLP {center:.2e}, synthetic {synthetic:.2e} (tol {SLICE_CENTER_TOL:e})"),
    );

    // performance ordering
    let b = execute(
        Experiment::Bench,
        "bench",
        r#"{"experiment": "bench", "seeds": [0], "bench": {"repeats": 1}}"#,
    );
    let bs = sidecar(&b, "bench");
    let bc = checks(&bs);
    let (fwd, _) = worst(&bc, "relu_forward_faster_than_mish", None);
    let (bwd, _) = worst(&bc, "fused_backward_ratio", None);
    let secs = bs["results"]["profile_seconds"][0].as_f64().unwrap_or(f64::NAN);
    let len = bs["config"]["bench"]["buffer_len"].as_u64().unwrap_or(0);
    report.add(
        fwd < 1.0 && bwd <= FUSED_BACKWARD_RATIO && secs < PROFILE_BUDGET_S && len == 1 << 20,
        "speed_ordering",
        format!(
            "relu/mish forward {fwd:.3} < 1, fused/naive backward {bwd:.3} <= {FUSED_BACKWARD_RATIO}, \
             buffer {len}, profile {secs:.1}s < {PROFILE_BUDGET_S}s"
        ),
    );

    // directional reproductions
    let sd = execute(
        Experiment::SweepDepth,
        "sweep_depth",
        &format!(r#"{{"experiment": "sweep-depth", "seeds": [0, 1, 2], "data": {{"mnist_dir": "{mnist}"}}}}"#),
    );
    let (_, rows) = read_csv(&sd.dir.join("sweep_depth.csv"));
    let m = group_means(&rows, &["depth", "activation"], "test_acc");
    let at = |d: &str, a: &str| m.get(&key(&[d, a])).copied().unwrap_or(f64::NAN);
    let deep_ok = at("20", "mish") >= at("20", "relu");
    let mut spreads = Vec::new();
    for d in m.keys().map(|k| k[0].clone()).collect::<std::collections::BTreeSet<_>>() {
        if d.parse::<u64>().unwrap() <= 10 {
            let accs: Vec<f64> = ["mish", "swish", "relu"].iter().map(|a| 100.0 * at(&d, a)).collect();
            let spread = accs.iter().cloned().fold(f64::MIN, f64::max) - accs.iter().cloned().fold(f64::MAX, f64::min);
            spreads.push((d, spread));
        }
    }
    let shallow_ok = !spreads.is_empty() && spreads.iter().all(|(_, s)| *s <= SHALLOW_SPREAD_POINTS);
    report.add(
        deep_ok && shallow_ok && sd.seconds <= DEPTH_SWEEP_BUDGET_S,
        "depth_sweep",
        format!(
            "depth 20 acc mish {:.4} vs relu {:.4}; spread at depth <= 10 {}; runtime {:.0}s <= {DEPTH_SWEEP_BUDGET_S}s",
            at("20", "mish"),
            at("20", "relu"),
            spreads.iter().map(|(d, s)| format!("[{d}: {s:.2} pts]")).collect::<Vec<_>>().join(" "),
            sd.seconds
        ),
    );

    let sn = execute(
        Experiment::SweepNoise,
        "sweep_noise",
        &format!(r#"{{"experiment": "sweep-noise", "seeds": [0, 1, 2], "data": {{"mnist_dir": "{mnist}"}}}}"#),
    );
    let (_, rows) = read_csv(&sn.dir.join("sweep_noise.csv"));
    let m = group_means(&rows, &["sigma", "activation"], "test_loss");
    let mut noise_ok = true;
    let mut detail = Vec::new();
    for s in ["0.5", "1"] {
        let (mi, re) = (m.get(&key(&[s, "mish"])).copied(), m.get(&key(&[s, "relu"])).copied());
        let (mi, re) = (mi.unwrap_or(f64::NAN), re.unwrap_or(f64::NAN));
        noise_ok &= mi <= re;
        detail.push(format!("sigma {s}: mish {mi:.4} vs relu {re:.4}"));
    }
    report.add(noise_ok, "noise_sweep_loss", detail.join("; "));

    let side = sidecar(&l, "landscape");
    let wins = side["results"]["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["rougher"] == "relu" && c["than"] == "mish")
        .map(|c| (c["seeds"].as_u64().unwrap(), c["of"].as_u64().unwrap()))
        .unwrap_or((0, 0));
    report.add(
        wins.0 >= ROUGHNESS_MIN_WINS && wins.1 == ROUGHNESS_SEEDS && l.seconds < LANDSCAPE_BUDGET_S,
        "landscape_roughness",
        format!(
            "relu rougher than mish on {} of {} seeds (need {ROUGHNESS_MIN_WINS}); runtime {:.1}s < {LANDSCAPE_BUDGET_S}s",
            wins.0, wins.1, l.seconds
        ),
    );

    let st = execute(
        Experiment::Stats,
        "stats",
        &format!(
            r#"{{"experiment": "stats", "seeds": [0], "activations": ["relu", "mish", "swish"], "n_runs": 5,
                "data": {{"mnist_dir": "{mnist}"}}}}"#
        ),
    );
    let (header, rows) = read_csv(&st.dir.join("stats.csv"));
    let mu = |a: &str| {
        rows.iter()
            .find(|r| r["activation"] == a)
            .and_then(|r| r["mu_acc"].parse::<f64>().ok())
            .unwrap_or(f64::NAN)
    };
    let header_ok = header == ["activation", "mu_acc", "mu_loss", "sigma_acc"];
    report.add(
        header_ok && mu("mish") >= mu("relu"),
        "stats_table",
        format!("header {}; mu_acc mish {:.2} vs relu {:.2}", header.join(","), mu("mish"), mu("relu")),
    );

    for r in [&g, &t, &l, &ls, &b, &sd, &sn, &st] {
        if let Err(m) = &r.outcome {
            eprintln!("note: {} reported {m}", r.dir.display());
        }
    }
    let failed = report.lines.iter().filter(|(p, ..)| !p).count();
    println!("acceptance: {} of {} criteria passed", report.lines.len() - failed, report.lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
