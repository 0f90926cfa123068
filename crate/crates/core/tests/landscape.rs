use mishbench_core::data::synth_blobs;
use mishbench_core::landscape::{
    export_field, field_file_name, import_field_csv, loss_at, loss_slice, output_landscape, roughness,
    total_variation, Directions, ExportFormat,
};
use mishbench_core::nn::{build_mlp_for, evaluate, train_network, OptimizerConfig};
use mishbench_core::{ActivationKind, GridSpec, TrainConfig};

#[test]
fn relu_landscapes_are_rougher_than_mish() {
    let grid = GridSpec::default();
    let mut wins = 0;
    for seed in 0..10 {
        let r = roughness(&output_landscape(ActivationKind::Relu, seed, grid, 5, 64).unwrap()).unwrap();
        let m = roughness(&output_landscape(ActivationKind::Mish, seed, grid, 5, 64).unwrap()).unwrap();
        eprintln!("seed {seed}: relu {r:.5} mish {m:.5}");
        wins += usize::from(r > m);
    }
    assert!(wins >= 9, "relu rougher for only {wins}/10 seeds");
}

#[test]
fn total_variation_is_finite_and_positive() {
    let f = output_landscape(ActivationKind::Swish { beta: 1.0 }, 2, GridSpec::square(5.0, 64).unwrap(), 5, 32)
        .unwrap();
    let tv = total_variation(&f).unwrap();
    assert!(tv.is_finite() && tv > 0.0);
}

fn trained() -> (mishbench_core::Network<f64>, mishbench_core::Dataset) {
    let data = synth_blobs(60, 4, 8, 0.6, 3).unwrap().train_test_split(80).unwrap();
    let spec = build_mlp_for(8, 4, 2, 16, ActivationKind::Mish).unwrap().with_seed(5);
    let cfg = TrainConfig {
        optimizer: OptimizerConfig::adam(1e-2),
        batch_size: 32,
        epochs: 30,
        seed: 1,
    };
    let (net, _) = train_network::<f64>(&spec, &cfg, &data, |_| {}).unwrap();
    (net, data.test)
}

#[test]
fn loss_slice_center_and_minimum() {
    let (net, test) = trained();
    let grid = GridSpec::square(1.0, 21).unwrap();
    let s = loss_slice(&net, &test, 9, grid).unwrap();
    let base = evaluate(&net, &test).unwrap().0;
    assert!((s.center_loss - base).abs() <= 1e-9);
    assert!((s.field.at(10, 10) - base).abs() <= 1e-9);
    // the trained point is a minimum of the slice up to the central 20% box
    let (i, j) = s.field.argmin();
    let (x, y) = (grid.x(i), grid.y(j));
    assert!(x.abs() <= 0.2 + 1e-12 && y.abs() <= 0.2 + 1e-12, "argmin at ({x}, {y})");
}

#[test]
fn slice_is_deterministic_and_reparameterization_invariant() {
    let (net, test) = trained();
    let grid = GridSpec::square(0.5, 5).unwrap();
    assert_eq!(loss_slice(&net, &test, 4, grid).unwrap(), loss_slice(&net, &test, 4, grid).unwrap());
    let dirs = Directions::draw(&net, 4).unwrap();
    let scaled = dirs.scaled(4.0, 0.5);
    let a = loss_at(&net, &dirs, &test, 0.3, -0.2).unwrap();
    let b = loss_at(&net, &scaled, &test, 0.3 / 4.0, -0.2 / 0.5).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
}

#[test]
fn filter_normalization_matches_weight_norms() {
    let (net, _) = trained();
    let dirs = Directions::draw(&net, 1).unwrap();
    for (pl, dl) in net.params().iter().zip(&dirs.d1) {
        for (p, d) in pl.iter().zip(dl) {
            if p.shape().len() == 1 {
                assert!(d.data().iter().all(|&v| v == 0.0));
                continue;
            }
            let row = p.len() / p.shape()[0];
            for (pr, dr) in p.data().chunks(row).zip(d.data().chunks(row)) {
                let n = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!((n(pr) - n(dr)).abs() <= 1e-12 * n(pr).max(1.0));
            }
        }
    }
}

#[test]
fn exported_landscape_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let f = output_landscape(ActivationKind::Mish, 0, GridSpec::square(3.0, 16).unwrap(), 5, 16).unwrap();
    let name = field_file_name("landscape", ActivationKind::Mish, 0, ExportFormat::Csv);
    let path = dir.path().join(name);
    let info = export_field(&f, &path, ExportFormat::Csv).unwrap();
    assert!(!info.degenerate_scale);
    let back = import_field_csv(&path).unwrap();
    for (a, b) in back.values.iter().zip(&f.values) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
    }
    let pgm = dir.path().join("landscape_mish_0.pgm");
    export_field(&f, &pgm, ExportFormat::Pgm).unwrap();
    assert_eq!(std::fs::metadata(&pgm).unwrap().len(), (b"P5\n16 16\n255\n".len() + 256) as u64);
}
