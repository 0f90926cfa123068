use mishbench_core::activation::{
    finite_diff, minimum_of, mish, mish_grad, mish_grad_decomposed, mish_grad_rational, softplus,
};
use mishbench_core::ActivationKind;
use proptest::prelude::*;

#[test]
fn slope_at_origin() {
    assert!((ActivationKind::Mish.grad(0.0) - 0.6).abs() <= 1e-12);
    assert_eq!(mish_grad_decomposed(0.0).ratio, 0.6);
}

#[test]
fn derivative_forms_agree_on_dense_sweep() {
    let mut worst = 0f64;
    for k in 0..=10_000 {
        let x = -20.0 + 40.0 * k as f64 / 10_000.0;
        worst = worst.max((mish_grad_rational(x) - mish_grad_decomposed(x).total).abs());
    }
    assert!(worst <= 1e-9, "max gap {worst:e}");
}

#[test]
fn closed_forms_match_central_differences() {
    let h = 1e-5;
    for kind in ActivationKind::all() {
        let kinks = kind.kinks();
        for k in 0..=1200 {
            let x = -6.0 + 12.0 * k as f64 / 1200.0;
            if kinks.iter().any(|&c| (x - c).abs() <= 2.0 * h) {
                continue;
            }
            let fd = finite_diff(kind, x, h).unwrap();
            let g = kind.grad(x);
            assert!((fd - g).abs() <= 1e-6, "{kind} at {x}: {g} vs {fd}");
        }
    }
}

#[test]
fn mish_minimum_location() {
    let (x, f) = minimum_of(ActivationKind::Mish).unwrap();
    assert!((-1.1930..=-1.1918).contains(&x), "{x}");
    assert!((-0.3095..=-0.3080).contains(&f), "{f}");
    assert!(minimum_of(ActivationKind::Relu).is_err());
}

#[test]
fn large_inputs_and_single_precision_range() {
    assert!((mish(1000.0) - 1000.0).abs() <= 1e-6 * 1000.0);
    for k in 0..=20_000 {
        let x = -1e4 + k as f64;
        let y = mish(x as f32 as f64) as f32;
        let g = mish_grad(x as f32 as f64) as f32;
        assert!(y.is_finite() && g.is_finite(), "{x}");
    }
}

proptest! {
    #[test]
    fn mish_lies_between_bound_and_identity(x in -50.0f64..50.0) {
        let y = mish(x);
        prop_assert!(y >= -0.3089);
        if x >= 0.0 {
            prop_assert!(y <= x + 1e-12 && y >= 0.0);
        } else {
            prop_assert!(y >= x && y <= 0.0);
        }
    }

    #[test]
    fn softplus_is_positive_and_above_relu(x in -30.0f64..30.0) {
        let s = softplus(x);
        prop_assert!(s > 0.0);
        prop_assert!(s >= x.max(0.0));
    }

    #[test]
    fn mish_grad_is_bounded(x in -100.0f64..100.0) {
        let g = mish_grad(x);
        prop_assert!(g > -0.113 && g < 1.1, "{}", g);
    }

    #[test]
    fn kind_strings_round_trip(i in 0usize..17) {
        let k = ActivationKind::all()[i];
        prop_assert_eq!(k.to_string().parse::<ActivationKind>().unwrap(), k);
    }
}
