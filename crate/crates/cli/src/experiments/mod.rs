//! One module per experiment family.

pub mod bench;
pub mod gradcheck;
pub mod landscape;
pub mod training;

use mishbench_core::ActivationKind;

/// Activation label safe for file names, e.g. `swish_1.5` for `swish(1.5)`.
pub fn act_label(kind: ActivationKind) -> String {
    let s: String = kind
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    s.trim_end_matches('_').to_string()
}

/// Arithmetic mean; NaN for an empty input.
pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}
