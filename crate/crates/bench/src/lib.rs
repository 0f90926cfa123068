//! Shared inputs for the criterion benches.

use mishbench_core::{Buffer, Precision};

/// Deterministic inputs spread over `[-8, 8)`, the range where the
/// activations differ most in cost.
pub fn ramp(precision: Precision, len: usize) -> Buffer {
    let xs: Vec<f64> = (0..len).map(|i| -8.0 + 16.0 * (i as f64 * 0.618_033_988_75).fract()).collect();
    Buffer::from_f64(precision, &xs)
}
