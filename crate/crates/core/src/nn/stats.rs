use serde::{Deserialize, Serialize};

use super::RunResult;
use crate::error::{Error, Result};

/// Mean test accuracy, mean test loss and sample standard deviation of test
/// accuracy over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n_runs: usize,
    pub mean_acc: f64,
    pub mean_loss: f64,
    pub std_acc: f64,
}

/// Summarizes final-epoch metrics with the `n - 1` variance estimator.
pub fn aggregate_runs(results: &[RunResult]) -> Result<StatSummary> {
    let accs: Vec<f64> = results.iter().map(|r| r.final_test_acc).collect();
    let losses: Vec<f64> = results.iter().map(|r| r.final_test_loss).collect();
    summarize(&accs, &losses)
}

/// [`aggregate_runs`] on raw accuracy/loss pairs.
pub fn summarize(accs: &[f64], losses: &[f64]) -> Result<StatSummary> {
    if accs.len() < 2 || accs.len() != losses.len() {
        return Err(Error::argument(format!(
            "need at least two runs with matching metrics, got {} and {}",
            accs.len(),
            losses.len()
        )));
    }
    let n = accs.len() as f64;
    let mean_acc = accs.iter().sum::<f64>() / n;
    let mean_loss = losses.iter().sum::<f64>() / n;
    let var = accs.iter().map(|a| (a - mean_acc).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(StatSummary {
        n_runs: accs.len(),
        mean_acc,
        mean_loss,
        std_acc: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_runs_by_hand() {
        let s = summarize(&[0.8, 0.9], &[0.5, 0.3]).unwrap();
        assert!((s.mean_acc - 0.85).abs() < 1e-15);
        assert!((s.mean_loss - 0.4).abs() < 1e-15);
        assert!((s.std_acc - 0.005f64.sqrt()).abs() < 1e-15);
        assert!((s.std_acc - 0.0707).abs() < 1e-4);
    }

    #[test]
    fn identical_runs_and_too_few() {
        assert_eq!(summarize(&[0.7; 4], &[0.1; 4]).unwrap().std_acc, 0.0);
        assert!(summarize(&[0.7], &[0.1]).is_err());
    }
}
