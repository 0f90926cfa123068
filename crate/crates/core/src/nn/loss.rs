use super::Tensor;
use crate::error::{Error, Result};
use crate::Real;

/// Row-wise softmax of a `[n, classes]` tensor, computed in `f64`.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
    let &[_, c] = logits.shape() else {
        return Err(Error::argument(format!(
            "softmax expects [batch, classes], got {:?}",
            logits.shape()
        )));
    };
    Ok(logits
        .data()
        .chunks_exact(c)
        .map(|row| {
            let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v.as_f64() - m).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        })
        .collect())
}

/// Mean softmax cross-entropy and its gradient with respect to the logits,
/// `(softmax - onehot) / n`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    let n = logits.batch();
    if n == 0 || labels.is_empty() {
        return Err(Error::argument("cross-entropy of an empty batch"));
    }
    if labels.len() != n {
        return Err(Error::argument(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    let c = logits.shape()[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::argument(format!("label {bad} outside [0, {c})")));
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n * c);
    for (p, &y) in probs.iter().zip(labels) {
        // log-sum-exp form keeps the loss finite even when p[y] underflows
        let row = &logits.data()[grad.len()..grad.len() + c];
        let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v.as_f64() - m).exp()).sum::<f64>().ln();
        loss += lse - row[y].as_f64();
        for (k, &pk) in p.iter().enumerate() {
            let t = if k == y { 1.0 } else { 0.0 };
            grad.push(T::from_f64((pk - t) / n as f64));
        }
    }
    Ok((loss / n as f64, Tensor::from_vec(logits.shape().to_vec(), grad)?))
}

/// Index of the largest logit per row (first one on ties).
pub fn argmax_rows<T: Real>(logits: &Tensor<T>) -> Vec<usize> {
    let c = logits.shape().get(1).copied().unwrap_or(1);
    logits
        .data()
        .chunks_exact(c)
        .map(|row| {
            let mut best = 0;
            for (k, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let t = Tensor::<f64>::from_vec(vec![2, 7], vec![0.3; 14]).unwrap();
        let (loss, _) = softmax_cross_entropy(&t, &[0, 6]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-9);
        for row in softmax(&t).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_sample_gradient_is_p_minus_onehot() {
        let logits = [1.0, -2.0, 0.5];
        let t = Tensor::<f64>::from_vec(vec![1, 3], logits.to_vec()).unwrap();
        let (_, g) = softmax_cross_entropy(&t, &[2]).unwrap();
        let z: f64 = logits.iter().map(|v: &f64| v.exp()).sum();
        for k in 0..3 {
            let expect = logits[k].exp() / z - if k == 2 { 1.0 } else { 0.0 };
            assert!((g.data()[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let t = Tensor::<f32>::from_vec(vec![1, 2], vec![1000.0, -1000.0]).unwrap();
        let (loss, g) = softmax_cross_entropy(&t, &[1]).unwrap();
        assert!((loss - 2000.0).abs() < 1e-6);
        assert!(g.all_finite());
    }

    #[test]
    fn rejects_bad_batches() {
        let t = Tensor::<f64>::zeros(vec![2, 3]);
        assert!(softmax_cross_entropy(&t, &[0]).is_err());
        assert!(softmax_cross_entropy(&t, &[0, 3]).is_err());
        assert!(softmax_cross_entropy(&Tensor::<f64>::zeros(vec![0, 3]), &[]).is_err());
    }
}
