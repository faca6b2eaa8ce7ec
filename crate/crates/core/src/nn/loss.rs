use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 2 {
        return Err(Error::Shape(format!("logits must be [batch, classes], got {:?}", logits.shape())));
    }
    let (b, c) = (logits.rows(), logits.cols());
    if labels.len() != b {
        return Err(Error::Input(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Input(format!("label {bad} out of range for {c} classes")));
    }
    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; b * c];
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g = &mut grad[r * c..(r + 1) * c];
        let mut sum = 0.0;
        for (dst, &z) in g.iter_mut().zip(row) {
            *dst = (z - max).exp();
            sum += *dst;
        }
        loss += sum.ln() - (row[y] - max);
        for dst in g.iter_mut() {
            *dst = *dst / sum * inv_b;
        }
        g[y] -= inv_b;
    }
    Ok((loss * inv_b, Tensor::new(vec![b, c], grad)?))
}

/// Fraction of rows whose arg-max logit equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(r, &y)| argmax(logits.row(r)) == y)
        .count();
    hits as f64 / labels.len() as f64
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        let (l, _) = softmax_cross_entropy(&Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap(), &[0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits_do_not_overflow() {
        let (l, g) = softmax_cross_entropy(&Tensor::from_rows(&[vec![1000.0, 0.0]]).unwrap(), &[0]).unwrap();
        assert!(l >= 0.0 && l < 1e-9);
        assert!(g.is_finite());
    }

    #[test]
    fn closed_form_three_class() {
        let (l, _) = softmax_cross_entropy(&Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap(), &[2]).unwrap();
        let expected = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln() - 3.0;
        assert!((l - expected).abs() < 1e-14);
        assert!((l - 0.407606).abs() < 1e-6);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor::from_rows(&[vec![0.3, -2.0, 5.0, 1.0], vec![-7.0, 0.0, 0.1, 2.5]]).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[1, 3]).unwrap();
        for r in 0..2 {
            assert!(g.row(r).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(softmax_cross_entropy(&logits, &[2]), Err(Error::Input(_))));
    }

    #[test]
    fn accuracy_counts_argmax() {
        let logits = Tensor::from_rows(&[vec![0.0, 1.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(accuracy(&logits, &[1, 1]), 0.5);
    }
}
