//! Central finite differences, kept independent of the analytic backward pass
//! so it can be used to check it.

use super::layer::{DenseLayer, GradientSet, LayerGrad};
use super::tensor::Tensor;

/// `(f(p + h e_k) - f(p - h e_k)) / 2h` for every coordinate `k` of `point`.
pub fn central_difference<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut p = point.to_vec();
    (0..p.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let up = f(&p);
            p[k] = orig - h;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Finite-difference gradient of `loss` with respect to every weight and bias
/// of `layers`.
pub fn finite_diff_oracle<F>(loss: F, layers: &[DenseLayer], h: f64) -> GradientSet
where
    F: Fn(&[DenseLayer]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = layers.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for li in 0..layers.len() {
        let mut dw = vec![0.0; layers[li].weights.len()];
        for (k, slot) in dw.iter_mut().enumerate() {
            *slot = perturb(&loss, &mut probe, h, |p| &mut p[li].weights.data_mut()[k]);
        }
        let mut db = vec![0.0; layers[li].bias.len()];
        for (k, slot) in db.iter_mut().enumerate() {
            *slot = perturb(&loss, &mut probe, h, |p| &mut p[li].bias.data_mut()[k]);
        }
        out.push(LayerGrad {
            weights: Tensor::new(layers[li].weights.shape().to_vec(), dw).expect("shape"),
            bias: Tensor::new(layers[li].bias.shape().to_vec(), db).expect("shape"),
        });
    }
    GradientSet { start: 0, layers: out }
}

fn perturb<F, S>(loss: &F, probe: &mut [DenseLayer], h: f64, slot: S) -> f64
where
    F: Fn(&[DenseLayer]) -> f64,
    S: Fn(&mut [DenseLayer]) -> &mut f64,
{
    let orig = *slot(probe);
    *slot(probe) = orig + h;
    let up = loss(probe);
    *slot(probe) = orig - h;
    let down = loss(probe);
    *slot(probe) = orig;
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero entries from
/// turning round-off into huge relative errors.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
