//! Iterative minimizer of the regularized aggregation objective, used to check
//! the closed form.

/// Gradient descent on
/// `f(x) = sum_i w_i |theta_i - x|^2 + lambda |theta_s - x|^2`
/// until the gradient's max-norm drops below `tol`. Starts from zero.
pub fn numeric_minimizer_oracle(contributions: &[(&[f64], f64)], server: &[f64], lambda: f64, tol: f64) -> Vec<f64> {
    let n = server.len();
    let curvature = 2.0 * (contributions.iter().map(|(_, w)| w).sum::<f64>() + lambda);
    if curvature <= 0.0 {
        return server.to_vec();
    }
    // half the optimal step: contraction factor 1/2 per iteration
    let step = 0.5 / curvature;
    let mut x = vec![0.0; n];
    for _ in 0..10_000 {
        let grad: Vec<f64> = (0..n)
            .map(|k| {
                let mut g = 2.0 * lambda * (x[k] - server[k]);
                for (theta, w) in contributions {
                    g += 2.0 * w * (x[k] - theta[k]);
                }
                g
            })
            .collect();
        if grad.iter().all(|g| g.abs() < tol) {
            break;
        }
        for (xk, gk) in x.iter_mut().zip(&grad) {
            *xk -= step * gk;
        }
    }
    x
}
