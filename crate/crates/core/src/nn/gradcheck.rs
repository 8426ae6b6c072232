//! Central finite differences for checking analytic gradients.

/// Default perturbation for central differences.
pub const STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute rather than
/// relative terms.
pub const MAGNITUDE_FLOOR: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient_fn(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut point = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = point[i];
            point[i] = orig + STEP;
            let plus = f(&point);
            point[i] = orig - STEP;
            let minus = f(&point);
            point[i] = orig;
            (plus - minus) / (2.0 * STEP)
        })
        .collect()
}

/// Largest `|a - n| / max(|a|, |n|, MAGNITUDE_FLOOR)` over all coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(MAGNITUDE_FLOOR))
        .fold(0.0, f64::max)
}
