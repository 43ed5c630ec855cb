//! Sample-based certificates for weight functions and weights.

use serde::Serialize;

use crate::error::{Error, Result};

/// Exponents at which the smallest working constant is reported.
pub const M_GRID: [f64; 9] = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0];

#[derive(Clone, Debug, Serialize)]
pub struct WeightReport {
    pub pairs: usize,
    pub claimed_c: f64,
    pub claimed_m: f64,
    /// Smallest `C` that works on the sample at the claimed `M`.
    pub fitted_c: f64,
    /// Smallest `C` per exponent in [`M_GRID`].
    pub frontier: Vec<(f64, f64)>,
    /// Same fit for the literal two-sided reading `(m(x)/m(y))^{+-1}` with `g(x)` fixed.
    pub two_sided_c: f64,
    pub b_violations: usize,
    pub min_g: f64,
    pub passes: bool,
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Checks `m(y)/m(x) <= C (1 + |x - y| / g(x))^M` over all ordered sample pairs.
///
/// With `check_b` the uncertainty principle `g >= 1` is also checked.
pub fn check_tempered(
    m: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    points: &[Vec<f64>],
    claimed_c: f64,
    claimed_m: f64,
    check_b: bool,
) -> Result<WeightReport> {
    let n = points.len();
    if n * n.saturating_sub(1) < 100 {
        return Err(Error::InvalidArgument(format!("{n} points give fewer than 100 pairs")));
    }
    let mv: Vec<f64> = points.iter().map(|p| m(p)).collect();
    let gv: Vec<f64> = points.iter().map(|p| g(p)).collect();
    for (p, (&a, &b)) in points.iter().zip(mv.iter().zip(&gv)) {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::Domain(format!("non-positive weight at {p:?}")));
        }
    }
    let mut frontier: Vec<(f64, f64)> = M_GRID.iter().map(|&e| (e, 0.0)).collect();
    let mut fitted_c = 0.0f64;
    let mut two_sided_c = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let base = 1.0 + dist(&points[i], &points[j]) / gv[i];
            let ratio = mv[j] / mv[i];
            let both = ratio.max(1.0 / ratio);
            fitted_c = fitted_c.max(ratio / base.powf(claimed_m));
            two_sided_c = two_sided_c.max(both / base.powf(claimed_m));
            for (e, c) in frontier.iter_mut() {
                *c = c.max(ratio / base.powf(*e));
            }
        }
    }
    let min_g = gv.iter().cloned().fold(f64::INFINITY, f64::min);
    let b_violations = if check_b { gv.iter().filter(|&&v| v < 1.0).count() } else { 0 };
    Ok(WeightReport {
        pairs: n * (n - 1),
        claimed_c,
        claimed_m,
        fitted_c,
        frontier,
        two_sided_c,
        b_violations,
        min_g,
        passes: fitted_c <= claimed_c * (1.0 + 1e-12) && b_violations == 0,
    })
}

/// `rho(x) = (1 + |x|^2)^{1/2}`.
pub fn rho(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Points of a regular lattice in the box `[-r, r]^d` with `per_axis` points per axis.
pub fn box_sample(d: usize, r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let j = i % per_axis;
                    i /= per_axis;
                    -r + 2.0 * r * j as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_is_a_weight_function() {
        let pts = box_sample(2, 10.0, 21);
        let r = check_tempered(&rho, &rho, &pts, 2.0, 1.0, true).unwrap();
        assert!(r.passes, "fitted C = {}", r.fitted_c);
        assert_eq!(r.b_violations, 0);
        // the literal two-sided reading needs a larger constant
        assert!(r.two_sided_c > 2.0);
    }

    #[test]
    fn constant_weights() {
        let pts = box_sample(1, 5.0, 20);
        let one = |_: &[f64]| 1.0;
        let r = check_tempered(&one, &one, &pts, 1.0, 0.0, true).unwrap();
        assert!(r.passes);
        assert_eq!(r.min_g, 1.0);
        let half = |_: &[f64]| 0.5;
        let r = check_tempered(&half, &half, &pts, 1.0, 0.0, true).unwrap();
        assert_eq!(r.b_violations, 20);
        assert!(!r.passes);
    }

    #[test]
    fn rejects_bad_input() {
        let pts = box_sample(1, 5.0, 5);
        assert!(check_tempered(&rho, &rho, &pts, 2.0, 1.0, true).is_err());
        let pts = box_sample(1, 5.0, 20);
        let neg = |x: &[f64]| x[0];
        assert!(matches!(check_tempered(&neg, &rho, &pts, 2.0, 1.0, false), Err(Error::Domain(_))));
    }
}
