//! Gauss-Legendre rules and straight-line integrals of covector fields.

use crate::error::Result;

/// Number of nodes used for line integrals.
pub const LINE_NODES: usize = 16;

/// Nodes and weights of the `n`-point Gauss-Legendre rule mapped to [0, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 1.0;
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            deriv = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        deriv = if dp != 0.0 { dp } else { deriv };
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integral of `covector` along the straight segment `from -> to`.
pub fn line_integral<C>(covector: C, from: &[f64], to: &[f64]) -> Result<f64>
where
    C: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if from == to {
        return Ok(0.0);
    }
    let delta: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    let mut total = 0.0;
    for (tau, w) in gauss_legendre(LINE_NODES) {
        let z: Vec<f64> = from.iter().zip(&delta).map(|(a, d)| a + tau * d).collect();
        let c = covector(&z)?;
        total += w * c.iter().zip(&delta).map(|(ci, di)| ci * di).sum::<f64>();
    }
    Ok(total)
}

/// Points along the segment used when certifying closedness.
pub fn segment_nodes(from: &[f64], to: &[f64]) -> Vec<Vec<f64>> {
    if from == to {
        return vec![from.to_vec()];
    }
    let mut taus = vec![0.0, 1.0];
    taus.extend(gauss_legendre(LINE_NODES).into_iter().map(|(t, _)| t).step_by(3));
    taus.into_iter()
        .map(|tau| from.iter().zip(to).map(|(a, b)| a + tau * (b - a)).collect())
        .collect()
}
