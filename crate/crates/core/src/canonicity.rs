//! Canonicity checks: bracket conditions, the symplectic Jacobian
//! condition, the time-dependent condition and recovery of the new
//! Hamiltonian.
//!
//! For a time-preserving map the dz∧dt part of `Φ*Ω - Ω` has components
//! `w_j = Σ_i (dQ^i/dz_j dP_i/dt - dQ^i/dt dP_i/dz_j)`. When `w` is closed in
//! z it equals `dJ` and the new Hamiltonian is `K = H - J`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flows::covector_asymmetry;
use crate::numdiff::{gradient, jacobian, jacobian_of, Scalar};
use crate::phase::{standard_symplectic_matrix, ExtendedPoint, Field, PhaseMap};
use crate::quadrature::{line_integral, segment_nodes};
use crate::report::Verdict;

/// Residuals of one canonicity test at one point. Entries not computed by
/// the test are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicityReport {
    /// Largest of `|{Q^i,P_j} - δ_ij|`, `|{Q^i,Q^j}|`, `|{P_i,P_j}|`.
    pub bracket_residual: Option<f64>,
    /// `||M^T J M - J||_inf` for the fixed-t block M.
    pub symplectic_defect: Option<f64>,
    /// Largest `|dw_j/dz_k - dw_k/dz_j|` of the mixed covector.
    pub mixed_asymmetry: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl CanonicityReport {
    fn new(
        bracket_residual: Option<f64>,
        symplectic_defect: Option<f64>,
        mixed_asymmetry: Option<f64>,
        tolerance: f64,
    ) -> Self {
        // NaN compares false, so a non-finite residual fails.
        let ok = [bracket_residual, symplectic_defect, mixed_asymmetry]
            .iter()
            .flatten()
            .all(|r| *r < tolerance);
        CanonicityReport {
            bracket_residual,
            symplectic_defect,
            mixed_asymmetry,
            tolerance,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Largest computed residual (NaN if any is NaN).
    pub fn max_residual(&self) -> f64 {
        [self.bracket_residual, self.symplectic_defect, self.mixed_asymmetry]
            .iter()
            .flatten()
            .fold(0.0, |acc: f64, r| if r.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(*r) })
    }
}

/// Largest deviation of the fundamental brackets of the components from
/// their canonical values.
pub fn bracket_residual<M: PhaseMap>(map: &M, x: &ExtendedPoint) -> Result<f64> {
    let n = map.n();
    let jac = jacobian(map, x)?;
    let bracket = |a: usize, b: usize| -> f64 {
        (0..n)
            .map(|k| jac[(a, k)] * jac[(b, n + k)] - jac[(a, n + k)] * jac[(b, k)])
            .sum()
    };
    let mut worst: f64 = 0.0;
    let mut record = |r: f64| {
        worst = if r.is_nan() || worst.is_nan() { f64::NAN } else { worst.max(r.abs()) };
    };
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            record(bracket(i, n + j) - delta);
            if i < j {
                record(bracket(i, j));
                record(bracket(n + i, n + j));
            }
        }
    }
    Ok(worst)
}

pub fn bracket_canonicity<M: PhaseMap>(map: &M, x: &ExtendedPoint, tol: f64) -> Result<CanonicityReport> {
    Ok(CanonicityReport::new(Some(bracket_residual(map, x)?), None, None, tol))
}

/// `||M^T J M - J||_inf` for a 2n x 2n matrix.
pub fn matrix_symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let j = standard_symplectic_matrix(m.nrows() / 2);
    let d = m.transpose() * &j * m - j;
    if d.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    d.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Symplectic defect of the fixed-t Jacobian block `d(Q,P)/d(q,p)`.
pub fn symplectic_defect<M: PhaseMap>(map: &M, x: &ExtendedPoint) -> Result<f64> {
    let n = map.n();
    let jac = jacobian(map, x)?;
    Ok(matrix_symplectic_defect(&jac.columns(0, 2 * n).into_owned()))
}

/// The mixed covector `w` at slots `[q.., p.., t]` of any scalar type.
pub fn mixed_covector_of<T: Scalar, M: PhaseMap>(map: &M, x: &[T]) -> Result<Vec<T>> {
    let n = map.n();
    let jac = jacobian_of(map, x)?;
    let t = 2 * n;
    Ok((0..2 * n)
        .map(|j| {
            (0..n).fold(T::constant(0.0), |acc, i| {
                let (dq, dp) = (&jac[i], &jac[n + i]);
                acc + dq[j].clone() * dp[t].clone() - dq[t].clone() * dp[j].clone()
            })
        })
        .collect())
}

pub fn mixed_covector<M: PhaseMap>(map: &M, x: &ExtendedPoint) -> Result<Vec<f64>> {
    mixed_covector_of(map, &x.slots())
}

pub fn mixed_asymmetry<M: PhaseMap>(map: &M, x: &ExtendedPoint) -> Result<f64> {
    covector_asymmetry(map.n(), &x.slots(), |z| mixed_covector_of(map, z))
}

/// Fixed-t symplectic defect together with closedness of the mixed
/// covector; both below `tol` means `Φ*Ω - Ω = dJ∧dt` locally.
pub fn time_dependent_canonicity<M: PhaseMap>(map: &M, x: &ExtendedPoint, tol: f64) -> Result<CanonicityReport> {
    let defect = symplectic_defect(map, x)?;
    let asymmetry = if map.is_time_independent() {
        0.0
    } else {
        mixed_asymmetry(map, x)?
    };
    Ok(CanonicityReport::new(None, Some(defect), Some(asymmetry), tol))
}

/// The new Hamiltonian recovered at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NewHamiltonian {
    /// `H(x) - (J(x) - J(ref))`; meaningful only up to a function of t.
    pub value: f64,
    /// `J(x) - J(ref)` from the line integral of `w`.
    pub j_difference: f64,
    /// `(dK/dq, dK/dp) = grad H - w` at x.
    pub grad_qp: Vec<f64>,
}

/// Recovers K from `d(H - K) = dJ` by integrating `w` from `(q_ref, p_ref)`
/// to `(q, p)` at the time of x.
pub fn recover_new_hamiltonian<M: PhaseMap, H: Field>(
    map: &M,
    h: &H,
    x: &ExtendedPoint,
    reference: &ExtendedPoint,
    tol: f64,
) -> Result<NewHamiltonian> {
    let n = map.n();
    let from = ExtendedPoint::new(reference.q.clone(), reference.p.clone(), x.t).slots();
    let to = x.slots();
    for z in segment_nodes(&from, &to) {
        let report = time_dependent_canonicity(map, &ExtendedPoint::from_slots(n, &z), tol)?;
        if !report.pass() {
            return Err(Error::NotCanonical(format!(
                "symplectic defect {:e}, mixed-covector asymmetry {:e} exceed {tol:e} at {z:?}",
                report.symplectic_defect.unwrap_or(f64::NAN),
                report.mixed_asymmetry.unwrap_or(f64::NAN),
            )));
        }
    }
    let j_difference = if map.is_time_independent() {
        0.0
    } else {
        line_integral(
            |z| {
                let mut w = z.to_vec();
                w.push(x.t);
                mixed_covector_of(map, &w)
            },
            &from[..2 * n],
            &to[..2 * n],
        )?
    };
    let w = mixed_covector(map, x)?;
    let dh = gradient(h, x)?;
    let grad_qp = (0..2 * n).map(|j| dh[j] - w[j]).collect();
    Ok(NewHamiltonian {
        value: h.eval_at(&to)? - j_difference,
        j_difference,
        grad_qp,
    })
}
