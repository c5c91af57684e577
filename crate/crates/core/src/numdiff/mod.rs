//! Exact derivatives by forward-mode dual numbers, plus a central
//! finite-difference oracle used only for cross-checking.

mod dual;

pub use dual::{Dual, Scalar};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::phase::{ExtendedPoint, Field, PhaseMap};

/// Default relative step for the finite-difference oracle.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Seed every slot of `x` as an independent direction.
pub fn seed<T: Scalar>(x: &[T]) -> Vec<Dual<T>> {
    let dim = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| Dual::variable(v.clone(), i, dim))
        .collect()
}

/// Full gradient `(df/dq, df/dp, df/dt)` at a point of any scalar type.
pub fn gradient_of<T: Scalar, F: Field>(f: &F, x: &[T]) -> Result<Vec<T>> {
    let out = f.eval_at(&seed(x))?;
    Ok((0..x.len()).map(|i| out.d(i)).collect())
}

/// Value and gradient from one dual pass.
pub fn value_and_gradient_of<T: Scalar, F: Field>(f: &F, x: &[T]) -> Result<(T, Vec<T>)> {
    let out = f.eval_at(&seed(x))?;
    let grad = (0..x.len()).map(|i| out.d(i)).collect();
    Ok((out.re, grad))
}

/// Covector of length 2n+1 ordered (q, p, t).
pub fn gradient<F: Field>(f: &F, x: &ExtendedPoint) -> Result<Vec<f64>> {
    gradient_of(f, &x.slots())
}

/// Second derivatives over (q, p, t) via nested duals.
pub fn hessian<F: Field>(f: &F, x: &ExtendedPoint) -> Result<DMatrix<f64>> {
    let slots = x.slots();
    let dim = slots.len();
    let outer = gradient_of(f, &seed(&slots))?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| outer[i].d(j)))
}

/// Rows are gradients of Q1..Qn, P1..Pn over any scalar type.
pub fn jacobian_of<T: Scalar, M: PhaseMap>(map: &M, x: &[T]) -> Result<Vec<Vec<T>>> {
    let out = map.apply(&seed(x))?;
    Ok(out
        .into_iter()
        .map(|c| (0..x.len()).map(|j| c.d(j)).collect())
        .collect())
}

/// 2n x (2n+1) Jacobian, columns ordered (q, p, t).
pub fn jacobian<M: PhaseMap>(map: &M, x: &ExtendedPoint) -> Result<DMatrix<f64>> {
    let slots = x.slots();
    let rows = jacobian_of(map, &slots)?;
    Ok(DMatrix::from_fn(rows.len(), slots.len(), |i, j| rows[i][j]))
}

fn probe_step(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Central differences with componentwise step `h * max(1, |x_i|)`.
pub fn fd_gradient<F: Field>(f: &F, x: &ExtendedPoint, h: f64) -> Result<Vec<f64>> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let slots = x.slots();
    let mut grad = Vec::with_capacity(slots.len());
    for i in 0..slots.len() {
        let step = probe_step(slots[i], h);
        let mut plus = slots.clone();
        let mut minus = slots.clone();
        plus[i] += step;
        minus[i] -= step;
        let fp: f64 = f.eval_at(&plus)?;
        let fm: f64 = f.eval_at(&minus)?;
        grad.push((fp - fm) / (plus[i] - minus[i]));
    }
    Ok(grad)
}

pub fn fd_jacobian<M: PhaseMap>(map: &M, x: &ExtendedPoint, h: f64) -> Result<DMatrix<f64>> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let slots = x.slots();
    let rows = 2 * map.n();
    let mut jac = DMatrix::zeros(rows, slots.len());
    for j in 0..slots.len() {
        let step = probe_step(slots[j], h);
        let mut plus = slots.clone();
        let mut minus = slots.clone();
        plus[j] += step;
        minus[j] -= step;
        let fp: Vec<f64> = map.apply(&plus)?;
        let fm: Vec<f64> = map.apply(&minus)?;
        for i in 0..rows {
            jac[(i, j)] = (fp[i] - fm[i]) / (plus[j] - minus[j]);
        }
    }
    Ok(jac)
}
