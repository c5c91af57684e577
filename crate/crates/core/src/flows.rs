//! Flows of Hamiltonian vector fields and one-parameter groups.
//!
//! The flow parameter `s` is never physical time: `t` rides along as a
//! frozen coordinate because `X_f` has no `d/dt` component. Integration is
//! fixed-step classic RK4 so residuals are reproducible, and it is generic
//! over [`Scalar`] so dual numbers can be pushed through the integrator.

use crate::brackets::hamiltonian_field_of;
use crate::error::{Error, Result};
use crate::numdiff::{Dual, Scalar};
use crate::phase::{ExtendedPoint, Field, MapFamily, PhaseMap, ScalarField, TangentVector};
use crate::quadrature::{line_integral, segment_nodes};
use crate::report::CheckReport;

/// `max(1000, ceil(1000 |s|))`
pub fn default_steps(s: f64) -> usize {
    ((1000.0 * s.abs()).ceil() as usize).max(1000)
}

/// Endpoint of the integral curve of `X_f` through `x0` after parameter `s`.
/// `x0` is laid out `[q.., p.., t]`; the result has the same layout.
pub fn flow_of<T: Scalar, F: Field>(f: &F, x0: &[T], s: f64, steps: usize) -> Result<Vec<T>> {
    assert!(steps >= 1, "RK4 needs at least one step");
    let n = f.n();
    let h = s / steps as f64;
    let t = x0[2 * n].clone();
    let mut y: Vec<T> = x0[..2 * n].to_vec();
    let field = |state: &[T]| -> Result<Vec<T>> {
        let mut slots = state.to_vec();
        slots.push(t.clone());
        hamiltonian_field_of(f, &slots)
    };
    let axpy = |y: &[T], k: &[T], a: f64| -> Vec<T> {
        y.iter().zip(k).map(|(yi, ki)| yi.clone() + ki.scale(a)).collect()
    };
    for step in 0..steps {
        let k1 = field(&y)?;
        let k2 = field(&axpy(&y, &k1, 0.5 * h))?;
        let k3 = field(&axpy(&y, &k2, 0.5 * h))?;
        let k4 = field(&axpy(&y, &k3, h))?;
        for i in 0..2 * n {
            let incr = k1[i].clone() + k2[i].scale(2.0) + k3[i].scale(2.0) + k4[i].clone();
            y[i] = y[i].clone() + incr.scale(h / 6.0);
        }
        if !y.iter().all(Scalar::is_finite) {
            return Err(Error::NonFinite(format!("flow state left the finite reals at step {step}")));
        }
    }
    y.push(t);
    Ok(y)
}

pub fn integrate_flow<F: Field>(f: &F, x0: &ExtendedPoint, s: f64, steps: usize) -> Result<ExtendedPoint> {
    let out = flow_of(f, &x0.slots(), s, steps)?;
    Ok(ExtendedPoint::from_slots(f.n(), &out))
}

/// The time-`s` map of the flow of `X_f`, usable wherever a [`PhaseMap`] is.
#[derive(Debug, Clone)]
pub struct FlowMap {
    pub generator: ScalarField,
    pub s: f64,
    pub steps: usize,
}

pub fn flow_map(f: &ScalarField, s: f64, steps: usize) -> FlowMap {
    FlowMap {
        generator: f.clone(),
        s,
        steps,
    }
}

impl PhaseMap for FlowMap {
    fn n(&self) -> usize {
        self.generator.n()
    }

    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        if self.s == 0.0 {
            return Ok(x[..2 * self.n()].to_vec());
        }
        let mut out = flow_of(&self.generator, x, self.s, self.steps)?;
        out.pop();
        Ok(out)
    }

    fn is_time_independent(&self) -> bool {
        self.generator.is_time_independent()
    }
}

/// Compares `Psi_{s1}(Psi_{s2}(x0))` with `Psi_{s1+s2}(x0)`.
pub fn check_group_law<F: Field>(
    f: &F,
    x0: &ExtendedPoint,
    s1: f64,
    s2: f64,
    steps: usize,
    tol: f64,
) -> Result<CheckReport> {
    let inner = integrate_flow(f, x0, s2, steps)?;
    let composed = integrate_flow(f, &inner, s1, steps)?;
    let direct = integrate_flow(f, x0, s1 + s2, steps)?;
    let residual = composed.distance(&direct);
    Ok(CheckReport::new("group-law", residual, tol, 1)
        .with_note(format!("s1 = {s1}, s2 = {s2}, steps = {steps}")))
}

/// `||Psi_0(x) - x||` over the phase components.
pub fn identity_defect(family: &MapFamily, x: &ExtendedPoint) -> Result<f64> {
    let at_zero = family.at(0.0).apply_point(x)?;
    Ok(at_zero.distance(x))
}

/// `[dQ/ds, dP/ds]` at `s = 0` for points of any scalar type.
pub fn generator_field_of<T: Scalar>(family: &MapFamily, x: &[T]) -> Result<Vec<T>> {
    let lifted: Vec<Dual<T>> = x.iter().cloned().map(Dual::lift).collect();
    let s = Dual::variable(T::constant(0.0), 0, 1);
    let out = family.apply_with_s(&lifted, s)?;
    Ok(out.into_iter().map(|c| c.d(0)).collect())
}

/// The tangent `d/ds Psi_s(x)` at `s = 0`. Fails unless `Psi_0(x) = x`
/// within `tol`.
pub fn infinitesimal_generator(family: &MapFamily, x: &ExtendedPoint, tol: f64) -> Result<TangentVector> {
    let defect = identity_defect(family, x)?;
    if defect.is_nan() || defect > tol {
        return Err(Error::NotAGroupAtZero { defect });
    }
    let n = family.n();
    let v = generator_field_of(family, &x.slots())?;
    Ok(TangentVector {
        dq: v[..n].to_vec(),
        dp: v[n..].to_vec(),
        dt: 0.0,
    })
}

/// Outcome of integrating `V ⌟ ω` along a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredGenerator {
    /// `f(x) - f(ref)`.
    pub difference: f64,
    /// Largest `|dc_j/dz_k - dc_k/dz_j|` seen along the segment.
    pub asymmetry: f64,
    /// The family depends on t, so f is only fixed up to a function of t.
    pub time_dependent: bool,
}

/// Covector `(df/dq, df/dp) = (-dp_V, dq_V)` contracted from the generator.
fn contracted_covector<T: Scalar>(family: &MapFamily, z: &[T]) -> Result<Vec<T>> {
    let n = family.n();
    let v = generator_field_of(family, z)?;
    let mut c = Vec::with_capacity(2 * n);
    c.extend(v[n..].iter().map(|d| -d.clone()));
    c.extend(v[..n].iter().cloned());
    Ok(c)
}

/// Largest asymmetry of the phase-space derivative of `covector` at `z`.
pub(crate) fn covector_asymmetry<C>(n: usize, z: &[f64], covector: C) -> Result<f64>
where
    C: Fn(&[Dual<f64>]) -> Result<Vec<Dual<f64>>>,
{
    let seeded: Vec<Dual<f64>> = z
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < 2 * n { Dual::variable(v, i, 2 * n) } else { Dual::lift(v) })
        .collect();
    let c = covector(&seeded)?;
    let mut worst: f64 = 0.0;
    for j in 0..2 * n {
        for k in (j + 1)..2 * n {
            let a = (c[j].d(k) - c[k].d(j)).abs();
            if a.is_nan() {
                return Ok(f64::NAN);
            }
            worst = worst.max(a);
        }
    }
    Ok(worst)
}

/// Recovers `f(x) - f(ref)` for the generator of `family` by line
/// integration at the time of `x`. The segment runs from `(q_ref, p_ref)`
/// to `(q, p)`; the domain must be star-shaped around `ref`.
pub fn recover_generator_function(
    family: &MapFamily,
    x: &ExtendedPoint,
    reference: &ExtendedPoint,
    tol: f64,
) -> Result<RecoveredGenerator> {
    let n = family.n();
    infinitesimal_generator(family, x, tol)?;
    let from = ExtendedPoint::new(reference.q.clone(), reference.p.clone(), x.t).slots();
    let to = x.slots();
    let mut asymmetry: f64 = 0.0;
    for z in segment_nodes(&from, &to) {
        let a = covector_asymmetry(n, &z, |w| contracted_covector(family, w))?;
        if a.is_nan() {
            asymmetry = f64::NAN;
            break;
        }
        asymmetry = asymmetry.max(a);
    }
    if asymmetry.is_nan() || asymmetry > tol {
        return Err(Error::NotClosed { asymmetry });
    }
    let difference = line_integral(
        |z| {
            let mut w = z.to_vec();
            w.push(x.t);
            contracted_covector(family, &w)
        },
        &from[..2 * n],
        &to[..2 * n],
    )?;
    let time_dependent = !family.at(0.0).is_time_independent();
    Ok(RecoveredGenerator {
        difference,
        asymmetry,
        time_dependent,
    })
}
