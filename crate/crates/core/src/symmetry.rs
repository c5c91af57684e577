//! Invariance of Hamiltonians, infinitesimal symmetries and both
//! directions of the Noether correspondence.
//!
//! With `R = {f, H} + df/dt` one has
//! `L_{X_f}(Ω + dH∧dt) = -dR∧dt`, so `X_f` is an infinitesimal symmetry
//! exactly when R has no (q, p) dependence.

use nalgebra::DMatrix;

use crate::brackets::ConstancyResidual;
use crate::canonicity::recover_new_hamiltonian;
use crate::error::Result;
use crate::flows::flow_map;
use crate::genfun::infinitesimal_map;
use crate::numdiff::{gradient, gradient_of, jacobian, Scalar};
use crate::phase::{ExtendedPoint, Field, PhaseMap, ScalarField};
use crate::report::{CheckReport, Verdict};

/// `H∘Φ` as a field: `(q, p, t) -> H(Q, P, t)`.
#[derive(Debug, Clone, Copy)]
pub struct Composed<H, M>(pub H, pub M);

impl<H: Field, M: PhaseMap> Field for Composed<H, M> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T> {
        let n = self.0.n();
        let mut image = self.1.apply(x)?;
        image.push(x[2 * n].clone());
        self.0.eval_at(&image)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0, |acc: f64, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x.abs()) })
}

/// Failure of `K = H∘Φ` at x. Time-independent maps compare raw values;
/// otherwise the (q, p) gradients of the recovered K and of `H∘Φ` are
/// compared, since K is only fixed up to a function of t. `tol` bounds
/// the canonicity check behind the recovery of K.
pub fn invariance_defect<M: PhaseMap, H: Field>(
    map: &M,
    h: &H,
    x: &ExtendedPoint,
    reference: &ExtendedPoint,
    tol: f64,
) -> Result<f64> {
    let composed = Composed(h, map);
    if map.is_time_independent() {
        let slots = x.slots();
        let new: f64 = composed.eval_at(&slots)?;
        let old: f64 = h.eval_at(&slots)?;
        return Ok((new - old).abs());
    }
    let n = map.n();
    let k = recover_new_hamiltonian(map, h, x, reference, tol)?;
    let dc = gradient(&composed, x)?;
    let diff: Vec<f64> = (0..2 * n).map(|j| k.grad_qp[j] - dc[j]).collect();
    Ok(sup_norm(&diff))
}

/// `||grad_{q,p}({f, H} + df/dt)||_inf`, the size of `L_{X_f}(Ω + dH∧dt)`.
pub fn symmetry_defect<F: Field, H: Field>(f: &F, h: &H, x: &ExtendedPoint) -> Result<f64> {
    let n = f.n();
    let g = gradient(&ConstancyResidual(f, h), x)?;
    Ok(sup_norm(&g[..2 * n]))
}

pub const PULLBACK_EPSILON: f64 = 1e-4;
const PULLBACK_STEPS: usize = 4;

/// Matrix of `Ω + dH∧dt` over (q, p, t) at `y`.
fn extended_form<H: Field>(h: &H, y: &ExtendedPoint) -> Result<DMatrix<f64>> {
    let n = h.n();
    let dim = 2 * n + 1;
    let dh = gradient(h, y)?;
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        a[(n + i, i)] = -1.0;
    }
    for j in 0..2 * n {
        a[(j, 2 * n)] += dh[j];
        a[(2 * n, j)] -= dh[j];
    }
    Ok(a)
}

fn pulled_back_form<H: Field>(f: &ScalarField, h: &H, x: &ExtendedPoint, eps: f64) -> Result<DMatrix<f64>> {
    let n = f.n();
    let map = flow_map(f, eps, PULLBACK_STEPS);
    let y = map.apply_point(x)?;
    let block = jacobian(&map, x)?;
    let dim = 2 * n + 1;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i < 2 * n {
            block[(i, j)]
        } else if j == 2 * n {
            1.0
        } else {
            0.0
        }
    });
    Ok(m.transpose() * extended_form(h, &y)? * m)
}

/// Independent estimate of `L_{X_f}(Ω + dH∧dt)` at x: the central
/// difference in ε of the pullback along the ε-flow of `X_f`. Returns the
/// largest entry in absolute value.
pub fn symmetry_defect_by_pullback<H: Field>(f: &ScalarField, h: &H, x: &ExtendedPoint, eps: f64) -> Result<f64> {
    let plus = pulled_back_form(f, h, x, eps)?;
    let minus = pulled_back_form(f, h, x, -eps)?;
    let lie = (plus - minus) / (2.0 * eps);
    Ok(sup_norm(lie.as_slice()))
}

pub const INFINITESIMAL_EPSILON: f64 = 1e-4;

/// `r(ε) = H(Φ_ε x) - H(x) - ε dG/dt` for the infinitesimal map of G.
fn infinitesimal_excess<H: Field>(g: &ScalarField, h: &H, x: &[f64], eps: f64) -> Result<f64> {
    let n = g.n();
    let composed = Composed(h, infinitesimal_map(g, eps));
    let new: f64 = composed.eval_at(x)?;
    let old: f64 = h.eval_at(x)?;
    let dg = gradient_of(g, x)?;
    Ok(new - old - eps * dg[2 * n])
}

/// First-order coefficient of `r(ε)`, by Richardson extrapolation over ε
/// and ε/2. It vanishes exactly when the infinitesimal map of G leaves H
/// invariant to first order.
pub fn infinitesimal_invariance_defect<H: Field>(g: &ScalarField, h: &H, x: &ExtendedPoint, eps: f64) -> Result<f64> {
    let slots = x.slots();
    let full = infinitesimal_excess(g, h, &slots, eps)?;
    let half = infinitesimal_excess(g, h, &slots, 0.5 * eps)?;
    Ok(((4.0 * half - full) / eps).abs())
}

fn sample_max<E>(sample: &[ExtendedPoint], mut eval: E) -> Result<f64>
where
    E: FnMut(&ExtendedPoint) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    for x in sample {
        let v = eval(x)?;
        if v.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(v.abs());
    }
    Ok(worst)
}

/// Constant of motion implies infinitesimal symmetry. When the constancy
/// residual is not small on the sample the implication is vacuous and the
/// verdict is not-applicable.
pub fn noether_forward<F: Field, H: Field>(f: &F, h: &H, sample: &[ExtendedPoint], tol: f64) -> Result<CheckReport> {
    let constancy = sample_max(sample, |x| ConstancyResidual(f, h).eval_at(&x.slots()))?;
    let symmetry = sample_max(sample, |x| symmetry_defect(f, h, x))?;
    let mut report = CheckReport::new("noether-forward", symmetry, tol, sample.len())
        .with_note(format!("max constancy residual {constancy:e}"))
        .with_note(format!("max symmetry defect {symmetry:e}"));
    if constancy.is_nan() || constancy >= tol {
        report.verdict = Verdict::NotApplicable;
        report.notes.push("hypothesis fails: not a constant of motion on the sample".into());
    }
    Ok(report)
}

/// Outcome of the reverse direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseNoether {
    pub report: CheckReport,
    /// Sample mean of `{f, H} + df/dt`.
    pub c_hat: f64,
    /// Sample standard deviation of the same quantity.
    pub spread: f64,
}

/// Infinitesimal symmetry implies that `f - c t` is a constant of motion
/// for the constant `c = {f, H} + df/dt`. The constant is estimated as the
/// sample mean; the check fails when the spread or the shifted residual
/// reaches `tol`.
pub fn noether_reverse<H: Field>(f: &ScalarField, h: &H, sample: &[ExtendedPoint], tol: f64) -> Result<ReverseNoether> {
    let symmetry = sample_max(sample, |x| symmetry_defect(f, h, x))?;
    let values = sample
        .iter()
        .map(|x| ConstancyResidual(f, h).eval_at(&x.slots()))
        .collect::<Result<Vec<f64>>>()?;
    let count = values.len().max(1) as f64;
    let c_hat = values.iter().sum::<f64>() / count;
    let spread = (values.iter().map(|v| (v - c_hat).powi(2)).sum::<f64>() / count).sqrt();
    let shifted = f.minus_time_multiple(c_hat);
    let residual = sample_max(sample, |x| ConstancyResidual(&shifted, h).eval_at(&x.slots()))?;
    let worst = if spread.is_nan() { f64::NAN } else { residual.max(spread) };
    let mut report = CheckReport::new("noether-reverse", worst, tol, sample.len())
        .with_note(format!("c = {c_hat:.16e}"))
        .with_note(format!("spread of {{f,H}} + df/dt: {spread:e}"))
        .with_note(format!("shifted constancy residual {residual:e}"))
        .with_note(format!("max symmetry defect {symmetry:e}"));
    if symmetry.is_nan() || symmetry >= tol {
        report.verdict = Verdict::NotApplicable;
        report.notes.push("hypothesis fails: not an infinitesimal symmetry on the sample".into());
    }
    Ok(ReverseNoether { report, c_hat, spread })
}

/// Sample maxima of the four equivalent predicates for one generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub constancy: f64,
    pub symmetry: f64,
    pub group_invariance: f64,
    pub infinitesimal_invariance: f64,
    pub tolerance: f64,
}

impl Equivalence {
    pub fn verdicts(&self) -> [bool; 4] {
        [
            self.constancy < self.tolerance,
            self.symmetry < self.tolerance,
            self.group_invariance < self.tolerance,
            self.infinitesimal_invariance < self.tolerance,
        ]
    }

    /// All four predicates hold or all four fail.
    pub fn consistent(&self) -> bool {
        let v = self.verdicts();
        v.iter().all(|b| *b) || v.iter().all(|b| !*b)
    }

    pub fn max_residual(&self) -> f64 {
        sup_norm(&[self.constancy, self.symmetry, self.group_invariance, self.infinitesimal_invariance])
    }
}

/// Evaluates constant of motion, infinitesimal symmetry, invariance under
/// the flow `Ψ_s` for each `s`, and infinitesimal invariance.
pub fn noether_equivalence<H: Field>(
    f: &ScalarField,
    h: &H,
    sample: &[ExtendedPoint],
    s_values: &[f64],
    steps: impl Fn(f64) -> usize,
    tol: f64,
) -> Result<Equivalence> {
    let constancy = sample_max(sample, |x| ConstancyResidual(f, h).eval_at(&x.slots()))?;
    let symmetry = sample_max(sample, |x| symmetry_defect(f, h, x))?;
    let mut group_invariance: f64 = 0.0;
    for &s in s_values {
        let map = flow_map(f, s, steps(s));
        let d = sample_max(sample, |x| invariance_defect(&map, h, x, x, tol))?;
        group_invariance = if d.is_nan() { f64::NAN } else { group_invariance.max(d) };
    }
    let infinitesimal_invariance =
        sample_max(sample, |x| infinitesimal_invariance_defect(f, h, x, INFINITESIMAL_EPSILON))?;
    Ok(Equivalence {
        constancy,
        symmetry,
        group_invariance,
        infinitesimal_invariance,
        tolerance: tol,
    })
}
