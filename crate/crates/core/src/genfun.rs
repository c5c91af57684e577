//! Generating functions of types 1 and 2 and infinitesimal canonical
//! transformations.
//!
//! A type-2 function `F2(q, P, t)` defines the map through `p = dF2/dq`,
//! `Q = dF2/dP`; a type-1 function `F1(q, Q, t)` through `p = dF1/dq`,
//! `P = -dF1/dQ`. In both cases the unknown half is found by Newton on
//! `r(y) = p - dF/dq(q, y, t)`. Derivatives of the resulting map come from
//! the implicit function theorem: after the f64 solve converges, two more
//! Newton steps are taken in the caller's scalar type.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::Signature;
use crate::numdiff::{gradient_of, Dual, Scalar};
use crate::phase::{ExtendedPoint, Field, ParamTable, PhaseMap, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Bound on `||p - dF/dq||_inf` at the solution.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings tried when a full step increases the residual.
    pub max_halvings: usize,
    /// Reciprocal condition number below which the solve is refused.
    pub min_rcond: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iterations: 50,
            max_halvings: 30,
            min_rcond: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// `F2(q, P, t)`
    Type2,
    /// `F1(q, Q, t)`
    Type1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guess {
    /// Start from the old momenta (the identity is a type-2 map).
    Momentum,
    /// A fixed starting value for the unknown half.
    Fixed(Vec<f64>),
}

/// A phase map defined implicitly by a generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMap {
    pub function: ScalarField,
    pub kind: Kind,
    pub guess: Guess,
    pub newton: NewtonOptions,
}

/// Outcome of one implicit solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub image: ExtendedPoint,
    pub residual: f64,
    pub iterations: usize,
}

/// Parses a type-2 function written in `q` and `P`.
pub fn parse_f2(source: &str, n: usize, params: &ParamTable) -> Result<ScalarField> {
    let sig = Signature::with_params(n, params.keys().cloned().collect()).with_symbols("q", "P");
    ScalarField::parse_with(source, sig, params)
}

/// Parses a type-1 function written in `q` and `Q`.
pub fn parse_f1(source: &str, n: usize, params: &ParamTable) -> Result<ScalarField> {
    let sig = Signature::with_params(n, params.keys().cloned().collect()).with_symbols("q", "Q");
    ScalarField::parse_with(source, sig, params)
}

impl GeneratedMap {
    pub fn type2(f2: ScalarField, newton: NewtonOptions) -> Self {
        GeneratedMap { function: f2, kind: Kind::Type2, guess: Guess::Momentum, newton }
    }

    pub fn type1(f1: ScalarField, guess: Vec<f64>, newton: NewtonOptions) -> Self {
        GeneratedMap { function: f1, kind: Kind::Type1, guess: Guess::Fixed(guess), newton }
    }

    fn n(&self) -> usize {
        self.function.n()
    }

    /// Slots `[q.., y.., t]` of the generating function.
    fn slots<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
        let n = y.len();
        let mut s = Vec::with_capacity(2 * n + 1);
        s.extend_from_slice(&x[..n]);
        s.extend_from_slice(y);
        s.push(x[2 * n].clone());
        s
    }

    /// Residual `p - dF/dq` and its Jacobian in y, `-d2F/dq dy`.
    fn residual<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let n = self.n();
        let lifted: Vec<Dual<T>> = x.iter().cloned().map(Dual::lift).collect();
        let seeded: Vec<Dual<T>> = y
            .iter()
            .enumerate()
            .map(|(j, v)| Dual::variable(v.clone(), j, n))
            .collect();
        let grad = gradient_of(&self.function, &Self::slots(&lifted, &seeded))?;
        let r = (0..n).map(|i| x[n + i].clone() - grad[i].re.clone()).collect();
        let jac = (0..n)
            .map(|i| (0..n).map(|j| -grad[i].d(j)).collect())
            .collect();
        Ok((r, jac))
    }

    fn check_conditioning(&self, jac: &[Vec<f64>]) -> Result<()> {
        let n = jac.len();
        let m = DMatrix::from_fn(n, n, |i, j| jac[i][j]);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generating-function Hessian is not finite".into()));
        }
        let sv = m.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if hi == 0.0 || lo / hi < self.newton.min_rcond {
            let which = match self.kind {
                Kind::Type2 => "det(d2F2/dq dP)",
                Kind::Type1 => "det(d2F1/dq dQ)",
            };
            return Err(Error::SingularJacobian(format!(
                "{which} vanishes: reciprocal condition {:e} below {:e}",
                if hi == 0.0 { 0.0 } else { lo / hi },
                self.newton.min_rcond
            )));
        }
        Ok(())
    }

    /// Damped Newton in f64; returns the unknown half and diagnostics.
    fn solve(&self, x: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.n();
        let mut y = match &self.guess {
            Guess::Momentum => x[n..2 * n].to_vec(),
            Guess::Fixed(g) => {
                if g.len() != n {
                    return Err(Error::Dimension(format!("initial guess has {} entries, need {n}", g.len())));
                }
                g.clone()
            }
        };
        let norm = |r: &[f64]| r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let (mut r, mut jac) = self.residual(x, &y)?;
        let mut res = norm(&r);
        for iteration in 0..self.newton.max_iterations {
            if res < self.newton.tol {
                return Ok((y, res, iteration));
            }
            self.check_conditioning(&jac)?;
            let step = solve_linear(jac.clone(), r.clone())?;
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=self.newton.max_halvings {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a - scale * d).collect();
                if let Ok((tr, tj)) = self.residual(x, &trial) {
                    let tres = norm(&tr);
                    if tres.is_finite() && tres <= res {
                        accepted = Some((trial, tr, tj, tres));
                        break;
                    }
                }
                scale *= 0.5;
            }
            match accepted {
                Some((ny, nr, nj, nres)) => {
                    y = ny;
                    r = nr;
                    jac = nj;
                    res = nres;
                }
                None => {
                    return Err(Error::NoConvergence(format!(
                        "no descent step after {} halvings at iteration {iteration}, residual {res:e}",
                        self.newton.max_halvings
                    )))
                }
            }
        }
        if res < self.newton.tol {
            return Ok((y, res, self.newton.max_iterations));
        }
        Err(Error::NoConvergence(format!(
            "residual {res:e} above {:e} after {} iterations",
            self.newton.tol, self.newton.max_iterations
        )))
    }

    /// Image of one point with solve diagnostics.
    pub fn solve_point(&self, x: &ExtendedPoint) -> Result<Solution> {
        let slots = x.slots();
        let (y, residual, iterations) = self.solve(&slots)?;
        let out = self.finish(&slots, y)?;
        let image = ExtendedPoint::from_slots(self.n(), &[out, vec![x.t]].concat());
        Ok(Solution { image, residual, iterations })
    }

    /// The explicit half from the solved half.
    fn finish<T: Scalar>(&self, x: &[T], y: Vec<T>) -> Result<Vec<T>> {
        let n = self.n();
        let grad = gradient_of(&self.function, &Self::slots(x, &y))?;
        let explicit: Vec<T> = grad[n..2 * n].to_vec();
        Ok(match self.kind {
            Kind::Type2 => [explicit, y].concat(),
            Kind::Type1 => [y, explicit.into_iter().map(|v| -v).collect()].concat(),
        })
    }
}

impl PhaseMap for GeneratedMap {
    fn n(&self) -> usize {
        self.function.n()
    }

    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        let values: Vec<f64> = x.iter().map(Scalar::value).collect();
        let (y0, _, _) = self.solve(&values)?;
        // Newton steps in T carry the implicit derivatives; two steps cover
        // nested (second-order) duals.
        let mut y: Vec<T> = y0.into_iter().map(T::constant).collect();
        for _ in 0..2 {
            let (r, jac) = self.residual(x, &y)?;
            let step = solve_linear(jac, r)?;
            y = y.into_iter().zip(step).map(|(a, d)| a - d).collect();
        }
        self.finish(x, y)
    }

    fn is_time_independent(&self) -> bool {
        self.function.is_time_independent()
    }
}

/// Gaussian elimination with partial pivoting on the real parts.
#[allow(clippy::needless_range_loop)]
fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))
            .expect("non-empty range");
        if a[pivot][col].value() == 0.0 || !a[pivot][col].value().is_finite() {
            return Err(Error::SingularJacobian(format!("zero pivot in column {col}")));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                a[row][k] = a[row][k].clone() - factor.clone() * a[col][k].clone();
            }
            b[row] = b[row].clone() - factor * b[col].clone();
        }
    }
    let mut x = vec![T::constant(0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Ok(x)
}

/// Solves the type-2 relations at x starting from `P = p`.
pub fn map_from_f2(f2: &ScalarField, x: &ExtendedPoint, newton: NewtonOptions) -> Result<Solution> {
    GeneratedMap::type2(f2.clone(), newton).solve_point(x)
}

/// Solves the type-1 relations at x starting from `Q = guess`.
pub fn map_from_f1(f1: &ScalarField, x: &ExtendedPoint, newton: NewtonOptions, guess: &[f64]) -> Result<Solution> {
    GeneratedMap::type1(f1.clone(), guess.to_vec(), newton).solve_point(x)
}

/// `Q = q + ε dG/dp`, `P = p - ε dG/dq`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfinitesimalMap {
    pub generator: ScalarField,
    pub epsilon: f64,
}

pub fn infinitesimal_map(g: &ScalarField, epsilon: f64) -> InfinitesimalMap {
    InfinitesimalMap { generator: g.clone(), epsilon }
}

impl PhaseMap for InfinitesimalMap {
    fn n(&self) -> usize {
        self.generator.n()
    }

    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        let dg = gradient_of(&self.generator, x)?;
        let e = self.epsilon;
        let q = (0..n).map(|i| x[i].clone() + dg[n + i].scale(e));
        let p = (0..n).map(|i| x[n + i].clone() - dg[i].scale(e));
        Ok(q.chain(p).collect())
    }

    fn is_time_independent(&self) -> bool {
        self.generator.is_time_independent()
    }
}
