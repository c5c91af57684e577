//! Canonical chart, points, scalar fields and phase-space maps.
//!
//! Everything lives in one global canonical chart on R^2n (optionally
//! extended by time). Points are handed to fields and maps as a flat slot
//! vector `[q1..qn, p1..pn, t]`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Signature, Var};
use crate::numdiff::Scalar;

/// Named parameter values (`m`, `k`, `w`, `c`, ...).
pub type ParamTable = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chart {
    pub n: usize,
    pub time_extended: bool,
}

impl Chart {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("a chart needs at least one degree of freedom".into()));
        }
        Ok(Chart { n, time_extended: true })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn at_time(self, t: f64) -> ExtendedPoint {
        ExtendedPoint { q: self.q, p: self.p, t }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl ExtendedPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have equal length");
        ExtendedPoint { q, p, t }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// `[q.., p.., t]`
    pub fn slots(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n() + 1);
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.p);
        v.push(self.t);
        v
    }

    pub fn from_slots(n: usize, slots: &[f64]) -> Self {
        ExtendedPoint {
            q: slots[..n].to_vec(),
            p: slots[n..2 * n].to_vec(),
            t: slots[2 * n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slots().iter().all(|v| v.is_finite())
    }

    /// Sup-norm distance over (q, p, t).
    pub fn distance(&self, other: &ExtendedPoint) -> f64 {
        self.slots()
            .iter()
            .zip(other.slots())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, nan_max)
    }
}

/// Anything evaluable as a scalar function of `[q.., p.., t]`.
pub trait Field {
    fn n(&self) -> usize;
    fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T>;

    /// Partial derivatives over `[q.., p.., t]`, by forward-mode duals
    /// unless the field knows them in closed form.
    fn partials_at<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>>
    where
        Self: Sized,
    {
        let mut g = crate::numdiff::gradient_of(self, x)?;
        g.truncate(2 * self.n() + 1);
        Ok(g)
    }
}

/// A time-preserving transformation `(q, p, t) -> (Q, P, t)`.
pub trait PhaseMap {
    fn n(&self) -> usize;

    /// Returns `[Q1..Qn, P1..Pn]`.
    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>>;

    /// Whether the map is known not to depend on t.
    fn is_time_independent(&self) -> bool {
        false
    }

    fn apply_point(&self, x: &ExtendedPoint) -> Result<ExtendedPoint> {
        let out = self.apply(&x.slots())?;
        let n = self.n();
        Ok(ExtendedPoint {
            q: out[..n].to_vec(),
            p: out[n..].to_vec(),
            t: x.t,
        })
    }
}

impl<F: Field> Field for &F {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T> {
        (**self).eval_at(x)
    }
    fn partials_at<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).partials_at(x)
    }
}

impl<M: PhaseMap + ?Sized> PhaseMap for &M {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).apply(x)
    }
    fn is_time_independent(&self) -> bool {
        (**self).is_time_independent()
    }
}

/// A DSL expression bound to its chart and parameter values. The group
/// parameter `s`, if referenced, takes the bound value `s`. Partial
/// derivatives over `[q.., p.., t]` are differentiated symbolically once at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub expr: Expr,
    pub sig: Signature,
    pub params: Vec<f64>,
    pub s: f64,
    partials: Vec<Expr>,
    uses_s: bool,
}

impl ScalarField {
    pub fn parse(source: &str, n: usize, params: &ParamTable) -> Result<Self> {
        let sig = Signature::with_params(n, params.keys().cloned().collect());
        Self::parse_with(source, sig, params)
    }

    pub fn parse_with(source: &str, sig: Signature, params: &ParamTable) -> Result<Self> {
        let expr = expr::parse_with(source, &sig)?;
        let values = sig
            .params
            .iter()
            .map(|k| {
                params
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("parameter {k:?} is unbound")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_expr(expr, sig, values))
    }

    pub fn from_expr(expr: Expr, sig: Signature, params: Vec<f64>) -> Self {
        let n = sig.n;
        let partials = (1..=n)
            .map(Var::Q)
            .chain((1..=n).map(Var::P))
            .chain([Var::T])
            .map(|v| expr.derivative(v))
            .collect();
        let uses_s = expr.mentions(Var::S);
        ScalarField { expr, sig, params, s: 0.0, partials, uses_s }
    }

    fn eval_expr<T: Scalar>(&self, e: &Expr, x: &[T]) -> Result<T> {
        if self.depends_on_s() && x.len() <= 2 * self.sig.n + 1 {
            let mut slots = x.to_vec();
            slots.push(T::constant(self.s));
            e.eval_slots(self.sig.n, &slots, &self.params)
        } else {
            e.eval_slots(self.sig.n, x, &self.params)
        }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn eval(&self, x: &ExtendedPoint) -> Result<f64> {
        self.eval_at(&x.slots())
    }

    /// Evaluate with the group parameter supplied as a number of the same type.
    pub fn eval_with_s<T: Scalar>(&self, x: &[T], s: T) -> Result<T> {
        let mut slots = x.to_vec();
        slots.push(s);
        self.expr.eval_slots(self.sig.n, &slots, &self.params)
    }

    pub fn is_time_independent(&self) -> bool {
        !self.expr.mentions(Var::T)
    }

    pub fn depends_on_s(&self) -> bool {
        self.uses_s
    }

    pub fn is_smooth(&self) -> bool {
        self.expr.is_smooth()
    }

    /// `self - c*t`, used to shift a generator by a multiple of time.
    pub fn minus_time_multiple(&self, c: f64) -> ScalarField {
        use crate::expr::BinOp;
        let shift = Expr::binary(BinOp::Mul, Expr::num(c), Expr::Var(Var::T));
        let expr = Expr::binary(BinOp::Sub, self.expr.clone(), shift);
        Self::from_expr(expr, self.sig.clone(), self.params.clone()).with_s(self.s)
    }
}

impl Field for ScalarField {
    fn n(&self) -> usize {
        self.sig.n
    }

    fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T> {
        self.eval_expr(&self.expr, x)
    }

    fn partials_at<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        self.partials.iter().map(|e| self.eval_expr(e, x)).collect()
    }
}

/// A phase map whose 2n components are DSL expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMap {
    n: usize,
    components: Vec<ScalarField>,
}

impl ExprMap {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        if components.is_empty() || !components.len().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "a phase map needs 2n components, got {}",
                components.len()
            )));
        }
        let n = components.len() / 2;
        if let Some(c) = components.iter().find(|c| c.sig.n != n) {
            return Err(Error::Dimension(format!(
                "component parsed for n = {} in a map with n = {n}",
                c.sig.n
            )));
        }
        Ok(ExprMap { n, components })
    }

    pub fn parse(sources: &[&str], params: &ParamTable) -> Result<Self> {
        let n = sources.len() / 2;
        let components = sources
            .iter()
            .map(|s| ScalarField::parse(s, n.max(1), params))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn identity(n: usize) -> Self {
        let sig = Signature::new(n, &[]);
        let comps = (1..=n)
            .map(|i| Expr::Var(Var::Q(i)))
            .chain((1..=n).map(|i| Expr::Var(Var::P(i))))
            .map(|e| ScalarField::from_expr(e, sig.clone(), Vec::new()))
            .collect();
        ExprMap { n, components: comps }
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }
}

impl PhaseMap for ExprMap {
    fn n(&self) -> usize {
        self.n
    }

    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        self.components.iter().map(|c| c.eval_at(x)).collect()
    }

    fn is_time_independent(&self) -> bool {
        self.components.iter().all(ScalarField::is_time_independent)
    }
}

/// A family of maps depending on the group parameter `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily {
    map: ExprMap,
}

impl MapFamily {
    pub fn new(map: ExprMap) -> Self {
        MapFamily { map }
    }

    pub fn parse(sources: &[&str], params: &ParamTable) -> Result<Self> {
        Ok(MapFamily { map: ExprMap::parse(sources, params)? })
    }

    pub fn n(&self) -> usize {
        self.map.n
    }

    /// The member of the family at parameter `s`.
    pub fn at(&self, s: f64) -> ExprMap {
        ExprMap {
            n: self.map.n,
            components: self.map.components.iter().map(|c| c.clone().with_s(s)).collect(),
        }
    }

    pub fn apply_with_s<T: Scalar>(&self, x: &[T], s: T) -> Result<Vec<T>> {
        self.map
            .components
            .iter()
            .map(|c| c.eval_with_s(x, s.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dt: f64,
}

impl TangentVector {
    /// `[dq.., dp..]`
    pub fn phase_components(&self) -> Vec<f64> {
        self.dq.iter().chain(&self.dp).copied().collect()
    }

    pub fn distance(&self, other: &TangentVector) -> f64 {
        self.phase_components()
            .iter()
            .zip(other.phase_components())
            .map(|(a, b)| (a - b).abs())
            .fold((self.dt - other.dt).abs(), nan_max)
    }
}

/// `max` that keeps NaN, so a non-finite component never reads as zero.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// The canonical structure matrix `[[0, I], [-I, 0]]`.
pub fn standard_symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}
