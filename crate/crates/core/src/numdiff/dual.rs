//! Forward-mode dual numbers with a vector of infinitesimal parts.
//!
//! `Dual<T>` is generic over its component type, so `Dual<Dual<f64>>`
//! carries exact second derivatives. Constants are stored with an empty
//! derivative vector; missing entries are treated as zero.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number types the expression evaluator and integrators are generic over.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;

    /// Real (non-infinitesimal) part.
    fn value(&self) -> f64;

    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self;

    /// `self^e` for a general exponent. Callers guarantee a positive base
    /// (or a zero base with positive exponent).
    fn powf(&self, e: &Self) -> Self;

    /// Integer power by repeated multiplication (square and multiply).
    fn powi(&self, n: i32) -> Self {
        let mut result = Self::constant(1.0);
        let mut base = self.clone();
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = result * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        if n < 0 {
            Self::constant(1.0) / result
        } else {
            result
        }
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::constant(c)
    }

    /// True if every component, including nested infinitesimal parts, is finite.
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powf(&self, e: &Self) -> Self {
        f64::powf(*self, *e)
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: Vec<T>) -> Self {
        Dual { re, eps }
    }

    pub fn lift(re: T) -> Self {
        Dual { re, eps: Vec::new() }
    }

    /// Independent variable seeded in direction `index` of `dim`.
    pub fn variable(re: T, index: usize, dim: usize) -> Self {
        let mut eps = vec![T::constant(0.0); dim];
        eps[index] = T::constant(1.0);
        Dual { re, eps }
    }

    /// Derivative part in direction `i` (zero if absent).
    pub fn d(&self, i: usize) -> T {
        self.eps.get(i).cloned().unwrap_or_else(|| T::constant(0.0))
    }

    fn chain(&self, re: T, slope: T) -> Self {
        Dual {
            re,
            eps: self.eps.iter().map(|e| slope.clone() * e.clone()).collect(),
        }
    }
}

fn zip_with<T: Scalar>(a: Vec<T>, b: Vec<T>, f: impl Fn(T, T) -> T, lone_b: impl Fn(T) -> T) -> Vec<T> {
    let (la, lb) = (a.len(), b.len());
    let mut out = Vec::with_capacity(la.max(lb));
    let mut ib = b.into_iter();
    for x in a {
        match ib.next() {
            Some(y) => out.push(f(x, y)),
            None => out.push(x),
        }
    }
    out.extend(ib.map(lone_b));
    out
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual {
            re: self.re + rhs.re,
            eps: zip_with(self.eps, rhs.eps, |x, y| x + y, |y| y),
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual {
            re: self.re - rhs.re,
            eps: zip_with(self.eps, rhs.eps, |x, y| x - y, |y| -y),
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        let a = self.re;
        let b = rhs.re;
        let left: Vec<T> = self.eps.into_iter().map(|e| b.clone() * e).collect();
        let right: Vec<T> = rhs.eps.into_iter().map(|e| a.clone() * e).collect();
        Dual {
            re: a * b,
            eps: zip_with(left, right, |x, y| x + y, |y| y),
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        // Real part divides directly so it is bit-identical to plain evaluation.
        let quot = self.re / rhs.re.clone();
        let right: Vec<T> = rhs.eps.into_iter().map(|e| quot.clone() * e).collect();
        let eps = zip_with(self.eps, right, |x, y| x - y, |y| -y)
            .into_iter()
            .map(|e| e / rhs.re.clone())
            .collect();
        Dual { re: quot, eps }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: self.eps.into_iter().map(|e| -e).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(c: f64) -> Self {
        Dual::lift(T::constant(c))
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    // black_box keeps LLVM from fusing the pair into a sincos call, whose
    // last bit can differ from a lone sin or cos.
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), std::hint::black_box(self.re.clone()).cos())
    }

    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -std::hint::black_box(self.re.clone()).sin())
    }

    fn tan(&self) -> Self {
        let t = self.re.tan();
        let slope = T::constant(1.0) + t.clone() * t.clone();
        self.chain(t, slope)
    }

    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }

    fn ln(&self) -> Self {
        self.chain(self.re.ln(), T::constant(1.0) / self.re.clone())
    }

    fn sqrt(&self) -> Self {
        let r = self.re.sqrt();
        let slope = T::constant(0.5) / r.clone();
        self.chain(r, slope)
    }

    fn abs(&self) -> Self {
        // The kink at zero takes the symmetric (zero) slope.
        let v = self.re.value();
        let sign = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.re.abs(), T::constant(sign))
    }

    fn powf(&self, e: &Self) -> Self {
        let base = self.re.clone();
        let expo = e.re.clone();
        let value = base.powf(&expo);
        let slope = expo.clone() * base.powf(&(expo.clone() - T::constant(1.0)));
        let mut out = self.chain(value.clone(), slope);
        if !e.eps.is_empty() && base.value() > 0.0 {
            let log_term = value * base.ln();
            let from_exp: Vec<T> = e.eps.iter().map(|d| log_term.clone() * d.clone()).collect();
            out.eps = zip_with(out.eps, from_exp, |x, y| x + y, |y| y);
        }
        out
    }

    fn scale(&self, c: f64) -> Self {
        Dual {
            re: self.re.scale(c),
            eps: self.eps.iter().map(|e| e.scale(c)).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.iter().all(Scalar::is_finite)
    }
}
