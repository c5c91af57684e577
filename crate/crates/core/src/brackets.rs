//! Poisson brackets, Hamiltonian and evolution vector fields.
//!
//! Sign conventions: `{f, g} = df/dq . dg/dp - df/dp . dg/dq`,
//! `X_f = (df/dp, -df/dq)` and `{f, g} = X_g f`.

use crate::error::Result;
use crate::numdiff::Scalar;
use crate::phase::{ExtendedPoint, Field, TangentVector};

pub fn bracket_of<T: Scalar, F: Field, G: Field>(f: &F, g: &G, x: &[T]) -> Result<T> {
    let n = f.n();
    let df = f.partials_at(x)?;
    let dg = g.partials_at(x)?;
    let mut acc = T::constant(0.0);
    for i in 0..n {
        acc = acc + df[i].clone() * dg[n + i].clone() - df[n + i].clone() * dg[i].clone();
    }
    Ok(acc)
}

pub fn poisson_bracket<F: Field, G: Field>(f: &F, g: &G, x: &ExtendedPoint) -> Result<f64> {
    bracket_of(f, g, &x.slots())
}

/// `{f, g}` as a field in its own right, so brackets can be nested.
#[derive(Debug, Clone, Copy)]
pub struct Bracket<F, G>(pub F, pub G);

impl<F: Field, G: Field> Field for Bracket<F, G> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T> {
        bracket_of(&self.0, &self.1, x)
    }
}

/// `[dq.., dp..]` of X_f at a point of any scalar type.
pub fn hamiltonian_field_of<T: Scalar, F: Field>(f: &F, x: &[T]) -> Result<Vec<T>> {
    let n = f.n();
    let df = f.partials_at(x)?;
    let mut v = Vec::with_capacity(2 * n);
    v.extend(df[n..2 * n].iter().cloned());
    v.extend(df[..n].iter().map(|d| -d.clone()));
    Ok(v)
}

pub fn hamiltonian_vector_field<F: Field>(f: &F, x: &ExtendedPoint) -> Result<TangentVector> {
    let n = f.n();
    let v = hamiltonian_field_of(f, &x.slots())?;
    Ok(TangentVector {
        dq: v[..n].to_vec(),
        dp: v[n..].to_vec(),
        dt: 0.0,
    })
}

/// E_H = X_H + d/dt.
pub fn evolution_vector_field<F: Field>(h: &F, x: &ExtendedPoint) -> Result<TangentVector> {
    Ok(TangentVector {
        dt: 1.0,
        ..hamiltonian_vector_field(h, x)?
    })
}

/// `{f, H} + df/dt`, the rate of change of f along the dynamics of H.
#[derive(Debug, Clone, Copy)]
pub struct ConstancyResidual<F, H>(pub F, pub H);

impl<F: Field, H: Field> Field for ConstancyResidual<F, H> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T> {
        let n = self.0.n();
        let df = self.0.partials_at(x)?;
        let dh = self.1.partials_at(x)?;
        let mut acc = df[2 * n].clone();
        for i in 0..n {
            acc = acc + df[i].clone() * dh[n + i].clone() - df[n + i].clone() * dh[i].clone();
        }
        Ok(acc)
    }
}

pub fn constancy_residual<F: Field, H: Field>(f: &F, h: &H, x: &ExtendedPoint) -> Result<f64> {
    ConstancyResidual(f, h).eval_at(&x.slots())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{ParamTable, ScalarField};
    use proptest::prelude::*;

    fn params(pairs: &[(&str, f64)]) -> ParamTable {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn field(src: &str, n: usize) -> ScalarField {
        ScalarField::parse(src, n, &params(&[("m", 1.0), ("w", 1.0), ("k", 1.0)])).unwrap()
    }

    fn pt1(q: f64, p: f64, t: f64) -> ExtendedPoint {
        ExtendedPoint::new(vec![q], vec![p], t)
    }

    const OSC: &str = "(p1^2 + p2^2)/(2*m) + m*w^2*(q1^2 + q2^2)/2";
    const ANGULAR: &str = "q1*p2 - q2*p1";

    #[test]
    fn canonical_pair() {
        let x = pt1(0.3, -1.2, 0.9);
        assert_eq!(poisson_bracket(&field("q1", 1), &field("p1", 1), &x).unwrap(), 1.0);
    }

    #[test]
    fn angular_momentum_commutes_with_oscillator() {
        let x = ExtendedPoint::new(vec![0.4, -1.1], vec![1.7, 0.2], 0.0);
        let v = poisson_bracket(&field(ANGULAR, 2), &field(OSC, 2), &x).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn dilation_with_kinetic() {
        let v = poisson_bracket(&field("q1*p1", 1), &field("p1^2", 1), &pt1(2.0, 3.0, 0.0)).unwrap();
        assert_eq!(v, 18.0);
    }

    #[test]
    fn scaling_generator_field() {
        let (q, p, t) = (1.5, -0.7, 2.0);
        let v = hamiltonian_vector_field(&field("q1*p1 - t*p1^2/m", 1), &pt1(q, p, t)).unwrap();
        assert!((v.dq[0] - (q - 2.0 * t * p)).abs() < 1e-14);
        assert!((v.dp[0] - (-p)).abs() < 1e-14);
        assert_eq!(v.dt, 0.0);
    }

    #[test]
    fn translation_field() {
        let v = hamiltonian_vector_field(&field("p1", 1), &pt1(0.1, 0.2, 0.3)).unwrap();
        assert_eq!((v.dq[0], v.dp[0]), (1.0, 0.0));
    }

    #[test]
    fn rotation_field() {
        let (x, y, px, py) = (0.4, -1.1, 1.7, 0.2);
        let v = hamiltonian_vector_field(&field(ANGULAR, 2), &ExtendedPoint::new(vec![x, y], vec![px, py], 0.0)).unwrap();
        assert_eq!(v.dq, vec![-y, x]);
        assert_eq!(v.dp, vec![-py, px]);
    }

    #[test]
    fn evolution_fields() {
        let e = evolution_vector_field(&field("p1^2/2", 1), &pt1(0.0, 2.0, 0.0)).unwrap();
        assert_eq!((e.dq[0], e.dp[0], e.dt), (2.0, 0.0, 1.0));
        let e = evolution_vector_field(&field("p1^2/(2*m) - k*t*q1", 1), &pt1(1.0, 1.0, 2.0)).unwrap();
        assert_eq!((e.dq[0], e.dp[0], e.dt), (1.0, 2.0, 1.0));
        let h = field(OSC, 2);
        let a = evolution_vector_field(&h, &ExtendedPoint::new(vec![0.5, 0.1], vec![0.2, 0.3], 0.0)).unwrap();
        let b = evolution_vector_field(&h, &ExtendedPoint::new(vec![0.5, 0.1], vec![0.2, 0.3], 7.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constancy_residuals() {
        let h = field(OSC, 2);
        let x = ExtendedPoint::new(vec![0.5, 0.1], vec![0.2, 0.3], 0.0);
        assert!(constancy_residual(&h, &h, &x).unwrap().abs() < 1e-15);

        let h = field("p1^2/(2*m) - k*t*q1", 1);
        let g = field("q1 - t*p1/m + k*t^3/(3*m)", 1);
        for x in [pt1(0.3, 1.2, 0.7), pt1(-1.9, 0.4, 1.9)] {
            assert!(constancy_residual(&g, &h, &x).unwrap().abs() < 1e-14);
        }

        let v = constancy_residual(&field("q1", 1), &field("p1^2/2", 1), &pt1(0.0, 3.0, 0.0)).unwrap();
        assert_eq!(v, 3.0);
    }

    const FIELDS: &[&str] = &[
        "q1*p2 - q2*p1 + t*q1^2",
        "(p1^2 + p2^2)/2 + sin(q1)*q2^2",
        "exp(q1*p1/4) - p2^3*t",
        "q2*p1^2 + cos(p2 - q1)",
    ];

    fn sample_point() -> impl Strategy<Value = ExtendedPoint> {
        prop::array::uniform5(-2.0..2.0f64).prop_map(|v| ExtendedPoint::new(vec![v[0], v[1]], vec![v[2], v[3]], v[4]))
    }

    struct Product<'a>(&'a ScalarField, &'a ScalarField);

    impl Field for Product<'_> {
        fn n(&self) -> usize {
            self.0.n()
        }
        fn eval_at<T: Scalar>(&self, x: &[T]) -> Result<T> {
            Ok(self.0.eval_at(x)? * self.1.eval_at(x)?)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn antisymmetry(x in sample_point(), a in 0..4usize, b in 0..4usize) {
            let (f, g) = (field(FIELDS[a], 2), field(FIELDS[b], 2));
            let fg = poisson_bracket(&f, &g, &x).unwrap();
            let gf = poisson_bracket(&g, &f, &x).unwrap();
            prop_assert!((fg + gf).abs() <= 4.0 * f64::EPSILON * fg.abs().max(1.0));
        }

        #[test]
        fn leibniz(x in sample_point()) {
            let (f, g, h) = (field(FIELDS[0], 2), field(FIELDS[1], 2), field(FIELDS[2], 2));
            let lhs = poisson_bracket(&f, &Product(&g, &h), &x).unwrap();
            let rhs = poisson_bracket(&f, &g, &x).unwrap() * h.eval(&x).unwrap()
                + g.eval(&x).unwrap() * poisson_bracket(&f, &h, &x).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn jacobi(x in sample_point()) {
            let (f, g, h) = (field(FIELDS[0], 2), field(FIELDS[1], 2), field(FIELDS[3], 2));
            let total = poisson_bracket(&f, &Bracket(&g, &h), &x).unwrap()
                + poisson_bracket(&g, &Bracket(&h, &f), &x).unwrap()
                + poisson_bracket(&h, &Bracket(&f, &g), &x).unwrap();
            prop_assert!(total.abs() < 1e-8);
        }

        #[test]
        fn bracket_is_derivative_along_field(x in sample_point(), a in 0..4usize, b in 0..4usize) {
            let (f, g) = (field(FIELDS[a], 2), field(FIELDS[b], 2));
            let df = crate::numdiff::gradient(&f, &x).unwrap();
            let xg = hamiltonian_vector_field(&g, &x).unwrap().phase_components();
            let along: f64 = df.iter().zip(&xg).map(|(a, b)| a * b).sum();
            let fg = poisson_bracket(&f, &g, &x).unwrap();
            prop_assert!((fg - along).abs() < 1e-12 * (1.0 + fg.abs()));
        }
    }
}
