//! 2x2 transfer matrices and complex 2x2 singular values.

use super::poly::Poly;
use super::tf::{dens_match, RationalTF};
use crate::error::{NumericsError, NumericsResult};
use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type CMatrix2 = Matrix2<Complex64>;

/// 2x2 grid of SISO transfer functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TFMatrix2 {
    entries: [[RationalTF; 2]; 2],
}

impl TFMatrix2 {
    pub fn new(e00: RationalTF, e01: RationalTF, e10: RationalTF, e11: RationalTF) -> Self {
        Self {
            entries: [[e00, e01], [e10, e11]],
        }
    }

    pub fn identity() -> Self {
        Self::diag(RationalTF::one(), RationalTF::one())
    }

    pub fn zero() -> Self {
        Self::diag(RationalTF::zero(), RationalTF::zero())
    }

    pub fn diag(a: RationalTF, b: RationalTF) -> Self {
        Self::new(a, RationalTF::zero(), RationalTF::zero(), b)
    }

    pub fn constant(m: &Matrix2<f64>) -> Self {
        Self::new(
            RationalTF::gain(m[(0, 0)]),
            RationalTF::gain(m[(0, 1)]),
            RationalTF::gain(m[(1, 0)]),
            RationalTF::gain(m[(1, 1)]),
        )
    }

    /// Builds `N(s) / den(s)` from a polynomial matrix over one shared denominator.
    pub fn from_poly_matrix(n: [[Poly; 2]; 2], den: &Poly) -> NumericsResult<Self> {
        let [[a, b], [c, d]] = n;
        Ok(Self::new(
            RationalTF::from_polys(a, den.clone())?,
            RationalTF::from_polys(b, den.clone())?,
            RationalTF::from_polys(c, den.clone())?,
            RationalTF::from_polys(d, den.clone())?,
        ))
    }

    pub fn get(&self, i: usize, j: usize) -> &RationalTF {
        &self.entries[i][j]
    }

    pub fn eval(&self, s: Complex64) -> NumericsResult<CMatrix2> {
        Ok(CMatrix2::new(
            self.entries[0][0].eval(s)?,
            self.entries[0][1].eval(s)?,
            self.entries[1][0].eval(s)?,
            self.entries[1][1].eval(s)?,
        ))
    }

    pub fn eval_jw(&self, w: f64) -> NumericsResult<CMatrix2> {
        self.eval(Complex64::new(0.0, w))
    }

    pub fn map(&self, f: impl Fn(&RationalTF) -> RationalTF) -> Self {
        let e = &self.entries;
        Self::new(f(&e[0][0]), f(&e[0][1]), f(&e[1][0]), f(&e[1][1]))
    }

    pub fn mul(&self, other: &TFMatrix2) -> Self {
        let a = &self.entries;
        let b = &other.entries;
        let entry = |i: usize, j: usize| a[i][0].series(&b[0][j]).parallel(&a[i][1].series(&b[1][j]));
        Self::new(entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1))
    }

    pub fn add(&self, other: &TFMatrix2) -> Self {
        let a = &self.entries;
        let b = &other.entries;
        Self::new(
            a[0][0].parallel(&b[0][0]),
            a[0][1].parallel(&b[0][1]),
            a[1][0].parallel(&b[1][0]),
            a[1][1].parallel(&b[1][1]),
        )
    }

    pub fn sub(&self, other: &TFMatrix2) -> Self {
        self.add(&other.map(RationalTF::neg))
    }

    /// Multiplies every entry by the scalar transfer function `tf`.
    pub fn scale_tf(&self, tf: &RationalTF) -> Self {
        self.map(|e| e.series(tf))
    }

    pub fn cancel(&self, tol: f64) -> Self {
        self.map(|e| e.cancel(tol))
    }

    /// Entry numerators over a common denominator (product of distinct entry denominators).
    pub fn common_den(&self) -> ([[Poly; 2]; 2], Poly) {
        let mut dens: Vec<&Poly> = Vec::new();
        for row in &self.entries {
            for e in row {
                if !dens.iter().any(|d| dens_match(d, e.den())) {
                    dens.push(e.den());
                }
            }
        }
        let prod = dens.iter().fold(Poly::one(), |acc, d| &acc * d);
        let lift = |e: &RationalTF| {
            dens.iter()
                .filter(|d| !dens_match(d, e.den()))
                .fold(e.num().clone(), |acc, d| &acc * d)
        };
        let e = &self.entries;
        ([[lift(&e[0][0]), lift(&e[0][1])], [lift(&e[1][0]), lift(&e[1][1])]], prod)
    }

    /// Rational inverse `d adj(N) / det N` where `self = N / d`.
    pub fn inv(&self) -> NumericsResult<Self> {
        let ([[a, b], [c, d]], den) = self.common_den();
        let det = &(&a * &d) - &(&b * &c);
        if det.is_zero() {
            return Err(NumericsError::Singular);
        }
        let entry = |p: Poly| RationalTF::from_polys(&den * &p, det.clone());
        Ok(Self::new(entry(d)?, entry(-&b)?, entry(-&c)?, entry(a)?))
    }

    pub fn transpose(&self) -> Self {
        let e = &self.entries;
        Self::new(e[0][0].clone(), e[1][0].clone(), e[0][1].clone(), e[1][1].clone())
    }
}

/// `(sigma_max, sigma_min)` of a complex 2x2 matrix.
///
/// Uses the closed-form eigenvalues of `M^H M`; the smaller value is taken
/// as `|det M| / sigma_max` so that the product identity holds to rounding.
pub fn singular_values(m: &CMatrix2) -> (f64, f64) {
    let a = m[(0, 0)].norm_sqr() + m[(1, 0)].norm_sqr();
    let c = m[(0, 1)].norm_sqr() + m[(1, 1)].norm_sqr();
    let b = m[(0, 0)].conj() * m[(0, 1)] + m[(1, 0)].conj() * m[(1, 1)];
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let lmax = mean + half_diff.hypot(b.norm());
    let smax = lmax.max(0.0).sqrt();
    if smax == 0.0 {
        return (0.0, 0.0);
    }
    let smin = det(m).norm() / smax;
    (smax, smin.min(smax))
}

pub fn det(m: &CMatrix2) -> Complex64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Real 2x2 matrix lifted to complex.
pub fn complexify(m: &Matrix2<f64>) -> CMatrix2 {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest entry magnitude of `a - b`.
pub fn max_abs_diff(a: &CMatrix2, b: &CMatrix2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_eval() {
        let m = TFMatrix2::identity().eval(c(0.3, 7.0)).unwrap();
        assert_eq!(m, CMatrix2::identity());
        assert_eq!(singular_values(&m), (1.0, 1.0));
    }

    #[test]
    fn scaled_rotation_has_equal_singular_values() {
        let (r, x) = (0.1, 0.7);
        let z2 = r * r + x * x;
        let m = complexify(&Matrix2::new(r, x, -x, r)) / c(z2, 0.0);
        let (smax, smin) = singular_values(&m);
        let want = 1.0 / z2.sqrt();
        assert!((smax - want).abs() < 1e-12);
        assert!((smin - want).abs() < 1e-12);
        assert!((want - 1.41421).abs() < 1e-5);
    }

    #[test]
    fn rank_deficient_diag() {
        let m = complexify(&Matrix2::new(0.5, 0.0, 0.0, 0.0));
        assert_eq!(singular_values(&m), (0.5, 0.0));
    }

    #[test]
    fn product_and_sum() {
        let a = TFMatrix2::diag(RationalTF::integrator(), RationalTF::gain(2.0));
        let p = a.mul(&TFMatrix2::identity());
        let s = c(0.0, 3.0);
        assert!(max_abs_diff(&p.eval(s).unwrap(), &a.eval(s).unwrap()) < 1e-15);
        let z = a.sub(&a).eval(s).unwrap();
        assert!(z.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn rational_inverse() {
        let m = TFMatrix2::new(
            RationalTF::new(vec![1.0, 1.0], vec![2.0, 1.0]).unwrap(),
            RationalTF::new(vec![3.0], vec![0.0, 1.0]).unwrap(),
            RationalTF::gain(-2.0),
            RationalTF::new(vec![1.0], vec![5.0, 1.0]).unwrap(),
        );
        let inv = m.inv().unwrap();
        for s in [Complex64::new(0.3, 2.0), Complex64::new(-1.0, 7.0), Complex64::new(4.0, 0.5)] {
            let p = m.eval(s).unwrap() * inv.eval(s).unwrap();
            assert!(max_abs_diff(&p, &CMatrix2::identity()) < 1e-12);
        }
        assert_eq!(TFMatrix2::zero().inv(), Err(NumericsError::Singular));
    }

    fn arb_matrix() -> impl Strategy<Value = CMatrix2> {
        prop::array::uniform8(-10.0f64..10.0).prop_map(|v| {
            CMatrix2::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7]))
        })
    }

    proptest! {
        #[test]
        fn product_identity(m in arb_matrix()) {
            let (smax, smin) = singular_values(&m);
            prop_assert!(smax >= smin && smin >= 0.0);
            let d = det(&m).norm();
            prop_assert!((smax * smin - d).abs() <= 1e-9 * d.max(1e-300) + 1e-12);
        }

        #[test]
        fn unitary_invariance(m in arb_matrix(), th in -3.2f64..3.2) {
            let rot = complexify(&Matrix2::new(th.cos(), -th.sin(), th.sin(), th.cos()));
            let (a, b) = singular_values(&m);
            let (a2, b2) = singular_values(&(rot * m));
            let (a3, b3) = singular_values(&(m * rot));
            prop_assert!((a - a2).abs() <= 1e-9 * a.max(1.0));
            prop_assert!((b - b2).abs() <= 1e-9 * a.max(1.0));
            prop_assert!((a - a3).abs() <= 1e-9 * a.max(1.0));
            prop_assert!((b - b3).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn matches_frobenius(m in arb_matrix()) {
            let (a, b) = singular_values(&m);
            let fro: f64 = m.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((a * a + b * b - fro).abs() <= 1e-9 * fro.max(1.0));
        }
    }
}
