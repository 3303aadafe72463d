//! Real polynomials in `s` with coefficients stored in ascending order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Real-coefficient polynomial, `coeffs[k]` multiplies `s^k`.
///
/// The zero polynomial is represented by an empty coefficient list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<f64>,
}

/// Relative magnitude below which a difference of two coefficients is treated
/// as exact cancellation.
const CANCEL_EPS: f64 = 8.0 * f64::EPSILON;

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `s + a`
    pub fn linear(a: f64) -> Self {
        Self::new(vec![a, 1.0])
    }

    /// `s^2 + 2 xi wn s + wn^2`
    pub fn second_order(xi: f64, wn: f64) -> Self {
        Self::new(vec![wn * wn, 2.0 * xi * wn, 1.0])
    }

    /// Builds `lead * prod (s - r)` from roots. Complex roots are expected in
    /// conjugate pairs; imaginary residue of the product is dropped.
    pub fn from_roots(roots: &[Complex64], lead: f64) -> Self {
        let mut acc = vec![Complex64::new(lead, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(&c) if c == 0.0) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Number of exact roots at the origin.
    pub fn origin_multiplicity(&self) -> usize {
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// Divides out `s^n`, which must be an exact factor.
    pub fn shift_down(&self, n: usize) -> Self {
        debug_assert!(n <= self.origin_multiplicity() || self.is_zero());
        Self::new(self.coeffs.iter().skip(n).copied().collect())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `sum |c_k| |s|^k`, the natural scale for judging `|p(s)|`.
    pub fn abs_scale(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * s.abs() + c.abs())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Polynomial long division, returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        if self.coeffs.len() < divisor.coeffs.len() {
            return (Poly::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let dl = divisor.coeffs.len();
        let lead = divisor.leading();
        let mut quot = vec![0.0; rem.len() - dl + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dl - 1] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dl - 1] = 0.0;
        }
        rem.truncate(dl - 1);
        (Poly::new(quot), Poly::new(rem))
    }

    /// Roots of the polynomial. Exact roots at the origin are reported as
    /// exact zeros; the remainder comes from the companion-matrix eigenvalues,
    /// polished with a few Newton steps.
    pub fn roots(&self) -> Vec<Complex64> {
        let zeros = self.origin_multiplicity();
        let mut out = vec![Complex64::new(0.0, 0.0); zeros];
        let rest = self.shift_down(zeros);
        let n = rest.degree();
        if rest.is_zero() || n == 0 {
            return out;
        }
        let c = rest.coeffs();
        let lead = rest.leading();
        match n {
            1 => out.push(Complex64::new(-c[0] / c[1], 0.0)),
            2 => out.extend(quadratic_roots(c[2], c[1], c[0])),
            _ => {
                let mut comp = DMatrix::<f64>::zeros(n, n);
                for i in 1..n {
                    comp[(i, i - 1)] = 1.0;
                }
                for i in 0..n {
                    comp[(i, n - 1)] = -c[i] / lead;
                }
                let eig = comp.complex_eigenvalues();
                let dp = rest.derivative();
                for mut r in eig.iter().copied() {
                    for _ in 0..3 {
                        let f = rest.eval(r);
                        let df = dp.eval(r);
                        if df.norm() == 0.0 {
                            break;
                        }
                        let step = f / df;
                        let cand = r - step;
                        if rest.eval(cand).norm() < f.norm() {
                            r = cand;
                        } else {
                            break;
                        }
                    }
                    out.push(r);
                }
            }
        }
        out
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // numerically stable pair
        let q = -0.5 * (b + b.signum() * sq);
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        }
        [Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a);
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn combine(a: &[f64], b: &[f64], sign: f64) -> Poly {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let x = a.get(k).copied().unwrap_or(0.0);
        let y = sign * b.get(k).copied().unwrap_or(0.0);
        let v = x + y;
        if v.abs() <= CANCEL_EPS * (x.abs() + y.abs()) {
            out.push(0.0);
        } else {
            out.push(v);
        }
    }
    Poly::new(out)
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        combine(&self.coeffs, &rhs.coeffs, 1.0)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        combine(&self.coeffs, &rhs.coeffs, -1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", sign)?;
            }
            first = false;
            let mag = c.abs();
            match k {
                0 => write!(f, "{}", fmt_coeff(mag))?,
                1 if mag == 1.0 => write!(f, "s")?,
                1 => write!(f, "{}s", fmt_coeff(mag))?,
                _ if mag == 1.0 => write!(f, "s^{}", k)?,
                _ => write!(f, "{}s^{}", fmt_coeff(mag), k)?,
            }
        }
        Ok(())
    }
}

fn fmt_coeff(c: f64) -> String {
    let s = format!("{:.6}", c);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "0" {
        format!("{:.4e}", c)
    } else {
        s.to_string()
    }
}
