//! SISO rational transfer functions.

use super::poly::Poly;
use crate::error::{NumericsError, NumericsResult};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Relative tolerance used when detecting common pole/zero factors.
pub const CANCEL_TOL: f64 = 1e-9;

/// Relative threshold on `|den(s)|` below which evaluation is refused.
const POLE_TOL: f64 = 1e-12;

/// `num(s) / den(s)` with real coefficients, denominator normalized monic.
///
/// Common factors are never removed implicitly; call [`RationalTF::cancel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTf", into = "RawTf")]
pub struct RationalTF {
    num: Poly,
    den: Poly,
}

#[derive(Serialize, Deserialize)]
struct RawTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawTf> for RationalTF {
    type Error = NumericsError;
    fn try_from(raw: RawTf) -> Result<Self, Self::Error> {
        RationalTF::new(raw.num, raw.den)
    }
}

impl From<RationalTF> for RawTf {
    fn from(tf: RationalTF) -> Self {
        RawTf {
            num: tf.num.coeffs().to_vec(),
            den: tf.den.coeffs().to_vec(),
        }
    }
}

impl RationalTF {
    /// Coefficients ascending in `s`.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> NumericsResult<Self> {
        Self::from_polys(Poly::new(num), Poly::new(den))
    }

    pub fn from_polys(num: Poly, den: Poly) -> NumericsResult<Self> {
        if den.is_zero() {
            return Err(NumericsError::ZeroDenominator);
        }
        let lead = den.leading();
        if lead == 1.0 {
            Ok(Self { num, den })
        } else {
            Ok(Self {
                num: num.scale(1.0 / lead),
                den: den.scale(1.0 / lead),
            })
        }
    }

    pub(crate) fn from_polys_unchecked(num: Poly, den: Poly) -> Self {
        Self::from_polys(num, den).expect("nonzero denominator")
    }

    pub fn gain(k: f64) -> Self {
        Self::from_polys_unchecked(Poly::constant(k), Poly::one())
    }

    pub fn zero() -> Self {
        Self::gain(0.0)
    }

    pub fn one() -> Self {
        Self::gain(1.0)
    }

    /// `1/s`
    pub fn integrator() -> Self {
        Self::from_polys_unchecked(Poly::one(), Poly::s())
    }

    /// `1/(tau s + 1)`
    pub fn first_order_lag(tau: f64) -> Self {
        Self::from_polys_unchecked(Poly::one(), Poly::new(vec![1.0, tau]))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    pub fn eval(&self, s: Complex64) -> NumericsResult<Complex64> {
        let d = self.den.eval(s);
        let scale = self.den.abs_scale(s.norm());
        if d.norm() <= POLE_TOL * scale {
            return Err(NumericsError::PoleEvaluation {
                s,
                magnitude: d.norm(),
            });
        }
        Ok(self.num.eval(s) / d)
    }

    pub fn eval_jw(&self, w: f64) -> NumericsResult<Complex64> {
        self.eval(Complex64::new(0.0, w))
    }

    /// Value at `s = 0`; `None` when the origin is a pole.
    pub fn dc_gain(&self) -> Option<f64> {
        self.eval(Complex64::new(0.0, 0.0)).ok().map(|c| c.re)
    }

    pub fn series(&self, other: &RationalTF) -> RationalTF {
        Self::from_polys_unchecked(&self.num * &other.num, &self.den * &other.den)
    }

    pub fn parallel(&self, other: &RationalTF) -> RationalTF {
        if dens_match(&self.den, &other.den) {
            return Self::from_polys_unchecked(&self.num + &other.num, self.den.clone());
        }
        Self::from_polys_unchecked(
            &(&self.num * &other.den) + &(&other.num * &self.den),
            &self.den * &other.den,
        )
    }

    pub fn sub(&self, other: &RationalTF) -> RationalTF {
        self.parallel(&other.neg())
    }

    pub fn neg(&self) -> RationalTF {
        self.scale(-1.0)
    }

    pub fn scale(&self, k: f64) -> RationalTF {
        Self::from_polys_unchecked(self.num.scale(k), self.den.clone())
    }

    /// Reciprocal `den/num`.
    pub fn inv(&self) -> NumericsResult<RationalTF> {
        if self.num.is_zero() {
            return Err(NumericsError::ZeroDenominator);
        }
        Self::from_polys(self.den.clone(), self.num.clone())
    }

    /// Closed loop `L/(1+L)` for unity negative feedback around `self`.
    pub fn feedback(&self) -> NumericsResult<RationalTF> {
        let char_poly = &self.den + &self.num;
        if char_poly.is_zero() {
            return Err(NumericsError::DegenerateLoop);
        }
        Self::from_polys(self.num.clone(), char_poly)
    }

    /// Sensitivity `1/(1+L)`.
    pub fn sensitivity(&self) -> NumericsResult<RationalTF> {
        let char_poly = &self.den + &self.num;
        if char_poly.is_zero() {
            return Err(NumericsError::DegenerateLoop);
        }
        Self::from_polys(self.den.clone(), char_poly)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    /// Removes pole/zero pairs that coincide to relative tolerance `tol`.
    ///
    /// A denominator root `r` is common when `|num(r)|` is below
    /// `tol * sum |num_k| max(|r|, r_ref)^k`.
    pub fn cancel(&self, tol: f64) -> RationalTF {
        let mut num = self.num.clone();
        let mut den = self.den.clone();
        if num.is_zero() {
            return Self::from_polys_unchecked(Poly::zero(), Poly::one());
        }
        let k = num.origin_multiplicity().min(den.origin_multiplicity());
        if k > 0 {
            num = num.shift_down(k);
            den = den.shift_down(k);
        }
        while den.degree() > 0 && num.degree() > 0 {
            let roots = den.roots();
            let r_ref = root_scale(&roots);
            let common = roots.iter().copied().find(|r| {
                if r.im < 0.0 {
                    return false;
                }
                let resid = num.eval(*r).norm();
                resid <= tol * num.abs_scale(r.norm().max(r_ref))
            });
            let Some(r) = common else { break };
            let factor = if r.im.abs() <= 1e-6 * r.norm() {
                Poly::linear(-r.re)
            } else {
                Poly::new(vec![r.norm_sqr(), -2.0 * r.re, 1.0])
            };
            num = num.div_rem(&factor).0;
            den = den.div_rem(&factor).0;
        }
        Self::from_polys_unchecked(num, den)
    }

    pub fn factored(&self) -> Factored {
        Factored {
            gain: if self.num.is_zero() {
                0.0
            } else {
                self.num.leading() / self.den.leading()
            },
            zeros: self.zeros(),
            poles: self.poles(),
        }
    }

    /// Continuous (unwrapped) phase in degrees along the positive imaginary axis.
    pub fn phase_deg(&self, w: f64) -> f64 {
        self.factored().phase_deg(w)
    }

    pub fn magnitude(&self, w: f64) -> NumericsResult<f64> {
        Ok(self.eval_jw(w)?.norm())
    }

    /// Evaluates `max |self(s) - other(s)| / max(|self(s)|, |other(s)|, floor)`
    /// over the supplied points.
    pub fn max_relative_gap(&self, other: &RationalTF, points: &[Complex64]) -> NumericsResult<f64> {
        let mut worst: f64 = 0.0;
        for &s in points {
            let a = self.eval(s)?;
            let b = other.eval(s)?;
            let denom = a.norm().max(b.norm()).max(1e-300);
            worst = worst.max((a - b).norm() / denom);
        }
        Ok(worst)
    }
}

pub(crate) fn dens_match(a: &Poly, b: &Poly) -> bool {
    a.coeffs().len() == b.coeffs().len()
        && a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .all(|(x, y)| (x - y).abs() <= 1e-14 * x.abs().max(y.abs()))
}

fn root_scale(roots: &[Complex64]) -> f64 {
    let nz: Vec<f64> = roots
        .iter()
        .map(|r| r.norm())
        .filter(|&m| m > 0.0)
        .collect();
    if nz.is_empty() {
        1.0
    } else {
        (nz.iter().map(|m| m.ln()).sum::<f64>() / nz.len() as f64).exp()
    }
}

/// Gain/zero/pole factorization used for continuous phase evaluation.
#[derive(Clone, Debug)]
pub struct Factored {
    pub gain: f64,
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
}

impl Factored {
    pub fn phase_rad(&self, w: f64) -> f64 {
        let jw = Complex64::new(0.0, w);
        let base = if self.gain < 0.0 { -PI } else { 0.0 };
        let z: f64 = self.zeros.iter().map(|z| (jw - z).arg()).sum();
        let p: f64 = self.poles.iter().map(|p| (jw - p).arg()).sum();
        base + z - p
    }

    pub fn phase_deg(&self, w: f64) -> f64 {
        self.phase_rad(w).to_degrees()
    }
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unity_lag_dc_gain() {
        let tf = RationalTF::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        assert!((tf.eval(c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn corner_frequency_magnitude() {
        let tf = RationalTF::first_order_lag(1e-3);
        let m = tf.eval_jw(1000.0).unwrap().norm();
        assert!((m - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pole_evaluation_is_rejected() {
        let tf = RationalTF::integrator();
        assert!(matches!(
            tf.eval(c(0.0, 0.0)),
            Err(NumericsError::PoleEvaluation { .. })
        ));
    }

    #[test]
    fn inner_loop_cancellation() {
        // Kc * Gc with L_i = 3.3 mH, R_i = 0.2, tau = 1 ms
        let kc = RationalTF::new(vec![0.2, 0.0033], vec![0.0, 0.001]).unwrap();
        let gc = RationalTF::new(vec![1.0], vec![0.2, 0.0033]).unwrap();
        let raw = kc.series(&gc);
        assert_eq!(raw.den().degree(), 2);
        let lc = raw.cancel(CANCEL_TOL);
        assert_eq!(lc.den().degree(), 1);
        let v = lc.eval_jw(50.0).unwrap();
        let want = Complex64::new(1.0, 0.0) / c(0.0, 0.05);
        assert!((v - want).norm() / want.norm() < 1e-12);
        // uncancelled evaluation agrees too
        let v2 = raw.eval_jw(50.0).unwrap();
        assert!((v2 - want).norm() / want.norm() < 1e-12);
    }

    #[test]
    fn series_does_not_cancel() {
        let a = RationalTF::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let b = RationalTF::new(vec![1.0, 1.0], vec![1.0]).unwrap();
        let p = a.series(&b);
        assert_eq!(p.num().degree(), 1);
        assert_eq!(p.den().degree(), 1);
        assert_eq!(a.series(&RationalTF::one()), a);
    }

    #[test]
    fn feedback_of_integrator() {
        let tau = 1e-3;
        let l = RationalTF::new(vec![1.0], vec![0.0, tau]).unwrap();
        let t = l.feedback().unwrap();
        let want = RationalTF::first_order_lag(tau);
        assert_eq!(t, want);
        assert!((t.dc_gain().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_loop_feedback() {
        let l = RationalTF::gain(3.0);
        assert!((l.feedback().unwrap().dc_gain().unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn degenerate_loop() {
        assert_eq!(
            RationalTF::gain(-1.0).feedback(),
            Err(NumericsError::DegenerateLoop)
        );
    }

    #[test]
    fn cancels_complex_pair() {
        let q = Poly::second_order(0.1, 50.0);
        let num = &q * &Poly::linear(3.0);
        let den = &q * &Poly::new(vec![2.0, 1.0, 1.0]);
        let tf = RationalTF::from_polys(num, den).unwrap().cancel(CANCEL_TOL);
        assert_eq!(tf.den().degree(), 2);
        assert_eq!(tf.num().degree(), 1);
    }

    #[test]
    fn keeps_distinct_roots() {
        let tf = RationalTF::new(vec![1.0, 1.0], vec![1.0001, 1.0]).unwrap();
        assert_eq!(tf.cancel(CANCEL_TOL).den().degree(), 1);
    }

    #[test]
    fn serde_round_trip() {
        let tf = RationalTF::new(vec![2.0, 1.0], vec![4.0, 2.0, 2.0]).unwrap();
        let s = serde_json::to_string(&tf).unwrap();
        let back: RationalTF = serde_json::from_str(&s).unwrap();
        assert_eq!(tf, back);
        assert!(serde_json::from_str::<RationalTF>(r#"{"num":[1],"den":[0]}"#).is_err());
    }
}
