//! State-space realizations.

use super::tf::RationalTF;
use crate::error::{NumericsError, NumericsResult};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Self {
        let n = a.nrows();
        assert_eq!(a.ncols(), n, "A must be square");
        assert_eq!(b.nrows(), n, "B rows must match A");
        assert_eq!(c.ncols(), n, "C columns must match A");
        assert_eq!(d.nrows(), c.nrows(), "D rows must match C");
        assert_eq!(d.ncols(), b.ncols(), "D columns must match B");
        Self { a, b, c, d }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u
    }

    /// `C (sI - A)^-1 B + D`
    pub fn freq_response(&self, s: Complex64) -> NumericsResult<DMatrix<Complex64>> {
        let n = self.order();
        let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
        let d = to_c(&self.d);
        if n == 0 {
            return Ok(d);
        }
        let m = DMatrix::<Complex64>::identity(n, n) * s - to_c(&self.a);
        let x = m
            .lu()
            .solve(&to_c(&self.b))
            .ok_or(NumericsError::Singular)?;
        Ok(to_c(&self.c) * x + d)
    }

    /// One classical RK4 step with the input held constant over `dt`.
    pub fn rk4_step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> NumericsResult<DVector<f64>> {
        let mut state = x.as_slice().to_vec();
        super::ode::rk4_step(
            |_, xs: &[f64], dx: &mut [f64]| {
                let xv = DVector::from_column_slice(xs);
                dx.copy_from_slice(self.derivative(&xv, u).as_slice());
            },
            0.0,
            &mut state,
            dt,
        )?;
        Ok(DVector::from_vec(state))
    }
}

/// Controllable canonical realization of a proper SISO transfer function.
pub fn tf_to_ss(tf: &RationalTF) -> NumericsResult<StateSpace> {
    let den = tf.den().coeffs();
    let n = tf.den().degree();
    if !tf.is_proper() {
        return Err(NumericsError::ImproperTf {
            num: tf.num().degree(),
            den: n,
        });
    }
    // den is monic: s^n + a_{n-1} s^{n-1} + ... + a_0
    let b_n = tf.num().coeff(n);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut c = DMatrix::zeros(1, n);
    for i in 0..n {
        a[(n - 1, i)] = -den[i];
        c[(0, i)] = tf.num().coeff(i) - b_n * den[i];
    }
    let mut b = DMatrix::zeros(n, 1);
    if n > 0 {
        b[(n - 1, 0)] = 1.0;
    }
    Ok(StateSpace::new(a, b, c, DMatrix::from_element(1, 1, b_n)))
}
