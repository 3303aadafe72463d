//! Bilinear (Tustin) discretization of rational controllers.

use crate::error::{NumericsError, NumericsResult};
use crate::numerics::{Poly, RationalTF};

/// Discrete filter in transposed direct form II.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTf {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
}

impl DiscreteTf {
    /// Substitutes `s = (2/ts) (z - 1)/(z + 1)`.
    pub fn tustin(tf: &RationalTF, ts: f64) -> NumericsResult<Self> {
        let (nd, dd) = (tf.num().degree(), tf.den().degree());
        if !tf.num().is_zero() && nd > dd {
            return Err(NumericsError::ImproperTf { num: nd, den: dd });
        }
        let n = dd;
        let c = 2.0 / ts;
        let zm = Poly::new(vec![-1.0, 1.0]);
        let zp = Poly::new(vec![1.0, 1.0]);
        let map = |p: &Poly| {
            let mut acc = Poly::zero();
            for (k, &coef) in p.coeffs().iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let mut term = Poly::constant(coef * c.powi(k as i32));
                for _ in 0..k {
                    term = &term * &zm;
                }
                for _ in k..n {
                    term = &term * &zp;
                }
                acc = &acc + &term;
            }
            acc
        };
        let num = map(tf.num());
        let den = map(tf.den());
        let lead = den.coeff(n);
        if lead == 0.0 {
            return Err(NumericsError::Singular);
        }
        // coefficient of z^-i is the z^(n-i) coefficient
        let b = (0..=n).map(|i| num.coeff(n - i) / lead).collect();
        let a = (0..=n).map(|i| den.coeff(n - i) / lead).collect();
        Ok(Self {
            b,
            a,
            state: vec![0.0; n],
        })
    }

    pub fn order(&self) -> usize {
        self.state.len()
    }

    pub fn step(&mut self, u: f64) -> f64 {
        let y = self.b[0] * u + self.state.first().copied().unwrap_or(0.0);
        let n = self.state.len();
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = self.b[i + 1] * u - self.a[i + 1] * y + next;
        }
        y
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// Loads the state that holds output `y` under constant input `u`.
    ///
    /// Only meaningful when `(u, y)` is an equilibrium pair, e.g. `u = 0`
    /// for a filter with an integrator.
    pub fn set_equilibrium(&mut self, u: f64, y: f64) {
        let n = self.state.len();
        for i in (0..n).rev() {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = self.b[i + 1] * u - self.a[i + 1] * y + next;
        }
    }
}
