//! Fixed-step explicit integration.

use crate::error::{NumericsError, NumericsResult};

/// Advances `x` in place by one classical RK4 step.
///
/// `f(t, x, dx)` writes the derivative of `x` into `dx`.
pub fn rk4_step<F>(mut f: F, t: f64, x: &mut [f64], dt: f64) -> NumericsResult<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut ws = Rk4::new(x.len());
    ws.step(&mut f, t, x, dt)
}

/// Reusable RK4 scratch space for hot loops.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub fn step<F>(&mut self, f: &mut F, t: f64, x: &mut [f64], dt: f64) -> NumericsResult<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        debug_assert!(dt > 0.0);
        let n = x.len();
        if self.k1.len() != n {
            *self = Self::new(n);
        }
        let h2 = 0.5 * dt;
        f(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + h2 * self.k1[i];
        }
        f(t + h2, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + h2 * self.k2[i];
        }
        f(t + h2, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        f(t + dt, &self.tmp, &mut self.k4);
        let h6 = dt / 6.0;
        for i in 0..n {
            x[i] += h6 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NumericsError::NonFinite)
        }
    }
}
