//! Quasi-static droop analysis: power flow, linearization, droop laws as
//! feedback and their rotation to arbitrary line impedance angles.

use crate::error::{AnalysisError, NumericsError};
use crate::numerics::{phase_margin_with_delay, PhaseMargin, Poly, RationalTF, TFMatrix2, CANCEL_TOL};
use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Line impedance `R + jX` seen from the inverter, with the PCC amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinePhasor {
    pub r: f64,
    pub x: f64,
    /// PCC voltage amplitude.
    pub v2: f64,
    /// Nominal frequency in rad/s.
    pub omega0: f64,
}

impl LinePhasor {
    pub fn new(r: f64, x: f64, v2: f64, omega0: f64) -> Self {
        assert!(r.hypot(x) > 0.0, "line impedance must be nonzero");
        assert!(v2 > 0.0, "PCC voltage must be positive");
        Self { r, x, v2, omega0 }
    }

    /// Builds the line from impedance magnitude and angle.
    pub fn from_polar(zbar: f64, phi: f64, v2: f64, omega0: f64) -> Self {
        Self::new(zbar * phi.cos(), zbar * phi.sin(), v2, omega0)
    }

    pub fn zbar(&self) -> f64 {
        self.r.hypot(self.x)
    }

    pub fn phi(&self) -> f64 {
        self.x.atan2(self.r)
    }

    /// `rho_Z = v2 / |Z|`
    pub fn rho(&self) -> f64 {
        self.v2 / self.zbar()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPair {
    pub p: f64,
    pub q: f64,
}

/// Linearized power-flow input `[dv, v2 * delta]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroopInput {
    pub dv: f64,
    pub vdelta: f64,
    /// Small-signal validity: `|delta| < 0.2` rad and `|dv| / v2 < 0.1`.
    pub valid: bool,
}

impl DroopInput {
    pub fn new(dv: f64, vdelta: f64, v2: f64) -> Self {
        let delta = vdelta / v2;
        Self {
            dv,
            vdelta,
            valid: delta.abs() < 0.2 && (dv / v2).abs() < 0.1,
        }
    }
}

/// Exact active/reactive flow from `v1∠delta` to `v2∠0` through the line.
pub fn power_flow(v1: f64, v2: f64, delta: f64, line: &LinePhasor) -> PowerPair {
    let z = line.zbar();
    let phi = line.phi();
    PowerPair {
        p: v1 * v1 / z * phi.cos() - v1 * v2 / z * (phi + delta).cos(),
        q: v1 * v1 / z * phi.sin() - v1 * v2 / z * (phi + delta).sin(),
    }
}

/// `[[cos phi, sin phi], [sin phi, -cos phi]]`; symmetric and involutory.
pub fn h_matrix(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, s, s, -c)
}

/// Counter-clockwise rotation `[[cos a, -sin a], [sin a, cos a]]`, the
/// orientation for which `rotation(phi - phi0) * H(phi0) = H(phi)`.
pub fn rotation(a: f64) -> Matrix2<f64> {
    let (s, c) = a.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// First-order power flow `rho_Z H_phi u` around `(v2, 0)`.
pub fn linearized_power(u: &DroopInput, line: &LinePhasor) -> PowerPair {
    let p = line.rho() * h_matrix(line.phi()) * nalgebra::Vector2::new(u.dv, u.vdelta);
    PowerPair { p: p[0], q: p[1] }
}

/// Constant droop gains together with the placement of the frequency integrator.
///
/// The effective law is `u = left * diag(1, 1/s) * k * (p0 - p)`. For an
/// ordinary droop matrix `left = I`; a rotated design carries the rotation
/// and impedance ratio in `left` so that no entry ever needs `s` in the
/// numerator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroopMatrix {
    pub k: Matrix2<f64>,
    pub left: Matrix2<f64>,
}

impl DroopMatrix {
    pub fn new(k: Matrix2<f64>) -> Self {
        Self {
            k,
            left: Matrix2::identity(),
        }
    }

    /// P/f - Q/v droop: `dv = kq (Q0 - Q)`, `omega = omega0 + kp (P0 - P)`.
    ///
    /// The second row is scaled by `v2` because the loop integrates `v2 * delta`.
    pub fn inductive(kp: f64, kq: f64, v2: f64) -> Self {
        Self::new(Matrix2::new(0.0, kq, v2 * kp, 0.0))
    }

    /// P/v - Q/f droop: `dv = kp (P0 - P)`, `omega = omega0 - kq (Q0 - Q)`.
    ///
    /// The sign on the frequency row makes the reactive loop negative
    /// feedback, since `H(0) = diag(1, -1)`.
    pub fn resistive(kp: f64, kq: f64, v2: f64) -> Self {
        Self::new(Matrix2::new(kp, 0.0, 0.0, -v2 * kq))
    }

    /// The loop gain matrix `L(s) = rho H left diag(1, 1/s) k` as
    /// `(L1, L0)` with `L(s) = L1 + L0 / s`.
    fn loop_parts(&self, line: &LinePhasor) -> (Matrix2<f64>, Matrix2<f64>) {
        let g = line.rho() * h_matrix(line.phi()) * self.left;
        let e0 = Matrix2::new(1.0, 0.0, 0.0, 0.0);
        let e1 = Matrix2::new(0.0, 0.0, 0.0, 1.0);
        (g * e0 * self.k, g * e1 * self.k)
    }
}

/// Generalized droop for line `line` that reproduces the closed loop of
/// baseline design `k0` on a line with angle `phi0`.
///
/// `line0` supplies the baseline impedance magnitude (and `v2`); its angle is
/// ignored in favour of `phi0`.
pub fn droop_rotation(k0: &DroopMatrix, phi0: f64, line0: &LinePhasor, line: &LinePhasor) -> DroopMatrix {
    let ratio = line0.rho() / line.rho();
    DroopMatrix {
        k: k0.k,
        left: ratio * rotation(line.phi() - phi0) * k0.left,
    }
}

/// Closed-loop map `(p0 + K^-1 d) -> p` of the quasi-static droop loop,
/// `(rho^-1 H + Lambda K)^-1 Lambda K`, as an exact rational matrix.
pub fn quasi_static_loop(k: &DroopMatrix, line: &LinePhasor) -> Result<TFMatrix2, AnalysisError> {
    let a = h_matrix(line.phi()) / line.rho();
    let e0 = Matrix2::new(1.0, 0.0, 0.0, 0.0);
    let e1 = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    let b1 = k.left * e0 * k.k;
    let b0 = k.left * e1 * k.k;
    // Multiply through by diag(1, s): M(s) = s (A + B1) + B0, N(s) = s B1 + B0.
    let m1 = a + b1;
    let lin = |c1: f64, c0: f64| Poly::new(vec![c0, c1]);
    let m = |i: usize, j: usize| lin(m1[(i, j)], b0[(i, j)]);
    let n = |i: usize, j: usize| lin(b1[(i, j)], b0[(i, j)]);
    let det = &(&m(0, 0) * &m(1, 1)) - &(&m(0, 1) * &m(1, 0));
    if det.is_zero() {
        return Err(AnalysisError::SingularAtDc);
    }
    let adj = [[m(1, 1), -&m(0, 1)], [-&m(1, 0), m(0, 0)]];
    let entry = |i: usize, j: usize| &(&adj[i][0] * &n(0, j)) + &(&adj[i][1] * &n(1, j));
    let out = TFMatrix2::from_poly_matrix([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]], &det)?;
    Ok(out.cancel(CANCEL_TOL))
}

/// Lead-compensated dynamic droop `k_p(s)` and the resulting loop `L_p(s)`.
///
/// The gain is normalized so that `|L_p(j wc)| = 1`, placing the lead
/// maximum at the crossover.
pub fn dynamic_droop_lead(line: &LinePhasor, wc: f64, a: f64) -> (RationalTF, RationalTF) {
    assert!(a >= 1.0 && wc > 0.0);
    let ra = a.sqrt();
    let gain = ra * wc * wc;
    let lead = RationalTF::from_polys(Poly::linear(wc / ra), Poly::linear(wc * ra)).expect("monic");
    let plant_scale = line.x / (line.v2 * line.v2);
    let kp = lead
        .series(&RationalTF::integrator())
        .scale(gain * plant_scale);
    let lp = lead
        .series(&RationalTF::from_polys(Poly::one(), Poly::new(vec![0.0, 0.0, 1.0])).expect("monic"))
        .scale(gain);
    (kp, lp)
}

/// Per-channel `(P, Q)` margins of the droop loop including transport delay
/// `t0` and inner voltage/frequency dynamics.
///
/// `None` marks a channel whose loop gain never crosses unity.
pub fn delay_limited_margin(
    k: &DroopMatrix,
    line: &LinePhasor,
    t0: f64,
    tv: &RationalTF,
    tf: &RationalTF,
) -> Result<(Option<PhaseMargin>, Option<PhaseMargin>), AnalysisError> {
    let (l1, l0) = k.loop_parts(line);
    let scale = l1.abs().max().max(l0.abs().max());
    let off = [l1[(0, 1)], l1[(1, 0)], l0[(0, 1)], l0[(1, 0)]];
    if off.iter().any(|v| v.abs() > 1e-9 * scale) {
        return Err(AnalysisError::CoupledDroop);
    }
    // L_ii = rho (g_i0 k_0i T_v + g_i1 k_1i T_f / s) with g = H left.
    let g = line.rho() * h_matrix(line.phi()) * k.left;
    let channel = |i: usize| -> Result<Option<PhaseMargin>, AnalysisError> {
        let volt = tv.scale(g[(i, 0)] * k.k[(0, i)]);
        let freq = tf.series(&RationalTF::integrator()).scale(g[(i, 1)] * k.k[(1, i)]);
        match phase_margin_with_delay(&volt.parallel(&freq), t0) {
            Ok(pm) => Ok(Some(pm)),
            Err(NumericsError::NoCrossover { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    Ok((channel(0)?, channel(1)?))
}

/// Evaluates the complex power `v1 e^{j delta} ((v1 e^{j delta} - v2) / Z)^*`.
pub fn complex_power(v1: f64, v2: f64, delta: f64, line: &LinePhasor) -> PowerPair {
    let e1 = Complex64::from_polar(v1, delta);
    let z = Complex64::new(line.r, line.x);
    let s = e1 * ((e1 - v2) / z).conj();
    PowerPair { p: s.re, q: s.im }
}
