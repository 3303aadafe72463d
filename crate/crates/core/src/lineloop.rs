//! The line as a 2x2 plant driven by the inverse-impedance feedback law:
//! sensitivity construction, steady-state singular values and the response
//! to grid-side disturbances.

use crate::droop::LinePhasor;
use crate::error::AnalysisError;
use crate::numerics::freq::log_grid;
use crate::numerics::{singular_values, Poly, RationalTF, TFMatrix2, CANCEL_TOL};
use crate::plant::DQPair;
use crate::synthesis::ControllerSet;
use serde::{Deserialize, Serialize};

/// Series R-L line seen in the rotating frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineModel {
    pub r: f64,
    pub l: f64,
    pub omega0: f64,
}

impl LineModel {
    pub fn new(r: f64, l: f64, omega0: f64) -> Self {
        assert!(l > 0.0 && r >= 0.0 && omega0 > 0.0, "invalid line model");
        Self { r, l, omega0 }
    }

    /// Line with reactance `x` at `omega0`.
    pub fn from_reactance(r: f64, x: f64, omega0: f64) -> Self {
        Self::new(r, x / omega0, omega0)
    }

    pub fn from_phasor(p: &LinePhasor) -> Self {
        Self::from_reactance(p.r, p.x, p.omega0)
    }

    pub fn x(&self) -> f64 {
        self.l * self.omega0
    }

    pub fn zbar(&self) -> f64 {
        self.r.hypot(self.x())
    }

    pub fn wn(&self) -> f64 {
        self.zbar() / self.l
    }

    pub fn xi(&self) -> f64 {
        self.r / self.zbar()
    }

    pub fn phasor(&self, v2: f64) -> LinePhasor {
        LinePhasor::new(self.r, self.x(), v2, self.omega0)
    }
}

/// `L di/dt = [[-R, X], [-X, -R]] i + (dv, v2 delta)`
pub fn line_derivatives(i: DQPair, dv: f64, vdelta: f64, m: &LineModel) -> DQPair {
    let x = m.x();
    DQPair::new(
        (-m.r * i.d + x * i.q + dv) / m.l,
        (-x * i.d - m.r * i.q + vdelta) / m.l,
    )
}

/// `G_L = [[Ls + R, X], [-X, Ls + R]] / ((Ls + R)^2 + X^2)`
pub fn line_tf(m: &LineModel) -> TFMatrix2 {
    let diag = Poly::new(vec![m.r, m.l]);
    let den = &(&diag * &diag) + &Poly::constant(m.x() * m.x());
    TFMatrix2::from_poly_matrix(
        [
            [diag.clone(), Poly::constant(m.x())],
            [Poly::constant(-m.x()), diag],
        ],
        &den,
    )
    .expect("L > 0")
}

/// Largest `|T - 1|` over both voltage loops on `[1e-2, band]`.
pub fn tracking_deviation(cs: &ControllerSet, band: f64) -> Result<(f64, f64), AnalysisError> {
    let (td, tq) = cs.voltage_tracking()?;
    let mut worst = (0.0, 0.0);
    for w in log_grid(1e-2, band.max(2e-2), 200) {
        for t in [&td, &tq] {
            let dev = (t.eval_jw(w)? - 1.0).norm();
            if dev > worst.1 {
                worst = (w, dev);
            }
        }
    }
    Ok(worst)
}

/// Limit on `|T - 1|` for the tracking assumption.
pub const TRACKING_LIMIT: f64 = 0.05;

/// The inverse-impedance law `[[1/K_v^d, -K_eta^d], [H K_eta^q, H/K_v^q]]`.
///
/// Fails when the voltage loops do not track to within [`TRACKING_LIMIT`]
/// up to `band`.
pub fn hsi_feedback_law(cs: &ControllerSet, band: f64) -> Result<TFMatrix2, AnalysisError> {
    let (w, dev) = tracking_deviation(cs, band)?;
    if dev >= TRACKING_LIMIT {
        return Err(AnalysisError::AssumptionViolated {
            frequency: w,
            deviation: dev,
            limit: TRACKING_LIMIT,
        });
    }
    hsi_feedback_law_unchecked(cs)
}

/// [`hsi_feedback_law`] without the tracking check.
pub fn hsi_feedback_law_unchecked(cs: &ControllerSet) -> Result<TFMatrix2, AnalysisError> {
    let h = &cs.h_pll;
    Ok(TFMatrix2::new(
        cs.kv_d_eff().inv()?,
        cs.keta_d_eff().neg(),
        h.series(&cs.keta_q_eff()),
        h.series(&cs.kv_q_eff().inv()?),
    )
    .cancel(CANCEL_TOL))
}

/// `Lambda = diag(1, 1/s)`
pub fn lambda() -> TFMatrix2 {
    TFMatrix2::diag(RationalTF::one(), RationalTF::integrator())
}

/// Sensitivity `S` and complementary sensitivity `T = I - S`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopPair {
    pub s: TFMatrix2,
    pub t: TFMatrix2,
}

/// `S = (I + G Lambda K_i)^-1`, `T = I - S`.
///
/// With `G = N_G / d_G` and `Lambda K_i = diag(s, 1) N_K / (s d_K)` this is
/// `S = s d_G d_K adj(P) / det P` for the polynomial matrix
/// `P = s d_G d_K I + N_G diag(s, 1) N_K`; common factors are then cancelled.
pub fn sensitivity_pair(g: &TFMatrix2, ki: &TFMatrix2) -> Result<LoopPair, AnalysisError> {
    let (ng, dg) = g.common_den();
    let (nk, dk) = ki.common_den();
    let scale = &(&Poly::s() * &dg) * &dk;
    let nk_l = [
        [&Poly::s() * &nk[0][0], &Poly::s() * &nk[0][1]],
        [nk[1][0].clone(), nk[1][1].clone()],
    ];
    let prod = |i: usize, j: usize| &(&ng[i][0] * &nk_l[0][j]) + &(&ng[i][1] * &nk_l[1][j]);
    let p00 = &scale + &prod(0, 0);
    let p01 = prod(0, 1);
    let p10 = prod(1, 0);
    let p11 = &scale + &prod(1, 1);
    let det = &(&p00 * &p11) - &(&p01 * &p10);
    if det.is_zero() {
        return Err(AnalysisError::SingularLoop);
    }
    let adj = [[p11, -&p01], [-&p10, p00]];
    let s_num = |i: usize, j: usize| &scale * &adj[i][j];
    let t_num = |i: usize, j: usize| {
        let sn = s_num(i, j);
        if i == j {
            &det - &sn
        } else {
            -&sn
        }
    };
    let build = |f: &dyn Fn(usize, usize) -> Poly| {
        TFMatrix2::from_poly_matrix([[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]], &det).map(|m| m.cancel(CANCEL_TOL))
    };
    Ok(LoopPair {
        s: build(&s_num)?,
        t: build(&t_num)?,
    })
}

/// Steady-state singular values of `S` and `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DcPerformance {
    pub smax: f64,
    pub smin: f64,
    pub tmax: f64,
    pub tmin: f64,
}

/// `sigma(S(0)) = {|Z| / (gd + |Z|), 0}`, `sigma(T(0)) = {1, gd / (gd + |Z|)}`.
pub fn dc_performance(gamma_d: f64, line: &LineModel) -> DcPerformance {
    assert!(gamma_d >= 0.0);
    let z = line.zbar();
    DcPerformance {
        smax: z / (gamma_d + z),
        smin: 0.0,
        tmax: 1.0,
        tmin: gamma_d / (gamma_d + z),
    }
}

/// One row of a singular-value sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SvRow {
    pub freq_rad_s: f64,
    pub smax: f64,
    pub smin: f64,
    pub tmax: f64,
    pub tmin: f64,
}

pub fn sv_sweep(pair: &LoopPair, grid: &[f64]) -> Result<Vec<SvRow>, AnalysisError> {
    grid.iter()
        .map(|&w| {
            let (smax, smin) = singular_values(&pair.s.eval_jw(w)?);
            let (tmax, tmin) = singular_values(&pair.t.eval_jw(w)?);
            Ok(SvRow {
                freq_rad_s: w,
                smax,
                smin,
                tmax,
                tmin,
            })
        })
        .collect()
}

/// `T K_i^-1`, the map from a grid-side disturbance to the line current.
pub fn grid_disturbance_response(cs: &ControllerSet, line: &LineModel) -> Result<TFMatrix2, AnalysisError> {
    let ki = hsi_feedback_law_unchecked(cs)?;
    let pair = sensitivity_pair(&line_tf(line), &ki)?;
    Ok(pair.t.mul(&cs.ki_inverse()).cancel(CANCEL_TOL))
}

/// Largest `sigma_max` of `m` over `grid`, with its frequency.
pub fn peak_gain(m: &TFMatrix2, grid: &[f64]) -> Result<(f64, f64), AnalysisError> {
    let mut best = (grid[0], 0.0);
    for &w in grid {
        let g = singular_values(&m.eval_jw(w)?).0;
        if g > best.1 {
            best = (w, g);
        }
    }
    Ok(best)
}

/// Peak of `sigma_max` within a factor `span` around `center`.
pub fn peak_near(m: &TFMatrix2, center: f64, span: f64) -> Result<(f64, f64), AnalysisError> {
    peak_gain(m, &log_grid(center / span, center * span, 2000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mimo::{complexify, max_abs_diff};
    use crate::numerics::CMatrix2;
    use crate::plant::InverterParams;
    use crate::synthesis::{steady_state_droop, synthesize, DesignSpec, Family};
    use nalgebra::Matrix2;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const W0: f64 = 376.99111843077515;

    fn table_line() -> LineModel {
        LineModel::from_reactance(0.1, 0.7, W0)
    }

    fn cs(family: Family, gd: f64, gq: f64, wc: f64, line: &LineModel) -> ControllerSet {
        synthesize(&DesignSpec {
            wc,
            pm_deg: 53.0,
            beta_lag: 0.01,
            family,
            line: line.phasor(170.0),
            inverter: InverterParams {
                c: 40e-6,
                l_i: 3e-3,
                r_i: 0.1,
                v_dc: 250.0,
            },
            gamma_d: gd,
            gamma_q: gq,
            notch_xi0: None,
        })
        .unwrap()
    }

    #[test]
    fn line_model_values() {
        let m = table_line();
        assert!((m.l - 1.857e-3).abs() < 1e-6);
        assert!((m.wn() - 380.8).abs() < 0.1);
        assert!((m.xi() - 0.1414).abs() < 1e-4);
        assert!((m.wn() * m.l - m.zbar()).abs() < 1e-12);
    }

    #[test]
    fn derivatives_basic() {
        let m = table_line();
        assert_eq!(line_derivatives(DQPair::ZERO, 0.0, 0.0, &m), DQPair::ZERO);
        // constant input steady state equals G_L(0) u
        let (dv, vd) = (3.0, -2.0);
        let g0 = line_tf(&m).eval(Complex64::new(0.0, 0.0)).unwrap();
        let i = DQPair::new(
            (g0[(0, 0)] * dv + g0[(0, 1)] * vd).re,
            (g0[(1, 0)] * dv + g0[(1, 1)] * vd).re,
        );
        let d = line_derivatives(i, dv, vd, &m);
        assert!(d.norm() < 1e-9);
    }

    #[test]
    fn lossless_line_conserves_norm() {
        let m = LineModel::from_reactance(0.0, 0.7, W0);
        let mut x = [3.0, 4.0];
        for _ in 0..1000 {
            crate::numerics::rk4_step(
                |_, s, ds| {
                    let d = line_derivatives(DQPair::new(s[0], s[1]), 0.0, 0.0, &m);
                    ds[0] = d.d;
                    ds[1] = d.q;
                },
                0.0,
                &mut x,
                1e-5,
            )
            .unwrap();
        }
        assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 5.0).abs() < 1e-8);
    }

    #[test]
    fn high_frequency_is_diagonal() {
        let g = line_tf(&table_line());
        let m = g.eval_jw(1e6).unwrap();
        let (a, b) = singular_values(&m);
        let diag = m[(0, 0)].norm();
        assert!((a - diag).abs() / diag < 1e-3 && (b - diag).abs() / diag < 1e-3);
        let lo = g.eval_jw(1.0).unwrap();
        assert!(lo[(0, 1)].norm() > lo[(0, 0)].norm());
    }

    #[test]
    fn resistive_law_is_diagonal() {
        let line = table_line();
        let c = cs(Family::Resistive, 0.5, 0.5, 2000.0, &line);
        let ki = hsi_feedback_law_unchecked(&c).unwrap();
        assert!(ki.get(0, 1).is_zero() && ki.get(1, 0).is_zero());
    }

    #[test]
    fn law_matches_closed_form() {
        let line = table_line();
        let c = cs(Family::General, 0.3, 0.8, 2000.0, &line);
        let a = hsi_feedback_law_unchecked(&c).unwrap();
        let b = c.ki_matrix();
        for s in [Complex64::new(0.0, 5.0), Complex64::new(-30.0, 800.0), Complex64::new(10.0, -3.0)] {
            let diff = max_abs_diff(&a.eval(s).unwrap(), &b.eval(s).unwrap());
            assert!(diff < 1e-10 * (1.0 + b.eval(s).unwrap().norm()), "{diff}");
        }
    }

    #[test]
    fn tracking_assumption_checked() {
        let line = table_line();
        let c = cs(Family::General, 0.3, 0.8, 2000.0, &line);
        assert!(hsi_feedback_law(&c, 50.0).is_ok());
        assert!(matches!(
            hsi_feedback_law(&c, 5000.0),
            Err(AnalysisError::AssumptionViolated { .. })
        ));
    }

    #[test]
    fn zero_law_gives_identity_sensitivity() {
        let pair = sensitivity_pair(&line_tf(&table_line()), &TFMatrix2::zero()).unwrap();
        let s = pair.s.eval_jw(10.0).unwrap();
        assert!(max_abs_diff(&s, &CMatrix2::identity()) < 1e-14);
        assert!(pair.t.eval_jw(10.0).unwrap().norm() < 1e-14);
    }

    fn pair_for(c: &ControllerSet, line: &LineModel) -> LoopPair {
        sensitivity_pair(&line_tf(line), &hsi_feedback_law_unchecked(c).unwrap()).unwrap()
    }

    #[test]
    fn dc_singular_values() {
        let line = table_line();
        for gd in [0.2, line.zbar(), 3.0] {
            let c = cs(Family::General, gd, 1.5, 2000.0, &line);
            let pair = pair_for(&c, &line);
            let want = dc_performance(gd, &line);
            let s0 = pair.s.eval(Complex64::new(0.0, 0.0)).unwrap();
            let t0 = pair.t.eval(Complex64::new(0.0, 0.0)).unwrap();
            let (smax, smin) = singular_values(&s0);
            let (tmax, tmin) = singular_values(&t0);
            assert!((smax - want.smax).abs() < 1e-9, "{smax} {}", want.smax);
            assert!(smin.abs() < 1e-9);
            assert!((tmax - want.tmax).abs() < 1e-9);
            assert!((tmin - want.tmin).abs() < 1e-9);
        }
        assert!((dc_performance(line.zbar(), &line).tmin - 0.5).abs() < 1e-15);
        assert!(dc_performance(1e9, &line).tmin > 1.0 - 1e-8);
    }

    #[test]
    fn sensitivity_sum() {
        let line = table_line();
        let c = cs(Family::General, 0.4, 1.2, 1500.0, &line);
        let pair = pair_for(&c, &line);
        for w in log_grid(0.1, 1e5, 3).into_iter().take(30) {
            let sum = pair.s.eval_jw(w).unwrap() + pair.t.eval_jw(w).unwrap();
            assert!(max_abs_diff(&sum, &CMatrix2::identity()) < 1e-10);
        }
    }

    #[test]
    fn disturbance_map_equals_sgl() {
        let line = table_line();
        let c = cs(Family::General, 0.4, 1.2, 1500.0, &line);
        let pair = pair_for(&c, &line);
        let tki = grid_disturbance_response(&c, &line).unwrap();
        let sgl = pair.s.mul(&line_tf(&line)).mul(&lambda());
        for w in [0.5, 20.0, 300.0, 4000.0] {
            let a = tki.eval_jw(w).unwrap();
            let b = sgl.eval_jw(w).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-8 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn dc_error_matches_droop() {
        let line = table_line();
        let c = cs(Family::General, 0.4, 1.2, 1500.0, &line);
        let pair = pair_for(&c, &line);
        let i0 = nalgebra::Vector2::new(Complex64::new(10.0, 0.0), Complex64::new(-4.0, 0.0));
        let e = pair.s.eval(Complex64::new(0.0, 0.0)).unwrap() * i0;
        let ki0 = c.ki_matrix().eval(Complex64::new(0.0, 0.0)).unwrap();
        let u = ki0 * e;
        let droop = steady_state_droop(&c, DQPair::new(e[0].re, e[1].re), 170.0);
        assert!((u[0].re - droop.dv).abs() < 1e-6 * (1.0 + droop.dv.abs()));
        assert!((u[1].re - 170.0 * droop.dw).abs() < 1e-6 * (1.0 + u[0].norm()));
        // the integrating row forces zero steady frequency deviation
        assert!(u[1].norm() < 1e-6 * (1.0 + u[0].norm()));
    }

    #[test]
    fn resonance_peak_grows_as_damping_vanishes() {
        let damped = LineModel::from_reactance(0.2, 0.7, W0);
        let light = LineModel::from_reactance(0.02, 0.7, W0);
        let p = |line: &LineModel| {
            let c = cs(Family::General, 20.0, 20.0, 1500.0, line);
            let (wi, _) = crate::synthesis::resonance_params(&c, &line.phasor(170.0));
            let g = grid_disturbance_response(&c, line).unwrap();
            peak_near(&g, wi, 3.0).unwrap().1
        };
        assert!(p(&light) > 3.0 * p(&damped));
    }

    #[test]
    fn zero_disturbance_zero_response() {
        let line = table_line();
        let c = cs(Family::General, 0.4, 1.2, 1500.0, &line);
        let g = grid_disturbance_response(&c, &line).unwrap().eval_jw(100.0).unwrap();
        let d = nalgebra::Vector2::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!((g * d).norm(), 0.0);
    }

    proptest! {
        #[test]
        fn dc_inverse_is_scaled_transpose(r in 0.001f64..5.0, l in 1e-5f64..1e-1, w0 in 10.0f64..1000.0) {
            let m = LineModel::new(r, l, w0);
            let g0 = line_tf(&m).eval(Complex64::new(0.0, 0.0)).unwrap();
            let gt = g0.transpose() * Complex64::new(m.zbar() * m.zbar(), 0.0);
            let prod = g0 * gt;
            prop_assert!(max_abs_diff(&prod, &CMatrix2::identity()) < 1e-10);
            let real = Matrix2::new(r, m.x(), -m.x(), r) / (m.zbar() * m.zbar());
            prop_assert!(max_abs_diff(&g0, &complexify(&real)) < 1e-9 * real.norm());
        }
    }
}
