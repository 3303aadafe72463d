//! Controller synthesis: inner current loop, outer voltage loops, coupling
//! filters, PLL filter, normalized gain parameterization and notch augmentation.

use crate::droop::LinePhasor;
use crate::error::SynthesisError;
use crate::numerics::{phase_margin, PhaseMargin, Poly, RationalTF, TFMatrix2, CANCEL_TOL};
use crate::plant::{current_plant, DQPair, InverterParams};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Which controller structure to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Lag voltage compensator, no coupling filters (`alpha = 0`).
    Resistive,
    /// PI voltage compensator (`beta^d = 0`) with coupling filters.
    Inductive,
    /// Every parameter from the normalized parameterization.
    General,
}

/// Inputs to the synthesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// Voltage-loop crossover (rad/s).
    pub wc: f64,
    /// Target phase margin (degrees).
    pub pm_deg: f64,
    #[serde(default = "default_beta_lag")]
    pub beta_lag: f64,
    pub family: Family,
    pub line: LinePhasor,
    pub inverter: InverterParams,
    /// Voltage scaling factor (ohm).
    pub gamma_d: f64,
    /// Frequency scaling factor (ohm).
    pub gamma_q: f64,
    /// Notch damping; enables notch/PR augmentation when present.
    #[serde(default)]
    pub notch_xi0: Option<f64>,
}

fn default_beta_lag() -> f64 {
    0.01
}

impl DesignSpec {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::Infeasible(m));
        if !(self.wc.is_finite() && self.wc > 0.0) {
            return bad(format!("crossover must be positive, got {}", self.wc));
        }
        if !(self.pm_deg > 0.0 && self.pm_deg < 90.0) {
            return bad(format!(
                "phase margin {} deg outside the achievable range (0, 90) of a single lag/lead stage",
                self.pm_deg
            ));
        }
        if !(0.0..1.0).contains(&self.beta_lag) {
            return bad(format!("lag ratio must lie in [0, 1), got {}", self.beta_lag));
        }
        if !self.inverter.is_valid() {
            return bad("inverter parameters must be positive and finite".into());
        }
        if !(self.gamma_d >= 0.0 && self.gamma_q >= 0.0) {
            return bad("scaling factors must be non-negative".into());
        }
        if self.line.zbar() <= 0.0 {
            return bad("line impedance must be nonzero".into());
        }
        Ok(())
    }
}

/// The complete per-inverter controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerSet {
    pub family: Family,
    pub kc: RationalTF,
    pub kv_d: RationalTF,
    pub kv_q: RationalTF,
    pub keta_d: RationalTF,
    pub keta_q: RationalTF,
    pub h_pll: RationalTF,
    pub notch: Option<RationalTF>,
    pub pr: Option<RationalTF>,
    pub tau: f64,
    pub k: f64,
    pub z: f64,
    pub beta_d: f64,
    pub beta_q: f64,
    pub alpha_d: f64,
    pub alpha_q: f64,
    pub gamma_d: f64,
    pub gamma_q: f64,
    /// Output capacitance assumed by the design (F).
    pub capacitance: f64,
}

/// `K_c = (L_i s + R_i) / (tau s)` and the closed loop `T_c = 1 / (tau s + 1)`.
pub fn design_inner(p: &InverterParams, tau: f64) -> (RationalTF, RationalTF) {
    assert!(tau > 0.0);
    let kc = RationalTF::from_polys(Poly::new(vec![p.r_i, p.l_i]), Poly::new(vec![0.0, tau])).expect("tau > 0");
    let tc = kc
        .series(&current_plant(p))
        .cancel(CANCEL_TOL)
        .feedback()
        .expect("nondegenerate inner loop");
    (kc, tc)
}

/// Lag/PI solution of the voltage loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagDesign {
    pub tau: f64,
    pub z: f64,
    pub k: f64,
    pub beta: f64,
}

impl LagDesign {
    pub fn kv(&self) -> RationalTF {
        lag(self.k, self.z, self.beta)
    }

    /// `L^d = (1 / (C s)) (1 / (tau s + 1)) K_v^d`
    pub fn loop_tf(&self, c: f64) -> RationalTF {
        voltage_loop(&self.kv(), self.tau, c)
    }
}

fn lag(k: f64, z: f64, beta: f64) -> RationalTF {
    RationalTF::from_polys(Poly::new(vec![k * z, k]), Poly::linear(beta * z)).expect("monic")
}

/// `G_v T_c K_v` for capacitance `c` and inner time constant `tau`.
pub fn voltage_loop(kv: &RationalTF, tau: f64, c: f64) -> RationalTF {
    let plant = RationalTF::from_polys(Poly::one(), Poly::new(vec![0.0, c, c * tau])).expect("c > 0");
    kv.series(&plant)
}

/// `(tau, z)` placing the maximum phase lead `pm` at `wc`:
/// `tau z = (1 - sin pm) / (1 + sin pm)` and `z / tau = wc^2`.
pub fn lead_placement(wc: f64, pm_deg: f64) -> (f64, f64) {
    let s = pm_deg.to_radians().sin();
    let r = (1.0 - s) / (1.0 + s);
    (r.sqrt() / wc, wc * r.sqrt())
}

/// Gain making `|L^d(j wc)| = 1` for the given lag ratio.
fn unity_gain(c: f64, tau: f64, z: f64, beta: f64, wc: f64) -> f64 {
    let num = wc.hypot(1.0 / tau) * wc.hypot(beta * z);
    c * tau * wc * num / wc.hypot(z)
}

/// Solves the voltage-loop lag design for a fixed lag ratio `spec.beta_lag`.
pub fn design_lag(spec: &DesignSpec) -> Result<LagDesign, SynthesisError> {
    spec.validate()?;
    let (tau, z) = lead_placement(spec.wc, spec.pm_deg);
    if !(tau > 0.0) {
        return Err(SynthesisError::Infeasible(format!("required inner time constant {tau} is not positive")));
    }
    let k = unity_gain(spec.inverter.c, tau, z, spec.beta_lag, spec.wc);
    Ok(LagDesign {
        tau,
        z,
        k,
        beta: spec.beta_lag,
    })
}

/// Lag design whose ratio follows the normalization `beta = c_beta * k`.
fn design_lag_coupled(spec: &DesignSpec, c_beta: f64) -> Result<LagDesign, SynthesisError> {
    let (tau, z) = lead_placement(spec.wc, spec.pm_deg);
    let c = spec.inverter.c;
    let mut k = unity_gain(c, tau, z, 0.0, spec.wc);
    for _ in 0..200 {
        let beta = c_beta * k;
        if beta >= 1.0 {
            return Err(SynthesisError::Infeasible(format!(
                "normalized lag ratio beta^d = {beta:.4} must stay below 1; reduce gamma_d or the crossover"
            )));
        }
        let next = unity_gain(c, tau, z, beta, spec.wc);
        let done = (next - k).abs() <= 1e-15 * k;
        k = next;
        if done {
            break;
        }
    }
    Ok(LagDesign {
        tau,
        z,
        k,
        beta: c_beta * k,
    })
}

/// `K_v^q = k (s + z) / s`
pub fn design_pi_q(k: f64, z: f64) -> RationalTF {
    lag(k, z, 0.0)
}

/// `H = (s + beta^q z) / s`
pub fn design_pll(beta_q: f64, z: f64) -> RationalTF {
    RationalTF::from_polys(Poly::linear(beta_q * z), Poly::s()).expect("monic")
}

/// `K_eta^d = alpha^d z / (s + z)`, `K_eta^q = alpha^q z / (s + z) * H^-1`.
pub fn design_coupling(alpha_d: f64, alpha_q: f64, z: f64, h: &RationalTF) -> Result<(RationalTF, RationalTF), SynthesisError> {
    let lp = RationalTF::from_polys(Poly::constant(z), Poly::linear(z)).expect("monic");
    let keta_d = lp.scale(alpha_d);
    let keta_q = lp.scale(alpha_q).series(&h.inv()?).cancel(CANCEL_TOL);
    Ok((keta_d, keta_q))
}

/// Normalized coupling and lag parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalized {
    pub alpha_d: f64,
    pub alpha_q: f64,
    pub beta_d: f64,
    pub beta_q: f64,
}

/// `beta = gamma k R / |Z|`, `alpha = gamma X / |Z|`.
pub fn normalize_gains(gamma_d: f64, gamma_q: f64, line: &LinePhasor, k: f64) -> Normalized {
    let z = line.zbar();
    Normalized {
        alpha_d: gamma_d * line.x / z,
        alpha_q: gamma_q * line.x / z,
        beta_d: gamma_d * k * line.r / z,
        beta_q: gamma_q * k * line.r / z,
    }
}

/// Runs the full synthesis for `spec`.
pub fn synthesize(spec: &DesignSpec) -> Result<ControllerSet, SynthesisError> {
    spec.validate()?;
    let line = &spec.line;
    let zbar = line.zbar();
    let lag_design = match spec.family {
        Family::Inductive => design_lag(&DesignSpec {
            beta_lag: 0.0,
            ..spec.clone()
        })?,
        Family::Resistive | Family::General => design_lag_coupled(spec, spec.gamma_d * line.r / zbar)?,
    };
    let LagDesign { tau, z, k, .. } = lag_design;
    let norm = normalize_gains(spec.gamma_d, spec.gamma_q, line, k);
    let (alpha_d, alpha_q, beta_d) = match spec.family {
        Family::Resistive => (0.0, 0.0, lag_design.beta),
        Family::Inductive => (norm.alpha_d, norm.alpha_q, 0.0),
        Family::General => (norm.alpha_d, norm.alpha_q, lag_design.beta),
    };
    let beta_q = norm.beta_q;
    let (kc, _) = design_inner(&spec.inverter, tau);
    let h_pll = design_pll(beta_q, z);
    let (keta_d, keta_q) = design_coupling(alpha_d, alpha_q, z, &h_pll)?;
    let mut cs = ControllerSet {
        family: spec.family,
        kc,
        kv_d: lag(k, z, beta_d),
        kv_q: design_pi_q(k, z),
        keta_d,
        keta_q,
        h_pll,
        notch: None,
        pr: None,
        tau,
        k,
        z,
        beta_d,
        beta_q,
        alpha_d,
        alpha_q,
        gamma_d: spec.gamma_d,
        gamma_q: spec.gamma_q,
        capacitance: spec.inverter.c,
    };
    if let Some(xi0) = spec.notch_xi0 {
        let (w_i, xi_i) = resonance_params(&cs, line);
        if !(xi0 > xi_i) {
            return Err(SynthesisError::Infeasible(format!(
                "notch damping {xi0} must exceed the resonance damping {xi_i:.4}"
            )));
        }
        let (hn, hpr) = design_notch(w_i, xi_i, xi0);
        cs.notch = Some(hn);
        cs.pr = Some(hpr);
    }
    Ok(cs)
}

/// Resonance of the inverse feedback law: `w_i = k z sqrt(gd gq)`,
/// `xi_i = (gd + gq) / (2 sqrt(gd gq)) R / |Z|`.
pub fn resonance_params(cs: &ControllerSet, line: &LinePhasor) -> (f64, f64) {
    let g = (cs.gamma_d * cs.gamma_q).sqrt();
    (cs.k * cs.z * g, (cs.gamma_d + cs.gamma_q) / (2.0 * g) * line.r / line.zbar())
}

/// Band-stop `H_n` centred on `w_i` and its inverse `H_PR`.
pub fn design_notch(w_i: f64, xi_i: f64, xi_0: f64) -> (RationalTF, RationalTF) {
    let hn = RationalTF::from_polys(Poly::second_order(xi_i, w_i), Poly::second_order(xi_0, w_i)).expect("monic");
    let hpr = hn.inv().expect("nonzero numerator");
    (hn, hpr)
}

impl ControllerSet {
    /// `T_c = 1 / (tau s + 1)`
    pub fn tc(&self) -> RationalTF {
        RationalTF::first_order_lag(self.tau)
    }

    /// Voltage compensators including the resonance augmentation.
    pub fn kv_d_eff(&self) -> RationalTF {
        self.augment(&self.kv_d, &self.notch)
    }

    pub fn kv_q_eff(&self) -> RationalTF {
        self.augment(&self.kv_q, &self.notch)
    }

    /// Coupling filters including the resonance augmentation.
    pub fn keta_d_eff(&self) -> RationalTF {
        self.augment(&self.keta_d, &self.pr)
    }

    pub fn keta_q_eff(&self) -> RationalTF {
        self.augment(&self.keta_q, &self.pr)
    }

    fn augment(&self, base: &RationalTF, extra: &Option<RationalTF>) -> RationalTF {
        match extra {
            Some(f) => base.series(f),
            None => base.clone(),
        }
    }

    pub fn loop_d(&self) -> RationalTF {
        voltage_loop(&self.kv_d, self.tau, self.capacitance)
    }

    pub fn loop_q(&self) -> RationalTF {
        voltage_loop(&self.kv_q, self.tau, self.capacitance)
    }

    /// Voltage-loop complementary sensitivities `(T^d, T^q)`.
    pub fn voltage_tracking(&self) -> crate::error::NumericsResult<(RationalTF, RationalTF)> {
        Ok((self.loop_d().feedback()?, self.loop_q().feedback()?))
    }

    /// Inverse-impedance feedback law in the normalized closed form.
    pub fn ki_matrix(&self) -> TFMatrix2 {
        let (k, z) = (self.k, self.z);
        let den = Poly::new(vec![k * z, k]);
        let tf = |num: Poly| RationalTF::from_polys(num, den.clone()).expect("k > 0");
        let base = TFMatrix2::new(
            tf(Poly::linear(self.beta_d * z)),
            tf(Poly::constant(-k * self.alpha_d * z)),
            tf(Poly::constant(k * self.alpha_q * z)),
            tf(Poly::linear(self.beta_q * z)),
        );
        match &self.pr {
            Some(pr) => base.scale_tf(pr),
            None => base,
        }
    }

    /// Closed form of the inverse law, with its resonant denominator.
    pub fn ki_inverse(&self) -> TFMatrix2 {
        let (k, z) = (self.k, self.z);
        let den = Poly::new(vec![
            z * z * (self.beta_d * self.beta_q + k * k * self.alpha_d * self.alpha_q),
            (self.beta_d + self.beta_q) * z,
            1.0,
        ]);
        let lead = Poly::new(vec![k * z, k]);
        let entry = |p: Poly| RationalTF::from_polys(&lead * &p, den.clone()).expect("monic");
        let base = TFMatrix2::new(
            entry(Poly::linear(self.beta_q * z)),
            entry(Poly::constant(k * self.alpha_d * z)),
            entry(Poly::constant(-k * self.alpha_q * z)),
            entry(Poly::linear(self.beta_d * z)),
        );
        match &self.notch {
            Some(hn) => base.scale_tf(hn),
            None => base,
        }
    }
}

/// Steady-state deviation produced by a constant mismatch `di = i0 - i_load`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteadyDroop {
    /// Capacitor voltage deviation `v^d - v0`.
    pub dv: f64,
    /// Frequency deviation `omega_1 - omega_0` (rad/s).
    pub dw: f64,
}

/// `dv = (beta^d / k) di^d - alpha^d di^q`,
/// `v2 dw = alpha^q di^d + (beta^q / k) di^q`.
///
/// With `alpha = 0` this is the i^d/v - i^q/f law; with `beta^d = beta^q = 0`
/// it is the P/f - Q/v law in current form.
pub fn steady_state_droop(cs: &ControllerSet, di: DQPair, v2: f64) -> SteadyDroop {
    SteadyDroop {
        dv: cs.beta_d / cs.k * di.d - cs.alpha_d * di.q,
        dw: (cs.alpha_q * di.d + cs.beta_q / cs.k * di.q) / v2,
    }
}

/// Polar form of the normalized steady droop:
/// `(gd |di| cos(phi + phi_di), gq |di| sin(phi + phi_di) / v2)`.
pub fn steady_state_droop_polar(gamma_d: f64, gamma_q: f64, line: &LinePhasor, di: DQPair, v2: f64) -> SteadyDroop {
    let ang = line.phi() + di.q.atan2(di.d);
    let mag = di.norm();
    SteadyDroop {
        dv: gamma_d * mag * ang.cos(),
        dw: gamma_q * mag * ang.sin() / v2,
    }
}

/// Mismatch magnitude recovered from observed deviations.
pub fn mismatch_norm(gamma_d: f64, gamma_q: f64, dv: f64, dw: f64, v2: f64) -> f64 {
    ((v2 / gamma_q * dw).powi(2) + (dv / gamma_d).powi(2)).sqrt()
}

/// Margins and saturation headroom summarized in the design report.
#[derive(Clone, Debug, Serialize)]
pub struct DesignMetrics {
    pub margin_d: PhaseMargin,
    pub margin_q: PhaseMargin,
    pub margin_inner: PhaseMargin,
    /// `v_dc - v2` at the nominal operating point (V).
    pub saturation_headroom: f64,
    pub resonance_w: f64,
    pub resonance_xi: f64,
}

pub fn design_metrics(cs: &ControllerSet, spec: &DesignSpec) -> Result<DesignMetrics, SynthesisError> {
    let inner = cs.kc.series(&current_plant(&spec.inverter));
    let (w, xi) = resonance_params(cs, &spec.line);
    Ok(DesignMetrics {
        margin_d: phase_margin(&cs.loop_d())?,
        margin_q: phase_margin(&cs.loop_q())?,
        margin_inner: phase_margin(&inner.cancel(CANCEL_TOL))?,
        saturation_headroom: spec.inverter.v_dc - spec.line.v2,
        resonance_w: w,
        resonance_xi: xi,
    })
}

fn fmt_roots(roots: &[num_complex::Complex64]) -> String {
    if roots.is_empty() {
        return "-".into();
    }
    let mut v: Vec<String> = roots
        .iter()
        .map(|r| {
            if r.im.abs() < 1e-9 * r.norm().max(1.0) {
                format!("{:.6e}", r.re)
            } else {
                format!("{:.6e}{:+.6e}j", r.re, r.im)
            }
        })
        .collect();
    v.sort();
    v.join(", ")
}

/// Human-readable design report; deterministic for a given input.
pub fn design_report(cs: &ControllerSet, spec: &DesignSpec) -> Result<String, SynthesisError> {
    let m = design_metrics(cs, spec)?;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# controller design");
    let _ = writeln!(w, "family            {:?}", cs.family);
    let _ = writeln!(w, "crossover_target  {} rad/s", spec.wc);
    let _ = writeln!(w, "margin_target     {} deg", spec.pm_deg);
    let _ = writeln!(w);
    let _ = writeln!(w, "## parameters");
    for (name, v) in [
        ("tau", cs.tau),
        ("k", cs.k),
        ("z", cs.z),
        ("beta_d", cs.beta_d),
        ("beta_q", cs.beta_q),
        ("alpha_d", cs.alpha_d),
        ("alpha_q", cs.alpha_q),
        ("gamma_d", cs.gamma_d),
        ("gamma_q", cs.gamma_q),
    ] {
        let _ = writeln!(w, "{name:<17} {v:.9e}");
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "## transfer functions");
    let _ = writeln!(w, "{:<8} {:<48} {:<40} {:<40} {}", "name", "role", "tf", "zeros", "poles");
    let mut rows: Vec<(&str, &str, &RationalTF)> = vec![
        ("Kc", "inner current compensator", &cs.kc),
        ("Kv_d", "d-axis voltage compensator", &cs.kv_d),
        ("Kv_q", "q-axis voltage compensator (PI)", &cs.kv_q),
        ("Keta_d", "d-axis coupling filter", &cs.keta_d),
        ("Keta_q", "q-axis coupling filter (blocking zero)", &cs.keta_q),
        ("H", "PLL filter", &cs.h_pll),
    ];
    if let Some(n) = &cs.notch {
        rows.push(("Hn", "band-stop on voltage compensators", n));
    }
    if let Some(p) = &cs.pr {
        rows.push(("Hpr", "resonant gain on coupling filters", p));
    }
    for (name, role, tf) in rows {
        let _ = writeln!(
            w,
            "{name:<8} {role:<48} {:<40} {:<40} {}",
            tf.to_string(),
            fmt_roots(&tf.zeros()),
            fmt_roots(&tf.poles())
        );
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "## measured");
    let _ = writeln!(
        w,
        "inner_loop        margin {:.4} deg at {:.4} rad/s",
        m.margin_inner.margin_deg, m.margin_inner.crossover
    );
    let _ = writeln!(
        w,
        "voltage_loop_d    margin {:.4} deg at {:.4} rad/s",
        m.margin_d.margin_deg, m.margin_d.crossover
    );
    let _ = writeln!(
        w,
        "voltage_loop_q    margin {:.4} deg at {:.4} rad/s",
        m.margin_q.margin_deg, m.margin_q.crossover
    );
    let _ = writeln!(w, "resonance         w_i {:.4} rad/s, xi_i {:.4}", m.resonance_w, m.resonance_xi);
    let _ = writeln!(w, "saturation        headroom {:.3} V (v_dc - v2)", m.saturation_headroom);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::freq::log_grid;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const W0: f64 = 376.99111843077515;

    fn inv1() -> InverterParams {
        InverterParams {
            c: 40e-6,
            l_i: 3.3e-3,
            r_i: 0.2,
            v_dc: 250.0,
        }
    }

    fn spec(family: Family, pm: f64, wc: f64) -> DesignSpec {
        DesignSpec {
            wc,
            pm_deg: pm,
            beta_lag: 0.01,
            family,
            line: LinePhasor::new(0.1, 0.7, 170.0, W0),
            inverter: inv1(),
            gamma_d: 1.0,
            gamma_q: 1.0,
            notch_xi0: None,
        }
    }

    #[test]
    fn inner_loop_example() {
        let (kc, tc) = design_inner(&inv1(), 1e-3);
        assert_eq!(kc.num().coeffs(), &[0.2 / 1e-3, 3.3]);
        assert_eq!(kc.den().coeffs(), &[0.0, 1.0]);
        assert_eq!(tc.num().degree(), 0);
        assert_eq!(tc.den().degree(), 1);
        assert!((tc.dc_gain().unwrap() - 1.0).abs() < 1e-15);
        assert!((tc.den().coeff(0) - 1000.0).abs() < 1e-9);
        let pm = phase_margin(&kc.series(&current_plant(&inv1())).cancel(CANCEL_TOL)).unwrap();
        assert!((pm.margin_deg - 90.0).abs() < 1e-9);
        assert!((pm.crossover - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn lag_placement_example() {
        let (tau, z) = lead_placement(100.0, 45.0);
        assert!((tau * z - 0.171572875).abs() < 1e-8);
        assert!((z - 41.421356).abs() < 1e-5);
        assert!((tau - 4.1421356e-3).abs() < 1e-9);
        // phase lead of (s+z)/(s+1/tau) peaks at wc with the target value
        let lead = RationalTF::from_polys(Poly::linear(z), Poly::linear(1.0 / tau)).unwrap();
        let grid = log_grid(10.0, 1000.0, 2000);
        let (w_best, ph) = grid
            .iter()
            .map(|&w| (w, lead.phase_deg(w)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((w_best - 100.0).abs() / 100.0 < 2e-3);
        assert!((ph - 45.0).abs() < 1e-3);
    }

    #[test]
    fn lag_margin_close_to_target() {
        let d = design_lag(&spec(Family::Resistive, 45.0, 100.0)).unwrap();
        let pm = phase_margin(&d.loop_tf(inv1().c)).unwrap();
        assert!((pm.crossover - 100.0).abs() / 100.0 < 1e-6);
        assert!((pm.margin_deg - 45.0).abs() < 0.6);
    }

    #[test]
    fn pi_is_zero_beta_lag() {
        let mut s = spec(Family::Inductive, 53.0, 200.0);
        s.beta_lag = 0.0;
        let d = design_lag(&s).unwrap();
        assert_eq!(d.kv(), design_pi_q(d.k, d.z));
        assert!((d.k - 200.0 * inv1().c).abs() < 1e-15);
        let pm = phase_margin(&d.loop_tf(inv1().c)).unwrap();
        assert!((pm.margin_deg - 53.0).abs() < 1e-6);
    }

    #[test]
    fn triple_pole_at_53_degrees() {
        // PI design with the exact triple-pole margin places all closed-loop poles at -wc
        let mut s = spec(Family::Inductive, 0.0, 300.0);
        s.pm_deg = (0.8f64).asin().to_degrees();
        s.beta_lag = 0.0;
        let d = design_lag(&s).unwrap();
        let t = d.loop_tf(inv1().c).feedback().unwrap();
        for p in t.poles() {
            assert!((p - Complex64::new(-300.0, 0.0)).norm() < 1.0);
        }
    }

    #[test]
    fn infeasible_margin() {
        assert!(matches!(
            design_lag(&spec(Family::Resistive, 95.0, 100.0)),
            Err(SynthesisError::Infeasible(_))
        ));
    }

    #[test]
    fn pi_q_values() {
        let kv = design_pi_q(2.0, 40.0);
        assert!(kv.eval(Complex64::new(0.0, 0.0)).is_err());
        assert!((kv.magnitude(40.0).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pll_filter() {
        let h = design_pll(0.3, 50.0);
        assert_eq!(h.poles(), vec![Complex64::new(0.0, 0.0)]);
        let h0 = design_pll(0.0, 50.0).cancel(CANCEL_TOL);
        assert_eq!(h0, RationalTF::one());
    }

    #[test]
    fn normalization_example() {
        let line = LinePhasor::new(0.1, 0.7, 1.0, W0);
        let n = normalize_gains(1.0, 1.0, &line, 1.0);
        assert!((n.beta_d - 0.141421).abs() < 1e-6 && (n.beta_q - n.beta_d).abs() < 1e-15);
        assert!((n.alpha_d - 0.989949).abs() < 1e-6);
        let ind = normalize_gains(2.0, 3.0, &LinePhasor::new(0.0, 0.7, 1.0, W0), 5.0);
        assert_eq!((ind.beta_d, ind.beta_q), (0.0, 0.0));
        let res = normalize_gains(2.0, 3.0, &LinePhasor::new(0.4, 0.0, 1.0, W0), 5.0);
        assert_eq!((res.alpha_d, res.alpha_q), (0.0, 0.0));
    }

    #[test]
    fn coupling_filters() {
        let cs = synthesize(&spec(Family::General, 53.0, 500.0)).unwrap();
        assert!((cs.keta_d.dc_gain().unwrap() - cs.alpha_d).abs() < 1e-12);
        // blocking zero on the q coupling filter
        assert!(cs.keta_q.dc_gain().unwrap().abs() < 1e-15);
        assert!(cs.keta_q.is_proper());
        // K_eta^q H recovers alpha^q at DC
        let eff = cs.keta_q.series(&cs.h_pll).cancel(CANCEL_TOL);
        assert!((eff.dc_gain().unwrap() - cs.alpha_q).abs() < 1e-9 * cs.alpha_q);
        assert!((eff.dc_gain().unwrap() - cs.keta_d.dc_gain().unwrap()).abs() < 1e-9);
        let res = synthesize(&spec(Family::Resistive, 53.0, 500.0)).unwrap();
        assert!(res.keta_d.is_zero() && res.keta_q.is_zero());
    }

    #[test]
    fn families_respect_structure() {
        let ind = synthesize(&spec(Family::Inductive, 53.0, 500.0)).unwrap();
        assert_eq!(ind.beta_d, 0.0);
        assert!(ind.alpha_d > 0.0 && ind.beta_q > 0.0);
        let gen = synthesize(&spec(Family::General, 53.0, 500.0)).unwrap();
        let line = spec(Family::General, 53.0, 500.0).line;
        assert!((gen.beta_d / (gen.k * gen.alpha_d) - line.r / line.x).abs() < 1e-12);
        assert!((gen.beta_d - gen.gamma_d * gen.k * line.r / line.zbar()).abs() < 1e-12 * gen.beta_d);
    }

    #[test]
    fn ki_dc_identity() {
        let s = spec(Family::General, 53.0, 500.0);
        let cs = synthesize(&s).unwrap();
        let ki0 = cs.ki_matrix().eval(Complex64::new(0.0, 0.0)).unwrap();
        let (r, x) = (s.line.r, s.line.x);
        let z2 = r * r + x * x;
        let gl0 = nalgebra::Matrix2::new(r, x, -x, r) / z2;
        let prod = ki0 * crate::numerics::mimo::complexify(&gl0);
        let want = nalgebra::Matrix2::new(cs.gamma_d, 0.0, 0.0, cs.gamma_q) / z2.sqrt();
        assert!(crate::numerics::mimo::max_abs_diff(&prod, &crate::numerics::mimo::complexify(&want)) < 1e-10);
        let hi = cs.ki_matrix().eval(Complex64::new(0.0, 1e12)).unwrap();
        assert!((hi[(0, 0)].re - 1.0 / cs.k).abs() < 1e-6 / cs.k && hi[(0, 1)].norm() < 1e-6);
    }

    #[test]
    fn ki_inverse_is_inverse() {
        let cs = synthesize(&spec(Family::General, 53.0, 500.0)).unwrap();
        for s in [Complex64::new(0.0, 3.0), Complex64::new(-10.0, 300.0), Complex64::new(2.0, -7.0)] {
            let p = cs.ki_matrix().eval(s).unwrap() * cs.ki_inverse().eval(s).unwrap();
            assert!(crate::numerics::mimo::max_abs_diff(&p, &crate::numerics::CMatrix2::identity()) < 1e-9);
        }
    }

    #[test]
    fn resonance_examples() {
        let mut cs = synthesize(&spec(Family::General, 53.0, 500.0)).unwrap();
        let line = LinePhasor::new(0.1, 0.7, 1.0, W0);
        let (_, xi) = resonance_params(&cs, &line);
        assert!((xi - 0.1 / line.zbar()).abs() < 1e-15);
        let (_, xi0) = resonance_params(&cs, &LinePhasor::new(0.0, 0.7, 1.0, W0));
        assert_eq!(xi0, 0.0);
        cs.k = 2.0;
        cs.z = 40.0;
        cs.gamma_d = 1.0;
        cs.gamma_q = 4.0;
        assert!((resonance_params(&cs, &line).0 - 160.0).abs() < 1e-12);
    }

    #[test]
    fn notch_examples() {
        let (wi, xi, xi0) = (160.0, 0.02, 0.5);
        let (hn, hpr) = design_notch(wi, xi, xi0);
        assert!((hn.magnitude(wi).unwrap() - xi / xi0).abs() < 1e-12);
        assert!((hn.dc_gain().unwrap() - 1.0).abs() < 1e-15);
        assert!((hn.magnitude(1e9).unwrap() - 1.0).abs() < 1e-9);
        let mut rng_s = 0.37f64;
        for _ in 0..20 {
            rng_s = (rng_s * 7.13 + 0.19) % 1.0;
            let s = Complex64::new(rng_s * 100.0 - 50.0, rng_s * 900.0);
            let v = hn.eval(s).unwrap() * hpr.eval(s).unwrap();
            assert!((v - 1.0).norm() < 1e-10);
        }
        // explicit PR form: 1 + 2 (xi0 - xi) wi s / (s^2 + 2 xi wi s + wi^2)
        let s = Complex64::new(0.0, 123.0);
        let explicit = 1.0 + 2.0 * (xi0 - xi) * wi * s / (s * s + 2.0 * xi * wi * s + wi * wi);
        assert!((hpr.eval(s).unwrap() - explicit).norm() < 1e-12);
    }

    #[test]
    fn droop_examples() {
        let mut cs = synthesize(&spec(Family::Inductive, 53.0, 500.0)).unwrap();
        let zero = steady_state_droop(&cs, DQPair::ZERO, 1.0);
        assert_eq!((zero.dv, zero.dw), (0.0, 0.0));
        cs.alpha_q = 1.0;
        let d = steady_state_droop(&cs, DQPair::new(0.2, 0.0), 1.0);
        assert!((d.dw - 0.2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn polar_form_matches(r in 0.01f64..2.0, x in 0.01f64..2.0, gd in 0.1f64..50.0, gq in 0.1f64..50.0,
                              k in 0.001f64..1.0, did in -50.0f64..50.0, diq in -50.0f64..50.0) {
            let line = LinePhasor::new(r, x, 170.0, W0);
            let n = normalize_gains(gd, gq, &line, k);
            let mut cs = synthesize(&DesignSpec { line, ..spec(Family::General, 53.0, 500.0) }).unwrap();
            cs.k = k;
            cs.alpha_d = n.alpha_d;
            cs.alpha_q = n.alpha_q;
            cs.beta_d = n.beta_d;
            cs.beta_q = n.beta_q;
            let di = DQPair::new(did, diq);
            let a = steady_state_droop(&cs, di, 170.0);
            let b = steady_state_droop_polar(gd, gq, &line, di, 170.0);
            prop_assert!((a.dv - b.dv).abs() <= 1e-9 * (gd * di.norm()).max(1e-12));
            prop_assert!((a.dw - b.dw).abs() <= 1e-9 * (gq * di.norm() / 170.0).max(1e-12));
            let back = mismatch_norm(gd, gq, a.dv, a.dw, 170.0);
            prop_assert!((back - di.norm()).abs() <= 1e-9 * di.norm().max(1e-9));
            // geometric identity of the normalization
            prop_assert!(((n.beta_d / (k * gd)).powi(2) + (n.alpha_d / gd).powi(2) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn polar_reduces_to_pure_laws(gd in 0.1f64..50.0, gq in 0.1f64..50.0, did in -50.0f64..50.0, diq in -50.0f64..50.0) {
            let di = DQPair::new(did, diq);
            let res = steady_state_droop_polar(gd, gq, &LinePhasor::new(1.0, 0.0, 1.0, W0), di, 1.0);
            prop_assert!((res.dv - gd * did).abs() < 1e-9 * (gd * di.norm()).max(1.0));
            prop_assert!((res.dw - gq * diq).abs() < 1e-9 * (gq * di.norm()).max(1.0));
            let ind = steady_state_droop_polar(gd, gq, &LinePhasor::new(0.0, 1.0, 1.0, W0), di, 1.0);
            prop_assert!((ind.dv + gd * diq).abs() < 1e-9 * (gd * di.norm()).max(1.0));
            prop_assert!((ind.dw - gq * did).abs() < 1e-9 * (gq * di.norm()).max(1.0));
        }
    }
}
