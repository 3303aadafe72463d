//! Desk-scale acceptance suite: one check per criterion, each with a pinned
//! tolerance and a wall-clock budget.
//!
//! A check passes only if its measured values are inside tolerance and it
//! finishes within budget. Every check computes its expected values from an
//! independent route (closed forms, brute-force evaluation, or a separate
//! time-domain integration) rather than re-using the code under test.

use crate::droop::{droop_rotation, quasi_static_loop, DroopMatrix, LinePhasor};
use crate::lineloop::{grid_disturbance_response, hsi_feedback_law_unchecked, line_derivatives, line_tf, peak_near, sensitivity_pair, LineModel};
use crate::microgrid::metrics::{settling_time, SETTLING_BAND};
use crate::microgrid::scenario::{build_scenario, bundled, parse_config, Scenario, NOMINAL_OMEGA};
use crate::microgrid::{metrics, Report, Simulation, TimeSeries};
use crate::numerics::freq::log_grid;
use crate::numerics::mimo::max_abs_diff;
use crate::numerics::{phase_margin, rk4_step, singular_values, tf_to_ss, CMatrix2, RationalTF, StateSpace};
use crate::plant::{DQPair, InverterParams};
use crate::synthesis::{design_lag, design_inner, resonance_params, steady_state_droop, synthesize, ControllerSet, DesignSpec, Family};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Display;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

const W0: f64 = NOMINAL_OMEGA;
const V0: f64 = 170.0;

/// Knobs for the suite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options {
    /// Factor applied to the simulated voltage compensators in the droop
    /// equivalence runs while the expected values keep the designed gains.
    /// Anything but 1 is a negative control.
    pub gain_scale: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self { gain_scale: 1.0 }
    }
}

/// Outcome of one criterion.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    /// Measured values, or the error that stopped the check.
    pub measured: String,
    pub tolerance: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} | tol {} | {:.2} s of {} s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.tolerance,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

struct Check {
    ok: bool,
    measured: String,
    tolerance: String,
}

type CheckFn = fn(&Options) -> Result<Check, String>;

struct Criterion {
    id: usize,
    title: &'static str,
    budget_s: u64,
    run: CheckFn,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "rotation-design equivalence", budget_s: 5, run: rotation_equivalence },
    Criterion { id: 2, title: "inner-loop exactness", budget_s: 1, run: inner_loop },
    Criterion { id: 3, title: "lag-design margin", budget_s: 2, run: lag_margin },
    Criterion { id: 4, title: "steady-state droop equivalence", budget_s: 30, run: droop_equivalence },
    Criterion { id: 5, title: "q-axis rejection", budget_s: 10, run: q_axis },
    Criterion { id: 6, title: "dc singular values", budget_s: 2, run: dc_singular_values },
    Criterion { id: 7, title: "resonance and notch", budget_s: 3, run: resonance_notch },
    Criterion { id: 8, title: "three-inverter sharing", budget_s: 180, run: sharing },
    Criterion { id: 9, title: "frequency droop magnitude", budget_s: 120, run: frequency_droop },
    Criterion { id: 10, title: "grid connect/island", budget_s: 240, run: grid_tie },
    Criterion { id: 11, title: "time/frequency cross-oracle", budget_s: 120, run: cross_oracle },
];

/// Ids of every criterion, in order.
pub fn ids() -> Vec<usize> {
    CRITERIA.iter().map(|c| c.id).collect()
}

/// Runs one criterion; `None` for an unknown id.
pub fn run_one(id: usize, opts: &Options) -> Option<Outcome> {
    let c = CRITERIA.iter().find(|c| c.id == id)?;
    let start = Instant::now();
    let res = (c.run)(opts);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(c.budget_s);
    Some(match res {
        Ok(chk) => Outcome {
            id,
            title: c.title,
            passed: chk.ok && elapsed <= budget,
            measured: chk.measured,
            tolerance: chk.tolerance,
            elapsed,
            budget,
        },
        Err(e) => Outcome {
            id,
            title: c.title,
            passed: false,
            measured: format!("error: {e}"),
            tolerance: "-".into(),
            elapsed,
            budget,
        },
    })
}

/// Runs the selected criteria (all when `only` is empty) on up to `threads`
/// workers. Results come back in id order.
pub fn run(only: &[usize], opts: &Options, threads: usize) -> Vec<Outcome> {
    let todo: Vec<usize> = if only.is_empty() { ids() } else { only.to_vec() };
    let next = AtomicUsize::new(0);
    let out = Mutex::new(Vec::with_capacity(todo.len()));
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, todo.len().max(1)) {
            s.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::Relaxed);
                let Some(&id) = todo.get(n) else { break };
                if let Some(o) = run_one(id, opts) {
                    out.lock().expect("no panics while held").push(o);
                }
            });
        }
    });
    let mut v = out.into_inner().expect("workers joined");
    v.sort_by_key(|o| o.id);
    v
}

fn err<E: Display>(e: E) -> String {
    e.to_string()
}

fn nominal_inverter() -> InverterParams {
    InverterParams {
        c: 40e-6,
        l_i: 3e-3,
        r_i: 0.2,
        v_dc: 250.0,
    }
}

fn spec(family: Family, line: &LineModel, gamma_d: f64, gamma_q: f64, wc: f64) -> DesignSpec {
    DesignSpec {
        wc,
        pm_deg: 53.0,
        beta_lag: 0.01,
        family,
        line: line.phasor(V0),
        inverter: nominal_inverter(),
        gamma_d,
        gamma_q,
        notch_xi0: None,
    }
}

/// Entrywise relative error; entries below `1e-6` of the matrix scale are
/// compared against the scale instead.
fn entry_rel(a: &CMatrix2, b: &CMatrix2) -> f64 {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm() / x.norm().max(1e-6 * scale))
        .fold(0.0, f64::max)
}

fn rotation_equivalence(_: &Options) -> Result<Check, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let line0 = LinePhasor::new(0.0, 0.75, V0, W0);
    let k0 = DroopMatrix::inductive(2.0, 0.3, V0);
    let base = quasi_static_loop(&k0, &line0).map_err(err)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let phi = rng.gen_range(5.0f64..85.0).to_radians();
        let zbar = rng.gen_range(0.3..2.0);
        let line = LinePhasor::from_polar(zbar, phi, V0, W0);
        let rot = quasi_static_loop(&droop_rotation(&k0, FRAC_PI_2, &line0, &line), &line).map_err(err)?;
        for _ in 0..30 {
            let s = Complex64::new(rng.gen_range(-100.0..100.0), rng.gen_range(-2000.0..2000.0));
            worst = worst.max(entry_rel(&base.eval(s).map_err(err)?, &rot.eval(s).map_err(err)?));
        }
    }
    Ok(Check {
        ok: worst < 1e-9,
        measured: format!("max entrywise rel err {worst:.2e} over 20 angles x 30 points"),
        tolerance: "< 1e-9".into(),
    })
}

fn inner_loop(_: &Options) -> Result<Check, String> {
    let p = nominal_inverter();
    let cs = synthesize(&spec(Family::Inductive, &LineModel::from_reactance(0.1, 0.75, W0), 1.0, 5.0, 1000.0)).map_err(err)?;
    let tau = cs.tau;
    let (kc, tc) = design_inner(&p, tau);
    // symbolic: T_c must be 1 / (tau s + 1) coefficient by coefficient
    let lead = tc.den().leading();
    let (num, den) = (tc.num().scale(1.0 / lead), tc.den().scale(1.0 / lead));
    let want_den = [1.0 / tau, 1.0];
    let sym_err = if num.degree() == 0 && den.degree() == 1 {
        (num.coeff(0) - 1.0 / tau).abs() * tau + (den.coeff(0) - want_den[0]).abs() * tau + (den.coeff(1) - want_den[1]).abs()
    } else {
        f64::INFINITY
    };
    // time domain: L di/dt = u - R i, u = K_c (1 - i)
    let ss = tf_to_ss(&kc).map_err(err)?;
    let n = ss.order();
    let mut x = vec![0.0; n + 1];
    let steps = 20_000;
    let dt = 10.0 * tau / steps as f64;
    let mut sq = 0.0;
    for k in 1..=steps {
        rk4_step(
            |_, s, ds| {
                let i = s[n];
                let e = 1.0 - i;
                let xc = DVector::from_column_slice(&s[..n]);
                let dxc = &ss.a * &xc + &ss.b * e;
                let u = (&ss.c * &xc)[0] + ss.d[(0, 0)] * e;
                ds[..n].copy_from_slice(dxc.as_slice());
                ds[n] = (u - p.r_i * i) / p.l_i;
            },
            0.0,
            &mut x,
            dt,
        )
        .map_err(err)?;
        let t = k as f64 * dt;
        sq += (x[n] - (1.0 - (-t / tau).exp())).powi(2);
    }
    let rms = (sq / steps as f64).sqrt();
    Ok(Check {
        ok: sym_err < 1e-12 && rms < 5e-3,
        measured: format!("coefficient err {sym_err:.1e}, step rms err {:.4} %", rms * 100.0),
        tolerance: "exact (1e-12), rms < 0.5 %".into(),
    })
}

fn lag_margin(_: &Options) -> Result<Check, String> {
    let line = LineModel::from_reactance(0.1, 0.75, W0);
    let (mut dpm, mut dwc): (f64, f64) = (0.0, 0.0);
    for family in [Family::Resistive, Family::Inductive] {
        for pm in [45.0, 53.0] {
            for wc in [50.0, 100.0, 200.0] {
                let mut s = spec(family, &line, 1.0, 5.0, wc);
                s.pm_deg = pm;
                if family == Family::Inductive {
                    s.beta_lag = 0.0;
                }
                let lag = design_lag(&s).map_err(err)?;
                let m = phase_margin(&lag.loop_tf(s.inverter.c)).map_err(err)?;
                dpm = dpm.max((m.margin_deg - pm).abs());
                dwc = dwc.max((m.crossover - wc).abs() / wc);
            }
        }
    }
    Ok(Check {
        ok: dpm < 1.0 && dwc < 0.02,
        measured: format!("max margin err {dpm:.3} deg, max crossover err {:.3} % (lag and PI)", dwc * 100.0),
        tolerance: "< 1 deg, < 2 %".into(),
    })
}

/// One inverter on its own resistive load, stepped 1.0 -> 1.2 pu at `t_step`.
fn single_inverter_toml(family: &str, gamma_d: f64, gamma_q: f64, t_step: f64, duration: f64) -> String {
    format!(
        r#"
version = 1
name = "single_{family}"
v0 = {V0}

[sim]
duration = {duration}
decimate = 10

[design]
wc = 1000.0
pm_deg = 53.0
family = "{family}"
gamma_d = {gamma_d}
gamma_q = {gamma_q}

[[inverter]]
c = 40e-6
l_i = 3e-3
r_i = 0.2
v_dc = 250.0
line = {{ r = 0.1, x = 0.75 }}
share = 1.0

[load]
kind = "resistive"
initial = 1.0
events = [{{ t = {t_step}, value = 1.2 }}]
"#
    )
}

fn run_scenario(text: &str, overrides: &[String]) -> Result<(Scenario, TimeSeries, Report), String> {
    let cfg = parse_config(text, overrides).map_err(err)?;
    let sc = build_scenario(&cfg, Path::new("."), overrides).map_err(err)?;
    finish(sc)
}

fn finish(sc: Scenario) -> Result<(Scenario, TimeSeries, Report), String> {
    let ts = Simulation::new(sc.clone()).map_err(err)?.run().map_err(err)?;
    let rep = metrics(&ts, &sc).map_err(err)?;
    Ok((sc, ts, rep))
}

fn scaled_voltage_loops(cs: &mut ControllerSet, g: f64) {
    cs.kv_d = cs.kv_d.scale(g);
    cs.kv_q = cs.kv_q.scale(g);
}

/// Relative error of each droop component after the load step.
fn droop_step_error(family: &str, gamma_d: f64, gamma_q: f64, opts: &Options) -> Result<(f64, f64, String), String> {
    let cfg = parse_config(&single_inverter_toml(family, gamma_d, gamma_q, 6.0, 12.0), &[]).map_err(err)?;
    let mut sc = build_scenario(&cfg, Path::new("."), &[]).map_err(err)?;
    let designed = sc.inverters[0].controller.clone();
    scaled_voltage_loops(&mut sc.inverters[0].controller, opts.gain_scale);
    let (_, _, rep) = finish(sc)?;
    let [a, b] = [&rep.segments[0], &rep.segments[1]];
    // i0 is fixed, so the step in i0 - i is minus the step in i
    let di = DQPair::new(a.id[0] - b.id[0], a.iq[0] - b.iq[0]);
    let want = steady_state_droop(&designed, di, V0);
    let dv = b.vd[0] - a.vd[0];
    let dw = b.omega[0] - a.omega[0];
    let ev = (dv - want.dv).abs() / want.dv.abs();
    let ew = (dw - want.dw).abs() / want.dw.abs();
    Ok((
        ev,
        ew,
        format!("{family}: dv {dv:.4} V vs {:.4}, dw {dw:.5} vs {:.5} rad/s", want.dv, want.dw),
    ))
}

fn droop_equivalence(opts: &Options) -> Result<Check, String> {
    let (rv, rw, rtxt) = droop_step_error("resistive", 1.0, 5.0, opts)?;
    let (iv, iw, itxt) = droop_step_error("inductive", 1.0, 5.0, opts)?;
    let worst = rv.max(rw).max(iv).max(iw);
    Ok(Check {
        ok: worst < 0.01,
        measured: format!("{rtxt}; {itxt}; worst rel err {:.3} %", worst * 100.0),
        tolerance: "< 1 %".into(),
    })
}

fn q_axis(_: &Options) -> Result<Check, String> {
    let (_, ts, rep) = run_scenario(&single_inverter_toml("inductive", 1.0, 5.0, 2.0, 10.0), &[])?;
    let seg = rep.segments.last().ok_or("no segments")?;
    let t = ts.time();
    let vq = ts.column("vq1").ok_or("missing vq1")?;
    let from = seg.end - 1.0;
    let worst = t
        .iter()
        .zip(&vq)
        .filter(|(ti, _)| **ti >= from)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
        / V0;
    Ok(Check {
        ok: worst < 1e-4,
        measured: format!("max |v^q| / v0 = {worst:.2e} with mismatch i^d {:.1} A", 100.0 - seg.id[0]),
        tolerance: "< 1e-4".into(),
    })
}

fn dc_singular_values(_: &Options) -> Result<Check, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut dc, mut sum): (f64, f64) = (0.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let grid = log_grid(0.1, 1e5, 5);
    for _ in 0..10 {
        let (r, x, gd) = (rng.gen_range(0.01..1.0), rng.gen_range(0.1..2.0), rng.gen_range(0.05..5.0));
        let line = LineModel::from_reactance(r, x, W0);
        let cs = synthesize(&spec(Family::General, &line, gd, 1.5, 2000.0)).map_err(err)?;
        let ki = hsi_feedback_law_unchecked(&cs).map_err(err)?;
        let pair = sensitivity_pair(&line_tf(&line), &ki).map_err(err)?;
        let z = r.hypot(x);
        let (smax, smin) = singular_values(&pair.s.eval(zero).map_err(err)?);
        let (tmax, tmin) = singular_values(&pair.t.eval(zero).map_err(err)?);
        for (got, want) in [(smax, z / (gd + z)), (smin, 0.0), (tmax, 1.0), (tmin, gd / (gd + z))] {
            dc = dc.max((got - want).abs());
        }
        for &w in &grid {
            let st = pair.s.eval_jw(w).map_err(err)? + pair.t.eval_jw(w).map_err(err)?;
            sum = sum.max(max_abs_diff(&st, &CMatrix2::identity()));
        }
    }
    Ok(Check {
        ok: dc < 1e-9 && sum < 1e-10,
        measured: format!("max dc sv err {dc:.2e}, max |S+T-I| {sum:.2e} over {} freqs", grid.len()),
        tolerance: "< 1e-9, < 1e-10".into(),
    })
}

fn resonance_notch(_: &Options) -> Result<Check, String> {
    let line = LineModel::from_reactance(0.02, 0.7, W0);
    let base_spec = spec(Family::General, &line, 20.0, 20.0, 1500.0);
    let plain = synthesize(&base_spec).map_err(err)?;
    let (wi, xi) = resonance_params(&plain, &base_spec.line);
    let (w_peak, g_plain) = peak_near(&plain.ki_inverse(), wi, 3.0).map_err(err)?;
    let peak_err = (w_peak - wi).abs() / wi;
    let xi0 = 10.0 * xi;
    let notched = synthesize(&DesignSpec {
        notch_xi0: Some(xi0),
        ..base_spec
    })
    .map_err(err)?;
    let (_, g_notch) = peak_near(&notched.ki_inverse(), wi, 3.0).map_err(err)?;
    let reduction = g_plain / g_notch;
    let hn = notched.notch.as_ref().ok_or("notch missing")?;
    let hn_err = (hn.magnitude(wi).map_err(err)? - xi / xi0).abs();
    Ok(Check {
        ok: peak_err < 0.02 && reduction >= 5.0 && hn_err < 1e-6,
        measured: format!(
            "w_i {wi:.2} rad/s, xi_i {xi:.4}; peak at {w_peak:.2} (err {:.3} %), notch reduction {reduction:.2}x, ||H_n(jw_i)| - xi_i/xi_0| {hn_err:.1e}",
            peak_err * 100.0
        ),
        tolerance: "peak < 2 %, reduction >= 5x, |H_n| 1e-6".into(),
    })
}

fn sharing(_: &Options) -> Result<Check, String> {
    let (_, _, rep) = run_scenario(bundled("three_inverter_sharing").ok_or("missing scenario")?, &[])?;
    let target = [0.2, 0.3, 0.5];
    let mut ok = rep.segments.len() == 3;
    let mut parts = Vec::new();
    for (n, seg) in rep.segments.iter().enumerate() {
        let tol = if n == 0 { 0.02 } else { 0.03 };
        let dev = seg.shares.iter().zip(target).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max);
        ok &= dev <= tol;
        let sh: Vec<String> = seg.shares.iter().map(|s| format!("{s:.4}")).collect();
        parts.push(format!("[{}] at {:.0} s (dev {dev:.4})", sh.join(" "), seg.start));
    }
    Ok(Check {
        ok,
        measured: parts.join(", "),
        tolerance: "+-0.02 nominal, +-0.03 after steps".into(),
    })
}

fn frequency_droop(_: &Options) -> Result<Check, String> {
    let sets = [
        "load.kind=\"current\"".to_string(),
        "load.events=[{ t = 5.0, value = 1.2 }]".to_string(),
        "sim.duration=10.0".to_string(),
    ];
    let (_, _, rep) = run_scenario(bundled("three_inverter_sharing").ok_or("missing scenario")?, &sets)?;
    let seg = rep.segments.get(1).ok_or("load step missing")?;
    let df = seg.freq_step_hz.abs();
    Ok(Check {
        ok: (df - 0.4).abs() <= 0.08,
        measured: format!(
            "0.2 pu sink step: {:.4} Hz -> {:.4} Hz, |df| {df:.4} Hz",
            rep.segments[0].freq_hz, seg.freq_hz
        ),
        tolerance: "0.4 Hz +- 20 %".into(),
    })
}

fn grid_tie(_: &Options) -> Result<Check, String> {
    let (sc, ts, rep) = run_scenario(bundled("grid_tie").ok_or("missing scenario")?, &[])?;
    let closed: Vec<&(f64, String)> = ts.events.iter().filter(|(_, e)| e.starts_with("breaker closed")).collect();
    let &(t_close, ref text) = *closed.first().ok_or("breaker never closed")?;
    let phase: f64 = text
        .split("phase error ")
        .nth(1)
        .and_then(|r| r.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .ok_or("unparsable close event")?;
    let seg_close = rep.segments.iter().find(|s| s.cause.starts_with("breaker closed")).ok_or("no closed segment")?;
    let seg_open = rep.segments.iter().find(|s| s.cause == "breaker opened").ok_or("breaker never opened")?;
    let p_settle = seg_close.settling.unwrap_or(f64::INFINITY);
    let t = ts.time();
    let end = f64::INFINITY;
    let v = ts.column("pcc_vd").ok_or("missing pcc_vd")?;
    let v_settle = settling_time(&t, &v, seg_open.start, end, seg_open.v_pcc, SETTLING_BAND * seg_open.v_pcc).unwrap_or(f64::INFINITY);
    // 2 % of the excursion: 2 % of 60 Hz would accept anything
    let f = ts.column("pcc_f").ok_or("missing pcc_f")?;
    let f_final = {
        let tail: Vec<f64> = t.iter().zip(&f).filter(|(ti, _)| **ti >= 0.5 * (seg_open.start + seg_open.end)).map(|(_, v)| *v).collect();
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let f_step = (f_final - seg_close.freq_hz).abs().max(1e-9);
    let f_settle = settling_time(&t, &f, seg_open.start, end, f_final, SETTLING_BAND * f_step).unwrap_or(f64::INFINITY);
    // PLL estimates carry an inter-unit swing; reported, not gated
    let mut w_settle: f64 = 0.0;
    for k in 0..sc.inverters.len() {
        let w = ts.column(&format!("w{}", k + 1)).ok_or("missing w")?;
        let step = (seg_open.omega[k] - seg_close.omega[k]).abs().max(1e-9);
        let s = settling_time(&t, &w, seg_open.start, end, seg_open.omega[k], SETTLING_BAND * step).unwrap_or(f64::INFINITY);
        w_settle = w_settle.max(s);
    }
    let island_p = seg_open.settling.unwrap_or(f64::INFINITY);
    let recovery = v_settle.max(f_settle).max(island_p);
    Ok(Check {
        ok: phase.abs() < 0.02 && p_settle < 2.0 && recovery < 2.0,
        measured: format!(
            "closed at {t_close:.3} s with phase err {phase:.5} rad; P settles {p_settle:.3} s; island recovery v {v_settle:.3} s, pcc f {f_settle:.3} s, P {island_p:.3} s (PLL w {w_settle:.3} s)"
        ),
        tolerance: "< 0.02 rad, < 2 s, < 2 s".into(),
    })
}

/// Time-domain loop `i = G_L Lambda (d - K_i i)` built from the line ODE and
/// per-entry realizations of the feedback law.
struct LinearLoop {
    line: LineModel,
    k: [[StateSpace; 2]; 2],
    offsets: [[usize; 2]; 2],
    n: usize,
}

impl LinearLoop {
    fn new(cs: &ControllerSet, line: LineModel) -> Result<Self, String> {
        let ki = hsi_feedback_law_unchecked(cs).map_err(err)?;
        let real = |i, j| tf_to_ss(ki.get(i, j)).map_err(err);
        let k = [[real(0, 0)?, real(0, 1)?], [real(1, 0)?, real(1, 1)?]];
        // states: i^d, i^q, integral of e^q, then the four realizations
        let mut n = 3;
        let mut offsets = [[0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                offsets[i][j] = n;
                n += k[i][j].order();
            }
        }
        Ok(Self { line, k, offsets, n })
    }

    fn deriv(&self, x: &[f64], d: [f64; 2], dx: &mut [f64]) {
        let i = [x[0], x[1]];
        let mut y = [0.0; 2];
        for r in 0..2 {
            for c in 0..2 {
                let ss = &self.k[r][c];
                let o = self.offsets[r][c];
                let xs = DVector::from_column_slice(&x[o..o + ss.order()]);
                let u = DVector::from_element(1, i[c]);
                y[r] += ss.output(&xs, &u)[0];
                dx[o..o + ss.order()].copy_from_slice(ss.derivative(&xs, &u).as_slice());
            }
        }
        let e = [d[0] - y[0], d[1] - y[1]];
        let di = line_derivatives(DQPair::new(i[0], i[1]), e[0], x[2], &self.line);
        dx[0] = di.d;
        dx[1] = di.q;
        dx[2] = e[1];
    }

    /// Steady sinusoidal response `i` to `d_j = sin(w t)`, by projection over
    /// whole periods once the transient has decayed.
    fn response(&self, w: f64, j: usize, settle: f64) -> Result<[Complex64; 2], String> {
        let period = 2.0 * PI / w;
        let per_period = ((period / 2e-5).ceil() as usize).max(400);
        let dt = period / per_period as f64;
        let skip = (settle / period).ceil() as usize;
        let keep = 10usize;
        let mut x = vec![0.0; self.n];
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for step in 0..(skip + keep) * per_period {
            let t = step as f64 * dt;
            rk4_step(
                |tt, s, ds| {
                    let mut d = [0.0; 2];
                    d[j] = (w * tt).sin();
                    self.deriv(s, d, ds)
                },
                t,
                &mut x,
                dt,
            )
            .map_err(err)?;
            if step >= skip * per_period {
                // rectangle rule on samples at the end of each step
                let tn = t + dt;
                let basis = Complex64::new((w * tn).sin(), (w * tn).cos());
                for (a, v) in acc.iter_mut().zip([x[0], x[1]]) {
                    *a += basis * v;
                }
            }
        }
        let scale = 2.0 / (keep * per_period) as f64;
        Ok(acc.map(|a| a * scale))
    }
}

fn cross_oracle(_: &Options) -> Result<Check, String> {
    let line = LineModel::from_reactance(0.1, 0.7, W0);
    let sp = spec(Family::General, &line, 0.4, 1.2, 1500.0);
    let cs = synthesize(&sp).map_err(err)?;
    let (wi, _) = resonance_params(&cs, &sp.line);
    let tf = grid_disturbance_response(&cs, &line).map_err(err)?;
    let lp = LinearLoop::new(&cs, line)?;
    // slowest closed-loop mode sets the settling wait
    let (_, den) = tf.common_den();
    let slow = RationalTF::from_polys(crate::numerics::Poly::one(), den)
        .map_err(err)?
        .poles()
        .iter()
        .map(|p| -p.re)
        .fold(f64::INFINITY, f64::min);
    if !(slow > 0.0) {
        return Err(format!("closed loop not asymptotically stable (slowest decay {slow:.3e})"));
    }
    let settle = 12.0 / slow;
    let (mut amp, mut ph): (f64, f64) = (0.0, 0.0);
    let freqs: Vec<f64> = (0..5).map(|n| 0.1 * wi * 100f64.powf(n as f64 / 4.0)).collect();
    for &w in &freqs {
        let want = tf.eval_jw(w).map_err(err)?;
        let col_scale = |j: usize| want[(0, j)].norm().max(want[(1, j)].norm());
        for j in 0..2 {
            // phasor of a sine input is 1, so the projection is the column itself
            let got = lp.response(w, j, settle)?;
            for r in 0..2 {
                let (g, h) = (got[r], want[(r, j)]);
                // entries far below the column peak carry no usable phase
                if h.norm() < 1e-3 * col_scale(j) {
                    continue;
                }
                amp = amp.max((g.norm() - h.norm()).abs() / h.norm());
                ph = ph.max(((g / h).arg()).to_degrees().abs());
            }
        }
    }
    Ok(Check {
        ok: amp < 0.01 && ph < 2.0,
        measured: format!(
            "w_i {wi:.1} rad/s, 5 freqs {:.1}..{:.1}: max amplitude err {:.2e} %, max phase err {ph:.2e} deg",
            freqs[0],
            freqs[4],
            amp * 100.0
        ),
        tolerance: "< 1 %, < 2 deg".into(),
    })
}
