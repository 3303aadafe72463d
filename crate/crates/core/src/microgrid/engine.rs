//! Averaged time-domain simulation of parallel inverters on a common PCC.
//!
//! The network is integrated in the stationary frame; each inverter's
//! controller sees its own PLL frame only. Controllers run at the control
//! period and hold their modulation index (in their own frame) in between.

use super::discrete::DiscreteTf;
use super::scenario::{operating_point, InitMode, InverterUnit, LoadKind, Scenario};
use super::series::TimeSeries;
use crate::error::NumericsError;
use crate::numerics::Rk4;
use crate::plant::{instantaneous_power, DQPair};
use num_complex::Complex64;
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Continuous states per inverter: i_L (2), v_C (2), i_line (2), theta.
const PER_INV: usize = 7;
/// Rows kept for the diagnostic dump on abort.
const DUMP_ROWS: usize = 100;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("state became non-finite at t = {t:.6} s")]
    NonFinite { t: f64, dump: Box<TimeSeries> },
    #[error("no PCC voltage satisfies a {amps} A current sink with {injected:.3} A injected")]
    NoVoltageSolution { amps: f64, injected: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Load seen by [`pcc_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PccLoad {
    Resistance(f64),
    /// Current sink in phase with the PCC voltage; `bus` is the
    /// bus-capacitance voltage state when modelled.
    CurrentSink { amps: f64, bus: Option<Complex64> },
}

/// Below this fraction of nominal voltage a current sink behaves as the
/// impedance it presents at the knee, so the bus cannot collapse into a
/// direction-less state.
pub const SINK_KNEE: f64 = 0.7;

/// Sink current in phase with `v`: magnitude `amps` above `v_knee`,
/// proportional to `|v|` below.
pub fn sink_current(amps: f64, v: Complex64, v_knee: f64) -> Complex64 {
    v * (amps / v.norm().max(v_knee))
}

/// PCC voltage (stationary frame) from the line currents.
pub fn pcc_solve(currents: &[Complex64], load: PccLoad, grid: Option<Complex64>) -> Result<Complex64, SimError> {
    if let Some(g) = grid {
        return Ok(g);
    }
    let total: Complex64 = currents.iter().sum();
    match load {
        PccLoad::Resistance(r) => Ok(total * r),
        PccLoad::CurrentSink { bus: Some(v), .. } => Ok(v),
        PccLoad::CurrentSink { amps, bus: None } => Err(SimError::NoVoltageSolution {
            amps,
            injected: total.norm(),
        }),
    }
}

fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Breaker decision for one control tick.
///
/// Closing requires the PCC and grid phases to agree within `tolerance`;
/// amplitude is not checked. Opening is unconditional.
pub fn breaker_logic(closed: bool, close_requested: bool, open_requested: bool, v_pcc: Complex64, v_grid: Complex64, tolerance: f64) -> bool {
    if open_requested {
        return false;
    }
    if closed {
        return true;
    }
    close_requested && wrap(v_pcc.arg() - v_grid.arg()).abs() < tolerance
}

/// RK4 steps per plant step.
///
/// A current sink whose direction follows the bus voltage loads the bus
/// capacitance with an effective conductance `amps / |v|` for angular
/// perturbations. Explicit RK4 needs `h G / C` below about 2.8; the step is
/// split until it is at most 1.
fn plant_refinement(sc: &Scenario) -> usize {
    if sc.load.kind != LoadKind::Current {
        return 1;
    }
    let amps = sc.load.events.iter().map(|e| e.1).fold(sc.load.initial, f64::max);
    let ratio = sc.sim.dt * amps / (SINK_KNEE * sc.v0 * sc.load.c_bus);
    ratio.ceil().max(1.0) as usize
}

/// Discrete controller of one inverter.
#[derive(Clone, Debug)]
struct Controller {
    pll: DiscreteTf,
    kv_d: DiscreteTf,
    kv_q: DiscreteTf,
    keta_d: DiscreteTf,
    keta_q: DiscreteTf,
    kc_d: DiscreteTf,
    kc_q: DiscreteTf,
    u_v_prev: DQPair,
    omega: f64,
    m: DQPair,
    saturated: bool,
}

impl Controller {
    fn new(u: &InverterUnit, ts: f64, omega0: f64) -> Result<Self, NumericsError> {
        let cs = &u.controller;
        let d = |tf| DiscreteTf::tustin(tf, ts);
        Ok(Self {
            pll: d(&cs.h_pll)?,
            kv_d: d(&cs.kv_d_eff())?,
            kv_q: d(&cs.kv_q_eff())?,
            keta_d: d(&cs.keta_d_eff())?,
            keta_q: d(&cs.keta_q_eff())?,
            kc_d: d(&cs.kc)?,
            kc_q: d(&cs.kc)?,
            u_v_prev: DQPair::ZERO,
            omega: omega0,
            m: DQPair::ZERO,
            saturated: false,
        })
    }

    /// One control period from frame measurements `v` (capacitor) and `i` (inductor).
    fn update(&mut self, u: &InverterUnit, v: DQPair, i: DQPair, omega0: f64, v_nom: f64) {
        let c = u.model.c;
        let l = u.model.l_i;
        self.omega = omega0 + self.pll.step(v.q) / v_nom;
        let w = self.omega;
        let eta_d = self.keta_d.step(self.u_v_prev.q);
        let eta_q = -self.keta_q.step(self.u_v_prev.d);
        let uv = DQPair::new(self.kv_d.step(u.v0 + eta_d - v.d), self.kv_q.step(eta_q - v.q));
        self.u_v_prev = uv;
        let i_ref = DQPair::new(uv.d + u.i0.d - c * w * v.q, uv.q + u.i0.q + c * w * v.d);
        let ui = DQPair::new(self.kc_d.step(i_ref.d - i.d), self.kc_q.step(i_ref.q - i.q));
        let vdc = u.params.v_dc;
        let md = (ui.d - l * w * i.q + v.d) / vdc;
        let mq = (ui.q + l * w * i.d + v.q) / vdc;
        self.saturated = md.abs() > 1.0 || mq.abs() > 1.0;
        self.m = DQPair::new(md.clamp(-1.0, 1.0), mq.clamp(-1.0, 1.0));
    }
}

/// Complete simulation state.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    /// Continuous states, [`PER_INV`] per inverter then the bus voltage if modelled.
    pub x: Vec<f64>,
    pub breaker: bool,
    pub load_value: f64,
    pub ticks: u64,
}

/// Power terms at one instant (dq amplitude convention, W).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerBalance {
    pub inverters: f64,
    pub load: f64,
    pub line_loss: f64,
    pub storage: f64,
    pub grid_import: f64,
}

impl PowerBalance {
    /// `inverters + grid_import - load - line_loss - storage`
    pub fn residual(&self) -> f64 {
        self.inverters + self.grid_import - self.load - self.line_loss - self.storage
    }
}

pub struct Simulation {
    scenario: Scenario,
    state: SimState,
    ctrl: Vec<Controller>,
    rk4: Rk4,
    series: TimeSeries,
    recent: VecDeque<Vec<f64>>,
    pcc_arg: f64,
    pcc_freq: f64,
    close_pending: bool,
    next_close: usize,
    next_open: usize,
    next_load: usize,
    saturation_logged: Vec<bool>,
    /// RK4 steps per configured plant step.
    refine: usize,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let n = scenario.inverters.len();
        let bus = scenario.load.kind == LoadKind::Current;
        let mut x = vec![0.0; n * PER_INV + if bus { 2 } else { 0 }];
        let ts = scenario.sim.control_dt;
        let mut ctrl = scenario
            .inverters
            .iter()
            .map(|u| Controller::new(u, ts, scenario.omega0))
            .collect::<Result<Vec<_>, _>>()?;
        let w0 = scenario.omega0;
        let i_total = match scenario.load.kind {
            LoadKind::Resistive => scenario.v0 / scenario.load.initial,
            LoadKind::Current => scenario.load.initial,
        };
        for (k, u) in scenario.inverters.iter().enumerate() {
            let b = k * PER_INV;
            match scenario.sim.init {
                InitMode::Flat => {
                    let v = Complex64::from_polar(u.v0, u.phase0);
                    x[b + 2] = v.re;
                    x[b + 3] = v.im;
                    x[b + 6] = u.phase0;
                }
                InitMode::Steady => {
                    let op = operating_point(scenario.v0, u.share.unwrap_or(0.0) * i_total, &u.line);
                    let i_l = op.i_line + Complex64::new(0.0, w0 * u.params.c) * op.v_c;
                    for (j, z) in [i_l, op.v_c, op.i_line].iter().enumerate() {
                        x[b + 2 * j] = z.re;
                        x[b + 2 * j + 1] = z.im;
                    }
                    x[b + 6] = op.v_c.arg();
                    let rot = Complex64::from_polar(1.0, -op.v_c.arg());
                    let il = DQPair::from_complex(i_l * rot);
                    let vm = op.v_c.norm();
                    let c = &mut ctrl[k];
                    let cs = &u.controller;
                    let uv = DQPair::new(il.d - u.i0.d, il.q - u.i0.q - u.model.c * w0 * vm);
                    c.kv_d.set_equilibrium(0.0, uv.d);
                    c.kv_q.set_equilibrium(0.0, uv.q);
                    c.keta_d.set_equilibrium(uv.q, cs.alpha_d * uv.q);
                    c.keta_q.set_equilibrium(uv.d, 0.0);
                    c.u_v_prev = uv;
                    let (rp, lp, lm) = (u.params.r_i, u.params.l_i, u.model.l_i);
                    c.kc_d.set_equilibrium(0.0, rp * il.d - w0 * lp * il.q + w0 * lm * il.q);
                    c.kc_q.set_equilibrium(0.0, rp * il.q + w0 * lp * il.d - w0 * lm * il.d);
                }
            }
        }
        if bus {
            x[n * PER_INV] = scenario.v0;
        }
        let mut columns = vec!["t".to_string()];
        for k in 1..=n {
            for c in ["p", "q", "vd", "vq", "w", "id", "iq", "m"] {
                columns.push(format!("{c}{k}"));
            }
        }
        columns.extend(["pcc_vd", "pcc_f", "breaker"].map(String::from));
        let mut series = TimeSeries::new(columns);
        series.meta = vec![
            ("tool".into(), format!("gridforge {}", env!("CARGO_PKG_VERSION"))),
            ("scenario".into(), scenario.name.clone()),
            ("scenario_sha256".into(), scenario.hash.clone()),
            ("seed".into(), scenario.sim.seed.to_string()),
            ("overrides".into(), scenario.overrides.join(" ")),
            (
                "units".into(),
                "t s; p,q dq-amplitude W/var; vd,vq V (own PLL frame); w rad/s; id,iq A line current (own frame); m modulation magnitude; pcc_vd V magnitude; pcc_f Hz; breaker 0/1".into(),
            ),
        ];
        let load_value = scenario.load.initial;
        let refine = plant_refinement(&scenario);
        let sim = Self {
            state: SimState {
                t: 0.0,
                x,
                breaker: false,
                load_value,
                ticks: 0,
            },
            ctrl,
            rk4: Rk4::new(0),
            series,
            recent: VecDeque::with_capacity(DUMP_ROWS),
            pcc_arg: 0.0,
            pcc_freq: scenario.omega0 / (2.0 * PI),
            close_pending: false,
            next_close: 0,
            next_open: 0,
            next_load: 0,
            saturation_logged: vec![false; n],
            refine,
            scenario,
        };
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn into_series(self) -> TimeSeries {
        self.series
    }

    fn n(&self) -> usize {
        self.scenario.inverters.len()
    }

    fn cplx(x: &[f64], i: usize) -> Complex64 {
        Complex64::new(x[i], x[i + 1])
    }

    fn v_knee(&self) -> f64 {
        SINK_KNEE * self.scenario.v0
    }

    fn grid_voltage(&self, t: f64) -> Option<Complex64> {
        match (&self.scenario.grid, self.state.breaker) {
            (Some(g), true) => Some(g.phasor(t)),
            _ => None,
        }
    }

    fn pcc_load(&self, x: &[f64]) -> PccLoad {
        match self.scenario.load.kind {
            LoadKind::Resistive => PccLoad::Resistance(self.state.load_value),
            LoadKind::Current => PccLoad::CurrentSink {
                amps: self.state.load_value,
                bus: Some(Self::cplx(x, self.n() * PER_INV)),
            },
        }
    }

    fn pcc_voltage(&self, t: f64, x: &[f64]) -> Complex64 {
        let n = self.n();
        let currents: Vec<Complex64> = (0..n).map(|k| Self::cplx(x, k * PER_INV + 4)).collect();
        pcc_solve(&currents, self.pcc_load(x), self.grid_voltage(t)).expect("bus state present")
    }

    /// Right-hand side of the network and plant equations.
    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let n = self.n();
        let v_pcc = self.pcc_voltage(t, x);
        let mut total = Complex64::new(0.0, 0.0);
        for (k, u) in self.scenario.inverters.iter().enumerate() {
            let b = k * PER_INV;
            let i_l = Self::cplx(x, b);
            let v_c = Self::cplx(x, b + 2);
            let i_line = Self::cplx(x, b + 4);
            let c = &self.ctrl[k];
            let v_inv = c.m.to_complex() * Complex64::from_polar(u.params.v_dc, x[b + 6]);
            let di_l = (v_inv - i_l * u.params.r_i - v_c) / u.params.l_i;
            let dv_c = (i_l - i_line) / u.params.c;
            let di_line = (v_c - i_line * u.line.r - v_pcc) / u.line.l;
            dx[b] = di_l.re;
            dx[b + 1] = di_l.im;
            dx[b + 2] = dv_c.re;
            dx[b + 3] = dv_c.im;
            dx[b + 4] = di_line.re;
            dx[b + 5] = di_line.im;
            dx[b + 6] = c.omega;
            total += i_line;
        }
        if self.scenario.load.kind == LoadKind::Current {
            let j = n * PER_INV;
            if self.state.breaker {
                dx[j] = 0.0;
                dx[j + 1] = 0.0;
            } else {
                let i_sink = sink_current(self.state.load_value, Self::cplx(x, j), self.v_knee());
                let dv = (total - i_sink) / self.scenario.load.c_bus;
                dx[j] = dv.re;
                dx[j + 1] = dv.im;
            }
        }
    }

    /// Power terms at the current state.
    pub fn power_balance(&self) -> PowerBalance {
        let x = &self.state.x;
        let t = self.state.t;
        let mut dx = vec![0.0; x.len()];
        self.derivatives(t, x, &mut dx);
        let v_pcc = self.pcc_voltage(t, x);
        let mut pb = PowerBalance {
            inverters: 0.0,
            load: 0.0,
            line_loss: 0.0,
            storage: 0.0,
            grid_import: 0.0,
        };
        let mut total = Complex64::new(0.0, 0.0);
        for (k, u) in self.scenario.inverters.iter().enumerate() {
            let b = k * PER_INV;
            let v_c = Self::cplx(x, b + 2);
            let i = Self::cplx(x, b + 4);
            let di = Self::cplx(&dx, b + 4);
            pb.inverters += (v_c * i.conj()).re;
            pb.line_loss += u.line.r * i.norm_sqr();
            pb.storage += u.line.l * (di * i.conj()).re;
            total += i;
        }
        let i_load = match self.scenario.load.kind {
            LoadKind::Resistive => v_pcc / self.state.load_value,
            LoadKind::Current => sink_current(self.state.load_value, Self::cplx(x, self.n() * PER_INV), self.v_knee()),
        };
        pb.load = (v_pcc * i_load.conj()).re;
        if self.state.breaker {
            pb.grid_import = (v_pcc * (i_load - total).conj()).re;
        } else if self.scenario.load.kind == LoadKind::Current {
            let dv = Self::cplx(&dx, self.n() * PER_INV);
            pb.storage += self.scenario.load.c_bus * (dv * v_pcc.conj()).re;
        }
        pb
    }

    fn apply_events(&mut self) {
        let t = self.state.t;
        let eps = 0.5 * self.scenario.sim.dt;
        while let Some(&(te, v)) = self.scenario.load.events.get(self.next_load) {
            if te > t + eps {
                break;
            }
            let old = self.state.load_value;
            self.state.load_value = v;
            self.next_load += 1;
            let unit = if self.scenario.load.kind == LoadKind::Resistive { "ohm" } else { "A" };
            self.series.events.push((t, format!("load {old} -> {v} {unit}")));
            log::info!("t={t:.4}: load {old} -> {v} {unit}");
        }
        let Some(grid) = self.scenario.grid.clone() else { return };
        let mut open_now = false;
        while let Some(&to) = grid.open.get(self.next_open) {
            if to > t + eps {
                break;
            }
            self.next_open += 1;
            open_now = true;
            self.close_pending = false;
        }
        while let Some(&tc) = grid.close.get(self.next_close) {
            if tc > t + eps {
                break;
            }
            self.next_close += 1;
            self.close_pending = true;
            self.series.events.push((t, "breaker close requested".into()));
        }
        let was = self.state.breaker;
        let v_pcc = self.pcc_voltage(t, &self.state.x);
        let now = breaker_logic(was, self.close_pending, open_now, v_pcc, grid.phasor(t), grid.tolerance);
        if now && !was {
            self.close_pending = false;
            let err = wrap(v_pcc.arg() - grid.phasor(t).arg());
            self.series.events.push((t, format!("breaker closed (phase error {err:.5} rad)")));
            log::info!("t={t:.4}: breaker closed, phase error {err:.5} rad");
        } else if !now && was {
            self.series.events.push((t, "breaker opened".into()));
            log::info!("t={t:.4}: breaker opened");
            if self.scenario.load.kind == LoadKind::Current {
                let g = grid.phasor(t);
                let j = self.n() * PER_INV;
                self.state.x[j] = g.re;
                self.state.x[j + 1] = g.im;
            }
        } else if self.close_pending && !now && self.state.ticks % 2000 == 0 {
            log::debug!("t={t:.4}: breaker close deferred, phases not aligned");
        }
        self.state.breaker = now;
    }

    fn control(&mut self) {
        let x = &self.state.x;
        let (w0, vn) = (self.scenario.omega0, self.scenario.v0);
        for (k, u) in self.scenario.inverters.iter().enumerate() {
            let b = k * PER_INV;
            let rot = Complex64::from_polar(1.0, -x[b + 6]);
            let i = DQPair::from_complex(Self::cplx(x, b) * rot);
            let v = DQPair::from_complex(Self::cplx(x, b + 2) * rot);
            let c = &mut self.ctrl[k];
            c.update(u, v, i, w0, vn);
            if c.saturated && !self.saturation_logged[k] {
                self.saturation_logged[k] = true;
                log::warn!("inverter {} modulation saturated at t={:.4}", k + 1, self.state.t);
            }
        }
    }

    fn row(&self) -> Vec<f64> {
        let x = &self.state.x;
        let mut row = Vec::with_capacity(self.series.columns.len());
        row.push(self.state.t);
        for (k, c) in self.ctrl.iter().enumerate() {
            let b = k * PER_INV;
            let rot = Complex64::from_polar(1.0, -x[b + 6]);
            let v = DQPair::from_complex(Self::cplx(x, b + 2) * rot);
            let i = DQPair::from_complex(Self::cplx(x, b + 4) * rot);
            let pq = instantaneous_power(v, i);
            row.extend([pq.p, pq.q, v.d, v.q, c.omega, i.d, i.q, c.m.to_complex().norm()]);
        }
        let v_pcc = self.pcc_voltage(self.state.t, x);
        row.extend([v_pcc.norm(), self.pcc_freq, if self.state.breaker { 1.0 } else { 0.0 }]);
        row
    }

    fn track_pcc_frequency(&mut self) {
        let arg = self.pcc_voltage(self.state.t, &self.state.x).arg();
        if self.state.ticks > 0 {
            let d = wrap(arg - self.pcc_arg);
            self.pcc_freq = d / self.scenario.sim.control_dt / (2.0 * PI);
        }
        self.pcc_arg = arg;
    }

    /// One control period: events, controller update, recording, plant substeps.
    pub fn tick(&mut self) -> Result<(), SimError> {
        self.apply_events();
        self.control();
        self.track_pcc_frequency();
        if self.state.ticks % self.scenario.sim.decimate as u64 == 0 {
            let row = self.row();
            if self.recent.len() == DUMP_ROWS {
                self.recent.pop_front();
            }
            self.recent.push_back(row.clone());
            self.series.push(row);
        }
        let dt = self.scenario.sim.dt / self.refine as f64;
        let steps = self.scenario.sim.substeps * self.refine;
        let t0 = self.state.t;
        let mut x = std::mem::take(&mut self.state.x);
        let mut rk4 = std::mem::replace(&mut self.rk4, Rk4::new(0));
        let mut result = Ok(());
        for s in 0..steps {
            let ts = t0 + s as f64 * dt;
            let mut f = |t: f64, x: &[f64], dx: &mut [f64]| self.derivatives(t, x, dx);
            if let Err(e) = rk4.step(&mut f, ts, &mut x, dt) {
                result = Err(e);
                break;
            }
        }
        self.state.x = x;
        self.rk4 = rk4;
        self.state.ticks += 1;
        self.state.t = t0 + self.scenario.sim.control_dt;
        match result {
            Ok(()) => Ok(()),
            Err(NumericsError::NonFinite) => Err(self.abort()),
            Err(e) => Err(e.into()),
        }
    }

    fn abort(&self) -> SimError {
        let mut dump = TimeSeries::new(self.series.columns.clone());
        dump.meta = self.series.meta.clone();
        dump.events = self.series.events.clone();
        for r in &self.recent {
            dump.push(r.clone());
        }
        SimError::NonFinite {
            t: self.state.t,
            dump: Box::new(dump),
        }
    }

    /// Runs until `t_end` (seconds).
    pub fn run_until(&mut self, t_end: f64) -> Result<(), SimError> {
        let ts = self.scenario.sim.control_dt;
        while self.state.t + 0.5 * ts < t_end {
            self.tick()?;
        }
        Ok(())
    }

    /// Runs the full scenario and returns the recorded series.
    pub fn run(mut self) -> Result<TimeSeries, SimError> {
        let end = self.scenario.sim.duration;
        self.run_until(end)?;
        let row = self.row();
        self.series.push(row);
        Ok(self.series)
    }
}

/// Convenience wrapper: build and run.
pub fn simulate(scenario: Scenario) -> Result<TimeSeries, SimError> {
    Simulation::new(scenario)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn resistive_pcc() {
        let v = pcc_solve(&[c(60.0, 0.0), c(40.0, 0.0)], PccLoad::Resistance(1.7), None).unwrap();
        assert!((v - c(170.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn grid_clamps_pcc() {
        let g = c(0.0, 170.0);
        let v = pcc_solve(&[c(100.0, 0.0)], PccLoad::Resistance(1.7), Some(g)).unwrap();
        assert_eq!(v, g);
    }

    #[test]
    fn sink_needs_bus_state() {
        let bus = c(120.0, -50.0);
        let v = pcc_solve(&[c(1.0, 0.0)], PccLoad::CurrentSink { amps: 100.0, bus: Some(bus) }, None).unwrap();
        assert_eq!(v, bus);
        let err = pcc_solve(&[c(60.0, 0.0)], PccLoad::CurrentSink { amps: 100.0, bus: None }, None).unwrap_err();
        assert!(matches!(err, SimError::NoVoltageSolution { amps, injected } if amps == 100.0 && (injected - 60.0).abs() < 1e-12));
    }

    #[test]
    fn sink_current_knee() {
        let knee = 0.7 * 170.0;
        let i = sink_current(100.0, Complex64::from_polar(170.0, 0.3), knee);
        assert!((i.norm() - 100.0).abs() < 1e-12 && (i.arg() - 0.3).abs() < 1e-12);
        // below the knee it is the knee impedance
        let low = sink_current(100.0, c(10.0, 0.0), knee);
        assert!((low.re - 10.0 * 100.0 / knee).abs() < 1e-12);
        assert_eq!(sink_current(100.0, c(0.0, 0.0), knee), c(0.0, 0.0));
    }

    #[test]
    fn breaker_examples() {
        let g = Complex64::from_polar(170.0, 1.0);
        let near = Complex64::from_polar(160.0, 1.015);
        let far = Complex64::from_polar(170.0, 1.1);
        assert!(breaker_logic(false, true, false, near, g, 0.02));
        assert!(!breaker_logic(false, true, false, far, g, 0.02));
        assert!(!breaker_logic(false, false, false, near, g, 0.02));
        assert!(breaker_logic(true, false, false, far, g, 0.02));
        assert!(!breaker_logic(true, false, true, near, g, 0.02));
        // alignment across the branch cut
        let a = Complex64::from_polar(1.0, PI - 0.005);
        let b = Complex64::from_polar(1.0, -PI + 0.005);
        assert!(breaker_logic(false, true, false, a, b, 0.02));
    }

    #[test]
    fn wrap_range() {
        for a in [-7.0, -PI, 0.0, PI, 3.5, 10.0] {
            let w = wrap(a);
            assert!(w > -PI && w <= PI);
            assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-12 || (1.0 - ((a - w) / (2.0 * PI)).fract().abs()) < 1e-12);
        }
    }
}
