//! Post-run metrics: per-segment steady values, sharing, deviations,
//! settling times and observed droop slopes.
//!
//! A segment runs from one state-changing event (load step, breaker closing
//! or opening) to the next. Its steady window is the second half of the
//! segment and must span at least [`MIN_PERIODS`] fundamental periods.

use super::scenario::Scenario;
use super::series::TimeSeries;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Shortest accepted steady window, in fundamental periods.
pub const MIN_PERIODS: f64 = 20.0;
/// Settling band as a fraction of the final value.
pub const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("steady window of segment starting at t = {start:.3} s spans {periods:.1} periods; at least {MIN_PERIODS} needed")]
    InsufficientWindow { start: f64, periods: f64 },
    #[error("series has no column `{0}`")]
    MissingColumn(String),
    #[error("series is empty")]
    Empty,
}

/// Steady-state summary of one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentMetrics {
    pub start: f64,
    pub end: f64,
    /// What started the segment.
    pub cause: String,
    /// Window means per inverter.
    pub p: Vec<f64>,
    pub id: Vec<f64>,
    pub iq: Vec<f64>,
    pub vd: Vec<f64>,
    pub vq: Vec<f64>,
    pub omega: Vec<f64>,
    /// `p_k / sum p`.
    pub shares: Vec<f64>,
    /// Mean inverter frequency (Hz).
    pub freq_hz: f64,
    /// `freq_hz` minus nominal.
    pub freq_dev_hz: f64,
    /// `freq_hz` minus the previous segment's.
    pub freq_step_hz: f64,
    pub v_pcc: f64,
    /// `(v_pcc - v0) / v0`.
    pub v_pcc_dev: f64,
    /// Time from segment start until every inverter's P stays within
    /// [`SETTLING_BAND`] of its steady value; `None` if it never does.
    pub settling: Option<f64>,
}

/// Least-squares slope of the steady values across segments.
#[derive(Clone, Debug, PartialEq)]
pub struct DroopSlopes {
    /// Per inverter, `d omega / d(i0^d - i^d)` (rad/s per A).
    pub omega_per_amp: Vec<f64>,
    /// Per inverter, `d v^d / d(i0^q - i^q)` (V per A).
    pub volt_per_amp: Vec<f64>,
    /// Mean frequency against total d current (Hz per unit current).
    pub hz_per_pu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub segments: Vec<SegmentMetrics>,
    /// Present when at least two islanded segments differ in load current
    /// by more than 1 % of `I_base`.
    pub slopes: Option<DroopSlopes>,
}

/// Mean of `y` over samples with `t` in `[a, b)`.
fn window_mean(t: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    let (sum, n) = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= a && ti < b)
        .fold((0.0, 0usize), |(s, n), (_, &v)| (s + v, n + 1));
    sum / n as f64
}

/// Time after `start` from which `y` stays within `band` of `target` on
/// `[start, end)`. `None` if the last sample is outside the band.
pub fn settling_time(t: &[f64], y: &[f64], start: f64, end: f64, target: f64, band: f64) -> Option<f64> {
    let mut last_out = None;
    let mut any = false;
    for (&ti, &v) in t.iter().zip(y) {
        if ti < start || ti >= end {
            continue;
        }
        any = true;
        if (v - target).abs() > band {
            last_out = Some(ti);
        }
    }
    if !any {
        return None;
    }
    match last_out {
        None => Some(0.0),
        Some(tl) => {
            let next = t.iter().copied().find(|&ti| ti > tl && ti < end)?;
            Some(next - start)
        }
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

fn is_boundary(text: &str) -> bool {
    text.starts_with("load ") || text.starts_with("breaker closed") || text == "breaker opened"
}

fn col(ts: &TimeSeries, name: &str) -> Result<Vec<f64>, MetricsError> {
    ts.column(name).ok_or_else(|| MetricsError::MissingColumn(name.into()))
}

/// Computes the report for a finished run of `scenario`.
pub fn metrics(ts: &TimeSeries, scenario: &Scenario) -> Result<Report, MetricsError> {
    if ts.is_empty() {
        return Err(MetricsError::Empty);
    }
    let t = ts.time();
    let n = scenario.inverters.len();
    let t_end = *t.last().expect("nonempty");
    let mut bounds = vec![(t[0], "start".to_string())];
    for (te, text) in &ts.events {
        if is_boundary(text) && *te > t[0] && *te < t_end {
            bounds.push((*te, text.clone()));
        }
    }
    let per = |name: &str| -> Result<Vec<Vec<f64>>, MetricsError> { (1..=n).map(|k| col(ts, &format!("{name}{k}"))).collect() };
    let (p, id, iq, vd, vq, w) = (per("p")?, per("id")?, per("iq")?, per("vd")?, per("vq")?, per("w")?);
    let breaker = col(ts, "breaker")?;
    let v_pcc = col(ts, "pcc_vd")?;
    let period = 2.0 * PI / scenario.omega0;
    let f0 = scenario.omega0 / (2.0 * PI);
    let mut segments: Vec<SegmentMetrics> = Vec::with_capacity(bounds.len());
    for (i, (start, cause)) in bounds.iter().enumerate() {
        let end = bounds.get(i + 1).map_or(t_end, |b| b.0);
        let a = 0.5 * (start + end);
        let periods = (end - a) / period;
        if periods < MIN_PERIODS {
            return Err(MetricsError::InsufficientWindow { start: *start, periods });
        }
        // the sample at the next event already sees it
        let hi = if i + 1 < bounds.len() { end } else { f64::INFINITY };
        let mean = |y: &Vec<f64>| window_mean(&t, y, a, hi);
        let pm: Vec<f64> = p.iter().map(mean).collect();
        let total: f64 = pm.iter().sum();
        let omega: Vec<f64> = w.iter().map(mean).collect();
        let freq_hz = omega.iter().sum::<f64>() / n as f64 / (2.0 * PI);
        let settle = (0..n)
            .map(|k| settling_time(&t, &p[k], *start, hi, pm[k], SETTLING_BAND * pm[k].abs()))
            .try_fold(0.0f64, |acc, s| s.map(|s| acc.max(s)));
        let vp = mean(&v_pcc);
        segments.push(SegmentMetrics {
            start: *start,
            end,
            cause: cause.clone(),
            shares: pm.iter().map(|v| v / total).collect(),
            id: id.iter().map(mean).collect(),
            iq: iq.iter().map(mean).collect(),
            vd: vd.iter().map(mean).collect(),
            vq: vq.iter().map(mean).collect(),
            p: pm,
            omega,
            freq_hz,
            freq_dev_hz: freq_hz - f0,
            freq_step_hz: segments.last().map_or(0.0, |s| freq_hz - s.freq_hz),
            v_pcc: vp,
            v_pcc_dev: (vp - scenario.v0) / scenario.v0,
            settling: settle,
        });
    }
    // slopes only from islanded segments; the grid fixes frequency otherwise
    let islanded: Vec<&SegmentMetrics> = segments
        .iter()
        .filter(|s| window_mean(&t, &breaker, 0.5 * (s.start + s.end), s.end) < 0.5)
        .collect();
    let itot: Vec<f64> = islanded.iter().map(|s| s.id.iter().sum::<f64>() / scenario.base.i_base).collect();
    let spread = itot.iter().copied().fold(f64::NEG_INFINITY, f64::max) - itot.iter().copied().fold(f64::INFINITY, f64::min);
    // segments at (nearly) the same load say nothing about the slope
    let slopes = if islanded.len() >= 2 && spread > 0.01 {
        let mut omega_per_amp = Vec::with_capacity(n);
        let mut volt_per_amp = Vec::with_capacity(n);
        for (k, u) in scenario.inverters.iter().enumerate() {
            let did: Vec<f64> = islanded.iter().map(|s| u.i0.d - s.id[k]).collect();
            let diq: Vec<f64> = islanded.iter().map(|s| u.i0.q - s.iq[k]).collect();
            let om: Vec<f64> = islanded.iter().map(|s| s.omega[k]).collect();
            let v: Vec<f64> = islanded.iter().map(|s| s.vd[k]).collect();
            omega_per_amp.push(ls_slope(&did, &om).unwrap_or(f64::NAN));
            volt_per_amp.push(ls_slope(&diq, &v).unwrap_or(f64::NAN));
        }
        let f: Vec<f64> = islanded.iter().map(|s| s.freq_hz).collect();
        Some(DroopSlopes {
            omega_per_amp,
            volt_per_amp,
            hz_per_pu: ls_slope(&itot, &f).unwrap_or(f64::NAN),
        })
    } else {
        None
    };
    Ok(Report {
        scenario: scenario.name.clone(),
        segments,
        slopes,
    })
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.scenario);
        for (i, s) in self.segments.iter().enumerate() {
            let _ = writeln!(out, "segment {i}: {:.3} - {:.3} s ({})", s.start, s.end, s.cause);
            let shares: Vec<String> = s.shares.iter().map(|v| format!("{v:.4}")).collect();
            let p: Vec<String> = s.p.iter().map(|v| format!("{v:.1}")).collect();
            let _ = writeln!(out, "  P [W]        {}", p.join(" "));
            let _ = writeln!(out, "  shares       {}", shares.join(" "));
            let _ = writeln!(
                out,
                "  frequency    {:.4} Hz (nominal {:+.4}, step {:+.4})",
                s.freq_hz, s.freq_dev_hz, s.freq_step_hz
            );
            let _ = writeln!(out, "  PCC voltage  {:.3} V ({:+.3} %)", s.v_pcc, 100.0 * s.v_pcc_dev);
            match s.settling {
                Some(ts) => {
                    let _ = writeln!(out, "  settling     {ts:.3} s");
                }
                None => {
                    let _ = writeln!(out, "  settling     not settled");
                }
            }
        }
        if let Some(sl) = &self.slopes {
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "droop slopes");
            let _ = writeln!(out, "  d omega / d i^d [rad/s/A]  {}", fmt(&sl.omega_per_amp));
            let _ = writeln!(out, "  d v^d / d i^q [V/A]        {}", fmt(&sl.volt_per_amp));
            let _ = writeln!(out, "  frequency vs load [Hz/pu]  {:.5}", sl.hz_per_pu);
        }
        out
    }

    /// One CSV row per segment.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let n = self.segments.first().map_or(0, |s| s.p.len());
        let mut cw = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["segment", "start_s", "end_s", "freq_hz", "freq_dev_hz", "freq_step_hz", "v_pcc", "v_pcc_dev", "settling_s"]
            .map(String::from)
            .to_vec();
        for k in 1..=n {
            header.push(format!("p{k}"));
        }
        for k in 1..=n {
            header.push(format!("share{k}"));
        }
        cw.write_record(&header)?;
        for (i, s) in self.segments.iter().enumerate() {
            let mut rec = vec![
                i.to_string(),
                s.start.to_string(),
                s.end.to_string(),
                s.freq_hz.to_string(),
                s.freq_dev_hz.to_string(),
                s.freq_step_hz.to_string(),
                s.v_pcc.to_string(),
                s.v_pcc_dev.to_string(),
                s.settling.map_or(String::new(), |v| v.to_string()),
            ];
            rec.extend(s.p.iter().map(|v| v.to_string()));
            rec.extend(s.shares.iter().map(|v| v.to_string()));
            cw.write_record(&rec)?;
        }
        cw.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microgrid::scenario::{build_scenario, parse_config};
    use std::path::Path;

    const SINGLE: &str = r#"
version = 1
name = "fixture"
v0 = 170.0
[sim]
duration = 4.0
[design]
wc = 1000.0
pm_deg = 53.0
family = "inductive"
gamma_d = 1.0
gamma_q = 5.0
[[inverter]]
c = 40e-6
l_i = 3e-3
r_i = 0.2
v_dc = 250.0
line = { r = 0.1, x = 0.75 }
share = 1.0
[load]
kind = "resistive"
initial = 1.0
"#;

    fn scenario() -> Scenario {
        build_scenario(&parse_config(SINGLE, &[]).unwrap(), Path::new("."), &[]).unwrap()
    }

    /// Piecewise steady values with first-order transients after each event.
    fn fixture(slope: f64, steps: &[(f64, f64)]) -> TimeSeries {
        let cols = ["t", "p1", "q1", "vd1", "vq1", "w1", "id1", "iq1", "m1", "pcc_vd", "pcc_f", "breaker"];
        let mut ts = TimeSeries::new(cols.map(String::from).to_vec());
        let i0 = 100.0;
        for k in 0..=4000 {
            let t = k as f64 * 1e-3;
            let mut id = 100.0;
            let mut prev = 100.0;
            for &(te, v) in steps {
                if t >= te {
                    prev = id;
                    id = v;
                }
            }
            let last = steps.iter().filter(|s| t >= s.0).last().map_or(0.0, |s| s.0);
            let id_t = id + (prev - id) * (-(t - last) / 0.05).exp();
            let w = 376.99 + slope * (i0 - id_t);
            ts.push(vec![t, 170.0 * id_t, 0.0, 170.0, 0.0, w, id_t, 0.0, 0.7, 165.0, w / (2.0 * PI), 0.0]);
        }
        for &(te, v) in steps {
            ts.events.push((te, format!("load x -> {v} ohm")));
        }
        ts
    }

    #[test]
    fn recovers_injected_slope() {
        let ts = fixture(0.25, &[(1.0, 110.0), (2.0, 90.0), (3.0, 120.0)]);
        let r = metrics(&ts, &scenario()).unwrap();
        assert_eq!(r.segments.len(), 4);
        let sl = r.slopes.unwrap();
        assert!((sl.omega_per_amp[0] - 0.25).abs() < 1e-6, "{:?}", sl.omega_per_amp);
        assert!((r.segments[1].freq_step_hz - (-0.25 * 10.0) / (2.0 * PI)).abs() < 1e-5);
        assert!((r.segments[0].shares[0] - 1.0).abs() < 1e-12);
        // 2 % of 110 A takes ln(10 / 2.2) tau to reach
        let s = r.segments[1].settling.unwrap();
        assert!((s - 0.05 * (10.0f64 / 2.2).ln()).abs() < 2e-3, "{s}");
    }

    #[test]
    fn short_segment_rejected() {
        let ts = fixture(0.25, &[(1.0, 110.0), (1.2, 90.0)]);
        assert!(matches!(metrics(&ts, &scenario()), Err(MetricsError::InsufficientWindow { .. })));
    }

    #[test]
    fn settling_examples() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let y = [5.0, 3.0, 1.5, 1.01, 0.99, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(settling_time(&t, &y, 0.0, 10.0, 1.0, 0.02), Some(3.0));
        assert_eq!(settling_time(&t, &y, 4.0, 10.0, 1.0, 0.02), Some(0.0));
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        assert_eq!(settling_time(&t, &y, 0.0, 10.0, 1.0, 0.02), None);
        assert_eq!(settling_time(&t, &y, 0.0, 9.0, 1.0, 0.02), Some(0.0));
    }

    #[test]
    fn slope_of_line() {
        assert_eq!(ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]), Some(2.0));
        assert_eq!(ls_slope(&[1.0], &[1.0]), None);
        assert_eq!(ls_slope(&[1.0, 1.0], &[1.0, 2.0]), None);
    }
}
