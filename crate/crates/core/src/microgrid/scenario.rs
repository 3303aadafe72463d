//! Scenario files: schema, `key=value` overrides, validation and resolution.

use crate::droop::LinePhasor;
use crate::error::ScenarioError;
use crate::lineloop::LineModel;
use crate::plant::{DQPair, InverterParams};
use crate::synthesis::{synthesize, ControllerSet, DesignSpec, Family};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;
pub const NOMINAL_OMEGA: f64 = 2.0 * PI * 60.0;

/// Scenario file as written by the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    /// Nominal voltage amplitude (V).
    pub v0: f64,
    #[serde(default)]
    pub base: Option<BaseConfig>,
    #[serde(default)]
    pub setpoints: SetpointMode,
    pub sim: SimConfig,
    #[serde(default)]
    pub design: Option<DesignConfig>,
    pub inverter: Vec<InverterConfig>,
    pub load: LoadConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
}

fn default_omega0() -> f64 {
    NOMINAL_OMEGA
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub v_base: f64,
    pub i_base: f64,
}

/// How unspecified inverter setpoints are filled in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetpointMode {
    /// `i0^d = share * I_load`, `i0^q = 0`, `v0` nominal.
    #[default]
    Share,
    /// Exact steady operating point of the nominal load through each line.
    OperatingPoint,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Nominal capacitor voltage, zero currents.
    #[default]
    Flat,
    /// Start on the nominal operating point.
    Steady,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_control_dt")]
    pub control_dt: f64,
    pub duration: f64,
    /// Record every n-th control tick.
    #[serde(default = "default_decimate")]
    pub decimate: usize,
    #[serde(default)]
    pub init: InitMode,
    /// Reserved; recorded in output metadata only.
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    5e-6
}
fn default_control_dt() -> f64 {
    5e-5
}
fn default_decimate() -> usize {
    20
}

/// Line given by reactance at `omega0` or by inductance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub r: f64,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub l: Option<f64>,
}

impl LineConfig {
    fn resolve(&self, omega0: f64, path: &str) -> Result<LineModel, ScenarioError> {
        let l = match (self.x, self.l) {
            (Some(x), None) => x / omega0,
            (None, Some(l)) => l,
            _ => return Err(ScenarioError::validation(path, "give exactly one of `x` or `l`")),
        };
        if !(l > 0.0 && l.is_finite()) || !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(ScenarioError::validation(path, "line needs r >= 0 and a positive inductance"));
        }
        Ok(LineModel::new(self.r, l, omega0))
    }
}

/// Shared synthesis inputs; per-inverter fields override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub wc: f64,
    pub pm_deg: f64,
    pub family: Family,
    #[serde(default = "default_beta_lag")]
    pub beta_lag: f64,
    pub gamma_d: f64,
    #[serde(default)]
    pub gamma_q: Option<f64>,
    /// Aggregate frequency droop (Hz per unit current); sets each
    /// inverter's `gamma_q` from its share.
    #[serde(default)]
    pub freq_droop_hz_per_pu: Option<f64>,
    /// Model used for synthesis; defaults to each inverter's own values.
    #[serde(default)]
    pub inverter: Option<InverterParams>,
    #[serde(default)]
    pub line: Option<LineConfig>,
    #[serde(default)]
    pub notch_xi0: Option<f64>,
}

fn default_beta_lag() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterConfig {
    pub c: f64,
    pub l_i: f64,
    pub r_i: f64,
    pub v_dc: f64,
    pub line: LineConfig,
    #[serde(default)]
    pub share: Option<f64>,
    #[serde(default)]
    pub i0_d: Option<f64>,
    #[serde(default)]
    pub i0_q: Option<f64>,
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default)]
    pub phase0: Option<f64>,
    #[serde(default)]
    pub gamma_d: Option<f64>,
    #[serde(default)]
    pub gamma_q: Option<f64>,
    /// JSON-serialized controller used verbatim instead of synthesis.
    #[serde(default)]
    pub controller: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    /// Resistance at the PCC.
    Resistive,
    /// Constant-magnitude current in phase with the PCC voltage.
    Current,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadUnit {
    /// Multiples of the base load (`I_base` at `V_base`).
    #[default]
    Pu,
    /// Ohms for a resistive load, amperes for a current sink.
    Si,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEvent {
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub kind: LoadKind,
    #[serde(default)]
    pub unit: LoadUnit,
    pub initial: f64,
    #[serde(default)]
    pub events: Vec<LoadEvent>,
    /// Bus capacitance for a current-sink load (F).
    #[serde(default = "default_c_bus")]
    pub c_bus: f64,
}

fn default_c_bus() -> f64 {
    1e-6
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub amplitude: f64,
    #[serde(default)]
    pub frequency: Option<f64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub close: Vec<f64>,
    #[serde(default)]
    pub open: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.02
}

/// Per-unit bases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Base {
    pub v_base: f64,
    pub i_base: f64,
}

impl Base {
    pub fn s_base(&self) -> f64 {
        self.v_base * self.i_base
    }

    pub fn z_base(&self) -> f64 {
        self.v_base / self.i_base
    }
}

/// One inverter with its line and controller.
#[derive(Clone, Debug, PartialEq)]
pub struct InverterUnit {
    /// Physical parameters.
    pub params: InverterParams,
    pub line: LineModel,
    /// Parameters assumed by the control law (decoupling and modulation).
    pub model: InverterParams,
    pub controller: ControllerSet,
    pub i0: DQPair,
    pub v0: f64,
    pub phase0: f64,
    pub share: Option<f64>,
}

/// Load value (ohm or ampere) switched at `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadSchedule {
    pub kind: LoadKind,
    pub initial: f64,
    pub events: Vec<(f64, f64)>,
    pub c_bus: f64,
}

impl LoadSchedule {
    pub fn value_at(&self, t: f64) -> f64 {
        self.events
            .iter()
            .take_while(|(te, _)| *te <= t)
            .last()
            .map_or(self.initial, |(_, v)| *v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSource {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub close: Vec<f64>,
    pub open: Vec<f64>,
    pub tolerance: f64,
}

impl GridSource {
    pub fn phasor(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.frequency * t + self.phase)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub control_dt: f64,
    pub duration: f64,
    pub decimate: usize,
    pub init: InitMode,
    pub seed: u64,
    /// Plant substeps per control tick.
    pub substeps: usize,
}

/// Fully resolved scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub omega0: f64,
    pub v0: f64,
    pub base: Base,
    pub sim: SimSettings,
    pub inverters: Vec<InverterUnit>,
    pub load: LoadSchedule,
    pub grid: Option<GridSource>,
    /// SHA-256 of the canonical configuration after overrides.
    pub hash: String,
    pub overrides: Vec<String>,
}

/// Applies `key=value` overrides to a parsed document.
///
/// Keys are dotted paths; numeric segments index arrays (`inverter.0.share`).
/// Values are read as TOML literals, falling back to a bare string.
pub fn apply_overrides(doc: &mut toml::Value, sets: &[String]) -> Result<(), ScenarioError> {
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| ScenarioError::validation(set.as_str(), "override must be key=value"))?;
        let key = key.trim();
        let value = parse_literal(raw.trim());
        let mut node = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (n, part) in parts.iter().enumerate() {
            let last = n + 1 == parts.len();
            node = match node {
                toml::Value::Table(t) => {
                    if last {
                        t.insert(part.to_string(), value.clone());
                        break;
                    }
                    t.entry(part.to_string())
                        .or_insert_with(|| toml::Value::Table(Default::default()))
                }
                toml::Value::Array(a) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| ScenarioError::validation(key, format!("`{part}` is not an array index")))?;
                    let len = a.len();
                    let slot = a
                        .get_mut(idx)
                        .ok_or_else(|| ScenarioError::validation(key, format!("index {idx} out of range ({len})")))?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => return Err(ScenarioError::validation(key, "path descends into a scalar")),
            };
        }
    }
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Parses, overrides and validates a scenario file's text.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let mut doc: toml::Value = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    apply_overrides(&mut doc, overrides)?;
    let cfg: ScenarioConfig = doc.try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn positive(v: f64, path: &str) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::validation(path, format!("must be positive and finite, got {v}")))
    }
}

fn sorted(ts: &[f64], path: &str) -> Result<(), ScenarioError> {
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(ScenarioError::validation(path, "event times must be finite and non-negative"));
    }
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(ScenarioError::validation(path, "events must be sorted by time"));
    }
    Ok(())
}

pub fn validate(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    if cfg.version != SCHEMA_VERSION {
        return Err(ScenarioError::validation(
            "version",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", cfg.version),
        ));
    }
    positive(cfg.omega0, "omega0")?;
    positive(cfg.v0, "v0")?;
    positive(cfg.sim.dt, "sim.dt")?;
    positive(cfg.sim.control_dt, "sim.control_dt")?;
    positive(cfg.sim.duration, "sim.duration")?;
    let ratio = cfg.sim.control_dt / cfg.sim.dt;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(ScenarioError::validation("sim.control_dt", "must be an integer multiple of sim.dt"));
    }
    if cfg.sim.decimate == 0 {
        return Err(ScenarioError::validation("sim.decimate", "must be at least 1"));
    }
    if cfg.inverter.is_empty() {
        return Err(ScenarioError::validation("inverter", "at least one inverter is required"));
    }
    if let Some(b) = &cfg.base {
        positive(b.v_base, "base.v_base")?;
        positive(b.i_base, "base.i_base")?;
    }
    for (n, inv) in cfg.inverter.iter().enumerate() {
        let p = |f: &str| format!("inverter.{n}.{f}");
        positive(inv.c, &p("c"))?;
        positive(inv.l_i, &p("l_i"))?;
        positive(inv.r_i, &p("r_i"))?;
        positive(inv.v_dc, &p("v_dc"))?;
        if let Some(s) = inv.share {
            positive(s, &p("share"))?;
        }
        if inv.controller.is_none() && cfg.design.is_none() {
            return Err(ScenarioError::validation(p("controller"), "no controller file and no [design] section"));
        }
    }
    positive(cfg.load.initial, "load.initial")?;
    positive(cfg.load.c_bus, "load.c_bus")?;
    let times: Vec<f64> = cfg.load.events.iter().map(|e| e.t).collect();
    sorted(&times, "load.events")?;
    for (n, e) in cfg.load.events.iter().enumerate() {
        positive(e.value, &format!("load.events.{n}.value"))?;
    }
    if let Some(g) = &cfg.grid {
        positive(g.amplitude, "grid.amplitude")?;
        positive(g.tolerance, "grid.tolerance")?;
        sorted(&g.close, "grid.close")?;
        sorted(&g.open, "grid.open")?;
    }
    if let Some(d) = &cfg.design {
        positive(d.wc, "design.wc")?;
        if d.gamma_q.is_none() && d.freq_droop_hz_per_pu.is_none() && cfg.inverter.iter().any(|i| i.gamma_q.is_none()) {
            return Err(ScenarioError::validation(
                "design.gamma_q",
                "set gamma_q or freq_droop_hz_per_pu (or gamma_q per inverter)",
            ));
        }
    }
    Ok(())
}

/// SHA-256 of the canonical JSON form.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Resolves a validated configuration; `dir` anchors relative controller paths.
pub fn build_scenario(cfg: &ScenarioConfig, dir: &Path, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    validate(cfg)?;
    let omega0 = cfg.omega0;
    let base = cfg.base.map_or(
        Base {
            v_base: cfg.v0,
            i_base: 100.0,
        },
        |b| Base {
            v_base: b.v_base,
            i_base: b.i_base,
        },
    );
    let load = LoadSchedule {
        kind: cfg.load.kind,
        initial: load_value(cfg, cfg.load.initial, &base),
        events: cfg.load.events.iter().map(|e| (e.t, load_value(cfg, e.value, &base))).collect(),
        c_bus: cfg.load.c_bus,
    };
    // nominal load current, used for share-based setpoints
    let i_load = match load.kind {
        LoadKind::Resistive => cfg.v0 / load.initial,
        LoadKind::Current => load.initial,
    };
    let mut inverters = Vec::with_capacity(cfg.inverter.len());
    for (n, inv) in cfg.inverter.iter().enumerate() {
        let path = format!("inverter.{n}");
        let params = InverterParams {
            c: inv.c,
            l_i: inv.l_i,
            r_i: inv.r_i,
            v_dc: inv.v_dc,
        };
        let line = inv.line.resolve(omega0, &format!("{path}.line"))?;
        let model = cfg.design.as_ref().and_then(|d| d.inverter).unwrap_or(params);
        let controller = match &inv.controller {
            Some(file) => {
                let full = dir.join(file);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| ScenarioError::Io(format!("{}: {e}", full.display())))?;
                serde_json::from_str(&text).map_err(|e| ScenarioError::validation(format!("{path}.controller"), e.to_string()))?
            }
            None => {
                let d = cfg.design.as_ref().expect("validated");
                let dline = match &d.line {
                    Some(l) => l.resolve(omega0, "design.line")?,
                    None => line,
                };
                let phasor = LinePhasor::new(dline.r, dline.x(), cfg.v0, omega0);
                let gamma_q = match (inv.gamma_q, d.freq_droop_hz_per_pu, d.gamma_q) {
                    (Some(g), _, _) => g,
                    (None, Some(slope), _) => {
                        let share = inv.share.ok_or_else(|| {
                            ScenarioError::validation(format!("{path}.share"), "frequency droop needs a share")
                        })?;
                        // v2 dw = alpha^q di^d with dw = 2 pi slope per I_base of total current
                        let alpha_q = cfg.v0 * 2.0 * PI * slope / (share * base.i_base);
                        alpha_q * phasor.zbar() / phasor.x
                    }
                    (None, None, Some(g)) => g,
                    (None, None, None) => unreachable!("validated"),
                };
                let spec = DesignSpec {
                    wc: d.wc,
                    pm_deg: d.pm_deg,
                    beta_lag: d.beta_lag,
                    family: d.family,
                    line: phasor,
                    inverter: model,
                    gamma_d: inv.gamma_d.unwrap_or(d.gamma_d),
                    gamma_q,
                    notch_xi0: d.notch_xi0,
                };
                synthesize(&spec)?
            }
        };
        let share = inv.share;
        let (mut i0, mut v0, mut phase0) = (DQPair::new(share.unwrap_or(0.0) * i_load, 0.0), cfg.v0, 0.0);
        if cfg.setpoints == SetpointMode::OperatingPoint {
            let s = share.ok_or_else(|| ScenarioError::validation(format!("{path}.share"), "operating-point setpoints need a share"))?;
            let op = operating_point(cfg.v0, s * i_load, &line);
            i0 = op.i_dq;
            v0 = op.v_c.norm();
            phase0 = op.v_c.arg();
        }
        if let Some(d) = inv.i0_d {
            i0.d = d;
        }
        if let Some(q) = inv.i0_q {
            i0.q = q;
        }
        inverters.push(InverterUnit {
            params,
            line,
            model,
            controller,
            i0,
            v0: inv.v0.unwrap_or(v0),
            phase0: inv.phase0.unwrap_or(phase0),
            share,
        });
    }
    let grid = cfg.grid.as_ref().map(|g| GridSource {
        amplitude: g.amplitude,
        frequency: g.frequency.unwrap_or(omega0),
        phase: g.phase,
        close: g.close.clone(),
        open: g.open.clone(),
        tolerance: g.tolerance,
    });
    Ok(Scenario {
        name: cfg.name.clone(),
        omega0,
        v0: cfg.v0,
        base,
        sim: SimSettings {
            dt: cfg.sim.dt,
            control_dt: cfg.sim.control_dt,
            duration: cfg.sim.duration,
            decimate: cfg.sim.decimate,
            init: cfg.sim.init,
            seed: cfg.sim.seed,
            substeps: (cfg.sim.control_dt / cfg.sim.dt).round() as usize,
        },
        inverters,
        load,
        grid,
        hash: config_hash(cfg),
        overrides: overrides.to_vec(),
    })
}

fn load_value(cfg: &ScenarioConfig, v: f64, base: &Base) -> f64 {
    match (cfg.load.unit, cfg.load.kind) {
        (LoadUnit::Si, _) => v,
        (LoadUnit::Pu, LoadKind::Resistive) => base.z_base() / v,
        (LoadUnit::Pu, LoadKind::Current) => v * base.i_base,
    }
}

/// Reads, overrides, validates and resolves a scenario file.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text, overrides)?;
    build_scenario(&cfg, path.parent().unwrap_or(Path::new(".")), overrides)
}

/// Steady phasors of one inverter feeding `current` in phase with a PCC
/// voltage `v_pcc` (angle zero).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    /// Capacitor voltage phasor in the PCC frame.
    pub v_c: Complex64,
    /// Line current in the PCC frame.
    pub i_line: Complex64,
    /// Line current in the capacitor-voltage frame.
    pub i_dq: DQPair,
}

pub fn operating_point(v_pcc: f64, current: f64, line: &LineModel) -> OperatingPoint {
    let i_line = Complex64::new(current, 0.0);
    let v_c = Complex64::new(v_pcc, 0.0) + Complex64::new(line.r, line.x()) * i_line;
    let i_dq = DQPair::from_complex(i_line * Complex64::from_polar(1.0, -v_c.arg()));
    OperatingPoint { v_c, i_line, i_dq }
}

/// Bundled scenarios shipped with the library.
pub const BUNDLED: &[(&str, &str)] = &[
    ("three_inverter_sharing", include_str!("../../scenarios/three_inverter_sharing.toml")),
    ("grid_tie", include_str!("../../scenarios/grid_tie.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
version = 1
name = "single"
v0 = 170.0

[sim]
duration = 0.1

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

    #[test]
    fn minimal_single_inverter() {
        let cfg = parse_config(MINIMAL, &[]).unwrap();
        let sc = build_scenario(&cfg, Path::new("."), &[]).unwrap();
        assert_eq!(sc.inverters.len(), 1);
        assert!(sc.grid.is_none());
        assert!((sc.load.initial - 1.7).abs() < 1e-12);
        assert!((sc.inverters[0].i0.d - 100.0).abs() < 1e-9);
        assert_eq!(sc.sim.substeps, 10);
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse_config(
            MINIMAL,
            &["design.wc=1500".into(), "inverter.0.share=0.5".into(), "name=\"renamed\"".into(), "sim.init=steady".into()],
        )
        .unwrap();
        assert_eq!(cfg.design.as_ref().unwrap().wc, 1500.0);
        assert_eq!(cfg.inverter[0].share, Some(0.5));
        assert_eq!(cfg.name, "renamed");
        assert_eq!(cfg.sim.init, InitMode::Steady);
        assert_ne!(config_hash(&cfg), config_hash(&parse_config(MINIMAL, &[]).unwrap()));
    }

    #[test]
    fn validation_paths() {
        let err = parse_config(MINIMAL, &["sim.dt=-1".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { ref path, .. } if path == "sim.dt"), "{err}");
        let err = parse_config(MINIMAL, &["inverter.0.c=0".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { ref path, .. } if path == "inverter.0.c"));
        let err = parse_config(MINIMAL, &["inverter.3.c=1".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { .. }));
        let err = parse_config(MINIMAL, &["load.bogus=1".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
        let err = parse_config(MINIMAL, &["sim.control_dt=7e-6".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { ref path, .. } if path == "sim.control_dt"));
    }

    #[test]
    fn unsorted_events_rejected() {
        let text = format!("{MINIMAL}events = [{{ t = 2.0, value = 1.2 }}, {{ t = 1.0, value = 1.0 }}]\n");
        let err = parse_config(&text, &[]).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { ref path, .. } if path == "load.events"));
    }

    #[test]
    fn infeasible_design_propagates() {
        let cfg = parse_config(MINIMAL, &["design.pm_deg=95".into()]).unwrap();
        assert!(matches!(build_scenario(&cfg, Path::new("."), &[]), Err(ScenarioError::Synthesis(_))));
    }

    #[test]
    fn operating_point_is_consistent() {
        let line = LineModel::from_reactance(0.1, 0.8, NOMINAL_OMEGA);
        let op = operating_point(170.0, 50.0, &line);
        assert!((op.i_dq.norm() - 50.0).abs() < 1e-12);
        assert!(op.i_dq.q < 0.0);
        let back = op.v_c - Complex64::new(line.r, line.x()) * op.i_line;
        assert!((back - Complex64::new(170.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn bundled_scenarios_resolve() {
        for (name, text) in BUNDLED {
            let cfg = parse_config(text, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            let sc = build_scenario(&cfg, Path::new("."), &[]).unwrap();
            assert_eq!(sc.inverters.len(), 3);
            let shares: Vec<f64> = sc.inverters.iter().map(|i| i.share.unwrap()).collect();
            assert_eq!(shares, vec![0.2, 0.3, 0.5]);
            assert!((sc.base.i_base - 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn load_schedule_lookup() {
        let s = LoadSchedule {
            kind: LoadKind::Resistive,
            initial: 2.0,
            events: vec![(1.0, 3.0), (2.0, 4.0)],
            c_bus: 1e-6,
        };
        assert_eq!(s.value_at(0.5), 2.0);
        assert_eq!(s.value_at(1.0), 3.0);
        assert_eq!(s.value_at(9.0), 4.0);
    }
}
