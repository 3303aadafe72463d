use crate::failure::Failure;
use gridforge::microgrid::scenario::apply_overrides;
use gridforge::synthesis::{design_report, synthesize, DesignSpec};
use std::path::{Path, PathBuf};

pub fn parse_spec(text: &str, sets: &[String]) -> Result<DesignSpec, Failure> {
    let mut doc: toml::Value = toml::from_str(text).map_err(|e| Failure::Parse(e.to_string()))?;
    apply_overrides(&mut doc, sets).map_err(|e| Failure::Parse(e.to_string()))?;
    doc.try_into().map_err(|e: toml::de::Error| Failure::Parse(e.to_string()))
}

/// Writes `design_report.txt` and `controller.json` into `out`.
pub fn run(spec_path: &Path, out: &Path, sets: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| Failure::io(spec_path, e))?;
    let spec = parse_spec(&text, sets)?;
    let cs = synthesize(&spec)?;
    let mut report = design_report(&cs, &spec)?;
    if !sets.is_empty() {
        report.push_str(&format!("\noverrides         {}\n", sets.join(" ")));
    }
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let report_path = out.join("design_report.txt");
    std::fs::write(&report_path, report).map_err(|e| Failure::io(&report_path, e))?;
    let json_path = out.join("controller.json");
    let json = serde_json::to_string_pretty(&cs).map_err(|e| Failure::Parse(e.to_string()))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Failure::io(&json_path, e))?;
    log::info!("designed {:?} controller, tau = {:.4e} s", cs.family, cs.tau);
    Ok(vec![report_path, json_path])
}
