use crate::failure::Failure;
use gridforge::lineloop::{
    dc_performance, grid_disturbance_response, hsi_feedback_law_unchecked, line_tf, peak_near, sensitivity_pair, sv_sweep, tracking_deviation, LineModel,
    TRACKING_LIMIT,
};
use gridforge::numerics::freq::{bode, default_grid};
use gridforge::numerics::{singular_values, RationalTF};
use gridforge::synthesis::{resonance_params, ControllerSet, Family};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::io(path, e))?;
    w.write_record(header).map_err(|e| Failure::io(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(|e| Failure::io(path, e))?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

/// Bode data per compensator, the S/T singular-value sweep and a text summary.
pub fn run(controller: &Path, r: f64, x: f64, v2: f64, omega0: f64, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let text = std::fs::read_to_string(controller).map_err(|e| Failure::io(controller, e))?;
    let cs: ControllerSet = serde_json::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", controller.display())))?;
    if !(r >= 0.0 && x > 0.0 && v2 > 0.0 && omega0 > 0.0) || ![r, x, v2, omega0].iter().all(|v| v.is_finite()) {
        return Err(Failure::Parse("line needs r >= 0, x > 0, v2 > 0 and omega0 > 0".into()));
    }
    let line = LineModel::from_reactance(r, x, omega0);
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let grid = default_grid();
    let mut written = Vec::new();

    let mut tfs: Vec<(&str, RationalTF)> = vec![
        ("Kc", cs.kc.clone()),
        ("Kv_d", cs.kv_d_eff()),
        ("Kv_q", cs.kv_q_eff()),
        ("Keta_d", cs.keta_d_eff()),
        ("Keta_q", cs.keta_q_eff()),
        ("H", cs.h_pll.clone()),
    ];
    if let Some(n) = &cs.notch {
        tfs.push(("Hn", n.clone()));
    }
    for (name, tf) in &tfs {
        let path = out.join(format!("bode_{name}.csv"));
        let pts = bode(tf, &grid);
        write_csv(
            &path,
            &["freq_rad_s", "magnitude_db", "phase_deg"],
            pts.iter().map(|p| vec![p.freq_rad_s, p.magnitude_db, p.phase_deg]),
        )?;
        written.push(path);
    }

    let (w_dev, dev) = tracking_deviation(&cs, line.wn())?;
    if dev >= TRACKING_LIMIT {
        log::warn!(
            "voltage loops track only to |T - 1| = {dev:.3} at {w_dev:.1} rad/s; the line-loop model is approximate"
        );
    }
    let law = hsi_feedback_law_unchecked(&cs)?;
    let pair = sensitivity_pair(&line_tf(&line), &law)?;
    let rows = sv_sweep(&pair, &grid)?;
    let sv_path = out.join("sv.csv");
    write_csv(
        &sv_path,
        &["freq_rad_s", "smax", "smin", "tmax", "tmin"],
        rows.iter().map(|r| vec![r.freq_rad_s, r.smax, r.smin, r.tmax, r.tmin]),
    )?;
    written.push(sv_path);

    let at_dc = |m: &gridforge::numerics::TFMatrix2| m.eval_jw(0.0).map_err(|e| Failure::Singular(e.to_string()));
    let (smax, smin) = singular_values(&at_dc(&pair.s)?);
    let (tmax, tmin) = singular_values(&at_dc(&pair.t)?);
    let dc = dc_performance(cs.gamma_d, &line);
    let phasor = line.phasor(v2);
    let (wi, xi) = resonance_params(&cs, &phasor);
    let (w_pk, g_pk) = peak_near(&cs.ki_inverse(), wi.max(1e-3), 3.0)?;
    let gdr = grid_disturbance_response(&cs, &line)?;
    let (w_gd, g_gd) = peak_near(&gdr, wi.max(1e-3), 3.0)?;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "# loop analysis");
    let _ = writeln!(w, "line              r {r} ohm, x {x} ohm, omega0 {omega0} rad/s, v2 {v2} V");
    let _ = writeln!(w, "line_resonance    w_n {:.4} rad/s, xi {:.4}", line.wn(), line.xi());
    let _ = writeln!(w, "tracking          max |T - 1| {dev:.4e} at {w_dev:.4} rad/s (limit {TRACKING_LIMIT})");
    let _ = writeln!(w);
    let _ = writeln!(w, "## dc performance");
    if cs.family != Family::General {
        let _ = writeln!(w, "closed form assumes the general family; {:?} differs at dc", cs.family);
    }
    let _ = writeln!(w, "{:<8} {:>16} {:>16}", "", "measured", "closed form");
    for (name, m, c) in [("smax", smax, dc.smax), ("smin", smin, dc.smin), ("tmax", tmax, dc.tmax), ("tmin", tmin, dc.tmin)] {
        let _ = writeln!(w, "{name:<8} {m:>16.10} {c:>16.10}");
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "## resonance");
    let _ = writeln!(w, "predicted         w_i {wi:.4} rad/s, xi_i {xi:.5}");
    let _ = writeln!(w, "Ki_inverse_peak   {g_pk:.6e} at {w_pk:.4} rad/s");
    let _ = writeln!(w, "disturbance_peak  {g_gd:.6e} at {w_gd:.4} rad/s");
    let _ = writeln!(w, "notch             {}", if cs.notch.is_some() { "present" } else { "absent" });
    let path = out.join("analysis.txt");
    std::fs::write(&path, s).map_err(|e| Failure::io(&path, e))?;
    written.push(path);
    Ok(written)
}
