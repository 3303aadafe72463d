use crate::failure::Failure;
use gridforge::acceptance::{ids, run as run_suite, Options};
use std::path::{Path, PathBuf};

/// Runs the suite, echoes one line per criterion to stderr and writes them
/// to `verify.txt`.
pub fn run(out: &Path, only: &[usize], perturb_gain: f64, threads: usize) -> Result<Vec<PathBuf>, Failure> {
    let known = ids();
    if let Some(bad) = only.iter().find(|id| !known.contains(id)) {
        return Err(Failure::Parse(format!("unknown criterion {bad}; known: {known:?}")));
    }
    if !(perturb_gain.is_finite() && perturb_gain > 0.0) {
        return Err(Failure::Parse(format!("--perturb-gain must be positive, got {perturb_gain}")));
    }
    let outcomes = run_suite(only, &Options { gain_scale: perturb_gain }, threads);
    let mut text = String::new();
    for o in &outcomes {
        let line = o.line();
        eprintln!("{line}");
        text.push_str(&line);
        text.push('\n');
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    text.push_str(&format!("{} of {} criteria passed\n", outcomes.len() - failed.len(), outcomes.len()));
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let path = out.join("verify.txt");
    std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
    if failed.is_empty() {
        Ok(vec![path])
    } else {
        println!("{}", path.display());
        Err(Failure::Verify(format!("criteria failed: {failed:?}")))
    }
}
