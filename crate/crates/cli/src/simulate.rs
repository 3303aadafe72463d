use crate::failure::Failure;
use gridforge::microgrid::scenario::{build_scenario, bundled, load_scenario, parse_config, Scenario};
use gridforge::microgrid::{metrics, SimError, Simulation, TimeSeries};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// A file path, or the name of a bundled scenario when no such file exists.
fn resolve(arg: &str, sets: &[String]) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(load_scenario(path, sets)?);
    }
    let text = bundled(arg).ok_or_else(|| Failure::Parse(format!("{arg}: no such file or bundled scenario")))?;
    let cfg = parse_config(text, sets)?;
    Ok(build_scenario(&cfg, Path::new("."), sets)?)
}

fn write_series(ts: &TimeSeries, path: &Path) -> Result<(), Failure> {
    let f = std::fs::File::create(path).map_err(|e| Failure::io(path, e))?;
    ts.write_csv(std::io::BufWriter::new(f)).map_err(|e| Failure::io(path, e))
}

fn run_one(arg: &str, out: &Path, sets: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let sc = resolve(arg, sets)?;
    let name = sc.name.clone();
    log::info!("{name}: {} inverter(s), {} s", sc.inverters.len(), sc.sim.duration);
    let ts = match Simulation::new(sc.clone()).and_then(Simulation::run) {
        Ok(ts) => ts,
        Err(SimError::NonFinite { t, dump }) => {
            let path = out.join(format!("{name}_abort.csv"));
            write_series(&dump, &path)?;
            return Err(Failure::Abort {
                message: format!("{name}: state became non-finite at t = {t:.6} s"),
                dump: Some(path),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let csv_path = out.join(format!("{name}.csv"));
    write_series(&ts, &csv_path)?;
    let mut written = vec![csv_path];
    match metrics(&ts, &sc) {
        Ok(rep) => {
            let txt = out.join(format!("{name}_metrics.txt"));
            std::fs::write(&txt, rep.to_text()).map_err(|e| Failure::io(&txt, e))?;
            let csv = out.join(format!("{name}_metrics.csv"));
            let f = std::fs::File::create(&csv).map_err(|e| Failure::io(&csv, e))?;
            rep.write_csv(f).map_err(|e| Failure::io(&csv, e))?;
            written.extend([txt, csv]);
        }
        Err(e) => log::warn!("{name}: no metrics: {e}"),
    }
    Ok(written)
}

/// Runs every scenario on a pool of `threads` workers. Outputs of successful
/// runs are kept even when another run fails; the first failure in argument
/// order decides the exit code.
pub fn run(args: &[String], out: &Path, sets: &[String], threads: usize) -> Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Parse(e.to_string()))?;
    let results: Vec<Result<Vec<PathBuf>, Failure>> = pool.install(|| args.par_iter().map(|a| run_one(a, out, sets)).collect());
    let mut written = Vec::new();
    let mut first = None;
    for (arg, r) in args.iter().zip(results) {
        match r {
            Ok(p) => written.extend(p),
            Err(f) => {
                if first.is_none() {
                    first = Some(f);
                } else {
                    eprintln!("error: {arg}: {f}");
                }
            }
        }
    }
    match first {
        Some(f) => {
            for p in &written {
                println!("{}", p.display());
            }
            Err(f)
        }
        None => Ok(written),
    }
}
