//! Frequency sweeps, crossover search and phase margins.

use super::tf::RationalTF;
use crate::error::{NumericsError, NumericsResult};
use serde::Serialize;

pub const SWEEP_LO: f64 = 1e-2;
pub const SWEEP_HI: f64 = 1e7;
pub const POINTS_PER_DECADE: usize = 400;

/// Log-spaced grid on `[lo, hi]` with `per_decade` points per decade (endpoints included).
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).ceil() as usize;
    let (a, b) = (lo.log10(), hi.log10());
    (0..=n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64))
        .collect()
}

pub fn default_grid() -> Vec<f64> {
    log_grid(SWEEP_LO, SWEEP_HI, POINTS_PER_DECADE)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseMargin {
    /// Degrees, wrapped to (-180, 180].
    pub margin_deg: f64,
    /// Unity-gain crossover in rad/s.
    pub crossover: f64,
}

/// Phase margin of `loop_tf` with no transport delay.
pub fn phase_margin(loop_tf: &RationalTF) -> NumericsResult<PhaseMargin> {
    phase_margin_with_delay(loop_tf, 0.0)
}

/// Phase margin of `loop_tf * exp(-s t0)`.
///
/// All unity crossings on the default grid are refined by bisection in
/// `log w`; the worst (smallest) margin is reported.
pub fn phase_margin_with_delay(loop_tf: &RationalTF, t0: f64) -> NumericsResult<PhaseMargin> {
    let crossovers = unity_crossovers(loop_tf, &default_grid())?;
    let factored = loop_tf.factored();
    crossovers
        .into_iter()
        .map(|w| PhaseMargin {
            margin_deg: wrap_deg(180.0 + factored.phase_deg(w) - (w * t0).to_degrees()),
            crossover: w,
        })
        .min_by(|a, b| a.margin_deg.total_cmp(&b.margin_deg))
        .ok_or(NumericsError::NoCrossover {
            lo: SWEEP_LO,
            hi: SWEEP_HI,
        })
}

/// Phase of `loop_tf(jw) exp(-jw t0)` in degrees (continuous, not wrapped).
pub fn delay_phase(loop_tf: &RationalTF, t0: f64, w: f64) -> f64 {
    loop_tf.phase_deg(w) - (w * t0).to_degrees()
}

/// Frequencies where `|tf(jw)| = 1`, refined to 1e-12 relative in `w`.
pub fn unity_crossovers(tf: &RationalTF, grid: &[f64]) -> NumericsResult<Vec<f64>> {
    let log_mag = |w: f64| -> Option<f64> {
        tf.eval_jw(w).ok().map(|v| v.norm().ln()).filter(|v| v.is_finite())
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &w in grid {
        let Some(m) = log_mag(w) else {
            prev = None;
            continue;
        };
        if m == 0.0 {
            out.push(w);
        } else if let Some((wp, mp)) = prev {
            if mp != 0.0 && (mp < 0.0) != (m < 0.0) {
                out.push(bisect_log(&log_mag, wp, mp, w)?);
            }
        }
        prev = Some((w, m));
    }
    Ok(out)
}

fn bisect_log(f: &impl Fn(f64) -> Option<f64>, mut lo: f64, f_lo: f64, mut hi: f64) -> NumericsResult<f64> {
    let lo_negative = f_lo < 0.0;
    for _ in 0..200 {
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let fm = f(mid).ok_or(NumericsError::NonFinite)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_deg(x: f64) -> f64 {
    let mut y = x % 360.0;
    if y <= -180.0 {
        y += 360.0;
    } else if y > 180.0 {
        y -= 360.0;
    }
    y
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BodePoint {
    pub freq_rad_s: f64,
    pub magnitude_db: f64,
    pub phase_deg: f64,
}

/// Magnitude and continuous phase on `grid`; grid points at poles are skipped.
pub fn bode(tf: &RationalTF, grid: &[f64]) -> Vec<BodePoint> {
    let factored = tf.factored();
    grid.iter()
        .filter_map(|&w| {
            let v = tf.eval_jw(w).ok()?;
            Some(BodePoint {
                freq_rad_s: w,
                magnitude_db: 20.0 * v.norm().log10(),
                phase_deg: factored.phase_deg(w),
            })
        })
        .collect()
}
