//! Front tracking and speed fits.

use crate::error::{Error, Result};
use crate::lattice_sim::Trajectory;
use crate::model::{LatticeState, Parameters};

/// Fit residual (in lattice units) above which a front is called
/// non-ballistic.
pub const BALLISTIC_RESIDUAL: f64 = 0.5;

/// Minimum number of snapshots inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Interpolated position of the rightmost downward crossing of `threshold`,
/// counted from the first entry: the largest `j` with
/// `rho_j >= threshold > rho_{j+1}`, refined linearly.
pub fn level_position(rho: &[f64], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "front threshold {threshold} must lie in (0, 1)"
        )));
    }
    (0..rho.len().saturating_sub(1))
        .rev()
        .find(|&j| rho[j] >= threshold && threshold > rho[j + 1])
        .map(|j| j as f64 + (rho[j] - threshold) / (rho[j] - rho[j + 1]))
        .ok_or(Error::NoCrossing("no downward threshold crossing in the window"))
}

/// Anything that yields city-density snapshots.
pub trait FrontSource {
    /// `(time, j_min, rho)` per snapshot, in time order.
    fn city_snapshots(&self) -> Vec<(f64, i64, &[f64])>;
}

impl FrontSource for Trajectory {
    fn city_snapshots(&self) -> Vec<(f64, i64, &[f64])> {
        self.snapshots
            .iter()
            .map(|s| (s.time, s.j_min, s.rho.as_slice()))
            .collect()
    }
}

/// Front positions over a fit window and the fitted line.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub threshold: f64,
    pub fitted_speed: f64,
    pub intercept: f64,
    /// Largest absolute deviation from the fitted line.
    pub fit_residual: f64,
    pub fit_window: (f64, f64),
}

impl FrontTrace {
    pub fn is_ballistic(&self) -> bool {
        self.fit_residual <= BALLISTIC_RESIDUAL
    }
}

/// Ordinary least-squares line `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "fit abscissae vs ordinates",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let spread = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if sxx <= n * (1e-14 * spread).powi(2) {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fits the front over snapshots with `t_lo <= t <= t_hi`.
pub fn estimate_speed_between(
    src: &impl FrontSource,
    threshold: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<FrontTrace> {
    let snaps = src.city_snapshots();
    let eps = 1e-9 * t_hi.abs().max(1.0);
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for (t, j_min, rho) in snaps {
        if t >= t_lo - eps && t <= t_hi + eps {
            times.push(t);
            positions.push(j_min as f64 + level_position(rho, threshold)?);
        }
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: times.len(),
        });
    }
    let (slope, intercept) = linear_fit(&times, &positions)?;
    let fit_residual = times
        .iter()
        .zip(&positions)
        .map(|(t, x)| (x - slope * t - intercept).abs())
        .fold(0.0, f64::max);
    Ok(FrontTrace {
        times,
        positions,
        threshold,
        fitted_speed: slope,
        intercept,
        fit_residual,
        fit_window: (t_lo, t_hi),
    })
}

/// Fits the front over `[lo T, hi T]` with `T` the last snapshot time.
pub fn estimate_speed(
    src: &impl FrontSource,
    threshold: f64,
    window_fraction: (f64, f64),
) -> Result<FrontTrace> {
    let (lo, hi) = window_fraction;
    if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "fit window ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
        )));
    }
    let t_end = src
        .city_snapshots()
        .last()
        .map(|s| s.0)
        .ok_or(Error::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: 0,
        })?;
    estimate_speed_between(src, threshold, lo * t_end, hi * t_end)
}

/// `ln c = a1 ln f'(0) + a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub a1: f64,
    pub a0: f64,
    /// Largest `|exp(a0) f'^a1 - c| / c`.
    pub max_rel_residual: f64,
}

/// Least-squares power law of speeds against growth rates.
pub fn loglog_fit(fprime0_values: &[f64], speeds: &[f64]) -> Result<PowerLawFit> {
    if fprime0_values
        .iter()
        .chain(speeds)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::InvalidConfig(
            "power-law fit needs positive finite data".into(),
        ));
    }
    let x: Vec<f64> = fprime0_values.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = speeds.iter().map(|v| v.ln()).collect();
    if x.len() >= 2 && x.iter().all(|v| *v == x[0]) {
        return Err(Error::DegenerateFit);
    }
    if x.len() < 4 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            found: x.len(),
        });
    }
    let (a1, a0) = linear_fit(&x, &y)?;
    let max_rel_residual = fprime0_values
        .iter()
        .zip(speeds)
        .map(|(f, c)| ((a0 + a1 * f.ln()).exp() - c).abs() / c)
        .fold(0.0, f64::max);
    Ok(PowerLawFit {
        a1,
        a0,
        max_rel_residual,
    })
}

/// City densities and per-road value ranges of one snapshot, as needed by
/// [`spreading_dichotomy`].
pub trait OccupancySnapshot {
    fn first_city(&self) -> i64;
    fn cities(&self) -> &[f64];
    /// `(min, max)` over road `k` (local index, joining cities `k`, `k+1`).
    fn road_range(&self, k: usize) -> (f64, f64);
}

impl OccupancySnapshot for LatticeState {
    fn first_city(&self) -> i64 {
        self.j_min
    }

    fn cities(&self) -> &[f64] {
        &self.rho
    }

    fn road_range(&self, k: usize) -> (f64, f64) {
        self.edges[k]
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            })
    }
}

/// Occupancy far ahead of and well behind the fronts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dichotomy {
    /// Largest city or road value at distance `>= outer_factor c t` from
    /// the initial support.
    pub outer_sup: f64,
    /// Largest deviation from `(beta / alpha, 1)` at distance
    /// `<= inner_factor c t`.
    pub inner_deviation: f64,
    /// Whether each region contained at least one city.
    pub outer_nonempty: bool,
    pub inner_nonempty: bool,
}

/// Evaluates both halves of the spreading dichotomy at time `t`, with
/// distances measured from the initial support `[support.0, support.1]`.
/// Roads count toward a region when both their ends do.
pub fn spreading_dichotomy(
    snap: &impl OccupancySnapshot,
    support: (i64, i64),
    c: f64,
    t: f64,
    factors: (f64, f64),
    p: &Parameters,
) -> Dichotomy {
    let dist = |j: i64| {
        if j < support.0 {
            (support.0 - j) as f64
        } else if j > support.1 {
            (j - support.1) as f64
        } else {
            0.0
        }
    };
    let (inner_r, outer_r) = (factors.0 * c * t, factors.1 * c * t);
    let rho = snap.cities();
    let j0 = snap.first_city();
    let eq = p.road_equilibrium();
    let mut out = Dichotomy {
        outer_sup: 0.0,
        inner_deviation: 0.0,
        outer_nonempty: false,
        inner_nonempty: false,
    };
    for (i, r) in rho.iter().enumerate() {
        let j = j0 + i as i64;
        let here = dist(j);
        let next = (i + 1 < rho.len()).then(|| dist(j + 1));
        if here >= outer_r {
            out.outer_nonempty = true;
            out.outer_sup = out.outer_sup.max(r.abs());
            if next.is_some_and(|n| n >= outer_r) {
                let (lo, hi) = snap.road_range(i);
                out.outer_sup = out.outer_sup.max(hi.abs()).max(lo.abs());
            }
        }
        if here <= inner_r {
            out.inner_nonempty = true;
            out.inner_deviation = out.inner_deviation.max((r - 1.0).abs());
            if next.is_some_and(|n| n <= inner_r) {
                let (lo, hi) = snap.road_range(i);
                out.inner_deviation = out
                    .inner_deviation
                    .max((lo - eq).abs())
                    .max((hi - eq).abs());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_position_examples() {
        assert_eq!(level_position(&[1.0, 1.0, 0.0, 0.0], 0.5).unwrap(), 1.5);
        let rho = [1.0, 0.9, 0.8, 0.6, 0.2, 0.0];
        assert!((level_position(&rho, 0.5).unwrap() - 3.25).abs() < 1e-15);
        assert!(matches!(
            level_position(&[0.0; 5], 0.5),
            Err(Error::NoCrossing(_))
        ));
    }

    #[test]
    fn rightmost_crossing_wins() {
        let rho = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(level_position(&rho, 0.5).unwrap(), 2.5);
    }

    #[test]
    fn power_law_exact() {
        let f = [0.25, 0.5, 1.0, 2.0, 4.0];
        let c: Vec<f64> = f.iter().map(|v: &f64| v.sqrt()).collect();
        let fit = loglog_fit(&f, &c).unwrap();
        assert!((fit.a1 - 0.5).abs() < 1e-14);
        assert!(fit.a0.abs() < 1e-14);
        assert!(fit.max_rel_residual < 1e-14);
    }

    #[test]
    fn power_law_rejections() {
        assert!(matches!(loglog_fit(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateFit)));
        assert!(loglog_fit(&[1.0, 2.0, 3.0, -1.0], &[1.0; 4]).is_err());
        assert!(matches!(
            loglog_fit(&[1.0, 2.0, 3.0], &[1.0; 3]),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    struct Synthetic(Vec<(f64, Vec<f64>)>);

    impl FrontSource for Synthetic {
        fn city_snapshots(&self) -> Vec<(f64, i64, &[f64])> {
            self.0.iter().map(|(t, r)| (*t, -5, r.as_slice())).collect()
        }
    }

    fn ramp(pos: f64) -> Vec<f64> {
        // decreasing ramp through 0.5 at local coordinate `pos`
        (0..80).map(|j| (0.5 - 0.1 * (j as f64 - pos)).clamp(0.0, 1.0)).collect()
    }

    #[test]
    fn ballistic_synthetic_front() {
        let c = 0.37;
        let snaps = (0..=40).map(|k| {
            let t = k as f64;
            (t, ramp(12.0 + c * t))
        });
        let trace = estimate_speed(&Synthetic(snaps.collect()), 0.5, (0.5, 1.0)).unwrap();
        assert!((trace.fitted_speed - c).abs() < 1e-12);
        assert!((trace.intercept - (12.0 - 5.0)).abs() < 1e-10);
        assert!(trace.is_ballistic());
        assert_eq!(trace.times.len(), 21);
    }

    #[test]
    fn stationary_front_has_zero_speed() {
        let snaps = (0..=20).map(|k| (k as f64, ramp(10.0)));
        let trace = estimate_speed(&Synthetic(snaps.collect()), 0.5, (0.0, 1.0)).unwrap();
        assert!(trace.fitted_speed.abs() < 1e-14);
    }

    #[test]
    fn too_few_snapshots() {
        let snaps = (0..=5).map(|k| (k as f64, ramp(10.0)));
        assert!(matches!(
            estimate_speed(&Synthetic(snaps.collect()), 0.5, (0.5, 1.0)),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
