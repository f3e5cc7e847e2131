//! Large-diffusion limit: each road collapses to a single compartment,
//!
//! ```text
//! V_j' = -2 alpha V_j + beta (P_j + P_{j+1})
//! P_j' = f(P_j) + alpha (V_j + V_{j-1}) - 2 beta P_j
//! ```
//!
//! with speed `c*inf = min_{mu > 0} c_+(mu)`, where `c_+` is the positive
//! root of `Psi(c, mu) = -(2 alpha + 2 beta - f'(0)) + sqrt(Delta(mu)) - 2 mu c`.

use crate::dispersion::{geometric_grid, golden_section, SCAN_POINTS};
use crate::error::{Error, Result};
use crate::front_speed::{FrontSource, OccupancySnapshot};
use crate::lattice_sim::{
    central_range, init_state, simulate, supersolution_bounds, InitialData, SimulationConfig,
};
use crate::model::{LatticeState, Parameters};

/// Search range for the minimizer `mu*`.
pub const MU_RANGE: (f64, f64) = (1e-4, 50.0);

/// Cities `P` and collapsed roads `V` on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticState {
    pub j_min: i64,
    pub j_max: i64,
    /// One entry per road `j_min..j_max`.
    pub v: Vec<f64>,
    /// One entry per city `j_min..=j_max`.
    pub p: Vec<f64>,
    pub time: f64,
}

impl AsymptoticState {
    pub fn new(j_min: i64, v: Vec<f64>, p: Vec<f64>, time: f64) -> Result<Self> {
        if p.len() < 2 || v.len() + 1 != p.len() {
            return Err(Error::DimensionMismatch {
                what: "collapsed roads",
                expected: p.len().saturating_sub(1),
                found: v.len(),
            });
        }
        if v.iter().chain(&p).any(|x| !x.is_finite()) || !time.is_finite() {
            return Err(Error::NonFinite("asymptotic state"));
        }
        let j_max = j_min + p.len() as i64 - 1;
        Ok(AsymptoticState {
            j_min,
            j_max,
            v,
            p,
            time,
        })
    }

    pub fn constant(j_min: i64, j_max: i64, v: f64, p: f64) -> Result<Self> {
        if j_max <= j_min {
            return Err(Error::InvalidInitialData(format!(
                "empty window [{j_min}, {j_max}]"
            )));
        }
        let n = (j_max - j_min + 1) as usize;
        Self::new(j_min, vec![v; n - 1], vec![p; n], 0.0)
    }

    /// Matched data: `V_j = int_0^1 h_j`, `P_j = Lambda_j`.
    pub fn from_lattice(s: &LatticeState) -> Self {
        AsymptoticState {
            j_min: s.j_min,
            j_max: s.j_max,
            v: s.edges.iter().map(|e| e.integral()).collect(),
            p: s.rho.clone(),
            time: s.time,
        }
    }

    pub fn sup(&self) -> f64 {
        self.v.iter().chain(&self.p).fold(0.0_f64, |a, x| a.max(x.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.v.iter().chain(&self.p).copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mass(&self) -> f64 {
        self.v.iter().sum::<f64>() + self.p.iter().sum::<f64>()
    }

    pub fn translated(&self, shift: i64) -> Self {
        AsymptoticState {
            j_min: self.j_min + shift,
            j_max: self.j_max + shift,
            ..self.clone()
        }
    }
}

impl OccupancySnapshot for AsymptoticState {
    fn first_city(&self) -> i64 {
        self.j_min
    }

    fn cities(&self) -> &[f64] {
        &self.p
    }

    fn road_range(&self, k: usize) -> (f64, f64) {
        (self.v[k], self.v[k])
    }
}

fn derivative(par: &Parameters, v: &[f64], p: &[f64], dv: &mut [f64], dp: &mut [f64]) {
    let (a, b) = (par.alpha, par.beta);
    for k in 0..v.len() {
        dv[k] = -2.0 * a * v[k] + b * (p[k] + p[k + 1]);
    }
    let n = p.len();
    for i in 0..n {
        let mut inflow = 0.0;
        if i + 1 < n {
            inflow += v[i];
        }
        if i > 0 {
            inflow += v[i - 1];
        }
        dp[i] = par.reaction.eval(p[i]) + a * inflow - 2.0 * b * p[i];
    }
}

/// Classical RK4 with scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct AsymptoticStepper {
    params: Parameters,
    dt: f64,
    limit: f64,
    kv: [Vec<f64>; 4],
    kp: [Vec<f64>; 4],
    tv: Vec<f64>,
    tp: Vec<f64>,
}

impl AsymptoticStepper {
    /// `reference` fixes the blow-up limit `10 max(beta / alpha, 1, |reference|)`.
    pub fn new(dt: f64, p: &Parameters, reference: &AsymptoticState) -> Result<Self> {
        p.validate()?;
        let cap = p.max_explicit_dt();
        if !(dt.is_finite() && dt > 0.0 && dt <= cap * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "dt = {dt} must lie in (0, {cap}]"
            )));
        }
        let limit = 10.0 * p.road_equilibrium().max(1.0).max(reference.sup());
        Ok(AsymptoticStepper {
            params: p.clone(),
            dt,
            limit,
            kv: Default::default(),
            kp: Default::default(),
            tv: Vec::new(),
            tp: Vec::new(),
        })
    }

    pub fn step(&mut self, s: &mut AsymptoticState) -> Result<()> {
        let (nv, np) = (s.v.len(), s.p.len());
        for k in 0..4 {
            self.kv[k].resize(nv, 0.0);
            self.kp[k].resize(np, 0.0);
        }
        self.tv.resize(nv, 0.0);
        self.tp.resize(np, 0.0);
        let dt = self.dt;
        let weights = [0.5 * dt, 0.5 * dt, dt];
        derivative(&self.params, &s.v, &s.p, &mut self.kv[0], &mut self.kp[0]);
        for stage in 1..4 {
            let w = weights[stage - 1];
            for k in 0..nv {
                self.tv[k] = s.v[k] + w * self.kv[stage - 1][k];
            }
            for i in 0..np {
                self.tp[i] = s.p[i] + w * self.kp[stage - 1][i];
            }
            let (kv, kp) = (&mut self.kv[stage], &mut self.kp[stage]);
            derivative(&self.params, &self.tv, &self.tp, kv, kp);
        }
        let sixth = dt / 6.0;
        for k in 0..nv {
            s.v[k] += sixth
                * (self.kv[0][k] + 2.0 * self.kv[1][k] + 2.0 * self.kv[2][k] + self.kv[3][k]);
        }
        for i in 0..np {
            s.p[i] += sixth
                * (self.kp[0][i] + 2.0 * self.kp[1][i] + 2.0 * self.kp[2][i] + self.kp[3][i]);
        }
        s.time += dt;
        let sup = s.sup();
        if !sup.is_finite() || sup > self.limit {
            return Err(Error::BlowUp {
                time: s.time,
                value: sup,
                limit: self.limit,
            });
        }
        Ok(())
    }
}

/// One RK4 step of the collapsed system with empty exterior.
pub fn step_asymptotic(s: &AsymptoticState, dt: f64, p: &Parameters) -> Result<AsymptoticState> {
    let mut next = s.clone();
    AsymptoticStepper::new(dt, p, s)?.step(&mut next)?;
    Ok(next)
}

/// `Psi`, `Delta` and `c_+` at one `(mu, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticDispersion {
    pub psi: f64,
    pub delta_inf: f64,
    /// `None` for `mu <= 0`.
    pub c_plus: Option<f64>,
}

fn damping(p: &Parameters) -> f64 {
    2.0 * p.alpha + 2.0 * p.beta - p.fprime0()
}

/// `Delta(mu) = (2 alpha - 2 beta + f'(0))^2 + 8 alpha beta (1 + cosh mu)`.
pub fn delta_inf(mu: f64, p: &Parameters) -> f64 {
    let shift = 2.0 * p.alpha - 2.0 * p.beta + p.fprime0();
    shift * shift + 8.0 * p.alpha * p.beta * (1.0 + mu.cosh())
}

/// `N(mu) = -(2 alpha + 2 beta - f'(0)) + sqrt(Delta(mu))`, so that
/// `Psi(c, mu) = N(mu) - 2 mu c`.
fn numerator(mu: f64, p: &Parameters) -> f64 {
    -damping(p) + delta_inf(mu, p).sqrt()
}

/// `N'(mu) = 4 alpha beta sinh mu / sqrt(Delta(mu))`.
fn numerator_slope(mu: f64, p: &Parameters) -> f64 {
    4.0 * p.alpha * p.beta * mu.sinh() / delta_inf(mu, p).sqrt()
}

pub fn asymptotic_dispersion_eval(mu: f64, c: f64, p: &Parameters) -> AsymptoticDispersion {
    let n = numerator(mu, p);
    AsymptoticDispersion {
        psi: n - 2.0 * mu * c,
        delta_inf: delta_inf(mu, p),
        c_plus: (mu > 0.0).then(|| n / (2.0 * mu)),
    }
}

/// `d Psi / d mu` at `(c, mu)`.
pub fn psi_mu_derivative(mu: f64, c: f64, p: &Parameters) -> f64 {
    numerator_slope(mu, p) - 2.0 * c
}

/// The minimal speed of the collapsed system and its tangency residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSpeed {
    pub mu_star: f64,
    pub c_star_inf: f64,
    /// `|Psi(c*inf, mu*)|`.
    pub psi_residual: f64,
    /// `|d Psi / d mu (c*inf, mu*)|`.
    pub dpsi_residual: f64,
    /// `c_+` at both ends of the search range.
    pub endpoint_speeds: (f64, f64),
}

/// Minimizes `c_+` over `mu > 0`: geometric grid, golden-section search,
/// then bisection on the tangency condition `mu N'(mu) = N(mu)`.
pub fn compute_c_star_inf(p: &Parameters) -> Result<AsymptoticSpeed> {
    p.validate()?;
    let fp = p.fprime0();
    if !(fp > 0.0) {
        return Err(Error::InvalidParameter {
            name: "fprime0",
            value: fp,
            reason: "the spreading speed needs f'(0) > 0",
        });
    }
    let c_plus = |mu: f64| numerator(mu, p) / (2.0 * mu);
    let grid = geometric_grid(MU_RANGE.0, MU_RANGE.1, SCAN_POINTS);
    let values: Vec<f64> = grid.iter().map(|m| c_plus(*m)).collect();
    let i = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if i == 0 || i == grid.len() - 1 {
        return Err(Error::EndpointMinimum { at: grid[i] });
    }
    let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
    let mut mu = golden_section(c_plus, lo, hi, 1e-12);
    // c_+' has the sign of h(mu) = mu N' - N
    let h = |m: f64| m * numerator_slope(m, p) - numerator(m, p);
    if h(lo) < 0.0 && h(hi) > 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mu = 0.5 * (lo + hi);
    }
    let c = c_plus(mu);
    Ok(AsymptoticSpeed {
        mu_star: mu,
        c_star_inf: c,
        psi_residual: asymptotic_dispersion_eval(mu, c, p).psi.abs(),
        dpsi_residual: psi_mu_derivative(mu, c, p).abs(),
        endpoint_speeds: (values[0], values[values.len() - 1]),
    })
}

/// Snapshots of one run of the collapsed system.
#[derive(Debug, Clone)]
pub struct AsymptoticTrajectory {
    pub snapshots: Vec<AsymptoticState>,
    pub config: SimulationConfig,
    pub params: Parameters,
    pub contaminated_at: Option<f64>,
}

impl AsymptoticTrajectory {
    pub fn final_state(&self) -> &AsymptoticState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn is_contaminated(&self) -> bool {
        self.contaminated_at.is_some()
    }
}

impl FrontSource for AsymptoticTrajectory {
    fn city_snapshots(&self) -> Vec<(f64, i64, &[f64])> {
        self.snapshots
            .iter()
            .map(|s| (s.time, s.j_min, s.p.as_slice()))
            .collect()
    }
}

fn check_bounds(s: &AsymptoticState, bounds: (f64, f64)) -> Result<()> {
    let tol = 1e-9 * bounds.0.max(bounds.1);
    let checks = [("collapsed road", &s.v, bounds.1), ("city density", &s.p, bounds.0)];
    for (what, xs, upper) in checks {
        if let Some(&value) = xs.iter().find(|x| **x < -tol || **x > upper + tol) {
            return Err(Error::BoundViolation {
                time: s.time,
                what,
                value,
                lower: -tol,
                upper: upper + tol,
            });
        }
    }
    Ok(())
}

/// Runs the collapsed system from a prepared state.
pub fn simulate_asymptotic_from(
    initial: AsymptoticState,
    cfg: &SimulationConfig,
    p: &Parameters,
) -> Result<AsymptoticTrajectory> {
    cfg.validate()?;
    let mut stepper = AsymptoticStepper::new(cfg.dt, p, &initial)?;
    let sup = |xs: &[f64]| xs.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let bounds = supersolution_bounds(sup(&initial.p), sup(&initial.v), p);
    check_bounds(&initial, bounds)?;
    let contaminated = |s: &AsymptoticState| {
        let top = s.p.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let n = s.p.len();
        top > 0.0 && s.p[0].abs().max(s.p[n - 1].abs()) > crate::lattice_sim::CONTAMINATION_LEVEL * top
    };
    let (steps, stride) = (cfg.steps(), cfg.stride());
    let mut contaminated_at = contaminated(&initial).then_some(initial.time);
    let mut snapshots = vec![initial.clone()];
    let mut state = initial;
    for k in 1..=steps {
        stepper.step(&mut state)?;
        if k % stride == 0 || k == steps {
            check_bounds(&state, bounds)?;
            if contaminated_at.is_none() && contaminated(&state) {
                contaminated_at = Some(state.time);
            }
            snapshots.push(state.clone());
        }
    }
    Ok(AsymptoticTrajectory {
        snapshots,
        config: cfg.clone(),
        params: p.clone(),
        contaminated_at,
    })
}

/// Runs the collapsed system from data matched to the full system
/// (`V_j = int h_j`, `P_j = Lambda_j`).
pub fn simulate_asymptotic(
    data: &InitialData,
    cfg: &SimulationConfig,
    p: &Parameters,
) -> Result<AsymptoticTrajectory> {
    let (state, _) = init_state(data, cfg, p)?;
    simulate_asymptotic_from(AsymptoticState::from_lattice(&state), cfg, p)
}

/// One row of the large-diffusion experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub error: f64,
}

/// For each `epsilon = 1/d`, runs the full system and the collapsed system
/// from matched data and records the largest gap over snapshot times
/// `t >= 1` on the central quarter of the window. `cfg.t_final` is the
/// horizon; the same `dt` and stride serve both systems.
pub fn large_d_convergence_experiment(
    eps_list: &[f64],
    data: &InitialData,
    cfg: &SimulationConfig,
    p: &Parameters,
) -> Result<Vec<ConvergenceRow>> {
    let limit = simulate_asymptotic(data, cfg, p)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: eps,
                reason: "must be positive",
            });
        }
        let mut pe = p.clone();
        pe.d = 1.0 / eps;
        let full = simulate(data, cfg, &pe)?;
        let mut error = 0.0_f64;
        for (s, a) in full.snapshots.iter().zip(&limit.snapshots) {
            if s.time < 1.0 - 1e-12 {
                continue;
            }
            let (lo, hi) = central_range(s.j_min, s.j_max);
            for j in lo..=hi {
                let i = (j - s.j_min) as usize;
                error = error.max((s.rho[i] - a.p[i]).abs());
                if j < hi {
                    error = s.edges[i]
                        .values()
                        .iter()
                        .fold(error, |e, v| e.max((v - a.v[i]).abs()));
                }
            }
        }
        rows.push(ConvergenceRow { epsilon: eps, error });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Parameters {
        Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn psi_at_zero() {
        let p = unit();
        let d = asymptotic_dispersion_eval(0.0, 5.0, &p);
        assert!((d.delta_inf - 17.0).abs() < 1e-14);
        assert!((d.psi - (17f64.sqrt() - 3.0)).abs() < 1e-14);
        assert!(d.c_plus.is_none());
        for mu in [0.3, 1.7, 6.0] {
            assert_eq!(delta_inf(mu, &p), delta_inf(-mu, &p));
        }
    }

    #[test]
    fn c_star_inf_reference() {
        let sp = compute_c_star_inf(&unit()).unwrap();
        assert!((sp.mu_star - 1.420_486_501_250_481).abs() < 1e-10);
        assert!((sp.c_star_inf - 0.756_797_340_819_153).abs() < 1e-13);
        assert!(sp.psi_residual <= 1e-10);
        assert!(sp.dpsi_residual <= 1e-8);
        assert!(sp.endpoint_speeds.0 > 10.0 * sp.c_star_inf);
        assert!(sp.endpoint_speeds.1 > 10.0 * sp.c_star_inf);
    }

    #[test]
    fn c_plus_is_positive_root() {
        let p = Parameters::new(0.6, 1.7, 1.0, 2.2).unwrap();
        for mu in [0.05, 0.9, 3.0, 11.0] {
            let c = asymptotic_dispersion_eval(mu, 0.0, &p).c_plus.unwrap();
            let x = mu * c;
            let fp = p.fprime0();
            let (a, b) = (p.alpha, p.beta);
            let quad = x * x + (2.0 * b - fp + 2.0 * a) * x + 2.0 * a * (2.0 * b - fp)
                - 2.0 * a * b * (1.0 + mu.cosh());
            let scale = x * x + 2.0 * a * b * (1.0 + mu.cosh());
            assert!(quad.abs() <= 1e-10 * scale, "mu = {mu}: {quad}");
            assert!(x > 0.0);
        }
    }

    #[test]
    fn fixed_point_per_step() {
        let p = unit();
        let s = AsymptoticState::constant(-10, 10, 1.0, 1.0).unwrap();
        let next = step_asymptotic(&s, 0.01, &p).unwrap();
        for i in 5..16 {
            assert!((next.p[i] - 1.0).abs() <= 1e-13);
            assert!((next.v[i] - 1.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn rejects_large_dt() {
        let p = unit();
        let s = AsymptoticState::constant(0, 4, 0.0, 0.0).unwrap();
        assert!(step_asymptotic(&s, 0.06, &p).is_err());
    }

    #[test]
    fn reaction_free_mass_is_conserved_away_from_edges() {
        let p = Parameters::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let mut s = AsymptoticState::constant(-40, 40, 0.0, 0.0).unwrap();
        s.p[40] = 1.0;
        let m0 = s.mass();
        let mut st = AsymptoticStepper::new(0.01, &p, &s).unwrap();
        for _ in 0..500 {
            st.step(&mut s).unwrap();
        }
        assert!((s.mass() - m0).abs() < 1e-12);
    }
}
