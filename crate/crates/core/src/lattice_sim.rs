//! Time integration of the coupled city-road lattice on a finite window.
//!
//! Cities outside the window are held at zero: boundary cities still lose
//! `2 beta rho` to both incident roads but only receive from the road inside
//! the window. Each step is an IMEX predictor-corrector: an explicit Euler
//! predictor for the cities, one Crank–Nicolson solve per road with Robin
//! data averaged between the old and predicted densities, and a Heun
//! corrector for the cities using the old and new road traces.

use crate::dispersion::compute_c_star;
use crate::edge_solver::{assemble_theta_operator, StepOperators, DEFAULT_EDGE_RESOLUTION};
use crate::error::{Error, Result};
use crate::model::{
    compatibility_defects, stationary_from_rho, total_mass, CompatibilityDefect, EdgeGrid,
    LatticeState, Parameters,
};

/// Snapshot count aimed for when the stride is left automatic.
pub const TARGET_SNAPSHOTS: usize = 200;

/// Relative level at the outermost cities above which a run is flagged as
/// contaminated by the truncation.
pub const CONTAMINATION_LEVEL: f64 = 1e-8;

/// Initial cities and roads.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `Lambda_j = 1` on a block `[-B, 0]`, roads empty. The block width
    /// `B = ceil(c_upper_guess * T) + margin` stands in for the half-line
    /// `j <= 0`, so that the left end of the block stays as far from the
    /// window as the right front.
    LeftBlock,
    /// `rho_j = amplitude * sin(j pi / (n + 1))` for `j = 1..n`, roads on the
    /// matching stationary profiles.
    SineBump { n: usize, amplitude: f64 },
    /// `rho_{j0} = amplitude`, everything else empty.
    PointMass { j0: i64, amplitude: f64 },
    /// Every city at `rho`, every road at `v`, over the whole window.
    Constant { v: f64, rho: f64 },
    /// Cities `j_min..j_min + rho.len()` and the roads between them; the
    /// rest of the window starts empty.
    Custom {
        j_min: i64,
        rho: Vec<f64>,
        edges: Vec<EdgeGrid>,
    },
}

/// Run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Intervals per road.
    pub m: usize,
    /// Extra cities beyond `ceil(c_upper_guess * t_final)` on each side.
    pub window_margin: usize,
    /// Steps between snapshots; 0 picks about [`TARGET_SNAPSHOTS`].
    pub snapshot_stride: usize,
    /// Upper bound on any front speed, used to size the window.
    pub c_upper_guess: f64,
    /// Leading steps taken with implicit Euler on the roads to damp stiff
    /// modes excited by incompatible data.
    pub damping_steps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t_final: 50.0,
            dt: 1e-3,
            m: DEFAULT_EDGE_RESOLUTION,
            window_margin: 8,
            snapshot_stride: 0,
            c_upper_guess: 1.0,
            damping_steps: 0,
        }
    }
}

impl SimulationConfig {
    /// Defaults with `c_upper_guess = 1.25 c*` (or 1 without growth).
    pub fn for_parameters(p: &Parameters, t_final: f64) -> Self {
        let c_upper_guess = compute_c_star(p).map(|r| 1.25 * r.c_star).unwrap_or(1.0);
        SimulationConfig {
            t_final,
            c_upper_guess,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(what));
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad(format!("T = {} must be positive", self.t_final));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if self.m < 2 {
            return bad(format!("m = {} must be at least 2", self.m));
        }
        if self.window_margin < 4 {
            return bad(format!("window margin {} must be at least 4", self.window_margin));
        }
        if !(self.c_upper_guess.is_finite() && self.c_upper_guess >= 0.0) {
            return bad(format!("c_upper_guess = {} must be >= 0", self.c_upper_guess));
        }
        let steps = self.t_final / self.dt;
        if (steps.round() - steps).abs() > 1e-6 * steps.max(1.0) {
            return bad(format!("T = {} is not a multiple of dt = {}", self.t_final, self.dt));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn stride(&self) -> usize {
        if self.snapshot_stride > 0 {
            self.snapshot_stride
        } else {
            (self.steps() / TARGET_SNAPSHOTS).max(1)
        }
    }

    /// Half-width added around the support of the data.
    pub fn reach(&self) -> i64 {
        (self.c_upper_guess * self.t_final).ceil() as i64 + self.window_margin as i64
    }

    /// Largest `dt <= cap` dividing `t_final`, with `cap` from
    /// [`monotone_dt`].
    pub fn with_monotone_dt(mut self, p: &Parameters) -> Self {
        let cap = monotone_dt(self.m, p);
        self.dt = self.t_final / (self.t_final / cap).ceil();
        self
    }
}

/// Step size below which the scheme preserves sign and order: the explicit
/// part of the road operator then has nonnegative entries and the city
/// update is monotone.
pub fn monotone_dt(m: usize, p: &Parameters) -> f64 {
    let dx = 1.0 / m as f64;
    let road = 1.0 / (p.d / (dx * dx) + p.alpha / dx);
    let city = 1.0 / (2.0 * p.beta + p.reaction.lipschitz_bound());
    0.95 * road.min(city)
}

/// Robin compatibility of initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub defects: Vec<CompatibilityDefect>,
    /// Largest defect magnitude.
    pub max_defect: f64,
    pub tolerance: f64,
}

impl CompatibilityReport {
    fn new(defects: Vec<CompatibilityDefect>, state: &LatticeState, p: &Parameters) -> Self {
        let max_defect = defects.iter().map(|d| d.magnitude()).fold(0.0, f64::max);
        let scale = p.beta * state.rho_sup().max(1e-300) + p.alpha * state.edge_sup();
        let m = state.m() as f64;
        // one-sided differences carry O(dx^2) error on smooth profiles
        let tolerance = 10.0 * scale * (p.d + 1.0) / (m * m);
        CompatibilityReport {
            defects,
            max_defect,
            tolerance,
        }
    }

    pub fn is_compatible(&self) -> bool {
        self.max_defect <= self.tolerance
    }
}

/// Builds the window and the initial state. The window covers the support
/// of the data plus [`SimulationConfig::reach`] cities on each side.
pub fn init_state(
    data: &InitialData,
    cfg: &SimulationConfig,
    p: &Parameters,
) -> Result<(LatticeState, CompatibilityReport)> {
    cfg.validate()?;
    p.validate()?;
    p.require_normalized()?;
    let reach = cfg.reach();
    let m = cfg.m;
    let state = match data {
        InitialData::LeftBlock => {
            let (lo, hi) = (-2 * reach, reach);
            let rho = (lo..=hi).map(|j| if (-reach..=0).contains(&j) { 1.0 } else { 0.0 });
            let n = (hi - lo + 1) as usize;
            LatticeState::new(lo, rho.collect(), vec![EdgeGrid::zeros(m); n - 1], 0.0)?
        }
        InitialData::SineBump { n, amplitude } => {
            if *n == 0 {
                return Err(Error::InvalidInitialData("sine bump needs n >= 1".into()));
            }
            check_amplitude(*amplitude)?;
            let support: Vec<f64> = (0..=*n as i64 + 1)
                .map(|j| amplitude * (j as f64 * std::f64::consts::PI / (*n as f64 + 1.0)).sin())
                .map(|r| r.max(0.0))
                .collect();
            let profiles = stationary_from_rho(&support, p)?;
            let edges = profiles
                .iter()
                .map(|pr| EdgeGrid::from_fn(m, |x| pr.eval(x).max(0.0)))
                .collect();
            embed(0, support, edges, reach, m)?
        }
        InitialData::PointMass { j0, amplitude } => {
            check_amplitude(*amplitude)?;
            embed(*j0, vec![*amplitude], vec![], reach, m)?
        }
        InitialData::Constant { v, rho } => {
            LatticeState::constant(-reach, reach, m, *v, *rho)?
        }
        InitialData::Custom { j_min, rho, edges } => {
            if edges.len() + 1 != rho.len() {
                return Err(Error::DimensionMismatch {
                    what: "custom roads",
                    expected: rho.len().saturating_sub(1),
                    found: edges.len(),
                });
            }
            if let Some(e) = edges.iter().find(|e| e.m() != m) {
                return Err(Error::DimensionMismatch {
                    what: "custom road resolution",
                    expected: m,
                    found: e.m(),
                });
            }
            embed(*j_min, rho.clone(), edges.clone(), reach, m)?
        }
    };
    if state.min_value() < 0.0 {
        return Err(Error::InvalidInitialData(format!(
            "negative value {} in initial data",
            state.min_value()
        )));
    }
    if state.rho_sup() == 0.0 && state.edge_sup() == 0.0 {
        return Err(Error::InvalidInitialData("initial data vanish identically".into()));
    }
    let report = CompatibilityReport::new(compatibility_defects(&state, p), &state, p);
    Ok((state, report))
}

fn check_amplitude(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInitialData(format!(
            "amplitude {a} must be positive and finite"
        )))
    }
}

/// Pads cities `j_min..` and the roads between them with `reach` empty
/// cities on both sides.
fn embed(
    j_min: i64,
    rho: Vec<f64>,
    edges: Vec<EdgeGrid>,
    reach: i64,
    m: usize,
) -> Result<LatticeState> {
    if rho.is_empty() {
        return Err(Error::InvalidInitialData("empty support".into()));
    }
    let pad = reach as usize;
    let mut all_rho = vec![0.0; pad];
    all_rho.extend_from_slice(&rho);
    all_rho.extend(std::iter::repeat_n(0.0, pad));
    let mut all_edges = vec![EdgeGrid::zeros(m); pad];
    all_edges.extend(edges);
    all_edges.extend(std::iter::repeat_n(EdgeGrid::zeros(m), pad));
    LatticeState::new(j_min - reach, all_rho, all_edges, 0.0)
}

/// Reusable scratch and operators for repeated steps at fixed `(m, dt, p)`.
#[derive(Debug, Clone)]
pub struct LatticeStepper {
    params: Parameters,
    crank_nicolson: StepOperators,
    implicit_euler: Option<StepOperators>,
    limit: f64,
    rhs_old: Vec<f64>,
    rhs_new: Vec<f64>,
    predicted: Vec<f64>,
    scratch: Vec<f64>,
}

impl LatticeStepper {
    /// `reference` fixes the blow-up limit
    /// `10 max(beta / alpha, 1, |reference|)`.
    pub fn new(m: usize, dt: f64, p: &Parameters, reference: &LatticeState) -> Result<Self> {
        let crank_nicolson = assemble_theta_operator(m, dt, 0.5, p)?;
        let scale = p
            .road_equilibrium()
            .max(1.0)
            .max(reference.rho_sup())
            .max(reference.edge_sup());
        Ok(LatticeStepper {
            params: p.clone(),
            crank_nicolson,
            implicit_euler: None,
            limit: 10.0 * scale,
            rhs_old: Vec::new(),
            rhs_new: Vec::new(),
            predicted: Vec::new(),
            scratch: vec![0.0; m + 1],
        })
    }

    pub fn dt(&self) -> f64 {
        self.crank_nicolson.dt()
    }

    pub fn blow_up_limit(&self) -> f64 {
        self.limit
    }

    /// One Crank–Nicolson step.
    pub fn step(&mut self, s: &mut LatticeState) -> Result<()> {
        self.step_with(s, false)
    }

    /// One step with implicit Euler on the roads.
    pub fn damped_step(&mut self, s: &mut LatticeState) -> Result<()> {
        if self.implicit_euler.is_none() {
            self.implicit_euler = Some(assemble_theta_operator(
                self.crank_nicolson.m(),
                self.dt(),
                1.0,
                &self.params,
            )?);
        }
        self.step_with(s, true)
    }

    fn step_with(&mut self, s: &mut LatticeState, damped: bool) -> Result<()> {
        let ops = if damped {
            self.implicit_euler.as_ref().expect("assembled above")
        } else {
            &self.crank_nicolson
        };
        if s.m() != ops.m() {
            return Err(Error::DimensionMismatch {
                what: "road resolution vs stepper",
                expected: ops.m(),
                found: s.m(),
            });
        }
        let p = &self.params;
        let dt = ops.dt();
        let n = s.rho.len();
        self.rhs_old.resize(n, 0.0);
        self.rhs_new.resize(n, 0.0);
        self.predicted.resize(n, 0.0);

        city_rhs(p, &s.rho, &s.edges, &mut self.rhs_old);
        for i in 0..n {
            self.predicted[i] = s.rho[i] + dt * self.rhs_old[i];
        }
        let half_beta = 0.5 * p.beta;
        for (k, edge) in s.edges.iter_mut().enumerate() {
            let gl = half_beta * (s.rho[k] + self.predicted[k]);
            let gr = half_beta * (s.rho[k + 1] + self.predicted[k + 1]);
            ops.step_in_place(edge.values_mut(), &mut self.scratch, gl, gr);
        }
        city_rhs(p, &self.predicted, &s.edges, &mut self.rhs_new);
        for i in 0..n {
            s.rho[i] += 0.5 * dt * (self.rhs_old[i] + self.rhs_new[i]);
        }
        s.time += dt;

        let sup = s.rho_sup().max(s.edge_sup());
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

/// `f(rho_j) + alpha (v_j(0) + v_{j-1}(1)) - 2 beta rho_j` with empty roads
/// outside the window.
fn city_rhs(p: &Parameters, rho: &[f64], edges: &[EdgeGrid], out: &mut [f64]) {
    let n = rho.len();
    for i in 0..n {
        let mut inflow = 0.0;
        if i + 1 < n {
            inflow += edges[i].left();
        }
        if i > 0 {
            inflow += edges[i - 1].right();
        }
        out[i] = p.reaction.eval(rho[i]) + p.alpha * inflow - 2.0 * p.beta * rho[i];
    }
}

/// One IMEX step of the whole window.
pub fn step_system(s: &LatticeState, dt: f64, p: &Parameters) -> Result<LatticeState> {
    let mut stepper = LatticeStepper::new(s.m(), dt, p, s)?;
    let mut next = s.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Snapshots of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<LatticeState>,
    /// Total mass at each snapshot.
    pub mass: Vec<f64>,
    pub config: SimulationConfig,
    pub params: Parameters,
    pub compatibility: CompatibilityReport,
    /// First snapshot time at which the outermost cities exceeded
    /// [`CONTAMINATION_LEVEL`] relative to the largest density.
    pub contaminated_at: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn final_state(&self) -> &LatticeState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn is_contaminated(&self) -> bool {
        self.contaminated_at.is_some()
    }

    /// Largest relative deviation of the mass from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass
            .iter()
            .map(|m| (m - m0).abs() / m0.abs())
            .fold(0.0, f64::max)
    }
}

/// Upper bounds `(rho, v)` of the solution started from `s`: the constant
/// supersolution `K (1, beta / alpha)` with
/// `K = max(1, |Lambda|, alpha |h| / beta)`. This reduces to
/// `(max(|Lambda|, 1), max(beta / alpha, |h|))` when `|Lambda| <= 1` and
/// `|h| <= beta / alpha`.
pub fn a_priori_bounds(s: &LatticeState, p: &Parameters) -> (f64, f64) {
    supersolution_bounds(s.rho_sup(), s.edge_sup(), p)
}

pub(crate) fn supersolution_bounds(rho_sup: f64, road_sup: f64, p: &Parameters) -> (f64, f64) {
    let k = rho_sup.max(1.0).max(road_sup / p.road_equilibrium());
    (k, k * p.road_equilibrium())
}

fn check_bounds(s: &LatticeState, bounds: (f64, f64)) -> Result<()> {
    let scale = bounds.0.max(bounds.1);
    let tol = 1e-9 * scale;
    let rho_bad = s.rho.iter().find(|r| **r < -tol || **r > bounds.0 + tol);
    if let Some(&value) = rho_bad {
        return Err(Error::BoundViolation {
            time: s.time,
            what: "city density",
            value,
            lower: -tol,
            upper: bounds.0 + tol,
        });
    }
    let road_bad = s
        .edges
        .iter()
        .flat_map(|e| e.values().iter())
        .find(|v| **v < -tol || **v > bounds.1 + tol);
    if let Some(&value) = road_bad {
        return Err(Error::BoundViolation {
            time: s.time,
            what: "road density",
            value,
            lower: -tol,
            upper: bounds.1 + tol,
        });
    }
    Ok(())
}

fn contaminated(s: &LatticeState) -> bool {
    let top = s.rho_sup();
    let n = s.rho.len();
    top > 0.0 && s.rho[0].abs().max(s.rho[n - 1].abs()) > CONTAMINATION_LEVEL * top
}

/// Runs from `data` to `cfg.t_final`.
pub fn simulate(data: &InitialData, cfg: &SimulationConfig, p: &Parameters) -> Result<Trajectory> {
    let (state, compatibility) = init_state(data, cfg, p)?;
    simulate_from(state, compatibility, cfg, p)
}

/// Runs from a prepared state (for example one returned by [`init_state`]).
pub fn simulate_from(
    initial: LatticeState,
    compatibility: CompatibilityReport,
    cfg: &SimulationConfig,
    p: &Parameters,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut stepper = LatticeStepper::new(initial.m(), cfg.dt, p, &initial)?;
    let bounds = a_priori_bounds(&initial, p);
    check_bounds(&initial, bounds)?;
    let steps = cfg.steps();
    let stride = cfg.stride();
    let mut contaminated_at = contaminated(&initial).then_some(initial.time);
    let mut mass = vec![total_mass(&initial)];
    let mut snapshots = vec![initial.clone()];
    let mut state = initial;
    for k in 1..=steps {
        if k <= cfg.damping_steps {
            stepper.damped_step(&mut state)?;
        } else {
            stepper.step(&mut state)?;
        }
        if k % stride == 0 || k == steps {
            check_bounds(&state, bounds)?;
            if contaminated_at.is_none() && contaminated(&state) {
                contaminated_at = Some(state.time);
            }
            mass.push(total_mass(&state));
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory {
        snapshots,
        mass,
        config: cfg.clone(),
        params: p.clone(),
        compatibility,
        contaminated_at,
    })
}

/// Cities `j` with `|j - centre| <= (j_max - j_min) / 4`.
pub fn central_range(j_min: i64, j_max: i64) -> (i64, i64) {
    let centre = (j_min + j_max) / 2;
    let radius = (j_max - j_min) / 4;
    (centre - radius, centre + radius)
}

/// Largest deviation from `(beta / alpha, 1)` over the central quarter of
/// the window at the final time.
pub fn check_long_time_convergence(traj: &Trajectory, p: &Parameters) -> f64 {
    let s = traj.final_state();
    let (lo, hi) = central_range(s.j_min, s.j_max);
    let eq = p.road_equilibrium();
    let mut dev = 0.0_f64;
    for j in lo..=hi {
        if let Some(r) = s.rho_at(j) {
            dev = dev.max((r - 1.0).abs());
        }
        if j < hi {
            if let Some(e) = s.edge_at(j) {
                dev = e.values().iter().fold(dev, |a, v| a.max((v - eq).abs()));
            }
        }
    }
    dev
}
