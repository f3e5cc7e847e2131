//! Heat equation on a single road with inhomogeneous Robin data.
//!
//! Crank–Nicolson in time, second-order finite differences in space. The
//! Robin rows come from eliminating a ghost node: from
//! `-d (v_1 - v_{-1}) / (2 dx) + alpha v_0 = g` one gets
//! `v_{-1} = v_1 + (2 dx / d) (g - alpha v_0)`, which is substituted into the
//! three-point stencil at `i = 0` (mirrored at `i = m`). The resulting rows
//! keep the trapezoid mass balance exact:
//! `d/dt int v = g + h - alpha (v_0 + v_m)`.

mod tridiagonal;
mod volterra;

pub use tridiagonal::TridiagonalOperator;
pub use volterra::{
    integral_representation_oracle, BoundaryTraces, IntegralRepresentation,
    DEFAULT_TIME_NODES, MIN_COLLOCATION_DIAGONAL,
};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{EdgeGrid, Parameters};

/// Default number of intervals per road.
pub const DEFAULT_EDGE_RESOLUTION: usize = 32;

/// Theta-scheme operators for one `(m, dt, d, alpha)` combination
/// (Crank–Nicolson unless built by [`assemble_theta_operator`]).
#[derive(Debug, Clone)]
pub struct StepOperators {
    m: usize,
    dt: f64,
    theta: f64,
    /// `I - theta dt L`.
    pub implicit: TridiagonalOperator,
    /// `I + (1 - theta) dt L`.
    pub explicit: TridiagonalOperator,
    /// Weight of the (time-averaged) Robin datum in the first and last rows:
    /// `dt * 2 / dx`.
    pub load_weight: f64,
    factor: tridiagonal::ThomasFactor,
}

/// Builds the implicit and explicit Crank–Nicolson operators on `m`
/// intervals.
pub fn assemble_step_operator(m: usize, dt: f64, p: &Parameters) -> Result<StepOperators> {
    assemble_theta_operator(m, dt, 0.5, p)
}

/// Theta-weighted operators; `theta = 1` is implicit Euler, which damps
/// the stiff road modes excited by incompatible data.
pub fn assemble_theta_operator(
    m: usize,
    dt: f64,
    theta: f64,
    p: &Parameters,
) -> Result<StepOperators> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig(format!(
            "theta = {theta} must lie in [0.5, 1]"
        )));
    }
    p.validate()?;
    p.require_normalized()?;
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "edge resolution m = {m} must be at least 2"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("time step dt = {dt} must be positive")));
    }
    let n = m + 1;
    let dx = 1.0 / m as f64;
    let r = p.d / (dx * dx);
    let robin = 2.0 * p.alpha / dx;

    // L as (lower, diagonal, upper)
    let mut lower = vec![r; n];
    let mut diagonal = vec![-2.0 * r; n];
    let mut upper = vec![r; n];
    lower[0] = 0.0;
    upper[0] = 2.0 * r;
    diagonal[0] = -2.0 * r - robin;
    lower[m] = 2.0 * r;
    upper[m] = 0.0;
    diagonal[m] = -2.0 * r - robin;

    let (wi, we) = (theta * dt, (1.0 - theta) * dt);
    let implicit = TridiagonalOperator {
        lower: lower.iter().map(|l| -wi * l).collect(),
        diagonal: diagonal.iter().map(|c| 1.0 - wi * c).collect(),
        upper: upper.iter().map(|u| -wi * u).collect(),
    };
    let explicit = TridiagonalOperator {
        lower: lower.iter().map(|l| we * l).collect(),
        diagonal: diagonal.iter().map(|c| 1.0 + we * c).collect(),
        upper: upper.iter().map(|u| we * u).collect(),
    };
    if let Some(row) = implicit.first_non_dominant_row() {
        return Err(Error::NotDiagonallyDominant { row });
    }
    let factor = implicit.factor()?;
    Ok(StepOperators {
        m,
        dt,
        theta,
        implicit,
        explicit,
        load_weight: dt * 2.0 / dx,
        factor,
    })
}

impl StepOperators {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Affine load contributed by time-averaged Robin data.
    pub fn load_vector(&self, g_left: f64, g_right: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.m + 1];
        b[0] = self.load_weight * g_left;
        b[self.m] = self.load_weight * g_right;
        b
    }

    /// One step with the Robin data already averaged over the step.
    pub fn step(&self, edge: &EdgeGrid, g_left: f64, g_right: f64) -> Result<EdgeGrid> {
        if edge.m() != self.m {
            return Err(Error::DimensionMismatch {
                what: "edge resolution vs operators",
                expected: self.m,
                found: edge.m(),
            });
        }
        if !(g_left.is_finite() && g_right.is_finite()) {
            return Err(Error::NonFinite("Robin data"));
        }
        let mut values = edge.values().to_vec();
        let mut scratch = vec![0.0; self.m + 1];
        self.step_in_place(&mut values, &mut scratch, g_left, g_right);
        EdgeGrid::new(values)
    }

    /// Allocation-free step; `scratch` must have length `m + 1`.
    pub(crate) fn step_in_place(
        &self,
        values: &mut [f64],
        scratch: &mut [f64],
        g_left: f64,
        g_right: f64,
    ) {
        self.explicit.apply_into(values, scratch);
        scratch[0] += self.load_weight * g_left;
        scratch[self.m] += self.load_weight * g_right;
        self.factor.solve_into(scratch, values);
    }
}

/// Data for one road step. Robin data `beta * rho` are given at the start
/// and at the end of the step and averaged.
#[derive(Debug, Clone)]
pub struct RobinStepInput {
    pub edge: EdgeGrid,
    /// `(start, end)` values at `x = 0`.
    pub g_left: (f64, f64),
    /// `(start, end)` values at `x = 1`.
    pub g_right: (f64, f64),
    pub dt: f64,
    pub params: Parameters,
}

impl RobinStepInput {
    fn averaged_loads(&self) -> Result<(f64, f64)> {
        let all = [self.g_left.0, self.g_left.1, self.g_right.0, self.g_right.1];
        if all.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("Robin data"));
        }
        Ok((
            0.5 * (self.g_left.0 + self.g_left.1),
            0.5 * (self.g_right.0 + self.g_right.1),
        ))
    }
}

/// Assembles operators for the input and advances the road by one step.
pub fn step_edge(input: &RobinStepInput) -> Result<EdgeGrid> {
    let ops = assemble_step_operator(input.edge.m(), input.dt, &input.params)?;
    step_edge_with(&ops, input)
}

/// Advances the road by one step with pre-assembled operators.
pub fn step_edge_with(ops: &StepOperators, input: &RobinStepInput) -> Result<EdgeGrid> {
    if (ops.dt() - input.dt).abs() > 1e-15 * input.dt {
        return Err(Error::InvalidConfig(format!(
            "operators assembled for dt = {}, input has dt = {}",
            ops.dt(),
            input.dt
        )));
    }
    let (gl, gr) = input.averaged_loads()?;
    ops.step(&input.edge, gl, gr)
}

/// `v(t, x) = exp(-d pi^2 t) cos(pi x)`: an exact heat solution with zero
/// flux at both ends, hence Robin data `g = alpha v(t, 0)`,
/// `h = alpha v(t, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedSolution {
    pub d: f64,
    pub alpha: f64,
}

impl ManufacturedSolution {
    pub fn new(p: &Parameters) -> Self {
        ManufacturedSolution {
            d: p.d,
            alpha: p.alpha,
        }
    }

    pub fn exact(&self, t: f64, x: f64) -> f64 {
        (-self.d * PI * PI * t).exp() * (PI * x).cos()
    }

    pub fn left_data(&self, t: f64) -> f64 {
        self.alpha * (-self.d * PI * PI * t).exp()
    }

    pub fn right_data(&self, t: f64) -> f64 {
        -self.alpha * (-self.d * PI * PI * t).exp()
    }
}

/// Max-norm error at `t_final` of the road solver against
/// [`ManufacturedSolution`].
pub fn manufactured_solution_error(m: usize, dt: f64, t_final: f64, p: &Parameters) -> Result<f64> {
    p.validate()?;
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidConfig(format!("final time {t_final} must be >= 0")));
    }
    let ops = assemble_step_operator(m, dt, p)?;
    let steps = (t_final / dt).round() as usize;
    if ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
        return Err(Error::InvalidConfig(format!(
            "final time {t_final} is not a multiple of dt = {dt}"
        )));
    }
    let sol = ManufacturedSolution::new(p);
    let mut values: Vec<f64> = (0..=m).map(|i| sol.exact(0.0, i as f64 / m as f64)).collect();
    let mut scratch = vec![0.0; m + 1];
    for k in 0..steps {
        let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let gl = 0.5 * (sol.left_data(t0) + sol.left_data(t1));
        let gr = 0.5 * (sol.right_data(t0) + sol.right_data(t1));
        ops.step_in_place(&mut values, &mut scratch, gl, gr);
    }
    let t = steps as f64 * dt;
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - sol.exact(t, i as f64 / m as f64)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Parameters {
        Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn input(edge: EdgeGrid, gl: (f64, f64), gr: (f64, f64), dt: f64, p: &Parameters) -> RobinStepInput {
        RobinStepInput {
            edge,
            g_left: gl,
            g_right: gr,
            dt,
            params: p.clone(),
        }
    }

    #[test]
    fn robin_consistent_constant_is_fixed() {
        let p = Parameters::new(0.7, 1.3, 2.0, 1.0).unwrap();
        let c = p.beta / p.alpha;
        let out = step_edge(&input(
            EdgeGrid::constant(32, c),
            (p.beta, p.beta),
            (p.beta, p.beta),
            1e-3,
            &p,
        ))
        .unwrap();
        for v in out.values() {
            assert!((v - c).abs() <= 8.0 * f64::EPSILON * c, "{v} vs {c}");
        }
    }

    #[test]
    fn zero_stays_zero() {
        let p = unit();
        let out = step_edge(&input(EdgeGrid::zeros(16), (0.0, 0.0), (0.0, 0.0), 0.01, &p)).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tiny_step_is_near_identity() {
        let p = unit();
        let edge = EdgeGrid::from_fn(32, |x| 0.3 + 0.2 * (3.0 * x).sin() + x * x);
        let dt = 1e-8;
        let out = step_edge(&input(edge.clone(), (0.4, 0.4), (0.9, 0.9), dt, &p)).unwrap();
        let dev = out
            .values()
            .iter()
            .zip(edge.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // |L v| is O(d / dx^2 + alpha / dx) on this profile
        assert!(dev < 1e-4, "deviation {dev}");
    }

    #[test]
    fn one_manufactured_step() {
        let p = unit();
        let sol = ManufacturedSolution::new(&p);
        let (m, dt) = (64, 1e-3);
        let edge = EdgeGrid::from_fn(m, |x| sol.exact(0.0, x));
        let out = step_edge(&input(
            edge,
            (sol.left_data(0.0), sol.left_data(dt)),
            (sol.right_data(0.0), sol.right_data(dt)),
            dt,
            &p,
        ))
        .unwrap();
        let err = (0..=m)
            .map(|i| (out.values()[i] - sol.exact(dt, out.x(i))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "one-step error {err}");
    }

    #[test]
    fn fills_toward_equilibrium_within_bounds() {
        let p = unit();
        let dt = 5e-4;
        let ops = assemble_step_operator(32, dt, &p).unwrap();
        let mut edge = EdgeGrid::zeros(32);
        let cap = p.beta / p.alpha;
        let mut prev_mean = 0.0;
        for _ in 0..20000 {
            edge = ops.step(&edge, p.beta, p.beta).unwrap();
            for v in edge.values() {
                assert!(*v >= -1e-12 && *v <= cap + 1e-12, "{v}");
            }
            let mean = edge.integral();
            assert!(mean >= prev_mean - 1e-15);
            prev_mean = mean;
        }
        assert!((prev_mean - cap).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = unit();
        assert!(step_edge(&input(EdgeGrid::zeros(8), (f64::NAN, 0.0), (0.0, 0.0), 0.1, &p)).is_err());
        assert!(step_edge(&input(EdgeGrid::zeros(8), (0.0, 0.0), (0.0, 0.0), 0.0, &p)).is_err());
        let ops = assemble_step_operator(8, 0.1, &p).unwrap();
        assert!(ops.step(&EdgeGrid::zeros(16), 0.0, 0.0).is_err());
        let long = p.clone().with_length(2.0).unwrap();
        assert!(assemble_step_operator(8, 0.1, &long).is_err());
    }

    #[test]
    fn manufactured_error_edge_cases() {
        let p = unit();
        assert_eq!(manufactured_solution_error(32, 1e-3, 0.0, &p).unwrap(), 0.0);
        let bad = Parameters {
            d: 0.0,
            ..unit()
        };
        assert!(matches!(
            manufactured_solution_error(32, 1e-3, 0.1, &bad),
            Err(Error::InvalidParameter { name: "d", .. })
        ));
        assert!(manufactured_solution_error(32, 3e-2, 0.1, &p).is_err());
    }

    #[test]
    fn load_vector_touches_only_end_rows() {
        let ops = assemble_step_operator(4, 0.5, &unit()).unwrap();
        let b = ops.load_vector(1.0, 2.0);
        assert_eq!(b, vec![4.0, 0.0, 0.0, 0.0, 8.0]);
    }
}
