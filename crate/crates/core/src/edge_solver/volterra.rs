//! Boundary-integral representation of the Robin heat problem on `[0, 1]`,
//! used as an independent check of the finite-difference road solver.
//!
//! With `K(t, x) = exp(-x^2 / 4dt) / sqrt(4 pi d t)`,
//!
//! ```text
//! u(t,x) = int_0^1 K(t, x-y) v0(y) dy
//!        + int_0^t [K(t-s, x-1) h(s) + K(t-s, x) g(s)] ds
//!        + int_0^t [-alpha K(t-s, x-1) + d K_x(t-s, x-1)] u(s, 1) ds
//!        - int_0^t [ alpha K(t-s, x)   + d K_x(t-s, x)  ] u(s, 0) ds
//! ```
//!
//! The traces `u(s, 0)`, `u(s, 1)` are unknown. Letting `x` tend to an end
//! point, the double-layer term jumps by half the trace, which gives a
//! second-kind Volterra system
//!
//! ```text
//! u(t,0) / 2 = I0(t,0) + S[g] + T[K(., 1) h] - alpha S[u0] + T[E u1]
//! u(t,1) / 2 = I0(t,1) + S[h] + T[K(., 1) g] - alpha S[u1] + T[E u0]
//! ```
//!
//! with `E(tau) = K(tau, 1) (1 / (2 tau) - alpha)`, `S` the weakly singular
//! `K(tau, 0)` integral and `T` a smooth one. `S` is integrated exactly
//! against the piecewise-linear interpolant of its argument (product
//! integration), `T` by the trapezoid rule. Forward substitution in time
//! then yields the traces node by node.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{EdgeGrid, Parameters};

/// Default number of time intervals on `[0, t]`.
pub const DEFAULT_TIME_NODES: usize = 512;

/// Below this value the collocation diagonal is reported as ill-conditioned.
pub const MIN_COLLOCATION_DIAGONAL: f64 = 1e-8;

fn heat_kernel(d: f64, tau: f64, z: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    (-z * z / (4.0 * d * tau)).exp() / (4.0 * PI * d * tau).sqrt()
}

/// `d * dK/dx (tau, z) = -z / (2 tau) K(tau, z)`.
fn heat_kernel_flux(d: f64, tau: f64, z: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    -z / (2.0 * tau) * heat_kernel(d, tau, z)
}

/// `int_0^1 K(t, x - y) v0(y) dy` with `v0` piecewise linear on its grid,
/// integrated exactly panel by panel.
fn initial_term(v0: &EdgeGrid, d: f64, t: f64, x: f64) -> f64 {
    let sigma = (4.0 * d * t).sqrt();
    let moment_scale = (d * t / PI).sqrt();
    let v = v0.values();
    let h = v0.dx();
    let mut acc = 0.0;
    for i in 0..v0.m() {
        let (ya, yb) = (i as f64 * h, (i + 1) as f64 * h);
        let slope = (v[i + 1] - v[i]) / h;
        // v0(y) = a + slope * (y - x) on this panel
        let a = v[i] + slope * (x - ya);
        let (za, zb) = ((ya - x) / sigma, (yb - x) / sigma);
        let zeroth = 0.5 * (libm::erf(zb) - libm::erf(za));
        let first = -moment_scale * ((-zb * zb).exp() - (-za * za).exp());
        acc += a * zeroth + slope * first;
    }
    acc
}

/// Product-integration weights for `int_0^{t_n} (t_n - s)^{-1/2} phi(s) ds`
/// with `phi` piecewise linear on a uniform grid of step `dt`.
///
/// `near[q]` and `far[q]` are the contributions of panel `q` (covering
/// `t_n - s in [q dt, (q + 1) dt]`) to its node closer to and farther from
/// `s = t_n`.
struct SingularWeights {
    near: Vec<f64>,
    far: Vec<f64>,
}

impl SingularWeights {
    fn new(panels: usize, dt: f64) -> Self {
        let sq = dt.sqrt();
        let mut near = Vec::with_capacity(panels);
        let mut far = Vec::with_capacity(panels);
        for q in 0..panels {
            let (a, b) = (q as f64, (q + 1) as f64);
            let m0 = 2.0 * (b.sqrt() - a.sqrt());
            let m1 = 2.0 / 3.0 * (b * b.sqrt() - a * a.sqrt());
            near.push(sq * (b * m0 - m1));
            far.push(sq * (m1 - a * m0));
        }
        SingularWeights { near, far }
    }

    /// Weight of node `k` in the integral up to node `n`.
    fn weight(&self, n: usize, k: usize) -> f64 {
        let mut w = 0.0;
        if k >= 1 {
            w += self.near[n - k];
        }
        if k < n {
            w += self.far[n - k - 1];
        }
        w
    }
}

/// Boundary traces `u(t_k, 0)`, `u(t_k, 1)` on the uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraces {
    pub times: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Solved representation of one Robin heat problem up to its final time.
#[derive(Debug, Clone)]
pub struct IntegralRepresentation {
    initial: EdgeGrid,
    left_data: Vec<f64>,
    right_data: Vec<f64>,
    horizon: f64,
    d: f64,
    alpha: f64,
    traces: BoundaryTraces,
}

impl IntegralRepresentation {
    /// `left_data[k] = g(t_k)`, `right_data[k] = h(t_k)` with
    /// `t_k = k * horizon / (len - 1)`.
    pub fn solve(
        initial: &EdgeGrid,
        left_data: &[f64],
        right_data: &[f64],
        horizon: f64,
        p: &Parameters,
    ) -> Result<Self> {
        p.validate()?;
        p.require_normalized()?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "representation time {horizon} must be positive"
            )));
        }
        if left_data.len() < 2 || left_data.len() != right_data.len() {
            return Err(Error::DimensionMismatch {
                what: "boundary data samples",
                expected: left_data.len().max(2),
                found: right_data.len(),
            });
        }
        if left_data.iter().chain(right_data).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary data samples"));
        }
        let (d, alpha) = (p.d, p.alpha);
        let n_int = left_data.len() - 1;
        let dt = horizon / n_int as f64;
        let times: Vec<f64> = (0..=n_int).map(|k| k as f64 * dt).collect();

        let weights = SingularWeights::new(n_int, dt);
        let singular_scale = 1.0 / (4.0 * PI * d).sqrt();
        // smooth kernels on the lag grid tau_j = j dt
        let cross: Vec<f64> = (0..=n_int).map(|j| heat_kernel(d, j as f64 * dt, 1.0)).collect();
        let layer: Vec<f64> = (0..=n_int)
            .map(|j| {
                let tau = j as f64 * dt;
                if j == 0 {
                    0.0
                } else {
                    cross[j] * (0.5 / tau - alpha)
                }
            })
            .collect();
        let trap = |k: usize, n: usize| if k == 0 || k == n { 0.5 * dt } else { dt };

        let diagonal = 0.5 + alpha * singular_scale * weights.weight(1, 1);
        if diagonal < MIN_COLLOCATION_DIAGONAL {
            return Err(Error::IllConditioned {
                diagonal,
                threshold: MIN_COLLOCATION_DIAGONAL,
            });
        }

        let mut left = vec![0.0; n_int + 1];
        let mut right = vec![0.0; n_int + 1];
        left[0] = initial.left();
        right[0] = initial.right();
        for n in 1..=n_int {
            let t = times[n];
            let mut rhs_l = initial_term(initial, d, t, 0.0);
            let mut rhs_r = initial_term(initial, d, t, 1.0);
            for k in 0..=n {
                let ws = singular_scale * weights.weight(n, k);
                let wt = trap(k, n);
                let lag = n - k;
                rhs_l += ws * left_data[k] + wt * cross[lag] * right_data[k];
                rhs_r += ws * right_data[k] + wt * cross[lag] * left_data[k];
                if k < n {
                    rhs_l += -alpha * ws * left[k] + wt * layer[lag] * right[k];
                    rhs_r += -alpha * ws * right[k] + wt * layer[lag] * left[k];
                }
            }
            // the smooth kernels vanish at zero lag, so the unknowns decouple
            left[n] = rhs_l / diagonal;
            right[n] = rhs_r / diagonal;
        }

        Ok(IntegralRepresentation {
            initial: initial.clone(),
            left_data: left_data.to_vec(),
            right_data: right_data.to_vec(),
            horizon,
            d,
            alpha,
            traces: BoundaryTraces { times, left, right },
        })
    }

    /// Samples `g`, `h` on `nodes + 1` equispaced times and solves.
    pub fn from_functions(
        initial: &EdgeGrid,
        g: impl Fn(f64) -> f64,
        h: impl Fn(f64) -> f64,
        horizon: f64,
        nodes: usize,
        p: &Parameters,
    ) -> Result<Self> {
        let nodes = nodes.max(1);
        let ts = (0..=nodes).map(|k| k as f64 * horizon / nodes as f64);
        let gs: Vec<f64> = ts.clone().map(&g).collect();
        let hs: Vec<f64> = ts.map(&h).collect();
        Self::solve(initial, &gs, &hs, horizon, p)
    }

    pub fn traces(&self) -> &BoundaryTraces {
        &self.traces
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `u(horizon, x)`. End points return the collocated traces; interior
    /// points evaluate the representation with trapezoid time quadrature, so
    /// accuracy degrades for `x` within a few `sqrt(d dt)` of an end.
    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.traces.times.len() - 1;
        if x <= 0.0 {
            return self.traces.left[n];
        }
        if x >= 1.0 {
            return self.traces.right[n];
        }
        let (d, alpha) = (self.d, self.alpha);
        let t = self.horizon;
        let dt = t / n as f64;
        let mut acc = initial_term(&self.initial, d, t, x);
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 * dt } else { dt };
            let tau = t - self.traces.times[k];
            let k_right = heat_kernel(d, tau, x - 1.0);
            let k_left = heat_kernel(d, tau, x);
            acc += w
                * (k_right * self.right_data[k]
                    + k_left * self.left_data[k]
                    + (-alpha * k_right + heat_kernel_flux(d, tau, x - 1.0)) * self.traces.right[k]
                    - (alpha * k_left + heat_kernel_flux(d, tau, x)) * self.traces.left[k]);
        }
        acc
    }
}

/// Evaluates the representation formula at `(t, x)` from the initial profile
/// and boundary-data samples on a uniform grid of `[0, t]`.
pub fn integral_representation_oracle(
    initial: &EdgeGrid,
    left_data: &[f64],
    right_data: &[f64],
    t: f64,
    x: f64,
    p: &Parameters,
) -> Result<f64> {
    Ok(IntegralRepresentation::solve(initial, left_data, right_data, t, p)?.evaluate(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge_solver::ManufacturedSolution;

    #[test]
    fn singular_weights_integrate_linears_exactly() {
        let (n, dt) = (7, 0.03);
        let w = SingularWeights::new(n, dt);
        let t = n as f64 * dt;
        let s0: f64 = (0..=n).map(|k| w.weight(n, k)).sum();
        assert!((s0 - 2.0 * t.sqrt()).abs() < 1e-13);
        // int_0^t (t - s)^{-1/2} s ds = (4/3) t^{3/2}
        let s1: f64 = (0..=n).map(|k| w.weight(n, k) * k as f64 * dt).sum();
        assert!((s1 - 4.0 / 3.0 * t.powf(1.5)).abs() < 1e-13);
    }

    #[test]
    fn initial_term_reproduces_constant_far_from_ends() {
        let v0 = EdgeGrid::constant(64, 2.0);
        let val = initial_term(&v0, 1.0, 1e-4, 0.5);
        assert!((val - 2.0).abs() < 1e-12);
        // half the mass near an end
        let edge = initial_term(&v0, 1.0, 1e-6, 0.0);
        assert!((edge - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let z = vec![0.0; 33];
        let v = integral_representation_oracle(&EdgeGrid::zeros(16), &z, &z, 0.05, 0.3, &p).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn manufactured_midpoint() {
        let p = Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let sol = ManufacturedSolution::new(&p);
        let v0 = EdgeGrid::from_fn(1024, |x| sol.exact(0.0, x));
        let rep = IntegralRepresentation::from_functions(
            &v0,
            |t| sol.left_data(t),
            |t| sol.right_data(t),
            0.05,
            DEFAULT_TIME_NODES,
            &p,
        )
        .unwrap();
        assert!(rep.evaluate(0.5).abs() < 1e-4, "{}", rep.evaluate(0.5));
        for x in [0.0, 0.25, 1.0] {
            let e = (rep.evaluate(x) - sol.exact(0.05, x)).abs();
            assert!(e < 1e-4, "x = {x}: error {e}");
        }
    }

    #[test]
    fn agrees_with_finite_differences() {
        use crate::edge_solver::{step_edge_with, assemble_step_operator, RobinStepInput};
        let p = Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap();
        // compatible with g = 0.2, h = 0.8 at both ends
        let profile = |x: f64| 0.3 + 0.2 * x + 0.1 * (2.0 * PI * x).cos();
        let (g, h) = (0.2, 0.8);
        let (m, dt, t) = (128, 1e-4, 0.1);
        let mut edge = EdgeGrid::from_fn(m, profile);
        let ops = assemble_step_operator(m, dt, &p).unwrap();
        for _ in 0..1000 {
            let input = RobinStepInput {
                edge: edge.clone(),
                g_left: (g, g),
                g_right: (h, h),
                dt,
                params: p.clone(),
            };
            edge = step_edge_with(&ops, &input).unwrap();
        }
        let rep = IntegralRepresentation::from_functions(
            &EdgeGrid::from_fn(1024, profile),
            |_| g,
            |_| h,
            t,
            DEFAULT_TIME_NODES,
            &p,
        )
        .unwrap();
        for x in [0.0, 0.25, 0.5, 1.0] {
            let fd = edge.interpolate(x);
            let e = (rep.evaluate(x) - fd).abs();
            assert!(e < 1e-3, "x = {x}: fd {fd}, representation {}", rep.evaluate(x));
        }
    }

    #[test]
    fn rejects_bad_sampling() {
        let p = Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let v0 = EdgeGrid::zeros(8);
        assert!(IntegralRepresentation::solve(&v0, &[0.0; 5], &[0.0; 4], 0.1, &p).is_err());
        assert!(IntegralRepresentation::solve(&v0, &[0.0; 5], &[0.0; 5], 0.0, &p).is_err());
        assert!(IntegralRepresentation::solve(&v0, &[0.0, f64::NAN], &[0.0; 2], 0.1, &p).is_err());
    }
}
