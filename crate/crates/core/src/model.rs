//! Core domain types of the city-road model.
//!
//! A city (vertex) `j` carries a density `rho_j`; the road (edge) joining
//! cities `j` and `j + 1` carries a density profile `v_j(x)`, `x in [0, 1]`.
//! Roads diffuse with coefficient `d`, cities grow with a KPP reaction `f`,
//! and the two exchange mass through Robin conditions at each city:
//!
//! ```text
//!   -d v_j'(0) + alpha v_j(0) = beta rho_j
//!    d v_j'(1) + alpha v_j(1) = beta rho_{j+1}
//!   rho_j' = f(rho_j) + alpha (v_j(0) + v_{j-1}(1)) - 2 beta rho_j
//! ```

use crate::error::{Error, Result};

/// Number of equispaced samples used by the KPP admissibility check.
pub const ADMISSIBILITY_SAMPLES: usize = 1024;

/// The city reaction term `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `f(u) = rate * u * (1 - u)`. A zero rate gives the reaction-free
    /// system used for conservation checks; it is not KPP-admissible.
    Logistic { rate: f64 },
    /// Piecewise-cubic interpolant of tabulated values on `[0, 1]`.
    Tabulated(TabulatedReaction),
}

impl Nonlinearity {
    pub fn logistic(rate: f64) -> Self {
        Nonlinearity::Logistic { rate }
    }

    /// Reaction-free kinetics, `f = 0`.
    pub fn none() -> Self {
        Nonlinearity::Logistic { rate: 0.0 }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Logistic { rate } => rate * u * (1.0 - u),
            Nonlinearity::Tabulated(t) => t.eval(u),
        }
    }

    /// `f'(0)`, the linear growth rate at low density.
    pub fn fprime0(&self) -> f64 {
        match self {
            Nonlinearity::Logistic { rate } => *rate,
            Nonlinearity::Tabulated(t) => t.slope_at_zero(),
        }
    }

    /// Largest `|f'|` on `[0, 1]`, estimated on the admissibility grid.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Nonlinearity::Logistic { rate } => rate.abs(),
            Nonlinearity::Tabulated(t) => t.max_abs_slope(),
        }
    }

    /// Sampled KPP check: `f(0) = f(1) = 0`, `0 < f(u) <= f'(0) u` on `(0, 1)`
    /// and `f(u) < 0` outside `[0, 1]`.
    pub fn check_admissible(&self) -> Result<()> {
        let fp = self.fprime0();
        if !(fp.is_finite() && fp > 0.0) {
            return Err(Error::InadmissibleNonlinearity(format!(
                "f'(0) = {fp} must be positive"
            )));
        }
        let f0 = self.eval(0.0);
        let f1 = self.eval(1.0);
        if f0.abs() > 1e-14 || f1.abs() > 1e-14 {
            return Err(Error::InadmissibleNonlinearity(format!(
                "f(0) = {f0}, f(1) = {f1}; both must vanish"
            )));
        }
        let n = ADMISSIBILITY_SAMPLES;
        for k in 1..n {
            let u = k as f64 / n as f64;
            let fu = self.eval(u);
            if !(fu > 0.0) {
                return Err(Error::InadmissibleNonlinearity(format!(
                    "f({u}) = {fu} is not positive"
                )));
            }
            if fu > fp * u * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::InadmissibleNonlinearity(format!(
                    "f({u}) = {fu} exceeds f'(0) u = {}",
                    fp * u
                )));
            }
            // mirrored samples on (-1, 0) and (1, 2)
            for w in [-u, 1.0 + u] {
                let fw = self.eval(w);
                if !(fw < 0.0) {
                    return Err(Error::InadmissibleNonlinearity(format!(
                        "f({w}) = {fw} is not negative outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Evaluate the reaction term at `u`.
pub fn eval_nonlinearity(nl: &Nonlinearity, u: f64) -> f64 {
    nl.eval(u)
}

/// Cubic Hermite interpolant through `(u_i, f_i)` on an equispaced grid of
/// `[0, 1]`, extended linearly (with the end slopes) outside the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedReaction {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedReaction {
    /// `values[i] = f(i / n)`, `n = values.len() - 1`. Rejects tables that
    /// fail the KPP check.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::InadmissibleNonlinearity(format!(
                "need at least 4 table entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated nonlinearity"));
        }
        let n = values.len() - 1;
        let h = 1.0 / n as f64;
        let mut slopes = vec![0.0; n + 1];
        slopes[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
        slopes[n] = (3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / (2.0 * h);
        for i in 1..n {
            slopes[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
        }
        let table = TabulatedReaction { values, slopes };
        Nonlinearity::Tabulated(table.clone()).check_admissible()?;
        Ok(table)
    }

    /// Tabulates `f` on `n + 1` equispaced nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..=n).map(|i| f(i as f64 / n as f64)).collect();
        Self::new(values)
    }

    fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.slopes[0]
    }

    fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.intervals();
        if u <= 0.0 {
            return self.values[0] + self.slopes[0] * u;
        }
        if u >= 1.0 {
            return self.values[n] + self.slopes[n] * (u - 1.0);
        }
        let h = 1.0 / n as f64;
        let i = ((u / h) as usize).min(n - 1);
        let t = (u - i as f64 * h) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

/// Model constants. Edge densities are per unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Road-to-city exchange rate.
    pub alpha: f64,
    /// City-to-road exchange rate.
    pub beta: f64,
    /// Road diffusivity.
    pub d: f64,
    /// Road length.
    pub ell: f64,
    pub reaction: Nonlinearity,
}

impl Parameters {
    /// Unit-length parameters with a logistic reaction of rate `fprime0`.
    pub fn new(alpha: f64, beta: f64, d: f64, fprime0: f64) -> Result<Self> {
        Self::with_reaction(alpha, beta, d, Nonlinearity::logistic(fprime0))
    }

    pub fn with_reaction(alpha: f64, beta: f64, d: f64, reaction: Nonlinearity) -> Result<Self> {
        let p = Parameters {
            alpha,
            beta,
            d,
            ell: 1.0,
            reaction,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same constants with a different road length.
    pub fn with_length(mut self, ell: f64) -> Result<Self> {
        self.ell = ell;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("d", self.d),
            ("ell", self.ell),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and positive",
                });
            }
        }
        if let Nonlinearity::Logistic { rate } = self.reaction {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "fprime0",
                    value: rate,
                    reason: "logistic rate must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    pub fn fprime0(&self) -> f64 {
        self.reaction.fprime0()
    }

    /// Road density of the positive steady state, `beta / alpha`.
    pub fn road_equilibrium(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn is_normalized(&self) -> bool {
        self.ell == 1.0
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.ell))
        }
    }

    /// Stiffness cap for the explicit vertex kinetics:
    /// `0.1 / max(f'(0), 2 beta, 2 alpha)`.
    pub fn max_explicit_dt(&self) -> f64 {
        0.1 / self
            .reaction
            .lipschitz_bound()
            .max(2.0 * self.beta)
            .max(2.0 * self.alpha)
    }
}

/// Unit-length parameters together with the density scale factor: edge
/// densities of the rescaled problem are `ell * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub params: Parameters,
    pub density_scale: f64,
}

/// Maps `(alpha, beta, d, ell)` to `(alpha / ell, beta, d / ell^2, 1)`.
pub fn rescale_to_unit_length(p: &Parameters) -> Rescaled {
    let ell = p.ell;
    let params = Parameters {
        alpha: p.alpha / ell,
        beta: p.beta,
        d: p.d / (ell * ell),
        ell: 1.0,
        reaction: p.reaction.clone(),
    };
    Rescaled {
        params,
        density_scale: ell,
    }
}

/// Samples of one road profile at `x_i = i / m`, `i = 0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGrid {
    values: Vec<f64>,
}

impl EdgeGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::DimensionMismatch {
                what: "edge grid (need m >= 2)",
                expected: 3,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("edge grid"));
        }
        Ok(EdgeGrid { values })
    }

    pub fn zeros(m: usize) -> Self {
        Self::constant(m, 0.0)
    }

    pub fn constant(m: usize, value: f64) -> Self {
        assert!(m >= 2, "edge resolution must be at least 2");
        EdgeGrid {
            values: vec![value; m + 1],
        }
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(m >= 2, "edge resolution must be at least 2");
        let dx = 1.0 / m as f64;
        EdgeGrid {
            values: (0..=m).map(|i| f(i as f64 * dx)).collect(),
        }
    }

    /// Number of intervals.
    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.m() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.m() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn left(&self) -> f64 {
        self.values[0]
    }

    pub fn right(&self) -> f64 {
        self.values[self.m()]
    }

    /// Trapezoid rule on the grid.
    pub fn integral(&self) -> f64 {
        let m = self.m();
        let inner: f64 = self.values[1..m].iter().sum();
        self.dx() * (inner + 0.5 * (self.values[0] + self.values[m]))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Piecewise-linear interpolation at `x in [0, 1]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let m = self.m();
        let s = (x.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let i = (s as usize).min(m - 1);
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// Snapshot of the truncated lattice: cities `j_min..=j_max` and the roads
/// between consecutive cities (road `j` joins `j` and `j + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub j_min: i64,
    pub j_max: i64,
    pub rho: Vec<f64>,
    pub edges: Vec<EdgeGrid>,
    pub time: f64,
}

impl LatticeState {
    pub fn new(j_min: i64, rho: Vec<f64>, edges: Vec<EdgeGrid>, time: f64) -> Result<Self> {
        if rho.len() < 2 {
            return Err(Error::DimensionMismatch {
                what: "lattice vertices",
                expected: 2,
                found: rho.len(),
            });
        }
        if edges.len() + 1 != rho.len() {
            return Err(Error::DimensionMismatch {
                what: "lattice edges",
                expected: rho.len() - 1,
                found: edges.len(),
            });
        }
        let m = edges[0].m();
        if let Some(bad) = edges.iter().find(|e| e.m() != m) {
            return Err(Error::DimensionMismatch {
                what: "edge resolution",
                expected: m,
                found: bad.m(),
            });
        }
        if rho.iter().any(|r| !r.is_finite()) || !time.is_finite() {
            return Err(Error::NonFinite("lattice state"));
        }
        let j_max = j_min + rho.len() as i64 - 1;
        Ok(LatticeState {
            j_min,
            j_max,
            rho,
            edges,
            time,
        })
    }

    /// Every city at `rho`, every road at `v`.
    pub fn constant(j_min: i64, j_max: i64, m: usize, v: f64, rho: f64) -> Result<Self> {
        if j_max <= j_min {
            return Err(Error::InvalidInitialData(format!(
                "empty window [{j_min}, {j_max}]"
            )));
        }
        let n = (j_max - j_min + 1) as usize;
        Self::new(
            j_min,
            vec![rho; n],
            vec![EdgeGrid::constant(m, v); n - 1],
            0.0,
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.rho.len()
    }

    /// Edge resolution `m`.
    pub fn m(&self) -> usize {
        self.edges[0].m()
    }

    /// Local index of city `j`, if it lies in the window.
    pub fn index_of(&self, j: i64) -> Option<usize> {
        (self.j_min..=self.j_max)
            .contains(&j)
            .then(|| (j - self.j_min) as usize)
    }

    pub fn rho_at(&self, j: i64) -> Option<f64> {
        self.index_of(j).map(|i| self.rho[i])
    }

    /// Road `j` (joining cities `j` and `j + 1`).
    pub fn edge_at(&self, j: i64) -> Option<&EdgeGrid> {
        self.index_of(j).and_then(|i| self.edges.get(i))
    }

    pub fn rho_sup(&self) -> f64 {
        self.rho.iter().fold(0.0_f64, |a, r| a.max(r.abs()))
    }

    pub fn edge_sup(&self) -> f64 {
        self.edges.iter().fold(0.0_f64, |a, e| a.max(e.sup_norm()))
    }

    /// Smallest entry over cities and road samples.
    pub fn min_value(&self) -> f64 {
        let r = self.rho.iter().copied().fold(f64::INFINITY, f64::min);
        self.edges
            .iter()
            .flat_map(|e| e.values().iter().copied())
            .fold(r, f64::min)
    }

    /// Same state with every index shifted by `shift`.
    pub fn translated(&self, shift: i64) -> Self {
        LatticeState {
            j_min: self.j_min + shift,
            j_max: self.j_max + shift,
            ..self.clone()
        }
    }
}

/// `sum_j rho_j + sum_j int_0^1 v_j`, edge integrals by the trapezoid rule.
pub fn total_mass(s: &LatticeState) -> f64 {
    s.rho.iter().sum::<f64>() + s.edges.iter().map(EdgeGrid::integral).sum::<f64>()
}

/// `v(x) = slope * x + intercept` on one road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearProfile {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearProfile {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn left(&self) -> f64 {
        self.intercept
    }

    pub fn right(&self) -> f64 {
        self.slope + self.intercept
    }
}

/// Road profiles of the stationary solution carried by the city densities
/// `rho`: one linear profile per consecutive pair.
pub fn stationary_from_rho(rho: &[f64], p: &Parameters) -> Result<Vec<LinearProfile>> {
    p.require_normalized()?;
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("stationary city densities"));
    }
    let (a, b, d) = (p.alpha, p.beta, p.d);
    let k = b * d / (a * (2.0 * d + a));
    let w = (d + a) / d;
    let slope_factor = b / (2.0 * d + a);
    Ok(rho
        .windows(2)
        .map(|pair| LinearProfile {
            slope: slope_factor * (pair[1] - pair[0]),
            intercept: k * (w * pair[0] + pair[1]),
        })
        .collect())
}

/// Residual of the reduced stationary lattice equation at interior cities:
/// `beta d / (2 d + alpha) (rho_{j-1} - 2 rho_j + rho_{j+1}) + f(rho_j)`.
pub fn stationary_residual(rho: &[f64], p: &Parameters) -> Result<Vec<f64>> {
    if rho.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            found: rho.len(),
        });
    }
    let coupling = p.beta * p.d / (2.0 * p.d + p.alpha);
    Ok(rho
        .windows(3)
        .map(|w| coupling * (w[0] - 2.0 * w[1] + w[2]) + p.reaction.eval(w[1]))
        .collect())
}

/// Robin mismatch of initial data at both ends of one road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityDefect {
    /// Road index `j`.
    pub edge: i64,
    /// `-d h_j'(0) + alpha h_j(0) - beta Lambda_j`.
    pub left: f64,
    /// `d h_j'(1) + alpha h_j(1) - beta Lambda_{j+1}`.
    pub right: f64,
}

impl CompatibilityDefect {
    pub fn magnitude(&self) -> f64 {
        self.left.abs().max(self.right.abs())
    }
}

/// Robin compatibility defects of a state, with one-sided second-order
/// differences for `h'` at the road ends.
pub fn compatibility_defects(s: &LatticeState, p: &Parameters) -> Vec<CompatibilityDefect> {
    s.edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let v = e.values();
            let m = e.m();
            let dx = e.dx();
            let d0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
            let d1 = (3.0 * v[m] - 4.0 * v[m - 1] + v[m - 2]) / (2.0 * dx);
            CompatibilityDefect {
                edge: s.j_min + k as i64,
                left: -p.d * d0 + p.alpha * v[0] - p.beta * s.rho[k],
                right: p.d * d1 + p.alpha * v[m] - p.beta * s.rho[k + 1],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Parameters {
        Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let p = Parameters::new(2.0, 1.0, 8.0, 1.0)
            .unwrap()
            .with_length(2.0)
            .unwrap();
        let r = rescale_to_unit_length(&p);
        assert_eq!(
            (r.params.alpha, r.params.beta, r.params.d, r.params.ell),
            (1.0, 1.0, 2.0, 1.0)
        );
        assert_eq!(r.density_scale, 2.0);

        let r = rescale_to_unit_length(&unit());
        assert_eq!(r.params, unit());

        let p = Parameters::new(0.5, 3.0, 0.25, 1.0)
            .unwrap()
            .with_length(0.5)
            .unwrap();
        let r = rescale_to_unit_length(&p);
        assert_eq!(
            (r.params.alpha, r.params.beta, r.params.d, r.params.ell),
            (1.0, 3.0, 1.0, 1.0)
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            Parameters::new(-1.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidParameter { name: "alpha", .. })
        ));
        assert!(Parameters::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Parameters::new(1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(unit().with_length(0.0).is_err());
    }

    #[test]
    fn logistic_values() {
        let f = Nonlinearity::logistic(1.0);
        assert_eq!(eval_nonlinearity(&f, 0.0), 0.0);
        assert_eq!(eval_nonlinearity(&f, 1.0), 0.0);
        assert_eq!(eval_nonlinearity(&f, 0.5), 0.25);
        f.check_admissible().unwrap();
        assert!(Nonlinearity::none().check_admissible().is_err());
    }

    #[test]
    fn tabulated_reaction_matches_logistic() {
        let t = TabulatedReaction::from_fn(64, |u| 2.0 * u * (1.0 - u)).unwrap();
        // quadratic data: centered slopes are exact, so the Hermite cubic is too
        for k in 0..=100 {
            let u = k as f64 / 100.0;
            assert!((t.eval(u) - 2.0 * u * (1.0 - u)).abs() < 1e-12, "u = {u}");
        }
        assert!((t.slope_at_zero() - 2.0).abs() < 1e-12);
        assert!(t.eval(-0.5) < 0.0 && t.eval(1.5) < 0.0);
    }

    #[test]
    fn tabulated_reaction_rejects_non_kpp() {
        // Allee-type: negative near zero
        assert!(TabulatedReaction::from_fn(32, |u| u * (1.0 - u) * (u - 0.3)).is_err());
        // f(u) > f'(0) u somewhere
        assert!(TabulatedReaction::from_fn(32, |u| u * (1.0 - u) * (1.0 + 4.0 * u)).is_err());
    }

    #[test]
    fn mass_examples() {
        let s = LatticeState::constant(-3, 3, 8, 0.0, 0.0).unwrap();
        assert_eq!(total_mass(&s), 0.0);

        let mut s = LatticeState::constant(-3, 3, 8, 0.0, 0.0).unwrap();
        s.rho[3] = 1.0;
        assert_eq!(total_mass(&s), 1.0);

        let p = Parameters::new(2.0, 3.0, 1.0, 1.0).unwrap();
        let n = 9;
        let s = LatticeState::constant(0, n - 1, 16, p.road_equilibrium(), 1.0).unwrap();
        let expected = n as f64 + (n - 1) as f64 * 1.5;
        assert!((total_mass(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn stationary_constant_and_zero() {
        let p = unit();
        for prof in stationary_from_rho(&[1.0; 5], &p).unwrap() {
            assert!((prof.left() - 1.0).abs() < 1e-15);
            assert!(prof.slope.abs() < 1e-15);
        }
        for prof in stationary_from_rho(&[0.0; 5], &p).unwrap() {
            assert_eq!((prof.slope, prof.intercept), (0.0, 0.0));
        }
        assert!(stationary_from_rho(&[1.0, f64::NAN], &p).is_err());
    }

    #[test]
    fn stationary_step_matches_two_by_two_solve() {
        // (d + alpha) v0 - d v1 = beta rho_j ; -d v0 + (d + alpha) v1 = beta rho_{j+1}
        let p = unit();
        let (a, b, d) = (p.alpha, p.beta, p.d);
        let (r0, r1) = (1.0, 0.0);
        let det = (d + a) * (d + a) - d * d;
        let v0 = ((d + a) * b * r0 + d * b * r1) / det;
        let v1 = (d * b * r0 + (d + a) * b * r1) / det;
        let prof = stationary_from_rho(&[r0, r1], &p).unwrap()[0];
        assert!((prof.left() - v0).abs() < 1e-15);
        assert!((prof.right() - v1).abs() < 1e-15);
        assert!((v0 - 2.0 / 3.0).abs() < 1e-15 && (v1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_residual_examples() {
        let p = unit();
        assert!(stationary_residual(&[1.0; 4], &p).unwrap().iter().all(|r| *r == 0.0));
        assert!(stationary_residual(&[0.0; 4], &p).unwrap().iter().all(|r| *r == 0.0));
        let eps = 1e-3;
        let r = stationary_residual(&[0.0, eps, 0.0], &p).unwrap();
        let expected = (1.0 / 3.0) * (-2.0 * eps) + eps * (1.0 - eps);
        assert!((r[0] - expected).abs() < 1e-18);
        assert!(stationary_residual(&[0.0, 1.0], &p).is_err());
    }

    #[test]
    fn compatibility_of_stationary_profiles() {
        let p = unit();
        let rho = vec![0.2, 0.9, 0.4, 0.0];
        let edges = stationary_from_rho(&rho, &p)
            .unwrap()
            .iter()
            .map(|prof| EdgeGrid::from_fn(16, |x| prof.eval(x)))
            .collect();
        let s = LatticeState::new(0, rho, edges, 0.0).unwrap();
        for def in compatibility_defects(&s, &p) {
            assert!(def.magnitude() < 1e-13, "{def:?}");
        }
        let blank = LatticeState::new(0, vec![1.0, 0.0], vec![EdgeGrid::zeros(4)], 0.0).unwrap();
        assert!((compatibility_defects(&blank, &p)[0].left + 1.0).abs() < 1e-15);
    }

    #[test]
    fn state_validation() {
        assert!(LatticeState::new(0, vec![0.0; 3], vec![EdgeGrid::zeros(4)], 0.0).is_err());
        assert!(LatticeState::new(
            0,
            vec![0.0; 3],
            vec![EdgeGrid::zeros(4), EdgeGrid::zeros(6)],
            0.0
        )
        .is_err());
        assert!(EdgeGrid::new(vec![0.0, 1.0]).is_err());
        assert!(EdgeGrid::new(vec![0.0, f64::INFINITY, 1.0]).is_err());
        let s = LatticeState::constant(-2, 2, 4, 0.5, 1.0).unwrap();
        assert_eq!(s.index_of(-2), Some(0));
        assert_eq!(s.index_of(3), None);
        assert_eq!(s.edge_at(2), None);
        assert!(s.edge_at(1).is_some());
    }
}
