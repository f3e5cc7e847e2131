//! Exponential solutions of the linearized lattice and the linear spreading
//! speed `c* = min_{lambda > lambda0} lambda / mu(lambda)`.
//!
//! With `s = sqrt(lambda / d)` and `q = sqrt(d lambda)`,
//!
//! ```text
//! Delta(lambda) = alpha^2 + d lambda + 2 alpha q / tanh s
//! y(lambda)     = [Delta / (2 alpha beta) (lambda + 2 beta - f'(0))
//!                  - (alpha + q / tanh s)] sinh s / q
//! mu(lambda)    = arccosh y(lambda)
//! ```

use crate::error::{Error, Result};
use crate::model::Parameters;

/// Below this value of `s` the hyperbolic ratios use their Taylor series.
pub const TAYLOR_SWITCH: f64 = 1e-4;

/// Number of points of the geometric scan grid.
pub const SCAN_POINTS: usize = 2000;

/// Largest bracket end tried by [`find_lambda0`].
pub const LAMBDA0_SEARCH_LIMIT: f64 = 1e6;

const LOG_BRANCH_S: f64 = 300.0;

/// The three hyperbolic ratios entering `Delta` and `y`.
#[derive(Debug, Clone, Copy)]
struct Ratios {
    s: f64,
    q: f64,
    /// `q / tanh s`.
    coth: f64,
    /// `q / sinh s`.
    csch: f64,
    /// `sinh s / q`; infinite beyond the overflow range.
    sinh_over: f64,
}

fn ratios(lambda: f64, d: f64) -> Ratios {
    let s = (lambda / d).sqrt();
    let q = (d * lambda).sqrt();
    if s < TAYLOR_SWITCH {
        let s2 = s * s;
        let s4 = s2 * s2;
        Ratios {
            s,
            q,
            coth: d * (1.0 + s2 / 3.0 - s4 / 45.0),
            csch: d * (1.0 - s2 / 6.0 + 7.0 * s4 / 360.0),
            sinh_over: (1.0 + s2 / 6.0 + s4 / 120.0) / d,
        }
    } else if s > LOG_BRANCH_S {
        Ratios {
            s,
            q,
            coth: q,
            csch: 2.0 * q * (-s).exp(),
            sinh_over: f64::INFINITY,
        }
    } else {
        Ratios {
            s,
            q,
            coth: q / s.tanh(),
            csch: q / s.sinh(),
            sinh_over: s.sinh() / q,
        }
    }
}

/// `arccosh y` for `y > 1`, written to avoid cancellation near 1.
fn arccosh(y: f64) -> f64 {
    if y > 1e8 {
        std::f64::consts::LN_2 + y.ln()
    } else {
        (y + ((y - 1.0) * (y + 1.0)).sqrt()).ln()
    }
}

/// One evaluation of the dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoint {
    pub lambda: f64,
    pub delta: f64,
    /// May be `+inf` when `sinh s` overflows; `mu` is then still accurate.
    pub y: f64,
    /// `None` when `y <= 1`.
    pub mu: Option<f64>,
    pub c: Option<f64>,
}

/// `Delta(lambda)`.
pub fn delta(lambda: f64, p: &Parameters) -> f64 {
    let r = ratios(lambda, p.d);
    p.alpha * p.alpha + r.q * r.q + 2.0 * p.alpha * r.coth
}

/// Evaluates `Delta`, `y`, `mu` and `c` at `lambda >= 0`.
pub fn dispersion_eval(lambda: f64, p: &Parameters) -> DispersionPoint {
    let (a, b, fp) = (p.alpha, p.beta, p.fprime0());
    let r = ratios(lambda.max(0.0), p.d);
    let delta = a * a + r.q * r.q + 2.0 * a * r.coth;
    let bracket = delta / (2.0 * a * b) * (lambda + 2.0 * b - fp) - (a + r.coth);
    let (y, mu) = if r.sinh_over.is_infinite() && bracket > 0.0 {
        // sinh s = e^s / 2 to double precision here
        let log_y = bracket.ln() + r.s - std::f64::consts::LN_2 - r.q.ln();
        (log_y.exp(), Some(log_y + std::f64::consts::LN_2))
    } else {
        let y = bracket * r.sinh_over;
        (y, (y > 1.0).then(|| arccosh(y)))
    };
    let mu = mu.filter(|m| *m > 0.0);
    DispersionPoint {
        lambda,
        delta,
        y,
        mu,
        c: mu.map(|m| lambda / m),
    }
}

/// `g(lambda) = lambda + 2 beta - f'(0)`, strictly increasing.
pub fn g_increasing(lambda: f64, p: &Parameters) -> f64 {
    lambda + 2.0 * p.beta - p.fprime0()
}

/// `G(lambda) = 2 alpha beta / Delta [alpha + q / tanh s + q / sinh s]`,
/// decreasing with `G(0) = 2 beta`.
pub fn g_decreasing(lambda: f64, p: &Parameters) -> f64 {
    let r = ratios(lambda.max(0.0), p.d);
    let a = p.alpha;
    let delta = a * a + r.q * r.q + 2.0 * a * r.coth;
    2.0 * a * p.beta / delta * (a + r.coth + r.csch)
}

fn require_kpp(p: &Parameters) -> Result<()> {
    p.validate()?;
    p.require_normalized()?;
    let fp = p.fprime0();
    if !(fp > 0.0) {
        return Err(Error::InvalidParameter {
            name: "fprime0",
            value: fp,
            reason: "the spreading speed needs f'(0) > 0",
        });
    }
    Ok(())
}

/// The unique `lambda0 > 0` with `y(lambda0) = 1`, located as the crossing
/// of `g` and `G`.
pub fn find_lambda0(p: &Parameters) -> Result<f64> {
    require_kpp(p)?;
    let gap = |l: f64| g_increasing(l, p) - g_decreasing(l, p);
    let mut hi = 1.0;
    while gap(hi) <= 0.0 {
        hi *= 2.0;
        if hi > LAMBDA0_SEARCH_LIMIT {
            return Err(Error::NoSignChange { lambda_hi: hi });
        }
    }
    let mut lo = 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid.max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda0 = 0.5 * (lo + hi);
    let y = dispersion_eval(lambda0, p).y;
    if (y - 1.0).abs() > 1e-10 {
        return Err(Error::PostCheck(format!(
            "y(lambda0) = {y} differs from 1 at lambda0 = {lambda0}"
        )));
    }
    Ok(lambda0)
}

/// A grid point where `c` is smaller than at both neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMinimum {
    pub lambda: f64,
    pub c: f64,
}

/// Linear spreading speed and the data used to find it.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionResult {
    pub lambda0: f64,
    pub lambda_star: f64,
    pub mu_star: f64,
    pub c_star: f64,
    pub scan: Vec<DispersionPoint>,
    /// Every interior local minimum of `c` on the scan grid.
    pub local_minima: Vec<LocalMinimum>,
}

fn speed_or_inf(pt: &DispersionPoint) -> f64 {
    pt.c.unwrap_or(f64::INFINITY)
}

/// `n` points from `lo` to `hi` in geometric progression.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Golden-section minimization of a unimodal function on `[a, b]` until the
/// bracket is below `rel_tol` relative to its midpoint.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..400 {
        if (b - a).abs() <= rel_tol * (0.5 * (a + b)).abs() {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

fn scan(lo: f64, hi: f64, p: &Parameters) -> Vec<DispersionPoint> {
    geometric_grid(lo, hi, SCAN_POINTS)
        .into_iter()
        .map(|l| dispersion_eval(l, p))
        .collect()
}

/// Minimizes `c(lambda) = lambda / mu(lambda)` over `lambda > lambda0`.
pub fn compute_c_star(p: &Parameters) -> Result<DispersionResult> {
    let lambda0 = find_lambda0(p)?;
    let lo = lambda0 * (1.0 + 1e-6);
    let mut points = scan(lo, lambda0 * 1e4, p);
    let argmin = |pts: &[DispersionPoint]| {
        pts.iter()
            .enumerate()
            .min_by(|a, b| speed_or_inf(a.1).total_cmp(&speed_or_inf(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let mut i = argmin(&points);
    if i == points.len() - 1 {
        points = scan(lo, lambda0 * 1e5, p);
        i = argmin(&points);
    }
    if i == 0 || i == points.len() - 1 {
        return Err(Error::EndpointMinimum {
            at: points[i].lambda,
        });
    }
    let local_minima = points
        .windows(3)
        .filter(|w| {
            let c = speed_or_inf(&w[1]);
            c < speed_or_inf(&w[0]) && c <= speed_or_inf(&w[2])
        })
        .map(|w| LocalMinimum {
            lambda: w[1].lambda,
            c: speed_or_inf(&w[1]),
        })
        .collect();

    let speed = |l: f64| speed_or_inf(&dispersion_eval(l, p));
    let lambda_star = golden_section(speed, points[i - 1].lambda, points[i + 1].lambda, 1e-10);
    let star = dispersion_eval(lambda_star, p);
    let mu_star = star.mu.ok_or_else(|| {
        Error::PostCheck(format!("mu undefined at the minimizer lambda = {lambda_star}"))
    })?;
    let c_star = lambda_star / mu_star;
    let (first, last) = (speed_or_inf(&points[0]), speed_or_inf(&points[points.len() - 1]));
    if !(first > c_star && last > c_star) {
        return Err(Error::PostCheck(format!(
            "scan endpoints c = ({first}, {last}) do not exceed c* = {c_star}"
        )));
    }
    Ok(DispersionResult {
        lambda0,
        lambda_star,
        mu_star,
        c_star,
        scan: points,
        local_minima,
    })
}

/// `cosh a / sinh s` and `sinh a / sinh s` for `0 <= a <= s`, safe for
/// large `s`.
fn hyperbolic_over_sinh(a: f64, s: f64) -> (f64, f64) {
    if s < 20.0 {
        let sh = s.sinh();
        (a.cosh() / sh, a.sinh() / sh)
    } else {
        let den = -(-2.0 * s).exp_m1();
        let (e1, e2) = ((a - s).exp(), (-a - s).exp());
        ((e1 + e2) / den, (e1 - e2) / den)
    }
}

/// Road profile of an exponential solution `v_j(t, x) = V(x) e^{-mu (j - c t)}`
/// with `mu c = lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialProfile {
    pub lambda: f64,
    pub mu: f64,
    s: f64,
    q: f64,
    scale: f64,
    alpha: f64,
    tail: f64,
}

impl ExponentialProfile {
    pub fn new(lambda: f64, mu: f64, p: &Parameters) -> Self {
        let s = (lambda / p.d).sqrt();
        let q = (lambda * p.d).sqrt();
        ExponentialProfile {
            lambda,
            mu,
            s,
            q,
            scale: p.beta / delta(lambda, p),
            alpha: p.alpha,
            tail: (-mu).exp(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let (s, q, a) = (self.s, self.q, self.alpha);
        let (c1, s1) = hyperbolic_over_sinh(s * (1.0 - x), s);
        let (c0, s0) = hyperbolic_over_sinh(s * x, s);
        self.scale * (q * c1 + a * s1 + self.tail * (q * c0 + a * s0))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (s, q, a) = (self.s, self.q, self.alpha);
        let (c1, s1) = hyperbolic_over_sinh(s * (1.0 - x), s);
        let (c0, s0) = hyperbolic_over_sinh(s * x, s);
        self.scale * s * (-(q * s1 + a * c1) + self.tail * (q * s0 + a * c0))
    }
}

/// `V*(x)` at the minimizer `(lambda*, mu*)`.
pub fn profile_v_star(x: f64, res: &DispersionResult, p: &Parameters) -> f64 {
    ExponentialProfile::new(res.lambda_star, res.mu_star, p).value(x)
}

/// Relative residuals of the four equations satisfied by an exponential
/// solution: `mu c = lambda`, the city equation and both Robin conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzResidual {
    pub speed: f64,
    pub city: f64,
    pub robin_left: f64,
    pub robin_right: f64,
}

impl AnsatzResidual {
    pub fn max(&self) -> f64 {
        self.speed
            .abs()
            .max(self.city.abs())
            .max(self.robin_left.abs())
            .max(self.robin_right.abs())
    }
}

/// Residuals of the exponential ansatz at `(lambda, mu)` with `c = lambda / mu`.
pub fn ansatz_residual(lambda: f64, mu: f64, p: &Parameters) -> AnsatzResidual {
    let c = lambda / mu;
    let prof = ExponentialProfile::new(lambda, mu, p);
    let (v0, v1) = (prof.value(0.0), prof.value(1.0));
    let (dv0, dv1) = (prof.derivative(0.0), prof.derivative(1.0));
    let (a, b, d) = (p.alpha, p.beta, p.d);
    let growth = mu * c;
    let inflow = a * (v0 + mu.exp() * v1);
    let city_scale = growth.abs().max(inflow).max(p.fprime0()).max(2.0 * b);
    let tail = b * (-mu).exp();
    AnsatzResidual {
        speed: (growth - lambda) / lambda,
        city: (growth - (p.fprime0() + inflow - 2.0 * b)) / city_scale,
        robin_left: (-d * dv0 + a * v0 - b) / b,
        robin_right: (d * dv1 + a * v1 - tail) / tail,
    }
}

/// Linear supersolution `theta e^{-mu* (j - c* t)} (V*(x), 1)` of the full
/// system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialSupersolution {
    pub profile: ExponentialProfile,
    pub c: f64,
    pub theta: f64,
}

impl ExponentialSupersolution {
    pub fn new(res: &DispersionResult, theta: f64, p: &Parameters) -> Self {
        ExponentialSupersolution {
            profile: ExponentialProfile::new(res.lambda_star, res.mu_star, p),
            c: res.c_star,
            theta,
        }
    }

    pub fn rho(&self, j: i64, t: f64) -> f64 {
        self.theta * (-self.profile.mu * (j as f64 - self.c * t)).exp()
    }

    pub fn road(&self, j: i64, t: f64, x: f64) -> f64 {
        self.rho(j, t) * self.profile.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Parameters {
        Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn small_lambda_limit() {
        let p = unit();
        assert!((dispersion_eval(1e-14, &p).y + 0.5).abs() < 1e-9);
        assert!((delta(0.0, &p) - 3.0).abs() < 1e-15);
        assert!(dispersion_eval(1e-14, &p).mu.is_none());
    }

    #[test]
    fn y_at_one_is_e() {
        // at (1,1,1,1), lambda = 1 the bracket collapses to sinh 1 + cosh 1
        let y = dispersion_eval(1.0, &unit()).y;
        assert!((y - std::f64::consts::E).abs() < 1e-12 * std::f64::consts::E);
    }

    #[test]
    fn taylor_switch_is_seamless() {
        let p = Parameters::new(0.7, 1.3, 2.0, 0.9).unwrap();
        let l = TAYLOR_SWITCH * TAYLOR_SWITCH * p.d;
        let below = dispersion_eval(l * (1.0 - 1e-12), &p);
        let above = dispersion_eval(l * (1.0 + 1e-12), &p);
        assert!((below.y - above.y).abs() <= 1e-10 * above.y.abs());
        assert!((below.delta - above.delta).abs() <= 1e-10 * above.delta);
    }

    #[test]
    fn log_branch_matches_direct_mu() {
        let p = Parameters::new(1.0, 1.0, 1e-3, 1.0).unwrap();
        let l = LOG_BRANCH_S * LOG_BRANCH_S * p.d;
        let a = dispersion_eval(l * (1.0 - 1e-9), &p).mu.unwrap();
        let b = dispersion_eval(l * (1.0 + 1e-9), &p).mu.unwrap();
        assert!((a - b).abs() < 1e-9 * a);
        let far = dispersion_eval(1e6, &p);
        assert!(far.mu.unwrap().is_finite() && far.c.unwrap() > 0.0);
    }

    #[test]
    fn lambda0_reference() {
        let l0 = find_lambda0(&unit()).unwrap();
        assert!((l0 - 0.571_336_535_721_852_1).abs() < 1e-10);
    }

    #[test]
    fn lambda0_requires_growth() {
        let p = Parameters::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(find_lambda0(&p), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn c_star_reference() {
        let res = compute_c_star(&unit()).unwrap();
        assert!((res.c_star - 0.600_631_944_295_910_2).abs() < 1e-12);
        assert!((res.lambda_star - 1.086_533_430_188_782).abs() < 1e-6);
        assert!((res.mu_star - 1.808_983_755_371_967_5).abs() < 1e-6);
        assert_eq!(res.local_minima.len(), 1);
        assert!(res.lambda0 < res.lambda_star);
    }

    #[test]
    fn golden_section_on_parabola() {
        let x = golden_section(|x| (x - 1.3).powi(2), 0.0, 4.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
    }

    #[test]
    fn profile_ends_match_two_by_two_solve() {
        // Robin rows: [d s coth s + alpha, -d s csch s; -d s csch s, d s coth s + alpha]
        // times (V0, V1) = (beta, beta e^{-mu})
        let p = Parameters::new(0.8, 1.4, 2.5, 1.1).unwrap();
        let res = compute_c_star(&p).unwrap();
        let s = (res.lambda_star / p.d).sqrt();
        let k = p.d * s;
        let (a11, a12) = (k / s.tanh() + p.alpha, -k / s.sinh());
        let rhs = (p.beta, p.beta * (-res.mu_star).exp());
        let det = a11 * a11 - a12 * a12;
        let v0 = (a11 * rhs.0 - a12 * rhs.1) / det;
        let v1 = (a11 * rhs.1 - a12 * rhs.0) / det;
        assert!((profile_v_star(0.0, &res, &p) - v0).abs() < 1e-12 * v0);
        assert!((profile_v_star(1.0, &res, &p) - v1).abs() < 1e-12 * v1);
    }

    #[test]
    fn hyperbolic_ratios_agree_across_branch() {
        let s = 20.0;
        let (c, sh) = (hyperbolic_over_sinh(12.0, s * (1.0 - 1e-15)), hyperbolic_over_sinh(12.0, s));
        assert!((c.0 - sh.0).abs() < 1e-12 * sh.0);
        assert!((c.1 - sh.1).abs() < 1e-12 * sh.1);
    }
}
