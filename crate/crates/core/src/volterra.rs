//! Moving-boundary layers: polynomial internal boundaries and the
//! single-layer boundary-gradient Volterra system.
//!
//! For one layer `y-(t) < x < y+(t)` with `u_t = sigma^2 u_xx`, Dirichlet data
//! `chi-`, `chi+` and initial data `u0`, the unknowns are the boundary
//! gradients `Omega = -u_x(y-)` and `Theta = u_x(y+)`. Green's identity with
//! the `2l(tau)`-periodic heat kernel `E` turns the problem into a coupled
//! pair of second-kind Volterra equations, solved here by a product
//! rectangle rule marching forward in time.
//!
//! Internally everything runs in heat time `tau = sigma^2 t`.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate, integrate_with_breaks};
use crate::special::{gaussian_term, periodic_kernel, periodic_kernel_without_source, preferred_representation, PeriodicSum, Representation};
use std::f64::consts::PI;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            Self { coeffs: vec![0.0] }
        } else {
            Self { coeffs }
        }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// `p(t / s)` as a polynomial in `t`.
    pub fn rescaled(&self, s: f64) -> Polynomial {
        let mut f = 1.0;
        Polynomial::new(
            self.coeffs
                .iter()
                .map(|c| {
                    let v = c * f;
                    f /= s;
                    v
                })
                .collect(),
        )
    }

    /// Interpolating polynomial through `(ts[i], vs[i])`.
    pub fn interpolate(ts: &[f64], vs: &[f64]) -> Polynomial {
        let n = ts.len();
        let mut coeffs = vec![0.0; n];
        for i in 0..n {
            // Lagrange basis polynomial for node i, built by multiplication.
            let mut basis = vec![1.0];
            let mut denom = 1.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let mut next = vec![0.0; basis.len() + 1];
                for (k, b) in basis.iter().enumerate() {
                    next[k] -= b * ts[j];
                    next[k + 1] += b;
                }
                basis = next;
                denom *= ts[i] - ts[j];
            }
            for (c, b) in coeffs.iter_mut().zip(&basis) {
                *c += vs[i] * b / denom;
            }
        }
        Polynomial::new(coeffs)
    }
}

/// Internal boundaries `y_1(t) .. y_{N-1}(t)` as polynomials on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBoundarySet {
    pub coeffs: Vec<Vec<f64>>,
    pub degree: usize,
    pub horizon: f64,
}

impl PolynomialBoundarySet {
    pub fn boundary(&self, i: usize) -> Polynomial {
        Polynomial::new(self.coeffs[i].clone())
    }

    /// Equally spaced sample times on `[0, T]`.
    pub fn sample_times(&self, count: usize) -> Vec<f64> {
        crate::layered::uniform_grid(0.0, self.horizon, count)
    }
}

const CROSSING_SAMPLES: usize = 200;

/// Splits `[chi-(t), chi+(t)]` into `n` layers with polynomial interiors of
/// the given degree.
///
/// The interiors interpolate the uniform split at `degree + 1` times: both
/// ends of the horizon and, for higher degrees, the time where the strip is
/// narrowest (then the midpoint of the longer remaining gap).
pub fn build_internal_boundaries(
    chi_minus: &dyn Fn(f64) -> f64,
    chi_plus: &dyn Fn(f64) -> f64,
    n: usize,
    degree: usize,
    horizon: f64,
) -> Result<PolynomialBoundarySet> {
    if n == 0 {
        return Err(Error::domain("need at least one layer"));
    }
    if !(1..=3).contains(&degree) {
        return Err(Error::domain(format!("degree must be 1, 2 or 3, got {degree}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain("horizon must be positive"));
    }
    let grid = crate::layered::uniform_grid(0.0, horizon, CROSSING_SAMPLES);
    for &t in &grid {
        if !(chi_minus(t) < chi_plus(t)) {
            return Err(Error::BoundaryCrossing(format!(
                "external boundaries meet or cross at t = {t}"
            )));
        }
    }
    let mut times = vec![0.0, horizon];
    if degree >= 2 {
        let gap = |t: f64| chi_plus(t) - chi_minus(t);
        let interior = &grid[1..grid.len() - 1];
        let t_star = interior
            .iter()
            .copied()
            .min_by(|a, b| gap(*a).total_cmp(&gap(*b)))
            .unwrap_or(0.5 * horizon);
        // A minimum at an end is already sampled; fall back to the midpoint.
        let t_star = if gap(t_star) >= gap(0.0).min(gap(horizon)) { 0.5 * horizon } else { t_star };
        times.push(t_star);
        if degree == 3 {
            let extra = if t_star > 0.5 * horizon { 0.5 * t_star } else { 0.5 * (t_star + horizon) };
            times.push(extra);
        }
    }
    times.sort_by(f64::total_cmp);
    let coeffs: Vec<Vec<f64>> = (1..n)
        .map(|i| {
            let w = i as f64 / n as f64;
            let vs: Vec<f64> = times.iter().map(|&t| chi_minus(t) + w * (chi_plus(t) - chi_minus(t))).collect();
            let mut p = Polynomial::interpolate(&times, &vs);
            p.coeffs.resize(degree + 1, 0.0);
            p.coeffs
        })
        .collect();
    let set = PolynomialBoundarySet { coeffs, degree, horizon };
    for &t in &grid {
        let mut prev = chi_minus(t);
        for i in 0..n - 1 {
            let y = set.boundary(i).eval(t);
            if !(y > prev) {
                return Err(Error::BoundaryCrossing(format!(
                    "boundary {} crosses its lower neighbour at t = {t}; try a higher degree",
                    i + 1
                )));
            }
            prev = y;
        }
        if !(chi_plus(t) > prev) {
            return Err(Error::BoundaryCrossing(format!(
                "top interior boundary crosses the upper external at t = {t}; try a higher degree"
            )));
        }
    }
    Ok(set)
}

/// One layer with moving ends, boundary data and initial data.
#[derive(Clone)]
pub struct GitLayerProblem {
    pub y_minus: Polynomial,
    pub y_plus: Polynomial,
    pub chi_minus: ScalarFn,
    pub chi_plus: ScalarFn,
    pub u0: ScalarFn,
    pub sigma: f64,
    pub t: f64,
    pub m: usize,
    /// Points where `u0` has kinks or narrow peaks, handed to the quadrature.
    pub u0_breaks: Vec<f64>,
    /// Also solve with `2M` steps and fail if `Omega` moves by more than 10%.
    pub check_refinement: bool,
}

impl GitLayerProblem {
    pub fn new(y_minus: Polynomial, y_plus: Polynomial, t: f64, m: usize) -> Self {
        let zero: ScalarFn = Arc::new(|_| 0.0);
        Self {
            y_minus,
            y_plus,
            chi_minus: zero.clone(),
            chi_plus: zero.clone(),
            u0: zero,
            sigma: 1.0,
            t,
            m,
            u0_breaks: Vec::new(),
            check_refinement: false,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_boundary_data(mut self, chi_minus: ScalarFn, chi_plus: ScalarFn) -> Self {
        self.chi_minus = chi_minus;
        self.chi_plus = chi_plus;
        self
    }

    pub fn with_initial(mut self, u0: ScalarFn, breaks: Vec<f64>) -> Self {
        self.u0 = u0;
        self.u0_breaks = breaks;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::domain("horizon must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::domain("sigma must be positive"));
        }
        if self.m == 0 {
            return Err(Error::domain("need at least one time step"));
        }
        for t in crate::layered::uniform_grid(0.0, self.t, CROSSING_SAMPLES) {
            if !(self.y_minus.eval(t) < self.y_plus.eval(t)) {
                return Err(Error::BoundaryCrossing(format!("layer ends meet at t = {t}")));
            }
        }
        Ok(())
    }
}

/// Boundary gradients on the grid `t_k = kT/M`, k = 0..M.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
    pub grid: Vec<f64>,
}

/// The layer in heat time.
struct HeatLayer {
    ym: Polynomial,
    yp: Polynomial,
    dym: Polynomial,
    dyp: Polynomial,
    chi_m: ScalarFn,
    chi_p: ScalarFn,
    u0: ScalarFn,
    u0_breaks: Vec<f64>,
    scale: f64,
}

impl HeatLayer {
    fn new(p: &GitLayerProblem) -> Self {
        let s2 = p.sigma * p.sigma;
        let ym = p.y_minus.rescaled(s2);
        let yp = p.y_plus.rescaled(s2);
        let (cm, cp) = (p.chi_minus.clone(), p.chi_plus.clone());
        Self {
            dym: ym.derivative(),
            dyp: yp.derivative(),
            ym,
            yp,
            chi_m: Arc::new(move |tau| cm(tau / s2)),
            chi_p: Arc::new(move |tau| cp(tau / s2)),
            u0: p.u0.clone(),
            u0_breaks: p.u0_breaks.clone(),
            scale: s2,
        }
    }

    fn ends(&self, tau: f64) -> (f64, f64) {
        (self.ym.eval(tau), self.yp.eval(tau))
    }
}

/// Kernel values at one `(tau, s, xi)` in heat time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSet {
    /// `E(y-(tau) - xi, tau - s)`
    pub eta_minus: f64,
    /// `E(y+(tau) - xi, tau - s)`
    pub eta_plus: f64,
    /// `E_a(y-(tau) - xi, tau - s)`, the left-end slope of the layer kernel.
    pub upsilon_minus: f64,
    /// `E_a(y+(tau) - xi, tau - s)`
    pub upsilon_plus: f64,
    /// `upsilon-` at `xi = y-(s)` without its direct Gaussian.
    pub upsilon0_minus: f64,
    /// `upsilon+` at `xi = y+(s)` without its direct Gaussian.
    pub upsilon0_plus: f64,
}

/// The kernels of the Volterra system for ends `y_minus`, `y_plus` given in heat time.
pub fn git_kernel_set(
    tau: f64,
    s: f64,
    xi: f64,
    y_minus: &Polynomial,
    y_plus: &Polynomial,
) -> Result<KernelSet> {
    if !(s < tau) {
        return Err(Error::domain(format!("need s < tau, got s = {s}, tau = {tau}")));
    }
    let (a, b) = (y_minus.eval(tau), y_plus.eval(tau));
    let l = b - a;
    let d = tau - s;
    let km = periodic_kernel(a - xi, l, d)?;
    let kp = periodic_kernel(b - xi, l, d)?;
    let sm = periodic_kernel_without_source(a - y_minus.eval(s), l, d)?;
    let sp = periodic_kernel_without_source(b - y_plus.eval(s), l, d)?;
    Ok(KernelSet {
        eta_minus: km.value,
        eta_plus: kp.value,
        upsilon_minus: km.da,
        upsilon_plus: kp.da,
        upsilon0_minus: sm.da,
        upsilon0_plus: sp.da,
    })
}

/// `-y'(s) E_a(d) - E_aa(d) - 1/(2 sqrt(pi) D^{3/2})` for `d = y(tau) - y(s)`:
/// the self-interaction kernel with its hypersingular part taken out.
fn self_kernel(d: f64, l: f64, delta: f64, slope: f64) -> Result<f64> {
    let p = 0.5 / (PI.sqrt() * delta * delta.sqrt());
    match preferred_representation(l, delta) {
        Representation::Theta => {
            let k = periodic_kernel(d, l, delta)?;
            Ok(-slope * k.da - k.daa - p)
        }
        Representation::Images => {
            let rest = periodic_kernel_without_source(d, l, delta)?;
            let g = gaussian_term(d, delta);
            let w = d * d / (4.0 * delta);
            let regular = p * ((-w).exp_m1() - 2.0 * w * (-w).exp());
            Ok(-slope * (rest.da + g.da) - rest.daa + regular)
        }
    }
}

/// Cross-boundary `d eta / ds` at `xi = y(s)` for the opposite end.
fn cross_kernel(d: f64, l: f64, delta: f64, slope: f64) -> Result<f64> {
    let k: PeriodicSum = periodic_kernel(d, l, delta)?;
    Ok(-slope * k.da - k.daa)
}

/// Adaptive version over all of `[0, tau]`.
fn sqrt_adaptive(mut f: impl FnMut(f64) -> Result<f64>, tau: f64) -> Result<f64> {
    let mut err = None;
    let v = integrate(
        |u| match f(tau - u * u) {
            Ok(v) => 2.0 * u * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        tau.sqrt(),
        1e-12,
        1e-10,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Kernel weights of the four gradient couplings over `[s0, s1]`.
struct CouplingWeights {
    /// Theta in the left equation.
    a_minus: f64,
    /// Omega in the left equation.
    b_minus: f64,
    /// Omega in the right equation.
    a_plus: f64,
    /// Theta in the right equation.
    b_plus: f64,
}

fn coupling_weights(layer: &HeatLayer, tau: f64, s0: f64, s1: f64, nodes: &(Vec<f64>, Vec<f64>)) -> Result<CouplingWeights> {
    let (a, b) = layer.ends(tau);
    let l = b - a;
    let mut out = [0.0; 4];
    let ua = (tau - s1).max(0.0).sqrt();
    let ub = (tau - s0).sqrt();
    let (c, h) = (0.5 * (ua + ub), 0.5 * (ub - ua));
    for (x, w) in nodes.0.iter().zip(&nodes.1) {
        let u = c + h * x;
        let s = tau - u * u;
        let d = u * u;
        let (ym, yp) = (layer.ym.eval(s), layer.yp.eval(s));
        let wt = w * 2.0 * u * h;
        out[0] += wt * periodic_kernel(a - yp, l, d)?.da;
        out[1] += wt * periodic_kernel(a - ym, l, d)?.da;
        out[2] += wt * periodic_kernel(b - ym, l, d)?.da;
        out[3] += wt * periodic_kernel(b - yp, l, d)?.da;
    }
    Ok(CouplingWeights { a_minus: out[0], b_minus: out[1], a_plus: out[2], b_plus: out[3] })
}

/// Known parts of both equations at heat time `tau`: `(F-, F+)`.
fn forcing(layer: &HeatLayer, tau: f64) -> Result<(f64, f64)> {
    let (a, b) = layer.ends(tau);
    let l = b - a;
    let (a0, b0) = layer.ends(0.0);
    let spread = 6.0 * tau.sqrt();
    let mut pts = vec![a0, b0, a, b, a - spread, a + spread, b - spread, b + spread];
    pts.extend(layer.u0_breaks.iter().copied());
    pts.retain(|p| *p >= a0 && *p <= b0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut err = None;
    let mut initial = |end: f64| {
        integrate_with_breaks(
            |xi| {
                let v = (layer.u0)(xi);
                if v == 0.0 {
                    return 0.0;
                }
                match periodic_kernel(end - xi, l, tau) {
                    Ok(k) => v * k.da,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            &pts,
            1e-13,
            1e-11,
        )
    };
    let init_m = initial(a)?;
    let init_p = initial(b)?;
    if let Some(e) = err {
        return Err(e);
    }
    let cm_tau = (layer.chi_m)(tau);
    let cp_tau = (layer.chi_p)(tau);
    let sq = (PI * tau).sqrt();
    let hyper = |chi: &ScalarFn, c_tau: f64| {
        sqrt_adaptive(|s| Ok((chi(s) - c_tau) * 0.5 / (PI.sqrt() * (tau - s).powf(1.5))), tau)
    };
    let mut fm = init_m - cm_tau / sq + hyper(&layer.chi_m, cm_tau)?;
    let mut fp = init_p + cp_tau / sq - hyper(&layer.chi_p, cp_tau)?;
    // Stieltjes terms: chi(s) d eta(tau | y(s), s).
    fm += sqrt_adaptive(
        |s| {
            let d = tau - s;
            let (ym, yp) = (layer.ym.eval(s), layer.yp.eval(s));
            let own = (layer.chi_m)(s) * self_kernel(a - ym, l, d, layer.dym.eval(s))?;
            let other = (layer.chi_p)(s) * cross_kernel(a - yp, l, d, layer.dyp.eval(s))?;
            Ok(own - other)
        },
        tau,
    )?;
    fp += sqrt_adaptive(
        |s| {
            let d = tau - s;
            let (ym, yp) = (layer.ym.eval(s), layer.yp.eval(s));
            let other = (layer.chi_m)(s) * cross_kernel(b - ym, l, d, layer.dym.eval(s))?;
            let own = (layer.chi_p)(s) * self_kernel(b - yp, l, d, layer.dyp.eval(s))?;
            Ok(other - own)
        },
        tau,
    )?;
    Ok((fm, fp))
}

const GAUSS_NODES: usize = 8;

fn march(layer: &HeatLayer, tau_max: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nodes = gauss_legendre(GAUSS_NODES);
    let h = tau_max / m as f64;
    let taus: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
    let mut omega = vec![0.0; m + 1];
    let mut theta = vec![0.0; m + 1];
    for k in 1..=m {
        let tau = taus[k];
        let (fm, fp) = forcing(layer, tau)?;
        let (mut sm, mut sp) = (0.0, 0.0);
        for j in 1..k {
            let w = coupling_weights(layer, tau, taus[j - 1], taus[j], &nodes)?;
            sm += theta[j] * w.a_minus + omega[j] * w.b_minus;
            sp += theta[j] * w.b_plus + omega[j] * w.a_plus;
        }
        let w = coupling_weights(layer, tau, taus[k - 1], tau, &nodes)?;
        // (1 + B-) Omega + A- Theta = -(F- + S-);  -A+ Omega + (1 - B+) Theta = F+ + S+
        let (m11, m12, r1) = (1.0 + w.b_minus, w.a_minus, -(fm + sm));
        let (m21, m22, r2) = (-w.a_plus, 1.0 - w.b_plus, fp + sp);
        let det = m11 * m22 - m12 * m21;
        if !(det.abs() > 1e-14) {
            return Err(Error::Numerical(format!("singular step matrix at tau = {tau}")));
        }
        omega[k] = (r1 * m22 - m12 * r2) / det;
        theta[k] = (m11 * r2 - m21 * r1) / det;
        if !(omega[k].is_finite() && theta[k].is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient at tau = {tau}")));
        }
    }
    Ok((omega, theta))
}

/// Inward one-sided slope of `u0` at `x`.
fn initial_slope(u0: &ScalarFn, x: f64, inward: f64) -> f64 {
    let (f0, f1, f2) = (u0(x), u0(x + inward), u0(x + 2.0 * inward));
    (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * inward)
}

/// Solves the gradient system on `M` uniform steps.
pub fn solve_volterra_single_layer(problem: &GitLayerProblem) -> Result<GradientPair> {
    problem.validate()?;
    let layer = HeatLayer::new(problem);
    let tau_max = problem.t * layer.scale;
    let (mut omega, mut theta) = march(&layer, tau_max, problem.m)?;
    if problem.check_refinement {
        let (fine, _) = march(&layer, tau_max, 2 * problem.m)?;
        let scale = omega.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 1..=problem.m {
            if (fine[2 * k] - omega[k]).abs() > 0.1 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Numerical(format!(
                    "gradient changes by more than 10% between M = {} and {} at step {k}",
                    problem.m,
                    2 * problem.m
                )));
            }
        }
    }
    let (a0, b0) = layer.ends(0.0);
    let h = 1e-5 * (b0 - a0);
    omega[0] = -initial_slope(&layer.u0, a0, h);
    theta[0] = -initial_slope(&layer.u0, b0, -h);
    let grid = crate::layered::uniform_grid(0.0, problem.t, problem.m + 1);
    Ok(GradientPair { omega, theta, grid })
}

/// Step interpolant used by the solver: value of step `k` on `(t_{k-1}, t_k]`.
fn step_value(values: &[f64], h: f64, tau: f64) -> f64 {
    let k = ((tau / h).ceil() as usize).clamp(1, values.len() - 1);
    values[k]
}

/// Maximum mismatch of both equations at the step midpoints when the solved
/// gradients are substituted back as a step function.
pub fn volterra_residual(problem: &GitLayerProblem, g: &GradientPair) -> Result<f64> {
    problem.validate()?;
    let layer = HeatLayer::new(problem);
    let m = g.omega.len() - 1;
    let tau_max = problem.t * layer.scale;
    let h = tau_max / m as f64;
    let nodes = gauss_legendre(12);
    let mut worst = 0.0f64;
    for k in 1..=m {
        let tau = (k as f64 - 0.5) * h;
        let (fm, fp) = forcing(&layer, tau)?;
        let (mut sm, mut sp) = (0.0, 0.0);
        for j in 1..=k {
            let s1 = if j == k { tau } else { j as f64 * h };
            let w = coupling_weights(&layer, tau, (j - 1) as f64 * h, s1, &nodes)?;
            sm += g.theta[j] * w.a_minus + g.omega[j] * w.b_minus;
            sp += g.theta[j] * w.b_plus + g.omega[j] * w.a_plus;
        }
        let om = step_value(&g.omega, h, tau);
        let th = step_value(&g.theta, h, tau);
        worst = worst.max((-om - fm - sm).abs()).max((th - fp - sp).abs());
    }
    Ok(worst)
}

/// Solution value `u(t, x)` rebuilt from the boundary gradients.
pub fn git_field_single_layer(problem: &GitLayerProblem, g: &GradientPair, x: f64, t: f64) -> Result<f64> {
    problem.validate()?;
    let layer = HeatLayer::new(problem);
    let tau = t * layer.scale;
    let m = g.omega.len() - 1;
    let tau_max = g.grid[m] * layer.scale;
    if !(t > 0.0 && tau <= tau_max * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("t = {t} outside the solved grid (0, {}]", g.grid[m])));
    }
    let (a, b) = layer.ends(tau);
    let l = b - a;
    let tol = 1e-12 * l;
    if !(x >= a - tol && x <= b + tol) {
        return Err(Error::domain(format!("x = {x} outside the layer [{a}, {b}] at t = {t}")));
    }
    // The representation jumps to zero on the boundary itself; return the data.
    if (x - a).abs() <= tol {
        return Ok((layer.chi_m)(tau));
    }
    if (x - b).abs() <= tol {
        return Ok((layer.chi_p)(tau));
    }
    let h = tau_max / m as f64;
    let green = |xi: f64, d: f64| -> Result<(f64, f64)> {
        let k1 = periodic_kernel(x - xi, l, d)?;
        let k2 = periodic_kernel(x + xi - 2.0 * a, l, d)?;
        Ok((0.5 * (k1.value - k2.value), -0.5 * (k1.da + k2.da)))
    };
    let (a0, b0) = layer.ends(0.0);
    let spread = 6.0 * tau.sqrt();
    let mut pts = vec![a0, b0, x - spread, x, x + spread];
    pts.extend(layer.u0_breaks.iter().copied());
    pts.retain(|p| *p >= a0 && *p <= b0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut err = None;
    let initial = integrate_with_breaks(
        |xi| {
            let v = (layer.u0)(xi);
            if v == 0.0 {
                return 0.0;
            }
            match green(xi, tau) {
                Ok((gv, _)) => v * gv,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        &pts,
        1e-13,
        1e-11,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let grad = |values: &[f64], s: f64| -> f64 {
        // Linear between grid values, constant on the first step.
        let pos = s / h;
        let k = (pos.floor() as usize).min(m - 1);
        if k == 0 {
            return values[1];
        }
        let w = pos - k as f64;
        values[k] * (1.0 - w) + values[k + 1] * w
    };
    let boundary = sqrt_adaptive(
        |s| {
            let d = tau - s;
            let (ym, yp) = (layer.ym.eval(s), layer.yp.eval(s));
            let (cm, cp) = ((layer.chi_m)(s), (layer.chi_p)(s));
            let (gp, gxp) = green(yp, d)?;
            let (gm, gxm) = green(ym, d)?;
            let upper = (grad(&g.theta, s) + layer.dyp.eval(s) * cp) * gp - cp * gxp;
            let lower = (grad(&g.omega, s) - layer.dym.eval(s) * cm) * gm + cm * gxm;
            Ok(upper + lower)
        },
        tau,
    )?;
    Ok(initial + boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{strip_green, strip_green_dx, StripProblem};
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_basics() {
        let p = Polynomial::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.derivative().coeffs, vec![2.0, 6.0]);
        let r = p.rescaled(4.0);
        assert_relative_eq!(r.eval(8.0), p.eval(2.0), max_relative = 1e-15);
        let q = Polynomial::interpolate(&[0.0, 1.0, 3.0], &[1.0, 6.0, 34.0]);
        for (a, b) in q.coeffs.iter().zip(&[1.0, 2.0, 3.0]) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn boundary_examples() {
        let s = build_internal_boundaries(&|_| -1.0, &|_| 1.0, 4, 1, 1.0).unwrap();
        let want = [-0.5, 0.0, 0.5];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(s.boundary(i).coeffs, vec![*w, 0.0]);
        }
        let s = build_internal_boundaries(&|_| -1.0, &|t| 1.0 + t, 2, 1, 1.0).unwrap();
        let c = &s.coeffs[0];
        assert!(c[0].abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
        let crossing = build_internal_boundaries(&|_| 0.0, &|t| 1.0 - 2.0 * t, 3, 1, 1.0);
        assert!(matches!(crossing, Err(Error::BoundaryCrossing(_))));
    }

    #[test]
    fn higher_degree_uses_narrowest_time() {
        // Strip pinches at t = 0.5; a straight split would still be fine, but
        // the quadratic must reproduce the split exactly at the pinch.
        let lo = |t: f64| -1.0 + 0.8 * t * (1.0 - t) * 4.0 * 0.5;
        let hi = |t: f64| 1.0 - 0.8 * t * (1.0 - t) * 4.0 * 0.5;
        let s = build_internal_boundaries(&lo, &hi, 4, 2, 1.0).unwrap();
        let t = 0.5025125628140703; // nearest sample to the pinch on the 200-point grid
        let y1 = s.boundary(0).eval(t);
        assert_relative_eq!(y1, lo(t) + 0.25 * (hi(t) - lo(t)), max_relative = 1e-12);
        assert_eq!(s.coeffs[0].len(), 3);
    }

    #[test]
    fn kernel_set_examples() {
        let ym = Polynomial::constant(-1.0);
        let yp = Polynomial::constant(1.0);
        let k = git_kernel_set(0.7, 0.2, -1.0, &ym, &yp).unwrap();
        assert_eq!(k.upsilon0_minus, k.upsilon_minus - gaussian_term(0.0, 0.5).da);
        assert!(k.upsilon_minus.abs() < 1e-15);
        let moving = Polynomial::new(vec![-1.0, 0.3]);
        let k = git_kernel_set(0.7, 0.2, moving.eval(0.2), &moving, &yp).unwrap();
        let d = moving.eval(0.7) - moving.eval(0.2);
        assert_relative_eq!(k.upsilon0_minus, k.upsilon_minus - gaussian_term(d, 0.5).da, max_relative = 1e-12);
        assert!(git_kernel_set(0.2, 0.2, 0.0, &ym, &yp).is_err());
    }

    #[test]
    fn homogeneous_problem_gives_zeros() {
        let p = GitLayerProblem::new(Polynomial::new(vec![-1.0, 0.1]), Polynomial::new(vec![1.0, 0.0, 0.2]), 1.0, 20);
        let g = solve_volterra_single_layer(&p).unwrap();
        assert!(g.omega.iter().chain(&g.theta).all(|v| *v == 0.0));
        assert_eq!(git_field_single_layer(&p, &g, 0.2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn mirror_symmetry() {
        let u0: ScalarFn = Arc::new(|x: f64| 1.0 - x * x + 0.3 * (1.0 - x * x).powi(2));
        let chi: ScalarFn = Arc::new(|t: f64| 0.2 * t);
        let p = GitLayerProblem::new(Polynomial::new(vec![-1.0, -0.1]), Polynomial::new(vec![1.0, 0.1]), 1.0, 40)
            .with_initial(u0, vec![])
            .with_boundary_data(chi.clone(), chi)
            .with_sigma(0.7);
        let g = solve_volterra_single_layer(&p).unwrap();
        for (o, t) in g.omega.iter().zip(&g.theta).skip(1) {
            assert!((o - t).abs() <= 1e-10, "{o} {t}");
        }
    }

    fn exact_problem(m: usize) -> GitLayerProblem {
        // u = exp(x + sigma^2 t) solves u_t = sigma^2 u_xx.
        let sigma = 0.8;
        let s2 = sigma * sigma;
        let ym = Polynomial::new(vec![-1.0, 0.2]);
        let yp = Polynomial::new(vec![1.0, 0.0, 0.1]);
        let (ym2, yp2) = (ym.clone(), yp.clone());
        GitLayerProblem::new(ym, yp, 1.0, m)
            .with_sigma(sigma)
            .with_initial(Arc::new(f64::exp), vec![])
            .with_boundary_data(
                Arc::new(move |t| (ym2.eval(t) + s2 * t).exp()),
                Arc::new(move |t| (yp2.eval(t) + s2 * t).exp()),
            )
    }

    #[test]
    fn moving_ends_recover_exact_gradients() {
        let p = exact_problem(100);
        let g = solve_volterra_single_layer(&p).unwrap();
        let s2 = 0.64;
        for k in [25, 50, 100] {
            let t = g.grid[k];
            let om = -(p.y_minus.eval(t) + s2 * t).exp();
            let th = (p.y_plus.eval(t) + s2 * t).exp();
            assert!(((g.omega[k] - om) / om).abs() < 2e-3, "omega {k}: {} vs {om}", g.omega[k]);
            assert!(((g.theta[k] - th) / th).abs() < 2e-3, "theta {k}: {} vs {th}", g.theta[k]);
        }
        let u = git_field_single_layer(&p, &g, 0.3, 1.0).unwrap();
        let want = (0.3f64 + s2).exp();
        assert!(((u - want) / want).abs() < 0.01, "{u} vs {want}");
        assert_relative_eq!(
            git_field_single_layer(&p, &g, p.y_minus.eval(1.0), 1.0).unwrap(),
            (p.y_minus.eval(1.0) + s2).exp(),
            max_relative = 1e-14
        );
        assert!(git_field_single_layer(&p, &g, 5.0, 1.0).is_err());
    }

    #[test]
    fn first_order_convergence_and_residual_decay() {
        let s2 = 0.64;
        let mut errs = Vec::new();
        let mut residuals = Vec::new();
        for m in [25, 50, 100] {
            let p = exact_problem(m);
            let g = solve_volterra_single_layer(&p).unwrap();
            let om = -(p.y_minus.eval(1.0) + s2).exp();
            errs.push((g.omega[m] - om).abs());
            residuals.push(volterra_residual(&p, &g).unwrap());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 0.9, "{errs:?}");
        }
        assert!(residuals.windows(2).all(|w| w[1] < w[0]), "{residuals:?}");
    }

    #[test]
    fn refinement_check_passes_on_smooth_problem() {
        let mut p = exact_problem(20);
        p.check_refinement = true;
        assert!(solve_volterra_single_layer(&p).is_ok());
    }

    #[test]
    fn strip_green_gradients() {
        let (sigma, t0, t) = (0.5, 1e-3, 1.0);
        let start = StripProblem::new(-1.0, 1.0, sigma, 0.0, t0).unwrap();
        let end = StripProblem::new(-1.0, 1.0, sigma, 0.0, t).unwrap();
        let u0: ScalarFn = Arc::new(move |x| strip_green(&start, x).unwrap_or(0.0));
        let p = GitLayerProblem::new(Polynomial::constant(-1.0), Polynomial::constant(1.0), t - t0, 200)
            .with_sigma(sigma)
            .with_initial(u0, vec![-0.2, -0.05, 0.0, 0.05, 0.2]);
        let g = solve_volterra_single_layer(&p).unwrap();
        let om = -strip_green_dx(&end, -1.0).unwrap();
        let th = strip_green_dx(&end, 1.0).unwrap();
        assert!(((g.omega[200] - om) / om).abs() < 5e-3, "{} vs {om}", g.omega[200]);
        assert!(((g.theta[200] - th) / th).abs() < 5e-3, "{} vs {th}", g.theta[200]);
        let u = git_field_single_layer(&p, &g, 0.3, t - t0).unwrap();
        let want = strip_green(&end, 0.3).unwrap();
        assert!((u - want).abs() < 0.01 * strip_green(&end, 0.0).unwrap());
    }
}
