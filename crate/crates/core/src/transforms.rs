//! Changes of variables that turn pricing equations into (layered) heat
//! equations, plus the affine zero-coupon bond formula.
//!
//! Charts are plain data sampled at caller-chosen times. Each sample maps a
//! model state to the heat variable through `x = scale * state + shift` and
//! carries the value back with
//! `V = exp(slope * state + log_shift + inverse / state) * U`.

use crate::error::{Error, Result};
use crate::laplace::{invert_laplace, StehfestScheme};
use crate::layered::{GreensProblem, LaplaceImage, LayeredMedium};
use crate::quad::simpson;
use std::sync::Arc;

const OUTER_TOL: f64 = 1e-10;
const INNER_TOL: f64 = 1e-12;

/// Signed `int_a^b f`, propagating the first error raised by `f`.
fn integral(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut err = None;
    let v = simpson(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    ts: Vec<f64>,
    vs: Vec<f64>,
    cum: Vec<f64>,
}

/// Scalar function of time: a constant or linearly interpolated samples.
/// Sampled curves are held flat outside their range.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Constant(f64),
    Sampled(SampledCurve),
}

impl Default for Curve {
    fn default() -> Self {
        Curve::Constant(0.0)
    }
}

impl Curve {
    pub fn samples(ts: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if ts.len() < 2 || ts.len() != vs.len() {
            return Err(Error::domain("a sampled curve needs at least two (t, v) pairs of equal length"));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().chain(&vs).any(|v| !v.is_finite()) {
            return Err(Error::domain("sample times must be finite and strictly increasing"));
        }
        let mut cum = vec![0.0; ts.len()];
        for k in 1..ts.len() {
            cum[k] = cum[k - 1] + 0.5 * (ts[k] - ts[k - 1]) * (vs[k] + vs[k - 1]);
        }
        Ok(Curve::Sampled(SampledCurve { ts, vs, cum }))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Curve::Constant(c) => *c,
            Curve::Sampled(s) => {
                let n = s.ts.len();
                if t <= s.ts[0] {
                    return s.vs[0];
                }
                if t >= s.ts[n - 1] {
                    return s.vs[n - 1];
                }
                let k = s.ts.partition_point(|v| *v <= t);
                let w = (t - s.ts[k - 1]) / (s.ts[k] - s.ts[k - 1]);
                s.vs[k - 1] + w * (s.vs[k] - s.vs[k - 1])
            }
        }
    }

    /// Whether the samples span `[a, b]`.
    pub fn covers(&self, a: f64, b: f64) -> bool {
        match self {
            Curve::Constant(_) => true,
            Curve::Sampled(s) => s.ts[0] <= a && b <= s.ts[s.ts.len() - 1],
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Curve::Constant(c) => c * t,
            Curve::Sampled(s) => {
                let n = s.ts.len();
                if t <= s.ts[0] {
                    return s.vs[0] * (t - s.ts[0]);
                }
                if t >= s.ts[n - 1] {
                    return s.cum[n - 1] + s.vs[n - 1] * (t - s.ts[n - 1]);
                }
                let k = s.ts.partition_point(|v| *v <= t);
                let v = self.eval(t);
                s.cum[k - 1] + 0.5 * (t - s.ts[k - 1]) * (v + s.vs[k - 1])
            }
        }
    }

    /// Exact signed integral of the interpolant.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Smallest value on `[a, b]`; attained at an end or a sample.
    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        match self {
            Curve::Constant(c) => *c,
            Curve::Sampled(s) => s
                .ts
                .iter()
                .zip(&s.vs)
                .filter(|(t, _)| **t > a && **t < b)
                .map(|(_, v)| *v)
                .fold(self.eval(a).min(self.eval(b)), f64::min),
        }
    }
}

/// Deterministic model curves. `theta` is the mean-reversion level and `s`
/// the rate shift; unset curves are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermStructure {
    pub r: Curve,
    pub q: Curve,
    pub kappa: Curve,
    pub theta: Curve,
    pub sigma: Curve,
    pub s: Curve,
}

impl TermStructure {
    fn check_horizon(&self, horizon: f64) -> Result<()> {
        let all = [
            ("r", &self.r),
            ("q", &self.q),
            ("kappa", &self.kappa),
            ("theta", &self.theta),
            ("sigma", &self.sigma),
            ("s", &self.s),
        ];
        for (name, c) in all {
            if !c.covers(0.0, horizon) {
                return Err(Error::domain(format!("curve {name} does not cover [0, {horizon}]")));
            }
        }
        Ok(())
    }

    fn check_sigma(&self, horizon: f64) -> Result<()> {
        if !(self.sigma.min_on(0.0, horizon) > 0.0) {
            return Err(Error::domain("sigma must be positive on the horizon"));
        }
        Ok(())
    }
}

fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain("horizon must be positive"));
    }
    if times.is_empty() {
        return Err(Error::domain("no sample times"));
    }
    if times.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
        return Err(Error::domain(format!("sample times must lie in [0, {horizon}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartSample {
    pub t: f64,
    pub tau: f64,
    pub x_scale: f64,
    pub x_shift: f64,
    pub log_slope: f64,
    pub log_shift: f64,
    pub log_inverse: f64,
}

impl ChartSample {
    fn plain(t: f64, tau: f64) -> Self {
        Self { t, tau, x_scale: 1.0, x_shift: 0.0, log_slope: 0.0, log_shift: 0.0, log_inverse: 0.0 }
    }

    pub fn x_of_state(&self, state: f64) -> f64 {
        self.x_scale * state + self.x_shift
    }

    pub fn state_of_x(&self, x: f64) -> f64 {
        (x - self.x_shift) / self.x_scale
    }

    pub fn multiplier(&self, state: f64) -> f64 {
        let mut e = self.log_slope * state + self.log_shift;
        if self.log_inverse != 0.0 {
            e += self.log_inverse / state;
        }
        e.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatChart {
    pub samples: Vec<ChartSample>,
    /// The heat clock differs between layers.
    pub per_layer_clock: bool,
}

/// Dupire chart for one variance bucket: `x = K exp(-int_0^T (r - q))`,
/// `tau = 1/2 int_0^T v(s) exp(-2 int_0^s (r - q)) ds`, `P = exp(-int_0^T q) U`.
pub fn dupire_to_heat(ts: &TermStructure, variance: &Curve, times: &[f64]) -> Result<HeatChart> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    check_times(times, horizon.max(f64::MIN_POSITIVE))?;
    ts.check_horizon(horizon)?;
    if !variance.covers(0.0, horizon) {
        return Err(Error::domain("variance curve does not cover the horizon"));
    }
    if !(variance.min_on(0.0, horizon) > 0.0) {
        return Err(Error::domain("variance must be positive"));
    }
    dupire_chart(ts, times, |s| variance.eval(s), true)
}

/// Dupire chart with one clock for all buckets,
/// `tau = 1/2 int_0^T exp(-2 int_0^s (r - q)) ds`; the bucket variances then
/// become the layer coefficients of `U_tau = v_i U_xx`.
pub fn dupire_shared_clock(ts: &TermStructure, times: &[f64]) -> Result<HeatChart> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    check_times(times, horizon.max(f64::MIN_POSITIVE))?;
    ts.check_horizon(horizon)?;
    dupire_chart(ts, times, |_| 1.0, false)
}

fn dupire_chart(ts: &TermStructure, times: &[f64], v: impl Fn(f64) -> f64, per_layer: bool) -> Result<HeatChart> {
    let drift = |s: f64| ts.r.integral(0.0, s) - ts.q.integral(0.0, s);
    let samples = times
        .iter()
        .map(|&t| {
            let tau = 0.5 * integral(|s| Ok(v(s) * (-2.0 * drift(s)).exp()), 0.0, t, OUTER_TOL)?;
            let mut c = ChartSample::plain(t, tau);
            c.x_scale = (-drift(t)).exp();
            c.log_shift = -ts.q.integral(0.0, t);
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatChart { samples, per_layer_clock: per_layer })
}

/// `U(tau, K)` for `U_tau = U_xx`, `U(0, x) = (x - K)^+`.
///
/// Since `U_xx` is the Green's function with source at the strike,
/// `U(tau, K) = int_0^tau G(s; K, K) ds`, inverted from `G^(lambda)/lambda`
/// on a homogeneous strip of half-width `half_width` cut into `layers` layers.
pub fn heat_call_at_strike(tau: f64, half_width: f64, layers: usize, scheme: &StehfestScheme) -> Result<f64> {
    if layers % 2 == 0 {
        return Err(Error::domain("use an odd layer count so the strike sits inside a layer"));
    }
    let medium = LayeredMedium::uniform(-half_width, half_width, layers, |_| 1.0)?;
    let problem = GreensProblem::new(medium, 0.0, tau)?;
    let mut err = None;
    let v = invert_laplace(
        |lambda| match LaplaceImage::solve(&problem, lambda).and_then(|img| img.value(0.0)) {
            Ok(g) => g / lambda,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        tau,
        scheme,
    );
    match err {
        Some(e) => Err(e),
        None => v,
    }
}

/// Constants of the BK change of variables; the defaults are `1, 0, 0, 0, 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BkConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for BkConstants {
    fn default() -> Self {
        Self { c1: 1.0, c2: 0.0, c3: 0.0, c4: 0.0, c5: 0.0 }
    }
}

/// `a_i + b_i z` matching `f(t, z)` at both ends of `[z_lo, z_hi]`.
pub fn chord_coefficients(f: &dyn Fn(f64, f64) -> f64, z_lo: f64, z_hi: f64, t: f64) -> Result<(f64, f64)> {
    if !(z_hi > z_lo) {
        return Err(Error::domain("chord needs z_lo < z_hi"));
    }
    let (f0, f1) = (f(t, z_lo), f(t, z_hi));
    let b = (f1 - f0) / (z_hi - z_lo);
    Ok((f0 - b * z_lo, b))
}

/// Layer chart of `0 = V_t + sigma^2/2 V_zz + kappa (theta - z) V_z - (s + a + b z) V`:
/// `tau = phi(t)`, `x = z psi(t) + rho(t)`, `V = exp(alpha z + beta) U`.
/// `tau` is the same for every layer.
pub fn bk_layer_chart(
    ts: &TermStructure,
    a: &dyn Fn(f64) -> f64,
    b: &dyn Fn(f64) -> f64,
    maturity: f64,
    times: &[f64],
) -> Result<HeatChart> {
    bk_layer_chart_with(ts, a, b, maturity, times, BkConstants::default())
}

pub fn bk_layer_chart_with(
    ts: &TermStructure,
    a: &dyn Fn(f64) -> f64,
    b: &dyn Fn(f64) -> f64,
    maturity: f64,
    times: &[f64],
    c: BkConstants,
) -> Result<HeatChart> {
    check_times(times, maturity)?;
    ts.check_horizon(maturity)?;
    let big_s = maturity;
    let kappa_int = |t: f64| ts.kappa.integral(big_s, t);
    let psi = |t: f64| c.c1 * kappa_int(t).exp();
    let alpha = |t: f64| -> Result<f64> {
        let p = psi(t);
        Ok(p * integral(|q| Ok(b(q) / psi(q)), big_s, t, INNER_TOL)? + c.c3 * p)
    };
    let samples = times
        .iter()
        .map(|&t| {
            let sig2 = |q: f64| ts.sigma.eval(q).powi(2);
            let kth = |q: f64| ts.kappa.eval(q) * ts.theta.eval(q);
            let phi = 0.5 * integral(|q| Ok(sig2(q) * psi(q).powi(2)), t, big_s, OUTER_TOL)? + c.c2;
            let al = alpha(t)?;
            let rho = -integral(|q| Ok((kth(q) + sig2(q) * alpha(q)?) * psi(q)), big_s, t, OUTER_TOL)? + c.c5;
            let beta = -0.5
                * integral(
                    |q| {
                        let aq = alpha(q)?;
                        Ok(aq * (2.0 * kth(q) + sig2(q) * aq))
                    },
                    big_s,
                    t,
                    OUTER_TOL,
                )?
                + ts.s.integral(big_s, t)
                + integral(|q| Ok(a(q)), big_s, t, OUTER_TOL)?
                + c.c4;
            Ok(ChartSample {
                t,
                tau: phi,
                x_scale: psi(t),
                x_shift: rho,
                log_slope: al,
                log_shift: beta,
                log_inverse: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatChart { samples, per_layer_clock: false })
}

/// `B(t, S) = exp(int_0^t kappa) int_S^t b(m) exp(-int_0^m kappa) dm`.
fn zcb_b(ts: &TermStructure, b: &dyn Fn(f64) -> f64, t: f64, maturity: f64, tol: f64) -> Result<f64> {
    let k = |m: f64| ts.kappa.integral(0.0, m);
    Ok(k(t).exp() * integral(|m| Ok(b(m) * (-k(m)).exp()), maturity, t, tol)?)
}

/// Affine zero-coupon bond price `A(t, S) exp(B(t, S) R e^z)`.
#[allow(clippy::too_many_arguments)]
pub fn bk_affine_zcb(
    ts: &TermStructure,
    a: &dyn Fn(f64) -> f64,
    b: &dyn Fn(f64) -> f64,
    rate_unit: f64,
    t: f64,
    maturity: f64,
    z: f64,
) -> Result<f64> {
    if t > maturity {
        return Err(Error::domain(format!("valuation time {t} is after maturity {maturity}")));
    }
    if t < 0.0 {
        return Err(Error::domain("valuation time must be non-negative"));
    }
    ts.check_horizon(maturity)?;
    if t == maturity {
        return Ok(1.0);
    }
    let big_b = zcb_b(ts, b, t, maturity, OUTER_TOL)?;
    let log_a = integral(
        |m| {
            let bm = zcb_b(ts, b, m, maturity, INNER_TOL)?;
            let (th, ka, sg) = (ts.theta.eval(m), ts.kappa.eval(m), ts.sigma.eval(m));
            Ok(a(m) + ts.s.eval(m) - 0.5 * bm * (2.0 * th * ka + bm * sg * sg))
        },
        maturity,
        t,
        OUTER_TOL,
    )?;
    Ok((log_a + big_b * rate_unit * z.exp()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerhulstSample {
    pub t: f64,
    pub a: f64,
    pub d: f64,
    pub f: f64,
    pub g: f64,
    /// Upper edge `a(t) / L(t)` of the `x` domain.
    pub y: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerhulstChart {
    pub chart: HeatChart,
    pub samples: Vec<VerhulstSample>,
    pub layer: usize,
    pub layers: usize,
}

/// Chart for layer `layer` (1-based) of `layers` in the Verhulst model.
///
/// The state is `x = a(t) / rbar`; the heat variable is `x - int_0^t g` and
/// the price is `C = exp(int_0^t s + d/x + int_0^t f/nu) U`, with
/// `nu = (y (layer - 1/2) / layers)^2` the squared midpoint of the layer on `[0, y]`.
/// `theta` in the term structure is the level `theta_bar` of the model; the
/// drift uses `theta_bar + sigma^2/2`.
#[allow(clippy::too_many_arguments)]
pub fn verhulst_chart(
    ts: &TermStructure,
    rate_unit: f64,
    layer: usize,
    layers: usize,
    barrier: &dyn Fn(f64) -> f64,
    horizon: f64,
    times: &[f64],
) -> Result<VerhulstChart> {
    if layers == 0 || !(1..=layers).contains(&layer) {
        return Err(Error::domain(format!("layer {layer} not in 1..={layers}")));
    }
    check_times(times, horizon)?;
    ts.check_horizon(horizon)?;
    ts.check_sigma(horizon)?;
    let theta_t = |m: f64| ts.theta.eval(m) + 0.5 * ts.sigma.eval(m).powi(2);
    let drift_int = |t: f64| -> Result<f64> { integral(|m| Ok(ts.kappa.eval(m) * theta_t(m)), 0.0, t, INNER_TOL) };
    let var_int = |t: f64| -> Result<f64> { integral(|m| Ok(ts.sigma.eval(m).powi(2)), 0.0, t, INNER_TOL) };
    let a_of = |t: f64| -> Result<f64> { Ok((drift_int(t)? - var_int(t)?).exp()) };
    let d_of = |t: f64| -> Result<f64> {
        let inner = integral(|y| Ok(drift_int(y)?.exp()), 0.0, t, INNER_TOL)?;
        Ok(rate_unit * (-var_int(t)?).exp() * inner)
    };
    let mid = (layer as f64 - 0.5) / layers as f64;
    let point = |t: f64| -> Result<VerhulstSample> {
        let l = barrier(t);
        if !(l > 0.0) {
            return Err(Error::domain(format!("barrier must be positive, got {l} at t = {t}")));
        }
        let (a, d) = (a_of(t)?, d_of(t)?);
        let (k, s2) = (ts.kappa.eval(t), ts.sigma.eval(t).powi(2));
        let y = a / l;
        Ok(VerhulstSample {
            t,
            a,
            d,
            f: 0.5 * d * (2.0 * a * k - d * s2),
            g: a * k - d * s2,
            y,
            nu: (y * mid).powi(2),
        })
    };
    let mut samples = Vec::with_capacity(times.len());
    let mut chart = Vec::with_capacity(times.len());
    for &t in times {
        let p = point(t)?;
        let tau = 0.5 * integral(|k| Ok(ts.sigma.eval(k).powi(2) * point(k)?.nu), t, horizon, OUTER_TOL)?;
        let g_int = integral(|k| Ok(point(k)?.g), 0.0, t, OUTER_TOL)?;
        let f_int = integral(|k| point(k).map(|p| p.f / p.nu), 0.0, t, OUTER_TOL)?;
        chart.push(ChartSample {
            t,
            tau,
            x_scale: 1.0,
            x_shift: -g_int,
            log_slope: 0.0,
            log_shift: ts.s.integral(0.0, t) + f_int,
            log_inverse: p.d,
        });
        samples.push(p);
    }
    Ok(VerhulstChart { chart: HeatChart { samples: chart, per_layer_clock: true }, samples, layer, layers })
}

/// Diffusion coefficient `Xi(x)` of a divergent-form equation.
#[derive(Clone)]
pub enum DiffusionProfile {
    Constant(f64),
    /// `Xi(x) = exp(-a x)`.
    ExpVolatility(f64),
    /// `Xi(x)^2 = exp(-a x)`.
    ExpVariance(f64),
    /// Linear interpolation of `(x, Xi)` samples.
    Sampled { xs: Vec<f64>, values: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for DiffusionProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "Constant({v})"),
            Self::ExpVolatility(a) => write!(f, "ExpVolatility({a})"),
            Self::ExpVariance(a) => write!(f, "ExpVariance({a})"),
            Self::Sampled { xs, .. } => write!(f, "Sampled({} points)", xs.len()),
            Self::Function(_) => write!(f, "Function"),
        }
    }
}

/// `z = c2 + c1 int_0^x Xi^{-2}` and its inverse, taking
/// `(Xi^2 U_x)_x` to `sigma^2(z) U_zz` with `sigma^2 = c1^2 / Xi^2`.
#[derive(Debug, Clone)]
pub struct DivergenceMap {
    profile: DiffusionProfile,
    c1: f64,
    c2: f64,
    /// Cumulative `int_0^{x_k} Xi^{-2}` at the samples of a sampled profile.
    nodes: Vec<f64>,
}

pub fn nondivergent_to_divergent(profile: DiffusionProfile, c1: f64, c2: f64) -> Result<DivergenceMap> {
    if !(c1 > 0.0 && c1.is_finite() && c2.is_finite()) {
        return Err(Error::domain("need c1 > 0 and finite c2"));
    }
    let mut nodes = Vec::new();
    match &profile {
        DiffusionProfile::Constant(v) if !(*v > 0.0) => return Err(Error::domain("Xi must be positive")),
        DiffusionProfile::ExpVolatility(a) | DiffusionProfile::ExpVariance(a) if *a == 0.0 || !a.is_finite() => {
            return Err(Error::domain("exponential profile needs a finite non-zero rate"))
        }
        DiffusionProfile::Sampled { xs, values } => {
            if xs.len() < 2 || xs.len() != values.len() || xs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::domain("sampled Xi needs increasing abscissas of matching length"));
            }
            if values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::domain("Xi must be positive"));
            }
            if !(xs[0] <= 0.0 && 0.0 <= xs[xs.len() - 1]) {
                return Err(Error::domain("sampled Xi must cover x = 0"));
            }
            // For linear Xi on [x0, x1], int dk / Xi^2 = (x1 - x0) / (Xi(x0) Xi(x1)).
            nodes = vec![0.0; xs.len()];
            for k in 1..xs.len() {
                nodes[k] = nodes[k - 1] + (xs[k] - xs[k - 1]) / (values[k] * values[k - 1]);
            }
            let zero = segment_integral(xs, values, &nodes, 0.0);
            nodes.iter_mut().for_each(|v| *v -= zero);
        }
        _ => {}
    }
    Ok(DivergenceMap { profile, c1, c2, nodes })
}

fn segment_of(xs: &[f64], x: f64) -> usize {
    xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1) - 1
}

fn segment_integral(xs: &[f64], values: &[f64], nodes: &[f64], x: f64) -> f64 {
    let k = segment_of(xs, x);
    let slope = (values[k + 1] - values[k]) / (xs[k + 1] - xs[k]);
    let xi = values[k] + slope * (x - xs[k]);
    nodes[k] + (x - xs[k]) / (values[k] * xi)
}

impl DivergenceMap {
    pub fn xi(&self, x: f64) -> Result<f64> {
        let v = match &self.profile {
            DiffusionProfile::Constant(v) => *v,
            DiffusionProfile::ExpVolatility(a) => (-a * x).exp(),
            DiffusionProfile::ExpVariance(a) => (-0.5 * a * x).exp(),
            DiffusionProfile::Sampled { xs, values } => {
                if !(x >= xs[0] && x <= xs[xs.len() - 1]) {
                    return Err(Error::domain(format!("x = {x} outside the sampled profile")));
                }
                crate::fd::interpolate(xs, values, x)
            }
            DiffusionProfile::Function(f) => f(x),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("Xi({x}) = {v} is not positive")));
        }
        Ok(v)
    }

    /// `int_0^x Xi^{-2}`.
    fn reduced(&self, x: f64) -> Result<f64> {
        match &self.profile {
            DiffusionProfile::Constant(v) => Ok(x / (v * v)),
            DiffusionProfile::ExpVolatility(a) => Ok((2.0 * a * x).exp_m1() / (2.0 * a)),
            DiffusionProfile::ExpVariance(a) => Ok((a * x).exp_m1() / a),
            DiffusionProfile::Sampled { xs, values } => {
                self.xi(x)?;
                Ok(segment_integral(xs, values, &self.nodes, x))
            }
            DiffusionProfile::Function(_) => integral(|k| Ok(self.xi(k)?.powi(-2)), 0.0, x, INNER_TOL),
        }
    }

    pub fn z_of_x(&self, x: f64) -> Result<f64> {
        Ok(self.c2 + self.c1 * self.reduced(x)?)
    }

    pub fn x_of_z(&self, z: f64) -> Result<f64> {
        let w = (z - self.c2) / self.c1;
        let log_arg = |k: f64| {
            if k * w > -1.0 {
                Ok((k * w).ln_1p() / k)
            } else {
                Err(Error::domain(format!("z = {z} outside the image of the map")))
            }
        };
        match &self.profile {
            DiffusionProfile::Constant(v) => Ok(w * v * v),
            DiffusionProfile::ExpVolatility(a) => log_arg(2.0 * a),
            DiffusionProfile::ExpVariance(a) => log_arg(*a),
            DiffusionProfile::Sampled { xs, values } => {
                let n = xs.len();
                if !(w >= self.nodes[0] && w <= self.nodes[n - 1]) {
                    return Err(Error::domain(format!("z = {z} outside the sampled range")));
                }
                let k = self.nodes.partition_point(|v| *v <= w).clamp(1, n - 1) - 1;
                let slope = (values[k + 1] - values[k]) / (xs[k + 1] - xs[k]);
                let dw = w - self.nodes[k];
                // Solve dw = h / (Xi_k (Xi_k + slope h)) for h.
                let h = dw * values[k] * values[k] / (1.0 - dw * values[k] * slope);
                Ok(xs[k] + h)
            }
            DiffusionProfile::Function(_) => self.invert_numeric(w),
        }
    }

    /// Safeguarded Newton on the monotone map `x -> int_0^x Xi^{-2}`.
    fn invert_numeric(&self, w: f64) -> Result<f64> {
        let mut step = 1.0;
        let (mut lo, mut hi) = (0.0, 0.0);
        if w > 0.0 {
            while self.reduced(hi)? < w {
                lo = hi;
                hi += step;
                step *= 2.0;
                if step > 1e12 {
                    return Err(Error::Numerical("cannot bracket the inverse".into()));
                }
            }
        } else {
            while self.reduced(lo)? > w {
                hi = lo;
                lo -= step;
                step *= 2.0;
                if step > 1e12 {
                    return Err(Error::Numerical("cannot bracket the inverse".into()));
                }
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.reduced(x)? - w;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - r * self.xi(x)?.powi(2);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::Numerical("inverse did not converge".into()))
    }

    pub fn sigma_sq_of_z(&self, z: f64) -> Result<f64> {
        let w = (z - self.c2) / self.c1;
        match &self.profile {
            DiffusionProfile::ExpVariance(a) => Ok(self.c1 * self.c1 * (1.0 + a * w)),
            DiffusionProfile::ExpVolatility(a) => Ok(self.c1 * self.c1 * (1.0 + 2.0 * a * w)),
            _ => Ok((self.c1 / self.xi(self.x_of_z(z)?)?).powi(2)),
        }
    }

    /// Images `z(y_i)` of layer boundaries.
    pub fn boundary_images(&self, ys: &[f64]) -> Result<Vec<f64>> {
        let zs = ys.iter().map(|&y| self.z_of_x(y)).collect::<Result<Vec<_>>>()?;
        if ys.windows(2).zip(zs.windows(2)).any(|(y, z)| (y[1] > y[0]) != (z[1] > z[0])) {
            return Err(Error::Numerical("boundary images are not monotone".into()));
        }
        Ok(zs)
    }
}
