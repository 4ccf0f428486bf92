//! Laplace-domain solver for the divergent heat equation
//! `u_t = (sigma^2(x) u_x)_x` with piecewise-constant `sigma`, zero Dirichlet
//! data at both ends and a unit Dirac source.
//!
//! At each Laplace node the unknown boundary values `g_1..g_{N-1}` solve a
//! symmetric, diagonally dominant tridiagonal system. Inside a layer the
//! image is a sinh interpolation of its end values, plus the layer Green's
//! function in the layer holding the source.

use crate::error::{Error, Result};
use crate::laplace::{invert_laplace_vec, StehfestScheme};

/// Ordered layer boundaries `y_0 < ... < y_N` with one `sigma` per layer.
///
/// Layer `i` (1-based) is `(y_{i-1}, y_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredMedium {
    boundaries: Vec<f64>,
    sigmas: Vec<f64>,
}

impl LayeredMedium {
    pub fn new(boundaries: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::domain("need at least two boundaries"));
        }
        if sigmas.len() != boundaries.len() - 1 {
            return Err(Error::domain(format!(
                "sigmas has {} entries but {} layers are defined",
                sigmas.len(),
                boundaries.len() - 1
            )));
        }
        if boundaries.iter().any(|y| !y.is_finite()) {
            return Err(Error::domain("boundaries must be finite"));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("boundaries must be strictly increasing"));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::domain(format!("sigma {s} must be positive")));
        }
        Ok(Self { boundaries, sigmas })
    }

    /// `n` equal layers on `[y0, yn]`; `sigma(i)` gives the coefficient of
    /// layer `i` in `1..=n`.
    pub fn uniform(y0: f64, yn: f64, n: usize, sigma: impl Fn(usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("need at least one layer"));
        }
        let b = (0..=n)
            .map(|i| if i == n { yn } else { y0 + (yn - y0) * i as f64 / n as f64 })
            .collect();
        Self::new(b, (1..=n).map(sigma).collect())
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn layer_count(&self) -> usize {
        self.sigmas.len()
    }

    pub fn left(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn right(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    /// Width `l_i` of layer `i` (1-based).
    pub fn width(&self, i: usize) -> f64 {
        self.boundaries[i] - self.boundaries[i - 1]
    }

    /// True when every layer carries the same coefficient.
    pub fn is_homogeneous(&self) -> bool {
        self.sigmas.iter().all(|s| *s == self.sigmas[0])
    }

    /// Layer index `i` with `y_{i-1} < x <= y_i`; `y_0` itself maps to layer 1.
    pub fn layer_of(&self, x: f64) -> Result<usize> {
        if !(x >= self.left() && x <= self.right()) {
            return Err(Error::domain(format!(
                "x = {x} outside [{}, {}]",
                self.left(),
                self.right()
            )));
        }
        let idx = self.boundaries.partition_point(|y| *y < x);
        Ok(idx.max(1))
    }
}

/// Unit Dirac source at `x0` released at time zero, observed at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensProblem {
    pub medium: LayeredMedium,
    pub x0: f64,
    pub t: f64,
}

impl GreensProblem {
    pub fn new(medium: LayeredMedium, x0: f64, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("horizon T = {t} must be positive")));
        }
        locate_source_layer(&medium, x0)?;
        Ok(Self { medium, x0, t })
    }

    pub fn source_layer(&self) -> usize {
        locate_source_layer(&self.medium, self.x0).expect("validated at construction")
    }
}

/// The layer `j` that holds the source, with `y_{j-1} < x0 < y_j`.
pub fn locate_source_layer(medium: &LayeredMedium, x0: f64) -> Result<usize> {
    if !(x0 > medium.left() && x0 < medium.right()) {
        return Err(Error::domain(format!(
            "source x0 = {x0} must lie strictly inside ({}, {})",
            medium.left(),
            medium.right()
        )));
    }
    let j = medium.layer_of(x0)?;
    if x0 == medium.boundaries[j] {
        return Err(Error::domain(format!(
            "source x0 = {x0} sits on internal boundary y_{j}; the source layer is ambiguous"
        )));
    }
    Ok(j)
}

/// Symmetric tridiagonal system at one Laplace node.
///
/// `offdiag` holds the actual matrix entries, which for the assembled
/// layer system are `-beta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub rhs: Vec<f64>,
    pub lambda: f64,
}

impl TridiagonalSystem {
    /// Coupling coefficients `beta_i = sigma_{i+1} / sinh(omega_{i+1} sqrt(lambda))`.
    pub fn beta(&self) -> Vec<f64> {
        self.offdiag.iter().map(|o| -o).collect()
    }

    pub fn densify(&self) -> Vec<Vec<f64>> {
        let n = self.diag.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.offdiag[i];
                m[i + 1][i] = self.offdiag[i];
            }
        }
        m
    }

    /// Smallest `D_i - |o_{i-1}| - |o_i|` over the rows.
    pub fn dominance_margin(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
                self.diag[i] - left - right
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-layer hyperbolic factors at one `lambda`, in overflow-safe form.
#[derive(Debug, Clone, Copy)]
struct LayerFactors {
    /// `sqrt(lambda) / sigma`
    k: f64,
    sigma: f64,
    /// `1 - exp(-2 k l)`
    one_minus_e2: f64,
    coth: f64,
    csch: f64,
}

impl LayerFactors {
    fn new(sigma: f64, width: f64, sqrt_lambda: f64) -> Self {
        let k = sqrt_lambda / sigma;
        let kl = k * width;
        let e = (-kl).exp();
        let one_minus_e2 = -(-2.0 * kl).exp_m1();
        Self {
            k,
            sigma,
            one_minus_e2,
            coth: (1.0 + e * e) / one_minus_e2,
            csch: 2.0 * e / one_minus_e2,
        }
    }

    /// `sinh(k p) / sinh(k l)` for `0 <= p <= l`, with `q = l - p`.
    fn sinh_ratio(&self, p: f64, q: f64) -> f64 {
        let kp = self.k * p;
        (-self.k * q).exp() * -(-2.0 * kp).exp_m1() / self.one_minus_e2
    }

    /// `cosh(k p) / sinh(k l)` for `0 <= p <= l`, with `q = l - p`.
    fn cosh_ratio(&self, p: f64, q: f64) -> f64 {
        let kp = self.k * p;
        (-self.k * q).exp() * (1.0 + (-2.0 * kp).exp()) / self.one_minus_e2
    }
}

/// `1 - e^2` for `e = exp(-arg)`, switching to `expm1` where it cancels.
#[inline]
fn one_minus_square(e: f64, arg: f64) -> f64 {
    if arg < 0.35 {
        -(-2.0 * arg).exp_m1()
    } else {
        1.0 - e * e
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda = {lambda} must be positive")));
    }
    Ok(())
}

fn layer_factors(medium: &LayeredMedium, lambda: f64) -> Vec<LayerFactors> {
    let s = lambda.sqrt();
    (1..=medium.layer_count())
        .map(|i| LayerFactors::new(medium.sigmas[i - 1], medium.width(i), s))
        .collect()
}

fn assemble_from(problem: &GreensProblem, lambda: f64, f: &[LayerFactors]) -> TridiagonalSystem {
    let medium = &problem.medium;
    let n = medium.layer_count();
    let diag: Vec<f64> = (0..n - 1)
        .map(|i| f[i].sigma * f[i].coth + f[i + 1].sigma * f[i + 1].coth)
        .collect();
    let offdiag: Vec<f64> = (1..n - 1).map(|i| -f[i].sigma * f[i].csch).collect();
    let mut rhs = vec![0.0; n - 1];
    let j = problem.source_layer();
    let (a, b) = (medium.boundaries[j - 1], medium.boundaries[j]);
    let src = &f[j - 1];
    let inv_sqrt = 1.0 / lambda.sqrt();
    // Row j-1 is boundary y_{j-1}, row j is y_j (1-based rows).
    if j >= 2 {
        rhs[j - 2] = inv_sqrt * src.sinh_ratio(b - problem.x0, problem.x0 - a);
    }
    if j < n {
        rhs[j - 1] = inv_sqrt * src.sinh_ratio(problem.x0 - a, b - problem.x0);
    }
    TridiagonalSystem { diag, offdiag, rhs, lambda }
}

/// Assembles the boundary-value system at Laplace node `lambda`.
pub fn assemble_system(problem: &GreensProblem, lambda: f64) -> Result<TridiagonalSystem> {
    check_lambda(lambda)?;
    if problem.medium.layer_count() < 2 {
        return Err(Error::domain("the system needs at least two layers"));
    }
    let f = layer_factors(&problem.medium, lambda);
    let sys = assemble_from(problem, lambda, &f);
    if sys.diag.iter().chain(&sys.offdiag).chain(&sys.rhs).any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite entry assembling the system at lambda = {lambda}"
        )));
    }
    Ok(sys)
}

/// Thomas elimination for a symmetric tridiagonal system.
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.diag.len();
    if sys.rhs.len() != n || sys.offdiag.len() + 1 != n.max(1) {
        return Err(Error::domain("inconsistent tridiagonal dimensions"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let margin = sys.dominance_margin();
    if !(margin > 0.0) {
        return Err(Error::Numerical(format!(
            "system at lambda = {} is not strictly diagonally dominant (margin {margin:e})",
            sys.lambda
        )));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = sys.diag[0];
    c[0] = if n > 1 { sys.offdiag[0] / denom } else { 0.0 };
    d[0] = sys.rhs[0] / denom;
    for i in 1..n {
        let o = sys.offdiag[i - 1];
        denom = sys.diag[i] - o * c[i - 1];
        c[i] = if i + 1 < n { sys.offdiag[i] / denom } else { 0.0 };
        d[i] = (sys.rhs[i] - o * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Which one-sided derivative to take at a layer boundary or at the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The Laplace image of the solution at one `lambda`, ready to evaluate.
pub struct LaplaceImage<'a> {
    problem: &'a GreensProblem,
    factors: Vec<LayerFactors>,
    /// Boundary values `g_0..g_N` with zero outer entries.
    g: Vec<f64>,
    source_layer: usize,
    lambda: f64,
}

impl<'a> LaplaceImage<'a> {
    /// Assembles and solves at `lambda`.
    pub fn solve(problem: &'a GreensProblem, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let factors = layer_factors(&problem.medium, lambda);
        let n = problem.medium.layer_count();
        let mut g = vec![0.0; n + 1];
        if n >= 2 {
            let sys = assemble_from(problem, lambda, &factors);
            let inner = solve_tridiagonal(&sys)?;
            g[1..n].copy_from_slice(&inner);
        }
        Ok(Self { problem, factors, g, source_layer: problem.source_layer(), lambda })
    }

    /// Wraps an externally computed internal-boundary vector.
    pub fn with_boundary_values(problem: &'a GreensProblem, lambda: f64, g: &[f64]) -> Result<Self> {
        check_lambda(lambda)?;
        let n = problem.medium.layer_count();
        if g.len() != n - 1 {
            return Err(Error::domain(format!(
                "expected {} internal boundary values, got {}",
                n - 1,
                g.len()
            )));
        }
        let mut full = vec![0.0; n + 1];
        full[1..n].copy_from_slice(g);
        Ok(Self {
            problem,
            factors: layer_factors(&problem.medium, lambda),
            g: full,
            source_layer: problem.source_layer(),
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Internal boundary values `g_1..g_{N-1}`.
    pub fn boundary_values(&self) -> &[f64] {
        let n = self.g.len() - 1;
        &self.g[1..n]
    }

    fn value_in(&self, i: usize, x: f64) -> f64 {
        let y = &self.problem.medium.boundaries;
        let (a, b) = (y[i - 1], y[i]);
        let f = &self.factors[i - 1];
        let (gl, gr) = (self.g[i - 1], self.g[i]);
        let mut u = 0.0;
        if gl != 0.0 || gr != 0.0 {
            let (ka, kb) = (f.k * (x - a), f.k * (b - x));
            let (ea, eb) = ((-ka).exp(), (-kb).exp());
            u += (gl * ea * one_minus_square(eb, kb) + gr * eb * one_minus_square(ea, ka))
                / f.one_minus_e2;
        }
        if i == self.source_layer {
            u += self.source_term(x, None);
        }
        u
    }

    fn derivative_in(&self, i: usize, x: f64, side: Side) -> f64 {
        let y = &self.problem.medium.boundaries;
        let (a, b) = (y[i - 1], y[i]);
        let f = &self.factors[i - 1];
        let mut du = f.k * (self.g[i] * f.cosh_ratio(x - a, b - x) - self.g[i - 1] * f.cosh_ratio(b - x, x - a));
        if i == self.source_layer {
            du += self.source_term(x, Some(side));
        }
        du
    }

    /// Slope at the right (`at_right`) or left end of layer `i`, where the
    /// sinh interpolation reduces to `coth` and `csch` factors.
    fn end_derivative(&self, i: usize, at_right: bool) -> f64 {
        let f = &self.factors[i - 1];
        let (gl, gr) = (self.g[i - 1], self.g[i]);
        let mut du = if at_right {
            f.k * (gr * f.coth - gl * f.csch)
        } else {
            f.k * (gr * f.csch - gl * f.coth)
        };
        if i == self.source_layer {
            let y = &self.problem.medium.boundaries;
            let (x, side) = if at_right { (y[i], Side::Left) } else { (y[i - 1], Side::Right) };
            du += self.source_term(x, Some(side));
        }
        du
    }

    /// Layer Green's function of the source layer (or its x-derivative).
    fn source_term(&self, x: f64, derivative: Option<Side>) -> f64 {
        let j = self.source_layer;
        let y = &self.problem.medium.boundaries;
        let (a, b) = (y[j - 1], y[j]);
        let f = &self.factors[j - 1];
        let x0 = self.problem.x0;
        let (lo, hi) = if x < x0 { (x, x0) } else { (x0, x) };
        let p = f.k * (lo - a);
        let r = f.k * (b - hi);
        let pref = 0.5 * (-f.k * (hi - lo)).exp() / f.one_minus_e2;
        let sp = -(-2.0 * p).exp_m1();
        let sr = -(-2.0 * r).exp_m1();
        let cp = 1.0 + (-2.0 * p).exp();
        let cr = 1.0 + (-2.0 * r).exp();
        match derivative {
            None => pref * sp * sr / (f.sigma * self.lambda.sqrt()),
            Some(side) => {
                let left_of_source = x < x0 || (x == x0 && side == Side::Left);
                let s2 = f.sigma * f.sigma;
                if left_of_source {
                    pref * cp * sr / s2
                } else {
                    -pref * sp * cr / s2
                }
            }
        }
    }

    /// Image value at `x`.
    pub fn value(&self, x: f64) -> Result<f64> {
        let i = self.problem.medium.layer_of(x)?;
        Ok(self.value_in(i, x))
    }

    /// One-sided x-derivative of the image at `x`.
    ///
    /// At an internal boundary `Side::Left` uses the layer on the left.
    pub fn derivative(&self, x: f64, side: Side) -> Result<f64> {
        let medium = &self.problem.medium;
        let mut i = medium.layer_of(x)?;
        if side == Side::Right && i < medium.layer_count() && x == medium.boundaries[i] {
            i += 1;
        }
        Ok(self.derivative_in(i, x, side))
    }

    /// Flux mismatch `sigma_i^2 u_x(y_i^-) - sigma_{i+1}^2 u_x(y_i^+)` per internal boundary.
    pub fn flux_jumps(&self) -> Vec<f64> {
        let m = &self.problem.medium;
        (1..m.layer_count())
            .map(|i| {
                let sl = m.sigmas[i - 1];
                let sr = m.sigmas[i];
                sl * sl * self.end_derivative(i, true) - sr * sr * self.end_derivative(i + 1, false)
            })
            .collect()
    }
}

/// Image of the solution at a single point, given the boundary vector.
pub fn laplace_field(problem: &GreensProblem, lambda: f64, g: &[f64], x: f64) -> Result<f64> {
    LaplaceImage::with_boundary_values(problem, lambda, g)?.value(x)
}

/// Solution snapshot at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub time: f64,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub boundary_values: Vec<f64>,
    pub flux_jumps: Vec<f64>,
}

impl SolutionField {
    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Internal boundary values `f_i(T)`, i = 1..N-1.
pub fn boundary_values(problem: &GreensProblem, scheme: &StehfestScheme) -> Result<Vec<f64>> {
    if problem.medium.layer_count() < 2 {
        return Err(Error::domain("boundary values need at least two layers"));
    }
    invert_laplace_vec(
        |lambda| Ok(LaplaceImage::solve(problem, lambda)?.boundary_values().to_vec()),
        problem.t,
        scheme,
    )
}

/// Green's function `u(T, x)` at every abscissa in `xs`.
pub fn greens_function(
    problem: &GreensProblem,
    scheme: &StehfestScheme,
    xs: &[f64],
) -> Result<SolutionField> {
    let medium = &problem.medium;
    let layers: Vec<usize> = xs.iter().map(|&x| medium.layer_of(x)).collect::<Result<_>>()?;
    let n = medium.layer_count();
    let nx = xs.len();
    let out = invert_laplace_vec(
        |lambda| {
            let img = LaplaceImage::solve(problem, lambda)?;
            let mut v = Vec::with_capacity(nx + 2 * n);
            v.extend(xs.iter().zip(&layers).map(|(&x, &i)| img.value_in(i, x)));
            v.extend_from_slice(img.boundary_values());
            v.extend(img.flux_jumps());
            Ok(v)
        },
        problem.t,
        scheme,
    )?;
    let values = out[..nx].to_vec();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite value at x = {}", xs[bad])));
    }
    Ok(SolutionField {
        time: problem.t,
        xs: xs.to_vec(),
        values,
        boundary_values: out[nx..nx + n - 1].to_vec(),
        flux_jumps: out[nx + n - 1..].to_vec(),
    })
}

/// `count` equally spaced abscissas covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| if i + 1 == count { b } else { a + (b - a) * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::stehfest_weights;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn medium3() -> LayeredMedium {
        LayeredMedium::new(vec![-1.0, 0.0, 1.0], vec![0.5, 0.8]).unwrap()
    }

    #[test]
    fn locate_examples() {
        let m = medium3();
        assert_eq!(locate_source_layer(&m, 0.5).unwrap(), 2);
        assert_eq!(locate_source_layer(&m, -0.5).unwrap(), 1);
        assert!(locate_source_layer(&m, 0.0).is_err());
        assert!(locate_source_layer(&m, 1.0).is_err());
        assert!(locate_source_layer(&m, -3.0).is_err());
    }

    #[test]
    fn medium_validation() {
        assert!(LayeredMedium::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(LayeredMedium::new(vec![0.0, 0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(LayeredMedium::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn two_equal_layers_closed_form() {
        let (sigma, l, lambda) = (0.7, 1.3, 2.5f64);
        let m = LayeredMedium::new(vec![0.0, l, 2.0 * l], vec![sigma, sigma]).unwrap();
        let p = GreensProblem::new(m, 0.5 * l, 1.0).unwrap();
        let s = assemble_system(&p, lambda).unwrap();
        let w = l / sigma * lambda.sqrt();
        assert_relative_eq!(s.diag[0], 2.0 * sigma / w.tanh(), max_relative = 1e-14);
        assert_relative_eq!(
            s.rhs[0],
            (0.5 * w).sinh() / w.sinh() / lambda.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn assembled_entries_match_direct_hyperbolics() {
        let m = LayeredMedium::new(vec![-1.0, -0.2, 0.5, 1.5], vec![0.4, 0.9, 0.6]).unwrap();
        let p = GreensProblem::new(m.clone(), 0.1, 1.0).unwrap();
        let lambda = 3.0f64;
        let s = assemble_system(&p, lambda).unwrap();
        let om = |i: usize| m.width(i) / m.sigmas()[i - 1] * lambda.sqrt();
        let sg = |i: usize| m.sigmas()[i - 1];
        assert_relative_eq!(s.diag[0], sg(1) / om(1).tanh() + sg(2) / om(2).tanh(), max_relative = 1e-14);
        assert_relative_eq!(s.beta()[0], sg(2) / om(2).sinh(), max_relative = 1e-14);
        let g1 = (0.5 - 0.1) / 0.7;
        let g2 = 1.0 - g1;
        assert_relative_eq!(s.rhs[0], (g1 * om(2)).sinh() / om(2).sinh() / lambda.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(s.rhs[1], (g2 * om(2)).sinh() / om(2).sinh() / lambda.sqrt(), max_relative = 1e-13);
        let d = s.densify();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
    }

    #[test]
    fn assembly_rejects_single_layer_and_bad_lambda() {
        let m = LayeredMedium::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let p = GreensProblem::new(m, 0.5, 1.0).unwrap();
        assert!(assemble_system(&p, 1.0).is_err());
        let q = GreensProblem::new(medium3(), 0.3, 1.0).unwrap();
        assert!(assemble_system(&q, 0.0).is_err());
        assert!(assemble_system(&q, -1.0).is_err());
    }

    #[test]
    fn huge_lambda_stays_finite() {
        let m = LayeredMedium::uniform(-1.0, 1.0, 200, |_| 0.01).unwrap();
        let p = GreensProblem::new(m, 0.003, 1e-6).unwrap();
        let s = assemble_system(&p, 1e7).unwrap();
        assert!(s.dominance_margin() > 0.0);
        let img = LaplaceImage::solve(&p, 1e7).unwrap();
        assert!(img.value(0.003).unwrap().is_finite());
    }

    #[test]
    fn tridiagonal_examples() {
        let id = TridiagonalSystem { diag: vec![1.0; 4], offdiag: vec![0.0; 3], rhs: vec![1.0, 2.0, 3.0, 4.0], lambda: 1.0 };
        assert_eq!(solve_tridiagonal(&id).unwrap(), id.rhs);
        let two = TridiagonalSystem { diag: vec![3.0, 3.0], offdiag: vec![1.0], rhs: vec![1.0, 0.0], lambda: 1.0 };
        let g = solve_tridiagonal(&two).unwrap();
        assert_relative_eq!(g[0], 3.0 / 8.0, max_relative = 1e-15);
        assert_relative_eq!(g[1], -1.0 / 8.0, max_relative = 1e-15);
        let bad = TridiagonalSystem { diag: vec![1.0, 1.0], offdiag: vec![2.0], rhs: vec![1.0, 0.0], lambda: 1.0 };
        assert!(solve_tridiagonal(&bad).is_err());
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    proptest! {
        #[test]
        fn thomas_matches_dense(seed in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 0.1..2.0f64), 50)) {
            let offdiag: Vec<f64> = seed[..49].iter().map(|s| s.0).collect();
            let rhs: Vec<f64> = seed.iter().map(|s| s.1).collect();
            let diag: Vec<f64> = (0..50).map(|i| {
                let l = if i > 0 { offdiag[i - 1].abs() } else { 0.0 };
                let r = if i < 49 { offdiag[i].abs() } else { 0.0 };
                l + r + seed[i].2
            }).collect();
            let sys = TridiagonalSystem { diag, offdiag, rhs, lambda: 1.0 };
            let g = solve_tridiagonal(&sys).unwrap();
            let d = dense_solve(sys.densify(), sys.rhs.clone());
            for (a, b) in g.iter().zip(&d) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let dm = sys.densify();
            let norm = sys.rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..50 {
                let r: f64 = (0..50).map(|j| dm[i][j] * g[j]).sum::<f64>() - sys.rhs[i];
                prop_assert!(r.abs() <= 1e-12 * norm.max(1.0));
            }
        }

        #[test]
        fn gammas_sum_to_one(x0 in -0.99..0.99f64, lambda in 0.01..1e4f64) {
            prop_assume!(x0.abs() > 1e-6);
            let p = GreensProblem::new(medium3(), x0, 1.0).unwrap();
            let j = p.source_layer();
            let (a, b) = (p.medium.boundaries()[j - 1], p.medium.boundaries()[j]);
            let g1 = (b - x0) / (b - a);
            let g2 = (x0 - a) / (b - a);
            prop_assert!((g1 + g2 - 1.0).abs() < 1e-15);
            prop_assert!(assemble_system(&p, lambda).unwrap().dominance_margin() > 0.0);
        }

        #[test]
        fn laplace_flux_is_continuous(x0 in -0.95..0.95f64, lambda in 0.05..500.0f64) {
            prop_assume!((x0 - (-0.4)).abs() > 1e-6 && (x0 - 0.3).abs() > 1e-6);
            let m = LayeredMedium::new(vec![-1.0, -0.4, 0.3, 1.0], vec![0.3, 1.1, 0.6]).unwrap();
            let p = GreensProblem::new(m, x0, 1.0).unwrap();
            let img = LaplaceImage::solve(&p, lambda).unwrap();
            for j in img.flux_jumps() {
                prop_assert!(j.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn field_endpoint_values() {
        let p = GreensProblem::new(medium3(), 0.4, 1.0).unwrap();
        let img = LaplaceImage::solve(&p, 2.0).unwrap();
        let g = img.boundary_values().to_vec();
        assert_eq!(laplace_field(&p, 2.0, &g, -1.0).unwrap(), 0.0);
        assert_eq!(laplace_field(&p, 2.0, &g, 1.0).unwrap(), 0.0);
        assert_relative_eq!(laplace_field(&p, 2.0, &g, 0.0).unwrap(), g[0], max_relative = 1e-15);
        assert!(laplace_field(&p, 2.0, &g, 1.5).is_err());
    }

    #[test]
    fn source_derivative_matches_boundary_image() {
        // Source alone in a single layer: its slope at the left end is L(upsilon-).
        let (sigma, lambda) = (0.5, 7.0f64);
        let m = LayeredMedium::new(vec![-1.0, 1.0], vec![sigma]).unwrap();
        let p = GreensProblem::new(m, 0.3, 1.0).unwrap();
        let img = LaplaceImage::solve(&p, lambda).unwrap();
        let w = 2.0 / sigma * lambda.sqrt();
        let g1 = (1.0 - 0.3) / 2.0;
        let want = (g1 * w).sinh() / (sigma * sigma * w.sinh());
        assert_relative_eq!(img.derivative(-1.0, Side::Right).unwrap(), want, max_relative = 1e-13);
    }

    #[test]
    fn value_continuity_at_boundaries() {
        let m = LayeredMedium::new(vec![-1.0, -0.4, 0.3, 1.0], vec![0.3, 1.1, 0.6]).unwrap();
        let p = GreensProblem::new(m, 0.1, 1.0).unwrap();
        let img = LaplaceImage::solve(&p, 5.0).unwrap();
        for (i, &y) in [-0.4, 0.3].iter().enumerate() {
            let left = img.value_in(i + 1, y);
            let right = img.value_in(i + 2, y);
            assert!((left - right).abs() <= 1e-10);
        }
    }

    #[test]
    fn single_layer_matches_theta_formula() {
        let m = LayeredMedium::new(vec![-1.0, 1.0], vec![0.5]).unwrap();
        let p = GreensProblem::new(m, 1e-12, 1.0).unwrap();
        let s = stehfest_weights(16).unwrap();
        let f = greens_function(&p, &s, &[0.0]).unwrap();
        assert!((f.values[0] - 0.5436).abs() < 1e-4, "{}", f.values[0]);
        assert!(f.boundary_values.is_empty());
    }

    #[test]
    fn mirror_sources_give_mirror_boundary_values() {
        let m = LayeredMedium::uniform(-1.0, 1.0, 4, |_| 0.5).unwrap();
        let s = stehfest_weights(16).unwrap();
        let a = boundary_values(&GreensProblem::new(m.clone(), 0.3, 0.7).unwrap(), &s).unwrap();
        let b = boundary_values(&GreensProblem::new(m, -0.3, 0.7).unwrap(), &s).unwrap();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            // Inversion weights near 3.6e9 amplify rounding of the images.
            assert!((x - y).abs() < 1e-6 * x.abs(), "{x} {y}");
        }
    }

    #[test]
    fn long_horizon_drains() {
        let m = LayeredMedium::uniform(-1.0, 1.0, 5, |i| 0.3 + 0.1 * i as f64).unwrap();
        let s = stehfest_weights(16).unwrap();
        let early = boundary_values(&GreensProblem::new(m.clone(), 0.1, 0.5).unwrap(), &s).unwrap();
        let f = boundary_values(&GreensProblem::new(m, 0.1, 200.0).unwrap(), &s).unwrap();
        let scale = early.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // Exact values are ~e^{-20}; what remains is inversion noise.
        assert!(f.iter().all(|v| v.abs() < 1e-6 * scale), "{f:?}");
    }

    #[test]
    fn mass_bounded_by_one() {
        let m = LayeredMedium::new(vec![-1.0, -0.4, 0.3, 1.0], vec![0.3, 1.1, 0.6]).unwrap();
        let p = GreensProblem::new(m, 0.1, 0.2).unwrap();
        let s = stehfest_weights(16).unwrap();
        let xs = uniform_grid(-1.0, 1.0, 801);
        let f = greens_function(&p, &s, &xs).unwrap();
        let mass = crate::quad::trapezoid(&xs, &f.values);
        assert!(mass <= 1.0 && mass > 0.5, "{mass}");
    }
}
