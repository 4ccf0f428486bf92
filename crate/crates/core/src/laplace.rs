//! Gaver-Stehfest inversion and a quadrature-based forward transform.

use crate::error::{Error, Result};
use crate::quad;
use num_rational::Ratio;
use std::f64::consts::LN_2;

pub const DEFAULT_ORDER: usize = 16;
pub const MAX_ORDER: usize = 18;

/// Stehfest order together with its weights.
///
/// Weights are computed exactly as rationals and stored as an unevaluated
/// sum `hi + lo` of two doubles, so the alternating sum keeps its digits.
#[derive(Debug, Clone, PartialEq)]
pub struct StehfestScheme {
    m: usize,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl StehfestScheme {
    pub fn order(&self) -> usize {
        self.m
    }

    /// Weights rounded to double precision.
    pub fn weights(&self) -> Vec<f64> {
        self.hi.iter().zip(&self.lo).map(|(h, l)| h + l).collect()
    }

    /// Leading and trailing parts of each weight.
    pub fn split_weights(&self) -> (&[f64], &[f64]) {
        (&self.hi, &self.lo)
    }

    /// `(sum_k St_k, sum_k St_k / k)` evaluated in double-double arithmetic.
    pub fn identity_sums(&self) -> (f64, f64) {
        let mut zero = Compensated::default();
        let mut one = Compensated::default();
        for k in 0..self.m {
            let kf = (k + 1) as f64;
            zero.add_product(self.hi[k], self.lo[k], 1.0);
            let q = self.hi[k] / kf;
            let rem = (-q).mul_add(kf, self.hi[k]);
            one.add_product(q, 0.0, 1.0);
            one.add_product((rem + self.lo[k]) / kf, 0.0, 1.0);
        }
        (zero.value(), one.value())
    }

    /// Laplace nodes `k ln2 / T`, k = 1..m.
    pub fn nodes(&self, t: f64) -> Vec<f64> {
        let step = LN_2 / t;
        (1..=self.m).map(|k| k as f64 * step).collect()
    }
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

fn exact_weight(m: usize, k: usize) -> Ratio<i128> {
    let half = m / 2;
    let lo = k.div_ceil(2);
    let hi = k.min(half);
    let mut sum = Ratio::from_integer(0i128);
    for j in (lo..=hi).rev() {
        let num = (j as i128).pow(half as u32) * factorial(2 * j);
        let den = factorial(half - j)
            * factorial(j)
            * factorial(j - 1)
            * factorial(k - j)
            * factorial(2 * j - k);
        sum += Ratio::new(num, den);
    }
    if (k + half) % 2 == 1 {
        -sum
    } else {
        sum
    }
}

/// Splits an exact rational into `hi + lo` doubles.
fn to_double_double(r: Ratio<i128>) -> (f64, f64) {
    let (n, d) = (*r.numer(), *r.denom());
    let hi = n as f64 / d as f64;
    if hi == 0.0 {
        return (0.0, 0.0);
    }
    // hi = mant * 2^exp exactly.
    let bits = hi.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let mut mant = (bits & ((1u64 << 52) - 1)) as i128 | (1i128 << 52);
    if hi < 0.0 {
        mant = -mant;
    }
    let exp = exp_bits - 1075;
    let residual = if exp >= 0 {
        mant.checked_mul(1i128 << exp)
            .and_then(|h| h.checked_mul(d))
            .and_then(|hd| n.checked_sub(hd))
            .map(|num| num as f64 / d as f64)
    } else {
        let shift = (-exp) as u32;
        if shift >= 100 {
            None
        } else {
            let p = 1i128 << shift;
            let a = n.checked_mul(p);
            let b = mant.checked_mul(d);
            let den = d.checked_mul(p);
            match (a, b, den) {
                (Some(a), Some(b), Some(den)) => a.checked_sub(b).map(|x| x as f64 / den as f64),
                _ => None,
            }
        }
    };
    (hi, residual.unwrap_or(0.0))
}

/// Builds the order-`m` Stehfest scheme.
pub fn stehfest_weights(m: usize) -> Result<StehfestScheme> {
    if m % 2 == 1 || !(2..=MAX_ORDER).contains(&m) {
        return Err(Error::domain(format!(
            "Stehfest order must be even and in 2..={MAX_ORDER}, got {m}"
        )));
    }
    let (hi, lo) = (1..=m).map(|k| to_double_double(exact_weight(m, k))).unzip();
    Ok(StehfestScheme { m, hi, lo })
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated accumulator for `sum (hi_k + lo_k) * f_k`.
#[derive(Clone, Copy, Default)]
struct Compensated {
    s: f64,
    c: f64,
}

impl Compensated {
    fn add_product(&mut self, hi: f64, lo: f64, f: f64) {
        let p = hi * f;
        let e = hi.mul_add(f, -p);
        let (s, t) = two_sum(self.s, p);
        self.s = s;
        self.c += t + e + lo * f;
    }

    fn value(self) -> f64 {
        self.s + self.c
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("inversion time must be positive, got {t}")));
    }
    Ok(())
}

/// `Lambda * sum_k St_k F(k Lambda)` with `Lambda = ln2 / T`.
pub fn invert_laplace<F: FnMut(f64) -> f64>(
    mut f: F,
    t: f64,
    scheme: &StehfestScheme,
) -> Result<f64> {
    check_time(t)?;
    let step = LN_2 / t;
    let mut acc = Compensated::default();
    for k in 0..scheme.m {
        let lambda = (k + 1) as f64 * step;
        let v = f(lambda);
        if !v.is_finite() {
            return Err(Error::NonFiniteImage { lambda });
        }
        acc.add_product(scheme.hi[k], scheme.lo[k], v);
    }
    Ok(step * acc.value())
}

/// Componentwise inversion of a vector-valued image.
pub fn invert_laplace_vec<F>(mut f: F, t: f64, scheme: &StehfestScheme) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    check_time(t)?;
    let step = LN_2 / t;
    let mut acc: Vec<Compensated> = Vec::new();
    for k in 0..scheme.m {
        let lambda = (k + 1) as f64 * step;
        let v = f(lambda)?;
        if acc.is_empty() {
            acc = vec![Compensated::default(); v.len()];
        }
        for (a, x) in acc.iter_mut().zip(&v) {
            if !x.is_finite() {
                return Err(Error::NonFiniteImage { lambda });
            }
            a.add_product(scheme.hi[k], scheme.lo[k], *x);
        }
    }
    Ok(acc.into_iter().map(|a| step * a.value()).collect())
}

/// `int_0^inf e^{-lambda t} f(t) dt` by adaptive quadrature.
///
/// Near zero the substitution `t = u^2` absorbs an integrable `t^{-1/2}`
/// singularity. The range is cut where `e^{-lambda t}` falls below `tol`;
/// passing `t_max` smaller than that cut is reported as an error.
pub fn forward_laplace_numeric<F: Fn(f64) -> f64>(
    f: F,
    lambda: f64,
    t_max: Option<f64>,
    tol: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::domain("tolerance must lie in (0, 1)"));
    }
    let cut = -tol.ln() / lambda;
    let t_max = match t_max {
        Some(t) if (-lambda * t).exp() >= tol => {
            return Err(Error::Quadrature(format!(
                "t_max = {t} leaves exp(-lambda t_max) above {tol:e}"
            )))
        }
        Some(t) => t,
        None => cut,
    };
    let t1 = (1.0 / lambda).min(t_max);
    let abs_tol = tol * 1e-3;
    let g = |t: f64| (-lambda * t).exp() * f(t);
    let mut total = quad::integrate(|u| 2.0 * u * g(u * u), 0.0, t1.sqrt(), abs_tol, 1e-13)?;
    let mut a = t1;
    while a < t_max {
        let b = (2.0 * a).min(t_max);
        total += quad::integrate(g, a, b, abs_tol, 1e-13)?;
        a = b;
    }
    Ok(total)
}
