//! Jacobi theta function and the periodic heat kernels built on it.
//!
//! The layer kernels have two convergent forms: an image (Gaussian) sum
//! that converges fast for short elapsed times and a theta series that
//! converges fast for long ones. They meet at nome `e^{-pi}`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const REL_STOP: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaArgs {
    pub z: f64,
    pub q: f64,
}

impl ThetaArgs {
    pub fn new(z: f64, q: f64) -> Self {
        Self { z, q }
    }

    fn check(&self) -> Result<()> {
        if !self.z.is_finite() || !self.q.is_finite() {
            return Err(Error::domain("theta arguments must be finite"));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(Error::domain(format!("nome q = {} outside [0, 1)", self.q)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelArgs {
    pub dt: f64,
    pub l: f64,
    pub sigma: f64,
    pub parity: Parity,
}

/// Sums `sum_{n>=1} w(n) q^{n^2} trig(2nz)` with the shared stopping rule.
fn theta_series(args: ThetaArgs, weight: impl Fn(f64) -> f64, trig: fn(f64) -> f64) -> f64 {
    let ThetaArgs { z, q } = args;
    if q == 0.0 {
        return 0.0;
    }
    let lq = q.ln();
    let mut sum = 0.0;
    let mut scale = 0.0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let mag = weight(nf) * (nf * nf * lq).exp();
        sum += mag * trig(2.0 * nf * z);
        scale += mag;
        // Once the envelope is decreasing the next term bounds the tail.
        let next = weight(nf + 1.0) * ((nf + 1.0) * (nf + 1.0) * lq).exp();
        if next < REL_STOP * scale.max(1.0) && next < mag {
            break;
        }
    }
    sum
}

/// `theta_3(z, q) = 1 + 2 sum q^{n^2} cos(2nz)`.
pub fn theta3(args: ThetaArgs) -> Result<f64> {
    args.check()?;
    if args.q == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 + 2.0 * theta_series(args, |_| 1.0, f64::cos))
}

/// First derivative of [`theta3`] in `z`.
pub fn theta3_dz(args: ThetaArgs) -> Result<f64> {
    args.check()?;
    Ok(-4.0 * theta_series(args, |n| n, f64::sin))
}

/// Second derivative of [`theta3`] in `z`.
pub fn theta3_dzz(args: ThetaArgs) -> Result<f64> {
    args.check()?;
    Ok(-8.0 * theta_series(args, |n| n * n, f64::cos))
}

/// Value and first two derivatives in `a` of the `2l`-periodic heat kernel
///
/// `E(a, D) = (pi D)^{-1/2} sum_n exp(-(a + 2nl)^2 / (4D))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeriodicSum {
    pub value: f64,
    pub da: f64,
    pub daa: f64,
}

impl std::ops::Sub for PeriodicSum {
    type Output = PeriodicSum;
    fn sub(self, o: PeriodicSum) -> PeriodicSum {
        PeriodicSum {
            value: self.value - o.value,
            da: self.da - o.da,
            daa: self.daa - o.daa,
        }
    }
}

/// Which series evaluates the periodic kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Images,
    Theta,
}

/// Heat-time threshold where both series share the nome `e^{-pi}`.
pub fn switch_time(l: f64) -> f64 {
    l * l / PI
}

pub fn preferred_representation(l: f64, heat_time: f64) -> Representation {
    if heat_time < switch_time(l) {
        Representation::Images
    } else {
        Representation::Theta
    }
}

/// The single Gaussian `n = 0` image and its derivatives.
pub fn gaussian_term(a: f64, heat_time: f64) -> PeriodicSum {
    let d = heat_time;
    let g = (-a * a / (4.0 * d)).exp() / (PI * d).sqrt();
    let s = a / (2.0 * d);
    PeriodicSum {
        value: g,
        da: -s * g,
        daa: (s * s - 0.5 / d) * g,
    }
}

fn check_kernel(l: f64, heat_time: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::domain(format!("layer width {l} must be positive")));
    }
    if !(heat_time > 0.0 && heat_time.is_finite()) {
        return Err(Error::domain(format!("elapsed time {heat_time} must be positive")));
    }
    Ok(())
}

/// Image-sum evaluation, optionally skipping the `n = 0` image.
pub fn periodic_images(a: f64, l: f64, heat_time: f64, skip_zero: bool) -> Result<PeriodicSum> {
    check_kernel(l, heat_time)?;
    let mut acc = PeriodicSum::default();
    let mut scale = 0.0_f64;
    let add = |n: i64, acc: &mut PeriodicSum, scale: &mut f64| -> f64 {
        if skip_zero && n == 0 {
            return f64::INFINITY;
        }
        let t = gaussian_term(a + 2.0 * n as f64 * l, heat_time);
        acc.value += t.value;
        acc.da += t.da;
        acc.daa += t.daa;
        let mag = t.value.abs() + t.da.abs() + t.daa.abs();
        *scale = scale.max(mag);
        mag
    };
    // Start at the image closest to the origin and walk outwards.
    let centre = (-a / (2.0 * l)).round() as i64;
    add(centre, &mut acc, &mut scale);
    let (mut up, mut down) = (true, true);
    for k in 1..MAX_TERMS as i64 {
        if up {
            let m = add(centre + k, &mut acc, &mut scale);
            up = !(m <= REL_STOP * scale || m == 0.0);
        }
        if down {
            let m = add(centre - k, &mut acc, &mut scale);
            down = !(m <= REL_STOP * scale || m == 0.0);
        }
        if !up && !down {
            break;
        }
    }
    Ok(acc)
}

/// Theta-series evaluation of the same kernel.
pub fn periodic_theta(a: f64, l: f64, heat_time: f64) -> Result<PeriodicSum> {
    check_kernel(l, heat_time)?;
    let args = ThetaArgs::new(PI * a / (2.0 * l), (-PI * PI * heat_time / (l * l)).exp());
    Ok(PeriodicSum {
        value: theta3(args)? / l,
        da: PI / (2.0 * l * l) * theta3_dz(args)?,
        daa: PI * PI / (4.0 * l * l * l) * theta3_dzz(args)?,
    })
}

/// Periodic kernel in whichever representation converges faster.
pub fn periodic_kernel(a: f64, l: f64, heat_time: f64) -> Result<PeriodicSum> {
    match preferred_representation(l, heat_time) {
        Representation::Images => periodic_images(a, l, heat_time, false),
        Representation::Theta => periodic_theta(a, l, heat_time),
    }
}

/// Periodic kernel with the `n = 0` Gaussian removed.
pub fn periodic_kernel_without_source(a: f64, l: f64, heat_time: f64) -> Result<PeriodicSum> {
    match preferred_representation(l, heat_time) {
        Representation::Images => periodic_images(a, l, heat_time, true),
        Representation::Theta => Ok(periodic_theta(a, l, heat_time)? - gaussian_term(a, heat_time)),
    }
}

/// Layer kernel `eta_even` or `eta_odd` in physical time.
pub fn eta_kernel(args: KernelArgs) -> Result<f64> {
    eta_kernel_with(args, None)
}

/// As [`eta_kernel`], optionally forcing one representation.
pub fn eta_kernel_with(args: KernelArgs, force: Option<Representation>) -> Result<f64> {
    let KernelArgs { dt, l, sigma, parity } = args;
    if !(dt > 0.0 && l > 0.0 && sigma > 0.0) {
        return Err(Error::domain(format!(
            "kernel needs dt, l, sigma > 0 (got {dt}, {l}, {sigma})"
        )));
    }
    let heat_time = sigma * sigma * dt;
    let a = match parity {
        Parity::Even => 0.0,
        Parity::Odd => l,
    };
    let rep = force.unwrap_or_else(|| preferred_representation(l, heat_time));
    let s = match rep {
        Representation::Images => periodic_images(a, l, heat_time, false)?,
        Representation::Theta => periodic_theta(a, l, heat_time)?,
    };
    Ok(s.value)
}
