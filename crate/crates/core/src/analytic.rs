//! Closed-form Green's function of `u_t = sigma^2 u_xx` on a strip with zero
//! Dirichlet ends,
//!
//! `U(T, x) = (1/(2l)) [theta_3(pi(x - x0)/(2l), q) - theta_3(pi(x + x0 - 2y0)/(2l), q)]`,
//! `q = exp(-pi^2 sigma^2 T / l^2)`.
//!
//! Evaluation goes through [`crate::special::periodic_kernel`], which sums the
//! same kernel as Gaussian images when `q` is close to one.

use crate::error::{Error, Result};
use crate::special::periodic_kernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripProblem {
    pub y0: f64,
    pub yn: f64,
    pub sigma: f64,
    pub x0: f64,
    pub t: f64,
}

impl StripProblem {
    pub fn new(y0: f64, yn: f64, sigma: f64, x0: f64, t: f64) -> Result<Self> {
        if !(y0 < x0 && x0 < yn) {
            return Err(Error::domain(format!("source {x0} not inside ({y0}, {yn})")));
        }
        if !(sigma > 0.0 && t > 0.0) {
            return Err(Error::domain("sigma and T must be positive"));
        }
        Ok(Self { y0, yn, sigma, x0, t })
    }

    pub fn width(&self) -> f64 {
        self.yn - self.y0
    }

    /// Nome of the theta representation.
    pub fn nome(&self) -> f64 {
        let l = self.width();
        (-std::f64::consts::PI.powi(2) * self.sigma * self.sigma * self.t / (l * l)).exp()
    }

    fn check(&self, x: f64) -> Result<()> {
        if !(x >= self.y0 && x <= self.yn) {
            return Err(Error::domain(format!("x = {x} outside [{}, {}]", self.y0, self.yn)));
        }
        Ok(())
    }
}

/// `U(T, x)` for the strip problem.
pub fn strip_green(p: &StripProblem, x: f64) -> Result<f64> {
    p.check(x)?;
    let (l, d) = (p.width(), p.sigma * p.sigma * p.t);
    let direct = periodic_kernel(x - p.x0, l, d)?;
    let image = periodic_kernel(x + p.x0 - 2.0 * p.y0, l, d)?;
    Ok(0.5 * (direct.value - image.value))
}

/// `dU/dx (T, x)`.
pub fn strip_green_dx(p: &StripProblem, x: f64) -> Result<f64> {
    p.check(x)?;
    let (l, d) = (p.width(), p.sigma * p.sigma * p.t);
    let direct = periodic_kernel(x - p.x0, l, d)?;
    let image = periodic_kernel(x + p.x0 - 2.0 * p.y0, l, d)?;
    Ok(0.5 * (direct.da - image.da))
}
