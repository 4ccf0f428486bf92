//! Crank-Nicolson reference solver with four implicit Euler start-up steps.
//!
//! A homogeneous medium is stepped as `u_t = sigma^2 u_xx`. A layered medium
//! is stepped in the non-divergent form `u_t = Xi^2 u_xx + (Xi^2)' u_x`, where
//! the derivative of the coefficient is a train of node-centred spikes of
//! height `-sigma_i^2 delta(0)` at the right end of each layer, with
//! `delta(0) = 2 / (y_N - y_0)`.

use crate::error::{Error, Result};
use crate::layered::{GreensProblem, LayeredMedium, SolutionField};

const STARTUP_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    pub nx: usize,
    pub mt: usize,
    pub xs: Vec<f64>,
    pub dt: f64,
}

impl FdGrid {
    pub fn new(y0: f64, yn: f64, t: f64, nx: usize, mt: usize) -> Result<Self> {
        if nx < 5 {
            return Err(Error::domain(format!("need at least 5 nodes, got {nx}")));
        }
        if mt < STARTUP_STEPS + 1 {
            return Err(Error::domain(format!("need at least 5 time steps, got {mt}")));
        }
        if !(yn > y0 && t > 0.0) {
            return Err(Error::domain("grid needs y0 < yN and T > 0"));
        }
        Ok(Self {
            nx,
            mt,
            xs: crate::layered::uniform_grid(y0, yn, nx),
            dt: t / mt as f64,
        })
    }

    pub fn for_problem(problem: &GreensProblem, nx: usize, mt: usize) -> Result<Self> {
        Self::new(problem.medium.left(), problem.medium.right(), problem.t, nx, mt)
    }

    pub fn spacing(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    fn nearest(&self, x: f64) -> usize {
        let h = self.spacing();
        (((x - self.xs[0]) / h).round() as usize).min(self.nx - 1)
    }
}

/// Spatial operator coefficients: `sub_i u_{i-1} + mid_i u_i + sup_i u_{i+1}`.
struct Operator {
    sub: Vec<f64>,
    mid: Vec<f64>,
    sup: Vec<f64>,
}

fn operator(medium: &LayeredMedium, grid: &FdGrid) -> Result<Operator> {
    let n = grid.nx;
    let h = grid.spacing();
    let mut xi2 = vec![0.0; n];
    let mut drift = vec![0.0; n];
    if medium.is_homogeneous() {
        xi2.fill(medium.sigmas()[0].powi(2));
    } else {
        let min_width = (1..=medium.layer_count()).map(|i| medium.width(i)).fold(f64::INFINITY, f64::min);
        if h > min_width * (1.0 + 1e-9) {
            return Err(Error::domain(format!(
                "grid spacing {h} exceeds the thinnest layer {min_width}"
            )));
        }
        for (k, &x) in grid.xs.iter().enumerate() {
            let i = medium.layer_of(x.clamp(medium.left(), medium.right()))?;
            xi2[k] = medium.sigmas()[i - 1].powi(2);
        }
        let delta0 = 2.0 / (medium.right() - medium.left());
        let y = medium.boundaries();
        for i in 1..medium.layer_count() {
            let node = grid.nearest(y[i]);
            drift[node] -= medium.sigmas()[i - 1].powi(2) * delta0;
        }
    }
    let (mut sub, mut mid, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 1..n - 1 {
        let d = xi2[k] / (h * h);
        let c = drift[k] / (2.0 * h);
        sub[k] = d - c;
        mid[k] = -2.0 * d;
        sup[k] = d + c;
    }
    Ok(Operator { sub, mid, sup })
}

/// Solves a general tridiagonal system in place; `rhs` receives the solution.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], work: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut denom = diag[0];
    work[0] = sup[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * work[i - 1];
        if denom == 0.0 {
            return Err(Error::Numerical("singular time-step matrix".into()));
        }
        work[i] = sup[i] / denom;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= work[i] * rhs[i + 1];
    }
    Ok(())
}

/// Marches `u0` to `T`, calling `observe(step, u)` after every step.
pub fn fd_evolve(
    medium: &LayeredMedium,
    grid: &FdGrid,
    u0: &[f64],
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    if u0.len() != grid.nx {
        return Err(Error::domain("initial data length differs from the grid"));
    }
    let n = grid.nx;
    let op = operator(medium, grid)?;
    let mut u = u0.to_vec();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![1.0; n], vec![0.0; n]);
    let mut rhs = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut theta = f64::NAN;
    for step in 0..grid.mt {
        let th = if step < STARTUP_STEPS { 1.0 } else { 0.5 };
        if th != theta {
            theta = th;
            for k in 1..n - 1 {
                a[k] = -th * grid.dt * op.sub[k];
                b[k] = 1.0 - th * grid.dt * op.mid[k];
                c[k] = -th * grid.dt * op.sup[k];
            }
        }
        let ex = (1.0 - th) * grid.dt;
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        for k in 1..n - 1 {
            rhs[k] = u[k] + ex * (op.sub[k] * u[k - 1] + op.mid[k] * u[k] + op.sup[k] * u[k + 1]);
        }
        thomas(&a, &b, &c, &mut rhs, &mut work)?;
        std::mem::swap(&mut u, &mut rhs);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite values after step {}", step + 1)));
        }
        observe(step + 1, &u);
    }
    Ok(u)
}

/// Green's function by finite differences; the Dirac mass sits at the
/// nearest node as `1/dx`.
pub fn fd_solve(problem: &GreensProblem, grid: &FdGrid) -> Result<SolutionField> {
    let m = &problem.medium;
    if (grid.xs[0] - m.left()).abs() > 1e-12 || (grid.xs[grid.nx - 1] - m.right()).abs() > 1e-12 {
        return Err(Error::domain("grid does not span the medium"));
    }
    let mut u0 = vec![0.0; grid.nx];
    let k = grid.nearest(problem.x0);
    if k == 0 || k == grid.nx - 1 {
        return Err(Error::domain("grid too coarse to place the source off the boundary"));
    }
    u0[k] = 1.0 / grid.spacing();
    let values = fd_evolve(m, grid, &u0, |_, _| {})?;
    let boundary_values = m.boundaries()[1..m.layer_count()]
        .iter()
        .map(|&y| interpolate(&grid.xs, &values, y))
        .collect();
    Ok(SolutionField {
        time: problem.t,
        xs: grid.xs.clone(),
        values,
        boundary_values,
        flux_jumps: Vec::new(),
    })
}

/// Piecewise-linear interpolation on sorted abscissas.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|v| *v < x).clamp(1, xs.len() - 1);
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{strip_green, StripProblem};

    fn table1(nx: usize, mt: usize) -> (GreensProblem, FdGrid) {
        let m = LayeredMedium::uniform(-1.0, 1.0, 20, |_| 0.5).unwrap();
        let p = GreensProblem::new(m, 1e-9, 1.0).unwrap();
        let g = FdGrid::for_problem(&p, nx, mt).unwrap();
        (p, g)
    }

    #[test]
    fn grid_validation() {
        assert!(FdGrid::new(0.0, 1.0, 1.0, 4, 10).is_err());
        assert!(FdGrid::new(0.0, 1.0, 1.0, 10, 4).is_err());
        let m = LayeredMedium::uniform(-1.0, 1.0, 20, |i| 0.5 + 0.01 * i as f64).unwrap();
        let p = GreensProblem::new(m, 0.01, 1.0).unwrap();
        assert!(fd_solve(&p, &FdGrid::for_problem(&p, 11, 10).unwrap()).is_err());
    }

    #[test]
    fn coarse_grid_tracks_analytic() {
        let (p, g) = table1(41, 40);
        let f = fd_solve(&p, &g).unwrap();
        let a = StripProblem::new(-1.0, 1.0, 0.5, 1e-9, 1.0).unwrap();
        let peak = strip_green(&a, 0.0).unwrap();
        let err = g.xs.iter().zip(&f.values).map(|(&x, v)| (v - strip_green(&a, x).unwrap()).abs()).fold(0.0, f64::max);
        assert!(err / peak < 0.05, "{}", err / peak);
        assert_eq!(f.values[0], 0.0);
        assert_eq!(f.values[40], 0.0);
    }

    #[test]
    fn fine_grid_matches_analytic() {
        let (p, g) = table1(401, 400);
        let f = fd_solve(&p, &g).unwrap();
        let a = StripProblem::new(-1.0, 1.0, 0.5, 1e-9, 1.0).unwrap();
        let peak = strip_green(&a, 0.0).unwrap();
        let err = g.xs.iter().zip(&f.values).map(|(&x, v)| (v - strip_green(&a, x).unwrap()).abs()).fold(0.0, f64::max);
        assert!(err / peak <= 2e-3, "{}", err / peak);
    }

    #[test]
    fn boundary_nodes_stay_zero_and_mass_decays() {
        let (p, g) = table1(41, 40);
        let mut u0 = vec![0.0; 41];
        u0[20] = 1.0 / g.spacing();
        let h = g.spacing();
        let mut last = 1.0 + 1e-12;
        let peak0 = 1.0 / h;
        fd_evolve(&p.medium, &g, &u0, |_, u| {
            assert_eq!(u[0], 0.0);
            assert_eq!(u[40], 0.0);
            let mass: f64 = u.iter().sum::<f64>() * h;
            assert!(mass <= last + 1e-12);
            last = mass;
            assert!(u.iter().all(|v| v.abs() <= peak0));
        })
        .unwrap();
    }

    fn gaussian_run(nx: usize) -> Vec<f64> {
        let m = LayeredMedium::new(vec![-1.0, 1.0], vec![0.5]).unwrap();
        let g = FdGrid::new(-1.0, 1.0, 0.1, nx, 4 * (nx - 1)).unwrap();
        let u0: Vec<f64> = g.xs.iter().map(|x| (-(x / 0.2).powi(2)).exp()).collect();
        fd_evolve(&m, &g, &u0, |_, _| {}).unwrap()
    }

    #[test]
    fn second_order_in_space() {
        let (a, b, c) = (gaussian_run(51), gaussian_run(101), gaussian_run(201));
        let e1 = (0..51).map(|i| (a[i] - b[2 * i]).abs()).fold(0.0, f64::max);
        let e2 = (0..101).map(|i| (b[i] - c[2 * i]).abs()).fold(0.0, f64::max);
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "{order}");
    }

    #[test]
    fn interpolation_is_linear() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 2.0, 6.0];
        assert_eq!(interpolate(&xs, &ys, 1.5), 4.0);
        assert_eq!(interpolate(&xs, &ys, 0.0), 0.0);
    }
}
