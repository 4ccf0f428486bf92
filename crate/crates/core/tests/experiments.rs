use multilayer::analytic::{strip_green, StripProblem};
use multilayer::fd::{fd_solve, interpolate, FdGrid};
use multilayer::laplace::{forward_laplace_numeric, stehfest_weights};
use multilayer::layered::{greens_function, uniform_grid, GreensProblem, LayeredMedium};
use multilayer::special::{eta_kernel, periodic_kernel, KernelArgs, Parity};

/// Max errors of the multilayer and FD solutions against the closed form,
/// relative to the peak.
fn strip_errors(sigma: f64, t: f64, n: usize) -> (f64, f64) {
    let x0 = 1e-9;
    let p = GreensProblem::new(LayeredMedium::uniform(-1.0, 1.0, n, |_| sigma).unwrap(), x0, t).unwrap();
    let a = StripProblem::new(-1.0, 1.0, sigma, x0, t).unwrap();
    let xs = uniform_grid(-1.0, 1.0, 101);
    let exact: Vec<f64> = xs.iter().map(|&x| strip_green(&a, x).unwrap()).collect();
    let peak = exact.iter().cloned().fold(0.0, f64::max);
    let ml = greens_function(&p, &stehfest_weights(16).unwrap(), &xs).unwrap();
    let ml_err = ml.values.iter().zip(&exact).map(|(u, e)| (u - e).abs()).fold(0.0, f64::max);
    let grid = FdGrid::for_problem(&p, 41, 40).unwrap();
    let fd = fd_solve(&p, &grid).unwrap();
    let fd_err = grid.xs.iter().zip(&fd.values).map(|(&x, u)| (u - strip_green(&a, x).unwrap()).abs()).fold(0.0, f64::max);
    (ml_err / peak, fd_err / peak)
}

#[test]
fn table1_against_closed_form_and_fd() {
    let (ml, fd) = strip_errors(0.5, 1.0, 20);
    assert!(ml <= 5e-3, "{ml}");
    assert!(fd > ml);
}

#[test]
fn small_horizon_favours_multilayer() {
    let (ml, fd) = strip_errors(0.3, 0.5, 40);
    assert!(ml <= 5e-3, "{ml}");
    assert!(fd >= 2.0 * ml, "{fd} vs {ml}");
}

fn table2(n: usize, nx: usize, mt: usize, count: usize) -> Vec<(f64, f64)> {
    let m = LayeredMedium::uniform(-1.0, 4.0, n, |i| (-(i as f64) / n as f64).exp()).unwrap();
    let p = GreensProblem::new(m, 1e-9, 2.0).unwrap();
    let xs = uniform_grid(-1.0, 4.0, count);
    let ml = greens_function(&p, &stehfest_weights(16).unwrap(), &xs).unwrap();
    let grid = FdGrid::for_problem(&p, nx, mt).unwrap();
    let fd = fd_solve(&p, &grid).unwrap();
    xs.iter()
        .zip(&ml.values)
        .map(|(&x, &u)| (x, 100.0 * (interpolate(&grid.xs, &fd.values, x) - u) / u.abs().max(f64::MIN_POSITIVE)))
        .collect()
}

#[test]
fn table2_coarse_and_fine() {
    let coarse = table2(50, 51, 100, 51);
    let right = coarse.iter().filter(|(x, _)| *x >= 2.75).map(|(_, d)| *d).fold(f64::MIN, f64::max);
    assert!(right >= 8.0, "{right}");
    let fine = table2(200, 201, 150, 201);
    for (x, d) in fine.iter().filter(|(x, _)| (0.25..=2.75).contains(x)) {
        assert!(d.abs() <= 1.0, "x = {x}: {d}%");
    }
}

#[test]
fn kernel_images_match_hyperbolic_forms() {
    for (l, sigma, p) in [(1.0, 1.0, 0.3), (0.5, 0.4, 0.1), (2.0, 1.5, 1.4)] {
        for lambda in [1.0f64, 10.0, 100.0] {
            let k = lambda.sqrt() / sigma;
            let lt = |f: &dyn Fn(f64) -> f64| forward_laplace_numeric(f, lambda, None, 1e-13).unwrap();
            let rel = |got: f64, want: f64| ((got - want) / want).abs();
            let even = lt(&|t| eta_kernel(KernelArgs { dt: t, l, sigma, parity: Parity::Even }).unwrap());
            assert!(rel(even, 1.0 / (sigma * lambda.sqrt() * (k * l).tanh())) <= 1e-7);
            let odd = lt(&|t| eta_kernel(KernelArgs { dt: t, l, sigma, parity: Parity::Odd }).unwrap());
            assert!(rel(odd, 1.0 / (sigma * lambda.sqrt() * (k * l).sinh())) <= 1e-7);
            let minus = lt(&|t| periodic_kernel(-p, l, sigma * sigma * t).unwrap().da);
            assert!(rel(minus, (k * (l - p)).sinh() / (sigma * sigma * (k * l).sinh())) <= 1e-7);
            let plus = lt(&|t| periodic_kernel(l - p, l, sigma * sigma * t).unwrap().da);
            assert!(rel(plus, -(k * p).sinh() / (sigma * sigma * (k * l).sinh())) <= 1e-7);
        }
    }
}
