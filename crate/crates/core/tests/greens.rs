use multilayer::analytic::{strip_green, StripProblem};
use multilayer::laplace::stehfest_weights;
use multilayer::layered::{assemble_system, greens_function, uniform_grid, GreensProblem, LaplaceImage, LayeredMedium};

fn piecewise() -> LayeredMedium {
    LayeredMedium::new(vec![-1.0, -0.55, -0.1, 0.35, 0.7, 1.0], vec![0.5, 0.9, 0.35, 0.7, 1.2]).unwrap()
}

#[test]
fn swapping_source_and_observer() {
    let scheme = stehfest_weights(16).unwrap();
    let pts = [-0.8, -0.3, 0.05, 0.5, 0.85];
    let t = 0.4;
    let fields: Vec<_> = pts
        .iter()
        .map(|&x0| greens_function(&GreensProblem::new(piecewise(), x0, t).unwrap(), &scheme, &pts).unwrap())
        .collect();
    let peak = pts
        .iter()
        .map(|&x0| {
            let p = GreensProblem::new(piecewise(), x0, t).unwrap();
            greens_function(&p, &scheme, &uniform_grid(-1.0, 1.0, 401)).unwrap().peak()
        })
        .fold(0.0, f64::max);
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            let d = (fields[i].values[j] - fields[j].values[i]).abs();
            assert!(d <= 1e-6 * peak, "({}, {}): {d:e}", pts[i], pts[j]);
        }
    }
}

#[test]
fn flux_balance_in_laplace_and_time_domain() {
    let scheme = stehfest_weights(16).unwrap();
    let p = GreensProblem::new(piecewise(), 0.2, 0.7).unwrap();
    for lambda in scheme.nodes(p.t) {
        let img = LaplaceImage::solve(&p, lambda).unwrap();
        for j in img.flux_jumps() {
            assert!(j.abs() <= 1e-8, "lambda {lambda}: {j:e}");
        }
        assert!(assemble_system(&p, lambda).unwrap().dominance_margin() > 0.0);
    }
    let f = greens_function(&p, &scheme, &uniform_grid(-1.0, 1.0, 201)).unwrap();
    assert_eq!(f.flux_jumps.len(), 4);
    assert!(f.flux_jumps.iter().all(|j| j.abs() <= 1e-6 * f.peak()));
}

#[test]
fn equal_sigmas_reduce_to_the_strip() {
    let scheme = stehfest_weights(16).unwrap();
    let x0 = 1e-9;
    let p = GreensProblem::new(LayeredMedium::uniform(-1.0, 1.0, 20, |_| 0.5).unwrap(), x0, 1.0).unwrap();
    let strip = StripProblem::new(-1.0, 1.0, 0.5, x0, 1.0).unwrap();
    let xs = uniform_grid(-1.0, 1.0, 101);
    let f = greens_function(&p, &scheme, &xs).unwrap();
    let peak = f.peak();
    for (x, u) in xs.iter().zip(&f.values) {
        assert!((u - strip_green(&strip, *x).unwrap()).abs() <= 5e-3 * peak);
    }
}

#[test]
fn smooth_sigma_refines_at_second_order() {
    let scheme = stehfest_weights(16).unwrap();
    let sigma = |x: f64| 0.6 + 0.25 * (1.3 * x).sin();
    let xs = uniform_grid(-0.9, 0.9, 19);
    let solve = |n: usize| {
        let h = 2.0 / n as f64;
        let m = LayeredMedium::uniform(-1.0, 1.0, n, |i| sigma(-1.0 + (i as f64 - 0.5) * h)).unwrap();
        greens_function(&GreensProblem::new(m, 0.013, 0.5).unwrap(), &scheme, &xs).unwrap().values
    };
    let (a, b, c) = (solve(25), solve(50), solve(100));
    let gap = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let order = (gap(&a, &b) / gap(&b, &c)).log2();
    assert!(order >= 1.8, "observed order {order}");
}
