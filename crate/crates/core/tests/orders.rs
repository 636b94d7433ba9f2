use magnus_lq::models::ScalarBenchmark;
use magnus_lq::riccati::solve_riccati;
use magnus_lq::{Family, IntegratorSpec, Matrix, TimeGrid};

/// RK4 backward from p(t_f) = 0, independent of the library's integrators.
fn rk4(bench: &ScalarBenchmark, steps: usize) -> f64 {
    let h = bench.tf / steps as f64;
    let f = |t: f64, p: f64| -bench.q - 2.0 * (bench.a)(t) * p + bench.s * p * p;
    let mut p = 0.0;
    for k in (0..steps).rev() {
        let t = (k + 1) as f64 * h;
        let k1 = f(t, p);
        let k2 = f(t - 0.5 * h, p - 0.5 * h * k1);
        let k3 = f(t - 0.5 * h, p - 0.5 * h * k2);
        let k4 = f(t - h, p - h * k3);
        p -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    p
}

fn observed_order(family: Family) -> f64 {
    let bench = ScalarBenchmark::smooth(0.1).unwrap();
    let oracle = rk4(&bench, 100_000);
    let prob = bench.problem();
    let err = |steps: usize| {
        let grid = TimeGrid::new(0.0, bench.tf, steps).unwrap();
        let sol = solve_riccati(&prob, &grid, &IntegratorSpec::new(family), &Matrix::zeros(1, 1)).unwrap();
        (sol.p[0][(0, 0)] - oracle).abs()
    };
    (err(10) / err(20)).log2()
}

#[test]
fn second_order_families() {
    for f in [
        Family::Magnus2Midpoint,
        Family::Magnus2Trapezoidal,
        Family::RkImplicitMidpoint,
        Family::RkTrapezoidal,
    ] {
        let p = observed_order(f);
        assert!((p - 2.0).abs() < 0.3, "{f}: {p}");
    }
}

#[test]
fn fourth_order_families() {
    for f in [Family::Magnus4Gauss, Family::Magnus4Simpson] {
        let p = observed_order(f);
        assert!((p - 4.0).abs() < 0.3, "{f}: {p}");
    }
}

#[test]
fn first_order_families() {
    for f in [Family::EulerExplicit, Family::EulerImplicit] {
        let p = observed_order(f);
        assert!((p - 1.0).abs() < 0.3, "{f}: {p}");
    }
}

#[test]
fn constant_generator_is_exact_for_any_step() {
    // a = 0, q = s = 1: p(t) = tanh(t_f - t).
    for steps in [1, 2, 5, 20, 200] {
        let bench = ScalarBenchmark::constant(0.0, 10.0, 10.0 / steps as f64).unwrap();
        let grid = bench.grid_p().unwrap();
        for f in [Family::Magnus2Trapezoidal, Family::Magnus2Midpoint, Family::Magnus4Gauss, Family::Magnus4Simpson] {
            let sol = solve_riccati(&bench.problem(), &grid, &IntegratorSpec::new(f), &Matrix::zeros(1, 1)).unwrap();
            for (k, t) in grid.nodes().enumerate() {
                let err = (sol.p[k][(0, 0)] - (10.0 - t).tanh()).abs();
                assert!(err < 1e-10, "{f} steps={steps} t={t}: {err:e}");
            }
        }
    }
}
