use magnus_lq::riccati::{self, quadrature_positivity_class, solve_riccati};
use magnus_lq::models::ScalarBenchmark;
use magnus_lq::{Family, IntegratorSpec, LtvProblem, Matrix, PositivityClass, TimeGrid};
use proptest::prelude::*;

fn matrix(n: usize, m: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0..1.0f64, n * m).prop_map(move |v| Matrix::from_vec(n, m, v))
}

fn spd(n: usize) -> impl Strategy<Value = Matrix> {
    matrix(n, n).prop_map(move |l| &l * l.transpose() + Matrix::identity(n, n) * 0.05)
}

/// Smooth `A(t) = A0 + A1 sin(ω t)`, pd `Q` and `R`.
fn ltv() -> impl Strategy<Value = LtvProblem> {
    (1usize..=4)
        .prop_flat_map(|n| (Just(n), 1usize..=n))
        .prop_flat_map(|(n, m)| (matrix(n, n), matrix(n, n), 0.2..3.0f64, matrix(n, m), spd(n), spd(m)))
        .prop_map(|(a0, a1, w, b, q, r)| {
            let (n, m) = (a0.nrows(), b.ncols());
            LtvProblem::new(
                n,
                m,
                move |t| &a0 + &a1 * (w * t).sin(),
                move |_| b.clone(),
                move |_| q.clone(),
                move |_| r.clone(),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn second_order_magnus_keeps_p_positive(prob in ltv(), steps in prop::sample::select(vec![1usize, 10, 100])) {
        let grid = TimeGrid::new(0.0, 10.0, steps).unwrap();
        let n = prob.dim_state();
        for f in [Family::Magnus2Trapezoidal, Family::Magnus2Midpoint] {
            let sol = solve_riccati(&prob, &grid, &IntegratorSpec::new(f), &Matrix::zeros(n, n)).unwrap();
            prop_assert!(sol.min_eigenvalue() > -1e-9, "{f}: {}", sol.min_eigenvalue());
            prop_assert!(sol.raw_symmetry_defect.iter().all(|d| *d < 1e-6 * (1.0 + sol.p[0].norm())));
        }
    }
}

#[test]
fn positivity_class_follows_weight_signs() {
    for f in Family::ALL.into_iter().filter(|f| f.is_magnus()) {
        let spec = IntegratorSpec::new(f);
        let all_positive = spec.quadrature_weights().iter().all(|(_, b)| *b > 0.0);
        let class = quadrature_positivity_class(&spec).unwrap();
        assert_eq!(class == PositivityClass::Unconditional, all_positive, "{f}");
    }
}

#[test]
fn embedded_and_direct_trapezoidal_agree() {
    let prob = LtvProblem::new(
        2,
        1,
        |t| Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0 - 0.5 * t.sin(), -0.2]),
        |_| Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        |_| Matrix::identity(2, 2),
        |_| Matrix::from_element(1, 1, 0.5),
    );
    let grid = TimeGrid::new(0.0, 5.0, 500).unwrap();
    let pf = Matrix::zeros(2, 2);
    let embedded = riccati::riccati_backward(&prob, &grid, &IntegratorSpec::new(Family::Magnus2Trapezoidal), &pf).unwrap();
    let direct = riccati::riccati_backward_direct(&prob, &grid, &IntegratorSpec::new(Family::RkTrapezoidal), &pf).unwrap();
    let h = grid.h();
    for (a, b) in embedded.p.iter().zip(&direct.p) {
        assert!((a - b).amax() < 10.0 * h * h.max(1e-3) * (1.0 + a.amax()));
    }
}

#[test]
fn drift_switch_breaks_midpoint_not_magnus() {
    // a = 0 on the last step, a = -5 before it, h = 1/2.
    let bench = ScalarBenchmark::piecewise(0.5).unwrap();
    let grid = bench.grid_p().unwrap();
    let prob = bench.problem();
    let pf = Matrix::zeros(1, 1);
    for f in [Family::Magnus2Trapezoidal, Family::Magnus2Midpoint] {
        let sol = solve_riccati(&prob, &grid, &IntegratorSpec::new(f), &pf).unwrap();
        assert!(sol.min_eigenvalue() >= 0.0, "{f}");
    }
    let mid = solve_riccati(&prob, &grid, &IntegratorSpec::new(Family::RkImplicitMidpoint), &pf).unwrap();
    let last = grid.steps();
    assert!(mid.p[last - 2][(0, 0)] < 0.0, "{}", mid.p[last - 2][(0, 0)]);
}

#[test]
fn single_huge_step_stays_positive() {
    let prob = LtvProblem::constant(
        Matrix::from_row_slice(2, 2, &[3.0, 1.0, 0.0, -4.0]),
        Matrix::from_row_slice(2, 1, &[1.0, 0.5]),
        Matrix::identity(2, 2),
        Matrix::from_element(1, 1, 0.1),
    )
    .unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 1).unwrap();
    let sol = solve_riccati(&prob, &grid, &IntegratorSpec::new(Family::Magnus2Trapezoidal), &Matrix::zeros(2, 2)).unwrap();
    assert!(sol.min_eigenvalues[0] > 0.0);
    // Constant coefficients: the exact flow reaches the ARE root.
    let are = riccati::solve_are(&prob.a(0.0).unwrap(), &prob.s(0.0).unwrap(), &prob.q(0.0).unwrap()).unwrap();
    assert!((&sol.p[0] - &are).amax() < 1e-8 * (1.0 + are.amax()), "{} vs {}", sol.p[0], are);
}
