use magnus_lq::models::{quadrotor_benchmark, LinearModel};
use magnus_lq::nonlinear::{solve_sdre, solve_taylor, solve_waveform, LoopOptions, NonlinearProblem, SdreStepper};
use magnus_lq::riccati::{are_residual, solve_are};
use magnus_lq::{numerics, propagation, riccati, Family, IntegratorSpec, Matrix, TimeGrid, Vector};

#[test]
fn magnus_loops_keep_p_positive_every_iteration() {
    let (model, grid, x0) = quadrotor_benchmark();
    let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
    for sol in [
        solve_waveform(&model, &grid, &x0, &spec, &LoopOptions::default()).unwrap(),
        solve_taylor(&model, &grid, &x0, &spec, &LoopOptions::default()).unwrap(),
    ] {
        assert!(sol.report.converged);
        assert!(sol.report.min_p_eigenvalue > -1e-9);
        assert_eq!(sol.report.residuals.len(), sol.report.iterations);
        assert!(*sol.report.residuals.last().unwrap() < 1e-3);
    }
}

#[test]
fn converged_taylor_run_is_a_fixed_point() {
    let (model, grid, x0) = quadrotor_benchmark();
    let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
    let first = solve_taylor(&model, &grid, &x0, &spec, &LoopOptions::default()).unwrap();
    let again = LoopOptions {
        initial_states: Some(first.trajectory.states.clone()),
        initial_controls: Some(first.trajectory.controls.clone()),
        ..LoopOptions::default()
    };
    let second = solve_taylor(&model, &grid, &x0, &spec, &again).unwrap();
    assert!(second.report.residuals[0] < 1e-3);
}

#[test]
fn explicit_euler_taylor_diverges() {
    let (model, grid, x0) = quadrotor_benchmark();
    let sol = solve_taylor(&model, &grid, &x0, &IntegratorSpec::new(Family::EulerExplicit), &LoopOptions::default()).unwrap();
    assert!(sol.report.diverged && !sol.report.converged);
    assert!(sol.cost().is_infinite());
}

#[test]
fn sdre_at_origin_stays_put() {
    let (model, grid, _) = quadrotor_benchmark();
    let sol = solve_sdre(&model, &grid, &Vector::zeros(6), SdreStepper::Implicit).unwrap();
    assert_eq!(sol.cost(), 0.0);
    assert!(sol.trajectory.states.iter().all(|x| x.norm() == 0.0));
}

#[test]
fn frozen_state_are_residual() {
    let (model, _, x0) = quadrotor_benchmark();
    let b = model.sdre_b(0.0, &x0);
    let r = model.r(0.0, &x0);
    let s = &b * numerics::solve(&r, &b.transpose()).unwrap();
    let a = model.sdre_a(0.0, &x0);
    let q = model.q(0.0, &x0);
    let p = solve_are(&a, &s, &q).unwrap();
    assert!(are_residual(&p, &a, &s, &q) <= 1e-8);
    assert!(numerics::symmetry_defect(&p) < 1e-12);
    assert!(numerics::min_eigenvalue(&p).unwrap() > 0.0);
}

#[test]
fn three_strategies_agree_on_linear_dynamics() {
    let model = LinearModel::new(
        Matrix::from_row_slice(3, 3, &[0.1, 1.0, 0.0, -0.5, 0.0, 1.0, 0.3, -0.2, -0.4]),
        Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
        Matrix::identity(3, 3),
        Matrix::identity(2, 2) * 0.5,
    )
    .unwrap();
    let grid = TimeGrid::new(0.0, 2.0, 200).unwrap();
    let x0 = Vector::from_vec(vec![1.0, -1.0, 0.5]);
    let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
    let lin = model.ltv();
    let rsol = riccati::solve_riccati(&lin, &grid, &spec, &Matrix::zeros(3, 3)).unwrap();
    let direct = propagation::state_forward(&lin, &rsol, &x0, &spec).unwrap();
    let wave = solve_waveform(&model, &grid, &x0, &spec, &LoopOptions::default()).unwrap();
    let taylor = solve_taylor(&model, &grid, &x0, &spec, &LoopOptions::default()).unwrap();
    for other in [&wave.trajectory, &taylor.trajectory] {
        assert!((other.final_state() - direct.final_state()).amax() < 1e-10);
    }
}
