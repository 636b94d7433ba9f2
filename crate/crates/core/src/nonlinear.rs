//! Linearization strategies for `Ẋ = f_A(t, X) + f_B(t, X, u)`: SDRE
//! stepping, waveform relaxation on the frozen-coefficient factorization,
//! and Taylor linearization with disturbance feedforward.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};
use crate::problem::{self, LtvProblem, TimeGrid, Trajectory};
use crate::propagation;
use crate::riccati::{self, Family, IntegratorSpec, RiccatiSolution};

/// Nonlinear control-affine-or-not dynamics with a state-dependent
/// factorization `f_A + f_B = A(t, X) X + B(t, X) u` and the Jacobians of
/// both fields.
pub trait NonlinearProblem: Send + Sync {
    fn dim_state(&self) -> usize;
    fn dim_control(&self) -> usize;
    fn f_a(&self, t: f64, x: &Vector) -> Vector;
    fn f_b(&self, t: f64, x: &Vector, u: &Vector) -> Vector;
    fn sdre_a(&self, t: f64, x: &Vector) -> Matrix;
    fn sdre_b(&self, t: f64, x: &Vector) -> Matrix;
    fn jac_x_fa(&self, t: f64, x: &Vector) -> Matrix;
    fn jac_x_fb(&self, t: f64, x: &Vector, u: &Vector) -> Matrix;
    fn jac_u_fb(&self, t: f64, x: &Vector, u: &Vector) -> Matrix;
    fn q(&self, t: f64, x: &Vector) -> Matrix;
    fn r(&self, t: f64, x: &Vector) -> Matrix;

    /// State admissibility; an infeasible iterate counts as divergence.
    fn feasible(&self, _t: f64, x: &Vector) -> bool {
        numerics::all_finite(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iterations: usize,
    /// `‖X^k - X^{k-1}‖₂` over all nodes and components, one per iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    /// Smallest eigenvalue of any `P_n` over all outer iterations.
    pub min_p_eigenvalue: f64,
    /// The error that ended a diverged run.
    pub failure: Option<Error>,
}

impl IterationReport {
    fn new() -> Self {
        IterationReport {
            iterations: 0,
            residuals: Vec::new(),
            converged: false,
            diverged: false,
            min_p_eigenvalue: f64::INFINITY,
            failure: None,
        }
    }
}

/// Outer-loop settings for [`solve_waveform`] and [`solve_taylor`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoopOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Family of the forward state pass; `None` picks the node-based
    /// counterpart of the Riccati family.
    pub state_family: Option<Family>,
    /// Initial state iterate; defaults to `(1 - t/t_f) X0`.
    pub initial_states: Option<Vec<Vector>>,
    /// Initial control iterate for the Taylor loop; defaults to zero.
    pub initial_controls: Option<Vec<Vector>>,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions {
            tol: 1e-3,
            max_iter: 50,
            state_family: None,
            initial_states: None,
            initial_controls: None,
        }
    }
}

/// Node-based forward family matching a Riccati family.
pub fn default_state_family(riccati: Family) -> Family {
    match riccati {
        f if f.is_magnus() => Family::Magnus2Trapezoidal,
        Family::RkImplicitMidpoint => Family::RkTrapezoidal,
        f => f,
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    /// Last iterate; `cost` is infinite when the run diverged.
    pub trajectory: Trajectory,
    pub report: IterationReport,
    /// Per-node smallest eigenvalue of `P` in the last completed pass.
    pub min_p_eigenvalues: Vec<f64>,
    /// Riccati samples of the last completed pass (absent for SDRE).
    pub riccati: Option<RiccatiSolution>,
}

impl NonlinearSolution {
    pub fn cost(&self) -> f64 {
        self.trajectory.cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdreStepper {
    Explicit,
    Implicit,
}

const SDRE_NEWTON_MAX_ITER: usize = 50;
const SDRE_NEWTON_TOL: f64 = 1e-11;

fn check_x0(prob: &dyn NonlinearProblem, x0: &Vector) -> Result<()> {
    if x0.len() != prob.dim_state() {
        return Err(Error::Shape {
            context: "initial state",
            expected: prob.dim_state().to_string(),
            got: x0.len().to_string(),
        });
    }
    if !numerics::all_finite(x0) {
        return Err(Error::NonFinite("initial state"));
    }
    Ok(())
}

fn nonlinear_cost(prob: &dyn NonlinearProblem, grid: &TimeGrid, states: &[Vector], controls: &[Vector]) -> Result<f64> {
    let values = problem::running_costs(grid, states, controls, |t, x| Ok((prob.q(t, x), prob.r(t, x))))?;
    Ok(problem::trapezoid(grid.h(), &values))
}

struct SdreNode {
    p: Matrix,
    s: Matrix,
}

fn sdre_node(prob: &dyn NonlinearProblem, t: f64, x: &Vector, seed: Option<&Matrix>) -> Result<SdreNode> {
    let a = prob.sdre_a(t, x);
    let b = prob.sdre_b(t, x);
    let r = prob.r(t, x);
    let s = numerics::symmetrize(&(&b * numerics::solve(&r, &b.transpose())?));
    let p = riccati::solve_are_seeded(&a, &s, &prob.q(t, x), seed)?;
    Ok(SdreNode { p, s })
}

/// `(A(t, y) - S(t, y) P(y)) y` with `P(y)` from the ARE at `y`.
fn sdre_field(prob: &dyn NonlinearProblem, t: f64, y: &Vector, seed: &Matrix) -> Result<Vector> {
    let node = sdre_node(prob, t, y, Some(seed))?;
    Ok((prob.sdre_a(t, y) - &node.s * &node.p) * y)
}

fn implicit_sdre_step(prob: &dyn NonlinearProblem, t1: f64, x: &Vector, h: f64, seed: &Matrix, node: usize) -> Result<Vector> {
    let n = x.len();
    let mut y = x + sdre_field(prob, t1, x, seed)? * h;
    for _ in 0..SDRE_NEWTON_MAX_ITER {
        let g = sdre_field(prob, t1, &y, seed)?;
        let residual = &y - x - &g * h;
        let mut jac = Matrix::identity(n, n);
        for j in 0..n {
            let delta = 1e-6 * y[j].abs().max(1.0);
            let mut plus = y.clone();
            let mut minus = y.clone();
            plus[j] += delta;
            minus[j] -= delta;
            let dg = (sdre_field(prob, t1, &plus, seed)? - sdre_field(prob, t1, &minus, seed)?) / (2.0 * delta);
            jac.column_mut(j).axpy(-h, &dg, 1.0);
        }
        let step = numerics::solve_vec(&jac, &residual)?;
        y -= &step;
        if !numerics::all_finite(&y) {
            return Err(Error::NonFinite("implicit SDRE step"));
        }
        if step.norm() <= SDRE_NEWTON_TOL * y.norm().max(1.0) {
            return Ok(y);
        }
    }
    Err(Error::NewtonFailed {
        node,
        iterations: SDRE_NEWTON_MAX_ITER,
    })
}

/// SDRE stepping: at each node `P` solves the ARE for the current state,
/// `u = -R⁻¹BᵀPX`, and the closed loop is advanced by one Euler step.
/// There are no outer iterations.
pub fn solve_sdre(
    prob: &dyn NonlinearProblem,
    grid: &TimeGrid,
    x0: &Vector,
    stepper: SdreStepper,
) -> Result<NonlinearSolution> {
    check_x0(prob, x0)?;
    let h = grid.h();
    let mut states = vec![x0.clone()];
    let mut controls = Vec::with_capacity(grid.len());
    let mut min_eigs = Vec::with_capacity(grid.len());
    let mut report = IterationReport::new();
    let mut seed: Option<Matrix> = None;

    let outcome = (|| -> Result<()> {
        for k in 0..grid.len() {
            let t = grid.node(k);
            let x = states[k].clone();
            let node = sdre_node(prob, t, &x, seed.as_ref())?;
            let gain = numerics::solve(&prob.r(t, &x), &prob.sdre_b(t, &x).transpose())?;
            controls.push(-(gain * (&node.p * &x)));
            min_eigs.push(numerics::min_eigenvalue(&node.p)?);
            if k + 1 < grid.len() {
                let next = match stepper {
                    SdreStepper::Explicit => &x + (prob.sdre_a(t, &x) - &node.s * &node.p) * &x * h,
                    SdreStepper::Implicit => implicit_sdre_step(prob, grid.node(k + 1), &x, h, &node.p, k + 1)?,
                };
                if !prob.feasible(grid.node(k + 1), &next) {
                    return Err(Error::NonFinite("state"));
                }
                states.push(next);
            }
            seed = Some(node.p);
        }
        Ok(())
    })();

    report.min_p_eigenvalue = min_eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let cost = match outcome {
        Ok(()) => {
            report.converged = true;
            nonlinear_cost(prob, grid, &states, &controls)?
        }
        Err(e) if e.is_divergence() => {
            report.diverged = true;
            report.failure = Some(e);
            f64::INFINITY
        }
        Err(e) => return Err(e),
    };
    Ok(NonlinearSolution {
        trajectory: Trajectory {
            grid: *grid,
            states,
            controls,
            cost,
        },
        report,
        min_p_eigenvalues: min_eigs,
        riccati: None,
    })
}

fn initial_guess(prob: &dyn NonlinearProblem, grid: &TimeGrid, x0: &Vector, opts: &LoopOptions) -> Result<(Vec<Vector>, Vec<Vector>)> {
    let states = match &opts.initial_states {
        Some(s) if s.len() != grid.len() => return Err(Error::GridMismatch("initial state guess")),
        Some(s) => s.clone(),
        None => {
            let span = grid.tf() - grid.t0();
            grid.nodes().map(|t| x0 * (1.0 - (t - grid.t0()) / span)).collect()
        }
    };
    let controls = match &opts.initial_controls {
        Some(u) if u.len() != grid.len() => return Err(Error::GridMismatch("initial control guess")),
        Some(u) => u.clone(),
        None => vec![Vector::zeros(prob.dim_control()); grid.len()],
    };
    Ok((states, controls))
}

struct Pass {
    trajectory: Trajectory,
    rsol: RiccatiSolution,
}

fn outer_loop<F>(
    prob: &dyn NonlinearProblem,
    grid: &TimeGrid,
    x0: &Vector,
    opts: &LoopOptions,
    mut pass: F,
) -> Result<NonlinearSolution>
where
    F: FnMut(&[Vector], &[Vector]) -> Result<Pass>,
{
    check_x0(prob, x0)?;
    let (mut xk, mut uk) = initial_guess(prob, grid, x0, opts)?;
    let mut report = IterationReport::new();
    let mut last: Option<Pass> = None;

    while report.iterations < opts.max_iter {
        let step = pass(&xk, &uk).and_then(|p| {
            let infeasible = p
                .trajectory
                .states
                .iter()
                .enumerate()
                .any(|(k, x)| !prob.feasible(grid.node(k), x));
            if infeasible || !p.trajectory.cost.is_finite() {
                Err(Error::NonFinite("state iterate"))
            } else {
                Ok(p)
            }
        });
        let p = match step {
            Ok(p) => p,
            Err(e) if e.is_divergence() => {
                report.iterations += 1;
                report.residuals.push(f64::INFINITY);
                report.diverged = true;
                report.failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        report.iterations += 1;
        report.min_p_eigenvalue = report.min_p_eigenvalue.min(p.rsol.min_eigenvalue());
        let residual = numerics::sequence_distance(&p.trajectory.states, &xk);
        report.residuals.push(residual);
        xk = p.trajectory.states.clone();
        uk = p.trajectory.controls.clone();
        last = Some(p);
        if residual < opts.tol {
            report.converged = true;
            break;
        }
    }

    let (trajectory, rsol) = match last {
        Some(p) => (p.trajectory, Some(p.rsol)),
        None => (
            Trajectory {
                grid: *grid,
                states: xk,
                controls: uk,
                cost: f64::INFINITY,
            },
            None,
        ),
    };
    let mut trajectory = trajectory;
    if report.diverged {
        trajectory.cost = f64::INFINITY;
    }
    let min_p_eigenvalues = rsol.as_ref().map(|r| r.min_eigenvalues.clone()).unwrap_or_default();
    Ok(NonlinearSolution {
        trajectory,
        report,
        min_p_eigenvalues,
        riccati: rsol,
    })
}

fn frozen_weights(prob: &dyn NonlinearProblem, grid: &TimeGrid, xk: &[Vector]) -> (Vec<Matrix>, Vec<Matrix>) {
    grid.nodes()
        .zip(xk)
        .map(|(t, x)| (prob.q(t, x), prob.r(t, x)))
        .unzip()
}

/// Waveform relaxation: freeze `A(t, X^k)`, `B(t, X^k)` along the previous
/// iterate, solve the LQ problem, repeat until the state iterates settle.
pub fn solve_waveform(
    prob: &dyn NonlinearProblem,
    grid: &TimeGrid,
    x0: &Vector,
    spec: &IntegratorSpec,
    opts: &LoopOptions,
) -> Result<NonlinearSolution> {
    let n = prob.dim_state();
    let state_spec = IntegratorSpec::new(opts.state_family.unwrap_or_else(|| default_state_family(spec.family)));
    let mut solution = outer_loop(prob, grid, x0, opts, |xk, _| {
        let a = grid.nodes().zip(xk).map(|(t, x)| prob.sdre_a(t, x)).collect();
        let b = grid.nodes().zip(xk).map(|(t, x)| prob.sdre_b(t, x)).collect();
        let (q, r) = frozen_weights(prob, grid, xk);
        let lin = LtvProblem::sampled(*grid, a, b, q, r)?;
        let rsol = riccati::solve_riccati(&lin, grid, spec, &Matrix::zeros(n, n))?;
        let trajectory = propagation::state_forward(&lin, &rsol, x0, &state_spec)?;
        Ok(Pass { trajectory, rsol })
    })?;
    if !solution.report.diverged {
        let t = &solution.trajectory;
        solution.trajectory.cost = nonlinear_cost(prob, grid, &t.states, &t.controls)?;
    }
    Ok(solution)
}

/// Taylor linearization around `(X^k, u^k)`:
/// `Ā = ∂_X f_A + ∂_X f_B`, `B̄ = ∂_u f_B`, `C̄ = f_A + f_B - Ā X^k - B̄ u^k`,
/// with the feedforward `V` compensating `C̄` in `u = -R⁻¹B̄ᵀ(PX + V)`.
pub fn solve_taylor(
    prob: &dyn NonlinearProblem,
    grid: &TimeGrid,
    x0: &Vector,
    spec: &IntegratorSpec,
    opts: &LoopOptions,
) -> Result<NonlinearSolution> {
    let n = prob.dim_state();
    let state_spec = IntegratorSpec::new(opts.state_family.unwrap_or_else(|| default_state_family(spec.family)));
    let mut solution = outer_loop(prob, grid, x0, opts, |xk, uk| {
        let mut a = Vec::with_capacity(grid.len());
        let mut b = Vec::with_capacity(grid.len());
        let mut c = Vec::with_capacity(grid.len());
        for ((t, x), u) in grid.nodes().zip(xk).zip(uk) {
            let abar = prob.jac_x_fa(t, x) + prob.jac_x_fb(t, x, u);
            let bbar = prob.jac_u_fb(t, x, u);
            c.push(prob.f_a(t, x) + prob.f_b(t, x, u) - &abar * x - &bbar * u);
            a.push(abar);
            b.push(bbar);
        }
        let (q, r) = frozen_weights(prob, grid, xk);
        let lin = LtvProblem::sampled(*grid, a, b, q, r)?;
        let rsol = riccati::solve_riccati(&lin, grid, spec, &Matrix::zeros(n, n))?;
        let ff = propagation::feedforward_backward(&lin, &rsol, &c, &state_spec)?;
        let trajectory = propagation::state_forward_with_feedforward(&lin, &rsol, &ff, &c, x0, &state_spec)?;
        Ok(Pass { trajectory, rsol })
    })?;
    if !solution.report.diverged {
        let t = &solution.trajectory;
        solution.trajectory.cost = nonlinear_cost(prob, grid, &t.states, &t.controls)?;
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;
    use crate::propagation::state_forward;
    use nalgebra::{dmatrix, dvector};

    fn linear() -> LinearModel {
        LinearModel::new(
            dmatrix![0.0, 1.0; -2.0, -0.3],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0; 0.0, 0.5],
            dmatrix![0.2],
        )
        .unwrap()
    }

    #[test]
    fn origin_is_an_equilibrium_for_sdre() {
        let m = linear();
        let grid = TimeGrid::new(0.0, 2.0, 20).unwrap();
        for stepper in [SdreStepper::Explicit, SdreStepper::Implicit] {
            let sol = solve_sdre(&m, &grid, &dvector![0.0, 0.0], stepper).unwrap();
            assert!(sol.trajectory.states.iter().all(|x| x.norm() == 0.0));
            assert!(sol.trajectory.controls.iter().all(|u| u.norm() == 0.0));
            assert_eq!(sol.trajectory.cost, 0.0);
            assert_eq!(sol.report.iterations, 0);
        }
    }

    #[test]
    fn waveform_on_linear_dynamics_settles_after_one_pass() {
        let m = linear();
        let grid = TimeGrid::new(0.0, 3.0, 300).unwrap();
        let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
        let sol = solve_waveform(&m, &grid, &dvector![1.0, 0.0], &spec, &LoopOptions::default()).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.report.iterations, 2);
        assert!(sol.report.residuals[1] < 1e-12);
    }

    #[test]
    fn taylor_from_exact_guess_converges_immediately() {
        let m = linear();
        let grid = TimeGrid::new(0.0, 3.0, 300).unwrap();
        let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
        let lin = m.ltv();
        let rsol = riccati::solve_riccati(&lin, &grid, &spec, &Matrix::zeros(2, 2)).unwrap();
        let direct = state_forward(&lin, &rsol, &dvector![1.0, 0.0], &spec).unwrap();
        let opts = LoopOptions {
            initial_states: Some(direct.states.clone()),
            initial_controls: Some(direct.controls.clone()),
            ..LoopOptions::default()
        };
        let sol = solve_taylor(&m, &grid, &dvector![1.0, 0.0], &spec, &opts).unwrap();
        assert_eq!(sol.report.iterations, 1);
        assert!(sol.report.residuals[0] < 1e-12);
        assert!((sol.cost() - direct.cost).abs() < 1e-12);
    }

    #[test]
    fn report_bookkeeping() {
        let m = linear();
        let grid = TimeGrid::new(0.0, 3.0, 60).unwrap();
        let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
        let opts = LoopOptions { max_iter: 1, ..LoopOptions::default() };
        let sol = solve_waveform(&m, &grid, &dvector![1.0, 0.0], &spec, &opts).unwrap();
        assert_eq!(sol.report.residuals.len(), sol.report.iterations);
        assert!(!sol.report.converged && !sol.report.diverged);
        assert!(sol.trajectory.cost.is_finite());
    }

    #[test]
    fn explicit_euler_blowup_is_reported_as_divergence() {
        let m = LinearModel::new(dmatrix![50.0], dmatrix![1.0], dmatrix![100.0], dmatrix![1e-3]).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 10).unwrap();
        let spec = IntegratorSpec::new(Family::EulerExplicit);
        let sol = solve_taylor(&m, &grid, &dvector![1.0], &spec, &LoopOptions::default()).unwrap();
        assert!(sol.report.diverged && !sol.report.converged);
        assert!(sol.cost().is_infinite());
        assert!(sol.report.failure.is_some());
    }

    #[test]
    fn shape_errors_propagate() {
        let m = linear();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
        assert!(matches!(
            solve_waveform(&m, &grid, &dvector![1.0], &spec, &LoopOptions::default()),
            Err(Error::Shape { .. })
        ));
        let bad = LoopOptions {
            initial_states: Some(vec![dvector![0.0, 0.0]; 3]),
            ..LoopOptions::default()
        };
        assert!(matches!(
            solve_taylor(&m, &grid, &dvector![1.0, 0.0], &spec, &bad),
            Err(Error::GridMismatch(_))
        ));
    }
}
