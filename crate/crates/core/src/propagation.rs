//! Forward state sweep under the closed loop `D = A - S P`, control
//! extraction, and the disturbance feedforward equation.
//!
//! All sweeps run on the grid of the [`RiccatiSolution`] they consume and
//! only evaluate coefficients at grid nodes, so the node values computed for
//! the backward pass can be reused.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};
use crate::problem::{self, LtvProblem, TimeGrid, Trajectory};
use crate::riccati::{self, Direction, Family, IntegratorSpec, RiccatiSolution};

/// Drift tolerance for the auxiliary coordinate of a homogenized sweep.
pub const AUX_TOL: f64 = 1e-10;

/// Vector co-state of the disturbance feedforward, `V_N = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardSolution {
    pub grid: TimeGrid,
    pub v: Vec<Vector>,
}

/// Augmented generator `[[M, c], [0ᵀ, 0]]`.
pub fn augment(m: &Matrix, c: &Vector) -> Result<Matrix> {
    let p = numerics::ensure_square(m)?;
    if c.len() != p {
        return Err(Error::Shape {
            context: "homogenize",
            expected: format!("vector of length {p}"),
            got: c.len().to_string(),
        });
    }
    let mut out = Matrix::zeros(p + 1, p + 1);
    out.view_mut((0, 0), (p, p)).copy_from(m);
    out.view_mut((0, p), (p, 1)).copy_from(c);
    Ok(out)
}

/// Turns `y' = M(t) y + C(t)` into the homogeneous system for `[y; 1]`.
pub fn homogenize<M, C>(m: M, c: C) -> impl Fn(f64) -> Result<Matrix>
where
    M: Fn(f64) -> Matrix,
    C: Fn(f64) -> Vector,
{
    move |t| augment(&m(t), &c(t))
}

fn check_linear_family(family: Family) -> Result<()> {
    match family {
        Family::EulerExplicit
        | Family::EulerImplicit
        | Family::RkTrapezoidal
        | Family::Magnus2Trapezoidal => Ok(()),
        other => Err(Error::Unsupported {
            family: other.name(),
            context: "grid-node linear sweeps (needs off-grid samples)",
        }),
    }
}

/// Integrates `y' = G_n y + c_n` forward over the grid from `y0`, using only
/// node samples of `G` and `c`.
pub fn forward_linear(
    grid: &TimeGrid,
    gens: &[Matrix],
    inhom: Option<&[Vector]>,
    y0: &Vector,
    family: Family,
) -> Result<Vec<Vector>> {
    check_linear_family(family)?;
    if gens.len() != grid.len() || inhom.is_some_and(|c| c.len() != grid.len()) {
        return Err(Error::GridMismatch("linear sweep samples"));
    }
    let dim = y0.len();
    let h = grid.h();
    let ident = Matrix::identity(dim, dim);
    let zero = Vector::zeros(dim);
    let c = |k: usize| inhom.map_or(&zero, |c| &c[k]);

    let mut out = Vec::with_capacity(grid.len());
    out.push(y0.clone());
    for k in 0..grid.steps() {
        let y = &out[k];
        let next = match family {
            Family::EulerExplicit => y + (&gens[k] * y + c(k)) * h,
            Family::EulerImplicit => {
                numerics::solve_vec(&(&ident - &gens[k + 1] * h), &(y + c(k + 1) * h))?
            }
            Family::RkTrapezoidal => {
                let lhs = &ident - &gens[k + 1] * (0.5 * h);
                let rhs = y + (&gens[k] * y) * (0.5 * h) + (c(k) + c(k + 1)) * (0.5 * h);
                numerics::solve_vec(&lhs, &rhs)?
            }
            Family::Magnus2Trapezoidal => match inhom {
                None => {
                    let e = numerics::expm(&((&gens[k] + &gens[k + 1]) * (0.5 * h)))?;
                    e * y
                }
                Some(cs) => {
                    let gen = (augment(&gens[k], &cs[k])? + augment(&gens[k + 1], &cs[k + 1])?) * (0.5 * h);
                    let e = numerics::expm(&gen)?;
                    let mut aug = Vector::from_element(dim + 1, 1.0);
                    aug.rows_mut(0, dim).copy_from(y);
                    let z = e * aug;
                    let last = z[dim];
                    if (last - 1.0).abs() > AUX_TOL {
                        return Err(Error::AuxiliaryDrift { step: k, value: last });
                    }
                    z.rows(0, dim).into_owned()
                }
            },
            _ => unreachable!(),
        };
        if !numerics::all_finite(&next) {
            return Err(Error::NonFinite("linear sweep"));
        }
        out.push(next);
    }
    Ok(out)
}

/// Integrates `y' = G_n y + c_n` backward from `y_final` at `t_f`.
pub fn backward_linear(
    grid: &TimeGrid,
    gens: &[Matrix],
    inhom: Option<&[Vector]>,
    y_final: &Vector,
    family: Family,
) -> Result<Vec<Vector>> {
    // z(τ) = y(t_f - τ) obeys z' = -G z - c.
    let rev_gens: Vec<Matrix> = gens.iter().rev().map(|g| -g).collect();
    let rev_c: Option<Vec<Vector>> = inhom.map(|c| c.iter().rev().map(|v| -v).collect());
    let mut out = forward_linear(grid, &rev_gens, rev_c.as_deref(), y_final, family)?;
    out.reverse();
    Ok(out)
}

fn check_solution_grid(prob: &LtvProblem, rsol: &RiccatiSolution) -> Result<()> {
    if rsol.p.len() != rsol.grid.len() {
        return Err(Error::GridMismatch("Riccati samples do not cover the grid"));
    }
    if rsol.p[0].nrows() != prob.dim_state() {
        return Err(Error::Shape {
            context: "Riccati solution",
            expected: format!("{}x{}", prob.dim_state(), prob.dim_state()),
            got: format!("{}x{}", rsol.p[0].nrows(), rsol.p[0].ncols()),
        });
    }
    Ok(())
}

/// Closed-loop generators `D_n = A(t_n) - S(t_n) P_n`.
pub fn closed_loop(prob: &LtvProblem, rsol: &RiccatiSolution) -> Result<Vec<Matrix>> {
    check_solution_grid(prob, rsol)?;
    rsol.grid
        .nodes()
        .zip(&rsol.p)
        .map(|(t, p)| Ok(prob.a(t)? - prob.s(t)? * p))
        .collect()
}

/// Forward sweep `X_{n+1} = Ψ_n X_n` under the feedback from `rsol`, with
/// controls and cost filled in.
///
/// Supported families: `magnus2-trapezoidal`, `rk-trapezoidal`,
/// `euler-explicit`, `euler-implicit`.
pub fn state_forward(
    prob: &LtvProblem,
    rsol: &RiccatiSolution,
    x0: &Vector,
    spec: &IntegratorSpec,
) -> Result<Trajectory> {
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
    let gens = closed_loop(prob, rsol)?;
    let states = forward_linear(&rsol.grid, &gens, None, x0, spec.family)?;
    finish_trajectory(prob, rsol, states, None)
}

/// Fourth-order forward sweep with the Simpson composition over pairs of
/// steps. The Riccati grid must have an even number of steps; the result
/// lives on the grid coarsened by two.
pub fn state_forward_simpson(prob: &LtvProblem, rsol: &RiccatiSolution, x0: &Vector) -> Result<Trajectory> {
    let gens = closed_loop(prob, rsol)?;
    let coarse = rsol.coarsen(2)?;
    let spec = IntegratorSpec::new(Family::Magnus4Simpson);
    let mut states = vec![x0.clone()];
    for k in 0..coarse.grid.steps() {
        let samples = [gens[2 * k].clone(), gens[2 * k + 1].clone(), gens[2 * k + 2].clone()];
        let prop = riccati::magnus_step(&samples, &spec, coarse.grid.h(), Direction::Forward)?;
        let next = prop * &states[k];
        if !numerics::all_finite(&next) {
            return Err(Error::NonFinite("state"));
        }
        states.push(next);
    }
    finish_trajectory(prob, &coarse, states, None)
}

fn finish_trajectory(
    prob: &LtvProblem,
    rsol: &RiccatiSolution,
    states: Vec<Vector>,
    ff: Option<&FeedforwardSolution>,
) -> Result<Trajectory> {
    let controls = control_sequence(prob, rsol, &states, ff)?;
    let mut traj = Trajectory {
        grid: rsol.grid,
        states,
        controls,
        cost: 0.0,
    };
    traj.cost = problem::cost(prob, &traj)?;
    Ok(traj)
}

/// `u_n = -R⁻¹ Bᵀ (P_n X_n + V_n)`, with `V ≡ 0` when no feedforward is given.
pub fn control_sequence(
    prob: &LtvProblem,
    rsol: &RiccatiSolution,
    states: &[Vector],
    feedforward: Option<&FeedforwardSolution>,
) -> Result<Vec<Vector>> {
    check_solution_grid(prob, rsol)?;
    if states.len() != rsol.grid.len() || feedforward.is_some_and(|f| f.v.len() != rsol.grid.len()) {
        return Err(Error::GridMismatch("states and Riccati solution"));
    }
    rsol.grid
        .nodes()
        .enumerate()
        .map(|(k, t)| {
            let mut costate = &rsol.p[k] * &states[k];
            if let Some(ff) = feedforward {
                costate += &ff.v[k];
            }
            Ok(-(prob.input_gain(t)? * costate))
        })
        .collect()
}

/// Backward sweep of `V' = (P S - Aᵀ) V - P C̄`, `V(t_f) = 0`, with `C̄`
/// given at the grid nodes.
///
/// Magnus families use the homogenized trapezoidal rule; the Euler and
/// trapezoidal Runge-Kutta families use their linear counterparts.
pub fn feedforward_backward(
    prob: &LtvProblem,
    rsol: &RiccatiSolution,
    cbar: &[Vector],
    spec: &IntegratorSpec,
) -> Result<FeedforwardSolution> {
    check_solution_grid(prob, rsol)?;
    if cbar.len() != rsol.grid.len() {
        return Err(Error::GridMismatch("disturbance samples"));
    }
    let n = prob.dim_state();
    let mut gens = Vec::with_capacity(rsol.grid.len());
    let mut inhom = Vec::with_capacity(rsol.grid.len());
    for ((t, p), c) in rsol.grid.nodes().zip(&rsol.p).zip(cbar) {
        if c.len() != n {
            return Err(Error::Shape {
                context: "disturbance",
                expected: n.to_string(),
                got: c.len().to_string(),
            });
        }
        gens.push(p * prob.s(t)? - prob.a(t)?.transpose());
        inhom.push(-(p * c));
    }
    let family = if spec.family.is_magnus() {
        Family::Magnus2Trapezoidal
    } else {
        spec.family
    };
    let v = backward_linear(&rsol.grid, &gens, Some(&inhom), &Vector::zeros(n), family)?;
    Ok(FeedforwardSolution { grid: rsol.grid, v })
}

/// Forward sweep of the inhomogeneous closed loop
/// `X' = (A - S P) X - S V + C̄` and the matching controls.
pub fn state_forward_with_feedforward(
    prob: &LtvProblem,
    rsol: &RiccatiSolution,
    ff: &FeedforwardSolution,
    cbar: &[Vector],
    x0: &Vector,
    spec: &IntegratorSpec,
) -> Result<Trajectory> {
    let gens = closed_loop(prob, rsol)?;
    if ff.v.len() != rsol.grid.len() || cbar.len() != rsol.grid.len() {
        return Err(Error::GridMismatch("feedforward and Riccati solution"));
    }
    let inhom = rsol
        .grid
        .nodes()
        .zip(&ff.v)
        .zip(cbar)
        .map(|((t, v), c)| Ok(c - prob.s(t)? * v))
        .collect::<Result<Vec<_>>>()?;
    let family = if spec.family.is_magnus() {
        Family::Magnus2Trapezoidal
    } else {
        spec.family
    };
    let states = forward_linear(&rsol.grid, &gens, Some(&inhom), x0, family)?;
    finish_trajectory(prob, rsol, states, Some(ff))
}
