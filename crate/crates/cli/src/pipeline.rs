//! Runs a resolved scenario and collects what the commands report.

use std::fmt;
use std::time::Instant;

use magnus_lq::nonlinear::{self, NonlinearProblem, NonlinearSolution};
use magnus_lq::problem::{self, LtvProblem};
use magnus_lq::propagation;
use magnus_lq::riccati;
use magnus_lq::{Family, Matrix, Trajectory};

use crate::config::{Model, ModelKind, Scenario, ScenarioConfig, Strategy};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scheme_label: String,
    /// Trapezoidal integral of the running cost; infinite on divergence.
    pub cost: f64,
    /// `h · cost`, the scale on which the published table reports costs.
    pub step_weighted_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub min_p_eigenvalue_global: f64,
    pub wall_time: f64,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.diverged {
            "diverged"
        } else if self.converged {
            "converged"
        } else {
            "not converged"
        };
        write!(
            f,
            "{}: cost {} (integral {}), iterations {}, {status}, min eig P {:.3e}, wall {:.3} s",
            self.scheme_label,
            fmt_cost(self.step_weighted_cost, 4),
            fmt_cost(self.cost, 6),
            self.iterations,
            self.min_p_eigenvalue_global,
            self.wall_time,
        )
    }
}

pub fn fmt_cost(c: f64, digits: usize) -> String {
    if c.is_finite() {
        format!("{c:.digits$}")
    } else {
        "Inf".to_string()
    }
}

/// Everything a run produces; the CSV is written from this.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    /// Per-node smallest eigenvalue of `P` (NaN where unavailable).
    pub min_p: Vec<f64>,
    /// Running-cost integrand per node.
    pub running_costs: Vec<f64>,
}

pub fn run_config(cfg: &ScenarioConfig) -> CliResult<RunOutput> {
    run_scenario(&cfg.resolve()?)
}

pub fn run_scenario(s: &Scenario) -> CliResult<RunOutput> {
    let start = Instant::now();
    let (trajectory, min_p, iterations, converged, diverged) = match (&s.model, s.strategy) {
        (Model::Scalar(b), _) => lq_direct(&b.problem(), s)?,
        (Model::Linear(m), Strategy::LqDirect) => lq_direct(&m.ltv(), s)?,
        (Model::Quadrotor(m), strategy) => from_nonlinear(nonlinear_run(m, s, strategy)?),
        (Model::Linear(m), strategy) => from_nonlinear(nonlinear_run(m, s, strategy)?),
    };
    let wall_time = start.elapsed().as_secs_f64();

    let running_costs = match &s.model {
        Model::Scalar(b) => {
            let prob = b.problem();
            problem::running_costs(&trajectory.grid, &trajectory.states, &trajectory.controls, |t, _| {
                Ok((prob.q(t)?, prob.r(t)?))
            })?
        }
        Model::Quadrotor(m) => nonlinear_running_costs(m, &trajectory)?,
        Model::Linear(m) => nonlinear_running_costs(m, &trajectory)?,
    };
    let cost = trajectory.cost;
    let summary = RunSummary {
        scheme_label: s.label.clone(),
        cost,
        step_weighted_cost: cost * trajectory.grid.h(),
        iterations,
        converged,
        diverged,
        min_p_eigenvalue_global: min_p.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min),
        wall_time,
    };
    let min_p = if min_p.len() == trajectory.grid.len() {
        min_p
    } else {
        vec![f64::NAN; trajectory.grid.len()]
    };
    Ok(RunOutput {
        summary,
        trajectory,
        min_p,
        running_costs,
    })
}

type Outcome = (Trajectory, Vec<f64>, usize, bool, bool);

fn lq_direct(prob: &LtvProblem, s: &Scenario) -> CliResult<Outcome> {
    let n = prob.dim_state();
    let rsol = riccati::solve_riccati(prob, &s.grid, &s.riccati, &Matrix::zeros(n, n))?;
    if s.state == Family::Magnus4Simpson {
        let traj = propagation::state_forward_simpson(prob, &rsol, &s.x0)?;
        let coarse = rsol.coarsen(2)?;
        return Ok((traj, coarse.min_eigenvalues, 0, true, false));
    }
    let traj = propagation::state_forward(prob, &rsol, &s.x0, &magnus_lq::IntegratorSpec::new(s.state))?;
    Ok((traj, rsol.min_eigenvalues, 0, true, false))
}

fn nonlinear_run(prob: &dyn NonlinearProblem, s: &Scenario, strategy: Strategy) -> CliResult<NonlinearSolution> {
    Ok(match strategy {
        Strategy::Sdre => nonlinear::solve_sdre(prob, &s.grid, &s.x0, s.stepper.expect("resolved for sdre"))?,
        Strategy::Waveform => nonlinear::solve_waveform(prob, &s.grid, &s.x0, &s.riccati, &s.loop_options)?,
        Strategy::Taylor => nonlinear::solve_taylor(prob, &s.grid, &s.x0, &s.riccati, &s.loop_options)?,
        Strategy::LqDirect => unreachable!("rejected when the scenario is resolved"),
    })
}

fn from_nonlinear(sol: NonlinearSolution) -> Outcome {
    let r = sol.report;
    (sol.trajectory, sol.min_p_eigenvalues, r.iterations, r.converged, r.diverged)
}

fn nonlinear_running_costs(prob: &dyn NonlinearProblem, traj: &Trajectory) -> CliResult<Vec<f64>> {
    Ok(problem::running_costs(&traj.grid, &traj.states, &traj.controls, |t, x| {
        Ok((prob.q(t, x), prob.r(t, x)))
    })?)
}

/// One row of the quadrotor comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheme {
    pub label: &'static str,
    pub strategy: Strategy,
    pub riccati: Family,
    pub state: Family,
}

pub const TABLE2_SCHEMES: [Scheme; 8] = [
    Scheme { label: "S1", strategy: Strategy::Sdre, riccati: Family::EulerExplicit, state: Family::EulerExplicit },
    Scheme { label: "S2", strategy: Strategy::Sdre, riccati: Family::EulerImplicit, state: Family::EulerImplicit },
    Scheme { label: "W1", strategy: Strategy::Waveform, riccati: Family::EulerExplicit, state: Family::EulerExplicit },
    Scheme { label: "W2", strategy: Strategy::Waveform, riccati: Family::EulerImplicit, state: Family::EulerImplicit },
    Scheme { label: "W3", strategy: Strategy::Waveform, riccati: Family::Magnus2Trapezoidal, state: Family::Magnus2Trapezoidal },
    Scheme { label: "T1", strategy: Strategy::Taylor, riccati: Family::EulerExplicit, state: Family::EulerExplicit },
    Scheme { label: "T2", strategy: Strategy::Taylor, riccati: Family::EulerImplicit, state: Family::EulerImplicit },
    Scheme { label: "T3", strategy: Strategy::Taylor, riccati: Family::Magnus2Trapezoidal, state: Family::Magnus2Trapezoidal },
];

impl Scheme {
    pub fn by_label(label: &str) -> Option<Scheme> {
        TABLE2_SCHEMES.iter().copied().find(|s| s.label.eq_ignore_ascii_case(label))
    }

    /// Quadrotor benchmark scenario for this scheme.
    pub fn config(&self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(ModelKind::Quadrotor, self.strategy);
        cfg.label = Some(self.label.to_string());
        cfg.riccati_integrator = self.riccati.name().to_string();
        cfg.state_integrator = Some(self.state.name().to_string());
        cfg
    }
}
