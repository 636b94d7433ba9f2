//! Structure-preserving solvers for linear-quadratic optimal control.
//!
//! The backward Riccati sweep is carried out on the linear Hamiltonian
//! embedding `d/dt [V; W] = M(t) [V; W]`, `P = V W⁻¹`, with Magnus
//! exponential integrators. The second-order trapezoidal and midpoint rules
//! keep every `P_n` symmetric positive semi-definite for any step size, which
//! direct Runge-Kutta schemes on the Riccati equation do not.
//!
//! Module map:
//!
//! * [`numerics`]: matrix exponential, linear solves, SPD diagnostics, Lyapunov solves.
//! * [`problem`]: time grids, LTV problems, the Hamiltonian generator and cost quadrature.
//! * [`riccati`]: Magnus and baseline Riccati integrators, algebraic Riccati solver.
//! * [`propagation`]: closed-loop state sweep, controls, disturbance feedforward.
//! * [`nonlinear`]: SDRE stepping, waveform relaxation and Taylor linearization loops.
//! * [`models`]: the scalar positivity counterexample and the quadrotor attitude model.

pub mod error;
pub mod models;
pub mod nonlinear;
pub mod numerics;
pub mod problem;
pub mod propagation;
pub mod riccati;

pub use error::{Error, Result};
pub use models::{LinearModel, QuadrotorModel, QuadrotorParams, ScalarBenchmark};
pub use nonlinear::{IterationReport, LoopOptions, NonlinearProblem, NonlinearSolution, SdreStepper};
pub use numerics::{Matrix, SpdReport, Vector};
pub use problem::{LtvProblem, TimeGrid, Trajectory};
pub use propagation::FeedforwardSolution;
pub use riccati::{Direction, Family, IntegratorSpec, PositivityClass, RiccatiSolution};
