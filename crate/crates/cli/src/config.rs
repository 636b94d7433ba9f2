//! Scenario files.
//!
//! A scenario is a JSON object. Required keys are `model` and `strategy`;
//! everything else has a default that depends on the model. Initial states
//! may be given as `initial_state` (as is) or `initial_state_deg`, where the
//! angle slots of the quadrotor state (1, 3, 5) are read in degrees.
//!
//! ```json
//! {
//!   "label": "T3",
//!   "model": "quadrotor",
//!   "strategy": "taylor",
//!   "riccati_integrator": "magnus2-trapezoidal",
//!   "grid": { "t0": 0.0, "tf": 10.0, "steps": 80 },
//!   "tolerance": 1e-3,
//!   "max_iter": 50,
//!   "initial_state_deg": [70, 10, 70, 20, -130, -1],
//!   "output_path": "t3.csv"
//! }
//! ```

use std::path::{Path, PathBuf};

use magnus_lq::models::{self, LinearModel, QuadrotorModel, QuadrotorParams, ScalarBenchmark};
use magnus_lq::nonlinear::{default_state_family, LoopOptions, SdreStepper};
use magnus_lq::{Family, IntegratorSpec, Matrix, TimeGrid, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Scalar,
    Quadrotor,
    CustomLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    LqDirect,
    Sdre,
    Waveform,
    Taylor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarDrift {
    Sigmoid,
    Piecewise,
    Constant,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarConfig {
    pub drift: ScalarDrift,
    /// Drift value for `constant`.
    #[serde(default)]
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorConfig {
    pub ix: Option<f64>,
    pub iy: Option<f64>,
    pub iz: Option<f64>,
    pub l: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<[f64; 3]>,
    pub q_diag: Option<Vec<f64>>,
    pub r_diag: Option<Vec<f64>>,
}

fn default_integrator() -> String {
    Family::Magnus2Trapezoidal.name().to_string()
}

fn default_tolerance() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub model: ModelKind,
    pub strategy: Strategy,
    #[serde(default = "default_integrator")]
    pub riccati_integrator: String,
    /// Forward pass family; for `sdre` this is the Euler stepper.
    #[serde(default)]
    pub state_integrator: Option<String>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_state_deg: Option<Vec<f64>>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub scalar: Option<ScalarConfig>,
    #[serde(default)]
    pub linear: Option<LinearConfig>,
    #[serde(default)]
    pub quadrotor: Option<QuadrotorConfig>,
}

impl ScenarioConfig {
    /// Minimal config for `model` and `strategy` with every other field at
    /// its default.
    pub fn new(model: ModelKind, strategy: Strategy) -> Self {
        ScenarioConfig {
            label: None,
            model,
            strategy,
            riccati_integrator: default_integrator(),
            state_integrator: None,
            grid: None,
            tolerance: default_tolerance(),
            max_iter: default_max_iter(),
            initial_state: None,
            initial_state_deg: None,
            output_path: None,
            scalar: None,
            linear: None,
            quadrotor: None,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        // Relative output paths are taken relative to the config file.
        if let (Some(out), Some(dir)) = (&cfg.output_path, path.parent()) {
            if out.is_relative() {
                cfg.output_path = Some(dir.join(out));
            }
        }
        Ok(cfg)
    }

    pub fn resolve(&self) -> CliResult<Scenario> {
        let model = match self.model {
            ModelKind::Scalar => Model::Scalar(self.scalar_bench()?),
            ModelKind::Quadrotor => Model::Quadrotor(self.quadrotor_model()?),
            ModelKind::CustomLinear => Model::Linear(self.linear_model()?),
        };
        if matches!(model, Model::Scalar(_)) && self.strategy != Strategy::LqDirect {
            return Err(CliError::Config(format!(
                "strategy {:?} needs a nonlinear model; the scalar model supports lq-direct only",
                self.strategy
            )));
        }
        if matches!(model, Model::Quadrotor(_)) && self.strategy == Strategy::LqDirect {
            return Err(CliError::Config(
                "the quadrotor model is nonlinear; use sdre, waveform or taylor".into(),
            ));
        }

        let riccati: Family = parse_family(&self.riccati_integrator)?;
        let state_given = self.state_integrator.as_deref().map(parse_family).transpose()?;
        let stepper = match (self.strategy, state_given) {
            (Strategy::Sdre, None | Some(Family::EulerExplicit)) => Some(SdreStepper::Explicit),
            (Strategy::Sdre, Some(Family::EulerImplicit)) => Some(SdreStepper::Implicit),
            (Strategy::Sdre, Some(other)) => {
                return Err(CliError::Config(format!(
                    "sdre steps with euler-explicit or euler-implicit, not {other}"
                )))
            }
            _ => None,
        };
        let state = state_given.unwrap_or_else(|| default_state_family(riccati));

        let grid = match (self.grid, &model) {
            (Some(g), _) => TimeGrid::new(g.t0, g.tf, g.steps)?,
            (None, Model::Scalar(b)) => b.grid_p()?,
            (None, Model::Quadrotor(_)) => models::quadrotor_benchmark().1,
            (None, Model::Linear(_)) => TimeGrid::new(0.0, 1.0, 1000)?,
        };
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(CliError::Config("tolerance must be positive and max_iter at least 1".into()));
        }

        let x0 = self.initial_state_for(&model)?;
        let label = self.label.clone().unwrap_or_else(|| {
            format!("{:?}-{}", self.strategy, riccati.name()).to_ascii_lowercase()
        });
        Ok(Scenario {
            label,
            model,
            strategy: self.strategy,
            riccati: IntegratorSpec::new(riccati),
            state,
            stepper,
            grid,
            loop_options: LoopOptions {
                tol: self.tolerance,
                max_iter: self.max_iter,
                state_family: Some(state),
                ..LoopOptions::default()
            },
            x0,
            output_path: self.output_path.clone(),
        })
    }

    fn scalar_bench(&self) -> CliResult<ScalarBenchmark> {
        let cfg = self.scalar.clone().unwrap_or(ScalarConfig {
            drift: ScalarDrift::Sigmoid,
            a: 0.0,
        });
        let h = self.grid.map(|g| (g.tf - g.t0) / g.steps as f64);
        Ok(match cfg.drift {
            ScalarDrift::Sigmoid => ScalarBenchmark::sigmoid(),
            ScalarDrift::Piecewise => ScalarBenchmark::piecewise(h.unwrap_or(0.5))?,
            ScalarDrift::Constant => ScalarBenchmark::constant(cfg.a, 10.0, h.unwrap_or(0.5))?,
            ScalarDrift::Smooth => ScalarBenchmark::smooth(h.unwrap_or(0.1))?,
        })
    }

    fn quadrotor_model(&self) -> CliResult<QuadrotorModel> {
        let c = self.quadrotor.clone().unwrap_or_default();
        let d = QuadrotorParams::default();
        let params = QuadrotorParams {
            ix: c.ix.unwrap_or(d.ix),
            iy: c.iy.unwrap_or(d.iy),
            iz: c.iz.unwrap_or(d.iz),
            l: c.l.unwrap_or(d.l),
            lambda: c.lambda.unwrap_or(d.lambda),
            alpha: c.alpha.unwrap_or(d.alpha),
        };
        let (q0, r0) = QuadrotorModel::default_weights();
        let q = match c.q_diag {
            Some(v) => diag(&v, 6, "q_diag")?,
            None => q0,
        };
        let r = match c.r_diag {
            Some(v) => diag(&v, 3, "r_diag")?,
            None => r0,
        };
        Ok(QuadrotorModel::new(params, q, r)?)
    }

    fn linear_model(&self) -> CliResult<LinearModel> {
        let c = self
            .linear
            .as_ref()
            .ok_or_else(|| CliError::Config("custom-linear needs a `linear` section with a, b, q, r".into()))?;
        Ok(LinearModel::new(
            matrix(&c.a, "linear.a")?,
            matrix(&c.b, "linear.b")?,
            matrix(&c.q, "linear.q")?,
            matrix(&c.r, "linear.r")?,
        )?)
    }

    fn initial_state_for(&self, model: &Model) -> CliResult<Vector> {
        let x = match (&self.initial_state, &self.initial_state_deg, model) {
            (Some(_), Some(_), _) => {
                return Err(CliError::Config("give initial_state or initial_state_deg, not both".into()))
            }
            (Some(v), None, _) => Vector::from_column_slice(v),
            (None, Some(v), Model::Quadrotor(_)) => {
                let mut x = Vector::from_column_slice(v);
                if x.len() == 6 {
                    for k in [0, 2, 4] {
                        x[k] = x[k].to_radians();
                    }
                }
                x
            }
            (None, Some(_), _) => {
                return Err(CliError::Config("initial_state_deg only applies to the quadrotor model".into()))
            }
            (None, None, Model::Quadrotor(_)) => models::quadrotor_initial_state(),
            (None, None, Model::Scalar(b)) => Vector::from_element(1, b.x0),
            (None, None, Model::Linear(_)) => {
                return Err(CliError::Config("custom-linear needs initial_state".into()))
            }
        };
        if x.len() != model.dim_state() {
            return Err(CliError::Config(format!(
                "initial state has {} entries, model has {} states",
                x.len(),
                model.dim_state()
            )));
        }
        Ok(x)
    }
}

pub fn parse_family(name: &str) -> CliResult<Family> {
    name.parse().map_err(CliError::Config)
}

fn matrix(rows: &[Vec<f64>], what: &str) -> CliResult<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Config(format!("{what} must be a non-empty rectangular array of rows")));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn diag(v: &[f64], n: usize, what: &str) -> CliResult<Matrix> {
    if v.len() != n {
        return Err(CliError::Config(format!("{what} needs {n} entries, got {}", v.len())));
    }
    Ok(Matrix::from_diagonal(&Vector::from_column_slice(v)))
}

#[derive(Debug, Clone)]
pub enum Model {
    Scalar(ScalarBenchmark),
    Quadrotor(QuadrotorModel),
    Linear(LinearModel),
}

impl Model {
    pub fn dim_state(&self) -> usize {
        match self {
            Model::Scalar(_) => 1,
            Model::Quadrotor(_) => 6,
            Model::Linear(m) => m.a.nrows(),
        }
    }
}

/// Validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub model: Model,
    pub strategy: Strategy,
    pub riccati: IntegratorSpec,
    pub state: Family,
    pub stepper: Option<SdreStepper>,
    pub grid: TimeGrid,
    pub loop_options: LoopOptions,
    pub x0: Vector,
    pub output_path: Option<PathBuf>,
}
