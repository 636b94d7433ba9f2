//! The four subcommands. Each returns data; rendering is separate so the
//! acceptance suite can inspect results without parsing text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use magnus_lq::models::ScalarBenchmark;
use magnus_lq::nonlinear::default_state_family;
use magnus_lq::{propagation, riccati, Family, IntegratorSpec, Matrix, TimeGrid, Vector};

use crate::config::ScenarioConfig;
use crate::csv;
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, fmt_cost, RunOutput, RunSummary, Scheme, TABLE2_SCHEMES};

/// Loads and runs a scenario file and writes its CSV (by default next to
/// the config, same stem).
pub fn cmd_run(config_path: &Path) -> CliResult<(RunOutput, PathBuf)> {
    let cfg = ScenarioConfig::from_path(config_path)?;
    let out_path = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| config_path.with_extension("csv"));
    let out = pipeline::run_config(&cfg)?;
    csv::write(&out_path, &csv::render_run(&out))?;
    Ok((out, out_path))
}

/// Exit status for a finished run: 0 when converged, 2 otherwise.
pub fn run_exit_code(summary: &RunSummary) -> i32 {
    if summary.converged && !summary.diverged {
        0
    } else {
        2
    }
}

#[derive(Debug, Clone)]
pub struct Table2Row {
    pub scheme: Scheme,
    pub summary: RunSummary,
    pub output: Option<RunOutput>,
    /// Error text when the scheme failed outright.
    pub failure: Option<String>,
}

/// Costs reported for the optimal control per integrator family, shown as
/// reference constants.
pub const REPORTED_OPTIMA: [(&str, f64); 3] = [
    ("euler-explicit", 0.0977),
    ("euler-implicit", 0.0888),
    ("magnus2-trapezoidal", 0.0707),
];

/// Runs all eight quadrotor schemes concurrently. A failing scheme becomes
/// a diverged row.
pub fn cmd_table2(out_dir: Option<&Path>) -> CliResult<Vec<Table2Row>> {
    let rows: Vec<Table2Row> = std::thread::scope(|scope| {
        let handles: Vec<_> = TABLE2_SCHEMES
            .iter()
            .map(|scheme| scope.spawn(move || table2_row(*scheme)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scheme thread panicked"))
            .collect()
    });
    if let Some(dir) = out_dir {
        csv::write(&dir.join("table2.csv"), &render_table2_csv(&rows))?;
        for row in &rows {
            if let Some(out) = &row.output {
                csv::write(&dir.join(format!("table2_{}.csv", row.scheme.label)), &csv::render_run(out))?;
            }
        }
    }
    Ok(rows)
}

fn table2_row(scheme: Scheme) -> Table2Row {
    match pipeline::run_config(&scheme.config()) {
        Ok(out) => Table2Row {
            scheme,
            summary: out.summary.clone(),
            output: Some(out),
            failure: None,
        },
        Err(e) => Table2Row {
            scheme,
            summary: RunSummary {
                scheme_label: scheme.label.to_string(),
                cost: f64::INFINITY,
                step_weighted_cost: f64::INFINITY,
                iterations: 0,
                converged: false,
                diverged: true,
                min_p_eigenvalue_global: f64::NAN,
                wall_time: 0.0,
            },
            output: None,
            failure: Some(e.to_string()),
        },
    }
}

fn iterations_cell(row: &Table2Row) -> String {
    if row.summary.diverged {
        "Inf".into()
    } else {
        row.summary.iterations.to_string()
    }
}

pub fn render_table2(rows: &[Table2Row]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6}{:<10}{:<21}{:<21}{:>9}{:>12}{:>6}{:>12}{:>10}",
        "label", "type", "riccati", "state", "cost", "integral", "it.", "min eig P", "wall [s]"
    );
    for row in rows {
        let r = &row.summary;
        let _ = writeln!(
            s,
            "{:<6}{:<10}{:<21}{:<21}{:>9}{:>12}{:>6}{:>12.3e}{:>10.3}",
            r.scheme_label,
            format!("{:?}", row.scheme.strategy).to_ascii_lowercase(),
            row.scheme.riccati.name(),
            row.scheme.state.name(),
            fmt_cost(r.step_weighted_cost, 4),
            fmt_cost(r.cost, 6),
            iterations_cell(row),
            r.min_p_eigenvalue_global,
            r.wall_time,
        );
        if let Some(f) = &row.failure {
            let _ = writeln!(s, "      ({f})");
        }
    }
    let _ = writeln!(s, "cost = h * integral of xᵀQx + uᵀRu (trapezoidal), h = 0.125");
    let _ = writeln!(s, "reported optimal costs:");
    for (family, value) in REPORTED_OPTIMA {
        let _ = write!(s, "  {family:<21}{value:.4}");
        if family == Family::Magnus2Trapezoidal.name() {
            if let Some(t3) = rows.iter().find(|r| r.scheme.label == "T3" && r.summary.converged) {
                let _ = write!(s, "   (recomputed by T3: {:.4})", t3.summary.step_weighted_cost);
            }
        }
        s.push('\n');
    }
    s
}

pub fn render_table2_csv(rows: &[Table2Row]) -> String {
    let mut s = String::from("label,type,riccati,state,cost,integral,iterations,converged,diverged,minEigP,wallTime\n");
    for row in rows {
        let r = &row.summary;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme_label,
            format!("{:?}", row.scheme.strategy).to_ascii_lowercase(),
            row.scheme.riccati.name(),
            row.scheme.state.name(),
            csv::fmt_num(r.step_weighted_cost),
            csv::fmt_num(r.cost),
            iterations_cell(row),
            r.converged,
            r.diverged,
            csv::fmt_num(r.min_p_eigenvalue_global),
            csv::fmt_num(r.wall_time),
        );
    }
    for (family, value) in REPORTED_OPTIMA {
        let _ = writeln!(s, "optimum,reported,{family},{family},{},,,,,,", csv::fmt_num(value));
    }
    s
}

/// One method of the scalar demo on its own grid.
#[derive(Debug, Clone)]
pub struct ScalarSeries {
    pub method: &'static str,
    pub family: Family,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub x: Vec<f64>,
    /// Time of the node where the Riccati sweep broke down; earlier nodes
    /// hold NaN.
    pub breakdown: Option<f64>,
}

impl ScalarSeries {
    pub fn min_p(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// NaN when the state sweep was not run.
    pub fn max_abs_x(&self) -> f64 {
        if self.x.iter().any(|v| v.is_nan()) {
            return f64::NAN;
        }
        self.x.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

pub const SCALAR_METHODS: [(&str, Family); 4] = [
    ("implicit-euler", Family::EulerImplicit),
    ("implicit-midpoint", Family::RkImplicitMidpoint),
    ("trapezoidal", Family::RkTrapezoidal),
    ("magnus2", Family::Magnus2Trapezoidal),
];

/// Step of the reference solution.
pub const SCALAR_REFERENCE_H: f64 = 1e-4;

fn scalar_series(bench: &ScalarBenchmark, method: &'static str, family: Family, h: f64) -> CliResult<ScalarSeries> {
    let prob = bench.problem();
    let grid = TimeGrid::with_step(0.0, bench.tf, h)?;
    let spec = IntegratorSpec::new(family);
    let t: Vec<f64> = grid.nodes().collect();
    let rsol = match riccati::solve_riccati(&prob, &grid, &spec, &Matrix::zeros(1, 1)) {
        Ok(rsol) => rsol,
        Err(magnus_lq::Error::NewtonFailed { node, .. }) => {
            // Keep the nodes computed before the breakdown by re-solving on
            // the remaining subgrid.
            let sub = TimeGrid::new(grid.node(node + 1), bench.tf, grid.steps() - node - 1)?;
            let tail = riccati::solve_riccati(&prob, &sub, &spec, &Matrix::zeros(1, 1))?;
            let mut p = vec![f64::NAN; node + 1];
            p.extend(tail.p.iter().map(|p| p[(0, 0)]));
            return Ok(ScalarSeries {
                method,
                family,
                x: vec![f64::NAN; t.len()],
                t,
                p,
                breakdown: Some(grid.node(node)),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let state = IntegratorSpec::new(default_state_family(family));
    // Negative p may drive the closed loop unstable; that is part of the result.
    let x = match propagation::state_forward(&prob, &rsol, &Vector::from_element(1, bench.x0), &state) {
        Ok(traj) => traj.states.iter().map(|v| v[0]).collect(),
        Err(e) if e.is_divergence() => vec![f64::INFINITY; grid.len()],
        Err(e) => return Err(e.into()),
    };
    Ok(ScalarSeries {
        method,
        family,
        t,
        p: rsol.p.iter().map(|p| p[(0, 0)]).collect(),
        x,
        breakdown: None,
    })
}

/// Riccati and closed-loop state of the sigmoid-drift scalar problem for
/// each method at `h = 1/2`, plus the implicit Euler reference at
/// `h = 1e-4` (last entry, method `reference`).
pub fn cmd_scalar_demo(out_dir: Option<&Path>) -> CliResult<Vec<ScalarSeries>> {
    let bench = ScalarBenchmark::sigmoid();
    let mut series = SCALAR_METHODS
        .iter()
        .map(|(name, family)| scalar_series(&bench, name, *family, bench.h_p))
        .collect::<CliResult<Vec<_>>>()?;
    series.push(scalar_series(&bench, "reference", Family::EulerImplicit, SCALAR_REFERENCE_H)?);
    if let Some(dir) = out_dir {
        for s in &series {
            let p_rows: Vec<Vec<f64>> = s.t.iter().zip(&s.p).map(|(t, p)| vec![*t, *p]).collect();
            let x_rows: Vec<Vec<f64>> = s.t.iter().zip(&s.x).map(|(t, x)| vec![*t, *x]).collect();
            csv::write(&dir.join(format!("scalar_{}_p.csv", s.method)), &csv::render(&["t".into(), "p".into()], &p_rows))?;
            csv::write(&dir.join(format!("scalar_{}_x.csv", s.method)), &csv::render(&["t".into(), "x".into()], &x_rows))?;
        }
    }
    Ok(series)
}

pub fn render_scalar_demo(series: &[ScalarSeries]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20}{:>10}{:>14}{:>14}{:>14}", "method", "h", "min p", "p(0)", "max |x|");
    for v in series {
        let h = v.t[1] - v.t[0];
        let _ = write!(
            s,
            "{:<20}{:>10}{:>14.6}{:>14.6}{:>14.6}",
            v.method,
            h,
            v.min_p(),
            v.p[0],
            v.max_abs_x()
        );
        if let Some(t) = v.breakdown {
            let _ = write!(s, "   (no real stage solution at t = {t})");
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(h_prev / h)` against the previous row.
    pub order: Option<f64>,
}

/// Step of the fine-grid oracle.
pub const ORACLE_H: f64 = 1e-5;

/// Classical RK4 backward from `p(t_f) = 0` for `ṗ = -q - 2 a p + s p²`.
pub fn rk4_oracle(bench: &ScalarBenchmark, h: f64) -> CliResult<f64> {
    let grid = TimeGrid::with_step(0.0, bench.tf, h)?;
    let f = |t: f64, p: f64| -bench.q - 2.0 * (bench.a)(t) * p + bench.s * p * p;
    let mut p = 0.0;
    for k in (0..grid.steps()).rev() {
        let t = grid.node(k + 1);
        let k1 = f(t, p);
        let k2 = f(t - 0.5 * h, p - 0.5 * h * k1);
        let k3 = f(t - 0.5 * h, p - 0.5 * h * k2);
        let k4 = f(t - h, p - h * k3);
        p -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(p)
}

/// Error in `p(t_0)` on the smooth scalar problem for each step size.
pub fn cmd_convergence(family: Family, steps: &[f64]) -> CliResult<Vec<ConvergenceRow>> {
    if steps.is_empty() {
        return Err(CliError::Config("need at least one step size".into()));
    }
    let bench = ScalarBenchmark::smooth(steps[0])?;
    let oracle = rk4_oracle(&bench, ORACLE_H)?;
    let prob = bench.problem();
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(steps.len());
    for &h in steps {
        let grid = TimeGrid::with_step(0.0, bench.tf, h)?;
        let rsol = riccati::solve_riccati(&prob, &grid, &IntegratorSpec::new(family), &Matrix::zeros(1, 1))?;
        let error = (rsol.p[0][(0, 0)] - oracle).abs();
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (prev.h / h).ln());
        rows.push(ConvergenceRow { h, error, order });
    }
    Ok(rows)
}

pub fn render_convergence(family: Family, rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{family} on the smooth scalar problem, error in p(0)\n");
    let _ = writeln!(s, "{:>12}{:>16}{:>10}", "h", "error", "order");
    for r in rows {
        let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
        let _ = writeln!(s, "{:>12}{:>16.6e}{:>10}", r.h, r.error, order);
    }
    s
}
