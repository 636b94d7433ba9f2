//! Backward integration of the matrix Riccati differential equation
//!
//! ```text
//! Ṗ = -P A - Aᵀ P + P S P - Q,   P(t_f) = P_f,   S = B R⁻¹ Bᵀ
//! ```
//!
//! Two routes are provided. [`riccati_backward`] propagates the linear
//! embedding `[V; W]` with Magnus exponentials and recovers `P = V W⁻¹`;
//! [`riccati_backward_direct`] applies classical one-step schemes to the
//! quadratic equation itself. The second-order Magnus rules keep `P_n`
//! positive semi-definite for every step size; the direct schemes do not.
//!
//! The algebraic equation `0 = -PA - AᵀP + PSP - Q` is handled by
//! [`solve_are`].

use std::fmt;
use std::str::FromStr;

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::problem::{self, LtvProblem, TimeGrid};

/// Restart the embedding (`V ← P_n`, `W ← I`) once `cond(W)` passes this.
pub const RESTART_COND: f64 = 1e6;
/// Give up when a single step leaves `W` worse conditioned than this.
pub const FAIL_COND: f64 = 1e8;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Magnus2Midpoint,
    Magnus2Trapezoidal,
    Magnus4Gauss,
    Magnus4Simpson,
    EulerExplicit,
    EulerImplicit,
    RkImplicitMidpoint,
    RkTrapezoidal,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Magnus2Midpoint,
        Family::Magnus2Trapezoidal,
        Family::Magnus4Gauss,
        Family::Magnus4Simpson,
        Family::EulerExplicit,
        Family::EulerImplicit,
        Family::RkImplicitMidpoint,
        Family::RkTrapezoidal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Magnus2Midpoint => "magnus2-midpoint",
            Family::Magnus2Trapezoidal => "magnus2-trapezoidal",
            Family::Magnus4Gauss => "magnus4-gauss",
            Family::Magnus4Simpson => "magnus4-simpson",
            Family::EulerExplicit => "euler-explicit",
            Family::EulerImplicit => "euler-implicit",
            Family::RkImplicitMidpoint => "rk-implicit-midpoint",
            Family::RkTrapezoidal => "rk-trapezoidal",
        }
    }

    pub fn is_magnus(self) -> bool {
        matches!(
            self,
            Family::Magnus2Midpoint
                | Family::Magnus2Trapezoidal
                | Family::Magnus4Gauss
                | Family::Magnus4Simpson
        )
    }

    pub fn order(self) -> u32 {
        match self {
            Family::EulerExplicit | Family::EulerImplicit => 1,
            Family::Magnus4Gauss | Family::Magnus4Simpson => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        // "magnus2" alone means the trapezoidal rule.
        if key == "magnus2" || key == "magnus" {
            return Ok(Family::Magnus2Trapezoidal);
        }
        Family::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Family::ALL.iter().map(|f| f.name()).collect();
                format!("unknown integrator `{s}`; expected one of {}", names.join(", "))
            })
    }
}

/// Quadrature description of a one-step scheme.
///
/// `nodes` are the fractions `c_i ∈ [0, 1]` of a step where the coefficient
/// matrices are sampled. For Magnus families each entry of `exponents` is one
/// exponential `exp(h Σ_i b_i M(t + c_i h))`, listed in the order they act on
/// the solution over a forward step. Baseline Runge-Kutta families carry their
/// Butcher nodes and weights in the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSpec {
    pub family: Family,
    pub nodes: Vec<f64>,
    pub exponents: Vec<Vec<f64>>,
}

impl IntegratorSpec {
    pub fn new(family: Family) -> Self {
        let sqrt3_6 = 3f64.sqrt() / 6.0;
        let (nodes, exponents) = match family {
            Family::Magnus2Midpoint => (vec![0.5], vec![vec![1.0]]),
            Family::Magnus2Trapezoidal => (vec![0.0, 1.0], vec![vec![0.5, 0.5]]),
            Family::Magnus4Gauss => {
                let alpha = 0.25 - sqrt3_6;
                let beta = 0.25 + sqrt3_6;
                (
                    vec![0.5 - sqrt3_6, 0.5 + sqrt3_6],
                    vec![vec![beta, alpha], vec![alpha, beta]],
                )
            }
            Family::Magnus4Simpson => (
                vec![0.0, 0.5, 1.0],
                vec![
                    vec![3.0 / 12.0, 4.0 / 12.0, -1.0 / 12.0],
                    vec![-1.0 / 12.0, 4.0 / 12.0, 3.0 / 12.0],
                ],
            ),
            Family::EulerExplicit => (vec![0.0], vec![vec![1.0]]),
            Family::EulerImplicit => (vec![1.0], vec![vec![1.0]]),
            Family::RkImplicitMidpoint => (vec![0.5], vec![vec![1.0]]),
            Family::RkTrapezoidal => (vec![0.0, 1.0], vec![vec![0.5, 0.5]]),
        };
        IntegratorSpec {
            family,
            nodes,
            exponents,
        }
    }

    /// All `(c_i, b_i)` pairs with a nonzero weight, across exponentials.
    pub fn quadrature_weights(&self) -> Vec<(f64, f64)> {
        self.exponents
            .iter()
            .flat_map(|row| self.nodes.iter().copied().zip(row.iter().copied()))
            .filter(|(_, b)| *b != 0.0)
            .collect()
    }
}

impl From<Family> for IntegratorSpec {
    fn from(family: Family) -> Self {
        IntegratorSpec::new(family)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositivityClass {
    /// All quadrature weights positive: positive for every step size.
    Unconditional,
    /// Some weight negative: positive only below a problem-dependent step.
    Conditional,
}

/// Classifies the quadrature inside a Magnus exponent by the signs of its
/// weights.
pub fn quadrature_positivity_class(spec: &IntegratorSpec) -> Result<PositivityClass> {
    if !spec.family.is_magnus() {
        return Err(Error::Unsupported {
            family: spec.family.name(),
            context: "positivity classification (Magnus families only)",
        });
    }
    let weights = spec.quadrature_weights();
    let total: f64 = weights.iter().map(|(_, b)| b).sum();
    if !(total > 0.0) {
        return Err(Error::NonPositiveWeights(total));
    }
    if weights.iter().all(|(_, b)| *b > 0.0) {
        Ok(PositivityClass::Unconditional)
    } else {
        Ok(PositivityClass::Conditional)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Exponents `±h Σ_i b_i M(t + c_i h)` of one Magnus step, listed in the
/// order their exponentials act on a vector.
pub fn magnus_exponents(
    m_vals: &[Matrix],
    spec: &IntegratorSpec,
    h: f64,
    direction: Direction,
) -> Result<Vec<Matrix>> {
    if !spec.family.is_magnus() {
        return Err(Error::Unsupported {
            family: spec.family.name(),
            context: "magnus_step",
        });
    }
    if m_vals.len() != spec.nodes.len() {
        return Err(Error::NodeCount {
            family: spec.family.name(),
            expected: spec.nodes.len(),
            got: m_vals.len(),
        });
    }
    let dim = numerics::ensure_square(&m_vals[0])?;
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let mut exponents: Vec<Matrix> = spec
        .exponents
        .iter()
        .map(|weights| {
            let mut exponent = Matrix::zeros(dim, dim);
            for (b, m) in weights.iter().zip(m_vals) {
                if *b != 0.0 {
                    exponent += m * (sign * h * b);
                }
            }
            exponent
        })
        .collect();
    if direction == Direction::Backward {
        exponents.reverse();
    }
    Ok(exponents)
}

/// Propagator of one Magnus step from generator samples `m_vals[i] = M(t + c_i h)`.
///
/// The backward propagator is the inverse of the forward one: exponents are
/// negated and applied in reverse order.
pub fn magnus_step(
    m_vals: &[Matrix],
    spec: &IntegratorSpec,
    h: f64,
    direction: Direction,
) -> Result<Matrix> {
    let exponents = magnus_exponents(m_vals, spec, h, direction)?;
    let dim = exponents[0].nrows();
    let mut prop = Matrix::identity(dim, dim);
    for x in &exponents {
        prop = numerics::expm(x)? * prop;
    }
    Ok(prop)
}

/// Möbius action `P ↦ (Φ11 P + Φ12)(Φ21 P + Φ22)⁻¹` of a `2n × 2n` propagator.
/// `None` when the denominator's condition number exceeds `max_cond`.
fn mobius(prop: &Matrix, p: &Matrix, max_cond: f64) -> Result<Option<(Matrix, f64)>> {
    let n = p.nrows();
    let v = prop.view((0, 0), (n, n)) * p + prop.view((0, n), (n, n));
    let w = prop.view((n, 0), (n, n)) * p + prop.view((n, n), (n, n));
    if !v.iter().chain(w.iter()).all(|x| x.is_finite()) {
        return Ok(None);
    }
    let cond = numerics::condition_number(&w)?;
    if !(cond <= max_cond) {
        return Ok(None);
    }
    match numerics::solve(&w.transpose(), &v.transpose()) {
        Ok(pt) => Ok(Some((pt.transpose(), cond))),
        Err(_) => Ok(None),
    }
}

const MAX_SPLIT: u32 = 20;

/// Same discrete map as one Magnus step, evaluated as `2^s` equal pieces of
/// each exponential with `[V; W]` renormalized to `[P; I]` between pieces.
fn split_step(exponents: &[Matrix], p: &Matrix, node: usize) -> Result<(Matrix, f64)> {
    let mut p = p.clone();
    let mut cond = 1.0;
    for x in exponents {
        let mut s = 1;
        'refine: loop {
            if s > MAX_SPLIT {
                return Err(Error::WSingular { node, cond });
            }
            let pieces = 1usize << s;
            let e = numerics::expm(&(x / pieces as f64))?;
            let mut q = p.clone();
            let mut worst: f64 = 1.0;
            for _ in 0..pieces {
                match mobius(&e, &q, RESTART_COND)? {
                    Some((next, c)) => {
                        q = numerics::symmetrize(&next);
                        worst = worst.max(c);
                    }
                    None => {
                        s += 1;
                        continue 'refine;
                    }
                }
            }
            p = q;
            cond = worst;
            break;
        }
    }
    Ok((p, cond))
}

/// Grid samples of a backward Riccati sweep; index `n` matches grid node `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    pub p: Vec<Matrix>,
    pub min_eigenvalues: Vec<f64>,
    /// Condition estimate of `W_n`; 1 for direct schemes.
    pub w_condition: Vec<f64>,
    /// `max |P_ij - P_ji|` before symmetrization.
    pub raw_symmetry_defect: Vec<f64>,
    pub restarts: usize,
}

impl RiccatiSolution {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Every `factor`-th node.
    pub fn coarsen(&self, factor: usize) -> Result<RiccatiSolution> {
        let grid = self.grid.coarsen(factor)?;
        let pick = |v: &[f64]| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        Ok(RiccatiSolution {
            grid,
            p: self.p.iter().step_by(factor).cloned().collect(),
            min_eigenvalues: pick(&self.min_eigenvalues),
            w_condition: pick(&self.w_condition),
            raw_symmetry_defect: pick(&self.raw_symmetry_defect),
            restarts: self.restarts,
        })
    }
}

fn check_final_condition(prob: &LtvProblem, p_f: &Matrix) -> Result<()> {
    let n = prob.dim_state();
    if p_f.nrows() != n || p_f.ncols() != n {
        return Err(Error::Shape {
            context: "final condition",
            expected: format!("{n}x{n}"),
            got: format!("{}x{}", p_f.nrows(), p_f.ncols()),
        });
    }
    numerics::ensure_finite(p_f, "final condition")
}

struct Recorder {
    p: Vec<Matrix>,
    min_eig: Vec<f64>,
    w_cond: Vec<f64>,
    defect: Vec<f64>,
}

impl Recorder {
    fn new(len: usize, p_f: &Matrix) -> Result<Self> {
        let mut r = Recorder {
            p: vec![Matrix::zeros(0, 0); len],
            min_eig: vec![0.0; len],
            w_cond: vec![1.0; len],
            defect: vec![0.0; len],
        };
        r.store(len - 1, p_f.clone(), 1.0)?;
        Ok(r)
    }

    fn store(&mut self, node: usize, raw: Matrix, w_cond: f64) -> Result<()> {
        numerics::ensure_finite(&raw, "Riccati iterate")?;
        self.defect[node] = numerics::symmetry_defect(&raw);
        let p = numerics::symmetrize(&raw);
        self.min_eig[node] = numerics::min_eigenvalue(&p)?;
        self.w_cond[node] = w_cond;
        self.p[node] = p;
        Ok(())
    }

    fn finish(self, grid: TimeGrid, restarts: usize) -> RiccatiSolution {
        RiccatiSolution {
            grid,
            p: self.p,
            min_eigenvalues: self.min_eig,
            w_condition: self.w_cond,
            raw_symmetry_defect: self.defect,
            restarts,
        }
    }
}

/// Backward Magnus sweep on the embedding `[V; W]`, `P_n = V_n W_n⁻¹`.
pub fn riccati_backward(
    prob: &LtvProblem,
    grid: &TimeGrid,
    spec: &IntegratorSpec,
    p_f: &Matrix,
) -> Result<RiccatiSolution> {
    if !spec.family.is_magnus() {
        return Err(Error::Unsupported {
            family: spec.family.name(),
            context: "riccati_backward (use riccati_backward_direct)",
        });
    }
    check_final_condition(prob, p_f)?;
    let n = prob.dim_state();
    let steps = grid.steps();
    let h = grid.h();

    // Generators at grid nodes are shared between neighbouring steps.
    let mut node_cache: Vec<Option<Matrix>> = vec![None; grid.len()];
    let mut generator = |t: f64, node: Option<usize>| -> Result<Matrix> {
        match node {
            Some(k) => {
                if node_cache[k].is_none() {
                    node_cache[k] = Some(problem::hamiltonian(prob, grid.node(k))?);
                }
                Ok(node_cache[k].clone().expect("filled above"))
            }
            None => problem::hamiltonian(prob, t),
        }
    };

    let mut rec = Recorder::new(grid.len(), p_f)?;
    let mut v = p_f.clone();
    let mut w = Matrix::identity(n, n);
    let mut w_cond = 1.0;
    let mut restarts = 0;

    for k in (0..steps).rev() {
        if w_cond > RESTART_COND {
            v = rec.p[k + 1].clone();
            w = Matrix::identity(n, n);
            restarts += 1;
        }
        let t = grid.node(k);
        let samples = spec
            .nodes
            .iter()
            .map(|&c| {
                let node = if c == 0.0 {
                    Some(k)
                } else if c == 1.0 {
                    Some(k + 1)
                } else {
                    None
                };
                generator(t + c * h, node)
            })
            .collect::<Result<Vec<_>>>()?;
        let exponents = magnus_exponents(&samples, spec, h, Direction::Backward)?;
        let mut prop = Matrix::identity(2 * n, 2 * n);
        for x in &exponents {
            prop = numerics::expm(x)? * prop;
        }
        let v_new = prop.view((0, 0), (n, n)) * &v + prop.view((0, n), (n, n)) * &w;
        let w_new = prop.view((n, 0), (n, n)) * &v + prop.view((n, n), (n, n)) * &w;
        let fits = v_new.iter().chain(w_new.iter()).all(|x| x.is_finite());
        let cond_new = if fits { numerics::condition_number(&w_new)? } else { f64::INFINITY };
        if cond_new <= FAIL_COND {
            v = v_new;
            w = w_new;
            w_cond = cond_new;
            // P = V W⁻¹  ⇔  Wᵀ Pᵀ = Vᵀ.
            if let Ok(pt) = numerics::solve(&w.transpose(), &v.transpose()) {
                rec.store(k, pt.transpose(), w_cond)?;
                continue;
            }
        }
        // One step alone leaves W too ill-conditioned: split it.
        let (p, cond) = split_step(&exponents, &rec.p[k + 1], k)?;
        restarts += 1;
        v = p.clone();
        w = Matrix::identity(n, n);
        w_cond = cond;
        rec.store(k, p, w_cond)?;
    }
    Ok(rec.finish(*grid, restarts))
}

/// Right-hand side `-P A - Aᵀ P + P S P - Q` of the Riccati equation.
pub fn riccati_rhs(p: &Matrix, a: &Matrix, s: &Matrix, q: &Matrix) -> Matrix {
    -(p * a) - a.transpose() * p + p * s * p - q
}

/// Frobenius norm of the algebraic Riccati residual.
pub fn are_residual(p: &Matrix, a: &Matrix, s: &Matrix, q: &Matrix) -> f64 {
    riccati_rhs(p, a, s, q).norm()
}

struct NodeData {
    a: Matrix,
    s: Matrix,
    q: Matrix,
}

fn node_data(prob: &LtvProblem, t: f64) -> Result<NodeData> {
    Ok(NodeData {
        a: prob.a(t)?,
        s: prob.s(t)?,
        q: prob.q(t)?,
    })
}

/// Classical one-step schemes applied to the Riccati equation itself.
///
/// Implicit stages `P + τ f(P) = C` are solved by damped Newton started
/// from the previous node value, so the iteration follows the branch that
/// is continuous in the step size.
pub fn riccati_backward_direct(
    prob: &LtvProblem,
    grid: &TimeGrid,
    spec: &IntegratorSpec,
    p_f: &Matrix,
) -> Result<RiccatiSolution> {
    if spec.family.is_magnus() {
        return Err(Error::Unsupported {
            family: spec.family.name(),
            context: "riccati_backward_direct (use riccati_backward)",
        });
    }
    check_final_condition(prob, p_f)?;
    let h = grid.h();
    let mut rec = Recorder::new(grid.len(), p_f)?;
    let mut next = node_data(prob, grid.node(grid.steps()))?;

    for k in (0..grid.steps()).rev() {
        let here = node_data(prob, grid.node(k))?;
        let p_next = &rec.p[k + 1];
        let p = match spec.family {
            Family::EulerExplicit => p_next - riccati_rhs(p_next, &next.a, &next.s, &next.q) * h,
            Family::EulerImplicit => implicit_stage(h, &here, p_next, p_next, k)?,
            Family::RkImplicitMidpoint => {
                let mid = node_data(prob, grid.node(k) + 0.5 * h)?;
                let y = implicit_stage(0.5 * h, &mid, p_next, p_next, k)?;
                y * 2.0 - p_next
            }
            Family::RkTrapezoidal => {
                let rhs = p_next - riccati_rhs(p_next, &next.a, &next.s, &next.q) * (0.5 * h);
                implicit_stage(0.5 * h, &here, &rhs, p_next, k)?
            }
            _ => unreachable!("Magnus families rejected above"),
        };
        rec.store(k, p, 1.0)?;
        next = here;
    }
    Ok(rec.finish(*grid, 0))
}

/// Solves `P + τ f(P) = C` with `f` the Riccati right-hand side at `d`.
///
/// Newton starts from `guess` (the previous node value). If it fails, the
/// stabilizing solution of the equivalent algebraic Riccati equation
/// `-P A' - A'ᵀ P + P S P - Q' = 0`, `A' = A - I/(2τ)`, `Q' = Q + C/τ`,
/// is used as a second starting point.
fn implicit_stage(tau: f64, d: &NodeData, c: &Matrix, guess: &Matrix, node: usize) -> Result<Matrix> {
    match stage_newton(tau, d, c, guess.clone()) {
        Some(p) => Ok(p),
        None => {
            let n = d.a.nrows();
            let shifted_a = &d.a - Matrix::identity(n, n) * (0.5 / tau);
            let shifted_q = numerics::symmetrize(&(&d.q + c / tau));
            solve_are(&shifted_a, &d.s, &shifted_q)
                .ok()
                .and_then(|seed| stage_newton(tau, d, c, seed))
                .ok_or(Error::NewtonFailed {
                    node,
                    iterations: NEWTON_MAX_ITER,
                })
        }
    }
}

fn stage_newton(tau: f64, d: &NodeData, c: &Matrix, start: Matrix) -> Option<Matrix> {
    let n = d.a.nrows();
    let ident = Matrix::identity(n, n);
    let residual = |p: &Matrix| p + riccati_rhs(p, &d.a, &d.s, &d.q) * tau - c;
    let converged = |p: &Matrix, g: f64| g <= NEWTON_TOL * p.norm().max(1.0);
    let mut p = start;
    let mut g = residual(&p);
    let mut g_norm = g.norm();
    for _ in 0..NEWTON_MAX_ITER {
        if !g_norm.is_finite() {
            return None;
        }
        if converged(&p, g_norm) {
            return Some(p);
        }
        // J[E] = (I/2 + τ(PS - Aᵀ)) E + E (I/2 + τ(SP - A)).
        let left = &ident * 0.5 + (&p * &d.s - d.a.transpose()) * tau;
        let right = &ident * 0.5 + (&d.s * &p - &d.a) * tau;
        let step = numerics::solve_sylvester(&left, &right, &(-&g)).ok()?;
        let mut lambda = 1.0;
        loop {
            let trial = &p + &step * lambda;
            let trial_g = residual(&trial);
            let trial_norm = trial_g.norm();
            if trial_norm < g_norm || lambda < 1e-4 {
                p = trial;
                g = trial_g;
                g_norm = trial_norm;
                break;
            }
            lambda *= 0.5;
        }
    }
    converged(&p, g_norm).then_some(p)
}

/// Dispatches on the family: Magnus families use the embedding, the rest
/// the direct schemes.
pub fn solve_riccati(
    prob: &LtvProblem,
    grid: &TimeGrid,
    spec: &IntegratorSpec,
    p_f: &Matrix,
) -> Result<RiccatiSolution> {
    if spec.family.is_magnus() {
        riccati_backward(prob, grid, spec, p_f)
    } else {
        riccati_backward_direct(prob, grid, spec, p_f)
    }
}

fn max_real_eigenvalue(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn is_stabilizing(p: &Matrix, a: &Matrix, s: &Matrix) -> bool {
    let closed = a - s * p;
    closed.iter().all(|v| v.is_finite()) && max_real_eigenvalue(&closed) < 0.0
}

/// Stabilizing solution of `0 = -PA - AᵀP + PSP - Q`.
pub fn solve_are(a: &Matrix, s: &Matrix, q: &Matrix) -> Result<Matrix> {
    solve_are_seeded(a, s, q, None)
}

/// As [`solve_are`]; a stabilizing `seed` (typically the solution at a
/// nearby state) skips the initialization.
///
/// Newton–Kleinman iteration started from a stabilizing guess (zero for
/// Hurwitz `A`, otherwise Bass's shifted-Lyapunov construction), with the
/// matrix sign function on the Hamiltonian as fallback.
pub fn solve_are_seeded(a: &Matrix, s: &Matrix, q: &Matrix, seed: Option<&Matrix>) -> Result<Matrix> {
    let n = numerics::ensure_square(a)?;
    for (m, what) in [(s, "S"), (q, "Q")] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape {
                context: "solve_are",
                expected: format!("{n}x{n} {what}"),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
    }
    numerics::ensure_finite(a, "ARE A")?;
    numerics::ensure_finite(s, "ARE S")?;
    numerics::ensure_finite(q, "ARE Q")?;

    let scale = q.norm().max(1.0);
    let accept = |p: &Matrix| are_residual(p, a, s, q) <= 1e-10 * scale && is_stabilizing(p, a, s);

    let initial = match seed {
        Some(p) if is_stabilizing(p, a, s) => Some(p.clone()),
        _ => stabilizing_guess(a, s),
    };
    if let Some(p0) = initial {
        if let Ok(p) = newton_kleinman(a, s, q, p0) {
            if accept(&p) {
                return Ok(p);
            }
        }
    }
    let p = sign_function_are(a, s, q)?;
    let p = newton_kleinman(a, s, q, p.clone()).unwrap_or(p);
    if accept(&p) {
        Ok(p)
    } else {
        Err(Error::NoStabilizingSolution("residual or closed-loop check failed"))
    }
}

fn stabilizing_guess(a: &Matrix, s: &Matrix) -> Option<Matrix> {
    let n = a.nrows();
    if max_real_eigenvalue(a) < 0.0 {
        return Some(Matrix::zeros(n, n));
    }
    // Bass: with β large, (A+βI) Y + Y (A+βI)ᵀ = 2S gives Y ≻ 0 for a
    // controllable pair and A - S Y⁻¹ is Hurwitz.
    let beta = numerics::one_norm(a) + 1.0;
    let shifted = a + Matrix::identity(n, n) * beta;
    let y = numerics::solve_sylvester(&shifted, &shifted.transpose(), &(s * 2.0)).ok()?;
    let y = numerics::symmetrize(&y);
    let p0 = numerics::inverse(&y).ok()?;
    let p0 = numerics::symmetrize(&p0);
    is_stabilizing(&p0, a, s).then_some(p0)
}

fn newton_kleinman(a: &Matrix, s: &Matrix, q: &Matrix, mut p: Matrix) -> Result<Matrix> {
    for _ in 0..60 {
        let closed = a - s * &p;
        // (A - SP)ᵀ X + X (A - SP) + Q + P S P = 0.
        let next = numerics::solve_lyapunov(&closed, &(q + &p * s * &p))?;
        numerics::ensure_finite(&next, "Newton-Kleinman")?;
        let change = (&next - &p).norm();
        p = next;
        if change <= 1e-14 * p.norm().max(1.0) {
            break;
        }
    }
    Ok(p)
}

fn sign_function_are(a: &Matrix, s: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    // Stable invariant subspace of [[A, -S], [-Q, -Aᵀ]] is span [I; P].
    let mut z = Matrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-s));
    z.view_mut((n, 0), (n, n)).copy_from(&(-q));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut converged = false;
    for _ in 0..100 {
        let det = z.clone().lu().determinant().abs();
        if !(det > 0.0 && det.is_finite()) {
            break;
        }
        let c = det.powf(-1.0 / (2 * n) as f64);
        let inv = numerics::inverse(&(&z * c))
            .map_err(|_| Error::NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis"))?;
        let next = (&z * c + inv) * 0.5;
        let change = numerics::one_norm(&(&next - &z));
        z = next;
        if change <= 1e-13 * numerics::one_norm(&z) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoStabilizingSolution(
            "sign iteration did not converge (eigenvalues near the imaginary axis)",
        ));
    }
    let ident = Matrix::identity(n, n);
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(z.view((n, n), (n, n)) + &ident));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(z.view((0, 0), (n, n)) + &ident)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z.view((n, 0), (n, n))));
    let p = SVD::new(lhs, true, true)
        .solve(&rhs, 1e-14)
        .map_err(|_| Error::NoStabilizingSolution("least-squares recovery failed"))?;
    numerics::ensure_finite(&p, "sign-function ARE")?;
    Ok(numerics::symmetrize(&p))
}
