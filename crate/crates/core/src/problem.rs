//! LQ problem instances, the Hamiltonian generator of the linear embedding,
//! and cost quadrature.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, SpdReport, Vector};

/// Equidistant grid `t_n = t0 + n h`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    steps: usize,
    h: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite()) || tf <= t0 {
            return Err(Error::InvalidGrid(format!("need t0 < tf, got [{t0}, {tf}]")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        Ok(TimeGrid {
            t0,
            tf,
            steps,
            h: (tf - t0) / steps as f64,
        })
    }

    /// Grid with step `h`, which must divide `tf - t0` (to 1e-9 relative).
    pub fn with_step(t0: f64, tf: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {h}")));
        }
        let ratio = (tf - t0) / h;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "step {h} does not divide [{t0}, {tf}]"
            )));
        }
        Self::new(t0, tf, steps as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    /// Number of steps `N`; there are `N + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.tf
        } else {
            self.t0 + n as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|n| self.node(n))
    }

    /// Every `factor`-th node of this grid.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps
            )));
        }
        TimeGrid::new(self.t0, self.tf, self.steps / factor)
    }

    /// Piecewise-linear interpolation of node values at time `t`
    /// (clamped to the grid).
    pub fn interpolate<T>(&self, values: &[T], t: f64) -> T
    where
        T: Clone + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        debug_assert_eq!(values.len(), self.len());
        let x = ((t - self.t0) / self.h).clamp(0.0, self.steps as f64);
        let lo = (x.floor() as usize).min(self.steps);
        let frac = x - lo as f64;
        if frac < 1e-12 || lo == self.steps {
            return values[lo].clone();
        }
        if frac > 1.0 - 1e-12 {
            return values[lo + 1].clone();
        }
        values[lo].clone() * (1.0 - frac) + values[lo + 1].clone() * frac
    }
}

type MatrixMap = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;

/// Time-varying LQ problem `min ∫ XᵀQX + uᵀRu`, `Ẋ = A X + B u`.
///
/// Coefficients are evaluation maps. They must be pure: the solvers evaluate
/// them repeatedly and from several threads.
#[derive(Clone)]
pub struct LtvProblem {
    n: usize,
    m: usize,
    a: MatrixMap,
    b: MatrixMap,
    q: MatrixMap,
    r: MatrixMap,
}

impl fmt::Debug for LtvProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LtvProblem")
            .field("dim_state", &self.n)
            .field("dim_control", &self.m)
            .finish_non_exhaustive()
    }
}

impl LtvProblem {
    pub fn new<A, B, Q, R>(dim_state: usize, dim_control: usize, a: A, b: B, q: Q, r: R) -> Self
    where
        A: Fn(f64) -> Matrix + Send + Sync + 'static,
        B: Fn(f64) -> Matrix + Send + Sync + 'static,
        Q: Fn(f64) -> Matrix + Send + Sync + 'static,
        R: Fn(f64) -> Matrix + Send + Sync + 'static,
    {
        LtvProblem {
            n: dim_state,
            m: dim_control,
            a: Arc::new(a),
            b: Arc::new(b),
            q: Arc::new(q),
            r: Arc::new(r),
        }
    }

    pub fn constant(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let p = LtvProblem::new(
            n,
            m,
            move |_| a.clone(),
            move |_| b.clone(),
            move |_| q.clone(),
            move |_| r.clone(),
        );
        // Validate shapes once up front.
        p.a(0.0)?;
        p.b(0.0)?;
        p.q(0.0)?;
        p.r(0.0)?;
        Ok(p)
    }

    /// Problem whose coefficients are node values on `grid`, linearly
    /// interpolated between nodes.
    pub fn sampled(
        grid: TimeGrid,
        a: Vec<Matrix>,
        b: Vec<Matrix>,
        q: Vec<Matrix>,
        r: Vec<Matrix>,
    ) -> Result<Self> {
        for (len, what) in [(a.len(), "A"), (b.len(), "B"), (q.len(), "Q"), (r.len(), "R")] {
            if len != grid.len() {
                return Err(Error::Shape {
                    context: "sampled problem",
                    expected: format!("{} {what} samples", grid.len()),
                    got: len.to_string(),
                });
            }
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        let (a, b, q, r) = (Arc::new(a), Arc::new(b), Arc::new(q), Arc::new(r));
        Ok(LtvProblem::new(
            n,
            m,
            move |t| grid.interpolate(&a, t),
            move |t| grid.interpolate(&b, t),
            move |t| grid.interpolate(&q, t),
            move |t| grid.interpolate(&r, t),
        ))
    }

    pub fn dim_state(&self) -> usize {
        self.n
    }

    pub fn dim_control(&self) -> usize {
        self.m
    }

    fn eval(&self, map: &MatrixMap, t: f64, rows: usize, cols: usize, what: &'static str) -> Result<Matrix> {
        let v = map(t);
        if v.nrows() != rows || v.ncols() != cols {
            return Err(Error::Shape {
                context: what,
                expected: format!("{rows}x{cols}"),
                got: format!("{}x{}", v.nrows(), v.ncols()),
            });
        }
        numerics::ensure_finite(&v, what)?;
        Ok(v)
    }

    pub fn a(&self, t: f64) -> Result<Matrix> {
        self.eval(&self.a, t, self.n, self.n, "A(t)")
    }

    pub fn b(&self, t: f64) -> Result<Matrix> {
        self.eval(&self.b, t, self.n, self.m, "B(t)")
    }

    pub fn q(&self, t: f64) -> Result<Matrix> {
        self.eval(&self.q, t, self.n, self.n, "Q(t)")
    }

    pub fn r(&self, t: f64) -> Result<Matrix> {
        self.eval(&self.r, t, self.m, self.m, "R(t)")
    }

    /// `R⁻¹(t) Bᵀ(t)`, so that `u = -K P X` with `K` this matrix.
    pub fn input_gain(&self, t: f64) -> Result<Matrix> {
        numerics::solve(&self.r(t)?, &self.b(t)?.transpose())
    }

    /// `S(t) = B R⁻¹ Bᵀ`, symmetrized.
    pub fn s(&self, t: f64) -> Result<Matrix> {
        Ok(numerics::symmetrize(&(self.b(t)? * self.input_gain(t)?)))
    }

    /// Checks the weight assumptions at `t`: `Q` symmetric psd, `R` symmetric pd.
    pub fn check_weights(&self, t: f64, tol: f64) -> Result<(SpdReport, SpdReport)> {
        let q = numerics::spd_report(&self.q(t)?, tol)?;
        let r = numerics::spd_report(&self.r(t)?, tol)?;
        Ok((q, r))
    }
}

/// Generator `[[-Aᵀ, -Q], [-S, A]]` of the embedding `d/dt [V; W]`.
pub fn hamiltonian(prob: &LtvProblem, t: f64) -> Result<Matrix> {
    Ok(hamiltonian_from_blocks(&prob.a(t)?, &prob.s(t)?, &prob.q(t)?))
}

pub fn hamiltonian_from_blocks(a: &Matrix, s: &Matrix, q: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(-a.transpose()));
    h.view_mut((0, n), (n, n)).copy_from(&(-q));
    h.view_mut((n, 0), (n, n)).copy_from(&(-s));
    h.view_mut((n, n), (n, n)).copy_from(a);
    h
}

/// Sampled state and control history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub cost: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least two nodes")
    }
}

/// `xᵀ Q x + uᵀ R u`.
pub fn running_cost(x: &Vector, u: &Vector, q: &Matrix, r: &Matrix) -> f64 {
    x.dot(&(q * x)) + u.dot(&(r * u))
}

/// Composite trapezoidal rule over node values with step `h`.
pub fn trapezoid(h: f64, values: &[f64]) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => h * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Trapezoidal approximation of `∫ XᵀQX + uᵀRu dt` on the trajectory's grid.
pub fn cost(prob: &LtvProblem, traj: &Trajectory) -> Result<f64> {
    let values = running_costs(&traj.grid, &traj.states, &traj.controls, |t, _| {
        Ok((prob.q(t)?, prob.r(t)?))
    })?;
    Ok(trapezoid(traj.grid.h(), &values))
}

/// Integrand values per node; `weights(t, x)` supplies `(Q, R)`.
pub fn running_costs<F>(
    grid: &TimeGrid,
    states: &[Vector],
    controls: &[Vector],
    mut weights: F,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &Vector) -> Result<(Matrix, Matrix)>,
{
    if states.len() != grid.len() || controls.len() != grid.len() {
        return Err(Error::Shape {
            context: "cost",
            expected: format!("{} states and controls", grid.len()),
            got: format!("{} states, {} controls", states.len(), controls.len()),
        });
    }
    states
        .iter()
        .zip(controls)
        .enumerate()
        .map(|(n, (x, u))| {
            let (q, r) = weights(grid.node(n), x)?;
            Ok(running_cost(x, u, &q, &r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn scalar(a: f64, b: f64, q: f64, r: f64) -> LtvProblem {
        LtvProblem::constant(dmatrix![a], dmatrix![b], dmatrix![q], dmatrix![r]).unwrap()
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(0.0, 10.0, 80).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.len(), 81);
        assert_eq!(g.node(80), 10.0);
        assert_eq!(g.node(8), 1.0);
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert_eq!(TimeGrid::with_step(0.0, 10.0, 0.125).unwrap().steps(), 80);
        assert!(TimeGrid::with_step(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn scalar_hamiltonian() {
        let h = hamiltonian(&scalar(0.7, 2.0, 3.0, 0.5), 0.0).unwrap();
        assert!((h - dmatrix![-0.7, -3.0; -8.0, 0.7]).norm() < 1e-15);
    }

    #[test]
    fn identity_weights_hamiltonian() {
        let i2 = Matrix::identity(2, 2);
        let p = LtvProblem::constant(Matrix::zeros(2, 2), i2.clone(), i2.clone(), i2).unwrap();
        let h = hamiltonian(&p, 1.0).unwrap();
        let mut want = Matrix::zeros(4, 4);
        for i in 0..2 {
            want[(i, i + 2)] = -1.0;
            want[(i + 2, i)] = -1.0;
        }
        assert_eq!(h, want);
    }

    #[test]
    fn singular_r_is_reported() {
        let p = LtvProblem::constant(
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            dmatrix![1.0, 1.0; 1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(hamiltonian(&p, 0.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn shape_errors() {
        let bad = LtvProblem::new(
            2,
            1,
            |_| Matrix::zeros(2, 2),
            |_| Matrix::zeros(1, 1),
            |_| Matrix::zeros(2, 2),
            |_| Matrix::identity(1, 1),
        );
        assert!(matches!(bad.b(0.0), Err(Error::Shape { .. })));
    }

    #[test]
    fn cost_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let p = scalar(0.0, 1.0, 1.0, 1.0);
        let zero = Trajectory {
            grid,
            states: vec![dvector![0.0]; 5],
            controls: vec![dvector![0.0]; 5],
            cost: 0.0,
        };
        assert_eq!(cost(&p, &zero).unwrap(), 0.0);
        let ones = Trajectory {
            states: vec![dvector![1.0]; 5],
            ..zero.clone()
        };
        assert!((cost(&p, &ones).unwrap() - 1.0).abs() < 1e-15);
        let short = Trajectory {
            states: vec![dvector![1.0]; 4],
            ..zero
        };
        assert!(matches!(cost(&p, &short), Err(Error::Shape { .. })));
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let vals: Vec<Matrix> = (0..5).map(|i| dmatrix![i as f64]).collect();
        assert_eq!(g.interpolate(&vals, 0.5), dmatrix![2.0]);
        assert!((g.interpolate(&vals, 0.375)[(0, 0)] - 1.5).abs() < 1e-15);
        assert_eq!(g.interpolate(&vals, 1.0), dmatrix![4.0]);
    }

    proptest! {
        #[test]
        fn hamiltonian_in_symplectic_algebra(
            entries in prop::collection::vec(-3.0f64..3.0, 9 + 6 + 9),
            rdiag in prop::collection::vec(0.1f64..5.0, 2),
        ) {
            let a = Matrix::from_row_slice(3, 3, &entries[..9]);
            let b = Matrix::from_row_slice(3, 2, &entries[9..15]);
            let qh = Matrix::from_row_slice(3, 3, &entries[15..]);
            let q = &qh * qh.transpose();
            let r = Matrix::from_diagonal(&Vector::from_vec(rdiag));
            let p = LtvProblem::constant(a, b, q, r).unwrap();
            let h = hamiltonian(&p, 0.0).unwrap();
            let tl = h.view((0, 0), (3, 3)).into_owned();
            let br = h.view((3, 3), (3, 3)).into_owned();
            let tr = h.view((0, 3), (3, 3)).into_owned();
            let bl = h.view((3, 0), (3, 3)).into_owned();
            prop_assert!((tl + br.transpose()).norm() < 1e-14);
            prop_assert!(numerics::symmetry_defect(&tr) < 1e-14);
            prop_assert!(numerics::symmetry_defect(&bl) < 1e-12);
            prop_assert!(numerics::min_eigenvalue(&(-bl)).unwrap() > -1e-10);
        }

        #[test]
        fn trapezoid_exact_for_linear_integrands(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, k in 1usize..5) {
            let exact = c0 + 0.5 * c1;
            for steps in [k, 2 * k, 7 * k] {
                let g = TimeGrid::new(0.0, 1.0, steps).unwrap();
                let vals: Vec<f64> = g.nodes().map(|t| c0 + c1 * t).collect();
                prop_assert!((trapezoid(g.h(), &vals) - exact).abs() < 1e-12);
            }
        }
    }
}
