//! Benchmark problems: the scalar Riccati counterexamples, the quadrotor
//! attitude model, and constant linear dynamics.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::dmatrix;

use crate::error::{Error, Result};
use crate::nonlinear::NonlinearProblem;
use crate::numerics::{self, Matrix, Vector};
use crate::problem::{LtvProblem, TimeGrid};

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar problem `ṗ = -q - 2 a(t) p + s p²` in reversed time, i.e. the
/// Riccati equation of `ẋ = a x + √s u` with weights `q` and 1.
#[derive(Clone)]
pub struct ScalarBenchmark {
    pub q: f64,
    pub s: f64,
    pub a: ScalarMap,
    pub tf: f64,
    /// Step of the Riccati sweep.
    pub h_p: f64,
    /// Step of the state sweep.
    pub h_x: f64,
    pub x0: f64,
}

impl fmt::Debug for ScalarBenchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarBenchmark")
            .field("q", &self.q)
            .field("s", &self.s)
            .field("tf", &self.tf)
            .field("h_p", &self.h_p)
            .field("h_x", &self.h_x)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl ScalarBenchmark {
    pub fn new<F>(q: f64, s: f64, a: F, tf: f64, h: f64, x0: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(q > 0.0 && s > 0.0) {
            return Err(Error::NonPositiveWeights(q.min(s)));
        }
        let bench = ScalarBenchmark {
            q,
            s,
            a: Arc::new(a),
            tf,
            h_p: h,
            h_x: h,
            x0,
        };
        bench.grid_p()?;
        Ok(bench)
    }

    /// Sigmoid drift `a(t) = 10 / (1 + e^{-4(t-5)})` on `[0, 10]`, `q = s = 1`,
    /// `h = 1/2`, `x0 = 1`.
    pub fn sigmoid() -> Self {
        Self::new(1.0, 1.0, |t| 10.0 / (1.0 + (-4.0 * (t - 5.0)).exp()), 10.0, 0.5, 1.0)
            .expect("valid constants")
    }

    /// `a = 0` on the last step before `t_f = 10`, `a = -5` elsewhere.
    pub fn piecewise(h: f64) -> Result<Self> {
        let tf = 10.0;
        Self::new(1.0, 1.0, move |t| if t >= tf - h - 1e-12 { 0.0 } else { -5.0 }, tf, h, 1.0)
    }

    /// Constant drift; `a = 0` gives `p(t) = tanh(t_f - t)`.
    pub fn constant(a: f64, tf: f64, h: f64) -> Result<Self> {
        Self::new(1.0, 1.0, move |_| a, tf, h, 1.0)
    }

    /// Smooth drift `a(t) = 0.1 sin t` on `[0, 1]`.
    pub fn smooth(h: f64) -> Result<Self> {
        Self::new(1.0, 1.0, |t: f64| 0.1 * t.sin(), 1.0, h, 1.0)
    }

    pub fn grid_p(&self) -> Result<TimeGrid> {
        TimeGrid::with_step(0.0, self.tf, self.h_p)
    }

    pub fn grid_x(&self) -> Result<TimeGrid> {
        TimeGrid::with_step(0.0, self.tf, self.h_x)
    }

    pub fn problem(&self) -> LtvProblem {
        scalar_problem(self)
    }
}

/// `A = a(t)`, `B = √s`, `Q = q`, `R = 1`.
pub fn scalar_problem(bench: &ScalarBenchmark) -> LtvProblem {
    let a = bench.a.clone();
    let (q, b) = (bench.q, bench.s.sqrt());
    LtvProblem::new(
        1,
        1,
        move |t| dmatrix![a(t)],
        move |_| dmatrix![b],
        move |_| dmatrix![q],
        |_| dmatrix![1.0],
    )
}

/// Rigid-body attitude constants; the relative inertias are derived on
/// demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    pub ix: f64,
    pub iy: f64,
    pub iz: f64,
    /// Arm length.
    pub l: f64,
    /// Inflow ratio.
    pub lambda: f64,
    /// Split of each gyroscopic product between the two rate factors.
    pub alpha: [f64; 3],
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        QuadrotorParams {
            ix: 0.0075,
            iy: 0.0075,
            iz: 0.0130,
            l: 0.23,
            lambda: 1.0,
            alpha: [1.0; 3],
        }
    }
}

impl QuadrotorParams {
    pub fn i1(&self) -> f64 {
        (self.iy - self.iz) / self.ix
    }

    pub fn i2(&self) -> f64 {
        (self.iz - self.ix) / self.iy
    }

    pub fn i3(&self) -> f64 {
        (self.ix - self.iy) / self.iz
    }

    pub fn validate(&self) -> Result<()> {
        let values = [self.ix, self.iy, self.iz, self.l, self.lambda, self.alpha[0], self.alpha[1], self.alpha[2]];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadrotor parameters"));
        }
        if self.ix <= 0.0 || self.iy <= 0.0 || self.iz <= 0.0 {
            return Err(Error::NonPositiveWeights(self.ix.min(self.iy).min(self.iz)));
        }
        Ok(())
    }
}

/// Attitude model with state `(φ, φ̇, θ, θ̇, ψ, ψ̇)` and three torque inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrotorModel {
    pub params: QuadrotorParams,
    q: Matrix,
    r: Matrix,
    b: Matrix,
}

impl QuadrotorModel {
    pub fn new(params: QuadrotorParams, q: Matrix, r: Matrix) -> Result<Self> {
        params.validate()?;
        if q.shape() != (6, 6) || r.shape() != (3, 3) {
            return Err(Error::Shape {
                context: "quadrotor weights",
                expected: "Q 6x6, R 3x3".into(),
                got: format!("Q {}x{}, R {}x{}", q.nrows(), q.ncols(), r.nrows(), r.ncols()),
            });
        }
        let mut b = Matrix::zeros(6, 3);
        b[(1, 0)] = params.l / params.ix;
        b[(3, 1)] = params.l / params.iy;
        b[(5, 2)] = 1.0 / params.iz;
        Ok(QuadrotorModel { params, q, r, b })
    }

    pub fn default_weights() -> (Matrix, Matrix) {
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.1, 1.0, 0.1, 1.0, 0.1])) * 0.01;
        let r = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.1, 1.0]));
        (q, r)
    }

    pub fn weights(&self) -> (&Matrix, &Matrix) {
        (&self.q, &self.r)
    }

    pub fn input_matrix(&self) -> &Matrix {
        &self.b
    }

    fn gyro(&self) -> [f64; 3] {
        let p = &self.params;
        [p.lambda * p.i1(), p.lambda * p.i2(), p.lambda * p.i3()]
    }
}

impl Default for QuadrotorModel {
    fn default() -> Self {
        let (q, r) = Self::default_weights();
        Self::new(QuadrotorParams::default(), q, r).expect("valid constants")
    }
}

impl NonlinearProblem for QuadrotorModel {
    fn dim_state(&self) -> usize {
        6
    }

    fn dim_control(&self) -> usize {
        3
    }

    fn f_a(&self, _t: f64, x: &Vector) -> Vector {
        let [g1, g2, g3] = self.gyro();
        Vector::from_vec(vec![x[1], g1 * x[3] * x[5], x[3], g2 * x[1] * x[5], x[5], g3 * x[1] * x[3]])
    }

    fn f_b(&self, _t: f64, _x: &Vector, u: &Vector) -> Vector {
        &self.b * u
    }

    fn sdre_a(&self, _t: f64, x: &Vector) -> Matrix {
        let [g1, g2, g3] = self.gyro();
        let [a1, a2, a3] = self.params.alpha;
        let mut a = Matrix::zeros(6, 6);
        a[(0, 1)] = 1.0;
        a[(2, 3)] = 1.0;
        a[(4, 5)] = 1.0;
        a[(1, 3)] = a1 * g1 * x[5];
        a[(1, 5)] = (1.0 - a1) * g1 * x[3];
        a[(3, 1)] = a2 * g2 * x[5];
        a[(3, 5)] = (1.0 - a2) * g2 * x[1];
        a[(5, 1)] = a3 * g3 * x[3];
        a[(5, 3)] = (1.0 - a3) * g3 * x[1];
        a
    }

    fn sdre_b(&self, _t: f64, _x: &Vector) -> Matrix {
        self.b.clone()
    }

    fn jac_x_fa(&self, _t: f64, x: &Vector) -> Matrix {
        let [g1, g2, g3] = self.gyro();
        let mut j = Matrix::zeros(6, 6);
        j[(0, 1)] = 1.0;
        j[(2, 3)] = 1.0;
        j[(4, 5)] = 1.0;
        j[(1, 3)] = g1 * x[5];
        j[(1, 5)] = g1 * x[3];
        j[(3, 1)] = g2 * x[5];
        j[(3, 5)] = g2 * x[1];
        j[(5, 1)] = g3 * x[3];
        j[(5, 3)] = g3 * x[1];
        j
    }

    fn jac_x_fb(&self, _t: f64, _x: &Vector, _u: &Vector) -> Matrix {
        Matrix::zeros(6, 6)
    }

    fn jac_u_fb(&self, _t: f64, _x: &Vector, _u: &Vector) -> Matrix {
        self.b.clone()
    }

    fn q(&self, _t: f64, _x: &Vector) -> Matrix {
        self.q.clone()
    }

    fn r(&self, _t: f64, _x: &Vector) -> Matrix {
        self.r.clone()
    }
}

/// Initial attitude `(70°, 10, 70°, 20, -130°, -1)`, angles in radians.
pub fn quadrotor_initial_state() -> Vector {
    let d = PI / 180.0;
    Vector::from_vec(vec![70.0 * d, 10.0, 70.0 * d, 20.0, -130.0 * d, -1.0])
}

/// Model with default constants and weights, `t ∈ [0, 10]` with
/// `h = 0.125`, and the initial attitude.
pub fn quadrotor_benchmark() -> (QuadrotorModel, TimeGrid, Vector) {
    let grid = TimeGrid::with_step(0.0, 10.0, 0.125).expect("valid grid");
    (QuadrotorModel::default(), grid, quadrotor_initial_state())
}

/// Constant linear dynamics `Ẋ = A X + B u` seen as a nonlinear problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl LinearModel {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        LtvProblem::constant(a.clone(), b.clone(), q.clone(), r.clone())?;
        for m in [&a, &b, &q, &r] {
            numerics::ensure_finite(m, "linear model")?;
        }
        Ok(LinearModel { a, b, q, r })
    }

    pub fn ltv(&self) -> LtvProblem {
        LtvProblem::constant(self.a.clone(), self.b.clone(), self.q.clone(), self.r.clone())
            .expect("validated at construction")
    }
}

impl NonlinearProblem for LinearModel {
    fn dim_state(&self) -> usize {
        self.a.nrows()
    }

    fn dim_control(&self) -> usize {
        self.b.ncols()
    }

    fn f_a(&self, _t: f64, x: &Vector) -> Vector {
        &self.a * x
    }

    fn f_b(&self, _t: f64, _x: &Vector, u: &Vector) -> Vector {
        &self.b * u
    }

    fn sdre_a(&self, _t: f64, _x: &Vector) -> Matrix {
        self.a.clone()
    }

    fn sdre_b(&self, _t: f64, _x: &Vector) -> Matrix {
        self.b.clone()
    }

    fn jac_x_fa(&self, _t: f64, _x: &Vector) -> Matrix {
        self.a.clone()
    }

    fn jac_x_fb(&self, _t: f64, x: &Vector, _u: &Vector) -> Matrix {
        Matrix::zeros(x.len(), x.len())
    }

    fn jac_u_fb(&self, _t: f64, _x: &Vector, _u: &Vector) -> Matrix {
        self.b.clone()
    }

    fn q(&self, _t: f64, _x: &Vector) -> Matrix {
        self.q.clone()
    }

    fn r(&self, _t: f64, _x: &Vector) -> Matrix {
        self.r.clone()
    }
}
