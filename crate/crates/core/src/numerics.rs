//! Dense small-matrix kernels.
//!
//! Everything here works on `nalgebra` dynamic matrices. Sizes in this crate
//! are tiny (the largest generator is the 13×13 augmented Hamiltonian of a
//! six-state model), so the routines favour robustness over asymptotics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default absolute tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Condition estimates above this are treated as singular by [`solve`].
pub const SINGULAR_COND: f64 = 1e12;

/// Symmetry and definiteness diagnostics for a square matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdReport {
    pub is_symmetric: bool,
    /// Smallest eigenvalue of `(P + Pᵀ) / 2`.
    pub min_eigenvalue: f64,
    /// `max |P_ij - P_ji|`.
    pub symmetry_defect: f64,
}

impl SpdReport {
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.is_symmetric && self.min_eigenvalue >= -tol
    }
}

pub(crate) fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &Matrix, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Maximum absolute column sum.
pub fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Padé coefficients and the backward-error thresholds θ_m for the 1-norm.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, &[f64]); 4] = [
    (1.495585217958292e-2, &PADE3),
    (2.539398330063230e-1, &PADE5),
    (9.504178996162932e-1, &PADE7),
    (2.097847961257068e0, &PADE9),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé approximants
/// of degree 3 through 13.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    let n = ensure_square(m)?;
    ensure_finite(m, "expm input")?;
    let norm = one_norm(m);
    let ident = Matrix::identity(n, n);
    if norm == 0.0 {
        return Ok(ident);
    }

    for (theta, coeffs) in THETA {
        if norm <= theta {
            return finish_expm(pade_low(m, coeffs, &ident));
        }
    }

    let squarings = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = m * 2f64.powi(-squarings);
    let mut r = pade13(&scaled, &ident)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    finish_expm(Ok(r))
}

fn finish_expm(r: Result<Matrix>) -> Result<Matrix> {
    let r = r?;
    ensure_finite(&r, "expm")?;
    Ok(r)
}

fn pade_low(a: &Matrix, b: &[f64], ident: &Matrix) -> Result<Matrix> {
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u = Matrix::zeros(a.nrows(), a.ncols());
    let mut v = Matrix::zeros(a.nrows(), a.ncols());
    for k in 0..b.len() / 2 {
        v += &power * b[2 * k];
        u += &power * b[2 * k + 1];
        power = &power * &a2;
    }
    let u = a * u;
    pade_quotient(&u, &v)
}

fn pade13(a: &Matrix, ident: &Matrix) -> Result<Matrix> {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    pade_quotient(&u, &v)
}

fn pade_quotient(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let den = v - u;
    let num = v + u;
    den.lu().solve(&num).ok_or(Error::Singular {
        cond: f64::INFINITY,
    })
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`; infinite when `A` is exactly singular.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    ensure_square(a)?;
    if !a.iter().all(|v| v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    match a.clone().lu().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => Ok(one_norm(a) * one_norm(&inv)),
        _ => Ok(f64::INFINITY),
    }
}

/// Solves `A X = B`. Fails when the condition estimate of `A` exceeds
/// [`SINGULAR_COND`].
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(Error::Shape {
            context: "solve",
            expected: format!("{n} rows"),
            got: format!("{} rows", b.nrows()),
        });
    }
    ensure_finite(a, "solve matrix")?;
    ensure_finite(b, "solve right-hand side")?;
    let cond = condition_number(a)?;
    if !(cond <= SINGULAR_COND) {
        return Err(Error::Singular { cond });
    }
    a.clone().lu().solve(b).ok_or(Error::Singular { cond })
}

pub fn solve_vec(a: &Matrix, b: &Vector) -> Result<Vector> {
    let x = solve(a, &Matrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    solve(a, &Matrix::identity(n, n))
}

/// `(P + Pᵀ) / 2`.
pub fn symmetrize(p: &Matrix) -> Matrix {
    (p + p.transpose()) * 0.5
}

pub fn symmetry_defect(p: &Matrix) -> f64 {
    let n = p.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    defect
}

/// Smallest eigenvalue of the symmetric part of `p`.
pub fn min_eigenvalue(p: &Matrix) -> Result<f64> {
    ensure_square(p)?;
    ensure_finite(p, "eigenvalue input")?;
    let eig = SymmetricEigen::new(symmetrize(p));
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn spd_report(p: &Matrix, tol: f64) -> Result<SpdReport> {
    let symmetry_defect = {
        ensure_square(p)?;
        symmetry_defect(p)
    };
    Ok(SpdReport {
        is_symmetric: symmetry_defect <= tol,
        min_eigenvalue: min_eigenvalue(p)?,
        symmetry_defect,
    })
}

/// Solves the Sylvester equation `A X + X B = C` through its Kronecker form.
///
/// `A` is n×n, `B` is m×m and `C` is n×m.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    let m = ensure_square(b)?;
    if c.nrows() != n || c.ncols() != m {
        return Err(Error::Shape {
            context: "sylvester right-hand side",
            expected: format!("{n}x{m}"),
            got: format!("{}x{}", c.nrows(), c.ncols()),
        });
    }
    // Column-major vec: vec(AX) = (I ⊗ A) vec X, vec(XB) = (Bᵀ ⊗ I) vec X.
    let op = Matrix::identity(m, m).kronecker(a) + b.transpose().kronecker(&Matrix::identity(n, n));
    let rhs = Matrix::from_column_slice(n * m, 1, c.as_slice());
    let x = solve(&op, &rhs)?;
    Ok(Matrix::from_column_slice(n, m, x.as_slice()))
}

/// Solves the continuous Lyapunov equation `Aᵀ X + X A + C = 0`.
pub fn solve_lyapunov(a: &Matrix, c: &Matrix) -> Result<Matrix> {
    let x = solve_sylvester(&a.transpose(), a, &(-c))?;
    Ok(symmetrize(&x))
}

/// Stacked 2-norm of the difference of two equally long vector sequences.
pub fn sequence_distance(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e, Matrix::identity(3, 3));
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&dmatrix![1.0, 0.0; 0.0, -1.0]).unwrap();
        let want = dmatrix![std::f64::consts::E, 0.0; 0.0, (-1.0f64).exp()];
        assert!(rel_err(&e, &want) < 1e-14);
    }

    #[test]
    fn expm_nilpotent() {
        let e = expm(&dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap();
        assert!(rel_err(&e, &dmatrix![1.0, 1.0; 0.0, 1.0]) < 1e-15);
    }

    #[test]
    fn expm_large_norm_rotation() {
        // exp of a scaled rotation generator has a closed form.
        for &w in &[0.3, 4.0, 37.0, 700.0] {
            let e = expm(&dmatrix![0.0, w; -w, 0.0]).unwrap();
            let want = dmatrix![w.cos(), w.sin(); -w.sin(), w.cos()];
            assert!(rel_err(&e, &want) < 1e-12, "w = {w}: {}", rel_err(&e, &want));
        }
    }

    #[test]
    fn expm_every_pade_branch_matches_series() {
        let base = dmatrix![0.1, -0.4, 0.2; 0.3, 0.0, -0.1; -0.2, 0.5, 0.1];
        for &scale in &[0.01, 0.2, 1.0, 3.0, 8.0, 20.0] {
            let m = &base * scale;
            // Taylor series on m / 2^k followed by squaring, as an independent route.
            let k = 10;
            let small = &m / 2f64.powi(k);
            let mut term = Matrix::identity(3, 3);
            let mut sum = term.clone();
            for j in 1..30 {
                term = &term * &small / j as f64;
                sum += &term;
            }
            for _ in 0..k {
                sum = &sum * &sum;
            }
            let e = expm(&m).unwrap();
            assert!(rel_err(&e, &sum) < 1e-12, "scale {scale}");
        }
    }

    #[test]
    fn expm_rejects_bad_input() {
        assert!(matches!(
            expm(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        assert!(matches!(
            expm(&dmatrix![f64::NAN, 0.0; 0.0, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn solve_examples() {
        let b = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(solve(&Matrix::identity(2, 2), &b).unwrap(), b);
        let x = solve(&dmatrix![2.0, 0.0; 0.0, 4.0], &Matrix::identity(2, 2)).unwrap();
        assert!(rel_err(&x, &dmatrix![0.5, 0.0; 0.0, 0.25]) < 1e-15);
        match solve(&dmatrix![1.0, 1.0; 0.0, 0.0], &Matrix::identity(2, 2)) {
            Err(Error::Singular { cond }) => assert!(cond > SINGULAR_COND),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn solve_reports_shape_mismatch() {
        assert!(matches!(
            solve(&Matrix::identity(2, 2), &Matrix::zeros(3, 1)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn spd_report_examples() {
        let r = spd_report(&Matrix::identity(2, 2), 1e-12).unwrap();
        assert!(r.is_symmetric);
        assert_eq!(r.symmetry_defect, 0.0);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-15);

        let r = spd_report(&dmatrix![1.0, 0.0; 0.0, -2.0], 1e-12).unwrap();
        assert!((r.min_eigenvalue + 2.0).abs() < 1e-15);

        // Characteristic polynomial λ² - 4λ + 3 has roots 1 and 3.
        let r = spd_report(&dmatrix![2.0, 1.0; 1.0, 2.0], 1e-12).unwrap();
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-14);

        let r = spd_report(&dmatrix![1.0, 0.5; 0.0, 1.0], 1e-12).unwrap();
        assert!(!r.is_symmetric);
        assert_eq!(r.symmetry_defect, 0.5);
    }

    #[test]
    fn symmetrize_examples() {
        assert_eq!(symmetrize(&Matrix::identity(3, 3)), Matrix::identity(3, 3));
        assert_eq!(
            symmetrize(&dmatrix![0.0, 2.0; 0.0, 0.0]),
            dmatrix![0.0, 1.0; 1.0, 0.0]
        );
    }

    #[test]
    fn lyapunov_residual() {
        let a = dmatrix![-1.0, 2.0, 0.0; 0.0, -3.0, 1.0; 0.5, 0.0, -2.0];
        let c = dmatrix![2.0, 0.1, 0.0; 0.1, 1.0, 0.3; 0.0, 0.3, 1.5];
        let x = solve_lyapunov(&a, &c).unwrap();
        let res = a.transpose() * &x + &x * &a + &c;
        assert!(res.norm() < 1e-12);
        assert!(min_eigenvalue(&x).unwrap() > 0.0);
    }

    fn small_matrix(n: usize, bound: f64) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-bound..bound, n * n)
            .prop_map(move |v| Matrix::from_row_slice(n, n, &v))
    }

    fn symplectic_generator(n: usize) -> impl Strategy<Value = Matrix> {
        (small_matrix(n, 1.5), small_matrix(n, 1.5), small_matrix(n, 1.5)).prop_map(
            move |(a, b, c)| {
                let mut m = Matrix::zeros(2 * n, 2 * n);
                m.view_mut((0, 0), (n, n)).copy_from(&a);
                m.view_mut((0, n), (n, n)).copy_from(&symmetrize(&b));
                m.view_mut((n, 0), (n, n)).copy_from(&symmetrize(&c));
                m.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
                m
            },
        )
    }

    proptest! {
        #[test]
        fn expm_inverse_pair(m in (1usize..6).prop_flat_map(|n| small_matrix(n, 10.0 / n as f64))) {
            let n = m.nrows();
            let prod = expm(&m).unwrap() * expm(&(-&m)).unwrap();
            prop_assert!((prod - Matrix::identity(n, n)).norm() < 1e-10);
        }

        #[test]
        fn expm_of_hamiltonian_is_symplectic(m in (1usize..4).prop_flat_map(symplectic_generator)) {
            let n = m.nrows() / 2;
            let mut j = Matrix::zeros(2 * n, 2 * n);
            j.view_mut((0, n), (n, n)).copy_from(&Matrix::identity(n, n));
            j.view_mut((n, 0), (n, n)).copy_from(&(-Matrix::identity(n, n)));
            let phi = expm(&m).unwrap();
            let defect = (phi.transpose() * &j * &phi - &j).norm() / phi.norm_squared().max(1.0);
            prop_assert!(defect < 1e-9, "defect {}", defect);
        }

        #[test]
        fn solve_round_trips(a in (1usize..7).prop_flat_map(|n| small_matrix(n, 1.0)), shift in 3.0f64..6.0) {
            let n = a.nrows();
            let a = a + Matrix::identity(n, n) * shift;
            let b = Matrix::from_fn(n, 2, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
            let x = solve(&a, &b).unwrap();
            prop_assert!((&a * x - &b).norm() <= 1e-10 * b.norm().max(1e-300));
        }

        #[test]
        fn symmetrize_is_idempotent(p in (1usize..6).prop_flat_map(|n| small_matrix(n, 5.0))) {
            let once = symmetrize(&p);
            prop_assert_eq!(symmetrize(&once), once);
        }
    }
}
