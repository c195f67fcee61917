//! Dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works on small, dense problems: least-squares solves by
//! QR with an SVD rank check, polynomial roots through the companion matrix, and a full complex
//! eigendecomposition built from a Schur factorization.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{linalg::balancing, ComplexField, DMatrix, DVector, Schur, SVD};

use crate::{Complex, Error, Result};

const SVD_MAX_ITER: usize = 10_000;
const SCHUR_MAX_ITER: usize = 10_000;

/// Solution of a real least-squares problem.
#[derive(Debug, Clone)]
pub struct RealLstsq {
    pub solution: DVector<f64>,
    /// Numerical rank of the system matrix.
    pub rank: usize,
    /// Singular values, largest first.
    pub singular_values: Vec<f64>,
    /// Euclidean norm of `A x - b`.
    pub residual: f64,
}

/// Solution of a complex least-squares problem.
#[derive(Debug, Clone)]
pub struct ComplexLstsq {
    pub solution: DVector<Complex>,
    pub rank: usize,
    /// Ratio of largest to smallest singular value (infinite when singular).
    pub condition: f64,
    pub residual: f64,
}

fn rank_tolerance(rows: usize, cols: usize, largest: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * largest
}

fn sorted_desc(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Least-squares solution of `a x = b` and the singular values of `a`,
/// largest first.
///
/// Full column rank goes through Householder QR, which keeps accuracy near
/// machine precision; rank-deficient systems get the minimum-norm SVD
/// answer.
fn lstsq<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    b: &DVector<T>,
) -> Result<(DVector<T>, Vec<f64>, usize)> {
    let not_converged = || Error::Eigen("SVD did not converge".into());
    let values = SVD::try_new(a.clone(), false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(not_converged)?
        .singular_values;
    let sv = sorted_desc(values.iter().copied());
    let largest = sv.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(a.nrows(), a.ncols(), largest);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if rank == a.ncols() && a.nrows() >= a.ncols() {
        let qr = a.clone().qr();
        if let Some(x) = qr.r().solve_upper_triangular(&(qr.q().adjoint() * b)) {
            return Ok((x, sv, rank));
        }
    }
    let x = SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(not_converged)?
        .solve(b, tol)
        .map_err(|e| Error::Eigen(e.to_string()))?
        .column(0)
        .into_owned();
    Ok((x, sv, rank))
}

/// Least-squares solution of a real system (minimum-norm when rank
/// deficient).
pub fn lstsq_real(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<RealLstsq> {
    let (solution, singular_values, rank) = lstsq(a, b)?;
    let residual = (a * &solution - b).norm();
    Ok(RealLstsq {
        solution,
        rank,
        singular_values,
        residual,
    })
}

/// Least-squares solution of a complex system (minimum-norm when rank
/// deficient).
pub fn lstsq_complex(a: &DMatrix<Complex>, b: &DVector<Complex>) -> Result<ComplexLstsq> {
    let (solution, sv, rank) = lstsq(a, b)?;
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let residual = (a * &solution - b).norm();
    let condition = if smallest > 0.0 {
        largest / smallest
    } else {
        f64::INFINITY
    };
    Ok(ComplexLstsq {
        solution,
        rank,
        condition,
        residual,
    })
}

/// 2-norm condition number of a complex matrix.
pub fn condition_number(a: &DMatrix<Complex>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Singular values of a real matrix, largest first.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    sorted_desc(a.singular_values().iter().copied())
}

/// Roots of `z^p - c[0] z^(p-1) - ... - c[p-1]` as eigenvalues of the
/// (balanced) companion matrix.
pub fn prediction_polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex>> {
    let p = coeffs.len();
    match p {
        0 => return Ok(Vec::new()),
        1 => return Ok(alloc::vec![Complex::new(coeffs[0], 0.0)]),
        _ => {}
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (j, &c) in coeffs.iter().enumerate() {
        companion[(0, j)] = c;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    balancing::balance_parlett_reinsch(&mut companion);
    let schur = Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigen("companion Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues and unit-norm eigenvectors (as matrix columns) of a complex
/// square matrix.
///
/// The matrix is reduced to upper-triangular Schur form `T = Q* A Q`; the
/// eigenvectors of `T` come from back substitution and are mapped back
/// through `Q`.
pub fn eig_complex(a: &DMatrix<Complex>) -> Result<(Vec<Complex>, DMatrix<Complex>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;

    let eigenvalues: Vec<Complex> = (0..n).map(|i| t[(i, i)]).collect();
    let mut vectors = DMatrix::<Complex>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut x = DVector::<Complex>::zeros(n);
        x[k] = Complex::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * x[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                denom = Complex::new(small, 0.0);
            }
            x[i] = -acc / denom;
        }
        let v = &q * x;
        let norm = v.norm();
        vectors.set_column(k, &(v / Complex::new(norm, 0.0)));
    }
    Ok((eigenvalues, vectors))
}

/// Inverse of a complex square matrix by LU with partial pivoting.
pub fn inverse_complex(a: &DMatrix<Complex>) -> Result<DMatrix<Complex>> {
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("matrix is singular".into()))
}
