//! Second-order normal forms of quadratic dynamical systems.
//!
//! Around an equilibrium `x*` a smooth field is truncated to
//! `u' = A u + ½ [uᵀ H_q u]_q` with `u = x - x*`. In modal coordinates
//! `u = Φ y` this reads `y_j' = λ_j y_j + Σ_kl C_kl^j y_k y_l`, and the
//! near-identity change `y = z + h(z, z)` with
//! `h_kl^j = C_kl^j / (λ_k + λ_l - λ_j)` removes the quadratic terms, so
//! that `z_j(t) = z_j0 e^{λ_j t}` up to third order. Mapping back gives
//! the analytic response used as an oracle for the signal-side analysis.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{condition_number, eig_complex, inverse_complex};
use crate::{Complex, Error, Result};

const EQUILIBRIUM_TOLERANCE: f64 = 1e-6;
const RICHARDSON_LIMIT: f64 = 1e-3;
const SYMMETRY_TOLERANCE: f64 = 1e-8;
const DEFECTIVE_LIMIT: f64 = 1e8;
const MODAL_CHECK_TOLERANCE: f64 = 1e-6;
const REALNESS_TOLERANCE: f64 = 1e-8;
const FIXED_POINT_TOLERANCE: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 100;

/// Default relative finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Default detuning below which `h` entries are masked, in 1/s.
pub const DEFAULT_DETUNING_FLOOR: f64 = 1e-3;

fn c64(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

fn max_abs<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The monomial `coefficient · x_i · x_j` in equation `equation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTerm {
    pub equation: usize,
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
}

/// Polynomial vector field of degree at most two:
/// `f(x) = c + L x + Σ terms`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticField {
    constant: Vec<f64>,
    linear: DMatrix<f64>,
    quadratic: Vec<QuadraticTerm>,
}

impl QuadraticField {
    pub fn new(
        constant: Vec<f64>,
        linear: DMatrix<f64>,
        quadratic: Vec<QuadraticTerm>,
    ) -> Result<Self> {
        let n = constant.len();
        if n == 0 {
            return Err(Error::invalid("vector field needs at least one state"));
        }
        if linear.nrows() != n || linear.ncols() != n {
            return Err(Error::invalid("linear part must be n×n"));
        }
        if quadratic
            .iter()
            .any(|t| t.equation >= n || t.i >= n || t.j >= n || !t.coefficient.is_finite())
        {
            return Err(Error::invalid("quadratic term index out of range"));
        }
        if constant.iter().chain(linear.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("vector field coefficients must be finite"));
        }
        Ok(QuadraticField {
            constant,
            linear,
            quadratic,
        })
    }

    /// Homogeneous field `L x + terms`.
    pub fn homogeneous(linear: DMatrix<f64>, quadratic: Vec<QuadraticTerm>) -> Result<Self> {
        Self::new(alloc::vec![0.0; linear.nrows()], linear, quadratic)
    }

    pub fn dim(&self) -> usize {
        self.constant.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.constant.clone();
        for (q, o) in out.iter_mut().enumerate() {
            for (i, xi) in x.iter().enumerate() {
                *o += self.linear[(q, i)] * xi;
            }
        }
        for t in &self.quadratic {
            out[t.equation] += t.coefficient * x[t.i] * x[t.j];
        }
        out
    }

    /// Exact Jacobian and Hessians at `x_star`.
    pub fn expand_at(&self, x_star: &[f64]) -> Result<QuadraticModel> {
        let n = self.dim();
        if x_star.len() != n {
            return Err(Error::invalid("equilibrium has the wrong dimension"));
        }
        check_equilibrium(&self.eval(x_star))?;
        let mut a = self.linear.clone();
        let mut hessians = alloc::vec![DMatrix::<f64>::zeros(n, n); n];
        for t in &self.quadratic {
            a[(t.equation, t.i)] += t.coefficient * x_star[t.j];
            a[(t.equation, t.j)] += t.coefficient * x_star[t.i];
            let h = &mut hessians[t.equation];
            h[(t.i, t.j)] += t.coefficient;
            h[(t.j, t.i)] += t.coefficient;
        }
        QuadraticModel::new(x_star.to_vec(), a, hessians)
    }
}

fn check_equilibrium(fx: &[f64]) -> Result<()> {
    let residual = libm::sqrt(fx.iter().map(|v| v * v).sum::<f64>());
    if !(residual < EQUILIBRIUM_TOLERANCE) {
        return Err(Error::NotEquilibrium { residual });
    }
    Ok(())
}

/// Second-order truncation around an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    x_star: Vec<f64>,
    a: DMatrix<f64>,
    hessians: Vec<DMatrix<f64>>,
}

impl QuadraticModel {
    pub fn new(x_star: Vec<f64>, a: DMatrix<f64>, hessians: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = x_star.len();
        if n == 0 || a.nrows() != n || a.ncols() != n || hessians.len() != n {
            return Err(Error::invalid("model dimensions disagree"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Jacobian must be finite"));
        }
        for h in &hessians {
            if h.nrows() != n || h.ncols() != n || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("Hessians must be finite n×n matrices"));
            }
            let scale = max_abs(h.iter()).max(f64::MIN_POSITIVE);
            if max_abs((h - h.transpose()).iter()) > SYMMETRY_TOLERANCE * scale {
                return Err(Error::invalid("Hessians must be symmetric"));
            }
        }
        Ok(QuadraticModel {
            x_star,
            a,
            hessians,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.x_star
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn hessians(&self) -> &[DMatrix<f64>] {
        &self.hessians
    }

    /// `A u + ½ [uᵀ H_q u]_q` for a (possibly complex) deviation `u`.
    pub fn deviation_field(&self, u: &DVector<Complex>) -> DVector<Complex> {
        let a = self.a.map(c64);
        let mut out = a * u;
        for (q, h) in self.hessians.iter().enumerate() {
            let hu = h.map(c64) * u;
            out[q] += u.dot(&hu) * 0.5;
        }
        out
    }
}

fn differences<F>(f: &F, x_star: &[f64], steps: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x_star.len();
    let shifted = |moves: &[(usize, f64)]| {
        let mut x = x_star.to_vec();
        for &(i, d) in moves {
            x[i] += d;
        }
        f(&x)
    };
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let plus = shifted(&[(j, steps[j])]);
        let minus = shifted(&[(j, -steps[j])]);
        for q in 0..n {
            a[(q, j)] = (plus[q] - minus[q]) / (2.0 * steps[j]);
        }
    }
    let mut hessians = alloc::vec![DMatrix::<f64>::zeros(n, n); n];
    for i in 0..n {
        for j in i..n {
            let (hi, hj) = (steps[i], steps[j]);
            let pp = shifted(&[(i, hi), (j, hj)]);
            let pm = shifted(&[(i, hi), (j, -hj)]);
            let mp = shifted(&[(i, -hi), (j, hj)]);
            let mm = shifted(&[(i, -hi), (j, -hj)]);
            for q in 0..n {
                let v = (pp[q] - pm[q] - mp[q] + mm[q]) / (4.0 * hi * hj);
                hessians[q][(i, j)] = v;
                hessians[q][(j, i)] = v;
            }
        }
    }
    (a, hessians)
}

/// Jacobian and Hessians of `f` at `x_star` by central differences.
///
/// The step for state `i` is `step · max(|x*_i|, 1)`. The derivatives are
/// also taken with twice that step; disagreement above `1e-3` relative is
/// reported as [`Error::StepTooSmall`].
pub fn expand_second_order<F>(f: F, x_star: &[f64], step: f64) -> Result<QuadraticModel>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    if x_star.is_empty() {
        return Err(Error::invalid("equilibrium must have at least one state"));
    }
    let fx = f(x_star);
    if fx.len() != x_star.len() {
        return Err(Error::invalid("vector field returned the wrong dimension"));
    }
    check_equilibrium(&fx)?;
    let steps: Vec<f64> = x_star.iter().map(|x| step * x.abs().max(1.0)).collect();
    let double: Vec<f64> = steps.iter().map(|h| 2.0 * h).collect();
    let (a, hessians) = differences(&f, x_star, &steps);
    let (a2, hessians2) = differences(&f, x_star, &double);

    let scale = max_abs(a.iter().chain(hessians.iter().flat_map(|h| h.iter())));
    let diff = max_abs((&a - &a2).iter()).max(
        hessians
            .iter()
            .zip(&hessians2)
            .map(|(h, h2)| max_abs((h - h2).iter()))
            .fold(0.0, f64::max),
    );
    let disagreement = if scale > 0.0 { diff / scale } else { diff };
    if !(disagreement <= RICHARDSON_LIMIT) {
        return Err(Error::StepTooSmall { disagreement });
    }
    QuadraticModel::new(x_star.to_vec(), a, hessians)
}

/// The model in modal coordinates `u = Φ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalModel {
    x_star: Vec<f64>,
    eigenvalues: Vec<Complex>,
    phi: DMatrix<Complex>,
    phi_inv: DMatrix<Complex>,
    /// `c[j][(k, l)] = C_kl^j`.
    c: Vec<DMatrix<Complex>>,
}

impl ModalModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.x_star
    }

    pub fn eigenvalues(&self) -> &[Complex] {
        &self.eigenvalues
    }

    /// Right eigenvectors as columns.
    pub fn phi(&self) -> &DMatrix<Complex> {
        &self.phi
    }

    pub fn phi_inv(&self) -> &DMatrix<Complex> {
        &self.phi_inv
    }

    /// `C_kl^j`, one matrix per `j`.
    pub fn c(&self) -> &[DMatrix<Complex>] {
        &self.c
    }

    /// `Λ y + [yᵀ C^j y]_j`.
    pub fn modal_field(&self, y: &DVector<Complex>) -> DVector<Complex> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|j| self.eigenvalues[j] * y[j] + y.dot(&(&self.c[j] * y))),
        )
    }
}

/// Scales `v` to unit norm with its largest-magnitude entry real-positive.
fn normalize_column(v: &mut DVector<Complex>) {
    let largest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v
        .iter()
        .position(|z| z.norm() >= largest * (1.0 - 1e-9))
        .unwrap_or(0);
    let rotation = v[pivot].conj() / v[pivot].norm();
    let norm = v.norm();
    for z in v.iter_mut() {
        *z = *z * rotation / norm;
    }
    v[pivot].im = 0.0;
}

fn fract(x: f64) -> f64 {
    x - libm::floor(x)
}

/// Quasi-random small complex vectors for the modal check.
fn probe_vectors(n: usize, count: usize) -> impl Iterator<Item = DVector<Complex>> {
    const G: f64 = 0.618_033_988_749_894_9;
    (0..count).map(move |s| {
        DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let k = (s * n + i) as f64;
                let a = fract(k * G + 0.1) - 0.5;
                let b = fract((k + 0.5) * G * G) - 0.5;
                Complex::new(a, b) * 1e-3
            }),
        )
    })
}

/// Diagonalizes `A` and projects the Hessians into modal coordinates.
///
/// Conjugate eigenvalues are paired exactly, with the positive-frequency
/// member first; modes are ordered by increasing `|Im λ|`, then by
/// decreasing `Re λ`. Each eigenvector has unit norm with its largest
/// entry real-positive.
pub fn to_modal(model: &QuadraticModel) -> Result<ModalModel> {
    let n = model.dim();
    let a = model.jacobian();
    let scale = max_abs(a.iter()).max(f64::MIN_POSITIVE);
    let (values, vectors) = eig_complex(&a.map(c64))?;

    let real_tol = 1e-10 * scale;
    let mut order: Vec<usize> = (0..n).filter(|&i| values[i].im >= -real_tol).collect();
    order.sort_by(|&p, &q| {
        let (x, y) = (values[p], values[q]);
        let fx = if x.im.abs() <= real_tol { 0.0 } else { x.im };
        let fy = if y.im.abs() <= real_tol { 0.0 } else { y.im };
        fx.total_cmp(&fy).then(y.re.total_cmp(&x.re))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut columns: Vec<DVector<Complex>> = Vec::with_capacity(n);
    for &i in &order {
        let mut v = vectors.column(i).into_owned();
        normalize_column(&mut v);
        if values[i].im.abs() <= real_tol {
            eigenvalues.push(c64(values[i].re));
            columns.push(v.map(|z| c64(z.re)));
        } else {
            eigenvalues.push(values[i]);
            eigenvalues.push(values[i].conj());
            columns.push(v.clone());
            columns.push(v.map(|z| z.conj()));
        }
    }
    if eigenvalues.len() != n {
        return Err(Error::Eigen(
            "eigenvalues of the Jacobian do not pair into conjugates".into(),
        ));
    }
    let mut phi = DMatrix::from_columns(&columns);
    for mut col in phi.column_iter_mut() {
        let norm = col.norm();
        col /= c64(norm);
    }
    let condition = condition_number(&phi);
    if !(condition <= DEFECTIVE_LIMIT) {
        return Err(Error::DefectiveMatrix { condition });
    }
    let phi_inv = inverse_complex(&phi)?;

    let lambda = DMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
    let lhs = a.map(c64) * &phi;
    let mismatch = (&lhs - &phi * &lambda)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if mismatch > 1e-8 * scale {
        return Err(Error::Eigen(
            "eigendecomposition failed its residual check".into(),
        ));
    }

    let projected: Vec<DMatrix<Complex>> = model
        .hessians()
        .iter()
        .map(|h| phi.transpose() * h.map(c64) * &phi)
        .collect();
    let c: Vec<DMatrix<Complex>> = (0..n)
        .map(|j| {
            let mut m = DMatrix::<Complex>::zeros(n, n);
            for (q, g) in projected.iter().enumerate() {
                m += g * (phi_inv[(j, q)] * 0.5);
            }
            (&m + m.transpose()) * c64(0.5)
        })
        .collect();

    let modal = ModalModel {
        x_star: model.equilibrium().to_vec(),
        eigenvalues,
        phi,
        phi_inv,
        c,
    };
    for y in probe_vectors(n, 10) {
        let u = &modal.phi * &y;
        let physical = &modal.phi_inv * model.deviation_field(&u);
        let modal_side = modal.modal_field(&y);
        let err = (&physical - &modal_side).norm();
        if err > MODAL_CHECK_TOLERANCE * physical.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Eigen(
                "modal quadratic form disagrees with the model".into(),
            ));
        }
    }
    Ok(modal)
}

/// Normal-form coefficients `h_kl^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HTensor {
    /// `h[j][(k, l)]`; masked entries hold zero.
    h: Vec<DMatrix<Complex>>,
    /// Masked `(j, k, l)` triples.
    masked: Vec<(usize, usize, usize)>,
    floor: f64,
}

impl HTensor {
    /// `h_kl^j = C_kl^j / (λ_k + λ_l - λ_j)`, masking entries whose
    /// detuning is below `floor`.
    pub fn from_parts(eigenvalues: &[Complex], c: &[DMatrix<Complex>], floor: f64) -> Result<Self> {
        let n = eigenvalues.len();
        if c.len() != n || c.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::invalid("coefficient tensor must be n×n×n"));
        }
        let mut h = alloc::vec![DMatrix::<Complex>::zeros(n, n); n];
        let mut masked = Vec::new();
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let detuning = eigenvalues[k] + eigenvalues[l] - eigenvalues[j];
                    if detuning.norm() < floor {
                        masked.push((j, k, l));
                    } else {
                        h[j][(k, l)] = c[j][(k, l)] / detuning;
                    }
                }
            }
        }
        Ok(HTensor { h, masked, floor })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// `h_kl^j`, or `None` when masked.
    pub fn get(&self, j: usize, k: usize, l: usize) -> Option<Complex> {
        if self.is_masked(j, k, l) {
            None
        } else {
            Some(self.h[j][(k, l)])
        }
    }

    pub fn is_masked(&self, j: usize, k: usize, l: usize) -> bool {
        self.masked.contains(&(j, k, l))
    }

    pub fn masked(&self) -> &[(usize, usize, usize)] {
        &self.masked
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `h[j]` as a matrix over `(k, l)`, masked entries zero.
    pub fn matrix(&self, j: usize) -> &DMatrix<Complex> {
        &self.h[j]
    }

    /// `[zᵀ h^j z]_j`.
    pub fn apply(&self, z: &DVector<Complex>) -> DVector<Complex> {
        DVector::from_iterator(self.dim(), self.h.iter().map(|m| z.dot(&(m * z))))
    }
}

/// Normal-form coefficients of a modal model.
pub fn h_coefficients(modal: &ModalModel, detuning_floor: f64) -> Result<HTensor> {
    HTensor::from_parts(modal.eigenvalues(), modal.c(), detuning_floor)
}

/// Normal-form initial condition for the physical state `x0`.
///
/// With `y0 = Φ⁻¹ (x0 - x*)`, solves `y0 = z0 + h(z0, z0)` by the
/// fixed-point iteration `z ← y0 - h(z, z)` from `z = y0`.
pub fn initial_z(modal: &ModalModel, h: &HTensor, x0: &[f64]) -> Result<Vec<Complex>> {
    let n = modal.dim();
    if x0.len() != n || h.dim() != n {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    let u = DVector::from_iterator(
        n,
        x0.iter().zip(modal.equilibrium()).map(|(x, s)| c64(x - s)),
    );
    let y0 = modal.phi_inv() * u;
    let tol = FIXED_POINT_TOLERANCE * y0.norm();
    let mut z = y0.clone();
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = &y0 - h.apply(&z);
        if next.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            break;
        }
        let step = (&next - &z).norm();
        z = next;
        if step <= tol {
            return Ok(z.iter().copied().collect());
        }
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_MAX_ITER,
    })
}

/// Second-order analytic response on `times`, one state vector per time.
///
/// `x(t) = x* + Φ y(t)` with
/// `y_j(t) = z_j0 e^{λ_j t} + Σ_kl h_kl^j z_k0 z_l0 e^{(λ_k + λ_l) t}`.
pub fn analytic_response(
    modal: &ModalModel,
    h: &HTensor,
    z0: &[Complex],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = modal.dim();
    if z0.len() != n || h.dim() != n {
        return Err(Error::invalid("normal-form state has the wrong dimension"));
    }
    let lambda = modal.eigenvalues();
    let mut out = Vec::with_capacity(times.len());
    let mut worst_imag: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for &t in times {
        let e: Vec<Complex> = lambda.iter().map(|l| (l * t).exp()).collect();
        let mut y = DVector::<Complex>::zeros(n);
        for j in 0..n {
            let mut acc = z0[j] * e[j];
            let hj = h.matrix(j);
            for k in 0..n {
                for l in 0..n {
                    let coeff = hj[(k, l)];
                    if coeff != Complex::new(0.0, 0.0) {
                        acc += coeff * z0[k] * z0[l] * e[k] * e[l];
                    }
                }
            }
            y[j] = acc;
        }
        let u = modal.phi() * y;
        let x: Vec<f64> = u
            .iter()
            .zip(modal.equilibrium())
            .map(|(v, s)| {
                worst_imag = worst_imag.max(v.im.abs());
                v.re + s
            })
            .collect();
        largest = largest.max(max_abs(&x));
        out.push(x);
    }
    if worst_imag > REALNESS_TOLERANCE * largest.max(f64::MIN_POSITIVE) {
        return Err(Error::NonRealResponse {
            residue: worst_imag,
        });
    }
    Ok(out)
}

/// Detuning magnitudes `|λ_k + λ_l - λ_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceDegree {
    n: usize,
    detuning: Vec<f64>,
    /// Closest `(k, l, j)` with `k <= l` and `j ∉ {k, l}`.
    pub argmin: Option<(usize, usize, usize)>,
    pub min: f64,
}

impl ResonanceDegree {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn detuning(&self, k: usize, l: usize, j: usize) -> f64 {
        self.detuning[(k * self.n + l) * self.n + j]
    }
}

/// Detuning of every triple, with the most resonant one.
pub fn resonance_degree(eigenvalues: &[Complex]) -> ResonanceDegree {
    let n = eigenvalues.len();
    let mut detuning = Vec::with_capacity(n * n * n);
    let mut argmin = None;
    let mut min = f64::INFINITY;
    for k in 0..n {
        for l in 0..n {
            for j in 0..n {
                let d = (eigenvalues[k] + eigenvalues[l] - eigenvalues[j]).norm();
                detuning.push(d);
                if k > l || j == k || j == l {
                    continue;
                }
                // on ties, distinct parents win over a self-pair
                let self_pair = matches!(argmin, Some((a, b, _)) if a == b);
                if d < min || (d == min && self_pair && k != l) {
                    min = d;
                    argmin = Some((k, l, j));
                }
            }
        }
    }
    ResonanceDegree {
        n,
        detuning,
        argmin,
        min,
    }
}
