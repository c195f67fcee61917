//! Classical Prony analysis.
//!
//! A window of samples `y[k]` is modelled as `Σ B_i μ_i^k` with
//! `μ_i = e^{λ_i dt}`. The pipeline is:
//!
//! 1. least-squares linear prediction `y[k] = Σ a_m y[k-m]`,
//! 2. roots of the prediction polynomial from its companion matrix,
//!    mapped to continuous-time eigenvalues `λ = ln(μ)/dt`,
//! 3. a Gauss-Newton polish of the eigenvalues against the samples
//!    themselves (the polynomial roots lose several digits when the
//!    sampling rate is high relative to the mode frequencies),
//! 4. a Vandermonde least-squares solve for the contribution factors `B`,
//!    anchored at absolute time zero.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, lstsq_complex, lstsq_real};
use crate::signal::{Interval, Signal};
use crate::{Complex, Error, Result};

/// Imaginary parts below this (rad/s) mark a non-oscillatory mode.
pub const DC_TOLERANCE: f64 = 1e-6;
/// Two eigenvalues closer than this are considered the same.
pub const DISTINCT_TOLERANCE: f64 = 1e-9;
/// Tolerance for pairing numerically conjugate eigenvalues.
pub const PAIRING_TOLERANCE: f64 = 1e-6;
/// Condition estimate above which a Vandermonde solve is flagged.
pub const ILL_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    Dc,
    Natural,
    Resonance,
}

/// One complex exponential component `B e^{λt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub eigenvalue: Complex,
    pub contribution: Complex,
    pub kind: ModeKind,
    /// Indices of the two natural modes whose eigenvalues sum to this one.
    /// Present exactly when `kind` is [`ModeKind::Resonance`].
    pub parents: Option<(usize, usize)>,
}

impl Mode {
    pub fn new(eigenvalue: Complex, contribution: Complex) -> Self {
        let kind = if eigenvalue.im.abs() < DC_TOLERANCE {
            ModeKind::Dc
        } else {
            ModeKind::Natural
        };
        Mode {
            eigenvalue,
            contribution,
            kind,
            parents: None,
        }
    }

    pub fn resonance(eigenvalue: Complex, contribution: Complex, parents: (usize, usize)) -> Self {
        Mode {
            eigenvalue,
            contribution,
            kind: ModeKind::Resonance,
            parents: Some(parents),
        }
    }

    /// Frequency in Hz, reported as a non-negative number.
    pub fn frequency(&self) -> f64 {
        self.eigenvalue.im.abs() / (2.0 * PI)
    }

    pub fn damping(&self) -> f64 {
        self.eigenvalue.re
    }

    pub fn is_oscillatory(&self) -> bool {
        self.eigenvalue.im.abs() >= DC_TOLERANCE
    }

    /// Peak amplitude: `2|B|` for a conjugate pair, `|B|` otherwise.
    pub fn amplitude(&self) -> f64 {
        if self.is_oscillatory() {
            2.0 * self.contribution.norm()
        } else {
            self.contribution.norm()
        }
    }

    /// Phase of `B` in radians.
    pub fn phase(&self) -> f64 {
        self.contribution.arg()
    }

    pub fn value_at(&self, t: f64) -> Complex {
        self.contribution * (self.eigenvalue * t).exp()
    }
}

/// Set of modes fitted over a window, with `B` anchored at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    modes: Vec<Mode>,
    dt: f64,
    window: Interval,
}

impl ModeSet {
    /// Builds a mode set, checking conjugate closure and distinctness.
    pub fn new(modes: Vec<Mode>, dt: f64, window: Interval) -> Result<Self> {
        let set = ModeSet { modes, dt, window };
        set.check_invariants()?;
        Ok(set)
    }

    pub fn empty(dt: f64, window: Interval) -> Self {
        ModeSet {
            modes: Vec::new(),
            dt,
            window,
        }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    /// Time at which contribution factors are anchored.
    pub fn reference_time(&self) -> f64 {
        0.0
    }

    pub fn eigenvalues(&self) -> Vec<Complex> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn contributions(&self) -> Vec<Complex> {
        self.modes.iter().map(|m| m.contribution).collect()
    }

    /// Largest `|B|` over modes of the given kinds.
    pub fn max_contribution(&self, kinds: &[ModeKind]) -> f64 {
        self.modes
            .iter()
            .filter(|m| kinds.contains(&m.kind))
            .map(|m| m.contribution.norm())
            .fold(0.0, f64::max)
    }

    /// Index of the mode whose eigenvalue is conjugate to mode `i`.
    pub fn conjugate_of(&self, i: usize) -> Option<usize> {
        let target = self.modes[i].eigenvalue.conj();
        self.modes
            .iter()
            .position(|m| (m.eigenvalue - target).norm() <= pairing_tol(target))
    }

    fn is_nyquist(&self, lambda: Complex) -> bool {
        self.dt > 0.0 && (lambda.im.abs() - PI / self.dt).abs() <= 1e-9 * (PI / self.dt)
    }

    fn check_invariants(&self) -> Result<()> {
        for (i, m) in self.modes.iter().enumerate() {
            let finite = m.eigenvalue.re.is_finite()
                && m.eigenvalue.im.is_finite()
                && m.contribution.re.is_finite()
                && m.contribution.im.is_finite();
            if !finite {
                return Err(Error::invalid("mode with non-finite components"));
            }
            if (m.kind == ModeKind::Resonance) != m.parents.is_some() {
                return Err(Error::invalid(
                    "resonance modes, and only they, carry parents",
                ));
            }
            for other in &self.modes[..i] {
                if (other.eigenvalue - m.eigenvalue).norm() <= DISTINCT_TOLERANCE {
                    return Err(Error::invalid("duplicate eigenvalue in mode set"));
                }
            }
            if m.eigenvalue.im != 0.0 && !self.is_nyquist(m.eigenvalue) {
                let j = self
                    .conjugate_of(i)
                    .ok_or_else(|| Error::invalid("mode set is not conjugate-closed"))?;
                let b = self.modes[j].contribution;
                let scale = m.contribution.norm().max(1.0);
                if (b - m.contribution.conj()).norm() > 1e-6 * scale {
                    return Err(Error::invalid("conjugate modes carry non-conjugate B"));
                }
            }
        }
        Ok(())
    }

    /// Sorts by `|B|` descending; conjugate partners stay adjacent with the
    /// positive-frequency member first.
    pub(crate) fn sort_by_contribution(&mut self) {
        self.modes.sort_by(|a, b| {
            b.contribution
                .norm()
                .total_cmp(&a.contribution.norm())
                .then(b.eigenvalue.im.total_cmp(&a.eigenvalue.im))
        });
    }
}

fn pairing_tol(lambda: Complex) -> f64 {
    PAIRING_TOLERANCE * lambda.norm().max(1.0)
}

/// Smallest number of Hankel singular values holding all but `1e-8` of
/// the squared singular-value energy, capped at `max_order`.
pub fn select_order(samples: &[f64], max_order: usize) -> Result<usize> {
    let n = samples.len();
    if 2 * max_order >= n {
        return Err(Error::TooFewSamples {
            needed: 2 * max_order + 1,
            available: n,
        });
    }
    if samples.iter().all(|&v| v == 0.0) {
        return Ok(0);
    }
    // A wide Hankel matrix separates slowly decaying modes far better
    // than a (max_order + 1)-column one.
    let cols = (n / 2).min(256).max(max_order + 1);
    let rows = n - cols + 1;
    let hankel = DMatrix::from_fn(rows, cols, |i, j| samples[i + j]);
    let sv = linalg::singular_values(&hankel);
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    for (r, s) in sv.iter().enumerate() {
        acc += s * s;
        if acc >= (1.0 - 1e-8) * total {
            return Ok((r + 1).min(max_order));
        }
    }
    Ok(max_order)
}

/// Linear-prediction coefficients and the norm of the prediction residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

/// Least-squares solution of `y[k] = Σ_{m=1..p} a_m y[k-m]` over every
/// valid `k`, by SVD.
pub fn linear_prediction_coeffs(samples: &[f64], order: usize) -> Result<Prediction> {
    let n = samples.len();
    if order == 0 {
        return Err(Error::invalid("model order must be at least 1"));
    }
    if n < 2 * order + 1 {
        return Err(Error::TooFewSamples {
            needed: 2 * order + 1,
            available: n,
        });
    }
    let rows = n - order;
    let m = DMatrix::from_fn(rows, order, |r, c| samples[r + order - 1 - c]);
    let rhs = DVector::from_iterator(rows, samples[order..].iter().copied());
    let sol = lstsq_real(&m, &rhs)?;
    if sol.rank < order {
        return Err(Error::RankDeficient {
            rank: sol.rank,
            order,
        });
    }
    Ok(Prediction {
        coeffs: sol.solution.iter().copied().collect(),
        residual: sol.residual,
    })
}

/// Continuous-time eigenvalues `ln(μ)/dt` of the prediction polynomial's
/// roots. Roots at the origin carry no exponential and are dropped.
pub fn roots_to_eigen(coeffs: &[f64], dt: f64) -> Result<Vec<Complex>> {
    if dt == 0.0 {
        return Err(Error::ZeroStep);
    }
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    if coeffs.is_empty() {
        return Err(Error::invalid("empty prediction polynomial"));
    }
    let roots = linalg::prediction_polynomial_roots(coeffs)?;
    let scale = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(roots.len());
    for mu in roots {
        if mu.norm() <= 1e-14 * scale.max(1.0) {
            log::warn!("dropping prediction root at the origin");
            continue;
        }
        out.push(mu.ln() / dt);
    }
    Ok(out)
}

/// Result of a Vandermonde solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributions {
    /// `B` anchored at `t = 0`, one per eigenvalue.
    pub values: Vec<Complex>,
    /// Condition estimate of the window-local Vandermonde matrix.
    pub condition: f64,
    pub ill_conditioned: bool,
    /// Norm of the fit residual over the window.
    pub residual: f64,
}

/// Least-squares contribution factors for fixed eigenvalues.
///
/// Sample `k` sits at time `t_offset + k dt`. The solve runs in
/// window-local time and the result is shifted back so that `B` refers to
/// `t = 0`.
pub fn solve_contributions(
    samples: &[f64],
    eigenvalues: &[Complex],
    dt: f64,
    t_offset: f64,
) -> Result<Contributions> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let n = samples.len();
    let m = eigenvalues.len();
    if m > n {
        return Err(Error::TooManyModes {
            modes: m,
            samples: n,
        });
    }
    for (i, a) in eigenvalues.iter().enumerate() {
        if eigenvalues[..i]
            .iter()
            .any(|b| (a - b).norm() <= DISTINCT_TOLERANCE)
        {
            return Err(Error::invalid("eigenvalues must be distinct"));
        }
    }
    if m == 0 {
        let residual = libm::sqrt(samples.iter().map(|v| v * v).sum::<f64>());
        return Ok(Contributions {
            values: Vec::new(),
            condition: 1.0,
            ill_conditioned: false,
            residual,
        });
    }
    let v = DMatrix::from_fn(n, m, |k, i| (eigenvalues[i] * (k as f64 * dt)).exp());
    let rhs = DVector::from_iterator(n, samples.iter().map(|&y| Complex::new(y, 0.0)));
    let sol = lstsq_complex(&v, &rhs)?;
    let mut values = Vec::with_capacity(m);
    for (lambda, b) in eigenvalues.iter().zip(sol.solution.iter()) {
        let anchored = b * (-lambda * t_offset).exp();
        if !(anchored.re.is_finite() && anchored.im.is_finite()) {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        values.push(anchored);
    }
    let ill_conditioned = !(sol.condition <= ILL_CONDITION_LIMIT);
    if ill_conditioned {
        log::warn!(
            "Vandermonde system ill-conditioned (condition {:e})",
            sol.condition
        );
    }
    Ok(Contributions {
        values,
        condition: sol.condition,
        ill_conditioned,
        residual: sol.residual,
    })
}

/// Classical Prony fit of one channel over `window` with `order` exponentials.
pub fn fit_prony(
    signal: &Signal,
    channel: &str,
    window: Interval,
    order: usize,
) -> Result<ModeSet> {
    let (t_start, samples) = signal.window_samples(channel, window)?;
    fit_samples(samples, signal.dt(), t_start, window, order)
}

pub(crate) fn fit_samples(
    samples: &[f64],
    dt: f64,
    t_start: f64,
    window: Interval,
    order: usize,
) -> Result<ModeSet> {
    if order == 0 {
        return Err(Error::invalid("model order must be at least 1"));
    }
    if samples.len() < 2 * order + 1 {
        return Err(Error::TooFewSamples {
            needed: 2 * order + 1,
            available: samples.len(),
        });
    }
    if samples.iter().all(|&v| v == 0.0) {
        return Ok(ModeSet::empty(dt, window));
    }
    let prediction = linear_prediction_coeffs(samples, order)?;
    let mut eigenvalues = roots_to_eigen(&prediction.coeffs, dt)?;
    refine::polish(samples, dt, &mut eigenvalues);
    dedup_eigenvalues(&mut eigenvalues);
    let contributions = solve_contributions(samples, &eigenvalues, dt, t_start)?;
    let modes = eigenvalues
        .iter()
        .zip(contributions.values.iter())
        .map(|(&l, &b)| Mode::new(l, b))
        .collect();
    let mut set = ModeSet { modes, dt, window };
    enforce_conjugate_closure(&mut set);
    set.sort_by_contribution();
    Ok(set)
}

fn dedup_eigenvalues(eigenvalues: &mut Vec<Complex>) {
    let mut out: Vec<Complex> = Vec::with_capacity(eigenvalues.len());
    for &l in eigenvalues.iter() {
        if out.iter().all(|o| (o - l).norm() > DISTINCT_TOLERANCE) {
            out.push(l);
        } else {
            log::warn!("dropping repeated eigenvalue {l}");
        }
    }
    *eigenvalues = out;
}

/// Pairs numerically conjugate modes and replaces each pair by its exact
/// conjugate average. Unpaired complex modes get their mirror added.
pub(crate) fn enforce_conjugate_closure(set: &mut ModeSet) {
    let n = set.modes.len();
    let mut used = alloc::vec![false; n];
    let mut out: Vec<Mode> = Vec::with_capacity(n);
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut m = set.modes[i];
        if m.eigenvalue.im.abs() < DC_TOLERANCE {
            m.eigenvalue.im = 0.0;
            m.contribution.im = 0.0;
            if m.kind == ModeKind::Natural {
                m.kind = ModeKind::Dc;
            }
            out.push(m);
            continue;
        }
        if set.is_nyquist(m.eigenvalue) {
            out.push(m);
            continue;
        }
        let target = m.eigenvalue.conj();
        let partner = (0..n)
            .filter(|&j| !used[j])
            .filter(|&j| (set.modes[j].eigenvalue - target).norm() <= pairing_tol(target))
            .min_by(|&a, &b| {
                let da = (set.modes[a].eigenvalue - target).norm();
                let db = (set.modes[b].eigenvalue - target).norm();
                da.total_cmp(&db)
            });
        let (lambda, b) = match partner {
            Some(j) => {
                used[j] = true;
                let other = set.modes[j];
                (
                    (m.eigenvalue + other.eigenvalue.conj()) * 0.5,
                    (m.contribution + other.contribution.conj()) * 0.5,
                )
            }
            None => {
                log::warn!(
                    "mode {} has no conjugate partner; mirroring it",
                    m.eigenvalue
                );
                (m.eigenvalue, m.contribution)
            }
        };
        out.push(Mode {
            eigenvalue: lambda,
            contribution: b,
            ..m
        });
        out.push(Mode {
            eigenvalue: lambda.conj(),
            contribution: b.conj(),
            ..m
        });
    }
    set.modes = out;
}

/// Real part of `Σ B_i e^{λ_i t}` on the given times.
pub fn reconstruct(modes: &ModeSet, times: &[f64]) -> Vec<f64> {
    reconstruct_modes(modes.modes(), times)
}

pub(crate) fn reconstruct_modes(modes: &[Mode], times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| modes.iter().map(|m| m.value_at(t).re).sum())
        .collect()
}

/// Complex sum `Σ B_i e^{λ_i t}`, used to check realness.
pub fn reconstruct_complex(modes: &ModeSet, times: &[f64]) -> Vec<Complex> {
    times
        .iter()
        .map(|&t| modes.modes().iter().map(|m| m.value_at(t)).sum())
        .collect()
}

mod refine {
    //! Gauss-Newton (Levenberg-Marquardt) polish of eigenvalues against the
    //! samples. The linear coefficients are eliminated: every trial set of
    //! eigenvalues is scored by its own least-squares fit.

    use super::*;

    const MAX_ITER: usize = 60;

    #[derive(Clone, Copy)]
    enum Term {
        Real { alpha: f64 },
        Pair { alpha: f64, omega: f64 },
        Fixed(Complex),
    }

    impl Term {
        fn width(&self) -> usize {
            match self {
                Term::Pair { .. } => 2,
                _ => 1,
            }
        }

        fn params(&self) -> usize {
            match self {
                Term::Real { .. } => 1,
                Term::Pair { .. } => 2,
                Term::Fixed(_) => 0,
            }
        }
    }

    fn classify(eigenvalues: &[Complex], dt: f64) -> Vec<Term> {
        let nyquist = PI / dt;
        let mut terms = Vec::new();
        let mut used = alloc::vec![false; eigenvalues.len()];
        for (i, &l) in eigenvalues.iter().enumerate() {
            if used[i] {
                continue;
            }
            used[i] = true;
            if l.im == 0.0 {
                terms.push(Term::Real { alpha: l.re });
                continue;
            }
            if (l.im.abs() - nyquist).abs() <= 1e-9 * nyquist {
                terms.push(Term::Fixed(l));
                continue;
            }
            let partner = (0..eigenvalues.len())
                .find(|&j| !used[j] && (eigenvalues[j] - l.conj()).norm() <= pairing_tol(l));
            match partner {
                Some(j) => {
                    used[j] = true;
                    terms.push(Term::Pair {
                        alpha: l.re,
                        omega: l.im.abs(),
                    });
                }
                None => terms.push(Term::Fixed(l)),
            }
        }
        terms
    }

    fn basis(terms: &[Term], n: usize, dt: f64) -> DMatrix<f64> {
        let width: usize = terms.iter().map(Term::width).sum();
        let mut m = DMatrix::zeros(n, width);
        let mut col = 0;
        for term in terms {
            for k in 0..n {
                let t = k as f64 * dt;
                match *term {
                    Term::Real { alpha } => m[(k, col)] = libm::exp(alpha * t),
                    Term::Pair { alpha, omega } => {
                        let e = libm::exp(alpha * t);
                        m[(k, col)] = e * libm::cos(omega * t);
                        m[(k, col + 1)] = e * libm::sin(omega * t);
                    }
                    Term::Fixed(l) => m[(k, col)] = (l * t).exp().re,
                }
            }
            col += term.width();
        }
        m
    }

    fn cost(
        terms: &[Term],
        y: &DVector<f64>,
        dt: f64,
    ) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let b = basis(terms, y.len(), dt);
        let sol = lstsq_real(&b, y).ok()?;
        let r = sol.residual;
        if !r.is_finite() {
            return None;
        }
        Some((r * r, sol.solution, b))
    }

    fn jacobian(
        terms: &[Term],
        coef: &DVector<f64>,
        basis: &DMatrix<f64>,
        dt: f64,
    ) -> DMatrix<f64> {
        let n = basis.nrows();
        let np: usize = terms.iter().map(Term::params).sum();
        let mut j = DMatrix::zeros(n, basis.ncols() + np);
        j.columns_mut(0, basis.ncols()).copy_from(basis);
        let mut col = 0;
        let mut p = basis.ncols();
        for term in terms {
            for k in 0..n {
                let t = k as f64 * dt;
                match *term {
                    Term::Real { .. } => j[(k, p)] = coef[col] * t * basis[(k, col)],
                    Term::Pair { .. } => {
                        let (c1, c2) = (coef[col], coef[col + 1]);
                        let (ec, es) = (basis[(k, col)], basis[(k, col + 1)]);
                        j[(k, p)] = t * (c1 * ec + c2 * es);
                        j[(k, p + 1)] = t * (-c1 * es + c2 * ec);
                    }
                    Term::Fixed(_) => {}
                }
            }
            col += term.width();
            p += term.params();
        }
        j
    }

    fn apply(terms: &[Term], step: &[f64]) -> Vec<Term> {
        let mut i = 0;
        terms
            .iter()
            .map(|term| match *term {
                Term::Real { alpha } => {
                    i += 1;
                    Term::Real {
                        alpha: alpha + step[i - 1],
                    }
                }
                Term::Pair { alpha, omega } => {
                    i += 2;
                    Term::Pair {
                        alpha: alpha + step[i - 2],
                        omega: omega + step[i - 1],
                    }
                }
                fixed => fixed,
            })
            .collect()
    }

    fn admissible(terms: &[Term], dt: f64, span: f64) -> bool {
        let nyquist = PI / dt;
        terms.iter().all(|term| match *term {
            Term::Real { alpha } => alpha.is_finite() && alpha * span < 700.0,
            Term::Pair { alpha, omega } => {
                alpha.is_finite() && alpha * span < 700.0 && omega > 0.0 && omega < nyquist
            }
            Term::Fixed(_) => true,
        })
    }

    fn unpack(terms: &[Term]) -> Vec<Complex> {
        let mut out = Vec::new();
        for term in terms {
            match *term {
                Term::Real { alpha } => out.push(Complex::new(alpha, 0.0)),
                Term::Pair { alpha, omega } => {
                    out.push(Complex::new(alpha, omega));
                    out.push(Complex::new(alpha, -omega));
                }
                Term::Fixed(l) => out.push(l),
            }
        }
        out
    }

    /// Refines `eigenvalues` in place; leaves them untouched when no step
    /// improves the fit.
    pub(super) fn polish(samples: &[f64], dt: f64, eigenvalues: &mut Vec<Complex>) {
        let n = samples.len();
        let span = (n - 1) as f64 * dt;
        let mut terms = classify(eigenvalues, dt);
        if terms.iter().all(|t| t.params() == 0) || !admissible(&terms, dt, span) {
            return;
        }
        let y = DVector::from_column_slice(samples);
        let Some((mut f, mut coef, mut b)) = cost(&terms, &y, dt) else {
            return;
        };
        // relative residual near round-off: nothing left to polish
        let floor = 1e-26 * y.norm_squared();
        let mut mu = 1e-3;
        let mut improved = false;
        for _ in 0..MAX_ITER {
            if f <= floor {
                break;
            }
            let jac = jacobian(&terms, &coef, &b, dt);
            let r = &b * &coef - &y;
            let cols = jac.ncols();
            let scales: Vec<f64> = (0..cols)
                .map(|c| jac.column(c).norm().max(1e-300))
                .collect();
            let mut accepted = false;
            while mu < 1e10 {
                let mut aug = DMatrix::zeros(n + cols, cols);
                aug.rows_mut(0, n).copy_from(&jac);
                for c in 0..cols {
                    aug[(n + c, c)] = libm::sqrt(mu) * scales[c];
                }
                let mut rhs = DVector::zeros(n + cols);
                rhs.rows_mut(0, n).copy_from(&(-&r));
                let Ok(sol) = lstsq_real(&aug, &rhs) else {
                    return;
                };
                let step: Vec<f64> = sol.solution.iter().skip(b.ncols()).copied().collect();
                let trial = apply(&terms, &step);
                if admissible(&trial, dt, span) {
                    if let Some((ft, ct, bt)) = cost(&trial, &y, dt) {
                        if ft < f {
                            let gain = (f - ft) / f;
                            terms = trial;
                            f = ft;
                            coef = ct;
                            b = bt;
                            mu = (mu * 0.1).max(1e-12);
                            accepted = true;
                            improved = true;
                            if gain < 1e-12 {
                                mu = 1e10;
                            }
                            break;
                        }
                    }
                }
                mu *= 10.0;
            }
            if !accepted || mu >= 1e10 {
                break;
            }
        }
        if improved {
            *eigenvalues = unpack(&terms);
        }
    }
}
