//! Reconstruction error index.
//!
//! `e = 100 · ∫|x - x_ref| dt / ∫|x_ref| dt`, with both integrals taken by
//! the composite trapezoid rule on the common sample grid.

use alloc::vec::Vec;

use crate::signal::Interval;
use crate::{Error, Result};

fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for v in values {
        if let Some(p) = prev {
            total += 0.5 * (p + v) * dt;
        }
        prev = Some(v);
    }
    total
}

/// Error index in percent of `candidate` against `reference`.
pub fn error_index(candidate: &[f64], reference: &[f64], dt: f64) -> Result<f64> {
    if candidate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: candidate.len(),
            right: reference.len(),
        });
    }
    if reference.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            available: reference.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let denom = trapezoid(reference.iter().map(|r| r.abs()), dt);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = trapezoid(
        candidate.iter().zip(reference).map(|(c, r)| (c - r).abs()),
        dt,
    );
    Ok(100.0 * num / denom)
}

/// Error index over a window and its sub-windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Percent error over the whole window.
    pub error_index: f64,
    pub window: Interval,
    pub breakdown: Vec<(Interval, f64)>,
}

/// Error indices over consecutive sub-windows that tile one window.
///
/// Sample `k` of both sequences sits at `t0 + k dt`. The sub-windows must
/// be sorted and contiguous; the full window is their union.
pub fn windowed_error(
    candidate: &[f64],
    reference: &[f64],
    t0: f64,
    dt: f64,
    subwindows: &[Interval],
) -> Result<ErrorReport> {
    if candidate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: candidate.len(),
            right: reference.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let (first, last) = match (subwindows.first(), subwindows.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::invalid("at least one sub-window is required")),
    };
    for pair in subwindows.windows(2) {
        if (pair[1].start - pair[0].end).abs() > 0.5 * dt {
            return Err(Error::invalid("sub-windows must be contiguous and sorted"));
        }
    }
    let n = reference.len();
    let support_end = t0 + (n.saturating_sub(1)) as f64 * dt;
    let range_of = |w: Interval| -> Result<(usize, usize)> {
        let tol = 1e-7 * dt;
        if !(w.start < w.end) || w.start < t0 - tol || w.end > support_end + tol {
            return Err(Error::EmptyWindow {
                start: w.start,
                end: w.end,
            });
        }
        let lo = libm::round((w.start - t0) / dt) as usize;
        let hi = (libm::round((w.end - t0) / dt) as usize).min(n - 1);
        if hi <= lo {
            return Err(Error::EmptyWindow {
                start: w.start,
                end: w.end,
            });
        }
        Ok((lo, hi))
    };

    let window = Interval::new(first.start, last.end);
    let (lo, hi) = range_of(window)?;
    let error = error_index(&candidate[lo..=hi], &reference[lo..=hi], dt)?;
    let mut breakdown = Vec::with_capacity(subwindows.len());
    for &w in subwindows {
        let (a, b) = range_of(w)?;
        breakdown.push((w, error_index(&candidate[a..=b], &reference[a..=b], dt)?));
    }
    Ok(ErrorReport {
        error_index: error,
        window,
        breakdown,
    })
}
