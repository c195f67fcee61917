//! Resonance-aware extended Prony analysis.
//!
//! A ringdown record is split into a transient segment and a
//! post-transient segment. Classical Prony on the post-transient segment
//! gives the natural modes. Every pairwise eigenvalue sum of those modes is
//! a possible second-order resonance mode. The transient segment is then
//! fitted with eigenvalues frozen to the natural set plus the resonance
//! candidates that actually explain the data; only the contribution
//! factors are solved for.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::metrics::error_index;
use crate::prony::{self, solve_contributions, Mode, ModeKind, ModeSet, DISTINCT_TOLERANCE};
use crate::signal::{envelope, Interval, Signal};
use crate::{Complex, Error, Result};

/// How the analysis window is divided into transient and post-transient
/// segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitPolicy {
    /// Split at the given absolute time in seconds.
    Explicit(f64),
    /// Split where the amplitude envelope first drops below
    /// `envelope_fraction` times its value at the window start and stays
    /// below for at least one second.
    Automatic { envelope_fraction: f64 },
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy::Automatic {
            envelope_fraction: 0.2,
        }
    }
}

/// How long the envelope must stay under the threshold, in seconds.
const SETTLE_TIME: f64 = 1.0;

/// Divides `window` into `(start, s)` and `(s, end)`. Each segment must
/// hold at least `min_samples` samples.
pub fn split_window(
    signal: &Signal,
    channel: &str,
    window: Interval,
    policy: SplitPolicy,
    min_samples: usize,
) -> Result<(Interval, Interval)> {
    let range = signal.window_range(window)?;
    let start = signal.time(range.start);
    let end = signal.time(range.end - 1);
    let split = match policy {
        SplitPolicy::Explicit(s) => {
            if !(s > start && s < end) {
                return Err(Error::invalid("explicit split must lie inside the window"));
            }
            s
        }
        SplitPolicy::Automatic { envelope_fraction } => {
            if !(envelope_fraction > 0.0 && envelope_fraction < 1.0) {
                return Err(Error::invalid("envelope fraction must lie in (0, 1)"));
            }
            let env = envelope(signal, channel, Interval::new(start, end))?;
            automatic_split(&env.times, &env.amplitudes, envelope_fraction)?
        }
    };
    let first = Interval::new(window.start.max(start), split);
    let second = Interval::new(split, window.end.min(end));
    for seg in [first, second] {
        let available = signal.window_range(seg).map(|r| r.len()).unwrap_or(0);
        if available < min_samples {
            return Err(Error::SegmentTooShort {
                start: seg.start,
                end: seg.end,
                available,
                needed: min_samples,
            });
        }
    }
    Ok((first, second))
}

fn automatic_split(times: &[f64], amplitudes: &[f64], fraction: f64) -> Result<f64> {
    let initial = amplitudes.first().copied().unwrap_or(0.0);
    if !(initial > 0.0) {
        return Err(Error::SplitNotFound);
    }
    let threshold = fraction * initial;
    let end = *times.last().ok_or(Error::SplitNotFound)?;
    let mut i = 0;
    while i < times.len() {
        if amplitudes[i] < threshold {
            if times[i] + SETTLE_TIME > end + 1e-9 {
                break;
            }
            let breach = (i..times.len())
                .take_while(|&j| times[j] <= times[i] + SETTLE_TIME + 1e-9)
                .find(|&j| amplitudes[j] >= threshold);
            match breach {
                None => return Ok(times[i]),
                Some(j) => {
                    i = j + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    Err(Error::SplitNotFound)
}

/// A triple with `λ_k + λ_l ≈ λ_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearResonance {
    pub k: usize,
    pub l: usize,
    pub j: usize,
    /// `|λ_k + λ_l - λ_j|` in 1/s.
    pub detuning: f64,
}

/// All unordered pairs `k <= l` and targets `j ∉ {k, l}` whose eigenvalue
/// sum lies within `eps_freq` Hz and `eps_damp` 1/s of `λ_j`, closest
/// first. Targets with negative frequency are skipped since they only
/// mirror a positive-frequency triple.
pub fn detect_near_resonance(
    natural: &ModeSet,
    eps_freq: f64,
    eps_damp: f64,
) -> Vec<NearResonance> {
    let lambda = natural.eigenvalues();
    let n = lambda.len();
    let mut out = Vec::new();
    for k in 0..n {
        for l in k..n {
            let sum = lambda[k] + lambda[l];
            for j in 0..n {
                if j == k || j == l || lambda[j].im < 0.0 {
                    continue;
                }
                let d = sum - lambda[j];
                if d.im.abs() / (2.0 * PI) <= eps_freq && d.re.abs() <= eps_damp {
                    out.push(NearResonance {
                        k,
                        l,
                        j,
                        detuning: d.norm(),
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
    out
}

/// Candidate resonance mode at `λ_k + λ_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceCandidate {
    /// Indices into the natural mode set, `k <= l`.
    pub parents: (usize, usize),
    pub eigenvalue: Complex,
    /// Nearest natural mode other than the parents.
    pub target: Option<usize>,
    /// Distance from `eigenvalue` to the target's eigenvalue.
    pub detuning: f64,
}

/// Every pairwise sum of natural eigenvalues (self-pairs included), keeping
/// those with frequency at most `f_max` Hz and damping at least
/// `damp_floor`. Sums that coincide with a natural eigenvalue or with an
/// earlier candidate are merged away.
pub fn build_resonance_candidates(
    natural: &ModeSet,
    f_max: f64,
    damp_floor: f64,
) -> Vec<ResonanceCandidate> {
    let lambda = natural.eigenvalues();
    let n = lambda.len();
    let mut out: Vec<ResonanceCandidate> = Vec::new();
    for k in 0..n {
        for l in k..n {
            let sum = lambda[k] + lambda[l];
            if sum.im.abs() / (2.0 * PI) > f_max || sum.re < damp_floor {
                continue;
            }
            let near = |z: &Complex| (z - sum).norm() <= DISTINCT_TOLERANCE;
            if lambda.iter().any(near) || out.iter().any(|c| near(&c.eigenvalue)) {
                continue;
            }
            let target = (0..n).filter(|&j| j != k && j != l).min_by(|&a, &b| {
                (lambda[a] - sum)
                    .norm()
                    .total_cmp(&(lambda[b] - sum).norm())
            });
            out.push(ResonanceCandidate {
                parents: (k, l),
                eigenvalue: sum,
                target,
                detuning: target.map_or(f64::INFINITY, |j| (lambda[j] - sum).norm()),
            });
        }
    }
    out
}

/// Tunables of the extended analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedOptions {
    /// Near-resonance frequency bound in Hz.
    pub eps_freq: f64,
    /// Near-resonance damping bound in 1/s.
    pub eps_damp: f64,
    /// Candidates damped faster than this (1/s) are not considered.
    pub damp_floor: f64,
    /// Retained candidates need `|B|` of at least this fraction of the
    /// largest natural `|B|`.
    pub prune_ratio: f64,
    /// A candidate is admitted only if it shrinks the transient residual
    /// norm by at least this fraction.
    pub min_residual_reduction: f64,
    /// Candidates that push the Vandermonde condition estimate above this
    /// are skipped.
    pub max_condition: f64,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        ExtendedOptions {
            eps_freq: 0.1,
            eps_damp: 0.5,
            damp_floor: -5.0,
            prune_ratio: 1e-3,
            min_residual_reduction: 0.5,
            max_condition: 1e8,
        }
    }
}

/// Groups candidate indices into conjugate pairs (real candidates alone).
fn conjugate_groups(candidates: &[ResonanceCandidate]) -> Vec<Vec<usize>> {
    let mut used = alloc::vec![false; candidates.len()];
    let mut groups = Vec::new();
    for i in 0..candidates.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut group = alloc::vec![i];
        let lambda = candidates[i].eigenvalue;
        if lambda.im != 0.0 {
            if let Some(j) = (0..candidates.len()).find(|&j| {
                !used[j] && (candidates[j].eigenvalue - lambda.conj()).norm() <= DISTINCT_TOLERANCE
            }) {
                used[j] = true;
                group.push(j);
            }
        }
        groups.push(group);
    }
    groups
}

struct Trial {
    members: Vec<usize>,
    values: Vec<Complex>,
    residual: f64,
    condition: f64,
}

fn solve_with(
    samples: &[f64],
    dt: f64,
    t_start: f64,
    natural: &[Complex],
    candidates: &[ResonanceCandidate],
    members: &[usize],
) -> Result<Trial> {
    let mut lambda = natural.to_vec();
    lambda.extend(members.iter().map(|&i| candidates[i].eigenvalue));
    let sol = solve_contributions(samples, &lambda, dt, t_start)?;
    Ok(Trial {
        members: members.to_vec(),
        values: sol.values,
        residual: sol.residual,
        condition: sol.condition,
    })
}

/// Fits the transient segment with eigenvalues frozen to the natural set
/// plus a selection of resonance candidates.
///
/// Candidates enter greedily, one conjugate group at a time, choosing the
/// group that lowers the residual most; selection stops when no group cuts
/// the residual norm by `min_residual_reduction`. Retained candidates with
/// `|B|` below `prune_ratio` of the largest natural `|B|` are then dropped
/// and the fit is solved once more.
pub fn extended_fit(
    signal: &Signal,
    channel: &str,
    segment: Interval,
    natural: &ModeSet,
    candidates: &[ResonanceCandidate],
    options: &ExtendedOptions,
) -> Result<ModeSet> {
    let (t_start, samples) = signal.window_samples(channel, segment)?;
    let dt = signal.dt();
    let total = natural.len() + candidates.len();
    if samples.len() < total + 1 {
        return Err(Error::TooManyModes {
            modes: total,
            samples: samples.len(),
        });
    }
    let natural_lambda = natural.eigenvalues();
    let y_norm = libm::sqrt(samples.iter().map(|v| v * v).sum::<f64>());

    let mut current = solve_with(samples, dt, t_start, &natural_lambda, candidates, &[])?;
    let mut remaining = conjugate_groups(candidates);
    while !remaining.is_empty() && current.residual > 1e-10 * y_norm {
        let mut best: Option<(usize, Trial)> = None;
        for (g, group) in remaining.iter().enumerate() {
            let mut members = current.members.clone();
            members.extend_from_slice(group);
            let Ok(trial) = solve_with(samples, dt, t_start, &natural_lambda, candidates, &members)
            else {
                continue;
            };
            if !(trial.condition <= options.max_condition) {
                continue;
            }
            if best
                .as_ref()
                .map_or(true, |(_, b)| trial.residual < b.residual)
            {
                best = Some((g, trial));
            }
        }
        match best {
            Some((g, trial))
                if trial.residual <= (1.0 - options.min_residual_reduction) * current.residual =>
            {
                remaining.remove(g);
                current = trial;
            }
            _ => break,
        }
    }

    if !current.members.is_empty() {
        let n_nat = natural_lambda.len();
        let max_natural = current.values[..n_nat]
            .iter()
            .map(|b| b.norm())
            .fold(0.0, f64::max);
        let cutoff = options.prune_ratio * max_natural;
        let weak: Vec<usize> = current
            .members
            .iter()
            .zip(&current.values[n_nat..])
            .filter(|(_, b)| b.norm() < cutoff)
            .map(|(&i, _)| i)
            .collect();
        if !weak.is_empty() {
            let groups = conjugate_groups(candidates);
            let kept: Vec<usize> = current
                .members
                .iter()
                .copied()
                .filter(|i| {
                    let group = groups.iter().find(|g| g.contains(i)).expect("grouped");
                    !group.iter().any(|m| weak.contains(m))
                })
                .collect();
            current = solve_with(samples, dt, t_start, &natural_lambda, candidates, &kept)?;
        }
    }
    if !(current.condition <= options.max_condition) {
        return Err(Error::IllConditioned {
            condition: current.condition,
        });
    }

    let mut modes: Vec<Mode> = natural
        .modes()
        .iter()
        .zip(&current.values)
        .map(|(m, &b)| Mode {
            contribution: b,
            ..*m
        })
        .collect();
    for (&i, &b) in current
        .members
        .iter()
        .zip(&current.values[natural_lambda.len()..])
    {
        let c = candidates[i];
        modes.push(Mode::resonance(c.eigenvalue, b, c.parents));
    }
    symmetrize_contributions(&mut modes);
    ModeSet::new(modes, dt, segment)
}

/// Makes conjugate partners carry exactly conjugate contribution factors.
fn symmetrize_contributions(modes: &mut [Mode]) {
    for i in 0..modes.len() {
        let lambda = modes[i].eigenvalue;
        if lambda.im <= 0.0 {
            if lambda.im == 0.0 {
                modes[i].contribution.im = 0.0;
            }
            continue;
        }
        if let Some(j) = (0..modes.len())
            .find(|&j| (modes[j].eigenvalue - lambda.conj()).norm() <= DISTINCT_TOLERANCE)
        {
            let b = (modes[i].contribution + modes[j].contribution.conj()) * 0.5;
            modes[i].contribution = b;
            modes[j].contribution = b.conj();
        }
    }
}

/// Fit diagnostics of an extended analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedDiagnostics {
    /// Residual norm of the natural-mode fit over the post-transient segment.
    pub natural_residual: f64,
    /// Residual norm of the augmented fit over the transient segment.
    pub transient_residual: f64,
    /// Error index (percent) of the augmented fit over the transient segment.
    pub extended_error_index: f64,
    /// Error index (percent) of a classical Prony fit of the same order over
    /// the transient segment, when that fit succeeds.
    pub classical_error_index: Option<f64>,
}

/// Result of [`run_extended_prony`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedResult {
    /// Modes identified on the post-transient segment.
    pub natural_modes: ModeSet,
    /// Natural plus retained resonance modes fitted on the transient segment.
    pub transient_modes: ModeSet,
    /// All candidates that were offered to the transient fit.
    pub candidates: Vec<ResonanceCandidate>,
    /// Near-resonant triples among the natural modes.
    pub near_resonances: Vec<NearResonance>,
    pub split_time: f64,
    pub diagnostics: ExtendedDiagnostics,
}

impl ExtendedResult {
    /// Piecewise reconstruction: transient modes before the split, natural
    /// modes from the split on.
    pub fn reconstruct(&self, times: &[f64]) -> Vec<f64> {
        times
            .iter()
            .map(|&t| {
                let set = if t < self.split_time {
                    &self.transient_modes
                } else {
                    &self.natural_modes
                };
                set.modes().iter().map(|m| m.value_at(t).re).sum()
            })
            .collect()
    }

    /// Resonance-kind modes retained by the transient fit.
    pub fn resonance_modes(&self) -> impl Iterator<Item = &Mode> {
        self.transient_modes
            .modes()
            .iter()
            .filter(|m| m.kind == ModeKind::Resonance)
    }
}

fn residual_norm(modes: &ModeSet, t_start: f64, dt: f64, samples: &[f64]) -> (f64, Vec<f64>) {
    let times: Vec<f64> = (0..samples.len())
        .map(|k| t_start + k as f64 * dt)
        .collect();
    let fit = prony::reconstruct(modes, &times);
    let r = libm::sqrt(
        fit.iter()
            .zip(samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>(),
    );
    (r, fit)
}

/// Complete extended analysis of one channel.
pub fn run_extended_prony(
    signal: &Signal,
    channel: &str,
    window: Interval,
    policy: SplitPolicy,
    order: usize,
    options: &ExtendedOptions,
) -> Result<ExtendedResult> {
    if order == 0 {
        return Err(Error::invalid("model order must be at least 1"));
    }
    let (first, second) = split_window(signal, channel, window, policy, 2 * order + 1)?;
    let dt = signal.dt();

    let natural = prony::fit_prony(signal, channel, second, order)?;
    let candidates = build_resonance_candidates(&natural, signal.nyquist(), options.damp_floor);
    let transient = extended_fit(signal, channel, first, &natural, &candidates, options)?;
    let near_resonances = detect_near_resonance(&natural, options.eps_freq, options.eps_damp);

    let (t2, y2) = signal.window_samples(channel, second)?;
    let (natural_residual, _) = residual_norm(&natural, t2, dt, y2);
    let (t1, y1) = signal.window_samples(channel, first)?;
    let (transient_residual, fit1) = residual_norm(&transient, t1, dt, y1);
    let extended_error_index = error_index(&fit1, y1, dt)?;
    let classical_error_index = prony::fit_prony(signal, channel, first, order)
        .ok()
        .and_then(|set| error_index(&residual_norm(&set, t1, dt, y1).1, y1, dt).ok());

    Ok(ExtendedResult {
        natural_modes: natural,
        transient_modes: transient,
        candidates,
        near_resonances,
        split_time: first.end,
        diagnostics: ExtendedDiagnostics {
            natural_residual,
            transient_residual,
            extended_error_index,
            classical_error_index,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn set(lambda: &[Complex]) -> ModeSet {
        let modes = lambda.iter().map(|&l| Mode::new(l, c(1.0, 0.0))).collect();
        ModeSet::new(modes, 0.01, Interval::new(0.0, 1.0)).unwrap()
    }

    #[test]
    fn self_pair_of_single_dc_mode() {
        let cands = build_resonance_candidates(&set(&[c(-0.3199, 0.0)]), 50.0, -5.0);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].eigenvalue, c(-0.6398, 0.0));
        assert_eq!(cands[0].parents, (0, 0));
        assert_eq!(cands[0].target, None);
    }

    #[test]
    fn empty_natural_set_has_no_candidates() {
        let empty = ModeSet::empty(0.01, Interval::new(0.0, 1.0));
        assert!(build_resonance_candidates(&empty, 50.0, -5.0).is_empty());
        assert!(detect_near_resonance(&empty, 0.1, 0.5).is_empty());
    }

    #[test]
    fn candidates_respect_frequency_and_damping_limits() {
        let natural = set(&[c(-0.1, 20.0), c(-0.1, -20.0), c(-3.0, 0.0)]);
        let cands = build_resonance_candidates(&natural, 5.0, -5.0);
        // 2λ1 at 6.4 Hz is out of band; 2·(-3) is below the damping floor
        for cand in &cands {
            assert!(cand.eigenvalue.im.abs() / (2.0 * PI) <= 5.0);
            assert!(cand.eigenvalue.re >= -5.0);
        }
        // λ1 + conj λ1 = -0.2 and λ1 + λ3 (+ its mirror)
        assert_eq!(cands.len(), 3);
    }

    #[test]
    fn exact_resonance_is_reported_first() {
        let natural = set(&[c(-1.0, 0.0), c(-1.5, 0.0), c(-2.5, 0.0), c(-2.6, 0.0)]);
        let found = detect_near_resonance(&natural, 0.1, 0.5);
        assert_eq!(found[0].detuning, 0.0);
        assert_eq!((found[0].k, found[0].l, found[0].j), (0, 1, 2));
    }

    #[test]
    fn single_mode_has_no_near_resonance() {
        assert!(detect_near_resonance(&set(&[c(-0.3, 0.0)]), 0.1, 0.5).is_empty());
    }

    #[test]
    fn automatic_split_requires_settling() {
        let times: Vec<f64> = (0..500).map(|k| k as f64 * 0.01).collect();
        let amps: Vec<f64> = times.iter().map(|t| libm::exp(-t)).collect();
        let s = automatic_split(&times, &amps, 0.2).unwrap();
        assert!((s - libm::log(5.0)).abs() < 0.011);
        let flat = vec![1.0; 500];
        assert_eq!(
            automatic_split(&times, &flat, 0.2),
            Err(Error::SplitNotFound)
        );
    }
}
