//! Mode shapes across measurement channels.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::prony::{solve_contributions, Contributions, DISTINCT_TOLERANCE};
use crate::signal::{Interval, Signal};
use crate::{Complex, Error, Result};

/// Normalized phasors of one mode across channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeShape {
    pub eigenvalue: Complex,
    pub channels: Vec<String>,
    /// One phasor per channel; the largest has magnitude 1 and the
    /// reference channel has zero angle.
    pub phasors: Vec<Complex>,
    pub reference: String,
    /// `phasors = raw / normalizer`.
    pub normalizer: Complex,
}

impl ModeShape {
    pub fn frequency(&self) -> f64 {
        self.eigenvalue.im / (2.0 * PI)
    }

    pub fn phasor(&self, channel: &str) -> Option<Complex> {
        self.channels
            .iter()
            .position(|c| c == channel)
            .map(|i| self.phasors[i])
    }

    /// Phasor angles in degrees.
    pub fn angles_deg(&self) -> Vec<f64> {
        self.phasors.iter().map(|p| p.arg().to_degrees()).collect()
    }
}

fn largest_index(values: &[Complex]) -> Option<usize> {
    let largest = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if largest == 0.0 {
        return None;
    }
    values
        .iter()
        .position(|z| z.norm() >= largest * (1.0 - 1e-12))
}

/// Divides the column by its largest phasor, then rotates so the
/// reference channel (the largest one unless named) has zero angle.
pub fn normalize_shape(
    channels: &[String],
    column: &[Complex],
    eigenvalue: Complex,
    reference: Option<&str>,
) -> Result<ModeShape> {
    if channels.len() != column.len() {
        return Err(Error::ChannelMismatch);
    }
    let pivot = largest_index(column).ok_or(Error::AllZeroColumn)?;
    let r = match reference {
        Some(name) => channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))?,
        None => pivot,
    };
    let mut normalizer = column[pivot];
    let anchor = column[r] / normalizer;
    if anchor.norm() == 0.0 {
        return Err(Error::invalid(
            "reference channel has no content in this mode",
        ));
    }
    if r != pivot {
        normalizer *= anchor / anchor.norm();
    }
    let mut phasors: Vec<Complex> = column.iter().map(|b| b / normalizer).collect();
    phasors[r].im = 0.0;
    Ok(ModeShape {
        eigenvalue,
        channels: channels.to_vec(),
        phasors,
        reference: channels[r].clone(),
        normalizer,
    })
}

/// Per-channel contribution factors against one shared eigenvalue list.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelFit {
    pub eigenvalues: Vec<Complex>,
    pub segment: Interval,
    /// One entry per requested channel; a failing channel keeps its error.
    pub rows: Vec<(String, Result<Contributions>)>,
}

impl MultichannelFit {
    /// Contribution factors of mode `m` on every channel, if all fits
    /// succeeded.
    pub fn column(&self, m: usize) -> Option<Vec<Complex>> {
        self.rows
            .iter()
            .map(|(_, r)| r.as_ref().ok().and_then(|c| c.values.get(m).copied()))
            .collect()
    }

    pub fn channels(&self) -> Vec<String> {
        self.rows.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Shapes of the dc modes and of the positive-frequency member of each
    /// conjugate pair, built from `2B` phasors (`B` for dc).
    pub fn shapes(&self, reference: Option<&str>) -> Result<Vec<ModeShape>> {
        let channels = self.channels();
        let mut out = Vec::new();
        for (m, &lambda) in self.eigenvalues.iter().enumerate() {
            if lambda.im < 0.0 {
                continue;
            }
            let Some(mut column) = self.column(m) else {
                return Err(Error::invalid("a channel fit failed"));
            };
            if lambda.im > 0.0 {
                for b in &mut column {
                    *b *= 2.0;
                }
            }
            match normalize_shape(&channels, &column, lambda, reference) {
                Ok(shape) => out.push(shape),
                Err(Error::AllZeroColumn) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

/// Fits every channel in `channels` (all channels when empty) against the
/// same eigenvalues over `segment`.
pub fn multichannel_fit(
    signal: &Signal,
    channels: &[&str],
    eigenvalues: &[Complex],
    segment: Interval,
) -> Result<MultichannelFit> {
    for lambda in eigenvalues {
        if lambda.im != 0.0
            && !eigenvalues
                .iter()
                .any(|m| (m - lambda.conj()).norm() <= DISTINCT_TOLERANCE)
        {
            return Err(Error::invalid(
                "eigenvalues must be closed under conjugation",
            ));
        }
    }
    let names: Vec<String> = if channels.is_empty() {
        signal.channel_names().map(String::from).collect()
    } else {
        channels.iter().map(|c| c.to_string()).collect()
    };
    let rows = names
        .into_iter()
        .map(|name| {
            let fit = signal
                .window_samples(&name, segment)
                .and_then(|(t0, y)| solve_contributions(y, eigenvalues, signal.dt(), t0));
            (name, fit)
        })
        .collect();
    Ok(MultichannelFit {
        eigenvalues: eigenvalues.to_vec(),
        segment,
        rows,
    })
}

/// How the augmented shape is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalePolicy {
    /// Rescale target phasors and the synthetic phasor together so the
    /// largest magnitude is 1.
    #[default]
    Joint,
    /// Keep the target shape as is; the synthetic phasor uses its frame.
    Preserve,
}

/// A target shape with the combined resonance contribution appended.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedShape {
    pub target: ModeShape,
    /// Sum of the resonance phasors, in the target shape's frame.
    pub synthetic: Complex,
    /// The resonance phasors normalized on their own, if any is nonzero.
    pub resonance_shape: Option<ModeShape>,
}

/// Adds the combined resonance-mode contribution to the shape of the mode
/// it is near-resonant with.
///
/// `resonance` lists one raw phasor per channel, in any order, on the same
/// scale as the raw column the target shape was normalized from.
pub fn combine_resonance_contribution(
    shape: &ModeShape,
    resonance: &[(String, Complex)],
    resonance_eigenvalue: Complex,
    eps_freq: f64,
    policy: ScalePolicy,
) -> Result<AugmentedShape> {
    if resonance.len() != shape.channels.len() {
        return Err(Error::ChannelMismatch);
    }
    let mut ordered = Vec::with_capacity(resonance.len());
    for name in &shape.channels {
        let (_, p) = resonance
            .iter()
            .find(|(n, _)| n == name)
            .ok_or(Error::ChannelMismatch)?;
        ordered.push(*p);
    }
    let target_hz = shape.frequency().abs();
    let resonance_hz = (resonance_eigenvalue.im / (2.0 * PI)).abs();
    if !((target_hz - resonance_hz).abs() <= eps_freq) {
        return Err(Error::NotNearResonant {
            target_hz,
            resonance_hz,
        });
    }

    let sum: Complex = ordered.iter().sum();
    let mut target = shape.clone();
    let mut synthetic = sum / shape.normalizer;
    if policy == ScalePolicy::Joint {
        let largest = target
            .phasors
            .iter()
            .map(|p| p.norm())
            .fold(synthetic.norm(), f64::max);
        if largest > 1.0 {
            for p in &mut target.phasors {
                *p /= largest;
            }
            synthetic /= largest;
            target.normalizer *= largest;
        }
    }
    let resonance_shape =
        match normalize_shape(&shape.channels, &ordered, resonance_eigenvalue, None) {
            Ok(s) => Some(s),
            Err(Error::AllZeroColumn) => None,
            Err(e) => return Err(e),
        };
    Ok(AugmentedShape {
        target,
        synthetic,
        resonance_shape,
    })
}
