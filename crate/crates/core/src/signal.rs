//! Sampled waveforms and synthetic test signals.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use crate::{Error, Result};

/// Closed time interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub const fn new(start: f64, end: f64) -> Self {
        Interval { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// One named sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Channel {
            name: name.into(),
            samples,
        }
    }
}

/// Uniformly sampled multi-channel real time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    t0: f64,
    dt: f64,
    channels: Vec<Channel>,
}

impl Signal {
    /// Validates and builds a signal. All channels must share one length
    /// of at least two finite samples, names must be unique and `dt > 0`.
    pub fn new(t0: f64, dt: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositiveStep(dt));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidSignal("start time is not finite".into()));
        }
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidSignal("signal has no channels".into()))?;
        let len = first.samples.len();
        if len < 2 {
            return Err(Error::InvalidSignal(
                "channels need at least two samples".into(),
            ));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.samples.len() != len {
                return Err(Error::LengthMismatch {
                    left: len,
                    right: ch.samples.len(),
                });
            }
            if ch.samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSignal(alloc::format!(
                    "channel `{}` holds a non-finite sample",
                    ch.name
                )));
            }
            if channels[..i].iter().any(|c| c.name == ch.name) {
                return Err(Error::InvalidSignal(alloc::format!(
                    "duplicate channel `{}`",
                    ch.name
                )));
            }
        }
        Ok(Signal { t0, dt, channels })
    }

    /// Single-channel convenience constructor.
    pub fn single(name: &str, t0: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        Signal::new(t0, dt, alloc::vec![Channel::new(name, samples)])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.samples.as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn support(&self) -> Interval {
        Interval::new(self.t0, self.time(self.len() - 1))
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }

    /// Indices of the samples lying inside `window` (closed, with a small
    /// tolerance for grid round-off).
    pub fn window_range(&self, window: Interval) -> Result<Range<usize>> {
        let empty = Error::EmptyWindow {
            start: window.start,
            end: window.end,
        };
        if !(window.start <= window.end) {
            return Err(empty);
        }
        let lo = libm::ceil((window.start - self.t0) / self.dt - 1e-7).max(0.0);
        let hi = libm::floor((window.end - self.t0) / self.dt + 1e-7);
        let last = (self.len() - 1) as f64;
        if hi < 0.0 || lo > last || lo > hi {
            return Err(empty);
        }
        Ok(lo as usize..(hi.min(last) as usize + 1))
    }

    /// Samples of `channel` inside `window` together with the time of the
    /// first returned sample.
    pub fn window_samples(&self, channel: &str, window: Interval) -> Result<(f64, &[f64])> {
        let samples = self.channel(channel)?;
        let range = self.window_range(window)?;
        Ok((self.time(range.start), &samples[range]))
    }
}

/// Decaying non-oscillatory component `B e^{αt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcComponent {
    pub damping: f64,
    pub amplitude: f64,
}

/// Conjugate pair contributing `2B e^{αt} cos(2πft + θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryMode {
    pub damping: f64,
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Mode whose instantaneous frequency follows a frequency-amplitude law:
/// `f(A) = f_max - (f_max - f_min) * clamp(A, 0, 1)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaMode {
    pub damping: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub amplitude: f64,
    pub exponent: f64,
    pub phase: f64,
}

impl FaMode {
    pub fn frequency_at(&self, amplitude: f64) -> f64 {
        let a = amplitude.clamp(0.0, 1.0);
        self.f_max - (self.f_max - self.f_min) * libm::pow(a, self.exponent)
    }
}

/// Parameters of a designed multi-mode test signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignedSignalSpec {
    pub dc: Option<DcComponent>,
    pub oscillatory_modes: Vec<OscillatoryMode>,
    pub fa_mode: Option<FaMode>,
}

impl DesignedSignalSpec {
    /// One dc mode, two steady oscillatory modes and one mode drifting
    /// from 1.430 Hz (large amplitude) to 1.670 Hz (small amplitude).
    /// Every contribution factor is 0.5 and all phases are zero.
    pub fn benchmark() -> Self {
        DesignedSignalSpec {
            dc: Some(DcComponent {
                damping: -0.3199,
                amplitude: 0.5,
            }),
            oscillatory_modes: alloc::vec![
                OscillatoryMode {
                    damping: -0.1433,
                    frequency: 3.3931 / (2.0 * PI),
                    amplitude: 0.5,
                    phase: 0.0,
                },
                OscillatoryMode {
                    damping: -0.1869,
                    frequency: 6.8812 / (2.0 * PI),
                    amplitude: 0.5,
                    phase: 0.0,
                },
            ],
            fa_mode: Some(FaMode {
                damping: -0.33,
                f_min: 1.430,
                f_max: 1.670,
                amplitude: 0.5,
                exponent: 2.0,
                phase: 0.0,
            }),
        }
    }

    /// Same modes as [`benchmark`](Self::benchmark) with the drifting mode frozen
    /// at its small-amplitude frequency, i.e. an exact sum of seven
    /// exponentials.
    pub fn benchmark_steady() -> Self {
        let mut spec = Self::benchmark();
        let fa = spec.fa_mode.take().expect("benchmark has a drifting mode");
        spec.oscillatory_modes.push(OscillatoryMode {
            damping: fa.damping,
            frequency: fa.f_max,
            amplitude: fa.amplitude,
            phase: fa.phase,
        });
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dc) = &self.dc {
            if !dc.damping.is_finite() || !(dc.amplitude >= 0.0) || !dc.amplitude.is_finite() {
                return Err(Error::invalid(
                    "dc component needs finite damping and B >= 0",
                ));
            }
        }
        for m in &self.oscillatory_modes {
            if !m.damping.is_finite()
                || !m.frequency.is_finite()
                || m.frequency < 0.0
                || !(m.amplitude >= 0.0)
                || !m.phase.is_finite()
            {
                return Err(Error::invalid(
                    "oscillatory modes need finite damping/phase, f >= 0 and B >= 0",
                ));
            }
        }
        if let Some(fa) = &self.fa_mode {
            if !(fa.f_min < fa.f_max) || fa.f_min < 0.0 {
                return Err(Error::invalid(
                    "frequency-amplitude mode needs 0 <= f_min < f_max",
                ));
            }
            if !fa.damping.is_finite() || !(fa.amplitude >= 0.0) || !(fa.exponent > 0.0) {
                return Err(Error::invalid(
                    "frequency-amplitude mode needs finite damping, B >= 0 and exponent > 0",
                ));
            }
        }
        Ok(())
    }

    fn max_frequency(&self) -> f64 {
        let steady = self
            .oscillatory_modes
            .iter()
            .map(|m| m.frequency)
            .fold(0.0_f64, f64::max);
        let drifting = self.fa_mode.map_or(0.0, |fa| fa.f_max.max(fa.f_min));
        steady.max(drifting)
    }
}

/// Channel name used for generated signals.
pub const DESIGNED_CHANNEL: &str = "x";

/// Samples the designed signal on `0, dt, 2dt, ..., <= t_end`.
///
/// The drifting mode's phase integrates the instantaneous frequency
/// `f(e^{αt})` with the trapezoid rule on the sample grid.
pub fn generate_designed(spec: &DesignedSignalSpec, t_end: f64, dt: f64) -> Result<Signal> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    if !(t_end > dt) || !t_end.is_finite() {
        return Err(Error::invalid("t_end must exceed dt"));
    }
    spec.validate()?;
    let nyquist = 0.5 / dt;
    let f_top = spec.max_frequency();
    if f_top >= nyquist {
        return Err(Error::NyquistViolation {
            frequency: f_top,
            nyquist,
        });
    }

    let n = libm::floor(t_end / dt + 1e-9) as usize + 1;
    let mut samples = alloc::vec![0.0; n];

    if let Some(dc) = spec.dc {
        for (k, s) in samples.iter_mut().enumerate() {
            *s += dc.amplitude * libm::exp(dc.damping * k as f64 * dt);
        }
    }
    for m in &spec.oscillatory_modes {
        let omega = 2.0 * PI * m.frequency;
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 * dt;
            *s += 2.0 * m.amplitude * libm::exp(m.damping * t) * libm::cos(omega * t + m.phase);
        }
    }
    if let Some(fa) = spec.fa_mode {
        let mut phase = fa.phase;
        let mut f_prev = fa.frequency_at(1.0);
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 * dt;
            let envelope = libm::exp(fa.damping * t);
            if k > 0 {
                let f_now = fa.frequency_at(envelope);
                phase += PI * (f_prev + f_now) * dt;
                f_prev = f_now;
            }
            *s += 2.0 * fa.amplitude * envelope * libm::cos(phase);
        }
    }
    Signal::single(DESIGNED_CHANNEL, 0.0, dt, samples)
}

/// Frequency of the drifting mode at a given (normalized) amplitude.
pub fn instantaneous_fa_frequency(spec: &DesignedSignalSpec, amplitude: f64) -> Result<f64> {
    let fa = spec.fa_mode.ok_or(Error::MissingFaMode)?;
    if !(amplitude >= 0.0) {
        return Err(Error::invalid("amplitude must be non-negative"));
    }
    Ok(fa.frequency_at(amplitude))
}

/// Amplitude envelope sampled on the window's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Rectified-peak envelope: linear interpolation through the local maxima
/// of `|samples|`, with both window endpoints used as knots.
pub fn envelope(signal: &Signal, channel: &str, window: Interval) -> Result<Envelope> {
    let samples = signal.channel(channel)?;
    let range = signal.window_range(window)?;
    let times: Vec<f64> = range.clone().map(|k| signal.time(k)).collect();
    let mag: Vec<f64> = samples[range].iter().map(|v| v.abs()).collect();
    let n = mag.len();

    let mut knots = Vec::new();
    knots.push(0);
    for k in 1..n.saturating_sub(1) {
        if mag[k] >= mag[k - 1] && mag[k] >= mag[k + 1] {
            knots.push(k);
        }
    }
    if n > 1 {
        knots.push(n - 1);
    }

    let mut amplitudes = alloc::vec![0.0; n];
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = (b - a) as f64;
        for k in a..=b {
            let w = if span > 0.0 {
                (k - a) as f64 / span
            } else {
                0.0
            };
            amplitudes[k] = mag[a] * (1.0 - w) + mag[b] * w;
        }
    }
    if n == 1 {
        amplitudes[0] = mag[0];
    }
    Ok(Envelope { times, amplitudes })
}
