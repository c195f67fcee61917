//! Modal analysis of oscillatory ringdown signals.
//!
//! The crate fits uniformly sampled waveforms to sums of complex
//! exponentials (classical Prony analysis) and extends the fit with
//! second-order resonance modes whose eigenvalues are sums of natural-mode
//! eigenvalues. A small normal-form engine provides the analytic reference
//! for quadratic dynamical systems, and helper modules compute mode shapes
//! and reconstruction error indices.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, reports and
//! the command-line front end live in the `eprony` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
pub mod linalg;
pub mod metrics;
pub mod modeshape;
pub mod normalform;
pub mod ode;
pub mod prony;
pub mod resonance;
pub mod signal;

pub use error::{Error, Result};
pub use metrics::{error_index, windowed_error, ErrorReport};
pub use modeshape::{
    combine_resonance_contribution, multichannel_fit, normalize_shape, AugmentedShape, ModeShape,
    MultichannelFit, ScalePolicy,
};
pub use normalform::{
    analytic_response, expand_second_order, h_coefficients, initial_z, resonance_degree, to_modal,
    HTensor, ModalModel, QuadraticField, QuadraticModel, QuadraticTerm, ResonanceDegree,
};
pub use prony::{
    fit_prony, linear_prediction_coeffs, reconstruct, roots_to_eigen, select_order,
    solve_contributions, Contributions, Mode, ModeKind, ModeSet, Prediction,
};
pub use resonance::{
    build_resonance_candidates, detect_near_resonance, extended_fit, run_extended_prony,
    split_window, ExtendedDiagnostics, ExtendedOptions, ExtendedResult, NearResonance,
    ResonanceCandidate, SplitPolicy,
};
pub use signal::{
    envelope, generate_designed, instantaneous_fa_frequency, Channel, DesignedSignalSpec, Envelope,
    FaMode, Interval, OscillatoryMode, Signal,
};

/// Complex scalar used throughout the crate.
pub type Complex = num_complex::Complex64;
