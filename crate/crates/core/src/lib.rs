//! Aitken Δ²-accelerated generalized Jungck-modified S-iteration.
//!
//! * [`model`]: vectors, operators, schedules and gate policies
//! * [`aitken`]: the gated componentwise Δ² corrector
//! * [`engine`]: the two-map iteration and its exact per-step identity
//! * [`stability`]: sufficient boundedness and convergence certificates
//! * [`venter`]: the generalized Venter recursion and its checks
//! * [`diagnostics`]: limit estimates, acceleration ratios, equivalence
//! * [`scan`]: seeded random configurations for the certificate soundness scan
//! * [`cli`]: config parsing, experiment runner, CSV and report output

pub mod aitken;
pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod model;
pub mod scan;
pub mod stability;
pub mod trace;
pub mod venter;
