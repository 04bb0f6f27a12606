//! Simulation of a cascaded sum-frequency / down-conversion OAM link and the
//! verification chain run on its photon pairs: OAM correlation matrices,
//! sector-state fringes, CHSH tests and maximum-likelihood two-qubit
//! tomography.
//!
//! The modules follow the data flow:
//!
//! * [`modes`]: OAM indices, mode vectors, sector states, hologram masks.
//! * [`source`]: spiral spectra, the joint pair state and post-selection
//!   onto `{|l>, |-l>}` qubits.
//! * [`measurement`]: coincidence rates under a detector noise model and
//!   Poisson-sampled count records.
//! * [`analysis`]: fringe fits, CHSH with bootstrap errors, spiral bandwidth.
//! * [`tomography`]: 16-setting linear and maximum-likelihood reconstruction.
//!
//! Monte Carlo loops (bootstrap resampling, batched reconstructions) run on
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. Every random draw is keyed by `(seed, index)` so both
//! paths produce identical numbers.

pub mod analysis;
mod error;
pub mod measurement;
pub mod modes;
pub mod optim;
pub mod par;
pub mod rng;
pub mod source;
pub mod state;
pub mod tomography;

pub use error::{Error, Result};

pub use num_complex::Complex64;

pub use analysis::{chsh, correlation_e, fit_fringe, spiral_bandwidth, ChshResult, FringeFit};
pub use measurement::{
    coincidence_rate, correlation_matrix, fringe_scan, CountRecord, ExpectedRecord, NoiseModel,
    Setting, Tally,
};
pub use modes::{mode_overlap, render_hologram, sector_state, ModeVector, OamIndex, SectorState};
pub use par::Execution;
pub use rng::{sample_counts, split_seed};
pub use source::{
    apply_white_noise, build_joint_state, gaussian_spiral_spectrum, post_select, sfg_pump_oam,
    JointOamState, SpiralSpectrum,
};
pub use state::TwoQubitState;
pub use tomography::{
    bootstrap_fidelity_error, fidelity, linear_reconstruct, mle_reconstruct, tomo_basis,
    TomographyResult,
};
