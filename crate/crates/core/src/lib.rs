//! Design and analysis toolkit for a bowtie lumped-element microwave cavity
//! coupled to an ensemble of NV centers in diamond.
//!
//! - [`circuit`]: lumped-element eigenfrequency and gap design.
//! - [`nvspin`]: NV spin-1 Hamiltonian, transition frequencies, Zeeman tuning.
//! - [`fieldmap`]: Biot–Savart field maps of current sheets, vacuum
//!   normalization, homogeneity statistics.
//! - [`coupling`]: single-spin and collective coupling, cooperativity.
//! - [`spectroscopy`]: coupled-mode transmission, avoided crossings, fitting.
//!
//! SI units throughout; frequencies are ordinary (Hz), not angular.

pub mod circuit;
pub mod constants;
pub mod coupling;
pub mod fieldmap;
pub mod nvspin;
pub mod optim;
pub mod quadrature;
pub mod spectroscopy;
