//! Walsh-spectral toolkit for measures on the dyadic group.
//!
//! The group is the set of 0/1 coordinate sequences under bitwise addition,
//! truncated to a finite resolution of N coordinates. This crate provides:
//!
//! - the group itself: elements, the standard metric, cylinders, and Walsh
//!   characters ([`group`]);
//! - a family of radially increasing kernels with closed-form Walsh
//!   coefficients ([`kernel`]);
//! - discrete measures on the finest cylinders, their spectra, and a small
//!   file format ([`measure`]);
//! - kernel energies computed three independent ways, plus pointwise
//!   potentials ([`energy`]);
//! - energy-growth analysis across truncation depths, yielding certified
//!   lower bounds on measure dimension ([`dimension`]).

pub mod cli;
pub mod dimension;
pub mod energy;
pub mod group;
pub mod kernel;
pub mod measure;
mod sums;

pub use dimension::{
    box_counting_dim, classify_s, dim_lower_bound, energy_profile, fourier_series_check,
    scaling_diagnostic, ClassifierConfig, DimensionEstimate, EnergyProfile, SProbe, Verdict,
};
pub use energy::{
    cell_averaged_kernel, energy, energy_hierarchical, energy_naive, energy_spectral, potential,
    CellKernel, EnergyMethod, EnergyResult, PotentialField, NAIVE_MAX_LEVELS,
};
pub use group::{walsh, CylinderId, GroupElement, Resolution, MAX_LEVELS};
pub use kernel::{full_coefficient, kernel_value, truncated_coefficient, KernelSpec};
pub use measure::{
    fwht, fwht_in_place, level_masses, read_measure, spectrum, write_measure, CylinderMeasure,
    LevelMassTable, MeasureEncoding, WalshSpectrum,
};
