//! Simulation of two-dimensional photon gases in dye-filled microcavities
//! whose potential landscape is printed onto a mirror as a polymer height
//! profile.
//!
//! The pipeline runs height map → potential → transverse eigenmodes →
//! Bose-Einstein populations → synthetic spectra, with a tight-binding layer
//! for coupled pillars and SSH chains.

pub mod cavity;
pub mod constants;
pub mod eigensolver;
pub mod error;
pub mod grid;
pub mod landscape;
pub mod lattice;
pub mod spectra;
pub mod thermo;

pub use cavity::{derive_cavity, height_to_potential, thermal_frequency, CavityParams};
pub use eigensolver::{
    assemble_hamiltonian, bound_filter, solve_lowest, Hamiltonian, ModeSet, PotentialMap,
    SolverMethod, SolverOptions,
};
pub use error::{Error, Result};
pub use grid::Grid;
pub use lattice::{TightBindingModel, CouplingCurve};
pub use spectra::SpectrumImage;
pub use thermo::Population;
pub use landscape::{HeightMap, SshGeometry};
