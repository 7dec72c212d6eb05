//! Equilibria, linear stability and rate fitting.

pub mod equilibria;
pub mod rate;
pub mod spectrum;

pub use equilibria::{SteadyOptions, SteadyResult, SteadySample, distance_to_equilibria, steady_director_flow};
pub use rate::{RateFit, fit_decay_rate, window_for_rate};
pub use spectrum::{Block, LinearOperator, SpectralReport, SpectrumMethod, assemble_linearization, spectrum};
