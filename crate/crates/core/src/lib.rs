//! Scattering on two-dimensional surfaces of revolution with one or two ends.
//!
//! The crate reduces the Laplace–Beltrami Schrödinger operator to angular
//! modes, builds limiting resolvents from Jost solutions, extracts distorted
//! Fourier transforms and scattering matrices, and evaluates the stationary
//! phase comparison dynamics used to estimate wave operators.
//!
//! Module map:
//! - [`geometry`]: model definition, effective potential, critical energies, phases.
//! - [`mode_reduction`]: radial grids, reduced operators, states and Besov norms.
//! - [`resolvent`]: Jost pairs, `R(λ ± i0)`, radiation diagnostics.
//! - [`fourier`]: distorted Fourier transforms, `S(λ)`, WKB eigenfunctions.
//! - [`dynamics`]: stationary point field, `U^±(t)`, leading term, modifiers.
//! - [`propagator`]: time evolution, Cook integrand, wave operators, projections.
//! - [`oracle`]: brute-force references used by the test suites.
//! - [`config`]: the plain-text model grammar and reference presets.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod fourier;
pub mod geometry;
pub mod mode_reduction;
pub mod numerics;
pub mod oracle;
pub mod propagator;
pub mod resolvent;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Runs `f` over `0..n` and collects the results in index order.
///
/// Uses the rayon pool when the `parallel` feature is on.
pub fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
