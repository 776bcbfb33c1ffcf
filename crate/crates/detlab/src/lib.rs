//! detlab: a numerical laboratory for determining degrees of freedom of the
//! 2D (damped) Navier-Stokes equations on a periodic torus.
//!
//! The crate enumerates the torus Laplacian spectrum with exact integer
//! sorting, computes the sharp Agmon constant and the other explicit
//! constants behind determining-mode and determining-node estimates,
//! evaluates every threshold formula, integrates the vorticity equation
//! pseudospectrally with an exponential integrating factor, runs
//! master/slave synchronization experiments that probe the thresholds
//! empirically, and verifies the underlying functional inequalities on
//! random band-limited fields.
//!
//! The `book/` directory contains a guide with runnable walkthroughs of
//! each subsystem; its code blocks are compiled and run as doctests.

pub mod config;
pub mod constants;
pub mod error;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod inequality;
pub mod io;
pub mod ops;
pub mod sampling;
pub mod solver;
pub mod spectrum;
pub mod sync;
pub mod thresholds;

pub use error::{Error, Result};
pub use field::VorticityField;
pub use geometry::{AspectRatio, TorusGeometry};
pub use spectrum::{enumerate_spectrum, verify_eigenvalue_bounds, LatticeSpectrum};

// Keep the book's code blocks honest: every chapter is attached as a doc
// comment here so `cargo test` compiles and runs its snippets.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Spectrum, "../../../book/src/spectrum.md");
    chapter!(Constants, "../../../book/src/constants.md");
    chapter!(Thresholds, "../../../book/src/thresholds.md");
    chapter!(Solver, "../../../book/src/solver.md");
    chapter!(Synchronization, "../../../book/src/synchronization.md");
    chapter!(Inequalities, "../../../book/src/inequalities.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
