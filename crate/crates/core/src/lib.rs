//! Numerical library for the quantum modular-multiplication operator, the
//! quantized A-baker maps built from generalized discrete Fourier
//! transforms, and their semiclassical and spectral diagnostics: torus
//! coherent states, Husimi phase-space grids, eigenphase statistics, and
//! machine-precision certification of the superposition identity relating
//! the two operator families.

pub mod dynamics;
pub mod error;
pub mod matrix;
pub mod operators;
pub mod spectral;
pub mod states;

pub use error::{Error, Result};
pub use matrix::CMatrix;
pub use operators::{ModMultSpec, Sign};
pub use states::StateVector;
