//! Continuous-variable Bell tests with the two-mode circle state.
//!
//! The state `N ∫ |r0 e^{iς}⟩_A |r0 e^{-iς}⟩_B dς` is represented exactly in
//! the number basis as `Σ c_n |n, n⟩`. Every sign-binned probability the crate
//! computes (ideal quadrature measurement, quadrature measurement blurred by
//! vacuum-scale noise, finite local-oscillator homodyne detection) reduces to
//! the same separable form
//!
//! ```text
//! P++(χ) = Σ_{n,m} c_n c_m cos((n - m) χ) Π^A_{nm} Π^B_{nm}
//! ```
//!
//! where `Π_{nm} = ⟨n| Π_+ |m⟩` is the matrix of the "result ≥ 0" projector of
//! the respective measurement and `χ = θ + φ` is the sum of the two local
//! measurement angles. See [`quadrature::SignProfile`].
//!
//! Modules:
//!
//! * [`fock`]: circle-state coefficients and oscillator eigenfunctions.
//! * [`quadrature`]: joint quadrature densities, half-range overlaps, P++.
//! * [`bell`]: the Clauser-Horne functional, angle optimisation, r0 sweeps.
//! * [`lhv`]: the Husimi-density local hidden variable model.
//! * [`homodyne`]: balanced homodyne detection with a finite local oscillator.
//! * [`sampling`]: seeded Monte-Carlo estimators.
//!
//! Data-parallel loops go through [`Execution`]; with the default `parallel`
//! feature they run on rayon, otherwise sequentially. Results are identical
//! either way.

pub mod bell;
pub mod error;
pub mod exec;
pub mod fock;
pub mod homodyne;
pub mod integrate;
pub mod lhv;
pub mod matrix;
mod nelder_mead;
pub mod quadrature;
pub mod sampling;
pub mod special;

pub use bell::{BellAngles, BellResult, ReducedAngles};
pub use error::{Error, Result};
pub use exec::Execution;
pub use fock::{CircleStateCoeffs, OscillatorBasis};
pub use matrix::SymMatrix;
pub use quadrature::{JointDensityGrid, OverlapMatrix, SignProfile, SignStatistics};
