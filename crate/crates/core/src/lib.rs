//! Band-structure reconstruction for large finite resonator systems.
//!
//! A periodic system with a `k`-resonator unit cell is described by a matrix
//! *symbol* `f(e^{iα}) = Σ_s a_s e^{iαs}` with `k × k` coefficient blocks. Its
//! finite truncations are block Toeplitz matrices, and their eigenvectors are
//! approximately Bloch modes. The truncated Floquet-Bloch transform (a
//! section-wise discrete Fourier transform) reads off the quasiperiodicity of
//! each eigenvector, so every finite eigenpair `(λ, u)` becomes a point
//! `(Q(u), λ)` that can be laid over the bands of the infinite system.
//!
//! Localized defect modes in aperiodic chains (SSH interfaces, dislocations,
//! compact perturbations) show up as points that fall inside band gaps and
//! have a flat Floquet-Bloch profile.
//!
//! The modules follow the data flow:
//!
//! * [`symbol`]: symbols, band functions and their assumptions.
//! * [`matrices`]: Toeplitz/circulant sections and the resonator chains.
//! * [`transform`]: DFT, sections, the transform itself and `Q`.
//! * [`spectra`]: Hermitian eigensolves and pseudo-eigenpair diagnostics.
//! * [`reconstruct`]: end-to-end pipelines and scenario bundles.
//! * [`verify`]: the named numerical checks behind `tfbt verify`.
//! * [`format`]: the fixed-precision number formatting used by every writer.
//!
//! ```
//! use tfbt::{matrices, reconstruct, symbol::Symbol};
//!
//! // Periodic circulant chain: reconstruction is exact at finite size.
//! let sym = Symbol::monomer(2.0, -1.0).unwrap();
//! let c = matrices::circulant_matrix(&sym, 16).unwrap();
//! let rec = reconstruct::reconstruct_bands(&c, 1).unwrap();
//! for p in rec.points() {
//!     assert!((p.lambda - (2.0 - 2.0 * p.alpha_est.cos())).abs() < 1e-10);
//! }
//! ```

pub mod error;
pub mod matrices;
pub mod reconstruct;
pub mod spectra;
pub mod symbol;
pub mod transform;
pub mod verify;

pub mod format;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

// The guide under `book/` is compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/symbols.md")]
    mod symbols {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/transform.md")]
    mod transform {}
    #[doc = include_str!("../../../book/src/pseudo_eigenpairs.md")]
    mod pseudo_eigenpairs {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/defects.md")]
    mod defects {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
