//! Fredholm determinants `Det(I + λT)` and traces of trace-class operators.
//!
//! Four operator representations are supported, each reduced to its sequence
//! of trace powers `Tr(Tᵐ)` and fed to one Plemelj–Smithies series evaluator:
//!
//! * [`lattice`]: discrete kernels `K(j, m)` on ℤⁿ×ℤⁿ,
//! * [`toroidal`]: symbols `σ(x, k)` on 𝕋ⁿ×ℤⁿ via `A_{jk} = σ̂(j-k, k)`,
//! * [`invariant`]: block symbols of invariant operators and spectra of
//!   elliptic operators on closed manifolds,
//! * [`bundle`]: symbols `σ(i, r, ξ)` of invariant operators on homogeneous
//!   vector bundles.
//!
//! [`oracle`] holds brute-force cross-checks, [`spec`] the JSON operator
//! file format and [`operator`] the dispatch from a parsed file to the above.

pub mod bundle;
pub mod error;
pub mod invariant;
pub mod lattice;
pub mod linalg;
pub mod operator;
pub mod oracle;
pub mod plemelj;
mod sparse;
pub mod spec;
pub mod toroidal;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;
pub use plemelj::DetResult;
