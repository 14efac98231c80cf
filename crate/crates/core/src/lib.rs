//! Finite-scale toolkit for exchangeable noncommutative processes.
//!
//! Each module realizes one family of algebraic objects concretely enough
//! that its defining identities can be checked numerically:
//!
//! - [`numkernel`]: dense complex matrices shared by everything else.
//! - [`freeprod`]: canonical forms in the algebraic free product of a matrix
//!   algebra, with permutation actions, the unital quotient and evaluation
//!   in concrete representations.
//! - [`exchange`]: permutation enumeration, Cesàro means over finite
//!   symmetric groups and the product-state / block-singleton / weak
//!   clustering checks.
//! - [`qfock`]: truncated q-deformed Fock space.
//! - [`car`]: CAR algebra on finitely many modes via Jordan–Wigner.
//! - [`boolfock`]: Boolean Fock space and its matrix units.
//! - [`haagerup`]: free-group words and the states `w ↦ e^{-λ|w|}`.
//! - [`cli`]: batch suites and report emission.

pub mod boolfock;
pub mod car;
pub mod cli;
pub mod error;
pub mod exchange;
pub mod freeprod;
pub mod fuzz;
pub mod haagerup;
pub mod numkernel;
pub mod qfock;

pub use error::{Error, Result};
pub use exchange::Permutation;
pub use numkernel::CMat;

pub use num_complex::Complex64;

/// Site / generator index type. Index sets are finite sets of these.
pub type Index = i64;

/// Default numerical tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
