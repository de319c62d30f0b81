//! A p-adic laboratory for the local theory of the Tate curve.
//!
//! The crate builds the Honda formal group isomorphic to the multiplicative
//! one, the canonical norm-compatible local units of the cyclotomic
//! Z_p-tower, a finite-level Coleman map in a reciprocity-functional model,
//! and the Tate curve uniformization, then verifies the identities relating
//! them by exact congruence checks.

pub mod coleman;
pub mod cyclotomic;
pub mod error;
pub mod honda;
pub mod linalg;
pub mod padic;
pub mod points;
pub mod report;
pub mod series;
pub mod suite;
pub mod tate;

pub use error::{LabError, Result};
pub use padic::{PadicScalar, PrimeContext};
pub use series::TruncatedSeries;
