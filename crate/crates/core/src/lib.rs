//! Numerical toolkit for critically finite one-dimensional maps.
//!
//! The crate locates critically finite parameters in concrete families,
//! assembles the transfer operator of a marked map together with the
//! determinant matrix `D(rho)`, certifies (positive) transversality, iterates
//! lifts of holomorphic motions, and traces critical-relation curves ("bones")
//! in the real cubic family.
//!
//! Parameters are always *critical values*: for the one-parameter families the
//! parameter `w` equals the critical value `c_1 = G_w(c_0)`, and for the cubic
//! family `w = (f(a), f(-a))` with the `(a, b)` chart in [`family::cubic_chart`].

pub mod bones;
pub mod error;
pub mod exec;
pub mod family;
pub mod kneading;
pub mod lifting;
pub mod linalg;
pub mod orbit;
pub mod poly;
pub mod transfer;

pub use error::{Error, Result};
pub use exec::Exec;
pub use family::{Base, Deformation, FamilySpec};

/// Complex scalar used throughout; real inputs have zero imaginary part.
pub type Scalar = num_complex::Complex64;

/// Shorthand for a real scalar.
pub fn re(x: f64) -> Scalar {
    Scalar::new(x, 0.0)
}
