//! Exact tools for menus of truthful combinatorial auctions: taxation and
//! communication complexity measurement, menu verification, menu
//! reconstruction from value, demand and communication access, and
//! transformations of ex-post mechanisms.
//!
//! Every numeric type is generic over [`Scalar`]. The aliases below fix the
//! defaults: [`Rat`] (`Ratio<i128>`) for everyday use and [`BigRat`] when
//! exponent growth could overflow 128-bit numerators.

pub mod bundle;
pub mod catalog;
pub mod comm_reconstruct;
pub mod demand_menus;
pub mod disjointness;
pub mod error;
pub mod json;
pub mod menu;
pub mod min_affine;
pub mod oracle;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod transforms;
pub mod valuation;
pub mod value_reconstruct;
pub mod verify;

pub use bundle::Bundle;
pub use catalog::Catalog;
pub use error::{Error, Result};
pub use menu::{menu_complexity, normalize_menu, profit_argmax_set, Menu};
pub use min_affine::MinAffineMenu;
pub use protocol::{make_example, measure_complexities, run_mechanism, ComplexityReport, Mechanism, MechanismSpec};
pub use scalar::{Price, Scalar};
pub use valuation::{ClassFlags, Valuation, ValuationClass, XosClauses};

/// Default exact scalar.
pub type Rat = num_rational::Ratio<i128>;
/// Unbounded exact scalar.
pub type BigRat = num_rational::BigRational;

pub type BigValuation = Valuation<BigRat>;
pub type BigMenu = Menu<BigRat>;
