//! Finite-precision arithmetic in `ℚ_p` and radical towers over it, with exact
//! valuations, absolute precision tracking and Newton–Hensel solving.

mod context;
mod element;
mod newton;

pub use context::{adjoin_radical, Ctx, FieldContext, RationalText, TowerDescriptor, DEFAULT_WORKING_PRECISION, DEGREE_CAP};
pub use element::{field_arith, random_with_valuation, random_with_valuation_rng, Op, PadicElement};
pub use newton::{newton_solve, AnalyticFn, Polynomial};
