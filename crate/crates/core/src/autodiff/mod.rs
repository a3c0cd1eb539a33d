//! Exact derivatives: second-order forward jets over (x, y, z, t) and a
//! reverse-mode tape for parameter gradients.

mod field;
mod jet;
mod real;
mod tape;

pub use field::{evaluate_with_derivatives, finite_difference_probe, DerivativeBundle, DifferentiableField};
pub use jet::{Jet, HESS_INDEX, HESS_LEN, HESS_PAIRS, INPUTS, JET_LEN};
pub use real::Real;
pub use tape::{Tape, Var};
