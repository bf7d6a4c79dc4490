//! Reference implementations the protocol is checked against. None of them
//! share code paths with [`crate::protocol`].

mod compact;
mod exact_admm;
mod reference;

pub use compact::{CompactForm, CompactState};
pub use exact_admm::{prox_quadratic, ExactAdmm};
pub use reference::{solve_reference, ReferenceSolution, DEFAULT_TOLERANCE};
