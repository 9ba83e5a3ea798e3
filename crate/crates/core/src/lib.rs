//! Analysis, synthesis, and verification of discrete-time positive
//! Takagi-Sugeno fuzzy systems with state feedback.
//!
//! Stability of a positive fuzzy plant is certified with a linear copositive
//! Lyapunov function `V(x) = p'x`, which turns every condition in this crate
//! into a small linear program instead of a matrix inequality:
//!
//! * [`analysis`] — open-loop positivity and stability certificates,
//! * [`synthesis`] — state-feedback gain design (exact, positive-input and
//!   robust interval variants) with closed-loop verification,
//! * [`sim`] — trajectory simulation and CSV export,
//! * [`model`] — the fuzzy plant description and its JSON form,
//! * [`lp`] — the bundled dense simplex solver behind all certificates,
//! * [`linalg`], [`expr`] — matrix kernels and the membership expression
//!   language.
//!
//! The numeric kernels in [`linalg`] and [`expr`] are generic over the scalar
//! type; the model-level modules fix `f64`, aliased below.

// Index loops read better than iterator chains in the tableau/matrix code.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod expr;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod sim;
pub mod synthesis;

/// Double-precision matrix, the concrete type used by all model-level APIs.
pub type Mat = linalg::Matrix<f64>;
/// Double-precision vector.
pub type Vec64 = linalg::Vector<f64>;

/// Outcome of a feasibility question, carrying a certificate when one exists.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    Feasible(T),
    Infeasible,
}

impl<T> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&T> {
        match self {
            Feasibility::Feasible(c) => Some(c),
            Feasibility::Infeasible => None,
        }
    }
}
