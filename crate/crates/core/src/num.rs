//! Scalar abstraction for the LP layer.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the simplex runs on, with its tolerances.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Primal feasibility tolerance for rows and bounds.
    const FEAS_TOL: Self;
    /// Smallest magnitude accepted as a pivot element.
    const PIVOT_TOL: Self;
    /// Reduced-cost tolerance for optimality.
    const OPT_TOL: Self;

    fn from_i64(x: i64) -> Self {
        <Self as FromPrimitive>::from_i64(x).expect("integer representable as scalar")
    }
}

impl Scalar for f64 {
    const FEAS_TOL: f64 = 1e-7;
    const PIVOT_TOL: f64 = 1e-9;
    const OPT_TOL: f64 = 1e-9;
}

impl Scalar for f32 {
    const FEAS_TOL: f32 = 1e-4;
    const PIVOT_TOL: f32 = 1e-6;
    const OPT_TOL: f32 = 1e-6;
}
