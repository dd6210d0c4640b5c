//! Generalized truncated moment problems on unbounded semialgebraic sets.
//!
//! Polynomials and moment sequences are generic over [`scalar::Scalar`]
//! (`f64` and `BigRational`); relaxations, extraction and the driver work
//! in `f64`.

// `!(x > 0.0)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod engine;
pub mod error;
pub mod extract;
pub mod moment;
pub mod poly;
pub mod relax;
pub mod scalar;
pub mod set;
pub mod tensor;

pub use engine::{
    certify_nonexistence, membership_moment_cone, membership_sos_cone, solve_gtmp, solve_rational_opt, ConeMembership,
    GtmpOptions, GtmpOutcome, NonexistenceCertificate, OutcomeTag, SosMembership,
};
pub use error::{Error, Result};
pub use extract::{AtomicMeasure, MeasureSpace};
pub use relax::MomentProblemSpec;
pub use tensor::{detect_psop, detect_scp, SymmetricTensor};

pub type RealPolynomial = poly::Polynomial<f64>;
pub type RationalPolynomial = poly::Polynomial<num_rational::BigRational>;
pub type RealTms = moment::Tms<f64>;
pub type RationalTms = moment::Tms<num_rational::BigRational>;
pub type RealSet = set::SemialgebraicSet<f64>;
pub type RationalSet = set::SemialgebraicSet<num_rational::BigRational>;
