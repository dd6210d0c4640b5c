//! Truncated moment sequences and localizing matrices.

mod localizer;
mod tms;

pub use localizer::{build_localizer, build_localizer_in, moment_matrix, LocalizerPlan};
pub use tms::{
    dehomogenize_tms, homogenize_tms, moments_of_measure, moments_on_support, restrict, restrict_hom, FullTms, HomTms,
    Tms,
};
