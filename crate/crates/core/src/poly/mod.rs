//! Sparse multivariate polynomials.

mod multi_index;
mod parse;
mod polynomial;
mod support;

pub use multi_index::{count_up_to, monomials_of_degree, monomials_up_to, MultiIndex};
pub use parse::parse_polynomial;
pub use polynomial::Polynomial;
pub use support::{MonomialBasis, PowerSupport};
