use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::poly::{monomials_up_to, MultiIndex};

/// A finite set of exponents `A`, kept in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSupport {
    num_vars: usize,
    indices: Vec<MultiIndex>,
    deg: usize,
}

impl PowerSupport {
    pub fn new(num_vars: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        for a in &indices {
            if a.num_vars() != num_vars {
                return Err(Error::DimensionMismatch {
                    expected: num_vars,
                    found: a.num_vars(),
                });
            }
        }
        indices.sort();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateIndex(w[0].exponents().to_vec()));
            }
        }
        let deg = indices.iter().map(|a| a.degree()).max().unwrap_or(0);
        Ok(Self { num_vars, indices, deg })
    }

    /// `N^n_d`: every exponent of total degree at most `d`.
    pub fn full(num_vars: usize, d: usize) -> Self {
        Self {
            num_vars,
            indices: monomials_up_to(num_vars, d),
            deg: d,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(alpha).ok()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.position(alpha).is_some()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.indices.iter().all(|a| a.degree() == self.deg)
    }

    /// `(d - |alpha|, alpha)` for every `alpha`, with `d = deg(A)`.
    pub fn homogenize(&self) -> PowerSupport {
        self.homogenize_to(self.deg)
    }

    pub fn homogenize_to(&self, d: usize) -> PowerSupport {
        let indices = self
            .indices
            .iter()
            .map(|a| a.prepend((d - a.degree()) as u32))
            .collect();
        // The relabeling preserves graded-lex order, so no re-sort is needed.
        PowerSupport {
            num_vars: self.num_vars + 1,
            indices,
            deg: d,
        }
    }
}

/// Dense index of every exponent of degree `<= max_deg`.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    num_vars: usize,
    max_deg: usize,
    list: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
}

impl PartialEq for MonomialBasis {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.max_deg == other.max_deg
    }
}

impl MonomialBasis {
    pub fn new(num_vars: usize, max_deg: usize) -> Self {
        let list = monomials_up_to(num_vars, max_deg);
        let index = list.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Self {
            num_vars,
            max_deg,
            list,
            index,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn max_deg(&self) -> usize {
        self.max_deg
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.list
    }

    /// Number of monomials of degree `<= d`; a prefix of the list.
    pub fn prefix_len(&self, d: usize) -> usize {
        crate::poly::count_up_to(self.num_vars, d)
    }
}
