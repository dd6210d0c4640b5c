//! Semialgebraic sets and their homogenized lift onto the unit sphere.

use crate::error::{Error, Result};
use crate::poly::{MultiIndex, Polynomial};
use crate::scalar::Scalar;

/// `K = { x in R^n : c_i(x) = 0 (i in E), c_j(x) >= 0 (j in I) }`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicSet<T: Scalar = f64> {
    num_vars: usize,
    pub equalities: Vec<Polynomial<T>>,
    pub inequalities: Vec<Polynomial<T>>,
    /// Asserted by the caller; never verified.
    pub closed_at_infinity: bool,
}

impl<T: Scalar> SemialgebraicSet<T> {
    /// The whole space `R^n`.
    pub fn whole_space(num_vars: usize) -> Self {
        Self {
            num_vars,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            closed_at_infinity: true,
        }
    }

    pub fn new(num_vars: usize, equalities: Vec<Polynomial<T>>, inequalities: Vec<Polynomial<T>>) -> Result<Self> {
        for p in equalities.iter().chain(&inequalities) {
            if p.num_vars() != num_vars {
                return Err(Error::DimensionMismatch {
                    expected: num_vars,
                    found: p.num_vars(),
                });
            }
        }
        Ok(Self {
            num_vars,
            equalities,
            inequalities,
            closed_at_infinity: true,
        })
    }

    /// The nonnegative orthant `R^n_+`.
    pub fn nonnegative_orthant(num_vars: usize) -> Self {
        let ineq = (0..num_vars).map(|i| Polynomial::var(num_vars, i)).collect();
        Self::new(num_vars, Vec::new(), ineq).expect("arity")
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// `max(1, ceil(deg c / 2))` over all constraints.
    pub fn d_k(&self) -> usize {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .map(|c| c.degree().div_ceil(2))
            .fold(1, usize::max)
    }

    pub fn to_f64(&self) -> SemialgebraicSet<f64> {
        SemialgebraicSet {
            num_vars: self.num_vars,
            equalities: self.equalities.iter().map(|p| p.to_f64()).collect(),
            inequalities: self.inequalities.iter().map(|p| p.to_f64()).collect(),
            closed_at_infinity: self.closed_at_infinity,
        }
    }
}

impl SemialgebraicSet<f64> {
    /// Largest constraint violation at `x` (0 when `x` lies in `K`).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let e = self.equalities.iter().map(|c| c.eval(x).abs());
        let i = self.inequalities.iter().map(|c| (-c.eval(x)).max(0.0));
        e.chain(i).fold(0.0, f64::max)
    }
}

/// Constraint tuples of the lifted compact set: homogenized equalities plus
/// `||x~||^2 - 1`, homogenized inequalities plus `x0`. Variable 0 is `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedSet<T: Scalar = f64> {
    num_vars: usize,
    pub eq_tuple: Vec<Polynomial<T>>,
    pub ineq_tuple: Vec<Polynomial<T>>,
}

impl<T: Scalar> HomogenizedSet<T> {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// `max(1, ceil(deg / 2))` over the lifted generators.
    pub fn d_k(&self) -> usize {
        self.eq_tuple
            .iter()
            .chain(&self.ineq_tuple)
            .map(|c| c.degree().div_ceil(2))
            .fold(1, usize::max)
    }

    /// Replace the `x0 >= 0` generator by `x0 - eps >= 0`.
    pub fn with_x0_floor(mut self, eps: T) -> Self {
        let n = self.num_vars;
        let x0 = Polynomial::var(n, 0);
        let floor = x0.sub(&Polynomial::constant(n, eps));
        if let Some(last) = self.ineq_tuple.last_mut() {
            *last = floor;
        }
        self
    }
}

/// `||x~||^2 - 1` in `num_vars` variables.
pub fn sphere_polynomial<T: Scalar>(num_vars: usize) -> Polynomial<T> {
    let mut p = Polynomial::constant(num_vars, -T::one());
    for i in 0..num_vars {
        let mut e = vec![0; num_vars];
        e[i] = 2;
        p.add_term(MultiIndex::new(e), T::one());
    }
    p
}

pub fn lift_set<T: Scalar>(k: &SemialgebraicSet<T>) -> HomogenizedSet<T> {
    let n1 = k.num_vars + 1;
    let mut eq_tuple: Vec<Polynomial<T>> = k.equalities.iter().map(|c| c.homogenize_own()).collect();
    eq_tuple.push(sphere_polynomial(n1));
    let mut ineq_tuple: Vec<Polynomial<T>> = k.inequalities.iter().map(|c| c.homogenize_own()).collect();
    ineq_tuple.push(Polynomial::var(n1, 0));
    HomogenizedSet {
        num_vars: n1,
        eq_tuple,
        ineq_tuple,
    }
}

impl HomogenizedSet<f64> {
    /// Largest violation of the lifted constraints at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let e = self.eq_tuple.iter().map(|c| c.eval(x).abs());
        let i = self.ineq_tuple.iter().map(|c| (-c.eval(x)).max(0.0));
        e.chain(i).fold(0.0, f64::max)
    }
}
