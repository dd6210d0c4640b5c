use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::poly::MultiIndex;
use crate::scalar::Scalar;

/// Sparse polynomial with terms kept in graded-lex order.
///
/// Zero coefficients are never stored; the check is exact.
#[derive(Clone, PartialEq)]
pub struct Polynomial<T: Scalar = f64> {
    num_vars: usize,
    terms: BTreeMap<MultiIndex, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero(num_vars: usize) -> Self {
        Self {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: T) -> Self {
        Self::monomial(MultiIndex::zero(num_vars), c)
    }

    pub fn monomial(alpha: MultiIndex, c: T) -> Self {
        let mut p = Self::zero(alpha.num_vars());
        p.add_term(alpha, c);
        p
    }

    /// The variable `x_i` (0-based).
    pub fn var(num_vars: usize, i: usize) -> Self {
        Self::monomial(MultiIndex::unit(num_vars, i), T::one())
    }

    /// Build from `(exponents, coefficient)` pairs; repeated exponents are
    /// summed.
    pub fn from_terms(num_vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, T)>) -> Result<Self> {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(Error::DimensionMismatch {
                    expected: num_vars,
                    found: e.len(),
                });
            }
            p.add_term(MultiIndex::new(e), c);
        }
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().next_back().map_or(0, |a| a.degree())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> T {
        self.terms.get(alpha).cloned().unwrap_or_else(T::zero)
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: T) {
        assert_eq!(alpha.num_vars(), self.num_vars, "monomial arity");
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&alpha) {
            Some(v) => {
                *v = v.clone() + c;
                if v.is_zero() {
                    self.terms.remove(&alpha);
                }
            }
            None => {
                self.terms.insert(alpha, c);
            }
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.keys().all(|a| a.degree() == d)
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (a, v) in &self.terms {
            p.add_term(a.clone(), v.clone() * c.clone());
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.num_vars, other.num_vars, "polynomial arity");
        let mut p = self.clone();
        for (a, v) in &other.terms {
            p.add_term(a.clone(), v.clone());
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.num_vars, other.num_vars, "polynomial arity");
        let mut p = Self::zero(self.num_vars);
        for (a, u) in &self.terms {
            for (b, v) in &other.terms {
                p.add_term(a.add(b), u.clone() * v.clone());
            }
        }
        p
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.num_vars, T::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact evaluation by term summation.
    pub fn evaluate(&self, point: &[T]) -> Result<T> {
        if point.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: point.len(),
            });
        }
        let mut s = T::zero();
        for (a, c) in &self.terms {
            let mut t = c.clone();
            for (&e, x) in a.exponents().iter().zip(point) {
                for _ in 0..e {
                    t = t * x.clone();
                }
            }
            s = s + t;
        }
        Ok(s)
    }

    /// `x0^target * p(x / x0)` in the variables `(x0, x1, ..., xn)`.
    pub fn homogenize(&self, target_degree: usize) -> Result<Self> {
        let deg = self.degree();
        if target_degree < deg {
            return Err(Error::DegreeUnderflow {
                target: target_degree,
                degree: deg,
            });
        }
        let mut p = Self::zero(self.num_vars + 1);
        for (a, c) in &self.terms {
            p.add_term(a.prepend((target_degree - a.degree()) as u32), c.clone());
        }
        Ok(p)
    }

    /// Own-degree homogenization `x0^deg(p) p(x / x0)`.
    pub fn homogenize_own(&self) -> Self {
        self.homogenize(self.degree()).expect("own degree")
    }

    /// Set the leading variable to one.
    pub fn dehomogenize(&self) -> Self {
        assert!(self.num_vars > 0);
        let mut p = Self::zero(self.num_vars - 1);
        for (a, c) in &self.terms {
            p.add_term(a.tail(), c.clone());
        }
        p
    }

    /// Insert a new variable at position 0 that does not occur.
    pub fn lift(&self) -> Self {
        let mut p = Self::zero(self.num_vars + 1);
        for (a, c) in &self.terms {
            p.add_term(a.prepend(0), c.clone());
        }
        p
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Polynomial<U> {
        let mut p = Polynomial::<U>::zero(self.num_vars);
        for (a, c) in &self.terms {
            p.add_term(a.clone(), f(c));
        }
        p
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map(|c| c.to_f64_lossy())
    }

    /// Render with variables named `x{first_index}`, `x{first_index+1}`, ...
    pub fn display_with(&self, first_index: usize) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (a, c)) in self.terms.iter().rev().enumerate() {
            let cf = c.to_f64_lossy();
            let neg = cf < 0.0;
            let mag = cf.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors = Vec::new();
            for (v, &e) in a.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", v + first_index)),
                    _ => factors.push(format!("x{}^{}", v + first_index, e)),
                }
            }
            if factors.is_empty() || mag != 1.0 {
                factors.insert(0, format_coef(mag));
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

fn format_coef(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{:?}", v)
    }
}

impl Polynomial<f64> {
    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.num_vars);
        self.terms.iter().map(|(a, c)| c * a.eval_f64(point)).sum()
    }

    /// Gradient at `point`.
    pub fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_vars];
        for (a, c) in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                let e = a.exponents()[i];
                if e == 0 {
                    continue;
                }
                let mut v = c * e as f64;
                for (j, (&ej, &x)) in a.exponents().iter().zip(point).enumerate() {
                    let p = if j == i { ej - 1 } else { ej };
                    if p > 0 {
                        v *= x.powi(p as i32);
                    }
                }
                *gi += v;
            }
        }
        g
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coef(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl<T: Scalar> fmt::Debug for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({})", self.display_with(1))
    }
}

impl<T: Scalar> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(1))
    }
}
