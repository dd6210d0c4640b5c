use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::{MonomialBasis, MultiIndex, PowerSupport};
use crate::scalar::Scalar;

/// Truncated moment sequence indexed by a power support `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tms<T: Scalar = f64> {
    pub support: PowerSupport,
    pub values: Vec<T>,
}

impl<T: Scalar> Tms<T> {
    pub fn new(support: PowerSupport, values: Vec<T>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: values.len(),
            });
        }
        Ok(Self { support, values })
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<&T> {
        self.support.position(alpha).map(|i| &self.values[i])
    }

    /// Riesz pairing `<p, y>`; every term of `p` must lie in the support.
    pub fn pair(&self, p: &crate::poly::Polynomial<T>) -> Result<T> {
        let mut s = T::zero();
        for (a, c) in p.terms() {
            let v = self
                .get(a)
                .ok_or_else(|| Error::IndexOutOfRange(a.exponents().to_vec()))?;
            s = s + c.clone() * v.clone();
        }
        Ok(s)
    }
}

/// Homogeneous tms over `A~ = {(d - |alpha|, alpha)}` in `n + 1` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct HomTms<T: Scalar = f64> {
    pub support: PowerSupport,
    pub values: Vec<T>,
}

impl<T: Scalar> HomTms<T> {
    pub fn new(support: PowerSupport, values: Vec<T>) -> Result<Self> {
        if !support.is_homogeneous() {
            return Err(Error::NotHomogeneous(support.deg()));
        }
        if values.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: values.len(),
            });
        }
        Ok(Self { support, values })
    }

    pub fn num_vars(&self) -> usize {
        self.support.num_vars()
    }

    pub fn deg(&self) -> usize {
        self.support.deg()
    }
}

/// `y -> y~` with `y~_(d-|alpha|, alpha) = y_alpha`, `d = deg(A)`.
pub fn homogenize_tms<T: Scalar>(y: &Tms<T>) -> HomTms<T> {
    HomTms {
        support: y.support.homogenize(),
        values: y.values.clone(),
    }
}

/// Inverse of [`homogenize_tms`]: drop the `x0` exponent.
pub fn dehomogenize_tms<T: Scalar>(y: &HomTms<T>) -> Tms<T> {
    let indices = y.support.indices().iter().map(|b| b.tail()).collect();
    let support = PowerSupport::new(y.num_vars() - 1, indices).expect("relabeling is injective");
    Tms {
        support,
        values: y.values.clone(),
    }
}

/// Moment vector `w` over every exponent of degree `<= 2k` in `n + 1`
/// variables, in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTms<T: Scalar = f64> {
    basis: Arc<MonomialBasis>,
    order: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> FullTms<T> {
    pub fn new(num_vars: usize, order: usize, values: Vec<T>) -> Result<Self> {
        Self::with_basis(Arc::new(MonomialBasis::new(num_vars, 2 * order)), values)
    }

    /// `basis` must cover degree `2k` for some `k`.
    pub fn with_basis(basis: Arc<MonomialBasis>, values: Vec<T>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: values.len(),
            });
        }
        let order = basis.max_deg() / 2;
        Ok(Self { basis, order, values })
    }

    pub fn zeros(num_vars: usize, order: usize) -> Self {
        let basis = Arc::new(MonomialBasis::new(num_vars, 2 * order));
        let values = vec![T::zero(); basis.len()];
        Self { basis, order, values }
    }

    pub fn num_vars(&self) -> usize {
        self.basis.num_vars()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn get(&self, beta: &MultiIndex) -> Option<&T> {
        self.basis.get(beta).map(|i| &self.values[i])
    }

    /// `w|_{2t}`. The graded order makes this a prefix.
    pub fn truncate(&self, t: usize) -> FullTms<T> {
        assert!(t <= self.order);
        let basis = Arc::new(MonomialBasis::new(self.num_vars(), 2 * t));
        let values = self.values[..basis.len()].to_vec();
        FullTms {
            basis,
            order: t,
            values,
        }
    }

    /// Riesz pairing `<p, w>`.
    pub fn pair(&self, p: &crate::poly::Polynomial<T>) -> Result<T> {
        let mut s = T::zero();
        for (a, c) in p.terms() {
            let v = self
                .get(a)
                .ok_or_else(|| Error::IndexOutOfRange(a.exponents().to_vec()))?;
            s = s + c.clone() * v.clone();
        }
        Ok(s)
    }
}

/// `w|_A`: the subvector of `w` on `support`, in support order.
pub fn restrict<T: Scalar>(w: &FullTms<T>, support: &PowerSupport) -> Result<Tms<T>> {
    if support.num_vars() != w.num_vars() {
        return Err(Error::DimensionMismatch {
            expected: w.num_vars(),
            found: support.num_vars(),
        });
    }
    let values = support
        .indices()
        .iter()
        .map(|b| {
            w.get(b)
                .cloned()
                .ok_or_else(|| Error::IndexOutOfRange(b.exponents().to_vec()))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(Tms {
        support: support.clone(),
        values,
    })
}

/// [`restrict`] onto a homogeneous support.
pub fn restrict_hom<T: Scalar>(w: &FullTms<T>, support: &PowerSupport) -> Result<HomTms<T>> {
    let t = restrict(w, support)?;
    HomTms::new(t.support, t.values)
}

fn power<T: Scalar>(point: &[T], beta: &MultiIndex) -> T {
    let mut v = T::one();
    for (&e, x) in beta.exponents().iter().zip(point) {
        for _ in 0..e {
            v = v * x.clone();
        }
    }
    v
}

fn check_atoms<T: Scalar>(atoms: &[(T, Vec<T>)], num_vars: usize) -> Result<()> {
    for (_, p) in atoms {
        if p.len() != num_vars {
            return Err(Error::DimensionMismatch {
                expected: num_vars,
                found: p.len(),
            });
        }
    }
    Ok(())
}

/// `w_beta = sum_k lambda_k u_k^beta` over every `|beta| <= 2 * order`.
pub fn moments_of_measure<T: Scalar>(atoms: &[(T, Vec<T>)], num_vars: usize, order: usize) -> Result<FullTms<T>> {
    check_atoms(atoms, num_vars)?;
    let basis = Arc::new(MonomialBasis::new(num_vars, 2 * order));
    let values = basis
        .monomials()
        .iter()
        .map(|b| {
            atoms
                .iter()
                .fold(T::zero(), |s, (lam, u)| s + lam.clone() * power(u, b))
        })
        .collect();
    FullTms::with_basis(basis, values)
}

/// Moments of an atomic measure on an arbitrary support.
pub fn moments_on_support<T: Scalar>(atoms: &[(T, Vec<T>)], support: &PowerSupport) -> Result<Tms<T>> {
    check_atoms(atoms, support.num_vars())?;
    let values = support
        .indices()
        .iter()
        .map(|b| {
            atoms
                .iter()
                .fold(T::zero(), |s, (lam, u)| s + lam.clone() * power(u, b))
        })
        .collect();
    Tms::new(support.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_relabel() {
        let y = Tms::new(PowerSupport::full(1, 2), vec![1.0, 2.0, 4.0]).unwrap();
        let h = homogenize_tms(&y);
        let e: Vec<&[u32]> = h.support.indices().iter().map(|b| b.exponents()).collect();
        assert_eq!(e, vec![&[2, 0][..], &[1, 1], &[0, 2]]);
        assert_eq!(h.values, vec![1.0, 2.0, 4.0]);
        assert_eq!(dehomogenize_tms(&h), y);
    }

    #[test]
    fn sphere_point_mass() {
        let s = 1.0 / 6f64.sqrt();
        let mut u = vec![s; 7];
        u[0] = 0.0;
        let w = moments_of_measure(&[(6.0, u)], 7, 1).unwrap();
        assert_eq!(w.values[0], 6.0);
        for i in 1..7 {
            let mut e = vec![0; 7];
            e[i] = 2;
            assert!((w.get(&MultiIndex::new(e)).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_measure_is_zero() {
        let w = moments_of_measure::<f64>(&[], 3, 2).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn restrict_cases() {
        let w = moments_of_measure(&[(1.0, vec![1.0, 0.0, 0.0])], 3, 2).unwrap();
        let a = PowerSupport::full(2, 3).homogenize();
        let r = restrict_hom(&w, &a).unwrap();
        for (b, v) in r.support.indices().iter().zip(&r.values) {
            let want = if b.exponents()[0] == 3 { 1.0 } else { 0.0 };
            assert_eq!(*v, want);
        }
        let full = PowerSupport::full(3, 4);
        assert_eq!(restrict(&w, &full).unwrap().values, w.values);
        let z = FullTms::<f64>::zeros(3, 2);
        assert!(restrict(&z, &a).unwrap().values.iter().all(|&v| v == 0.0));
        let high = PowerSupport::full(3, 5);
        assert!(matches!(restrict(&w, &high), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn truncation_is_prefix() {
        let w = moments_of_measure(&[(2.0, vec![0.5, -1.0])], 2, 3).unwrap();
        let t = w.truncate(1);
        assert_eq!(t.values.len(), 6);
        let direct = moments_of_measure(&[(2.0, vec![0.5, -1.0])], 2, 1).unwrap();
        assert_eq!(t, direct);
    }
}
