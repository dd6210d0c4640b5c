use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::moment::FullTms;
use crate::poly::{monomials_up_to, MonomialBasis, MultiIndex, Polynomial};
use crate::scalar::Scalar;

/// Localizing matrix `L_q^(k)[w]` as a linear map of `w`.
///
/// Rows and columns are indexed by monomials of degree
/// `<= k - ceil(deg q / 2)`. `q = 1` gives the moment matrix `M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerPlan<T: Scalar = f64> {
    pub generator: Polynomial<T>,
    pub order: usize,
    pub row_indices: Vec<MultiIndex>,
    /// Upper triangle, row-major: `(i, j, [(w index, coefficient)])`.
    pub entry_map: Vec<(usize, usize, Vec<(usize, T)>)>,
}

impl<T: Scalar> LocalizerPlan<T> {
    pub fn side(&self) -> usize {
        self.row_indices.len()
    }

    /// Row and column bases coincide.
    pub fn col_indices(&self) -> &[MultiIndex] {
        &self.row_indices
    }

    /// Cell `(i, j)`; symmetric access.
    pub fn entry(&self, i: usize, j: usize) -> &[(usize, T)] {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let s = self.side();
        // Row i starts after rows of length s, s - 1, ..., s - i + 1.
        let pos = i * s - i * i.saturating_sub(1) / 2 + (j - i);
        debug_assert_eq!((self.entry_map[pos].0, self.entry_map[pos].1), (i, j));
        &self.entry_map[pos].2
    }

    pub fn assemble(&self, w: &FullTms<T>) -> Vec<Vec<T>> {
        let s = self.side();
        let mut m = vec![vec![T::zero(); s]; s];
        for (i, j, list) in &self.entry_map {
            let v = list
                .iter()
                .fold(T::zero(), |acc, (idx, c)| acc + c.clone() * w.values[*idx].clone());
            m[*i][*j] = v.clone();
            m[*j][*i] = v;
        }
        m
    }
}

impl LocalizerPlan<f64> {
    pub fn assemble_f64(&self, w: &[f64]) -> DMatrix<f64> {
        let s = self.side();
        let mut m = DMatrix::zeros(s, s);
        for (i, j, list) in &self.entry_map {
            let v: f64 = list.iter().map(|&(idx, c)| c * w[idx]).sum();
            m[(*i, *j)] = v;
            m[(*j, *i)] = v;
        }
        m
    }

    pub fn to_matrix_map(&self) -> gtmp_conic::MatrixMap {
        let mut m = gtmp_conic::MatrixMap::new(self.side());
        for (i, j, list) in &self.entry_map {
            for &(idx, c) in list {
                m.push(*i, *j, idx, c);
            }
        }
        m
    }
}

/// Build `L_q^(k)` against the index of `basis` (which must cover degree
/// `2k`).
pub fn build_localizer_in<T: Scalar>(q: &Polynomial<T>, k: usize, basis: &MonomialBasis) -> Result<LocalizerPlan<T>> {
    let dq = q.degree();
    if dq > 2 * k {
        return Err(Error::OrderTooLow { degree: dq, order: k });
    }
    if q.num_vars() != basis.num_vars() {
        return Err(Error::DimensionMismatch {
            expected: basis.num_vars(),
            found: q.num_vars(),
        });
    }
    if basis.max_deg() < 2 * k {
        return Err(Error::OrderTooLow {
            degree: 2 * k,
            order: basis.max_deg() / 2,
        });
    }
    let rows = monomials_up_to(q.num_vars(), k - dq.div_ceil(2));
    let s = rows.len();
    let mut entry_map = Vec::with_capacity(s * (s + 1) / 2);
    for i in 0..s {
        for j in i..s {
            let ab = rows[i].add(&rows[j]);
            let list = q
                .terms()
                .map(|(g, c)| {
                    let beta = g.add(&ab);
                    let idx = basis.get(&beta).expect("degree within 2k");
                    (idx, c.clone())
                })
                .collect();
            entry_map.push((i, j, list));
        }
    }
    Ok(LocalizerPlan {
        generator: q.clone(),
        order: k,
        row_indices: rows,
        entry_map,
    })
}

pub fn build_localizer<T: Scalar>(q: &Polynomial<T>, k: usize, num_vars: usize) -> Result<LocalizerPlan<T>> {
    if q.num_vars() != num_vars {
        return Err(Error::DimensionMismatch {
            expected: num_vars,
            found: q.num_vars(),
        });
    }
    build_localizer_in(q, k, &MonomialBasis::new(num_vars, 2 * k))
}

/// `M_t[w]` assembled directly.
pub fn moment_matrix(w: &FullTms<f64>, t: usize) -> DMatrix<f64> {
    let rows = monomials_up_to(w.num_vars(), t);
    let s = rows.len();
    let mut m = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in i..s {
            let v = *w.get(&rows[i].add(&rows[j])).expect("degree within 2t");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::moments_of_measure;

    #[test]
    fn moment_matrix_layout() {
        let one = Polynomial::<f64>::constant(2, 1.0);
        let plan = build_localizer(&one, 1, 2).unwrap();
        assert_eq!(plan.side(), 3);
        let w = FullTms::new(2, 1, (0..6).map(|v| v as f64).collect()).unwrap();
        let m = plan.assemble_f64(&w.values);
        // basis 1, x0, x1; w order 1, x0, x1, x0^2, x0x1, x1^2
        let want = DMatrix::from_row_slice(3, 3, &[0., 1., 2., 1., 3., 4., 2., 4., 5.]);
        assert_eq!(m, want);
        assert_eq!(moment_matrix(&w, 1), want);
    }

    #[test]
    fn x0_localizer_is_scalar() {
        let x0 = Polynomial::<f64>::var(2, 0);
        let plan = build_localizer(&x0, 1, 2).unwrap();
        assert_eq!(plan.side(), 1);
        assert_eq!(plan.entry(0, 0), &[(1usize, 1.0)][..]);
    }

    #[test]
    fn generator_degree_checked() {
        let q = Polynomial::<f64>::var(2, 0).pow(3);
        assert!(matches!(build_localizer(&q, 1, 2), Err(Error::OrderTooLow { .. })));
    }

    #[test]
    fn entry_lookup_symmetric() {
        let q = Polynomial::<f64>::var(3, 1);
        let plan = build_localizer(&q, 3, 3).unwrap();
        for i in 0..plan.side() {
            for j in 0..plan.side() {
                assert_eq!(plan.entry(i, j), plan.entry(j, i));
            }
        }
    }

    #[test]
    fn rank_one_sum() {
        let atoms = vec![(0.5, vec![0.6, 0.8]), (1.5, vec![1.0, -0.2])];
        let w = moments_of_measure(&atoms, 2, 2).unwrap();
        let q = crate::poly::parse_polynomial::<f64>("x0 - x1^2", 2, 0).unwrap();
        let plan = build_localizer(&q, 2, 2).unwrap();
        let m = plan.assemble_f64(&w.values);
        let mut want = DMatrix::zeros(plan.side(), plan.side());
        for (lam, u) in &atoms {
            let v = nalgebra::DVector::from_iterator(plan.side(), plan.row_indices.iter().map(|a| a.eval_f64(u)));
            want += &v * v.transpose() * (lam * q.eval(u));
        }
        assert!((m - want).amax() < 1e-13);
    }
}
