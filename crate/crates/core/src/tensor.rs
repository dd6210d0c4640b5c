//! Symmetric tensors as moment sequences; PSOP and SCP detection.

use std::collections::BTreeMap;

use log::warn;

use crate::engine::{solve_gtmp, GtmpOptions, GtmpOutcome, OutcomeTag};
use crate::error::{Error, Result};
use crate::moment::Tms;
use crate::poly::{MultiIndex, PowerSupport};
use crate::relax::MomentProblemSpec;
use crate::set::SemialgebraicSet;

/// Symmetric tensor of order `m` on `R^{n+1}`, stored by sorted index
/// tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    dim: usize,
    values: BTreeMap<Vec<usize>, f64>,
}

fn multisets(order: usize, dim: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, left: usize, dim: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(i, left - 1, dim, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, order, dim, &mut Vec::new(), &mut out);
    out
}

impl SymmetricTensor {
    pub fn from_fn(order: usize, dim: usize, f: impl Fn(&[usize]) -> f64) -> Self {
        let values = multisets(order, dim).into_iter().map(|ix| {
            let v = f(&ix);
            (ix, v)
        });
        Self {
            order,
            dim,
            values: values.collect(),
        }
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        Self::from_fn(order, dim, |_| 0.0)
    }

    /// Coordinate input; unlisted entries are zero. Unsorted tuples are
    /// sorted with a warning and conflicting duplicates are rejected.
    pub fn from_coords(order: usize, dim: usize, entries: &[(Vec<usize>, f64)]) -> Result<Self> {
        let mut t = Self::zeros(order, dim);
        let mut seen: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (ix, v) in entries {
            if ix.len() != order {
                return Err(Error::DimensionMismatch {
                    expected: order,
                    found: ix.len(),
                });
            }
            if let Some(&bad) = ix.iter().find(|&&i| i >= dim) {
                return Err(Error::InvalidProblem(format!(
                    "tensor index {bad} out of range 0..{}",
                    dim - 1
                )));
            }
            let mut key = ix.clone();
            key.sort_unstable();
            if key != *ix {
                warn!("tensor index {ix:?} reordered to {key:?}");
            }
            if let Some(prev) = seen.insert(key.clone(), *v) {
                if prev != *v {
                    return Err(Error::InvalidProblem(format!(
                        "conflicting values {prev} and {v} for tensor entry {key:?}"
                    )));
                }
            }
            t.values.insert(key, *v);
        }
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry at any (not necessarily sorted) index tuple.
    pub fn get(&self, ix: &[usize]) -> f64 {
        let mut key = ix.to_vec();
        key.sort_unstable();
        self.values.get(&key).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &f64)> {
        self.values.iter()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    /// `sum_k weights[k] * vectors[k]^{(x) m}`.
    pub fn from_decomposition(order: usize, weights: &[f64], vectors: &[Vec<f64>]) -> Self {
        let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
        Self::from_fn(order, dim, |ix| {
            weights
                .iter()
                .zip(vectors)
                .map(|(w, v)| w * ix.iter().map(|&i| v[i]).product::<f64>())
                .sum()
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .map(|(k, v)| (v - other.get(k)).abs())
            .fold(0.0, f64::max)
    }
}

fn alpha_to_indices(alpha: &MultiIndex, order: usize) -> Vec<usize> {
    let mut ix = vec![0; order - alpha.degree()];
    for (i, &e) in alpha.exponents().iter().enumerate() {
        ix.extend(std::iter::repeat_n(i + 1, e as usize));
    }
    ix
}

/// `b_alpha = B_{i_1..i_m}` with `x0^{m-|alpha|} x^alpha = x_{i_1}..x_{i_m}`.
pub fn tensor_to_tms(b: &SymmetricTensor) -> Tms {
    let support = PowerSupport::full(b.dim - 1, b.order);
    let values = support
        .indices()
        .iter()
        .map(|a| b.get(&alpha_to_indices(a, b.order)))
        .collect();
    Tms { support, values }
}

pub fn tms_to_tensor(y: &Tms, order: usize) -> Result<SymmetricTensor> {
    let n = y.support.num_vars();
    if y.support != PowerSupport::full(n, order) {
        return Err(Error::InvalidProblem(format!(
            "a tensor of order {order} needs the full support of degree {order}"
        )));
    }
    let mut t = SymmetricTensor::zeros(order, n + 1);
    for (a, v) in y.support.indices().iter().zip(&y.values) {
        t.values.insert(alpha_to_indices(a, order), *v);
    }
    Ok(t)
}

/// `B = sum_k weights[k] * vectors[k]^{(x) m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDecomposition {
    pub weights: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Largest entrywise error of the rebuilt tensor.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorOutcome {
    pub outcome: GtmpOutcome,
    /// `(1, v_k)` with weights `lambda_k` for `KMeasureFound`.
    pub decomposition: Option<TensorDecomposition>,
    /// `u~_k` on the sphere with weights `rho_k`, when a lifted measure
    /// was extracted.
    pub lifted_decomposition: Option<TensorDecomposition>,
}

fn detect(b: &SymmetricTensor, set: SemialgebraicSet, opts: &GtmpOptions) -> Result<TensorOutcome> {
    let spec = MomentProblemSpec::from_tms(set, &tensor_to_tms(b))?;
    let outcome = solve_gtmp(&spec, opts)?;
    let scale = b.max_abs().max(1.0);
    let rebuild = |weights: Vec<f64>, vectors: Vec<Vec<f64>>| {
        let r = SymmetricTensor::from_decomposition(b.order, &weights, &vectors);
        TensorDecomposition {
            residual: b.max_abs_diff(&r),
            weights,
            vectors,
        }
    };
    let lifted = match outcome.tag {
        OutcomeTag::KMeasureFound => outcome.lifted_measure.as_ref(),
        OutcomeTag::ClosureMeasureOnly => outcome.measure.as_ref(),
        _ => None,
    }
    .map(|nu| rebuild(nu.weights.clone(), nu.atoms.clone()));
    let decomposition = if outcome.tag == OutcomeTag::KMeasureFound {
        let mu = outcome.measure.as_ref().expect("measure present");
        let vectors = mu
            .atoms
            .iter()
            .map(|u| std::iter::once(1.0).chain(u.iter().cloned()).collect())
            .collect();
        let dec = rebuild(mu.weights.clone(), vectors);
        if dec.residual > 1e-5 * scale {
            warn!("tensor reconstruction error {:.3e}", dec.residual);
        }
        Some(dec)
    } else {
        None
    };
    Ok(TensorOutcome {
        outcome,
        decomposition,
        lifted_decomposition: lifted,
    })
}

/// Positive sum of powers: `B = sum lambda_k (1, v_k)^{(x) m}`, `v_k in R^n`.
pub fn detect_psop(b: &SymmetricTensor, opts: &GtmpOptions) -> Result<TensorOutcome> {
    detect(b, SemialgebraicSet::whole_space(b.dim - 1), opts)
}

/// Strongly completely positive: as [`detect_psop`] with `v_k >= 0`.
pub fn detect_scp(b: &SymmetricTensor, opts: &GtmpOptions) -> Result<TensorOutcome> {
    detect(b, SemialgebraicSet::nonnegative_orthant(b.dim - 1), opts)
}
