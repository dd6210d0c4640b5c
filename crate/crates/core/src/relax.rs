//! Lowering of moment problems to conic programs on the lifted moment
//! vector `w`, plus the SOS side of the cone hierarchy.

use std::collections::HashMap;
use std::sync::Arc;

use gtmp_conic::{ConicProgram, LinearRow, MatrixMap};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::moment::{build_localizer_in, LocalizerPlan, Tms};
use crate::poly::{monomials_up_to, MonomialBasis, MultiIndex, Polynomial, PowerSupport};
use crate::set::{lift_set, HomogenizedSet, SemialgebraicSet};

/// Linear moment system `<a_i, y> = b_i` (`i < m1`), `<a_i, y> >= b_i`
/// (`i >= m1`) over an `A`-tms `y` that should admit a `K`-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblemSpec {
    pub set: SemialgebraicSet,
    pub support: PowerSupport,
    pub a_polys: Vec<Polynomial>,
    pub b_vals: Vec<f64>,
    pub m1: usize,
}

impl MomentProblemSpec {
    pub fn new(
        set: SemialgebraicSet,
        support: PowerSupport,
        a_polys: Vec<Polynomial>,
        b_vals: Vec<f64>,
        m1: usize,
    ) -> Result<Self> {
        let n = set.num_vars();
        if support.num_vars() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: support.num_vars(),
            });
        }
        if support.is_empty() {
            return Err(Error::InvalidProblem("empty power support".into()));
        }
        if a_polys.len() != b_vals.len() {
            return Err(Error::InvalidProblem(format!(
                "{} rows but {} right-hand sides",
                a_polys.len(),
                b_vals.len()
            )));
        }
        if m1 > a_polys.len() {
            return Err(Error::InvalidProblem(format!(
                "m1 = {m1} exceeds the row count {}",
                a_polys.len()
            )));
        }
        for (i, a) in a_polys.iter().enumerate() {
            if a.num_vars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.num_vars(),
                });
            }
            if let Some((alpha, _)) = a.terms().find(|(alpha, _)| !support.contains(alpha)) {
                return Err(Error::InvalidProblem(format!(
                    "row {} uses exponent {:?} outside the support",
                    i + 1,
                    alpha.exponents()
                )));
            }
        }
        Ok(Self {
            set,
            support,
            a_polys,
            b_vals,
            m1,
        })
    }

    /// Rows `<x^alpha, y> = y_alpha` for every `alpha` in the support.
    pub fn from_tms(set: SemialgebraicSet, y: &Tms) -> Result<Self> {
        let a = y
            .support
            .indices()
            .iter()
            .map(|alpha| Polynomial::monomial(alpha.clone(), 1.0))
            .collect::<Vec<_>>();
        let m = a.len();
        Self::new(set, y.support.clone(), a, y.values.clone(), m)
    }

    pub fn num_vars(&self) -> usize {
        self.set.num_vars()
    }

    /// `d = deg(A)`.
    pub fn deg(&self) -> usize {
        self.support.deg()
    }

    /// Smallest even integer above `d`.
    pub fn default_d1(&self) -> usize {
        2 * (self.deg() + 1).div_ceil(2)
    }

    /// Signed row residuals at a moment functional `y -> <a_i, y>`:
    /// `<a_i,y> - b_i` for equalities and `min(0, <a_i,y> - b_i)` otherwise.
    pub fn row_residuals(&self, pair: impl Fn(&Polynomial) -> f64) -> Vec<f64> {
        self.a_polys
            .iter()
            .zip(&self.b_vals)
            .enumerate()
            .map(|(i, (a, b))| {
                let r = pair(a) - b;
                if i < self.m1 {
                    r
                } else {
                    r.min(0.0)
                }
            })
            .collect()
    }
}

/// Quadratic form `[x]^T G [x]` over the given monomial basis.
pub fn quadratic_form(basis: &[MultiIndex], gram: &DMatrix<f64>) -> Polynomial {
    let n = basis.first().map(|m| m.num_vars()).unwrap_or(0);
    let mut p = Polynomial::zero(n);
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let g = gram[(i, j)];
            if g != 0.0 {
                p.add_term(basis[i].add(&basis[j]), g);
            }
        }
    }
    p
}

/// `[x~]_{d0}^T G [x~]_{d0}` in `num_vars` variables.
pub fn sos_objective(gram: &DMatrix<f64>, d0: usize, num_vars: usize) -> Result<Polynomial> {
    let basis = monomials_up_to(num_vars, d0);
    if gram.nrows() != basis.len() || gram.ncols() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: gram.nrows(),
        });
    }
    Ok(quadratic_form(&basis, gram))
}

/// `f = [x~]_{d0}^T R^T R [x~]_{d0}` with a seeded Gaussian `R`,
/// `d0 = d1 / 2`.
pub fn random_interior_objective(d1: usize, num_vars: usize, seed: u64) -> Result<Polynomial> {
    if d1 == 0 || !d1.is_multiple_of(2) {
        return Err(Error::InvalidProblem(format!(
            "objective degree {d1} must be positive and even"
        )));
    }
    let d0 = d1 / 2;
    let s = crate::poly::count_up_to(num_vars, d0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = DMatrix::<f64>::from_fn(s, s, |_, _| StandardNormal.sample(&mut rng));
    sos_objective(&(r.transpose() * r), d0, num_vars)
}

/// One order of the moment hierarchy, with the plans needed to interpret
/// the program's blocks.
#[derive(Debug, Clone)]
pub struct RelaxationInstance {
    pub order: usize,
    /// Degree of the objective (0 for pure feasibility programs).
    pub d1: usize,
    pub d: usize,
    pub f: Polynomial,
    /// Lifted rows `a^_i = x0^d a_i(x/x0)` with their right-hand sides.
    pub a_rows: Vec<Polynomial>,
    pub b_vals: Vec<f64>,
    pub m1: usize,
    pub program: ConicProgram,
    pub lifted: HomogenizedSet,
    pub basis: Arc<MonomialBasis>,
    /// `L_h` for every `h` in the equality tuple, aligned with
    /// `program.zero_blocks`.
    pub zero_plans: Vec<LocalizerPlan>,
    /// `L_g` for every `g` in the inequality tuple, then `M_k`; aligned
    /// with `program.psd_blocks`.
    pub psd_plans: Vec<LocalizerPlan>,
}

impl RelaxationInstance {
    pub fn num_vars(&self) -> usize {
        self.lifted.num_vars()
    }

    /// Linear functional of `p` on `w` as a sparse row.
    pub fn functional(&self, p: &Polynomial) -> Result<Vec<(usize, f64)>> {
        functional(&self.basis, p)
    }
}

fn functional(basis: &MonomialBasis, p: &Polynomial) -> Result<Vec<(usize, f64)>> {
    p.terms()
        .map(|(beta, c)| {
            basis
                .get(beta)
                .map(|i| (i, *c))
                .ok_or_else(|| Error::IndexOutOfRange(beta.exponents().to_vec()))
        })
        .collect()
}

/// Assemble the order-`k` program over the given lifted constraints.
///
/// `rows` are already lifted; the first `m1` are equalities.
pub fn assemble_relaxation(
    lifted: HomogenizedSet,
    rows: Vec<Polynomial>,
    b_vals: Vec<f64>,
    m1: usize,
    d: usize,
    objective: Polynomial,
    k: usize,
) -> Result<RelaxationInstance> {
    let n1 = lifted.num_vars();
    if objective.num_vars() != n1 {
        return Err(Error::DimensionMismatch {
            expected: n1,
            found: objective.num_vars(),
        });
    }
    if objective.degree() > 2 * k {
        return Err(Error::OrderTooLow {
            degree: objective.degree(),
            order: k,
        });
    }
    if d > 2 * k {
        return Err(Error::OrderTooLow { degree: d, order: k });
    }
    let basis = Arc::new(MonomialBasis::new(n1, 2 * k));
    let mut program = ConicProgram::new(basis.len());
    for (i, c) in functional(&basis, &objective)? {
        program.objective[i] = c;
    }
    for (i, (a, &b)) in rows.iter().zip(&b_vals).enumerate() {
        let row = LinearRow::new(functional(&basis, a)?, b);
        if i < m1 {
            program.eq_rows.push(row);
        } else {
            program.ineq_rows.push(row);
        }
    }
    let mut zero_plans = Vec::new();
    for h in &lifted.eq_tuple {
        let plan = build_localizer_in(h, k, &basis)?;
        program.zero_blocks.push(plan.to_matrix_map());
        zero_plans.push(plan);
    }
    let mut psd_plans = Vec::new();
    let one = Polynomial::constant(n1, 1.0);
    for g in lifted.ineq_tuple.iter().chain(std::iter::once(&one)) {
        let plan = build_localizer_in(g, k, &basis)?;
        program.psd_blocks.push(plan.to_matrix_map());
        psd_plans.push(plan);
    }
    Ok(RelaxationInstance {
        order: k,
        d1: objective.degree(),
        d,
        f: objective,
        a_rows: rows,
        b_vals,
        m1,
        program,
        lifted,
        basis,
        zero_plans,
        psd_plans,
    })
}

fn lift_rows(spec: &MomentProblemSpec) -> Result<Vec<Polynomial>> {
    spec.a_polys.iter().map(|a| a.homogenize(spec.deg())).collect()
}

/// Order-`k` moment relaxation of `spec` with objective `<f, w>`.
pub fn build_relaxation(spec: &MomentProblemSpec, k: usize, f: &Polynomial) -> Result<RelaxationInstance> {
    build_relaxation_on(spec, lift_set(&spec.set), k, f)
}

/// [`build_relaxation`] over an explicitly given lifted set.
pub fn build_relaxation_on(
    spec: &MomentProblemSpec,
    lifted: HomogenizedSet,
    k: usize,
    f: &Polynomial,
) -> Result<RelaxationInstance> {
    let d1 = f.degree();
    if d1 % 2 != 0 || d1 <= spec.deg() {
        return Err(Error::InvalidProblem(format!(
            "objective degree {d1} must be even and exceed deg(A) = {}",
            spec.deg()
        )));
    }
    if 2 * k < d1 {
        return Err(Error::OrderTooLow { degree: d1, order: k });
    }
    assemble_relaxation(
        lifted,
        lift_rows(spec)?,
        spec.b_vals.clone(),
        spec.m1,
        spec.deg(),
        f.clone(),
        k,
    )
}

/// Feasibility program fixing `w|_A~ = y~` under the order-`k` blocks.
pub fn build_cone_membership(y: &Tms, set: &SemialgebraicSet, k: usize) -> Result<RelaxationInstance> {
    build_cone_membership_with(y, set, k, None)
}

/// [`build_cone_membership`] with an optional objective in place of zero.
pub fn build_cone_membership_with(
    y: &Tms,
    set: &SemialgebraicSet,
    k: usize,
    objective: Option<&Polynomial>,
) -> Result<RelaxationInstance> {
    let spec = MomentProblemSpec::from_tms(set.clone(), y)?;
    if 2 * k < spec.deg() {
        return Err(Error::OrderTooLow {
            degree: spec.deg(),
            order: k,
        });
    }
    let lifted = lift_set(set);
    let f = objective
        .cloned()
        .unwrap_or_else(|| Polynomial::zero(lifted.num_vars()));
    let rows = lift_rows(&spec)?;
    assemble_relaxation(lifted, rows, spec.b_vals.clone(), spec.m1, spec.deg(), f, k)
}

/// Gram matrices and ideal multipliers witnessing
/// `q = sum_g g [x]^T G_g [x] + sum_h h u_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosDecomposition {
    /// Quadratic-module generators (`1` first).
    pub gram_generators: Vec<Polynomial>,
    pub gram_bases: Vec<Vec<MultiIndex>>,
    pub grams: Vec<DMatrix<f64>>,
    pub ideal_generators: Vec<Polynomial>,
    pub multipliers: Vec<Polynomial>,
}

impl SosDecomposition {
    pub fn expand(&self) -> Polynomial {
        let n = self
            .gram_generators
            .first()
            .or(self.ideal_generators.first())
            .map(|p| p.num_vars())
            .unwrap_or(0);
        let mut out = Polynomial::zero(n);
        for ((g, b), m) in self.gram_generators.iter().zip(&self.gram_bases).zip(&self.grams) {
            out = out.add(&g.mul(&quadratic_form(b, m)));
        }
        for (h, u) in self.ideal_generators.iter().zip(&self.multipliers) {
            out = out.add(&h.mul(u));
        }
        out
    }

    /// Largest coefficient of `expand() - q`.
    pub fn residual(&self, q: &Polynomial) -> f64 {
        self.expand().sub(q).max_abs_coef()
    }

    /// Most negative Gram eigenvalue (0 if all PSD).
    pub fn psd_violation(&self) -> f64 {
        self.grams
            .iter()
            .filter(|g| g.nrows() > 0)
            .map(|g| SymmetricEigen::new(g.clone()).eigenvalues.min())
            .fold(0.0, |a: f64, e| a.max(-e))
    }
}

/// Variable layout of the SOS membership program.
#[derive(Debug, Clone)]
pub struct SosProgram {
    pub program: ConicProgram,
    /// `p~`, the target of the coefficient matching.
    pub target: Polynomial,
    pub gram_generators: Vec<Polynomial>,
    pub gram_bases: Vec<Vec<MultiIndex>>,
    gram_offsets: Vec<usize>,
    pub ideal_generators: Vec<Polynomial>,
    pub ideal_bases: Vec<Vec<MultiIndex>>,
    ideal_offsets: Vec<usize>,
}

impl SosProgram {
    /// Read Gram matrices and multipliers off a primal point.
    pub fn reconstruct(&self, x: &[f64]) -> SosDecomposition {
        let grams = self
            .gram_bases
            .iter()
            .zip(&self.gram_offsets)
            .map(|(b, &off)| {
                let s = b.len();
                let mut m = DMatrix::zeros(s, s);
                let mut v = off;
                for i in 0..s {
                    for j in i..s {
                        m[(i, j)] = x[v];
                        m[(j, i)] = x[v];
                        v += 1;
                    }
                }
                m
            })
            .collect();
        let multipliers = self
            .ideal_bases
            .iter()
            .zip(&self.ideal_offsets)
            .map(|(b, &off)| {
                let n = self.target.num_vars();
                let mut u = Polynomial::zero(n);
                for (i, m) in b.iter().enumerate() {
                    u.add_term(m.clone(), x[off + i]);
                }
                u
            })
            .collect();
        SosDecomposition {
            gram_generators: self.gram_generators.clone(),
            gram_bases: self.gram_bases.clone(),
            grams,
            ideal_generators: self.ideal_generators.clone(),
            multipliers,
        }
    }
}

/// Feasibility program for `p~ in Ideal(c~_eq)_2k + Qmod(c~_in)_2k`.
pub fn build_sos_membership(p: &Polynomial, set: &SemialgebraicSet, k: usize) -> Result<SosProgram> {
    if p.num_vars() != set.num_vars() {
        return Err(Error::DimensionMismatch {
            expected: set.num_vars(),
            found: p.num_vars(),
        });
    }
    if p.degree() > 2 * k {
        return Err(Error::OrderTooLow {
            degree: p.degree(),
            order: k,
        });
    }
    let lifted = lift_set(set);
    let n1 = lifted.num_vars();
    let target = p.homogenize_own();
    let basis = MonomialBasis::new(n1, 2 * k);
    let mut rows: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    let mut nvar = 0;

    let mut gram_generators = vec![Polynomial::constant(n1, 1.0)];
    gram_generators.extend(lifted.ineq_tuple.iter().cloned());
    let mut gram_bases = Vec::new();
    let mut gram_offsets = Vec::new();
    let mut psd_blocks = Vec::new();
    for g in &gram_generators {
        let dg = g.degree();
        if dg > 2 * k {
            return Err(Error::OrderTooLow { degree: dg, order: k });
        }
        let b = monomials_up_to(n1, k - dg.div_ceil(2));
        let s = b.len();
        let mut block = MatrixMap::new(s);
        gram_offsets.push(nvar);
        for i in 0..s {
            for j in i..s {
                let mult = if i == j { 1.0 } else { 2.0 };
                let ab = b[i].add(&b[j]);
                for (gamma, c) in g.terms() {
                    let beta = basis.get(&gamma.add(&ab)).expect("degree within 2k");
                    rows.entry(beta).or_default().push((nvar, mult * c));
                }
                block.push(i, j, nvar, 1.0);
                nvar += 1;
            }
        }
        psd_blocks.push(block);
        gram_bases.push(b);
    }

    let ideal_generators = lifted.eq_tuple.clone();
    let mut ideal_bases = Vec::new();
    let mut ideal_offsets = Vec::new();
    for h in &ideal_generators {
        let dh = h.degree();
        if dh > 2 * k {
            return Err(Error::OrderTooLow { degree: dh, order: k });
        }
        let b = monomials_up_to(n1, 2 * k - dh);
        ideal_offsets.push(nvar);
        for m in &b {
            for (gamma, c) in h.terms() {
                let beta = basis.get(&gamma.add(m)).expect("degree within 2k");
                rows.entry(beta).or_default().push((nvar, *c));
            }
            nvar += 1;
        }
        ideal_bases.push(b);
    }

    let mut program = ConicProgram::new(nvar);
    for (beta, m) in basis.monomials().iter().enumerate() {
        let rhs = target.coefficient(m);
        let coeffs = rows.remove(&beta).unwrap_or_default();
        if coeffs.is_empty() && rhs == 0.0 {
            continue;
        }
        program.eq_rows.push(LinearRow::new(coeffs, rhs));
    }
    program.psd_blocks = psd_blocks;
    Ok(SosProgram {
        program,
        target,
        gram_generators,
        gram_bases,
        gram_offsets,
        ideal_generators,
        ideal_bases,
        ideal_offsets,
    })
}
