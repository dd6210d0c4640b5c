//! Flat truncation checks and atom extraction from moment vectors.

mod nnls;

use log::{debug, info};
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::moment::{moment_matrix, FullTms};
use crate::poly::{count_up_to, MonomialBasis, MultiIndex, Polynomial};
use crate::set::HomogenizedSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureSpace {
    /// Atoms `(tau, v)` on the lifted set in `n + 1` variables.
    Lifted,
    /// Atoms `u` in `R^n`.
    Original,
}

/// Finitely atomic measure `sum_i weights[i] * delta_{atoms[i]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub space: MeasureSpace,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, space: MeasureSpace) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                found: weights.len(),
            });
        }
        if let Some(first) = atoms.first() {
            if let Some(bad) = atoms.iter().find(|a| a.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidProblem("atom weights must be nonnegative".into()));
        }
        Ok(Self { atoms, weights, space })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn num_vars(&self) -> Option<usize> {
        self.atoms.first().map(|a| a.len())
    }

    /// `sum_i lambda_i p(u_i)`.
    pub fn integrate(&self, p: &Polynomial) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(u, l)| l * p.eval(u)).sum()
    }

    pub fn moments(&self, num_vars: usize, order: usize) -> Result<FullTms> {
        let pairs: Vec<(f64, Vec<f64>)> = self.weights.iter().cloned().zip(self.atoms.iter().cloned()).collect();
        crate::moment::moments_of_measure(&pairs, num_vars, order)
    }
}

/// Outcome of a rank test `rank M_{t-d_K} = rank M_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatReport {
    pub t: usize,
    pub rank_low: usize,
    pub rank_high: usize,
    pub flat: bool,
    pub sing_low: Vec<f64>,
    pub sing_high: Vec<f64>,
}

/// `#{sigma_i > tol * max(sigma_1, 1)}`.
pub fn numerical_rank(sing: &[f64], tol: f64) -> usize {
    let top = sing.iter().cloned().fold(0.0, f64::max);
    let cut = tol * top.max(1.0);
    sing.iter().filter(|&&s| s > cut).count()
}

fn sorted_singular_values(m: DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn check_flat(w: &FullTms, t: usize, d_k: usize, tol: f64) -> FlatReport {
    assert!(t >= d_k && t <= w.order(), "flatness test needs d_K <= t <= k");
    let sing_low = sorted_singular_values(moment_matrix(w, t - d_k));
    let sing_high = sorted_singular_values(moment_matrix(w, t));
    let rank_low = numerical_rank(&sing_low, tol);
    let rank_high = numerical_rank(&sing_high, tol);
    FlatReport {
        t,
        rank_low,
        rank_high,
        flat: rank_low == rank_high,
        sing_low,
        sing_high,
    }
}

/// Tolerances and seed for [`extract_atoms`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOptions {
    pub tol_rank: f64,
    /// Allowed `max |moments(nu) - w|_2t|` relative to `max(1, |w|_inf)`.
    pub tol_reconstruct: f64,
    pub seed: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            tol_rank: 1e-6,
            tol_reconstruct: 1e-5,
            seed: 0,
        }
    }
}

/// Greedy row pivoting: `r` rows of `v` among the first `cand` that are
/// numerically independent.
fn pick_basis(v: &DMatrix<f64>, cand: usize, r: usize) -> Result<Vec<usize>> {
    let mut rows = v.rows(0, cand).clone_owned();
    let scale = v.amax().max(1e-300);
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let best = (0..cand)
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, rows.row(i).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, nrm)) = best else { break };
        if nrm <= 1e-9 * scale {
            return Err(Error::EigenDecompositionFailure(format!(
                "only {} independent monomials of degree < t for rank {r}",
                chosen.len()
            )));
        }
        let q = rows.row(i) / nrm;
        for j in 0..cand {
            let c = rows.row(j).dot(&q);
            let upd = &q * c;
            let mut row = rows.row_mut(j);
            row -= upd;
        }
        chosen.push(i);
    }
    if chosen.len() < r {
        return Err(Error::EigenDecompositionFailure(
            "basis selection ran out of monomials".into(),
        ));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Recover a finitely atomic measure on the unit sphere from `w|_2t`
/// (multiplication matrices, joint Schur vectors, NNLS weights).
pub fn extract_atoms(w: &FullTms, t: usize, opts: &ExtractOptions) -> Result<AtomicMeasure> {
    if t == 0 || t > w.order() {
        return Err(Error::InvalidProblem(format!(
            "extraction order {t} outside 1..={}",
            w.order()
        )));
    }
    let n1 = w.num_vars();
    let m = moment_matrix(w, t);
    let eig = SymmetricEigen::new(m);
    let sing: Vec<f64> = eig.eigenvalues.iter().map(|e| e.abs()).collect();
    let r = numerical_rank(&sing, opts.tol_rank);
    if r == 0 {
        return AtomicMeasure::new(Vec::new(), Vec::new(), MeasureSpace::Lifted);
    }
    let mut order: Vec<usize> = (0..sing.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let s = sing.len();
    let mut v = DMatrix::zeros(s, r);
    for (c, &k) in order.iter().take(r).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        v.set_column(c, &(eig.eigenvectors.column(k) * scale));
    }

    let basis_t = MonomialBasis::new(n1, t);
    let cand = count_up_to(n1, t - 1);
    let b = pick_basis(&v, cand, r)?;
    let vb = v.select_rows(&b);
    let vb_inv = vb
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EigenDecompositionFailure("singular basis block".into()))?;
    let mons = basis_t.monomials();
    let mut mult = Vec::with_capacity(n1);
    for i in 0..n1 {
        let e = MultiIndex::unit(n1, i);
        let shifted: Vec<usize> = b
            .iter()
            .map(|&row| basis_t.get(&mons[row].add(&e)).expect("degree <= t"))
            .collect();
        mult.push(v.select_rows(&shifted) * &vb_inv);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let coef: Vec<f64> = (0..n1).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = coef.iter().sum();
    let mut comb = DMatrix::zeros(r, r);
    for (c, ni) in coef.iter().zip(&mult) {
        comb += ni * (*c / total);
    }
    let (q, _) = Schur::try_new(comb, 1e-14, 10_000)
        .ok_or_else(|| Error::EigenDecompositionFailure("Schur iteration did not converge".into()))?
        .unpack();
    let mut atoms = Vec::with_capacity(r);
    for j in 0..r {
        let qj = q.column(j);
        let mut p: Vec<f64> = mult.iter().map(|ni| qj.dot(&(ni * qj))).collect();
        let nrm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            return Err(Error::EigenDecompositionFailure("extracted a vanishing atom".into()));
        }
        p.iter_mut().for_each(|x| *x /= nrm);
        atoms.push(p);
    }

    let wt = w.truncate(t);
    let wv = DVector::from_column_slice(&wt.values);
    let mons2 = wt.basis().monomials();
    let vander = DMatrix::from_fn(mons2.len(), r, |row, k| mons2[row].eval_f64(&atoms[k]));
    let rho = nnls::nnls(&vander, &wv);
    let sum: f64 = rho.iter().sum();
    let mut kept_atoms = Vec::new();
    let mut kept_weights = Vec::new();
    for (k, a) in atoms.into_iter().enumerate() {
        if rho[k] >= 1e-8 * sum && rho[k] > 0.0 {
            kept_atoms.push(a);
            kept_weights.push(rho[k]);
        } else {
            info!("dropping atom {k} with weight {:.3e}", rho[k]);
        }
    }
    let err = (&vander * &rho - &wv).amax();
    let scale = wv.amax().max(1.0);
    debug!("extraction at t={t}: rank {r}, reconstruction error {err:.3e}");
    if err > opts.tol_reconstruct * scale {
        return Err(Error::EigenDecompositionFailure(format!(
            "moment reconstruction error {err:.3e} exceeds {:.1e}",
            opts.tol_reconstruct * scale
        )));
    }
    AtomicMeasure::new(kept_atoms, kept_weights, MeasureSpace::Lifted)
}

/// A lifted atom whose `x0` coordinate is at most `tau_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroTauAtom {
    pub index: usize,
    pub point: Vec<f64>,
    pub weight: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dehomogenized {
    Measure(AtomicMeasure),
    ZeroTau(Vec<ZeroTauAtom>),
}

/// `lambda_i = rho_i tau_i^d`, `u_i = v_i / tau_i` when every `tau_i`
/// exceeds `tau_tol`.
pub fn dehomogenize_measure(nu: &AtomicMeasure, d: usize, tau_tol: f64) -> Dehomogenized {
    let zero: Vec<ZeroTauAtom> = nu
        .atoms
        .iter()
        .zip(&nu.weights)
        .enumerate()
        .filter(|(_, (a, _))| a[0] <= tau_tol)
        .map(|(i, (a, &w))| ZeroTauAtom {
            index: i,
            point: a.clone(),
            weight: w,
            tau: a[0],
        })
        .collect();
    if !zero.is_empty() {
        return Dehomogenized::ZeroTau(zero);
    }
    Dehomogenized::Measure(dehomogenize_positive(nu, d))
}

fn dehomogenize_positive(nu: &AtomicMeasure, d: usize) -> AtomicMeasure {
    let mut atoms = Vec::with_capacity(nu.len());
    let mut weights = Vec::with_capacity(nu.len());
    for (a, &rho) in nu.atoms.iter().zip(&nu.weights) {
        let tau = a[0];
        atoms.push(a[1..].iter().map(|v| v / tau).collect());
        weights.push(rho * tau.powi(d as i32));
    }
    AtomicMeasure {
        atoms,
        weights,
        space: MeasureSpace::Original,
    }
}

/// Gauss-Newton correction of `p` onto the lifted constraints with `x0`
/// held fixed.
fn project_fixed_x0(p: &mut [f64], lifted: &HomogenizedSet) -> Result<()> {
    let n1 = p.len();
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        let mut res = Vec::new();
        let mut jac: Vec<Vec<f64>> = Vec::new();
        for h in &lifted.eq_tuple {
            res.push(h.eval(p));
            jac.push(h.gradient(p)[1..].to_vec());
        }
        for g in &lifted.ineq_tuple {
            let v = g.eval(p);
            if v < 0.0 {
                res.push(v);
                jac.push(g.gradient(p)[1..].to_vec());
            }
        }
        last = res.iter().fold(0.0, |a: f64, r| a.max(r.abs()));
        if last <= 1e-12 {
            return Ok(());
        }
        let j = DMatrix::from_fn(res.len(), n1 - 1, |r, c| jac[r][c]);
        let rv = DVector::from_vec(res);
        let step = j
            .svd(true, true)
            .solve(&rv, 1e-14)
            .map_err(|_| Error::ProjectionFailure(last))?;
        for c in 1..n1 {
            p[c] -= step[c - 1];
        }
    }
    Err(Error::ProjectionFailure(last))
}

/// Dehomogenized approximants of `nu`: each zero-`tau` atom `(0, v)` is
/// replaced by `(eps, v) / ||(eps, v)||`, corrected onto the lifted set.
pub fn approximate_sequence(
    nu: &AtomicMeasure,
    lifted: &HomogenizedSet,
    d: usize,
    tau_tol: f64,
    eps_schedule: &[f64],
) -> Result<Vec<AtomicMeasure>> {
    let mut out = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let mut atoms = Vec::with_capacity(nu.len());
        for a in &nu.atoms {
            if a[0] > tau_tol {
                atoms.push(a.clone());
                continue;
            }
            let mut p = a.clone();
            p[0] = eps;
            let nrm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            p.iter_mut().for_each(|x| *x /= nrm);
            project_fixed_x0(&mut p, lifted)?;
            atoms.push(p);
        }
        let shifted = AtomicMeasure {
            atoms,
            weights: nu.weights.clone(),
            space: MeasureSpace::Lifted,
        };
        out.push(dehomogenize_positive(&shifted, d));
    }
    Ok(out)
}
