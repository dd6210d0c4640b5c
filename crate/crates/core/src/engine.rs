//! The moment hierarchy driver and the cone-membership queries built on it.

use gtmp_conic::{solve, verify_ray, ConicSolution, RayCheck, Residuals, SolverOptions, Status};
use log::{info, warn};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::extract::{
    approximate_sequence, check_flat, dehomogenize_measure, extract_atoms, AtomicMeasure, Dehomogenized,
    ExtractOptions, FlatReport,
};
use crate::moment::{FullTms, Tms};
use crate::poly::Polynomial;
use crate::relax::{
    assemble_relaxation, build_cone_membership_with, build_relaxation_on, build_sos_membership, quadratic_form,
    random_interior_objective, MomentProblemSpec, RelaxationInstance, SosDecomposition,
};
use crate::set::{lift_set, SemialgebraicSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GtmpOptions {
    pub seed: u64,
    pub k_max: usize,
    /// Objective degree; the smallest even integer above `deg(A)` if unset.
    pub d1: Option<usize>,
    pub tol_rank: f64,
    pub tol_tau: f64,
    /// Row and constraint tolerance for accepting an extracted measure.
    pub tol_measure: f64,
    pub retries: usize,
    /// Replace the generator `x0 >= 0` by `x0 >= eps`.
    pub x0_floor: Option<f64>,
    pub eps_schedule: Vec<f64>,
    pub solver: SolverOptions,
}

impl Default for GtmpOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            k_max: 6,
            d1: None,
            tol_rank: 1e-6,
            tol_tau: 1e-6,
            tol_measure: 1e-5,
            retries: 3,
            x0_floor: None,
            eps_schedule: vec![1e-1, 1e-2, 1e-3],
            solver: SolverOptions::default(),
        }
    }
}

impl GtmpOptions {
    fn extract(&self, seed: u64) -> ExtractOptions {
        ExtractOptions {
            tol_rank: self.tol_rank,
            seed,
            ..ExtractOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeTag {
    KMeasureFound,
    ClosureMeasureOnly,
    Infeasible,
    Undetermined,
}

impl OutcomeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeTag::KMeasureFound => "KMeasureFound",
            OutcomeTag::ClosureMeasureOnly => "ClosureMeasureOnly",
            OutcomeTag::Infeasible => "Infeasible",
            OutcomeTag::Undetermined => "Undetermined",
        }
    }
}

/// One solved relaxation order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTrace {
    pub k: usize,
    pub seed: u64,
    pub status: Status,
    pub iterations: usize,
    pub objective: f64,
    pub residuals: Residuals,
    pub flat: Vec<FlatReport>,
    pub note: Option<String>,
}

impl OrderTrace {
    fn new(k: usize, seed: u64, sol: &ConicSolution) -> Self {
        Self {
            k,
            seed,
            status: sol.status,
            iterations: sol.iterations,
            objective: sol.objective_value,
            residuals: sol.residuals,
            flat: Vec::new(),
            note: None,
        }
    }
}

/// `q = sum_i theta_i a^_i` together with a decomposition of `q` in
/// `Ideal(c~_eq)_2k + Qmod(c~_in)_2k` and `sum_i theta_i b_i < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonexistenceCertificate {
    pub order: usize,
    pub q: Polynomial,
    /// Row multipliers; nonpositive on inequality rows.
    pub theta: Vec<f64>,
    pub decomposition: SosDecomposition,
    pub pairing_value: f64,
    pub ray_check: RayCheck,
}

/// Independent re-verification of a [`NonexistenceCertificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    /// `max |expand(decomposition) - q|`.
    pub decomposition_residual: f64,
    /// `max |sum theta_i a^_i - q|`.
    pub row_residual: f64,
    pub psd_violation: f64,
    pub sign_violation: f64,
    pub pairing: f64,
}

impl CertificateCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.decomposition_residual <= tol
            && self.row_residual <= tol
            && self.psd_violation <= tol
            && self.sign_violation <= 0.0
            && self.pairing < -1e-8
    }
}

impl NonexistenceCertificate {
    /// Recompute every claim from the lifted rows `a^_i`, `b` and `m1`.
    pub fn verify(&self, lifted_rows: &[Polynomial], b_vals: &[f64], m1: usize) -> CertificateCheck {
        let n1 = self.q.num_vars();
        let mut comb = Polynomial::zero(n1);
        let mut pairing = 0.0;
        let mut sign = 0.0f64;
        for (i, (a, &b)) in lifted_rows.iter().zip(b_vals).enumerate() {
            let th = self.theta.get(i).copied().unwrap_or(0.0);
            comb = comb.add(&a.scale(&th));
            pairing += th * b;
            if i >= m1 {
                sign = sign.max(th);
            }
        }
        let row_residual = if lifted_rows.len() == self.theta.len() {
            comb.sub(&self.q).max_abs_coef()
        } else {
            f64::INFINITY
        };
        CertificateCheck {
            decomposition_residual: self.decomposition.residual(&self.q),
            row_residual,
            psd_violation: self.decomposition.psd_violation(),
            sign_violation: sign,
            pairing,
        }
    }
}

fn psd_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|e| e.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// Turn the Farkas ray of an infeasible relaxation into a polynomial
/// certificate and re-verify it.
pub fn certify_nonexistence(sol: &ConicSolution, inst: &RelaxationInstance) -> Result<NonexistenceCertificate> {
    if sol.status != Status::PrimalInfeasible {
        return Err(Error::CertificateAssemblyFailure(format!(
            "solver status {} carries no ray",
            sol.status.as_str()
        )));
    }
    let ray = sol
        .certificate_ray
        .as_ref()
        .ok_or_else(|| Error::CertificateAssemblyFailure("missing ray".into()))?;
    let ray_check = verify_ray(&inst.program, ray);
    let ray = ray.normalized();
    let n1 = inst.num_vars();
    let theta: Vec<f64> = ray.eq.iter().cloned().chain(ray.ineq.iter().map(|u| -u)).collect();
    let mut q = Polynomial::zero(n1);
    for (a, th) in inst.a_rows.iter().zip(&theta) {
        q = q.add(&a.scale(th));
    }
    let gram_generators: Vec<Polynomial> = inst.psd_plans.iter().map(|p| p.generator.clone()).collect();
    let gram_bases = inst.psd_plans.iter().map(|p| p.row_indices.clone()).collect();
    let grams: Vec<DMatrix<f64>> = ray.psd.iter().map(psd_part).collect();
    let multipliers = inst
        .zero_plans
        .iter()
        .zip(&ray.zero)
        .map(|(p, v)| quadratic_form(&p.row_indices, v).scale(&-1.0))
        .collect();
    let decomposition = SosDecomposition {
        gram_generators,
        gram_bases,
        grams,
        ideal_generators: inst.zero_plans.iter().map(|p| p.generator.clone()).collect(),
        multipliers,
    };
    let cert = NonexistenceCertificate {
        order: inst.order,
        q,
        theta,
        decomposition,
        pairing_value: ray.pairing,
        ray_check,
    };
    let check = cert.verify(&inst.a_rows, &inst.b_vals, inst.m1);
    if !check.passes(1e-6) {
        return Err(Error::CertificateAssemblyFailure(format!("{check:?}")));
    }
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtmpOutcome {
    pub tag: OutcomeTag,
    /// Order at which the outcome was decided.
    pub order: Option<usize>,
    /// `Original` for `KMeasureFound`, `Lifted` for `ClosureMeasureOnly`.
    pub measure: Option<AtomicMeasure>,
    /// The lifted measure behind a `KMeasureFound` result.
    pub lifted_measure: Option<AtomicMeasure>,
    pub certificate: Option<NonexistenceCertificate>,
    /// Dehomogenized approximants for `ClosureMeasureOnly`.
    pub approximants: Vec<(f64, AtomicMeasure)>,
    pub trace: Vec<OrderTrace>,
    pub reason: Option<String>,
}

impl GtmpOutcome {
    fn new(tag: OutcomeTag, trace: Vec<OrderTrace>) -> Self {
        Self {
            tag,
            order: None,
            measure: None,
            lifted_measure: None,
            certificate: None,
            approximants: Vec::new(),
            trace,
            reason: None,
        }
    }

    fn undetermined(trace: Vec<OrderTrace>, reason: String) -> Self {
        let mut o = Self::new(OutcomeTag::Undetermined, trace);
        o.reason = Some(reason);
        o
    }
}

/// Largest violation of the rows and of `K` by `mu`, scaled by
/// `max(1, |b_i|)` for rows.
pub fn measure_violation(spec: &MomentProblemSpec, mu: &AtomicMeasure) -> f64 {
    let rows = spec
        .row_residuals(|a| mu.integrate(a))
        .iter()
        .zip(&spec.b_vals)
        .map(|(r, b)| r.abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    let set = mu.atoms.iter().map(|u| spec.set.violation(u)).fold(0.0, f64::max);
    rows.max(set)
}

enum FlatScan {
    Found(usize, AtomicMeasure),
    NotFlat,
}

fn scan_flat(
    w: &FullTms,
    k: usize,
    t_min: usize,
    d_k: usize,
    opts: &GtmpOptions,
    seed: u64,
    trace: &mut OrderTrace,
) -> FlatScan {
    for t in t_min..=k {
        let report = check_flat(w, t, d_k, opts.tol_rank);
        let flat = report.flat;
        trace.flat.push(report);
        if !flat {
            continue;
        }
        match extract_atoms(w, t, &opts.extract(seed)) {
            Ok(nu) => return FlatScan::Found(t, nu),
            Err(e) => {
                info!("flat at t={t} but extraction failed: {e}");
                trace.note = Some(format!("t={t}: {e}"));
            }
        }
    }
    FlatScan::NotFlat
}

fn derived_seed(seed: u64, attempt: usize) -> u64 {
    seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const UNCHECKABLE: &str =
    "finite convergence needs finitely many KKT points of the dual and nonemptiness of the interior intersection; neither is checked";

/// The moment hierarchy loop: certify infeasibility, find a `K`-measure,
/// or report that only the closure system is solvable.
pub fn solve_gtmp(spec: &MomentProblemSpec, opts: &GtmpOptions) -> Result<GtmpOutcome> {
    let d = spec.deg();
    let d1 = opts.d1.unwrap_or_else(|| spec.default_d1());
    if !d1.is_multiple_of(2) || d1 <= d {
        return Err(Error::InvalidProblem(format!(
            "d1 = {d1} must be even and exceed deg(A) = {d}"
        )));
    }
    let mut lifted = lift_set(&spec.set);
    if let Some(eps) = opts.x0_floor {
        lifted = lifted.with_x0_floor(eps);
    }
    let n1 = lifted.num_vars();
    let d_k = spec.set.d_k();
    let t_min = d_k.max(d.div_ceil(2));
    let mut trace = Vec::new();
    let mut closure: Option<(usize, AtomicMeasure)> = None;

    for attempt in 0..=opts.retries {
        let seed = derived_seed(opts.seed, attempt);
        let f = random_interior_objective(d1, n1, seed)?;
        let mut found_zero_tau = false;
        for k in d1 / 2..=opts.k_max {
            let inst = build_relaxation_on(spec, lifted.clone(), k, &f)?;
            let sol = solve(&inst.program, &opts.solver)?;
            let mut tr = OrderTrace::new(k, seed, &sol);
            info!(
                "k={k} seed={seed}: {} after {} iterations",
                sol.status.as_str(),
                sol.iterations
            );
            match sol.status {
                Status::PrimalInfeasible => {
                    if opts.x0_floor.is_some() {
                        tr.note = Some("infeasible only with the x0 floor in place".into());
                        trace.push(tr);
                        return Ok(GtmpOutcome::undetermined(
                            trace,
                            "the x0 floor shrinks the lifted set, so infeasibility is inconclusive".into(),
                        ));
                    }
                    match certify_nonexistence(&sol, &inst) {
                        Ok(cert) => {
                            trace.push(tr);
                            let mut out = GtmpOutcome::new(OutcomeTag::Infeasible, trace);
                            out.order = Some(k);
                            out.certificate = Some(cert);
                            return Ok(out);
                        }
                        Err(e) => {
                            tr.note = Some(e.to_string());
                            trace.push(tr);
                            return Ok(GtmpOutcome::undetermined(trace, e.to_string()));
                        }
                    }
                }
                Status::Optimal => {}
                other => {
                    trace.push(tr);
                    return Ok(GtmpOutcome::undetermined(
                        trace,
                        format!("conic solver returned {} at order {k}", other.as_str()),
                    ));
                }
            }
            let w = FullTms::with_basis(inst.basis.clone(), sol.primal.clone())?;
            match scan_flat(&w, k, t_min, d_k, opts, seed, &mut tr) {
                FlatScan::NotFlat => {
                    trace.push(tr);
                    continue;
                }
                FlatScan::Found(t, nu) => {
                    if nu.len() > spec.a_polys.len().max(1) {
                        warn!("{} atoms exceed the row count {}", nu.len(), spec.a_polys.len());
                    }
                    match dehomogenize_measure(&nu, d, opts.tol_tau) {
                        Dehomogenized::Measure(mu) => {
                            let viol = measure_violation(spec, &mu);
                            if viol <= opts.tol_measure {
                                trace.push(tr);
                                let mut out = GtmpOutcome::new(OutcomeTag::KMeasureFound, trace);
                                out.order = Some(k);
                                out.measure = Some(mu);
                                out.lifted_measure = Some(nu);
                                return Ok(out);
                            }
                            tr.note = Some(format!("t={t}: extracted measure misses the rows by {viol:.3e}"));
                            trace.push(tr);
                        }
                        Dehomogenized::ZeroTau(z) => {
                            tr.note = Some(format!("t={t}: {} atom(s) with x0 <= {:.1e}", z.len(), opts.tol_tau));
                            trace.push(tr);
                            if closure.is_none() {
                                closure = Some((k, nu));
                            }
                            found_zero_tau = true;
                            break;
                        }
                    }
                }
            }
        }
        if !found_zero_tau {
            break;
        }
    }

    match closure {
        Some((k, nu)) => {
            let mut out = GtmpOutcome::new(OutcomeTag::ClosureMeasureOnly, trace);
            out.order = Some(k);
            if spec.set.closed_at_infinity {
                match approximate_sequence(&nu, &lift_set(&spec.set), d, opts.tol_tau, &opts.eps_schedule) {
                    Ok(seq) => out.approximants = opts.eps_schedule.iter().cloned().zip(seq).collect(),
                    Err(e) => out.reason = Some(e.to_string()),
                }
            }
            out.measure = Some(nu);
            Ok(out)
        }
        None => Ok(GtmpOutcome::undetermined(
            trace,
            format!("no flat truncation up to k = {}; {UNCHECKABLE}", opts.k_max),
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeMembership {
    /// Feasible at order `k`: the first order with a flat truncation, whose
    /// measure is attached, or else the last order tried.
    InRelaxation {
        k: usize,
        measure: Option<AtomicMeasure>,
    },
    NotInClosure(Box<NonexistenceCertificate>),
    Undetermined(String),
}

/// Order-by-order test of `y` against the moment cone relaxations.
pub fn membership_moment_cone(y: &Tms, set: &SemialgebraicSet, opts: &GtmpOptions) -> Result<ConeMembership> {
    let d = y.support.deg();
    let n1 = set.num_vars() + 1;
    let d_k = set.d_k();
    let mut feasible_at = None;
    for k in d.div_ceil(2).max(1)..=opts.k_max {
        let d0 = (d + 1).div_ceil(2).min(k);
        let f = random_interior_objective(2 * d0, n1, opts.seed)?;
        let inst = build_cone_membership_with(y, set, k, Some(&f))?;
        let sol = solve(&inst.program, &opts.solver)?;
        match sol.status {
            Status::PrimalInfeasible => {
                let cert = certify_nonexistence(&sol, &inst)?;
                return Ok(ConeMembership::NotInClosure(Box::new(cert)));
            }
            Status::Optimal => {
                let w = FullTms::with_basis(inst.basis.clone(), sol.primal.clone())?;
                let mut tr = OrderTrace::new(k, opts.seed, &sol);
                let t_min = d_k.max(d.div_ceil(2));
                if let FlatScan::Found(_, nu) = scan_flat(&w, k, t_min, d_k, opts, opts.seed, &mut tr) {
                    return Ok(ConeMembership::InRelaxation { k, measure: Some(nu) });
                }
                feasible_at = Some(k);
            }
            other => {
                return Ok(ConeMembership::Undetermined(format!(
                    "conic solver returned {} at order {k}",
                    other.as_str()
                )))
            }
        }
    }
    Ok(match feasible_at {
        Some(k) => ConeMembership::InRelaxation { k, measure: None },
        None => ConeMembership::Undetermined(format!("no decision up to k = {}", opts.k_max)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SosMembership {
    Member {
        k: usize,
        decomposition: SosDecomposition,
        residual: f64,
    },
    Unknown,
}

/// Search `P^(k)(K)` for increasing `k`; there is no negative certificate.
pub fn membership_sos_cone(p: &Polynomial, set: &SemialgebraicSet, opts: &GtmpOptions) -> Result<SosMembership> {
    let lifted_deg = lift_set(set)
        .eq_tuple
        .iter()
        .chain(&lift_set(set).ineq_tuple)
        .map(|g| g.degree())
        .max()
        .unwrap_or(0);
    let k0 = p.degree().max(lifted_deg).div_ceil(2).max(1);
    for k in k0..=opts.k_max {
        let prog = build_sos_membership(p, set, k)?;
        let sol = solve(&prog.program, &opts.solver)?;
        if sol.status != Status::Optimal {
            info!("sos membership at k={k}: {}", sol.status.as_str());
            continue;
        }
        let dec = prog.reconstruct(&sol.primal);
        let residual = dec.residual(&prog.target);
        if residual <= 1e-7 && dec.psd_violation() <= 1e-7 {
            return Ok(SosMembership::Member {
                k,
                decomposition: dec,
                residual,
            });
        }
        info!("sos membership at k={k}: residual {residual:.3e}");
    }
    Ok(SosMembership::Unknown)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalOptResult {
    pub value: f64,
    pub order: usize,
    pub flat: bool,
    /// Lifted minimizing measure when the truncation was flat.
    pub lifted_measure: Option<AtomicMeasure>,
    /// Its dehomogenization when every atom has `x0 > tol_tau`.
    pub measure: Option<AtomicMeasure>,
    pub trace: Vec<OrderTrace>,
}

/// `min f/g` over `K` through `min <f^, w>` subject to `<g^, w> = 1`.
pub fn solve_rational_opt(
    f: &Polynomial,
    g: &Polynomial,
    set: &SemialgebraicSet,
    opts: &GtmpOptions,
) -> Result<RationalOptResult> {
    let n = set.num_vars();
    if f.num_vars() != n || g.num_vars() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if f.num_vars() != n { f.num_vars() } else { g.num_vars() },
        });
    }
    let d = f.degree().max(g.degree());
    let fh = f.homogenize(d)?;
    let gh = g.homogenize(d)?;
    let d_k = set.d_k();
    let t_min = d_k.max(d.div_ceil(2));
    let mut trace = Vec::new();
    let mut last: Option<(f64, usize)> = None;
    for k in d.div_ceil(2).max(d_k).max(1)..=opts.k_max {
        let inst = assemble_relaxation(lift_set(set), vec![gh.clone()], vec![1.0], 1, d, fh.clone(), k)?;
        let sol = solve(&inst.program, &opts.solver)?;
        let mut tr = OrderTrace::new(k, opts.seed, &sol);
        match sol.status {
            Status::Optimal => {}
            Status::PrimalInfeasible => {
                return Err(Error::InvalidProblem(
                    "the normalization <g, y> = 1 is infeasible (g vanishes on the lifted set)".into(),
                ))
            }
            other => {
                return Err(Error::InvalidProblem(format!(
                    "conic solver returned {} at order {k}",
                    other.as_str()
                )))
            }
        }
        let w = FullTms::with_basis(inst.basis.clone(), sol.primal.clone())?;
        let scan = scan_flat(&w, k, t_min, d_k, opts, opts.seed, &mut tr);
        trace.push(tr);
        last = Some((sol.objective_value, k));
        if let FlatScan::Found(_, nu) = scan {
            let measure = match dehomogenize_measure(&nu, d, opts.tol_tau) {
                Dehomogenized::Measure(mu) => Some(mu),
                Dehomogenized::ZeroTau(_) => None,
            };
            return Ok(RationalOptResult {
                value: sol.objective_value,
                order: k,
                flat: true,
                lifted_measure: Some(nu),
                measure,
                trace,
            });
        }
    }
    let (value, order) = last.ok_or_else(|| Error::InvalidProblem("k_max is below the starting order".into()))?;
    Ok(RationalOptResult {
        value,
        order,
        flat: false,
        lifted_measure: None,
        measure: None,
        trace,
    })
}
