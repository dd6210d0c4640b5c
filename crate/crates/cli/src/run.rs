//! Dispatch a validated problem to the engine and fill in a report.

use gtmp_conic::ConicProgram;
use gtmp_core::engine::{
    measure_violation, membership_moment_cone, solve_gtmp, solve_rational_opt, ConeMembership, GtmpOptions,
    GtmpOutcome, NonexistenceCertificate, OutcomeTag,
};
use gtmp_core::extract::{approximate_sequence, dehomogenize_measure, AtomicMeasure, Dehomogenized};
use gtmp_core::poly::Polynomial;
use gtmp_core::relax::{
    assemble_relaxation, build_cone_membership_with, build_relaxation_on, random_interior_objective, MomentProblemSpec,
};
use gtmp_core::set::lift_set;
use gtmp_core::tensor::{detect_psop, detect_scp, TensorOutcome};

use crate::problem::{Problem, Task};
use crate::report::{
    outcome, ApproximantOut, CertificateOut, CheckOut, DecompositionOut, MeasureOut, RatoptOut, Report, TraceOut,
};

/// `a^_i = x0^d a_i(x/x0)` for every row of `spec`, equalities first.
pub fn lifted_rows(spec: &MomentProblemSpec) -> Vec<Polynomial> {
    spec.a_polys
        .iter()
        .map(|a| a.homogenize(spec.deg()).expect("row degree is at most deg(A)"))
        .collect()
}

fn row_labels(p: &Problem) -> Vec<String> {
    (0..p.spec.as_ref().map_or(0, |s| s.a_polys.len()))
        .map(|i| p.row_label(i))
        .collect()
}

fn certificate(p: &Problem, spec: &MomentProblemSpec, cert: &NonexistenceCertificate) -> CertificateOut {
    let c = cert.verify(&lifted_rows(spec), &spec.b_vals, spec.m1);
    let check = CheckOut {
        decomposition_residual: crate::report::r12(c.decomposition_residual),
        row_residual: crate::report::r12(c.row_residual),
        psd_violation: crate::report::r12(c.psd_violation),
        sign_violation: crate::report::r12(c.sign_violation),
        pairing: crate::report::r12(c.pairing),
    };
    CertificateOut::new(cert, &row_labels(p), check)
}

fn zero_tau(nu: &AtomicMeasure, tol_tau: f64) -> Vec<usize> {
    nu.atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| a[0] <= tol_tau)
        .map(|(i, _)| i)
        .collect()
}

fn fill_outcome(r: &mut Report, p: &Problem, spec: &MomentProblemSpec, out: &GtmpOutcome, opts: &GtmpOptions) {
    r.set_outcome(out.tag.as_str());
    r.order = out.order;
    r.reason = out.reason.clone();
    r.trace = out.trace.iter().map(TraceOut::new).collect();
    match out.tag {
        OutcomeTag::KMeasureFound => {
            r.measure = out.measure.as_ref().map(MeasureOut::from_measure);
            r.lifted_measure = out.lifted_measure.as_ref().map(MeasureOut::from_measure);
        }
        OutcomeTag::ClosureMeasureOnly => {
            if let Some(nu) = &out.measure {
                r.lifted_measure = Some(MeasureOut::from_measure(nu));
                r.zero_tau_atoms = zero_tau(nu, opts.tol_tau);
            }
            r.approximants = out
                .approximants
                .iter()
                .map(|(eps, mu)| ApproximantOut {
                    eps: *eps,
                    measure: MeasureOut::from_measure(mu),
                })
                .collect();
        }
        OutcomeTag::Infeasible => {
            r.certificate = out.certificate.as_ref().map(|c| certificate(p, spec, c));
        }
        OutcomeTag::Undetermined => {}
    }
}

fn fill_tensor(r: &mut Report, p: &Problem, spec: &MomentProblemSpec, t: &TensorOutcome, opts: &GtmpOptions) {
    fill_outcome(r, p, spec, &t.outcome, opts);
    r.decomposition = t.decomposition.as_ref().map(DecompositionOut::new);
    r.lifted_decomposition = t.lifted_decomposition.as_ref().map(DecompositionOut::new);
}

fn fill_cone(r: &mut Report, p: &Problem, spec: &MomentProblemSpec, m: ConeMembership, opts: &GtmpOptions) {
    match m {
        ConeMembership::InRelaxation { k, measure } => {
            r.order = Some(k);
            let Some(nu) = measure else {
                r.reason = Some(format!("feasible at order {k} without a flat truncation"));
                return;
            };
            r.lifted_measure = Some(MeasureOut::from_measure(&nu));
            match dehomogenize_measure(&nu, spec.deg(), opts.tol_tau) {
                Dehomogenized::Measure(mu) => {
                    let viol = measure_violation(spec, &mu);
                    if viol <= opts.tol_measure {
                        r.set_outcome(outcome::MEMBER);
                        r.measure = Some(MeasureOut::from_measure(&mu));
                    } else {
                        r.reason = Some(format!("extracted measure misses the moments by {viol:.3e}"));
                    }
                }
                Dehomogenized::ZeroTau(_) => {
                    r.set_outcome(outcome::CLOSURE_MEASURE_ONLY);
                    r.zero_tau_atoms = zero_tau(&nu, opts.tol_tau);
                    if spec.set.closed_at_infinity {
                        match approximate_sequence(
                            &nu,
                            &lift_set(&spec.set),
                            spec.deg(),
                            opts.tol_tau,
                            &opts.eps_schedule,
                        ) {
                            Ok(seq) => {
                                r.approximants = opts
                                    .eps_schedule
                                    .iter()
                                    .zip(&seq)
                                    .map(|(eps, mu)| ApproximantOut {
                                        eps: *eps,
                                        measure: MeasureOut::from_measure(mu),
                                    })
                                    .collect()
                            }
                            Err(e) => r.reason = Some(e.to_string()),
                        }
                    }
                }
            }
        }
        ConeMembership::NotInClosure(cert) => {
            r.set_outcome(outcome::NOT_IN_CLOSURE);
            r.order = Some(cert.order);
            r.certificate = Some(certificate(p, spec, &cert));
        }
        ConeMembership::Undetermined(reason) => r.reason = Some(reason),
    }
}

fn fill_ratopt(r: &mut Report, f: &Polynomial, g: &Polynomial, p: &Problem, opts: &GtmpOptions) {
    match solve_rational_opt(f, g, &p.set, opts) {
        Ok(res) => {
            r.order = Some(res.order);
            r.trace = res.trace.iter().map(TraceOut::new).collect();
            r.ratopt = Some(RatoptOut {
                value: crate::report::r12(res.value),
                flat: res.flat,
            });
            if res.flat {
                r.set_outcome(outcome::SOLVED);
            } else {
                r.reason = Some("no flat truncation; the value is a lower bound".into());
            }
            if let Some(nu) = &res.lifted_measure {
                r.lifted_measure = Some(MeasureOut::from_measure(nu));
                r.zero_tau_atoms = zero_tau(nu, opts.tol_tau);
            }
            r.measure = res.measure.as_ref().map(MeasureOut::from_measure);
        }
        Err(e) => r.reason = Some(format!("error: {e}")),
    }
}

/// Run the engine on `p`. Engine errors become `Undetermined` reports.
pub fn run_problem(p: &Problem, opts: &GtmpOptions) -> Report {
    let mut r = Report::new(p.file.name.clone(), p.mode(), p.set.closed_at_infinity, opts);
    let spec = p.spec.as_ref();
    match &p.task {
        Task::Gtmp => match solve_gtmp(spec.expect("gtmp spec"), opts) {
            Ok(out) => fill_outcome(&mut r, p, spec.unwrap(), &out, opts),
            Err(e) => r.reason = Some(format!("error: {e}")),
        },
        Task::Tensor { tensor, scp } => {
            let res = if *scp {
                detect_scp(tensor, opts)
            } else {
                detect_psop(tensor, opts)
            };
            match res {
                Ok(t) => fill_tensor(&mut r, p, spec.expect("tensor spec"), &t, opts),
                Err(e) => r.reason = Some(format!("error: {e}")),
            }
        }
        Task::Cone { y } => match membership_moment_cone(y, &p.set, opts) {
            Ok(m) => fill_cone(&mut r, p, spec.expect("cone spec"), m, opts),
            Err(e) => r.reason = Some(format!("error: {e}")),
        },
        Task::Ratopt { f, g } => fill_ratopt(&mut r, f, g, p, opts),
    }
    r
}

/// The first relaxation the solver would build for `p`, for `--dump-sdp`.
pub fn first_program(p: &Problem, opts: &GtmpOptions) -> gtmp_core::Result<ConicProgram> {
    let n1 = p.set.num_vars() + 1;
    let inst = match &p.task {
        Task::Gtmp | Task::Tensor { .. } => {
            let spec = p.spec.as_ref().expect("spec");
            let d1 = opts.d1.unwrap_or_else(|| spec.default_d1());
            let mut lifted = lift_set(&spec.set);
            if let Some(eps) = opts.x0_floor {
                lifted = lifted.with_x0_floor(eps);
            }
            let f = random_interior_objective(d1, n1, opts.seed)?;
            build_relaxation_on(spec, lifted, d1 / 2, &f)?
        }
        Task::Cone { y } => {
            let d = y.support.deg();
            let k = d.div_ceil(2).max(1);
            let d0 = (d + 1).div_ceil(2).min(k);
            let f = random_interior_objective(2 * d0, n1, opts.seed)?;
            build_cone_membership_with(y, &p.set, k, Some(&f))?
        }
        Task::Ratopt { f, g } => {
            let d = f.degree().max(g.degree());
            let k = d.div_ceil(2).max(p.set.d_k()).max(1);
            assemble_relaxation(
                lift_set(&p.set),
                vec![g.homogenize(d)?],
                vec![1.0],
                1,
                d,
                f.homogenize(d)?,
                k,
            )?
        }
    };
    Ok(inst.program)
}
