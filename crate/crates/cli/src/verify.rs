//! Standalone re-verification of a report against its problem. Nothing
//! here calls the solver; every claim is recomputed from the report's
//! numbers and the problem data.

use gtmp_core::extract::AtomicMeasure;
use gtmp_core::poly::{parse_polynomial, MultiIndex, Polynomial};
use gtmp_core::relax::{MomentProblemSpec, SosDecomposition};
use gtmp_core::set::{lift_set, HomogenizedSet};
use gtmp_core::tensor::SymmetricTensor;
use nalgebra::DMatrix;

use crate::problem::{Problem, Task};
use crate::report::{outcome, CertificateOut, DecompositionOut, MeasureOut, Report, Space};
use crate::run::lifted_rows;

/// Row and constraint tolerance for measures, relative to `max(1, |b_i|)`.
pub const MEASURE_TOL: f64 = 1e-5;
/// Residual tolerance for certificate identities.
pub const CERTIFICATE_TOL: f64 = 1e-6;
/// A certificate must pair to at most `-PAIRING_MARGIN`.
pub const PAIRING_MARGIN: f64 = 1e-8;
/// Entrywise tensor reconstruction tolerance, relative to `max(1, max|B|)`.
pub const TENSOR_TOL: f64 = 1e-5;
/// Constraint tolerance for lifted atoms, whose coordinates are only as
/// accurate as the extraction.
pub const LIFTED_ATOM_TOL: f64 = 1e-4;
/// Matching tolerance for certificate generators against the lifted set.
const GENERATOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Verification {
    /// Number of individual checks performed.
    pub checks: usize,
    /// One line per failed check.
    pub issues: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    fn check(&mut self, ok: bool, issue: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.issues.push(issue());
        }
    }
}

impl std::fmt::Display for Verification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "report verified ({} checks)", self.checks);
        }
        writeln!(
            f,
            "report rejected ({} of {} checks failed):",
            self.issues.len(),
            self.checks
        )?;
        for i in &self.issues {
            writeln!(f, "  {i}")?;
        }
        Ok(())
    }
}

fn measure_of(m: &MeasureOut, space: Space, dim: usize, what: &str, v: &mut Verification) -> Option<AtomicMeasure> {
    v.check(m.space == space, || {
        format!("{what}: expected space {space:?}, found {:?}", m.space)
    });
    v.check(m.weights.len() == m.atoms.len(), || {
        format!("{what}: {} weights for {} atoms", m.weights.len(), m.atoms.len())
    });
    v.check(m.atoms.iter().all(|a| a.len() == dim), || {
        format!("{what}: atoms must have {dim} coordinates")
    });
    v.check(m.weights.iter().all(|w| *w >= 0.0 && w.is_finite()), || {
        format!("{what}: weights must be finite and nonnegative")
    });
    if !v.passed() {
        return None;
    }
    m.to_measure()
}

fn row_check(
    v: &mut Verification,
    what: &str,
    p: &Problem,
    spec: &MomentProblemSpec,
    rows: &[Polynomial],
    mu: &AtomicMeasure,
) {
    for (i, (a, &b)) in rows.iter().zip(&spec.b_vals).enumerate() {
        let val = mu.integrate(a);
        let miss = if i < spec.m1 {
            (val - b).abs()
        } else {
            (b - val).max(0.0)
        };
        let scaled = miss / b.abs().max(1.0);
        v.check(scaled <= MEASURE_TOL, || {
            format!(
                "{what}: {} violated, pairing {val:.12} against {b}, residual {scaled:.3e}",
                p.row_label(i)
            )
        });
    }
}

fn check_original_measure(v: &mut Verification, p: &Problem, spec: &MomentProblemSpec, m: &MeasureOut) {
    let n = p.set.num_vars();
    let Some(mu) = measure_of(m, Space::Original, n, "measure", v) else {
        return;
    };
    for (i, u) in mu.atoms.iter().enumerate() {
        let viol = p.set.violation(u);
        v.check(viol <= MEASURE_TOL, || {
            format!("measure: atom {i} violates K by {viol:.3e}")
        });
    }
    row_check(v, "measure", p, spec, &spec.a_polys, &mu);
}

fn check_lifted_atoms(v: &mut Verification, lifted: &HomogenizedSet, nu: &AtomicMeasure, what: &str) {
    for (i, u) in nu.atoms.iter().enumerate() {
        let viol = lifted.violation(u);
        v.check(viol <= LIFTED_ATOM_TOL, || {
            format!("{what}: atom {i} violates the lifted set by {viol:.3e}")
        });
    }
}

fn check_closure(v: &mut Verification, p: &Problem, spec: &MomentProblemSpec, r: &Report) {
    let n1 = p.set.num_vars() + 1;
    let Some(m) = &r.lifted_measure else {
        v.check(false, || "ClosureMeasureOnly without a lifted measure".into());
        return;
    };
    let Some(nu) = measure_of(m, Space::Lifted, n1, "lifted measure", v) else {
        return;
    };
    check_lifted_atoms(v, &lift_set(&p.set), &nu, "lifted measure");
    row_check(v, "lifted measure", p, spec, &lifted_rows(spec), &nu);
    v.check(!r.zero_tau_atoms.is_empty(), || "no zero-tau atom is listed".into());
    for &i in &r.zero_tau_atoms {
        let tau = nu.atoms.get(i).map(|a| a[0]);
        v.check(matches!(tau, Some(t) if t <= r.options.tol_tau), || {
            format!("atom {i} is listed as zero-tau but has x0 = {tau:?}")
        });
    }
    for a in &r.approximants {
        let what = format!("approximant eps = {}", a.eps);
        if let Some(mu) = measure_of(&a.measure, Space::Original, n1 - 1, &what, v) {
            for (i, u) in mu.atoms.iter().enumerate() {
                let viol = p.set.violation(u);
                v.check(viol <= MEASURE_TOL, || {
                    format!("{what}: atom {i} violates K by {viol:.3e}")
                });
            }
        }
    }
}

fn parse_lifted(text: &str, n1: usize, what: &str, v: &mut Verification) -> Option<Polynomial> {
    match parse_polynomial(text, n1, 0) {
        Ok(q) => Some(q),
        Err(e) => {
            v.check(false, || format!("{what}: {e}"));
            None
        }
    }
}

fn matches_any(g: &Polynomial, allowed: &[Polynomial]) -> bool {
    allowed.iter().any(|h| g.sub(h).max_abs_coef() <= GENERATOR_TOL)
}

fn check_certificate(v: &mut Verification, p: &Problem, spec: &MomentProblemSpec, c: &CertificateOut) {
    let n1 = p.set.num_vars() + 1;
    let rows = lifted_rows(spec);
    v.check(c.theta.len() == rows.len(), || {
        format!("certificate: {} multipliers for {} rows", c.theta.len(), rows.len())
    });
    if c.theta.len() != rows.len() {
        return;
    }
    let Some(q) = parse_lifted(&c.q, n1, "certificate q", v) else {
        return;
    };
    let mut comb = Polynomial::zero(n1);
    let mut pairing = 0.0;
    for (i, ((a, &b), t)) in rows.iter().zip(&spec.b_vals).zip(&c.theta).enumerate() {
        comb = comb.add(&a.scale(&t.theta));
        pairing += t.theta * b;
        if i >= spec.m1 {
            v.check(t.theta <= 0.0, || {
                format!(
                    "certificate: multiplier {} of inequality {} is positive",
                    t.theta,
                    p.row_label(i)
                )
            });
        }
    }
    let row_res = comb.sub(&q).max_abs_coef();
    v.check(row_res <= CERTIFICATE_TOL, || {
        format!("certificate: q differs from sum theta_i a_i by {row_res:.3e}")
    });
    v.check(pairing < -PAIRING_MARGIN, || {
        format!("certificate: sum theta_i b_i = {pairing:.3e} is not negative")
    });

    let lifted = lift_set(&p.set);
    let mut gram_allowed = vec![Polynomial::constant(n1, 1.0)];
    gram_allowed.extend(lifted.ineq_tuple.iter().cloned());
    let mut dec = SosDecomposition {
        gram_generators: Vec::new(),
        gram_bases: Vec::new(),
        grams: Vec::new(),
        ideal_generators: Vec::new(),
        multipliers: Vec::new(),
    };
    for (j, blk) in c.gram_blocks.iter().enumerate() {
        let what = format!("certificate gram block {j}");
        let Some(g) = parse_lifted(&blk.generator, n1, &what, v) else {
            return;
        };
        v.check(matches_any(&g, &gram_allowed), || {
            format!(
                "{what}: generator {} is not 1 or an inequality of the lifted set",
                blk.generator
            )
        });
        let s = blk.basis.len();
        let square = blk.matrix.len() == s && blk.matrix.iter().all(|row| row.len() == s);
        let dims = blk.basis.iter().all(|b| b.len() == n1);
        v.check(square && dims, || format!("{what}: basis and matrix shapes disagree"));
        if !(square && dims) {
            return;
        }
        let m = DMatrix::from_fn(s, s, |i, k| blk.matrix[i][k]);
        v.check((&m - m.transpose()).amax() == 0.0, || {
            format!("{what}: matrix is not symmetric")
        });
        dec.gram_generators.push(g);
        dec.gram_bases
            .push(blk.basis.iter().map(|b| MultiIndex::new(b.clone())).collect());
        dec.grams.push(m);
    }
    for (j, t) in c.ideal_terms.iter().enumerate() {
        let what = format!("certificate ideal term {j}");
        let (Some(h), Some(u)) = (
            parse_lifted(&t.generator, n1, &what, v),
            parse_lifted(&t.multiplier, n1, &what, v),
        ) else {
            return;
        };
        v.check(matches_any(&h, &lifted.eq_tuple), || {
            format!("{what}: generator {} is not an equality of the lifted set", t.generator)
        });
        dec.ideal_generators.push(h);
        dec.multipliers.push(u);
    }
    let res = dec.residual(&q);
    v.check(res <= CERTIFICATE_TOL, || {
        format!("certificate: decomposition misses q by {res:.3e}")
    });
    let psd = dec.psd_violation();
    v.check(psd <= CERTIFICATE_TOL, || {
        format!("certificate: Gram matrix eigenvalue -{psd:.3e} below zero")
    });
}

fn check_decomposition(v: &mut Verification, b: &SymmetricTensor, d: &DecompositionOut, what: &str, scp: bool) {
    let shapes = d.weights.len() == d.vectors.len() && d.vectors.iter().all(|x| x.len() == b.dim());
    v.check(shapes, || format!("{what}: vectors must have {} entries", b.dim()));
    if !shapes {
        return;
    }
    v.check(d.weights.iter().all(|w| *w >= 0.0), || {
        format!("{what}: negative weight")
    });
    let rebuilt = SymmetricTensor::from_decomposition(b.order(), &d.weights, &d.vectors);
    let err = rebuilt.max_abs_diff(b);
    let tol = TENSOR_TOL * b.max_abs().max(1.0);
    v.check(err <= tol, || format!("{what}: rebuilt tensor differs by {err:.3e}"));
    if scp {
        v.check(d.vectors.iter().flatten().all(|x| *x >= -1e-6), || {
            format!("{what}: negative entry in a strongly completely positive decomposition")
        });
    }
}

fn check_ratopt(v: &mut Verification, p: &Problem, f: &Polynomial, g: &Polynomial, r: &Report) {
    let Some(ro) = &r.ratopt else {
        v.check(false, || "ratopt report without a value".into());
        return;
    };
    if r.outcome == outcome::SOLVED {
        v.check(ro.flat, || "Solved without a flat truncation".into());
        v.check(r.lifted_measure.is_some(), || {
            "Solved without a minimizing measure".into()
        });
    }
    let n = p.set.num_vars();
    let d = f.degree().max(g.degree());
    if let Some(m) = &r.lifted_measure {
        if let Some(nu) = measure_of(m, Space::Lifted, n + 1, "lifted measure", v) {
            check_lifted_atoms(v, &lift_set(&p.set), &nu, "lifted measure");
            let (fh, gh) = (f.homogenize(d).expect("degree"), g.homogenize(d).expect("degree"));
            let gv = nu.integrate(&gh);
            v.check((gv - 1.0).abs() <= MEASURE_TOL, || {
                format!("lifted measure: <g, nu> = {gv:.12}, expected 1")
            });
            let fv = nu.integrate(&fh);
            v.check((fv - ro.value).abs() <= MEASURE_TOL * ro.value.abs().max(1.0), || {
                format!("lifted measure: <f, nu> = {fv:.12} but the value is {}", ro.value)
            });
        }
    }
    if let Some(m) = &r.measure {
        if let Some(mu) = measure_of(m, Space::Original, n, "measure", v) {
            for (i, u) in mu.atoms.iter().enumerate() {
                let viol = p.set.violation(u);
                v.check(viol <= MEASURE_TOL, || {
                    format!("measure: atom {i} violates K by {viol:.3e}")
                });
                let q = f.eval(u) / g.eval(u);
                v.check((q - ro.value).abs() <= 1e-4 * ro.value.abs().max(1.0), || {
                    format!("measure: f/g = {q:.12} at atom {i}, value {}", ro.value)
                });
            }
        }
    }
}

/// Re-check every claim in `r` against `p`.
pub fn verify_report(r: &Report, p: &Problem) -> Verification {
    let mut v = Verification::default();
    v.check(r.mode == p.mode(), || {
        format!(
            "report mode {} does not match problem mode {}",
            r.mode.as_str(),
            p.mode().as_str()
        )
    });
    v.check(r.exit_code == outcome::exit_code(&r.outcome), || {
        format!("exit code {} does not match outcome {}", r.exit_code, r.outcome)
    });
    let known = [
        outcome::K_MEASURE_FOUND,
        outcome::CLOSURE_MEASURE_ONLY,
        outcome::INFEASIBLE,
        outcome::UNDETERMINED,
        outcome::MEMBER,
        outcome::NOT_IN_CLOSURE,
        outcome::SOLVED,
    ];
    v.check(known.contains(&r.outcome.as_str()), || {
        format!("unknown outcome {}", r.outcome)
    });
    if !v.passed() {
        return v;
    }

    if let Task::Ratopt { f, g } = &p.task {
        check_ratopt(&mut v, p, f, g, r);
        return v;
    }
    let spec = p.spec.as_ref().expect("non-ratopt problems carry a spec");
    match r.outcome.as_str() {
        outcome::K_MEASURE_FOUND | outcome::MEMBER => match &r.measure {
            Some(m) => check_original_measure(&mut v, p, spec, m),
            None => v.check(false, || format!("{} without a measure", r.outcome)),
        },
        outcome::INFEASIBLE | outcome::NOT_IN_CLOSURE => match &r.certificate {
            Some(c) => check_certificate(&mut v, p, spec, c),
            None => v.check(false, || format!("{} without a certificate", r.outcome)),
        },
        outcome::CLOSURE_MEASURE_ONLY => check_closure(&mut v, p, spec, r),
        _ => {
            v.check(r.measure.is_none() && r.certificate.is_none(), || {
                "an undetermined report must not carry a measure or certificate".into()
            });
        }
    }
    if let Task::Tensor { tensor, scp } = &p.task {
        if let Some(d) = &r.decomposition {
            check_decomposition(&mut v, tensor, d, "decomposition", *scp);
        }
        if r.outcome == outcome::K_MEASURE_FOUND {
            v.check(r.decomposition.is_some(), || {
                "KMeasureFound without a tensor decomposition".into()
            });
        }
    }
    v
}
