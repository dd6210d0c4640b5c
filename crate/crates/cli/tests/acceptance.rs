//! Acceptance suite. Every criterion prints one PASS/FAIL line; the test
//! fails at the end if any criterion failed. Run with `--nocapture` to see
//! the lines.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gtmp_cli::cli::{load_problem, load_report};
use gtmp_cli::{run_problem, verify_report, Problem, Report};
use gtmp_conic::{check_kkt, solve, ConicProgram, LinearRow, MatrixMap, SolverOptions, Status};
use gtmp_core::engine::{certify_nonexistence, GtmpOptions};
use gtmp_core::extract::{extract_atoms, ExtractOptions};
use gtmp_core::moment::{build_localizer, moments_of_measure};
use gtmp_core::poly::{count_up_to, parse_polynomial, Polynomial};
use gtmp_core::relax::{build_relaxation, random_interior_objective};
use gtmp_core::set::{lift_set, SemialgebraicSet};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ATOM_TOL: f64 = 1e-4;
const WEIGHT_TOL: f64 = 1e-4;
const CERT_TOL: f64 = 1e-6;
const PAIRING_MAX: f64 = -1e-8;
const ROUND_TRIP_TOL: f64 = 1e-6;
const LOCALIZER_TOL: f64 = 1e-10;
const KKT_TOL: f64 = 1e-7;

const ROUND_TRIPS: usize = 200;
const LOCALIZER_CASES: usize = 200;
const HOMOGENIZE_CASES: usize = 500;
const KKT_INSTANCES: usize = 50;

fn problem_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/problems")
        .join(format!("{name}.json"))
}

struct Run {
    problem: Problem,
    report: Report,
    elapsed: Duration,
}

fn run(name: &str) -> Run {
    let problem = load_problem(&problem_path(name)).expect("problem file");
    let start = Instant::now();
    let report = run_problem(&problem, &GtmpOptions::default());
    Run {
        problem,
        report,
        elapsed: start.elapsed(),
    }
}

type Check = fn() -> Criterion;

/// Collects the failed checks of one criterion.
#[derive(Default)]
struct Criterion {
    failures: Vec<String>,
}

impl Criterion {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || {
            format!("{label}: {got} vs {want} (tol {tol:e})")
        });
    }

    fn budget(&mut self, label: &str, elapsed: Duration, secs: f64) {
        let t = elapsed.as_secs_f64();
        self.check(t < secs, || format!("{label}: {t:.2} s exceeds {secs} s"));
    }

    fn outcome(&mut self, r: &Run, tag: &str, order: Option<usize>) {
        let name = r.report.name.clone().unwrap_or_default();
        self.check(r.report.outcome == tag, || {
            format!(
                "{name}: outcome {} ({:?}), expected {tag}",
                r.report.outcome, r.report.reason
            )
        });
        if order.is_some() {
            self.check(r.report.order == order, || {
                format!("{name}: order {:?}, expected {order:?}", r.report.order)
            });
        }
        let v = verify_report(&r.report, &r.problem);
        self.check(v.passed(), || format!("{name}: report fails verification: {v}"));
    }
}

/// Greedy matching of `got` onto `want` with sup-norm tolerance.
fn same_up_to_permutation(got: &[Vec<f64>], want: &[Vec<f64>], tol: f64) -> bool {
    if got.len() != want.len() {
        return false;
    }
    let mut used = vec![false; got.len()];
    want.iter().all(|w| {
        let hit = got
            .iter()
            .enumerate()
            .find(|(i, g)| !used[*i] && g.len() == w.len() && g.iter().zip(w).all(|(a, b)| (a - b).abs() <= tol));
        match hit {
            Some((i, _)) => {
                used[i] = true;
                true
            }
            None => false,
        }
    })
}

fn criterion_1() -> Criterion {
    let mut c = Criterion::default();
    let r = run("ex531");
    c.outcome(&r, "KMeasureFound", Some(2));
    c.budget("ex531", r.elapsed, 60.0);
    if let Some(mu) = &r.report.measure {
        c.check(mu.weights.len() == 1, || {
            format!("{} atoms, expected 1", mu.weights.len())
        });
        c.within("weight", mu.weights[0], 6.0, WEIGHT_TOL);
        // The data are even moments only, so each coordinate is fixed up to sign.
        for (i, u) in mu.atoms[0].iter().enumerate() {
            c.within(&format!("|u_{}|", i + 1), u.abs(), 1.0 / 6f64.sqrt(), ATOM_TOL);
        }
    } else {
        c.check(false, || "no measure in the report".into());
    }
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::default();
    let r = run("ex531b");
    c.outcome(&r, "Infeasible", Some(2));
    c.budget("ex531b", r.elapsed, 45.0);
    match &r.report.certificate {
        Some(cert) => {
            let ch = &cert.check;
            c.check(ch.decomposition_residual <= CERT_TOL, || {
                format!("decomposition residual {}", ch.decomposition_residual)
            });
            c.check(ch.row_residual <= CERT_TOL, || {
                format!("row residual {}", ch.row_residual)
            });
            c.check(ch.psd_violation <= CERT_TOL, || {
                format!("psd violation {}", ch.psd_violation)
            });
            c.check(ch.sign_violation <= CERT_TOL, || {
                format!("sign violation {}", ch.sign_violation)
            });
            c.check(ch.pairing < PAIRING_MAX, || format!("pairing {}", ch.pairing));
        }
        None => c.check(false, || "no certificate".into()),
    }
    c
}

fn criterion_3() -> Criterion {
    let mut c = Criterion::default();
    for n in 1..=5 {
        let name = format!("ex513_n{n}");
        let r = run(&name);
        c.outcome(&r, "KMeasureFound", None);
        c.budget(&name, r.elapsed, 10.0);
        let Some(dec) = &r.report.decomposition else {
            c.check(false, || format!("{name}: no decomposition"));
            continue;
        };
        for w in &dec.weights {
            c.within(&format!("{name} weight"), *w, 1.0, WEIGHT_TOL);
        }
        // (1, 1, ..., 1, 0, ..., 0) with j ones after the leading 1, j < n.
        let want: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut v = vec![1.0];
                v.extend((0..n).map(|i| if i < j { 1.0 } else { 0.0 }));
                v
            })
            .collect();
        c.check(same_up_to_permutation(&dec.vectors, &want, ATOM_TOL), || {
            format!("{name}: vectors {:?} differ from the staircase", dec.vectors)
        });
    }
    c
}

fn criterion_4() -> Criterion {
    let mut c = Criterion::default();
    let rho = 2.0 * 2f64.sqrt();

    let r = run("ex52_t1");
    c.outcome(&r, "KMeasureFound", None);
    c.budget("B(1)", r.elapsed, 15.0);
    match (&r.report.lifted_decomposition, &r.report.decomposition) {
        (Some(lifted), Some(dec)) => {
            c.check(lifted.weights.len() == 5, || {
                format!("B(1): {} atoms", lifted.weights.len())
            });
            for v in &lifted.vectors {
                c.check(v[0] > 0.0, || format!("B(1): atom {v:?} has tau <= 0"));
            }
            for w in &lifted.weights {
                c.within("B(1) rho", *w, rho, WEIGHT_TOL);
            }
            for w in &dec.weights {
                c.within("B(1) weight", *w, 1.0, WEIGHT_TOL);
            }
        }
        _ => c.check(false, || "B(1): no decomposition".into()),
    }

    let r = run("ex52_t0");
    c.outcome(&r, "ClosureMeasureOnly", None);
    c.budget("B(0)", r.elapsed, 15.0);
    match &r.report.lifted_measure {
        Some(nu) => {
            c.check(r.report.zero_tau_atoms.len() == 1, || {
                format!("B(0): zero-tau atoms {:?}", r.report.zero_tau_atoms)
            });
            let want = vec![vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]];
            let zero: Vec<Vec<f64>> = r.report.zero_tau_atoms.iter().map(|&i| nu.atoms[i].clone()).collect();
            c.check(same_up_to_permutation(&zero, &want, ATOM_TOL), || {
                format!("B(0): zero-tau atoms {zero:?}")
            });
        }
        None => c.check(false, || "B(0): no lifted measure".into()),
    }

    let r = run("ex52_tm1");
    c.outcome(&r, "Infeasible", Some(2));
    c.budget("B(-1)", r.elapsed, 15.0);
    c
}

fn criterion_5() -> Criterion {
    let mut c = Criterion::default();
    let r = run("ex512");
    c.outcome(&r, "Infeasible", Some(3));
    c.budget("ex512", r.elapsed, 480.0);
    c
}

fn criterion_6() -> Criterion {
    let mut c = Criterion::default();
    let r = run("ex54");
    c.outcome(&r, "Solved", Some(2));
    c.budget("ex54", r.elapsed, 10.0);
    match &r.report.ratopt {
        Some(res) => {
            c.within("value", res.value, 1.0, 1e-4);
            c.check(res.flat, || "no flat truncation".into());
        }
        None => c.check(false, || "no ratopt block".into()),
    }
    c
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::default();
    let r = run("ex514_t0");
    c.outcome(&r, "KMeasureFound", Some(4));
    c.budget("t=0", r.elapsed, 15.0);
    match &r.report.decomposition {
        Some(dec) => {
            for w in &dec.weights {
                c.within("t=0 weight", *w, 0.5, WEIGHT_TOL);
            }
            let want = vec![vec![1.0, 1.0, -1.0], vec![1.0, 1.0, 1.0]];
            c.check(same_up_to_permutation(&dec.vectors, &want, ATOM_TOL), || {
                format!("t=0: vectors {:?}", dec.vectors)
            });
        }
        None => c.check(false, || "t=0: no decomposition".into()),
    }

    let r = run("ex514_t1");
    c.outcome(&r, "ClosureMeasureOnly", None);
    c.budget("t=1", r.elapsed, 15.0);
    match &r.report.lifted_measure {
        Some(nu) => {
            let hit = r.report.zero_tau_atoms.iter().any(|&i| {
                let a = &nu.atoms[i];
                a[0].abs() <= ATOM_TOL && a[1].abs() <= ATOM_TOL && (a[2].abs() - 1.0).abs() <= ATOM_TOL
            });
            c.check(hit, || {
                format!("t=1: no zero-tau atom at (0, 0, +-1) in {:?}", nu.atoms)
            });
        }
        None => c.check(false, || "t=1: no lifted measure".into()),
    }
    c
}

fn unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-3 {
            return v.iter().map(|x| x / nrm).collect();
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn criterion_8a() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x8a);
    let mut done = 0;
    while done < ROUND_TRIPS {
        let n = rng.random_range(1..=4usize);
        let r = rng.random_range(1..=4usize);
        let atoms: Vec<(f64, Vec<f64>)> = (0..r)
            .map(|_| (rng.random_range(0.5..2.0), unit(&mut rng, n + 1)))
            .collect();
        let separated = atoms
            .iter()
            .enumerate()
            .all(|(i, (_, a))| atoms[..i].iter().all(|(_, b)| dist(a, b) >= 0.3));
        if !separated {
            continue;
        }
        done += 1;
        let n1 = n + 1;
        let mut t = 1;
        while count_up_to(n1, t - 1) < r + 1 {
            t += 1;
        }
        let w = moments_of_measure(&atoms, n1, t).unwrap();
        let opts = ExtractOptions {
            seed: rng.random(),
            ..ExtractOptions::default()
        };
        let nu = match extract_atoms(&w, t, &opts) {
            Ok(nu) => nu,
            Err(e) => {
                c.check(false, || format!("case {done}: extraction failed: {e}"));
                continue;
            }
        };
        let want: Vec<Vec<f64>> = atoms.iter().map(|(l, u)| [vec![*l], u.clone()].concat()).collect();
        let got: Vec<Vec<f64>> = nu
            .weights
            .iter()
            .zip(&nu.atoms)
            .map(|(l, u)| [vec![*l], u.clone()].concat())
            .collect();
        c.check(same_up_to_permutation(&got, &want, ROUND_TRIP_TOL), || {
            format!("case {done}: {want:?} came back as {got:?}")
        });
    }
    c
}

fn test_set(kind: usize, n: usize) -> SemialgebraicSet {
    let p = |s: String| parse_polynomial(&s, n, 1).unwrap();
    match kind {
        0 => SemialgebraicSet::nonnegative_orthant(n),
        1 => {
            let ball = (1..=n).map(|i| format!(" - x{i}^2")).collect::<String>();
            SemialgebraicSet::new(n, vec![], vec![p(format!("1{ball}"))]).unwrap()
        }
        2 => SemialgebraicSet::new(n, vec![], vec![p("x1^3 - x1".into())]).unwrap(),
        _ => {
            let sphere = (1..=n).map(|i| format!(" + x{i}^2")).collect::<String>();
            SemialgebraicSet::new(n, vec![p(format!("-1{sphere}"))], vec![]).unwrap()
        }
    }
}

fn point_in(kind: usize, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match kind {
        0 => (0..n).map(|_| rng.random_range(0.0..2.0)).collect(),
        1 => {
            let r: f64 = rng.random_range(0.0..1.0);
            unit(rng, n).iter().map(|x| x * r).collect()
        }
        2 => {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            x[0] = if rng.random_bool(0.5) {
                rng.random_range(-1.0..0.0)
            } else {
                rng.random_range(1.0..2.0)
            };
            x
        }
        _ => unit(rng, n),
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn criterion_8b() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x8b);
    for case in 0..LOCALIZER_CASES {
        let kind = case % 4;
        let n = rng.random_range(1..=3usize);
        let k = rng.random_range(1..=3usize);
        let set = test_set(kind, n);
        let atoms: Vec<(f64, Vec<f64>)> = (0..rng.random_range(1..=5))
            .map(|_| (rng.random_range(0.01..3.0), point_in(kind, &mut rng, n)))
            .collect();
        for (_, x) in &atoms {
            c.check(set.violation(x) <= 1e-12, || {
                format!("case {case}: sample {x:?} outside the set")
            });
        }
        let w = moments_of_measure(&atoms, n, k).unwrap();
        let one = Polynomial::constant(n, 1.0);
        for g in std::iter::once(&one).chain(&set.inequalities) {
            if g.degree() > 2 * k {
                continue;
            }
            let m = build_localizer(g, k, n).unwrap().assemble_f64(&w.values);
            let e = min_eig(&m);
            c.check(e >= -LOCALIZER_TOL, || {
                format!("case {case}: localizer of {g} has eigenvalue {e:e}")
            });
        }

        let lifted = lift_set(&set);
        let n1 = n + 1;
        let lifted_atoms: Vec<(f64, Vec<f64>)> = atoms
            .iter()
            .map(|(l, x)| {
                let u = [vec![1.0], x.clone()].concat();
                let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                (*l, u.iter().map(|v| v / nrm).collect())
            })
            .collect();
        let w = moments_of_measure(&lifted_atoms, n1, k).unwrap();
        for g in &lifted.ineq_tuple {
            if g.degree() > 2 * k {
                continue;
            }
            let m = build_localizer(g, k, n1).unwrap().assemble_f64(&w.values);
            let e = min_eig(&m);
            c.check(e >= -LOCALIZER_TOL, || {
                format!("case {case}: lifted localizer of {g} has eigenvalue {e:e}")
            });
        }
    }
    c
}

fn criterion_8c() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x8c);
    let rat = |v: i64| BigRational::from_integer(BigInt::from(v));
    for case in 0..HOMOGENIZE_CASES {
        let n = rng.random_range(1..=4usize);
        let max_deg = rng.random_range(0..=4u32);
        let terms: Vec<(Vec<u32>, BigRational)> = (0..rng.random_range(1..8))
            .filter_map(|_| {
                let e: Vec<u32> = (0..n).map(|_| rng.random_range(0..=max_deg)).collect();
                let coef = BigRational::new(
                    BigInt::from(rng.random_range(-9i64..=9)),
                    BigInt::from(rng.random_range(1i64..=5)),
                );
                (e.iter().sum::<u32>() <= max_deg).then_some((e, coef))
            })
            .collect();
        let p = Polynomial::from_terms(n, terms).unwrap();
        let d = p.degree() + rng.random_range(0..3usize);
        let ph = p.homogenize(d).unwrap();
        c.check(ph.is_homogeneous(), || format!("case {case}: {ph} is not homogeneous"));
        let x: Vec<BigRational> = (0..n).map(|_| rat(rng.random_range(-4i64..=4))).collect();
        let lifted = [vec![rat(1)], x.clone()].concat();
        c.check(ph.evaluate(&lifted).unwrap() == p.evaluate(&x).unwrap(), || {
            format!("case {case}: {ph} at (1, x) differs from {p} at x")
        });
        // Scaling (s, s x) multiplies by s^d.
        let s = rat(rng.random_range(2i64..=3));
        let scaled: Vec<BigRational> = lifted.iter().map(|v| v * &s).collect();
        let sd = (0..d).fold(rat(1), |acc, _| acc * &s);
        c.check(ph.evaluate(&scaled).unwrap() == p.evaluate(&x).unwrap() * sd, || {
            format!("case {case}: {ph} is not homogeneous of degree {d} pointwise")
        });
        c.check(ph.dehomogenize() == p, || {
            format!("case {case}: dehomogenize({ph}) != {p}")
        });
    }
    c
}

/// min <C, X> s.t. <A_i, X> = b_i, X PSD in `w = svec(X)`, plus one slack
/// inequality, built around a planted primal/dual pair with complementary
/// ranges.
fn planted_program(rng: &mut ChaCha8Rng) -> ConicProgram {
    let n = rng.random_range(2..=6usize);
    let m = rng.random_range(1..=n + 2);
    let rank = rng.random_range(1..n);
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
    let q = g.qr().q();
    let range = q.columns(0, rank).into_owned();
    let kernel = q.columns(rank, n - rank).into_owned();
    let dx = DVector::from_fn(rank, |_, _| rng.random_range(0.5..2.0f64));
    let ds = DVector::from_fn(n - rank, |_, _| rng.random_range(0.5..2.0f64));
    let xs = &range * DMatrix::from_diagonal(&dx) * range.transpose();
    let s = &kernel * DMatrix::from_diagonal(&ds) * kernel.transpose();
    let mut c_mat = s;
    let coef = |mat: &DMatrix<f64>, i: usize, j: usize| if i == j { mat[(i, j)] } else { 2.0 * mat[(i, j)] };
    let mut p = ConicProgram::new(idx.len());
    for _ in 0..m {
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
        let a = (&r + r.transpose()) * 0.5;
        let y: f64 = rng.random_range(-1.0..1.0);
        c_mat += &a * y;
        let coeffs = idx.iter().enumerate().map(|(k, &(i, j))| (k, coef(&a, i, j))).collect();
        p.eq_rows.push(LinearRow::new(coeffs, a.dot(&xs)));
    }
    // trace(X) >= trace(X*) - 1 is slack at the optimum, so its multiplier is 0.
    let trace_row = idx
        .iter()
        .enumerate()
        .filter(|(_, (i, j))| i == j)
        .map(|(k, _)| (k, 1.0))
        .collect();
    p.ineq_rows.push(LinearRow::new(trace_row, xs.trace() - 1.0));
    p.objective = idx.iter().map(|&(i, j)| coef(&c_mat, i, j)).collect();
    let mut f = MatrixMap::new(n);
    for (k, &(i, j)) in idx.iter().enumerate() {
        f.push(i, j, k, 1.0);
    }
    p.psd_blocks.push(f);
    p
}

fn criterion_8d() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x8d);
    for case in 0..KKT_INSTANCES {
        let p = planted_program(&mut rng);
        match solve(&p, &SolverOptions::default()) {
            Ok(sol) if sol.status == Status::Optimal => {
                let rep = check_kkt(&p, &sol);
                c.check(rep.max_residual() <= KKT_TOL, || format!("case {case}: {rep:?}"));
            }
            Ok(sol) => c.check(false, || format!("case {case}: status {}", sol.status.as_str())),
            Err(e) => c.check(false, || format!("case {case}: {e}")),
        }
    }
    c
}

fn criterion_8e() -> Criterion {
    let mut c = Criterion::default();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let path = e.ok()?.path();
            (path.extension()? == "json").then(|| path.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    c.check(!names.is_empty(), || "no golden reports".into());
    for name in names {
        let problem = load_problem(&problem_path(&name)).expect("problem for golden report");
        let report = load_report(&dir.join(format!("{name}.json"))).expect("golden report");
        let v = verify_report(&report, &problem);
        c.check(v.passed(), || format!("{name}: {v}"));
    }
    c
}

fn criterion_9() -> Criterion {
    let mut c = Criterion::default();
    for name in ["ex531b", "ex52_tm1", "ex512"] {
        let r = run(name);
        let (Some(k), Some(last)) = (r.report.order, r.report.trace.last()) else {
            c.check(false, || format!("{name}: no order"));
            continue;
        };
        c.check(r.report.outcome == "Infeasible", || {
            format!("{name}: {}", r.report.outcome)
        });
        let spec = r.problem.spec.as_ref().unwrap();
        let d1 = spec.default_d1();
        let f = random_interior_objective(d1, spec.num_vars() + 1, last.seed).unwrap();
        let inst = build_relaxation(spec, k + 1, &f).unwrap();
        let sol = solve(&inst.program, &SolverOptions::default()).unwrap();
        c.check(sol.status == Status::PrimalInfeasible, || {
            format!("{name}: order {} gives {}", k + 1, sol.status.as_str())
        });
        if sol.status == Status::PrimalInfeasible {
            match certify_nonexistence(&sol, &inst) {
                Ok(cert) => {
                    let rows = gtmp_cli::run::lifted_rows(spec);
                    let ch = cert.verify(&rows, &spec.b_vals, spec.m1);
                    c.check(ch.passes(CERT_TOL) && ch.pairing < PAIRING_MAX, || {
                        format!("{name}: order {} certificate {ch:?}", k + 1)
                    });
                }
                Err(e) => c.check(false, || format!("{name}: order {}: {e}", k + 1)),
            }
        }
    }
    c
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check); 14] = [
        ("1  sphere exterior t=6: one atom of weight 6", criterion_1),
        ("2  sphere exterior t=7: certified infeasible at k=2", criterion_2),
        ("3  staircase tensors n=1..5", criterion_3),
        ("4  B(1) / B(0) / B(-1)", criterion_4),
        ("5  infeasible at k=3", criterion_5),
        ("6  rational minimum 1 at k=2", criterion_6),
        ("7  two-atom sextic and its zero-tau variant", criterion_7),
        ("8a extraction round trips", criterion_8a),
        ("8b localizers of measures are PSD", criterion_8b),
        ("8c homogenize / evaluate identities", criterion_8c),
        ("8d KKT residuals on planted programs", criterion_8d),
        ("8e golden reports verify", criterion_8e),
        ("9  infeasibility persists at order k+1", criterion_9),
        ("   golden reports reproduce", golden_reproduce),
    ];
    let mut failed = Vec::new();
    for (label, f) in criteria {
        let start = Instant::now();
        let c = f();
        let secs = start.elapsed().as_secs_f64();
        if c.failures.is_empty() {
            println!("PASS  {label}  ({secs:.2} s)");
        } else {
            println!("FAIL  {label}  ({secs:.2} s)");
            for m in &c.failures {
                println!("      {m}");
            }
            failed.push(label);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

/// Re-running every golden problem reproduces its report byte for byte.
fn golden_reproduce() -> Criterion {
    let mut c = Criterion::default();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let want = std::fs::read_to_string(&path).unwrap();
        let got = run(&name).report.to_json();
        c.check(got == want, || format!("{name}: report differs from the golden file"));
    }
    c
}
