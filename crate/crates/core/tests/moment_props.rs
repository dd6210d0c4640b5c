use gtmp_core::extract::{extract_atoms, numerical_rank, ExtractOptions};
use gtmp_core::moment::{
    build_localizer, dehomogenize_tms, homogenize_tms, moment_matrix, moments_of_measure, moments_on_support,
};
use gtmp_core::poly::{parse_polynomial, Polynomial, PowerSupport};
use gtmp_core::set::{lift_set, SemialgebraicSet};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Test sets: orthant, unit ball, box `[-1, 1]^n`, and a parabola region.
fn make_set(kind: usize, n: usize) -> SemialgebraicSet {
    match kind {
        0 => SemialgebraicSet::nonnegative_orthant(n),
        1 => {
            let text = (1..=n).map(|i| format!("- x{i}^2")).collect::<String>();
            let g = parse_polynomial(&format!("1 {text}"), n, 1).unwrap();
            SemialgebraicSet::new(n, vec![], vec![g]).unwrap()
        }
        2 => {
            let gs = (1..=n)
                .map(|i| parse_polynomial(&format!("1 - x{i}^2"), n, 1).unwrap())
                .collect();
            SemialgebraicSet::new(n, vec![], gs).unwrap()
        }
        _ => {
            let g = parse_polynomial("x1 - x1^2 + 0.5", n, 1).unwrap();
            SemialgebraicSet::new(n, vec![], vec![g]).unwrap()
        }
    }
}

/// Map a raw point in `[-1, 1]^n` into the set.
fn into_set(kind: usize, raw: &[f64]) -> Vec<f64> {
    match kind {
        0 => raw.iter().map(|v| v.abs() * 2.0).collect(),
        1 => {
            let nrm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 1.0 {
                raw.iter().map(|v| v / nrm).collect()
            } else {
                raw.to_vec()
            }
        }
        2 => raw.to_vec(),
        _ => {
            let mut x = raw.to_vec();
            x[0] = 0.5 + 0.8 * raw[0];
            x
        }
    }
}

fn lift_point(x: &[f64]) -> Vec<f64> {
    let mut u = vec![1.0];
    u.extend_from_slice(x);
    let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter().map(|v| v / nrm).collect()
}

fn measure_strategy(max_vars: usize, max_atoms: usize) -> impl Strategy<Value = (usize, Vec<(f64, Vec<f64>)>)> {
    (1..=max_vars).prop_flat_map(move |n| {
        let atom = (0.01f64..3.0, prop::collection::vec(-1.0f64..1.0, n));
        (Just(n), prop::collection::vec(atom, 1..=max_atoms))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn localizers_of_measures_on_k_are_psd(kind in 0usize..4, (n, raw) in measure_strategy(3, 5), k in 1usize..=3) {
        let set = make_set(kind, n);
        let atoms: Vec<(f64, Vec<f64>)> = raw.iter().map(|(l, x)| (*l, into_set(kind, x))).collect();
        for (_, x) in &atoms {
            prop_assert!(set.violation(x) <= 1e-12);
        }
        let w = moments_of_measure(&atoms, n, k).unwrap();
        for g in &set.inequalities {
            if g.degree() > 2 * k {
                continue;
            }
            let plan = build_localizer(g, k, n).unwrap();
            let m = plan.assemble_f64(&w.values);
            prop_assert!(min_eig(&m) >= -1e-10, "lambda_min {}", min_eig(&m));
        }
        let one = Polynomial::constant(n, 1.0);
        let m = build_localizer(&one, k, n).unwrap().assemble_f64(&w.values);
        prop_assert!(min_eig(&m) >= -1e-10);
    }

    #[test]
    fn lifted_localizers_are_psd_and_equalities_vanish(kind in 0usize..4, (n, raw) in measure_strategy(3, 5), k in 1usize..=3) {
        let lifted = lift_set(&make_set(kind, n));
        let n1 = n + 1;
        let atoms: Vec<(f64, Vec<f64>)> = raw.iter().map(|(l, x)| (*l, lift_point(&into_set(kind, x)))).collect();
        let w = moments_of_measure(&atoms, n1, k).unwrap();
        for g in &lifted.ineq_tuple {
            if g.degree() > 2 * k {
                continue;
            }
            let m = build_localizer(g, k, n1).unwrap().assemble_f64(&w.values);
            prop_assert!(min_eig(&m) >= -1e-10, "lambda_min {}", min_eig(&m));
        }
        for h in &lifted.eq_tuple {
            if h.degree() > 2 * k {
                continue;
            }
            let m = build_localizer(h, k, n1).unwrap().assemble_f64(&w.values);
            prop_assert!(m.amax() <= 1e-12 * (1.0 + w.values[0]));
        }
    }

    #[test]
    fn moment_matrix_rank_bounded_by_atoms((n, raw) in measure_strategy(3, 4), t in 1usize..=3) {
        let w = moments_of_measure(&raw, n, t).unwrap();
        let m = moment_matrix(&w, t);
        let sing: Vec<f64> = m.symmetric_eigenvalues().iter().map(|v| v.abs()).collect();
        prop_assert!(numerical_rank(&sing, 1e-9) <= raw.len());
    }

    #[test]
    fn localizer_symmetric_and_linear(
        (n, raw) in measure_strategy(3, 3),
        (_, raw2) in measure_strategy(3, 3),
        a in -2.0f64..2.0,
        coefs in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let raw2: Vec<(f64, Vec<f64>)> = raw2.into_iter().map(|(l, mut x)| { x.resize(n, 0.3); (l, x) }).collect();
        let k = 2;
        let mut q = Polynomial::constant(n, coefs[0]);
        for i in 0..n.min(3) {
            q = q.add(&Polynomial::var(n, i).scale(&coefs[i + 1]));
        }
        let plan = build_localizer(&q, k, n).unwrap();
        let w1 = moments_of_measure(&raw, n, k).unwrap();
        let w2 = moments_of_measure(&raw2, n, k).unwrap();
        let comb: Vec<f64> = w1.values.iter().zip(&w2.values).map(|(x, y)| x + a * y).collect();
        let m1 = plan.assemble_f64(&w1.values);
        let m2 = plan.assemble_f64(&w2.values);
        let mc = plan.assemble_f64(&comb);
        prop_assert!((&m1 - m1.transpose()).amax() == 0.0);
        let scale = 1.0 + m1.amax() + a.abs() * m2.amax();
        prop_assert!((mc - (&m1 + &m2 * a)).amax() <= 1e-12 * scale);
    }

    #[test]
    fn tms_homogenization_round_trip((n, raw) in measure_strategy(3, 4), d in 1usize..=4) {
        let support = PowerSupport::full(n, d);
        let y = moments_on_support(&raw, &support).unwrap();
        let hy = homogenize_tms(&y);
        prop_assert_eq!(hy.num_vars(), n + 1);
        prop_assert_eq!(hy.deg(), d);
        prop_assert_eq!(dehomogenize_tms(&hy), y);
    }
}

/// Random lifted measures on the unit sphere with well separated atoms.
fn sphere_measure_strategy() -> impl Strategy<Value = (usize, Vec<(f64, Vec<f64>)>)> {
    (1usize..=4, 1usize..=4)
        .prop_flat_map(|(n, r)| {
            let atom = (0.5f64..2.0, prop::collection::vec(-1.0f64..1.0, n + 1));
            (Just(n), prop::collection::vec(atom, r))
        })
        .prop_map(|(n, raw)| {
            let atoms = raw
                .into_iter()
                .map(|(l, u)| {
                    let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
                    (l, u.iter().map(|v| v / nrm).collect::<Vec<f64>>())
                })
                .collect::<Vec<_>>();
            (n, atoms)
        })
        .prop_filter("atoms must be separated", |(_, atoms)| {
            atoms.iter().enumerate().all(|(i, (_, a))| {
                atoms[..i]
                    .iter()
                    .all(|(_, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() >= 0.3)
            })
        })
}

fn smallest_t(n1: usize, r: usize) -> usize {
    let mut t = 1;
    while gtmp_core::poly::count_up_to(n1, t - 1) < r + 1 {
        t += 1;
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extraction_round_trip((n, atoms) in sphere_measure_strategy(), seed in any::<u64>()) {
        let n1 = n + 1;
        let t = smallest_t(n1, atoms.len());
        let w = moments_of_measure(&atoms, n1, t).unwrap();
        let opts = ExtractOptions { seed, ..ExtractOptions::default() };
        let nu = extract_atoms(&w, t, &opts).unwrap();
        prop_assert_eq!(nu.len(), atoms.len());
        for (lam, u) in &atoms {
            let hit = nu.atoms.iter().zip(&nu.weights).find(|(v, _)| {
                v.iter().zip(u).all(|(a, b)| (a - b).abs() <= 1e-6)
            });
            prop_assert!(hit.is_some(), "atom {:?} not recovered from {:?}", u, nu.atoms);
            let (_, wt) = hit.unwrap();
            prop_assert!((wt - lam).abs() <= 1e-6 * lam.max(1.0));
        }
    }
}

/// Sphere measures at the separation and weight floors `1e-3`, extracted at
/// `t = r + 1`.
fn tight_measure_strategy() -> impl Strategy<Value = (usize, Vec<(f64, Vec<f64>)>)> {
    (1usize..=4, 1usize..=4)
        .prop_flat_map(|(n, r)| {
            let atom = (1e-3f64..1.0, prop::collection::vec(-1.0f64..1.0, n + 1));
            (Just(n), prop::collection::vec(atom, r))
        })
        .prop_map(|(n, raw)| {
            let atoms = raw
                .into_iter()
                .map(|(l, u)| {
                    let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
                    (l, u.iter().map(|v| v / nrm).collect::<Vec<f64>>())
                })
                .collect::<Vec<_>>();
            (n, atoms)
        })
        .prop_filter("atoms must be separated", |(_, atoms)| {
            atoms.iter().enumerate().all(|(i, (_, a))| {
                atoms[..i]
                    .iter()
                    .all(|(_, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() >= 1e-3)
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extraction_round_trip_at_weight_floor((n, atoms) in tight_measure_strategy(), seed in any::<u64>()) {
        let n1 = n + 1;
        let t = atoms.len() + 1;
        let w = moments_of_measure(&atoms, n1, t).unwrap();
        let opts = ExtractOptions { seed, ..ExtractOptions::default() };
        let nu = extract_atoms(&w, t, &opts).unwrap();
        prop_assert_eq!(nu.len(), atoms.len());
        for (lam, u) in &atoms {
            let hit = nu.atoms.iter().zip(&nu.weights).find(|(v, _)| {
                v.iter().zip(u).all(|(a, b)| (a - b).abs() <= 1e-6)
            });
            prop_assert!(hit.is_some(), "atom {:?} not recovered from {:?}", u, nu.atoms);
            let (_, wt) = hit.unwrap();
            prop_assert!((wt - lam).abs() <= 1e-6 * lam.max(1.0));
        }
    }
}
