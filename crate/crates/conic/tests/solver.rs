use gtmp_conic::{check_kkt, solve, verify_ray, ConicProgram, LinearRow, MatrixMap, SolverOptions, Status};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn scalar_bound() {
    // min w0 s.t. w0 >= 1, [w0] PSD
    let mut p = ConicProgram::new(1);
    p.objective = vec![1.0];
    p.ineq_rows.push(LinearRow::new(vec![(0, 1.0)], 1.0));
    let mut m = MatrixMap::new(1);
    m.push(0, 0, 0, 1.0);
    p.psd_blocks.push(m);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal[0] - 1.0).abs() < 1e-7, "{:?}", sol.primal);
    assert!((sol.dual.ineq[0] - 1.0).abs() < 1e-6);
}

#[test]
fn two_by_two_sdp() {
    // min w0 s.t. w0 + w1 = 2, [w0 w1; w1 w0] PSD; optimum (1, 1).
    let mut p = ConicProgram::new(2);
    p.objective = vec![1.0, 0.0];
    p.eq_rows.push(LinearRow::new(vec![(0, 1.0), (1, 1.0)], 2.0));
    let mut m = MatrixMap::new(2);
    m.push(0, 0, 0, 1.0);
    m.push(1, 1, 0, 1.0);
    m.push(0, 1, 1, 1.0);
    p.psd_blocks.push(m);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective_value - 1.0).abs() < 1e-7);
    let rep = check_kkt(&p, &sol);
    assert!(rep.max_residual() < 1e-6, "{rep:?}");
}

#[test]
fn negative_mass_is_infeasible() {
    let mut p = ConicProgram::new(1);
    p.eq_rows.push(LinearRow::new(vec![(0, 1.0)], -1.0));
    let mut m = MatrixMap::new(1);
    m.push(0, 0, 0, 1.0);
    p.psd_blocks.push(m);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::PrimalInfeasible);
    let ray = sol.certificate_ray.expect("ray");
    assert!(verify_ray(&p, &ray).is_valid(1e-6));
}

#[test]
fn zero_block_constraint() {
    // min -w1 s.t. [w0 - 1, w1 - w2; w1 - w2, 0] = 0 ... with w2 <= 3 via
    // PSD [[1, w2], [w2, 9]] ⪰ 0 -> |w2| <= 3, so w1 = w2 = 3.
    let mut p = ConicProgram::new(3);
    p.objective = vec![0.0, -1.0, 0.0];
    let mut g = MatrixMap::new(2);
    g.push(0, 0, 0, 1.0);
    g.push_constant(0, 0, -1.0);
    g.push(0, 1, 1, 1.0);
    g.push(0, 1, 2, -1.0);
    p.zero_blocks.push(g);
    let mut f = MatrixMap::new(2);
    f.push_constant(0, 0, 1.0);
    f.push_constant(1, 1, 9.0);
    f.push(0, 1, 2, 1.0);
    p.psd_blocks.push(f);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal[1] - 3.0).abs() < 1e-6, "{:?}", sol.primal);
    assert!((sol.primal[0] - 1.0).abs() < 1e-6);
    let rep = check_kkt(&p, &sol);
    assert!(rep.max_residual() < 1e-6, "{rep:?}");
}

/// Primal: min <C, X> s.t. <A_i, X> = b_i, X PSD, written in the free
/// variable `w = svec(X)`. Data is built from a rank-one optimum so the
/// value is known.
fn planted_sdp(n: usize, m: usize, seed: u64) -> (ConicProgram, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let dim = idx.len();
    let x_vec: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xs = DMatrix::from_fn(n, n, |i, j| x_vec[i] * x_vec[j]);
    // Dual slack S PSD with S x = 0.
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
    let proj = DMatrix::identity(n, n) - {
        let v = nalgebra::DVector::from_vec(x_vec.clone());
        &v * v.transpose() / v.norm_squared()
    };
    let s = &proj * (&q * q.transpose()) * &proj;
    let mut a_mats = Vec::new();
    let mut y = Vec::new();
    for _ in 0..m {
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
        a_mats.push((&r + r.transpose()) * 0.5);
        y.push(rng.random_range(-1.0..1.0));
    }
    let mut c = s.clone();
    for (a, yi) in a_mats.iter().zip(&y) {
        c += a * *yi;
    }
    let coef = |mat: &DMatrix<f64>, i: usize, j: usize| if i == j { mat[(i, j)] } else { 2.0 * mat[(i, j)] };
    let mut p = ConicProgram::new(dim);
    p.objective = idx.iter().map(|&(i, j)| coef(&c, i, j)).collect();
    for a in &a_mats {
        let coeffs = idx.iter().enumerate().map(|(k, &(i, j))| (k, coef(a, i, j))).collect();
        p.eq_rows.push(LinearRow::new(coeffs, a.dot(&xs)));
    }
    let mut f = MatrixMap::new(n);
    for (k, &(i, j)) in idx.iter().enumerate() {
        f.push(i, j, k, 1.0);
    }
    p.psd_blocks.push(f);
    (p, c.dot(&xs))
}

#[test]
fn planted_rank_one_sdps() {
    for seed in 0..10 {
        let n = 3 + (seed as usize % 4);
        let (p, value) = planted_sdp(n, n + 1, seed);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "seed {seed}");
        assert!(
            (sol.objective_value - value).abs() < 1e-7 * (1.0 + value.abs()),
            "seed {seed}: {} vs {value}",
            sol.objective_value
        );
        let rep = check_kkt(&p, &sol);
        assert!(
            rep.dual_objective <= rep.primal_objective + 1e-7,
            "weak duality {rep:?}"
        );
    }
}

#[test]
fn deterministic() {
    let (p, _) = planted_sdp(4, 5, 42);
    let a = solve(&p, &opts()).unwrap();
    let b = solve(&p, &opts()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn inconsistent_equalities() {
    let mut p = ConicProgram::new(2);
    p.eq_rows.push(LinearRow::new(vec![(0, 1.0), (1, 1.0)], 1.0));
    p.eq_rows.push(LinearRow::new(vec![(0, 1.0), (1, 1.0)], 2.0));
    let mut m = MatrixMap::new(2);
    m.push(0, 0, 0, 1.0);
    m.push(1, 1, 1, 1.0);
    p.psd_blocks.push(m);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::PrimalInfeasible);
    assert!(verify_ray(&p, sol.certificate_ray.as_ref().unwrap()).is_valid(1e-6));
}

#[test]
fn psd_infeasible_without_linear_conflict() {
    // [[w0, 1], [1, w0]] PSD and w0 <= 1/2 (as -w0 >= -1/2): impossible.
    let mut p = ConicProgram::new(1);
    p.ineq_rows.push(LinearRow::new(vec![(0, -1.0)], -0.5));
    let mut m = MatrixMap::new(2);
    m.push(0, 0, 0, 1.0);
    m.push(1, 1, 0, 1.0);
    m.push_constant(0, 1, 1.0);
    p.psd_blocks.push(m);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::PrimalInfeasible);
    let chk = verify_ray(&p, sol.certificate_ray.as_ref().unwrap());
    assert!(chk.is_valid(1e-6), "{chk:?}");
}

#[test]
fn unbounded_is_dual_infeasible() {
    let mut p = ConicProgram::new(1);
    p.objective = vec![-1.0];
    let mut m = MatrixMap::new(1);
    m.push(0, 0, 0, 1.0);
    p.psd_blocks.push(m);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::DualInfeasible);
}
