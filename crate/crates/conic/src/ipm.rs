//! Homogeneous self-dual embedding with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector.
//!
//! Internally the program is put in the form
//!
//! ```text
//! minimize <c, x>   subject to   A x + s = b,   s in K,
//! K = {0}^m0 x R+^m1 x S+^{n_1} x ... x S+^{n_p}
//! ```
//!
//! and the embedding
//!
//! ```text
//!  A'z + c tau           = 0
//!  A x + s - b tau       = 0
//!  c'x + b'z + kappa     = 0,    (s, z) in K x K*,  tau, kappa >= 0
//! ```
//!
//! is followed along the central path. `tau > 0` at the limit gives an
//! optimal pair, `kappa > 0` an infeasibility ray.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Dyn};

use crate::kkt::verify_ray;
use crate::ldl::Ldl;
use crate::options::SolverOptions;
use crate::program::ConicProgram;
use crate::solution::{ConicSolution, DualVariables, FarkasRay, Residuals, Status};

type Row = Vec<(usize, f64)>;

struct PsdData {
    size: usize,
    /// Linear part grouped by variable.
    by_var: Vec<(usize, Vec<(usize, usize, f64)>)>,
    /// Linear part grouped by upper-triangular cell.
    cells: Vec<(usize, usize, Vec<(usize, f64)>)>,
    f0: DMatrix<f64>,
}

impl PsdData {
    fn new(map: &crate::program::MatrixMap) -> Self {
        let mut by_var: HashMap<usize, HashMap<(usize, usize), f64>> = HashMap::new();
        for e in &map.entries {
            *by_var.entry(e.var).or_default().entry((e.row, e.col)).or_insert(0.0) += e.coef;
        }
        let mut vars: Vec<(usize, Vec<(usize, usize, f64)>)> = by_var
            .into_iter()
            .map(|(v, cells)| {
                let mut list: Vec<(usize, usize, f64)> = cells
                    .into_iter()
                    .filter(|&(_, c)| c != 0.0)
                    .map(|((r, c), a)| (r, c, a))
                    .collect();
                list.sort_by_key(|a| (a.0, a.1));
                (v, list)
            })
            .filter(|(_, l)| !l.is_empty())
            .collect();
        vars.sort_by_key(|v| v.0);
        let mut cell_map: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for (v, list) in &vars {
            for &(r, c, a) in list {
                cell_map.entry((r, c)).or_default().push((*v, a));
            }
        }
        let mut cells: Vec<(usize, usize, Vec<(usize, f64)>)> =
            cell_map.into_iter().map(|((r, c), l)| (r, c, l)).collect();
        cells.sort_by_key(|a| (a.0, a.1));
        PsdData {
            size: map.size,
            by_var: vars,
            cells,
            f0: map.constant_matrix(),
        }
    }

    fn apply(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for (r, c, list) in &self.cells {
            let v: f64 = list.iter().map(|&(j, a)| a * x[j]).sum();
            m[(*r, *c)] = v;
            m[(*c, *r)] = v;
        }
        m
    }

    fn adjoint(&self, z: &DMatrix<f64>, scale: f64, out: &mut [f64]) {
        for (r, c, list) in &self.cells {
            let zz = if r == c { z[(*r, *c)] } else { z[(*r, *c)] + z[(*c, *r)] };
            for &(j, a) in list {
                out[j] += scale * a * zz;
            }
        }
    }
}

/// Vector in the cone space, split by cone.
#[derive(Clone, Debug)]
struct Cv {
    eq: Vec<f64>,
    nn: Vec<f64>,
    psd: Vec<DMatrix<f64>>,
}

impl Cv {
    fn dot(&self, o: &Cv) -> f64 {
        let mut s: f64 = self.eq.iter().zip(&o.eq).map(|(a, b)| a * b).sum();
        s += self.nn.iter().zip(&o.nn).map(|(a, b)| a * b).sum::<f64>();
        for (a, b) in self.psd.iter().zip(&o.psd) {
            s += a.dot(b);
        }
        s
    }

    fn axpy(&mut self, alpha: f64, o: &Cv) {
        for (a, b) in self.eq.iter_mut().zip(&o.eq) {
            *a += alpha * b;
        }
        for (a, b) in self.nn.iter_mut().zip(&o.nn) {
            *a += alpha * b;
        }
        for (a, b) in self.psd.iter_mut().zip(&o.psd) {
            *a += b * alpha;
        }
    }

    fn scaled(&self, alpha: f64) -> Cv {
        Cv {
            eq: self.eq.iter().map(|v| v * alpha).collect(),
            nn: self.nn.iter().map(|v| v * alpha).collect(),
            psd: self.psd.iter().map(|m| m * alpha).collect(),
        }
    }

    fn norm_inf(&self) -> f64 {
        let mut m = 0.0f64;
        for v in self.eq.iter().chain(&self.nn) {
            m = m.max(v.abs());
        }
        for p in &self.psd {
            m = m.max(p.amax());
        }
        m
    }
}

struct Model {
    n: usize,
    c: Vec<f64>,
    eq: Vec<Row>,
    beq: Vec<f64>,
    nn: Vec<Row>,
    bnn: Vec<f64>,
    psd: Vec<PsdData>,
    n_user_eq: usize,
    /// For each lowered zero-block row: (block, row, col) representative.
    zero_rows: Vec<(usize, usize, usize)>,
    zero_sizes: Vec<usize>,
}

impl Model {
    fn new(prog: &ConicProgram) -> Model {
        let mut eq: Vec<Row> = Vec::new();
        let mut beq = Vec::new();
        for r in &prog.eq_rows {
            eq.push(merge_row(&r.coeffs));
            beq.push(r.rhs);
        }
        let n_user_eq = eq.len();
        let mut zero_rows = Vec::new();
        for (b, map) in prog.zero_blocks.iter().enumerate() {
            let mut cells: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
            for e in &map.entries {
                cells.entry((e.row, e.col)).or_default().push((e.var, e.coef));
            }
            let mut consts: HashMap<(usize, usize), f64> = HashMap::new();
            for &(r, c, v) in &map.constant {
                *consts.entry((r, c)).or_insert(0.0) += v;
                cells.entry((r, c)).or_default();
            }
            let mut keys: Vec<(usize, usize)> = cells.keys().cloned().collect();
            keys.sort();
            let mut seen: HashMap<(Vec<(usize, u64)>, u64), ()> = HashMap::new();
            for key in keys {
                let row = merge_row(&cells[&key]);
                let rhs = -consts.get(&key).cloned().unwrap_or(0.0);
                if row.is_empty() && rhs == 0.0 {
                    continue;
                }
                let sig = (
                    row.iter().map(|&(j, a)| (j, a.to_bits())).collect::<Vec<_>>(),
                    rhs.to_bits(),
                );
                if seen.insert(sig, ()).is_some() {
                    continue;
                }
                eq.push(row);
                beq.push(rhs);
                zero_rows.push((b, key.0, key.1));
            }
        }
        let nn = prog.ineq_rows.iter().map(|r| merge_row(&r.coeffs)).collect();
        let bnn = prog.ineq_rows.iter().map(|r| r.rhs).collect();
        Model {
            n: prog.dim,
            c: prog.objective.clone(),
            eq,
            beq,
            nn,
            bnn,
            psd: prog.psd_blocks.iter().map(PsdData::new).collect(),
            n_user_eq,
            zero_rows,
            zero_sizes: prog.zero_blocks.iter().map(|m| m.size).collect(),
        }
    }

    fn degree(&self) -> f64 {
        (self.nn.len() + self.psd.iter().map(|p| p.size).sum::<usize>()) as f64
    }

    fn identity(&self) -> Cv {
        Cv {
            eq: vec![0.0; self.eq.len()],
            nn: vec![1.0; self.nn.len()],
            psd: self.psd.iter().map(|p| DMatrix::identity(p.size, p.size)).collect(),
        }
    }

    fn b(&self) -> Cv {
        Cv {
            eq: self.beq.clone(),
            nn: self.bnn.iter().map(|v| -v).collect(),
            psd: self.psd.iter().map(|p| p.f0.clone()).collect(),
        }
    }

    fn apply_a(&self, x: &[f64]) -> Cv {
        Cv {
            eq: self.eq.iter().map(|r| row_dot(r, x)).collect(),
            nn: self.nn.iter().map(|r| -row_dot(r, x)).collect(),
            psd: self.psd.iter().map(|p| -p.apply(x)).collect(),
        }
    }

    fn apply_at(&self, z: &Cv) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &v) in self.eq.iter().zip(&z.eq) {
            for &(j, a) in r {
                out[j] += a * v;
            }
        }
        for (r, &v) in self.nn.iter().zip(&z.nn) {
            for &(j, a) in r {
                out[j] -= a * v;
            }
        }
        for (p, m) in self.psd.iter().zip(&z.psd) {
            p.adjoint(m, -1.0, &mut out);
        }
        out
    }
}

fn merge_row(coeffs: &[(usize, f64)]) -> Row {
    let mut m: Vec<(usize, f64)> = coeffs.to_vec();
    m.sort_by_key(|e| e.0);
    let mut out: Row = Vec::with_capacity(m.len());
    for (j, a) in m {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

fn row_dot(r: &Row, x: &[f64]) -> f64 {
    r.iter().map(|&(j, a)| a * x[j]).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Square-root factor `L` with `m = L L'`.
fn sqrt_factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return Some(ch.l());
    }
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let d = eig.eigenvalues.map(|v| v.sqrt());
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&d))
}

struct PsdScaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
    g: DMatrix<f64>,
}

struct Scaling {
    nn_w: Vec<f64>,
    nn_lambda: Vec<f64>,
    psd: Vec<PsdScaling>,
}

impl Scaling {
    fn identity(model: &Model) -> Scaling {
        Scaling {
            nn_w: vec![1.0; model.nn.len()],
            nn_lambda: vec![1.0; model.nn.len()],
            psd: model
                .psd
                .iter()
                .map(|p| PsdScaling {
                    r: DMatrix::identity(p.size, p.size),
                    rinv: DMatrix::identity(p.size, p.size),
                    lambda: DVector::from_element(p.size, 1.0),
                    g: DMatrix::identity(p.size, p.size),
                })
                .collect(),
        }
    }

    fn new(s: &Cv, z: &Cv) -> Option<Scaling> {
        let nn_w = s.nn.iter().zip(&z.nn).map(|(a, b)| (a / b).sqrt()).collect();
        let nn_lambda = s.nn.iter().zip(&z.nn).map(|(a, b)| (a * b).sqrt()).collect();
        let mut psd = Vec::with_capacity(s.psd.len());
        for (sm, zm) in s.psd.iter().zip(&z.psd) {
            let ls = sqrt_factor(sm)?;
            let lz = sqrt_factor(zm)?;
            let m = lz.transpose() * &ls;
            let svd = m.svd(true, true);
            let u = svd.u?;
            let vt = svd.v_t?;
            let lambda = svd.singular_values;
            if lambda.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return None;
            }
            let isq = lambda.map(|v| 1.0 / v.sqrt());
            let r = ls * vt.transpose() * DMatrix::from_diagonal(&isq);
            let rinv = DMatrix::from_diagonal(&isq) * u.transpose() * lz.transpose();
            let g = rinv.transpose() * &rinv;
            psd.push(PsdScaling { r, rinv, lambda, g });
        }
        Some(Scaling { nn_w, nn_lambda, psd })
    }

    /// W^{-T} v (scaled primal direction).
    fn scale_s(&self, v: &Cv) -> Cv {
        Cv {
            eq: vec![0.0; v.eq.len()],
            nn: v.nn.iter().zip(&self.nn_w).map(|(a, w)| a / w).collect(),
            psd: v
                .psd
                .iter()
                .zip(&self.psd)
                .map(|(m, p)| &p.rinv * m * p.rinv.transpose())
                .collect(),
        }
    }

    /// W v (scaled dual direction).
    fn scale_z(&self, v: &Cv) -> Cv {
        Cv {
            eq: vec![0.0; v.eq.len()],
            nn: v.nn.iter().zip(&self.nn_w).map(|(a, w)| a * w).collect(),
            psd: v
                .psd
                .iter()
                .zip(&self.psd)
                .map(|(m, p)| p.r.transpose() * m * &p.r)
                .collect(),
        }
    }

    /// W' v.
    fn wt(&self, v: &Cv) -> Cv {
        Cv {
            eq: vec![0.0; v.eq.len()],
            nn: v.nn.iter().zip(&self.nn_w).map(|(a, w)| a * w).collect(),
            psd: v
                .psd
                .iter()
                .zip(&self.psd)
                .map(|(m, p)| &p.r * m * p.r.transpose())
                .collect(),
        }
    }

    /// H^{-1} v = (W'W)^{-1} v on the conic part; zero on equality rows.
    fn hinv(&self, v: &Cv) -> Cv {
        Cv {
            eq: vec![0.0; v.eq.len()],
            nn: v.nn.iter().zip(&self.nn_w).map(|(a, w)| a / (w * w)).collect(),
            psd: v.psd.iter().zip(&self.psd).map(|(m, p)| &p.g * m * &p.g).collect(),
        }
    }

    fn lambda_sq(&self, eq_len: usize) -> Cv {
        Cv {
            eq: vec![0.0; eq_len],
            nn: self.nn_lambda.iter().map(|l| l * l).collect(),
            psd: self
                .psd
                .iter()
                .map(|p| DMatrix::from_diagonal(&p.lambda.map(|l| l * l)))
                .collect(),
        }
    }

    /// Solve `lambda o X = v` for X.
    fn lambda_div(&self, v: &Cv) -> Cv {
        Cv {
            eq: vec![0.0; v.eq.len()],
            nn: v.nn.iter().zip(&self.nn_lambda).map(|(a, l)| a / l).collect(),
            psd: v
                .psd
                .iter()
                .zip(&self.psd)
                .map(|(m, p)| {
                    let n = m.nrows();
                    DMatrix::from_fn(n, n, |i, j| 2.0 * m[(i, j)] / (p.lambda[i] + p.lambda[j]))
                })
                .collect(),
        }
    }

    /// Largest alpha in (0, cap] keeping `lambda + alpha * d` in the cone.
    fn max_step(&self, d: &Cv, cap: f64) -> f64 {
        let mut alpha = cap;
        for (v, l) in d.nn.iter().zip(&self.nn_lambda) {
            if *v < 0.0 {
                alpha = alpha.min(-l / v);
            }
        }
        for (m, p) in d.psd.iter().zip(&self.psd) {
            let n = m.nrows();
            let isq = p.lambda.map(|v| 1.0 / v.sqrt());
            let t = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]) * isq[i] * isq[j]);
            let emin = t.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            if emin < 0.0 {
                alpha = alpha.min(-1.0 / emin);
            }
        }
        alpha
    }
}

fn jordan(a: &Cv, b: &Cv) -> Cv {
    Cv {
        eq: vec![0.0; a.eq.len()],
        nn: a.nn.iter().zip(&b.nn).map(|(x, y)| x * y).collect(),
        psd: a.psd.iter().zip(&b.psd).map(|(x, y)| (x * y + y * x) * 0.5).collect(),
    }
}

enum Factor {
    Ldl(Ldl),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

/// Factored reduced KKT system for one iteration.
struct Kkt<'a> {
    model: &'a Model,
    scaling: &'a Scaling,
    factor: Factor,
    /// Symmetric equilibration: the factored matrix is `D K D`.
    equil: Vec<f64>,
    refine: usize,
}

impl<'a> Kkt<'a> {
    fn new(model: &'a Model, scaling: &'a Scaling, opts: &SolverOptions) -> Kkt<'a> {
        let n = model.n;
        let schur = build_schur(model, scaling);
        let m0 = model.eq.len();
        let dim = n + m0;
        let maxdiag = (0..n).map(|i| schur[i * n + i]).fold(1.0f64, f64::max);
        let eps = opts.static_reg + f64::EPSILON * f64::EPSILON * maxdiag;
        let mut k = vec![0.0; dim * dim];
        for i in 0..n {
            k[i * dim..i * dim + n].copy_from_slice(&schur[i * n..i * n + n]);
            k[i * dim + i] += eps;
        }
        for (r, row) in model.eq.iter().enumerate() {
            let i = n + r;
            for &(j, a) in row {
                k[i * dim + j] = a;
                k[j * dim + i] = a;
            }
            k[i * dim + i] = -opts.static_reg;
        }
        let signs: Vec<f64> = (0..dim).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let equil = equilibrate(&mut k, dim);
        let ldl = Ldl::factor(k.clone(), dim, &signs, 1e-13, 2e-7);
        // Near the optimum the Schur block can lose definiteness in
        // directions fixed only by equality rows; an unpivoted LDL with
        // bumped pivots is then too crude for refinement to recover.
        let factor = if ldl.bumped > 0 {
            log::debug!("{} pivots regularized, using pivoted LU", ldl.bumped);
            Factor::Lu(DMatrix::from_row_slice(dim, dim, &k).lu())
        } else {
            Factor::Ldl(ldl)
        };
        Kkt {
            model,
            scaling,
            factor,
            equil,
            refine: opts.refine_steps,
        }
    }

    fn factor_solve(&self, v: &mut [f64]) {
        for (x, d) in v.iter_mut().zip(&self.equil) {
            *x *= d;
        }
        match &self.factor {
            Factor::Ldl(ldl) => ldl.solve_in_place(v),
            Factor::Lu(lu) => {
                let mut b = DVector::from_column_slice(v);
                if lu.solve_mut(&mut b) {
                    v.copy_from_slice(b.as_slice());
                }
            }
        }
        for (x, d) in v.iter_mut().zip(&self.equil) {
            *x *= d;
        }
    }

    /// Reduced operator applied through `A` and `H^{-1}` rather than the
    /// assembled Schur complement, so refinement targets the system the
    /// recovered `dz` actually satisfies.
    fn apply_true(&self, v: &[f64]) -> Vec<f64> {
        let n = self.model.n;
        let mut w = self.scaling.hinv(&self.model.apply_a(&v[..n]));
        w.eq.copy_from_slice(&v[n..]);
        let mut out = self.model.apply_at(&w);
        out.extend(self.model.eq.iter().map(|r| row_dot(r, &v[..n])));
        out
    }

    /// Solve  A'dz = r1,  A dx - H dz = r2.
    fn solve(&self, r1: &[f64], r2: &Cv) -> (Vec<f64>, Cv) {
        let model = self.model;
        let n = model.n;
        let hr2 = self.scaling.hinv(r2);
        let top_extra = model.apply_at(&hr2);
        let mut rhs = Vec::with_capacity(n + model.eq.len());
        rhs.extend(r1.iter().zip(&top_extra).map(|(a, b)| a + b));
        rhs.extend_from_slice(&r2.eq);
        let mut sol = rhs.clone();
        self.factor_solve(&mut sol);
        // Refinement continues past the configured count while it still
        // makes progress; regularized pivots need more passes.
        let target = 1e-14 * (1.0 + norm_inf(&rhs));
        let mut last = f64::INFINITY;
        for pass in 0..self.refine.max(1) * 10 {
            let kv = self.apply_true(&sol);
            let mut res: Vec<f64> = rhs.iter().zip(&kv).map(|(a, b)| a - b).collect();
            let rn = norm_inf(&res);
            if rn <= target || (pass >= self.refine && rn > 0.5 * last) {
                break;
            }
            last = rn;
            self.factor_solve(&mut res);
            for (s, d) in sol.iter_mut().zip(&res) {
                *s += d;
            }
        }
        if log::log_enabled!(log::Level::Trace) {
            let kv = self.apply_true(&sol);
            let res: Vec<f64> = rhs.iter().zip(&kv).map(|(a, b)| a - b).collect();
            log::trace!("kkt residual {:.2e} rhs {:.2e}", norm_inf(&res), norm_inf(&rhs));
        }
        let dx = sol[..n].to_vec();
        let mut adx = model.apply_a(&dx);
        adx.axpy(-1.0, r2);
        let mut dz = self.scaling.hinv(&adx);
        dz.eq = sol[n..].to_vec();
        (dx, dz)
    }
}

/// Ruiz scaling of a dense symmetric row-major matrix in place; returns
/// the diagonal `D` with the matrix replaced by `D K D`.
fn equilibrate(k: &mut [f64], dim: usize) -> Vec<f64> {
    let mut d = vec![1.0; dim];
    for _ in 0..8 {
        let mut done = true;
        let mut scale = vec![1.0; dim];
        for i in 0..dim {
            let m = norm_inf(&k[i * dim..(i + 1) * dim]);
            if m > 0.0 {
                scale[i] = 1.0 / m.sqrt();
                if (m - 1.0).abs() > 1e-2 {
                    done = false;
                }
            }
        }
        if done {
            break;
        }
        for i in 0..dim {
            for j in 0..dim {
                k[i * dim + j] *= scale[i] * scale[j];
            }
            d[i] *= scale[i];
        }
    }
    d
}

fn build_schur(model: &Model, scaling: &Scaling) -> Vec<f64> {
    let n = model.n;
    let mut s = vec![0.0; n * n];
    for ((row, w), _) in model.nn.iter().zip(&scaling.nn_w).zip(0..) {
        let h = 1.0 / (w * w);
        for &(i, a) in row {
            for &(j, b) in row {
                s[i * n + j] += h * a * b;
            }
        }
    }
    for (p, sc) in model.psd.iter().zip(&scaling.psd) {
        let g = &sc.g;
        let size = p.size;
        let mut y = DMatrix::<f64>::zeros(size, size);
        for (j, list) in &p.by_var {
            y.fill(0.0);
            for &(r, c, a) in list {
                let gr = g.column(r);
                let gc = g.column(c);
                if r == c {
                    y.ger(a, &gr, &gr, 1.0);
                } else {
                    y.ger(a, &gr, &gc, 1.0);
                    y.ger(a, &gc, &gr, 1.0);
                }
            }
            for (r, c, cl) in &p.cells {
                let v = if r == c { y[(*r, *c)] } else { 2.0 * y[(*r, *c)] };
                if v == 0.0 {
                    continue;
                }
                for &(i, a) in cl {
                    s[i * n + j] += a * v;
                }
            }
        }
    }
    s
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    s: Cv,
    z: Cv,
    tau: f64,
    kappa: f64,
}

/// Iterations without improvement of the best merit before giving up.
const STALL_ITERS: usize = 6;
/// Only iterates within this factor of the tolerances are polished.
const POLISH_RANGE: f64 = 1e4;

/// Residuals of the embedding and the convergence measures of the
/// de-homogenized point.
struct Eval {
    ax: Cv,
    atz: Vec<f64>,
    rz: Cv,
    rx: Vec<f64>,
    ctx: f64,
    btz: f64,
    rtau: f64,
    sz: f64,
    pobj: f64,
    dobj: f64,
    gap_abs: f64,
    gap_rel: f64,
    residuals: Residuals,
}

impl Eval {
    fn new(model: &Model, it: &Iterate, b: &Cv, c: &[f64]) -> Eval {
        let ax = model.apply_a(&it.x);
        let atz = model.apply_at(&it.z);
        let mut rz = ax.clone();
        rz.axpy(1.0, &it.s);
        rz.axpy(-it.tau, b);
        let rx: Vec<f64> = atz.iter().zip(c).map(|(a, ci)| a + ci * it.tau).collect();
        let ctx = dot(c, &it.x);
        let btz = b.dot(&it.z);
        let rtau = it.kappa + ctx + btz;
        let sz = it.s.dot(&it.z);
        let tau = it.tau;
        let pres = {
            let r = rz.norm_inf() / tau;
            r / (1.0 + b.norm_inf().max(ax.norm_inf() / tau).max(it.s.norm_inf() / tau))
        };
        let dres = {
            let r = norm_inf(&rx) / tau;
            r / (1.0 + norm_inf(c).max(norm_inf(&atz) / tau))
        };
        let pobj = ctx / tau;
        let dobj = -btz / tau;
        let gap_abs = sz / (tau * tau);
        let gap_rel = (pobj - dobj).abs() / 1f64.max(pobj.abs().min(dobj.abs()));
        Eval {
            ax,
            atz,
            rz,
            rx,
            ctx,
            btz,
            rtau,
            sz,
            pobj,
            dobj,
            gap_abs,
            gap_rel,
            residuals: Residuals {
                primal: pres,
                dual: dres,
                gap: gap_rel.min(gap_abs),
            },
        }
    }

    fn converged(&self, opts: &SolverOptions) -> bool {
        self.residuals.primal <= opts.tol_feas
            && self.residuals.dual <= opts.tol_feas
            && (self.gap_abs <= opts.tol_gap || self.gap_rel <= opts.tol_gap)
    }

    fn merit(&self) -> f64 {
        let r = self.residuals;
        r.primal.max(r.dual).max(r.gap)
    }
}

/// Minimum-norm corrections applied to near-optimal iterates when the
/// interior-point loop stalls just above tolerance.
struct Polisher<'a> {
    model: &'a Model,
    /// `A'A` on the `x` space, for dual corrections.
    dual: nalgebra::LU<f64, Dyn, Dyn>,
    /// Dense equality rows and their Gram matrix, for primal corrections.
    eq_rows: Vec<Vec<f64>>,
    primal: Option<nalgebra::LU<f64, Dyn, Dyn>>,
}

impl<'a> Polisher<'a> {
    fn new(model: &'a Model) -> Polisher<'a> {
        let n = model.n;
        let unit = Scaling::identity(model);
        let mut gram = build_schur(model, &unit);
        for row in &model.eq {
            for &(i, a) in row {
                for &(j, b) in row {
                    gram[i * n + j] += a * b;
                }
            }
        }
        let maxdiag = (0..n).map(|i| gram[i * n + i]).fold(1.0f64, f64::max);
        for i in 0..n {
            gram[i * n + i] += 1e-14 * maxdiag;
        }
        let dual = DMatrix::from_row_slice(n, n, &gram).lu();
        let eq_rows: Vec<Vec<f64>> = model
            .eq
            .iter()
            .map(|r| {
                let mut v = vec![0.0; n];
                for &(j, a) in r {
                    v[j] += a;
                }
                v
            })
            .collect();
        let m = eq_rows.len();
        let primal = (m > 0).then(|| {
            let mut g = DMatrix::from_fn(m, m, |i, k| dot(&eq_rows[i], &eq_rows[k]));
            let maxdiag = (0..m).map(|i| g[(i, i)]).fold(1.0f64, f64::max);
            for i in 0..m {
                g[(i, i)] += 1e-14 * maxdiag;
            }
            g.lu()
        });
        Polisher {
            model,
            dual,
            eq_rows,
            primal,
        }
    }

    /// Remove the dual residual `A'z + c tau` by a change of `z` in the
    /// range of `A`.
    fn dual(&self, it: &Iterate, c: &[f64]) -> Iterate {
        let model = self.model;
        let n = model.n;
        let mut out = it.clone();
        for _ in 0..3 {
            let atz = model.apply_at(&out.z);
            let r: Vec<f64> = atz.iter().zip(c).map(|(a, ci)| -(a + ci * out.tau)).collect();
            let mut y = DVector::from_vec(r.clone());
            if !self.dual.solve_mut(&mut y) {
                break;
            }
            // One refinement pass against the operator itself.
            let ay = model.apply_at(&model.apply_a(y.as_slice()));
            let mut e = DVector::from_iterator(n, r.iter().zip(&ay).map(|(a, b)| a - b));
            if self.dual.solve_mut(&mut e) {
                y += e;
            }
            out.z.axpy(1.0, &model.apply_a(y.as_slice()));
        }
        out
    }

    /// Project `x` onto the equality rows and reset the conic slacks to
    /// `tau b - A x`. The slacks may leave the cone; callers check
    /// [`primal_cone_violation`].
    fn primal(&self, it: &Iterate, b: &Cv) -> Iterate {
        let model = self.model;
        let mut out = it.clone();
        if let Some(lu) = &self.primal {
            let m = self.eq_rows.len();
            for _ in 0..3 {
                let r = DVector::from_iterator(
                    m,
                    model
                        .eq
                        .iter()
                        .zip(&b.eq)
                        .map(|(row, bi)| out.tau * bi - row_dot(row, &out.x)),
                );
                let Some(y) = lu.solve(&r) else {
                    break;
                };
                for (row, yi) in self.eq_rows.iter().zip(y.iter()) {
                    for (x, a) in out.x.iter_mut().zip(row) {
                        *x += a * yi;
                    }
                }
            }
        }
        let ax = model.apply_a(&out.x);
        let tb = b.scaled(out.tau);
        out.s.nn = tb.nn.iter().zip(&ax.nn).map(|(t, a)| t - a).collect();
        out.s.psd = tb.psd.iter().zip(&ax.psd).map(|(t, a)| t - a).collect();
        out
    }
}

/// Largest relative violation of the primal cone by `s / tau`.
fn primal_cone_violation(it: &Iterate) -> f64 {
    cone_violation(&it.s.scaled(1.0 / it.tau))
}

fn cone_violation(v: &Cv) -> f64 {
    let scale = 1.0 + v.norm_inf();
    let mut out: f64 = v.nn.iter().fold(0.0, |m, &a| m.max(-a));
    for m in &v.psd {
        if m.nrows() > 0 {
            let sym = (m + m.transpose()) * 0.5;
            let lo = sym
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            out = out.max(-lo);
        }
    }
    out / scale
}

/// Largest relative violation of the dual cone by `z / tau`.
fn dual_cone_violation(it: &Iterate) -> f64 {
    cone_violation(&it.z.scaled(1.0 / it.tau))
}

struct Direction {
    dx: Vec<f64>,
    ds: Cv,
    dz: Cv,
    dtau: f64,
    dkappa: f64,
}

pub(crate) fn solve_program(prog: &ConicProgram, opts: &SolverOptions) -> ConicSolution {
    let model = Model::new(prog);
    let n = model.n;
    let nu = model.degree();
    let b = model.b();
    let c = model.c.clone();

    let mut it = Iterate {
        x: vec![0.0; n],
        s: model.identity(),
        z: model.identity(),
        tau: 1.0,
        kappa: 1.0,
    };

    let mut status = Status::IterationLimit;
    let mut ray: Option<FarkasRay> = None;
    let mut residuals = Residuals::default();
    let mut iters = 0;
    let mut best: Option<(Iterate, f64, usize)> = None;
    let mut recent: std::collections::VecDeque<(Iterate, f64)> = std::collections::VecDeque::new();
    // Smallest infeasibility-ray ratio seen and when it last halved; a run
    // heading to an infeasibility certificate is not stalled.
    let mut best_ray_ratio = f64::INFINITY;
    let mut ray_progress_k = 0;

    for k in 0..=opts.max_iters {
        iters = k;
        let ev = Eval::new(&model, &it, &b, &c);
        let Eval {
            ref ax,
            ref atz,
            ref rz,
            ref rx,
            ctx,
            btz,
            rtau,
            ..
        } = ev;
        let mu = (ev.sz + it.tau * it.kappa) / (nu + 1.0);
        residuals = ev.residuals;
        if opts.verbose {
            log::info!(
                "it {k:3} pobj {:+.6e} dobj {:+.6e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e} mu {mu:.2e}",
                ev.pobj,
                ev.dobj,
                residuals.primal,
                residuals.dual,
                residuals.gap,
                it.tau,
                it.kappa
            );
        }
        if ev.converged(opts) {
            status = Status::Optimal;
            break;
        }
        if it.tau > 0.0 {
            if recent.len() > STALL_ITERS {
                recent.pop_front();
            }
            recent.push_back((it.clone(), ev.merit()));
        }
        if it.tau > 0.0 && ev.merit() < best.as_ref().map_or(f64::INFINITY, |b: &(Iterate, f64, usize)| b.1) {
            best = Some((it.clone(), ev.merit(), k));
        }
        let ray_ratio = {
            let p = if btz < 0.0 { norm_inf(atz) / -btz } else { f64::INFINITY };
            let d = if ctx < 0.0 {
                let mut axs = ax.clone();
                axs.axpy(1.0, &it.s);
                axs.norm_inf() / -ctx
            } else {
                f64::INFINITY
            };
            p.min(d)
        };
        if ray_ratio < 0.5 * best_ray_ratio {
            best_ray_ratio = ray_ratio;
            ray_progress_k = k;
        }
        if let Some((_, _, bk)) = &best {
            if k >= (*bk).max(ray_progress_k) + STALL_ITERS {
                log::debug!("no progress since iteration {bk}");
                status = Status::NumericalTrouble;
                break;
            }
        }
        if btz < 0.0 && norm_inf(atz) <= opts.tol_infeas * (-btz) {
            let cand = extract_ray(&model, &it.z, btz);
            let check = verify_ray(prog, &cand);
            if check.is_valid(opts.tol_ray_verify) {
                status = Status::PrimalInfeasible;
                ray = Some(cand);
                break;
            }
        }
        if ctx < 0.0 {
            let mut axs = ax.clone();
            axs.axpy(1.0, &it.s);
            if axs.norm_inf() <= opts.tol_infeas * (-ctx) {
                status = Status::DualInfeasible;
                break;
            }
        }
        if k == opts.max_iters {
            status = Status::IterationLimit;
            break;
        }
        if !mu.is_finite() {
            status = Status::NumericalTrouble;
            break;
        }

        let scaling = match Scaling::new(&it.s, &it.z) {
            Some(s) => s,
            None => {
                status = Status::NumericalTrouble;
                break;
            }
        };
        let kkt = Kkt::new(&model, &scaling, opts);
        // Constant direction for the tau column.
        let minus_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let (x2, z2) = kkt.solve(&minus_c, &b);
        let denom_base = dot(&c, &x2) + b.dot(&z2);

        let lam_sq = scaling.lambda_sq(model.eq.len());
        let solve_dir = |eta: f64, ds_r: &Cv, dkappa_r: f64| -> Direction {
            let dx_r: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let dz_r = rz.scaled(-eta);
            let dtau_r = -eta * rtau;
            let ds_hat = scaling.lambda_div(ds_r);
            let mut r2 = dz_r.clone();
            r2.axpy(-1.0, &scaling.wt(&ds_hat));
            let (x1, z1) = kkt.solve(&dx_r, &r2);
            let num = dtau_r - dot(&c, &x1) - b.dot(&z1) - dkappa_r / it.tau;
            let den = denom_base - it.kappa / it.tau;
            let dtau = num / den;
            let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b2)| a + dtau * b2).collect();
            let mut dz = z1;
            dz.axpy(dtau, &z2);
            let dkappa = (dkappa_r - it.kappa * dtau) / it.tau;
            // ds from the linearized primal equation A dx + ds - b dtau = dz_r,
            // which keeps the primal residual consistent; the complementarity
            // form W'(ds_hat - W dz) loses accuracy near the boundary.
            let mut ds = dz_r;
            ds.axpy(-1.0, &model.apply_a(&dx));
            ds.axpy(dtau, &b);
            ds.eq.iter_mut().for_each(|v| *v = 0.0);
            Direction {
                dx,
                ds,
                dz,
                dtau,
                dkappa,
            }
        };
        let step_len = |d: &Direction, cap: f64| -> f64 {
            let mut a = cap;
            a = a.min(scaling.max_step(&scaling.scale_s(&d.ds), cap));
            a = a.min(scaling.max_step(&scaling.scale_z(&d.dz), cap));
            if d.dtau < 0.0 {
                a = a.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-it.kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let aff = solve_dir(1.0, &lam_sq.scaled(-1.0), -it.tau * it.kappa);
        let alpha_aff = step_len(&aff, 1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let mut ds_r = lam_sq.scaled(-1.0);
        let corr = jordan(&scaling.scale_s(&aff.ds), &scaling.scale_z(&aff.dz));
        ds_r.axpy(-1.0, &corr);
        ds_r.axpy(sigma * mu, &model.identity());
        let dkappa_r = -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = solve_dir(1.0 - sigma, &ds_r, dkappa_r);
        let alpha = (opts.step_fraction * step_len(&dir, 1.0 / opts.step_fraction)).min(1.0);
        if !(alpha > 1e-12) || !alpha.is_finite() {
            status = Status::NumericalTrouble;
            break;
        }
        for (x, d) in it.x.iter_mut().zip(&dir.dx) {
            *x += alpha * d;
        }
        it.s.axpy(alpha, &dir.ds);
        it.z.axpy(alpha, &dir.dz);
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        for m in it.s.psd.iter_mut().chain(it.z.psd.iter_mut()) {
            let t = m.transpose();
            *m = (&*m + t) * 0.5;
        }
    }

    if matches!(status, Status::NumericalTrouble | Status::IterationLimit) {
        if let Some((cand, _, bk)) = best {
            // The best iterate by merit is not always the easiest to
            // polish, so try the last few as well.
            let mut starts: Vec<(Iterate, f64)> = recent.into_iter().collect();
            if it.tau > 0.0 {
                let m = Eval::new(&model, &it, &b, &c).merit();
                starts.push((it.clone(), m));
            }
            starts.retain(|(_, m)| m.is_finite() && *m <= POLISH_RANGE * opts.tol_feas.max(opts.tol_gap));
            let polisher = (!starts.is_empty()).then(|| Polisher::new(&model));
            let mut accepted: Option<(Iterate, Eval)> = None;
            for (start, _) in &starts {
                let polisher = polisher.as_ref().expect("built for nonempty starts");
                let dual_only = polisher.dual(start, &c);
                let both = polisher.dual(&polisher.primal(start, &b), &c);
                for polished in [dual_only, both] {
                    let ev = Eval::new(&model, &polished, &b, &c);
                    if ev.converged(opts)
                        && dual_cone_violation(&polished) <= opts.tol_feas
                        && primal_cone_violation(&polished) <= opts.tol_feas
                        && accepted.as_ref().is_none_or(|(_, e)| ev.merit() < e.merit())
                    {
                        accepted = Some((polished, ev));
                    }
                }
            }
            if let Some((p, ev)) = accepted {
                log::debug!("polished iterate accepted (best iterate {bk})");
                status = Status::Optimal;
                residuals = ev.residuals;
                it = p;
            } else {
                residuals = Eval::new(&model, &cand, &b, &c).residuals;
                it = cand;
            }
        }
    }

    let tau = it.tau;
    let primal: Vec<f64> = if status == Status::PrimalInfeasible {
        it.x.clone()
    } else {
        it.x.iter().map(|v| v / tau).collect()
    };
    let dual = user_duals(&model, &it.z.scaled(1.0 / tau));
    let objective_value = prog.objective_value(&primal);
    let dual_objective_value = -b.dot(&it.z) / tau;
    ConicSolution {
        status,
        primal,
        dual,
        objective_value,
        dual_objective_value,
        residuals,
        certificate_ray: ray,
        iterations: iters,
    }
}

/// Convert an internal dual vector to user multipliers (see [`DualVariables`]).
fn user_duals(model: &Model, z: &Cv) -> DualVariables {
    let (eq_user, zero) = split_zero(model, &z.eq, -1.0);
    DualVariables {
        eq: eq_user,
        ineq: z.nn.clone(),
        psd: z.psd.clone(),
        zero,
    }
}

fn split_zero(model: &Model, zeq: &[f64], sign: f64) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let eq_user = zeq[..model.n_user_eq].iter().map(|v| sign * v).collect();
    let mut zero: Vec<DMatrix<f64>> = model.zero_sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
    for (&(b, r, c), &v) in model.zero_rows.iter().zip(&zeq[model.n_user_eq..]) {
        if r == c {
            zero[b][(r, c)] += sign * v;
        } else {
            zero[b][(r, c)] += 0.5 * sign * v;
            zero[b][(c, r)] += 0.5 * sign * v;
        }
    }
    (eq_user, zero)
}

fn extract_ray(model: &Model, z: &Cv, btz: f64) -> FarkasRay {
    let scale = 1.0 / (-btz);
    let (eq, zero) = split_zero(model, &z.eq, scale);
    FarkasRay {
        eq,
        ineq: z.nn.iter().map(|v| v * scale).collect(),
        psd: z.psd.iter().map(|m| m * scale).collect(),
        zero,
        pairing: -1.0,
    }
}
