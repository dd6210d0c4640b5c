//! Residual checks recomputed from the program data alone, independent of
//! any solver state.

use nalgebra::DMatrix;

use crate::program::ConicProgram;
use crate::solution::{ConicSolution, DualVariables, FarkasRay};

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Absolute KKT residuals of a candidate primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Euclidean norm of `A_eq w - b_eq`.
    pub primal_eq: f64,
    /// Frobenius norm of the zero-block values.
    pub primal_zero: f64,
    /// Largest violation `max(0, b_i - <a_i, w>)` of an inequality row.
    pub primal_ineq: f64,
    /// Largest `max(0, -lambda_min(F_j(w)))`.
    pub primal_psd: f64,
    /// Infinity norm of `c - sum y a - F^*(Z) - G^*(Y)`.
    pub dual: f64,
    pub dual_ineq: f64,
    pub dual_psd: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal_objective - dual_objective|`.
    pub gap: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.primal_eq,
            self.primal_zero,
            self.primal_ineq,
            self.primal_psd,
            self.dual,
            self.dual_ineq,
            self.dual_psd,
            self.gap,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn check_kkt(prog: &ConicProgram, sol: &ConicSolution) -> KktReport {
    check_pair(prog, &sol.primal, &sol.dual)
}

pub fn check_pair(prog: &ConicProgram, w: &[f64], dual: &DualVariables) -> KktReport {
    let mut rep = KktReport {
        primal_eq: prog
            .eq_rows
            .iter()
            .map(|r| (r.dot(w) - r.rhs).powi(2))
            .sum::<f64>()
            .sqrt(),
        ..KktReport::default()
    };
    rep.primal_zero = prog
        .zero_blocks
        .iter()
        .map(|m| m.evaluate(w).norm_squared())
        .sum::<f64>()
        .sqrt();
    rep.primal_ineq = prog
        .ineq_rows
        .iter()
        .map(|r| (r.rhs - r.dot(w)).max(0.0))
        .fold(0.0, f64::max);
    rep.primal_psd = prog
        .psd_blocks
        .iter()
        .map(|m| (-min_eigenvalue(&m.evaluate(w))).max(0.0))
        .fold(0.0, f64::max);

    let mut grad = prog.objective.clone();
    let mut dobj = 0.0;
    for (row, &y) in prog.eq_rows.iter().zip(&dual.eq) {
        for &(j, a) in &row.coeffs {
            grad[j] -= y * a;
        }
        dobj += y * row.rhs;
    }
    for (row, &y) in prog.ineq_rows.iter().zip(&dual.ineq) {
        for &(j, a) in &row.coeffs {
            grad[j] -= y * a;
        }
        dobj += y * row.rhs;
        rep.dual_ineq = rep.dual_ineq.max(-y);
    }
    for (m, z) in prog.psd_blocks.iter().zip(&dual.psd) {
        m.adjoint_into(z, -1.0, &mut grad);
        dobj -= m.constant_pairing(z);
        rep.dual_psd = rep.dual_psd.max(-min_eigenvalue(z));
    }
    for (m, y) in prog.zero_blocks.iter().zip(&dual.zero) {
        m.adjoint_into(y, -1.0, &mut grad);
        dobj -= m.constant_pairing(y);
    }
    rep.dual = grad.iter().fold(0.0, |a, g| a.max(g.abs()));
    rep.primal_objective = prog.objective_value(w);
    rep.dual_objective = dobj;
    rep.gap = (rep.primal_objective - rep.dual_objective).abs();
    rep
}

/// Outcome of re-verifying a [`FarkasRay`] after normalizing its pairing
/// to `-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayCheck {
    /// Pairing before normalization.
    pub pairing: f64,
    /// Infinity norm of the normalized linear combination.
    pub combination: f64,
    /// Most negative normalized inequality multiplier (0 if none).
    pub ineq_violation: f64,
    /// Most negative eigenvalue among normalized PSD multipliers (0 if none).
    pub psd_violation: f64,
}

impl RayCheck {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.pairing < 0.0 && self.combination <= tol && self.ineq_violation <= tol && self.psd_violation <= tol
    }
}

/// Recompute the Farkas conditions of `ray` from the program data.
pub fn verify_ray(prog: &ConicProgram, ray: &FarkasRay) -> RayCheck {
    let mut comb = vec![0.0; prog.dim];
    let mut pairing = 0.0;
    for (row, &u) in prog.eq_rows.iter().zip(&ray.eq) {
        for &(j, a) in &row.coeffs {
            comb[j] += u * a;
        }
        pairing += u * row.rhs;
    }
    let mut ineq_min = 0.0f64;
    for (row, &u) in prog.ineq_rows.iter().zip(&ray.ineq) {
        for &(j, a) in &row.coeffs {
            comb[j] -= u * a;
        }
        pairing -= u * row.rhs;
        ineq_min = ineq_min.min(u);
    }
    let mut psd_min = 0.0f64;
    for (m, u) in prog.psd_blocks.iter().zip(&ray.psd) {
        m.adjoint_into(u, -1.0, &mut comb);
        pairing += m.constant_pairing(u);
        psd_min = psd_min.min(min_eigenvalue(u));
    }
    for (m, v) in prog.zero_blocks.iter().zip(&ray.zero) {
        m.adjoint_into(v, 1.0, &mut comb);
        pairing -= m.constant_pairing(v);
    }
    let scale = if pairing < 0.0 { -1.0 / pairing } else { f64::INFINITY };
    let norm = comb.iter().fold(0.0, |a: f64, c| a.max(c.abs()));
    RayCheck {
        pairing,
        combination: norm * scale,
        ineq_violation: (-ineq_min) * scale,
        psd_violation: (-psd_min) * scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{LinearRow, MatrixMap};
    use crate::solution::{Residuals, Status};

    fn tiny() -> ConicProgram {
        // min w0 s.t. w0 + w1 = 2, [w0 w1; w1 w0] PSD
        let mut p = ConicProgram::new(2);
        p.objective = vec![1.0, 0.0];
        p.eq_rows.push(LinearRow::new(vec![(0, 1.0), (1, 1.0)], 2.0));
        let mut m = MatrixMap::new(2);
        m.push(0, 0, 0, 1.0);
        m.push(1, 1, 0, 1.0);
        m.push(0, 1, 1, 1.0);
        p.psd_blocks.push(m);
        p
    }

    fn exact() -> ConicSolution {
        // Optimum w = (1, 1); dual y = 1/2, Z = 1/4 [1 -1; -1 1].
        ConicSolution {
            status: Status::Optimal,
            primal: vec![1.0, 1.0],
            dual: DualVariables {
                eq: vec![0.5],
                ineq: vec![],
                psd: vec![DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25])],
                zero: vec![],
            },
            objective_value: 1.0,
            dual_objective_value: 1.0,
            residuals: Residuals::default(),
            certificate_ray: None,
            iterations: 0,
        }
    }

    #[test]
    fn exact_pair_has_tiny_residuals() {
        let rep = check_kkt(&tiny(), &exact());
        assert!(rep.max_residual() < 1e-12, "{rep:?}");
    }

    #[test]
    fn perturbation_shows_up_linearly() {
        let mut sol = exact();
        sol.primal[1] += 1e-3;
        let rep = check_kkt(&tiny(), &sol);
        assert!((rep.primal_eq - 1e-3).abs() < 1e-12);
        let mut sol = exact();
        sol.dual.eq[0] += 1e-4;
        let rep = check_kkt(&tiny(), &sol);
        assert!((rep.dual - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn zero_point_on_inconsistent_rows_reports_rhs_norm() {
        let mut p = ConicProgram::new(2);
        p.eq_rows.push(LinearRow::new(vec![(0, 1.0)], 3.0));
        p.eq_rows.push(LinearRow::new(vec![(0, 1.0)], 4.0));
        let mut sol = exact();
        sol.primal = vec![0.0, 0.0];
        sol.dual = DualVariables {
            eq: vec![0.0, 0.0],
            ..Default::default()
        };
        let rep = check_kkt(&p, &sol);
        assert!((rep.primal_eq - 5.0).abs() < 1e-14);
    }

    #[test]
    fn farkas_ray_for_negative_mass() {
        // w0 = -1 with [w0] PSD is infeasible; u_eq = 1, U = 1 works:
        // 1*w0 - 1*w0 = 0, pairing = -1.
        let mut p = ConicProgram::new(1);
        p.eq_rows.push(LinearRow::new(vec![(0, 1.0)], -1.0));
        let mut m = MatrixMap::new(1);
        m.push(0, 0, 0, 1.0);
        p.psd_blocks.push(m);
        let ray = FarkasRay {
            eq: vec![1.0],
            psd: vec![DMatrix::from_element(1, 1, 1.0)],
            pairing: -1.0,
            ..Default::default()
        };
        let chk = verify_ray(&p, &ray);
        assert!(chk.is_valid(1e-12), "{chk:?}");
        let bad = FarkasRay { eq: vec![-1.0], ..ray };
        assert!(!verify_ray(&p, &bad).is_valid(1e-6));
    }
}
