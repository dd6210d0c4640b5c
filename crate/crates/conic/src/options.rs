/// Tolerances and limits for [`crate::solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative primal and dual feasibility tolerance.
    pub tol_feas: f64,
    /// Relative duality gap tolerance.
    pub tol_gap: f64,
    /// Detection threshold for infeasibility rays (`|A'z| / -b'z`).
    pub tol_infeas: f64,
    /// Absolute tolerance used when re-verifying a returned ray.
    pub tol_ray_verify: f64,
    pub max_iters: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Static regularization added to the reduced KKT system.
    pub static_reg: f64,
    /// Iterative refinement passes per linear solve.
    pub refine_steps: usize,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            tol_infeas: 1e-8,
            tol_ray_verify: 1e-6,
            max_iters: 200,
            step_fraction: 0.99,
            static_reg: 1e-9,
            refine_steps: 3,
            verbose: false,
        }
    }
}
