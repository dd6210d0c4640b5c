use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalTrouble,
    IterationLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "Optimal",
            Status::PrimalInfeasible => "PrimalInfeasible",
            Status::DualInfeasible => "DualInfeasible",
            Status::NumericalTrouble => "NumericalTrouble",
            Status::IterationLimit => "IterationLimit",
        }
    }
}

/// Relative residuals at the returned iterate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Lagrange multipliers, sign convention
/// `c = sum_i y_i a_i + sum_j F_j^*(Z_j) + sum_j G_j^*(Y_j)`
/// with `y_ineq >= 0` and `Z_j` PSD.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualVariables {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub psd: Vec<DMatrix<f64>>,
    pub zero: Vec<DMatrix<f64>>,
}

/// Farkas certificate of primal infeasibility.
///
/// Multipliers `u_eq` (free), `u_ineq >= 0`, `U_j` PSD and `V_j` (free,
/// symmetric) such that the linear parts combine to zero,
///
/// ```text
/// sum u_eq a - sum u_ineq a - sum F_j^*(U_j) + sum G_j^*(V_j) = 0,
/// ```
///
/// while the right-hand sides pair to a negative number,
///
/// ```text
/// pairing = sum u_eq b - sum u_ineq b + sum <U_j, F0_j> - sum <V_j, G0_j> < 0.
/// ```
///
/// Any feasible `w` would make the same combination nonpositive on the left
/// and bounded by `pairing` on the right, which is impossible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FarkasRay {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub psd: Vec<DMatrix<f64>>,
    pub zero: Vec<DMatrix<f64>>,
    pub pairing: f64,
}

impl FarkasRay {
    /// Rescale so that `pairing == -1`.
    pub fn normalized(&self) -> FarkasRay {
        let s = if self.pairing != 0.0 { -1.0 / self.pairing } else { 1.0 };
        FarkasRay {
            eq: self.eq.iter().map(|v| v * s).collect(),
            ineq: self.ineq.iter().map(|v| v * s).collect(),
            psd: self.psd.iter().map(|m| m * s).collect(),
            zero: self.zero.iter().map(|m| m * s).collect(),
            pairing: self.pairing * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: Status,
    pub primal: Vec<f64>,
    pub dual: DualVariables,
    pub objective_value: f64,
    pub dual_objective_value: f64,
    pub residuals: Residuals,
    pub certificate_ray: Option<FarkasRay>,
    pub iterations: usize,
}
