//! Machine-readable reports. Every float is rounded to 12 significant
//! digits so that identical runs serialize to identical bytes.

use gtmp_core::engine::{GtmpOptions, NonexistenceCertificate, OrderTrace};
use gtmp_core::extract::{AtomicMeasure, MeasureSpace};
use gtmp_core::poly::Polynomial;
use gtmp_core::tensor::TensorDecomposition;
use serde::{Deserialize, Serialize};

use crate::problem::Mode;

pub const REPORT_VERSION: u32 = 1;

/// Round to 12 significant digits; `-0` becomes `0`.
pub fn r12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let v: f64 = format!("{x:.11e}").parse().expect("formatted float");
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then(|| r12(x))
}

fn rvec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| r12(x)).collect()
}

pub fn rpoly(p: &Polynomial) -> Polynomial {
    p.map(|&c| r12(c))
}

/// Polynomial text in the lifted variables `x0 .. xn`.
pub fn lifted_text(p: &Polynomial) -> String {
    rpoly(p).display_with(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Original,
    Lifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureOut {
    pub space: Space,
    pub weights: Vec<f64>,
    pub atoms: Vec<Vec<f64>>,
}

impl MeasureOut {
    pub fn from_measure(mu: &AtomicMeasure) -> Self {
        Self {
            space: match mu.space {
                MeasureSpace::Original => Space::Original,
                MeasureSpace::Lifted => Space::Lifted,
            },
            weights: rvec(&mu.weights),
            atoms: mu.atoms.iter().map(|a| rvec(a)).collect(),
        }
    }

    pub fn to_measure(&self) -> Option<AtomicMeasure> {
        let space = match self.space {
            Space::Original => MeasureSpace::Original,
            Space::Lifted => MeasureSpace::Lifted,
        };
        AtomicMeasure::new(self.atoms.clone(), self.weights.clone(), space).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximantOut {
    pub eps: f64,
    pub measure: MeasureOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaOut {
    pub row: String,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramOut {
    pub generator: String,
    pub basis: Vec<Vec<u32>>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealOut {
    pub generator: String,
    pub multiplier: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOut {
    pub decomposition_residual: f64,
    pub row_residual: f64,
    pub psd_violation: f64,
    pub sign_violation: f64,
    pub pairing: f64,
}

/// `q = sum theta_i a^_i = sum g [x]^T G_g [x] + sum h u_h` with
/// `sum theta_i b_i < 0`, in the lifted variables `x0 .. xn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateOut {
    pub order: usize,
    /// One multiplier per row, equalities first.
    pub theta: Vec<ThetaOut>,
    pub q: String,
    pub pairing: f64,
    pub gram_blocks: Vec<GramOut>,
    pub ideal_terms: Vec<IdealOut>,
    pub check: CheckOut,
}

impl CertificateOut {
    pub fn new(cert: &NonexistenceCertificate, labels: &[String], check: CheckOut) -> Self {
        let dec = &cert.decomposition;
        let gram_blocks = dec
            .gram_generators
            .iter()
            .zip(&dec.gram_bases)
            .zip(&dec.grams)
            .map(|((g, b), m)| GramOut {
                generator: lifted_text(g),
                basis: b.iter().map(|a| a.exponents().to_vec()).collect(),
                matrix: (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| r12(0.5 * (m[(i, j)] + m[(j, i)]))).collect())
                    .collect(),
            })
            .collect();
        let ideal_terms = dec
            .ideal_generators
            .iter()
            .zip(&dec.multipliers)
            .map(|(h, u)| IdealOut {
                generator: lifted_text(h),
                multiplier: lifted_text(u),
            })
            .collect();
        Self {
            order: cert.order,
            theta: labels
                .iter()
                .zip(&cert.theta)
                .map(|(l, t)| ThetaOut {
                    row: l.clone(),
                    theta: r12(*t),
                })
                .collect(),
            q: lifted_text(&cert.q),
            pairing: r12(cert.pairing_value),
            gram_blocks,
            ideal_terms,
            check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionOut {
    pub weights: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residual: f64,
}

impl DecompositionOut {
    pub fn new(d: &TensorDecomposition) -> Self {
        Self {
            weights: rvec(&d.weights),
            vectors: d.vectors.iter().map(|v| rvec(v)).collect(),
            residual: r12(d.residual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatoptOut {
    /// The relaxation value; a lower bound on `min f/g` unless `flat`.
    pub value: f64,
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatOut {
    pub t: usize,
    pub rank_low: usize,
    pub rank_high: usize,
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceOut {
    pub k: usize,
    pub seed: u64,
    pub status: String,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub gap: Option<f64>,
    pub flat: Vec<FlatOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceOut {
    pub fn new(t: &OrderTrace) -> Self {
        Self {
            k: t.k,
            seed: t.seed,
            status: t.status.as_str().to_string(),
            iterations: t.iterations,
            objective: finite(t.objective),
            primal_residual: finite(t.residuals.primal),
            dual_residual: finite(t.residuals.dual),
            gap: finite(t.residuals.gap),
            flat: t
                .flat
                .iter()
                .map(|f| FlatOut {
                    t: f.t,
                    rank_low: f.rank_low,
                    rank_high: f.rank_high,
                    flat: f.flat,
                })
                .collect(),
            note: t.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsOut {
    pub seed: u64,
    pub k_max: usize,
    pub d1: Option<usize>,
    pub tol_rank: f64,
    pub tol_tau: f64,
    pub tol_measure: f64,
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub retries: usize,
    pub x0_floor: Option<f64>,
    pub eps_schedule: Vec<f64>,
}

impl OptionsOut {
    pub fn new(o: &GtmpOptions) -> Self {
        Self {
            seed: o.seed,
            k_max: o.k_max,
            d1: o.d1,
            tol_rank: o.tol_rank,
            tol_tau: o.tol_tau,
            tol_measure: o.tol_measure,
            tol_feas: o.solver.tol_feas,
            tol_gap: o.solver.tol_gap,
            retries: o.retries,
            x0_floor: o.x0_floor,
            eps_schedule: o.eps_schedule.clone(),
        }
    }
}

/// Outcome labels used in reports.
pub mod outcome {
    pub const K_MEASURE_FOUND: &str = "KMeasureFound";
    pub const CLOSURE_MEASURE_ONLY: &str = "ClosureMeasureOnly";
    pub const INFEASIBLE: &str = "Infeasible";
    pub const UNDETERMINED: &str = "Undetermined";
    pub const MEMBER: &str = "Member";
    pub const NOT_IN_CLOSURE: &str = "NotInClosure";
    pub const SOLVED: &str = "Solved";

    pub fn exit_code(tag: &str) -> i32 {
        match tag {
            K_MEASURE_FOUND | MEMBER | SOLVED => 0,
            INFEASIBLE | NOT_IN_CLOSURE => 2,
            CLOSURE_MEASURE_ONLY => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub report_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: Mode,
    pub outcome: String,
    pub exit_code: i32,
    pub order: Option<usize>,
    pub closed_at_infinity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifted_measure: Option<MeasureOut>,
    /// Indices into `lifted_measure` of atoms with `x0 <= tol_tau`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_tau_atoms: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub approximants: Vec<ApproximantOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifted_decomposition: Option<DecompositionOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratopt: Option<RatoptOut>,
    pub trace: Vec<TraceOut>,
    pub options: OptionsOut,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Report {
    pub fn new(name: Option<String>, mode: Mode, closed_at_infinity: bool, opts: &GtmpOptions) -> Self {
        Self {
            report_version: REPORT_VERSION,
            name,
            mode,
            outcome: outcome::UNDETERMINED.to_string(),
            exit_code: outcome::exit_code(outcome::UNDETERMINED),
            order: None,
            closed_at_infinity,
            reason: None,
            measure: None,
            lifted_measure: None,
            zero_tau_atoms: Vec::new(),
            approximants: Vec::new(),
            certificate: None,
            decomposition: None,
            lifted_decomposition: None,
            ratopt: None,
            trace: Vec::new(),
            options: OptionsOut::new(opts),
            wall_time_s: None,
        }
    }

    pub fn set_outcome(&mut self, tag: &str) {
        self.outcome = tag.to_string();
        self.exit_code = outcome::exit_code(tag);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let name = self.name.as_deref().unwrap_or("(unnamed)");
        out.push_str(&format!("problem   {name} [{}]\n", self.mode.as_str()));
        out.push_str(&format!("outcome   {} (exit {})\n", self.outcome, self.exit_code));
        if let Some(k) = self.order {
            out.push_str(&format!("order     {k}\n"));
        }
        if let Some(r) = &self.reason {
            out.push_str(&format!("reason    {r}\n"));
        }
        if let Some(ro) = &self.ratopt {
            out.push_str(&format!("value     {} (flat: {})\n", ro.value, ro.flat));
        }
        for (label, m) in [("measure", &self.measure), ("lifted", &self.lifted_measure)] {
            if let Some(m) = m {
                out.push_str(&format!("{label:<9} {} atom(s)\n", m.weights.len()));
                for (i, (w, a)) in m.weights.iter().zip(&m.atoms).enumerate() {
                    let mark = if label == "lifted" && self.zero_tau_atoms.contains(&i) {
                        "  x0 ~ 0"
                    } else {
                        ""
                    };
                    out.push_str(&format!("  {w:>14.8}  {a:?}{mark}\n"));
                }
            }
        }
        if let Some(c) = &self.certificate {
            out.push_str(&format!(
                "certificate order {}, pairing {:.3e}, residual {:.3e}\n",
                c.order, c.pairing, c.check.decomposition_residual
            ));
            out.push_str(&format!("  q = {}\n", c.q));
        }
        for a in &self.approximants {
            out.push_str(&format!(
                "approximant eps = {}: {} atom(s)\n",
                a.eps,
                a.measure.weights.len()
            ));
        }
        for t in &self.trace {
            let flat: Vec<String> = t
                .flat
                .iter()
                .map(|f| format!("t={}:{}/{}", f.t, f.rank_low, f.rank_high))
                .collect();
            out.push_str(&format!(
                "k={} seed={} {} iters={} ranks [{}]{}\n",
                t.k,
                t.seed,
                t.status,
                t.iterations,
                flat.join(" "),
                t.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default()
            ));
        }
        if let Some(s) = self.wall_time_s {
            out.push_str(&format!("wall time {s:.3} s\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(r12(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(r12(1.0 / 3.0), 0.333333333333);
        assert_eq!(r12(2.0f64.sqrt() * 1e-9), 1.41421356237e-9);
        assert_eq!(r12(6.0), 6.0);
        assert_eq!(serde_json::to_string(&r12(0.1 + 0.2)).unwrap(), "0.3");
    }
}
