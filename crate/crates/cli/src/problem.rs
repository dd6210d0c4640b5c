//! Problem files: JSON, versioned, unknown fields rejected.

use gtmp_core::moment::Tms;
use gtmp_core::poly::{parse_polynomial, MultiIndex, Polynomial, PowerSupport};
use gtmp_core::relax::MomentProblemSpec;
use gtmp_core::set::SemialgebraicSet;
use gtmp_core::tensor::{tensor_to_tms, SymmetricTensor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROBLEM_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}, column {column}: {message}")]
    Poly {
        path: String,
        column: usize,
        message: String,
    },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ProblemError {
    ProblemError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Gtmp,
    TensorPsop,
    TensorScp,
    ConeMember,
    Ratopt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Gtmp => "gtmp",
            Mode::TensorPsop => "tensor-psop",
            Mode::TensorScp => "tensor-scp",
            Mode::ConeMember => "cone-member",
            Mode::Ratopt => "ratopt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    #[serde(default)]
    pub equalities: Vec<String>,
    #[serde(default)]
    pub inequalities: Vec<String>,
    #[serde(default = "default_true")]
    pub closed_at_infinity: bool,
}

impl Default for SetSpec {
    fn default() -> Self {
        Self {
            equalities: Vec::new(),
            inequalities: Vec::new(),
            closed_at_infinity: true,
        }
    }
}

fn default_true() -> bool {
    true
}

/// `"full:d"` or an explicit list of exponent vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupportSpec {
    Full(String),
    Explicit(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub poly: String,
    pub rel: Relation,
    pub rhs: f64,
}

/// Coordinate list of a symmetric tensor on `R^{variables + 1}`; index 0 is
/// the homogenizing coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSpec {
    pub order: usize,
    pub entries: Vec<(Vec<usize>, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `n`; polynomials use the variables `x1 .. xn`.
    pub variables: usize,
    #[serde(default)]
    pub set: SetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<RowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<TensorSpec>,
    /// Values on `support`, in the listed order, for `cone-member`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Gtmp,
    Tensor { tensor: SymmetricTensor, scp: bool },
    Cone { y: Tms },
    Ratopt { f: Polynomial, g: Polynomial },
}

/// A validated problem. `spec` is present for every mode except `ratopt`;
/// `row_of[i]` is the file index of spec row `i` (equalities come first).
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub file: ProblemFile,
    pub set: SemialgebraicSet,
    pub task: Task,
    pub spec: Option<MomentProblemSpec>,
    pub row_of: Vec<usize>,
}

impl Problem {
    pub fn mode(&self) -> Mode {
        self.file.mode
    }

    /// Human-readable label of spec row `i`.
    pub fn row_label(&self, i: usize) -> String {
        match (&self.task, self.spec.as_ref()) {
            (Task::Gtmp, _) => {
                let r = &self.file.rows[self.row_of[i]];
                let rel = if r.rel == Relation::Eq { "=" } else { ">=" };
                format!("rows[{}] ({} {rel} {})", self.row_of[i], r.poly, r.rhs)
            }
            (_, Some(spec)) => format!("moment {:?}", spec.support.indices()[i]),
            _ => format!("row {i}"),
        }
    }
}

fn poly(text: &str, n: usize, path: &str) -> Result<Polynomial, ProblemError> {
    parse_polynomial(text, n, 1).map_err(|e| match e {
        gtmp_core::Error::Parse { column, message } => ProblemError::Poly {
            path: path.to_string(),
            column,
            message,
        },
        other => schema(path, other.to_string()),
    })
}

fn support(spec: &SupportSpec, n: usize) -> Result<PowerSupport, ProblemError> {
    match spec {
        SupportSpec::Full(s) => {
            let d = s
                .strip_prefix("full:")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .ok_or_else(|| {
                    schema(
                        "support",
                        format!("expected \"full:<degree>\" or a list of exponents, found {s:?}"),
                    )
                })?;
            Ok(PowerSupport::full(n, d))
        }
        SupportSpec::Explicit(list) => {
            let mut idx = Vec::with_capacity(list.len());
            for (i, e) in list.iter().enumerate() {
                if e.len() != n {
                    return Err(schema(
                        format!("support[{i}]"),
                        format!("exponent has {} entries, expected {n}", e.len()),
                    ));
                }
                idx.push(MultiIndex::new(e.clone()));
            }
            PowerSupport::new(n, idx).map_err(|e| schema("support", e.to_string()))
        }
    }
}

fn unused<T>(field: &Option<T>, name: &str, mode: Mode) -> Result<(), ProblemError> {
    if field.is_some() {
        return Err(schema(name, format!("not used by mode {}", mode.as_str())));
    }
    Ok(())
}

fn required<'a, T>(field: &'a Option<T>, name: &str, mode: Mode) -> Result<&'a T, ProblemError> {
    field
        .as_ref()
        .ok_or_else(|| schema(name, format!("required by mode {}", mode.as_str())))
}

/// Parse and validate a problem file.
pub fn parse_problem(text: &str) -> Result<Problem, ProblemError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| ProblemError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(file)
}

pub fn validate(file: ProblemFile) -> Result<Problem, ProblemError> {
    if file.version != PROBLEM_VERSION {
        return Err(schema(
            "version",
            format!("unsupported version {}, expected {PROBLEM_VERSION}", file.version),
        ));
    }
    let n = file.variables;
    if n == 0 {
        return Err(schema("variables", "must be at least 1"));
    }
    let mode = file.mode;
    let eqs = file
        .set
        .equalities
        .iter()
        .enumerate()
        .map(|(i, s)| poly(s, n, &format!("set.equalities[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let ineqs = file
        .set
        .inequalities
        .iter()
        .enumerate()
        .map(|(i, s)| poly(s, n, &format!("set.inequalities[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut set = SemialgebraicSet::new(n, eqs, ineqs).map_err(|e| schema("set", e.to_string()))?;
    set.closed_at_infinity = file.set.closed_at_infinity;

    let mut row_of = Vec::new();
    let (task, spec) = match mode {
        Mode::Gtmp => {
            unused(&file.tensor, "tensor", mode)?;
            unused(&file.y, "y", mode)?;
            unused(&file.f, "f", mode)?;
            unused(&file.g, "g", mode)?;
            let sup = support(required(&file.support, "support", mode)?, n)?;
            if file.rows.is_empty() {
                return Err(schema("rows", "at least one row is required"));
            }
            let mut polys = Vec::new();
            let mut rhs = Vec::new();
            for rel in [Relation::Eq, Relation::Ge] {
                for (i, r) in file.rows.iter().enumerate().filter(|(_, r)| r.rel == rel) {
                    if !r.rhs.is_finite() {
                        return Err(schema(format!("rows[{i}].rhs"), "must be finite"));
                    }
                    polys.push(poly(&r.poly, n, &format!("rows[{i}].poly"))?);
                    rhs.push(r.rhs);
                    row_of.push(i);
                }
            }
            let m1 = file.rows.iter().filter(|r| r.rel == Relation::Eq).count();
            let spec =
                MomentProblemSpec::new(set.clone(), sup, polys, rhs, m1).map_err(|e| schema("rows", e.to_string()))?;
            (Task::Gtmp, Some(spec))
        }
        Mode::TensorPsop | Mode::TensorScp => {
            unused(&file.support, "support", mode)?;
            unused(&file.y, "y", mode)?;
            unused(&file.f, "f", mode)?;
            unused(&file.g, "g", mode)?;
            if !file.rows.is_empty() {
                return Err(schema("rows", format!("not used by mode {}", mode.as_str())));
            }
            let scp = mode == Mode::TensorScp;
            let expected = if scp {
                SemialgebraicSet::nonnegative_orthant(n)
            } else {
                SemialgebraicSet::whole_space(n)
            };
            if !file.set.equalities.is_empty() || (!file.set.inequalities.is_empty() && set != expected) {
                return Err(schema(
                    "set",
                    format!("mode {} fixes the set; leave it empty", mode.as_str()),
                ));
            }
            set = expected;
            set.closed_at_infinity = file.set.closed_at_infinity;
            let ts = required(&file.tensor, "tensor", mode)?;
            if ts.order == 0 {
                return Err(schema("tensor.order", "must be at least 1"));
            }
            let tensor = SymmetricTensor::from_coords(ts.order, n + 1, &ts.entries)
                .map_err(|e| schema("tensor.entries", e.to_string()))?;
            let spec = MomentProblemSpec::from_tms(set.clone(), &tensor_to_tms(&tensor))
                .map_err(|e| schema("tensor", e.to_string()))?;
            row_of = (0..spec.a_polys.len()).collect();
            (Task::Tensor { tensor, scp }, Some(spec))
        }
        Mode::ConeMember => {
            unused(&file.tensor, "tensor", mode)?;
            unused(&file.f, "f", mode)?;
            unused(&file.g, "g", mode)?;
            if !file.rows.is_empty() {
                return Err(schema("rows", format!("not used by mode {}", mode.as_str())));
            }
            let sup = support(required(&file.support, "support", mode)?, n)?;
            let vals = required(&file.y, "y", mode)?;
            if vals.len() != sup.len() {
                return Err(schema(
                    "y",
                    format!("{} values for a support of size {}", vals.len(), sup.len()),
                ));
            }
            // Values follow the file's support order; the support itself is
            // stored sorted.
            let listed: Vec<MultiIndex> = match required(&file.support, "support", mode)? {
                SupportSpec::Explicit(list) => list.iter().map(|e| MultiIndex::new(e.clone())).collect(),
                SupportSpec::Full(_) => sup.indices().to_vec(),
            };
            let mut sorted = vec![0.0; sup.len()];
            for (alpha, v) in listed.iter().zip(vals) {
                sorted[sup.position(alpha).expect("listed index")] = *v;
            }
            let y = Tms::new(sup, sorted).map_err(|e| schema("y", e.to_string()))?;
            let spec = MomentProblemSpec::from_tms(set.clone(), &y).map_err(|e| schema("y", e.to_string()))?;
            row_of = (0..spec.a_polys.len()).collect();
            (Task::Cone { y }, Some(spec))
        }
        Mode::Ratopt => {
            unused(&file.support, "support", mode)?;
            unused(&file.tensor, "tensor", mode)?;
            unused(&file.y, "y", mode)?;
            if !file.rows.is_empty() {
                return Err(schema("rows", format!("not used by mode {}", mode.as_str())));
            }
            let f = poly(required(&file.f, "f", mode)?, n, "f")?;
            let g = poly(required(&file.g, "g", mode)?, n, "g")?;
            (Task::Ratopt { f, g }, None)
        }
    };
    Ok(Problem {
        file,
        set,
        task,
        spec,
        row_of,
    })
}
