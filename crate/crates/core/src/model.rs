//! The fuzzy plant description: rule matrices with optional interval bounds
//! on `A`, a premise expression `z = f(x)`, and one membership expression in
//! `z` per rule, plus JSON load/save in a canonical form.
//!
//! Model JSON schema (exact field names):
//!
//! ```json
//! { "n": 2, "m": 1, "l": 1,
//!   "premise": "sin(x1)",
//!   "z_range": [-1.0, 1.0],
//!   "rules": [
//!     { "membership": "(1+z)/2",
//!       "A": [[0.6, 0.6], [0.6, 0.4]],
//!       "B": [[0.1], [0.2]],
//!       "C": [[0.2, 0.5]],
//!       "D": [[0.1]] } ] }
//! ```
//!
//! A rule carries either an exact `"A"` or the pair `"A_lower"`/`"A_upper"`;
//! `B`, `C`, `D` are always exact. `z_range` is optional (default `[-1, 1]`)
//! and is the interval the membership sanity grid samples.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr, ExprError};
use crate::linalg::{is_nonneg, LinalgError, Matrix};
use crate::{Mat, Vec64};

/// Entrywise interval `[lower, upper]` around a matrix. The bound order is
/// reported, not enforced: `is_proper` tells callers whether every lower
/// entry is at most its upper partner, so crossed bounds in input data stay
/// loadable and visible instead of being rejected at the door.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    pub lower: Mat,
    pub upper: Mat,
}

impl IntervalMatrix {
    pub fn new(lower: Mat, upper: Mat) -> Result<Self, LinalgError> {
        if lower.rows() != upper.rows() || lower.cols() != upper.cols() {
            return Err(LinalgError::ShapeMismatch {
                context: "interval bounds",
                left: format!("{}x{}", lower.rows(), lower.cols()),
                right: format!("{}x{}", upper.rows(), upper.cols()),
            });
        }
        Ok(Self { lower, upper })
    }

    /// Degenerate interval `[m, m]` for an exactly known matrix.
    pub fn exact(m: Mat) -> Self {
        Self {
            lower: m.clone(),
            upper: m,
        }
    }

    /// True when `lower <= upper` holds entrywise.
    pub fn is_proper(&self) -> bool {
        self.lower
            .entries()
            .zip(self.upper.entries())
            .all(|(l, u)| l <= u)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }
}

/// One fuzzy rule: local dynamics plus its membership expression in `z`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub membership_src: String,
    pub membership: Expr,
    pub a: IntervalMatrix,
    /// True when the rule was given a single exact `A`.
    pub a_exact: bool,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

/// The plant: `x(k+1) = sum_i h_i(z) (A_i x + B_i u)`,
/// `y(k) = sum_i h_i(z) (C_i x + D_i u)`, with `z` given by the premise
/// expression and `h_i` by the per-rule membership expressions.
#[derive(Debug, Clone)]
pub struct FuzzyModel {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub premise_src: String,
    pub premise: Expr,
    /// Explicit membership validation range, when the file provided one.
    pub z_range: Option<(f64, f64)>,
    pub rules: Vec<Rule>,
}

pub const DEFAULT_Z_RANGE: (f64, f64) = (-1.0, 1.0);
/// Points in the membership sanity grid over the z range.
pub const MEMBERSHIP_GRID: usize = 101;
/// Raw memberships may undershoot zero by at most this much.
pub const MEMBERSHIP_NEG_TOL: f64 = 1e-9;
/// Raw memberships must sum to one within this much on the grid.
pub const PARTITION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation in `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("dimension mismatch in `{field}`: expected {expected}, got {got}")]
    Dimension {
        field: String,
        expected: String,
        got: String,
    },
    #[error("bad expression in `{field}`: {source}")]
    BadExpr {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("membership evaluation failed: {0}")]
    MembershipEval(#[source] ExprError),
    #[error("rule {rule} membership is {value} at z={z}, below -{tol}")]
    NegativeMembership {
        rule: usize,
        value: f64,
        z: f64,
        tol: f64,
    },
    #[error("memberships sum to {sum} at z={z}, not 1")]
    PartitionViolation { z: f64, sum: f64 },
    #[error("memberships sum to {sum} at z={z}; cannot renormalize")]
    DegenerateSum { z: f64, sum: f64 },
    #[error("state vector has dimension {got}, model has n={expected}")]
    StateDim { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    m: usize,
    l: usize,
    premise: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_range: Option<[f64; 2]>,
    rules: Vec<RuleFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    membership: String,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A_lower", skip_serializing_if = "Option::is_none")]
    a_lower: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A_upper", skip_serializing_if = "Option::is_none")]
    a_upper: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

fn matrix_from_json(
    field: String,
    rows: &[Vec<f64>],
    want_rows: usize,
    want_cols: usize,
) -> Result<Mat, ModelError> {
    let got = format!(
        "{}x{}",
        rows.len(),
        rows.first().map(|r| r.len()).unwrap_or(0)
    );
    let m = Matrix::from_rows(rows).map_err(|e| match e {
        LinalgError::NonFinite { row, col } => ModelError::Schema {
            field: field.clone(),
            reason: format!("entry ({},{}) is not finite", row + 1, col + 1),
        },
        _ => ModelError::Dimension {
            field: field.clone(),
            expected: format!("{want_rows}x{want_cols}"),
            got: got.clone(),
        },
    })?;
    if m.rows() != want_rows || m.cols() != want_cols {
        return Err(ModelError::Dimension {
            field,
            expected: format!("{want_rows}x{want_cols}"),
            got,
        });
    }
    Ok(m)
}

impl FuzzyModel {
    /// Parses and validates a model from its JSON text.
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file_form(file)
    }

    fn from_file_form(file: ModelFile) -> Result<Self, ModelError> {
        let (n, m, l) = (file.n, file.m, file.l);
        for (name, v) in [("n", n), ("m", m), ("l", l)] {
            if v == 0 {
                return Err(ModelError::Schema {
                    field: name.into(),
                    reason: "must be a positive integer".into(),
                });
            }
        }
        if file.rules.is_empty() {
            return Err(ModelError::Schema {
                field: "rules".into(),
                reason: "at least one rule is required".into(),
            });
        }
        let premise = expr::parse(&file.premise).map_err(|e| ModelError::BadExpr {
            field: "premise".into(),
            source: e,
        })?;
        if premise.references_z() {
            return Err(ModelError::Schema {
                field: "premise".into(),
                reason: "the premise defines z and cannot reference it".into(),
            });
        }
        if let Some(max) = premise.max_var_index() {
            if max >= n {
                return Err(ModelError::Schema {
                    field: "premise".into(),
                    reason: format!("references x{} but n={}", max + 1, n),
                });
            }
        }
        let z_range = match file.z_range {
            None => None,
            Some([lo, hi]) => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(ModelError::Schema {
                        field: "z_range".into(),
                        reason: "needs finite bounds with lo < hi".into(),
                    });
                }
                Some((lo, hi))
            }
        };

        let mut rules = Vec::with_capacity(file.rules.len());
        for (i, rf) in file.rules.iter().enumerate() {
            let membership = expr::parse(&rf.membership).map_err(|e| ModelError::BadExpr {
                field: format!("rules[{i}].membership"),
                source: e,
            })?;
            if membership.max_var_index().is_some() {
                return Err(ModelError::Schema {
                    field: format!("rules[{i}].membership"),
                    reason: "memberships are functions of z only".into(),
                });
            }
            let (a, a_exact) = match (&rf.a, &rf.a_lower, &rf.a_upper) {
                (Some(a), None, None) => {
                    let a = matrix_from_json(format!("rules[{i}].A"), a, n, n)?;
                    (IntervalMatrix::exact(a), true)
                }
                (None, Some(lo), Some(hi)) => {
                    let lo = matrix_from_json(format!("rules[{i}].A_lower"), lo, n, n)?;
                    let hi = matrix_from_json(format!("rules[{i}].A_upper"), hi, n, n)?;
                    (IntervalMatrix::new(lo, hi)?, false)
                }
                _ => {
                    return Err(ModelError::Schema {
                        field: format!("rules[{i}].A"),
                        reason: "give either `A` or both `A_lower` and `A_upper`".into(),
                    });
                }
            };
            let b = matrix_from_json(format!("rules[{i}].B"), &rf.b, n, m)?;
            let c = matrix_from_json(format!("rules[{i}].C"), &rf.c, l, n)?;
            let d = matrix_from_json(format!("rules[{i}].D"), &rf.d, l, m)?;
            rules.push(Rule {
                membership_src: rf.membership.clone(),
                membership,
                a,
                a_exact,
                b,
                c,
                d,
            });
        }

        let model = FuzzyModel {
            n,
            m,
            l,
            premise_src: file.premise,
            premise,
            z_range,
            rules,
        };
        model.validate_memberships()?;
        Ok(model)
    }

    /// Samples the membership expressions on an equispaced grid over the z
    /// range and checks they form a partition of unity within tolerance.
    fn validate_memberships(&self) -> Result<(), ModelError> {
        let (lo, hi) = self.z_range.unwrap_or(DEFAULT_Z_RANGE);
        for k in 0..MEMBERSHIP_GRID {
            let z = lo + (hi - lo) * k as f64 / (MEMBERSHIP_GRID - 1) as f64;
            let mut sum = 0.0;
            for (i, rule) in self.rules.iter().enumerate() {
                let v = expr::eval(&rule.membership, &[], z)
                    .map_err(ModelError::MembershipEval)?;
                if v < -MEMBERSHIP_NEG_TOL {
                    return Err(ModelError::NegativeMembership {
                        rule: i + 1,
                        value: v,
                        z,
                        tol: MEMBERSHIP_NEG_TOL,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PARTITION_TOL {
                return Err(ModelError::PartitionViolation { z, sum });
            }
        }
        Ok(())
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// True when any rule carries a nondegenerate interval on `A`.
    pub fn has_intervals(&self) -> bool {
        self.rules.iter().any(|r| !r.a_exact)
    }

    /// JSON text in canonical form: keys sorted, shortest float spelling,
    /// two-space indentation, trailing newline.
    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            n: self.n,
            m: self.m,
            l: self.l,
            premise: self.premise_src.clone(),
            z_range: self.z_range.map(|(lo, hi)| [lo, hi]),
            rules: self
                .rules
                .iter()
                .map(|r| RuleFile {
                    membership: r.membership_src.clone(),
                    a: r.a_exact.then(|| r.a.lower.to_rows()),
                    a_lower: (!r.a_exact).then(|| r.a.lower.to_rows()),
                    a_upper: (!r.a_exact).then(|| r.a.upper.to_rows()),
                    b: r.b.to_rows(),
                    c: r.c.to_rows(),
                    d: r.d.to_rows(),
                })
                .collect(),
        };
        let value = serde_json::to_value(&file).expect("model serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("model serializes");
        out.push('\n');
        out
    }
}

/// Loads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<FuzzyModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    FuzzyModel::from_json_str(&text)
}

/// Writes the canonical JSON form of `model`.
pub fn save_model(model: &FuzzyModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, model.to_json_string()).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Normalized memberships at state `x`: evaluates the premise, then each
/// rule's membership, clamps negative rounding dust to zero, and divides by
/// the sum so the result is a partition of unity to machine precision.
pub fn evaluate_memberships(model: &FuzzyModel, x: &Vec64) -> Result<Vec64, ModelError> {
    if x.dim() != model.n {
        return Err(ModelError::StateDim {
            expected: model.n,
            got: x.dim(),
        });
    }
    let z = expr::eval(&model.premise, x.as_slice(), 0.0).map_err(ModelError::MembershipEval)?;
    let mut raw = Vec::with_capacity(model.rules.len());
    for (i, rule) in model.rules.iter().enumerate() {
        let v = expr::eval(&rule.membership, x.as_slice(), z)
            .map_err(ModelError::MembershipEval)?;
        if v < -MEMBERSHIP_NEG_TOL {
            return Err(ModelError::NegativeMembership {
                rule: i + 1,
                value: v,
                z,
                tol: MEMBERSHIP_NEG_TOL,
            });
        }
        raw.push(v.max(0.0));
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 1e-12 {
        return Err(ModelError::DegenerateSum { z, sum });
    }
    for v in raw.iter_mut() {
        *v /= sum;
    }
    Ok(Vec64::new(raw).expect("normalized memberships are finite"))
}

/// Which per-rule matrix a blend ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFamily {
    ALower,
    AUpper,
    B,
    C,
    D,
}

impl fmt::Display for MatrixFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixFamily::ALower => "A_lower",
            MatrixFamily::AUpper => "A_upper",
            MatrixFamily::B => "B",
            MatrixFamily::C => "C",
            MatrixFamily::D => "D",
        })
    }
}

/// Membership-weighted blend `sum_i h_i M_i` over the selected family.
/// `h` must be a valid membership vector for the model.
pub fn blended_matrices(model: &FuzzyModel, h: &Vec64, which: MatrixFamily) -> Mat {
    assert_eq!(h.dim(), model.rules.len(), "membership count mismatch");
    fn pick(rule: &Rule, which: MatrixFamily) -> &Mat {
        match which {
            MatrixFamily::ALower => &rule.a.lower,
            MatrixFamily::AUpper => &rule.a.upper,
            MatrixFamily::B => &rule.b,
            MatrixFamily::C => &rule.c,
            MatrixFamily::D => &rule.d,
        }
    }
    let first = pick(&model.rules[0], which);
    let mut acc = Matrix::zeros(first.rows(), first.cols());
    for (i, rule) in model.rules.iter().enumerate() {
        acc = crate::linalg::mat_add(&acc, &pick(rule, which).scale(&h[i]))
            .expect("family shapes agree");
    }
    acc
}

/// One entry that breaks nonnegativity somewhere in the model.
#[derive(Debug, Clone)]
pub struct PositivityViolation {
    /// 1-based rule number.
    pub rule: usize,
    /// Family name: "A", "B", "C" or "D".
    pub family: &'static str,
    /// 1-based entry coordinates.
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl fmt::Display for PositivityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule {}, {}, entry ({},{}) = {}",
            self.rule, self.family, self.row, self.col, self.value
        )
    }
}

/// Per-rule nonnegativity verdicts for each matrix family.
#[derive(Debug, Clone)]
pub struct RulePositivity {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
}

#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub rules: Vec<RulePositivity>,
    pub violations: Vec<PositivityViolation>,
    /// Conjunction over all rules and families.
    pub positive: bool,
}

/// Checks every rule matrix for entrywise nonnegativity (exact, tol = 0).
/// For interval rules the `A` check applies to the lower bound: when it is
/// nonnegative, so is everything above it.
pub fn check_model_positivity(model: &FuzzyModel) -> PositivityReport {
    let zero = 0.0;
    let mut rules = Vec::with_capacity(model.rules.len());
    let mut violations = Vec::new();
    for (i, rule) in model.rules.iter().enumerate() {
        let mut record = |mat: &Mat, family: &'static str| -> bool {
            let ok = is_nonneg(mat, &zero);
            if !ok {
                for r in 0..mat.rows() {
                    for c in 0..mat.cols() {
                        if mat[(r, c)] < 0.0 {
                            violations.push(PositivityViolation {
                                rule: i + 1,
                                family,
                                row: r + 1,
                                col: c + 1,
                                value: mat[(r, c)],
                            });
                        }
                    }
                }
            }
            ok
        };
        let a = record(&rule.a.lower, "A");
        let b = record(&rule.b, "B");
        let c = record(&rule.c, "C");
        let d = record(&rule.d, "D");
        rules.push(RulePositivity { a, b, c, d });
    }
    let positive = rules.iter().all(|r| r.a && r.b && r.c && r.d);
    PositivityReport {
        rules,
        violations,
        positive,
    }
}
