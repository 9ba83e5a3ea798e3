//! Open-loop certificates: positivity checks, LP stability tests with a
//! common linear copositive Lyapunov function, Perron radii, and interval
//! matrix verdicts.
//!
//! Both LP variants search for `p > 0` shared by every rule matrix:
//!
//! * [`StabilityVariant::Lp1`]: `p'(A_i - I) < 0` (row form),
//! * [`StabilityVariant::Lp2`]: `(A_i - I)p < 0` (column form).
//!
//! Strictness is handled by maximizing a margin `eps` under the
//! normalization `eps <= p <= 1`, `0 <= eps <= 1`; the family is accepted
//! exactly when the optimal margin clears [`lp::margin_threshold`]. The two
//! variants are dual in the sense that LP1 on `{A_i}` builds literally the
//! same rows as LP2 on `{A_i'}`, so their margins and witnesses coincide
//! bit for bit.

use thiserror::Error;

use crate::linalg::{self, is_nonneg, LinalgError};
use crate::lp::{self, Bounds, LpProblem, LpStatus, Relation};
use crate::model::{check_model_positivity, FuzzyModel, IntervalMatrix};
use crate::{Feasibility, Mat, Vec64};

/// Which side of the rule matrices the common Lyapunov vector acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVariant {
    /// `p'(A_i - I) < 0`.
    Lp1,
    /// `(A_i - I)p < 0`.
    Lp2,
}

impl std::fmt::Display for StabilityVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityVariant::Lp1 => "LP1",
            StabilityVariant::Lp2 => "LP2",
        })
    }
}

/// Witness returned by a feasible stability LP.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    /// Lyapunov vector, normalized into `[margin, 1]^n`.
    pub p: Vec64,
    /// Optimal strictness margin of the normalized LP.
    pub margin: f64,
}

/// Full outcome of a stability test over one matrix family.
#[derive(Debug, Clone)]
pub struct StabilityAnalysis {
    pub variant: StabilityVariant,
    pub verdict: Feasibility<StabilityCertificate>,
    /// Optimal margin whenever the LP solved, even on an infeasible verdict
    /// (then it sits at or below the acceptance threshold).
    pub margin: Option<f64>,
    /// Non-fatal observations, e.g. the family is not nonnegative so the
    /// copositive certificate does not imply stability for it.
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("matrix family is empty")]
    EmptyFamily,
    #[error("matrix family member {index} is {got}, expected {expected}")]
    FamilyShape {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("stability LP ended with status {status:?}")]
    Solver { status: LpStatus },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn family_dimension(mats: &[Mat]) -> Result<usize, AnalysisError> {
    let first = mats.first().ok_or(AnalysisError::EmptyFamily)?;
    if !first.is_square() {
        return Err(AnalysisError::FamilyShape {
            index: 0,
            expected: "square".into(),
            got: format!("{}x{}", first.rows(), first.cols()),
        });
    }
    let n = first.rows();
    for (i, m) in mats.iter().enumerate().skip(1) {
        if m.rows() != n || m.cols() != n {
            return Err(AnalysisError::FamilyShape {
                index: i,
                expected: format!("{n}x{n}"),
                got: format!("{}x{}", m.rows(), m.cols()),
            });
        }
    }
    Ok(n)
}

/// Margin LP for a common linear copositive Lyapunov vector over `mats`.
///
/// Variables are `p_1..p_n` then `eps`; the objective maximizes `eps`.
/// Rows come in rule order: for each matrix, `n` strictness rows (column
/// index ascending), then `p_j >= eps` for each `j`. This fixed layout makes
/// solves reproducible and lets tests check witnesses row by row.
pub fn stability_margin_lp(
    mats: &[Mat],
    variant: StabilityVariant,
) -> Result<LpProblem, AnalysisError> {
    let n = family_dimension(mats)?;
    let eps = n;
    let mut prob = LpProblem::new(n + 1);
    let mut obj = vec![0.0; n + 1];
    obj[eps] = 1.0;
    prob.set_objective(obj);
    for a in mats {
        for t in 0..n {
            // coefficient of p_h is (A - I)[h][t] (Lp1) or (A - I)[t][h] (Lp2)
            let mut coeffs = vec![0.0; n + 1];
            for h in 0..n {
                let (r, c) = match variant {
                    StabilityVariant::Lp1 => (h, t),
                    StabilityVariant::Lp2 => (t, h),
                };
                coeffs[h] = a[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            coeffs[eps] = 1.0;
            prob.add_constraint(coeffs, Relation::Le, 0.0);
        }
    }
    for j in 0..n {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[j] = 1.0;
        coeffs[eps] = -1.0;
        prob.add_constraint(coeffs, Relation::Ge, 0.0);
    }
    for j in 0..=n {
        prob.set_bounds(j, Bounds::boxed(0.0, 1.0));
    }
    Ok(prob)
}

/// Runs the stability LP over an explicit matrix family.
pub fn certify_matrix_family(
    mats: &[Mat],
    variant: StabilityVariant,
) -> Result<StabilityAnalysis, AnalysisError> {
    let n = family_dimension(mats)?;
    let mut warnings = Vec::new();
    if !mats.iter().all(|m| is_nonneg(m, &0.0)) {
        warnings.push(
            "family has negative entries; the copositive certificate only \
             implies stability for nonnegative dynamics"
                .to_string(),
        );
    }
    let prob = stability_margin_lp(mats, variant)?;
    let sol = lp::solve(&prob);
    if sol.status != LpStatus::Optimal {
        return Err(AnalysisError::Solver { status: sol.status });
    }
    let margin = sol.objective_value;
    let verdict = if margin > lp::margin_threshold() {
        let p = Vec64::new(sol.values[..n].to_vec())?;
        Feasibility::Feasible(StabilityCertificate { p, margin })
    } else {
        Feasibility::Infeasible
    };
    Ok(StabilityAnalysis {
        variant,
        verdict,
        margin: Some(margin),
        warnings,
    })
}

/// Certifies open-loop stability of a fuzzy model. Interval rules are tested
/// at their upper bound, which dominates every member of a proper interval;
/// improper intervals and positivity violations are flagged as warnings.
pub fn certify_stability(
    model: &FuzzyModel,
    variant: StabilityVariant,
) -> Result<StabilityAnalysis, AnalysisError> {
    let mats: Vec<Mat> = model.rules.iter().map(|r| r.a.upper.clone()).collect();
    let mut analysis = certify_matrix_family(&mats, variant)?;
    let positivity = check_model_positivity(model);
    if !positivity.positive {
        let first = &positivity.violations[0];
        analysis.warnings.push(format!(
            "model is not positive ({} violating entries; first: {})",
            positivity.violations.len(),
            first
        ));
    }
    for (i, rule) in model.rules.iter().enumerate() {
        if !rule.a.is_proper() {
            analysis.warnings.push(format!(
                "rule {} has crossed interval bounds (A_lower > A_upper somewhere); \
                 the upper-bound test may not cover the family",
                i + 1
            ));
        }
    }
    Ok(analysis)
}

/// Transposes every member; LP1 over the result equals LP2 over the input.
pub fn transpose_family(mats: &[Mat]) -> Vec<Mat> {
    mats.iter().map(Mat::transpose).collect()
}

/// Spectral radius verdict of a single nonnegative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurCertificate {
    pub radius: f64,
    /// `radius < 1`.
    pub schur: bool,
}

/// Computes the Perron radius and compares it against 1.
pub fn schur_certificate(a: &Mat) -> Result<SchurCertificate, AnalysisError> {
    let radius = linalg::perron_radius(a)?;
    Ok(SchurCertificate {
        radius,
        schur: radius < 1.0,
    })
}

/// Perron radius of each family member, in order.
pub fn spectral_radii(mats: &[Mat]) -> Result<Vec<f64>, AnalysisError> {
    mats.iter()
        .map(|m| Ok(linalg::perron_radius(m)?))
        .collect()
}

/// Combined positivity/Schur verdict for an interval matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalVerdict {
    PositiveAndSchur,
    NotPositive,
    NotSchur,
    NeitherPositiveNorSchur,
}

#[derive(Debug, Clone)]
pub struct IntervalCheckReport {
    pub lower_nonneg: bool,
    pub upper_nonneg: bool,
    /// Perron radius of the upper bound; absent when the upper bound has
    /// negative entries, since the radius test then says nothing about the
    /// family.
    pub upper_radius: Option<f64>,
    pub verdict: IntervalVerdict,
}

/// Decides whether every member of `[lower, upper]` is a positive Schur
/// matrix: the lower bound must be nonnegative and the upper bound must have
/// Perron radius below 1. An upper bound with a negative entry pins that
/// entry negative in every member, so the family cannot be positive.
pub fn interval_check(interval: &IntervalMatrix) -> Result<IntervalCheckReport, AnalysisError> {
    if !interval.lower.is_square() {
        return Err(AnalysisError::FamilyShape {
            index: 0,
            expected: "square".into(),
            got: format!("{}x{}", interval.lower.rows(), interval.lower.cols()),
        });
    }
    let lower_nonneg = is_nonneg(&interval.lower, &0.0);
    let upper_nonneg = is_nonneg(&interval.upper, &0.0);
    if !upper_nonneg {
        return Ok(IntervalCheckReport {
            lower_nonneg,
            upper_nonneg,
            upper_radius: None,
            verdict: IntervalVerdict::NotPositive,
        });
    }
    let radius = linalg::perron_radius(&interval.upper)?;
    let schur = radius < 1.0;
    let verdict = match (lower_nonneg, schur) {
        (true, true) => IntervalVerdict::PositiveAndSchur,
        (false, true) => IntervalVerdict::NotPositive,
        (true, false) => IntervalVerdict::NotSchur,
        (false, false) => IntervalVerdict::NeitherPositiveNorSchur,
    };
    Ok(IntervalCheckReport {
        lower_nonneg,
        upper_nonneg,
        upper_radius: Some(radius),
        verdict,
    })
}
