//! State-feedback design for positive fuzzy plants.
//!
//! The design problem is one LP over the Lyapunov vector `p`, per-rule
//! decision columns `xi_t^j` (an `m`-vector per controller rule `j` and
//! state index `t`), and a strictness margin `eps`:
//!
//! ```text
//! maximize eps subject to
//!   (S) (A+_i - I)p + B_i sum_t xi_t^j <= -eps*1      for all i, j
//!   (P) a-_i[h,t]*p_t + (row h of B_i)*xi_t^j >= 0    for all i, j, h, t
//!   (N) eps*1 <= p <= 1,  0 <= eps <= 1
//! ```
//!
//! where `A+`/`a-` are both `A` in [`SynthesisMode::Standard`], the upper
//! and lower interval bounds in [`SynthesisMode::Robust`], and in
//! [`SynthesisMode::PositiveInput`] the (P) rows are replaced by bounds
//! `xi >= 0` (sound only for nonnegative `A`, `B`, which is checked).
//! Gains come back as `K_j` column `t` `= xi_t^j / p_t`; the closed loop
//! `x+ = sum_ij h_i h_j (A_i + B_i K_j) x` is then nonnegative with
//! `(A_i + B_i K_j - I) p < 0` on every vertex pair, which is exactly what
//! [`verify_closed_loop`] re-checks at the matrix level.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{interval_check, AnalysisError, IntervalVerdict};
use crate::linalg::{is_nonneg, mat_add, mat_mul, LinalgError, Matrix};
use crate::lp::{self, Bounds, LpProblem, LpStatus, Relation};
use crate::model::{FuzzyModel, IntervalMatrix};
use crate::{Feasibility, Mat, Vec64};

/// Entries of a closed-loop vertex no lower than this are treated as zero
/// when re-checking positivity: gain reconstruction divides and re-multiplies
/// by `p`, which can leave rounding dust of either sign on entries the LP
/// pinned to exactly zero.
pub const POSITIVITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// Exact plant matrices, sign-unrestricted input.
    Standard,
    /// Adds `xi >= 0`, forcing `K_j >= 0` and hence `u(k) >= 0`; requires a
    /// nonnegative plant.
    PositiveInput,
    /// Interval plant: stabilize the upper bound, keep the lower bound
    /// nonnegative.
    Robust,
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisMode::Standard => "standard",
            SynthesisMode::PositiveInput => "positive-input",
            SynthesisMode::Robust => "robust",
        })
    }
}

impl FromStr for SynthesisMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(SynthesisMode::Standard),
            "positive-input" => Ok(SynthesisMode::PositiveInput),
            "robust" => Ok(SynthesisMode::Robust),
            other => Err(format!(
                "unknown mode `{other}` (expected standard, positive-input or robust)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("{mode} mode needs exact `A` matrices; this model has interval bounds — use robust mode")]
    ModeNeedsExact { mode: SynthesisMode },
    #[error("robust mode needs interval bounds on `A`; this model is exact — use standard mode")]
    ModeNeedsIntervals,
    #[error("positive-input mode needs a nonnegative plant: {violation}")]
    PositiveInputNeedsNonneg { violation: String },
    #[error("expected {expected} gain matrices (one per rule), got {got}")]
    GainCount { expected: usize, got: usize },
    #[error("gain matrix {index} is {got}, expected {expected}")]
    GainShape {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("cannot divide by p[{index}] = {value}; the scaling vector must be strictly positive")]
    NonPositiveScale { index: usize, value: f64 },
    #[error("design LP ended with status {status:?}")]
    Solver { status: LpStatus },
    #[error("bad parameter path `{path}`: {reason}")]
    BadPath { path: String, reason: String },
    #[error("a sweep takes 1 or 2 parameters, got {got}")]
    ParamCount { got: usize },
    #[error("bad sweep range {start}:{stop}:{step}: {reason}")]
    BadRange {
        start: f64,
        stop: f64,
        step: f64,
        reason: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid gains JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// A solved design: the Lyapunov vector, the raw decision columns, and the
/// reconstructed gain matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    /// Strictly positive, normalized into `[margin, 1]^n`.
    pub p: Vec64,
    /// One `m x n` matrix per controller rule; column `t` is `xi_t^j`.
    pub xi: Vec<Mat>,
    /// One `m x n` gain per rule; column `t` equals `xi_t^j / p_t`.
    pub gains: Vec<Mat>,
    /// Optimal strictness margin.
    pub margin: f64,
}

/// Outcome of [`synthesize`], including how the mode was chosen and any
/// non-fatal observations about the model.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub mode: SynthesisMode,
    /// True when the mode was inferred from the model rather than requested.
    pub auto_mode: bool,
    pub verdict: Feasibility<SynthesisResult>,
    /// Optimal margin whenever the LP solved, even on an infeasible verdict.
    pub margin: Option<f64>,
    pub warnings: Vec<String>,
}

/// The design LP plus the index bookkeeping tests and reports need.
/// Variables are `p_1..p_n`, then `xi` grouped by rule-major order
/// (`xi_index`), then `eps` last. Rows are the (S) block, the (P) block
/// (empty in positive-input mode), then the `p_j >= eps` floor rows; each
/// block enumerates rule pairs `(i, j)` row-major.
#[derive(Debug)]
pub struct SynthesisLp {
    pub problem: LpProblem,
    pub mode: SynthesisMode,
    pub num_states: usize,
    pub num_inputs: usize,
    pub num_rules: usize,
    pub stab_rows: Range<usize>,
    pub pos_rows: Range<usize>,
    pub floor_rows: Range<usize>,
}

impl SynthesisLp {
    pub fn p_index(&self, t: usize) -> usize {
        t
    }

    pub fn xi_index(&self, j: usize, t: usize, q: usize) -> usize {
        self.num_states + j * (self.num_states * self.num_inputs) + t * self.num_inputs + q
    }

    pub fn eps_index(&self) -> usize {
        self.num_states + self.num_rules * self.num_states * self.num_inputs
    }
}

fn check_mode_fits(model: &FuzzyModel, mode: SynthesisMode) -> Result<(), SynthesisError> {
    match mode {
        SynthesisMode::Robust => {
            if !model.has_intervals() {
                return Err(SynthesisError::ModeNeedsIntervals);
            }
        }
        SynthesisMode::Standard | SynthesisMode::PositiveInput => {
            if model.has_intervals() {
                return Err(SynthesisError::ModeNeedsExact { mode });
            }
        }
    }
    Ok(())
}

/// Picks the mode when none was requested: robust for interval models,
/// standard otherwise. Returns `(mode, auto)` where `auto` records whether
/// the choice was inferred.
pub fn resolve_mode(
    model: &FuzzyModel,
    requested: Option<SynthesisMode>,
) -> Result<(SynthesisMode, bool), SynthesisError> {
    match requested {
        Some(mode) => {
            check_mode_fits(model, mode)?;
            Ok((mode, false))
        }
        None => {
            let mode = if model.has_intervals() {
                SynthesisMode::Robust
            } else {
                SynthesisMode::Standard
            };
            Ok((mode, true))
        }
    }
}

/// Builds the maximize-margin design LP for an already validated mode.
pub fn build_synthesis_lp(
    model: &FuzzyModel,
    mode: SynthesisMode,
) -> Result<SynthesisLp, SynthesisError> {
    check_mode_fits(model, mode)?;
    let (n, m, r) = (model.n, model.m, model.rules.len());
    let num_vars = n + r * n * m + 1;
    let eps = num_vars - 1;
    let xi_index = |j: usize, t: usize, q: usize| n + j * (n * m) + t * m + q;

    let mut problem = LpProblem::new(num_vars);
    let mut obj = vec![0.0; num_vars];
    obj[eps] = 1.0;
    problem.set_objective(obj);

    // (S): row h of (A+_i - I)p + B_i sum_t xi_t^j <= -eps
    for rule_i in &model.rules {
        let a_up = &rule_i.a.upper;
        for j in 0..r {
            for h in 0..n {
                let mut coeffs = vec![0.0; num_vars];
                for t in 0..n {
                    coeffs[t] = a_up[(h, t)] - if h == t { 1.0 } else { 0.0 };
                }
                for t in 0..n {
                    for q in 0..m {
                        coeffs[xi_index(j, t, q)] = rule_i.b[(h, q)];
                    }
                }
                coeffs[eps] = 1.0;
                problem.add_constraint(coeffs, Relation::Le, 0.0);
            }
        }
    }
    let stab_rows = 0..r * r * n;

    // (P): entry (h, t) of the closed loop stays nonnegative, scaled by p_t
    let mut pos_count = 0;
    if mode != SynthesisMode::PositiveInput {
        for rule_i in &model.rules {
            let a_lo = &rule_i.a.lower;
            for j in 0..r {
                for h in 0..n {
                    for t in 0..n {
                        let mut coeffs = vec![0.0; num_vars];
                        coeffs[t] = a_lo[(h, t)];
                        for q in 0..m {
                            coeffs[xi_index(j, t, q)] = rule_i.b[(h, q)];
                        }
                        problem.add_constraint(coeffs, Relation::Ge, 0.0);
                    }
                }
            }
        }
        pos_count = r * r * n * n;
    }
    let pos_rows = stab_rows.end..stab_rows.end + pos_count;

    // (N): p_j >= eps as rows; the box parts go through variable bounds
    for jj in 0..n {
        let mut coeffs = vec![0.0; num_vars];
        coeffs[jj] = 1.0;
        coeffs[eps] = -1.0;
        problem.add_constraint(coeffs, Relation::Ge, 0.0);
    }
    let floor_rows = pos_rows.end..pos_rows.end + n;

    for t in 0..n {
        problem.set_bounds(t, Bounds::boxed(0.0, 1.0));
    }
    let xi_bounds = if mode == SynthesisMode::PositiveInput {
        Bounds::nonneg()
    } else {
        Bounds::FREE
    };
    for idx in n..eps {
        problem.set_bounds(idx, xi_bounds);
    }
    problem.set_bounds(eps, Bounds::boxed(0.0, 1.0));

    Ok(SynthesisLp {
        problem,
        mode,
        num_states: n,
        num_inputs: m,
        num_rules: r,
        stab_rows,
        pos_rows,
        floor_rows,
    })
}

fn positive_input_precondition(model: &FuzzyModel) -> Result<(), SynthesisError> {
    for (i, rule) in model.rules.iter().enumerate() {
        if !is_nonneg(&rule.a.lower, &0.0) {
            return Err(SynthesisError::PositiveInputNeedsNonneg {
                violation: format!("rule {} has a negative entry in A", i + 1),
            });
        }
        if !is_nonneg(&rule.b, &0.0) {
            return Err(SynthesisError::PositiveInputNeedsNonneg {
                violation: format!("rule {} has a negative entry in B", i + 1),
            });
        }
    }
    Ok(())
}

/// Designs PDC gains for `model`. With `requested = None` the mode follows
/// the model shape (see [`resolve_mode`]). A feasible verdict carries the
/// witness and gains; an infeasible one still reports the optimal margin.
pub fn synthesize(
    model: &FuzzyModel,
    requested: Option<SynthesisMode>,
) -> Result<SynthesisOutcome, SynthesisError> {
    let (mode, auto_mode) = resolve_mode(model, requested)?;
    if mode == SynthesisMode::PositiveInput {
        positive_input_precondition(model)?;
    }
    let mut warnings = Vec::new();
    for (i, rule) in model.rules.iter().enumerate() {
        if !rule.a.is_proper() {
            warnings.push(format!(
                "rule {} has crossed interval bounds (A_lower > A_upper somewhere); \
                 conditions use the bounds as given",
                i + 1
            ));
        }
    }

    let built = build_synthesis_lp(model, mode)?;
    let sol = lp::solve(&built.problem);
    if sol.status != LpStatus::Optimal {
        return Err(SynthesisError::Solver { status: sol.status });
    }
    let margin = sol.objective_value;
    let verdict = if margin > lp::margin_threshold() {
        let (n, m, r) = (built.num_states, built.num_inputs, built.num_rules);
        let p = Vec64::new(sol.values[..n].to_vec())?;
        let mut xi = Vec::with_capacity(r);
        for j in 0..r {
            let mut mat = Matrix::zeros(m, n);
            for t in 0..n {
                for q in 0..m {
                    mat.set(q, t, sol.values[built.xi_index(j, t, q)])?;
                }
            }
            xi.push(mat);
        }
        let gains = reconstruct_gains(&p, &xi)?;
        Feasibility::Feasible(SynthesisResult {
            p,
            xi,
            gains,
            margin,
        })
    } else {
        Feasibility::Infeasible
    };
    Ok(SynthesisOutcome {
        mode,
        auto_mode,
        verdict,
        margin: Some(margin),
        warnings,
    })
}

/// Rescales the decision columns into gains: `K_j` column `t` is
/// `xi_t^j / p_t`. Fails on any `p_t <= 0`.
pub fn reconstruct_gains(p: &Vec64, xi: &[Mat]) -> Result<Vec<Mat>, SynthesisError> {
    let n = p.dim();
    for t in 0..n {
        if p[t] <= 0.0 {
            return Err(SynthesisError::NonPositiveScale {
                index: t,
                value: p[t],
            });
        }
    }
    let mut gains = Vec::with_capacity(xi.len());
    for (j, xi_j) in xi.iter().enumerate() {
        if xi_j.cols() != n {
            return Err(SynthesisError::GainShape {
                index: j,
                expected: format!("{}x{}", xi_j.rows(), n),
                got: format!("{}x{}", xi_j.rows(), xi_j.cols()),
            });
        }
        let mut k = Matrix::zeros(xi_j.rows(), n);
        for q in 0..xi_j.rows() {
            for t in 0..n {
                k.set(q, t, xi_j[(q, t)] / p[t])?;
            }
        }
        gains.push(k);
    }
    Ok(gains)
}

pub(crate) fn check_gain_shapes(model: &FuzzyModel, gains: &[Mat]) -> Result<(), SynthesisError> {
    if gains.len() != model.rules.len() {
        return Err(SynthesisError::GainCount {
            expected: model.rules.len(),
            got: gains.len(),
        });
    }
    for (j, k) in gains.iter().enumerate() {
        if k.rows() != model.m || k.cols() != model.n {
            return Err(SynthesisError::GainShape {
                index: j,
                expected: format!("{}x{}", model.m, model.n),
                got: format!("{}x{}", k.rows(), k.cols()),
            });
        }
    }
    Ok(())
}

/// Closed-loop vertex intervals `[A_lower_i + B_i K_j, A_upper_i + B_i K_j]`
/// for every ordered rule pair, row-major in `(i, j)`; degenerate intervals
/// for exact models.
pub fn closed_loop_vertices(
    model: &FuzzyModel,
    gains: &[Mat],
) -> Result<Vec<IntervalMatrix>, SynthesisError> {
    check_gain_shapes(model, gains)?;
    let mut out = Vec::with_capacity(model.rules.len() * gains.len());
    for rule in &model.rules {
        for k in gains {
            let bk = mat_mul(&rule.b, k)?;
            let lower = mat_add(&rule.a.lower, &bk)?;
            let upper = mat_add(&rule.a.upper, &bk)?;
            out.push(IntervalMatrix::new(lower, upper)?);
        }
    }
    Ok(out)
}

/// One closed-loop vertex pair as checked by [`verify_closed_loop`].
#[derive(Debug, Clone)]
pub struct VertexReport {
    /// 1-based plant rule index `i`.
    pub plant_rule: usize,
    /// 1-based controller rule index `j`.
    pub gain_rule: usize,
    /// Smallest entry of `A_lower_i + B_i K_j` before the tolerance clamp.
    pub min_lower_entry: f64,
    pub verdict: IntervalVerdict,
    /// Perron radius of `A_upper_i + B_i K_j`; absent when that matrix has
    /// entries below `-POSITIVITY_TOL`.
    pub upper_radius: Option<f64>,
    /// Whether `C_i + D_i K_j` is entrywise nonnegative. Informational: it
    /// does not gate the overall verdict.
    pub output_nonneg: bool,
}

/// Matrix-level re-check of a candidate controller.
#[derive(Debug, Clone)]
pub struct ClosedLoopReport {
    pub vertices: Vec<VertexReport>,
    /// True iff every vertex pair came back `PositiveAndSchur`.
    pub pass: bool,
    /// All `C_i + D_i K_j` nonnegative. Informational only.
    pub outputs_nonneg: bool,
}

fn clamp_dust(m: &Mat) -> Result<Mat, LinalgError> {
    let mut out = m.clone();
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            let v = out[(r, c)];
            if (-POSITIVITY_TOL..0.0).contains(&v) {
                out.set(r, c, 0.0)?;
            }
        }
    }
    Ok(out)
}

/// Checks a controller directly on the closed-loop matrices: every vertex
/// pair must have a nonnegative lower bound (within [`POSITIVITY_TOL`]) and
/// an upper bound with Perron radius below 1.
pub fn verify_closed_loop(
    model: &FuzzyModel,
    gains: &[Mat],
) -> Result<ClosedLoopReport, SynthesisError> {
    let intervals = closed_loop_vertices(model, gains)?;
    let r = gains.len();
    let mut vertices = Vec::with_capacity(intervals.len());
    for (idx, interval) in intervals.iter().enumerate() {
        let (i, j) = (idx / r, idx % r);
        let min_lower_entry = interval.lower.min_entry();
        let clamped = IntervalMatrix::new(clamp_dust(&interval.lower)?, clamp_dust(&interval.upper)?)?;
        let check = interval_check(&clamped)?;
        let cd = mat_add(&model.rules[i].c, &mat_mul(&model.rules[i].d, &gains[j])?)?;
        vertices.push(VertexReport {
            plant_rule: i + 1,
            gain_rule: j + 1,
            min_lower_entry,
            verdict: check.verdict,
            upper_radius: check.upper_radius,
            output_nonneg: is_nonneg(&cd, &0.0),
        });
    }
    let pass = vertices
        .iter()
        .all(|v| v.verdict == IntervalVerdict::PositiveAndSchur);
    let outputs_nonneg = vertices.iter().all(|v| v.output_nonneg);
    Ok(ClosedLoopReport {
        vertices,
        pass,
        outputs_nonneg,
    })
}

// ---------------------------------------------------------------------------
// Region sweep

/// Which per-rule matrix a sweep path addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFamily {
    AExact,
    ALower,
    AUpper,
}

/// A scalar entry address like `rules[0].A[1][0]` (0-based throughout).
/// Exact models use `A`; interval models use `A_lower` / `A_upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPath {
    pub rule: usize,
    pub family: PathFamily,
    pub row: usize,
    pub col: usize,
    src: String,
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl FromStr for ParamPath {
    type Err = SynthesisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| SynthesisError::BadPath {
            path: s.to_string(),
            reason: reason.to_string(),
        };
        let rest = s
            .strip_prefix("rules[")
            .ok_or_else(|| bad("expected `rules[i].A[r][c]`"))?;
        let (rule_digits, rest) = rest
            .split_once("].")
            .ok_or_else(|| bad("expected `rules[i].A[r][c]`"))?;
        let rule: usize = rule_digits
            .parse()
            .map_err(|_| bad("rule index is not an integer"))?;
        let (family, rest) = if let Some(r) = rest.strip_prefix("A_lower[") {
            (PathFamily::ALower, r)
        } else if let Some(r) = rest.strip_prefix("A_upper[") {
            (PathFamily::AUpper, r)
        } else if let Some(r) = rest.strip_prefix("A[") {
            (PathFamily::AExact, r)
        } else {
            return Err(bad("expected family `A`, `A_lower` or `A_upper`"));
        };
        let (row_digits, rest) = rest
            .split_once("][")
            .ok_or_else(|| bad("expected `[r][c]` indices"))?;
        let col_digits = rest
            .strip_suffix(']')
            .ok_or_else(|| bad("expected `[r][c]` indices"))?;
        let row: usize = row_digits
            .parse()
            .map_err(|_| bad("row index is not an integer"))?;
        let col: usize = col_digits
            .parse()
            .map_err(|_| bad("column index is not an integer"))?;
        Ok(ParamPath {
            rule,
            family,
            row,
            col,
            src: s.to_string(),
        })
    }
}

impl ParamPath {
    fn check_against(&self, model: &FuzzyModel) -> Result<(), SynthesisError> {
        let bad = |reason: String| SynthesisError::BadPath {
            path: self.src.clone(),
            reason,
        };
        let rule = model
            .rules
            .get(self.rule)
            .ok_or_else(|| bad(format!("model has {} rules", model.rules.len())))?;
        match self.family {
            PathFamily::AExact if !rule.a_exact => {
                return Err(bad("rule has interval bounds; use A_lower or A_upper".into()));
            }
            PathFamily::ALower | PathFamily::AUpper if rule.a_exact => {
                return Err(bad("rule has an exact A; use the A family".into()));
            }
            _ => {}
        }
        if self.row >= model.n || self.col >= model.n {
            return Err(bad(format!("A is {}x{} (0-based indices)", model.n, model.n)));
        }
        Ok(())
    }

    fn apply(&self, model: &mut FuzzyModel, value: f64) {
        let rule = &mut model.rules[self.rule];
        match self.family {
            PathFamily::AExact => {
                rule.a.lower.set(self.row, self.col, value).expect("checked");
                rule.a.upper.set(self.row, self.col, value).expect("checked");
            }
            PathFamily::ALower => rule.a.lower.set(self.row, self.col, value).expect("checked"),
            PathFamily::AUpper => rule.a.upper.set(self.row, self.col, value).expect("checked"),
        }
    }
}

/// One sweep axis: a path plus an inclusive `start..=stop` range walked in
/// increments of `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub path: ParamPath,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ParamSpec {
    /// Grid values `start + i*step`, including `stop` when the step divides
    /// the range exactly (within a small slack so binary fractions work).
    pub fn values(&self) -> Result<Vec<f64>, SynthesisError> {
        let bad = |reason: &str| SynthesisError::BadRange {
            start: self.start,
            stop: self.stop,
            step: self.step,
            reason: reason.to_string(),
        };
        if !self.start.is_finite() || !self.stop.is_finite() || !self.step.is_finite() {
            return Err(bad("bounds must be finite"));
        }
        if self.stop < self.start {
            return Err(bad("stop is below start"));
        }
        if self.start == self.stop {
            return Ok(vec![self.start]);
        }
        if self.step <= 0.0 {
            return Err(bad("step must be positive for a nondegenerate range"));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Feasibility verdicts over a 1- or 2-parameter grid.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    /// Grid values per axis, in spec order.
    pub axes: Vec<Vec<f64>>,
    /// Row-major over the axes: with two parameters, the second varies
    /// fastest.
    pub feasible: Vec<bool>,
}

impl RegionGrid {
    pub fn len(&self) -> usize {
        self.feasible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feasible.is_empty()
    }
}

/// Instantiates the model at every grid point and records whether
/// [`synthesize`] finds gains there. Points are evaluated in deterministic
/// row-major order.
pub fn feasibility_region(
    model: &FuzzyModel,
    specs: &[ParamSpec],
    mode: Option<SynthesisMode>,
) -> Result<RegionGrid, SynthesisError> {
    if specs.is_empty() || specs.len() > 2 {
        return Err(SynthesisError::ParamCount { got: specs.len() });
    }
    for spec in specs {
        spec.path.check_against(model)?;
    }
    let axes: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| s.values())
        .collect::<Result<_, _>>()?;
    let mut feasible = Vec::new();
    let inner_len = axes.get(1).map(|a| a.len()).unwrap_or(1);
    let total = axes[0].len() * inner_len;
    feasible.reserve(total);
    for outer in &axes[0] {
        let inner_axis: &[f64] = axes.get(1).map(|a| a.as_slice()).unwrap_or(&[0.0]);
        for inner in inner_axis {
            let mut instance = model.clone();
            specs[0].path.apply(&mut instance, *outer);
            if specs.len() == 2 {
                specs[1].path.apply(&mut instance, *inner);
            }
            let outcome = synthesize(&instance, mode)?;
            feasible.push(outcome.verdict.is_feasible());
        }
    }
    Ok(RegionGrid { axes, feasible })
}

// ---------------------------------------------------------------------------
// Gains file I/O

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "K")]
    k: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
}

/// A gains document: `K` is required, the witness fields travel along when
/// known (our own synthesis always writes them; hand-written files may not).
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub mode: Option<String>,
    pub p: Option<Vec64>,
    pub xi: Option<Vec<Mat>>,
    pub gains: Vec<Mat>,
    pub margin: Option<f64>,
}

impl Gains {
    pub fn from_result(mode: SynthesisMode, result: &SynthesisResult) -> Self {
        Gains {
            mode: Some(mode.to_string()),
            p: Some(result.p.clone()),
            xi: Some(result.xi.clone()),
            gains: result.gains.clone(),
            margin: Some(result.margin),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, SynthesisError> {
        let file: GainsFile = serde_json::from_str(text)?;
        let gains = file
            .k
            .iter()
            .map(|rows| Ok(Matrix::from_rows(rows)?))
            .collect::<Result<Vec<Mat>, SynthesisError>>()?;
        if gains.is_empty() {
            return Err(SynthesisError::GainCount {
                expected: 1,
                got: 0,
            });
        }
        let p = file.p.map(Vec64::new).transpose()?;
        // xi arrives as xi[j][t] = the m-vector for state t; store it as an
        // m x n matrix per rule to match SynthesisResult.
        let xi = file
            .xi
            .map(|table| {
                table
                    .iter()
                    .map(|cols| {
                        let n = cols.len();
                        let m = cols.first().map(|c| c.len()).unwrap_or(0);
                        if n == 0 || m == 0 {
                            return Err(SynthesisError::GainShape {
                                index: 0,
                                expected: "nonempty xi columns".into(),
                                got: format!("{n} columns of {m}"),
                            });
                        }
                        let mut mat = Matrix::zeros(m, n);
                        for (t, col) in cols.iter().enumerate() {
                            if col.len() != m {
                                return Err(SynthesisError::GainShape {
                                    index: t,
                                    expected: format!("{m} entries"),
                                    got: format!("{} entries", col.len()),
                                });
                            }
                            for (q, v) in col.iter().enumerate() {
                                mat.set(q, t, *v)?;
                            }
                        }
                        Ok(mat)
                    })
                    .collect::<Result<Vec<Mat>, SynthesisError>>()
            })
            .transpose()?;
        Ok(Gains {
            mode: file.mode,
            p,
            xi,
            gains,
            margin: file.margin,
        })
    }

    /// Canonical JSON text: keys sorted, shortest float spelling, trailing
    /// newline.
    pub fn to_json_string(&self) -> String {
        let file = GainsFile {
            mode: self.mode.clone(),
            p: self.p.as_ref().map(|p| p.to_vec()),
            xi: self.xi.as_ref().map(|xi| {
                xi.iter()
                    .map(|mat| {
                        (0..mat.cols())
                            .map(|t| (0..mat.rows()).map(|q| mat[(q, t)]).collect())
                            .collect()
                    })
                    .collect()
            }),
            k: self.gains.iter().map(Mat::to_rows).collect(),
            margin: self.margin,
        };
        let value = serde_json::to_value(&file).expect("gains serialize");
        let mut out = serde_json::to_string_pretty(&value).expect("gains serialize");
        out.push('\n');
        out
    }
}

pub fn load_gains(path: impl AsRef<Path>) -> Result<Gains, SynthesisError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SynthesisError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Gains::from_json_str(&text)
}

pub fn save_gains(gains: &Gains, path: impl AsRef<Path>) -> Result<(), SynthesisError> {
    let path = path.as_ref();
    std::fs::write(path, gains.to_json_string()).map_err(|source| SynthesisError::Io {
        path: path.display().to_string(),
        source,
    })
}
