//! Bundled dense linear-programming solver.
//!
//! Every certificate in this crate reduces to a small maximize-margin LP, so
//! the solver favours robustness and determinism over speed: a classic
//! two-phase primal simplex on a full tableau with Bland's anti-cycling rule.
//! Free variables are split into positive/negative parts, finite bounds are
//! shifted to zero lower bounds, and problems stay dense throughout.
//!
//! Pivoting is deterministic, so identical problems produce bit-identical
//! solutions.

use std::sync::OnceLock;

/// Pivot elements and reduced costs smaller than this count as zero.
pub const PIVOT_TOL: f64 = 1e-10;
/// Smallest tableau entry accepted as a pivot. Degenerate pivoting leaves
/// elimination residue above `PIVOT_TOL` in entries that are exactly zero in
/// the underlying problem; pivoting on such residue makes the basis singular
/// and silently corrupts the tableau. Requiring this much clearance treats
/// residue as annihilated, which is the right reading for well-scaled data.
pub const MIN_PIVOT: f64 = 1e-7;
/// Phase-1 objective values below this certify feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Default margin a maximize-margin program must clear to count as feasible.
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 1e-9;

/// Margin threshold for feasibility verdicts: `PFSYN_LP_TOL` when set to a
/// positive finite value, `1e-9` otherwise. Read once per process.
pub fn margin_threshold() -> f64 {
    static THRESHOLD: OnceLock<f64> = OnceLock::new();
    *THRESHOLD.get_or_init(|| {
        std::env::var("PFSYN_LP_TOL")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v > 0.0)
            .unwrap_or(DEFAULT_MARGIN_THRESHOLD)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Per-variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const FREE: Bounds = Bounds {
        lower: None,
        upper: None,
    };

    pub fn nonneg() -> Bounds {
        Bounds {
            lower: Some(0.0),
            upper: None,
        }
    }

    pub fn boxed(lower: f64, upper: f64) -> Bounds {
        Bounds {
            lower: Some(lower),
            upper: Some(upper),
        }
    }
}

/// `maximize objective . x` subject to linear constraints and variable
/// bounds. Rows and the objective are validated on insertion (matching
/// length, finite coefficients); violations panic, as they indicate a bug in
/// the calling code rather than bad user data.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bounds>,
}

impl LpProblem {
    /// New problem with a zero objective and free variables.
    pub fn new(num_vars: usize) -> Self {
        assert!(num_vars > 0, "LP needs at least one variable");
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            bounds: vec![Bounds::FREE; num_vars],
        }
    }

    pub fn set_objective(&mut self, coeffs: Vec<f64>) {
        assert_eq!(coeffs.len(), self.num_vars, "objective length mismatch");
        assert!(coeffs.iter().all(|v| v.is_finite()), "objective not finite");
        self.objective = coeffs;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars, "constraint length mismatch");
        assert!(
            coeffs.iter().all(|v| v.is_finite()) && rhs.is_finite(),
            "constraint not finite"
        );
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, bounds: Bounds) {
        assert!(var < self.num_vars, "variable index out of range");
        if let Some(l) = bounds.lower {
            assert!(l.is_finite(), "lower bound not finite");
        }
        if let Some(u) = bounds.upper {
            assert!(u.is_finite(), "upper bound not finite");
        }
        self.bounds[var] = bounds;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot cap was reached before termination; never reported as any
    /// other status.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values in problem order; empty unless `Optimal`.
    pub values: Vec<f64>,
    /// `objective . values`; meaningful only when `Optimal`.
    pub objective_value: f64,
}

impl LpSolution {
    fn status_only(status: LpStatus) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective_value: 0.0,
        }
    }
}

/// Result of checking a candidate point against a problem's constraints and
/// bounds. Residuals measure violation: positive means violated by that
/// amount, nonpositive means satisfied with that much slack.
#[derive(Debug, Clone)]
pub struct PointCheck {
    /// One entry per constraint, in problem order.
    pub constraints: Vec<ResidualCheck>,
    /// One entry per finite variable bound.
    pub bounds: Vec<ResidualCheck>,
    pub all_satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct ResidualCheck {
    /// Constraint index, or variable index for bound checks.
    pub index: usize,
    pub residual: f64,
    pub satisfied: bool,
}

/// Evaluates `v` against every constraint and bound of `p` at tolerance
/// `tol`: a check passes when its violation residual is `<= tol`.
pub fn check_point(p: &LpProblem, v: &[f64], tol: f64) -> PointCheck {
    assert_eq!(v.len(), p.num_vars, "point dimension mismatch");
    let mut constraints = Vec::with_capacity(p.constraints.len());
    let mut all = true;
    for (index, c) in p.constraints.iter().enumerate() {
        let value: f64 = c.coeffs.iter().zip(v).map(|(a, x)| a * x).sum();
        let residual = match c.relation {
            Relation::Le => value - c.rhs,
            Relation::Ge => c.rhs - value,
            Relation::Eq => (value - c.rhs).abs(),
        };
        let satisfied = residual <= tol;
        all &= satisfied;
        constraints.push(ResidualCheck {
            index,
            residual,
            satisfied,
        });
    }
    let mut bounds = Vec::new();
    for (index, b) in p.bounds.iter().enumerate() {
        if let Some(lo) = b.lower {
            let residual = lo - v[index];
            let satisfied = residual <= tol;
            all &= satisfied;
            bounds.push(ResidualCheck {
                index,
                residual,
                satisfied,
            });
        }
        if let Some(hi) = b.upper {
            let residual = v[index] - hi;
            let satisfied = residual <= tol;
            all &= satisfied;
            bounds.push(ResidualCheck {
                index,
                residual,
                satisfied,
            });
        }
    }
    PointCheck {
        constraints,
        bounds,
        all_satisfied: all,
    }
}

/// How each original variable maps onto the nonnegative internal variables.
enum VarMap {
    /// `x = offset + sign * x_col`, `x_col >= 0`, `sign` is `+-1`.
    Shift { col: usize, offset: f64, sign: f64 },
    /// `x = x_pos - x_neg`, both `>= 0`.
    Split { pos: usize, neg: usize },
}

/// The working tableau: `rows` holds coefficients only, `b` the right-hand
/// sides, and each objective lives in a `(reduced costs, value cell)` pair
/// where the value cell tracks the negated objective of the current basis.
struct Tableau {
    rows: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

enum SimplexEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Solves the program with a two-phase primal simplex.
pub fn solve(p: &LpProblem) -> LpSolution {
    // --- variable transformation to x' >= 0 ---
    let mut varmap = Vec::with_capacity(p.num_vars);
    let mut nstruct = 0usize;
    // (column, range) pairs for boxed variables, emitted as extra rows below.
    let mut box_rows: Vec<(usize, f64)> = Vec::new();
    for bd in &p.bounds {
        match (bd.lower, bd.upper) {
            (Some(lo), Some(hi)) => {
                if lo > hi {
                    return LpSolution::status_only(LpStatus::Infeasible);
                }
                varmap.push(VarMap::Shift {
                    col: nstruct,
                    offset: lo,
                    sign: 1.0,
                });
                box_rows.push((nstruct, hi - lo));
                nstruct += 1;
            }
            (Some(lo), None) => {
                varmap.push(VarMap::Shift {
                    col: nstruct,
                    offset: lo,
                    sign: 1.0,
                });
                nstruct += 1;
            }
            (None, Some(hi)) => {
                varmap.push(VarMap::Shift {
                    col: nstruct,
                    offset: hi,
                    sign: -1.0,
                });
                nstruct += 1;
            }
            (None, None) => {
                varmap.push(VarMap::Split {
                    pos: nstruct,
                    neg: nstruct + 1,
                });
                nstruct += 2;
            }
        }
    }

    // --- constraint rows over internal variables ---
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rels: Vec<Relation> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for c in &p.constraints {
        let mut row = vec![0.0; nstruct];
        let mut r = c.rhs;
        for (j, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match &varmap[j] {
                VarMap::Shift { col, offset, sign } => {
                    row[*col] += a * sign;
                    r -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[*pos] += a;
                    row[*neg] -= a;
                }
            }
        }
        rows.push(row);
        rels.push(c.relation);
        rhs.push(r);
    }
    for &(col, range) in &box_rows {
        let mut row = vec![0.0; nstruct];
        row[col] = 1.0;
        rows.push(row);
        rels.push(Relation::Le);
        rhs.push(range);
    }

    let m = rows.len();
    let nslack = rels.iter().filter(|r| !matches!(r, Relation::Eq)).count();
    let width = nstruct + nslack;

    // Slack columns, rhs sign normalization.
    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        b: Vec::with_capacity(m),
        basis: vec![usize::MAX; m],
        ncols: width,
    };
    let mut slack_col_of_row: Vec<Option<usize>> = vec![None; m];
    {
        let mut next_slack = nstruct;
        for i in 0..m {
            let mut row = std::mem::take(&mut rows[i]);
            row.resize(width, 0.0);
            match rels[i] {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    slack_col_of_row[i] = Some(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    slack_col_of_row[i] = Some(next_slack);
                    next_slack += 1;
                }
                Relation::Eq => {}
            }
            let mut r = rhs[i];
            if r < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                r = -r;
            }
            tab.rows.push(row);
            tab.b.push(r);
        }
    }

    // Basis: the row's slack where its coefficient survived normalization as
    // +1, otherwise an artificial variable appended on the right.
    let mut nart = 0usize;
    for i in 0..m {
        if let Some(s) = slack_col_of_row[i] {
            if tab.rows[i][s] == 1.0 {
                tab.basis[i] = s;
                continue;
            }
        }
        nart += 1;
    }
    let total = width + nart;
    tab.ncols = total;
    for row in tab.rows.iter_mut() {
        row.resize(total, 0.0);
    }
    {
        let mut next_art = width;
        for i in 0..m {
            if tab.basis[i] == usize::MAX {
                tab.rows[i][next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    // Phase-2 objective (minimize -c over internal vars), kept canonical
    // through every pivot of both phases. The value cell is unused for
    // output (the objective is recomputed from the original data at the
    // end), it just rides along.
    let mut obj = vec![0.0; total];
    for (j, &cj) in p.objective.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        match &varmap[j] {
            VarMap::Shift { col, sign, .. } => obj[*col] -= cj * sign,
            VarMap::Split { pos, neg } => {
                obj[*pos] -= cj;
                obj[*neg] += cj;
            }
        }
    }
    let mut obj_val = 0.0;

    let cap = 10 * (total + m) * (total + m);
    let mut pivots = 0usize;

    if nart > 0 {
        // Phase-1 objective: minimize the sum of artificials. Canonicalize
        // for the rows whose basic variable is artificial (unit cost).
        let mut art = vec![0.0; total];
        for a in art.iter_mut().take(total).skip(width) {
            *a = 1.0;
        }
        let mut art_val = 0.0;
        for i in 0..m {
            if tab.basis[i] >= width {
                for j in 0..total {
                    art[j] -= tab.rows[i][j];
                }
                art_val -= tab.b[i];
            }
        }
        let end = run_simplex(
            &mut tab,
            &mut art,
            &mut art_val,
            Some((&mut obj, &mut obj_val)),
            cap,
            &mut pivots,
        );
        match end {
            SimplexEnd::Optimal => {}
            // A sum of nonnegative variables cannot decrease without bound;
            // reaching either branch means the arithmetic went bad, which the
            // cap status reports rather than guessing.
            SimplexEnd::Unbounded | SimplexEnd::IterationLimit => {
                return LpSolution::status_only(LpStatus::IterationLimit);
            }
        }
        if -art_val > FEASIBILITY_TOL {
            return LpSolution::status_only(LpStatus::Infeasible);
        }
        // Drive remaining zero-level artificials out of the basis; rows that
        // cannot pivot on a structural column are redundant and get dropped.
        let mut keep = vec![true; m];
        for i in 0..m {
            if tab.basis[i] < width {
                continue;
            }
            match (0..width).find(|&j| tab.rows[i][j].abs() > MIN_PIVOT) {
                Some(c) => {
                    pivot(&mut tab, i, c, &mut art, &mut art_val, Some((&mut obj, &mut obj_val)));
                }
                None => keep[i] = false,
            }
        }
        retain_rows(&mut tab, &keep);
        // Artificial columns must never re-enter: truncate them away.
        for row in tab.rows.iter_mut() {
            row.truncate(width);
        }
        obj.truncate(width);
        tab.ncols = width;
    }

    let end = run_simplex(&mut tab, &mut obj, &mut obj_val, None, cap, &mut pivots);
    match end {
        SimplexEnd::Optimal => {}
        SimplexEnd::Unbounded => return LpSolution::status_only(LpStatus::Unbounded),
        SimplexEnd::IterationLimit => {
            return LpSolution::status_only(LpStatus::IterationLimit)
        }
    }

    // --- extract the basic solution and map back ---
    let mut internal = vec![0.0; tab.ncols];
    for i in 0..tab.rows.len() {
        if tab.basis[i] < tab.ncols {
            internal[tab.basis[i]] = tab.b[i];
        }
    }
    let mut values = vec![0.0; p.num_vars];
    for (j, map) in varmap.iter().enumerate() {
        values[j] = match map {
            VarMap::Shift { col, offset, sign } => offset + sign * internal[*col],
            VarMap::Split { pos, neg } => internal[*pos] - internal[*neg],
        };
    }
    let objective_value = p.objective.iter().zip(&values).map(|(c, x)| c * x).sum();
    LpSolution {
        status: LpStatus::Optimal,
        values,
        objective_value,
    }
}

fn retain_rows(tab: &mut Tableau, keep: &[bool]) {
    let mut idx = 0;
    tab.rows.retain(|_| {
        let k = keep[idx];
        idx += 1;
        k
    });
    let mut idx = 0;
    tab.b.retain(|_| {
        let k = keep[idx];
        idx += 1;
        k
    });
    let mut idx = 0;
    tab.basis.retain(|_| {
        let k = keep[idx];
        idx += 1;
        k
    });
}

/// Bland-rule simplex iterations minimizing the objective in `obj`; the
/// dormant objective in `extra` (phase 2 during phase 1) receives the same
/// pivot updates so it stays canonical.
fn run_simplex(
    tab: &mut Tableau,
    obj: &mut [f64],
    obj_val: &mut f64,
    mut extra: Option<(&mut Vec<f64>, &mut f64)>,
    cap: usize,
    pivots: &mut usize,
) -> SimplexEnd {
    loop {
        // Entering column: smallest index with a negative reduced cost.
        let Some(c) = (0..tab.ncols).find(|&j| obj[j] < -PIVOT_TOL) else {
            return SimplexEnd::Optimal;
        };
        // Leaving row: minimum ratio, ties to the smallest basic variable.
        let mut best: Option<(f64, usize, usize)> = None; // (ratio, basic var, row)
        for i in 0..tab.rows.len() {
            let a = tab.rows[i][c];
            if a > MIN_PIVOT {
                let ratio = tab.b[i] / a;
                let replace = match best {
                    None => true,
                    Some(cur) => ratio < cur.0 || (ratio == cur.0 && tab.basis[i] < cur.1),
                };
                if replace {
                    best = Some((ratio, tab.basis[i], i));
                }
            }
        }
        let Some((_, _, r)) = best else {
            return SimplexEnd::Unbounded;
        };
        *pivots += 1;
        if *pivots > cap {
            return SimplexEnd::IterationLimit;
        }
        let extra_now = extra
            .as_mut()
            .map(|(row, val)| (row.as_mut_slice(), &mut **val));
        pivot(tab, r, c, obj, obj_val, extra_now);
    }
}

/// Gauss-Jordan pivot on `(r, c)`, updating the constraint rows, the active
/// objective, and optionally a second objective row.
fn pivot(
    tab: &mut Tableau,
    r: usize,
    c: usize,
    obj: &mut [f64],
    obj_val: &mut f64,
    extra: Option<(&mut [f64], &mut f64)>,
) {
    let piv = tab.rows[r][c];
    let inv = 1.0 / piv;
    for v in tab.rows[r].iter_mut() {
        *v *= inv;
    }
    tab.b[r] *= inv;
    tab.rows[r][c] = 1.0; // exact unit pivot instead of piv/piv rounding

    for i in 0..tab.rows.len() {
        if i == r {
            continue;
        }
        let factor = tab.rows[i][c];
        if factor == 0.0 {
            continue;
        }
        let (pivot_row, row) = if i < r {
            let (head, tail) = tab.rows.split_at_mut(r);
            (&tail[0], &mut head[i])
        } else {
            let (head, tail) = tab.rows.split_at_mut(i);
            (&head[r], &mut tail[0])
        };
        for (x, pv) in row.iter_mut().zip(pivot_row.iter()) {
            *x -= factor * pv;
        }
        row[c] = 0.0;
        tab.b[i] -= factor * tab.b[r];
    }

    let apply = |row: &mut [f64], val: &mut f64| {
        let factor = row[c];
        if factor == 0.0 {
            return;
        }
        for (x, pv) in row.iter_mut().zip(tab.rows[r].iter()) {
            *x -= factor * pv;
        }
        row[c] = 0.0;
        *val -= factor * tab.b[r];
    };
    apply(obj, obj_val);
    if let Some((row, val)) = extra {
        apply(row, val);
    }
    tab.basis[r] = c;
}
