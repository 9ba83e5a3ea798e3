//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles deliberately avoid the code paths they judge: LP feasibility
//! and optima come from exact rational vertex enumeration, synthesis
//! feasibility from Fourier-Motzkin elimination over big rationals, and 2x2
//! spectral radii from the quadratic formula.

#![allow(dead_code)] // each test binary uses its own slice of this module
#![allow(clippy::needless_range_loop)] // oracle code sticks to index algebra

use std::path::PathBuf;

use num::rational::Ratio;
use num::{BigRational, FromPrimitive, Signed, Zero};

use pfsyn::lp::{Bounds, LpProblem, LpStatus, Relation};
use pfsyn::model::{load_model, FuzzyModel};
use pfsyn::{Mat, Vec64};

// ---------------------------------------------------------------------------
// Fixtures

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

pub fn example1() -> FuzzyModel {
    load_model(model_path("example1.json")).expect("example1 loads")
}

pub fn example2() -> FuzzyModel {
    load_model(model_path("example2.json")).expect("example2 loads")
}

/// Published gain row for the first worked example (both rules share it).
pub const REF_K1: [f64; 2] = [-0.7261, -1.1979];
/// Published Lyapunov vector for the first worked example.
pub const REF_P1: [f64; 2] = [152.6164, 126.9691];
/// Published decision pair (state index order); identical for both rules.
pub const REF_XI1: [f64; 2] = [-110.8075, -152.0953];
/// Published gain row for the interval example (both rules share it).
pub const REF_K2: [f64; 3] = [0.5399, 0.5342, 0.6753];
/// Published initial state for the interval example's simulation.
pub const REF_X0_2: [f64; 3] = [4.5688, 1.4694, 3.0119];

pub fn ref_gains_1() -> Vec<Mat> {
    let k = Mat::from_rows(&[REF_K1.to_vec()]).unwrap();
    vec![k.clone(), k]
}

pub fn ref_gains_2() -> Vec<Mat> {
    let k = Mat::from_rows(&[REF_K2.to_vec()]).unwrap();
    vec![k.clone(), k]
}

pub fn vec64(data: &[f64]) -> Vec64 {
    Vec64::new(data.to_vec()).unwrap()
}

#[track_caller]
pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}

// ---------------------------------------------------------------------------
// 2x2 spectral radius oracle

/// Perron root of a nonnegative 2x2 matrix by the quadratic formula. The
/// discriminant is nonnegative for nonnegative entries, and the plus branch
/// dominates the other eigenvalue in magnitude.
pub fn radius_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    ((a + d) + ((a - d).powi(2) + 4.0 * b * c).sqrt()) / 2.0
}

// ---------------------------------------------------------------------------
// Exact vertex-enumeration LP oracle
//
// Works on integer-coefficient problems so Ratio<i128> arithmetic is exact:
// coefficients stay below 10 in magnitude and systems are at most 4x4, so
// numerators are bounded by tiny determinant products.

pub type Rat = Ratio<i128>;

fn rat(v: i64) -> Rat {
    Ratio::from_integer(v as i128)
}

/// A random LP in the integer grid: rows `a.x (rel) b`, variable bounds
/// `0 <= x_i <= box_upper[i]`, maximize `objective.x`.
#[derive(Debug, Clone)]
pub struct GridLp {
    pub num_vars: usize,
    pub rows: Vec<(Vec<i64>, Relation, i64)>,
    pub box_upper: Vec<i64>,
    pub objective: Vec<i64>,
}

impl GridLp {
    pub fn to_problem(&self) -> LpProblem {
        let mut p = LpProblem::new(self.num_vars);
        p.set_objective(self.objective.iter().map(|v| *v as f64).collect());
        for (coeffs, rel, rhs) in &self.rows {
            p.add_constraint(
                coeffs.iter().map(|v| *v as f64).collect(),
                *rel,
                *rhs as f64,
            );
        }
        for (i, u) in self.box_upper.iter().enumerate() {
            p.set_bounds(i, Bounds::boxed(0.0, *u as f64));
        }
        p
    }

    /// Exact optimum by enumerating all candidate vertices: intersections of
    /// `num_vars` hyperplanes drawn from the constraint rows and the bound
    /// faces. The box bounds make every instance bounded, so the status is
    /// either `Optimal` or `Infeasible` and a nonempty feasible set has a
    /// vertex among the candidates.
    pub fn oracle_solve(&self) -> (LpStatus, Option<Rat>) {
        let nv = self.num_vars;
        let mut planes: Vec<(Vec<Rat>, Rat)> = Vec::new();
        for (coeffs, _, rhs) in &self.rows {
            planes.push((coeffs.iter().map(|v| rat(*v)).collect(), rat(*rhs)));
        }
        for i in 0..nv {
            let mut unit = vec![Rat::zero(); nv];
            unit[i] = rat(1);
            planes.push((unit.clone(), Rat::zero()));
            planes.push((unit, rat(self.box_upper[i])));
        }
        let mut best: Option<Rat> = None;
        for_each_combination(planes.len(), nv, |subset| {
            let system: Vec<&(Vec<Rat>, Rat)> = subset.iter().map(|&i| &planes[i]).collect();
            let Some(x) = solve_square(&system) else {
                return;
            };
            if !self.is_feasible(&x) {
                return;
            }
            let value: Rat = self
                .objective
                .iter()
                .zip(&x)
                .map(|(c, xi)| rat(*c) * xi)
                .sum();
            best = Some(match best.take() {
                None => value,
                Some(b) => {
                    if value > b {
                        value
                    } else {
                        b
                    }
                }
            });
        });
        match best {
            Some(v) => (LpStatus::Optimal, Some(v)),
            None => (LpStatus::Infeasible, None),
        }
    }

    fn is_feasible(&self, x: &[Rat]) -> bool {
        for (i, v) in x.iter().enumerate() {
            if *v < Rat::zero() || *v > rat(self.box_upper[i]) {
                return false;
            }
        }
        for (coeffs, rel, rhs) in &self.rows {
            let lhs: Rat = coeffs.iter().zip(x).map(|(c, xi)| rat(*c) * xi).sum();
            let rhs = rat(*rhs);
            let ok = match rel {
                Relation::Le => lhs <= rhs,
                Relation::Ge => lhs >= rhs,
                Relation::Eq => lhs == rhs,
            };
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Draws a small integer-grid LP: up to 4 variables boxed into `[0, u]`,
/// up to 6 extra rows with a mix of relations, all coefficients in
/// `-5..=5`. The integer grid keeps the oracle arithmetic exact and makes
/// degenerate vertices (ties) common.
pub fn random_grid_lp<R: rand::Rng>(rng: &mut R) -> GridLp {
    let num_vars = rng.gen_range(1..=4usize);
    let num_rows = rng.gen_range(0..=6usize);
    let mut rows = Vec::with_capacity(num_rows);
    for _ in 0..num_rows {
        let coeffs: Vec<i64> = (0..num_vars).map(|_| rng.gen_range(-5..=5)).collect();
        let relation = match rng.gen_range(0..8) {
            0 => Relation::Eq,
            1..=4 => Relation::Le,
            _ => Relation::Ge,
        };
        // zero right-hand sides make the instance degenerate, which is where
        // phase 1 earns its keep
        let rhs = if rng.gen_bool(0.3) {
            0
        } else {
            rng.gen_range(-5..=5)
        };
        rows.push((coeffs, relation, rhs));
    }
    GridLp {
        num_vars,
        rows,
        box_upper: (0..num_vars).map(|_| rng.gen_range(1..=5)).collect(),
        objective: (0..num_vars).map(|_| rng.gen_range(-5..=5)).collect(),
    }
}

/// Solves the square system given by `(row, rhs)` pairs exactly; `None` when
/// singular.
fn solve_square(system: &[&(Vec<Rat>, Rat)]) -> Option<Vec<Rat>> {
    let n = system.len();
    let mut aug: Vec<Vec<Rat>> = system
        .iter()
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot);
        let p = aug[col][col];
        for entry in aug[col].iter_mut() {
            *entry /= p;
        }
        for r in 0..n {
            if r == col || aug[r][col].is_zero() {
                continue;
            }
            let factor = aug[r][col];
            for c in col..=n {
                let sub = factor * aug[col][c];
                aug[r][c] -= sub;
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n]).collect())
}

/// Calls `f` with every k-subset of `0..n`, in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Fourier-Motzkin feasibility oracle over big rationals

pub type BigRat = BigRational;

pub fn big(v: f64) -> BigRat {
    BigRational::from_f64(v).expect("finite")
}

fn normalize_row(row: &mut (Vec<BigRat>, BigRat)) {
    let scale = row
        .0
        .iter()
        .map(|c| c.abs())
        .filter(|c| !c.is_zero())
        .max();
    if let Some(scale) = scale {
        for c in row.0.iter_mut() {
            *c /= scale.clone();
        }
        row.1 /= scale;
    }
}

/// Decides whether the system `a.x <= b` (one pair per row) has a solution,
/// by eliminating variables one at a time (cheapest variable first, measured
/// by the number of row combinations it generates). Exact, hence immune to
/// the tolerance choices of the simplex code under test.
pub fn fm_feasible(mut rows: Vec<(Vec<BigRat>, BigRat)>, num_vars: usize) -> bool {
    let has_contradiction = |rows: &[(Vec<BigRat>, BigRat)]| {
        rows.iter()
            .any(|(c, b)| c.iter().all(Zero::is_zero) && *b < BigRat::zero())
    };
    let mut remaining: Vec<usize> = (0..num_vars).collect();
    while !remaining.is_empty() {
        if has_contradiction(&rows) {
            return false;
        }
        let (slot, _) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| {
                let pos = rows.iter().filter(|(c, _)| c[v].is_positive()).count();
                let neg = rows.iter().filter(|(c, _)| c[v].is_negative()).count();
                pos * neg
            })
            .expect("nonempty");
        let var = remaining.swap_remove(slot);

        let mut pos: Vec<(Vec<BigRat>, BigRat)> = Vec::new();
        let mut neg: Vec<(Vec<BigRat>, BigRat)> = Vec::new();
        let mut next: Vec<(Vec<BigRat>, BigRat)> = Vec::new();
        for (coeffs, rhs) in rows {
            let c = &coeffs[var];
            if c.is_zero() {
                next.push((coeffs, rhs));
            } else if c.is_positive() {
                pos.push((coeffs, rhs));
            } else {
                neg.push((coeffs, rhs));
            }
        }
        let mut seen: Vec<(Vec<BigRat>, BigRat)> = Vec::new();
        for (pc, pr) in &pos {
            for (nc, nr) in &neg {
                // scale so the var cancels: row_p / p_c + row_n / (-n_c)
                let pscale = pc[var].clone();
                let nscale = -nc[var].clone();
                let coeffs: Vec<BigRat> = pc
                    .iter()
                    .zip(nc)
                    .map(|(p, n)| p / pscale.clone() + n / nscale.clone())
                    .collect();
                let rhs = pr / pscale.clone() + nr / nscale.clone();
                let mut row = (coeffs, rhs);
                if row.0.iter().all(|c| c.is_zero()) {
                    // variable-free: keep only contradictions
                    if row.1 < BigRat::zero() {
                        next.push(row);
                    }
                    continue;
                }
                normalize_row(&mut row);
                if !seen.contains(&row) {
                    seen.push(row.clone());
                    next.push(row);
                }
            }
        }
        rows = next;
    }
    rows.iter().all(|(_, rhs)| *rhs >= BigRat::zero())
}

/// Strict synthesis feasibility for an exact-A model as a pure inequality
/// system: by homogeneity, gains exist iff
/// `(A_i - I)p + B_i sum_t xi_t^j <= -1`, positivity rows `>= 0`, `p >= 1`
/// has a rational solution in `(p, xi)`.
pub fn fm_synthesis_feasible(model: &FuzzyModel) -> bool {
    let (n, m, r) = (model.n, model.m, model.rules.len());
    let nv = n + r * n * m;
    let xi_index = |j: usize, t: usize, q: usize| n + j * (n * m) + t * m + q;
    let mut rows: Vec<(Vec<BigRat>, BigRat)> = Vec::new();
    for rule_i in &model.rules {
        for j in 0..r {
            for h in 0..n {
                // (A_i - I)p + B_i sum_t xi_t^j <= -1
                let mut coeffs = vec![BigRat::zero(); nv];
                for t in 0..n {
                    let mut c = big(rule_i.a.upper[(h, t)]);
                    if h == t {
                        c -= big(1.0);
                    }
                    coeffs[t] = c;
                }
                for t in 0..n {
                    for q in 0..m {
                        coeffs[xi_index(j, t, q)] = big(rule_i.b[(h, q)]);
                    }
                }
                rows.push((coeffs, big(-1.0)));
            }
        }
    }
    for rule_i in &model.rules {
        for j in 0..r {
            for h in 0..n {
                for t in 0..n {
                    // -(a[h,t] p_t + b_h . xi_t^j) <= 0
                    let mut coeffs = vec![BigRat::zero(); nv];
                    coeffs[t] = -big(rule_i.a.lower[(h, t)]);
                    for q in 0..m {
                        coeffs[xi_index(j, t, q)] = -big(rule_i.b[(h, q)]);
                    }
                    rows.push((coeffs, BigRat::zero()));
                }
            }
        }
    }
    for t in 0..n {
        // -p_t <= -1
        let mut coeffs = vec![BigRat::zero(); nv];
        coeffs[t] = big(-1.0);
        rows.push((coeffs, big(-1.0)));
    }
    fm_feasible(rows, nv)
}
