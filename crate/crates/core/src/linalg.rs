//! Dense row-major matrices and vectors over a real scalar type, plus the
//! Perron-root estimator every stability check in this crate relies on.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_traits::{Float, FromPrimitive, Signed};
use thiserror::Error;

/// Scalar values the containers can hold: signed, ordered, printable.
///
/// Implemented explicitly for the machine floats. The trait is deliberately
/// small so exact types (e.g. rationals) can implement it in downstream code
/// via a thin wrapper.
pub trait Scalar: Clone + PartialOrd + fmt::Debug + fmt::Display + Signed + 'static {
    /// True when the value is an ordinary finite number. Exact types are
    /// always finite; floats exclude NaN and the infinities.
    fn is_finite_val(&self) -> bool;
}

impl Scalar for f64 {
    fn is_finite_val(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn is_finite_val(&self) -> bool {
        self.is_finite()
    }
}

/// Floating-point scalars: what the iterative numerics (power iteration,
/// expression evaluation) additionally need beyond [`Scalar`].
pub trait Real: Scalar + Float + FromPrimitive {}

impl<T: Scalar + Float + FromPrimitive> Real for T {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {context}: {left} vs {right}")]
    ShapeMismatch {
        context: &'static str,
        left: String,
        right: String,
    },
    #[error("entry ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("negative entry at ({row},{col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("dimensions must be positive")]
    Empty,
    #[error("wrong entry count: {rows}x{cols} needs {expected}, got {got}")]
    WrongCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("power iteration did not reach bracket width {tol} within {cap} iterations")]
    NoConvergence { cap: usize, tol: f64 },
}

fn shape_err(context: &'static str, a: (usize, usize), b: (usize, usize)) -> LinalgError {
    LinalgError::ShapeMismatch {
        context,
        left: format!("{}x{}", a.0, a.1),
        right: format!("{}x{}", b.0, b.1),
    }
}

/// Dense matrix in row-major order. Value type: operations return new
/// matrices and never mutate their inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    /// Builds a matrix from row-major entries, checking the count and that
    /// every entry is finite.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::WrongCount {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite_val() {
                return Err(LinalgError::NonFinite {
                    row: k / cols,
                    col: k % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(LinalgError::Empty);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(shape_err("ragged rows", (rows.len(), cols), (1, r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Replaces one entry; the value must be finite.
    pub fn set(&mut self, r: usize, c: usize, v: T) -> Result<(), LinalgError> {
        if !v.is_finite_val() {
            return Err(LinalgError::NonFinite { row: r, col: c });
        }
        self.data[r * self.cols + c] = v;
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self[(r, c)].clone());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.clone() * c.clone()).collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Rows as owned vectors, the shape the JSON schema uses.
    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Smallest entry (useful for positivity reports).
    pub fn min_entry(&self) -> T {
        let mut best = self.data[0].clone();
        for v in &self.data[1..] {
            if *v < best {
                best = v.clone();
            }
        }
        best
    }
}

impl<T: Scalar> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T: Scalar> fmt::Display for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            write!(f, "[")?;
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(r, c)])?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Dense column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T: Scalar = f64> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn new(data: Vec<T>) -> Result<Self, LinalgError> {
        if data.is_empty() {
            return Err(LinalgError::Empty);
        }
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite_val() {
                return Err(LinalgError::NonFinite { row: k, col: 0 });
            }
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            data: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data.clone()
    }
}

impl<T: Real> Vector<T> {
    /// Euclidean norm.
    pub fn norm2(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, v| acc + *v * *v)
            .sqrt()
    }
}

impl<T: Scalar> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T: Scalar> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

impl<T: Scalar> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Vec<T> {
        v.data
    }
}

/// Entrywise sum.
pub fn mat_add<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(shape_err("add", (a.rows, a.cols), (b.rows, b.cols)));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x.clone() + y.clone())
        .collect();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Entrywise difference.
pub fn mat_sub<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(shape_err("sub", (a.rows, a.cols), (b.rows, b.cols)));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x.clone() - y.clone())
        .collect();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Standard matrix product.
pub fn mat_mul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if a.cols != b.rows {
        return Err(shape_err("mul", (a.rows, a.cols), (b.rows, b.cols)));
    }
    let mut data = Vec::with_capacity(a.rows * b.cols);
    for r in 0..a.rows {
        for c in 0..b.cols {
            let mut acc = T::zero();
            for k in 0..a.cols {
                acc = acc + a[(r, k)].clone() * b[(k, c)].clone();
            }
            data.push(acc);
        }
    }
    Ok(Matrix {
        rows: a.rows,
        cols: b.cols,
        data,
    })
}

/// Matrix-vector product.
pub fn mat_vec<T: Scalar>(a: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>, LinalgError> {
    if a.cols != v.dim() {
        return Err(shape_err("mat-vec", (a.rows, a.cols), (v.dim(), 1)));
    }
    let data = (0..a.rows)
        .map(|r| {
            let mut acc = T::zero();
            for k in 0..a.cols {
                acc = acc + a[(r, k)].clone() * v[k].clone();
            }
            acc
        })
        .collect();
    Ok(Vector { data })
}

/// True iff every entry is `>= -tol`.
///
/// `tol` must be nonnegative; the default for the paper-level positivity
/// conditions is an exact `0`.
pub fn is_nonneg<T: Scalar>(a: &Matrix<T>, tol: &T) -> bool {
    assert!(*tol >= T::zero(), "tolerance must be nonnegative");
    let bound = -tol.clone();
    a.data.iter().all(|v| *v >= bound)
}

const PERRON_BRACKET_TOL: f64 = 1e-8;
const PERRON_ITER_CAP: usize = 100_000;

/// Spectral radius of an entrywise-nonnegative square matrix.
///
/// Power iteration runs on `block + I` for each strongly connected component
/// of the sparsity pattern; the `+I` shift makes every irreducible block
/// primitive, so the Collatz-Wielandt bracket
/// `min_i (Bv)_i / v_i <= rho(B) <= max_i (Bv)_i / v_i`
/// closes geometrically and serves as the convergence certificate (width
/// `<= 1e-8` at termination). The overall radius is the maximum over blocks;
/// 1x1 blocks contribute their diagonal entry exactly. Splitting into
/// components is what makes reducible inputs (e.g. diagonal matrices with
/// distinct entries) converge: on such inputs a whole-matrix bracket stalls
/// at the width between the block radii.
pub fn perron_radius<T: Real>(a: &Matrix<T>) -> Result<T, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    for r in 0..a.rows {
        for c in 0..a.cols {
            if a[(r, c)] < T::zero() {
                return Err(LinalgError::NegativeEntry { row: r, col: c });
            }
        }
    }
    let tol = T::from_f64(PERRON_BRACKET_TOL).expect("tolerance representable");
    let mut rho = T::zero();
    for comp in strongly_connected_components(a) {
        let block_rho = if comp.len() == 1 {
            let i = comp[0];
            a[(i, i)]
        } else {
            perron_irreducible(a, &comp, tol)?
        };
        if block_rho > rho {
            rho = block_rho;
        }
    }
    Ok(rho)
}

/// Collatz-Wielandt power iteration on `block + I` for one irreducible
/// component, returning the block's spectral radius.
fn perron_irreducible<T: Real>(
    a: &Matrix<T>,
    idx: &[usize],
    tol: T,
) -> Result<T, LinalgError> {
    let k = idx.len();
    let one = T::one();
    let mut v = vec![one; k];
    for _ in 0..PERRON_ITER_CAP {
        // w = (block + I) v; v stays strictly positive because the shifted
        // diagonal is >= 1.
        let mut w = vec![T::zero(); k];
        for (r, &gr) in idx.iter().enumerate() {
            let mut acc = v[r];
            for (c, &gc) in idx.iter().enumerate() {
                acc = acc + a[(gr, gc)] * v[c];
            }
            w[r] = acc;
        }
        let mut lo = w[0] / v[0];
        let mut hi = lo;
        for r in 1..k {
            let ratio = w[r] / v[r];
            if ratio < lo {
                lo = ratio;
            }
            if ratio > hi {
                hi = ratio;
            }
        }
        if hi - lo <= tol {
            let two = T::from_f64(2.0).unwrap();
            return Ok((lo + hi) / two - one);
        }
        // Sup-norm normalization guards against overflow.
        let mut max = w[0];
        for r in 1..k {
            if w[r] > max {
                max = w[r];
            }
        }
        for r in 0..k {
            v[r] = w[r] / max;
        }
    }
    Err(LinalgError::NoConvergence {
        cap: PERRON_ITER_CAP,
        tol: PERRON_BRACKET_TOL,
    })
}

/// Strongly connected components of the sparsity pattern (edge `i -> j` iff
/// `a[i][j] != 0`), via Kosaraju's two-pass DFS (iterative).
fn strongly_connected_components<T: Scalar>(a: &Matrix<T>) -> Vec<Vec<usize>> {
    let n = a.rows;
    let edge = |r: usize, c: usize| !a[(r, c)].is_zero();

    // Pass 1: finish order on the forward graph.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // Stack holds (node, next child to try).
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while !stack.is_empty() {
            let (u, child) = {
                let top = stack.last_mut().expect("stack nonempty");
                let u = top.0;
                let mut child = None;
                while top.1 < n {
                    let v = top.1;
                    top.1 += 1;
                    if edge(u, v) && !seen[v] {
                        child = Some(v);
                        break;
                    }
                }
                (u, child)
            };
            match child {
                Some(v) => {
                    seen[v] = true;
                    stack.push((v, 0));
                }
                None => {
                    order.push(u);
                    stack.pop();
                }
            }
        }
    }

    // Pass 2: DFS on the reversed graph in reverse finish order.
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &start in order.iter().rev() {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        comp_of[start] = id;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if edge(v, u) && comp_of[v] == usize::MAX {
                    comp_of[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}
