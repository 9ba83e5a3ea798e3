//! Trajectory simulation of the fuzzy recursion, open loop or under PDC
//! state feedback, with CSV export.
//!
//! Each step evaluates the memberships once and uses the same blend for the
//! controller and the plant (they share the premise variable):
//!
//! ```text
//! h = memberships(x(k))
//! u(k) = sum_j h_j K_j x(k)            (zero without gains)
//! x(k+1) = A*(h) x(k) + B(h) u(k)
//! y(k) = C(h) x(k) + D(h) u(k)
//! ```
//!
//! For interval models `A*` is a caller-selected realization: the upper
//! bound (default), the lower bound, or their midpoint. Exact models ignore
//! the selection.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{mat_add, mat_vec, LinalgError};
use crate::model::{blended_matrices, check_model_positivity, evaluate_memberships, FuzzyModel,
                   MatrixFamily, ModelError};
use crate::synthesis::{self, SynthesisError};
use crate::{Mat, Vec64};

/// Which member of the interval family drives the state recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Realization {
    #[default]
    Upper,
    Lower,
    /// Entrywise midpoint of the bounds.
    Nominal,
}

impl fmt::Display for Realization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Realization::Upper => "upper",
            Realization::Lower => "lower",
            Realization::Nominal => "nominal",
        })
    }
}

impl FromStr for Realization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "upper" => Ok(Realization::Upper),
            "lower" => Ok(Realization::Lower),
            "nominal" => Ok(Realization::Nominal),
            other => Err(format!(
                "unknown realization `{other}` (expected upper, lower or nominal)"
            )),
        }
    }
}

/// One simulated instant: the state, input, output and membership vector at
/// step `k`. `u` and `y` are computed from `x` at the same step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec64,
    pub u: Vec64,
    pub y: Vec64,
    pub h: Vec64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Records for `k = 0..=steps`, in order.
    pub steps: Vec<StepRecord>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    /// Euclidean norm of the state at each recorded step.
    pub fn state_norms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.x.norm2()).collect()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("step count must be positive")]
    ZeroSteps,
    #[error("x0[{index}] = {value} is negative but the model is positive")]
    NegativeStart { index: usize, value: f64 },
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("trajectory has no records")]
    EmptyTrajectory,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gains(#[from] SynthesisError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Runs the recursion for `steps` steps, recording `steps + 1` instants.
/// A negative start is an error for positive models and a warning otherwise.
pub fn simulate(
    model: &FuzzyModel,
    gains: Option<&[Mat]>,
    x0: &Vec64,
    steps: usize,
    realization: Realization,
) -> Result<Trajectory, SimError> {
    if steps == 0 {
        return Err(SimError::ZeroSteps);
    }
    if x0.dim() != model.n {
        return Err(ModelError::StateDim {
            expected: model.n,
            got: x0.dim(),
        }
        .into());
    }
    if let Some(gains) = gains {
        synthesis::check_gain_shapes(model, gains)?;
    }
    let mut warnings = Vec::new();
    if let Some(idx) = x0.iter().position(|v| *v < 0.0) {
        if check_model_positivity(model).positive {
            return Err(SimError::NegativeStart {
                index: idx,
                value: x0[idx],
            });
        }
        warnings.push(format!(
            "x0[{idx}] is negative; the trajectory may leave the nonnegative orthant"
        ));
    }

    let a_family = match realization {
        Realization::Upper => MatrixFamily::AUpper,
        Realization::Lower => MatrixFamily::ALower,
        Realization::Nominal => MatrixFamily::AUpper, // blended with ALower below
    };
    let mut records = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    for k in 0..=steps {
        let h = evaluate_memberships(model, &x)?;
        let u = match gains {
            None => Vec64::zeros(model.m),
            Some(gains) => {
                let mut acc = vec![0.0; model.m];
                for (j, kmat) in gains.iter().enumerate() {
                    let kx = mat_vec(kmat, &x)?;
                    for (a, v) in acc.iter_mut().zip(kx.iter()) {
                        *a += h[j] * *v;
                    }
                }
                finite_vector(acc, k)?
            }
        };
        let a_blend = {
            let upperish = blended_matrices(model, &h, a_family);
            if realization == Realization::Nominal {
                let lower = blended_matrices(model, &h, MatrixFamily::ALower);
                mat_add(&upperish, &lower)?.scale(&0.5)
            } else {
                upperish
            }
        };
        let b_blend = blended_matrices(model, &h, MatrixFamily::B);
        let c_blend = blended_matrices(model, &h, MatrixFamily::C);
        let d_blend = blended_matrices(model, &h, MatrixFamily::D);

        let y = add_vecs(&mat_vec(&c_blend, &x)?, &mat_vec(&d_blend, &u)?, k)?;
        let x_next = add_vecs(&mat_vec(&a_blend, &x)?, &mat_vec(&b_blend, &u)?, k + 1)?;
        records.push(StepRecord {
            k,
            x: x.clone(),
            u,
            y,
            h,
        });
        x = x_next;
    }
    Ok(Trajectory {
        steps: records,
        warnings,
    })
}

fn finite_vector(data: Vec<f64>, step: usize) -> Result<Vec64, SimError> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite { step });
    }
    Ok(Vec64::new(data).expect("checked finite"))
}

fn add_vecs(a: &Vec64, b: &Vec64, step: usize) -> Result<Vec64, SimError> {
    let data = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| *x + *y)
        .collect::<Vec<f64>>();
    finite_vector(data, step)
}

/// Writes a trajectory as CSV with header `k,x1..xn,u1..um,y1..yl,h1..hr`,
/// one row per recorded step, floats with 9 significant digits.
pub fn export_csv(t: &Trajectory, path: impl AsRef<Path>) -> Result<(), SimError> {
    let path = path.as_ref();
    std::fs::write(path, trajectory_csv(t)?).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The CSV text behind [`export_csv`], usable without touching the
/// filesystem.
pub fn trajectory_csv(t: &Trajectory) -> Result<String, SimError> {
    let first = t.steps.first().ok_or(SimError::EmptyTrajectory)?;
    let mut out = String::from("k");
    for (prefix, len) in [
        ("x", first.x.dim()),
        ("u", first.u.dim()),
        ("y", first.y.dim()),
        ("h", first.h.dim()),
    ] {
        for i in 1..=len {
            out.push_str(&format!(",{prefix}{i}"));
        }
    }
    out.push('\n');
    for rec in &t.steps {
        out.push_str(&rec.k.to_string());
        for field in [&rec.x, &rec.u, &rec.y, &rec.h] {
            for v in field.iter() {
                out.push_str(&format!(",{v:.8e}"));
            }
        }
        out.push('\n');
    }
    Ok(out)
}
