//! Erasure operators.
//!
//! SAL keeps the directions of the input space that covary least with the
//! aligned guarded records: the left singular vectors of `Ω_π` past the first
//! `r`, plus everything orthogonal to `Ω_π`'s column space. INLP repeatedly
//! trains a linear probe for the guarded labels and projects its separators
//! away. Both yield orthogonal projections, applied to centered inputs.

use alloc::format;
use alloc::vec::Vec;

use crate::assignment::{Assignment, GuardedRecords};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, cross_covariance, dot, norm2, numerical_rank, orthonormal_complement, svd, Matrix};
use crate::probe::{majority_rate, LogisticProbe, ProbeConfig};

/// INLP stops once a fresh probe is within this margin of the majority rate.
pub const INLP_STOP_MARGIN: f64 = 0.02;

/// How many top singular directions SAL removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemovalRank {
    Fixed(usize),
    /// Numerical rank of `Ω_π`, capped at the guarded dimension.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EraserKind {
    Sal {
        /// `d × (d − removed)`, orthonormal columns.
        basis: Matrix,
        removed: usize,
        /// Emit coordinates in `basis` instead of mapping back to `ℝ^d`.
        reduced: bool,
    },
    Inlp {
        /// `d × d`, symmetric and idempotent.
        projection: Matrix,
        iterations: usize,
        /// Probe accuracy measured at the start of each round.
        accuracies: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eraser {
    pub kind: EraserKind,
    pub input_means: Vec<f64>,
}

impl Eraser {
    pub fn dim(&self) -> usize {
        self.input_means.len()
    }

    /// Width of [`apply_eraser`]'s output.
    pub fn output_dim(&self) -> usize {
        match &self.kind {
            EraserKind::Sal { basis, reduced: true, .. } => basis.cols(),
            _ => self.dim(),
        }
    }

    /// The `d × d` orthogonal projection this eraser applies.
    pub fn projection(&self) -> Matrix {
        match &self.kind {
            EraserKind::Sal { basis, .. } => basis.matmul(&basis.transpose()).expect("square product"),
            EraserKind::Inlp { projection, .. } => projection.clone(),
        }
    }

    /// SAL only: switch to reduced-coordinate output.
    pub fn with_reduced_output(mut self, on: bool) -> Self {
        if let EraserKind::Sal { reduced, .. } = &mut self.kind {
            *reduced = on;
        }
        self
    }
}

/// Fits SAL on the alignment `pi` between `x` and the records.
pub fn fit_sal(x: &Matrix, records: &GuardedRecords, pi: &Assignment, rank: RemovalRank) -> Result<Eraser> {
    let d = x.cols();
    let (xc, input_means) = center_columns(x);
    let f = svd(&cross_covariance(&xc, records.z(), pi)?)?;
    let thin = f.u.cols();
    let r = match rank {
        RemovalRank::Auto => match numerical_rank(&f.sigma) {
            0 => return Err(Error::invalid("cross-covariance is zero: nothing to remove")),
            k => k.min(records.dim()),
        },
        RemovalRank::Fixed(0) => return Err(Error::invalid("removal rank must be at least 1")),
        RemovalRank::Fixed(r) if r >= d => {
            return Err(Error::invalid(format!("removal rank {r} must be below input dim {d}")))
        }
        RemovalRank::Fixed(r) if r > thin => {
            return Err(Error::invalid(format!("removal rank {r} exceeds the {thin} singular directions")))
        }
        RemovalRank::Fixed(r) => r,
    };
    if r >= d {
        return Err(Error::invalid(format!("removal rank {r} must be below input dim {d}")));
    }
    let u_cols: Vec<Vec<f64>> = (0..thin).map(|j| f.u.column(j)).collect();
    let mut kept: Vec<Vec<f64>> = u_cols[r..].to_vec();
    kept.extend(orthonormal_complement(&u_cols, d, d - thin));
    let basis = Matrix::from_columns(&kept)?;
    Ok(Eraser { kind: EraserKind::Sal { basis, removed: r, reduced: false }, input_means })
}

/// Fits an iterated nullspace projection against the class labels `z_labels`.
/// `max_rounds = 0` yields the identity.
pub fn fit_inlp(x: &Matrix, z_labels: &[usize], max_rounds: usize) -> Result<Eraser> {
    fit_inlp_with(x, z_labels, max_rounds, &ProbeConfig::default())
}

pub fn fit_inlp_with(x: &Matrix, z_labels: &[usize], max_rounds: usize, probe: &ProbeConfig) -> Result<Eraser> {
    if z_labels.len() != x.rows() {
        return Err(Error::invalid(format!("{} labels for {} rows", z_labels.len(), x.rows())));
    }
    if z_labels.iter().all(|&c| c == z_labels[0]) {
        return Err(Error::invalid("guarded labels are constant"));
    }
    let d = x.cols();
    let (xc, input_means) = center_columns(x);
    let baseline = majority_rate(z_labels);
    let mut removed: Vec<Vec<f64>> = Vec::new();
    let mut projection = Matrix::identity(d);
    let mut accuracies = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_rounds {
        let xp = xc.matmul(&projection)?;
        let p = LogisticProbe::fit(&xp, z_labels, probe)?;
        let acc = p.accuracy(&xp, z_labels)?;
        accuracies.push(acc);
        if acc <= baseline + INLP_STOP_MARGIN {
            break;
        }
        let before = removed.len();
        for w in p.directions() {
            let mut v = projection.matmul(&Matrix::new(d, 1, w.clone())?)?.into_vec();
            for _ in 0..2 {
                for q in &removed {
                    let c = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
                }
            }
            let nv = norm2(&v);
            if nv > 1e-10 && removed.len() < d {
                v.iter_mut().for_each(|vi| *vi /= nv);
                removed.push(v);
            }
        }
        if removed.len() == before {
            break;
        }
        iterations += 1;
        projection = nullspace_projection(&removed, d);
    }
    Ok(Eraser { kind: EraserKind::Inlp { projection, iterations, accuracies }, input_means })
}

/// `I − Q Qᵀ` for orthonormal `q`.
fn nullspace_projection(q: &[Vec<f64>], d: usize) -> Matrix {
    let mut p = Matrix::identity(d);
    for v in q {
        for i in 0..d {
            for j in 0..d {
                p[(i, j)] -= v[i] * v[j];
            }
        }
    }
    p
}

/// Centers `x` with the fitted means and projects it.
pub fn apply_eraser(e: &Eraser, x: &Matrix) -> Result<Matrix> {
    if x.cols() != e.dim() {
        return Err(Error::invalid(format!("eraser expects {} columns, got {}", e.dim(), x.cols())));
    }
    let xc = x.subtract_row_vector(&e.input_means)?;
    match &e.kind {
        EraserKind::Sal { basis, reduced, .. } => {
            let coords = xc.matmul(basis)?;
            if *reduced {
                Ok(coords)
            } else {
                coords.matmul(&basis.transpose())
            }
        }
        EraserKind::Inlp { projection, .. } => xc.matmul(projection),
    }
}
