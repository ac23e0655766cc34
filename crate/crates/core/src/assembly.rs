//! Dense PIELM system `H W = T`.
//!
//! Rows come in three blocks, in this order:
//!
//! * interior: `H_k· = Σ_α a_α(x_k) D^α φ(x_k)`, `T_k = f(x_k)`;
//! * spatial boundary: `β₁ φ(y_k)`, `β₁ g(y_k)`;
//! * initial time: `β₂ φ(x_l, 0)`, `β₂ h(x_l)`.
//!
//! Monte Carlo boundary data is drawn once here and frozen into `T`.
//!
//! For activations with a constant offset (sigmoid) the matrix is kept as
//! `H = G + c 1ᵀ`, with `G` built from the centered features `σ − ½`. `G`
//! keeps the digits that the offset would otherwise absorb.
//!
//! # Binary dump layout
//!
//! [`LinearSystem::write_binary`] stores the augmented matrix `[H | T]`:
//! two little-endian `u64` values `rows` and `cols` (where `cols` counts
//! the `T` column), followed by `rows × cols` little-endian `f64` values in
//! row-major order.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{PielmError, Result};
use crate::features::{mat_vec, DerivativeBackend, FeatureNetwork};
use crate::lstsq;
use crate::points::Points;
use crate::problem::PdeProblem;
use crate::sampling::CollocationSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowBlocks {
    pub interior: Range<usize>,
    pub spatial: Range<usize>,
    pub temporal: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    centered: Mat<f64>,
    offset: Option<Vec<f64>>,
    rhs: Vec<f64>,
    blocks: RowBlocks,
    scaling: Scaling,
}

impl LinearSystem {
    /// Wraps an existing matrix as a single interior block.
    pub fn from_parts(matrix: Mat<f64>, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != matrix.nrows() {
            return Err(PielmError::DimensionMismatch {
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        let rows = matrix.nrows();
        Ok(Self {
            centered: matrix,
            offset: None,
            rhs,
            blocks: RowBlocks {
                interior: 0..rows,
                spatial: rows..rows,
                temporal: rows..rows,
            },
            scaling: Scaling::default(),
        })
    }

    /// `H` as a dense matrix.
    pub fn matrix(&self) -> Mat<f64> {
        let mut h = self.centered.clone();
        if let Some(c) = &self.offset {
            for j in 0..h.ncols() {
                for (v, ck) in h.col_mut(j).iter_mut().zip(c) {
                    *v += ck;
                }
            }
        }
        h
    }

    /// `G` in `H = G + c 1ᵀ`; equal to `H` when there is no offset.
    pub fn centered_matrix(&self) -> MatRef<'_, f64> {
        self.centered.as_ref()
    }

    /// `c` in `H = G + c 1ᵀ`, if any entry is nonzero.
    pub fn offset_column(&self) -> Option<&[f64]> {
        self.offset.as_deref()
    }

    /// `H w − T`.
    pub fn residual(&self, weights: &[f64]) -> Vec<f64> {
        let mut r = mat_vec(&self.centered, weights);
        let total: f64 = weights.iter().sum();
        for (k, v) in r.iter_mut().enumerate() {
            if let Some(c) = &self.offset {
                *v += c[k] * total;
            }
            *v -= self.rhs[k];
        }
        r
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_blocks(&self) -> &RowBlocks {
        &self.blocks
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn nrows(&self) -> usize {
        self.centered.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.centered.ncols()
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let (rows, cols) = (self.nrows(), self.ncols() + 1);
        let mut buf = Vec::with_capacity(16 + rows * cols * 8);
        buf.extend_from_slice(&(rows as u64).to_le_bytes());
        buf.extend_from_slice(&(cols as u64).to_le_bytes());
        for k in 0..rows {
            let ck = self.offset.as_ref().map_or(0.0, |c| c[k]);
            for i in 0..self.ncols() {
                buf.extend_from_slice(&(self.centered[(k, i)] + ck).to_le_bytes());
            }
            buf.extend_from_slice(&self.rhs[k].to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Reads a dump written by [`write_binary`](Self::write_binary) back
    /// into `(H, T)`.
    pub fn read_binary(path: impl AsRef<Path>) -> Result<(Mat<f64>, Vec<f64>)> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let invalid = |msg: &str| {
            PielmError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                msg.to_string(),
            ))
        };
        if bytes.len() < 16 {
            return Err(invalid("truncated header"));
        }
        let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if cols == 0 || bytes.len() != 16 + rows * cols * 8 {
            return Err(invalid("payload size does not match header"));
        }
        let value = |k: usize, j: usize| {
            let off = 16 + (k * cols + j) * 8;
            f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
        };
        let h = Mat::from_fn(rows, cols - 1, value);
        let t = (0..rows).map(|k| value(k, cols - 1)).collect();
        Ok((h, t))
    }
}

pub fn assemble(
    problem: &PdeProblem,
    net: &FeatureNetwork,
    colloc: &CollocationSet,
    backend: DerivativeBackend,
    beta1: f64,
    beta2: f64,
) -> Result<LinearSystem> {
    for beta in [beta1, beta2] {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(PielmError::InvalidParameter(format!(
                "row scaling {beta} must be positive"
            )));
        }
    }
    let n_int = colloc.interior.len();
    let n_sb = colloc.spatial_boundary.len();
    let n_tb = colloc.temporal_boundary.len();
    let rows = n_int + n_sb + n_tb;
    let width = net.width();

    let offset = net.activation().offset();
    let (interior, interior_offset) = if n_int > 0 {
        let (g, c) = problem.apply_operator_centered(net, &colloc.interior, backend)?;
        (Some(g), c)
    } else {
        (None, Vec::new())
    };
    let interior_rhs = problem.interior_rhs(&colloc.interior);
    let (spatial, spatial_rhs) =
        scaled_block(problem, net, &colloc.spatial_boundary, beta1, |p| {
            problem.boundary_values(p)
        })?;
    let (temporal, temporal_rhs) =
        scaled_block(problem, net, &colloc.temporal_boundary, beta2, |p| {
            Ok(problem.initial_values(p))
        })?;

    let mut matrix = Mat::<f64>::zeros(rows, width);
    let offsets = [0, n_int, n_int + n_sb];
    for (block, offset) in [&interior, &spatial, &temporal].into_iter().zip(offsets) {
        if let Some(block) = block {
            matrix
                .as_mut()
                .subrows_mut(offset, block.nrows())
                .copy_from(block);
        }
    }
    let mut rhs = interior_rhs;
    rhs.extend(spatial_rhs);
    rhs.extend(temporal_rhs);
    let mut c = interior_offset;
    c.extend(std::iter::repeat_n(offset * beta1, n_sb));
    c.extend(std::iter::repeat_n(offset * beta2, n_tb));
    let offset = c.iter().any(|&v| v != 0.0).then_some(c);

    let blocks = RowBlocks {
        interior: 0..n_int,
        spatial: n_int..n_int + n_sb,
        temporal: n_int + n_sb..rows,
    };
    check_finite(&matrix, &rhs, &blocks)?;
    if let Some(c) = &offset {
        if let Some(row) = c.iter().position(|v| !v.is_finite()) {
            return Err(non_finite(&blocks, row));
        }
    }
    Ok(LinearSystem {
        centered: matrix,
        offset,
        rhs,
        blocks,
        scaling: Scaling { beta1, beta2 },
    })
}

fn scaled_block(
    problem: &PdeProblem,
    net: &FeatureNetwork,
    points: &Points,
    beta: f64,
    data: impl FnOnce(&Points) -> Result<Vec<f64>>,
) -> Result<(Option<Mat<f64>>, Vec<f64>)> {
    if points.is_empty() {
        return Ok((None, Vec::new()));
    }
    let mut features = net.eval_centered_features(&problem.network_inputs(points))?;
    for i in 0..features.ncols() {
        for v in features.col_mut(i).iter_mut() {
            *v *= beta;
        }
    }
    let values = data(points)?.into_iter().map(|v| beta * v).collect();
    Ok((Some(features), values))
}

fn check_finite(matrix: &Mat<f64>, rhs: &[f64], blocks: &RowBlocks) -> Result<()> {
    let mut bad: Option<usize> = rhs.iter().position(|v| !v.is_finite());
    for j in 0..matrix.ncols() {
        if let Some(k) = matrix.col(j).iter().position(|v| !v.is_finite()) {
            bad = Some(bad.map_or(k, |b| b.min(k)));
        }
    }
    match bad {
        None => Ok(()),
        Some(row) => Err(non_finite(blocks, row)),
    }
}

fn non_finite(blocks: &RowBlocks, row: usize) -> PielmError {
    let (block, local) = if blocks.interior.contains(&row) {
        ("interior", row)
    } else if blocks.spatial.contains(&row) {
        ("spatial boundary", row - blocks.spatial.start)
    } else {
        ("temporal boundary", row - blocks.temporal.start)
    };
    PielmError::NonFinite { block, row: local }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowNormRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub interior_row_norms: Option<RowNormRange>,
    pub spatial_row_norms: Option<RowNormRange>,
    pub temporal_row_norms: Option<RowNormRange>,
    /// Number of singular values above `max(rows, cols) · ε · σ_max`.
    pub rank_estimate: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition_number: f64,
}

pub fn condition_report(system: &LinearSystem) -> Result<ConditionReport> {
    let h = system.matrix();
    let h = h.as_ref();
    let row_norms = |range: &Range<usize>| -> Option<RowNormRange> {
        if range.is_empty() {
            return None;
        }
        let mut norms = vec![0.0f64; range.len()];
        for j in 0..h.ncols() {
            let col = h.col(j);
            for (n, k) in norms.iter_mut().zip(range.clone()) {
                *n += col[k] * col[k];
            }
        }
        let norms: Vec<f64> = norms.into_iter().map(f64::sqrt).collect();
        Some(RowNormRange {
            min: norms.iter().copied().fold(f64::INFINITY, f64::min),
            max: norms.iter().copied().fold(0.0, f64::max),
        })
    };
    let s = lstsq::singular_values(h)?;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let sigma_min = s.last().copied().unwrap_or(0.0);
    let tol = h.nrows().max(h.ncols()) as f64 * f64::EPSILON * sigma_max;
    let blocks = system.row_blocks();
    Ok(ConditionReport {
        interior_row_norms: row_norms(&blocks.interior),
        spatial_row_norms: row_norms(&blocks.spatial),
        temporal_row_norms: row_norms(&blocks.temporal),
        rank_estimate: s.iter().filter(|&&v| v > tol).count(),
        sigma_max,
        sigma_min,
        condition_number: if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        },
    })
}
