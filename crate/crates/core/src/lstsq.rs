//! Minimum-norm least squares, `Ŵ = H†T`.
//!
//! The SVD route reduces a tall `H` with a Householder QR first and takes
//! the SVD of the small triangular factor; singular values below
//! `rcond · σ_max` are treated as zero. The column-pivoted QR route returns
//! a basic solution (zero on columns beyond the numerical rank), which is a
//! least-squares minimizer but not necessarily the minimum-norm one.

use std::time::Instant;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::qr::no_pivoting::factor as qr_factor;
use faer::{Conj, Mat, MatRef, Par};

use crate::assembly::LinearSystem;
use crate::error::{PielmError, Result};
use crate::features::mat_vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    #[default]
    Svd,
    ColumnPivotedQr,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::Svd => "svd",
            SolveMethod::ColumnPivotedQr => "qr",
        }
    }
}

impl std::str::FromStr for SolveMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(SolveMethod::Svd),
            "qr" | "column-pivoted-qr" | "colpivqr" => Ok(SolveMethod::ColumnPivotedQr),
            other => Err(format!("unknown solver `{other}` (expected svd or qr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative singular-value (or pivot) cutoff.
    pub rcond: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Svd,
            rcond: 1e-12,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if (0.0..1.0).contains(&self.rcond) {
            Ok(())
        } else {
            Err(PielmError::InvalidParameter(format!(
                "rcond {} outside [0, 1)",
                self.rcond
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub residual_norm: f64,
    /// `‖HW − T‖ / ‖T‖`, or the plain residual norm when `T = 0`.
    pub relative_residual: f64,
    pub effective_rank: usize,
    pub wall_time_seconds: f64,
}

pub fn solve_min_norm(
    system: &LinearSystem,
    options: SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let (weights, rank) = match system.offset_column() {
        Some(c) if system.ncols() > 1 => {
            solve_with_offset(system.centered_matrix(), c, system.rhs(), options)?
        }
        Some(_) => solve_dense(system.matrix().as_ref(), system.rhs(), options)?,
        None => solve_dense(system.centered_matrix(), system.rhs(), options)?,
    };
    let residual = system.residual(&weights);
    let residual_norm = norm(&residual);
    let rhs_norm = norm(system.rhs());
    let report = SolveReport {
        method: options.method,
        residual_norm,
        relative_residual: if rhs_norm > 0.0 {
            residual_norm / rhs_norm
        } else {
            residual_norm
        },
        effective_rank: rank,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((weights, report))
}

/// Solves `min ‖H w − t‖` on raw data; returns the weights and the
/// numerical rank used.
pub fn solve_dense(
    h: MatRef<'_, f64>,
    t: &[f64],
    options: SolveOptions,
) -> Result<(Vec<f64>, usize)> {
    options.validate()?;
    let (m, n) = h.shape();
    if t.len() != m {
        return Err(PielmError::DimensionMismatch {
            expected: m,
            got: t.len(),
        });
    }
    if let Some(row) = first_non_finite_row(h, t) {
        return Err(PielmError::NonFinite {
            block: "system",
            row,
        });
    }
    if m == 0 || n == 0 {
        return Ok((vec![0.0; n], 0));
    }
    solve_owned(h.to_owned(), t, options)
}

fn solve_owned(h: Mat<f64>, t: &[f64], options: SolveOptions) -> Result<(Vec<f64>, usize)> {
    match options.method {
        SolveMethod::Svd => svd_solve(h, t, options.rcond),
        SolveMethod::ColumnPivotedQr => col_piv_qr_solve(h.as_ref(), t, options.rcond),
    }
}

/// Solves `min ‖(G + c 1ᵀ) w − t‖` without forming `G + c 1ᵀ`.
///
/// With the Householder reflection `P` that maps `1/√n` to `e₁`,
/// `(G + c 1ᵀ) P = G P + √n c e₁ᵀ`. Column 0 of the rotated matrix is
/// rescaled to the root-mean-square norm of the others before the solve,
/// so the cutoff `rcond · σ_max` is taken on the equilibrated matrix.
pub fn solve_with_offset(
    g: MatRef<'_, f64>,
    c: &[f64],
    t: &[f64],
    options: SolveOptions,
) -> Result<(Vec<f64>, usize)> {
    options.validate()?;
    let (m, n) = g.shape();
    for len in [c.len(), t.len()] {
        if len != m {
            return Err(PielmError::DimensionMismatch {
                expected: m,
                got: len,
            });
        }
    }
    if let Some(row) = first_non_finite_row(g, t).or_else(|| c.iter().position(|v| !v.is_finite()))
    {
        return Err(PielmError::NonFinite {
            block: "system",
            row,
        });
    }
    if m == 0 || n == 0 {
        return Ok((vec![0.0; n], 0));
    }
    let root = (n as f64).sqrt();
    let mut v = vec![1.0 / root; n];
    v[0] -= 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let reflect = |x: &mut [f64], coef: f64| {
        for (xj, vj) in x.iter_mut().zip(&v) {
            *xj -= coef * vj;
        }
    };

    let mut a = g.to_owned();
    let gv = mat_vec(&a, &v);
    for (j, &vj) in v.iter().enumerate() {
        let f = 2.0 * vj / vv;
        for (x, p) in a.col_mut(j).iter_mut().zip(&gv) {
            *x -= f * p;
        }
    }
    for (x, ck) in a.col_mut(0).iter_mut().zip(c) {
        *x += root * ck;
    }
    let col_norm = |a: &Mat<f64>, j: usize| a.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
    let first = col_norm(&a, 0);
    let rest = ((1..n).map(|j| col_norm(&a, j).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let scale = if first > 0.0 && rest > 0.0 {
        rest / first
    } else {
        1.0
    };
    for x in a.col_mut(0).iter_mut() {
        *x *= scale;
    }

    let (mut y, rank) = solve_owned(a, t, options)?;
    y[0] *= scale;
    let vy: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
    reflect(&mut y, 2.0 * vy / vv);
    Ok((y, rank))
}

fn first_non_finite_row(h: MatRef<'_, f64>, t: &[f64]) -> Option<usize> {
    let mut bad: Option<usize> = t.iter().position(|v| !v.is_finite());
    for j in 0..h.ncols() {
        if let Some(k) = h.col(j).iter().position(|v| !v.is_finite()) {
            bad = Some(bad.map_or(k, |b| b.min(k)));
        }
    }
    bad
}

/// Householder QR of a tall matrix: returns `R` (n × n) and `Qᵀ t`
/// truncated to its first `n` entries.
fn reduce_tall(mut qr: Mat<f64>, t: &[f64]) -> (Mat<f64>, Vec<f64>) {
    let (m, n) = qr.shape();
    let par = faer::get_global_parallelism();
    let block_size = qr_factor::recommended_block_size::<f64>(m, n);
    let mut coeff = Mat::<f64>::zeros(block_size, n);
    qr_factor::qr_in_place(
        qr.as_mut(),
        coeff.as_mut(),
        par,
        MemStack::new(&mut MemBuffer::new(qr_factor::qr_in_place_scratch::<f64>(
            m,
            n,
            block_size,
            par,
            Default::default(),
        ))),
        Default::default(),
    );
    let r = Mat::from_fn(n, n, |i, j| if i <= j { qr[(i, j)] } else { 0.0 });
    for j in 0..n {
        for i in 0..j {
            qr[(i, j)] = 0.0;
        }
        qr[(j, j)] = 1.0;
    }
    let mut rhs = Mat::from_fn(m, 1, |i, _| t[i]);
    householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
        qr.as_ref(),
        coeff.as_ref(),
        Conj::No,
        rhs.as_mut(),
        par,
        MemStack::new(&mut MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<
                f64,
            >(m, block_size, 1),
        )),
    );
    let qt: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    (r, qt)
}

fn svd_solve(h: Mat<f64>, t: &[f64], rcond: f64) -> Result<(Vec<f64>, usize)> {
    let (m, n) = h.shape();
    let (svd, rhs) = if m >= n {
        let (r, qt) = reduce_tall(h, t);
        (r.thin_svd().map_err(|_| PielmError::SvdFailed)?, qt)
    } else {
        (h.thin_svd().map_err(|_| PielmError::SvdFailed)?, t.to_vec())
    };
    let u = svd.U();
    let v = svd.V();
    let s = svd.S().column_vector();
    let k = s.nrows();
    let s_max = (0..k).map(|i| s[i]).fold(0.0, f64::max);
    let cutoff = rcond * s_max;
    let mut weights = vec![0.0; n];
    let mut rank = 0;
    for i in 0..k {
        let si = s[i];
        if !(si > cutoff) || si == 0.0 {
            continue;
        }
        rank += 1;
        let coef: f64 = u.col(i).iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / si;
        for (w, vj) in weights.iter_mut().zip(v.col(i).iter()) {
            *w += coef * vj;
        }
    }
    Ok((weights, rank))
}

fn col_piv_qr_solve(h: MatRef<'_, f64>, t: &[f64], rcond: f64) -> Result<(Vec<f64>, usize)> {
    let (m, n) = h.shape();
    let par = faer::get_global_parallelism();
    let qr = h.col_piv_qr();
    let size = m.min(n);
    let mut rhs = Mat::from_fn(m, 1, |i, _| t[i]);
    householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
        qr.Q_basis(),
        qr.Q_coeff(),
        Conj::No,
        rhs.as_mut(),
        par,
        MemStack::new(&mut MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<
                f64,
            >(m, qr.Q_coeff().nrows(), 1),
        )),
    );
    let r = qr.R();
    let r00 = if size > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = (0..size)
        .take_while(|&i| r[(i, i)].abs() > rcond * r00 && r[(i, i)] != 0.0)
        .count();
    let mut y = vec![0.0; n];
    for i in (0..rank).rev() {
        let mut acc = rhs[(i, 0)];
        for j in i + 1..rank {
            acc -= r[(i, j)] * y[j];
        }
        y[i] = acc / r[(i, i)];
    }
    // A Pᵀ = QR: column j of R is column forward[j] of A.
    let (forward, _) = qr.P().arrays();
    let mut weights = vec![0.0; n];
    for (j, &col) in forward.iter().enumerate() {
        weights[col] = y[j];
    }
    Ok((weights, rank))
}

/// Singular values of `h` in nonincreasing order.
pub fn singular_values(h: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let (m, n) = h.shape();
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let mut s = if m >= n {
        let (r, _) = reduce_tall(h.to_owned(), &vec![0.0; m]);
        r.singular_values().map_err(|_| PielmError::SvdFailed)?
    } else {
        h.singular_values().map_err(|_| PielmError::SvdFailed)?
    };
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residual statistics per row block, with the β row scaling divided back
/// out so they refer to the unscaled equations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub interior_rms: f64,
    pub spatial_rms: f64,
    pub temporal_rms: f64,
    pub max_abs: f64,
}

pub fn residual_stats(system: &LinearSystem, weights: &[f64]) -> Result<ResidualStats> {
    if weights.len() != system.ncols() {
        return Err(PielmError::DimensionMismatch {
            expected: system.ncols(),
            got: weights.len(),
        });
    }
    let r = system.residual(weights);
    let blocks = system.row_blocks();
    let scaling = system.scaling();
    let rms = |range: std::ops::Range<usize>, scale: f64| {
        if range.is_empty() {
            0.0
        } else {
            let len = range.len() as f64;
            (r[range].iter().map(|v| (v / scale).powi(2)).sum::<f64>() / len).sqrt()
        }
    };
    let max_abs = blocks
        .interior
        .clone()
        .map(|k| r[k].abs())
        .chain(blocks.spatial.clone().map(|k| (r[k] / scaling.beta1).abs()))
        .chain(
            blocks
                .temporal
                .clone()
                .map(|k| (r[k] / scaling.beta2).abs()),
        )
        .fold(0.0, f64::max);
    Ok(ResidualStats {
        interior_rms: rms(blocks.interior.clone(), 1.0),
        spatial_rms: rms(blocks.spatial.clone(), scaling.beta1),
        temporal_rms: rms(blocks.temporal.clone(), scaling.beta2),
        max_abs,
    })
}

/// Parallelism used for dense kernels: sequential for one thread,
/// rayon otherwise.
pub fn set_dense_threads(threads: usize) {
    let par = if threads <= 1 {
        Par::Seq
    } else {
        Par::rayon(threads)
    };
    faer::set_global_parallelism(par);
}
