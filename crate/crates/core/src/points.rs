use faer::Mat;

use crate::error::{PielmError, Result};

/// A batch of points stored row-major, one point per row.
///
/// For time-dependent problems each point is `(x₁, …, x_d, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(PielmError::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(PielmError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn point_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, point: &[f64]) {
        assert_eq!(
            point.len(),
            self.dim,
            "point length must match batch dimension"
        );
        self.data.extend_from_slice(point);
    }

    /// Copy with coordinate `j` shifted by `delta` in every point.
    pub fn shifted(&self, j: usize, delta: f64) -> Self {
        let mut out = self.clone();
        for p in out.data.chunks_exact_mut(self.dim) {
            p[j] += delta;
        }
        out
    }

    pub fn to_mat(&self) -> Mat<f64> {
        Mat::from_fn(self.len(), self.dim, |k, j| self.data[k * self.dim + j])
    }
}
