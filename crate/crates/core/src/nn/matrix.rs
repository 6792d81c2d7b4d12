use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major values, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::InvalidInput(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite matrix entry at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// `out = x · wᵀ + b` where `w` is `out_dim × in_dim` row-major.
pub(crate) fn affine(x: &Matrix, weight: &[f64], bias: &[f64], out_dim: usize) -> Matrix {
    let in_dim = x.cols();
    debug_assert_eq!(weight.len(), in_dim * out_dim);
    let mut out = Matrix::zeros(x.rows(), out_dim);
    for b in 0..x.rows() {
        let xr = x.row(b);
        let or = out.row_mut(b);
        for (o, slot) in or.iter_mut().enumerate() {
            let w = &weight[o * in_dim..(o + 1) * in_dim];
            let mut acc = bias[o];
            for (wi, xi) in w.iter().zip(xr) {
                acc += wi * xi;
            }
            *slot = acc;
        }
    }
    out
}

/// Accumulates the gradients of an affine layer and returns the gradient
/// with respect to its input.
pub(crate) fn affine_backward(
    x: &Matrix,
    weight: &[f64],
    d_out: &Matrix,
    d_weight: &mut [f64],
    d_bias: &mut [f64],
) -> Matrix {
    let in_dim = x.cols();
    let out_dim = d_out.cols();
    let mut d_x = Matrix::zeros(x.rows(), in_dim);
    for b in 0..x.rows() {
        let xr = x.row(b);
        let gr = d_out.row(b);
        let dxr = d_x.row_mut(b);
        for o in 0..out_dim {
            let g = gr[o];
            if g == 0.0 {
                continue;
            }
            d_bias[o] += g;
            let w = &weight[o * in_dim..(o + 1) * in_dim];
            let dw = &mut d_weight[o * in_dim..(o + 1) * in_dim];
            for i in 0..in_dim {
                dw[i] += g * xr[i];
                dxr[i] += g * w[i];
            }
        }
    }
    d_x
}
