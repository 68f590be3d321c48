//! Row-major 2-D buffer used for mini-batches (one sample per row).

use crate::nn::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length mismatch");
        Self { rows, cols, data }
    }

    /// Single sample as a 1-row matrix.
    pub fn from_row(row: &[T]) -> Self {
        Self {
            rows: 1,
            cols: row.len(),
            data: row.to_vec(),
        }
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
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product with sixteen independent accumulators.
///
/// A single running sum chains every fused multiply-add on the previous
/// one, which caps throughput at one element per FMA latency and blocks
/// vectorization (the compiler may not reorder float additions). Splitting
/// the reduction across fixed lanes removes the dependency chain while
/// keeping one deterministic summation order.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 16;
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let av = &a[c * LANES..(c + 1) * LANES];
        let bv = &b[c * LANES..(c + 1) * LANES];
        for l in 0..LANES {
            acc[l] += av[l] * bv[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    let mut fold = LANES;
    while fold > 1 {
        fold /= 2;
        for l in 0..fold {
            let hi = acc[l + fold];
            acc[l] += hi;
        }
    }
    acc[0] + tail
}

/// `out[s] = weights · x[s] + bias` for every sample row.
///
/// `weights` is row-major `(out_dim, in_dim)`.
pub(crate) fn affine_forward<T: Scalar>(
    x: &Matrix<T>,
    weights: &[T],
    bias: &[T],
    out_dim: usize,
) -> Matrix<T> {
    let in_dim = x.cols();
    debug_assert_eq!(weights.len(), out_dim * in_dim);
    debug_assert_eq!(bias.len(), out_dim);

    let mut out = Matrix::zeros(x.rows(), out_dim);
    for s in 0..x.rows() {
        let xr = x.row(s);
        let or = out.row_mut(s);
        for (o, ov) in or.iter_mut().enumerate() {
            let wr = &weights[o * in_dim..(o + 1) * in_dim];
            *ov = dot(wr, xr) + bias[o];
        }
    }
    out
}

/// Gradients of the affine map: fills `d_weights`, `d_bias` (accumulated over
/// samples in row order) and returns `dL/dx`.
pub(crate) fn affine_backward<T: Scalar>(
    x: &Matrix<T>,
    weights: &[T],
    d_out: &Matrix<T>,
    d_weights: &mut [T],
    d_bias: &mut [T],
) -> Matrix<T> {
    let in_dim = x.cols();
    let out_dim = d_out.cols();
    debug_assert_eq!(x.rows(), d_out.rows());

    let mut d_x = Matrix::zeros(x.rows(), in_dim);
    for s in 0..x.rows() {
        let xr = x.row(s);
        let gr = d_out.row(s);
        let dxr = d_x.row_mut(s);
        for o in 0..out_dim {
            let g = gr[o];
            if g == T::zero() {
                continue;
            }
            d_bias[o] += g;
            let wr = &weights[o * in_dim..(o + 1) * in_dim];
            let dwr = &mut d_weights[o * in_dim..(o + 1) * in_dim];
            for i in 0..in_dim {
                dwr[i] += g * xr[i];
                dxr[i] += g * wr[i];
            }
        }
    }
    d_x
}
