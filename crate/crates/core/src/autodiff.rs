//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] records every operation of one forward pass on a tape. Parameters are
//! bound lazily from a [`ParamStore`]; [`Graph::backward`] walks the tape in reverse and
//! returns gradients for every bound parameter. Every op keeps its forward value so the
//! backward rules can reuse activations.

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{Matrix, Scalar};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Geometry of a 2-D convolution over a `channels x (height*width)` feature map.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, T),
    LnClamped(Var, T),
    Square(Var),
    Sum(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    SegmentMean(Var, Vec<usize>, Vec<T>),
    SegmentMax(Var, Vec<usize>),
    PairTransform(Var, Vec<[T; 4]>),
    Transpose(Var),
    MeanCols(Var),
    Conv2d { input: Var, weight: Var, bias: Var, geom: ConvGeom, cols: Matrix<T> },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

pub struct Graph<'p, T: Scalar> {
    nodes: Vec<Node<T>>,
    store: &'p ParamStore<T>,
    bound: Vec<Option<Var>>,
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(store: &'p ParamStore<T>) -> Self {
        Self { nodes: Vec::new(), store, bound: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'p ParamStore<T> {
        self.store
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    #[inline]
    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar() on non-scalar node");
        m.data()[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Matrix<T>) -> Var {
        self.push(m, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.push(self.store.get(id).clone(), Op::Param(id));
        self.bound[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (ra, ca) = self.shape(a);
        assert_eq!(self.shape(row), (1, ca), "add_row: bias shape mismatch");
        let bias = self.value(row).data().to_vec();
        let mut out = self.value(a).clone();
        for r in 0..ra {
            for (o, &b) in out.row_mut(r).iter_mut().zip(&bias) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    /// `mul * a + add`.
    pub fn affine(&mut self, a: Var, mul: T, add: T) -> Var {
        let out = self.value(a).map(|x| mul * x + add);
        self.push(out, Op::Affine(a, mul))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.affine(a, s, T::zero())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.tanh());
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    /// `ln(max(a, eps))`; the gradient is zero where the clamp is active.
    pub fn ln_clamped(&mut self, a: Var, eps: T) -> Var {
        let out = self.value(a).map(|x| if x > eps { x } else { eps }.ln());
        self.push(out, Op::LnClamped(a, eps))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::Sum(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.shape(parts[0]).0;
        let total: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Matrix::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows(), rows, "concat_cols: row mismatch");
            for r in 0..rows {
                out.row_mut(r)[offset..offset + m.cols()].copy_from_slice(m.row(r));
            }
            offset += m.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols(), cols, "concat_rows: column mismatch");
            data.extend_from_slice(m.data());
            rows += m.rows();
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        assert!(start + len <= m.cols(), "slice_cols out of range");
        let mut out = Matrix::zeros(m.rows(), len);
        for r in 0..m.rows() {
            out.row_mut(r).copy_from_slice(&m.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    /// Row `r` of the output is row `idx[r]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let m = self.value(a);
        let mut out = Matrix::zeros(idx.len(), m.cols());
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(m.row(i));
        }
        self.push(out, Op::GatherRows(a, idx.to_vec()))
    }

    /// Row `s` of the output is the mean of the rows `r` of `a` with `segment[r] == s`.
    /// Empty segments produce zero rows.
    pub fn segment_mean(&mut self, a: Var, segment: &[usize], n_segments: usize) -> Var {
        let m = self.value(a);
        assert_eq!(segment.len(), m.rows(), "segment_mean: one segment id per row");
        let mut counts = vec![0usize; n_segments];
        for &s in segment {
            counts[s] += 1;
        }
        let inv: Vec<T> =
            counts.iter().map(|&c| if c == 0 { T::zero() } else { T::one() / T::from_usize(c).unwrap() }).collect();
        let mut out = Matrix::zeros(n_segments, m.cols());
        for (r, &s) in segment.iter().enumerate() {
            let w = inv[s];
            for (o, &v) in out.row_mut(s).iter_mut().zip(m.row(r)) {
                *o += w * v;
            }
        }
        let rows: Vec<usize> = segment.to_vec();
        self.push(out, Op::SegmentMean(a, rows, inv))
    }

    /// Column-wise max over the rows of each segment. Every segment must be non-empty.
    pub fn segment_max(&mut self, a: Var, segment: &[usize], n_segments: usize) -> Var {
        let m = self.value(a);
        assert_eq!(segment.len(), m.rows());
        let cols = m.cols();
        let mut out = Matrix::filled(n_segments, cols, T::neg_infinity());
        let mut arg = vec![usize::MAX; n_segments * cols];
        for (r, &s) in segment.iter().enumerate() {
            for c in 0..cols {
                let v = m.get(r, c);
                if arg[s * cols + c] == usize::MAX || v > out.get(s, c) {
                    out.set(s, c, v);
                    arg[s * cols + c] = r;
                }
            }
        }
        assert!(arg.iter().all(|&a| a != usize::MAX), "segment_max: empty segment");
        self.push(out, Op::SegmentMax(a, arg))
    }

    /// Applies a per-row 2x2 linear map `[a b; c d]` to every consecutive `(x, y)` pair of
    /// the row: `(x, y) -> (a x + b y, c x + d y)`.
    pub fn pair_transform(&mut self, a: Var, mats: &[[T; 4]]) -> Var {
        let m = self.value(a);
        assert_eq!(mats.len(), m.rows());
        assert_eq!(m.cols() % 2, 0, "pair_transform needs an even column count");
        let mut out = m.clone();
        for (r, mat) in mats.iter().enumerate() {
            let row = out.row_mut(r);
            for pair in row.chunks_exact_mut(2) {
                let (x, y) = (pair[0], pair[1]);
                pair[0] = mat[0] * x + mat[1] * y;
                pair[1] = mat[2] * x + mat[3] * y;
            }
        }
        self.push(out, Op::PairTransform(a, mats.to_vec()))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Mean over columns: `r x c -> r x 1`.
    pub fn mean_cols(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let n = T::from_usize(m.cols()).unwrap();
        let data = (0..m.rows()).map(|r| m.row(r).iter().copied().sum::<T>() / n).collect();
        self.push(Matrix::from_vec(m.rows(), 1, data), Op::MeanCols(a))
    }

    /// 2-D convolution. `input` is `in_channels x (height*width)`, `weight` is
    /// `out_channels x (in_channels*kernel*kernel)`, `bias` is `1 x out_channels`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, geom: ConvGeom) -> Var {
        assert_eq!(self.shape(input), (geom.in_channels, geom.height * geom.width), "conv2d input shape");
        assert_eq!(self.shape(weight), (geom.out_channels, geom.patch_len()), "conv2d weight shape");
        assert_eq!(self.shape(bias), (1, geom.out_channels), "conv2d bias shape");
        let cols = im2col(self.value(input), &geom);
        let mut out = self.value(weight).matmul(&cols);
        let b = self.value(bias).data().to_vec();
        for (c, &bc) in b.iter().enumerate() {
            for v in out.row_mut(c) {
                *v += bc;
            }
        }
        self.push(out, Op::Conv2d { input, weight, bias, geom, cols })
    }

    /// Reverse pass from a 1x1 `loss` node.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar loss");
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, T::one()));
        let mut out = Gradients::empty(self.store.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(self.value(*b));
                    let gb = self.value(*a).matmul_tn(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.scale(-T::one()));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in gr.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Affine(a, mul) => acc(&mut grads, *a, g.scale(*mul)),
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |gv, y| gv * (T::one() - y * y));
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |gv, y| gv * y * (T::one() - y));
                    acc(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = g.zip_map(self.value(*a), |gv, x| if x > T::zero() { gv } else { T::zero() });
                    acc(&mut grads, *a, ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let s = *slope;
                    let ga = g.zip_map(self.value(*a), |gv, x| if x > T::zero() { gv } else { s * gv });
                    acc(&mut grads, *a, ga);
                }
                Op::LnClamped(a, eps) => {
                    let e = *eps;
                    let ga = g.zip_map(self.value(*a), |gv, x| if x > e { gv / x } else { T::zero() });
                    acc(&mut grads, *a, ga);
                }
                Op::Square(a) => {
                    let two = T::one() + T::one();
                    let ga = g.zip_map(self.value(*a), |gv, x| two * x * gv);
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, Matrix::filled(r, c, g.data()[0]));
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.shape(p);
                        let mut gp = Matrix::zeros(r, c);
                        for row in 0..r {
                            gp.row_mut(row).copy_from_slice(&g.row(row)[offset..offset + c]);
                        }
                        offset += c;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.shape(p);
                        let gp = Matrix::from_vec(r, c, g.data()[offset * c..(offset + r) * c].to_vec());
                        offset += r;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    for row in 0..r {
                        ga.row_mut(row)[*start..*start + g.cols()].copy_from_slice(g.row(row));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    for (row, &src) in idx.iter().enumerate() {
                        for (o, &v) in ga.row_mut(src).iter_mut().zip(g.row(row)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentMean(a, segment, inv) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    for (row, &s) in segment.iter().enumerate() {
                        let w = inv[s];
                        for (o, &v) in ga.row_mut(row).iter_mut().zip(g.row(s)) {
                            *o = w * v;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentMax(a, arg) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    let cols = g.cols();
                    for (k, &src) in arg.iter().enumerate() {
                        let (s, col) = (k / cols, k % cols);
                        let cur = ga.get(src, col);
                        ga.set(src, col, cur + g.get(s, col));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::PairTransform(a, mats) => {
                    let mut ga = g.clone();
                    for (r, mat) in mats.iter().enumerate() {
                        for pair in ga.row_mut(r).chunks_exact_mut(2) {
                            let (gx, gy) = (pair[0], pair[1]);
                            pair[0] = mat[0] * gx + mat[2] * gy;
                            pair[1] = mat[1] * gx + mat[3] * gy;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::MeanCols(a) => {
                    let (r, c) = self.shape(*a);
                    let n = T::from_usize(c).unwrap();
                    let mut ga = Matrix::zeros(r, c);
                    for row in 0..r {
                        let v = g.get(row, 0) / n;
                        ga.row_mut(row).iter_mut().for_each(|o| *o = v);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Conv2d { input, weight, bias, geom, cols } => {
                    let gw = g.matmul_nt(cols);
                    let gb = Matrix::row_vector((0..g.rows()).map(|r| g.row(r).iter().copied().sum()).collect());
                    let gcols = self.value(*weight).matmul_tn(&g);
                    acc(&mut grads, *weight, gw);
                    acc(&mut grads, *bias, gb);
                    acc(&mut grads, *input, col2im(&gcols, geom));
                }
            }
        }
        out
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn im2col<T: Scalar>(input: &Matrix<T>, g: &ConvGeom) -> Matrix<T> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let mut cols = Matrix::zeros(g.patch_len(), oh * ow);
    for c in 0..g.in_channels {
        let plane = input.row(c);
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let dst = cols.row_mut(row);
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix < 0 || ix >= g.width as isize {
                            continue;
                        }
                        dst[oy * ow + ox] = plane[iy as usize * g.width + ix as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &Matrix<T>, g: &ConvGeom) -> Matrix<T> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let mut out = Matrix::zeros(g.in_channels, g.height * g.width);
    for c in 0..g.in_channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let src = cols.row(row);
                let plane = out.row_mut(c);
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix < 0 || ix >= g.width as isize {
                            continue;
                        }
                        plane[iy as usize * g.width + ix as usize] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix<f64> {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Compares analytic gradients of every parameter against central differences.
    fn check(store: &ParamStore<f64>, build: impl Fn(&mut Graph<f64>) -> Var) {
        let g_analytic = {
            let mut g = Graph::new(store);
            let loss = build(&mut g);
            g.backward(loss)
        };
        let h = 1e-6;
        for id in store.ids() {
            let analytic = g_analytic.get(id).cloned().unwrap_or_else(|| {
                let (r, c) = store.get(id).shape();
                Matrix::zeros(r, c)
            });
            for k in 0..store.get(id).len() {
                let mut plus = store.clone();
                plus.get_mut(id).data_mut()[k] += h;
                let mut minus = store.clone();
                minus.get_mut(id).data_mut()[k] -= h;
                let fp = {
                    let mut g = Graph::new(&plus);
                    let l = build(&mut g);
                    g.scalar(l)
                };
                let fm = {
                    let mut g = Graph::new(&minus);
                    let l = build(&mut g);
                    g.scalar(l)
                };
                let numeric = (fp - fm) / (2.0 * h);
                let a = analytic.data()[k];
                let scale = a.abs().max(numeric.abs()).max(1e-3);
                assert!((a - numeric).abs() / scale < 1e-5, "{}[{k}]: analytic {a} numeric {numeric}", store.name(id));
            }
        }
    }

    #[test]
    fn elementwise_and_matmul_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, 3, 4));
        let b = store.add("b", random(&mut rng, 4, 2));
        let bias = store.add("bias", random(&mut rng, 1, 2));
        let c = store.add("c", random(&mut rng, 3, 2).map(|x| x.abs() + 0.1));
        check(&store, |g| {
            let (a, b, bias, c) = (g.param(a), g.param(b), g.param(bias), g.param(c));
            let ab = g.matmul(a, b);
            let ab = g.add_row(ab, bias);
            let t = g.tanh(ab);
            let s = g.sigmoid(ab);
            let prod = g.mul(t, s);
            let l = g.ln_clamped(c, 1e-7);
            let d = g.sub(prod, l);
            let lr = g.leaky_relu(d, 0.1);
            let sq = g.square(lr);
            let aff = g.affine(sq, 0.5, 3.0);
            g.sum(aff)
        });
    }

    #[test]
    fn structural_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, 4, 3));
        let b = store.add("b", random(&mut rng, 4, 2));
        check(&store, |g| {
            let (a, b) = (g.param(a), g.param(b));
            let cat = g.concat_cols(&[a, b]);
            let sl = g.slice_cols(cat, 1, 4);
            let gat = g.gather_rows(sl, &[3, 0, 0, 2, 1]);
            let mean = g.segment_mean(gat, &[0, 0, 1, 1, 1], 3);
            let max = g.segment_max(gat, &[1, 0, 0, 1, 1], 2);
            let rows = g.concat_rows(&[mean, max]);
            let pt = g.pair_transform(rows, &[[0.3, -1.0, 2.0, 0.5]; 5]);
            let tr = g.transpose(pt);
            let mc = g.mean_cols(tr);
            let sq = g.square(mc);
            let s1 = g.sum(sq);
            let sq2 = g.square(pt);
            let s2 = g.sum(sq2);
            g.add(s1, s2)
        });
    }

    #[test]
    fn conv2d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = ConvGeom { in_channels: 2, out_channels: 3, height: 5, width: 6, kernel: 3, stride: 2, padding: 1 };
        let mut store = ParamStore::new();
        let x = store.add("x", random(&mut rng, 2, 30));
        let w = store.add("w", random(&mut rng, 3, 18));
        let b = store.add("b", random(&mut rng, 1, 3));
        check(&store, |g| {
            let (x, w, b) = (g.param(x), g.param(w), g.param(b));
            let y = g.conv2d(x, w, b, geom);
            let t = g.tanh(y);
            let sq = g.square(t);
            g.sum(sq)
        });
    }

    #[test]
    fn conv2d_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let geom = ConvGeom { in_channels: 2, out_channels: 2, height: 4, width: 4, kernel: 3, stride: 1, padding: 1 };
        let x = random(&mut rng, 2, 16);
        let w = random(&mut rng, 2, 18);
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let (xv, wv, bv) = (g.constant(x.clone()), g.constant(w.clone()), g.constant(Matrix::zeros(1, 2)));
        let y = g.conv2d(xv, wv, bv, geom);
        for o in 0..2 {
            for oy in 0..4isize {
                for ox in 0..4isize {
                    let mut s = 0.0;
                    for c in 0..2 {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (iy, ix) = (oy + ky - 1, ox + kx - 1);
                                if (0..4).contains(&iy) && (0..4).contains(&ix) {
                                    s += w.get(o, (c * 3 + ky as usize) * 3 + kx as usize)
                                        * x.get(c, (iy * 4 + ix) as usize);
                                }
                            }
                        }
                    }
                    assert!((g.value(y).get(o, (oy * 4 + ox) as usize) - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shared_param_binding_accumulates() {
        let mut store = ParamStore::new();
        let a = store.add("a", Matrix::from_rows(&[[2.0f64]]));
        let mut g = Graph::new(&store);
        let v1 = g.param(a);
        let v2 = g.param(a);
        assert_eq!(v1, v2);
        let p = g.mul(v1, v2);
        let grads = g.backward(p);
        assert_eq!(grads.get(a).unwrap().data(), &[4.0]);
    }
}
