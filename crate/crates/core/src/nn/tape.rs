//! Dense 2D tensor tape with reverse-mode differentiation.
//!
//! Every value is a row-major `rows x cols` matrix of `T` (f32 for training,
//! f64 for gradient checks). Operations append nodes; [`Tape::backward`]
//! walks the tape in reverse accumulating gradients into every node.

use std::rc::Rc;

use super::{NnError, Real};

/// Boolean attention mask, `true` = key visible to the query row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<bool>,
}

impl BoolMat {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        BoolMat { rows, cols, data }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        BoolMat { rows, cols, data: vec![true; rows * cols] }
    }

    /// Lower-triangular causal mask.
    pub fn causal(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| j <= i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Bar-level cross-attention mask: decoder token `i` may attend encoder token
/// `j` iff their bar indices differ by at most one.
pub fn bar_cross_mask(decoder_bars: &[u32], encoder_bars: &[u32]) -> BoolMat {
    BoolMat::from_fn(decoder_bars.len(), encoder_bars.len(), |i, j| {
        decoder_bars[i].abs_diff(encoder_bars[j]) <= 1
    })
}

pub type Id = usize;

enum Op<T> {
    Leaf,
    /// C = A B
    MatMul(Id, Id),
    /// C = A B^T
    MatMulTb(Id, Id),
    Add(Id, Id),
    /// matrix + broadcast row vector
    AddBias(Id, Id),
    Scale(Id, T),
    Gelu(Id),
    /// elu(x) + 1, the positive feature map of kernelized attention
    Elu1(Id),
    LayerNorm { x: Id, gamma: Id, beta: Id },
    MaskedSoftmax { x: Id, mask: Rc<BoolMat> },
    /// row-normalization of nonnegative scores over allowed keys
    MaskedRowNorm { x: Id, mask: Rc<BoolMat> },
    Dropout { x: Id, keep: Rc<Vec<T>> },
    Gather { table: Id, indices: Rc<Vec<usize>> },
    ConcatCols(Vec<Id>),
    SliceCols { x: Id, start: usize },
    ConcatRows(Vec<Id>),
    MeanRows(Id),
    L2NormRows(Id),
    /// x / s with s a 1x1 node
    DivScalar { x: Id, s: Id },
    CrossEntropy { logits: Id, targets: Rc<Vec<usize>>, select: Rc<Vec<bool>> },
}

struct Node<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    grad: Option<Vec<T>>,
    op: Op<T>,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

const LN_EPS: f64 = 1e-5;
const NORM_EPS: f64 = 1e-12;

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<T>, op: Op<T>) -> Id {
        debug_assert_eq!(data.len(), rows * cols);
        self.nodes.push(Node { rows, cols, data, grad: None, op });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, data: Vec<T>) -> Id {
        assert_eq!(data.len(), rows * cols, "leaf shape mismatch");
        self.push(rows, cols, data, Op::Leaf)
    }

    pub fn rows(&self, id: Id) -> usize {
        self.nodes[id].rows
    }

    pub fn cols(&self, id: Id) -> usize {
        self.nodes[id].cols
    }

    pub fn data(&self, id: Id) -> &[T] {
        &self.nodes[id].data
    }

    pub fn grad(&self, id: Id) -> Option<&[T]> {
        self.nodes[id].grad.as_deref()
    }

    pub fn scalar(&self, id: Id) -> T {
        debug_assert_eq!(self.nodes[id].data.len(), 1);
        self.nodes[id].data[0]
    }

    pub fn matmul(&mut self, a: Id, b: Id) -> Id {
        let (m, k) = (self.rows(a), self.cols(a));
        let (k2, n) = (self.rows(b), self.cols(b));
        assert_eq!(k, k2, "matmul inner dims");
        let data = mm(&self.nodes[a].data, &self.nodes[b].data, m, k, n);
        self.push(m, n, data, Op::MatMul(a, b))
    }

    /// `a @ b^T`, with `b` stored row-major as `n x k`.
    pub fn matmul_tb(&mut self, a: Id, b: Id) -> Id {
        let (m, k) = (self.rows(a), self.cols(a));
        let (n, k2) = (self.rows(b), self.cols(b));
        assert_eq!(k, k2, "matmul_tb inner dims");
        let data = mm_tb(&self.nodes[a].data, &self.nodes[b].data, m, k, n);
        self.push(m, n, data, Op::MatMulTb(a, b))
    }

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        assert_eq!((self.rows(a), self.cols(a)), (self.rows(b), self.cols(b)), "add shapes");
        let data = self.nodes[a]
            .data
            .iter()
            .zip(&self.nodes[b].data)
            .map(|(&x, &y)| x + y)
            .collect();
        self.push(self.rows(a), self.cols(a), data, Op::Add(a, b))
    }

    pub fn add_bias(&mut self, x: Id, bias: Id) -> Id {
        let (rows, cols) = (self.rows(x), self.cols(x));
        assert_eq!((self.rows(bias), self.cols(bias)), (1, cols), "bias shape");
        let mut data = self.nodes[x].data.clone();
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] += self.nodes[bias].data[c];
            }
        }
        self.push(rows, cols, data, Op::AddBias(x, bias))
    }

    pub fn scale(&mut self, x: Id, factor: T) -> Id {
        let data = self.nodes[x].data.iter().map(|&v| v * factor).collect();
        self.push(self.rows(x), self.cols(x), data, Op::Scale(x, factor))
    }

    pub fn gelu(&mut self, x: Id) -> Id {
        let data = self.nodes[x].data.iter().map(|&v| gelu_fwd(v)).collect();
        self.push(self.rows(x), self.cols(x), data, Op::Gelu(x))
    }

    /// `elu(x) + 1`: strictly positive, used as the linear-attention kernel.
    pub fn elu1(&mut self, x: Id) -> Id {
        let data = self.nodes[x].data.iter().map(|&v| elu1_fwd(v)).collect();
        self.push(self.rows(x), self.cols(x), data, Op::Elu1(x))
    }

    pub fn layer_norm(&mut self, x: Id, gamma: Id, beta: Id) -> Id {
        let (rows, cols) = (self.rows(x), self.cols(x));
        assert_eq!((self.rows(gamma), self.cols(gamma)), (1, cols), "gamma shape");
        assert_eq!((self.rows(beta), self.cols(beta)), (1, cols), "beta shape");
        let eps = T::from(LN_EPS).unwrap();
        let mut data = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = &self.nodes[x].data[r * cols..(r + 1) * cols];
            let mean = row.iter().copied().sum::<T>() / T::from(cols).unwrap();
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>()
                / T::from(cols).unwrap();
            let inv_std = T::one() / (var + eps).sqrt();
            for c in 0..cols {
                data[r * cols + c] = (row[c] - mean) * inv_std * self.nodes[gamma].data[c]
                    + self.nodes[beta].data[c];
            }
        }
        self.push(rows, cols, data, Op::LayerNorm { x, gamma, beta })
    }

    /// Row-wise softmax over allowed keys only. Masked positions get exactly
    /// zero weight; a fully masked row is an error, never a silent NaN.
    pub fn masked_softmax(&mut self, x: Id, mask: &Rc<BoolMat>) -> Result<Id, NnError> {
        let (rows, cols) = (self.rows(x), self.cols(x));
        assert_eq!((mask.rows, mask.cols), (rows, cols), "mask shape");
        let mut data = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = &self.nodes[x].data[r * cols..(r + 1) * cols];
            let mut max = T::neg_infinity();
            for c in 0..cols {
                if mask.get(r, c) && row[c] > max {
                    max = row[c];
                }
            }
            if max == T::neg_infinity() {
                return Err(NnError::FullyMaskedRow { row: r });
            }
            let mut denom = T::zero();
            for c in 0..cols {
                if mask.get(r, c) {
                    let e = (row[c] - max).exp();
                    data[r * cols + c] = e;
                    denom += e;
                }
            }
            for c in 0..cols {
                if mask.get(r, c) {
                    data[r * cols + c] /= denom;
                }
            }
        }
        Ok(self.push(rows, cols, data, Op::MaskedSoftmax { x, mask: Rc::clone(mask) }))
    }

    /// Normalizes nonnegative scores so each row sums to 1 over allowed keys;
    /// masked positions are exactly zero.
    pub fn masked_row_norm(&mut self, x: Id, mask: &Rc<BoolMat>) -> Result<Id, NnError> {
        let (rows, cols) = (self.rows(x), self.cols(x));
        assert_eq!((mask.rows, mask.cols), (rows, cols), "mask shape");
        let mut data = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = &self.nodes[x].data[r * cols..(r + 1) * cols];
            let mut denom = T::zero();
            let mut any = false;
            for c in 0..cols {
                if mask.get(r, c) {
                    denom += row[c];
                    any = true;
                }
            }
            if !any {
                return Err(NnError::FullyMaskedRow { row: r });
            }
            for c in 0..cols {
                if mask.get(r, c) {
                    data[r * cols + c] = row[c] / denom;
                }
            }
        }
        Ok(self.push(rows, cols, data, Op::MaskedRowNorm { x, mask: Rc::clone(mask) }))
    }

    /// Inverted dropout with an externally generated keep mask whose entries
    /// are either 0 or `1/(1-p)`.
    pub fn dropout(&mut self, x: Id, keep: Rc<Vec<T>>) -> Id {
        assert_eq!(keep.len(), self.nodes[x].data.len(), "dropout mask length");
        let data = self.nodes[x].data.iter().zip(keep.iter()).map(|(&v, &k)| v * k).collect();
        self.push(self.rows(x), self.cols(x), data, Op::Dropout { x, keep })
    }

    /// Selects rows of `table`, one output row per index.
    pub fn gather(&mut self, table: Id, indices: Rc<Vec<usize>>) -> Id {
        let cols = self.cols(table);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices.iter() {
            assert!(i < self.rows(table), "gather index {i} out of range");
            data.extend_from_slice(&self.nodes[table].data[i * cols..(i + 1) * cols]);
        }
        self.push(indices.len(), cols, data, Op::Gather { table, indices })
    }

    pub fn concat_cols(&mut self, parts: &[Id]) -> Id {
        let rows = self.rows(parts[0]);
        let cols: usize = parts.iter().map(|&p| self.cols(p)).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let pc = self.cols(p);
                assert_eq!(self.rows(p), rows, "concat_cols row mismatch");
                data.extend_from_slice(&self.nodes[p].data[r * pc..(r + 1) * pc]);
            }
        }
        self.push(rows, cols, data, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Id, start: usize, len: usize) -> Id {
        let (rows, cols) = (self.rows(x), self.cols(x));
        assert!(start + len <= cols, "slice_cols out of range");
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&self.nodes[x].data[r * cols + start..r * cols + start + len]);
        }
        self.push(rows, len, data, Op::SliceCols { x, start })
    }

    pub fn concat_rows(&mut self, parts: &[Id]) -> Id {
        let cols = self.cols(parts[0]);
        let rows: usize = parts.iter().map(|&p| self.rows(p)).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            assert_eq!(self.cols(p), cols, "concat_rows col mismatch");
            data.extend_from_slice(&self.nodes[p].data);
        }
        self.push(rows, cols, data, Op::ConcatRows(parts.to_vec()))
    }

    pub fn mean_rows(&mut self, x: Id) -> Id {
        let (rows, cols) = (self.rows(x), self.cols(x));
        assert!(rows > 0, "mean_rows of empty matrix");
        let inv = T::one() / T::from(rows).unwrap();
        let mut data = vec![T::zero(); cols];
        for r in 0..rows {
            for c in 0..cols {
                data[c] += self.nodes[x].data[r * cols + c] * inv;
            }
        }
        self.push(1, cols, data, Op::MeanRows(x))
    }

    /// Normalizes each row to unit Euclidean norm.
    pub fn l2norm_rows(&mut self, x: Id) -> Id {
        let (rows, cols) = (self.rows(x), self.cols(x));
        let eps = T::from(NORM_EPS).unwrap();
        let mut data = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = &self.nodes[x].data[r * cols..(r + 1) * cols];
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt() + eps;
            for c in 0..cols {
                data[r * cols + c] = row[c] / norm;
            }
        }
        self.push(rows, cols, data, Op::L2NormRows(x))
    }

    /// Elementwise division by a scalar node (used for the learnable
    /// contrastive temperature).
    pub fn div_scalar(&mut self, x: Id, s: Id) -> Id {
        assert_eq!(self.nodes[s].data.len(), 1, "div_scalar needs a 1x1 divisor");
        let sv = self.nodes[s].data[0];
        let data = self.nodes[x].data.iter().map(|&v| v / sv).collect();
        self.push(self.rows(x), self.cols(x), data, Op::DivScalar { x, s })
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, restricted to rows with `select[r] == true`.
    pub fn cross_entropy(
        &mut self,
        logits: Id,
        targets: Rc<Vec<usize>>,
        select: Rc<Vec<bool>>,
    ) -> Result<Id, NnError> {
        let (rows, cols) = (self.rows(logits), self.cols(logits));
        if targets.len() != rows || select.len() != rows {
            return Err(NnError::Shape(format!(
                "cross_entropy: {rows} logit rows, {} targets, {} select flags",
                targets.len(),
                select.len()
            )));
        }
        if let Some(&t) = targets.iter().enumerate().find(|(r, &t)| select[*r] && t >= cols).map(|(_, t)| t)
        {
            return Err(NnError::Shape(format!("cross_entropy: target {t} >= {cols} classes")));
        }
        let count = select.iter().filter(|&&s| s).count();
        let mut loss = T::zero();
        if count > 0 {
            for r in 0..rows {
                if !select[r] {
                    continue;
                }
                let row = &self.nodes[logits].data[r * cols..(r + 1) * cols];
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
                loss -= row[targets[r]] - lse;
            }
            loss /= T::from(count).unwrap();
        }
        Ok(self.push(1, 1, vec![loss], Op::CrossEntropy { logits, targets, select }))
    }

    /// Reverse pass seeding `d loss / d loss = 1`.
    pub fn backward(&mut self, loss: Id) {
        assert_eq!(self.nodes[loss].data.len(), 1, "backward expects a scalar loss node");
        for node in &mut self.nodes {
            node.grad = Some(vec![T::zero(); node.data.len()]);
        }
        self.nodes[loss].grad.as_mut().unwrap()[0] = T::one();

        for id in (0..self.nodes.len()).rev() {
            let grad = match &self.nodes[id].grad {
                Some(g) => g.clone(),
                None => continue,
            };
            let (rows, cols) = (self.nodes[id].rows, self.nodes[id].cols);
            match &self.nodes[id].op {
                Op::Leaf => {}
                &Op::MatMul(a, b) => {
                    let (m, k) = (self.nodes[a].rows, self.nodes[a].cols);
                    let n = cols;
                    let da = mm_tb(&grad, &self.nodes[b].data, m, n, k);
                    let db = mm_ta(&self.nodes[a].data, &grad, m, k, n);
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                &Op::MatMulTb(a, b) => {
                    let (m, k) = (self.nodes[a].rows, self.nodes[a].cols);
                    let n = cols;
                    // y = a b^T:  da = g b;  db = g^T a
                    let da = mm(&grad, &self.nodes[b].data, m, n, k);
                    let db = mm_ta(&grad, &self.nodes[a].data, m, n, k);
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                &Op::Add(a, b) => {
                    self.accum(a, &grad);
                    self.accum(b, &grad);
                }
                &Op::AddBias(x, bias) => {
                    self.accum(x, &grad);
                    let mut db = vec![T::zero(); cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            db[c] += grad[r * cols + c];
                        }
                    }
                    self.accum(bias, &db);
                }
                &Op::Scale(x, factor) => {
                    let dx: Vec<T> = grad.iter().map(|&g| g * factor).collect();
                    self.accum(x, &dx);
                }
                &Op::Gelu(x) => {
                    let dx: Vec<T> = grad
                        .iter()
                        .zip(&self.nodes[x].data)
                        .map(|(&g, &v)| g * gelu_bwd(v))
                        .collect();
                    self.accum(x, &dx);
                }
                &Op::Elu1(x) => {
                    let dx: Vec<T> = grad
                        .iter()
                        .zip(&self.nodes[x].data)
                        .map(|(&g, &v)| g * if v > T::zero() { T::one() } else { v.exp() })
                        .collect();
                    self.accum(x, &dx);
                }
                &Op::LayerNorm { x, gamma, beta } => {
                    let eps = T::from(LN_EPS).unwrap();
                    let nf = T::from(cols).unwrap();
                    let mut dx = vec![T::zero(); rows * cols];
                    let mut dgamma = vec![T::zero(); cols];
                    let mut dbeta = vec![T::zero(); cols];
                    for r in 0..rows {
                        let row = &self.nodes[x].data[r * cols..(r + 1) * cols];
                        let g = &grad[r * cols..(r + 1) * cols];
                        let mean = row.iter().copied().sum::<T>() / nf;
                        let var =
                            row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
                        let inv_std = T::one() / (var + eps).sqrt();
                        let xhat: Vec<T> = row.iter().map(|&v| (v - mean) * inv_std).collect();
                        let mut dxhat = vec![T::zero(); cols];
                        for c in 0..cols {
                            dgamma[c] += g[c] * xhat[c];
                            dbeta[c] += g[c];
                            dxhat[c] = g[c] * self.nodes[gamma].data[c];
                        }
                        let sum_dxhat = dxhat.iter().copied().sum::<T>();
                        let sum_dxhat_xhat =
                            dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<T>();
                        for c in 0..cols {
                            dx[r * cols + c] = inv_std / nf
                                * (nf * dxhat[c] - sum_dxhat - xhat[c] * sum_dxhat_xhat);
                        }
                    }
                    self.accum(x, &dx);
                    self.accum(gamma, &dgamma);
                    self.accum(beta, &dbeta);
                }
                Op::MaskedSoftmax { x, mask } => {
                    let x = *x;
                    let mask = Rc::clone(mask);
                    let y = &self.nodes[id].data;
                    let mut dx = vec![T::zero(); rows * cols];
                    for r in 0..rows {
                        let mut dot = T::zero();
                        for c in 0..cols {
                            if mask.get(r, c) {
                                dot += grad[r * cols + c] * y[r * cols + c];
                            }
                        }
                        for c in 0..cols {
                            if mask.get(r, c) {
                                dx[r * cols + c] =
                                    y[r * cols + c] * (grad[r * cols + c] - dot);
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
                Op::MaskedRowNorm { x, mask } => {
                    let x = *x;
                    let mask = Rc::clone(mask);
                    let y = &self.nodes[id].data;
                    let mut dx = vec![T::zero(); rows * cols];
                    for r in 0..rows {
                        let mut denom = T::zero();
                        let mut dot = T::zero();
                        for c in 0..cols {
                            if mask.get(r, c) {
                                denom += self.nodes[x].data[r * cols + c];
                                dot += grad[r * cols + c] * y[r * cols + c];
                            }
                        }
                        for c in 0..cols {
                            if mask.get(r, c) {
                                dx[r * cols + c] = (grad[r * cols + c] - dot) / denom;
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
                Op::Dropout { x, keep } => {
                    let x = *x;
                    let dx: Vec<T> = grad.iter().zip(keep.iter()).map(|(&g, &k)| g * k).collect();
                    self.accum(x, &dx);
                }
                Op::Gather { table, indices } => {
                    let table = *table;
                    let indices = Rc::clone(indices);
                    let tcols = self.nodes[table].cols;
                    let mut dt = vec![T::zero(); self.nodes[table].data.len()];
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..tcols {
                            dt[i * tcols + c] += grad[r * tcols + c];
                        }
                    }
                    self.accum(table, &dt);
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let mut start = 0usize;
                    for p in parts {
                        let pc = self.nodes[p].cols;
                        let mut dp = Vec::with_capacity(rows * pc);
                        for r in 0..rows {
                            dp.extend_from_slice(&grad[r * cols + start..r * cols + start + pc]);
                        }
                        self.accum(p, &dp);
                        start += pc;
                    }
                }
                &Op::SliceCols { x, start } => {
                    let xc = self.nodes[x].cols;
                    let mut dx = vec![T::zero(); self.nodes[x].data.len()];
                    for r in 0..rows {
                        for c in 0..cols {
                            dx[r * xc + start + c] = grad[r * cols + c];
                        }
                    }
                    self.accum(x, &dx);
                }
                Op::ConcatRows(parts) => {
                    let parts = parts.clone();
                    let mut start = 0usize;
                    for p in parts {
                        let pr = self.nodes[p].rows;
                        self.accum(p, &grad[start * cols..(start + pr) * cols]);
                        start += pr;
                    }
                }
                &Op::MeanRows(x) => {
                    let xr = self.nodes[x].rows;
                    let inv = T::one() / T::from(xr).unwrap();
                    let mut dx = vec![T::zero(); self.nodes[x].data.len()];
                    for r in 0..xr {
                        for c in 0..cols {
                            dx[r * cols + c] = grad[c] * inv;
                        }
                    }
                    self.accum(x, &dx);
                }
                &Op::L2NormRows(x) => {
                    let eps = T::from(NORM_EPS).unwrap();
                    let mut dx = vec![T::zero(); rows * cols];
                    for r in 0..rows {
                        let row = &self.nodes[x].data[r * cols..(r + 1) * cols];
                        let g = &grad[r * cols..(r + 1) * cols];
                        let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt() + eps;
                        let y: Vec<T> = row.iter().map(|&v| v / norm).collect();
                        let ydotg = y.iter().zip(g).map(|(&a, &b)| a * b).sum::<T>();
                        for c in 0..cols {
                            dx[r * cols + c] = (g[c] - y[c] * ydotg) / norm;
                        }
                    }
                    self.accum(x, &dx);
                }
                &Op::DivScalar { x, s } => {
                    let sv = self.nodes[s].data[0];
                    let dx: Vec<T> = grad.iter().map(|&g| g / sv).collect();
                    let ds = grad
                        .iter()
                        .zip(&self.nodes[x].data)
                        .map(|(&g, &v)| -g * v / (sv * sv))
                        .sum::<T>();
                    self.accum(x, &dx);
                    self.accum(s, &[ds]);
                }
                Op::CrossEntropy { logits, targets, select } => {
                    let logits = *logits;
                    let targets = Rc::clone(targets);
                    let select = Rc::clone(select);
                    let (lr, lc) = (self.nodes[logits].rows, self.nodes[logits].cols);
                    let count = select.iter().filter(|&&s| s).count();
                    if count == 0 {
                        continue;
                    }
                    let scale = grad[0] / T::from(count).unwrap();
                    let mut dl = vec![T::zero(); lr * lc];
                    for r in 0..lr {
                        if !select[r] {
                            continue;
                        }
                        let row = &self.nodes[logits].data[r * lc..(r + 1) * lc];
                        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
                        let denom = exps.iter().copied().sum::<T>();
                        for c in 0..lc {
                            let softmax = exps[c] / denom;
                            let indicator = if c == targets[r] { T::one() } else { T::zero() };
                            dl[r * lc + c] = scale * (softmax - indicator);
                        }
                    }
                    self.accum(logits, &dl);
                }
            }
        }
    }

    fn accum(&mut self, id: Id, delta: &[T]) {
        let grad = self.nodes[id].grad.as_mut().expect("grads allocated in backward");
        for (g, &d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }
}

fn elu1_fwd<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + T::one()
    } else {
        x.exp()
    }
}

fn gelu_fwd<T: Real>(x: T) -> T {
    // tanh approximation of GELU
    let c = T::from(0.7978845608028654f64).unwrap(); // sqrt(2/pi)
    let k = T::from(0.044715f64).unwrap();
    let half = T::from(0.5f64).unwrap();
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_bwd<T: Real>(x: T) -> T {
    let c = T::from(0.7978845608028654f64).unwrap();
    let k = T::from(0.044715f64).unwrap();
    let half = T::from(0.5f64).unwrap();
    let three = T::from(3.0f64).unwrap();
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let sech2 = T::one() - t * t;
    half * (T::one() + t) + half * x * sech2 * c * (T::one() + three * k * x * x)
}

/// C[m,n] = A[m,k] B[k,n]
pub(crate) fn mm<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// C[m,n] = A[m,k] B[n,k]^T
pub(crate) fn mm_tb<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// C[k,n] = A[m,k]^T B[m,n]
pub(crate) fn mm_ta<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}
