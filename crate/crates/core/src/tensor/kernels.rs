//! Uninstrumented compute kernels. Each one accumulates in a fixed serial
//! order per output element, so results are bitwise reproducible.

use super::{Element, Tensor};
use crate::error::{Error, Result};

const MR: usize = 4;
const NR: usize = 8;

/// `a[m,k] · b[k,n]`.
pub fn matmul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::dim(
            "matmul",
            format!("inner extents differ: {:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![T::zero(); m * n];
    gemm(m, k, n, a.data(), b.data(), &mut out);
    Tensor::new(vec![m, n], out)
}

/// Register-blocked product. Every `out[i][j]` starts at zero and adds
/// `a[i][p] * b[p][j]` for `p = 0..k` in ascending order, whichever path
/// computes it.
fn gemm<T: Element>(m: usize, k: usize, n: usize, a: &[T], b: &[T], out: &mut [T]) {
    let full_cols = n - n % NR;
    let mut i = 0;
    while i + MR <= m {
        let mut j = 0;
        while j < full_cols {
            let mut acc = [[T::zero(); NR]; MR];
            for p in 0..k {
                let brow: &[T; NR] = b[p * n + j..p * n + j + NR].try_into().unwrap();
                for (r, acc_row) in acc.iter_mut().enumerate() {
                    let av = a[(i + r) * k + p];
                    for c in 0..NR {
                        acc_row[c] = acc_row[c] + av * brow[c];
                    }
                }
            }
            for (r, acc_row) in acc.iter().enumerate() {
                out[(i + r) * n + j..(i + r) * n + j + NR].copy_from_slice(acc_row);
            }
            j += NR;
        }
        for r in 0..MR {
            dot_tail(i + r, full_cols, k, n, a, b, out);
        }
        i += MR;
    }
    for row in i..m {
        let out_row = &mut out[row * n..(row + 1) * n];
        for p in 0..k {
            let av = a[row * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

fn dot_tail<T: Element>(row: usize, from: usize, k: usize, n: usize, a: &[T], b: &[T], out: &mut [T]) {
    for j in from..n {
        let mut s = T::zero();
        for p in 0..k {
            s = s + a[row * k + p] * b[p * n + j];
        }
        out[row * n + j] = s;
    }
}

pub fn transpose<T: Element>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let (r, c) = a.dims2("transpose")?;
    let src = a.data();
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = src[i * c + j];
        }
    }
    Tensor::new(vec![c, r], out)
}

/// Sums rows of `data` into `num_segments` output rows chosen by `segment_ids`.
/// Segments without members stay zero.
pub fn unsorted_segment_sum<T: Element>(
    data: &Tensor<T>,
    segment_ids: &[usize],
    num_segments: usize,
) -> Result<Tensor<T>> {
    if data.rank() == 0 {
        return Err(Error::dim("unsorted_segment_sum", "data must have rank >= 1"));
    }
    let (rows, width) = data.rows_and_width();
    if rows != segment_ids.len() {
        return Err(Error::dim(
            "unsorted_segment_sum",
            format!("data has {} rows but {} segment ids", rows, segment_ids.len()),
        ));
    }
    let mut shape = data.shape().to_vec();
    shape[0] = num_segments;
    let mut out = vec![T::zero(); num_segments * width];
    let src = data.data();
    for (row, &seg) in segment_ids.iter().enumerate() {
        if seg >= num_segments {
            return Err(Error::Index {
                op: "unsorted_segment_sum",
                row,
                index: seg,
                bound: num_segments,
            });
        }
        let dst = &mut out[seg * width..(seg + 1) * width];
        for (o, &v) in dst.iter_mut().zip(&src[row * width..(row + 1) * width]) {
            *o = *o + v;
        }
    }
    Tensor::new(shape, out)
}

/// `out[i] = data[indices[i]]` along the leading axis.
pub fn gather_rows<T: Element>(data: &Tensor<T>, indices: &[usize]) -> Result<Tensor<T>> {
    if data.rank() == 0 {
        return Err(Error::dim("gather_rows", "data must have rank >= 1"));
    }
    let (rows, width) = data.rows_and_width();
    let mut out = Vec::with_capacity(indices.len() * width);
    let src = data.data();
    for (row, &idx) in indices.iter().enumerate() {
        if idx >= rows {
            return Err(Error::Index {
                op: "gather_rows",
                row,
                index: idx,
                bound: rows,
            });
        }
        out.extend_from_slice(&src[idx * width..(idx + 1) * width]);
    }
    let mut shape = data.shape().to_vec();
    shape[0] = indices.len();
    Tensor::new(shape, out)
}

pub fn concat<T: Element>(tensors: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::dim("concat", "no inputs"))?;
    let rank = first.rank();
    if axis >= rank {
        return Err(Error::dim(
            "concat",
            format!("axis {} out of range for rank {}", axis, rank),
        ));
    }
    for t in tensors {
        let compatible = t.rank() == rank
            && t
                .shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(d, (a, b))| d == axis || a == b);
        if !compatible {
            let shapes: Vec<_> = tensors.iter().map(|t| t.shape().to_vec()).collect();
            return Err(Error::dim(
                "concat",
                format!("shapes {:?} disagree off axis {}", shapes, axis),
            ));
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let mut shape = first.shape().to_vec();
    shape[axis] = tensors.iter().map(|t| t.shape()[axis]).sum();
    let mut out = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for t in tensors {
            let chunk = t.shape()[axis] * inner;
            out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Tensor::new(shape, out)
}

/// Contiguous `[start, start+len)` range along `axis`.
pub fn slice<T: Element>(t: &Tensor<T>, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
    if axis >= t.rank() || start + len > t.shape()[axis] {
        return Err(Error::dim(
            "slice",
            format!("range {}..{} on axis {} of {:?}", start, start + len, axis, t.shape()),
        ));
    }
    let outer: usize = t.shape()[..axis].iter().product();
    let inner: usize = t.shape()[axis + 1..].iter().product();
    let extent = t.shape()[axis];
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = (o * extent + start) * inner;
        out.extend_from_slice(&t.data()[base..base + len * inner]);
    }
    let mut shape = t.shape().to_vec();
    shape[axis] = len;
    Tensor::new(shape, out)
}

/// How an operand's elements map onto the output of a broadcasting binary op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Broadcast {
    /// Same shape as the output.
    Full,
    /// Single element.
    Scalar,
    /// Row vector of width `n`, repeated over the rows of a matrix.
    Row(usize),
    /// Column vector repeated across `n` columns of a matrix.
    Col(usize),
}

impl Broadcast {
    #[inline]
    pub fn index(self, i: usize) -> usize {
        match self {
            Broadcast::Full => i,
            Broadcast::Scalar => 0,
            Broadcast::Row(n) => i % n,
            Broadcast::Col(n) => i / n,
        }
    }
}

/// Resolves the supported broadcast forms: equal shapes, a scalar on either
/// side, or a row/column vector against a matrix.
pub fn broadcast_plan(a: &[usize], b: &[usize]) -> Result<(Vec<usize>, Broadcast, Broadcast)> {
    let numel = |s: &[usize]| s.iter().product::<usize>();
    if a == b {
        return Ok((a.to_vec(), Broadcast::Full, Broadcast::Full));
    }
    if numel(b) == 1 {
        return Ok((a.to_vec(), Broadcast::Full, Broadcast::Scalar));
    }
    if numel(a) == 1 {
        return Ok((b.to_vec(), Broadcast::Scalar, Broadcast::Full));
    }
    let vector_against = |m: &[usize], v: &[usize]| -> Option<Broadcast> {
        let &[rows, cols] = m else { return None };
        match *v {
            [w] | [1, w] if w == cols => Some(Broadcast::Row(cols)),
            [h, 1] if h == rows => Some(Broadcast::Col(cols)),
            _ => None,
        }
    };
    if let Some(bb) = vector_against(a, b) {
        return Ok((a.to_vec(), Broadcast::Full, bb));
    }
    if let Some(ba) = vector_against(b, a) {
        return Ok((b.to_vec(), ba, Broadcast::Full));
    }
    Err(Error::dim(
        "elementwise",
        format!("cannot broadcast {:?} with {:?}", a, b),
    ))
}

pub fn binary<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    let (shape, ba, bb) = broadcast_plan(a.shape(), b.shape())?;
    let numel = shape.iter().product();
    let (da, db) = (a.data(), b.data());
    let out = (0..numel).map(|i| f(da[ba.index(i)], db[bb.index(i)])).collect();
    Tensor::new(shape, out)
}

pub fn unary<T: Element>(a: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor {
        shape: a.shape().to_vec(),
        data: a.data().iter().map(|&v| f(v)).collect(),
        node_id: None,
    }
}

pub fn sigmoid<T: Element>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn relu<T: Element>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (m, k) = a.dims2("t").unwrap();
        let (_, n) = b.dims2("t").unwrap();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a.data()[i * k + p] * b.data()[p * n + j];
                }
            }
        }
        out
    }

    #[test]
    fn gemm_paths_agree_with_naive_bitwise() {
        // shapes straddle the 4x8 register block in both directions
        for &(m, k, n) in &[(5, 7, 2), (4, 3, 8), (9, 5, 17), (1, 1, 1), (13, 11, 24)] {
            let a = Tensor::from_f64(&[m, k], &(0..m * k).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>()).unwrap();
            let b = Tensor::from_f64(&[k, n], &(0..k * n).map(|i| (i as f64 * 0.11).cos()).collect::<Vec<_>>()).unwrap();
            let c = matmul(&a, &b).unwrap();
            let reference = naive(&a, &b);
            for (x, y) in c.data().iter().zip(&reference) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[4, 2]);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn broadcast_forms() {
        assert_eq!(broadcast_plan(&[3, 4], &[4]).unwrap().2, Broadcast::Row(4));
        assert_eq!(broadcast_plan(&[3, 4], &[3, 1]).unwrap().2, Broadcast::Col(4));
        assert_eq!(broadcast_plan(&[], &[3, 4]).unwrap().1, Broadcast::Scalar);
        assert!(broadcast_plan(&[3, 4], &[3]).is_err());
        assert!(broadcast_plan(&[2, 3, 4], &[4]).is_err());
    }

    #[test]
    fn slice_middle_axis() {
        let t = Tensor::<f64>::from_f64(&[2, 3], &[1., 2., 3., 4., 5., 6.]).unwrap();
        let s = slice(&t, 1, 1, 2).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.data(), &[2., 3., 5., 6.]);
        assert!(slice(&t, 1, 2, 2).is_err());
    }

    #[test]
    fn gather_out_of_range() {
        let t = Tensor::<f64>::zeros(&[3, 1]);
        match gather_rows(&t, &[0, 3]) {
            Err(Error::Index { row: 1, index: 3, bound: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
