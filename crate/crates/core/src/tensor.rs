//! Dense row-major `f64` tensors and the numeric primitives the rest of the
//! crate builds on.
//!
//! Every reduction runs in a fixed left-to-right order so results are
//! bit-for-bit reproducible; `matmul` in particular matches a naive triple
//! loop exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim_mismatch(
                "tensor construction",
                shape,
                &[data.len()],
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 2-D tensor from rows; rows must all have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dim_mismatch("ragged rows", &[c], &[row.len()]));
            }
            data.extend_from_slice(row);
        }
        Tensor::from_vec(&[r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() needs a 2-D tensor");
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() needs a 2-D tensor");
        self.shape[1]
    }

    /// Row `i` of a 2-D tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data: out,
        }
    }

    /// Matrix product `[m,k] x [k,n] -> [m,n]`, summing over k in index
    /// order for every output element.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (rhs.rows(), rhs.cols());
        if k != k2 {
            return Err(Error::dim_mismatch("matmul", &self.shape, &rhs.shape));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &rhs.data[p * n..(p + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `self[m,k] x rhs[n,k]^T -> [m,n]`; same summation order as
    /// `matmul(self, rhs.transpose())`.
    pub fn matmul_nt(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (n, k2) = (rhs.rows(), rhs.cols());
        if k != k2 {
            return Err(Error::dim_mismatch("matmul_nt", &self.shape, &rhs.shape));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (o, j) in o_row.iter_mut().zip(0..n) {
                let b_row = &rhs.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                *o = acc;
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `self[n,m]^T x rhs[n,k] -> [m,k]`; same summation order as
    /// `matmul(self.transpose(), rhs)`.
    pub fn matmul_tn(&self, rhs: &Tensor) -> Result<Tensor> {
        let (n, m) = (self.rows(), self.cols());
        let (n2, k) = (rhs.rows(), rhs.cols());
        if n != n2 {
            return Err(Error::dim_mismatch("matmul_tn", &self.shape, &rhs.shape));
        }
        let mut out = vec![0.0; m * k];
        for i in 0..n {
            let a_row = &self.data[i * m..(i + 1) * m];
            let b_row = &rhs.data[i * k..(i + 1) * k];
            for (j, &a) in a_row.iter().enumerate() {
                let o_row = &mut out[j * k..(j + 1) * k];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, k],
            data: out,
        })
    }
}

/// Euclidean norm over the flattened elements of every listed tensor, in
/// the order given.
pub fn l2_norm<'a, I>(parts: I) -> f64
where
    I: IntoIterator<Item = &'a Tensor>,
{
    let mut acc = 0.0;
    for t in parts {
        for &x in &t.data {
            acc += x * x;
        }
    }
    acc.sqrt()
}

/// Softmax of a 1-D tensor, max-subtracted so large logits cannot overflow.
pub fn softmax(logits: &Tensor) -> Tensor {
    assert_eq!(logits.shape().len(), 1, "softmax expects a 1-D tensor");
    let mut out = vec![0.0; logits.len()];
    softmax_row(logits.data(), &mut out);
    Tensor {
        shape: vec![out.len()],
        data: out,
    }
}

/// Softmax of one row into `out`; shared by the loss and noise code.
pub(crate) fn softmax_row(xs: &[f64], out: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(xs) {
        let e = (x - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = (a.rows(), a.cols());
        let n = b.cols();
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.at2(i, p) * b.at2(p, j);
                }
                out.data_mut()[i * n + j] = acc;
            }
        }
        out
    }

    fn random_tensor(shape: &[usize], rng: &mut SeededRng) -> Tensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let i2 = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(i2.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_hand_case() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data()[0], 11.0);
    }

    #[test]
    fn matmul_matches_naive_oracle_bitwise() {
        let mut rng = SeededRng::new(8);
        let a = random_tensor(&[8, 8], &mut rng);
        let b = random_tensor(&[8, 8], &mut rng);
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.data().iter().zip(slow.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn matmul_oracle_on_all_small_shapes() {
        let mut rng = SeededRng::new(9);
        for m in [1, 3, 16] {
            for k in [1, 5, 16] {
                for n in [1, 2, 16] {
                    let a = random_tensor(&[m, k], &mut rng);
                    let b = random_tensor(&[k, n], &mut rng);
                    let fast = a.matmul(&b).unwrap();
                    let slow = naive_matmul(&a, &b);
                    for (x, y) in fast.data().iter().zip(slow.data()) {
                        assert_eq!(x.to_bits(), y.to_bits(), "shape {m}x{k}x{n}");
                    }
                }
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[4, 2]);
        match a.matmul(&b) {
            Err(Error::DimensionMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![4, 2]);
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn matmul_nt_tn_match_transpose_route_bitwise() {
        let mut rng = SeededRng::new(10);
        let a = random_tensor(&[7, 5], &mut rng);
        let b = random_tensor(&[6, 5], &mut rng);
        let nt = a.matmul_nt(&b).unwrap();
        let via_t = a.matmul(&b.transpose()).unwrap();
        for (x, y) in nt.data().iter().zip(via_t.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let d = random_tensor(&[7, 4], &mut rng);
        let tn = a.matmul_tn(&d).unwrap();
        let via_t = a.transpose().matmul(&d).unwrap();
        for (x, y) in tn.data().iter().zip(via_t.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn l2_norm_cases() {
        let z = Tensor::zeros(&[4]);
        assert_eq!(l2_norm([&z]), 0.0);
        let v = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(l2_norm([&v]), 5.0);
        let a = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        assert_eq!(l2_norm([&a, &b]), 2.0);
    }

    #[test]
    fn softmax_uniform_logits() {
        let t = Tensor::zeros(&[10]);
        let p = softmax(&t);
        for &x in p.data() {
            assert!((x - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_analytic_ratio() {
        let t = Tensor::from_vec(&[2], vec![0.0, 3.0f64.ln()]).unwrap();
        let p = softmax(&t);
        assert!((p.data()[0] - 0.25).abs() < 1e-12);
        assert!((p.data()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_logits_stay_finite() {
        let t = Tensor::from_vec(&[2], vec![1000.0, 0.0]).unwrap();
        let p = softmax(&t);
        assert!(p.is_finite());
        assert!((p.data()[0] - 1.0).abs() < 1e-12);
        assert!(p.data()[1] < 1e-12);
    }

    proptest! {
        #[test]
        fn l2_norm_scales_absolutely(
            v in proptest::collection::vec(-100.0f64..100.0, 1..32),
            alpha in -10.0f64..10.0,
        ) {
            let t = Tensor::from_vec(&[v.len()], v.clone()).unwrap();
            let scaled = Tensor::from_vec(&[v.len()], v.iter().map(|x| alpha * x).collect()).unwrap();
            let lhs = l2_norm([&scaled]);
            let rhs = alpha.abs() * l2_norm([&t]);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn softmax_sums_to_one_and_shift_invariant(
            v in proptest::collection::vec(-30.0f64..30.0, 1..16),
            shift in -50.0f64..50.0,
        ) {
            let t = Tensor::from_vec(&[v.len()], v.clone()).unwrap();
            let p = softmax(&t);
            let sum: f64 = p.data().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let shifted = Tensor::from_vec(&[v.len()], v.iter().map(|x| x + shift).collect()).unwrap();
            let q = softmax(&shifted);
            for (a, b) in p.data().iter().zip(q.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
