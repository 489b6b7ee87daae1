//! Dense pointwise tensors with metric-aware contraction, inner products,
//! and the Kulkarni-Nomizu product.
//!
//! All curvature tensors in the engine are stored fully covariant; index
//! raising happens only inside contractions and inner products, one inverse
//! metric per covariant slot pair.

use thiserror::Error;

use crate::scalar::Real;

/// Largest rank the engine manipulates (second covariant derivative of Weyl).
pub const MAX_RANK: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("metric is not symmetric: |g_{{{i}{j}}} - g_{{{j}{i}}}| = {diff}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("metric is not positive definite (Cholesky pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Dense multi-index tensor at a point, row-major storage of length n^rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Real> {
    n: usize,
    variance: Vec<Variance>,
    data: Vec<T>,
}

/// Iterate all multi-indices of the given rank in row-major order.
pub fn for_each_index(n: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    if rank == 0 {
        f(&idx);
        return;
    }
    loop {
        f(&idx);
        let mut slot = rank;
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            idx[slot] += 1;
            if idx[slot] < n {
                break;
            }
            idx[slot] = 0;
        }
    }
}

fn flat(n: usize, idx: &[usize]) -> usize {
    let mut p = 0;
    for &i in idx {
        debug_assert!(i < n);
        p = p * n + i;
    }
    p
}

impl<T: Real> Tensor<T> {
    pub fn zeros(n: usize, variance: &[Variance]) -> Self {
        assert!(variance.len() <= MAX_RANK, "rank {} exceeds cap {MAX_RANK}", variance.len());
        Tensor { n, variance: variance.to_vec(), data: vec![T::zero(); n.pow(variance.len() as u32)] }
    }

    /// All-covariant zero tensor of the given rank.
    pub fn zeros_cov(n: usize, rank: usize) -> Self {
        Self::zeros(n, &vec![Variance::Covariant; rank])
    }

    pub fn from_fn(n: usize, variance: &[Variance], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut t = Self::zeros(n, variance);
        let mut pos = 0;
        for_each_index(n, variance.len(), |idx| {
            t.data[pos] = f(idx);
            pos += 1;
        });
        t
    }

    pub fn from_fn_cov(n: usize, rank: usize, f: impl FnMut(&[usize]) -> T) -> Self {
        Self::from_fn(n, &vec![Variance::Covariant; rank], f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> T {
        debug_assert_eq!(idx.len(), self.rank());
        self.data[flat(self.n, idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        debug_assert_eq!(idx.len(), self.rank());
        let p = flat(self.n, idx);
        self.data[p] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        assert_eq!(self.variance, other.variance, "variance mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Tensor { n: self.n, variance: self.variance.clone(), data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        assert_eq!(self.variance, other.variance, "variance mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Tensor { n: self.n, variance: self.variance.clone(), data }
    }

    pub fn scale(&self, s: T) -> Self {
        let data = self.data.iter().map(|&a| a * s).collect();
        Tensor { n: self.n, variance: self.variance.clone(), data }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Transform one slot by a symmetric n x n matrix (metric or inverse):
    /// t'_{.. j ..} = sum_i M[j][i] t_{.. i ..}, flipping the slot variance.
    fn apply_matrix_to_slot(&self, slot: usize, m: &[Vec<T>], new_variance: Variance) -> Self {
        assert!(slot < self.rank(), "slot out of range");
        let mut variance = self.variance.clone();
        variance[slot] = new_variance;
        let mut out = Tensor { n: self.n, variance, data: vec![T::zero(); self.data.len()] };
        let stride = self.n.pow((self.rank() - 1 - slot) as u32);
        let block = stride * self.n;
        for base in 0..self.data.len() / block {
            for rest in 0..stride {
                let off = base * block + rest;
                for j in 0..self.n {
                    let mut acc = T::zero();
                    for i in 0..self.n {
                        acc += m[j][i] * self.data[off + i * stride];
                    }
                    out.data[off + j * stride] = acc;
                }
            }
        }
        out
    }

    /// Contract two distinct slots. Covariant pairs insert the inverse
    /// metric, contravariant pairs the metric, mixed pairs trace directly.
    /// The remaining slots keep their order.
    pub fn contract(&self, slot_a: usize, slot_b: usize, m: &MetricAtPoint<T>) -> Self {
        assert!(slot_a != slot_b, "contraction slots must be distinct");
        assert!(slot_a < self.rank() && slot_b < self.rank(), "slot out of range");
        let (sa, sb) = (slot_a.min(slot_b), slot_a.max(slot_b));
        let n = self.n;
        let out_variance: Vec<Variance> = self
            .variance
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != sa && *s != sb)
            .map(|(_, &v)| v)
            .collect();
        use Variance::*;
        enum Weight {
            Inverse,
            Metric,
            Trace,
        }
        let weight = match (self.variance[sa], self.variance[sb]) {
            (Covariant, Covariant) => Weight::Inverse,
            (Contravariant, Contravariant) => Weight::Metric,
            _ => Weight::Trace,
        };
        let mut out = Tensor { n, variance: out_variance, data: Vec::new() };
        out.data = vec![T::zero(); n.pow(out.rank() as u32)];
        let mut full = vec![0usize; self.rank()];
        let mut pos = 0;
        for_each_index(n, out.rank(), |outer| {
            let mut oi = 0;
            for s in 0..self.rank() {
                if s != sa && s != sb {
                    full[s] = outer[oi];
                    oi += 1;
                }
            }
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let w = match weight {
                        Weight::Inverse => m.g_inv.data[i * n + j],
                        Weight::Metric => m.g.data[i * n + j],
                        Weight::Trace => {
                            if i == j {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                    };
                    if w == T::zero() {
                        continue;
                    }
                    full[sa] = i;
                    full[sb] = j;
                    acc += w * self.data[flat(n, &full)];
                }
            }
            out.data[pos] = acc;
            pos += 1;
        });
        out
    }

    /// Full metric pairing of two tensors of identical rank and variance.
    pub fn inner(&self, other: &Self, m: &MetricAtPoint<T>) -> T {
        assert_eq!(self.n, other.n, "dimension mismatch");
        assert_eq!(self.variance, other.variance, "variance mismatch");
        let mut moved = self.clone();
        for slot in 0..self.rank() {
            moved = match self.variance[slot] {
                Variance::Covariant => {
                    moved.apply_matrix_to_slot(slot, &m.g_inv_rows, Variance::Contravariant)
                }
                Variance::Contravariant => {
                    moved.apply_matrix_to_slot(slot, &m.g_rows, Variance::Covariant)
                }
            };
        }
        moved.data.iter().zip(&other.data).map(|(&a, &b)| a * b).fold(T::zero(), |s, v| s + v)
    }

    /// Squared norm |t|^2 = <t, t>.
    pub fn norm2(&self, m: &MetricAtPoint<T>) -> T {
        self.inner(self, m)
    }

    pub fn is_symmetric_pair(&self, a: usize, b: usize, tol: T) -> bool {
        let mut ok = true;
        let mut swapped = vec![0usize; self.rank()];
        for_each_index(self.n, self.rank(), |idx| {
            swapped.copy_from_slice(idx);
            swapped.swap(a, b);
            if (self.get(idx) - self.get(&swapped)).abs() > tol {
                ok = false;
            }
        });
        ok
    }
}

/// Kulkarni-Nomizu product of two symmetric covariant 2-tensors:
/// (a o^ b)_{ijkl} = a_{ik} b_{jl} + a_{jl} b_{ik} - a_{il} b_{jk} - a_{jk} b_{il}.
///
/// The sign and slot order are fixed so that the Weyl decomposition holds
/// verbatim with the curvature convention of the engine; the round-sphere
/// oracle in the test suite pins the convention.
pub fn kulkarni_nomizu<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert_eq!(a.rank(), 2, "Kulkarni-Nomizu expects rank-2 inputs");
    assert_eq!(b.rank(), 2, "Kulkarni-Nomizu expects rank-2 inputs");
    assert_eq!(a.n, b.n, "dimension mismatch");
    let n = a.n;
    Tensor::from_fn_cov(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        a.get(&[i, k]) * b.get(&[j, l]) + a.get(&[j, l]) * b.get(&[i, k])
            - a.get(&[i, l]) * b.get(&[j, k])
            - a.get(&[j, k]) * b.get(&[i, l])
    })
}

/// Remove the pure-trace part: s - (tr_g s / n) g.
pub fn traceless_part<T: Real>(s: &Tensor<T>, m: &MetricAtPoint<T>) -> Tensor<T> {
    assert_eq!(s.rank(), 2);
    let trace = s.contract(0, 1, m).data[0];
    s.sub(&m.g.scale(trace / T::from_count(s.n)))
}

/// Metric data at a point: g, its inverse, and sqrt(det g).
///
/// Construction runs a Cholesky factorization, which simultaneously checks
/// positive definiteness (all leading principal minors positive), builds the
/// inverse, and yields the volume factor.
#[derive(Debug, Clone)]
pub struct MetricAtPoint<T: Real> {
    pub g: Tensor<T>,
    pub g_inv: Tensor<T>,
    pub sqrt_det: T,
    g_rows: Vec<Vec<T>>,
    g_inv_rows: Vec<Vec<T>>,
}

impl<T: Real> MetricAtPoint<T> {
    pub fn new(g: Tensor<T>) -> Result<Self, TensorError> {
        assert_eq!(g.rank(), 2, "metric must be rank 2");
        assert_eq!(g.variance(), &[Variance::Covariant, Variance::Covariant]);
        let n = g.n;
        let scale = g.max_abs();
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = (g.get(&[i, j]) - g.get(&[j, i])).abs();
                if diff > T::from_f64_lossy(1e-12) * scale.max(T::one()) {
                    return Err(TensorError::NotSymmetric {
                        i,
                        j,
                        diff: diff.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }

        // Cholesky: g = L L^T.
        let mut l = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = g.get(&[i, j]);
                for k in 0..j {
                    sum -= l[i][k] * l[j][k];
                }
                if i == j {
                    if sum <= T::zero() {
                        return Err(TensorError::NotPositiveDefinite {
                            row: i,
                            pivot: sum.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    l[i][j] = sum.sqrt();
                } else {
                    l[i][j] = sum / l[j][j];
                }
            }
        }
        let mut sqrt_det = T::one();
        for (i, row) in l.iter().enumerate() {
            sqrt_det = sqrt_det * row[i];
        }

        // Invert: solve L y = e_k, then L^T x = y.
        let mut inv = vec![vec![T::zero(); n]; n];
        for k in 0..n {
            let mut y = vec![T::zero(); n];
            for i in 0..n {
                let mut sum = if i == k { T::one() } else { T::zero() };
                for j in 0..i {
                    sum -= l[i][j] * y[j];
                }
                y[i] = sum / l[i][i];
            }
            for i in (0..n).rev() {
                let mut sum = y[i];
                for j in (i + 1)..n {
                    sum -= l[j][i] * inv[j][k];
                }
                inv[i][k] = sum / l[i][i];
            }
        }
        let g_rows: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| g.get(&[i, j])).collect()).collect();
        let g_inv = Tensor::from_fn(
            n,
            &[Variance::Contravariant, Variance::Contravariant],
            |idx| inv[idx[0]][idx[1]],
        );
        let g_inv_rows = inv;
        Ok(MetricAtPoint { g, g_inv, sqrt_det, g_rows, g_inv_rows })
    }

    pub fn dim(&self) -> usize {
        self.g.n
    }

    pub fn g_at(&self, i: usize, j: usize) -> T {
        self.g_rows[i][j]
    }

    pub fn g_inv_at(&self, i: usize, j: usize) -> T {
        self.g_inv_rows[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn euclidean(n: usize) -> MetricAtPoint<f64> {
        let g = Tensor::from_fn_cov(n, 2, |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 });
        MetricAtPoint::new(g).unwrap()
    }

    fn diag_metric(d: &[f64]) -> MetricAtPoint<f64> {
        let n = d.len();
        let g = Tensor::from_fn_cov(n, 2, |idx| if idx[0] == idx[1] { d[idx[0]] } else { 0.0 });
        MetricAtPoint::new(g).unwrap()
    }

    #[test]
    fn trace_of_identity_is_n() {
        let m = euclidean(4);
        let id = Tensor::from_fn(
            4,
            &[Variance::Contravariant, Variance::Covariant],
            |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 },
        );
        let tr = id.contract(0, 1, &m);
        assert_eq!(tr.rank(), 0);
        assert_eq!(tr.data()[0], 4.0);
    }

    #[test]
    fn metric_contracts_to_dimension() {
        // Non-trivial metric: g_ij g^ij = n, and |g|^2 = n.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [3usize, 4, 5] {
            let mut g = Tensor::zeros_cov(n, 2);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = if i == j { 2.0 + rng.gen::<f64>() } else { 0.3 * rng.gen::<f64>() };
                    g.set(&[i, j], v);
                    g.set(&[j, i], v);
                }
            }
            let m = MetricAtPoint::new(g.clone()).unwrap();
            let tr = g.contract(0, 1, &m).data()[0];
            assert!((tr - n as f64).abs() < 1e-12);
            assert!((g.norm2(&m) - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_curvature_riemann_contracts_to_ricci() {
        // Model Riemann of the unit round 4-sphere: R = (1/2) g o^ g, so
        // contracting slots (2,4) must give Ricci = 3 g. Exercised on a
        // non-orthonormal g to make the inverse-metric insertion matter.
        let n = 4;
        let mut g = Tensor::zeros_cov(n, 2);
        for i in 0..n {
            g.set(&[i, i], 1.0 + 0.2 * i as f64);
        }
        g.set(&[0, 1], 0.1);
        g.set(&[1, 0], 0.1);
        let m = MetricAtPoint::new(g.clone()).unwrap();
        let riem = kulkarni_nomizu(&g, &g).scale(0.5);
        let ricci = riem.contract(1, 3, &m);
        let expect = g.scale(3.0);
        assert!(ricci.sub(&expect).max_abs() < 1e-8);
    }

    #[test]
    fn block_product_traceless_ricci_norm() {
        // S^2(1) x S^2(2) at a point with orthonormal-looking block data:
        // Ric eigenvalues (1, 1, 1/4, 1/4), R = 2.5, traceless entries
        // +-0.375, |R0|^2 = 0.5625.
        let m = euclidean(4);
        let ric = diag_metric(&[1.0, 1.0, 0.25, 0.25]).g;
        let r = ric.contract(0, 1, &m).data()[0];
        assert!((r - 2.5).abs() < 1e-14);
        let r0 = traceless_part(&ric, &m);
        for i in 0..4 {
            let expect = if i < 2 { 0.375 } else { -0.375 };
            assert!((r0.get(&[i, i]) - expect).abs() < 1e-14);
        }
        assert!((r0.norm2(&m) - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn traceless_part_of_metric_vanishes_and_projection_is_idempotent() {
        let m = diag_metric(&[1.0, 2.0, 3.0, 4.0]);
        let zero = traceless_part(&m.g, &m);
        assert!(zero.max_abs() < 1e-14);
        let s = Tensor::from_fn_cov(4, 2, |idx| ((idx[0] + 1) * (idx[1] + 1)) as f64 * 0.1);
        let p = traceless_part(&s, &m);
        let pp = traceless_part(&p, &m);
        assert!(p.sub(&pp).max_abs() < 1e-13);
        assert!(p.contract(0, 1, &m).data()[0].abs() <= 1e-12 * s.max_abs());
    }

    /// Brute-force |t|^2 for a covariant rank-4 tensor: contract every slot
    /// pair with the inverse metric explicitly. Independent of Tensor::inner.
    fn norm2_rank4_brute(t: &Tensor<f64>, m: &MetricAtPoint<f64>) -> f64 {
        let n = t.dim();
        let mut total = 0.0;
        for_each_index(n, 4, |a| {
            for_each_index(n, 4, |b| {
                let mut w = 1.0;
                for s in 0..4 {
                    w *= m.g_inv_at(a[s], b[s]);
                }
                if w != 0.0 {
                    total += w * t.get(a) * t.get(b);
                }
            });
        });
        total
    }

    #[test]
    fn kn_of_metric_with_itself_has_norm_8n_nm1() {
        for n in [4usize, 5] {
            let m = euclidean(n);
            let gg = kulkarni_nomizu(&m.g, &m.g);
            // (g o^ g)_{ijkl} = 2 (g_ik g_jl - g_il g_jk)
            let expect = Tensor::from_fn_cov(n, 4, |idx| {
                let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                2.0 * (d(i, k) * d(j, l) - d(i, l) * d(j, k))
            });
            assert!(gg.sub(&expect).max_abs() < 1e-14);
            let brute = norm2_rank4_brute(&gg, &m);
            let want = (8 * n * (n - 1)) as f64;
            assert!((brute - want).abs() < 1e-10);
            assert!((gg.norm2(&m) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn kn_of_tracefree_diag_example() {
        let n = 4;
        let m = euclidean(n);
        let h = diag_metric(&[1.0, 1.0, 1.0, 1.0]).g; // placeholder shape
        let mut h = h.scale(0.0);
        h.set(&[0, 0], 1.0);
        h.set(&[1, 1], -1.0);
        let hg = kulkarni_nomizu(&h, &m.g);
        let brute = norm2_rank4_brute(&hg, &m);
        assert!((brute - 16.0).abs() < 1e-12);
        assert!((hg.norm2(&m) - 16.0).abs() < 1e-12);
        // consistency with |h o^ g|^2 = 4(n-2)|h|^2 for trace-free h
        assert!((brute - 4.0 * (n as f64 - 2.0) * h.norm2(&m)).abs() < 1e-12);
        // bilinearity: zero input gives zero output
        let zero = kulkarni_nomizu(&h.scale(0.0), &m.g);
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn kn_output_has_riemann_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [4usize, 5, 6] {
            let mut a = Tensor::zeros_cov(n, 2);
            let mut b = Tensor::zeros_cov(n, 2);
            for i in 0..n {
                for j in 0..=i {
                    let va: f64 = rng.gen_range(-1.0..1.0);
                    let vb: f64 = rng.gen_range(-1.0..1.0);
                    a.set(&[i, j], va);
                    a.set(&[j, i], va);
                    b.set(&[i, j], vb);
                    b.set(&[j, i], vb);
                }
            }
            let kn = kulkarni_nomizu(&a, &b);
            let mut worst: f64 = 0.0;
            for_each_index(n, 4, |idx| {
                let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
                let v = kn.get(idx);
                worst = worst.max((v + kn.get(&[j, i, k, l])).abs());
                worst = worst.max((v + kn.get(&[i, j, l, k])).abs());
                worst = worst.max((v - kn.get(&[k, l, i, j])).abs());
            });
            assert!(worst <= 1e-13 * kn.max_abs().max(1.0));
        }
    }

    #[test]
    fn kn_with_metric_norm_identity_for_tracefree_inputs() {
        // |h o^ g|^2 = 4(n-2)|h|^2 for trace-free symmetric h, on random
        // non-flat metrics: 100 draws per dimension.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [4usize, 5, 6] {
            for _ in 0..100 {
                let mut g = Tensor::zeros_cov(n, 2);
                for i in 0..n {
                    for j in 0..=i {
                        let v: f64 =
                            if i == j { 1.5 + rng.gen::<f64>() } else { 0.2 * rng.gen_range(-1.0..1.0) };
                        g.set(&[i, j], v);
                        g.set(&[j, i], v);
                    }
                }
                let m = MetricAtPoint::new(g).unwrap();
                let mut h = Tensor::zeros_cov(n, 2);
                for i in 0..n {
                    for j in 0..=i {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        h.set(&[i, j], v);
                        h.set(&[j, i], v);
                    }
                }
                let h = traceless_part(&h, &m);
                let lhs = kulkarni_nomizu(&h, &m.g).norm2(&m);
                let rhs = 4.0 * (n as f64 - 2.0) * h.norm2(&m);
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0),
                    "n={n}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn inner_is_symmetric_bilinear_and_norm_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let m = diag_metric(&[1.0, 1.3, 0.8, 2.0]);
        let rand_t = |rng: &mut ChaCha8Rng| {
            Tensor::from_fn_cov(n, 3, |_| rng.gen_range(-1.0..1.0))
        };
        let a = rand_t(&mut rng);
        let b = rand_t(&mut rng);
        let c = rand_t(&mut rng);
        let ab = a.inner(&b, &m);
        let ba = b.inner(&a, &m);
        assert!((ab - ba).abs() < 1e-12);
        let lin = a.add(&c.scale(2.0)).inner(&b, &m);
        assert!((lin - (ab + 2.0 * c.inner(&b, &m))).abs() < 1e-12);
        assert!(a.norm2(&m) > 0.0);
        assert_eq!(Tensor::<f64>::zeros_cov(n, 3).norm2(&m), 0.0);
    }

    #[test]
    fn metric_times_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 2..=6 {
            let mut g = Tensor::zeros_cov(n, 2);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 =
                        if i == j { 2.0 + rng.gen::<f64>() } else { 0.3 * rng.gen_range(-1.0..1.0) };
                    g.set(&[i, j], v);
                    g.set(&[j, i], v);
                }
            }
            let m = MetricAtPoint::new(g).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += m.g_at(i, k) * m.g_inv_at(k, j);
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((acc - expect).abs() < 1e-10);
                }
            }
            assert!(m.sqrt_det > 0.0);
        }
    }

    #[test]
    fn non_positive_definite_metric_is_rejected() {
        let mut g = Tensor::zeros_cov(2, 2);
        g.set(&[0, 0], 1.0);
        g.set(&[1, 1], -1.0);
        assert!(matches!(
            MetricAtPoint::new(g),
            Err(TensorError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    #[should_panic(expected = "slot out of range")]
    fn contract_slot_out_of_range_panics() {
        let m = euclidean(3);
        let t = Tensor::<f64>::zeros_cov(3, 2);
        let _ = t.contract(0, 2, &m);
    }

    #[test]
    #[should_panic(expected = "variance mismatch")]
    fn inner_shape_mismatch_panics() {
        let m = euclidean(3);
        let a = Tensor::<f64>::zeros_cov(3, 2);
        let b = Tensor::<f64>::zeros(3, &[Variance::Contravariant, Variance::Covariant]);
        let _ = a.inner(&b, &m);
    }
}
