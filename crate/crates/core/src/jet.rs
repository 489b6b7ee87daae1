//! Truncated multivariate Taylor arithmetic (jets) of order <= 4.
//!
//! A jet stores the Taylor coefficients c_alpha = d^alpha f / alpha! of a
//! scalar function at a point, for every multi-index alpha with |alpha| <= m.
//! Jets form a commutative ring under truncated arithmetic; composition with
//! univariate elementary functions is exact through the truncation order.
//!
//! Multi-index enumeration is graded lexicographic and fixed: grades ascend
//! 0..=m, and within a grade indices are ordered with the exponent of the
//! first variable descending, then recursively on the remaining variables.
//! For n = 2, m = 2 the table reads
//! `(0,0) | (1,0) (0,1) | (2,0) (1,1) (0,2)`.
//! Because the enumeration of a grade does not depend on m, the coefficient
//! table of a lower-order jet is a prefix of the higher-order table, which
//! makes truncation a slice copy.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::scalar::Real;

/// Hard cap on the jet order: the Bach tensor needs two derivatives of Weyl,
/// i.e. four of the metric, and nothing deeper appears in the hierarchy.
pub const MAX_ORDER: usize = 4;
/// Dense storage keeps tables small only for modest dimensions.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JetError {
    #[error("division by a jet with zero constant term")]
    DivByZeroConstant,
    #[error("sqrt of a jet with nonpositive constant term")]
    SqrtNonpositive,
    #[error("multi-index order {got} exceeds jet order {max}")]
    PartialOutOfRange { got: usize, max: usize },
    #[error("multi-index has {got} entries, jet has dimension {dim}")]
    PartialDimMismatch { got: usize, dim: usize },
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of multi-indices with |alpha| <= m in n variables.
pub fn table_len(n: usize, m: usize) -> usize {
    binomial(n + m, m)
}

/// Shared index bookkeeping for all jets of a given (dimension, order).
///
/// Holds the graded-lex multi-index table, the rank lookup, the truncated
/// convolution table used by multiplication, and per-variable derivative
/// maps. Scalar-free: one space serves every scalar type.
pub struct JetSpace {
    n: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    rank: HashMap<Vec<u8>, u32>,
    /// (lhs position, rhs position, target position) with deg(l)+deg(r) <= m.
    mul_table: Vec<(u32, u32, u32)>,
    /// deriv[v] = (dst position in the order m-1 prefix, src position, beta_v + 1).
    deriv: Vec<Vec<(u32, u32, u32)>>,
}

impl JetSpace {
    /// The cached space for `n` variables at order `m`.
    ///
    /// Panics if `n` or `m` is out of the supported range; callers validate
    /// dimensions at the metric level.
    pub fn get(n: usize, order: usize) -> Arc<JetSpace> {
        assert!(n >= 1 && n <= MAX_DIM, "jet dimension {n} out of range 1..={MAX_DIM}");
        assert!(order <= MAX_ORDER, "jet order {order} exceeds cap {MAX_ORDER}");
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard.entry((n, order)).or_insert_with(|| Arc::new(JetSpace::build(n, order))).clone()
    }

    fn build(n: usize, order: usize) -> JetSpace {
        let mut indices = Vec::with_capacity(table_len(n, order));
        let mut scratch = vec![0u8; n];
        for d in 0..=order {
            push_grade(&mut indices, &mut scratch, 0, d);
        }
        debug_assert_eq!(indices.len(), table_len(n, order));
        let rank: HashMap<Vec<u8>, u32> =
            indices.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();

        let deg = |a: &[u8]| a.iter().map(|&x| x as usize).sum::<usize>();
        let mut mul_table = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            let da = deg(a);
            for (j, b) in indices.iter().enumerate() {
                if da + deg(b) > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_table.push((i as u32, j as u32, rank[&sum]));
            }
        }

        let mut deriv = Vec::with_capacity(n);
        for v in 0..n {
            let mut map = Vec::new();
            if order > 0 {
                for (dst, beta) in indices.iter().enumerate() {
                    if deg(beta) >= order {
                        break; // graded order: everything past here is top grade
                    }
                    let mut src_idx = beta.clone();
                    src_idx[v] += 1;
                    map.push((dst as u32, rank[&src_idx], beta[v] as u32 + 1));
                }
            }
            deriv.push(map);
        }

        JetSpace { n, order, indices, rank, mul_table, deriv }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index at a table position.
    pub fn index_at(&self, pos: usize) -> &[u8] {
        &self.indices[pos]
    }

    /// Table position of a multi-index, if |alpha| <= order.
    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.rank.get(alpha).map(|&p| p as usize)
    }
}

fn push_grade(out: &mut Vec<Vec<u8>>, scratch: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == scratch.len() {
        scratch[var] = remaining as u8;
        out.push(scratch.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        scratch[var] = k as u8;
        push_grade(out, scratch, var + 1, remaining - k);
    }
}

/// A truncated Taylor expansion: coefficients c_alpha = d^alpha f / alpha!.
#[derive(Clone)]
pub struct Jet<T: Real> {
    space: Arc<JetSpace>,
    c: Vec<T>,
}

impl<T: Real> std::fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("n", &self.space.n)
            .field("order", &self.space.order)
            .field("c", &self.c)
            .finish()
    }
}

impl<T: Real> Jet<T> {
    pub fn constant(space: Arc<JetSpace>, v: T) -> Self {
        let mut c = vec![T::zero(); space.len()];
        c[0] = v;
        Jet { space, c }
    }

    /// The jet of the coordinate function x_var at a point with that value.
    pub fn variable(space: Arc<JetSpace>, var: usize, value: T) -> Self {
        assert!(var < space.n, "variable index out of range");
        let mut c = vec![T::zero(); space.len()];
        c[0] = value;
        if space.order >= 1 {
            c[1 + var] = T::one();
        }
        Jet { space, c }
    }

    pub fn from_coeffs(space: Arc<JetSpace>, c: Vec<T>) -> Self {
        assert_eq!(c.len(), space.len(), "coefficient table length mismatch");
        Jet { space, c }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.n
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn coeffs(&self) -> &[T] {
        &self.c
    }

    /// Constant term (the function value).
    pub fn value(&self) -> T {
        self.c[0]
    }

    /// True when every coefficient is exactly zero. Sparse metrics make this
    /// common, and multiplication short-circuits on it.
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == T::zero())
    }

    /// Raw partial derivative: alpha! * c_alpha.
    pub fn partial(&self, alpha: &[u8]) -> Result<T, JetError> {
        if alpha.len() != self.space.n {
            return Err(JetError::PartialDimMismatch { got: alpha.len(), dim: self.space.n });
        }
        let total: usize = alpha.iter().map(|&x| x as usize).sum();
        if total > self.space.order {
            return Err(JetError::PartialOutOfRange { got: total, max: self.space.order });
        }
        let pos = self.space.position(alpha).expect("index within order is in table");
        let mut fact = 1usize;
        for &a in alpha {
            for k in 1..=a as usize {
                fact *= k;
            }
        }
        Ok(self.c[pos] * T::from_count(fact))
    }

    fn assert_same_shape(&self, other: &Self) {
        assert_eq!(self.space.n, other.space.n, "jet dimension mismatch");
        assert_eq!(self.space.order, other.space.order, "jet order mismatch");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        let c = self.c.iter().zip(&other.c).map(|(&a, &b)| a + b).collect();
        Jet { space: self.space.clone(), c }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        let c = self.c.iter().zip(&other.c).map(|(&a, &b)| a - b).collect();
        Jet { space: self.space.clone(), c }
    }

    pub fn neg(&self) -> Self {
        let c = self.c.iter().map(|&a| -a).collect();
        Jet { space: self.space.clone(), c }
    }

    pub fn scale(&self, s: T) -> Self {
        let c = self.c.iter().map(|&a| a * s).collect();
        Jet { space: self.space.clone(), c }
    }

    pub fn add_const(&self, s: T) -> Self {
        let mut out = self.clone();
        out.c[0] = out.c[0] + s;
        out
    }

    /// Truncated convolution product.
    pub fn mul(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        let mut c = vec![T::zero(); self.c.len()];
        if self.is_zero() || other.is_zero() {
            return Jet { space: self.space.clone(), c };
        }
        for &(i, j, k) in &self.space.mul_table {
            c[k as usize] = c[k as usize] + self.c[i as usize] * other.c[j as usize];
        }
        Jet { space: self.space.clone(), c }
    }

    /// In-place fused accumulate: self += a * b (saves an allocation).
    pub fn mul_acc(&mut self, a: &Self, b: &Self) {
        a.assert_same_shape(b);
        a.assert_same_shape(self);
        for &(i, j, k) in &self.space.mul_table {
            self.c[k as usize] = self.c[k as usize] + a.c[i as usize] * b.c[j as usize];
        }
    }

    /// Reciprocal via the truncated geometric series around the constant term.
    pub fn recip(&self) -> Result<Self, JetError> {
        let b0 = self.c[0];
        if b0 == T::zero() {
            return Err(JetError::DivByZeroConstant);
        }
        // u = self/b0 - 1 has zero constant term, so u^(m+1) truncates away.
        let mut u = self.scale(T::one() / b0);
        u.c[0] = T::zero();
        let mut acc = Jet::constant(self.space.clone(), T::one());
        for _ in 0..self.space.order {
            let prod = u.mul(&acc);
            acc = prod.neg().add_const(T::one());
        }
        Ok(acc.scale(T::one() / b0))
    }

    pub fn div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Integer power by repeated squaring; negative exponents go through the
    /// reciprocal and require a nonzero constant term.
    pub fn powi(&self, k: i32) -> Result<Self, JetError> {
        if k < 0 {
            return self.powi(-k)?.recip();
        }
        let mut acc = Jet::constant(self.space.clone(), T::one());
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// Horner composition with a univariate Taylor table.
    ///
    /// `outer[k]` must be the k-th Taylor coefficient (derivative over k!) of
    /// the outer function at this jet's constant term. Exact through the
    /// truncation order because the shifted inner jet is nilpotent.
    pub fn compose_univariate(&self, outer: &[T]) -> Self {
        assert_eq!(outer.len(), self.space.order + 1, "outer table length must be order + 1");
        let mut u = self.clone();
        u.c[0] = T::zero();
        let mut acc = Jet::constant(self.space.clone(), outer[self.space.order]);
        for k in (0..self.space.order).rev() {
            acc = u.mul(&acc).add_const(outer[k]);
        }
        acc
    }

    pub fn exp_jet(&self) -> Self {
        let m = self.space.order;
        let e0 = self.c[0].exp();
        let mut outer = Vec::with_capacity(m + 1);
        let mut term = e0;
        for k in 0..=m {
            outer.push(term);
            term = term / T::from_count(k + 1);
        }
        self.compose_univariate(&outer)
    }

    pub fn sin_jet(&self) -> Self {
        self.trig_table(true)
    }

    pub fn cos_jet(&self) -> Self {
        self.trig_table(false)
    }

    fn trig_table(&self, sin_first: bool) -> Self {
        let m = self.space.order;
        let (s0, c0) = (self.c[0].sin(), self.c[0].cos());
        // Cycle of derivatives: sin -> cos -> -sin -> -cos, divided by k!.
        let cycle = if sin_first { [s0, c0, -s0, -c0] } else { [c0, -s0, -c0, s0] };
        let mut outer = Vec::with_capacity(m + 1);
        let mut fact = T::one();
        for k in 0..=m {
            if k > 0 {
                fact = fact * T::from_count(k);
            }
            outer.push(cycle[k % 4] / fact);
        }
        self.compose_univariate(&outer)
    }

    /// Square root; requires a strictly positive constant term.
    pub fn sqrt_jet(&self) -> Result<Self, JetError> {
        let b0 = self.c[0];
        if b0 <= T::zero() {
            return Err(JetError::SqrtNonpositive);
        }
        let m = self.space.order;
        let s = b0.sqrt();
        // Binomial series: sqrt(b0 + h) = s * sum_k C(1/2, k) (h/b0)^k.
        let mut outer = Vec::with_capacity(m + 1);
        let mut coeff = T::one();
        let half = T::one() / T::from_count(2);
        for k in 0..=m {
            if k > 0 {
                coeff = coeff * (half - T::from_count(k - 1)) / T::from_count(k) / b0;
            }
            outer.push(s * coeff);
        }
        Ok(self.compose_univariate(&outer))
    }

    /// Partial derivative as a jet of order m-1 (prefix truncation plus shift).
    pub fn derive(&self, var: usize) -> Self {
        assert!(self.space.order >= 1, "cannot derive an order-0 jet");
        assert!(var < self.space.n);
        let target = JetSpace::get(self.space.n, self.space.order - 1);
        let mut c = vec![T::zero(); target.len()];
        for &(dst, src, mult) in &self.space.deriv[var] {
            c[dst as usize] = self.c[src as usize] * T::from_count(mult as usize);
        }
        Jet { space: target, c }
    }

    /// Truncation to a lower order: a prefix copy by the graded enumeration.
    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.space.order, "truncate cannot raise the order");
        if order == self.space.order {
            return self.clone();
        }
        let target = JetSpace::get(self.space.n, order);
        let c = self.c[..target.len()].to_vec();
        Jet { space: target, c }
    }
}

impl<T: Real> std::ops::Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        Jet::add(self, rhs)
    }
}

impl<T: Real> std::ops::Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        Jet::sub(self, rhs)
    }
}

impl<T: Real> std::ops::Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        Jet::mul(self, rhs)
    }
}

impl<T: Real> std::ops::Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet::neg(self)
    }
}
