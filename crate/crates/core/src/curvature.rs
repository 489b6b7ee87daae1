//! The curvature hierarchy at a chart point, computed from metric jets:
//! Christoffel -> Riemann -> Ricci -> Weyl -> Cotton -> Bach.
//!
//! Derivatives of curvature are never finite-differenced: curvature
//! components are themselves jets (metric jets of order 4 give order-3
//! Christoffel data, order-2 Riemann data, and so on down to pointwise
//! values for the second covariant derivative of Weyl).
//!
//! Conventions, fixed once and guarded by the round-sphere oracle tests:
//!   R^e_{jkl} = d_k Gamma^e_{lj} - d_l Gamma^e_{kj}
//!              + Gamma^e_{km} Gamma^m_{lj} - Gamma^e_{lm} Gamma^m_{kj}
//!   R_{ijkl} = g_{ie} R^e_{jkl},  Ric_{ik} = g^{jl} R_{ijkl},
//! so constant-curvature metrics satisfy
//! R_{ijkl} = kappa (g_{ik} g_{jl} - g_{il} g_{jk}) with kappa > 0 on round
//! spheres. Covariant derivative slots are appended last:
//! (nabla T)_{I;q} = d_q T_I - sum_s Gamma^m_{i_s q} T_{I[s->m]}.

use thiserror::Error;

use crate::jet::{Jet, JetSpace};
use crate::scalar::Real;
use crate::tensor::{MetricAtPoint, Tensor, Variance, MAX_RANK};
use crate::zoo::{MetricSpec, ZooError};

#[derive(Debug, Error)]
pub enum CurvatureError {
    #[error(transparent)]
    Zoo(#[from] ZooError),
    #[error("point {point:?} lies outside the declared chart box")]
    OutsideChart { point: Vec<f64> },
    #[error("dimension {n} too small: this quantity needs n >= {needs}")]
    DimensionTooSmall { n: usize, needs: usize },
    #[error("jet-valued metric is singular at the point")]
    SingularJetMetric,
    #[error("covariant derivative would exceed the rank cap {MAX_RANK}")]
    RankCapExceeded,
    #[error("field order {have} cannot supply {want} more derivative(s)")]
    OrderExhausted { have: usize, want: usize },
}

/// A tensor whose components are jets of a common order. Slot layout is by
/// convention of the producer: curvature fields are fully covariant; the
/// Christoffel field is indexed [upper][lower][lower].
#[derive(Debug, Clone)]
pub struct TensorField<T: Real> {
    n: usize,
    rank: usize,
    order: usize,
    comps: Vec<Jet<T>>,
}

fn flat(n: usize, idx: &[usize]) -> usize {
    let mut p = 0;
    for &i in idx {
        debug_assert!(i < n);
        p = p * n + i;
    }
    p
}

impl<T: Real> TensorField<T> {
    pub fn from_components(n: usize, rank: usize, order: usize, comps: Vec<Jet<T>>) -> Self {
        assert!(rank <= MAX_RANK);
        assert_eq!(comps.len(), n.pow(rank as u32));
        debug_assert!(comps.iter().all(|j| j.order() == order && j.dim() == n));
        TensorField { n, rank, order, comps }
    }

    pub fn from_fn(
        n: usize,
        rank: usize,
        order: usize,
        mut f: impl FnMut(&[usize]) -> Jet<T>,
    ) -> Self {
        let mut comps = Vec::with_capacity(n.pow(rank as u32));
        crate::tensor::for_each_index(n, rank, |idx| comps.push(f(idx)));
        Self::from_components(n, rank, order, comps)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn comp(&self, idx: &[usize]) -> &Jet<T> {
        &self.comps[flat(self.n, idx)]
    }

    pub fn comp_flat(&self, pos: usize) -> &Jet<T> {
        &self.comps[pos]
    }

    /// Pointwise values, tagged fully covariant.
    pub fn value_cov(&self) -> Tensor<T> {
        let mut pos = 0;
        Tensor::from_fn_cov(self.n, self.rank, |_| {
            let v = self.comps[pos].value();
            pos += 1;
            v
        })
    }

    pub fn truncated(&self, order: usize) -> Self {
        if order == self.order {
            return self.clone();
        }
        TensorField {
            n: self.n,
            rank: self.rank,
            order,
            comps: self.comps.iter().map(|j| j.truncate(order)).collect(),
        }
    }
}

/// One covariant derivative: rank grows by one (slot appended last), jet
/// order drops by one.
fn covariant_derivative_once<T: Real>(
    field: &TensorField<T>,
    gamma: &TensorField<T>,
) -> Result<TensorField<T>, CurvatureError> {
    if field.rank + 1 > MAX_RANK {
        return Err(CurvatureError::RankCapExceeded);
    }
    if field.order == 0 {
        return Err(CurvatureError::OrderExhausted { have: 0, want: 1 });
    }
    let n = field.n;
    let q = field.order - 1;
    let gam_neg = TensorField {
        n,
        rank: 3,
        order: q,
        comps: gamma.truncated(q).comps.iter().map(|j| j.neg()).collect(),
    };
    let f_low = field.truncated(q);
    let mut comps = Vec::with_capacity(n.pow((field.rank + 1) as u32));
    let mut swapped = vec![0usize; field.rank];
    crate::tensor::for_each_index(n, field.rank, |idx| {
        for d in 0..n {
            let mut acc = field.comps[flat(n, idx)].derive(d);
            for s in 0..field.rank {
                swapped.copy_from_slice(idx);
                for m in 0..n {
                    swapped[s] = m;
                    let g = gam_neg.comp(&[m, idx[s], d]);
                    if g.is_zero() {
                        continue;
                    }
                    acc.mul_acc(g, f_low.comp(&swapped));
                }
            }
            comps.push(acc);
        }
    });
    Ok(TensorField::from_components(n, field.rank + 1, q, comps))
}

/// Covariant derivative of a jet-valued covariant field, `order` in {1, 2}.
pub fn covariant_derivative<T: Real>(
    field: &TensorField<T>,
    gamma: &TensorField<T>,
    order: usize,
) -> Result<TensorField<T>, CurvatureError> {
    assert!(order == 1 || order == 2, "covariant derivative order must be 1 or 2");
    if field.rank + order > MAX_RANK {
        return Err(CurvatureError::RankCapExceeded);
    }
    if field.order < order {
        return Err(CurvatureError::OrderExhausted { have: field.order, want: order });
    }
    let first = covariant_derivative_once(field, gamma)?;
    if order == 1 {
        return Ok(first);
    }
    covariant_derivative_once(&first, gamma)
}

/// Invert an n x n matrix of jets by Gauss-Jordan elimination in the jet
/// ring, pivoting on constant-term magnitude.
fn invert_jet_matrix<T: Real>(
    n: usize,
    elems: &[Jet<T>],
) -> Result<Vec<Jet<T>>, CurvatureError> {
    let space = elems[0].space().clone();
    let mut a: Vec<Jet<T>> = elems.to_vec();
    let mut inv: Vec<Jet<T>> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            inv.push(Jet::constant(space.clone(), if i == j { T::one() } else { T::zero() }));
        }
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| {
                a[p * n + col]
                    .value()
                    .abs()
                    .partial_cmp(&a[q * n + col].value().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
                inv.swap(col * n + j, pivot_row * n + j);
            }
        }
        let pivot_recip =
            a[col * n + col].recip().map_err(|_| CurvatureError::SingularJetMetric)?;
        for j in 0..n {
            a[col * n + j] = a[col * n + j].mul(&pivot_recip);
            inv[col * n + j] = inv[col * n + j].mul(&pivot_recip);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col].clone();
            if factor.is_zero() {
                continue;
            }
            let neg = factor.neg();
            for j in 0..n {
                let mut t = a[row * n + j].clone();
                t.mul_acc(&neg, &a[col * n + j]);
                a[row * n + j] = t;
                let mut t = inv[row * n + j].clone();
                t.mul_acc(&neg, &inv[col * n + j]);
                inv[row * n + j] = t;
            }
        }
    }
    Ok(inv)
}

/// Metric jets at a point as a rank-2 field plus the value-level data.
pub fn metric_field<T: Real>(
    spec: &MetricSpec,
    point: &[T],
    order: usize,
) -> Result<(TensorField<T>, TensorField<T>, MetricAtPoint<T>), CurvatureError> {
    let pf: Vec<f64> = point.iter().map(|&x| x.to_f64().unwrap_or(f64::NAN)).collect();
    if !spec.contains(&pf) {
        return Err(CurvatureError::OutsideChart { point: pf });
    }
    let n = spec.dim();
    let jets = spec.component_jets(point, order)?;
    let g = TensorField::from_components(n, 2, order, jets);
    let metric = {
        let gv = Tensor::from_fn_cov(n, 2, |idx| g.comp(idx).value());
        MetricAtPoint::new(gv).map_err(ZooError::Tensor)?
    };
    let g_inv = TensorField::from_components(n, 2, order, invert_jet_matrix(n, &g.comps)?);
    Ok((g, g_inv, metric))
}

/// Christoffel symbols Gamma^k_{ij} as jets one order below the metric,
/// indexed [k][i][j] and symmetric in (i, j).
pub fn christoffel_field<T: Real>(g: &TensorField<T>, g_inv: &TensorField<T>) -> TensorField<T> {
    let n = g.dim();
    let q = g.order() - 1;
    let ginv_low = g_inv.truncated(q);
    // dg[l][i][j] = d_l g_{ij}
    let mut dg: Vec<Jet<T>> = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                dg.push(g.comp(&[i, j]).derive(l));
            }
        }
    }
    let at = |l: usize, i: usize, j: usize| &dg[(l * n + i) * n + j];
    let space_q = JetSpace::get(n, q);
    let half = T::one() / T::from_count(2);
    let mut comps = vec![Jet::constant(space_q.clone(), T::zero()); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = Jet::constant(space_q.clone(), T::zero());
                for l in 0..n {
                    let sum = at(i, j, l).add(at(j, i, l)).sub(at(l, i, j));
                    if sum.is_zero() {
                        continue;
                    }
                    acc.mul_acc(ginv_low.comp(&[k, l]), &sum);
                }
                let acc = acc.scale(half);
                comps[(k * n + i) * n + j] = acc.clone();
                comps[(k * n + j) * n + i] = acc;
            }
        }
    }
    TensorField::from_components(n, 3, q, comps)
}

/// Fully covariant Riemann tensor as jets two orders below the metric.
pub fn riemann_field<T: Real>(g: &TensorField<T>, gamma: &TensorField<T>) -> TensorField<T> {
    let n = g.dim();
    let q = gamma.order() - 1;
    let gam_low = gamma.truncated(q);
    let g_low = g.truncated(q);
    let space_q = JetSpace::get(n, q);
    let zero = || Jet::constant(space_q.clone(), T::zero());

    // upper[e][j][k][l] = R^e_{jkl}, antisymmetric in (k, l)
    let mut upper = vec![zero(); n * n * n * n];
    let pos = |e: usize, j: usize, k: usize, l: usize| ((e * n + j) * n + k) * n + l;
    for e in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    let mut acc = gamma.comp(&[e, l, j]).derive(k);
                    acc = acc.sub(&gamma.comp(&[e, k, j]).derive(l));
                    for m in 0..n {
                        let a = gam_low.comp(&[e, k, m]);
                        let b = gam_low.comp(&[m, l, j]);
                        if !a.is_zero() && !b.is_zero() {
                            acc.mul_acc(a, b);
                        }
                        let c = gam_low.comp(&[e, l, m]);
                        let d = gam_low.comp(&[m, k, j]);
                        if !c.is_zero() && !d.is_zero() {
                            let mut t = zero();
                            t.mul_acc(c, d);
                            acc = acc.sub(&t);
                        }
                    }
                    upper[pos(e, j, k, l)] = acc.clone();
                    upper[pos(e, j, l, k)] = acc.neg();
                }
            }
        }
    }

    // lower: R_{ijkl} = g_{ie} R^e_{jkl}
    let mut comps = Vec::with_capacity(n * n * n * n);
    crate::tensor::for_each_index(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = zero();
        for e in 0..n {
            let ge = g_low.comp(&[i, e]);
            let up = &upper[pos(e, j, k, l)];
            if !ge.is_zero() && !up.is_zero() {
                acc.mul_acc(ge, up);
            }
        }
        comps.push(acc);
    });
    TensorField::from_components(n, 4, q, comps)
}

/// Ricci (Ric_{ik} = g^{jl} R_{ijkl}), scalar curvature jet, and the
/// traceless Ricci field.
pub fn ricci_fields<T: Real>(
    riem: &TensorField<T>,
    g: &TensorField<T>,
    g_inv: &TensorField<T>,
) -> (TensorField<T>, Jet<T>, TensorField<T>) {
    let n = riem.dim();
    let q = riem.order();
    let ginv = g_inv.truncated(q);
    let g_low = g.truncated(q);
    let space_q = JetSpace::get(n, q);
    let zero = || Jet::constant(space_q.clone(), T::zero());

    let mut ric_comps = vec![zero(); n * n];
    for i in 0..n {
        for k in i..n {
            let mut acc = zero();
            for j in 0..n {
                for l in 0..n {
                    let w = ginv.comp(&[j, l]);
                    let r = riem.comp(&[i, j, k, l]);
                    if !w.is_zero() && !r.is_zero() {
                        acc.mul_acc(w, r);
                    }
                }
            }
            ric_comps[i * n + k] = acc.clone();
            ric_comps[k * n + i] = acc;
        }
    }
    let ric = TensorField::from_components(n, 2, q, ric_comps);

    let mut r_jet = zero();
    for i in 0..n {
        for k in 0..n {
            let w = ginv.comp(&[i, k]);
            let rc = ric.comp(&[i, k]);
            if !w.is_zero() && !rc.is_zero() {
                r_jet.mul_acc(w, rc);
            }
        }
    }

    let r_over_n = r_jet.scale(T::one() / T::from_count(n));
    let r0_comps: Vec<Jet<T>> = (0..n * n)
        .map(|p| {
            let (i, k) = (p / n, p % n);
            let mut t = ric.comp(&[i, k]).clone();
            let mut sub = zero();
            sub.mul_acc(&r_over_n, g_low.comp(&[i, k]));
            t = t.sub(&sub);
            t
        })
        .collect();
    let r0 = TensorField::from_components(n, 2, q, r0_comps);
    (ric, r_jet, r0)
}

/// Weyl tensor as a jet field, from the Ricci decomposition:
/// W = Riem - (Ric KN g)/(n-2) + R (g_ik g_jl - g_il g_jk)/((n-1)(n-2)).
pub fn weyl_field<T: Real>(
    riem: &TensorField<T>,
    ric: &TensorField<T>,
    r_jet: &Jet<T>,
    g: &TensorField<T>,
) -> TensorField<T> {
    let n = riem.dim();
    let q = riem.order();
    let g_low = g.truncated(q);
    let nf = T::from_count(n);
    let c_ric = T::one() / (nf - T::from_count(2));
    let c_scal = T::one() / ((nf - T::one()) * (nf - T::from_count(2)));
    // rg[i][j] = R * g_{ij} jets, reused across components
    let rg: Vec<Jet<T>> = (0..n * n)
        .map(|p| {
            let (i, j) = (p / n, p % n);
            r_jet.mul(g_low.comp(&[i, j]))
        })
        .collect();
    let rg_at = |i: usize, j: usize| &rg[i * n + j];

    TensorField::from_fn(n, 4, q, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = riem.comp(idx).clone();
        // - (Ric_ik g_jl - Ric_il g_jk + Ric_jl g_ik - Ric_jk g_il)/(n-2)
        let mut kn = Jet::constant(acc.space().clone(), T::zero());
        kn.mul_acc(ric.comp(&[i, k]), g_low.comp(&[j, l]));
        kn.mul_acc(ric.comp(&[j, l]), g_low.comp(&[i, k]));
        let mut kn_neg = Jet::constant(acc.space().clone(), T::zero());
        kn_neg.mul_acc(ric.comp(&[i, l]), g_low.comp(&[j, k]));
        kn_neg.mul_acc(ric.comp(&[j, k]), g_low.comp(&[i, l]));
        acc = acc.sub(&kn.sub(&kn_neg).scale(c_ric));
        // + R (g_ik g_jl - g_il g_jk)/((n-1)(n-2))
        let mut scal = Jet::constant(acc.space().clone(), T::zero());
        scal.mul_acc(rg_at(i, k), g_low.comp(&[j, l]));
        let mut scal_neg = Jet::constant(acc.space().clone(), T::zero());
        scal_neg.mul_acc(rg_at(i, l), g_low.comp(&[j, k]));
        acc.add(&scal.sub(&scal_neg).scale(c_scal))
    })
}

/// Second, independent route to Weyl at the value level (the traceless
/// form): W = Riem - (R0 KN g)/(n-2) - R (g_ik g_jl - g_il g_jk)/(n(n-1)).
pub fn weyl_traceless_route<T: Real>(
    riem: &Tensor<T>,
    r0: &Tensor<T>,
    r: T,
    m: &MetricAtPoint<T>,
) -> Tensor<T> {
    let n = riem.dim();
    let nf = T::from_count(n);
    let kn = crate::tensor::kulkarni_nomizu(r0, &m.g);
    let c_scal = r / (nf * (nf - T::one()));
    let scal = Tensor::from_fn_cov(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        c_scal * (m.g_at(i, k) * m.g_at(j, l) - m.g_at(i, l) * m.g_at(j, k))
    });
    riem.sub(&kn.scale(T::one() / (nf - T::from_count(2)))).sub(&scal)
}

/// Full inner product of two all-covariant jet fields, one inverse-metric
/// jet per slot pair.
pub fn field_inner<T: Real>(
    a: &TensorField<T>,
    b: &TensorField<T>,
    g_inv: &TensorField<T>,
) -> Jet<T> {
    assert_eq!(a.rank, b.rank);
    assert_eq!(a.order, b.order);
    let n = a.n;
    let ginv = g_inv.truncated(a.order);
    let space = JetSpace::get(n, a.order);
    let mut raised = a.clone();
    for slot in 0..a.rank {
        let stride = n.pow((a.rank - 1 - slot) as u32);
        let block = stride * n;
        let mut out = vec![Jet::constant(space.clone(), T::zero()); raised.comps.len()];
        for base in 0..raised.comps.len() / block {
            for rest in 0..stride {
                let off = base * block + rest;
                for jj in 0..n {
                    let mut acc = Jet::constant(space.clone(), T::zero());
                    for ii in 0..n {
                        let w = ginv.comp(&[jj, ii]);
                        let v = &raised.comps[off + ii * stride];
                        if !w.is_zero() && !v.is_zero() {
                            acc.mul_acc(w, v);
                        }
                    }
                    out[off + jj * stride] = acc;
                }
            }
        }
        raised.comps = out;
    }
    let mut total = Jet::constant(space, T::zero());
    for (x, y) in raised.comps.iter().zip(&b.comps) {
        if !x.is_zero() && !y.is_zero() {
            total.mul_acc(x, y);
        }
    }
    total
}

/// Derivative-level quantities of the full bundle.
#[derive(Debug, Clone)]
pub struct CurvatureDerivs<T: Real> {
    /// Chart gradient of the scalar curvature.
    pub dr: Tensor<T>,
    /// (nabla W)_{ijkl;m}
    pub nabla_w: Tensor<T>,
    /// (nabla^2 W)_{ijkl;m;p} = nabla_p nabla_m W_{ijkl}
    pub nabla2_w: Tensor<T>,
    /// Cotton tensor C_{ijk} from the Ricci form.
    pub cotton: Tensor<T>,
    /// Cotton tensor from the traceless-Ricci form (independent route).
    pub cotton_alt: Tensor<T>,
    /// (nabla C)_{kij;m}
    pub nabla_c: Tensor<T>,
    /// (nabla R0)_{ij;k}
    pub nabla_r0: Tensor<T>,
    /// (nabla^2 R0)_{ij;k;l}
    pub nabla2_r0: Tensor<T>,
    /// Bach tensor from W_{ikjl,lk}/(n-3) + W_{ikjl}R^{kl}/(n-2).
    pub bach_direct: Tensor<T>,
    /// Bach tensor from (C_{kij,k} + W_{ikjl}R^{kl})/(n-2).
    pub bach_cotton: Tensor<T>,
    /// The shared contraction W_{ikjl} R^{kl} (scale reference for Bach).
    pub w_ric: Tensor<T>,
    /// |W|^2 as an order-2 scalar jet.
    pub w_norm2_jet: Jet<T>,
    /// |R0|^2 as an order-2 scalar jet.
    pub r0_norm2_jet: Jet<T>,
}

/// Every curvature quantity at one chart point. `derivs` is populated by the
/// full constructor and absent from the cheaper value-level constructor used
/// in quadrature loops.
#[derive(Debug, Clone)]
pub struct CurvatureBundle<T: Real> {
    pub point: Vec<T>,
    pub metric: MetricAtPoint<T>,
    pub g_field: TensorField<T>,
    pub g_inv_field: TensorField<T>,
    /// Gamma^k_{ij} at [k][i][j], with partials to (metric order - 1).
    pub gamma: TensorField<T>,
    pub riem_field: TensorField<T>,
    pub ric_field: TensorField<T>,
    pub r_jet: Jet<T>,
    pub r0_field: TensorField<T>,
    pub weyl_field: TensorField<T>,
    pub riem: Tensor<T>,
    pub ric: Tensor<T>,
    pub r: T,
    pub r0: Tensor<T>,
    pub weyl: Tensor<T>,
    /// Weyl via the traceless-Ricci route, for the dual-formula check.
    pub weyl_alt: Tensor<T>,
    pub derivs: Option<CurvatureDerivs<T>>,
}

/// Value-level bundle: curvature tensors at the point, no derivative data.
/// Metric jets of order 2 suffice.
pub fn curvature_values<T: Real>(
    spec: &MetricSpec,
    point: &[T],
) -> Result<CurvatureBundle<T>, CurvatureError> {
    bundle_at(spec, point, 2)
}

/// Full bundle: order-4 metric jets, every derivative quantity populated.
pub fn curvature_bundle<T: Real>(
    spec: &MetricSpec,
    point: &[T],
) -> Result<CurvatureBundle<T>, CurvatureError> {
    bundle_at(spec, point, 4)
}

fn bundle_at<T: Real>(
    spec: &MetricSpec,
    point: &[T],
    metric_order: usize,
) -> Result<CurvatureBundle<T>, CurvatureError> {
    let n = spec.dim();
    if n < 3 {
        return Err(CurvatureError::DimensionTooSmall { n, needs: 3 });
    }
    let full = metric_order >= 4;
    if full && n < 4 {
        return Err(CurvatureError::DimensionTooSmall { n, needs: 4 });
    }
    let (g, g_inv, metric) = metric_field(spec, point, metric_order)?;
    let gamma = christoffel_field(&g, &g_inv);
    let riem_f = riemann_field(&g, &gamma);
    let (ric_f, r_jet, r0_f) = ricci_fields(&riem_f, &g, &g_inv);
    let weyl_f = weyl_field(&riem_f, &ric_f, &r_jet, &g);

    let riem = riem_f.value_cov();
    let ric = ric_f.value_cov();
    let r = r_jet.value();
    let r0 = r0_f.value_cov();
    let weyl = weyl_f.value_cov();
    let weyl_alt = weyl_traceless_route(&riem, &r0, r, &metric);

    let derivs = if full {
        Some(compute_derivs(n, &g, &g_inv, &gamma, &ric_f, &r_jet, &r0_f, &weyl_f, &ric, &metric)?)
    } else {
        None
    };

    Ok(CurvatureBundle {
        point: point.to_vec(),
        metric,
        g_field: g,
        g_inv_field: g_inv,
        gamma,
        riem_field: riem_f,
        ric_field: ric_f,
        r_jet,
        r0_field: r0_f,
        weyl_field: weyl_f,
        riem,
        ric,
        r,
        r0,
        weyl,
        weyl_alt,
        derivs,
    })
}

#[allow(clippy::too_many_arguments)]
fn compute_derivs<T: Real>(
    n: usize,
    g: &TensorField<T>,
    g_inv: &TensorField<T>,
    gamma: &TensorField<T>,
    ric_f: &TensorField<T>,
    r_jet: &Jet<T>,
    r0_f: &TensorField<T>,
    weyl_f: &TensorField<T>,
    ric: &Tensor<T>,
    metric: &MetricAtPoint<T>,
) -> Result<CurvatureDerivs<T>, CurvatureError> {
    let nf = T::from_count(n);
    let dr = Tensor::from_fn(n, &[Variance::Covariant], |idx| r_jet.derive(idx[0]).value());

    let nabla_w_f = covariant_derivative_once(weyl_f, gamma)?;
    let nabla_w = nabla_w_f.value_cov();
    let nabla2_w = covariant_derivative_once(&nabla_w_f, gamma)?.value_cov();

    let nabla_ric_f = covariant_derivative_once(ric_f, gamma)?;
    let nabla_r0_f = covariant_derivative_once(r0_f, gamma)?;
    let nabla_r0 = nabla_r0_f.value_cov();
    let nabla2_r0 = covariant_derivative_once(&nabla_r0_f, gamma)?.value_cov();

    // Cotton as an order-1 jet field (Ricci form), then its values and its
    // covariant derivative.
    let g1 = g.truncated(1);
    let dr_jets: Vec<Jet<T>> = (0..n).map(|i| r_jet.derive(i)).collect();
    let c_r = T::one() / (T::from_count(2) * (nf - T::one()));
    let cotton_f = TensorField::from_fn(n, 3, 1, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let mut acc = nabla_ric_f.comp(&[k, j, i]).sub(nabla_ric_f.comp(&[k, i, j]));
        let mut scal = Jet::constant(acc.space().clone(), T::zero());
        scal.mul_acc(&dr_jets[i], g1.comp(&[j, k]));
        let mut scal_neg = Jet::constant(acc.space().clone(), T::zero());
        scal_neg.mul_acc(&dr_jets[j], g1.comp(&[i, k]));
        acc = acc.sub(&scal.sub(&scal_neg).scale(c_r));
        acc
    });
    let cotton = cotton_f.value_cov();
    let nabla_c = covariant_derivative_once(&cotton_f, gamma)?.value_cov();

    // Independent Cotton route through the traceless Ricci.
    let c_r2 = (nf - T::from_count(2)) / (T::from_count(2) * nf * (nf - T::one()));
    let cotton_alt = Tensor::from_fn_cov(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        nabla_r0.get(&[k, j, i]) - nabla_r0.get(&[k, i, j])
            + c_r2 * (dr.get(&[i]) * metric.g_at(j, k) - dr.get(&[j]) * metric.g_at(i, k))
    });

    // W_{ikjl} R^{kl}, shared by both Bach forms.
    let weyl = weyl_f.value_cov();
    let ric_up = Tensor::from_fn(
        n,
        &[Variance::Contravariant, Variance::Contravariant],
        |idx| {
            let mut acc = T::zero();
            for a in 0..n {
                for b in 0..n {
                    acc += metric.g_inv_at(idx[0], a) * metric.g_inv_at(idx[1], b) * ric.get(&[a, b]);
                }
            }
            acc
        },
    );
    let w_ric = Tensor::from_fn_cov(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc = T::zero();
        for k in 0..n {
            for l in 0..n {
                acc += weyl.get(&[i, k, j, l]) * ric_up.get(&[k, l]);
            }
        }
        acc
    });

    // Direct Bach: (1/(n-3)) g^{lm} g^{kp} nabla_p nabla_m W_{ikjl} + (1/(n-2)) W_{ikjl} R^{kl}
    let c_direct = T::one() / (nf - T::from_count(3));
    let c_shared = T::one() / (nf - T::from_count(2));
    let bach_direct = Tensor::from_fn_cov(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc = T::zero();
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let glm = metric.g_inv_at(l, m);
                    if glm == T::zero() {
                        continue;
                    }
                    for p in 0..n {
                        let gkp = metric.g_inv_at(k, p);
                        if gkp == T::zero() {
                            continue;
                        }
                        acc += glm * gkp * nabla2_w.get(&[i, k, j, l, m, p]);
                    }
                }
            }
        }
        c_direct * acc + c_shared * w_ric.get(&[i, j])
    });

    // Cotton-form Bach: (1/(n-2)) (g^{km} nabla_m C_{kij} + W_{ikjl} R^{kl})
    let bach_cotton = Tensor::from_fn_cov(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc = T::zero();
        for k in 0..n {
            for m in 0..n {
                let w = metric.g_inv_at(k, m);
                if w != T::zero() {
                    acc += w * nabla_c.get(&[k, i, j, m]);
                }
            }
        }
        c_shared * (acc + w_ric.get(&[i, j]))
    });

    let w_norm2_jet = field_inner(&weyl_f.truncated(2), &weyl_f.truncated(2), g_inv);
    let r0_norm2_jet = field_inner(&r0_f.truncated(2), &r0_f.truncated(2), g_inv);

    Ok(CurvatureDerivs {
        dr,
        nabla_w,
        nabla2_w,
        cotton,
        cotton_alt,
        nabla_c,
        nabla_r0,
        nabla2_r0,
        bach_direct,
        bach_cotton,
        w_ric,
        w_norm2_jet,
        r0_norm2_jet,
    })
}

impl<T: Real> CurvatureBundle<T> {
    pub fn dim(&self) -> usize {
        self.g_field.dim()
    }

    pub fn derivs(&self) -> &CurvatureDerivs<T> {
        self.derivs.as_ref().expect("full bundle required for derivative quantities")
    }

    /// Laplace-Beltrami of a scalar jet (order >= 2) at the point:
    /// Delta f = g^{ij} (d_i d_j f - Gamma^k_{ij} d_k f).
    pub fn scalar_laplacian(&self, f: &Jet<T>) -> T {
        let n = self.dim();
        assert!(f.order() >= 2, "scalar Laplacian needs an order-2 jet");
        let mut alpha = vec![0u8; n];
        let grad: Vec<T> = (0..n)
            .map(|k| {
                alpha.fill(0);
                alpha[k] = 1;
                f.partial(&alpha).unwrap()
            })
            .collect();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let w = self.metric.g_inv_at(i, j);
                if w == T::zero() {
                    continue;
                }
                alpha.fill(0);
                alpha[i] += 1;
                alpha[j] += 1;
                let mut hess = f.partial(&alpha).unwrap();
                for k in 0..n {
                    hess -= self.gamma.comp(&[k, i, j]).value() * grad[k];
                }
                acc += w * hess;
            }
        }
        acc
    }

    /// |grad f|^2 = g^{ij} d_i f d_j f for a scalar jet (order >= 1).
    pub fn scalar_grad_norm2(&self, f: &Jet<T>) -> T {
        let n = self.dim();
        let mut alpha = vec![0u8; n];
        let grad: Vec<T> = (0..n)
            .map(|k| {
                alpha.fill(0);
                alpha[k] = 1;
                f.partial(&alpha).unwrap()
            })
            .collect();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += self.metric.g_inv_at(i, j) * grad[i] * grad[j];
            }
        }
        acc
    }

    /// Divergence of Weyl over its last slot: g^{lm} (nabla W)_{ijkl;m}.
    pub fn div_weyl(&self) -> Tensor<T> {
        let n = self.dim();
        let nw = &self.derivs().nabla_w;
        Tensor::from_fn_cov(n, 3, |idx| {
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            let mut acc = T::zero();
            for l in 0..n {
                for m in 0..n {
                    let w = self.metric.g_inv_at(l, m);
                    if w != T::zero() {
                        acc += w * nw.get(&[i, j, k, l, m]);
                    }
                }
            }
            acc
        })
    }

    /// Divergence of the traceless Ricci: g^{jk} (nabla R0)_{ij;k}.
    pub fn div_r0(&self) -> Tensor<T> {
        let n = self.dim();
        let nr = &self.derivs().nabla_r0;
        Tensor::from_fn(n, &[Variance::Covariant], |idx| {
            let i = idx[0];
            let mut acc = T::zero();
            for j in 0..n {
                for k in 0..n {
                    let w = self.metric.g_inv_at(j, k);
                    if w != T::zero() {
                        acc += w * nr.get(&[i, j, k]);
                    }
                }
            }
            acc
        })
    }

    /// Rough Laplacian of Weyl: g^{mp} (nabla^2 W)_{ijkl;m;p}.
    pub fn delta_weyl(&self) -> Tensor<T> {
        let n = self.dim();
        let nw2 = &self.derivs().nabla2_w;
        Tensor::from_fn_cov(n, 4, |idx| {
            let mut acc = T::zero();
            for m in 0..n {
                for p in 0..n {
                    let w = self.metric.g_inv_at(m, p);
                    if w != T::zero() {
                        acc += w * nw2.get(&[idx[0], idx[1], idx[2], idx[3], m, p]);
                    }
                }
            }
            acc
        })
    }

    /// Tensor Laplacian of the traceless Ricci: g^{kl} (nabla^2 R0)_{ij;k;l}.
    pub fn delta_r0(&self) -> Tensor<T> {
        let n = self.dim();
        let nr2 = &self.derivs().nabla2_r0;
        Tensor::from_fn_cov(n, 2, |idx| {
            let mut acc = T::zero();
            for k in 0..n {
                for l in 0..n {
                    let w = self.metric.g_inv_at(k, l);
                    if w != T::zero() {
                        acc += w * nr2.get(&[idx[0], idx[1], k, l]);
                    }
                }
            }
            acc
        })
    }
}
