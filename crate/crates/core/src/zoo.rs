//! Reference metrics with closed-form oracle data, plus seeded random
//! perturbation metrics for property testing.
//!
//! Spheres and hyperbolic space use stereographic (conformal-to-flat) charts,
//! which keep jets well conditioned and avoid coordinate singularities;
//! product metrics are block-diagonal stereographic factors. Sampling boxes
//! stay away from chart boundaries.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError};
use crate::jet::Jet;
use crate::scalar::Real;
use crate::tensor::{kulkarni_nomizu, MetricAtPoint, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("unknown zoo metric `{0}`")]
    UnknownName(String),
    #[error("parameter `{name}`: {message}")]
    BadParam { name: String, message: String },
    #[error("dimension {n} outside supported range {lo}..={hi}")]
    DimensionRange { n: usize, lo: usize, hi: usize },
    #[error("epsilon {eps} too large for guaranteed positive definiteness (max {max:.4} for n={n})")]
    EpsilonTooLarge { eps: f64, max: f64, n: usize },
    #[error("component parse failure at ({i},{j}): {source}")]
    ComponentParse { i: usize, j: usize, source: ParseError },
    #[error("metric file is not symmetric-consistent at ({i},{j})")]
    AsymmetricComponents { i: usize, j: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Closed-form expectations attached to a zoo member.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct OracleData {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar_curvature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub einstein: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conformally_flat: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weyl_norm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traceless_ricci_norm2: Option<f64>,
}

/// A named coordinate chart with symmetric component expressions, bound
/// parameters, a sampling box, and optional oracle data.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    name: String,
    dim: usize,
    coords: Vec<String>,
    params: BTreeMap<String, f64>,
    component_src: Vec<String>,
    components: Vec<Expr>,
    sampling_box: Vec<(f64, f64)>,
    oracle: Option<OracleData>,
}

fn coord_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

impl MetricSpec {
    /// Build from row-major component strings; the upper triangle is
    /// authoritative and the lower triangle must match it or be omitted
    /// (empty strings are mirrored).
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        params: BTreeMap<String, f64>,
        components: Vec<String>,
        sampling_box: Vec<(f64, f64)>,
        oracle: Option<OracleData>,
    ) -> Result<Self, ZooError> {
        assert_eq!(components.len(), dim * dim, "component grid must be n x n");
        assert_eq!(sampling_box.len(), dim, "sampling box must have one interval per coordinate");
        let coords = coord_names(dim);
        let param_names: Vec<String> = params.keys().cloned().collect();
        let mut src = components;
        for i in 0..dim {
            for j in 0..i {
                let upper = src[j * dim + i].clone();
                let lower = &src[i * dim + j];
                if lower.is_empty() {
                    src[i * dim + j] = upper;
                } else if *lower != upper {
                    return Err(ZooError::AsymmetricComponents { i, j });
                }
            }
        }
        let mut parsed = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let text = &src[i * dim + j];
                let e = expr::parse_expr(text, &coords, &param_names)
                    .map_err(|source| ZooError::ComponentParse { i, j, source })?;
                parsed.push(e);
            }
        }
        Ok(MetricSpec {
            name: name.into(),
            dim,
            coords,
            params,
            component_src: src,
            components: parsed,
            sampling_box,
            oracle,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn component_source(&self, i: usize, j: usize) -> &str {
        &self.component_src[i * self.dim + j]
    }

    pub fn sampling_box(&self) -> &[(f64, f64)] {
        &self.sampling_box
    }

    pub fn oracle(&self) -> Option<&OracleData> {
        self.oracle.as_ref()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim
            && point
                .iter()
                .zip(&self.sampling_box)
                .all(|(x, (lo, hi))| *x >= lo - 1e-9 && *x <= hi + 1e-9)
    }

    /// Jets of all n^2 metric components at a point (row-major).
    /// The upper triangle is evaluated and mirrored, so the returned grid is
    /// exactly symmetric.
    pub fn component_jets<T: Real>(
        &self,
        point: &[T],
        order: usize,
    ) -> Result<Vec<Jet<T>>, ZooError> {
        let n = self.dim;
        let params: BTreeMap<String, T> =
            self.params.iter().map(|(k, &v)| (k.clone(), T::from_f64_lossy(v))).collect();
        let mut out: Vec<Option<Jet<T>>> = vec![None; n * n];
        for i in 0..n {
            for j in i..n {
                let jet = self.components[i * n + j].eval_jet(point, &params, order)?;
                if i != j {
                    out[j * n + i] = Some(jet.clone());
                }
                out[i * n + j] = Some(jet);
            }
        }
        Ok(out.into_iter().map(|j| j.unwrap()).collect())
    }

    /// Metric values assembled and Cholesky-validated at a point.
    pub fn metric_at<T: Real>(&self, point: &[T]) -> Result<MetricAtPoint<T>, ZooError> {
        let jets = self.component_jets(point, 0)?;
        let n = self.dim;
        let g = Tensor::from_fn_cov(n, 2, |idx| jets[idx[0] * n + idx[1]].value());
        Ok(MetricAtPoint::new(g)?)
    }

    /// Seeded uniform sample from the declared box; deterministic in
    /// (seed, count).
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.sampling_box
                    .iter()
                    .map(|(lo, hi)| {
                        let u: f64 = rng.gen();
                        lo + u * (hi - lo)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = MetricFile {
            name: self.name.clone(),
            dim: self.dim,
            coordinates: self.coords.clone(),
            parameters: self.params.clone(),
            components: (0..self.dim)
                .map(|i| {
                    (0..self.dim).map(|j| self.component_src[i * self.dim + j].clone()).collect()
                })
                .collect(),
            sampling_box: self.sampling_box.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            oracle: self.oracle.clone(),
        };
        serde_json::to_string_pretty(&file).expect("metric file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ZooError> {
        let file: MetricFile = serde_json::from_str(text).map_err(|e| ZooError::BadParam {
            name: "file".into(),
            message: e.to_string(),
        })?;
        if file.coordinates != coord_names(file.dim) {
            return Err(ZooError::BadParam {
                name: "coordinates".into(),
                message: format!("coordinates must be x1..x{}", file.dim),
            });
        }
        let mut components = Vec::with_capacity(file.dim * file.dim);
        for row in &file.components {
            for entry in row {
                components.push(entry.clone());
            }
        }
        MetricSpec::new(
            file.name,
            file.dim,
            file.parameters,
            components,
            file.sampling_box.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            file.oracle,
        )
    }
}

/// On-disk schema of a metric definition file.
#[derive(Serialize, Deserialize)]
struct MetricFile {
    name: String,
    dim: usize,
    coordinates: Vec<String>,
    parameters: BTreeMap<String, f64>,
    /// Row-major n x n expression strings; upper triangle authoritative.
    components: Vec<Vec<String>>,
    sampling_box: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleData>,
}

fn sum_of_squares(coords: &[String]) -> String {
    let terms: Vec<String> = coords.iter().map(|c| format!("{c}^2")).collect();
    terms.join(" + ")
}

fn diag_grid(n: usize, diag: impl Fn(usize) -> String) -> Vec<String> {
    let mut grid = vec!["0".to_string(); n * n];
    for i in 0..n {
        grid[i * n + i] = diag(i);
    }
    grid
}

fn check_dim(n: usize, lo: usize, hi: usize) -> Result<(), ZooError> {
    if n < lo || n > hi {
        return Err(ZooError::DimensionRange { n, lo, hi });
    }
    Ok(())
}

/// Flat chart on R^n.
pub fn euclidean(n: usize) -> Result<MetricSpec, ZooError> {
    check_dim(n, 2, 8)?;
    MetricSpec::new(
        format!("euclidean(n={n})"),
        n,
        BTreeMap::new(),
        diag_grid(n, |_| "1".into()),
        vec![(-1.0, 1.0); n],
        Some(OracleData {
            scalar_curvature: Some(0.0),
            einstein: Some(true),
            conformally_flat: Some(true),
            weyl_norm2: Some(0.0),
            traceless_ricci_norm2: Some(0.0),
        }),
    )
}

/// Round n-sphere of radius r in the stereographic chart
/// g = 4 r^4 / (r^2 + |x|^2)^2 delta, with R = n(n-1)/r^2.
pub fn sphere(n: usize, r: f64) -> Result<MetricSpec, ZooError> {
    check_dim(n, 2, 8)?;
    if !(r > 0.0) {
        return Err(ZooError::BadParam {
            name: "r".into(),
            message: "radius must be positive".into(),
        });
    }
    let coords = coord_names(n);
    let factor = format!("4*r^4/(r^2 + ({}))^2", sum_of_squares(&coords));
    let half = 0.5 * r / (n as f64).sqrt();
    let mut params = BTreeMap::new();
    params.insert("r".to_string(), r);
    MetricSpec::new(
        format!("sphere(n={n},r={r})"),
        n,
        params,
        diag_grid(n, |_| factor.clone()),
        vec![(-half, half); n],
        Some(OracleData {
            scalar_curvature: Some((n * (n - 1)) as f64 / (r * r)),
            einstein: Some(true),
            conformally_flat: Some(true),
            weyl_norm2: Some(0.0),
            traceless_ricci_norm2: Some(0.0),
        }),
    )
}

/// Hyperbolic space of curvature -1 in the Poincare ball chart
/// g = 4 / (1 - |x|^2)^2 delta, with R = -n(n-1).
pub fn hyperbolic(n: usize) -> Result<MetricSpec, ZooError> {
    check_dim(n, 2, 8)?;
    let coords = coord_names(n);
    let factor = format!("4/(1 - ({}))^2", sum_of_squares(&coords));
    let half = 0.5 / (n as f64).sqrt();
    MetricSpec::new(
        format!("hyperbolic(n={n})"),
        n,
        BTreeMap::new(),
        diag_grid(n, |_| factor.clone()),
        vec![(-half, half); n],
        Some(OracleData {
            scalar_curvature: Some(-((n * (n - 1)) as f64)),
            einstein: Some(true),
            conformally_flat: Some(true),
            weyl_norm2: Some(0.0),
            traceless_ricci_norm2: Some(0.0),
        }),
    )
}

/// S^p(a) x S^q(b), block-diagonal stereographic factor charts.
/// R = p(p-1)/a^2 + q(q-1)/b^2; Einstein iff (p-1)/a^2 = (q-1)/b^2.
pub fn product_spheres(p: usize, a: f64, q: usize, b: f64) -> Result<MetricSpec, ZooError> {
    check_dim(p, 2, 6)?;
    check_dim(q, 2, 6)?;
    let n = p + q;
    check_dim(n, 4, 8)?;
    for (name, v) in [("a", a), ("b", b)] {
        if !(v > 0.0) {
            return Err(ZooError::BadParam {
                name: name.into(),
                message: "radius must be positive".into(),
            });
        }
    }
    let coords = coord_names(n);
    let first = format!("4*a^4/(a^2 + ({}))^2", sum_of_squares(&coords[..p]));
    let second = format!("4*b^4/(b^2 + ({}))^2", sum_of_squares(&coords[p..]));
    let grid = diag_grid(n, |i| if i < p { first.clone() } else { second.clone() });
    let half_a = 0.5 * a / (p as f64).sqrt();
    let half_b = 0.5 * b / (q as f64).sqrt();
    let mut boxes = vec![(-half_a, half_a); p];
    boxes.extend(vec![(-half_b, half_b); q]);
    let mut params = BTreeMap::new();
    params.insert("a".to_string(), a);
    params.insert("b".to_string(), b);

    let k1 = 1.0 / (a * a);
    let k2 = 1.0 / (b * b);
    let r_scalar = (p * (p - 1)) as f64 * k1 + (q * (q - 1)) as f64 * k2;
    let einstein = ((p - 1) as f64 * k1 - (q - 1) as f64 * k2).abs() < 1e-12;
    let oracle = OracleData {
        scalar_curvature: Some(r_scalar),
        einstein: Some(einstein),
        conformally_flat: None,
        weyl_norm2: Some(product_weyl_norm2(p, k1, q, k2)),
        traceless_ricci_norm2: Some(product_traceless_ricci_norm2(p, k1, q, k2)),
    };
    MetricSpec::new(
        format!("product_spheres(p={p},a={a},q={q},b={b})"),
        n,
        params,
        grid,
        boxes,
        Some(oracle),
    )
}

fn product_traceless_ricci_norm2(p: usize, k1: f64, q: usize, k2: f64) -> f64 {
    let n = (p + q) as f64;
    let r = (p * (p - 1)) as f64 * k1 + (q * (q - 1)) as f64 * k2;
    let d1 = (p - 1) as f64 * k1 - r / n;
    let d2 = (q - 1) as f64 * k2 - r / n;
    p as f64 * d1 * d1 + q as f64 * d2 * d2
}

/// |W|^2 of a product of constant-curvature factors, computed by brute force
/// from the block Riemann tensor in an orthonormal frame. This is an
/// algebraic oracle, fully independent of the jet engine.
fn product_weyl_norm2(p: usize, k1: f64, q: usize, k2: f64) -> f64 {
    let n = p + q;
    let g = Tensor::from_fn_cov(n, 2, |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 });
    let m = MetricAtPoint::new(g.clone()).expect("orthonormal frame metric");
    let block = |i: usize| usize::from(i >= p);
    let kappa = [k1, k2];
    let riem = Tensor::from_fn_cov(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        if [j, k, l].iter().any(|&s| block(s) != block(i)) {
            return 0.0;
        }
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        kappa[block(i)] * (d(i, k) * d(j, l) - d(i, l) * d(j, k))
    });
    let ric = riem.contract(1, 3, &m);
    let r = ric.contract(0, 1, &m).data()[0];
    let nf = n as f64;
    let ric_kn = kulkarni_nomizu(&ric, &g);
    let gg = kulkarni_nomizu(&g, &g);
    let weyl = riem
        .sub(&ric_kn.scale(1.0 / (nf - 2.0)))
        .add(&gg.scale(r / (2.0 * (nf - 1.0) * (nf - 2.0))));
    weyl.norm2(&m)
}

/// Conformally flat metric g = exp(2 f) delta for a user-supplied expression
/// f over the coordinates.
pub fn conformal(n: usize, f_src: &str) -> Result<MetricSpec, ZooError> {
    check_dim(n, 2, 8)?;
    let coords = coord_names(n);
    // Validate f on its own first so errors point at the user's text.
    expr::parse_expr(f_src, &coords, &[])
        .map_err(|source| ZooError::ComponentParse { i: 0, j: 0, source })?;
    let factor = format!("exp(2*({f_src}))");
    MetricSpec::new(
        format!("conformal(n={n},f={f_src})"),
        n,
        BTreeMap::new(),
        diag_grid(n, |_| factor.clone()),
        vec![(-0.3, 0.3); n],
        Some(OracleData {
            scalar_curvature: None,
            einstein: None,
            conformally_flat: Some(true),
            weyl_norm2: Some(0.0),
            traceless_ricci_norm2: None,
        }),
    )
}

/// Number of monomials of total degree exactly d in n variables.
fn monomial_count(n: usize, d: usize) -> usize {
    // C(n + d - 1, d)
    let mut acc = 1usize;
    for i in 0..d {
        acc = acc * (n + i) / (i + 1);
    }
    acc
}

/// Largest epsilon with guaranteed positive definiteness on [-0.2, 0.2]^n.
///
/// Gershgorin: eigenvalues of delta + eps q(x) are at least
/// 1 - n * eps * max |q_ij|, and each q_ij is a degree-<=4 polynomial with
/// coefficients in [-1, 1], so |q_ij| <= sum_d C(n+d-1, d) 0.2^d =: K(n)
/// on the box. Requiring n * eps * K(n) < 1 gives the bound.
pub fn perturbation_epsilon_max(n: usize) -> f64 {
    let k: f64 = (0..=4).map(|d| monomial_count(n, d) as f64 * 0.2f64.powi(d as i32)).sum();
    1.0 / (n as f64 * k)
}

/// g = delta + eps * q(x) with q_ij seeded random polynomials of total
/// degree <= 4 and coefficients in [-1, 1]. Deterministic in (n, seed, eps):
/// coefficients are drawn in fixed component order (i <= j) and graded-lex
/// monomial order.
pub fn perturbation(n: usize, seed: u64, eps: f64) -> Result<MetricSpec, ZooError> {
    if !(4..=6).contains(&n) {
        return Err(ZooError::DimensionRange { n, lo: 4, hi: 6 });
    }
    let max = perturbation_epsilon_max(n).min(0.05);
    if !(eps >= 0.0) || eps > max {
        return Err(ZooError::EpsilonTooLarge { eps, max, n });
    }
    let coords = coord_names(n);
    let monomials = degree_le4_monomials(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = vec![String::new(); n * n];
    for i in 0..n {
        for j in i..n {
            let mut terms: Vec<String> = Vec::with_capacity(monomials.len() + 1);
            if i == j {
                terms.push("1".to_string());
            }
            for mono in &monomials {
                let c: f64 = rng.gen_range(-1.0..1.0);
                let scaled = c * eps;
                if scaled == 0.0 {
                    continue;
                }
                let mut factors = vec![format!("{scaled:?}")];
                for (v, &e) in mono.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => factors.push(coords[v].clone()),
                        _ => factors.push(format!("{}^{e}", coords[v])),
                    }
                }
                terms.push(factors.join("*"));
            }
            let src = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
            grid[i * n + j] = src.clone();
            grid[j * n + i] = src;
        }
    }
    MetricSpec::new(
        format!("perturbation(n={n},seed={seed},eps={eps})"),
        n,
        BTreeMap::new(),
        grid,
        vec![(-0.2, 0.2); n],
        None,
    )
}

fn degree_le4_monomials(n: usize) -> Vec<Vec<u8>> {
    // Same enumeration as the jet coefficient table, skipping the constant.
    let space = crate::jet::JetSpace::get(n, 4);
    (1..space.len()).map(|p| space.index_at(p).to_vec()).collect()
}

/// String-keyed dispatcher used by the CLI: names euclidean, sphere,
/// hyperbolic, product_spheres, conformal, perturbation.
pub fn zoo(name: &str, params: &BTreeMap<String, String>) -> Result<MetricSpec, ZooError> {
    let get_num = |key: &str, default: Option<f64>| -> Result<f64, ZooError> {
        match params.get(key) {
            Some(text) => text.parse::<f64>().map_err(|_| ZooError::BadParam {
                name: key.into(),
                message: format!("expected a number, got `{text}`"),
            }),
            None => default.ok_or_else(|| ZooError::BadParam {
                name: key.into(),
                message: "missing required parameter".into(),
            }),
        }
    };
    let get_usize = |key: &str, default: Option<usize>| -> Result<usize, ZooError> {
        match params.get(key) {
            Some(text) => text.parse::<usize>().map_err(|_| ZooError::BadParam {
                name: key.into(),
                message: format!("expected an integer, got `{text}`"),
            }),
            None => default.ok_or_else(|| ZooError::BadParam {
                name: key.into(),
                message: "missing required parameter".into(),
            }),
        }
    };
    match name {
        "euclidean" => euclidean(get_usize("n", Some(4))?),
        "sphere" => sphere(get_usize("n", Some(4))?, get_num("r", Some(1.0))?),
        "hyperbolic" => hyperbolic(get_usize("n", Some(4))?),
        "product_spheres" => product_spheres(
            get_usize("p", Some(2))?,
            get_num("a", Some(1.0))?,
            get_usize("q", Some(2))?,
            get_num("b", Some(1.0))?,
        ),
        "conformal" => {
            let f = params.get("f").ok_or_else(|| ZooError::BadParam {
                name: "f".into(),
                message: "missing conformal factor expression".into(),
            })?;
            conformal(get_usize("n", Some(4))?, f)
        }
        "perturbation" => perturbation(
            get_usize("n", Some(4))?,
            get_usize("seed", Some(42))? as u64,
            get_num("eps", Some(0.02))?,
        ),
        other => Err(ZooError::UnknownName(other.to_string())),
    }
}

/// Every zoo member with default-ish parameters, for export and sweeps.
pub fn standard_members() -> Vec<MetricSpec> {
    vec![
        euclidean(4).unwrap(),
        sphere(4, 1.0).unwrap(),
        sphere(5, 1.0).unwrap(),
        sphere(6, 1.0).unwrap(),
        hyperbolic(4).unwrap(),
        product_spheres(2, 1.0, 2, 1.0).unwrap(),
        product_spheres(2, 1.0, 2, 2.0).unwrap(),
        conformal(4, "0.1*x1^2").unwrap(),
        perturbation(4, 42, 0.02).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_oracle_and_symmetry() {
        let s = sphere(4, 1.0).unwrap();
        assert_eq!(s.oracle().unwrap().scalar_curvature, Some(12.0));
        assert_eq!(s.oracle().unwrap().einstein, Some(true));
        assert_eq!(s.oracle().unwrap().conformally_flat, Some(true));
        let pts = s.sample_points(5, 7);
        for p in &pts {
            let jets = s.component_jets(&p[..], 2).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let a = jets[i * 4 + j].value();
                    let b = jets[j * 4 + i].value();
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                }
            }
            assert!(s.metric_at(&p[..]).is_ok());
        }
    }

    #[test]
    fn product_sphere_oracles() {
        let equal = product_spheres(2, 1.0, 2, 1.0).unwrap();
        let o = equal.oracle().unwrap();
        assert_eq!(o.scalar_curvature, Some(4.0));
        assert_eq!(o.einstein, Some(true));
        // Full-contraction norm: |W|^2 = R^2/3 = 16/3, cross-checked by the
        // n=4 identity |W|^2 = |Riem|^2 - 2|Ric|^2 + R^2/3 = 8 - 8 + 16/3.
        let w2 = o.weyl_norm2.unwrap();
        assert!((w2 - 16.0 / 3.0).abs() < 1e-12, "got {w2}");

        let unequal = product_spheres(2, 1.0, 2, 2.0).unwrap();
        let o = unequal.oracle().unwrap();
        assert_eq!(o.scalar_curvature, Some(2.5));
        assert_eq!(o.einstein, Some(false));
        assert!((o.traceless_ricci_norm2.unwrap() - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn perturbation_is_deterministic_and_bounded() {
        let a = perturbation(4, 42, 0.02).unwrap();
        let b = perturbation(4, 42, 0.02).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.component_source(i, j), b.component_source(i, j));
            }
        }
        let c = perturbation(4, 43, 0.02).unwrap();
        assert_ne!(a.component_source(0, 0), c.component_source(0, 0));

        // flat limit
        let flat = perturbation(4, 1, 0.0).unwrap();
        let p = vec![0.1, -0.05, 0.2, 0.0];
        let jets = flat.component_jets(&p[..], 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(jets[i * 4 + j].value(), expect);
            }
        }

        // epsilon gate: n = 6 cap sits below the spec's 0.05 envelope
        let max6 = perturbation_epsilon_max(6);
        assert!(max6 < 0.05);
        assert!(perturbation(6, 1, max6 + 0.001).is_err());
        assert!(perturbation(6, 1, 0.02).is_ok());
        assert!(perturbation(3, 1, 0.01).is_err());

        // positive definiteness on the box for a stack of seeds
        for seed in 0..5u64 {
            let m = perturbation(5, seed, 0.02).unwrap();
            for p in m.sample_points(10, seed ^ 0xabcd) {
                m.metric_at(&p[..]).unwrap();
            }
        }
    }

    #[test]
    fn metric_file_round_trip() {
        let s = product_spheres(2, 1.0, 2, 2.0).unwrap();
        let json = s.to_json();
        let back = MetricSpec::from_json(&json).unwrap();
        assert_eq!(back.name(), s.name());
        assert_eq!(back.dim(), s.dim());
        assert_eq!(back.params(), s.params());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(back.component_source(i, j), s.component_source(i, j));
            }
        }
        assert_eq!(back.oracle(), s.oracle());
        // byte-identical re-serialization
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn zoo_dispatcher_and_errors() {
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), "4".to_string());
        params.insert("r".to_string(), "2".to_string());
        let s = zoo("sphere", &params).unwrap();
        assert_eq!(s.oracle().unwrap().scalar_curvature, Some(3.0));

        assert!(zoo("klein_bottle", &BTreeMap::new()).is_err());
        let mut bad = BTreeMap::new();
        bad.insert("r".to_string(), "-1".to_string());
        assert!(zoo("sphere", &bad).is_err());

        // p + q outside the supported range
        assert!(product_spheres(2, 1.0, 7, 1.0).is_err());
    }

    #[test]
    fn conformal_member_embeds_user_expression() {
        let c = conformal(4, "0.1*x1^2").unwrap();
        assert_eq!(c.component_source(0, 0), "exp(2*(0.1*x1^2))");
        assert_eq!(c.component_source(0, 1), "0");
        let bad = conformal(4, "x9");
        assert!(bad.is_err());
    }
}
