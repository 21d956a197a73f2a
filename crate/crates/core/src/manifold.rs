//! The manifold of multivariate normal distributions.
//!
//! A point `(Σ, μ)` is realized as the order-`n+1` SPD matrix
//!
//! ```text
//! H = [[Θ,  δ              ],
//!      [δᵀ, 1 + δᵀ Θ⁻¹ δ   ]],      Θ = Σ⁻¹,  δ = Σ⁻¹ μ.
//! ```
//!
//! Tangent vectors are always expressed at the identity point `(I, 0)`;
//! other base points are handled by the affine normalization
//! `(Σ, μ) ↦ (A Σ Aᵀ, A μ + b)`, which is an isometry of the Fisher metric.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matcore::{spd_inv_sqrt, sym_eigen, SpdMatrix, SymMatrix};

/// Relative tolerance on the corner entry when reading an embedded point.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// Largest dimension accepted by [`fisher_numeric`].
pub const MAX_QUADRATURE_DIM: usize = 3;
/// Default Gauss–Hermite nodes per axis.
pub const DEFAULT_NODES: usize = 20;

/// A normal distribution `N(μ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPoint {
    pub sigma: SpdMatrix,
    pub mu: DVector<f64>,
}

impl GaussianPoint {
    pub fn new(sigma: SpdMatrix, mu: DVector<f64>) -> Result<Self> {
        if mu.len() != sigma.order() {
            return Err(Error::DimensionMismatch {
                expected: sigma.order(),
                found: mu.len(),
            });
        }
        Ok(Self { sigma, mu })
    }

    /// The standard normal `(I, 0)` in dimension `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            sigma: SpdMatrix::identity(n),
            mu: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn to_natural(&self) -> NaturalPoint {
        let theta = self.sigma.inverse();
        let delta = theta.as_matrix() * &self.mu;
        NaturalPoint { theta, delta }
    }
}

/// Natural parameters `Θ = Σ⁻¹`, `δ = Σ⁻¹ μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalPoint {
    pub theta: SpdMatrix,
    pub delta: DVector<f64>,
}

impl NaturalPoint {
    pub fn to_gaussian(&self) -> GaussianPoint {
        let sigma = self.theta.inverse();
        let mu = self.theta.solve_vec(&self.delta);
        GaussianPoint { sigma, mu }
    }
}

/// An order-`n+1` SPD matrix whose corner entry equals `1 + δᵀ Θ⁻¹ δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPoint {
    h: SpdMatrix,
}

impl EmbeddedPoint {
    /// Checks the corner relation to within [`CONSISTENCY_TOL`] (relative).
    pub fn new(h: SpdMatrix) -> Result<Self> {
        let residual = corner_residual(&h)?;
        let corner = h[(h.order() - 1, h.order() - 1)];
        if residual > CONSISTENCY_TOL * corner.abs().max(1.0) {
            return Err(Error::NotOnManifold { residual });
        }
        Ok(Self { h })
    }

    pub fn dim(&self) -> usize {
        self.h.order() - 1
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.h
    }

    pub fn theta(&self) -> SpdMatrix {
        let n = self.dim();
        SpdMatrix::new_unchecked(self.h.view((0, 0), (n, n)).into_owned())
    }

    pub fn delta(&self) -> DVector<f64> {
        let n = self.dim();
        self.h.view((0, n), (n, 1)).column(0).into_owned()
    }
}

/// `|H[n][n] - (1 + δᵀ Θ⁻¹ δ)|` for an order-`n+1` SPD matrix.
pub fn corner_residual(h: &SpdMatrix) -> Result<f64> {
    let order = h.order();
    if order < 2 {
        return Err(Error::InvalidParameter(
            "embedded point must have order at least 2".into(),
        ));
    }
    let n = order - 1;
    let theta = SpdMatrix::new_unchecked(h.view((0, 0), (n, n)).into_owned());
    let delta: DVector<f64> = h.view((0, n), (n, 1)).column(0).into_owned();
    Ok((h[(n, n)] - 1.0 - theta.inverse_quadratic_form(&delta)).abs())
}

pub fn embed(p: &GaussianPoint) -> Result<EmbeddedPoint> {
    let n = p.dim();
    let nat = p.to_natural();
    let corner = 1.0 + p.mu.dot(&nat.delta);
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(nat.theta.as_matrix());
    for i in 0..n {
        h[(i, n)] = nat.delta[i];
        h[(n, i)] = nat.delta[i];
    }
    h[(n, n)] = corner;
    Ok(EmbeddedPoint {
        h: SpdMatrix::from_symmetrized(&h)?,
    })
}

pub fn unembed(h: &EmbeddedPoint) -> GaussianPoint {
    NaturalPoint {
        theta: h.theta(),
        delta: h.delta(),
    }
    .to_gaussian()
}

/// Distance between `embed(p)` and the inverse of
/// `[[Σ + μμᵀ, -μ], [-μᵀ, 1]]`; the two realizations coincide.
pub fn alt_embed_check(p: &GaussianPoint) -> Result<f64> {
    let n = p.dim();
    let mut k = DMatrix::zeros(n + 1, n + 1);
    let outer = &p.mu * p.mu.transpose();
    k.view_mut((0, 0), (n, n))
        .copy_from(&(p.sigma.as_matrix() + outer));
    for i in 0..n {
        k[(i, n)] = -p.mu[i];
        k[(n, i)] = -p.mu[i];
    }
    k[(n, n)] = 1.0;
    let inv = SpdMatrix::from_symmetrized(&k)?.inverse();
    Ok((inv.as_matrix() - embed(p)?.matrix().as_matrix()).norm())
}

/// A tangent vector `(A₀, a₀)` at the identity: the covariance velocity
/// `Σ̇(0) = A₀` and the mean velocity `μ̇(0) = a₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentN {
    pub cov: SymMatrix,
    pub mean: DVector<f64>,
}

impl TangentN {
    pub fn new(cov: SymMatrix, mean: DVector<f64>) -> Result<Self> {
        if cov.order() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: cov.order(),
                found: mean.len(),
            });
        }
        Ok(Self { cov, mean })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            cov: SymMatrix::zeros(n),
            mean: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            cov: self.cov.scale(factor),
            mean: &self.mean * factor,
        }
    }

    pub fn add(&self, other: &TangentN) -> Self {
        Self {
            cov: self.cov.add(&other.cov),
            mean: &self.mean + &other.mean,
        }
    }

    pub fn sub(&self, other: &TangentN) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Length in the default convention, `sqrt(2 tr A₀² + 4 |a₀|²)`.
    pub fn norm(&self) -> f64 {
        metric_at_identity(self, self, MetricConvention::Paper)
            .expect("self-pairing has matching dimensions")
            .sqrt()
    }

    /// `[[-A₀, a₀], [a₀ᵀ, 0]]`, the velocity of the embedded curve.
    pub fn embedded(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::zeros(n + 1, n + 1);
        t.view_mut((0, 0), (n, n)).copy_from(&(-self.cov.as_matrix()));
        for i in 0..n {
            t[(i, n)] = self.mean[i];
            t[(n, i)] = self.mean[i];
        }
        t
    }

    /// Number of free coordinates, `n(n+3)/2`.
    pub fn coord_len(n: usize) -> usize {
        n * (n + 3) / 2
    }

    /// Upper triangle of `A₀` (row-major) followed by `a₀`.
    pub fn to_coords(&self) -> DVector<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(Self::coord_len(n));
        for i in 0..n {
            for j in i..n {
                out.push(self.cov[(i, j)]);
            }
        }
        out.extend(self.mean.iter());
        DVector::from_vec(out)
    }

    pub fn from_coords(n: usize, coords: &DVector<f64>) -> Result<Self> {
        if coords.len() != Self::coord_len(n) {
            return Err(Error::DimensionMismatch {
                expected: Self::coord_len(n),
                found: coords.len(),
            });
        }
        let mut cov = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] = coords[k];
                cov[(j, i)] = coords[k];
                k += 1;
            }
        }
        let mean = DVector::from_iterator(n, coords.iter().skip(k).copied());
        Ok(Self {
            cov: SymMatrix::from_symmetrized(&cov),
            mean,
        })
    }
}

/// Normalization of the metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricConvention {
    /// `⟨X, Y⟩ = 2 tr(T(X) T(Y))` on embedded tangents.
    #[default]
    Paper,
    /// The statistical Fisher information metric.
    Fisher,
}

impl MetricConvention {
    /// Factor applied to the default quadratic form.
    pub fn factor(self) -> f64 {
        match self {
            MetricConvention::Paper => 1.0,
            MetricConvention::Fisher => 0.25,
        }
    }
}

impl fmt::Display for MetricConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricConvention::Paper => "paper",
            MetricConvention::Fisher => "fisher",
        })
    }
}

impl FromStr for MetricConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(MetricConvention::Paper),
            "fisher" => Ok(MetricConvention::Fisher),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric convention {other:?}"
            ))),
        }
    }
}

/// Inner product of two tangents at the identity.
pub fn metric_at_identity(x: &TangentN, y: &TangentN, convention: MetricConvention) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let tx = x.embedded();
    let ty = y.embedded();
    // tr(AB) for symmetric A, B is the entrywise dot product
    Ok(2.0 * tx.dot(&ty) * convention.factor())
}

/// Affine change of variables `(Σ, μ) ↦ (A Σ Aᵀ, A μ + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, q: &GaussianPoint) -> Result<GaussianPoint> {
        if q.dim() != self.shift.len() {
            return Err(Error::DimensionMismatch {
                expected: self.shift.len(),
                found: q.dim(),
            });
        }
        let a = &self.linear;
        let sigma = SpdMatrix::from_symmetrized(&(a * q.sigma.as_matrix() * a.transpose()))?;
        let mu = a * &q.mu + &self.shift;
        GaussianPoint::new(sigma, mu)
    }

    /// Pushes a raw velocity `(Σ̇, μ̇)` forward: `(A Σ̇ Aᵀ, A μ̇)`.
    pub fn push_tangent(&self, v: &TangentN) -> TangentN {
        let a = &self.linear;
        TangentN {
            cov: SymMatrix::from_symmetrized(&(a * v.cov.as_matrix() * a.transpose())),
            mean: a * &v.mean,
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let inv = self
            .linear
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("affine map is singular".into()))?;
        let shift = -(&inv * &self.shift);
        Ok(AffineMap { linear: inv, shift })
    }
}

/// The affine map sending `p` to `(I, 0)`: `A = Σ^{-1/2}`, `b = -Σ^{-1/2} μ`.
pub fn normalize_to_identity(p: &GaussianPoint) -> Result<AffineMap> {
    let a = spd_inv_sqrt(&p.sigma)?.into_matrix();
    let shift = -(&a * &p.mu);
    Ok(AffineMap { linear: a, shift })
}

/// Inner product at `p` of raw velocities `(Σ̇, μ̇)`, pulled back to the
/// identity through [`normalize_to_identity`].
pub fn metric_at(
    p: &GaussianPoint,
    x: &TangentN,
    y: &TangentN,
    convention: MetricConvention,
) -> Result<f64> {
    let map = normalize_to_identity(p)?;
    metric_at_identity(&map.push_tangent(x), &map.push_tangent(y), convention)
}

/// Probabilists' Gauss–Hermite rule (weight `e^{-x²/2}`), normalized so the
/// weights sum to one. Nodes ascending.
pub fn gauss_hermite(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if nodes == 0 {
        return Err(Error::InvalidParameter("need at least one node".into()));
    }
    // Golub–Welsch on the Jacobi matrix of the monic Hermite recurrence.
    let mut jac = DMatrix::zeros(nodes, nodes);
    for k in 1..nodes {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = sym_eigen(&SymMatrix::from_symmetrized(&jac))?;
    let x = eig.values.iter().copied().collect();
    let w = (0..nodes).map(|j| eig.frame[(0, j)].powi(2)).collect();
    Ok((x, w))
}

/// Tensor-product Gauss–Hermite estimate of `E[(X log p)(Y log p)]` where
/// `X`, `Y` are raw velocities `(Σ̇, μ̇)` at `p`.
pub fn fisher_numeric(p: &GaussianPoint, x: &TangentN, y: &TangentN, nodes: usize) -> Result<f64> {
    let n = p.dim();
    if n > MAX_QUADRATURE_DIM {
        return Err(Error::UnsupportedDimension {
            n,
            max: MAX_QUADRATURE_DIM,
        });
    }
    for t in [x, y] {
        if t.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.dim(),
            });
        }
    }
    let (xs, ws) = gauss_hermite(nodes)?;
    let chol = p.sigma.clone().into_matrix().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let factor = chol.l();
    let sigma_inv = p.sigma.inverse();

    struct Score {
        offset: f64,
        quad: DMatrix<f64>,
        lin: DVector<f64>,
    }
    let score = |v: &TangentN| -> Score {
        let si = sigma_inv.as_matrix();
        Score {
            offset: -0.5 * (si * v.cov.as_matrix()).trace(),
            quad: si * v.cov.as_matrix() * si * 0.5,
            lin: si * &v.mean,
        }
    };
    let sx = score(x);
    let sy = score(y);
    let eval = |s: &Score, d: &DVector<f64>| s.offset + d.dot(&(&s.quad * d)) + s.lin.dot(d);

    let total = nodes.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut acc = 0.0;
    for _ in 0..total {
        let z = DVector::from_iterator(n, idx.iter().map(|&i| xs[i]));
        let w: f64 = idx.iter().map(|&i| ws[i]).product();
        let d = &factor * z;
        acc += w * eval(&sx, &d) * eval(&sy, &d);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < nodes {
                break;
            }
            *slot = 0;
        }
    }
    Ok(acc)
}
