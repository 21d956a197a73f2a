//! Arithmetic–harmonic mean iteration and geodesic midpoints.
//!
//! ```text
//! P' = (P + Q) / 2        Q' = 2 (P⁻¹ + Q⁻¹)⁻¹
//! ```
//!
//! Both sequences converge quadratically to the Riemannian midpoint
//! `P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{1/2}` of the pair. Applied to the
//! lifted endpoints `I` and `exp(V)` of a horizontal geodesic, the limit is
//! `exp(V/2)`, whose projection is the midpoint on `N`.
//!
//! The iteration does not keep `P` and `Q` individually in `ℳ` (nor at unit
//! determinant); it swaps them instead, `J Pₖ⁻¹ J = Qₖ`, so only the common
//! limit is guaranteed to lie in `ℳ`.

use crate::error::{Error, Result};
use crate::geodesic::{exp_map_from, shoot_log, HorizontalGeodesic, ShootingOptions};
use crate::manifold::{normalize_to_identity, unembed, GaussianPoint, TangentN};
use crate::matcore::{j_matrix, spd_inv_sqrt, spd_sqrt, SpdMatrix};
use crate::sympair::{submersion_pi, PointM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AhmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AhmPair {
    pub p: SpdMatrix,
    pub q: SpdMatrix,
    pub iter: usize,
}

impl AhmPair {
    pub fn new(p: SpdMatrix, q: SpdMatrix) -> Result<Self> {
        if p.order() != q.order() {
            return Err(Error::DimensionMismatch {
                expected: p.order(),
                found: q.order(),
            });
        }
        Ok(Self { p, q, iter: 0 })
    }

    /// `|P - Q|` (Frobenius).
    pub fn gap(&self) -> f64 {
        (self.p.as_matrix() - self.q.as_matrix()).norm()
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.gap() <= tol * self.p.norm().max(1.0)
    }
}

pub fn ahm_step(pair: &AhmPair) -> Result<AhmPair> {
    let (p, q) = (pair.p.as_matrix(), pair.q.as_matrix());
    let arith = SpdMatrix::from_symmetrized(&((p + q) * 0.5))?;
    let sum_inv = pair.p.inverse().as_matrix() + pair.q.inverse().as_matrix();
    let harm = SpdMatrix::from_symmetrized(&sum_inv)?.inverse();
    let harm = SpdMatrix::from_symmetrized(&(harm.as_matrix() * 2.0))?;
    Ok(AhmPair {
        p: arith,
        q: harm,
        iter: pair.iter + 1,
    })
}

/// `|(Q' - P') + ½ (Q - P)(P + Q)⁻¹(Q - P)|` for one step. Vanishes in exact
/// arithmetic: the new harmonic mean sits below the new arithmetic mean.
pub fn gap_identity_residual(before: &AhmPair, after: &AhmPair) -> Result<f64> {
    let d = before.q.as_matrix() - before.p.as_matrix();
    let sum = SpdMatrix::from_symmetrized(&(before.p.as_matrix() + before.q.as_matrix()))?;
    let predicted = &d * sum.solve(&d) * 0.5;
    let predicted = (&predicted + predicted.transpose()) * 0.5;
    let actual = after.q.as_matrix() - after.p.as_matrix();
    Ok((actual + predicted).norm())
}

/// All iterates from `(P₀, Q₀)` up to and including the first converged pair.
pub fn ahm_iterates(p0: &SpdMatrix, q0: &SpdMatrix, opts: &AhmOptions) -> Result<Vec<AhmPair>> {
    let mut pair = AhmPair::new(p0.clone(), q0.clone())?;
    let mut trace = vec![pair.clone()];
    while !pair.converged(opts.tol) {
        if pair.iter >= opts.max_iter {
            return Err(Error::AhmNoConvergence {
                iterations: pair.iter,
                gap: pair.gap(),
            });
        }
        pair = ahm_step(&pair)?;
        trace.push(pair.clone());
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AhmResult {
    pub midpoint: SpdMatrix,
    pub iterations: usize,
    pub gap: f64,
}

pub fn ahm_midpoint(p0: &SpdMatrix, q0: &SpdMatrix, opts: &AhmOptions) -> Result<AhmResult> {
    let last = ahm_iterates(p0, q0, opts)?.pop().expect("trace is never empty");
    let midpoint = SpdMatrix::from_symmetrized(&((last.p.as_matrix() + last.q.as_matrix()) * 0.5))?;
    Ok(AhmResult {
        midpoint,
        iterations: last.iter,
        gap: last.gap(),
    })
}

/// `P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{1/2}` by eigendecomposition.
pub fn geometric_midpoint(p: &SpdMatrix, q: &SpdMatrix) -> Result<SpdMatrix> {
    if p.order() != q.order() {
        return Err(Error::DimensionMismatch {
            expected: p.order(),
            found: q.order(),
        });
    }
    let root = spd_sqrt(p)?;
    let inv_root = spd_inv_sqrt(p)?;
    let inner = SpdMatrix::from_symmetrized(&(inv_root.as_matrix() * q.as_matrix() * inv_root.as_matrix()))?;
    let mid = root.as_matrix() * spd_sqrt(&inner)?.as_matrix() * root.as_matrix();
    SpdMatrix::from_symmetrized(&mid)
}

/// `|J P⁻¹ J - Q|`: zero when the pair is swapped by the group involution.
pub fn swap_residual(pair: &AhmPair) -> Result<f64> {
    let n = crate::matcore::half_order(pair.p.order())?;
    let j = j_matrix(n);
    Ok((&j * pair.p.inverse().as_matrix() * &j - pair.q.as_matrix()).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MidpointOptions {
    pub ahm: AhmOptions,
    pub shooting: ShootingOptions,
}

/// A midpoint on `N` with the diagnostics of its construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Midpoint {
    pub point: GaussianPoint,
    /// Shot tangent in the chart normalized at `p`.
    pub tangent: TangentN,
    pub iterations: usize,
    /// Distance in `(Σ, μ)` to `exp_map_from(p, ξ, ½)`.
    pub cross_check: f64,
    /// `|G J G - J|` of the lifted midpoint.
    pub membership: f64,
}

fn point_gap(a: &GaussianPoint, b: &GaussianPoint) -> f64 {
    (a.sigma.as_matrix() - b.sigma.as_matrix()).norm() + (&a.mu - &b.mu).norm()
}

fn project(g: SpdMatrix) -> Result<(GaussianPoint, f64)> {
    let membership = crate::matcore::check_special_symmetry(&g)?;
    let m = PointM::new(g)?;
    Ok((unembed(&submersion_pi(&m)?), membership))
}

/// Midpoint of the shot geodesic from `p` to `q`, computed by AHM on the
/// lifted endpoints and cross-checked against the halved exponential.
pub fn midpoint_n(p: &GaussianPoint, q: &GaussianPoint, opts: &MidpointOptions) -> Result<Midpoint> {
    let xi = shoot_log(p, q, &opts.shooting)?.tangent;
    let n = p.dim();
    let geo = HorizontalGeodesic::new(&xi)?;
    let res = ahm_midpoint(&SpdMatrix::identity(2 * n + 1), &geo.lift(1.0)?, &opts.ahm)?;
    let (local, membership) = project(res.midpoint)?;
    let point = normalize_to_identity(p)?.inverse()?.apply(&local)?;
    let halved = exp_map_from(p, &xi, 0.5)?;
    Ok(Midpoint {
        cross_check: point_gap(&point, &halved),
        point,
        tangent: xi,
        iterations: res.iterations,
        membership,
    })
}

/// `2^depth + 1` points along the shot geodesic from `p` to `q`, built from
/// recursive AHM midpoints of the lifted endpoints. The first and last
/// entries are `p` and `q` themselves.
pub fn interpolate(
    p: &GaussianPoint,
    q: &GaussianPoint,
    depth: u32,
    opts: &MidpointOptions,
) -> Result<Vec<GaussianPoint>> {
    if depth == 0 || depth > 20 {
        return Err(Error::InvalidParameter("depth must be in 1..=20".into()));
    }
    let xi = shoot_log(p, q, &opts.shooting)?.tangent;
    let n = p.dim();
    let count = 1usize << depth;
    let mut lifted: Vec<Option<SpdMatrix>> = vec![None; count + 1];
    lifted[0] = Some(SpdMatrix::identity(2 * n + 1));
    lifted[count] = Some(HorizontalGeodesic::new(&xi)?.lift(1.0)?);
    let mut stride = count;
    while stride > 1 {
        let half = stride / 2;
        for left in (0..count).step_by(stride) {
            let a = lifted[left].as_ref().expect("filled at coarser level");
            let b = lifted[left + stride].as_ref().expect("filled at coarser level");
            lifted[left + half] = Some(ahm_midpoint(a, b, &opts.ahm)?.midpoint);
        }
        stride = half;
    }
    let back = normalize_to_identity(p)?.inverse()?;
    let mut out = Vec::with_capacity(count + 1);
    out.push(p.clone());
    for g in lifted.into_iter().take(count).skip(1) {
        let (local, _) = project(g.expect("all levels filled"))?;
        out.push(back.apply(&local)?);
    }
    out.push(q.clone());
    Ok(out)
}

/// `|AHM(I, exp V) - exp(V/2)|` (Frobenius).
pub fn lifted_midpoint_error(xi: &TangentN, opts: &AhmOptions) -> Result<f64> {
    let geo = HorizontalGeodesic::new(xi)?;
    let n = xi.dim();
    let res = ahm_midpoint(&SpdMatrix::identity(2 * n + 1), &geo.lift(1.0)?, opts)?;
    Ok((res.midpoint.as_matrix() - geo.lift(0.5)?.as_matrix()).norm())
}
