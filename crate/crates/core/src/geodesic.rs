//! Geodesics of the normal manifold via the horizontal lift.
//!
//! For a tangent `ξ = (A₀, a₀)` at the identity, `G(t) = exp(tV)` is a
//! horizontal geodesic of `ℳ`, and the leading `(n+1)×(n+1)` block of
//! `G(t)` is the embedded geodesic of `N`. The eigendecomposition of `V` is
//! computed once per geodesic, so sampling many times is cheap and
//! `G(s + t) = G(s) G(t)` holds to rounding.
//!
//! The inverse problem (log map) has no closed form here; it is solved by
//! damped Gauss–Newton shooting with a finite-difference Jacobian, falling
//! back to continuation along a path of targets when the direct solve does
//! not converge.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{
    embed, metric_at_identity, normalize_to_identity, unembed, GaussianPoint, MetricConvention,
    TangentN,
};
use crate::matcore::{block_cholesky, spd_log, sym_eigen, SpdMatrix, SymEigen, SymMatrix};
use crate::sympair::{build_v, submersion_pi, PointM};

/// Tolerance on the block Cholesky shape of lifted points, scaled by `|G|²`.
pub const STRUCTURE_TOL: f64 = 1e-8;
/// Default finite-difference step for residual checks.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// The horizontal geodesic `t ↦ exp(tV)` through the identity of `ℳ`.
#[derive(Debug, Clone)]
pub struct HorizontalGeodesic {
    source: TangentN,
    eig: SymEigen,
}

impl HorizontalGeodesic {
    pub fn new(xi: &TangentN) -> Result<Self> {
        let v = build_v(xi).matrix();
        Ok(Self {
            source: xi.clone(),
            eig: sym_eigen(&v)?,
        })
    }

    pub fn source(&self) -> &TangentN {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// `G(t) = exp(tV)`.
    pub fn lift(&self, t: f64) -> Result<SpdMatrix> {
        let g = self.eig.map(|l| (t * l).exp());
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(SpdMatrix::new_unchecked(g))
    }

    pub fn lift_point(&self, t: f64) -> Result<PointM> {
        PointM::new(self.lift(t)?)
    }

    /// The geodesic of `N` at parameter `t`.
    pub fn point_at(&self, t: f64) -> Result<GaussianPoint> {
        let m = self.lift_point(t)?;
        let bc = block_cholesky(m.matrix())?;
        let scale = m.matrix().norm().max(1.0);
        let residual = bc.structure_residuals().max();
        if residual > STRUCTURE_TOL * scale * scale {
            return Err(Error::InconsistentSplit { residual });
        }
        Ok(unembed(&submersion_pi(&m)?))
    }
}

/// Geodesic through `(I, 0)` with initial velocity `ξ`, evaluated at `t`.
pub fn exp_map(xi: &TangentN, t: f64) -> Result<GaussianPoint> {
    HorizontalGeodesic::new(xi)?.point_at(t)
}

/// Geodesic through `p`; `ξ` is expressed in the chart normalized at `p`.
pub fn exp_map_from(p: &GaussianPoint, xi: &TangentN, t: f64) -> Result<GaussianPoint> {
    check_dims(p, xi)?;
    let back = normalize_to_identity(p)?.inverse()?;
    back.apply(&exp_map(xi, t)?)
}

fn check_dims(p: &GaussianPoint, xi: &TangentN) -> Result<()> {
    if p.dim() != xi.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: xi.dim(),
        });
    }
    Ok(())
}

/// Samples of a geodesic on a grid of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTrajectory {
    pub ts: Vec<f64>,
    pub points: Vec<GaussianPoint>,
    pub source: TangentN,
    pub basepoint: GaussianPoint,
}

impl GeodesicTrajectory {
    pub fn sample(basepoint: &GaussianPoint, source: &TangentN, ts: &[f64]) -> Result<Self> {
        check_dims(basepoint, source)?;
        let geo = HorizontalGeodesic::new(source)?;
        let back = normalize_to_identity(basepoint)?.inverse()?;
        let points = ts
            .iter()
            .map(|&t| back.apply(&geo.point_at(t)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ts: ts.to_vec(),
            points,
            source: source.clone(),
            basepoint: basepoint.clone(),
        })
    }

    /// `steps + 1` equally spaced samples on `[t0, t1]`.
    pub fn uniform(
        basepoint: &GaussianPoint,
        source: &TangentN,
        t0: f64,
        t1: f64,
        steps: usize,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }
        let dt = (t1 - t0) / steps as f64;
        let ts: Vec<f64> = (0..=steps).map(|i| t0 + dt * i as f64).collect();
        Self::sample(basepoint, source, &ts)
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

/// Sample offset `k` such that `k * spacing == h` on a uniform grid.
pub(crate) fn stencil_offset(ts: &[f64], h: f64, reach: usize) -> Result<usize> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    if ts.len() < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let spacing = ts[1] - ts[0];
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(Error::InvalidParameter("sample times must increase".into()));
    }
    for w in ts.windows(2) {
        if ((w[1] - w[0]) - spacing).abs() > 1e-6 * spacing {
            return Err(Error::InvalidParameter("sample grid is not uniform".into()));
        }
    }
    let k = (h / spacing).round();
    if k < 1.0 {
        return Err(Error::GridTooCoarse { spacing, h });
    }
    if (k * spacing - h).abs() > 1e-6 * h {
        return Err(Error::InvalidParameter(format!(
            "h = {h:e} is not a multiple of the sample spacing {spacing:e}"
        )));
    }
    let k = k as usize;
    if ts.len() < 2 * reach * k + 1 {
        return Err(Error::InvalidParameter("trajectory too short for the stencil".into()));
    }
    Ok(k)
}

/// Fourth-order central first and second derivatives from five samples
/// `f(-2h), f(-h), f(0), f(h), f(2h)`.
fn central<T>(f: [&T; 5], h: f64) -> (T, T)
where
    T: Clone
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let [m2, m1, c, p1, p2] = f;
    let d1 = ((p1.clone() - m1.clone()) * 8.0 - (p2.clone() - m2.clone())) * (1.0 / (12.0 * h));
    let d2 = ((p1.clone() + m1.clone()) * 16.0 - (p2.clone() + m2.clone()) - c.clone() * 30.0)
        * (1.0 / (12.0 * h * h));
    (d1, d2)
}

struct Jet {
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    mu: DVector<f64>,
    d_sigma: DMatrix<f64>,
    dd_sigma: DMatrix<f64>,
    d_mu: DVector<f64>,
    dd_mu: DVector<f64>,
}

fn jets(traj: &GeodesicTrajectory, h: f64) -> Result<Vec<Jet>> {
    if traj.points.len() != traj.ts.len() {
        return Err(Error::DimensionMismatch {
            expected: traj.ts.len(),
            found: traj.points.len(),
        });
    }
    let k = stencil_offset(&traj.ts, h, 2)?;
    let pts = &traj.points;
    let sig: Vec<&DMatrix<f64>> = pts.iter().map(|p| p.sigma.as_matrix()).collect();
    let mus: Vec<&DVector<f64>> = pts.iter().map(|p| &p.mu).collect();
    let mut out = Vec::with_capacity(pts.len() - 4 * k);
    for i in (2 * k)..(pts.len() - 2 * k) {
        let idx = [i - 2 * k, i - k, i, i + k, i + 2 * k];
        let (d_sigma, dd_sigma) = central(idx.map(|j| sig[j]), h);
        let (d_mu, dd_mu) = central(idx.map(|j| mus[j]), h);
        out.push(Jet {
            sigma: sig[i].clone(),
            sigma_inv: pts[i].sigma.inverse().into_matrix(),
            mu: mus[i].clone(),
            d_sigma,
            dd_sigma,
            d_mu,
            dd_mu,
        });
    }
    Ok(out)
}

/// Largest residual of the geodesic equations
///
/// ```text
/// Σ̈ + μ̇μ̇ᵀ - Σ̇ Σ⁻¹ Σ̇ = 0,     μ̈ - Σ̇ Σ⁻¹ μ̇ = 0
/// ```
///
/// over the interior samples, with derivatives from fourth-order central
/// differences of step `h` (a multiple of the sample spacing).
pub fn geodesic_residual(traj: &GeodesicTrajectory, h: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for j in jets(traj, h)? {
        let cov = &j.dd_sigma + &j.d_mu * j.d_mu.transpose() - &j.d_sigma * &j.sigma_inv * &j.d_sigma;
        let mean = &j.dd_mu - &j.d_sigma * &j.sigma_inv * &j.d_mu;
        debug_assert_eq!(j.sigma.nrows(), j.mu.len());
        worst = worst.max(cov.norm() + mean.norm());
    }
    Ok(worst)
}

/// Drift of the first integrals `a = Σ⁻¹ μ̇` and `A = Σ⁻¹ Σ̇ + a μᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstIntegrals {
    /// `max |a(t) - a(t_first)|`.
    pub mean_drift: f64,
    /// `max |A(t) - A(t_first)|` (Frobenius).
    pub cov_drift: f64,
    /// The constants recovered at the first interior sample.
    pub initial: TangentN,
}

pub fn first_integrals(traj: &GeodesicTrajectory, h: f64) -> Result<FirstIntegrals> {
    let jets = jets(traj, h)?;
    let values: Vec<(DVector<f64>, DMatrix<f64>)> = jets
        .iter()
        .map(|j| {
            let a = &j.sigma_inv * &j.d_mu;
            let big = &j.sigma_inv * &j.d_sigma + &a * j.mu.transpose();
            (a, big)
        })
        .collect();
    let (a0, big0) = values[0].clone();
    let mut mean_drift = 0.0f64;
    let mut cov_drift = 0.0f64;
    for (a, big) in &values {
        mean_drift = mean_drift.max((a - &a0).norm());
        cov_drift = cov_drift.max((big - &big0).norm());
    }
    Ok(FirstIntegrals {
        mean_drift,
        cov_drift,
        initial: TangentN::new(SymMatrix::from_symmetrized(&big0), a0)?,
    })
}

/// Options for the shooting solver behind [`log_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Residual tolerance on the embedded endpoint, relative to `max(1, |H_q|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Scale applied to the initial guess `(log Σ_q', μ_q')`.
    pub init_scale: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
    /// Maximum number of times the continuation step may be halved.
    pub max_subdivisions: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            init_scale: 1.0,
            fd_step: 1e-6,
            max_subdivisions: 20,
        }
    }
}

/// Result of a converged shooting solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSolution {
    /// Tangent in the chart normalized at the base point.
    pub tangent: TangentN,
    /// `|embed(exp_map_from(p, ξ, 1)) - embed(q)|` in the original chart.
    pub residual: f64,
    pub iterations: usize,
}

/// Leading `n×n` upper triangle and `δ` of an embedded point.
fn embedded_coords(p: &GaussianPoint) -> Result<DVector<f64>> {
    let h = embed(p)?;
    let n = p.dim();
    let mut out = Vec::with_capacity(TangentN::coord_len(n));
    let m = h.matrix();
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    for i in 0..n {
        out.push(m[(i, n)]);
    }
    Ok(DVector::from_vec(out))
}

struct Shooter {
    n: usize,
    goal: DVector<f64>,
    tol: f64,
    opts: ShootingOptions,
}

impl Shooter {
    fn residual(&self, coords: &DVector<f64>) -> Option<DVector<f64>> {
        let xi = TangentN::from_coords(self.n, coords).ok()?;
        let end = exp_map(&xi, 1.0).ok()?;
        let r = embedded_coords(&end).ok()? - &self.goal;
        r.iter().all(|x| x.is_finite()).then_some(r)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let dim = x.len();
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let step = self.opts.fd_step * x[j].abs().max(1.0);
            let mut plus = x.clone();
            plus[j] += step;
            let mut minus = x.clone();
            minus[j] -= step;
            let col = (self.residual(&plus)? - self.residual(&minus)?) / (2.0 * step);
            jac.set_column(j, &col);
        }
        Some(jac)
    }

    /// Damped Newton from `start`. Returns the solution and iteration count.
    fn solve(&self, start: DVector<f64>) -> Result<(DVector<f64>, usize)> {
        let mut x = start;
        let mut r = self.residual(&x).ok_or(Error::NonFinite)?;
        let mut norm = r.norm();
        for iter in 0..self.opts.max_iter {
            if norm <= self.tol {
                return Ok((x, iter));
            }
            let stalled = || Error::ShootingNoConvergence {
                iterations: iter,
                residual: norm,
            };
            let jac = self.jacobian(&x).ok_or_else(stalled)?;
            let step = jac.lu().solve(&(-&r)).ok_or_else(stalled)?;
            let mut alpha = 1.0;
            loop {
                let trial = &x + &step * alpha;
                if let Some(rt) = self.residual(&trial) {
                    let nt = rt.norm();
                    if nt < (1.0 - 1e-4 * alpha) * norm || nt <= self.tol {
                        x = trial;
                        r = rt;
                        norm = nt;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    return Err(stalled());
                }
            }
        }
        if norm <= self.tol {
            return Ok((x, self.opts.max_iter));
        }
        Err(Error::ShootingNoConvergence {
            iterations: self.opts.max_iter,
            residual: norm,
        })
    }
}

/// Point on the continuation path from `(I, 0)` to `target`:
/// `(exp(s log Σ), s μ)`.
fn path_target(log_sigma: &SymMatrix, mu: &DVector<f64>, s: f64) -> Result<GaussianPoint> {
    let sigma = crate::matcore::sym_exp(&log_sigma.scale(s))?;
    GaussianPoint::new(sigma, mu * s)
}

/// Solves `exp_map_from(p, ξ, 1) = q` for `ξ` (normalized chart at `p`).
///
/// The returned geodesic is the one the Newton iteration reaches from the
/// initial guess; no claim of global minimality is made.
pub fn shoot_log(p: &GaussianPoint, q: &GaussianPoint, opts: &ShootingOptions) -> Result<LogSolution> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let n = p.dim();
    if p == q {
        return Ok(LogSolution {
            tangent: TangentN::zeros(n),
            residual: 0.0,
            iterations: 0,
        });
    }
    let target = normalize_to_identity(p)?.apply(q)?;
    let goal = embedded_coords(&target)?;
    let tol = opts.tol * embed(&target)?.matrix().norm().max(1.0);
    let log_sigma = spd_log(&target.sigma)?;
    let guess = TangentN::new(log_sigma.clone(), target.mu.clone())?.scale(opts.init_scale);

    let direct = Shooter { n, goal, tol, opts: *opts };
    let (coords, iterations) = match direct.solve(guess.to_coords()) {
        Ok(found) => found,
        Err(first_err) => {
            continuation(n, &log_sigma, &target.mu, tol, opts).map_err(|_| first_err)?
        }
    };
    let tangent = TangentN::from_coords(n, &coords)?;
    let end = exp_map_from(p, &tangent, 1.0)?;
    let residual = (embed(&end)?.matrix().as_matrix() - embed(q)?.matrix().as_matrix()).norm();
    Ok(LogSolution {
        tangent,
        residual,
        iterations,
    })
}

fn continuation(
    n: usize,
    log_sigma: &SymMatrix,
    mu: &DVector<f64>,
    tol: f64,
    opts: &ShootingOptions,
) -> Result<(DVector<f64>, usize)> {
    let mut s = 0.0f64;
    let mut current = DVector::zeros(TangentN::coord_len(n));
    let mut ds = 0.5f64;
    let mut halvings = 0;
    let mut total_iter = 0;
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        let target = path_target(log_sigma, mu, next)?;
        let shooter = Shooter {
            n,
            goal: embedded_coords(&target)?,
            tol,
            opts: *opts,
        };
        let start = if s == 0.0 {
            TangentN::new(log_sigma.clone(), mu.clone())?.to_coords() * next
        } else {
            &current * (next / s)
        };
        match shooter.solve(start) {
            Ok((x, it)) => {
                total_iter += it;
                current = x;
                s = next;
                ds = (ds * 2.0).min(1.0);
            }
            Err(e) => {
                halvings += 1;
                if halvings > opts.max_subdivisions {
                    return Err(e);
                }
                ds *= 0.5;
            }
        }
    }
    Ok((current, total_iter))
}

/// Initial velocity (normalized chart at `p`) of the geodesic from `p` to `q`.
pub fn log_map(p: &GaussianPoint, q: &GaussianPoint, opts: &ShootingOptions) -> Result<TangentN> {
    Ok(shoot_log(p, q, opts)?.tangent)
}

/// Geodesic distance: the length of the shot tangent.
pub fn distance(
    p: &GaussianPoint,
    q: &GaussianPoint,
    convention: MetricConvention,
    opts: &ShootingOptions,
) -> Result<f64> {
    let xi = log_map(p, q, opts)?;
    Ok(metric_at_identity(&xi, &xi, convention)?.max(0.0).sqrt())
}
