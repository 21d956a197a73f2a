//! The Toda-type Lax pair attached to a horizontal geodesic.
//!
//! With `ξ = (A₀, a₀)` fixed, the state `(Q, r)` evolves by
//!
//! ```text
//! Q̇ = -r a₀ᵀ,   ṙ = Q r,   Q(0) = A₀,  r(0) = a₀
//! ```
//!
//! which is `L̇ = [L, M]` for
//!
//! ```text
//!     [ -Q   r   0  ]        [ -Q   0   0  ]
//! L = [ a₀ᵀ  0  -rᵀ ]    M = [ a₀ᵀ  0   0  ]
//!     [  0  -a₀  Qᵀ ]        [  0  -a₀  Qᵀ ]
//! ```
//!
//! The solution is the adjoint orbit `L(t) = G₁(t)⁻¹ V G₁(t)` where
//! `exp(tV) = G₁ G₂` is the block Cholesky split.
//!
//! A second, quadratic form `2Q̇ = Q² - A₀² - 2a₀a₀ᵀ` is also provided. It
//! coincides with the first when `n = 1` or when `A₀` commutes with
//! `a₀a₀ᵀ`, and differs otherwise.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::stencil_offset;
use crate::manifold::TangentN;
use crate::matcore::{block_cholesky, sym_eigen, SpdMatrix, SymEigen};
use crate::sympair::{build_v, JMatrix};

pub const DEFAULT_DT: f64 = 1e-3;
/// Agreement required between the `G₁` and `G₂` routes to `L(t)`, relative
/// to `max(1, |V|) max(1, |G|)`.
pub const SPLIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LaxState {
    /// General (not necessarily symmetric) `n×n` matrix.
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
}

impl LaxState {
    pub fn new(q: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::NotSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        if r.len() != q.nrows() {
            return Err(Error::DimensionMismatch {
                expected: q.nrows(),
                found: r.len(),
            });
        }
        Ok(Self { q, r })
    }

    pub fn initial(xi: &TangentN) -> Self {
        Self {
            q: xi.cov.as_matrix().clone(),
            r: xi.mean.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// Reads `Q = -L₁₁` and `r = L₁₂` back from an assembled `L`.
    pub fn from_l(l: &DMatrix<f64>) -> Result<Self> {
        let n = crate::matcore::half_order(l.nrows())?;
        Ok(Self {
            q: -l.view((0, 0), (n, n)).into_owned(),
            r: l.view((0, n), (n, 1)).column(0).into_owned(),
        })
    }

    fn axpy(&self, h: f64, d: &LaxState) -> LaxState {
        LaxState {
            q: &self.q + &d.q * h,
            r: &self.r + &d.r * h,
        }
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(self.r.iter()).all(|x| x.is_finite())
    }

    pub fn distance(&self, other: &LaxState) -> f64 {
        ((&self.q - &other.q).norm_squared() + (&self.r - &other.r).norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaxMatrices {
    pub l: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

impl LaxMatrices {
    pub fn build(state: &LaxState, a0: &DVector<f64>) -> Result<Self> {
        let n = state.dim();
        if a0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a0.len(),
            });
        }
        let size = 2 * n + 1;
        let mut m = DMatrix::zeros(size, size);
        m.view_mut((0, 0), (n, n)).copy_from(&(-&state.q));
        m.view_mut((n + 1, n + 1), (n, n)).copy_from(&state.q.transpose());
        for i in 0..n {
            m[(n, i)] = a0[i];
            m[(n + 1 + i, n)] = -a0[i];
        }
        let mut l = m.clone();
        for i in 0..n {
            l[(i, n)] = state.r[i];
            l[(n, n + 1 + i)] = -state.r[i];
        }
        Ok(Self { l, m })
    }

    pub fn commutator(&self) -> DMatrix<f64> {
        &self.l * &self.m - &self.m * &self.l
    }
}

/// `(-r a₀ᵀ, Q r)`.
pub fn rhs_v1(s: &LaxState, a0: &DVector<f64>) -> LaxState {
    LaxState {
        q: -&s.r * a0.transpose(),
        r: &s.q * &s.r,
    }
}

/// `(½(Q² - A₀² - 2a₀a₀ᵀ), Q r)`.
pub fn rhs_v2(s: &LaxState, a0_cov: &DMatrix<f64>, a0: &DVector<f64>) -> LaxState {
    let q = (&s.q * &s.q - a0_cov * a0_cov - a0 * a0.transpose() * 2.0) * 0.5;
    LaxState { q, r: &s.q * &s.r }
}

/// Which right-hand side to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaxRhs {
    /// `Q̇ = -r a₀ᵀ`.
    #[default]
    V1,
    /// `2Q̇ = Q² - A₀² - 2a₀a₀ᵀ`.
    V2,
}

impl fmt::Display for LaxRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaxRhs::V1 => "v1",
            LaxRhs::V2 => "v2",
        })
    }
}

impl FromStr for LaxRhs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(LaxRhs::V1),
            "v2" => Ok(LaxRhs::V2),
            other => Err(Error::InvalidParameter(format!("unknown Lax form '{other}'"))),
        }
    }
}

impl LaxRhs {
    fn eval(self, s: &LaxState, xi: &TangentN) -> LaxState {
        match self {
            LaxRhs::V1 => rhs_v1(s, &xi.mean),
            LaxRhs::V2 => rhs_v2(s, xi.cov.as_matrix(), &xi.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaxSample {
    pub t: f64,
    pub state: LaxState,
}

fn rk4(rhs: LaxRhs, xi: &TangentN, s: &LaxState, h: f64) -> LaxState {
    let k1 = rhs.eval(s, xi);
    let k2 = rhs.eval(&s.axpy(h / 2.0, &k1), xi);
    let k3 = rhs.eval(&s.axpy(h / 2.0, &k2), xi);
    let k4 = rhs.eval(&s.axpy(h, &k3), xi);
    LaxState {
        q: &s.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (h / 6.0),
        r: &s.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (h / 6.0),
    }
}

/// Fixed-step RK4 from `(A₀, a₀)` on `[0, t_end]`. The last sample is at
/// `t_end` exactly, after a shorter final step if `dt` does not divide it.
pub fn integrate(rhs: LaxRhs, xi: &TangentN, t_end: f64, dt: f64) -> Result<Vec<LaxSample>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter("t_end must be non-negative".into()));
    }
    let full = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    let mut state = LaxState::initial(xi);
    let mut out = Vec::with_capacity(full + 2);
    out.push(LaxSample {
        t: 0.0,
        state: state.clone(),
    });
    for i in 1..=full {
        let t = (i as f64 * dt).min(t_end);
        state = rk4(rhs, xi, &state, t - out[i - 1].t);
        if !state.is_finite() {
            return Err(Error::BlowUp { t });
        }
        out.push(LaxSample {
            t,
            state: state.clone(),
        });
    }
    let last_t = out.last().map_or(0.0, |s| s.t);
    let rest = t_end - last_t;
    if rest > 1e-12 * t_end.max(1.0) {
        state = rk4(rhs, xi, &state, rest);
        if !state.is_finite() {
            return Err(Error::BlowUp { t: t_end });
        }
        out.push(LaxSample { t: t_end, state });
    } else if let Some(last) = out.last_mut() {
        last.t = t_end;
    }
    Ok(out)
}

/// Step-halving comparison at `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Richardson {
    pub coarse: LaxState,
    pub fine: LaxState,
    /// `|fine - coarse| / 15`, the RK4 error estimate for the fine run.
    pub estimate: f64,
}

pub fn richardson(rhs: LaxRhs, xi: &TangentN, t_end: f64, dt: f64) -> Result<Richardson> {
    let end = |h| -> Result<LaxState> {
        Ok(integrate(rhs, xi, t_end, h)?.pop().expect("at least one sample").state)
    };
    let coarse = end(dt)?;
    let fine = end(dt / 2.0)?;
    Ok(Richardson {
        estimate: coarse.distance(&fine) / 15.0,
        coarse,
        fine,
    })
}

/// The adjoint orbit `t ↦ G₁(t)⁻¹ V G₁(t)` with the eigendecomposition of
/// `V` cached.
#[derive(Debug, Clone)]
pub struct LaxOrbit {
    v: DMatrix<f64>,
    eig: SymEigen,
    n: usize,
}

/// `L(t)` from the closed form with its consistency residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormL {
    pub l: DMatrix<f64>,
    /// `|G₁⁻¹ V G₁ - G₂ V G₂⁻¹|`.
    pub split_agreement: f64,
    /// Largest deviation from the expected zero/constant pattern.
    pub sparsity: f64,
}

impl LaxOrbit {
    pub fn new(xi: &TangentN) -> Result<Self> {
        let v = build_v(xi).matrix();
        let eig = sym_eigen(&v)?;
        Ok(Self {
            v: v.into_matrix(),
            eig,
            n: xi.dim(),
        })
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn at(&self, t: f64) -> Result<ClosedFormL> {
        let g = self.eig.map(|l| (t * l).exp());
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let g = SpdMatrix::new_unchecked(g);
        let split = block_cholesky(&g)?;
        let g1 = split.g1();
        let lower = split.lower.to_matrix();
        let l = g1
            .clone()
            .lu()
            .solve(&(&self.v * &g1))
            .ok_or(Error::NonFinite)?;
        // G₂ V G₂⁻¹ = (M⁻¹ V M)ᵀ with G₂ = Mᵀ and V symmetric.
        let other = lower
            .clone()
            .lu()
            .solve(&(&self.v * &lower))
            .ok_or(Error::NonFinite)?
            .transpose();
        let split_agreement = (&l - &other).norm();
        let scale = self.v.norm().max(1.0) * g.norm().max(1.0);
        if split_agreement > SPLIT_TOL * scale {
            return Err(Error::InconsistentSplit {
                residual: split_agreement,
            });
        }
        let a0 = self.v.view((self.n, 0), (1, self.n)).transpose().column(0).into_owned();
        Ok(ClosedFormL {
            sparsity: sparsity_residual(&l, &a0),
            l,
            split_agreement,
        })
    }
}

pub fn closed_form_l(xi: &TangentN, t: f64) -> Result<ClosedFormL> {
    LaxOrbit::new(xi)?.at(t)
}

/// Deviation of `L` from the pattern of an assembled Lax matrix: zero
/// off-diagonal corner blocks and centre, border `a₀ᵀ` / `-a₀`, and the
/// couplings `L₃₃ = -L₁₁ᵀ`, `L₂₃ = -L₁₂ᵀ`.
pub fn sparsity_residual(l: &DMatrix<f64>, a0: &DVector<f64>) -> f64 {
    let n = a0.len();
    let mut worst = l[(n, n)].abs();
    for i in 0..n {
        worst = worst.max((l[(n, i)] - a0[i]).abs());
        worst = worst.max((l[(n + 1 + i, n)] + a0[i]).abs());
        worst = worst.max((l[(n, n + 1 + i)] + l[(i, n)]).abs());
        for j in 0..n {
            worst = worst.max(l[(i, n + 1 + j)].abs());
            worst = worst.max(l[(n + 1 + i, j)].abs());
            worst = worst.max((l[(n + 1 + i, n + 1 + j)] + l[(j, i)]).abs());
        }
    }
    worst
}

/// `|σ(L) - L|` with `σ(X) = -J Xᵀ J`.
pub fn sigma_residual(l: &DMatrix<f64>) -> Result<f64> {
    let n = crate::matcore::half_order(l.nrows())?;
    Ok((JMatrix::new(n).sigma_algebra(l) - l).norm())
}

/// `Tr(Lᵏ)` for `k = 1..=k_max`.
pub fn power_traces(l: &DMatrix<f64>, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max);
    let mut power = l.clone();
    for k in 1..=k_max {
        if k > 1 {
            power = &power * l;
        }
        out.push(power.trace());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxVerification {
    /// `max |L̇ - [L, M]|` over interior samples.
    pub commutator: f64,
    /// `max_k max_t |Tr(L(t)ᵏ) - Tr(L(t₀)ᵏ)|`, `k = 1..=2n+1`.
    pub spectral: f64,
}

/// Checks the Lax equation and isospectrality along sampled states.
///
/// `L̇` is the fourth-order central difference with step `h`, which must
/// be a multiple of the (uniform) sample spacing. The spectral reference is
/// the first sample, which is `V` for trajectories from [`integrate`].
pub fn verify_lax(samples: &[LaxSample], a0: &DVector<f64>, h: f64) -> Result<LaxVerification> {
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let uniform = uniform_prefix(&ts);
    let k = stencil_offset(&ts[..uniform], h, 2)?;
    let mats = samples
        .iter()
        .map(|s| LaxMatrices::build(&s.state, a0))
        .collect::<Result<Vec<_>>>()?;
    let order = mats[0].l.nrows();
    let reference = power_traces(&mats[0].l, order);
    let mut spectral = 0.0f64;
    for m in &mats {
        for (a, b) in power_traces(&m.l, order).iter().zip(&reference) {
            spectral = spectral.max((a - b).abs());
        }
    }
    let mut commutator = 0.0f64;
    for i in (2 * k)..(uniform - 2 * k) {
        let l = |j: usize| &mats[j].l;
        let dl = ((l(i + k) - l(i - k)) * 8.0 - (l(i + 2 * k) - l(i - 2 * k))) / (12.0 * h);
        commutator = commutator.max((dl - mats[i].commutator()).norm());
    }
    Ok(LaxVerification {
        commutator,
        spectral,
    })
}

/// Length of the leading run of equally spaced times (a trailing partial
/// step from [`integrate`] is excluded).
fn uniform_prefix(ts: &[f64]) -> usize {
    if ts.len() < 3 {
        return ts.len();
    }
    let spacing = ts[1] - ts[0];
    let mut end = ts.len();
    if ((ts[end - 1] - ts[end - 2]) - spacing).abs() > 1e-6 * spacing {
        end -= 1;
    }
    end
}
