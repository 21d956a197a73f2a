//! The symmetric pair behind the geodesic lift.
//!
//! `SL(2n+1)` carries two commuting involutions, `τ(g) = g^{-T}` and
//! `σ(g) = J g^{-T} J`. Their fixed sets give `SO(2n+1)` and `SO(n+1, n)`;
//! the unit-determinant SPD matrices fixed by `G ↦ J G⁻¹ J` form the BDI
//! symmetric space `ℳ`. On the algebra side `g = Fix(σ)` splits as
//! `k ⊕ m` (skew and symmetric parts), and `m` splits further into the
//! horizontal space `h` (the `R` block vanishes) and its complement.
//! Taking the leading `(n+1)×(n+1)` block is a Riemannian submersion
//! `ℳ → N`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{EmbeddedPoint, TangentN};
use crate::matcore::{half_order, j_matrix, symmetrize, SpdMatrix, SpecialSpd, SymMatrix, DET_TOL, SYM_TOL};

/// Tolerance used when reading a dense matrix back into structured form.
pub const SHAPE_TOL: f64 = 1e-12;

/// The block-swap matrix `J` of order `2n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JMatrix {
    pub n: usize,
}

impl JMatrix {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        j_matrix(self.n)
    }

    /// Algebra involution `σ(X) = -J Xᵀ J`.
    pub fn sigma_algebra(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let j = self.matrix();
        -(&j * x.transpose() * &j)
    }

    /// Group involution `σ(g) = J g^{-T} J`.
    pub fn sigma_group(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let j = self.matrix();
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("group element is singular".into()))?;
        Ok(&j * inv.transpose() * &j)
    }
}

fn skew_residual(m: &DMatrix<f64>) -> f64 {
    (m + m.transpose()).norm()
}

/// An element of `g ≅ so(n+1, n)`:
///
/// ```text
/// [[-Q,  r,  R ],
///  [ tᵀ, 0, -rᵀ],
///  [ S, -t,  Qᵀ]]      R, S skew.
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgG {
    pub q: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub r: DVector<f64>,
    pub t: DVector<f64>,
}

impl LieAlgG {
    pub fn new(
        q: DMatrix<f64>,
        upper: DMatrix<f64>,
        lower: DMatrix<f64>,
        r: DVector<f64>,
        t: DVector<f64>,
    ) -> Result<Self> {
        let n = q.nrows();
        for (rows, cols) in [q.shape(), upper.shape(), lower.shape()] {
            if rows != n || cols != n {
                return Err(Error::DimensionMismatch { expected: n, found: rows.max(cols) });
            }
        }
        for v in [&r, &t] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        for s in [&upper, &lower] {
            let residual = skew_residual(s);
            if residual > SHAPE_TOL * s.norm().max(1.0) {
                return Err(Error::NotInSubspace { residual });
            }
        }
        let upper = (&upper - upper.transpose()) * 0.5;
        let lower = (&lower - lower.transpose()) * 0.5;
        Ok(Self { q, upper, lower, r, t })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q: DMatrix::zeros(n, n),
            upper: DMatrix::zeros(n, n),
            lower: DMatrix::zeros(n, n),
            r: DVector::zeros(n),
            t: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut x = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        x.view_mut((0, 0), (n, n)).copy_from(&(-&self.q));
        x.view_mut((0, n + 1), (n, n)).copy_from(&self.upper);
        x.view_mut((n + 1, 0), (n, n)).copy_from(&self.lower);
        x.view_mut((n + 1, n + 1), (n, n)).copy_from(&self.q.transpose());
        for i in 0..n {
            x[(i, n)] = self.r[i];
            x[(n, n + 1 + i)] = -self.r[i];
            x[(n, i)] = self.t[i];
            x[(n + 1 + i, n)] = -self.t[i];
        }
        x
    }

    /// Reads a dense matrix fixed by `σ` (to within [`SHAPE_TOL`], relative).
    pub fn from_matrix(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != x.ncols() {
            return Err(Error::NotSquare { rows: x.nrows(), cols: x.ncols() });
        }
        let n = half_order(x.nrows())?;
        let residual = (JMatrix::new(n).sigma_algebra(x) - x).norm();
        if residual > SHAPE_TOL * x.norm().max(1.0) {
            return Err(Error::NotInSubspace { residual });
        }
        let q = -x.view((0, 0), (n, n)).into_owned();
        let upper = x.view((0, n + 1), (n, n)).into_owned();
        let lower = x.view((n + 1, 0), (n, n)).into_owned();
        let r = x.view((0, n), (n, 1)).column(0).into_owned();
        let t = x.view((n, 0), (1, n)).transpose().column(0).into_owned();
        Self::new(q, upper, lower, r, t)
    }

    /// The element `Xᵀ`, which is again in `g`.
    pub fn transpose(&self) -> Self {
        Self {
            q: self.q.transpose(),
            upper: -&self.lower,
            lower: -&self.upper,
            r: self.t.clone(),
            t: self.r.clone(),
        }
    }

    fn combine(&self, other: &Self, a: f64, b: f64) -> Self {
        Self {
            q: &self.q * a + &other.q * b,
            upper: &self.upper * a + &other.upper * b,
            lower: &self.lower * a + &other.lower * b,
            r: &self.r * a + &other.r * b,
            t: &self.t * a + &other.t * b,
        }
    }

    /// Distance from the `m` shape: `Q` symmetric, `t = r`, `S = -R`.
    pub fn m_residual(&self) -> f64 {
        let q = (&self.q - self.q.transpose()).norm();
        let rt = (&self.r - &self.t).norm();
        let rs = (&self.upper + &self.lower).norm();
        q + rt + rs
    }

    fn scale(&self) -> f64 {
        self.q.norm() + self.upper.norm() + self.lower.norm() + self.r.norm() + self.t.norm()
    }
}

/// The horizontal generator `V` assembled from a tangent `(A₀, a₀)`:
///
/// ```text
/// V = [[-A₀, a₀,  0  ],
///      [ a₀ᵀ, 0, -a₀ᵀ],
///      [ 0,  -a₀, A₀ ]]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalGenerator {
    pub tangent: TangentN,
}

impl HorizontalGenerator {
    pub fn dim(&self) -> usize {
        self.tangent.dim()
    }

    pub fn to_lie(&self) -> LieAlgG {
        let n = self.dim();
        LieAlgG {
            q: self.tangent.cov.as_matrix().clone(),
            upper: DMatrix::zeros(n, n),
            lower: DMatrix::zeros(n, n),
            r: self.tangent.mean.clone(),
            t: self.tangent.mean.clone(),
        }
    }

    pub fn matrix(&self) -> SymMatrix {
        SymMatrix::from_symmetrized(&self.to_lie().assemble())
    }
}

pub fn build_v(xi: &TangentN) -> HorizontalGenerator {
    HorizontalGenerator { tangent: xi.clone() }
}

/// Splits `X ∈ g` into its `τ`-fixed part `(X - Xᵀ)/2 ∈ k` and the
/// complement `(X + Xᵀ)/2 ∈ m`.
pub fn decompose_km(x: &LieAlgG) -> (LieAlgG, LieAlgG) {
    let xt = x.transpose();
    (x.combine(&xt, 0.5, -0.5), x.combine(&xt, 0.5, 0.5))
}

fn require_m(xm: &LieAlgG) -> Result<()> {
    let residual = xm.m_residual();
    if residual > SHAPE_TOL * xm.scale().max(1.0) {
        return Err(Error::NotInSubspace { residual });
    }
    Ok(())
}

/// Splits `X ∈ m` into the horizontal part (keeps `Q`, `r`) and the
/// vertical part (keeps `R`).
pub fn horizontal_vertical_split(xm: &LieAlgG) -> Result<(HorizontalGenerator, LieAlgG)> {
    require_m(xm)?;
    let n = xm.dim();
    let cov = SymMatrix::from_symmetrized(&xm.q);
    let h = HorizontalGenerator {
        tangent: TangentN::new(cov, xm.r.clone())?,
    };
    let mut v = LieAlgG::zeros(n);
    v.upper = xm.upper.clone();
    v.lower = -&xm.upper;
    Ok((h, v))
}

/// Differential of the submersion at the identity:
/// `[[-Q, r, R], [rᵀ, 0, -rᵀ], [-R, -r, Q]] ↦ (Q, r)`.
pub fn dpi(xm: &LieAlgG) -> Result<TangentN> {
    require_m(xm)?;
    TangentN::new(SymMatrix::from_symmetrized(&xm.q), xm.r.clone())
}

/// A point of the BDI symmetric space `ℳ ⊂ SSym⁺(2n+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointM {
    g: SpecialSpd,
    n: usize,
}

impl PointM {
    /// Checks `J G⁻¹ J = G` (as `G J G = J`) and `det G = 1`, both relative
    /// to `max(1, |G|)²`.
    pub fn new(g: SpdMatrix) -> Result<Self> {
        let n = half_order(g.order())?;
        let scale = g.norm().max(1.0);
        let residual = crate::matcore::check_special_symmetry(&g)?;
        if residual > SYM_TOL * scale * scale {
            return Err(Error::NotInSubmanifold { residual });
        }
        let g = SpecialSpd::with_tolerance(g, DET_TOL * scale * scale)?;
        Ok(Self { g, n })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(SpdMatrix::identity(2 * n + 1)).expect("identity is in M")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SpdMatrix {
        self.g.base()
    }

    pub fn theta(&self) -> DMatrix<f64> {
        self.matrix().view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn delta(&self) -> DVector<f64> {
        self.matrix().view((0, self.n), (self.n, 1)).column(0).into_owned()
    }

    pub fn g13(&self) -> DMatrix<f64> {
        self.matrix().view((0, self.n + 1), (self.n, self.n)).into_owned()
    }

    pub fn g23(&self) -> DVector<f64> {
        self.matrix().view((self.n, self.n + 1), (1, self.n)).transpose().column(0).into_owned()
    }

    pub fn g33(&self) -> DMatrix<f64> {
        let n = self.n;
        self.matrix().view((n + 1, n + 1), (n, n)).into_owned()
    }
}

/// `π(G)`: the leading `(n+1)×(n+1)` block.
pub fn submersion_pi(m: &PointM) -> Result<EmbeddedPoint> {
    let k = m.dim() + 1;
    let block = m.matrix().view((0, 0), (k, k)).into_owned();
    EmbeddedPoint::new(SpdMatrix::new_unchecked(symmetrize(&block)))
}

/// Exponential of a general square matrix, for group elements generated by
/// non-symmetric algebra elements. Symmetric inputs go through
/// [`crate::matcore::sym_exp`].
pub fn algebra_exp(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.exp()
}
