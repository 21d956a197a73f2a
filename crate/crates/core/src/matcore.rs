//! Dense symmetric and SPD matrix kernel.
//!
//! Everything exponentiated in this crate is symmetric, so a single cyclic
//! Jacobi eigensolver backs `exp`, `log`, `sqrt` and inverse square roots.
//! Products of nominally symmetric matrices are re-symmetrized by averaging
//! with the transpose before they are wrapped again.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative reconstruction tolerance of the eigensolver.
pub const EIG_TOL: f64 = 1e-12;
/// Relative tolerance for `spd_sqrt(p)^2 == p`.
pub const SQRT_TOL: f64 = 1e-12;
/// Relative reconstruction tolerance of the block Cholesky factorization.
pub const CHOL_TOL: f64 = 1e-12;
/// Membership tolerance for `J G^{-1} J == G`.
pub const SYM_TOL: f64 = 1e-10;
/// Tolerance for `det G == 1`.
pub const DET_TOL: f64 = 1e-9;
/// Asymmetry accepted (relative to the largest entry) when wrapping user input.
pub const INPUT_SYM_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Returns `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - m^T`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("matrix order must be positive".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// A real symmetric matrix. Storage is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m` after checking it is square, finite and symmetric to within
    /// [`INPUT_SYM_TOL`] relative to its largest entry. The stored matrix is
    /// the symmetric part of `m`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let scale = m.amax().max(1.0);
        let asymmetry = max_asymmetry(&m);
        if asymmetry > INPUT_SYM_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Wraps the symmetric part of a square matrix without a tolerance check.
    pub fn from_symmetrized(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        Self(symmetrize(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self(&self.0 + &other.0)
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry (see [`SymMatrix::new`]) and positivity (Cholesky).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::from_sym(SymMatrix::new(m)?)
    }

    pub fn from_sym(s: SymMatrix) -> Result<Self> {
        let m = s.into_matrix();
        if Cholesky::new(m.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self(m))
    }

    /// Symmetrizes `m` and checks positivity.
    pub fn from_symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        Self::from_sym(SymMatrix::from_symmetrized(m))
    }

    /// Wraps an already-symmetric matrix known to be positive definite.
    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_sym(SymMatrix::from_diagonal(diag))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix(self.0.clone())
    }

    fn cholesky(&self) -> Cholesky<f64, nalgebra::Dyn> {
        // Positivity was established on construction.
        Cholesky::new(self.0.clone()).expect("SpdMatrix lost positive definiteness")
    }

    pub fn inverse(&self) -> SpdMatrix {
        Self(symmetrize(&self.cholesky().inverse()))
    }

    /// Solves `self * x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky().solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.cholesky().solve(b)
    }

    pub fn determinant(&self) -> f64 {
        let l = self.cholesky().unpack();
        l.diagonal().iter().map(|d| d * d).product()
    }

    /// `x^T self^{-1} x`.
    pub fn inverse_quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.solve_vec(x))
    }
}

impl Deref for SpdMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// An SPD matrix with unit determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialSpd(SpdMatrix);

impl SpecialSpd {
    pub fn new(base: SpdMatrix) -> Result<Self> {
        Self::with_tolerance(base, DET_TOL)
    }

    pub fn with_tolerance(base: SpdMatrix, tol: f64) -> Result<Self> {
        let det = base.determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "determinant {det} is not 1 within {tol:e}"
            )));
        }
        Ok(Self(base))
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.0
    }

    pub fn into_base(self) -> SpdMatrix {
        self.0
    }
}

/// Eigendecomposition `S = frame * diag(values) * frame^T`, values ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub frame: DMatrix<f64>,
}

impl SymEigen {
    /// `frame * diag(f(values)) * frame^T`, symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.frame.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let fj = f(lambda);
            scaled.column_mut(j).scale_mut(fj);
        }
        symmetrize(&(scaled * self.frame.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eigen(s: &SymMatrix) -> Result<SymEigen> {
    let n = s.order();
    let mut a = s.as_matrix().clone();
    let mut frame = DMatrix::<f64>::identity(n, n);
    let total = a.norm();
    let threshold = f64::EPSILON * total;

    let mut converged = total == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            converged = true;
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = frame[(k, p)];
                    let vkq = frame[(k, q)];
                    frame[(k, p)] = c * vkp - sn * vkq;
                    frame[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off_norm = off_diagonal_norm(&a);
        if off_norm > threshold {
            return Err(Error::EigenNoConvergence {
                sweeps,
                off_norm,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut sorted = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &frame.column(src));
    }
    Ok(SymEigen {
        values,
        frame: sorted,
    })
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(s: &SymMatrix) -> Result<SpdMatrix> {
    let eig = sym_eigen(s)?;
    let e = eig.map(f64::exp);
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(SpdMatrix::new_unchecked(e))
}

fn positive_eigen(p: &SpdMatrix) -> Result<SymEigen> {
    let eig = sym_eigen(&p.to_sym())?;
    if eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(eig)
}

/// Principal matrix logarithm of an SPD matrix.
pub fn spd_log(p: &SpdMatrix) -> Result<SymMatrix> {
    let eig = positive_eigen(p)?;
    Ok(SymMatrix(eig.map(f64::ln)))
}

/// Principal square root of an SPD matrix.
pub fn spd_sqrt(p: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = positive_eigen(p)?;
    Ok(SpdMatrix::new_unchecked(eig.map(f64::sqrt)))
}

/// `p^{-1/2}`.
pub fn spd_inv_sqrt(p: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = positive_eigen(p)?;
    Ok(SpdMatrix::new_unchecked(eig.map(|x| 1.0 / x.sqrt())))
}

/// The block-swap involution `J` of order `2n+1`:
/// `[[0, 0, I_n], [0, 1, 0], [I_n, 0, 0]]`. It satisfies `J^2 = I`.
pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let m = 2 * n + 1;
    let mut j = DMatrix::zeros(m, m);
    for i in 0..n {
        j[(i, n + 1 + i)] = 1.0;
        j[(n + 1 + i, i)] = 1.0;
    }
    j[(n, n)] = 1.0;
    j
}

/// Half-size `n` of an order `2n+1` matrix.
pub fn half_order(order: usize) -> Result<usize> {
    if order < 3 || order.is_multiple_of(2) {
        return Err(Error::NotOddOrder { order });
    }
    Ok((order - 1) / 2)
}

/// Frobenius norm of `G J G - J`, which vanishes exactly when
/// `J G^{-1} J = G`. Avoids the inverse, whose error grows with `cond(G)`.
pub fn check_special_symmetry(g: &SpdMatrix) -> Result<f64> {
    let n = half_order(g.order())?;
    let j = j_matrix(n);
    Ok((g.as_matrix() * &j * g.as_matrix() - j).norm())
}

/// Unit block lower triangular factor with block sizes `(n, 1, n)`:
/// `[[I, 0, 0], [m21^T, 1, 0], [m31, m32, I]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitLower {
    pub n: usize,
    /// The (2,1) row block, stored as a column vector.
    pub m21: DVector<f64>,
    pub m31: DMatrix<f64>,
    pub m32: DVector<f64>,
}

impl BlockUnitLower {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::identity(2 * n + 1, 2 * n + 1);
        for i in 0..n {
            m[(n, i)] = self.m21[i];
            m[(n + 1 + i, n)] = self.m32[i];
            for j in 0..n {
                m[(n + 1 + i, j)] = self.m31[(i, j)];
            }
        }
        m
    }
}

/// Block diagonal factor `diag(d11, d22, d33)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag3 {
    pub d11: SpdMatrix,
    pub d22: f64,
    pub d33: SpdMatrix,
}

impl BlockDiag3 {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.d11.order();
        let mut d = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        d.view_mut((0, 0), (n, n)).copy_from(self.d11.as_matrix());
        d[(n, n)] = self.d22;
        d.view_mut((n + 1, n + 1), (n, n))
            .copy_from(self.d33.as_matrix());
        d
    }
}

/// `G = M D M^T` with `M` unit block lower triangular and `D` block diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCholesky {
    pub lower: BlockUnitLower,
    pub diag: BlockDiag3,
}

/// Deviations of a block Cholesky factorization from the shape it takes on
/// the BDI submanifold: `d22 = 1`, `d33 = d11^{-1}`, `m32 = -m21` and
/// `m31 + m31^T + m21 m21^T = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureResiduals {
    pub d22: f64,
    /// Relative to `|d11^{-1}|`.
    pub d33: f64,
    pub m32: f64,
    pub m31: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        self.d22.max(self.d33).max(self.m32).max(self.m31)
    }
}

impl BlockCholesky {
    pub fn n(&self) -> usize {
        self.lower.n
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let m = self.lower.to_matrix();
        &m * self.diag.to_matrix() * m.transpose()
    }

    /// Block lower factor `G1 = M D` of `G = G1 G2`.
    pub fn g1(&self) -> DMatrix<f64> {
        self.lower.to_matrix() * self.diag.to_matrix()
    }

    /// Unit block upper factor `G2 = M^T` of `G = G1 G2`.
    pub fn g2(&self) -> DMatrix<f64> {
        self.lower.to_matrix().transpose()
    }

    pub fn structure_residuals(&self) -> StructureResiduals {
        let d11_inv = self.diag.d11.inverse();
        let m21 = &self.lower.m21;
        let m31 = &self.lower.m31;
        StructureResiduals {
            d22: (self.diag.d22 - 1.0).abs(),
            d33: (self.diag.d33.as_matrix() - d11_inv.as_matrix()).norm() / d11_inv.norm(),
            m32: (&self.lower.m32 + m21).norm(),
            m31: (m31 + m31.transpose() + m21 * m21.transpose()).norm(),
        }
    }
}

/// Three-block `LDL^T` factorization with block sizes `(n, 1, n)`.
/// No symmetry beyond `G = G^T` is assumed.
pub fn block_cholesky(g: &SpdMatrix) -> Result<BlockCholesky> {
    let n = half_order(g.order())?;
    let gm = g.as_matrix();
    let g11 = gm.view((0, 0), (n, n)).into_owned();
    let g21: DVector<f64> = gm.view((n, 0), (1, n)).transpose().into_owned().column(0).into_owned();
    let g22 = gm[(n, n)];
    let g31 = gm.view((n + 1, 0), (n, n)).into_owned();
    let g32: DVector<f64> = gm.view((n + 1, n), (n, 1)).column(0).into_owned();
    let g33 = gm.view((n + 1, n + 1), (n, n)).into_owned();

    let d11 = SpdMatrix::from_symmetrized(&g11).map_err(|_| Error::PivotNotPositive { block: 1 })?;
    let m21 = d11.solve_vec(&g21);
    // m31 = G31 d11^{-1}  <=>  m31^T = d11^{-1} G13
    let m31 = d11.solve(&g31.transpose()).transpose();
    let d22 = g22 - g21.dot(&m21);
    if d22.is_nan() || d22 <= 0.0 {
        return Err(Error::PivotNotPositive { block: 2 });
    }
    let m32 = (&g32 - &g31 * &m21) / d22;
    let schur = &g33 - &m31 * &g31.transpose() - (&m32 * m32.transpose()) * d22;
    let d33 = SpdMatrix::from_symmetrized(&schur).map_err(|_| Error::PivotNotPositive { block: 3 })?;

    Ok(BlockCholesky {
        lower: BlockUnitLower { n, m21, m31, m32 },
        diag: BlockDiag3 { d11, d22, d33 },
    })
}
