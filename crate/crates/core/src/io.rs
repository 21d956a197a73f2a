//! JSON records for points and tangents, and CSV trajectory files.
//!
//! Matrices are row-major nested arrays. Symmetric inputs are accepted if
//! their asymmetry is within [`INPUT_SYM_TOL`] and are then averaged with
//! their transpose.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::GeodesicTrajectory;
use crate::laxflow::{LaxSample, LaxState};
use crate::manifold::{GaussianPoint, TangentN};
use crate::matcore::{max_asymmetry, SpdMatrix, SymMatrix, INPUT_SYM_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub n: usize,
    pub sigma: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentRecord {
    pub n: usize,
    #[serde(rename = "A0")]
    pub a0_cov: Vec<Vec<f64>>,
    #[serde(rename = "a0")]
    pub a0_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub p: PointRecord,
    pub q: PointRecord,
}

pub fn matrix_from_rows(n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    for row in rows {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m)
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn symmetric_input(n: usize, rows: &[Vec<f64>]) -> Result<SymMatrix> {
    let m = matrix_from_rows(n, rows)?;
    let asymmetry = max_asymmetry(&m);
    if asymmetry > INPUT_SYM_TOL * m.amax().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(SymMatrix::from_symmetrized(&m))
}

fn vector_input(n: usize, v: &[f64]) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(DVector::from_row_slice(v))
}

impl PointRecord {
    pub fn to_point(&self) -> Result<GaussianPoint> {
        let sigma = SpdMatrix::from_sym(symmetric_input(self.n, &self.sigma)?)?;
        GaussianPoint::new(sigma, vector_input(self.n, &self.mu)?)
    }

    pub fn from_point(p: &GaussianPoint) -> Self {
        Self {
            n: p.dim(),
            sigma: matrix_to_rows(p.sigma.as_matrix()),
            mu: p.mu.iter().copied().collect(),
        }
    }
}

impl TangentRecord {
    pub fn to_tangent(&self) -> Result<TangentN> {
        TangentN::new(
            symmetric_input(self.n, &self.a0_cov)?,
            vector_input(self.n, &self.a0_mean)?,
        )
    }

    pub fn from_tangent(xi: &TangentN) -> Self {
        Self {
            n: xi.dim(),
            a0_cov: matrix_to_rows(xi.cov.as_matrix()),
            a0_mean: xi.mean.iter().copied().collect(),
        }
    }
}

impl PairRecord {
    pub fn to_points(&self) -> Result<(GaussianPoint, GaussianPoint)> {
        let (p, q) = (self.p.to_point()?, self.q.to_point()?);
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: q.dim(),
            });
        }
        Ok((p, q))
    }
}

fn header(first: &str, mat: &str, vec: &str, n: usize) -> String {
    let mut cols = vec![first.to_string()];
    for i in 1..=n {
        for j in 1..=n {
            cols.push(format!("{mat}_{i}{j}"));
        }
    }
    cols.extend((1..=n).map(|i| format!("{vec}_{i}")));
    cols.join(",")
}

fn row(out: &mut String, t: f64, m: &DMatrix<f64>, v: &DVector<f64>) {
    write!(out, "{t:.16e}").unwrap();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            write!(out, ",{:.16e}", m[(i, j)]).unwrap();
        }
    }
    for x in v.iter() {
        write!(out, ",{x:.16e}").unwrap();
    }
    out.push('\n');
}

/// `t,sigma_11..sigma_nn,mu_1..mu_n`, 17 significant digits.
pub fn trajectory_csv(traj: &GeodesicTrajectory) -> String {
    let n = traj.basepoint.dim();
    let mut out = header("t", "sigma", "mu", n);
    out.push('\n');
    for (t, p) in traj.ts.iter().zip(&traj.points) {
        row(&mut out, *t, p.sigma.as_matrix(), &p.mu);
    }
    out
}

/// `t,Q_11..Q_nn,r_1..r_n`, 17 significant digits.
pub fn lax_csv(samples: &[LaxSample]) -> String {
    let n = samples.first().map_or(0, |s| s.state.dim());
    let mut out = header("t", "Q", "r", n);
    out.push('\n');
    for s in samples {
        row(&mut out, s.t, &s.state.q, &s.state.r);
    }
    out
}

type CsvRow = (f64, DMatrix<f64>, DVector<f64>);

fn parse_rows(text: &str) -> Result<(usize, Vec<CsvRow>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty CSV".into()))?;
    let cols = head.split(',').count();
    // cols = 1 + n² + n
    let n = (1..=64)
        .find(|n| 1 + n * n + n == cols)
        .ok_or_else(|| Error::InvalidParameter(format!("unexpected column count {cols}")))?;
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParameter(format!("row {}: {e}", lineno + 1)))?;
        if vals.len() != cols {
            return Err(Error::InvalidParameter(format!(
                "row {} has {} columns, expected {cols}",
                lineno + 1,
                vals.len()
            )));
        }
        let m = DMatrix::from_row_slice(n, n, &vals[1..1 + n * n]);
        let v = DVector::from_row_slice(&vals[1 + n * n..]);
        out.push((vals[0], m, v));
    }
    Ok((n, out))
}

/// Parses [`trajectory_csv`] output back into `(t, point)` pairs.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<(f64, GaussianPoint)>> {
    let (_, rows) = parse_rows(text)?;
    rows.into_iter()
        .map(|(t, m, v)| Ok((t, GaussianPoint::new(SpdMatrix::from_symmetrized(&m)?, v)?)))
        .collect()
}

/// Parses [`lax_csv`] output.
pub fn parse_lax_csv(text: &str) -> Result<Vec<LaxSample>> {
    let (_, rows) = parse_rows(text)?;
    rows.into_iter()
        .map(|(t, q, r)| Ok(LaxSample { t, state: LaxState::new(q, r)? }))
        .collect()
}
