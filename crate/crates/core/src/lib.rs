//! Fisher–Rao geometry of multivariate normal distributions through a
//! symmetric-space lift.
//!
//! A normal distribution `N(μ, Σ)` on `ℝⁿ` is embedded as an SPD matrix of
//! order `n+1` and then lifted to the set `ℳ` of SPD matrices `G` of order
//! `2n+1` with `J G⁻¹ J = G`. Geodesics of `ℳ` through the identity are
//! matrix exponentials `exp(tV)`, and projecting them gives the geodesics of
//! the normal manifold. On top of this:
//!
//! - [`geodesic`]: exp and log maps, distances, residual checks,
//! - [`ahm`]: midpoints and dyadic interpolation by the arithmetic–harmonic
//!   mean iteration,
//! - [`laxflow`]: the Toda-type Lax pair whose solution is the adjoint orbit
//!   of `V` under the block Cholesky factor of `exp(tV)`.
//!
//! ```
//! use gaussgeo::{exp_map, GaussianPoint, SymMatrix, TangentN};
//! use nalgebra::DVector;
//!
//! let xi = TangentN::new(SymMatrix::from_diagonal(&[2.0]), DVector::zeros(1)).unwrap();
//! let p: GaussianPoint = exp_map(&xi, 1.0).unwrap();
//! assert!((p.sigma[(0, 0)] - 2f64.exp()).abs() < 1e-12);
//! ```

pub mod ahm;
pub mod error;
pub mod geodesic;
pub mod io;
pub mod laxflow;
pub mod manifold;
pub mod matcore;
pub mod sympair;

pub use ahm::{ahm_midpoint, interpolate, midpoint_n, AhmOptions, MidpointOptions};
pub use error::{Error, Result};
pub use geodesic::{distance, exp_map, exp_map_from, log_map, ShootingOptions};
pub use laxflow::{closed_form_l, integrate, verify_lax, LaxRhs};
pub use manifold::{embed, unembed, GaussianPoint, MetricConvention, TangentN};
pub use matcore::{SpdMatrix, SymMatrix};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/embedding.md")]
    mod embedding {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/submersion.md")]
    mod submersion {}
    #[doc = include_str!("../../../book/src/midpoints.md")]
    mod midpoints {}
    #[doc = include_str!("../../../book/src/lax.md")]
    mod lax {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
