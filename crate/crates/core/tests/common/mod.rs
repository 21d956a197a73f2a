#![allow(dead_code)]

use gaussgeo::manifold::{GaussianPoint, TangentN};
use gaussgeo::matcore::{sym_exp, SpdMatrix, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let m = DMatrix::from_fn(n, n, |_, _| normal(rng) * scale);
    SymMatrix::from_symmetrized(&m)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng) * scale)
}

/// Tangent with a uniform random direction and `|ξ|` uniform in `(0, max_norm]`.
pub fn random_tangent(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> TangentN {
    let xi = TangentN::new(random_sym(rng, n, 1.0), random_vec(rng, n, 1.0)).unwrap();
    let radius = max_norm * rng.gen_range(0.05..=1.0);
    xi.scale(radius / xi.norm())
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> SpdMatrix {
    sym_exp(&random_sym(rng, n, spread)).unwrap()
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize) -> GaussianPoint {
    GaussianPoint::new(random_spd(rng, n, 0.4), random_vec(rng, n, 0.7)).unwrap()
}

pub fn point_gap(a: &GaussianPoint, b: &GaussianPoint) -> f64 {
    (a.sigma.as_matrix() - b.sigma.as_matrix()).norm() + (&a.mu - &b.mu).norm()
}

/// Univariate Fisher–Rao distance in closed form (hyperbolic half plane
/// with coordinates `(μ/√2, σ)`).
pub fn univariate_fisher_distance(s1: f64, m1: f64, s2: f64, m2: f64) -> f64 {
    let (a, b) = (s1.sqrt(), s2.sqrt());
    let arg = 1.0 + ((m1 - m2).powi(2) / 2.0 + (a - b).powi(2)) / (2.0 * a * b);
    2f64.sqrt() * arg.acosh()
}
