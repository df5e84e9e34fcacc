#![allow(dead_code)]

pub mod checks;

use galins::liegroups::{GalElement, GalTangent, Rotation, TangentGroupElement, Vector10, Vector20};
use nalgebra::{SMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense matrix exponential by scaling and squaring of a long Taylor series.
pub fn expm<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let norm = m.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = m / 2f64.powi(squarings as i32);
    let mut term = SMatrix::<f64, N, N>::identity();
    let mut sum = term;
    for k in 1..30 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// Rotation uniformly random in angle up to `max_angle`.
pub fn rotation(rng: &mut impl Rng, max_angle: f64) -> Rotation {
    let axis = vec3(rng, 1.0).normalize();
    Rotation::exp(&(axis * rng.random_range(0.0..max_angle)))
}

pub fn tangent(rng: &mut impl Rng, scale: f64) -> GalTangent {
    GalTangent::from_vector(Vector10::from_fn(|_, _| rng.random_range(-scale..scale)))
}

pub fn gal(rng: &mut impl Rng) -> GalElement {
    GalElement::new(rotation(rng, 3.0), vec3(rng, 5.0), vec3(rng, 20.0), rng.random_range(-1.0..1.0))
}

pub fn tangent_group(rng: &mut impl Rng) -> TangentGroupElement {
    TangentGroupElement::new(gal(rng), tangent(rng, 1.0))
}

pub fn vec20(rng: &mut impl Rng, scale: f64) -> Vector20 {
    Vector20::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Relative Frobenius error of `approx` against `exact`.
pub fn rel_err<const R: usize, const C: usize>(approx: &SMatrix<f64, R, C>, exact: &SMatrix<f64, R, C>) -> f64 {
    (approx - exact).norm() / exact.norm().max(1e-12)
}

/// Central finite-difference Jacobian of `f` at zero.
pub fn fd_jacobian<const R: usize, const C: usize>(
    h: f64,
    f: impl Fn(&nalgebra::SVector<f64, C>) -> nalgebra::SVector<f64, R>,
) -> SMatrix<f64, R, C> {
    let mut j = SMatrix::<f64, R, C>::zeros();
    for c in 0..C {
        let mut e = nalgebra::SVector::<f64, C>::zeros();
        e[c] = h;
        let col = (f(&e) - f(&-e)) / (2.0 * h);
        j.set_column(c, &col);
    }
    j
}
