//! Shared helpers for the unit-test modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::affine::AffineGenerator;
use crate::algebra::{GeneratorSet, GroupAssertions};
use crate::graphcrit::omega;

/// Standard basis vector e_k (0-indexed) in R^n.
pub fn unit(n: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[k] = 1.0;
    e
}

/// A random skew-symmetric n x n matrix with entries in [-1, 1).
pub fn random_skew(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    m
}

/// A random se(n) element: random skew rotation part plus a random
/// translation with entries in [-1, 1).
pub fn random_affine(n: usize, rng: &mut impl Rng) -> AffineGenerator {
    let rot = random_skew(n, rng);
    let tr = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    AffineGenerator::new(rot, tr).unwrap()
}

/// The driftless two-generator system on S^3: B1 = Omega_23, B2 = Omega_34.
/// Its graph {2-3, 3-4} leaves vertex 1 isolated, so e_1 is a fixed point and
/// the system is not controllable despite being rank 2 on the orbit of e_2.
pub fn chain4_generators() -> GeneratorSet {
    GeneratorSet::skew(
        4,
        None,
        vec![omega(4, 2, 3).unwrap(), omega(4, 3, 4).unwrap()],
        GroupAssertions::default(),
    )
    .unwrap()
}

/// The Bloch-equation system on S^2: drift omega0 * Omega_z with controls
/// Omega_y and Omega_z, where Omega_y has +1 at (1,3) and Omega_z has +1 at
/// (2,1) (1-indexed).
pub fn bloch_generators(omega0: f64) -> GeneratorSet {
    let mut omega_y = DMatrix::zeros(3, 3);
    omega_y[(0, 2)] = 1.0;
    omega_y[(2, 0)] = -1.0;
    let mut omega_z = DMatrix::zeros(3, 3);
    omega_z[(1, 0)] = 1.0;
    omega_z[(0, 1)] = -1.0;
    GeneratorSet::skew(
        3,
        Some(omega0 * &omega_z),
        vec![omega_y, omega_z],
        GroupAssertions::default(),
    )
    .unwrap()
}
