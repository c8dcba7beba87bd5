//! SE(n) support: affine generators (A, mu), their homogeneous-coordinate
//! embedding, affine field evaluation, and the rank pathway on R^n.
//!
//! Closure is taken over the embedded (n+1)x(n+1) matrices so the single
//! closure engine in `algebra` applies unchanged; the direct pair bracket
//! formula ([A,B], A nu - B mu) is kept as an independent oracle in the tests.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{is_skew, GeneratorSet, GroupAssertions, LieBasis, SystemKind};
use crate::error::{Error, Result};
use crate::rankcond::{self, StatePoint};

/// An element (A, mu) of se(n): skew rotation part plus translation part,
/// acting on R^n by x -> Ax + mu.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGenerator {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl AffineGenerator {
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if !rotation.is_square() || rotation.nrows() != translation.len() {
            return Err(Error::Input(format!(
                "affine generator: rotation is {}x{} but translation has length {}",
                rotation.nrows(),
                rotation.ncols(),
                translation.len()
            )));
        }
        if !rotation.iter().all(|x| x.is_finite()) || !translation.iter().all(|x| x.is_finite())
        {
            return Err(Error::Input("affine generator has non-finite entries".into()));
        }
        if !is_skew(&rotation) {
            return Err(Error::Input(
                "affine generator: rotation part is not skew-symmetric".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn n(&self) -> usize {
        self.translation.len()
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }
}

/// Homogeneous embedding [[A, mu], [0, 0]]: an (n+1)x(n+1) matrix with A in
/// the top-left block, mu in the last column, zero bottom row.
pub fn embed(g: &AffineGenerator) -> DMatrix<f64> {
    let n = g.n();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&g.rotation);
    m.view_mut((0, n), (n, 1)).copy_from(&g.translation);
    m
}

/// Splits an embedded algebra element back into its (A, mu) blocks.
pub fn decode(m: &DMatrix<f64>) -> Result<AffineGenerator> {
    let s = m.nrows();
    if !m.is_square() || s < 2 {
        return Err(Error::Input("decode expects a square matrix of size >= 2".into()));
    }
    let n = s - 1;
    if m.row(n).iter().any(|x| *x != 0.0) {
        return Err(Error::Input("decode: bottom row is not zero".into()));
    }
    AffineGenerator::new(
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, 1)).column(0).into_owned(),
    )
}

/// The affine vector field at x: Ax + mu.
pub fn affine_eval(g: &AffineGenerator, x: &StatePoint) -> Result<DVector<f64>> {
    if x.dim() != g.n() {
        return Err(Error::Input(format!(
            "affine_eval: point dimension {} does not match generator dimension {}",
            x.dim(),
            g.n()
        )));
    }
    Ok(&g.rotation * x.coords() + &g.translation)
}

/// Builds the se(n) generator set in embedded form. The origin is a valid
/// state: the SE(n) system on R^n excludes no points.
pub fn affine_generator_set(
    n: usize,
    drift: Option<AffineGenerator>,
    controls: Vec<AffineGenerator>,
    assertions: GroupAssertions,
) -> Result<GeneratorSet> {
    for (i, g) in drift.iter().chain(controls.iter()).enumerate() {
        if g.n() != n {
            return Err(Error::Input(format!(
                "affine generator {i} has dimension {}, expected {n}",
                g.n()
            )));
        }
    }
    GeneratorSet::from_embedded(
        n,
        drift.as_ref().map(embed),
        controls.iter().map(embed).collect(),
        assertions,
    )
}

/// Rank of an embedded se(n) closure at x in R^n: dim span{A_k x + mu_k} over
/// the decoded basis elements. Feeds the verdict with required rank n.
pub fn rank_at_affine(basis: &LieBasis, x: &StatePoint) -> Result<usize> {
    if basis.kind() != SystemKind::Affine {
        return Err(Error::Input(
            "rank_at_affine expects a basis over embedded se(n)".into(),
        ));
    }
    rankcond::rank_at(basis, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{bracket, lie_closure, TolerancePolicy};
    use crate::graphcrit::omega;
    use crate::testutil::{random_affine, unit};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn translation(n: usize, k: usize) -> AffineGenerator {
        AffineGenerator::new(DMatrix::zeros(n, n), unit(n, k)).unwrap()
    }

    #[test]
    fn embed_pure_translation() {
        let m = embed(&translation(2, 0));
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 2)] = 1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn bracket_of_rotation_and_translation_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_affine(3, &mut rng);
        let rot_only = AffineGenerator::new(a.rotation().clone(), DVector::zeros(3)).unwrap();
        let nu = unit(3, 1);
        let trans_only = AffineGenerator::new(DMatrix::zeros(3, 3), nu.clone()).unwrap();
        let br = bracket(&embed(&rot_only), &embed(&trans_only)).unwrap();
        let expected = embed(
            &AffineGenerator::new(DMatrix::zeros(3, 3), a.rotation() * nu).unwrap(),
        );
        assert!((br - expected).norm() <= 1e-14);
    }

    #[test]
    fn embedding_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = random_affine(3, &mut rng);
            let b = random_affine(3, &mut rng);
            let lhs = bracket(&embed(&a), &embed(&b)).unwrap();
            let pair = AffineGenerator::new(
                bracket(a.rotation(), b.rotation()).unwrap(),
                a.rotation() * b.translation() - b.rotation() * a.translation(),
            )
            .unwrap();
            let scale = lhs.norm().max(1.0);
            assert!((lhs - embed(&pair)).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn affine_eval_pure_translation_is_constant() {
        let g = translation(3, 2);
        let x = StatePoint::euclidean(DVector::from_vec(vec![5.0, -1.0, 0.5])).unwrap();
        assert_eq!(affine_eval(&g, &x).unwrap(), unit(3, 2));
    }

    #[test]
    fn affine_eval_rotation_at_basis_point() {
        let g = AffineGenerator::new(omega(2, 1, 2).unwrap(), DVector::zeros(2)).unwrap();
        let x = StatePoint::euclidean(unit(2, 0)).unwrap();
        assert_eq!(
            affine_eval(&g, &x).unwrap(),
            omega(2, 1, 2).unwrap() * unit(2, 0)
        );
    }

    #[test]
    fn affine_eval_dimension_mismatch() {
        let g = translation(3, 0);
        let x = StatePoint::euclidean(DVector::zeros(2)).unwrap();
        assert!(matches!(affine_eval(&g, &x), Err(Error::Input(_))));
    }

    #[test]
    fn rank_pure_translations_everywhere_two() {
        let gens = affine_generator_set(
            2,
            None,
            vec![translation(2, 0), translation(2, 1)],
            GroupAssertions::default(),
        )
        .unwrap();
        let basis = lie_closure(&gens, &TolerancePolicy::default()).unwrap();
        for coords in [DVector::zeros(2), DVector::from_vec(vec![3.0, -7.0])] {
            let x = StatePoint::euclidean(coords).unwrap();
            assert_eq!(rank_at_affine(&basis, &x).unwrap(), 2);
        }
    }

    #[test]
    fn unicycle_pair_closure_and_ranks() {
        let rot = AffineGenerator::new(omega(2, 1, 2).unwrap(), DVector::zeros(2)).unwrap();
        let gens = affine_generator_set(
            2,
            None,
            vec![rot, translation(2, 0)],
            GroupAssertions::default(),
        )
        .unwrap();
        let basis = lie_closure(&gens, &TolerancePolicy::default()).unwrap();
        assert_eq!(basis.dim(), 3);
        let origin = StatePoint::euclidean(DVector::zeros(2)).unwrap();
        assert_eq!(rank_at_affine(&basis, &origin).unwrap(), 2);
        let generic = StatePoint::euclidean(DVector::from_vec(vec![0.3, 1.1])).unwrap();
        assert_eq!(rank_at_affine(&basis, &generic).unwrap(), 2);
    }

    #[test]
    fn single_rotation_fixes_the_origin() {
        let rot = AffineGenerator::new(omega(2, 1, 2).unwrap(), DVector::zeros(2)).unwrap();
        let gens =
            affine_generator_set(2, None, vec![rot], GroupAssertions::default()).unwrap();
        let basis = lie_closure(&gens, &TolerancePolicy::default()).unwrap();
        let origin = StatePoint::euclidean(DVector::zeros(2)).unwrap();
        assert_eq!(rank_at_affine(&basis, &origin).unwrap(), 0);
        let generic = StatePoint::euclidean(unit(2, 0)).unwrap();
        assert_eq!(rank_at_affine(&basis, &generic).unwrap(), 1);
    }

    #[test]
    fn decode_rejects_nonzero_bottom_row() {
        let mut m = DMatrix::zeros(3, 3);
        m[(2, 0)] = 1.0;
        assert!(matches!(decode(&m), Err(Error::Input(_))));
    }

    #[test]
    fn translation_conjugation_shifts_rank_base_points() {
        // conjugating the group by a translation tau maps the generator
        // (A, mu) to (A, mu - A tau); ranks shift accordingly
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let gens_raw: Vec<AffineGenerator> =
                (0..2).map(|_| random_affine(3, &mut rng)).collect();
            let tau = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let shifted: Vec<AffineGenerator> = gens_raw
                .iter()
                .map(|g| {
                    AffineGenerator::new(
                        g.rotation().clone(),
                        g.translation() - g.rotation() * &tau,
                    )
                    .unwrap()
                })
                .collect();
            let policy = TolerancePolicy::default();
            let b1 = lie_closure(
                &affine_generator_set(3, None, gens_raw, GroupAssertions::default()).unwrap(),
                &policy,
            )
            .unwrap();
            let b2 = lie_closure(
                &affine_generator_set(3, None, shifted, GroupAssertions::default()).unwrap(),
                &policy,
            )
            .unwrap();
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let r1 = rank_at_affine(&b1, &StatePoint::euclidean(x.clone()).unwrap()).unwrap();
            let r2 = rank_at_affine(&b2, &StatePoint::euclidean(&x + &tau).unwrap()).unwrap();
            assert_eq!(r1, r2);
        }
    }
}
