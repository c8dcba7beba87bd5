//! Rank of a Lie algebra at a point, the relaxed single-point controllability
//! condition, the group-level LARC, and verdict synthesis.
//!
//! The rank of an algebra h at x is dim span{Ax : A in h} (Ax + mu for affine
//! generators). For a proper group action this rank is constant on orbits and
//! equals the orbit dimension, so one generic probe decides controllability.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    ambient_algebra_dim, row_space_basis, GeneratorSet, GroupAssertions, LieBasis, SystemKind,
    TolerancePolicy,
};
use crate::error::{Error, Result};
use crate::lie_closure;

/// Number of extra random probes used to flag a non-generic primary probe.
/// The rank is maximal on a dense open set, so the maximum over probes is the
/// witness the sufficiency direction needs.
pub const EXTRA_PROBES: usize = 3;

/// State space the system evolves on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSpace {
    /// Unit sphere S^{n-1} (skew systems).
    Sphere,
    /// R^n (affine and general systems).
    Euclidean,
}

impl SystemKind {
    pub fn state_space(self) -> StateSpace {
        match self {
            SystemKind::Skew => StateSpace::Sphere,
            _ => StateSpace::Euclidean,
        }
    }
}

/// A validated point on the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePoint {
    coords: DVector<f64>,
    space: StateSpace,
}

impl StatePoint {
    /// Point on S^{n-1}; the coordinates are re-normalized on ingest.
    pub fn sphere(coords: DVector<f64>) -> Result<Self> {
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(Error::Input("sphere point has non-finite coordinates".into()));
        }
        let norm = coords.norm();
        if norm <= 1e-300 {
            return Err(Error::Input(
                "cannot normalize a zero vector onto the sphere".into(),
            ));
        }
        Ok(Self {
            coords: coords / norm,
            space: StateSpace::Sphere,
        })
    }

    pub fn euclidean(coords: DVector<f64>) -> Result<Self> {
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(Error::Input(
                "euclidean point has non-finite coordinates".into(),
            ));
        }
        Ok(Self {
            coords,
            space: StateSpace::Euclidean,
        })
    }

    pub fn for_space(space: StateSpace, coords: DVector<f64>) -> Result<Self> {
        match space {
            StateSpace::Sphere => Self::sphere(coords),
            StateSpace::Euclidean => Self::euclidean(coords),
        }
    }

    /// Result of an exact exponential flow step. Sphere points keep their raw
    /// coordinates (so norm drift stays observable) but must sit on the sphere
    /// within 1e-9.
    pub(crate) fn from_flow(coords: DVector<f64>, space: StateSpace) -> Result<Self> {
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("flow produced non-finite state".into()));
        }
        if space == StateSpace::Sphere && (coords.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "flow left the sphere: |x| = {}",
                coords.norm()
            )));
        }
        Ok(Self { coords, space })
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Required rank for controllability: n-1 on the sphere, n on R^n. The n = 2
/// sphere case (S^1) follows the same rule with required rank 1.
pub fn required_rank(space: StateSpace, n: usize) -> usize {
    match space {
        StateSpace::Sphere => n - 1,
        StateSpace::Euclidean => n,
    }
}

/// Fundamental vector field of an ambient matrix at x: Bx, or Ax + mu decoded
/// from the homogeneous embedding for affine systems.
pub(crate) fn field_at(kind: SystemKind, m: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    match kind {
        SystemKind::Affine => {
            let hom = x.clone().push(1.0);
            let out = m * hom;
            out.rows(0, x.len()).into_owned()
        }
        _ => m * x,
    }
}

/// Rank of the algebra spanned by `basis` at the point `x`:
/// dim span{A_k x} over the basis elements, with the same tolerance policy the
/// closure was built with.
pub fn rank_at(basis: &LieBasis, x: &StatePoint) -> Result<usize> {
    if x.dim() != basis.state_dim() {
        return Err(Error::Input(format!(
            "point dimension {} does not match system dimension {}",
            x.dim(),
            basis.state_dim()
        )));
    }
    if basis.kind() == SystemKind::Skew && x.coords().norm() == 0.0 {
        return Err(Error::Input(
            "x = 0 is excluded from the state space of a skew system".into(),
        ));
    }
    if basis.dim() == 0 {
        return Ok(0);
    }
    let rows: Vec<DVector<f64>> = (0..basis.dim())
        .map(|i| field_at(basis.kind(), &basis.matrix(i), x.coords()))
        .collect();
    let policy = TolerancePolicy::with_relative(basis.relative_tolerance());
    let (rank, _) = row_space_basis(&rows, basis.state_dim(), &policy);
    Ok(rank)
}

/// Group-level LARC: the closure spans the full ambient algebra. This decides
/// controllability of the group-level system itself only when the group is
/// compact.
pub fn check_group_larc(basis: &LieBasis, gens: &GeneratorSet) -> bool {
    basis.dim() == ambient_algebra_dim(gens.kind(), gens.n())
}

/// Controllability verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Controllable,
    NotControllable,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Controllable => "controllable",
            Verdict::NotControllable => "not_controllable",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Everything `analyze` concluded, with enough context to reproduce it.
#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub verdict: Verdict,
    pub probe: StatePoint,
    /// Rank at the primary probe, followed by the extra probes.
    pub probe_ranks: Vec<usize>,
    pub rank_at_probe: usize,
    pub required_rank: usize,
    /// Orbit dimension through the primary probe (equals the rank there).
    pub orbit_dim: usize,
    pub closure_dim: usize,
    pub group_larc: bool,
    pub criteria_used: Vec<String>,
    pub assumptions: GroupAssertions,
    pub diagnostics: Vec<String>,
    pub seed: u64,
}

pub(crate) fn sample_point(space: StateSpace, n: usize, rng: &mut impl Rng) -> StatePoint {
    loop {
        let coords = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        match StatePoint::for_space(space, coords) {
            Ok(p) => return p,
            Err(_) => continue, // zero draw on the sphere; resample
        }
    }
}

/// Runs the full pipeline: Lie closure, rank at the probe (plus extra random
/// probes), then verdict synthesis.
///
/// Verdict logic:
/// - full rank at some probe implies controllable, valid for any proper action
///   (so(n) and se(n) are built in; otherwise the `proper_action` assertion is
///   required);
/// - deficient rank at every probe implies not controllable, valid when the
///   drift is absent, or the group is compact (automatic for so(n), asserted
///   otherwise), or the drift flow is asserted periodic;
/// - otherwise the analysis is inconclusive.
pub fn analyze(
    gens: &GeneratorSet,
    probe: Option<StatePoint>,
    seed: u64,
    policy: &TolerancePolicy,
) -> Result<AnalysisReport> {
    if gens.kind() == SystemKind::Affine && gens.assertions().compact {
        return Err(Error::Assertion(
            "an SE(n) system cannot be asserted compact".into(),
        ));
    }
    let n = gens.n();
    let space = gens.kind().state_space();
    if let Some(p) = &probe {
        if p.dim() != n {
            return Err(Error::Input(format!(
                "probe dimension {} does not match system dimension {n}",
                p.dim()
            )));
        }
        if p.space() != space {
            return Err(Error::Input(
                "probe lies on the wrong state space for this system kind".into(),
            ));
        }
    }

    let basis = lie_closure(gens, policy)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primary = match probe {
        Some(p) => p,
        None => sample_point(space, n, &mut rng),
    };
    let mut points = vec![primary.clone()];
    for _ in 0..EXTRA_PROBES {
        points.push(sample_point(space, n, &mut rng));
    }
    let mut probe_ranks = Vec::with_capacity(points.len());
    for p in &points {
        probe_ranks.push(rank_at(&basis, p)?);
    }
    let rank_primary = probe_ranks[0];
    let rank_max = *probe_ranks.iter().max().expect("nonempty");
    let required = required_rank(space, n);

    let builtin_proper = matches!(gens.kind(), SystemKind::Skew | SystemKind::Affine);
    let proper_ok = builtin_proper || gens.assertions().proper_action;
    let compact_ok = gens.kind() == SystemKind::Skew || gens.assertions().compact;
    let drift_ok = gens.drift().is_none() || compact_ok || gens.assertions().drift_periodic;
    // pi_1 carries no elements of infinite order for both built-in spaces
    // (spheres of every dimension, including S^1, and R^n)
    let necessity_ok = proper_ok && drift_ok;

    let mut diagnostics = Vec::new();
    let mut criteria_used = vec!["single_point_rank".to_string()];
    let group_larc = check_group_larc(&basis, gens);
    if compact_ok {
        criteria_used.push("group_larc".to_string());
        diagnostics.push(format!(
            "group-level LARC (compact group): closure dim {} of {} -> {}",
            basis.dim(),
            ambient_algebra_dim(gens.kind(), n),
            if group_larc { "full" } else { "deficient" }
        ));
    }
    if probe_ranks.iter().any(|r| *r != rank_primary) {
        diagnostics.push(format!(
            "rank is not constant across sampled points (ranks {probe_ranks:?}): \
             the probe sits on a lower-dimensional orbit"
        ));
    }
    for (i, (r, p)) in probe_ranks.iter().zip(&points).enumerate() {
        if *r == 0 {
            let coords: Vec<f64> = p.coords().iter().copied().collect();
            diagnostics.push(format!("fixed point detected at sampled point {i}: {coords:?}"));
        }
    }
    if !drift_ok {
        diagnostics.push(
            "drift present without a compactness or periodicity assertion: \
             sufficiency-only mode, deficient rank is inconclusive"
                .to_string(),
        );
    }
    if !proper_ok {
        diagnostics.push(
            "action not known to be proper: no verdict can be drawn from the rank".to_string(),
        );
    }

    let verdict = if rank_max == required && proper_ok {
        Verdict::Controllable
    } else if rank_max < required && necessity_ok {
        Verdict::NotControllable
    } else {
        Verdict::Inconclusive
    };

    Ok(AnalysisReport {
        verdict,
        probe: primary,
        rank_at_probe: rank_primary,
        required_rank: required,
        orbit_dim: rank_primary,
        closure_dim: basis.dim(),
        group_larc,
        probe_ranks,
        criteria_used,
        assumptions: gens.assertions(),
        diagnostics,
        seed,
    })
}
