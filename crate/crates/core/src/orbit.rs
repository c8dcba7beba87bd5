//! Orbit sampling by composed exponential flows, rank-constancy verification,
//! and local orbit-dimension estimation from point clouds.
//!
//! Points of the orbit H(x0) are generated by random words of flows
//! exp(t_1 B_{k_1}) ... exp(t_l B_{k_l}) x0, which needs no chart of the orbit
//! and works for any generator set.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{GeneratorSet, LieBasis, SystemKind, TolerancePolicy};
use crate::error::{Error, Result};
use crate::rankcond::{rank_at, StatePoint};

/// Default word length for orbit sampling.
pub const DEFAULT_WORD_LEN: usize = 12;

/// Default flow-time horizon; covers compact directions fully.
pub const DEFAULT_HORIZON: f64 = std::f64::consts::TAU;

/// Relative singular-value threshold for the local PCA dimension count.
/// Curvature contaminates the normal directions at scale radius^2, so the
/// threshold has to separate radius-scale tangent spread from radius^2-scale
/// curvature; with this value that needs radius below ~2e-3.
pub const LOCAL_DIM_REL_TOL: f64 = 1e-3;

/// Default neighborhood radius for the local dimension estimate.
pub const DEFAULT_LOCAL_RADIUS: f64 = 1e-3;

/// Dense matrix exponential (scaling-and-squaring with Pade approximant).
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = m.exp();
    if e.iter().all(|x| x.is_finite()) {
        Ok(e)
    } else {
        Err(Error::Numerical("matrix exponential diverged".into()))
    }
}

/// The exact flow exp(tB)x of the fundamental field of `g` through `x`; for
/// affine systems the embedded exponential is applied in homogeneous
/// coordinates (x; 1).
pub fn flow(kind: SystemKind, g: &DMatrix<f64>, t: f64, x: &StatePoint) -> Result<StatePoint> {
    let e = expm(&(t * g))?;
    let coords = match kind {
        SystemKind::Affine => {
            let hom = x.coords().clone().push(1.0);
            let out = e * hom;
            out.rows(0, x.dim()).into_owned()
        }
        _ => e * x.coords(),
    };
    StatePoint::from_flow(coords, x.space())
}

/// Orbit points reached from `base` by recorded words of exponential flows.
#[derive(Clone, Debug)]
pub struct OrbitSample {
    pub base: StatePoint,
    pub points: Vec<StatePoint>,
    /// Per-point list of (generator index, time) pairs that produced it.
    pub words: Vec<Vec<(usize, f64)>>,
    pub seed: u64,
}

/// Samples `count` orbit points: each is the result of a random word of length
/// 1..=`word_len` with generator indices uniform and times uniform in
/// [-horizon, horizon]. Each word owns its own seed stream derived from the
/// master seed by word index, so the sample is reproducible and the words are
/// independent.
pub fn sample_orbit_with_word_len(
    gens: &GeneratorSet,
    base: &StatePoint,
    count: usize,
    horizon: f64,
    word_len: usize,
    seed: u64,
) -> Result<OrbitSample> {
    if count < 1 {
        return Err(Error::Input("orbit sample count must be at least 1".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Input("orbit horizon must be positive".into()));
    }
    if base.dim() != gens.n() {
        return Err(Error::Input(format!(
            "base point dimension {} does not match system dimension {}",
            base.dim(),
            gens.n()
        )));
    }
    let generators: Vec<&DMatrix<f64>> = gens.generators().collect();
    let mut points = Vec::with_capacity(count);
    let mut words = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let len = rng.gen_range(1..=word_len.max(1));
        let mut x = base.clone();
        let mut word = Vec::with_capacity(len);
        for _ in 0..len {
            let gi = rng.gen_range(0..generators.len());
            let t = rng.gen_range(-horizon..=horizon);
            x = flow(gens.kind(), generators[gi], t, &x)?;
            word.push((gi, t));
        }
        points.push(x);
        words.push(word);
    }
    Ok(OrbitSample {
        base: base.clone(),
        points,
        words,
        seed,
    })
}

pub fn sample_orbit(
    gens: &GeneratorSet,
    base: &StatePoint,
    count: usize,
    horizon: f64,
    seed: u64,
) -> Result<OrbitSample> {
    sample_orbit_with_word_len(gens, base, count, horizon, DEFAULT_WORD_LEN, seed)
}

/// Outcome of checking rank constancy over an orbit sample.
#[derive(Clone, Debug)]
pub struct RankConstancyReport {
    pub constant: bool,
    /// Histogram: rank value -> number of sampled points with that rank
    /// (the base point included).
    pub ranks: BTreeMap<usize, usize>,
}

/// Checks that the rank of the algebra is the same integer at the base point
/// and every sampled orbit point.
pub fn verify_rank_constancy(basis: &LieBasis, sample: &OrbitSample) -> Result<RankConstancyReport> {
    let mut ranks = BTreeMap::new();
    for p in std::iter::once(&sample.base).chain(sample.points.iter()) {
        let r = rank_at(basis, p)?;
        *ranks.entry(r).or_insert(0usize) += 1;
    }
    Ok(RankConstancyReport {
        constant: ranks.len() == 1,
        ranks,
    })
}

/// Principal-component count of the local point cloud around `center`:
/// points within `radius` are mean-centered and the singular values above
/// `LOCAL_DIM_REL_TOL * sigma_max` counted. Needs at least 10 local points.
pub fn estimate_local_dim(
    sample: &OrbitSample,
    center: &StatePoint,
    radius: f64,
) -> Result<usize> {
    let local: Vec<&StatePoint> = std::iter::once(&sample.base)
        .chain(sample.points.iter())
        .filter(|p| (p.coords() - center.coords()).norm() <= radius)
        .collect();
    if local.len() < 10 {
        return Err(Error::Sampling(format!(
            "only {} sample points within radius {radius} of the center; \
             resample with a larger count or smaller horizon",
            local.len()
        )));
    }
    let n = center.dim();
    let mut mean = DVector::zeros(n);
    for p in &local {
        mean += p.coords();
    }
    mean /= local.len() as f64;
    let rows: Vec<DVector<f64>> = local.iter().map(|p| p.coords() - &mean).collect();
    let stacked = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let svd = stacked.svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, s| a.max(*s));
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let tau = LOCAL_DIM_REL_TOL * sigma_max;
    Ok(svd.singular_values.iter().filter(|s| **s > tau).count())
}

/// Builds a generator set whose controls are the closure basis matrices.
/// The group generated is the same H, but every orbit tangent direction is
/// then reachable at first order, which is what local sampling needs.
pub fn closure_generator_set(basis: &LieBasis) -> Result<GeneratorSet> {
    let n = basis.state_dim();
    let assertions = crate::algebra::GroupAssertions::default();
    match basis.kind() {
        SystemKind::Skew => GeneratorSet::skew(n, None, basis.matrices(), assertions),
        SystemKind::General => GeneratorSet::general(n, None, basis.matrices(), assertions),
        SystemKind::Affine => {
            let controls: Result<Vec<_>> = basis
                .matrices()
                .iter()
                .map(crate::affine::decode)
                .collect();
            crate::affine::affine_generator_set(n, None, controls?, assertions)
        }
    }
}

/// One point per row, plain coordinate columns.
pub fn write_csv<W: Write>(sample: &OrbitSample, mut w: W) -> std::io::Result<()> {
    let n = sample.base.dim();
    let header: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in std::iter::once(&sample.base).chain(sample.points.iter()) {
        let row: Vec<String> = p.coords().iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Convenience: closure basis plus an orbit sample through `base`, reused by
/// the CLI and the validation suite.
pub fn orbit_report(
    gens: &GeneratorSet,
    base: &StatePoint,
    count: usize,
    horizon: f64,
    seed: u64,
    policy: &TolerancePolicy,
) -> Result<(LieBasis, OrbitSample, RankConstancyReport)> {
    let basis = crate::lie_closure(gens, policy)?;
    let sample = sample_orbit(gens, base, count, horizon, seed)?;
    let constancy = verify_rank_constancy(&basis, &sample)?;
    Ok((basis, sample, constancy))
}
