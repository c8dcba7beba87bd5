//! Matrix Lie algebra kernel: brackets, vectorization, tolerance-controlled
//! subspace bases, and Lie closure by iterated bracketing.
//!
//! Everything downstream (rank decisions, orbit dimensions, verdicts) reduces
//! to span computations over vectorized matrices, so the rank threshold policy
//! lives here.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative skewness tolerance: a generator `G` passes the skew check when
/// `max|G + G^T| <= SKEW_REL_TOL * max|G|`. Inputs arrive as user-provided
/// text, so an exact-zero check would be too strict.
pub const SKEW_REL_TOL: f64 = 1e-12;

/// Floor on the relative admission tolerance used during Lie closure. The
/// default rank tolerance sits at the machine-noise scale, which is the right
/// regime for SVD rank decisions but leaves no margin over Gram-Schmidt
/// residual noise when deciding whether a bracket contributes a new direction;
/// genuine new directions in well-posed inputs are many orders of magnitude
/// larger than this floor.
pub const CLOSURE_ADMISSION_FLOOR: f64 = 1e-12;

/// Which matrix algebra the generators live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    /// so(n): skew-symmetric generators acting on the unit sphere.
    Skew,
    /// se(n): affine generators (A, mu) in homogeneous (n+1)x(n+1) embedding,
    /// acting on R^n.
    Affine,
    /// Arbitrary real n x n generators acting on R^n.
    General,
}

impl SystemKind {
    /// Side length of the ambient matrix representation for state dimension `n`.
    pub fn ambient_size(self, n: usize) -> usize {
        match self {
            SystemKind::Affine => n + 1,
            _ => n,
        }
    }
}

/// Dimension of the full ambient algebra: so(n) -> n(n-1)/2,
/// se(n) -> n(n-1)/2 + n, gl(n) -> n^2.
pub fn ambient_algebra_dim(kind: SystemKind, n: usize) -> usize {
    match kind {
        SystemKind::Skew => n * (n - 1) / 2,
        SystemKind::Affine => n * (n - 1) / 2 + n,
        SystemKind::General => n * n,
    }
}

/// Declared structural assumptions about the acting group. The analysis never
/// tries to prove these; it only uses them to decide which theorems apply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssertions {
    pub compact: bool,
    pub proper_action: bool,
    pub drift_periodic: bool,
}

/// Rank threshold policy shared by every span decision.
///
/// The threshold for a stacked k x d matrix of vectorized inputs is
/// `rel * sigma_max` with `rel` defaulting to `max(k, d) * machine epsilon`.
/// A user override replaces the relative factor, keeping decisions
/// scale-invariant.
#[derive(Clone, Copy, Debug, Default)]
pub struct TolerancePolicy {
    pub relative: Option<f64>,
}

impl TolerancePolicy {
    pub fn with_relative(rel: f64) -> Self {
        Self { relative: Some(rel) }
    }

    pub fn relative_for(&self, rows: usize, cols: usize) -> f64 {
        self.relative
            .unwrap_or_else(|| rows.max(cols) as f64 * f64::EPSILON)
    }

    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        self.relative_for(rows, cols) * sigma_max
    }
}

/// Row-major flattening of a matrix. Plain (unweighted) vectorization: the
/// Frobenius inner product is all the span decisions need.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = m.shape();
    DVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// Inverse of [`vectorize`] for square matrices of side `s`.
pub fn unvectorize(v: &DVector<f64>, s: usize) -> DMatrix<f64> {
    DMatrix::from_fn(s, s, |i, j| v[i * s + j])
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what}: non-finite entries")))
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Checks `max|G + G^T| <= SKEW_REL_TOL * max|G|`.
pub fn is_skew(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    max_abs(&(m + m.transpose())) <= SKEW_REL_TOL * max_abs(m)
}

/// The matrices B_0..B_m defining a bilinear system, stored in ambient form
/// (embedded (n+1)x(n+1) matrices for the affine kind).
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    n: usize,
    kind: SystemKind,
    drift: Option<DMatrix<f64>>,
    controls: Vec<DMatrix<f64>>,
    assertions: GroupAssertions,
}

impl GeneratorSet {
    /// so(n) system: every generator must be n x n, finite and skew.
    pub fn skew(
        n: usize,
        drift: Option<DMatrix<f64>>,
        controls: Vec<DMatrix<f64>>,
        assertions: GroupAssertions,
    ) -> Result<Self> {
        for (label, g) in Self::labelled(&drift, &controls) {
            Self::check_shape(g, n, &label)?;
            if !is_skew(g) {
                return Err(Error::Input(format!("{label}: matrix is not skew-symmetric")));
            }
        }
        Self::build(n, SystemKind::Skew, drift, controls, assertions)
    }

    /// General bilinear system on R^n with arbitrary n x n generators.
    pub fn general(
        n: usize,
        drift: Option<DMatrix<f64>>,
        controls: Vec<DMatrix<f64>>,
        assertions: GroupAssertions,
    ) -> Result<Self> {
        for (label, g) in Self::labelled(&drift, &controls) {
            Self::check_shape(g, n, &label)?;
        }
        Self::build(n, SystemKind::General, drift, controls, assertions)
    }

    /// se(n) system from pre-embedded (n+1)x(n+1) matrices; validation happens
    /// in the `affine` module before embedding.
    pub(crate) fn from_embedded(
        n: usize,
        drift: Option<DMatrix<f64>>,
        controls: Vec<DMatrix<f64>>,
        assertions: GroupAssertions,
    ) -> Result<Self> {
        Self::build(n, SystemKind::Affine, drift, controls, assertions)
    }

    fn labelled<'a>(
        drift: &'a Option<DMatrix<f64>>,
        controls: &'a [DMatrix<f64>],
    ) -> impl Iterator<Item = (String, &'a DMatrix<f64>)> {
        drift
            .iter()
            .map(|g| ("drift".to_string(), g))
            .chain(
                controls
                    .iter()
                    .enumerate()
                    .map(|(i, g)| (format!("controls[{i}]"), g)),
            )
    }

    fn check_shape(g: &DMatrix<f64>, n: usize, label: &str) -> Result<()> {
        if g.shape() != (n, n) {
            return Err(Error::Input(format!(
                "{label}: expected {n}x{n} matrix, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        check_finite(g, label)
    }

    fn build(
        n: usize,
        kind: SystemKind,
        drift: Option<DMatrix<f64>>,
        controls: Vec<DMatrix<f64>>,
        assertions: GroupAssertions,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("state dimension must be positive".into()));
        }
        if controls.is_empty() && drift.is_none() {
            return Err(Error::Input(
                "generator set needs at least one control or a drift term".into(),
            ));
        }
        Ok(Self {
            n,
            kind,
            drift,
            controls,
            assertions,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn ambient_size(&self) -> usize {
        self.kind.ambient_size(self.n)
    }

    pub fn drift(&self) -> Option<&DMatrix<f64>> {
        self.drift.as_ref()
    }

    pub fn controls(&self) -> &[DMatrix<f64>] {
        &self.controls
    }

    pub fn assertions(&self) -> GroupAssertions {
        self.assertions
    }

    /// Drift (if any) followed by the controls, in declaration order.
    pub fn generators(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.drift.iter().chain(self.controls.iter())
    }

    pub fn num_generators(&self) -> usize {
        self.controls.len() + usize::from(self.drift.is_some())
    }
}

/// `[a, b] = ab - ba`, exactly as floating-point matrix products.
pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Input(format!(
            "bracket needs equal square matrices, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a * b - b * a)
}

/// Rank-revealing basis of the row space spanned by `rows`, all of length
/// `dim`. Returns the count of singular values above the policy threshold and
/// the corresponding right singular vectors. Deterministic for a fixed input
/// order.
pub(crate) fn row_space_basis(
    rows: &[DVector<f64>],
    dim: usize,
    policy: &TolerancePolicy,
) -> (usize, Vec<DVector<f64>>) {
    if rows.is_empty() {
        return (0, Vec::new());
    }
    let stacked = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let svd = stacked.svd(false, true);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, s| a.max(*s));
    let tau = policy.threshold(sigma_max, rows.len(), dim);
    let rank = svd.singular_values.iter().filter(|s| **s > tau).count();
    let v_t = svd.v_t.expect("svd requested V^T");
    let basis = (0..rank)
        .map(|i| v_t.row(i).transpose())
        .collect();
    (rank, basis)
}

/// Dimension and orthonormal basis of the span of the given matrices, all of
/// the same shape, in vectorized matrix space.
pub fn subspace_rank(
    matrices: &[DMatrix<f64>],
    policy: &TolerancePolicy,
) -> Result<(usize, Vec<DMatrix<f64>>)> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Input("subspace_rank: empty matrix list".into()))?;
    let shape = first.shape();
    for (i, m) in matrices.iter().enumerate() {
        if m.shape() != shape {
            return Err(Error::Input(format!(
                "subspace_rank: matrix {i} has shape {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                shape.0,
                shape.1
            )));
        }
        check_finite(m, &format!("subspace_rank: matrix {i}"))?;
    }
    let rows: Vec<DVector<f64>> = matrices.iter().map(vectorize).collect();
    let (rank, basis) = row_space_basis(&rows, shape.0 * shape.1, policy);
    let basis = basis
        .iter()
        .map(|v| {
            DMatrix::from_fn(shape.0, shape.1, |i, j| v[i * shape.1 + j])
        })
        .collect();
    Ok((rank, basis))
}

/// Orthonormal basis (in vectorized matrix space) for the Lie closure
/// h = Lie{B_0, ..., B_m}.
#[derive(Clone, Debug)]
pub struct LieBasis {
    kind: SystemKind,
    state_dim: usize,
    mat_size: usize,
    basis: Vec<DVector<f64>>,
    relative_tolerance: f64,
    saturated: bool,
}

impl LieBasis {
    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    /// State dimension n of the underlying system (not the embedded size).
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Side length of the ambient matrices (n, or n+1 for the affine kind).
    pub fn mat_size(&self) -> usize {
        self.mat_size
    }

    /// Dimension of the vectorized matrix space.
    pub fn ambient_dim(&self) -> usize {
        self.mat_size * self.mat_size
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// Relative rank tolerance the closure was computed with; reused for all
    /// rank decisions made against this basis.
    pub fn relative_tolerance(&self) -> f64 {
        self.relative_tolerance
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        unvectorize(&self.basis[i], self.mat_size)
    }

    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        (0..self.dim()).map(|i| self.matrix(i)).collect()
    }

    /// Norm of the component of `m` orthogonal to the span of the basis.
    pub fn residual_norm(&self, m: &DMatrix<f64>) -> f64 {
        let mut v = vectorize(m);
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        v.norm()
    }
}

struct ClosureState {
    basis: Vec<DVector<f64>>,
    mats: Vec<DMatrix<f64>>,
    pairs: VecDeque<(usize, usize)>,
    rel_tol: f64,
    cap: usize,
}

impl ClosureState {
    /// Orthogonalizes `m` against the current basis and admits the residual
    /// direction when its norm exceeds `rel_tol * scale`. Admission is
    /// serialized and order-deterministic; newly admitted element k queues the
    /// bracket pairs (0,k)..(k-1,k) in insertion order.
    fn try_admit(&mut self, m: &DMatrix<f64>, scale: f64) -> Result<bool> {
        check_finite(m, "lie_closure intermediate")?;
        let mut v = vectorize(m);
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let r = v.norm();
        if r <= self.rel_tol * scale || r == 0.0 {
            return Ok(false);
        }
        if self.basis.len() == self.cap {
            return Err(Error::Saturation(format!(
                "admission would exceed the ambient algebra dimension {} \
                 (tolerance-induced livelock); partial basis has {} elements",
                self.cap,
                self.basis.len()
            )));
        }
        v /= r;
        let s = m.nrows();
        let k = self.basis.len();
        self.mats.push(unvectorize(&v, s));
        self.basis.push(v);
        for i in 0..k {
            self.pairs.push_back((i, k));
        }
        Ok(true)
    }
}

/// Computes the saturated Lie closure of a generator set by iterated
/// bracketing: seed with the orthonormalized generators, then bracket every
/// pair of basis elements in lexicographic order by insertion index, admitting
/// new directions until a full pass over all pairs admits nothing.
pub fn lie_closure(gens: &GeneratorSet, policy: &TolerancePolicy) -> Result<LieBasis> {
    let s = gens.ambient_size();
    let d = s * s;
    let rel_tol = policy.relative_for(d, d);
    let mut state = ClosureState {
        basis: Vec::new(),
        mats: Vec::new(),
        pairs: VecDeque::new(),
        rel_tol: rel_tol.max(CLOSURE_ADMISSION_FLOOR),
        cap: ambient_algebra_dim(gens.kind(), gens.n()),
    };
    for g in gens.generators() {
        let scale = g.norm();
        state.try_admit(g, scale)?;
    }
    while let Some((i, j)) = state.pairs.pop_front() {
        let br = bracket(&state.mats[i], &state.mats[j])?;
        // basis elements are unit Frobenius norm, so the input scale is 1
        state.try_admit(&br, 1.0)?;
    }
    Ok(LieBasis {
        kind: gens.kind(),
        state_dim: gens.n(),
        mat_size: s,
        basis: state.basis,
        relative_tolerance: rel_tol,
        saturated: true,
    })
}
