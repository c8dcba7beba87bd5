//! Document schema and subcommand logic behind the command-line surface.
//!
//! One self-contained JSON document describes a system for every subcommand;
//! reports carry the tool version and an input digest so derived artifacts
//! stay traceable across tolerance changes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affine::{affine_generator_set, AffineGenerator};
use crate::algebra::{GeneratorSet, GroupAssertions, SystemKind, TolerancePolicy};
use crate::error::{Error, Result};
use crate::graphcrit::{self, EdgeSpec};
use crate::orbit;
use crate::rankcond::{analyze, rank_at, AnalysisReport, StatePoint, Verdict};
use crate::sim::{self, ControlSchedule};

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes are a stable contract.
pub mod exit_code {
    pub const CONTROLLABLE: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const NOT_CONTROLLABLE: i32 = 3;
    pub const INCONCLUSIVE: i32 = 4;
    pub const SAMPLING: i32 = 5;
}

/// One generator: a full matrix, an `Omega_ij` edge pair (so kind), or a
/// rotation + translation pair (se kind).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields, default)]
pub struct Assertions {
    pub compact: bool,
    pub proper_action: bool,
    pub drift_periodic: bool,
}

impl From<Assertions> for GroupAssertions {
    fn from(a: Assertions) -> Self {
        GroupAssertions {
            compact: a.compact,
            proper_action: a.proper_action,
            drift_periodic: a.drift_periodic,
        }
    }
}

impl From<GroupAssertions> for Assertions {
    fn from(a: GroupAssertions) -> Self {
        Assertions {
            compact: a.compact,
            proper_action: a.proper_action,
            drift_periodic: a.drift_periodic,
        }
    }
}

/// The system description every subcommand consumes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub schema_version: String,
    /// "so", "se" or "general".
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<GeneratorBlock>,
    #[serde(default)]
    pub controls: Vec<GeneratorBlock>,
    #[serde(default)]
    pub assertions: Assertions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Relative rank tolerance override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl SystemDocument {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let doc: SystemDocument = serde_json::from_slice(bytes)
            .map_err(|e| Error::Input(format!("document parse error: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                doc.schema_version
            )));
        }
        doc.system_kind()?;
        Ok(doc)
    }

    pub fn system_kind(&self) -> Result<SystemKind> {
        match self.kind.as_str() {
            "so" => Ok(SystemKind::Skew),
            "se" => Ok(SystemKind::Affine),
            "general" => Ok(SystemKind::General),
            other => Err(Error::Input(format!(
                "kind: expected \"so\", \"se\" or \"general\", got {other:?}"
            ))),
        }
    }

    fn parse_matrix(&self, rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
        let n = self.n;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input(format!(
                "{path}.matrix: expected {n} rows of {n} entries"
            )));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    fn block_to_matrix(&self, block: &GeneratorBlock, path: &str) -> Result<DMatrix<f64>> {
        let kind = self.system_kind()?;
        match (kind, block) {
            (
                SystemKind::Skew,
                GeneratorBlock {
                    matrix: Some(rows),
                    edge: None,
                    rotation: None,
                    translation: None,
                },
            )
            | (
                SystemKind::General,
                GeneratorBlock {
                    matrix: Some(rows),
                    edge: None,
                    rotation: None,
                    translation: None,
                },
            ) => self.parse_matrix(rows, path),
            (
                SystemKind::Skew,
                GeneratorBlock {
                    matrix: None,
                    edge: Some([i, j]),
                    rotation: None,
                    translation: None,
                },
            ) => graphcrit::omega(self.n, *i, *j)
                .map_err(|e| Error::Input(format!("{path}.edge: {e}"))),
            (SystemKind::Affine, _) => Err(Error::Input(format!(
                "{path}: se-kind generators use rotation + translation blocks"
            ))),
            _ => Err(Error::Input(format!(
                "{path}: expected exactly one of a matrix block{} for kind {:?}",
                if kind == SystemKind::Skew {
                    " or an edge pair"
                } else {
                    ""
                },
                self.kind
            ))),
        }
    }

    fn block_to_affine(&self, block: &GeneratorBlock, path: &str) -> Result<AffineGenerator> {
        match block {
            GeneratorBlock {
                matrix: None,
                edge: None,
                rotation: Some(rows),
                translation: Some(tr),
            } => {
                let rot = self.parse_matrix(rows, path)?;
                if tr.len() != self.n {
                    return Err(Error::Input(format!(
                        "{path}.translation: expected {} entries",
                        self.n
                    )));
                }
                AffineGenerator::new(rot, DVector::from_vec(tr.clone()))
                    .map_err(|e| Error::Input(format!("{path}: {e}")))
            }
            _ => Err(Error::Input(format!(
                "{path}: se-kind generators need both rotation and translation"
            ))),
        }
    }

    /// Validates and assembles the generator set; errors carry the offending
    /// field path.
    pub fn to_generator_set(&self) -> Result<GeneratorSet> {
        let kind = self.system_kind()?;
        let assertions: GroupAssertions = self.assertions.into();
        match kind {
            SystemKind::Affine => {
                let drift = self
                    .drift
                    .as_ref()
                    .map(|b| self.block_to_affine(b, "drift"))
                    .transpose()?;
                let controls = self
                    .controls
                    .iter()
                    .enumerate()
                    .map(|(i, b)| self.block_to_affine(b, &format!("controls[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                affine_generator_set(self.n, drift, controls, assertions)
            }
            _ => {
                let drift = self
                    .drift
                    .as_ref()
                    .map(|b| self.block_to_matrix(b, "drift"))
                    .transpose()?;
                let controls = self
                    .controls
                    .iter()
                    .enumerate()
                    .map(|(i, b)| self.block_to_matrix(b, &format!("controls[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                match kind {
                    SystemKind::Skew => GeneratorSet::skew(self.n, drift, controls, assertions),
                    _ => GeneratorSet::general(self.n, drift, controls, assertions),
                }
            }
        }
    }

    /// The associated graph, available only when every generator (drift
    /// included) is an edge block.
    pub fn to_edge_spec(&self) -> Result<EdgeSpec> {
        if self.system_kind()? != SystemKind::Skew {
            return Err(Error::Input(
                "the graph criterion applies to so-kind systems only".into(),
            ));
        }
        let mut edges = Vec::new();
        for (path, block) in self
            .drift
            .iter()
            .map(|b| ("drift".to_string(), b))
            .chain(
                self.controls
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (format!("controls[{i}]"), b)),
            )
        {
            match block.edge {
                Some([i, j]) => edges.push((i, j)),
                None => {
                    return Err(Error::Input(format!(
                        "{path}: the graph criterion needs every generator as an edge block"
                    )))
                }
            }
        }
        EdgeSpec::new(self.n, edges)
    }

    fn all_edge_blocks(&self) -> bool {
        self.drift
            .iter()
            .chain(self.controls.iter())
            .all(|b| b.edge.is_some())
            && !self.controls.is_empty()
    }

    pub fn probe_point(&self) -> Result<Option<StatePoint>> {
        let kind = self.system_kind()?;
        match &self.probe {
            None => Ok(None),
            Some(coords) => {
                if coords.len() != self.n {
                    return Err(Error::Input(format!(
                        "probe: expected {} coordinates, got {}",
                        self.n,
                        coords.len()
                    )));
                }
                StatePoint::for_space(
                    kind.state_space(),
                    DVector::from_vec(coords.clone()),
                )
                .map(Some)
            }
        }
    }

    pub fn tolerance_policy(&self) -> TolerancePolicy {
        TolerancePolicy {
            relative: self.tolerance,
        }
    }
}

/// Hex SHA-256 of the raw input document.
pub fn input_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Machine-readable report emitted by every subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool_version: String,
    pub schema_version: String,
    pub input_digest: String,
    pub verdict: String,
    pub rank_at_probe: usize,
    pub probe: Vec<f64>,
    pub probe_ranks: Vec<usize>,
    pub required_rank: usize,
    pub orbit_dim: usize,
    pub closure_dim: usize,
    pub group_larc: bool,
    pub criteria_used: Vec<String>,
    pub assumptions: Assertions,
    pub diagnostics: Vec<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connected: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_constant_on_orbit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_dim_estimate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm_drift: Option<f64>,
    /// Wall-clock milliseconds; excluded from the determinism contract.
    pub timing_ms: u64,
}

impl ReportDocument {
    fn from_analysis(report: &AnalysisReport, digest: &str) -> Self {
        ReportDocument {
            tool_version: TOOL_VERSION.to_string(),
            schema_version: SCHEMA_VERSION.to_string(),
            input_digest: digest.to_string(),
            verdict: report.verdict.to_string(),
            rank_at_probe: report.rank_at_probe,
            probe: report.probe.coords().iter().copied().collect(),
            probe_ranks: report.probe_ranks.clone(),
            required_rank: report.required_rank,
            orbit_dim: report.orbit_dim,
            closure_dim: report.closure_dim,
            group_larc: report.group_larc,
            criteria_used: report.criteria_used.clone(),
            assumptions: report.assumptions.into(),
            diagnostics: report.diagnostics.clone(),
            seed: report.seed,
            connected: None,
            components: None,
            rank_constant_on_orbit: None,
            local_dim_estimate: None,
            max_norm_drift: None,
            timing_ms: 0,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict.as_str() {
            "controllable" => exit_code::CONTROLLABLE,
            "not_controllable" => exit_code::NOT_CONTROLLABLE,
            _ => exit_code::INCONCLUSIVE,
        }
    }
}

pub fn exit_code_for_error(e: &Error) -> i32 {
    match e {
        Error::Sampling(_) => exit_code::SAMPLING,
        _ => exit_code::INPUT,
    }
}

/// Closure -> rank -> verdict. When every generator is an edge block the
/// isolated-vertex fixed points are added to the diagnostics.
pub fn cmd_analyze(doc: &SystemDocument, digest: &str) -> Result<ReportDocument> {
    let gens = doc.to_generator_set()?;
    let probe = doc.probe_point()?;
    let report = analyze(&gens, probe, doc.seed, &doc.tolerance_policy())?;
    let mut out = ReportDocument::from_analysis(&report, digest);
    if doc.all_edge_blocks() {
        if let Ok(spec) = doc.to_edge_spec() {
            for fp in graphcrit::fixed_points(&spec) {
                let coords: Vec<f64> = fp.coords().iter().copied().collect();
                out.diagnostics
                    .push(format!("isolated vertex fixes the point {coords:?}"));
            }
        }
    }
    Ok(out)
}

/// Connectivity verdict plus components and fixed points; with `cross_check`
/// the rank engine must agree or the command fails.
pub fn cmd_graph(doc: &SystemDocument, digest: &str, cross_check: bool) -> Result<ReportDocument> {
    let spec = doc.to_edge_spec()?;
    let connected = graphcrit::is_connected(&spec);
    let components = graphcrit::components(&spec);
    let fixed = graphcrit::fixed_points(&spec);

    let verdict = if connected {
        Verdict::Controllable
    } else {
        Verdict::NotControllable
    };
    let mut diagnostics = vec![format!(
        "graph on {} vertices with {} edges has {} component(s)",
        spec.n(),
        spec.edges().len(),
        components.len()
    )];
    for fp in &fixed {
        let coords: Vec<f64> = fp.coords().iter().copied().collect();
        diagnostics.push(format!("isolated vertex fixes the point {coords:?}"));
    }
    let mut criteria_used = vec!["graph_connectivity".to_string()];

    let mut out = ReportDocument {
        tool_version: TOOL_VERSION.to_string(),
        schema_version: SCHEMA_VERSION.to_string(),
        input_digest: digest.to_string(),
        verdict: verdict.to_string(),
        rank_at_probe: 0,
        probe: Vec::new(),
        probe_ranks: Vec::new(),
        required_rank: crate::rankcond::required_rank(
            crate::rankcond::StateSpace::Sphere,
            spec.n(),
        ),
        orbit_dim: 0,
        closure_dim: 0,
        group_larc: false,
        criteria_used: Vec::new(),
        assumptions: doc.assertions,
        diagnostics,
        seed: doc.seed,
        connected: Some(connected),
        components: Some(components),
        rank_constant_on_orbit: None,
        local_dim_estimate: None,
        max_norm_drift: None,
        timing_ms: 0,
    };

    if cross_check {
        let rank_report = cmd_analyze(doc, digest)?;
        if rank_report.verdict != out.verdict {
            return Err(Error::Assertion(format!(
                "graph criterion says {} but the rank condition says {}",
                out.verdict, rank_report.verdict
            )));
        }
        criteria_used.push("single_point_rank".to_string());
        out.rank_at_probe = rank_report.rank_at_probe;
        out.probe = rank_report.probe;
        out.probe_ranks = rank_report.probe_ranks;
        out.orbit_dim = rank_report.orbit_dim;
        out.closure_dim = rank_report.closure_dim;
        out.group_larc = rank_report.group_larc;
        out.diagnostics
            .push("rank-condition cross-check agrees".to_string());
    }
    out.criteria_used = criteria_used;
    Ok(out)
}

/// Samples the orbit through the probe point, verifies rank constancy, and
/// estimates the local orbit dimension from a second, tightly localized
/// sample. Returns the report and the orbit CSV body.
pub fn cmd_orbit(
    doc: &SystemDocument,
    digest: &str,
    count: usize,
    horizon: f64,
) -> Result<(ReportDocument, String)> {
    let gens = doc.to_generator_set()?;
    let base = doc.probe_point()?.ok_or_else(|| {
        Error::Input("the orbit command needs a probe point (the orbit base x0)".into())
    })?;
    let policy = doc.tolerance_policy();
    let (basis, sample, constancy) =
        orbit::orbit_report(&gens, &base, count, horizon, doc.seed, &policy)?;
    let orbit_dim = rank_at(&basis, &base)?;

    // closure-basis flows reach every tangent direction at first order, which
    // the PCA estimate needs
    let local_gens = orbit::closure_generator_set(&basis)?;
    let local_dim = if basis.dim() == 0 {
        0
    } else {
        let local_sample = orbit::sample_orbit(
            &local_gens,
            &base,
            400.max(count),
            orbit::DEFAULT_LOCAL_RADIUS / orbit::DEFAULT_WORD_LEN as f64,
            doc.seed,
        )?;
        orbit::estimate_local_dim(&local_sample, &base, orbit::DEFAULT_LOCAL_RADIUS)?
    };

    let mut csv = Vec::new();
    orbit::write_csv(&sample, &mut csv)
        .map_err(|e| Error::Numerical(format!("csv serialization failed: {e}")))?;

    let rank_histogram: Vec<String> = constancy
        .ranks
        .iter()
        .map(|(r, c)| format!("rank {r}: {c} point(s)"))
        .collect();
    let report = ReportDocument {
        tool_version: TOOL_VERSION.to_string(),
        schema_version: SCHEMA_VERSION.to_string(),
        input_digest: digest.to_string(),
        verdict: if constancy.constant {
            "orbit rank constant".to_string()
        } else {
            "orbit rank NOT constant".to_string()
        },
        rank_at_probe: orbit_dim,
        probe: base.coords().iter().copied().collect(),
        probe_ranks: vec![orbit_dim],
        required_rank: crate::rankcond::required_rank(gens.kind().state_space(), gens.n()),
        orbit_dim,
        closure_dim: basis.dim(),
        group_larc: crate::rankcond::check_group_larc(&basis, &gens),
        criteria_used: vec!["single_point_rank".to_string()],
        assumptions: doc.assertions,
        diagnostics: rank_histogram,
        seed: doc.seed,
        connected: None,
        components: None,
        rank_constant_on_orbit: Some(constancy.constant),
        local_dim_estimate: Some(local_dim),
        max_norm_drift: None,
        timing_ms: 0,
    };
    Ok((report, String::from_utf8(csv).expect("csv is utf-8")))
}

/// Schedule file consumed by the simulate subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDocument {
    pub mesh: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ScheduleDocument {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes)
            .map_err(|e| Error::Input(format!("schedule parse error: {e}")))
    }

    pub fn to_schedule(&self) -> Result<ControlSchedule> {
        ControlSchedule::new(
            self.mesh.clone(),
            self.values
                .iter()
                .map(|u| DVector::from_vec(u.clone()))
                .collect(),
        )
    }
}

/// Runs the exact-exponential trajectory and reports the conservation summary
/// (max norm drift, rank histogram along the trajectory). Returns the report
/// and the trajectory CSV body.
pub fn cmd_simulate(
    doc: &SystemDocument,
    digest: &str,
    schedule: &ScheduleDocument,
    oversample: usize,
) -> Result<(ReportDocument, String)> {
    let gens = doc.to_generator_set()?;
    let x0 = doc.probe_point()?.ok_or_else(|| {
        Error::Input("the simulate command needs a probe point (the initial state x0)".into())
    })?;
    let schedule = schedule.to_schedule()?;
    let traj = sim::run_sampled(&gens, &x0, &schedule, oversample)?;

    let basis = crate::lie_closure(&gens, &doc.tolerance_policy())?;
    let mut histogram: std::collections::BTreeMap<usize, usize> = Default::default();
    for s in &traj.states {
        *histogram.entry(rank_at(&basis, s)?).or_insert(0) += 1;
    }
    let confined = histogram.len() == 1;

    let mut csv = Vec::new();
    sim::write_csv(&traj, &mut csv)
        .map_err(|e| Error::Numerical(format!("csv serialization failed: {e}")))?;

    let mut diagnostics: Vec<String> = histogram
        .iter()
        .map(|(r, c)| format!("rank {r}: {c} state(s)"))
        .collect();
    diagnostics.push(format!("max norm drift {:.3e}", traj.max_norm_drift()));
    let rank0 = rank_at(&basis, &traj.states[0])?;
    let report = ReportDocument {
        tool_version: TOOL_VERSION.to_string(),
        schema_version: SCHEMA_VERSION.to_string(),
        input_digest: digest.to_string(),
        verdict: if confined {
            "trajectory confined to the orbit".to_string()
        } else {
            "trajectory rank NOT constant".to_string()
        },
        rank_at_probe: rank0,
        probe: x0.coords().iter().copied().collect(),
        probe_ranks: vec![rank0],
        required_rank: crate::rankcond::required_rank(gens.kind().state_space(), gens.n()),
        orbit_dim: rank0,
        closure_dim: basis.dim(),
        group_larc: crate::rankcond::check_group_larc(&basis, &gens),
        criteria_used: vec!["single_point_rank".to_string()],
        assumptions: doc.assertions,
        diagnostics,
        seed: doc.seed,
        connected: None,
        components: None,
        rank_constant_on_orbit: Some(confined),
        local_dim_estimate: None,
        max_norm_drift: Some(traj.max_norm_drift()),
        timing_ms: 0,
    };
    Ok((report, String::from_utf8(csv).expect("csv is utf-8")))
}
