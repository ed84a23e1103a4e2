//! End-to-end experiments: MSD learning curves, the sum-rate sweep and the
//! two-stream convexity probe.
//!
//! Each run is a pure function of its [`ExperimentSpec`]: trials draw from
//! per-trial random streams and results are merged in trial order, so the
//! data part of an [`ExperimentResult`] is identical across reruns and
//! worker counts. Wall time is the only field that varies.

mod convexity;
mod learning;
mod sweep;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{grid_point_count, MAX_GRID_POINTS};
use crate::error::{Error, Result};
use crate::metrics::AllocatorKind;
use crate::precoding::PrecoderKind;
use crate::system::SystemConfig;

pub use convexity::{is_discretely_unimodal, probe_curve, run_convexity_probe, sign_changes, UNIMODAL_TOLERANCE};
pub use learning::run_learning_curve;
pub use sweep::{paired_difference, run_sum_rate_sweep, sum_rate_samples, PairedStats, SeriesSamples, SweepSamples};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LearningCurve,
    SumRateSweep,
    ConvexityProbe,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::LearningCurve => "learning_curve",
            ExperimentKind::SumRateSweep => "sum_rate_sweep",
            ExperimentKind::ConvexityProbe => "convexity_probe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub system: SystemConfig,
    pub precoders: Vec<PrecoderKind>,
    pub allocators: Vec<AllocatorKind>,
    pub trials: usize,
    pub snr_grid_db: Vec<f64>,
    /// Number of steps of the angle grid in the convexity probe.
    pub probe_steps: usize,
    pub output_path: Option<String>,
    pub format: OutputFormat,
}

impl ExperimentSpec {
    /// The defaults of each experiment: 4 transmit antennas and two users
    /// with two antennas each, `mu = 0.01`, 1000 learning-curve trials with
    /// the 0.005 search grid, and a 2000-channel sweep at `sigma_e2 = 0.1`
    /// over 0..20 dB with the 0.05 grid. The probe uses two single-antenna
    /// users.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = SystemConfig::default();
        match kind {
            ExperimentKind::LearningCurve => Self {
                kind,
                system: base,
                precoders: PrecoderKind::ALL.to_vec(),
                allocators: vec![AllocatorKind::Mapa],
                trials: 1000,
                snr_grid_db: Vec::new(),
                probe_steps: 200,
                output_path: None,
                format: OutputFormat::Csv,
            },
            ExperimentKind::SumRateSweep => Self {
                kind,
                system: SystemConfig {
                    sigma_e2: 0.1,
                    es_grid_step: 0.05,
                    ..base
                },
                precoders: vec![PrecoderKind::Zf, PrecoderKind::Mmse],
                allocators: AllocatorKind::ALL.to_vec(),
                trials: 2000,
                snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
                probe_steps: 200,
                output_path: None,
                format: OutputFormat::Csv,
            },
            ExperimentKind::ConvexityProbe => Self {
                kind,
                system: SystemConfig {
                    users: vec![1, 1],
                    ..base
                },
                precoders: PrecoderKind::ALL.to_vec(),
                allocators: Vec::new(),
                trials: 1,
                snr_grid_db: Vec::new(),
                probe_steps: 200,
                output_path: None,
                format: OutputFormat::Csv,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.trials == 0 {
            return Err(Error::Spec("trials must be >= 1".into()));
        }
        if self.precoders.is_empty() {
            return Err(Error::Spec("at least one precoder is required".into()));
        }
        if self.precoders.contains(&PrecoderKind::Zf) && self.system.n_rx() > self.system.n_tx {
            return Err(Error::Spec(format!(
                "ZF precoder requires n_tx >= total receive antennas (sum of users = {} > n_tx = {})",
                self.system.n_rx(),
                self.system.n_tx
            )));
        }
        match self.kind {
            ExperimentKind::SumRateSweep => {
                if self.snr_grid_db.is_empty() {
                    return Err(Error::Spec("sum_rate_sweep needs a non-empty snr_grid_db".into()));
                }
                if self.allocators.is_empty() {
                    return Err(Error::Spec("sum_rate_sweep needs at least one allocator".into()));
                }
                if self.allocators.contains(&AllocatorKind::Es) {
                    self.check_search_budget()?;
                }
            }
            ExperimentKind::LearningCurve | ExperimentKind::ConvexityProbe if !self.snr_grid_db.is_empty() => {
                return Err(Error::Spec(format!("snr_grid_db only applies to sum_rate_sweep, not {}", self.kind.as_str())));
            }
            ExperimentKind::LearningCurve => self.check_search_budget()?,
            ExperimentKind::ConvexityProbe => {
                if self.system.n_rx() != 2 {
                    return Err(Error::Spec(format!(
                        "convexity_probe needs exactly two streams, got {}",
                        self.system.n_rx()
                    )));
                }
                if self.probe_steps < 2 {
                    return Err(Error::Spec("probe_steps must be >= 2".into()));
                }
            }
        }
        Ok(())
    }

    fn check_search_budget(&self) -> Result<()> {
        let points = grid_point_count(self.system.n_rx(), self.system.es_grid_step);
        if points > MAX_GRID_POINTS {
            return Err(Error::Spec(format!(
                "exhaustive search over {} streams at step {} needs ~{points} points (limit {MAX_GRID_POINTS}); raise system.es_grid_step",
                self.system.n_rx(),
                self.system.es_grid_step
            )));
        }
        Ok(())
    }

    /// The spec as indented JSON, with every default spelled out.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// SHA-256 of the canonical JSON form of the spec, hex encoded.
    ///
    /// Where the result is written and in which format do not change the
    /// numbers, so those two fields are left out of the hash.
    pub fn fingerprint(&self) -> String {
        let mut identity = self.clone();
        identity.output_path = None;
        identity.format = OutputFormat::default();
        let canonical = serde_json::to_vec(&identity).expect("spec serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// NaN marks a point with no successful trial; JSON carries it as `null`.
    #[serde(with = "nan_as_null")]
    pub values: Vec<f64>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        values
            .iter()
            .map(|v| if v.is_nan() { None } else { Some(*v) })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push(Column { name: name.into(), values });
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.n_rows();
        self.columns.iter().all(|c| c.values.len() == n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub wall_time_s: f64,
    /// Failed trials per table column.
    pub failures: BTreeMap<String, usize>,
    /// Extra key/value facts, e.g. unimodality verdicts.
    pub notes: BTreeMap<String, String>,
    /// The spec after defaults and overrides were applied.
    pub effective_spec: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec_fingerprint: String,
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

impl ExperimentResult {
    pub fn table(&self) -> &Table {
        &self.tables[0]
    }
}

/// Runs the experiment named by `spec.kind`.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    match spec.kind {
        ExperimentKind::LearningCurve => run_learning_curve(spec),
        ExperimentKind::SumRateSweep => run_sum_rate_sweep(spec),
        ExperimentKind::ConvexityProbe => run_convexity_probe(spec),
    }
}

pub(crate) fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Spec(format!(
            "expected a {} spec, got {}",
            kind.as_str(),
            spec.kind.as_str()
        )));
    }
    spec.validate()
}

pub(crate) fn finish(
    spec: &ExperimentSpec,
    started: Instant,
    table: Table,
    failures: BTreeMap<String, usize>,
    notes: BTreeMap<String, String>,
) -> ExperimentResult {
    debug_assert!(table.is_consistent());
    ExperimentResult {
        spec_fingerprint: spec.fingerprint(),
        metadata: Metadata {
            kind: spec.kind,
            seed: spec.system.seed,
            trials: spec.trials,
            wall_time_s: started.elapsed().as_secs_f64(),
            failures,
            notes,
            effective_spec: spec.clone(),
        },
        tables: vec![table],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for kind in [ExperimentKind::LearningCurve, ExperimentKind::SumRateSweep, ExperimentKind::ConvexityProbe] {
            ExperimentSpec::defaults(kind).validate().unwrap();
        }
    }

    #[test]
    fn zf_dimension_precondition_is_named() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::SumRateSweep);
        spec.system.users = vec![3, 2];
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("ZF precoder requires n_tx"), "{msg}");
    }

    #[test]
    fn snr_grid_only_for_sweeps() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::LearningCurve);
        spec.snr_grid_db = vec![10.0];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::defaults(ExperimentKind::SumRateSweep);
        spec.snr_grid_db.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn oversized_search_is_refused() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::LearningCurve);
        spec.system.n_tx = 8;
        spec.system.users = vec![2, 2, 2, 2];
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("es_grid_step"), "{msg}");
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ExperimentSpec::defaults(ExperimentKind::LearningCurve);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.system.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
        let mut c = a.clone();
        c.output_path = Some("elsewhere.json".into());
        c.format = OutputFormat::Json;
        assert_eq!(a.fingerprint(), c.fingerprint());
    }
}
