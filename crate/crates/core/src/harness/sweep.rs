use std::collections::BTreeMap;
use std::time::Instant;

use super::{expect_kind, finish, ExperimentKind, ExperimentResult, ExperimentSpec, Table};
use crate::allocation::AllocationVector;
use crate::error::{Error, Result};
use crate::metrics::{allocate, e_tr_from_snr_db, AllocatorKind, SumRateEvaluator};
use crate::parallel::map_trials;
use crate::precoding::{build_precoder, PrecoderKind};

/// Per-trial sum rates of one allocator/precoder pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSamples {
    pub allocator: AllocatorKind,
    pub precoder: PrecoderKind,
    /// `rates[snr][trial]`, `None` where the trial failed.
    pub rates: Vec<Vec<Option<f64>>>,
}

impl SeriesSamples {
    pub fn column_name(&self) -> String {
        format!("{}_{}", self.allocator, self.precoder)
    }

    pub fn mean(&self, snr_index: usize) -> f64 {
        let ok: Vec<f64> = self.rates[snr_index].iter().flatten().copied().collect();
        ok.iter().sum::<f64>() / ok.len() as f64
    }

    pub fn failures(&self) -> usize {
        self.rates.iter().flatten().filter(|r| r.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSamples {
    pub snr_grid_db: Vec<f64>,
    pub series: Vec<SeriesSamples>,
}

impl SweepSamples {
    pub fn get(&self, allocator: AllocatorKind, precoder: PrecoderKind) -> Option<&SeriesSamples> {
        self.series.iter().find(|s| s.allocator == allocator && s.precoder == precoder)
    }
}

/// Sum rates of every allocator/precoder pair at every SNR point, trial by
/// trial. All pairs in a trial share the same channel set, and each trial's
/// channel is reused across SNR points.
pub fn sum_rate_samples(spec: &ExperimentSpec) -> Result<SweepSamples> {
    expect_kind(spec, ExperimentKind::SumRateSweep)?;
    let sys = &spec.system;
    let pairs: Vec<(AllocatorKind, PrecoderKind)> = spec
        .precoders
        .iter()
        .flat_map(|&p| spec.allocators.iter().map(move |&a| (a, p)))
        .collect();
    let n_snr = spec.snr_grid_db.len();

    // per trial: [pair][snr]
    let per_trial = map_trials(spec.trials, |trial| -> Vec<Vec<Option<f64>>> {
        let mut out = vec![vec![None; n_snr]; pairs.len()];
        let Ok(set) = sys.channel_set(trial) else {
            return out;
        };
        for &precoder in &spec.precoders {
            let mut cached: BTreeMap<AllocatorKind, Option<AllocationVector>> = BTreeMap::new();
            for (si, &snr) in spec.snr_grid_db.iter().enumerate() {
                let e_tr = e_tr_from_snr_db(snr, sys.sigma_n2);
                let Ok(p) = build_precoder(precoder, set.h_est(), sys.sigma_n2, e_tr) else {
                    continue;
                };
                let Ok(mut evaluator) = SumRateEvaluator::new(set.h_true(), &p, sys.sigma_n2) else {
                    continue;
                };
                let snr_free_precoder = precoder != PrecoderKind::Mmse;
                for (pi, &(allocator, pk)) in pairs.iter().enumerate() {
                    if pk != precoder {
                        continue;
                    }
                    let a = if snr_free_precoder && !allocator.depends_on_snr() {
                        cached
                            .entry(allocator)
                            .or_insert_with(|| allocate(allocator, sys, &set, &p, e_tr, trial).ok())
                            .clone()
                    } else {
                        allocate(allocator, sys, &set, &p, e_tr, trial).ok()
                    };
                    out[pi][si] = a.map(|a| evaluator.sum_rate(a.as_slice(), e_tr));
                }
            }
        }
        out
    });

    let mut series: Vec<SeriesSamples> = pairs
        .iter()
        .map(|&(allocator, precoder)| SeriesSamples {
            allocator,
            precoder,
            rates: vec![Vec::with_capacity(spec.trials); n_snr],
        })
        .collect();
    for trial in per_trial {
        for (pi, by_snr) in trial.into_iter().enumerate() {
            for (si, r) in by_snr.into_iter().enumerate() {
                series[pi].rates[si].push(r);
            }
        }
    }
    Ok(SweepSamples {
        snr_grid_db: spec.snr_grid_db.clone(),
        series,
    })
}

/// Ergodic sum rate of each allocator/precoder pair over the SNR grid.
/// Columns: `snr_db`, then `<allocator>_<precoder>` per pair.
pub fn run_sum_rate_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let started = Instant::now();
    let samples = sum_rate_samples(spec)?;
    let mut table = Table::new("sum_rate_sweep");
    table.push("snr_db", samples.snr_grid_db.clone());
    let mut failures = BTreeMap::new();
    for s in &samples.series {
        let means = (0..samples.snr_grid_db.len()).map(|i| s.mean(i)).collect();
        table.push(s.column_name(), means);
        failures.insert(s.column_name(), s.failures());
    }
    let mut notes = BTreeMap::new();
    notes.insert("es_grid_step".to_string(), spec.system.es_grid_step.to_string());
    notes.insert("rate_unit".to_string(), "bits per channel use".to_string());
    Ok(finish(spec, started, table, failures, notes))
}

/// Paired-sample statistics of `first - second` over the trials where both
/// succeeded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedStats {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `mean / std_error`; compare against a one-sided critical value.
    pub t: f64,
}

pub fn paired_difference(first: &SeriesSamples, second: &SeriesSamples, snr_index: usize) -> Result<PairedStats> {
    let diffs: Vec<f64> = first.rates[snr_index]
        .iter()
        .zip(&second.rates[snr_index])
        .filter_map(|(a, b)| Some((*a)? - (*b)?))
        .collect();
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Domain(format!("paired test needs at least two trials, got {n}")));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std_error = (var / n as f64).sqrt();
    let t = if std_error > 0.0 {
        mean / std_error
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Ok(PairedStats { n, mean, std_error, t })
}
