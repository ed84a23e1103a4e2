use std::collections::BTreeMap;
use std::time::Instant;

use super::{expect_kind, finish, ExperimentKind, ExperimentResult, ExperimentSpec, Table};
use crate::allocation::{exhaustive_search, mapa, rmapa, AdaptiveParams, SearchObjective};
use crate::error::{Error, Result};
use crate::metrics::{squared_deviation, AllocatorKind};
use crate::parallel::map_trials;
use crate::precoding::{build_precoder, PrecoderKind};

fn column_name(allocator: AllocatorKind, precoder: PrecoderKind) -> String {
    match allocator {
        AllocatorKind::Mapa => format!("msd_{precoder}"),
        other => format!("msd_{other}_{precoder}"),
    }
}

/// MSD learning curves of the adaptive allocators.
///
/// Every trial draws a channel, builds each precoder from the estimate,
/// finds the grid-search MSE optimum and runs the allocator from zero. The
/// squared deviation of each iterate from that trial's optimum is averaged
/// over the trials that did not fail. Columns: `iteration`, then `msd_<precoder>`
/// for M-APA and `msd_rmapa_<precoder>` for RM-APA.
pub fn run_learning_curve(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    expect_kind(spec, ExperimentKind::LearningCurve)?;
    let started = Instant::now();
    let sys = &spec.system;
    let allocators: Vec<AllocatorKind> = spec
        .allocators
        .iter()
        .copied()
        .filter(|a| matches!(a, AllocatorKind::Mapa | AllocatorKind::Rmapa))
        .collect();
    if allocators.is_empty() {
        return Err(Error::Spec("learning_curve needs allocator mapa and/or rmapa".into()));
    }
    let series: Vec<(AllocatorKind, PrecoderKind)> = spec
        .precoders
        .iter()
        .flat_map(|&p| allocators.iter().map(move |&a| (a, p)))
        .collect();
    let params = AdaptiveParams {
        mu: sys.step_size,
        iters: sys.iterations,
        sigma_n2: sys.sigma_n2,
    };
    let xi = sys.error_covariance()?;

    let per_trial = map_trials(spec.trials, |trial| -> Vec<Result<Vec<f64>>> {
        let set = match sys.channel_set(trial) {
            Ok(set) => set,
            Err(e) => return series.iter().map(|_| Err(Error::Domain(e.to_string()))).collect(),
        };
        series
            .iter()
            .map(|&(allocator, precoder)| {
                let p = build_precoder(precoder, set.h_est(), sys.sigma_n2, sys.e_tr)?;
                let optimum = exhaustive_search(
                    set.h_est(),
                    &p,
                    sys.es_grid_step,
                    SearchObjective::Mse { sigma_n2: sys.sigma_n2 },
                )?;
                let trace = match allocator {
                    AllocatorKind::Rmapa => rmapa(set.h_est(), &p, &xi, &params, None)?,
                    _ => mapa(set.h_est(), &p, &params, None)?,
                };
                squared_deviation(&trace, &optimum.allocation)
            })
            .collect()
    });

    let mut sums = vec![vec![0.0; sys.iterations]; series.len()];
    let mut ok = vec![0usize; series.len()];
    let mut failed = vec![0usize; series.len()];
    for trial in per_trial {
        for (s, outcome) in trial.into_iter().enumerate() {
            match outcome {
                Ok(dev) => {
                    ok[s] += 1;
                    sums[s].iter_mut().zip(dev).for_each(|(acc, d)| *acc += d);
                }
                Err(_) => failed[s] += 1,
            }
        }
    }

    let mut table = Table::new("learning_curve");
    table.push("iteration", (1..=sys.iterations).map(|i| i as f64).collect());
    let mut failures = BTreeMap::new();
    for (s, &(allocator, precoder)) in series.iter().enumerate() {
        let name = column_name(allocator, precoder);
        let values = sums[s]
            .iter()
            .map(|acc| if ok[s] > 0 { acc / ok[s] as f64 } else { f64::NAN })
            .collect();
        table.push(name.clone(), values);
        failures.insert(name, failed[s]);
    }
    let mut notes = BTreeMap::new();
    notes.insert("es_grid_step".to_string(), sys.es_grid_step.to_string());
    Ok(finish(spec, started, table, failures, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::LearningCurve);
        spec.trials = 20;
        spec.system.es_grid_step = 0.05;
        spec.system.iterations = 60;
        spec
    }

    #[test]
    fn columns_follow_precoders() {
        let res = run_learning_curve(&small_spec()).unwrap();
        let names: Vec<_> = res.table().columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["iteration", "msd_mf", "msd_zf", "msd_mmse"]);
        assert_eq!(res.table().n_rows(), 60);
        assert!(res.metadata.failures.values().all(|f| *f == 0));
    }

    #[test]
    fn curves_decrease_overall() {
        let res = run_learning_curve(&small_spec()).unwrap();
        for kind in ["msd_mf", "msd_zf", "msd_mmse"] {
            let v = res.table().column(kind).unwrap();
            assert!(v.iter().all(|x| *x >= 0.0));
            assert!(v[59] < 0.5 * v[0], "{kind}: {} -> {}", v[0], v[59]);
        }
    }

    #[test]
    fn single_trial_is_deterministic() {
        let mut spec = small_spec();
        spec.trials = 1;
        let a = run_learning_curve(&spec).unwrap();
        let b = run_learning_curve(&spec).unwrap();
        assert_eq!(a.tables, b.tables);
    }

    #[test]
    fn unstable_step_is_counted_not_averaged() {
        let mut spec = small_spec();
        spec.system.step_size = 0.3;
        let res = run_learning_curve(&spec).unwrap();
        let failures = &res.metadata.failures;
        assert!(failures["msd_mf"] > 0, "{failures:?}");
        assert!(failures.values().all(|f| *f <= 20));
        for name in ["msd_mf", "msd_zf", "msd_mmse"] {
            let col = res.table().column(name).unwrap();
            if failures[name] < 20 {
                assert!(col.iter().all(|v| v.is_finite()));
            } else {
                assert!(col.iter().all(|v| v.is_nan()));
            }
        }
    }

    #[test]
    fn robust_curves_are_optional_columns() {
        let mut spec = small_spec();
        spec.trials = 3;
        spec.precoders = vec![PrecoderKind::Zf];
        spec.allocators = vec![AllocatorKind::Mapa, AllocatorKind::Rmapa];
        let res = run_learning_curve(&spec).unwrap();
        assert!(res.table().column("msd_rmapa_zf").is_some());
    }
}
