use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use super::{expect_kind, finish, ExperimentKind, ExperimentResult, ExperimentSpec, Table};
use crate::allocation::QuadraticModel;
use crate::channel::ChannelMatrix;
use crate::error::Result;
use crate::parallel::map_trials;
use crate::precoding::{build_precoder, Precoder};

/// Differences smaller than this are treated as flat when counting slope
/// sign changes.
pub const UNIMODAL_TOLERANCE: f64 = 1e-9;

/// The MSE along the quarter circle `a = (cos t, sin t)`, `t` in `[0, pi/2]`,
/// sampled at `steps + 1` evenly spaced angles. Returns `(angles, values)`.
pub fn probe_curve(h: &ChannelMatrix, p: &Precoder, sigma_n2: f64, steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let model = QuadraticModel::new(h, p)?;
    let angles: Vec<f64> = (0..=steps).map(|i| FRAC_PI_2 * i as f64 / steps as f64).collect();
    let values = angles
        .iter()
        .map(|t| model.value(&[t.cos(), t.sin()], sigma_n2))
        .collect();
    Ok((angles, values))
}

/// Number of sign changes in the slope of `values`, skipping steps whose
/// magnitude is at most `tolerance`.
pub fn sign_changes(values: &[f64], tolerance: f64) -> usize {
    let signs: Vec<bool> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > tolerance)
        .map(|d| d > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// True when the sequence falls and then rises (either part may be empty),
/// up to [`UNIMODAL_TOLERANCE`].
pub fn is_discretely_unimodal(values: &[f64]) -> bool {
    let mut rising = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d > UNIMODAL_TOLERANCE {
            rising = true;
        } else if d < -UNIMODAL_TOLERANCE && rising {
            return false;
        }
    }
    true
}

/// Evaluates the two-stream MSE on the quarter circle for each precoder.
///
/// Columns: `theta`, then one column per precoder (`<precoder>` for a single
/// trial, `<precoder>_<trial>` otherwise). The notes carry a unimodality
/// verdict and slope sign-change count per column.
pub fn run_convexity_probe(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    expect_kind(spec, ExperimentKind::ConvexityProbe)?;
    let started = Instant::now();
    let sys = &spec.system;

    let curves = map_trials(spec.trials, |trial| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let set = sys.channel_set(trial)?;
        spec.precoders
            .iter()
            .map(|&kind| {
                let p = build_precoder(kind, set.h_est(), sys.sigma_n2, sys.e_tr)?;
                probe_curve(set.h_est(), &p, sys.sigma_n2, spec.probe_steps)
            })
            .collect()
    });

    let mut table = Table::new("convexity_probe");
    table.push(
        "theta",
        (0..=spec.probe_steps).map(|i| FRAC_PI_2 * i as f64 / spec.probe_steps as f64).collect(),
    );
    let mut failures = BTreeMap::new();
    let mut notes = BTreeMap::new();
    for (trial, outcome) in curves.into_iter().enumerate() {
        for (pi, &kind) in spec.precoders.iter().enumerate() {
            let name = if spec.trials == 1 { kind.to_string() } else { format!("{kind}_{trial}") };
            match &outcome {
                Ok(per_precoder) => {
                    let values = per_precoder[pi].1.clone();
                    notes.insert(format!("{name}.unimodal"), is_discretely_unimodal(&values).to_string());
                    notes.insert(
                        format!("{name}.sign_changes"),
                        sign_changes(&values, UNIMODAL_TOLERANCE).to_string(),
                    );
                    failures.insert(name.clone(), 0);
                    table.push(name, values);
                }
                Err(e) => {
                    notes.insert(format!("{name}.error"), e.to_string());
                    failures.insert(name.clone(), 1);
                    table.push(name, vec![f64::NAN; spec.probe_steps + 1]);
                }
            }
        }
    }
    Ok(finish(spec, started, table, failures, notes))
}
