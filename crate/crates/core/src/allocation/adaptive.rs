//! M-APA and RM-APA: gradient descent on the MSE objective, pulled back onto
//! the unit-power sphere after every step.

use super::{normalize_power, upa, AllocationVector, AllocatorTrace, ErrorCovariance, QuadraticModel};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::precoding::Precoder;

/// A run is declared divergent once the objective exceeds this multiple of
/// its value at the starting point.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    /// Step size `mu`.
    pub mu: f64,
    /// Number of updates `I_t`.
    pub iters: usize,
    /// Noise variance used for the recorded objective values. It only shifts
    /// the objective by a constant and does not change the iterates.
    pub sigma_n2: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            mu: 0.01,
            iters: 100,
            sigma_n2: 1.0,
        }
    }
}

impl AdaptiveParams {
    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Domain(format!("step size must be > 0, got {}", self.mu)));
        }
        if self.iters == 0 {
            return Err(Error::Domain("iteration count must be >= 1".into()));
        }
        Ok(())
    }
}

/// M-APA on channel `h` (the transmitter's view of the channel).
///
/// Starts from `a0`, or from the zero vector when `a0` is `None`, and runs
/// `a <- a - mu * grad`, followed by the `beta` rescale whenever `|a|^2 != 1`.
pub fn mapa(h: &ChannelMatrix, p: &Precoder, params: &AdaptiveParams, a0: Option<&AllocationVector>) -> Result<AllocatorTrace> {
    let model = QuadraticModel::new(h, p)?;
    descend(&model, params, a0)
}

/// RM-APA: M-APA on the estimate with the extra `2 (P^H Xi P)_mm a_m`
/// gradient term. With `Xi = 0` the iterates are exactly those of [`mapa`].
pub fn rmapa(
    h_est: &ChannelMatrix,
    p: &Precoder,
    xi: &ErrorCovariance,
    params: &AdaptiveParams,
    a0: Option<&AllocationVector>,
) -> Result<AllocatorTrace> {
    let model = QuadraticModel::robust(h_est, p, xi)?;
    descend(&model, params, a0)
}

fn descend(model: &QuadraticModel, params: &AdaptiveParams, a0: Option<&AllocationVector>) -> Result<AllocatorTrace> {
    params.validate()?;
    let q_max = model.quadratic().iter().fold(0.0f64, |m, q| m.max(*q));
    if params.mu * q_max >= 1.0 {
        return Err(Error::UnstableStep {
            mu: params.mu,
            bound: 1.0 / q_max,
        });
    }
    let n = model.n_streams();
    let mut a = match a0 {
        Some(start) if start.len() != n => {
            return Err(Error::dim("initial allocation length", n, start.len()));
        }
        Some(start) => start.as_slice().to_vec(),
        None => vec![0.0; n],
    };
    let initial = model.value(&a, params.sigma_n2);
    let limit = DIVERGENCE_FACTOR * initial.abs().max(f64::MIN_POSITIVE);

    let mut trace = AllocatorTrace {
        iterates: Vec::with_capacity(params.iters),
        objective_values: Vec::with_capacity(params.iters),
        beta_history: Vec::with_capacity(params.iters),
    };
    for iteration in 1..=params.iters {
        let grad = model.gradient(&a);
        for (w, g) in a.iter_mut().zip(&grad) {
            *w -= params.mu * g;
        }
        let norm_sqr: f64 = a.iter().map(|w| w * w).sum();
        let (next, beta) = if norm_sqr == 1.0 {
            (AllocationVector::new(a.clone()), 1.0)
        } else if norm_sqr == 0.0 {
            // zero step from a zero start: nothing to rescale, fall back to UPA
            (Ok(upa(n)), 1.0)
        } else if norm_sqr.is_finite() {
            let (scaled, beta) = normalize_power(&a)?;
            (Ok(scaled), beta)
        } else {
            return Err(Error::Divergence { mu: params.mu, iteration });
        };
        let next = next.map_err(|_| Error::Divergence { mu: params.mu, iteration })?;
        let value = model.value(next.as_slice(), params.sigma_n2);
        if !value.is_finite() || value > limit {
            return Err(Error::Divergence { mu: params.mu, iteration });
        }
        a.copy_from_slice(next.as_slice());
        trace.iterates.push(next);
        trace.objective_values.push(value);
        trace.beta_history.push(beta);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::mse_objective;
    use crate::channel::sample_rayleigh;
    use crate::precoding::{build_precoder, mf_precoder, zf_precoder, PrecoderKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(mu: f64, iters: usize) -> AdaptiveParams {
        AdaptiveParams { mu, iters, sigma_n2: 1.0 }
    }

    #[test]
    fn symmetric_channel_converges_to_uniform() {
        let h = ChannelMatrix::identity(4);
        let p = mf_precoder(&h).unwrap();
        let trace = mapa(&h, &p, &params(0.01, 500), None).unwrap();
        for w in trace.last().unwrap().as_slice() {
            assert!((w - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn every_iterate_is_on_the_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for kind in PrecoderKind::ALL {
            let h = sample_rayleigh(4, 4, &mut rng).unwrap();
            let p = build_precoder(kind, &h, 1.0, 10.0).unwrap();
            let trace = mapa(&h, &p, &params(0.01, 200), None).unwrap();
            assert_eq!(trace.len(), 200);
            assert_eq!(trace.objective_values.len(), 200);
            assert_eq!(trace.beta_history.len(), 200);
            assert!(trace.iterates.iter().all(|a| a.is_normalized()));
        }
    }

    #[test]
    fn recorded_objective_matches_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = sample_rayleigh(4, 4, &mut rng).unwrap();
        let p = zf_precoder(&h).unwrap();
        let trace = mapa(&h, &p, &params(0.01, 20), None).unwrap();
        for (a, f) in trace.iterates.iter().zip(&trace.objective_values) {
            assert!((mse_objective(&h, &p, a, 1.0).unwrap() - f).abs() < 1e-12);
        }
    }

    #[test]
    fn exactly_normalized_iterate_skips_rescale() {
        // single stream at a = 1 on H = P = 1: the gradient 2a - 2 vanishes
        let h = ChannelMatrix::identity(1);
        let p = mf_precoder(&h).unwrap();
        let start = AllocationVector::new(vec![1.0]).unwrap();
        let trace = mapa(&h, &p, &params(0.1, 1), Some(&start)).unwrap();
        assert_eq!(trace.beta_history, vec![1.0]);
        assert_eq!(trace.iterates[0].as_slice()[0], 1.0);
    }

    #[test]
    fn zero_first_step_restarts_from_uniform() {
        // H P with zero diagonal: the first gradient from a = 0 vanishes
        let h = ChannelMatrix::identity(2)
            .with_entries(crate::channel::CMatrix::from_row_slice(
                2,
                2,
                &[0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()],
            ))
            .unwrap();
        let p = mf_precoder(&ChannelMatrix::identity(2)).unwrap();
        let trace = mapa(&h, &p, &params(0.01, 1), None).unwrap();
        assert_eq!(trace.iterates[0], upa(2));
    }

    #[test]
    fn robust_with_zero_error_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let h = sample_rayleigh(4, 4, &mut rng).unwrap();
        let p = mf_precoder(&h).unwrap();
        let xi = ErrorCovariance::homogeneous(4, 4, 0.0).unwrap();
        let plain = mapa(&h, &p, &params(0.05, 100), None).unwrap();
        let robust = rmapa(&h, &p, &xi, &params(0.05, 100), None).unwrap();
        assert_eq!(plain, robust);
    }

    #[test]
    fn step_at_stability_bound_is_refused() {
        // H = P = I gives q = (1, 1): the bound is mu < 1
        let h = ChannelMatrix::identity(2);
        let p = mf_precoder(&h).unwrap();
        assert!(mapa(&h, &p, &params(0.99, 10), None).is_ok());
        match mapa(&h, &p, &params(1.0, 10), None) {
            Err(Error::UnstableStep { mu, bound }) => assert_eq!((mu, bound), (1.0, 1.0)),
            other => panic!("expected UnstableStep, got {other:?}"),
        }
        // the robust term raises q and therefore lowers the bound
        let xi = ErrorCovariance::homogeneous(2, 2, 0.5).unwrap();
        assert!(matches!(
            rmapa(&h, &p, &xi, &params(0.99, 10), None),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        let h = ChannelMatrix::identity(2);
        let p = mf_precoder(&h).unwrap();
        assert!(mapa(&h, &p, &params(0.0, 10), None).is_err());
        assert!(mapa(&h, &p, &params(0.01, 0), None).is_err());
        let short = AllocationVector::new(vec![1.0]).unwrap();
        assert!(mapa(&h, &p, &params(0.01, 10), Some(&short)).is_err());
    }
}
