use serde::{Deserialize, Serialize};

use crate::allocation::ErrorCovariance;
use crate::channel::{sample_rayleigh_partitioned, split_csit, ChannelSet};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Dimensions, noise levels and algorithm settings of one simulated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Transmit antennas `N_t`.
    pub n_tx: usize,
    /// Receive antennas per user, `N_k`.
    pub users: Vec<usize>,
    pub sigma_n2: f64,
    /// Per-entry CSIT error variance.
    pub sigma_e2: f64,
    /// Total transmit power; sweeps override it per SNR point.
    pub e_tr: f64,
    pub seed: u64,
    pub step_size: f64,
    pub iterations: usize,
    pub es_grid_step: f64,
    /// Multiplier on the robust `Xi` term. 1 follows the robust algorithm as
    /// stated; `N_r` reproduces the variant with the extra prefactor.
    pub robust_prefactor: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            users: vec![2, 2],
            sigma_n2: 1.0,
            sigma_e2: 0.0,
            e_tr: 10.0,
            seed: 1,
            step_size: 0.01,
            iterations: 100,
            es_grid_step: 0.005,
            robust_prefactor: 1.0,
        }
    }
}

impl SystemConfig {
    pub fn n_rx(&self) -> usize {
        self.users.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Spec(msg));
        if self.n_tx == 0 {
            return bad("system.n_tx must be >= 1".into());
        }
        if self.users.is_empty() || self.users.contains(&0) {
            return bad(format!("system.users must list positive antenna counts, got {:?}", self.users));
        }
        if !(self.sigma_n2 > 0.0) || !self.sigma_n2.is_finite() {
            return bad(format!("system.sigma_n2 must be > 0, got {}", self.sigma_n2));
        }
        if !(self.sigma_e2 >= 0.0) || !self.sigma_e2.is_finite() {
            return bad(format!("system.sigma_e2 must be >= 0, got {}", self.sigma_e2));
        }
        if !(self.e_tr > 0.0) || !self.e_tr.is_finite() {
            return bad(format!("system.e_tr must be > 0, got {}", self.e_tr));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return bad(format!("system.step_size must be > 0, got {}", self.step_size));
        }
        if self.iterations == 0 {
            return bad("system.iterations must be >= 1".into());
        }
        if !(self.es_grid_step > 0.0 && self.es_grid_step <= 1.0) {
            return bad(format!("system.es_grid_step must lie in (0, 1], got {}", self.es_grid_step));
        }
        if !(self.robust_prefactor >= 0.0) || !self.robust_prefactor.is_finite() {
            return bad(format!("system.robust_prefactor must be >= 0, got {}", self.robust_prefactor));
        }
        Ok(())
    }

    /// Channel, estimate and error for Monte Carlo trial `trial`. The true
    /// channel and the error come from separate streams, so changing
    /// `sigma_e2` leaves the true channel of every trial untouched.
    pub fn channel_set(&self, trial: u64) -> Result<ChannelSet> {
        let h = sample_rayleigh_partitioned(&self.users, self.n_tx, &mut stream(self.seed, trial, Purpose::Channel))?;
        split_csit(&h, self.sigma_e2, &mut stream(self.seed, trial, Purpose::CsitError))
    }

    /// `Xi = robust_prefactor * N_r * sigma_e2 * I`.
    pub fn error_covariance(&self) -> Result<ErrorCovariance> {
        ErrorCovariance::homogeneous(self.n_tx, self.n_rx(), self.sigma_e2)?.scaled(self.robust_prefactor)
    }
}
