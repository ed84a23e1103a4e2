//! Power allocation: the MSE objective and its gradients, the adaptive
//! allocators M-APA and RM-APA, and the UPA / random / exhaustive-search
//! baselines.

mod adaptive;
mod baseline;
mod objective;
mod search;

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adaptive::{mapa, rmapa, AdaptiveParams, DIVERGENCE_FACTOR};
pub use baseline::{random_allocation, upa};
pub use objective::{mse_gradient, mse_objective, robust_gradient, robust_objective, QuadraticModel};
pub use search::{exhaustive_search, grid_point_count, SearchObjective, SearchResult, MAX_GRID_POINTS};

/// Tolerance used when checking the unit-power constraint `|a|^2 = 1`.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Per-stream amplitude weights; stream `m` transmits with power `a[m]^2`.
///
/// Any finite vector is accepted so that intermediate and test vectors can
/// be represented. Every allocator returns a vector with `|a|^2 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationVector(Vec<f64>);

impl AllocationVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::dim("allocation length", ">= 1", 0));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Domain(format!("allocation weight {bad} is not finite")));
        }
        Ok(Self(weights))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOLERANCE
    }

    /// Componentwise `|a_m|`. Power depends only on `a_m^2`, so this is the
    /// form reported in results.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.iter().map(|w| w.abs()).collect()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for AllocationVector {
    type Output = f64;

    fn index(&self, m: usize) -> &f64 {
        &self.0[m]
    }
}

/// Rescales `a` onto the unit sphere. Returns the rescaled vector and the
/// factor `beta = 1 / |a|` that was applied.
pub fn normalize_power(a: &[f64]) -> Result<(AllocationVector, f64)> {
    let norm_sqr: f64 = a.iter().map(|w| w * w).sum();
    if !(norm_sqr > 0.0) || !norm_sqr.is_finite() {
        return Err(Error::Degenerate(format!("cannot rescale allocation with |a|^2 = {norm_sqr}")));
    }
    let beta = (1.0 / norm_sqr).sqrt();
    let scaled = AllocationVector::new(a.iter().map(|w| beta * w).collect())?;
    Ok((scaled, beta))
}

/// Diagonal CSIT error matrix `Xi = E[H_err^H H_err]`, one entry per
/// transmit antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCovariance {
    diagonal: Vec<f64>,
}

impl ErrorCovariance {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("error covariance entries must be >= 0, got {diagonal:?}")));
        }
        Ok(Self { diagonal })
    }

    /// i.i.d. errors of variance `sigma_e2` on an `n_r x n_t` channel give
    /// `Xi = n_r * sigma_e2 * I`.
    pub fn homogeneous(n_tx: usize, n_rx: usize, sigma_e2: f64) -> Result<Self> {
        Self::new(vec![n_rx as f64 * sigma_e2; n_tx])
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn n_tx(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_zero(&self) -> bool {
        self.diagonal.iter().all(|v| *v == 0.0)
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.diagonal.iter().map(|v| v * factor).collect())
    }
}

/// Everything an adaptive allocator did, one entry per iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AllocatorTrace {
    pub iterates: Vec<AllocationVector>,
    pub objective_values: Vec<f64>,
    pub beta_history: Vec<f64>,
}

impl AllocatorTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> Option<&AllocationVector> {
        self.iterates.last()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_values.last().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_three_four_five() {
        let (a, beta) = normalize_power(&[3.0, 4.0]).unwrap();
        assert!((a[0] - 0.6).abs() < 1e-15 && (a[1] - 0.8).abs() < 1e-15);
        assert!((beta - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rescale_unit_vector_is_identity() {
        let (a, beta) = normalize_power(&[0.6, -0.8]).unwrap();
        assert_eq!(beta, 1.0);
        assert_eq!(a.as_slice(), &[0.6, -0.8]);
    }

    #[test]
    fn rescale_rejects_zero() {
        assert!(matches!(normalize_power(&[0.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn allocation_rejects_non_finite() {
        assert!(AllocationVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(AllocationVector::new(vec![]).is_err());
    }

    #[test]
    fn homogeneous_error_covariance() {
        let xi = ErrorCovariance::homogeneous(4, 4, 0.1).unwrap();
        assert_eq!(xi.diagonal(), &[0.4; 4]);
        assert!(ErrorCovariance::homogeneous(4, 4, 0.0).unwrap().is_zero());
        assert!(ErrorCovariance::new(vec![0.1, -0.1]).is_err());
    }
}
