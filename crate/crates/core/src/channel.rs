//! Flat-fading channel matrices and imperfect CSIT.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Draws one circularly symmetric complex Gaussian sample with the given
/// total variance (each of the real and imaginary parts gets half of it).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// An `N_r x N_t` channel whose rows are grouped by user: user `k` owns
/// `partition[k]` consecutive rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
    partition: Vec<usize>,
}

impl ChannelMatrix {
    pub fn new(entries: CMatrix, partition: Vec<usize>) -> Result<Self> {
        if partition.is_empty() || partition.contains(&0) {
            return Err(Error::Domain(format!(
                "user partition must list positive antenna counts, got {partition:?}"
            )));
        }
        let n_r: usize = partition.iter().sum();
        if entries.nrows() != n_r {
            return Err(Error::dim("channel rows vs user partition", n_r, entries.nrows()));
        }
        if entries.ncols() == 0 {
            return Err(Error::dim("channel columns", ">= 1", 0));
        }
        Ok(Self { entries, partition })
    }

    /// Channel with every row treated as its own single-antenna user.
    pub fn single_antenna_users(entries: CMatrix) -> Result<Self> {
        let partition = vec![1; entries.nrows()];
        Self::new(entries, partition)
    }

    pub fn identity(n: usize) -> Self {
        Self::single_antenna_users(CMatrix::identity(n, n)).expect("identity is well formed")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn n_rx(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.entries.ncols()
    }

    /// Row range belonging to user `k`.
    pub fn user_rows(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.partition[..k].iter().sum();
        start..start + self.partition[k]
    }

    /// Same partition, different entries.
    pub fn with_entries(&self, entries: CMatrix) -> Result<Self> {
        Self::new(entries, self.partition.clone())
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }
}

/// Rayleigh block-fading draw: i.i.d. `CN(0, 1)` entries, every row its own
/// user. Use [`sample_rayleigh_partitioned`] to group rows by user.
pub fn sample_rayleigh<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> Result<ChannelMatrix> {
    sample_rayleigh_partitioned(&vec![1; n_r], n_t, rng)
}

pub fn sample_rayleigh_partitioned<R: Rng + ?Sized>(
    partition: &[usize],
    n_t: usize,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    let n_r: usize = partition.iter().sum();
    if n_r == 0 || n_t == 0 {
        return Err(Error::dim("Rayleigh channel size", "n_r, n_t >= 1", format!("{n_r}x{n_t}")));
    }
    // Row-major fill so the draw order does not depend on nalgebra's storage.
    let mut m = CMatrix::zeros(n_r, n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            m[(i, j)] = complex_gaussian(rng, 1.0);
        }
    }
    ChannelMatrix::new(m, partition.to_vec())
}

/// True channel, transmitter-side estimate and the estimation error for one
/// coherence block. `h_true = h_est + h_err` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    h_true: ChannelMatrix,
    h_est: ChannelMatrix,
    h_err: ChannelMatrix,
    sigma_e2: f64,
}

impl ChannelSet {
    /// Perfect CSIT.
    pub fn perfect(h: ChannelMatrix) -> Self {
        let zeros = CMatrix::zeros(h.n_rx(), h.n_tx());
        let h_err = h.with_entries(zeros).expect("same shape");
        Self {
            h_est: h.clone(),
            h_true: h,
            h_err,
            sigma_e2: 0.0,
        }
    }

    pub fn h_true(&self) -> &ChannelMatrix {
        &self.h_true
    }

    pub fn h_est(&self) -> &ChannelMatrix {
        &self.h_est
    }

    pub fn h_err(&self) -> &ChannelMatrix {
        &self.h_err
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }
}

/// Splits a true channel into estimate and error. The error is drawn from
/// `rng` with i.i.d. `CN(0, sigma_e2)` entries and the estimate is
/// `h_true - h_err`, so the true channel keeps its own distribution.
pub fn split_csit<R: Rng + ?Sized>(h_true: &ChannelMatrix, sigma_e2: f64, rng: &mut R) -> Result<ChannelSet> {
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(Error::Domain(format!("CSIT error variance must be >= 0, got {sigma_e2}")));
    }
    if sigma_e2 == 0.0 {
        return Ok(ChannelSet::perfect(h_true.clone()));
    }
    let (n_r, n_t) = (h_true.n_rx(), h_true.n_tx());
    let mut err = CMatrix::zeros(n_r, n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            err[(i, j)] = complex_gaussian(rng, sigma_e2);
        }
    }
    let est = h_true.matrix() - &err;
    Ok(ChannelSet {
        h_true: h_true.clone(),
        h_est: h_true.with_entries(est)?,
        h_err: h_true.with_entries(err)?,
        sigma_e2,
    })
}
