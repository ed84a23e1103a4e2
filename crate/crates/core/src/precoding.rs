//! Linear precoders built from the transmitter's channel estimate.
//!
//! All three constructions end with [`normalize_columns`], so every stream
//! leaves the array with unit norm and the power split is left entirely to
//! the allocation vector. For ZF this turns `H P = I` into `H P` diagonal
//! with a positive real diagonal.

use std::fmt;

use nalgebra::Cholesky;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelMatrix, CMatrix};
use crate::error::{Error, Result};

/// Largest condition number of `H H^H` accepted by the ZF construction.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Mf,
    Zf,
    Mmse,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 3] = [PrecoderKind::Mf, PrecoderKind::Zf, PrecoderKind::Mmse];

    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderKind::Mf => "mf",
            PrecoderKind::Zf => "zf",
            PrecoderKind::Mmse => "mmse",
        }
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An `N_t x N_r` precoder with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    matrix: CMatrix,
    kind: PrecoderKind,
    built_from: u64,
}

impl Precoder {
    /// Normalizes the columns of `matrix` and tags the result with `kind`.
    pub fn from_columns(matrix: CMatrix, kind: PrecoderKind) -> Result<Self> {
        let built_from = fingerprint(&matrix);
        Ok(Self {
            matrix: normalize_columns(&matrix)?,
            kind,
            built_from,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> PrecoderKind {
        self.kind
    }

    /// Fingerprint of the matrix the precoder was computed from.
    pub fn built_from(&self) -> u64 {
        self.built_from
    }

    pub fn n_tx(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_streams(&self) -> usize {
        self.matrix.ncols()
    }

    fn build(h_est: &ChannelMatrix, unnormalized: CMatrix, kind: PrecoderKind) -> Result<Self> {
        Ok(Self {
            matrix: normalize_columns(&unnormalized)?,
            kind,
            built_from: fingerprint(h_est.matrix()),
        })
    }
}

/// Short SHA-256 digest of the matrix entries, used for provenance only.
pub fn fingerprint(m: &CMatrix) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update((m.nrows() as u64).to_le_bytes());
    hasher.update((m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            hasher.update(m[(i, j)].re.to_le_bytes());
            hasher.update(m[(i, j)].im.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Divides every column by its Euclidean norm.
pub fn normalize_columns(m: &CMatrix) -> Result<CMatrix> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate(format!("column {j} has norm {norm}")));
        }
        col.unscale_mut(norm);
    }
    Ok(out)
}

/// Matched filter, `P ∝ H^H`.
pub fn mf_precoder(h_est: &ChannelMatrix) -> Result<Precoder> {
    Precoder::build(h_est, h_est.matrix().adjoint(), PrecoderKind::Mf)
}

/// Zero forcing, `P ∝ H^H (H H^H)^-1`.
pub fn zf_precoder(h_est: &ChannelMatrix) -> Result<Precoder> {
    let (n_r, n_t) = (h_est.n_rx(), h_est.n_tx());
    if n_r > n_t {
        return Err(Error::dim("ZF precoder needs n_tx >= total receive antennas", format!("n_tx >= {n_r}"), n_t));
    }
    let h = h_est.matrix();
    let gram = h * h.adjoint();
    let condition = condition_number(&gram);
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let inv = hermitian_inverse(gram).ok_or(Error::Singular { condition })?;
    Precoder::build(h_est, h.adjoint() * inv, PrecoderKind::Zf)
}

/// Regularized ZF, `P ∝ H^H (H H^H + (N_r sigma_n2 / E_tr) I)^-1`.
pub fn mmse_precoder(h_est: &ChannelMatrix, sigma_n2: f64, e_tr: f64) -> Result<Precoder> {
    if !(sigma_n2 > 0.0) || !(e_tr > 0.0) || !sigma_n2.is_finite() || !e_tr.is_finite() {
        return Err(Error::Domain(format!(
            "MMSE precoder needs sigma_n2 > 0 and e_tr > 0, got {sigma_n2} and {e_tr}"
        )));
    }
    let n_r = h_est.n_rx();
    let h = h_est.matrix();
    let reg = n_r as f64 * sigma_n2 / e_tr;
    let mut gram = h * h.adjoint();
    for i in 0..n_r {
        gram[(i, i)] += Complex64::new(reg, 0.0);
    }
    let inv = hermitian_inverse(gram).ok_or_else(|| Error::Degenerate("regularized Gram matrix not positive definite".into()))?;
    Precoder::build(h_est, h.adjoint() * inv, PrecoderKind::Mmse)
}

/// Builds a precoder of the requested kind.
pub fn build_precoder(kind: PrecoderKind, h_est: &ChannelMatrix, sigma_n2: f64, e_tr: f64) -> Result<Precoder> {
    match kind {
        PrecoderKind::Mf => mf_precoder(h_est),
        PrecoderKind::Zf => zf_precoder(h_est),
        PrecoderKind::Mmse => mmse_precoder(h_est, sigma_n2, e_tr),
    }
}

fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn hermitian_inverse(m: CMatrix) -> Option<CMatrix> {
    Cholesky::new(m).map(|c| c.inverse())
}
