//! Transmit and receive equations of the downlink model.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::allocation::AllocationVector;
use crate::channel::{complex_gaussian, ChannelMatrix};
use crate::error::{Error, Result};
use crate::precoding::Precoder;

pub type CVector = DVector<Complex64>;

/// Additive white Gaussian noise with covariance `sigma_n2 * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma_n2: f64,
}

impl NoiseModel {
    pub fn new(sigma_n2: f64) -> Result<Self> {
        if !(sigma_n2 > 0.0) || !sigma_n2.is_finite() {
            return Err(Error::Domain(format!("noise variance must be > 0, got {sigma_n2}")));
        }
        Ok(Self { sigma_n2 })
    }

    /// The `sigma_n2 -> 0` limit, used to check the noiseless model.
    pub fn noiseless() -> Self {
        Self { sigma_n2: 0.0 }
    }

    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_n2 == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> CVector {
        if self.is_noiseless() {
            return CVector::zeros(len);
        }
        CVector::from_fn(len, |_, _| complex_gaussian(rng, self.sigma_n2))
    }
}

/// One use of the `N_r` data streams: zero-mean, unit-variance, uncorrelated.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector(CVector);

impl SymbolVector {
    pub fn new(entries: CVector) -> Self {
        Self(entries)
    }

    /// Gaussian symbols `CN(0, 1)`.
    pub fn gaussian<R: Rng + ?Sized>(n_r: usize, rng: &mut R) -> Self {
        Self(CVector::from_fn(n_r, |_, _| complex_gaussian(rng, 1.0)))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `x = P diag(a) s`.
pub fn transmit(p: &Precoder, a: &AllocationVector, s: &SymbolVector) -> Result<CVector> {
    let n_streams = p.n_streams();
    if a.len() != n_streams {
        return Err(Error::dim("allocation length vs precoder columns", n_streams, a.len()));
    }
    if s.len() != n_streams {
        return Err(Error::dim("symbol length vs precoder columns", n_streams, s.len()));
    }
    let weighted = CVector::from_fn(n_streams, |m, _| s.0[m] * a[m]);
    Ok(p.matrix() * weighted)
}

/// `y = H x + n`.
pub fn receive<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    x: &CVector,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<CVector> {
    if x.len() != h.n_tx() {
        return Err(Error::dim("transmit vector vs channel columns", h.n_tx(), x.len()));
    }
    let mut y = h.matrix() * x;
    if !noise.is_noiseless() {
        y += noise.sample(h.n_rx(), rng);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh, CMatrix};
    use crate::precoding::{mf_precoder, Precoder, PrecoderKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_precoder(n: usize) -> Precoder {
        mf_precoder(&ChannelMatrix::identity(n)).unwrap()
    }

    #[test]
    fn identity_precoder_passes_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SymbolVector::gaussian(3, &mut rng);
        let x = transmit(&identity_precoder(3), &AllocationVector::new(vec![1.0; 3]).unwrap(), &s).unwrap();
        assert_eq!(&x, s.as_vector());
    }

    #[test]
    fn zero_allocation_transmits_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = SymbolVector::gaussian(3, &mut rng);
        let x = transmit(&identity_precoder(3), &AllocationVector::new(vec![0.0; 3]).unwrap(), &s).unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn matrix_form_equals_column_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = sample_rayleigh(2, 3, &mut rng).unwrap();
        let p = mf_precoder(&h).unwrap();
        let a = AllocationVector::new(vec![0.3, -0.9]).unwrap();
        let s = SymbolVector::gaussian(2, &mut rng);
        let x = transmit(&p, &a, &s).unwrap();
        let mut by_columns = CVector::zeros(3);
        for m in 0..2 {
            by_columns += p.matrix().column(m) * (s.as_vector()[m] * a[m]);
        }
        assert!((x - by_columns).norm() < 1e-14);
    }

    #[test]
    fn transmit_checks_dimensions() {
        let p = identity_precoder(2);
        let s = SymbolVector::new(CVector::zeros(2));
        assert!(transmit(&p, &AllocationVector::new(vec![1.0; 3]).unwrap(), &s).is_err());
        let s3 = SymbolVector::new(CVector::zeros(3));
        assert!(transmit(&p, &AllocationVector::new(vec![1.0; 2]).unwrap(), &s3).is_err());
    }

    #[test]
    fn noiseless_receive_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = sample_rayleigh(3, 3, &mut rng).unwrap();
        let x = CVector::from_fn(3, |i, _| Complex64::new(i as f64, 1.0));
        let y = receive(&h, &x, &NoiseModel::noiseless(), &mut rng).unwrap();
        assert_eq!(y, h.matrix() * &x);
    }

    #[test]
    fn noise_only_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = sample_rayleigh(2, 2, &mut rng).unwrap();
        let noise = NoiseModel::new(0.5).unwrap();
        let x = CVector::zeros(2);
        let n = 100_000;
        let mut cov = CMatrix::zeros(2, 2);
        for _ in 0..n {
            let y = receive(&h, &x, &noise, &mut rng).unwrap();
            cov += &y * y.adjoint();
        }
        cov /= Complex64::new(n as f64, 0.0);
        for i in 0..2 {
            assert!((cov[(i, i)].re - 0.5).abs() < 0.01, "diag {}", cov[(i, i)]);
            assert!(cov[(i, 1 - i)].norm() < 0.01);
        }
    }

    #[test]
    fn noise_averages_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = ChannelMatrix::identity(2);
        let x = CVector::from_vec(vec![Complex64::new(1.0, -0.5), Complex64::new(0.25, 2.0)]);
        let noise = NoiseModel::new(1.0).unwrap();
        let n = 100_000;
        let mut mean = CVector::zeros(2);
        for _ in 0..n {
            mean += receive(&h, &x, &noise, &mut rng).unwrap();
        }
        mean /= Complex64::new(n as f64, 0.0);
        // standard error per component is about 0.0032
        assert!((mean - &x).iter().all(|z| z.norm() < 0.015));
    }

    #[test]
    fn power_accounting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = sample_rayleigh(4, 4, &mut rng).unwrap();
        let p = Precoder::from_columns(h.matrix().adjoint(), PrecoderKind::Mf).unwrap();
        let a = AllocationVector::new(vec![0.1, 0.7, 0.5, (1.0f64 - 0.75).sqrt()]).unwrap();
        let n = 10_000;
        let mut power = 0.0;
        for _ in 0..n {
            let s = SymbolVector::gaussian(4, &mut rng);
            power += transmit(&p, &a, &s).unwrap().norm_squared();
        }
        power /= n as f64;
        assert!((power - 1.0).abs() < 0.03, "E|x|^2 = {power}");
    }

    #[test]
    fn noise_variance_must_be_positive() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
    }
}
