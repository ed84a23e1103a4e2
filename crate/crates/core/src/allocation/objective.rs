use super::{AllocationVector, ErrorCovariance};
use crate::channel::{CMatrix, ChannelMatrix};
use crate::error::{Error, Result};
use crate::precoding::Precoder;

fn check_dims(h: &ChannelMatrix, p: &Precoder, a_len: usize) -> Result<()> {
    if h.n_tx() != p.n_tx() {
        return Err(Error::dim("channel columns vs precoder rows", h.n_tx(), p.n_tx()));
    }
    if h.n_rx() != p.n_streams() {
        return Err(Error::dim("channel rows vs precoder columns", h.n_rx(), p.n_streams()));
    }
    if a_len != p.n_streams() {
        return Err(Error::dim("allocation length vs precoder columns", p.n_streams(), a_len));
    }
    Ok(())
}

/// Expected squared error `E|s - y|^2` for unit-variance uncorrelated
/// symbols and noise variance `sigma_n2`:
///
/// `tr(A P^H H^H H P A) - 2 Re tr(H P A) + N_r (1 + sigma_n2)`, `A = diag(a)`.
///
/// `a` does not need unit norm.
pub fn mse_objective(h: &ChannelMatrix, p: &Precoder, a: &AllocationVector, sigma_n2: f64) -> Result<f64> {
    check_dims(h, p, a.len())?;
    let n_r = h.n_rx();
    let mut hpa: CMatrix = h.matrix() * p.matrix();
    for (m, mut col) in hpa.column_iter_mut().enumerate() {
        col.scale_mut(a[m]);
    }
    let quadratic = hpa.norm_squared();
    let linear = hpa.trace().re;
    Ok(quadratic - 2.0 * linear + n_r as f64 * (1.0 + sigma_n2))
}

/// Expected squared error given only the estimate, averaged over the CSIT
/// error: [`mse_objective`] on `h_est` plus `tr(A P^H Xi P A)`.
pub fn robust_objective(
    h_est: &ChannelMatrix,
    p: &Precoder,
    xi: &ErrorCovariance,
    a: &AllocationVector,
    sigma_n2: f64,
) -> Result<f64> {
    let base = mse_objective(h_est, p, a, sigma_n2)?;
    if xi.n_tx() != p.n_tx() {
        return Err(Error::dim("error covariance size vs precoder rows", p.n_tx(), xi.n_tx()));
    }
    let mut penalty = 0.0;
    for (m, col) in p.matrix().column_iter().enumerate() {
        let weighted: f64 = col.iter().zip(xi.diagonal()).map(|(z, v)| v * z.norm_sqr()).sum();
        penalty += a[m] * a[m] * weighted;
    }
    Ok(base + penalty)
}

/// Gradient of [`mse_objective`] with respect to `a`.
///
/// With `Q = P^H H^H H P`, entry `m` is `2 Q_mm a_m - 2 Re([H P]_mm)`, the
/// diagonal of `2 (Q diag(a)) ⊙ I - 2 Re((H P) ⊙ I)`. Uncorrelated streams
/// make the objective separable, so no off-diagonal entry of `Q` appears.
pub fn mse_gradient(h: &ChannelMatrix, p: &Precoder, a: &AllocationVector) -> Result<Vec<f64>> {
    check_dims(h, p, a.len())?;
    Ok(QuadraticModel::new(h, p)?.gradient(a.as_slice()))
}

/// Gradient of [`robust_objective`]: [`mse_gradient`] on the estimate plus
/// `2 (P^H Xi P)_mm a_m`.
pub fn robust_gradient(
    h_est: &ChannelMatrix,
    p: &Precoder,
    xi: &ErrorCovariance,
    a: &AllocationVector,
) -> Result<Vec<f64>> {
    check_dims(h_est, p, a.len())?;
    Ok(QuadraticModel::robust(h_est, p, xi)?.gradient(a.as_slice()))
}

/// The objective as a separable quadratic in `a`:
/// `f(a) = sum_m (q_m a_m^2 - 2 d_m a_m) + N_r (1 + sigma_n2)`.
///
/// `q_m = |H p_m|^2` is the power stream `m` delivers to all receive
/// antennas (plus `(P^H Xi P)_mm` in the robust case) and `d_m = Re [H P]_mm`
/// is the part arriving at its own antenna. Both are computed once per
/// channel so the adaptive loops and the grid search only touch two vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    quadratic: Vec<f64>,
    linear: Vec<f64>,
}

impl QuadraticModel {
    pub fn new(h: &ChannelMatrix, p: &Precoder) -> Result<Self> {
        check_dims(h, p, p.n_streams())?;
        let hp: CMatrix = h.matrix() * p.matrix();
        let quadratic = hp.column_iter().map(|col| col.norm_squared()).collect();
        let linear = (0..hp.ncols()).map(|m| hp[(m, m)].re).collect();
        Ok(Self { quadratic, linear })
    }

    pub fn robust(h_est: &ChannelMatrix, p: &Precoder, xi: &ErrorCovariance) -> Result<Self> {
        let mut model = Self::new(h_est, p)?;
        if xi.n_tx() != p.n_tx() {
            return Err(Error::dim("error covariance size vs precoder rows", p.n_tx(), xi.n_tx()));
        }
        if !xi.is_zero() {
            for (q, col) in model.quadratic.iter_mut().zip(p.matrix().column_iter()) {
                *q += col.iter().zip(xi.diagonal()).map(|(z, v)| v * z.norm_sqr()).sum::<f64>();
            }
        }
        Ok(model)
    }

    pub fn n_streams(&self) -> usize {
        self.linear.len()
    }

    /// `q_m`, the coefficients of `a_m^2`.
    pub fn quadratic(&self) -> &[f64] {
        &self.quadratic
    }

    /// `d_m = Re [H P]_mm`.
    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Objective value for an arbitrary (not necessarily normalized) `a`.
    pub fn value(&self, a: &[f64], sigma_n2: f64) -> f64 {
        let mut total = 0.0;
        for ((w, q), d) in a.iter().zip(&self.quadratic).zip(&self.linear) {
            total += q * w * w - 2.0 * d * w;
        }
        total + self.n_streams() as f64 * (1.0 + sigma_n2)
    }

    pub fn gradient(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(&self.quadratic)
            .zip(&self.linear)
            .map(|((w, q), d)| 2.0 * q * w - 2.0 * d)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_rayleigh;
    use crate::precoding::{build_precoder, mf_precoder, PrecoderKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn av(w: &[f64]) -> AllocationVector {
        AllocationVector::new(w.to_vec()).unwrap()
    }

    fn eye(n: usize) -> (ChannelMatrix, Precoder) {
        let h = ChannelMatrix::identity(n);
        let p = mf_precoder(&h).unwrap();
        (h, p)
    }

    #[test]
    fn silent_streams_leave_only_constants() {
        let (h, p) = eye(2);
        assert_eq!(mse_objective(&h, &p, &av(&[0.0, 0.0]), 1.0).unwrap(), 4.0);
    }

    #[test]
    fn perfect_single_stream_has_zero_error() {
        let (h, p) = eye(1);
        assert_eq!(mse_objective(&h, &p, &av(&[1.0]), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_at_zero_is_linear_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = sample_rayleigh(4, 4, &mut rng).unwrap();
        let p = mf_precoder(&h).unwrap();
        let hp = h.matrix() * p.matrix();
        let g = mse_gradient(&h, &p, &AllocationVector::zeros(4)).unwrap();
        for m in 0..4 {
            assert_eq!(g[m], -2.0 * hp[(m, m)].re);
        }
    }

    #[test]
    fn gradient_closed_form_identity() {
        for n in 1..=5 {
            let (h, p) = eye(n);
            let w = 1.0 / (n as f64).sqrt();
            let g = mse_gradient(&h, &p, &av(&vec![w; n])).unwrap();
            for gm in g {
                assert!((gm - (2.0 * w - 2.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadratic_model_agrees_with_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for kind in PrecoderKind::ALL {
            let h = sample_rayleigh(4, 4, &mut rng).unwrap();
            let p = build_precoder(kind, &h, 1.0, 10.0).unwrap();
            let a = av(&[0.3, -0.2, 0.9, 0.1]);
            let direct = mse_objective(&h, &p, &a, 0.7).unwrap();
            let model = QuadraticModel::new(&h, &p).unwrap().value(a.as_slice(), 0.7);
            assert!((direct - model).abs() < 1e-12 * direct.abs().max(1.0), "{direct} vs {model}");
        }
    }

    #[test]
    fn robust_reduces_to_plain_without_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = sample_rayleigh(4, 4, &mut rng).unwrap();
        let p = mf_precoder(&h).unwrap();
        let a = av(&[0.5, 0.5, -0.5, 0.5]);
        let xi = ErrorCovariance::homogeneous(4, 4, 0.0).unwrap();
        assert_eq!(robust_gradient(&h, &p, &xi, &a).unwrap(), mse_gradient(&h, &p, &a).unwrap());
        assert_eq!(robust_objective(&h, &p, &xi, &a, 1.0).unwrap(), mse_objective(&h, &p, &a, 1.0).unwrap());
    }

    #[test]
    fn robust_term_with_orthonormal_columns() {
        let (h, p) = eye(3);
        let c = 0.25;
        let xi = ErrorCovariance::new(vec![c; 3]).unwrap();
        let a = av(&[0.2, -0.4, 0.7]);
        let plain = mse_gradient(&h, &p, &a).unwrap();
        let robust = robust_gradient(&h, &p, &xi, &a).unwrap();
        for m in 0..3 {
            assert!((robust[m] - plain[m] - 2.0 * c * a[m]).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (h, p) = eye(2);
        assert!(matches!(mse_objective(&h, &p, &av(&[1.0]), 1.0), Err(Error::Dimension { .. })));
        assert!(mse_gradient(&h, &p, &av(&[1.0, 0.0, 0.0])).is_err());
        let (h3, _) = eye(3);
        assert!(mse_gradient(&h3, &p, &av(&[1.0, 0.0])).is_err());
    }
}
