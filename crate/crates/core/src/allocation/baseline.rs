use rand::Rng;

use super::AllocationVector;

/// Uniform power allocation, `a_m = 1 / sqrt(N_r)`.
pub fn upa(n_r: usize) -> AllocationVector {
    assert!(n_r >= 1, "upa needs at least one stream");
    AllocationVector(vec![1.0 / (n_r as f64).sqrt(); n_r])
}

/// Independent uniform amplitudes on `[0, 1)`, rescaled to unit power.
pub fn random_allocation<R: Rng + ?Sized>(n_r: usize, rng: &mut R) -> AllocationVector {
    assert!(n_r >= 1, "random allocation needs at least one stream");
    loop {
        let draw: Vec<f64> = (0..n_r).map(|_| rng.random::<f64>()).collect();
        let norm_sqr: f64 = draw.iter().map(|w| w * w).sum();
        if norm_sqr > 0.0 {
            let norm = norm_sqr.sqrt();
            return AllocationVector(draw.into_iter().map(|w| w / norm).collect());
        }
    }
}
