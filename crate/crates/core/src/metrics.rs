//! Achievable sum rate with interference treated as noise, mean square
//! deviation of allocator trajectories, and ergodic averages.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    exhaustive_search, mapa, random_allocation, rmapa, upa, AdaptiveParams, AllocationVector, AllocatorTrace,
    SearchObjective,
};
use crate::channel::{ChannelMatrix, ChannelSet, CMatrix};
use crate::error::{Error, Result};
use crate::parallel::map_trials;
use crate::precoding::{build_precoder, Precoder, PrecoderKind};
use crate::rng::{stream, Purpose};
use crate::system::SystemConfig;

/// `10 log10(e_tr / sigma_n2)`.
pub fn snr_db(e_tr: f64, sigma_n2: f64) -> f64 {
    10.0 * (e_tr / sigma_n2).log10()
}

/// Total transmit power for an SNR in dB at noise variance `sigma_n2`.
pub fn e_tr_from_snr_db(snr_db: f64, sigma_n2: f64) -> f64 {
    sigma_n2 * 10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    /// Bits per channel use.
    pub sum_rate: f64,
    pub per_user_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdCurve {
    pub values: Vec<f64>,
    pub trials_averaged: usize,
}

/// Per-user Gaussian rates for a fixed channel and precoder, reusable across
/// many allocation vectors.
///
/// User `k` sees `G = H_k P diag(a) sqrt(E_tr)`. Its own streams (the
/// columns indexed by its antennas) form the signal covariance `S_k`, all
/// other columns plus `sigma_n2 I` form `Z_k`, and
/// `rate_k = log2 det(Z_k + S_k) - log2 det(Z_k)`.
#[derive(Debug, Clone)]
pub struct SumRateEvaluator {
    users: Vec<std::ops::Range<usize>>,
    n_streams: usize,
    sigma_n2: f64,
    // per user, per stream: g g^H with g the stream's column of H_k P, row-major
    outer: Vec<Vec<Complex64>>,
    with_signal: Vec<Complex64>,
    interference: Vec<Complex64>,
}

impl SumRateEvaluator {
    pub fn new(h: &ChannelMatrix, p: &Precoder, sigma_n2: f64) -> Result<Self> {
        if h.n_tx() != p.n_tx() || h.n_rx() != p.n_streams() {
            return Err(Error::dim(
                "channel vs precoder",
                format!("{}x{}", p.n_streams(), p.n_tx()),
                format!("{}x{}", h.n_rx(), h.n_tx()),
            ));
        }
        if !(sigma_n2 > 0.0) {
            return Err(Error::Domain(format!("noise variance must be > 0, got {sigma_n2}")));
        }
        let hp: CMatrix = h.matrix() * p.matrix();
        let n_streams = p.n_streams();
        let users: Vec<_> = (0..h.partition().len()).map(|k| h.user_rows(k)).collect();
        let outer = users
            .iter()
            .map(|rows| {
                let nk = rows.len();
                let mut buf = Vec::with_capacity(n_streams * nk * nk);
                for j in 0..n_streams {
                    for r in rows.clone() {
                        for c in rows.clone() {
                            buf.push(hp[(r, j)] * hp[(c, j)].conj());
                        }
                    }
                }
                buf
            })
            .collect();
        let max_nk = users.iter().map(|r| r.len()).max().unwrap_or(0);
        Ok(Self {
            users,
            n_streams,
            sigma_n2,
            outer,
            with_signal: vec![Complex64::new(0.0, 0.0); max_nk * max_nk],
            interference: vec![Complex64::new(0.0, 0.0); max_nk * max_nk],
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Writes the rate of every user into `out`.
    pub fn user_rates(&mut self, a: &[f64], e_tr: f64, out: &mut [f64]) {
        debug_assert_eq!(a.len(), self.n_streams);
        for (k, rows) in self.users.iter().enumerate() {
            let nk = rows.len();
            let size = nk * nk;
            let z = &mut self.interference[..size];
            let zs = &mut self.with_signal[..size];
            z.fill(Complex64::new(0.0, 0.0));
            zs.fill(Complex64::new(0.0, 0.0));
            for i in 0..nk {
                z[i * nk + i] = Complex64::new(self.sigma_n2, 0.0);
                zs[i * nk + i] = Complex64::new(self.sigma_n2, 0.0);
            }
            let outer = &self.outer[k];
            for j in 0..self.n_streams {
                let w = e_tr * a[j] * a[j];
                if w == 0.0 {
                    continue;
                }
                let block = &outer[j * size..(j + 1) * size];
                let own = rows.contains(&j);
                for (idx, v) in block.iter().enumerate() {
                    zs[idx] += v * w;
                    if !own {
                        z[idx] += v * w;
                    }
                }
            }
            let total = hermitian_logdet(zs, nk);
            let noise = hermitian_logdet(z, nk);
            out[k] = ((total - noise) / std::f64::consts::LN_2).max(0.0);
        }
    }

    pub fn sum_rate(&mut self, a: &[f64], e_tr: f64) -> f64 {
        let mut rates = [0.0; 16];
        if self.users.len() <= rates.len() {
            let out = &mut rates[..self.users.len()];
            self.user_rates(a, e_tr, out);
            out.iter().sum()
        } else {
            let mut out = vec![0.0; self.users.len()];
            self.user_rates(a, e_tr, &mut out);
            out.iter().sum()
        }
    }
}

/// Natural-log determinant of a Hermitian positive definite matrix stored
/// row-major in `m`, by in-place Cholesky. Returns `-inf` if the matrix is
/// not positive definite.
fn hermitian_logdet(m: &mut [Complex64], n: usize) -> f64 {
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = m[j * n + j].re;
        for k in 0..j {
            d -= m[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return f64::NEG_INFINITY;
        }
        let l = d.sqrt();
        m[j * n + j] = Complex64::new(l, 0.0);
        logdet += 2.0 * l.ln();
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[j * n + k].conj();
            }
            m[i * n + j] = s / l;
        }
    }
    logdet
}

/// Interference-as-noise sum rate on `h_true` for precoder `p` and
/// allocation `a` at total power `e_tr`. Evaluate on the true channel even
/// when `p` and `a` were computed from an estimate.
pub fn sum_rate(h_true: &ChannelMatrix, p: &Precoder, a: &AllocationVector, sigma_n2: f64, e_tr: f64) -> Result<RatePoint> {
    if a.len() != p.n_streams() {
        return Err(Error::dim("allocation length vs precoder columns", p.n_streams(), a.len()));
    }
    if !(e_tr > 0.0) {
        return Err(Error::Domain(format!("total power must be > 0, got {e_tr}")));
    }
    let mut evaluator = SumRateEvaluator::new(h_true, p, sigma_n2)?;
    let mut per_user = vec![0.0; evaluator.n_users()];
    evaluator.user_rates(a.as_slice(), e_tr, &mut per_user);
    Ok(RatePoint {
        snr_db: snr_db(e_tr, sigma_n2),
        sum_rate: per_user.iter().sum(),
        per_user_rates: per_user,
    })
}

/// `|(|a[i]| - |a_opt|)|^2` for every iterate of `trace`.
pub fn squared_deviation(trace: &AllocatorTrace, a_opt: &AllocationVector) -> Result<Vec<f64>> {
    trace
        .iterates
        .iter()
        .map(|a| {
            if a.len() != a_opt.len() {
                return Err(Error::dim("iterate length vs optimum", a_opt.len(), a.len()));
            }
            Ok(a.as_slice()
                .iter()
                .zip(a_opt.as_slice())
                .map(|(x, y)| (x.abs() - y.abs()).powi(2))
                .sum())
        })
        .collect()
}

/// Mean square deviation of several traces from a common optimum.
pub fn msd(traces: &[AllocatorTrace], a_opt: &AllocationVector) -> Result<MsdCurve> {
    let Some(first) = traces.first() else {
        return Err(Error::Domain("msd needs at least one trace".into()));
    };
    let len = first.len();
    let mut values = vec![0.0; len];
    for trace in traces {
        if trace.len() != len {
            return Err(Error::dim("trace length", len, trace.len()));
        }
        for (acc, d) in values.iter_mut().zip(squared_deviation(trace, a_opt)?) {
            *acc += d;
        }
    }
    let n = traces.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(MsdCurve {
        values,
        trials_averaged: traces.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorKind {
    Es,
    Rmapa,
    Mapa,
    Upa,
    Random,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 5] = [
        AllocatorKind::Es,
        AllocatorKind::Rmapa,
        AllocatorKind::Mapa,
        AllocatorKind::Upa,
        AllocatorKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorKind::Es => "es",
            AllocatorKind::Rmapa => "rmapa",
            AllocatorKind::Mapa => "mapa",
            AllocatorKind::Upa => "upa",
            AllocatorKind::Random => "random",
        }
    }

    /// Whether the allocation changes with the SNR for a fixed precoder.
    pub fn depends_on_snr(self) -> bool {
        matches!(self, AllocatorKind::Es)
    }
}

impl std::fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Runs one allocator on the transmitter's view of `set` (the estimate).
/// `trial` selects the random stream of the random allocator; ES maximizes
/// the sum rate on the estimate at power `e_tr`.
pub fn allocate(
    kind: AllocatorKind,
    config: &SystemConfig,
    set: &ChannelSet,
    p: &Precoder,
    e_tr: f64,
    trial: u64,
) -> Result<AllocationVector> {
    let params = AdaptiveParams {
        mu: config.step_size,
        iters: config.iterations,
        sigma_n2: config.sigma_n2,
    };
    let last = |trace: AllocatorTrace| trace.iterates.last().cloned().expect("iterations >= 1");
    match kind {
        AllocatorKind::Es => Ok(exhaustive_search(
            set.h_est(),
            p,
            config.es_grid_step,
            SearchObjective::SumRate {
                sigma_n2: config.sigma_n2,
                e_tr,
            },
        )?
        .allocation),
        AllocatorKind::Mapa => mapa(set.h_est(), p, &params, None).map(last),
        AllocatorKind::Rmapa => rmapa(set.h_est(), p, &config.error_covariance()?, &params, None).map(last),
        AllocatorKind::Upa => Ok(upa(p.n_streams())),
        AllocatorKind::Random => Ok(random_allocation(
            p.n_streams(),
            &mut stream(config.seed, trial, Purpose::RandomAllocation),
        )),
    }
}

/// Ergodic rates of one allocator/precoder pair over a set of SNR points.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicRates {
    pub points: Vec<RatePoint>,
    /// Trials that returned an error and were left out of the averages.
    pub failures: usize,
}

/// Averages [`sum_rate`] over `n_channels` independent channel sets drawn
/// from `config`. Precoder and allocator see the estimate, the rate is
/// measured on the true channel, and every SNR point reuses the same
/// channels. `sigma_n2` stays fixed and the SNR moves `E_tr`.
pub fn ergodic_sum_rate(
    config: &SystemConfig,
    allocator: AllocatorKind,
    precoder: PrecoderKind,
    snr_grid_db: &[f64],
    n_channels: usize,
) -> Result<ErgodicRates> {
    config.validate()?;
    if n_channels == 0 {
        return Err(Error::Domain("need at least one channel".into()));
    }
    let per_trial = map_trials(n_channels, |trial| -> Result<Vec<Vec<f64>>> {
        let set = config.channel_set(trial)?;
        snr_grid_db
            .iter()
            .map(|&snr| {
                let e_tr = e_tr_from_snr_db(snr, config.sigma_n2);
                let p = build_precoder(precoder, set.h_est(), config.sigma_n2, e_tr)?;
                let a = allocate(allocator, config, &set, &p, e_tr, trial)?;
                Ok(sum_rate(set.h_true(), &p, &a, config.sigma_n2, e_tr)?.per_user_rates)
            })
            .collect()
    });

    let n_users = config.users.len();
    let mut sums = vec![vec![0.0; n_users]; snr_grid_db.len()];
    let mut ok = 0usize;
    let mut failures = 0usize;
    for outcome in per_trial {
        match outcome {
            Ok(rates) => {
                ok += 1;
                for (acc, r) in sums.iter_mut().zip(rates) {
                    acc.iter_mut().zip(r).for_each(|(s, v)| *s += v);
                }
            }
            Err(_) => failures += 1,
        }
    }
    let points = snr_grid_db
        .iter()
        .zip(sums)
        .map(|(&snr, acc)| {
            let per_user: Vec<f64> = acc.iter().map(|s| if ok > 0 { s / ok as f64 } else { f64::NAN }).collect();
            RatePoint {
                snr_db: snr,
                sum_rate: per_user.iter().sum(),
                per_user_rates: per_user,
            }
        })
        .collect();
    Ok(ErgodicRates { points, failures })
}
