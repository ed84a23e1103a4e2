//! Independent checks of the allocators, runnable on any system config.
//!
//! Each check recomputes a quantity by a route that shares no code with the
//! implementation under test: central finite differences of the trace-form
//! objective for the gradients, a grid search for the optimum, simulated
//! transmissions for the expected MSE.

use std::fmt;

use serde::Serialize;

use crate::allocation::{
    exhaustive_search, mapa, mse_gradient, mse_objective, random_allocation, rmapa, robust_gradient,
    robust_objective, upa, AdaptiveParams, NORM_TOLERANCE, AllocationVector, ErrorCovariance, SearchObjective,
};
use crate::channel::ChannelMatrix;
use crate::error::Result;
use crate::precoding::{build_precoder, Precoder, PrecoderKind};
use crate::rng::{stream, Purpose};
use crate::signal::{receive, transmit, NoiseModel, SymbolVector};
use crate::system::SystemConfig;

/// Step of the central differences.
pub const FD_STEP: f64 = 1e-6;
/// Largest accepted `max |g - g_fd| / max |g|`.
pub const FD_TOLERANCE: f64 = 1e-5;
/// Largest accepted excess of converged M-APA over the grid optimum.
pub const ES_GAP_TOLERANCE: f64 = 1e-3;
/// Grid step of the reference search.
pub const ES_REFERENCE_STEP: f64 = 0.005;
/// Iterations treated as "converged" for M-APA at the configured step size.
pub const CONVERGED_ITERATIONS: usize = 20_000;

/// Outcome of one family of checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    /// Largest observed error measure over all cases.
    pub worst: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: 0,
            total: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, error: f64, ok: bool) {
        self.total += 1;
        if ok {
            self.passed += 1;
        }
        if error.is_nan() || error > self.worst {
            self.worst = error;
        }
    }

    /// Records `error` and passes it when `error < tolerance`.
    fn record_below(&mut self, error: f64) {
        self.record(error, error < self.tolerance);
    }

    pub fn all_passed(&self) -> bool {
        self.total > 0 && self.passed == self.total
    }
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.all_passed() { "PASS" } else { "FAIL" };
        let tolerance = if self.tolerance == 0.0 {
            "exact".to_string()
        } else {
            format!("tolerance {:.0e}", self.tolerance)
        };
        write!(
            f,
            "{verdict} {:<16} {:>5}/{:<5} worst {:.3e} ({tolerance})",
            self.name, self.passed, self.total, self.worst
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.all_passed()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(OracleCheck::all_passed)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            writeln!(f, "{check}")?;
        }
        write!(f, "{}/{} checks passed", self.passed(), self.checks.len())
    }
}

/// Channel of oracle instance `i`: the config's dimensions and seed, trial
/// stream `i`.
fn instance(system: &SystemConfig, i: u64) -> Result<ChannelMatrix> {
    Ok(system.channel_set(i)?.h_true().clone())
}

fn random_point(system: &SystemConfig, i: u64, n: usize) -> AllocationVector {
    random_allocation(n, &mut stream(system.seed, i, Purpose::RandomAllocation))
}

/// Central finite-difference gradient of `f` at `a`.
pub fn finite_difference<F: Fn(&AllocationVector) -> Result<f64>>(f: F, a: &AllocationVector, step: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(a.len());
    for m in 0..a.len() {
        let mut plus = a.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[m] += step;
        minus[m] -= step;
        let fp = f(&AllocationVector::new(plus)?)?;
        let fm = f(&AllocationVector::new(minus)?)?;
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

/// `max_m |g_m - fd_m| / max_m |g_m|`.
pub fn relative_gradient_error(g: &[f64], fd: &[f64]) -> f64 {
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    g.iter().zip(fd).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Analytic gradients against finite differences on `instances` channels,
/// for every precoder. The robust check uses `Xi` from the config, or
/// `sigma_e2 = 0.1` when the config has perfect CSIT.
pub fn gradient_checks(system: &SystemConfig, precoders: &[PrecoderKind], instances: usize) -> Result<(OracleCheck, OracleCheck)> {
    let mut plain = OracleCheck::new("mse_gradient", FD_TOLERANCE);
    let mut robust = OracleCheck::new("robust_gradient", FD_TOLERANCE);
    let xi = if system.sigma_e2 > 0.0 {
        system.error_covariance()?
    } else {
        ErrorCovariance::homogeneous(system.n_tx, system.n_rx(), 0.1)?
    };
    for i in 0..instances as u64 {
        let h = instance(system, i)?;
        let a = random_point(system, i, system.n_rx());
        for &kind in precoders {
            let p = build_precoder(kind, &h, system.sigma_n2, system.e_tr)?;
            let g = mse_gradient(&h, &p, &a)?;
            let fd = finite_difference(|x| mse_objective(&h, &p, x, system.sigma_n2), &a, FD_STEP)?;
            plain.record_below(relative_gradient_error(&g, &fd));

            let g = robust_gradient(&h, &p, &xi, &a)?;
            let fd = finite_difference(|x| robust_objective(&h, &p, &xi, x, system.sigma_n2), &a, FD_STEP)?;
            robust.record_below(relative_gradient_error(&g, &fd));
        }
    }
    Ok((plain, robust))
}

/// M-APA run to convergence from zero.
pub fn converged_mapa(h: &ChannelMatrix, p: &Precoder, mu: f64, sigma_n2: f64) -> Result<AllocationVector> {
    let params = AdaptiveParams {
        mu,
        iters: CONVERGED_ITERATIONS,
        sigma_n2,
    };
    let trace = mapa(h, p, &params, None)?;
    Ok(trace.iterates.last().expect("iterations >= 1").clone())
}

/// Converged M-APA against the grid-search MSE optimum on two-stream
/// instances (two single-antenna users, the config's `n_tx`). The error is
/// the excess `f(M-APA) - f(ES)`; a negative excess means M-APA landed
/// between grid points and passes.
pub fn es_check(system: &SystemConfig, precoders: &[PrecoderKind], instances: usize) -> Result<OracleCheck> {
    let two = SystemConfig {
        users: vec![1, 1],
        sigma_e2: 0.0,
        ..system.clone()
    };
    let mut check = OracleCheck::new("mapa_vs_es", ES_GAP_TOLERANCE);
    for i in 0..instances as u64 {
        let h = instance(&two, i)?;
        for &kind in precoders {
            let p = build_precoder(kind, &h, two.sigma_n2, two.e_tr)?;
            let es = exhaustive_search(&h, &p, ES_REFERENCE_STEP, SearchObjective::Mse { sigma_n2: two.sigma_n2 })?;
            let a = converged_mapa(&h, &p, two.step_size, two.sigma_n2)?;
            let excess = mse_objective(&h, &p, &a, two.sigma_n2)? - es.value;
            check.record(excess.max(0.0), excess < ES_GAP_TOLERANCE);
        }
    }
    Ok(check)
}

/// RM-APA with zero error covariance against M-APA, iterate by iterate.
/// The error is the largest absolute iterate difference and must be zero.
pub fn robust_reduction_check(system: &SystemConfig, precoders: &[PrecoderKind], instances: usize) -> Result<OracleCheck> {
    let mut check = OracleCheck::new("rmapa_zero_xi", 0.0);
    let zero = ErrorCovariance::homogeneous(system.n_tx, system.n_rx(), 0.0)?;
    let params = AdaptiveParams {
        mu: system.step_size,
        iters: system.iterations,
        sigma_n2: system.sigma_n2,
    };
    for i in 0..instances as u64 {
        let set = system.channel_set(i)?;
        for &kind in precoders {
            let p = build_precoder(kind, set.h_est(), system.sigma_n2, system.e_tr)?;
            let plain = mapa(set.h_est(), &p, &params, None)?;
            let robust = rmapa(set.h_est(), &p, &zero, &params, None)?;
            let diff = plain
                .iterates
                .iter()
                .zip(&robust.iterates)
                .flat_map(|(x, y)| x.as_slice().iter().zip(y.as_slice()).map(|(u, v)| (u - v).abs()))
                .fold(0.0f64, f64::max);
            check.record(diff, plain.iterates == robust.iterates);
        }
    }
    Ok(check)
}

/// Every M-APA and RM-APA iterate and every UPA, random and grid-search
/// output lies on the unit-power sphere.
pub fn norm_check(system: &SystemConfig, precoders: &[PrecoderKind], instances: usize) -> Result<OracleCheck> {
    let mut check = OracleCheck::new("unit_power", NORM_TOLERANCE);
    let xi = system.error_covariance()?;
    let params = AdaptiveParams {
        mu: system.step_size,
        iters: system.iterations,
        sigma_n2: system.sigma_n2,
    };
    let two = SystemConfig {
        users: vec![1, 1],
        ..system.clone()
    };
    for i in 0..instances as u64 {
        let set = system.channel_set(i)?;
        let n = system.n_rx();
        let mut outputs = vec![upa(n), random_point(system, i, n)];
        for &kind in precoders {
            let p = build_precoder(kind, set.h_est(), system.sigma_n2, system.e_tr)?;
            outputs.extend(mapa(set.h_est(), &p, &params, None)?.iterates);
            outputs.extend(rmapa(set.h_est(), &p, &xi, &params, None)?.iterates);
            let h2 = instance(&two, i)?;
            let p2 = build_precoder(kind, &h2, two.sigma_n2, two.e_tr)?;
            let objective = SearchObjective::SumRate {
                sigma_n2: two.sigma_n2,
                e_tr: two.e_tr,
            };
            outputs.push(exhaustive_search(&h2, &p2, 0.05, objective)?.allocation);
        }
        for a in outputs {
            check.record_below((a.norm_sqr() - 1.0).abs());
        }
    }
    Ok(check)
}

/// `mse_objective` against the sample mean of `|s - y|^2` over `draws`
/// simulated transmissions `y = H P diag(a) s + n`. Returns the relative
/// error `|mean - f| / f`.
pub fn expectation_error(h: &ChannelMatrix, p: &Precoder, a: &AllocationVector, sigma_n2: f64, draws: usize, seed: u64) -> Result<f64> {
    let noise = NoiseModel::new(sigma_n2)?;
    let mut symbols = stream(seed, 0, Purpose::Symbols);
    let mut noise_rng = stream(seed, 0, Purpose::Noise);
    let mut total = 0.0;
    for _ in 0..draws {
        let s = SymbolVector::gaussian(h.n_rx(), &mut symbols);
        let x = transmit(p, a, &s)?;
        let y = receive(h, &x, &noise, &mut noise_rng)?;
        total += (s.as_vector() - y).norm_squared();
    }
    let mean = total / draws as f64;
    let exact = mse_objective(h, p, a, sigma_n2)?;
    Ok((mean - exact).abs() / exact)
}

/// Expected-MSE check on `instances` channels with the first precoder.
pub fn expectation_check(system: &SystemConfig, precoder: PrecoderKind, instances: usize, draws: usize, tolerance: f64) -> Result<OracleCheck> {
    let mut check = OracleCheck::new("mse_expectation", tolerance);
    for i in 0..instances as u64 {
        let h = instance(system, i)?;
        let p = build_precoder(precoder, &h, system.sigma_n2, system.e_tr)?;
        let a = random_point(system, i, system.n_rx());
        check.record_below(expectation_error(&h, &p, &a, system.sigma_n2, draws, system.seed.wrapping_add(i))?);
    }
    Ok(check)
}

/// Instance counts of [`run_oracles`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSizes {
    pub gradient: usize,
    pub search: usize,
    pub reduction: usize,
    pub norm: usize,
    pub expectation: usize,
    pub expectation_draws: usize,
}

impl Default for OracleSizes {
    fn default() -> Self {
        Self {
            gradient: 100,
            search: 50,
            reduction: 20,
            norm: 10,
            expectation: 2,
            expectation_draws: 100_000,
        }
    }
}

/// The whole suite on `system` with `precoders`.
pub fn run_oracles(system: &SystemConfig, precoders: &[PrecoderKind], sizes: OracleSizes) -> Result<OracleReport> {
    system.validate()?;
    let (plain, robust) = gradient_checks(system, precoders, sizes.gradient)?;
    let mut checks = vec![plain, robust];
    checks.push(es_check(system, precoders, sizes.search)?);
    checks.push(robust_reduction_check(system, precoders, sizes.reduction)?);
    checks.push(norm_check(system, precoders, sizes.norm)?);
    if sizes.expectation > 0 {
        // 1e5 draws put the sample mean within about 1% of its expectation
        let tolerance = 5.0 / (sizes.expectation_draws as f64).sqrt();
        checks.push(expectation_check(system, precoders[0], sizes.expectation, sizes.expectation_draws, tolerance)?);
    }
    Ok(OracleReport { checks })
}
