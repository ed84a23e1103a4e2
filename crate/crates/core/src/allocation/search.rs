//! Exhaustive grid search over the nonnegative orthant of the unit sphere.
//!
//! `a_1 .. a_{N-1}` range over `{0, step, 2 step, ...}` and the last weight
//! takes whatever power is left, `a_N = sqrt(1 - sum a_m^2)`. Only the
//! nonnegative orthant is searched since stream power is `a_m^2`.

use super::{AllocationVector, QuadraticModel};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::metrics::SumRateEvaluator;
use crate::precoding::Precoder;

/// Refuse grids with more points than this.
pub const MAX_GRID_POINTS: u128 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchObjective {
    /// Minimize the expected squared error.
    Mse { sigma_n2: f64 },
    /// Maximize the interference-as-noise sum rate at total power `e_tr`.
    SumRate { sigma_n2: f64, e_tr: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub allocation: AllocationVector,
    /// MSE or sum rate at `allocation`, depending on the objective.
    pub value: f64,
    pub points_visited: u64,
}

fn grid_levels(step: f64) -> usize {
    (1.0 / step + 1e-9).floor() as usize
}

/// Number of grid points an `n_r`-stream search at `step` visits. Counted
/// exactly when that is cheap, otherwise estimated from the orthant volume.
pub fn grid_point_count(n_r: usize, step: f64) -> u128 {
    if n_r <= 1 {
        return 1;
    }
    let levels = grid_levels(step);
    let free = n_r - 1;
    let crude = (levels as u128 + 1).saturating_pow(free as u32);
    if crude <= 1_000_000 {
        return count_exact(free, levels, step);
    }
    // volume of the positive orthant of the unit (free)-ball, in grid cells
    let d = free as f64;
    let ball = std::f64::consts::PI.powf(d / 2.0) / gamma_half_int(free + 2);
    let estimate = ball / 2f64.powi(free as i32) * (1.0 / step).powi(free as i32);
    estimate.ceil() as u128
}

fn count_exact(free: usize, levels: usize, step: f64) -> u128 {
    fn rec(depth: usize, remaining: f64, levels: usize, step: f64) -> u128 {
        if depth == 0 {
            return 1;
        }
        let mut total = 0;
        for k in 0..=levels {
            let w = k as f64 * step;
            let rest = remaining - w * w;
            if rest < -1e-12 {
                break;
            }
            total += rec(depth - 1, rest, levels, step);
        }
        total
    }
    rec(free, 1.0, levels, step)
}

// Gamma(n / 2)
fn gamma_half_int(n: usize) -> f64 {
    if n == 1 {
        std::f64::consts::PI.sqrt()
    } else if n == 2 {
        1.0
    } else {
        (n as f64 / 2.0 - 1.0) * gamma_half_int(n - 2)
    }
}

/// Grid-search optimum of `objective` for channel `h` and precoder `p`.
pub fn exhaustive_search(h: &ChannelMatrix, p: &Precoder, grid_step: f64, objective: SearchObjective) -> Result<SearchResult> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Domain(format!("grid step must lie in (0, 1], got {grid_step}")));
    }
    let n = p.n_streams();
    let points = grid_point_count(n, grid_step);
    if points > MAX_GRID_POINTS {
        return Err(Error::InfeasibleSearch {
            points,
            limit: MAX_GRID_POINTS,
        });
    }
    let levels = grid_levels(grid_step);
    match objective {
        SearchObjective::Mse { sigma_n2 } => {
            let model = QuadraticModel::new(h, p)?;
            let mut eval = |a: &[f64]| -model.value(a, sigma_n2);
            let (best, score, visited) = enumerate(n, levels, grid_step, &mut eval);
            Ok(SearchResult {
                allocation: AllocationVector::new(best)?,
                value: -score,
                points_visited: visited,
            })
        }
        SearchObjective::SumRate { sigma_n2, e_tr } => {
            let mut evaluator = SumRateEvaluator::new(h, p, sigma_n2)?;
            let mut eval = |a: &[f64]| evaluator.sum_rate(a, e_tr);
            let (best, score, visited) = enumerate(n, levels, grid_step, &mut eval);
            Ok(SearchResult {
                allocation: AllocationVector::new(best)?,
                value: score,
                points_visited: visited,
            })
        }
    }
}

/// Visits every grid point and keeps the one with the largest score. Ties
/// keep the first point in enumeration order.
fn enumerate(n: usize, levels: usize, step: f64, score: &mut dyn FnMut(&[f64]) -> f64) -> (Vec<f64>, f64, u64) {
    struct State<'a> {
        a: Vec<f64>,
        best: Vec<f64>,
        best_score: f64,
        visited: u64,
        levels: usize,
        step: f64,
        score: &'a mut dyn FnMut(&[f64]) -> f64,
    }

    fn rec(state: &mut State<'_>, depth: usize, remaining: f64) {
        let n = state.a.len();
        if depth == n - 1 {
            state.a[depth] = remaining.max(0.0).sqrt();
            let s = (state.score)(&state.a);
            state.visited += 1;
            if s > state.best_score {
                state.best_score = s;
                state.best.copy_from_slice(&state.a);
            }
            return;
        }
        for k in 0..=state.levels {
            let w = k as f64 * state.step;
            let rest = remaining - w * w;
            if rest < -1e-12 {
                break;
            }
            state.a[depth] = w;
            rec(state, depth + 1, rest);
        }
    }

    let mut state = State {
        a: vec![0.0; n],
        best: vec![0.0; n],
        best_score: f64::NEG_INFINITY,
        visited: 0,
        levels,
        step,
        score,
    };
    rec(&mut state, 0, 1.0);
    (state.best, state.best_score, state.visited)
}
