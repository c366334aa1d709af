//! Lagrangian dual of the leader's problem.
//!
//! Relaxing the budget with a multiplier `mu >= 0` gives
//!
//! ```text
//! L'(P1, mu) = sum_f ln(1 + P1^f / (N_1^f + alpha^f g^f(P1))) + mu (P1max - sum_f P1^f)
//! D'(mu)     = max_{P1 >= 0} L'(P1, mu)
//! ```
//!
//! `D'(mu)` upper-bounds the leader's optimum for every `mu`, and the total
//! power of its maximizer is non-increasing in `mu`, so `mu*` is found by
//! bisection on that total. The inner maximization is exact over a grid, so
//! only small `N` is practical.

use super::exhaustive::grid_units;
use super::{check_leader_power, LeaderProblem, ResponseOracle};
use crate::error::SolverError;

/// `L'(p1, mu)` in nats. The budget is deliberately not enforced.
pub fn lagrangian_value(p1: &[f64], mu: f64, prob: &LeaderProblem) -> Result<f64, SolverError> {
    prob.validate()?;
    check_leader_power(prob, p1)?;
    if !(mu >= 0.0) {
        return Err(SolverError::Config(format!("dual variable {mu} must be non-negative")));
    }
    let rate = ResponseOracle::new(prob, false).leader_rate_nats(p1)?;
    Ok(rate + mu * (prob.leader_budget() - p1.iter().sum::<f64>()))
}

/// `D'(mu)` and the total power of its maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub mu: f64,
    pub value_nats: f64,
    pub total_power: f64,
}

/// The grid-relaxed dual function of one leader problem.
///
/// Every grid allocation in the per-bin box `[0, dual_box_factor * P1max]`
/// is evaluated once; only the best rate for each total power is kept,
/// since `L'` depends on the allocation through `(rate, total)` alone.
#[derive(Debug, Clone)]
pub struct DualGrid {
    step: f64,
    budget: f64,
    /// `best_rate[s]`: best leader ln-rate among grid points using `s` units.
    best_rate: Vec<f64>,
    pub evaluations: u64,
}

impl DualGrid {
    pub fn build(prob: &LeaderProblem, grid_step: f64) -> Result<Self, SolverError> {
        prob.validate()?;
        if !(grid_step > 0.0) {
            return Err(SolverError::Config(format!("grid step {grid_step} must be positive")));
        }
        let n = prob.num_bins();
        let box_units = grid_units(prob.dual_box_factor * prob.leader_budget(), grid_step);
        let required = ((box_units + 1) as f64).powi(n as i32);
        if required > prob.eval_cap {
            return Err(SolverError::EvaluationCap {
                required,
                cap: prob.eval_cap,
            });
        }
        let mut best_rate = vec![f64::NEG_INFINITY; n * box_units + 1];
        let mut oracle = ResponseOracle::new(prob, false);
        let mut idx = vec![0usize; n];
        let mut p = vec![0.0; n];
        let mut used = 0usize;
        'scan: loop {
            let rate = oracle.leader_rate_nats(&p)?;
            if rate > best_rate[used] {
                best_rate[used] = rate;
            }
            let mut d = n;
            loop {
                if d == 0 {
                    break 'scan;
                }
                d -= 1;
                if idx[d] < box_units {
                    idx[d] += 1;
                    used += 1;
                    p[d] = idx[d] as f64 * grid_step;
                    break;
                }
                used -= idx[d];
                idx[d] = 0;
                p[d] = 0.0;
            }
        }
        Ok(DualGrid {
            step: grid_step,
            budget: prob.leader_budget(),
            best_rate,
            evaluations: oracle.evaluations,
        })
    }

    /// `D'(mu)`. Among maximizers the largest total power is reported.
    pub fn evaluate(&self, mu: f64) -> DualPoint {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (s, &rate) in self.best_rate.iter().enumerate() {
            let value = rate - mu * (s as f64 * self.step);
            if value >= best.0 {
                best = (value, s);
            }
        }
        DualPoint {
            mu,
            value_nats: best.0 + mu * self.budget,
            total_power: best.1 as f64 * self.step,
        }
    }

    /// Best grid ln-rate with total power within the budget. This is the
    /// exhaustive optimum restricted to the same grid.
    pub fn primal_optimum_nats(&self) -> f64 {
        let units = grid_units(self.budget, self.step);
        self.best_rate[..=units.min(self.best_rate.len() - 1)]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualBound {
    pub mu_star: f64,
    /// `D'(mu*)` in bits.
    pub dual_value_bits: f64,
    /// Total power of the maximizer at `mu*`.
    pub total_power: f64,
    pub iterations: usize,
}

/// Minimizes the grid-relaxed dual function by bisection on `mu`.
pub fn dual_bound(prob: &LeaderProblem, grid_step: f64) -> Result<DualBound, SolverError> {
    let grid = DualGrid::build(prob, grid_step)?;
    let budget = prob.leader_budget();
    let (mut lo, mut hi) = prob.mu_bracket.unwrap_or((0.0, prob.default_mu_max()));
    let mut best = grid.evaluate(lo).min_by_value(grid.evaluate(hi));
    let mut expansions = 0;
    loop {
        let at_hi = grid.evaluate(hi);
        best = best.min_by_value(at_hi);
        if at_hi.total_power <= budget {
            break;
        }
        if expansions == prob.bracket_expansions {
            return Err(SolverError::DualBracket {
                mu: hi,
                total: at_hi.total_power,
                budget,
            });
        }
        lo = hi;
        hi *= 2.0;
        expansions += 1;
    }
    let mut iterations = 0;
    while hi - lo > 1e-12 * hi && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let point = grid.evaluate(mid);
        best = best.min_by_value(point);
        if point.total_power > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DualBound {
        mu_star: best.mu,
        dual_value_bits: crate::nats_to_bits(best.value_nats),
        total_power: best.total_power,
        iterations,
    })
}

impl DualPoint {
    fn min_by_value(self, other: DualPoint) -> DualPoint {
        if other.value_nats < self.value_nats {
            other
        } else {
            self
        }
    }
}
