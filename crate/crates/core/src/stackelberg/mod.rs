//! The foresighted leader's problem.
//!
//! The leader picks its allocation knowing the followers will settle into
//! the Nash equilibrium of their sub-game. With one follower that response
//! is a single closed-form water-fill, so the bi-level program collapses to
//! one level:
//!
//! ```text
//! max_{P1}  sum_f log2(1 + P1^f / (N_1^f + alpha_21^f g_2^f(P1)))
//! s.t.      sum_f P1^f <= P1max,  P1^f >= 0
//! ```
//!
//! With several followers `g` is replaced by their numerically computed
//! sub-game equilibrium. The objective is non-convex; this module provides
//! an exhaustive grid oracle, a Lagrangian dual bound, the low-complexity
//! dual coordinate ascent, and the interference-free rate bound.

mod algorithm1;
mod dual;
mod exhaustive;

pub use algorithm1::{algorithm1_dual, algorithm1_dual_from};
pub use dual::{dual_bound, lagrangian_value, DualBound, DualGrid, DualPoint};
pub use exhaustive::{exhaustive_evaluations, exhaustive_stackelberg};

use serde::{Deserialize, Serialize};

use crate::channel::NormalizedChannel;
use crate::error::SolverError;
use crate::game::{follower_subgame_ne, iterate_in_place, GameConfig, IwScratch, UpdateSchedule, DEFAULT_IW_MAX_ITERS};
use crate::waterfill::{fill_closed_form, waterfill_closed_form, EffectiveNoise, PowerAllocation};

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderProblem {
    pub channel: NormalizedChannel,
    pub leader: usize,
    /// Budget of every user, leader included.
    pub budgets: Vec<f64>,
    /// Power granularity of grid searches.
    pub grid_step: f64,
    /// Initial dual interval; `(0, max_f 1/N_leader^f)` when `None`.
    pub mu_bracket: Option<(f64, f64)>,
    /// Dual bisection stops once `mu_max - mu_min <= mu_tolerance * mu_max`.
    pub mu_tolerance: f64,
    /// Per-sweep change that ends the coordinate ascent; `1e-6 * P1max`
    /// when `None`.
    pub coord_tolerance: Option<f64>,
    pub coord_max_sweeps: usize,
    pub dual_max_iters: usize,
    /// Refuse exhaustive searches needing more objective evaluations.
    pub eval_cap: f64,
    /// Per-bin box of the relaxed dual maximization, in multiples of P1max.
    pub dual_box_factor: f64,
    /// Doublings of `mu_max` allowed when the bracket does not hold.
    pub bracket_expansions: usize,
    pub follower_tolerance: Option<f64>,
    pub follower_max_iters: usize,
}

impl LeaderProblem {
    pub fn new(channel: NormalizedChannel, leader: usize, budgets: Vec<f64>, grid_step: f64) -> Self {
        LeaderProblem {
            channel,
            leader,
            budgets,
            grid_step,
            mu_bracket: None,
            mu_tolerance: 1e-4,
            coord_tolerance: None,
            coord_max_sweeps: 100,
            dual_max_iters: 64,
            eval_cap: 1e8,
            dual_box_factor: 2.0,
            bracket_expansions: 32,
            follower_tolerance: None,
            follower_max_iters: DEFAULT_IW_MAX_ITERS,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let k_users = self.channel.num_users();
        let err = |m: String| Err(SolverError::Config(m));
        if k_users < 2 {
            return err("need a leader and at least one follower".into());
        }
        if self.leader >= k_users {
            return err(format!("leader {} out of range for {k_users} users", self.leader));
        }
        if self.budgets.len() != k_users {
            return err(format!("{} budgets for {k_users} users", self.budgets.len()));
        }
        if self.budgets.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return err("budgets must be positive".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step <= self.leader_budget()) {
            return err(format!("grid step {} must lie in (0, leader budget]", self.grid_step));
        }
        if let Some((lo, hi)) = self.mu_bracket {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return err(format!("bad dual bracket [{lo}, {hi}]"));
            }
        }
        if !(self.mu_tolerance > 0.0) || !(self.dual_box_factor >= 1.0) {
            return err("mu_tolerance must be positive and dual_box_factor at least 1".into());
        }
        if self.coord_max_sweeps == 0 || self.dual_max_iters == 0 {
            return err("iteration caps must be positive".into());
        }
        Ok(())
    }

    pub fn leader_budget(&self) -> f64 {
        self.budgets[self.leader]
    }

    pub fn num_bins(&self) -> usize {
        self.channel.num_bins()
    }

    pub fn followers(&self) -> Vec<usize> {
        (0..self.channel.num_users()).filter(|&u| u != self.leader).collect()
    }

    pub(crate) fn coord_tolerance(&self) -> f64 {
        self.coord_tolerance.unwrap_or(1e-6 * self.leader_budget())
    }

    fn game_config(&self) -> GameConfig {
        let mut cfg = GameConfig::new(self.budgets.clone());
        cfg.iw_tolerance = self.follower_tolerance;
        cfg.iw_max_iters = self.follower_max_iters;
        cfg
    }

    /// Default upper end of the dual bracket: the largest marginal ln-rate
    /// the leader can get from any bin at zero power.
    pub(crate) fn default_mu_max(&self) -> f64 {
        self.channel
            .noise(self.leader)
            .iter()
            .map(|&n| 1.0 / n)
            .fold(0.0, f64::max)
    }

    /// Follower response to `p1` through the public sub-game route, as a
    /// full power profile.
    pub fn follower_response(&self, p1: &[f64]) -> Result<Vec<Vec<f64>>, SolverError> {
        self.validate()?;
        check_leader_power(self, p1)?;
        let followers = self.followers();
        if followers.len() == 1 {
            let follower = followers[0];
            let mut profile = vec![vec![0.0; self.num_bins()]; self.channel.num_users()];
            profile[self.leader] = p1.to_vec();
            let nu = EffectiveNoise::for_user(&self.channel, follower, &profile);
            profile[follower] = waterfill_closed_form(&nu, self.budgets[follower]).0.power;
            return Ok(profile);
        }
        let ne = follower_subgame_ne(&self.channel, &self.game_config(), &[(self.leader, p1)])?;
        if !ne.converged {
            return Err(SolverError::FollowerDiverged {
                iterations: ne.iterations,
            });
        }
        Ok(ne.powers())
    }
}

fn check_leader_power(prob: &LeaderProblem, p1: &[f64]) -> Result<(), SolverError> {
    if p1.len() != prob.num_bins() {
        return Err(SolverError::Config(format!(
            "leader allocation has {} bins, channel has {}",
            p1.len(),
            prob.num_bins()
        )));
    }
    if p1.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(SolverError::Config(
            "leader power must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackelbergResult {
    pub method: Method,
    pub leader: usize,
    /// Every user's allocation; followers hold their induced equilibrium.
    pub allocations: Vec<PowerAllocation>,
    /// Rates in bits, recomputed from `allocations`.
    pub rates: Vec<f64>,
    /// `D'(mu*)` in bits, when the method computes one.
    pub dual_value: Option<f64>,
    /// Dual bisection steps (T1).
    pub dual_iterations: usize,
    /// Coordinate sweeps over all dual steps (T2 summed).
    pub sweeps: usize,
    pub evaluations: u64,
    pub converged: bool,
}

impl StackelbergResult {
    pub fn leader_alloc(&self) -> &PowerAllocation {
        &self.allocations[self.leader]
    }

    pub fn leader_rate(&self) -> f64 {
        self.rates[self.leader]
    }

    pub fn follower_rates(&self) -> Vec<(usize, f64)> {
        self.rates
            .iter()
            .copied()
            .enumerate()
            .filter(|&(u, _)| u != self.leader)
            .collect()
    }

    /// Builds a result around the leader allocation `p1`, recomputing the
    /// followers' response and every rate.
    pub(crate) fn assemble(prob: &LeaderProblem, method: Method, p1: Vec<f64>) -> Result<Self, SolverError> {
        let profile = prob.follower_response(&p1)?;
        let rates = (0..profile.len())
            .map(|u| prob.channel.rate_bits(u, &profile))
            .collect();
        let allocations = profile
            .into_iter()
            .zip(&prob.budgets)
            .map(|(power, &budget)| PowerAllocation { power, budget })
            .collect();
        Ok(StackelbergResult {
            method,
            leader: prob.leader,
            allocations,
            rates,
            dual_value: None,
            dual_iterations: 0,
            sweeps: 0,
            evaluations: 0,
            converged: true,
        })
    }
}

/// Leader rate in bits once the followers have responded to `p1`.
pub fn leader_objective(p1: &[f64], prob: &LeaderProblem) -> Result<f64, SolverError> {
    let total: f64 = p1.iter().sum();
    if total > prob.leader_budget() * (1.0 + crate::waterfill::BUDGET_SLACK) {
        return Err(SolverError::Config(format!(
            "leader allocation uses {total}, budget is {}",
            prob.leader_budget()
        )));
    }
    let profile = prob.follower_response(p1)?;
    Ok(prob.channel.rate_bits(prob.leader, &profile))
}

/// Leader's best rate with no interference at all: a water-fill against
/// its own noise. Upper-bounds every achievable leader rate.
pub fn interference_free_bound(prob: &LeaderProblem) -> Result<(PowerAllocation, f64), SolverError> {
    prob.validate()?;
    let noise = prob.channel.noise(prob.leader);
    let nu = EffectiveNoise::new(noise.to_vec())?;
    let (alloc, _) = waterfill_closed_form(&nu, prob.leader_budget());
    let nats: f64 = alloc.power.iter().zip(noise).map(|(p, n)| (p / n).ln_1p()).sum();
    Ok((alloc, crate::nats_to_bits(nats)))
}

/// Evaluates the leader's ln-rate for many candidate allocations, reusing
/// buffers. With `warm` set, multi-follower sub-games start from the
/// previous response instead of the uniform split.
pub(crate) struct ResponseOracle<'a> {
    prob: &'a LeaderProblem,
    followers: Vec<usize>,
    profile: Vec<Vec<f64>>,
    nu: Vec<f64>,
    order: Vec<usize>,
    iw: IwScratch,
    warm: bool,
    tolerance: f64,
    pub evaluations: u64,
}

impl<'a> ResponseOracle<'a> {
    pub fn new(prob: &'a LeaderProblem, warm: bool) -> Self {
        let n = prob.num_bins();
        let profile = prob.budgets.iter().map(|&b| vec![b / n as f64; n]).collect();
        ResponseOracle {
            prob,
            followers: prob.followers(),
            profile,
            nu: vec![0.0; n],
            order: Vec::with_capacity(n),
            iw: IwScratch::default(),
            warm,
            tolerance: prob.game_config().tolerance(),
            evaluations: 0,
        }
    }

    /// Leader rate in nats for `p1`. The budget is not enforced here.
    pub fn leader_rate_nats(&mut self, p1: &[f64]) -> Result<f64, SolverError> {
        self.evaluations += 1;
        let prob = self.prob;
        let nc = &prob.channel;
        let leader = prob.leader;
        self.profile[leader].copy_from_slice(p1);
        if let [follower] = self.followers[..] {
            let base = nc.noise(follower);
            let alpha = nc.cross(leader, follower);
            for f in 0..p1.len() {
                self.nu[f] = base[f] + alpha[f] * p1[f];
            }
            fill_closed_form(
                &self.nu,
                prob.budgets[follower],
                &mut self.profile[follower],
                &mut self.order,
            );
        } else {
            if !self.warm {
                let n = p1.len() as f64;
                for &u in &self.followers {
                    let share = prob.budgets[u] / n;
                    self.profile[u].iter_mut().for_each(|p| *p = share);
                }
            }
            let run = iterate_in_place(
                nc,
                &self.followers,
                &prob.budgets,
                &mut self.profile,
                self.tolerance,
                prob.follower_max_iters,
                UpdateSchedule::RoundRobin,
                &mut self.iw,
            );
            if !run.converged {
                return Err(SolverError::FollowerDiverged { iterations: run.rounds });
            }
        }
        nc.effective_noise_into(leader, &self.profile, &mut self.nu);
        Ok(p1.iter().zip(&self.nu).map(|(&p, &v)| (p / v).ln_1p()).sum())
    }
}
