//! Low-complexity dual ascent for the leader.
//!
//! For a fixed multiplier `mu`, `L'(P1, mu)` is maximized locally by cyclic
//! coordinate ascent over the bins. Every such local search starts from the
//! leader's Nash allocation. The outer loop bisects `mu` on whether the local maximizer
//! overspends the budget. Every iterate is projected onto the budget and the
//! best feasible one seen is returned.

use super::{LeaderProblem, Method, ResponseOracle, StackelbergResult};
use crate::error::SolverError;
use crate::game::{iterative_waterfilling, EquilibriumResult};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Runs the dual ascent from the full game's Nash equilibrium.
pub fn algorithm1_dual(prob: &LeaderProblem) -> Result<StackelbergResult, SolverError> {
    prob.validate()?;
    let ne = iterative_waterfilling(&prob.channel, &prob.game_config(), None)?;
    algorithm1_dual_from(prob, &ne)
}

/// Runs the dual ascent from an already computed Nash equilibrium.
pub fn algorithm1_dual_from(prob: &LeaderProblem, ne: &EquilibriumResult) -> Result<StackelbergResult, SolverError> {
    prob.validate()?;
    let budget = prob.leader_budget();
    let n = prob.num_bins();
    let coord_tol = prob.coord_tolerance();
    let mut oracle = ResponseOracle::new(prob, true);

    let mut p1 = ne.allocations[prob.leader].power.clone();
    if p1.len() != n {
        return Err(SolverError::Config(
            "starting equilibrium has the wrong bin count".into(),
        ));
    }
    let mut incumbent = p1.clone();
    let mut incumbent_rate = oracle.leader_rate_nats(&p1)?;

    let (mut mu_min, mut mu_max) = prob.mu_bracket.unwrap_or((0.0, prob.default_mu_max()));
    let mut dual_iterations = 0;
    let mut sweeps = 0;
    let mut dual_converged = false;
    let mut inner_converged = false;
    let mut projected = vec![0.0; n];

    while dual_iterations < prob.dual_max_iters {
        dual_iterations += 1;
        let mu = 0.5 * (mu_min + mu_max);
        p1.copy_from_slice(&ne.allocations[prob.leader].power);

        inner_converged = false;
        let mut value = lagrangian(&mut oracle, &p1, mu)?;
        for _ in 0..prob.coord_max_sweeps {
            sweeps += 1;
            let mut change: f64 = 0.0;
            for f in 0..n {
                let before = p1[f];
                value = maximize_coordinate(
                    &mut oracle,
                    &mut p1,
                    f,
                    mu,
                    value,
                    prob.grid_step,
                    budget,
                    0.1 * coord_tol,
                )?;
                change = change.max((p1[f] - before).abs());
            }
            if change <= coord_tol {
                inner_converged = true;
                break;
            }
        }

        let total: f64 = p1.iter().sum();
        let scale = if total > budget { budget / total } else { 1.0 };
        for (q, &p) in projected.iter_mut().zip(&p1) {
            *q = p * scale;
        }
        let rate = oracle.leader_rate_nats(&projected)?;
        if rate > incumbent_rate {
            incumbent_rate = rate;
            incumbent.copy_from_slice(&projected);
        }

        if total > budget {
            mu_min = mu;
        } else {
            mu_max = mu;
        }
        if mu_max - mu_min <= prob.mu_tolerance * mu_max {
            dual_converged = true;
            break;
        }
    }

    let mut result = StackelbergResult::assemble(prob, Method::Dual, incumbent)?;
    result.dual_iterations = dual_iterations;
    result.sweeps = sweeps;
    result.evaluations = oracle.evaluations;
    result.converged = dual_converged && inner_converged && ne.converged;
    Ok(result)
}

/// `L'(p1, mu)` without the constant `mu * P1max`.
fn lagrangian(oracle: &mut ResponseOracle<'_>, p1: &[f64], mu: f64) -> Result<f64, SolverError> {
    Ok(oracle.leader_rate_nats(p1)? - mu * p1.iter().sum::<f64>())
}

/// One-dimensional maximization of `L'` over `p1[f] in [0, upper]`: a grid
/// scan at `step` followed by golden-section refinement around the best grid
/// point. The coordinate only moves if `L'` strictly improves on `current`.
/// Returns the (possibly unchanged) objective value.
#[allow(clippy::too_many_arguments)]
fn maximize_coordinate(
    oracle: &mut ResponseOracle<'_>,
    p1: &mut [f64],
    f: usize,
    mu: f64,
    current: f64,
    step: f64,
    upper: f64,
    tolerance: f64,
) -> Result<f64, SolverError> {
    let original = p1[f];
    let mut eval = |x: f64, p1: &mut [f64]| -> Result<f64, SolverError> {
        p1[f] = x;
        lagrangian(oracle, p1, mu)
    };

    let points = (upper / step + 1e-9).floor() as usize;
    let mut best_x = 0.0;
    let mut best_v = f64::NEG_INFINITY;
    for u in 0..=points {
        let x = (u as f64 * step).min(upper);
        let v = eval(x, p1)?;
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }

    let (mut a, mut b) = ((best_x - step).max(0.0), (best_x + step).min(upper));
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut vc = eval(c, p1)?;
    let mut vd = eval(d, p1)?;
    while b - a > tolerance {
        if vc >= vd {
            b = d;
            d = c;
            vd = vc;
            c = b - GOLDEN * (b - a);
            vc = eval(c, p1)?;
        } else {
            a = c;
            c = d;
            vc = vd;
            d = a + GOLDEN * (b - a);
            vd = eval(d, p1)?;
        }
    }
    for (x, v) in [(c, vc), (d, vd)] {
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }

    if best_v > current {
        p1[f] = best_x;
        Ok(best_v)
    } else {
        p1[f] = original;
        Ok(current)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::example;
    use super::super::{exhaustive_stackelberg, interference_free_bound, leader_objective};
    use super::*;
    use crate::channel::{sample_admissible_channel, NormalizedChannel, RayleighProfile, Topology};

    #[test]
    fn example1_close_to_exhaustive() {
        let prob = example(4.0);
        let res = algorithm1_dual(&prob).unwrap();
        let opt = exhaustive_stackelberg(&prob).unwrap().leader_rate();
        assert!(res.leader_rate() >= opt - 1e-2, "{} vs {opt}", res.leader_rate());
        assert!(res.leader_alloc().total() <= 10.0 * (1.0 + 1e-12));
    }

    #[test]
    fn decoupled_channel_returns_waterfill() {
        let nc = NormalizedChannel::two_user([vec![4.0, 1.0, 2.5], vec![1.0, 4.0, 0.3]], 0.0).unwrap();
        let prob = LeaderProblem::new(nc, 0, vec![10.0, 10.0], 0.1);
        let res = algorithm1_dual(&prob).unwrap();
        let (_, bound) = interference_free_bound(&prob).unwrap();
        assert!((res.leader_rate() - bound).abs() < 1e-6);
    }

    #[test]
    fn never_worse_than_nash_and_self_consistent() {
        let topo = Topology {
            num_users: 2,
            num_bins: 6,
            direct_power: 1.0,
            cross_power: 0.5,
            noise: 0.01,
        };
        for seed in 0..10 {
            let nc = sample_admissible_channel(&RayleighProfile::default(), &topo, seed, 10_000)
                .unwrap()
                .normalized;
            let prob = LeaderProblem::new(nc, 0, vec![10.0, 10.0], 0.5);
            let ne = iterative_waterfilling(&prob.channel, &prob.game_config(), None).unwrap();
            let res = algorithm1_dual_from(&prob, &ne).unwrap();
            assert!(res.leader_rate() >= ne.rates[0] - 1e-6);
            let recomputed = leader_objective(&res.leader_alloc().power, &prob).unwrap();
            assert!((recomputed - res.leader_rate()).abs() < 1e-9);
            let profile = prob.follower_response(&res.leader_alloc().power).unwrap();
            assert_eq!(profile[1], res.allocations[1].power);
        }
    }

    #[test]
    fn coordinate_step_never_decreases_lagrangian() {
        let prob = example(4.0);
        let mut oracle = ResponseOracle::new(&prob, true);
        let mut p1 = vec![2.0, 8.0];
        for mu in [0.01, 0.1, 0.3] {
            let mut value = lagrangian(&mut oracle, &p1, mu).unwrap();
            for f in [0, 1, 0, 1] {
                let next = maximize_coordinate(&mut oracle, &mut p1, f, mu, value, 0.1, 10.0, 1e-7).unwrap();
                assert!(next >= value);
                assert!((lagrangian(&mut oracle, &p1, mu).unwrap() - next).abs() < 1e-12);
                value = next;
            }
        }
    }
}
