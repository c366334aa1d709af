//! Exhaustive grid search over the leader's budget simplex.

use rayon::prelude::*;

use super::{LeaderProblem, Method, ResponseOracle, StackelbergResult};
use crate::error::SolverError;

/// `(value, grid point, evaluations)` of one slice.
type SliceBest = (f64, Vec<usize>, u64);

/// Grid units of `budget` at `step`, tolerant to `budget / step` landing a
/// hair below an integer.
pub(crate) fn grid_units(budget: f64, step: f64) -> usize {
    (budget / step + 1e-9).floor() as usize
}

/// Number of grid points `u in N^n` with `sum u <= units`: `C(units + n, n)`.
pub fn exhaustive_evaluations(units: usize, num_bins: usize) -> f64 {
    (1..=num_bins).fold(1.0, |acc, i| acc * (units + i) as f64 / i as f64)
}

/// Scans every grid allocation `{0, step, ..., P1max}^N` with total at most
/// the budget and returns the best one. Ties go to the lexicographically
/// smallest allocation.
pub fn exhaustive_stackelberg(prob: &LeaderProblem) -> Result<StackelbergResult, SolverError> {
    prob.validate()?;
    let n = prob.num_bins();
    let step = prob.grid_step;
    let units = grid_units(prob.leader_budget(), step);
    let required = exhaustive_evaluations(units, n);
    if required > prob.eval_cap {
        return Err(SolverError::EvaluationCap {
            required,
            cap: prob.eval_cap,
        });
    }

    let slices: Vec<Result<SliceBest, SolverError>> = (0..=units)
        .into_par_iter()
        .map(|first| best_in_slice(prob, first, units, step))
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluations = 0;
    for slice in slices {
        let (value, point, evals) = slice?;
        evaluations += evals;
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, point));
        }
    }
    let (_, point) = best.expect("grid always contains the origin");
    let p1 = point.iter().map(|&u| u as f64 * step).collect();
    let mut result = StackelbergResult::assemble(prob, Method::Exhaustive, p1)?;
    result.evaluations = evaluations;
    Ok(result)
}

/// Best grid point whose first coordinate is `first`, in lexicographic order.
fn best_in_slice(prob: &LeaderProblem, first: usize, units: usize, step: f64) -> Result<SliceBest, SolverError> {
    let n = prob.num_bins();
    let mut oracle = ResponseOracle::new(prob, false);
    let mut idx = vec![0usize; n];
    idx[0] = first;
    let mut p = vec![0.0; n];
    p[0] = first as f64 * step;
    let mut used = first;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_point = idx.clone();
    loop {
        let value = oracle.leader_rate_nats(&p)?;
        if value > best_value {
            best_value = value;
            best_point.copy_from_slice(&idx);
        }
        // Odometer over bins 1..n, least significant last.
        let mut d = n;
        loop {
            d -= 1;
            if d == 0 {
                return Ok((best_value, best_point, oracle.evaluations));
            }
            if used < units {
                idx[d] += 1;
                used += 1;
                p[d] = idx[d] as f64 * step;
                break;
            }
            used -= idx[d];
            idx[d] = 0;
            p[d] = 0.0;
        }
    }
}
