//! Single-user water-filling and achievable rates.
//!
//! Given effective noise `nu^f`, the rate-maximizing split of a budget is
//! `P^f = (lambda - nu^f)^+` with the water level `lambda` chosen to spend the
//! whole budget. Two independent routes compute it: a bisection on
//! `lambda` and the sorted closed form. The closed form is the one the
//! solvers use.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, NormalizedChannel};
use crate::error::GameError;

/// Relative slack allowed on the budget constraint.
pub const BUDGET_SLACK: f64 = 1e-9;

/// Relative accuracy of the bisection water level.
pub const BISECTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub power: Vec<f64>,
    pub budget: f64,
}

impl PowerAllocation {
    pub fn new(power: Vec<f64>, budget: f64) -> Result<Self, GameError> {
        let alloc = PowerAllocation { power, budget };
        alloc.check(0)?;
        Ok(alloc)
    }

    /// `budget / n` in every bin.
    pub fn uniform(num_bins: usize, budget: f64) -> Self {
        PowerAllocation {
            power: vec![budget / num_bins as f64; num_bins],
            budget,
        }
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn num_bins(&self) -> usize {
        self.power.len()
    }

    pub(crate) fn check(&self, user: usize) -> Result<(), GameError> {
        let err = |reason: String| GameError::Allocation { user, reason };
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(err(format!("budget {} must be positive", self.budget)));
        }
        if let Some(f) = self.power.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(err(format!("bin {f} has power {}", self.power[f])));
        }
        let total = self.total();
        if total > self.budget * (1.0 + BUDGET_SLACK) {
            return Err(err(format!("total power {total} exceeds budget {}", self.budget)));
        }
        Ok(())
    }
}

impl AsRef<[f64]> for PowerAllocation {
    fn as_ref(&self) -> &[f64] {
        &self.power
    }
}

/// Per-bin noise-plus-interference, normalized to the user's direct gain.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveNoise(Vec<f64>);

impl EffectiveNoise {
    pub fn new(values: Vec<f64>) -> Result<Self, GameError> {
        if values.is_empty() {
            return Err(GameError::Config("effective noise has no bins".into()));
        }
        if let Some(f) = values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(GameError::Config(format!(
                "effective noise in bin {f} is {}, must be positive",
                values[f]
            )));
        }
        Ok(EffectiveNoise(values))
    }

    /// Noise seen by `user` when everyone transmits `powers`.
    pub fn for_user<P: AsRef<[f64]>>(nc: &NormalizedChannel, user: usize, powers: &[P]) -> Self {
        let mut nu = vec![0.0; nc.num_bins()];
        nc.effective_noise_into(user, powers, &mut nu);
        EffectiveNoise(nu)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Rate of `user` in bits on the raw channel, treating interference as
/// noise. `profile[j]` is user `j`'s allocation.
pub fn rate(ch: &ChannelRealization, user: usize, profile: &[PowerAllocation]) -> f64 {
    let nats: f64 = (0..ch.num_bins)
        .map(|f| {
            let interference: f64 = profile
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != user)
                .map(|(j, p)| p.power[f] * ch.gain[j][user][f])
                .sum();
            let signal = profile[user].power[f] * ch.gain[user][user][f];
            (signal / (ch.noise[user][f] + interference)).ln_1p()
        })
        .sum();
    crate::nats_to_bits(nats)
}

/// Water-filling by bisection on the water level.
pub fn waterfill_bisection(nu: &EffectiveNoise, budget: f64) -> PowerAllocation {
    let nu = nu.values();
    let spent = |level: f64| -> f64 { nu.iter().map(|&v| (level - v).max(0.0)).sum() };
    let floor = nu.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (floor, floor + budget);
    let tol = BISECTION_TOLERANCE * budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total = spent(mid);
        if (total - budget).abs() <= tol || hi - lo <= f64::EPSILON * hi {
            lo = mid;
            hi = mid;
            break;
        }
        if total > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    PowerAllocation {
        power: nu.iter().map(|&v| (level - v).max(0.0)).collect(),
        budget,
    }
}

/// Closed-form water-filling. Returns the allocation and the number of
/// active bins.
pub fn waterfill_closed_form(nu: &EffectiveNoise, budget: f64) -> (PowerAllocation, usize) {
    let mut power = vec![0.0; nu.0.len()];
    let mut order = Vec::with_capacity(nu.0.len());
    let active = fill_closed_form(&nu.0, budget, &mut power, &mut order);
    (PowerAllocation { power, budget }, active)
}

/// Allocation-free closed-form water-fill for the hot loops.
///
/// Bins are ranked by ascending `nu` (ties by ascending index). The active
/// count is the smallest `k` with
/// `budget <= (k+1) nu_(k+1) - sum_{m<=k+1} nu_(m)`, or `N` if none; active
/// bins get `(budget + sum_{m<=k} nu_(m)) / k - nu^f`.
pub(crate) fn fill_closed_form(nu: &[f64], budget: f64, out: &mut [f64], order: &mut Vec<usize>) -> usize {
    let n = nu.len();
    order.clear();
    order.extend(0..n);
    order.sort_unstable_by(|&a, &b| nu[a].total_cmp(&nu[b]).then(a.cmp(&b)));

    let mut prefix = nu[order[0]];
    let mut active = n;
    for k in 1..n {
        let next = nu[order[k]];
        let next_prefix = prefix + next;
        if budget <= (k + 1) as f64 * next - next_prefix {
            active = k;
            break;
        }
        prefix = next_prefix;
    }
    out.iter_mut().for_each(|p| *p = 0.0);
    if active == 1 {
        out[order[0]] = budget;
        return 1;
    }
    let level = (budget + prefix) / active as f64;
    for &f in &order[..active] {
        out[f] = (level - nu[f]).max(0.0);
    }
    active
}

/// Best response of `user` to everyone else's current power: a water-fill
/// against the effective noise they create.
pub fn best_response<P: AsRef<[f64]>>(
    nc: &NormalizedChannel,
    user: usize,
    powers: &[P],
    budget: f64,
) -> PowerAllocation {
    let nu = EffectiveNoise::for_user(nc, user, powers);
    waterfill_closed_form(&nu, budget).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nu(v: &[f64]) -> EffectiveNoise {
        EffectiveNoise::new(v.to_vec()).unwrap()
    }

    fn example1() -> NormalizedChannel {
        NormalizedChannel::two_user([vec![4.0, 1.0], vec![1.0, 4.0]], 0.5).unwrap()
    }

    fn assert_alloc(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn rate_basics() {
        let ch = ChannelRealization::new(vec![vec![vec![1.0]]], vec![vec![1.0]]).unwrap();
        let zero = PowerAllocation::new(vec![0.0], 1.0).unwrap();
        assert_eq!(rate(&ch, 0, &[zero]), 0.0);
        let one = PowerAllocation::new(vec![1.0], 1.0).unwrap();
        assert!((rate(&ch, 0, &[one]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rate_at_example1_equilibrium() {
        let ch = ChannelRealization::from_normalized(&example1());
        let profile = [
            PowerAllocation::new(vec![2.0, 8.0], 10.0).unwrap(),
            PowerAllocation::new(vec![8.0, 2.0], 10.0).unwrap(),
        ];
        let r1 = rate(&ch, 0, &profile);
        let r2 = rate(&ch, 1, &profile);
        // log2(1 + 2/8) + log2(1 + 8/2) = log2(6.25)
        let exact = 6.25f64.log2();
        assert!((r1 - exact).abs() < 1e-12, "{r1}");
        assert!((r2 - exact).abs() < 1e-12, "{r2}");
        assert!((r1 - 2.645).abs() < 2e-3);
        let nc = example1();
        assert!((nc.rate_bits(0, &profile) - r1).abs() < 1e-12);
    }

    #[test]
    fn bisection_examples() {
        assert_alloc(&waterfill_bisection(&nu(&[2.0, 2.0]), 6.0).power, &[3.0, 3.0], 1e-9);
        assert_alloc(&waterfill_bisection(&nu(&[1.0, 3.0]), 4.0).power, &[3.0, 1.0], 1e-9);
        assert_alloc(&waterfill_bisection(&nu(&[1.0, 10.0]), 4.0).power, &[4.0, 0.0], 1e-9);
    }

    #[test]
    fn closed_form_examples() {
        let (a, k) = waterfill_closed_form(&nu(&[1.0, 3.0]), 4.0);
        assert_eq!(k, 2);
        assert_alloc(&a.power, &[3.0, 1.0], 1e-12);
        let (a, k) = waterfill_closed_form(&nu(&[1.0, 10.0]), 4.0);
        assert_eq!(k, 1);
        assert_alloc(&a.power, &[4.0, 0.0], 1e-12);
        let (a, _) = waterfill_closed_form(&nu(&[1.0, 9.0]), 10.0);
        assert_alloc(&a.power, &[9.0, 1.0], 1e-12);
    }

    #[test]
    fn boundary_budget_picks_smaller_active_set() {
        // budget == 2 * 11 - (1 + 11): the second bin would get exactly zero.
        let (a, k) = waterfill_closed_form(&nu(&[11.0, 1.0]), 10.0);
        assert_eq!(k, 1);
        assert_alloc(&a.power, &[0.0, 10.0], 0.0);
    }

    #[test]
    fn ties_break_by_index() {
        let mut order = Vec::new();
        let mut out = vec![0.0; 3];
        let k = fill_closed_form(&[2.0, 1.0, 2.0], 0.5, &mut out, &mut order);
        assert_eq!(order, vec![1, 0, 2]);
        assert_eq!(k, 1);
    }

    #[test]
    fn best_response_examples() {
        let nc = example1();
        let br = best_response(&nc, 1, &[vec![0.0, 10.0], vec![0.0, 0.0]], 10.0);
        assert_alloc(&br.power, &[9.0, 1.0], 1e-12);
        let br = best_response(&nc, 1, &[vec![2.0, 8.0], vec![0.0, 0.0]], 10.0);
        assert_alloc(&br.power, &[8.0, 2.0], 1e-12);

        let free = NormalizedChannel::two_user([vec![4.0, 1.0], vec![1.0, 4.0]], 0.0).unwrap();
        let a = best_response(&free, 1, &[vec![0.0, 10.0], vec![0.0, 0.0]], 10.0);
        let b = best_response(&free, 1, &[vec![7.0, 3.0], vec![0.0, 0.0]], 10.0);
        assert_eq!(a, b);
    }

    #[test]
    fn waterfill_beats_random_feasible_allocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
            let budget = rng.random_range(0.1..20.0);
            let (best, _) = waterfill_closed_form(&nu(&values), budget);
            let rate = |p: &[f64]| -> f64 { p.iter().zip(&values).map(|(p, v)| (p / v).ln_1p()).sum() };
            let opt = rate(&best.power);
            for _ in 0..100 {
                let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let s: f64 = w.iter().sum::<f64>() / rng.random_range(0.5..1.0);
                let trial: Vec<f64> = w.iter().map(|x| x / s * budget).collect();
                assert!(rate(&trial) <= opt + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_bisection(values in prop::collection::vec(0.01f64..10.0, 1..16), budget in 0.01f64..100.0) {
            let e = nu(&values);
            let (cf, active) = waterfill_closed_form(&e, budget);
            let bi = waterfill_bisection(&e, budget);
            for (a, b) in cf.power.iter().zip(&bi.power) {
                prop_assert!((a - b).abs() <= 1e-8 * budget);
            }
            prop_assert!((cf.total() - budget).abs() <= BISECTION_TOLERANCE * budget);
            prop_assert_eq!(cf.power.iter().filter(|&&p| p > 0.0).count() <= active, true);
        }

        #[test]
        fn water_levels_are_monotone(values in prop::collection::vec(0.01f64..10.0, 2..12), budget in 0.01f64..50.0) {
            let (cf, active) = waterfill_closed_form(&nu(&values), budget);
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            for w in order.windows(2) {
                prop_assert!(cf.power[w[0]] >= cf.power[w[1]]);
            }
            for (rank, &f) in order.iter().enumerate() {
                if cf.power[f] > 0.0 {
                    prop_assert!(rank < active);
                }
            }
        }
    }
}
