//! Best-response dynamics: iterative water-filling (IW).
//!
//! Each non-fixed user in turn replaces its allocation with a water-fill
//! against the current interference. Under diagonal dominance the iteration
//! is a contraction and converges to the unique Nash equilibrium of the
//! users being updated; fixed users act as background noise.

use serde::{Deserialize, Serialize};

use crate::channel::NormalizedChannel;
use crate::error::GameError;
use crate::waterfill::{fill_closed_form, PowerAllocation};

pub const DEFAULT_IW_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSchedule {
    /// Gauss-Seidel: each update sees the previous users' new allocations.
    #[default]
    RoundRobin,
    /// Jacobi: every user responds to the previous round.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub budgets: Vec<f64>,
    /// Users whose allocations are frozen (leaders).
    pub fixed_users: Vec<usize>,
    /// Largest per-bin change in a full round that counts as converged.
    /// `None` means `1e-8 * max(budgets)`.
    pub iw_tolerance: Option<f64>,
    pub iw_max_iters: usize,
    pub schedule: UpdateSchedule,
    /// Update order of the non-fixed users; ascending index when `None`.
    pub order: Option<Vec<usize>>,
}

impl GameConfig {
    pub fn new(budgets: Vec<f64>) -> Self {
        GameConfig {
            budgets,
            fixed_users: Vec::new(),
            iw_tolerance: None,
            iw_max_iters: DEFAULT_IW_MAX_ITERS,
            schedule: UpdateSchedule::RoundRobin,
            order: None,
        }
    }

    pub fn with_fixed_users(mut self, fixed: Vec<usize>) -> Self {
        self.fixed_users = fixed;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.iw_tolerance
            .unwrap_or_else(|| 1e-8 * self.budgets.iter().copied().fold(0.0, f64::max))
    }

    fn validate(&self, num_users: usize) -> Result<(), GameError> {
        if self.budgets.len() != num_users {
            return Err(GameError::Config(format!(
                "{} budgets for {num_users} users",
                self.budgets.len()
            )));
        }
        if let Some(b) = self.budgets.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
            return Err(GameError::Config(format!("budget {b} must be positive")));
        }
        if !(self.tolerance() > 0.0) {
            return Err(GameError::Config("tolerance must be positive".into()));
        }
        if let Some(&u) = self.fixed_users.iter().find(|&&u| u >= num_users) {
            return Err(GameError::Config(format!("fixed user {u} out of range")));
        }
        if let Some(order) = &self.order {
            let mut seen = order.clone();
            seen.sort_unstable();
            seen.dedup();
            let movers: Vec<usize> = (0..num_users).filter(|u| !self.fixed_users.contains(u)).collect();
            if seen != movers || order.len() != movers.len() {
                return Err(GameError::Config(
                    "order must be a permutation of the non-fixed users".into(),
                ));
            }
        }
        Ok(())
    }

    fn movers(&self, num_users: usize) -> Vec<usize> {
        match &self.order {
            Some(order) => order.clone(),
            None => (0..num_users).filter(|u| !self.fixed_users.contains(u)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub allocations: Vec<PowerAllocation>,
    /// Rates in bits, recomputed from `allocations`.
    pub rates: Vec<f64>,
    /// Full rounds performed.
    pub iterations: usize,
    pub converged: bool,
}

impl EquilibriumResult {
    fn from_powers(
        nc: &NormalizedChannel,
        budgets: &[f64],
        powers: Vec<Vec<f64>>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let rates = (0..powers.len()).map(|k| nc.rate_bits(k, &powers)).collect();
        let allocations = powers
            .into_iter()
            .zip(budgets)
            .map(|(power, &budget)| PowerAllocation { power, budget })
            .collect();
        EquilibriumResult {
            allocations,
            rates,
            iterations,
            converged,
        }
    }

    pub fn powers(&self) -> Vec<Vec<f64>> {
        self.allocations.iter().map(|a| a.power.clone()).collect()
    }
}

/// Outcome of [`iterate_in_place`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct IwRun {
    pub rounds: usize,
    pub converged: bool,
}

/// Scratch buffers reused across IW runs.
#[derive(Debug, Default)]
pub(crate) struct IwScratch {
    nu: Vec<f64>,
    next: Vec<f64>,
    order: Vec<usize>,
    previous: Vec<Vec<f64>>,
}

/// Runs IW on `powers` in place, updating only `movers`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn iterate_in_place(
    nc: &NormalizedChannel,
    movers: &[usize],
    budgets: &[f64],
    powers: &mut [Vec<f64>],
    tolerance: f64,
    max_iters: usize,
    schedule: UpdateSchedule,
    scratch: &mut IwScratch,
) -> IwRun {
    let n = nc.num_bins();
    scratch.nu.resize(n, 0.0);
    scratch.next.resize(n, 0.0);
    for round in 1..=max_iters {
        let mut change: f64 = 0.0;
        match schedule {
            UpdateSchedule::RoundRobin => {
                for &k in movers {
                    nc.effective_noise_into(k, powers, &mut scratch.nu);
                    fill_closed_form(&scratch.nu, budgets[k], &mut scratch.next, &mut scratch.order);
                    for (p, &q) in powers[k].iter_mut().zip(&scratch.next) {
                        change = change.max((*p - q).abs());
                        *p = q;
                    }
                }
            }
            UpdateSchedule::Simultaneous => {
                scratch.previous.clear();
                scratch.previous.extend(powers.iter().cloned());
                for &k in movers {
                    nc.effective_noise_into(k, &scratch.previous, &mut scratch.nu);
                    fill_closed_form(&scratch.nu, budgets[k], &mut scratch.next, &mut scratch.order);
                    for (p, &q) in powers[k].iter_mut().zip(&scratch.next) {
                        change = change.max((*p - q).abs());
                        *p = q;
                    }
                }
            }
        }
        if change <= tolerance {
            return IwRun {
                rounds: round,
                converged: true,
            };
        }
    }
    IwRun {
        rounds: max_iters,
        converged: false,
    }
}

fn starting_powers(
    nc: &NormalizedChannel,
    cfg: &GameConfig,
    initial: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>, GameError> {
    let k_users = nc.num_users();
    let n = nc.num_bins();
    match initial {
        Some(init) => {
            if init.len() != k_users {
                return Err(GameError::Config(format!(
                    "{} initial allocations for {k_users} users",
                    init.len()
                )));
            }
            for (k, p) in init.iter().enumerate() {
                if p.len() != n {
                    return Err(GameError::Allocation {
                        user: k,
                        reason: format!("{} bins, channel has {n}", p.len()),
                    });
                }
                PowerAllocation {
                    power: p.clone(),
                    budget: cfg.budgets[k],
                }
                .check(k)?;
            }
            Ok(init.to_vec())
        }
        None => {
            if let Some(&u) = cfg.fixed_users.first() {
                return Err(GameError::Allocation {
                    user: u,
                    reason: "fixed users need an initial allocation".into(),
                });
            }
            Ok(cfg.budgets.iter().map(|&b| vec![b / n as f64; n]).collect())
        }
    }
}

/// Iterative water-filling from `initial` (uniform split when `None`).
///
/// Fixed users keep their initial allocation. Hitting `iw_max_iters` is not
/// an error: the result comes back with `converged == false`.
pub fn iterative_waterfilling(
    nc: &NormalizedChannel,
    cfg: &GameConfig,
    initial: Option<&[Vec<f64>]>,
) -> Result<EquilibriumResult, GameError> {
    cfg.validate(nc.num_users())?;
    let mut powers = starting_powers(nc, cfg, initial)?;
    let movers = cfg.movers(nc.num_users());
    let run = iterate_in_place(
        nc,
        &movers,
        &cfg.budgets,
        &mut powers,
        cfg.tolerance(),
        cfg.iw_max_iters,
        cfg.schedule,
        &mut IwScratch::default(),
    );
    Ok(EquilibriumResult::from_powers(
        nc,
        &cfg.budgets,
        powers,
        run.rounds,
        run.converged,
    ))
}

/// Nash equilibrium of the followers once the leaders have committed.
///
/// The leaders' power is folded into every follower's noise and IW runs on
/// the reduced follower-only channel. The returned result covers all users,
/// leaders included, so rates reflect the full interference picture.
pub fn follower_subgame_ne(
    nc: &NormalizedChannel,
    cfg: &GameConfig,
    leaders: &[(usize, &[f64])],
) -> Result<EquilibriumResult, GameError> {
    let k_users = nc.num_users();
    let n = nc.num_bins();
    if cfg.budgets.len() != k_users {
        return Err(GameError::Config(format!(
            "{} budgets for {k_users} users",
            cfg.budgets.len()
        )));
    }
    let mut full: Vec<Vec<f64>> = vec![vec![0.0; n]; k_users];
    for &(u, p) in leaders {
        if u >= k_users {
            return Err(GameError::Config(format!("leader {u} out of range")));
        }
        if p.len() != n {
            return Err(GameError::Allocation {
                user: u,
                reason: format!("{} bins, channel has {n}", p.len()),
            });
        }
        PowerAllocation {
            power: p.to_vec(),
            budget: cfg.budgets[u],
        }
        .check(u)?;
        full[u] = p.to_vec();
    }
    let followers: Vec<usize> = (0..k_users)
        .filter(|u| !leaders.iter().any(|&(l, _)| l == *u))
        .collect();
    if followers.is_empty() {
        return Err(GameError::Config("no followers left to play".into()));
    }
    let reduced = nc.fold_fixed_users(&followers, &full);
    let sub_cfg = GameConfig {
        budgets: followers.iter().map(|&u| cfg.budgets[u]).collect(),
        fixed_users: Vec::new(),
        iw_tolerance: Some(cfg.tolerance()),
        iw_max_iters: cfg.iw_max_iters,
        schedule: cfg.schedule,
        order: None,
    };
    let sub = iterative_waterfilling(&reduced, &sub_cfg, None)?;
    for (slot, alloc) in followers.iter().zip(sub.allocations) {
        full[*slot] = alloc.power;
    }
    Ok(EquilibriumResult::from_powers(
        nc,
        &cfg.budgets,
        full,
        sub.iterations,
        sub.converged,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_admissible_channel, RayleighProfile, Topology};
    use crate::waterfill::{best_response, waterfill_closed_form, EffectiveNoise};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example(n11: f64) -> NormalizedChannel {
        NormalizedChannel::two_user([vec![n11, 1.0], vec![1.0, n11]], 0.5).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn random_start(rng: &mut ChaCha8Rng, budgets: &[f64], n: usize) -> Vec<Vec<f64>> {
        budgets
            .iter()
            .map(|&b| {
                let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s * b).collect()
            })
            .collect()
    }

    fn three_user_channel(seed: u64) -> NormalizedChannel {
        let topo = Topology {
            num_users: 3,
            num_bins: 8,
            direct_power: 1.0,
            cross_power: 0.25,
            noise: 0.01,
        };
        sample_admissible_channel(&RayleighProfile::default(), &topo, seed, 10_000)
            .unwrap()
            .normalized
    }

    #[test]
    fn example1_equilibrium() {
        let res = iterative_waterfilling(&example(4.0), &GameConfig::new(vec![10.0, 10.0]), None).unwrap();
        assert!(res.converged);
        assert!(close(&res.allocations[0].power, &[2.0, 8.0], 1e-6));
        assert!(close(&res.allocations[1].power, &[8.0, 2.0], 1e-6));
        for r in &res.rates {
            assert!((r - 6.25f64.log2()).abs() < 1e-6);
        }
    }

    #[test]
    fn example2_equilibrium() {
        let res = iterative_waterfilling(&example(6.0), &GameConfig::new(vec![10.0, 10.0]), None).unwrap();
        assert!(res.converged);
        assert!(close(&res.allocations[0].power, &[0.0, 10.0], 1e-6));
        assert!(close(&res.allocations[1].power, &[10.0, 0.0], 1e-6));
        assert!((res.rates[0] - 3.460).abs() < 1e-3);
    }

    #[test]
    fn decoupled_game_is_single_user_waterfilling() {
        let nc = NormalizedChannel::two_user([vec![4.0, 1.0, 2.0], vec![1.0, 4.0, 0.5]], 0.0).unwrap();
        let res = iterative_waterfilling(&nc, &GameConfig::new(vec![3.0, 5.0]), None).unwrap();
        // One round to reach it, one more to observe no change.
        assert!(res.iterations <= 2);
        for (k, b) in [(0, 3.0), (1, 5.0)] {
            let (wf, _) = waterfill_closed_form(&EffectiveNoise::new(nc.noise(k).to_vec()).unwrap(), b);
            assert_eq!(res.allocations[k].power, wf.power);
        }
    }

    #[test]
    fn fixed_users_need_an_allocation() {
        let cfg = GameConfig::new(vec![10.0, 10.0]).with_fixed_users(vec![0]);
        assert!(iterative_waterfilling(&example(4.0), &cfg, None).is_err());
        let init = vec![vec![0.0, 10.0], vec![5.0, 5.0]];
        let res = iterative_waterfilling(&example(4.0), &cfg, Some(&init)).unwrap();
        assert_eq!(res.allocations[0].power, vec![0.0, 10.0]);
        assert!(close(&res.allocations[1].power, &[9.0, 1.0], 1e-9));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let nc = NormalizedChannel::two_user([vec![1.0, 1.0], vec![1.0, 1.0]], 0.5).unwrap();
        let mut cfg = GameConfig::new(vec![10.0, 10.0]);
        cfg.iw_max_iters = 1;
        let init = vec![vec![10.0, 0.0], vec![10.0, 0.0]];
        let res = iterative_waterfilling(&nc, &cfg, Some(&init)).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn follower_subgame_with_one_follower_is_best_response() {
        let nc = example(4.0);
        let cfg = GameConfig::new(vec![10.0, 10.0]);
        let res = follower_subgame_ne(&nc, &cfg, &[(0, &[0.0, 10.0])]).unwrap();
        assert!(close(&res.allocations[1].power, &[9.0, 1.0], 1e-12));
        assert!((res.rates[0] - 2.939).abs() < 1e-3);
        assert!((res.rates[1] - 3.474).abs() < 1e-3);
    }

    #[test]
    fn decoupled_followers_waterfill_their_own_noise() {
        let noise = vec![vec![1.0, 2.0, 3.0], vec![0.5, 4.0, 1.0], vec![2.0, 0.2, 0.7]];
        let cross = vec![vec![vec![0.0; 3]; 3]; 3];
        let nc = NormalizedChannel::new(noise.clone(), cross).unwrap();
        let cfg = GameConfig::new(vec![4.0, 4.0, 4.0]);
        let res = follower_subgame_ne(&nc, &cfg, &[(0, &[3.0, 0.5, 0.5])]).unwrap();
        for (alloc, nu) in res.allocations.iter().zip(&noise).skip(1) {
            let (wf, _) = waterfill_closed_form(&EffectiveNoise::new(nu.clone()).unwrap(), 4.0);
            assert!(close(&alloc.power, &wf.power, 1e-12));
        }
    }

    #[test]
    fn follower_subgame_agrees_with_fixed_user_iteration() {
        let nc = three_user_channel(5);
        let budgets = vec![200.0; 3];
        let leader = vec![10.0; 8];
        let folded = follower_subgame_ne(&nc, &GameConfig::new(budgets.clone()), &[(0, &leader)]).unwrap();
        let cfg = GameConfig::new(budgets.clone()).with_fixed_users(vec![0]);
        let init = vec![leader.clone(), vec![25.0; 8], vec![25.0; 8]];
        let direct = iterative_waterfilling(&nc, &cfg, Some(&init)).unwrap();
        let tol = 10.0 * cfg.tolerance();
        for k in 1..3 {
            assert!(close(&folded.allocations[k].power, &direct.allocations[k].power, tol));
        }
    }

    #[test]
    fn follower_ne_independent_of_start() {
        let nc = three_user_channel(17);
        let budgets = vec![200.0; 3];
        let cfg = GameConfig::new(budgets.clone()).with_fixed_users(vec![0]);
        let leader: Vec<f64> = (0..8).map(|f| f as f64 * 5.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut starts = Vec::new();
        for _ in 0..2 {
            let mut s = random_start(&mut rng, &budgets, 8);
            s[0] = leader.clone();
            starts.push(iterative_waterfilling(&nc, &cfg, Some(&s)).unwrap());
        }
        let tol = 10.0 * cfg.tolerance();
        for k in 1..3 {
            assert!(close(
                &starts[0].allocations[k].power,
                &starts[1].allocations[k].power,
                tol
            ));
        }
    }

    #[test]
    fn converged_result_is_a_fixed_point() {
        for seed in 0..20 {
            let nc = three_user_channel(seed);
            let cfg = GameConfig::new(vec![200.0; 3]);
            let res = iterative_waterfilling(&nc, &cfg, None).unwrap();
            assert!(res.converged);
            let powers = res.powers();
            for k in 0..3 {
                let br = best_response(&nc, k, &powers, 200.0);
                assert!(close(&br.power, &powers[k], 10.0 * cfg.tolerance()));
                let recomputed = nc.rate_bits(k, &powers);
                assert_eq!(recomputed, res.rates[k]);
            }
        }
    }

    #[test]
    fn schedule_and_order_do_not_change_the_limit() {
        let nc = three_user_channel(23);
        let base = GameConfig::new(vec![200.0; 3]);
        let reference = iterative_waterfilling(&nc, &base, None).unwrap();
        let tol = 100.0 * base.tolerance();
        let mut permuted = base.clone();
        permuted.order = Some(vec![2, 0, 1]);
        let mut jacobi = base.clone();
        jacobi.schedule = UpdateSchedule::Simultaneous;
        for cfg in [permuted, jacobi] {
            let res = iterative_waterfilling(&nc, &cfg, None).unwrap();
            assert!(res.converged);
            for k in 0..3 {
                assert!(close(&res.allocations[k].power, &reference.allocations[k].power, tol));
            }
        }
    }

    #[test]
    fn single_band_everyone_transmits_full_power() {
        let nc = NormalizedChannel::new(
            vec![vec![0.3], vec![0.7]],
            vec![vec![vec![0.0], vec![0.6]], vec![vec![0.2], vec![0.0]]],
        )
        .unwrap();
        let res = iterative_waterfilling(&nc, &GameConfig::new(vec![2.0, 3.0]), None).unwrap();
        assert_eq!(res.allocations[0].power, vec![2.0]);
        assert_eq!(res.allocations[1].power, vec![3.0]);
    }

    #[test]
    fn bad_config_rejected() {
        let nc = example(4.0);
        assert!(iterative_waterfilling(&nc, &GameConfig::new(vec![10.0]), None).is_err());
        assert!(iterative_waterfilling(&nc, &GameConfig::new(vec![10.0, -1.0]), None).is_err());
        let mut cfg = GameConfig::new(vec![10.0, 10.0]);
        cfg.order = Some(vec![0, 0]);
        assert!(iterative_waterfilling(&nc, &cfg, None).is_err());
    }
}
