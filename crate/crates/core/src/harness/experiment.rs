//! Monte-Carlo comparison of the Nash equilibrium with the leader's dual
//! ascent over random admissible channels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cdf::{empirical_cdf, linear_grid};
use crate::channel::{sample_admissible_channel, RayleighProfile, Topology, DEFAULT_REJECTION_CAP};
use crate::error::HarnessError;
use crate::game::{iterative_waterfilling, GameConfig, DEFAULT_IW_MAX_ITERS};
use crate::seed::derive_seed;
use crate::stackelberg::{algorithm1_dual_from, LeaderProblem};

/// Leader of every experiment trial.
pub const LEADER: usize = 0;

/// Solver knobs of an experiment. Unset fields take the solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// Coordinate scan step of the dual ascent; `budget / 50` when unset.
    pub grid_step: Option<f64>,
    pub mu_tolerance: Option<f64>,
    pub coord_tolerance: Option<f64>,
    pub coord_max_sweeps: Option<usize>,
    pub dual_max_iters: Option<usize>,
    pub iw_tolerance: Option<f64>,
    pub iw_max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub profile: RayleighProfile,
    pub topology: Topology,
    /// Power budget of every user.
    pub budget: f64,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_rejection_cap")]
    pub rejection_cap: usize,
    /// Thresholds of the per-user ratio CDFs; 0 to 4 in steps of 0.01 when
    /// unset.
    #[serde(default)]
    pub cdf_grid: Option<Vec<f64>>,
}

fn default_rejection_cap() -> usize {
    DEFAULT_REJECTION_CAP
}

impl ExperimentSpec {
    /// Two-user ensemble with the given cross-link power.
    pub fn two_user(trials: usize, master_seed: u64, num_bins: usize, cross_power: f64) -> Self {
        Self::with_users(trials, master_seed, 2, num_bins, cross_power)
    }

    pub fn with_users(trials: usize, master_seed: u64, num_users: usize, num_bins: usize, cross_power: f64) -> Self {
        ExperimentSpec {
            trials,
            master_seed,
            profile: RayleighProfile::default(),
            topology: Topology {
                num_users,
                num_bins,
                direct_power: 1.0,
                cross_power,
                noise: 0.01,
            },
            budget: 200.0,
            solver: SolverSpec::default(),
            rejection_cap: DEFAULT_REJECTION_CAP,
            cdf_grid: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Spec("trials must be at least 1".into()));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(HarnessError::Spec(format!("budget {} must be positive", self.budget)));
        }
        if self.rejection_cap == 0 {
            return Err(HarnessError::Spec("rejection_cap must be at least 1".into()));
        }
        self.profile.validate()?;
        self.topology.validate()?;
        if let Some(grid) = &self.cdf_grid {
            if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
                return Err(HarnessError::Spec("cdf_grid must hold finite thresholds".into()));
            }
        }
        if let Some(step) = self.solver.grid_step {
            if !(step > 0.0 && step <= self.budget) {
                return Err(HarnessError::Spec(format!("grid_step {step} must lie in (0, budget]")));
            }
        }
        Ok(())
    }

    pub fn cdf_thresholds(&self) -> Vec<f64> {
        self.cdf_grid.clone().unwrap_or_else(|| linear_grid(0.0, 4.0, 401))
    }

    fn leader_problem(&self, nc: crate::channel::NormalizedChannel) -> LeaderProblem {
        let s = &self.solver;
        let k = self.topology.num_users;
        let mut prob = LeaderProblem::new(
            nc,
            LEADER,
            vec![self.budget; k],
            s.grid_step.unwrap_or(self.budget / 50.0),
        );
        if let Some(v) = s.mu_tolerance {
            prob.mu_tolerance = v;
        }
        prob.coord_tolerance = s.coord_tolerance;
        if let Some(v) = s.coord_max_sweeps {
            prob.coord_max_sweeps = v;
        }
        if let Some(v) = s.dual_max_iters {
            prob.dual_max_iters = v;
        }
        prob.follower_tolerance = s.iw_tolerance;
        prob.follower_max_iters = s.iw_max_iters.unwrap_or(DEFAULT_IW_MAX_ITERS);
        prob
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed handed to the admissible-channel sampler.
    pub seed: u64,
    pub rejections: usize,
    /// Nash rates in bits, per user. Empty when the trial failed.
    pub rates_ne: Vec<f64>,
    /// Rates in bits with user 0 leading.
    pub rates_sg: Vec<f64>,
    /// `rates_sg[i] / rates_ne[i]`.
    pub ratios: Vec<f64>,
    pub iw_iterations: usize,
    /// Dual bisection steps (T1).
    pub dual_iterations: usize,
    /// Coordinate sweeps summed over dual steps (T2 summed).
    pub sweeps: usize,
    pub ne_converged: bool,
    pub sg_converged: bool,
    pub error: Option<String>,
}

impl TrialRecord {
    /// Both the Nash iteration and the dual ascent converged.
    pub fn converged(&self) -> bool {
        self.error.is_none() && self.ne_converged && self.sg_converged
    }

    fn failed(trial: usize, seed: u64, rejections: usize, err: impl ToString) -> Self {
        TrialRecord {
            trial,
            seed,
            rejections,
            rates_ne: Vec::new(),
            rates_sg: Vec::new(),
            ratios: Vec::new(),
            iw_iterations: 0,
            dual_iterations: 0,
            sweeps: 0,
            ne_converged: false,
            sg_converged: false,
            error: Some(err.to_string()),
        }
    }
}

/// Runs trial `trial` of `spec`. Solver failures are recorded, not raised.
pub fn run_trial(spec: &ExperimentSpec, trial: usize) -> TrialRecord {
    let seed = derive_seed(spec.master_seed, trial as u64);
    let draw = match sample_admissible_channel(&spec.profile, &spec.topology, seed, spec.rejection_cap) {
        Ok(d) => d,
        Err(e) => return TrialRecord::failed(trial, seed, spec.rejection_cap, e),
    };
    let prob = spec.leader_problem(draw.normalized);
    let mut cfg = GameConfig::new(prob.budgets.clone());
    cfg.iw_tolerance = spec.solver.iw_tolerance;
    cfg.iw_max_iters = prob.follower_max_iters;
    let ne = match iterative_waterfilling(&prob.channel, &cfg, None) {
        Ok(ne) => ne,
        Err(e) => return TrialRecord::failed(trial, seed, draw.rejections, e),
    };
    let sg = match algorithm1_dual_from(&prob, &ne) {
        Ok(sg) => sg,
        Err(e) => {
            let mut rec = TrialRecord::failed(trial, seed, draw.rejections, e);
            rec.rates_ne = ne.rates;
            rec.iw_iterations = ne.iterations;
            rec.ne_converged = ne.converged;
            return rec;
        }
    };
    let ratios = sg.rates.iter().zip(&ne.rates).map(|(s, n)| s / n).collect();
    TrialRecord {
        trial,
        seed,
        rejections: draw.rejections,
        rates_ne: ne.rates,
        rates_sg: sg.rates,
        ratios,
        iw_iterations: ne.iterations,
        dual_iterations: sg.dual_iterations,
        sweeps: sg.sweeps,
        ne_converged: ne.converged,
        sg_converged: sg.converged,
        error: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSummary {
    /// 1-based user index.
    pub user: usize,
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    /// Fraction of converged trials with `R'_i > R_i^NE`.
    pub frac_improved: Option<f64>,
    pub n_converged: usize,
}

/// Statistics over the converged trials of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub n_converged: usize,
    /// Trials with a recorded error.
    pub n_failed: usize,
    pub users: Vec<UserSummary>,
    pub mean_dual_iterations: Option<f64>,
    pub mean_sweeps: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

impl Summary {
    pub fn from_records(records: &[TrialRecord], num_users: usize) -> Self {
        let converged: Vec<&TrialRecord> = records.iter().filter(|r| r.converged()).collect();
        let users = (0..num_users)
            .map(|u| {
                let ratios: Vec<f64> = converged.iter().map(|r| r.ratios[u]).collect();
                let improved = converged.iter().filter(|r| r.rates_sg[u] > r.rates_ne[u]).count();
                UserSummary {
                    user: u + 1,
                    mean_ratio: mean(&ratios),
                    median_ratio: median(&ratios),
                    frac_improved: (!ratios.is_empty()).then(|| improved as f64 / ratios.len() as f64),
                    n_converged: ratios.len(),
                }
            })
            .collect();
        let t1: Vec<f64> = converged.iter().map(|r| r.dual_iterations as f64).collect();
        let t2: Vec<f64> = converged.iter().map(|r| r.sweeps as f64).collect();
        Summary {
            trials: records.len(),
            n_converged: converged.len(),
            n_failed: records.iter().filter(|r| r.error.is_some()).count(),
            users,
            mean_dual_iterations: mean(&t1),
            mean_sweeps: mean(&t2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// Ordered by trial index.
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    /// Per user: `(threshold, fraction)` of the converged ratios. Empty when
    /// no trial converged.
    pub cdfs: Vec<Vec<(f64, f64)>>,
}

/// Runs every trial of `spec` in parallel on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome, HarnessError> {
    spec.validate()?;
    let records: Vec<TrialRecord> = (0..spec.trials).into_par_iter().map(|t| run_trial(spec, t)).collect();
    let k = spec.topology.num_users;
    let summary = Summary::from_records(&records, k);
    let grid = spec.cdf_thresholds();
    let cdfs = (0..k)
        .map(|u| {
            let ratios: Vec<f64> = records.iter().filter(|r| r.converged()).map(|r| r.ratios[u]).collect();
            if ratios.is_empty() {
                Ok(Vec::new())
            } else {
                empirical_cdf(&ratios, &grid)
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(ExperimentOutcome { records, summary, cdfs })
}
