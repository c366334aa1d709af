//! Interference channel realizations.
//!
//! A [`ChannelRealization`] stores raw power gains `|H_jk^f|^2` (transmitter
//! `j`, receiver `k`, bin `f`) and receiver noise PSDs. Every solver works on
//! the [`NormalizedChannel`], where each receiver's quantities are divided by
//! its own direct gain:
//!
//! ```text
//! N_k^f      = sigma_k^f / |H_kk^f|^2
//! alpha_jk^f = |H_jk^f|^2 / |H_kk^f|^2     (j != k)
//! ```
//!
//! Users are indexed from zero throughout the library.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ChannelError;
use crate::seed::{derive_seed, stream_rng};

/// Default number of draws [`sample_admissible_channel`] makes before giving up.
pub const DEFAULT_REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub num_users: usize,
    pub num_bins: usize,
    /// `gain[j][k][f] = |H_jk^f|^2`, transmitter `j` to receiver `k`.
    pub gain: Vec<Vec<Vec<f64>>>,
    /// `noise[k][f] = sigma_k^f`.
    pub noise: Vec<Vec<f64>>,
}

impl ChannelRealization {
    pub fn new(gain: Vec<Vec<Vec<f64>>>, noise: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let num_users = noise.len();
        let num_bins = noise.first().map_or(0, Vec::len);
        let ch = ChannelRealization {
            num_users,
            num_bins,
            gain,
            noise,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Builds a realization with unit direct gains whose normalization is `nc`.
    pub fn from_normalized(nc: &NormalizedChannel) -> Self {
        let k_users = nc.num_users();
        let gain = (0..k_users)
            .map(|j| {
                (0..k_users)
                    .map(|k| {
                        if j == k {
                            vec![1.0; nc.num_bins()]
                        } else {
                            nc.cross[j][k].clone()
                        }
                    })
                    .collect()
            })
            .collect();
        ChannelRealization {
            num_users: k_users,
            num_bins: nc.num_bins(),
            gain,
            noise: nc.noise_norm.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.num_users == 0 {
            return Err(ChannelError::invalid("num_users", "must be positive"));
        }
        if self.num_bins == 0 {
            return Err(ChannelError::invalid("num_bins", "must be positive"));
        }
        if self.noise.len() != self.num_users {
            return Err(ChannelError::invalid(
                "noise",
                format!("expected {} receivers, found {}", self.num_users, self.noise.len()),
            ));
        }
        for (k, row) in self.noise.iter().enumerate() {
            if row.len() != self.num_bins {
                return Err(ChannelError::invalid(
                    "noise",
                    format!("receiver {k}: expected {} bins, found {}", self.num_bins, row.len()),
                ));
            }
            if let Some(f) = row.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
                return Err(ChannelError::invalid(
                    "noise",
                    format!("noise[{k}][{f}] = {} is not strictly positive", row[f]),
                ));
            }
        }
        if self.gain.len() != self.num_users {
            return Err(ChannelError::invalid(
                "gain",
                format!("expected {} transmitters, found {}", self.num_users, self.gain.len()),
            ));
        }
        for (j, per_rx) in self.gain.iter().enumerate() {
            if per_rx.len() != self.num_users {
                return Err(ChannelError::invalid(
                    "gain",
                    format!(
                        "transmitter {j}: expected {} receivers, found {}",
                        self.num_users,
                        per_rx.len()
                    ),
                ));
            }
            for (k, row) in per_rx.iter().enumerate() {
                if row.len() != self.num_bins {
                    return Err(ChannelError::invalid(
                        "gain",
                        format!("gain[{j}][{k}]: expected {} bins, found {}", self.num_bins, row.len()),
                    ));
                }
                for (f, &g) in row.iter().enumerate() {
                    let ok = if j == k { g > 0.0 } else { g >= 0.0 };
                    if !ok || !g.is_finite() {
                        return Err(ChannelError::invalid(
                            "gain",
                            format!("gain[{j}][{k}][{f}] = {g} is not admissible"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        let ch: ChannelRealization = serde_json::from_str(text)?;
        ch.validate()?;
        Ok(ch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedChannel {
    /// `noise_norm[k][f] = N_k^f`.
    noise_norm: Vec<Vec<f64>>,
    /// `cross[j][k][f] = alpha_jk^f`; the diagonal `cross[k][k]` is zero.
    cross: Vec<Vec<Vec<f64>>>,
}

impl NormalizedChannel {
    /// Builds a normalized channel directly, e.g. for the hand-specified
    /// two-user examples. `cross[k][k]` is ignored and set to zero.
    pub fn new(noise_norm: Vec<Vec<f64>>, mut cross: Vec<Vec<Vec<f64>>>) -> Result<Self, ChannelError> {
        let k_users = noise_norm.len();
        if k_users == 0 {
            return Err(ChannelError::invalid("noise_norm", "no users"));
        }
        let n_bins = noise_norm[0].len();
        if n_bins == 0 {
            return Err(ChannelError::invalid("noise_norm", "no bins"));
        }
        for row in &noise_norm {
            if row.len() != n_bins || row.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(ChannelError::invalid("noise_norm", "ragged or non-positive entries"));
            }
        }
        if cross.len() != k_users || cross.iter().any(|r| r.len() != k_users) {
            return Err(ChannelError::invalid("cross", "must be K x K x N"));
        }
        for (j, per_rx) in cross.iter_mut().enumerate() {
            for (k, row) in per_rx.iter_mut().enumerate() {
                if j == k {
                    *row = vec![0.0; n_bins];
                    continue;
                }
                if row.len() != n_bins || row.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
                    return Err(ChannelError::invalid("cross", "ragged or negative entries"));
                }
            }
        }
        Ok(NormalizedChannel { noise_norm, cross })
    }

    /// Symmetric two-user channel: `noise[k][f]` with a common cross ratio.
    pub fn two_user(noise_norm: [Vec<f64>; 2], alpha: f64) -> Result<Self, ChannelError> {
        let n = noise_norm[0].len();
        let [a, b] = noise_norm;
        NormalizedChannel::new(
            vec![a, b],
            vec![vec![vec![0.0; n], vec![alpha; n]], vec![vec![alpha; n], vec![0.0; n]]],
        )
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.noise_norm.len()
    }

    #[inline]
    pub fn num_bins(&self) -> usize {
        self.noise_norm[0].len()
    }

    /// `N_k^f` for receiver `k`.
    #[inline]
    pub fn noise(&self, k: usize) -> &[f64] {
        &self.noise_norm[k]
    }

    /// `alpha_jk^f`: interference of transmitter `j` at receiver `k`.
    #[inline]
    pub fn cross(&self, j: usize, k: usize) -> &[f64] {
        &self.cross[j][k]
    }

    pub fn noise_matrix(&self) -> &[Vec<f64>] {
        &self.noise_norm
    }

    /// The hollow `K x K` matrix `A^f` with `[A^f]_jk = alpha_jk^f`.
    pub fn coupling_matrix(&self, f: usize) -> DMatrix<f64> {
        let k_users = self.num_users();
        DMatrix::from_fn(k_users, k_users, |j, k| if j == k { 0.0 } else { self.cross[j][k][f] })
    }

    /// `max_f ||A^f||_2`.
    pub fn max_spectral_norm(&self) -> f64 {
        (0..self.num_bins())
            .map(|f| {
                self.coupling_matrix(f)
                    .singular_values()
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// True when every bin satisfies `||A^f||_2 < 1`, which guarantees a
    /// unique Nash equilibrium reachable by iterative water-filling.
    pub fn is_diagonally_dominant(&self) -> bool {
        (0..self.num_bins()).all(|f| self.coupling_matrix(f).singular_values().iter().all(|&s| s < 1.0))
    }

    /// Effective noise `N_k^f + sum_{j != k} alpha_jk^f P_j^f` seen by `user`,
    /// written into `out`.
    pub fn effective_noise_into<P: AsRef<[f64]>>(&self, user: usize, powers: &[P], out: &mut [f64]) {
        out.copy_from_slice(&self.noise_norm[user]);
        for (j, p) in powers.iter().enumerate() {
            if j == user {
                continue;
            }
            for ((o, &a), &pj) in out.iter_mut().zip(&self.cross[j][user]).zip(p.as_ref()) {
                *o += a * pj;
            }
        }
    }

    /// Achievable rate of `user` in nats for a full power profile.
    pub fn rate_nats<P: AsRef<[f64]>>(&self, user: usize, powers: &[P]) -> f64 {
        let mut nu = vec![0.0; self.num_bins()];
        self.effective_noise_into(user, powers, &mut nu);
        powers[user]
            .as_ref()
            .iter()
            .zip(&nu)
            .map(|(&p, &v)| (p / v).ln_1p())
            .sum()
    }

    /// Achievable rate of `user` in bits for a full power profile.
    pub fn rate_bits<P: AsRef<[f64]>>(&self, user: usize, powers: &[P]) -> f64 {
        crate::nats_to_bits(self.rate_nats(user, powers))
    }

    /// Channel seen by the users in `keep` once every other user's power is
    /// frozen into their noise: `N~_k^f = N_k^f + sum_{j fixed} alpha_jk^f P_j^f`.
    pub fn fold_fixed_users<P: AsRef<[f64]>>(&self, keep: &[usize], powers: &[P]) -> NormalizedChannel {
        let noise_norm = keep
            .iter()
            .map(|&k| {
                let mut row = self.noise_norm[k].clone();
                for (j, p) in powers.iter().enumerate() {
                    if keep.contains(&j) {
                        continue;
                    }
                    for ((r, &a), &pj) in row.iter_mut().zip(&self.cross[j][k]).zip(p.as_ref()) {
                        *r += a * pj;
                    }
                }
                row
            })
            .collect();
        let cross = keep
            .iter()
            .map(|&j| keep.iter().map(|&k| self.cross[j][k].clone()).collect())
            .collect();
        NormalizedChannel { noise_norm, cross }
    }
}

/// Divides each receiver's noise and incoming gains by its direct gain.
pub fn normalize(ch: &ChannelRealization) -> Result<NormalizedChannel, ChannelError> {
    ch.validate()?;
    let k_users = ch.num_users;
    let noise_norm = (0..k_users)
        .map(|k| ch.noise[k].iter().zip(&ch.gain[k][k]).map(|(&s, &h)| s / h).collect())
        .collect();
    let cross = (0..k_users)
        .map(|j| {
            (0..k_users)
                .map(|k| {
                    if j == k {
                        vec![0.0; ch.num_bins]
                    } else {
                        ch.gain[j][k].iter().zip(&ch.gain[k][k]).map(|(&g, &h)| g / h).collect()
                    }
                })
                .collect()
        })
        .collect();
    Ok(NormalizedChannel { noise_norm, cross })
}

/// Tapped-delay-line profile with exponentially decaying ray powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RayleighProfile {
    pub num_rays: usize,
    /// Delay between adjacent rays, seconds.
    pub ray_spacing: f64,
    /// Occupied bandwidth, Hz.
    pub bandwidth: f64,
    /// E-folding time of the ray power profile, seconds.
    pub decay_constant: f64,
}

impl Default for RayleighProfile {
    fn default() -> Self {
        RayleighProfile {
            num_rays: 4,
            ray_spacing: 160e-9,
            bandwidth: 6.25e6,
            decay_constant: 160e-9,
        }
    }
}

impl RayleighProfile {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.num_rays == 0 {
            return Err(ChannelError::Profile("num_rays must be at least 1".into()));
        }
        for (name, v) in [
            ("ray_spacing", self.ray_spacing),
            ("bandwidth", self.bandwidth),
            ("decay_constant", self.decay_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ChannelError::Profile(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Ray variances for a link with the given total power.
    pub fn ray_variances(&self, total_power: f64) -> Vec<f64> {
        let weights: Vec<f64> = (0..self.num_rays)
            .map(|m| (-(m as f64) * self.ray_spacing / self.decay_constant).exp())
            .collect();
        let sum: f64 = weights.iter().sum();
        weights.into_iter().map(|w| total_power * w / sum).collect()
    }
}

/// Users, bins, per-link powers and noise level of a random channel ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub num_users: usize,
    pub num_bins: usize,
    /// Total ray power of every direct link `H_kk`.
    #[serde(default = "one")]
    pub direct_power: f64,
    /// Total ray power of every cross link `H_jk`, `j != k`.
    pub cross_power: f64,
    /// Noise PSD `sigma_k^f`, identical for every receiver and bin.
    pub noise: f64,
}

fn one() -> f64 {
    1.0
}

impl Topology {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.num_users < 2 {
            return Err(ChannelError::invalid("num_users", "need at least two users"));
        }
        if self.num_bins == 0 {
            return Err(ChannelError::invalid("num_bins", "must be positive"));
        }
        if !(self.direct_power > 0.0 && self.direct_power.is_finite()) {
            return Err(ChannelError::invalid("direct_power", "must be positive"));
        }
        if !(self.cross_power >= 0.0 && self.cross_power.is_finite()) {
            return Err(ChannelError::invalid("cross_power", "must be non-negative"));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(ChannelError::invalid("noise", "must be positive"));
        }
        Ok(())
    }
}

/// Draws one frequency-selective realization. Every ordered link has its
/// own RNG stream, so a link's response depends only on `(seed, j, k)`.
pub fn generate_channel(
    profile: &RayleighProfile,
    topology: &Topology,
    seed: u64,
) -> Result<ChannelRealization, ChannelError> {
    profile.validate()?;
    topology.validate()?;
    let k_users = topology.num_users;
    let n_bins = topology.num_bins;
    let delays: Vec<f64> = (0..profile.num_rays).map(|m| m as f64 * profile.ray_spacing).collect();
    let direct = profile.ray_variances(topology.direct_power);
    let cross = profile.ray_variances(topology.cross_power);

    let mut gain = vec![vec![Vec::new(); k_users]; k_users];
    for (j, per_rx) in gain.iter_mut().enumerate() {
        for (k, slot) in per_rx.iter_mut().enumerate() {
            let variances = if j == k { &direct } else { &cross };
            let mut rng = stream_rng(seed, (j * k_users + k) as u64);
            let taps: Vec<Complex64> = variances
                .iter()
                .map(|&v| {
                    let scale = (v / 2.0).sqrt();
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(scale * re, scale * im)
                })
                .collect();
            *slot = (0..n_bins)
                .map(|f| {
                    let freq = f as f64 / n_bins as f64 * profile.bandwidth;
                    taps.iter()
                        .zip(&delays)
                        .map(|(g, &d)| g * Complex64::from_polar(1.0, -std::f64::consts::TAU * freq * d))
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .collect();
        }
    }
    let noise = vec![vec![topology.noise; n_bins]; k_users];
    let ch = ChannelRealization {
        num_users: k_users,
        num_bins: n_bins,
        gain,
        noise,
    };
    // A direct tap set of exact zeros has probability zero but would break
    // normalization, so it is reported rather than assumed away.
    ch.validate()?;
    Ok(ch)
}

#[derive(Debug, Clone)]
pub struct AdmissibleDraw {
    pub channel: ChannelRealization,
    pub normalized: NormalizedChannel,
    /// Draws discarded before this one.
    pub rejections: usize,
}

/// Rejection-samples [`generate_channel`] until the draw is diagonally
/// dominant. Attempt `i` uses the seed derived from `(seed, i)`.
pub fn sample_admissible_channel(
    profile: &RayleighProfile,
    topology: &Topology,
    seed: u64,
    rejection_cap: usize,
) -> Result<AdmissibleDraw, ChannelError> {
    for attempt in 0..rejection_cap {
        let channel = generate_channel(profile, topology, derive_seed(seed, attempt as u64))?;
        let normalized = normalize(&channel)?;
        if normalized.is_diagonally_dominant() {
            return Ok(AdmissibleDraw {
                channel,
                normalized,
                rejections: attempt,
            });
        }
    }
    Err(ChannelError::RejectionCapExceeded {
        attempts: rejection_cap,
    })
}
