//! Seeded Monte Carlo evaluation of attack policies.
//!
//! Each path starts with all holding times at zero (every estimate was just
//! delivered), queries the policy on the current holding-time vector, draws
//! one Bernoulli arrival per channel (rate ε̲ᵢ on the attacked channels, εᵢ
//! elsewhere), and accumulates the weighted estimation error
//! `Σᵢ wᵢ·Tr(hᵢ^{τᵢ}(P̂ⁱ))` after the draw. Paths run one per seed, each on
//! its own counter-based RNG stream (`ChaCha12` seeded from the seed value),
//! so results are bitwise reproducible regardless of how many worker
//! threads execute the seeds; the statistics reported are across-seed mean
//! and standard error.
//!
//! `reward_clamp` controls whether the reward lookup clamps the holding
//! time at a truncation level. Clamped evaluation matches the truncated
//! solver's chain (and is what the experiment flows use, so simulated
//! means are comparable to solver gains); unclamped evaluation scores the
//! true infinite chain. Trajectories and policies always see the raw τ.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{MdpProblem, SolveResult, StateSpace};
use crate::model::System;
use crate::whittle::IndexTable;
use std::sync::Arc;

/// The simulation RNG. Counter-based, cross-platform stable for a given
/// seed; the identifier below is recorded in every output artifact.
pub type SimRng = ChaCha12Rng;
/// Identifier of the RNG algorithm + seeding scheme.
pub const RNG_ID: &str = "chacha12/seed-u64";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("policy {policy} returned a subset of size {got}, budget is {expected}")]
    WrongSubsetSize {
        policy: String,
        got: usize,
        expected: usize,
    },
    #[error("policy {policy} selected channel {channel} outside 0..{m}")]
    ChannelOutOfRange {
        policy: String,
        channel: usize,
        m: usize,
    },
    #[error("invalid simulation settings: {0}")]
    InvalidSettings(String),
}

/// An attack policy: given the holding times, pick which channels to jam.
/// Implementations must be deterministic given (τ, the RNG stream).
pub trait Policy: Sync {
    fn name(&self) -> &str;
    /// Writes the attacked subset (size N, indices in `0..M`) into `out`.
    fn select(&self, tau: &[u32], rng: &mut SimRng, out: &mut Vec<usize>);
}

/// Jams the `n` channels with the largest holding times, ties to the
/// smallest channel index.
pub fn myopic_action(tau: &[u32], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tau.len()).collect();
    idx.sort_unstable_by(|&a, &b| tau[b].cmp(&tau[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = idx[..n].to_vec();
    out.sort_unstable();
    out
}

/// Jams the `n` channels of greatest index `oᵢ(τᵢ)`. Beyond a table's
/// reliable range the last index value is reused with the raw holding time
/// as a tie-break (the index is nondecreasing, so a longer holding time is
/// never less urgent); remaining ties go to the smallest channel index.
pub fn index_action(tables: &[IndexTable], tau: &[u32], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tau.len()).collect();
    idx.sort_unstable_by(|&a, &b| {
        let oa = tables[a].value_clamped(tau[a] as usize);
        let ob = tables[b].value_clamped(tau[b] as usize);
        ob.total_cmp(&oa)
            .then(tau[b].cmp(&tau[a]))
            .then(a.cmp(&b))
    });
    let mut out: Vec<usize> = idx[..n].to_vec();
    out.sort_unstable();
    out
}

/// Uniformly random size-`n` subset of the `m` channels.
pub fn random_action(m: usize, n: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut out = rand::seq::index::sample(rng, m, n).into_vec();
    out.sort_unstable();
    out
}

/// Myopic policy object.
pub struct MyopicPolicy {
    pub n: usize,
}

impl Policy for MyopicPolicy {
    fn name(&self) -> &str {
        "myopic"
    }

    fn select(&self, tau: &[u32], _rng: &mut SimRng, out: &mut Vec<usize>) {
        *out = myopic_action(tau, self.n);
    }
}

/// Uniform-random policy object.
pub struct RandomPolicy {
    pub n: usize,
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&self, tau: &[u32], rng: &mut SimRng, out: &mut Vec<usize>) {
        *out = random_action(tau.len(), self.n, rng);
    }
}

/// Index-based policy object.
pub struct IndexPolicy {
    pub tables: Vec<IndexTable>,
    pub n: usize,
}

impl Policy for IndexPolicy {
    fn name(&self) -> &str {
        "index"
    }

    fn select(&self, tau: &[u32], _rng: &mut SimRng, out: &mut Vec<usize>) {
        *out = index_action(&self.tables, tau, self.n);
    }
}

/// Table lookup into a solved policy, with holding times clamped to the
/// table's truncation level (mirroring the solver's state space).
pub struct TabularPolicy {
    policy: Arc<Vec<u16>>,
    actions: Arc<Vec<Vec<usize>>>,
    space: StateSpace,
}

/// Bridges a [`SolveResult`] into the simulator.
pub fn tabular_policy(result: &SolveResult, problem: &MdpProblem) -> TabularPolicy {
    TabularPolicy {
        policy: Arc::new(result.policy.clone()),
        actions: Arc::new(problem.actions.clone()),
        space: problem.space.clone(),
    }
}

impl Policy for TabularPolicy {
    fn name(&self) -> &str {
        "optimal"
    }

    fn select(&self, tau: &[u32], _rng: &mut SimRng, out: &mut Vec<usize>) {
        let last = self.space.base - 1;
        let mut flat = 0usize;
        for &t in tau.iter().rev() {
            flat = flat * self.space.base + (t as usize).min(last);
        }
        out.clear();
        out.extend_from_slice(&self.actions[self.policy[flat] as usize]);
    }
}

/// Advances every holding time by one Bernoulli draw: reset to 0 on
/// arrival (rate ε̲ᵢ if attacked, εᵢ otherwise), increment on loss. The
/// holding times themselves are never clamped.
pub fn step_channels(tau: &mut [u32], attack: &[usize], systems: &[System], rng: &mut SimRng) {
    let mask = attack_mask(attack);
    for (i, t) in tau.iter_mut().enumerate() {
        let attacked = match &mask {
            Some(m) => m >> i & 1 == 1,
            None => attack.contains(&i),
        };
        let rate = if attacked {
            systems[i].model.attacked_rate
        } else {
            systems[i].model.arrival_rate
        };
        if rng.random::<f64>() < rate {
            *t = 0;
        } else {
            *t += 1;
        }
    }
}

fn attack_mask(attack: &[usize]) -> Option<u64> {
    let mut mask = 0u64;
    for &i in attack {
        if i >= 64 {
            return None;
        }
        mask |= 1 << i;
    }
    Some(mask)
}

/// Simulation settings; `seeds` also fixes the number of paths.
#[derive(Debug, Clone)]
pub struct SimSettings {
    /// Attack budget N every selected subset must have.
    pub budget: usize,
    pub horizon: u64,
    pub burn_in: u64,
    pub seeds: Vec<u64>,
    /// Clamp holding times at this level for the reward lookup only
    /// (`Some(trunc)` matches a solver run at `trunc`; `None` scores the
    /// untruncated chain).
    pub reward_clamp: Option<usize>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            budget: 1,
            horizon: 200_000,
            burn_in: 1_000,
            seeds: (0..20).collect(),
            reward_clamp: None,
        }
    }
}

/// Across-seed Monte Carlo estimate of the time-averaged weighted
/// estimation error under one policy.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub policy: String,
    pub mean_reward: f64,
    /// Standard error across seeds (not within-path).
    pub stderr: f64,
    pub horizon: u64,
    pub burn_in: u64,
    pub seeds: Vec<u64>,
    pub per_seed_means: Vec<f64>,
    pub rng_id: String,
}

/// Runs one path per seed (in parallel; aggregation is order-fixed) and
/// reports the across-seed mean and standard error.
pub fn evaluate_policy(
    systems: &[System],
    policy: &dyn Policy,
    settings: &SimSettings,
) -> Result<SimReport, SimError> {
    if settings.horizon <= settings.burn_in {
        return Err(SimError::InvalidSettings(format!(
            "horizon {} must exceed burn-in {}",
            settings.horizon, settings.burn_in
        )));
    }
    if settings.seeds.is_empty() {
        return Err(SimError::InvalidSettings("no seeds given".into()));
    }

    let per_seed_means: Vec<f64> = settings
        .seeds
        .par_iter()
        .map(|&seed| run_path(systems, policy, settings, seed))
        .collect::<Result<_, _>>()?;

    let k = per_seed_means.len() as f64;
    let mean = per_seed_means.iter().sum::<f64>() / k;
    let stderr = if per_seed_means.len() > 1 {
        let var = per_seed_means
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(SimReport {
        policy: policy.name().to_string(),
        mean_reward: mean,
        stderr,
        horizon: settings.horizon,
        burn_in: settings.burn_in,
        seeds: settings.seeds.clone(),
        per_seed_means,
        rng_id: RNG_ID.to_string(),
    })
}

fn run_path(
    systems: &[System],
    policy: &dyn Policy,
    settings: &SimSettings,
    seed: u64,
) -> Result<f64, SimError> {
    let m = systems.len();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut caches: Vec<_> = systems
        .iter()
        .map(|s| s.steady.trace_cache(&s.model))
        .collect();
    let weights: Vec<f64> = systems.iter().map(|s| s.model.weight).collect();
    let mut tau = vec![0u32; m];
    let mut attack = Vec::with_capacity(m);
    let mut acc = 0.0;
    for k in 1..=settings.horizon {
        policy.select(&tau, &mut rng, &mut attack);
        if attack.len() != settings.budget {
            return Err(SimError::WrongSubsetSize {
                policy: policy.name().to_string(),
                got: attack.len(),
                expected: settings.budget,
            });
        }
        if let Some(&bad) = attack.iter().find(|&&i| i >= m) {
            return Err(SimError::ChannelOutOfRange {
                policy: policy.name().to_string(),
                channel: bad,
                m,
            });
        }
        step_channels(&mut tau, &attack, systems, &mut rng);
        if k > settings.burn_in {
            for i in 0..m {
                let j = match settings.reward_clamp {
                    Some(clamp) => (tau[i] as usize).min(clamp),
                    None => tau[i] as usize,
                };
                acc += weights[i] * caches[i].get(j);
            }
        }
    }
    Ok(acc / (settings.horizon - settings.burn_in) as f64)
}
