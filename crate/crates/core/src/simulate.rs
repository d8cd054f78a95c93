//! Monte Carlo estimation of policy values.
//!
//! Path `i` draws from its own ChaCha8 stream (master seed, stream `i`), so the
//! estimate does not depend on how paths are spread over threads. Paths are
//! folded in fixed-size chunks and the chunk summaries are merged in order,
//! which keeps results bit-identical across runs and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{RmabError, Result};
use crate::policy::{choose, Bandit, PolicySpec, Sampler};

const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: PolicySpec,
    pub n_paths: usize,
    pub horizon: usize,
    pub mean: f64,
    /// Sample standard deviation over `√n_paths`.
    pub se: f64,
    /// Mean discounted reward earned while serving each arm.
    pub per_arm_reward: Vec<f64>,
    /// Mean local time `T^k(H)` of each arm at the horizon.
    pub per_arm_occupancy: Vec<f64>,
    /// Largest per-path gap between the global-time discount and the
    /// local-time form `γ^u q_u`.
    pub bookkeeping_error: f64,
}

/// Running mean and centred sum of squares.
#[derive(Debug, Clone, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = other.clone();
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n / n;
        self.m2 += other.m2 + delta * delta * self.n * other.n / n;
        self.n = n;
    }
}

#[derive(Debug, Clone)]
struct Summary {
    total: Moments,
    arms: Vec<Moments>,
    occupancy: Vec<Moments>,
    bookkeeping: f64,
}

impl Summary {
    fn new(d: usize) -> Self {
        Self {
            total: Moments::default(),
            arms: vec![Moments::default(); d],
            occupancy: vec![Moments::default(); d],
            bookkeeping: 0.0,
        }
    }

    fn merge(&mut self, other: &Summary) {
        self.total.merge(&other.total);
        for (a, b) in self.arms.iter_mut().zip(&other.arms) {
            a.merge(b);
        }
        for (a, b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            a.merge(b);
        }
        self.bookkeeping = self.bookkeeping.max(other.bookkeeping);
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    Reward,
    Envelope,
}

struct PathOutcome {
    total: f64,
    arms: Vec<f64>,
    occupancy: Vec<usize>,
    bookkeeping: f64,
}

fn simulate_path(
    bandit: &Bandit<'_>,
    sampler: &Sampler,
    policy: &PolicySpec,
    seed: u64,
    path: u64,
    horizon: usize,
    target: Target,
) -> PathOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let discount = bandit.discount();
    let d = bandit.num_arms();
    let arms = &bandit.scenario.arms;
    let mut st = bandit.initial_state();
    let mut per_arm = vec![0.0; d];
    let mut local_form = vec![0.0; d];
    let mut disc = 1.0;
    for t in 0..horizon {
        let choice = bandit.decide(policy, &st);
        let k = choose(&choice, &mut rng);
        let s = st.states[k];
        let term = match target {
            Target::Reward => discount.step_reward(arms[k].reward_rate(s)),
            Target::Envelope => {
                discount.one_minus_gamma * st.envelope.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        };
        per_arm[k] += disc * term;
        // the u-th step of arm k happens at ζ(u) = t; γ^t = γ^u · q_u
        let u = st.local_time[k];
        let q = discount.power(t - u);
        local_form[k] += discount.power(u) * q * term;
        let next = sampler.next_state(k, s, &mut rng);
        bandit.advance_in_place(policy, &mut st, k, next, choice.is_free());
        disc *= discount.gamma;
    }
    let bookkeeping = per_arm
        .iter()
        .zip(&local_form)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    PathOutcome {
        total: per_arm.iter().sum(),
        arms: per_arm,
        occupancy: st.local_time,
        bookkeeping,
    }
}

fn run(
    bandit: &Bandit<'_>,
    policy: &PolicySpec,
    n_paths: usize,
    seed: u64,
    horizon: usize,
    target: Target,
) -> Result<SimResult> {
    if n_paths == 0 {
        return Err(RmabError::Domain("n_paths must be at least 1".into()));
    }
    policy.check(bandit.num_arms())?;
    let d = bandit.num_arms();
    let sampler = Sampler::new(bandit.scenario);
    let chunks: Vec<Summary> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = Summary::new(d);
            for path in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let out = simulate_path(bandit, &sampler, policy, seed, path as u64, horizon, target);
                sum.total.push(out.total);
                for k in 0..d {
                    sum.arms[k].push(out.arms[k]);
                    sum.occupancy[k].push(out.occupancy[k] as f64);
                }
                sum.bookkeeping = sum.bookkeeping.max(out.bookkeeping);
            }
            sum
        })
        .collect();
    let mut all = Summary::new(d);
    for c in &chunks {
        all.merge(c);
    }
    let n = n_paths as f64;
    let se = if n_paths > 1 {
        (all.total.m2.max(0.0) / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(SimResult {
        policy: policy.clone(),
        n_paths,
        horizon,
        mean: all.total.mean,
        se,
        per_arm_reward: all.arms.iter().map(|m| m.mean).collect(),
        per_arm_occupancy: all.occupancy.iter().map(|m| m.mean).collect(),
        bookkeeping_error: all.bookkeeping,
    })
}

/// Estimates the discounted reward of `policy` over `horizon` steps.
pub fn monte_carlo(
    bandit: &Bandit<'_>,
    policy: &PolicySpec,
    n_paths: usize,
    seed: u64,
    horizon: usize,
) -> Result<SimResult> {
    run(bandit, policy, n_paths, seed, horizon, Target::Reward)
}

/// Estimates `E Σ_t γ^t (1 − γ) max_k M̲^k(T^k(t))` under the index policy;
/// each step's term is attributed to the arm served at that step.
pub fn estimate_envelope_value(bandit: &Bandit<'_>, n_paths: usize, seed: u64, horizon: usize) -> Result<SimResult> {
    run(bandit, &PolicySpec::gittins(), n_paths, seed, horizon, Target::Envelope)
}
