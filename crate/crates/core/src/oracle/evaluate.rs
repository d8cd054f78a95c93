use std::collections::{HashMap, VecDeque};

use crate::error::{RmabError, Result};
use crate::policy::{AllocState, Bandit, Choice, PolicySpec};

pub const DEFAULT_CHAIN_CAP: usize = 2_000_000;

/// Exact discounted values of one policy, truncated at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub policy: PolicySpec,
    /// `v(π)`.
    pub total: f64,
    /// `E Σ_t γ^t R^k` over the steps serving arm `k`.
    pub per_arm_reward: Vec<f64>,
    /// `E Σ_t γ^t (1 − γ) M̲^k(T^k(t))` over the steps serving arm `k`.
    pub per_arm_envelope: Vec<f64>,
    /// `E Σ_t γ^t (1 − γ) max_k M̲^k(T^k(t))`.
    pub envelope_max: f64,
    pub chain_states: usize,
}

impl PolicyValue {
    /// Value of the deteriorating surrogate whose reward rate is `β M̲^k`.
    pub fn surrogate(&self) -> f64 {
        self.per_arm_envelope.iter().sum()
    }
}

struct Branch {
    arm: usize,
    weight: f64,
    reward: f64,
    envelope: f64,
    next: Vec<(usize, f64)>,
}

struct Node {
    branches: Vec<Branch>,
    envelope_max: f64,
}

/// Interns every allocation state reachable under `policy`; the policy is
/// stationary on these states, so the chain is built once and then pushed
/// forward for `horizon` steps.
pub fn evaluate_policy_exact(bandit: &Bandit<'_>, policy: &PolicySpec, horizon: usize) -> Result<PolicyValue> {
    evaluate_policy_capped(bandit, policy, horizon, DEFAULT_CHAIN_CAP)
}

pub fn evaluate_policy_capped(
    bandit: &Bandit<'_>,
    policy: &PolicySpec,
    horizon: usize,
    cap: usize,
) -> Result<PolicyValue> {
    policy.check(bandit.num_arms())?;
    let discount = bandit.discount();
    let arms = &bandit.scenario.arms;
    let start = bandit.initial_state();
    let mut ids: HashMap<Vec<u64>, usize> = HashMap::from([(start.key(), 0)]);
    let mut pending: Vec<Option<AllocState>> = vec![Some(start)];
    let mut nodes: Vec<Node> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        let st = pending[x].take().expect("each state expanded once");
        let choice = bandit.decide(policy, &st);
        let free = choice.is_free();
        let options: Vec<(usize, f64)> = match &choice {
            Choice::Forced(k) | Choice::Chosen(k) => vec![(*k, 1.0)],
            Choice::Uniform(list) => list.iter().map(|&k| (k, 1.0 / list.len() as f64)).collect(),
        };
        let mut branches = Vec::with_capacity(options.len());
        for (k, weight) in options {
            let s = st.states[k];
            let mut next = Vec::new();
            for (t, p) in arms[k].successors(s) {
                let succ = bandit.advance(policy, &st, k, t, free);
                let key = succ.key();
                let id = match ids.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = pending.len();
                        if id >= cap {
                            return Err(RmabError::TooLarge {
                                what: "policy chain states",
                                count: id as u128 + 1,
                                cap: cap as u128,
                            });
                        }
                        ids.insert(key, id);
                        pending.push(Some(succ));
                        queue.push_back(id);
                        id
                    }
                };
                next.push((id, p));
            }
            branches.push(Branch {
                arm: k,
                weight,
                reward: discount.step_reward(arms[k].reward_rate(s)),
                envelope: discount.one_minus_gamma * st.envelope[k],
                next,
            });
        }
        nodes.push(Node {
            branches,
            envelope_max: discount.one_minus_gamma * st.envelope.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }

    let d = arms.len();
    let mut per_arm_reward = vec![0.0; d];
    let mut per_arm_envelope = vec![0.0; d];
    let mut envelope_max = 0.0;
    let mut dist = vec![0.0; nodes.len()];
    dist[0] = 1.0;
    let mut disc = 1.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; nodes.len()];
        for (x, node) in nodes.iter().enumerate() {
            let p = dist[x];
            if p == 0.0 {
                continue;
            }
            envelope_max += disc * p * node.envelope_max;
            for b in &node.branches {
                let w = p * b.weight;
                per_arm_reward[b.arm] += disc * w * b.reward;
                per_arm_envelope[b.arm] += disc * w * b.envelope;
                for &(y, q) in &b.next {
                    next[y] += w * q;
                }
            }
        }
        dist = next;
        disc *= discount.gamma;
    }
    Ok(PolicyValue {
        policy: policy.clone(),
        total: per_arm_reward.iter().sum(),
        per_arm_reward,
        per_arm_envelope,
        envelope_max,
        chain_states: nodes.len(),
    })
}

/// Right-hand side of the optimal-value formula in terms of lower
/// envelopes, under the index policy.
pub fn envelope_formula_value(bandit: &Bandit<'_>, horizon: usize) -> Result<f64> {
    Ok(evaluate_policy_exact(bandit, &PolicySpec::gittins(), horizon)?.envelope_max)
}
