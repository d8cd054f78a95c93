use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::error::{RmabError, Result};
use crate::model::Scenario;

pub const DEFAULT_PRODUCT_CAP: u128 = 200_000;

/// Joint chain of all arms. Only the served arm moves; an arm away from a
/// switch point is the only admissible action.
#[derive(Debug, Clone)]
pub struct ProductMdp {
    pub states: Vec<Vec<usize>>,
    pub committed: Vec<Option<usize>>,
    pub actions: Vec<Vec<usize>>,
    /// `transitions[x][i]`: successors when serving `actions[x][i]`.
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    pub rewards: Vec<Vec<f64>>,
    pub gamma: f64,
    pub horizon: usize,
    pub initial: usize,
}

impl ProductMdp {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn build_product_mdp(scenario: &Scenario) -> Result<ProductMdp> {
    build_product_mdp_capped(scenario, DEFAULT_PRODUCT_CAP)
}

pub fn build_product_mdp_capped(scenario: &Scenario, cap: u128) -> Result<ProductMdp> {
    let arms = &scenario.arms;
    let count = arms.iter().map(|a| a.len() as u128).product::<u128>() * arms.len() as u128;
    if count > cap {
        return Err(RmabError::TooLarge {
            what: "product states x arms",
            count,
            cap,
        });
    }
    let discount = scenario.discount();
    let start: Vec<usize> = arms.iter().map(|a| a.initial()).collect();
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut states = vec![start];
    let mut queue = VecDeque::from([0usize]);
    let mut committed = Vec::new();
    let mut actions = Vec::new();
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    // BFS assigns ids in discovery order, so per-state vectors grow in id order
    while let Some(x) = queue.pop_front() {
        let tuple = states[x].clone();
        let stuck: Vec<usize> = (0..arms.len()).filter(|&k| !arms[k].is_switchable(tuple[k])).collect();
        if stuck.len() > 1 {
            return Err(RmabError::Domain("two arms away from switch points at once".into()));
        }
        let c = stuck.first().copied();
        let acts: Vec<usize> = match c {
            Some(k) => vec![k],
            None => (0..arms.len()).collect(),
        };
        let mut trans = Vec::with_capacity(acts.len());
        let mut rew = Vec::with_capacity(acts.len());
        for &k in &acts {
            rew.push(discount.step_reward(arms[k].reward_rate(tuple[k])));
            let mut succ = Vec::new();
            for (t, p) in arms[k].successors(tuple[k]) {
                let mut next = tuple.clone();
                next[k] = t;
                let id = match ids.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        ids.insert(next.clone(), id);
                        states.push(next);
                        queue.push_back(id);
                        id
                    }
                };
                succ.push((id, p));
            }
            trans.push(succ);
        }
        committed.push(c);
        actions.push(acts);
        transitions.push(trans);
        rewards.push(rew);
    }
    Ok(ProductMdp {
        states,
        committed,
        actions,
        transitions,
        rewards,
        gamma: discount.gamma,
        horizon: scenario.horizon_steps,
        initial: 0,
    })
}

/// Finite-horizon backward induction; returns the optimal value at the
/// initial joint state.
pub fn optimal_value(mdp: &ProductMdp) -> f64 {
    optimal_values(mdp)[mdp.initial]
}

/// Stage-0 optimal values of every joint state.
pub fn optimal_values(mdp: &ProductMdp) -> Vec<f64> {
    let mut value = vec![0.0; mdp.len()];
    for _ in 0..mdp.horizon {
        value = (0..mdp.len())
            .into_par_iter()
            .map(|x| {
                mdp.transitions[x]
                    .iter()
                    .zip(&mdp.rewards[x])
                    .map(|(succ, r)| r + mdp.gamma * succ.iter().map(|&(y, p)| p * value[y]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    value
}
