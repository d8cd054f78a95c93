use crate::error::{RmabError, Result};
use crate::model::Scenario;

pub const TREE_CAP: u128 = 100_000_000;

/// Optimal value by plain recursion over every action and outcome sequence
/// of length `horizon`, without memoization. Slow by construction; meant to
/// check the product-chain backward induction on tiny instances.
pub fn exhaustive_tree_value(scenario: &Scenario, horizon: usize) -> Result<f64> {
    let branching: u128 = scenario
        .arms
        .iter()
        .map(|a| (0..a.len()).map(|s| a.successors(s).count()).max().unwrap_or(1) as u128)
        .sum();
    let count = branching.checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if count > TREE_CAP {
        return Err(RmabError::TooLarge {
            what: "policy tree leaves",
            count,
            cap: TREE_CAP,
        });
    }
    let discount = scenario.discount();
    let mut states: Vec<usize> = scenario.arms.iter().map(|a| a.initial()).collect();
    fn go(scenario: &Scenario, states: &mut Vec<usize>, depth: usize, gamma: f64, weight: f64) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let arms = &scenario.arms;
        let forced = (0..arms.len()).find(|&k| !arms[k].is_switchable(states[k]));
        let mut best = f64::NEG_INFINITY;
        for k in 0..arms.len() {
            if forced.is_some_and(|f| f != k) {
                continue;
            }
            let s = states[k];
            let mut v = weight * arms[k].reward_rate(s);
            for (t, p) in arms[k].successors(s) {
                states[k] = t;
                v += gamma * p * go(scenario, states, depth - 1, gamma, weight);
            }
            states[k] = s;
            best = best.max(v);
        }
        best
    }
    let weight = discount.one_minus_gamma / discount.beta;
    Ok(go(scenario, &mut states, horizon, discount.gamma, weight))
}
