//! Brute force over feasible stopping rules of a single arm.
//!
//! A rule stops or continues at every reachable switch point of the first
//! `horizon` steps, independently per (time, state), and from then on follows
//! one of the stationary stop sets. Every combination is evaluated exactly:
//! the prefix by forward propagation, the stationary tail by a linear solve
//! over the infinite horizon.

use crate::error::{RmabError, Result};
use crate::linalg::solve_discounted;
use crate::model::{ArmModel, Discount};

pub const DEFAULT_RULE_CAP: u128 = 1 << 22;

/// One enumerated stopping rule.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EnumeratedRule {
    pub stop_at_start: bool,
    /// `prefix[n - 1]`: states where the rule stops at time `n`.
    pub prefix: Vec<Vec<usize>>,
    /// Stationary stop set used after the prefix.
    pub tail: Vec<usize>,
}

impl EnumeratedRule {
    /// Stopping time along a path starting at local time 0; `path.len()` if
    /// the path never stops.
    pub fn stop_time(&self, path: &[usize]) -> usize {
        for (n, s) in path.iter().enumerate() {
            let stop = match n {
                0 => self.stop_at_start,
                n if n <= self.prefix.len() => self.prefix[n - 1].contains(s),
                _ => self.tail.contains(s),
            };
            if stop {
                return n;
            }
        }
        path.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingEnumeration {
    pub best: f64,
    pub rule: EnumeratedRule,
    pub rules_examined: u64,
}

/// Receives (accrued reward, E γ^τ, prefix stop sets, tail stop set).
type Visit<'v> = dyn FnMut(f64, f64, &[Vec<usize>], &[usize]) + 'v;

struct Tail {
    set: Vec<usize>,
    reward: Vec<f64>,
    discount_at_stop: Vec<f64>,
}

struct Enumerator<'a> {
    arm: &'a ArmModel,
    gamma: f64,
    rewards: Vec<f64>,
    horizon: usize,
    tails: Vec<Tail>,
    examined: u64,
}

fn switch_points(arm: &ArmModel) -> Vec<usize> {
    (0..arm.len()).filter(|&s| arm.is_switchable(s)).collect()
}

impl<'a> Enumerator<'a> {
    fn new(arm: &'a ArmModel, discount: &Discount, start: usize, horizon: usize, cap: u128) -> Result<Self> {
        let sw = switch_points(arm);
        if sw.len() > 20 {
            return Err(RmabError::TooLarge {
                what: "stationary stop sets",
                count: 1u128 << sw.len(),
                cap,
            });
        }
        // decision nodes: switch points reachable at times 1..=horizon
        let mut support = vec![false; arm.len()];
        support[start] = true;
        let mut bits = sw.len() as u32;
        for _ in 0..horizon {
            let mut next = vec![false; arm.len()];
            for s in (0..arm.len()).filter(|&s| support[s]) {
                for (t, _) in arm.successors(s) {
                    next[t] = true;
                }
            }
            support = next;
            bits += sw.iter().filter(|&&s| support[s]).count() as u32;
            if bits > 126 {
                break;
            }
        }
        let count = 1u128 << bits.min(127);
        if count > cap {
            return Err(RmabError::TooLarge {
                what: "feasible stopping rules",
                count,
                cap,
            });
        }
        let rewards: Vec<f64> = arm.reward_rates().iter().map(|&r| discount.step_reward(r)).collect();
        let n = arm.len();
        let tails = (0u32..(1 << sw.len()))
            .map(|mask| {
                let set: Vec<usize> = sw.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &s)| s).collect();
                let stop: Vec<bool> = (0..n).map(|s| set.contains(&s)).collect();
                let coeff = |i: usize, j: usize| if stop[i] { 0.0 } else { arm.kernel_row(i)[j] };
                let r: Vec<f64> = (0..n).map(|s| if stop[s] { 0.0 } else { rewards[s] }).collect();
                let g: Vec<f64> = (0..n).map(|s| if stop[s] { 1.0 } else { 0.0 }).collect();
                Tail {
                    reward: solve_discounted(n, discount.gamma, coeff, &r),
                    discount_at_stop: solve_discounted(n, discount.gamma, coeff, &g),
                    set,
                }
            })
            .collect();
        Ok(Self {
            arm,
            gamma: discount.gamma,
            rewards,
            horizon,
            tails,
            examined: 0,
        })
    }

    fn step(&self, alive: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; alive.len()];
        for (s, &p) in alive.iter().enumerate() {
            if p > 0.0 {
                for (t, q) in self.arm.successors(s) {
                    next[t] += p * q;
                }
            }
        }
        next
    }

    /// Visits (accrued reward, E γ^τ) of every rule extending `prefix`.
    #[allow(clippy::too_many_arguments)]
    fn walk(
        &mut self,
        n: usize,
        disc: f64,
        alive: Vec<f64>,
        reward: f64,
        stopped: f64,
        prefix: &mut Vec<Vec<usize>>,
        visit: &mut Visit<'_>,
    ) {
        if n > self.horizon {
            for tail in &self.tails {
                let r: f64 = alive.iter().zip(&tail.reward).map(|(a, v)| a * v).sum();
                let g: f64 = alive.iter().zip(&tail.discount_at_stop).map(|(a, v)| a * v).sum();
                self.examined += 1;
                visit(reward + disc * r, stopped + disc * g, prefix, &tail.set);
            }
            return;
        }
        let nodes: Vec<usize> = (0..alive.len())
            .filter(|&s| alive[s] > 0.0 && self.arm.is_switchable(s))
            .collect();
        for mask in 0u64..(1 << nodes.len()) {
            let chosen: Vec<usize> = nodes.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &s)| s).collect();
            let mut rest = alive.clone();
            let mut g = stopped;
            for &s in &chosen {
                g += disc * rest[s];
                rest[s] = 0.0;
            }
            let r = reward + disc * rest.iter().zip(&self.rewards).map(|(a, v)| a * v).sum::<f64>();
            let next = self.step(&rest);
            prefix.push(chosen);
            self.walk(n + 1, disc * self.gamma, next, r, g, prefix, visit);
            prefix.pop();
        }
    }

    /// Rules that continue at time 0.
    fn run(&mut self, start: usize, visit: &mut Visit<'_>) {
        let mut alive = vec![0.0; self.arm.len()];
        alive[start] = 1.0;
        let reward = self.rewards[start];
        let next = self.step(&alive);
        self.walk(1, self.gamma, next, reward, 0.0, &mut Vec::new(), visit);
    }
}

/// Best value of `E[Σ_{n<τ} γ^n R_n] / (1 − E[γ^τ])` over feasible τ ≥ 1:
/// the index at `start` by exhaustion.
pub fn enumerate_feasible_stopping(
    arm: &ArmModel,
    discount: &Discount,
    start: usize,
    horizon: usize,
) -> Result<StoppingEnumeration> {
    enumerate_feasible_stopping_capped(arm, discount, start, horizon, DEFAULT_RULE_CAP)
}

pub fn enumerate_feasible_stopping_capped(
    arm: &ArmModel,
    discount: &Discount,
    start: usize,
    horizon: usize,
    cap: u128,
) -> Result<StoppingEnumeration> {
    if !arm.is_switchable(start) {
        return Err(RmabError::Domain(format!("state {start} is not a switch point")));
    }
    let mut e = Enumerator::new(arm, discount, start, horizon, cap)?;
    let mut best = f64::NEG_INFINITY;
    let mut rule = EnumeratedRule::default();
    e.run(start, &mut |r, g, prefix, tail| {
        let ratio = r / (1.0 - g);
        if ratio > best {
            best = ratio;
            rule = EnumeratedRule {
                stop_at_start: false,
                prefix: prefix.to_vec(),
                tail: tail.to_vec(),
            };
        }
    });
    Ok(StoppingEnumeration {
        best,
        rule,
        rules_examined: e.examined,
    })
}

/// Best value of `E[Σ_{n<τ} γ^n R_n + m γ^τ]` over feasible τ ≥ 0: the
/// retirement problem by exhaustion.
pub fn enumerate_retirement_value(
    arm: &ArmModel,
    discount: &Discount,
    start: usize,
    m: f64,
    horizon: usize,
) -> Result<StoppingEnumeration> {
    let mut e = Enumerator::new(arm, discount, start, horizon, DEFAULT_RULE_CAP)?;
    let (mut best, mut rule) = if arm.is_switchable(start) {
        (
            m,
            EnumeratedRule {
                stop_at_start: true,
                ..Default::default()
            },
        )
    } else {
        (f64::NEG_INFINITY, EnumeratedRule::default())
    };
    e.run(start, &mut |r, g, prefix, tail| {
        let v = r + m * g;
        if v > best {
            best = v;
            rule = EnumeratedRule {
                stop_at_start: false,
                prefix: prefix.to_vec(),
                tail: tail.to_vec(),
            };
        }
    });
    Ok(StoppingEnumeration {
        best,
        rule,
        rules_examined: e.examined + 1,
    })
}
