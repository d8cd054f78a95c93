//! Restricted optimal stopping with a retirement option.
//!
//! For a level `m ≥ 0` the gain from retiring at a switch point is `m` (the
//! present value of `βm` per unit time forever, normalized to the current
//! instant). The value function satisfies
//!
//! ```text
//! V(s) = C(s)              if s is not a switch point
//! V(s) = max(m, C(s))      otherwise
//! C(s) = R(s) + γ Σ P(s,s') V(s')
//! ```
//!
//! with `R(s) = rate(s)·(1 − γ)/β`. Ties go to stopping, so the stop region
//! realizes the earliest optimal stopping time.

use crate::error::{RmabError, Result};
use crate::linalg::solve_discounted;
use crate::model::{ArmModel, Discount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QMode {
    #[default]
    Unit,
}

/// Retirement level for the stopping problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSpec {
    pub m: f64,
    pub q_mode: QMode,
}

impl GainSpec {
    pub fn new(m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(RmabError::Domain(format!("retirement level {m} must be finite and ≥ 0")));
        }
        Ok(Self { m, q_mode: QMode::Unit })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Sup-norm residual at which value iteration stops.
    pub tol_v: f64,
    pub max_iter: usize,
    /// Finish with exact policy evaluation on the converged stop region.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_v: 1e-10,
            max_iter: 1_000_000,
            polish: true,
        }
    }
}

/// Solution of the stopping problem at one retirement level.
#[derive(Debug, Clone, PartialEq)]
pub struct SnellSolution {
    pub m: f64,
    /// `V(s; m)`, present value at the current state.
    pub value: Vec<f64>,
    /// `C(s; m)`: value of serving at least one more step.
    pub continuation: Vec<f64>,
    pub stop_region: Vec<bool>,
    /// `C(s; m) − m` at switch points: positive iff continuing strictly beats
    /// retiring now.
    pub phi: Vec<Option<f64>>,
    pub tol: f64,
    pub residual: f64,
    pub sweeps: usize,
    pub policy_rounds: usize,
}

impl SnellSolution {
    pub fn stops_at(&self, s: usize) -> bool {
        self.stop_region[s]
    }

    pub fn stop_states(&self) -> Vec<usize> {
        (0..self.stop_region.len()).filter(|&s| self.stop_region[s]).collect()
    }
}

fn step_rewards(arm: &ArmModel, discount: &Discount) -> Vec<f64> {
    arm.reward_rates().iter().map(|&r| discount.step_reward(r)).collect()
}

fn continuation(arm: &ArmModel, gamma: f64, rewards: &[f64], value: &[f64]) -> Vec<f64> {
    (0..arm.len())
        .map(|s| rewards[s] + gamma * arm.successors(s).map(|(t, p)| p * value[t]).sum::<f64>())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    arm: &ArmModel,
    m: f64,
    tol: f64,
    value: Vec<f64>,
    cont: Vec<f64>,
    stop_region: Vec<bool>,
    sweeps: usize,
    policy_rounds: usize,
) -> SnellSolution {
    let residual = (0..arm.len())
        .map(|s| {
            let target = if arm.is_switchable(s) { m.max(cont[s]) } else { cont[s] };
            (target - value[s]).abs()
        })
        .fold(0.0, f64::max);
    let phi = (0..arm.len())
        .map(|s| arm.is_switchable(s).then(|| cont[s] - m))
        .collect();
    SnellSolution {
        m,
        value,
        continuation: cont,
        stop_region,
        phi,
        tol,
        residual,
        sweeps,
        policy_rounds,
    }
}

/// Value of the stationary rule "retire on entering `stop`".
fn evaluate_stop_rule(arm: &ArmModel, discount: &Discount, m: f64, stop: &[bool]) -> Vec<f64> {
    let rewards = step_rewards(arm, discount);
    let rhs: Vec<f64> = (0..arm.len()).map(|s| if stop[s] { m } else { rewards[s] }).collect();
    solve_discounted(
        arm.len(),
        discount.gamma,
        |i, j| if stop[i] { 0.0 } else { arm.kernel_row(i)[j] },
        &rhs,
    )
}

pub fn solve_snell(arm: &ArmModel, discount: &Discount, gain: GainSpec) -> Result<SnellSolution> {
    solve_snell_with(arm, discount, gain, &SolverConfig::default())
}

/// Value iteration to `tol_v`, then (optionally) policy iteration on the
/// stop region so the returned values are exact for that region.
pub fn solve_snell_with(
    arm: &ArmModel,
    discount: &Discount,
    gain: GainSpec,
    config: &SolverConfig,
) -> Result<SnellSolution> {
    let m = gain.m;
    let gamma = discount.gamma;
    let rewards = step_rewards(arm, discount);
    let n = arm.len();
    let mut value = vec![m; n];
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < config.max_iter {
        let cont = continuation(arm, gamma, &rewards, &value);
        residual = 0.0;
        for s in 0..n {
            let v = if arm.is_switchable(s) { m.max(cont[s]) } else { cont[s] };
            residual = f64::max(residual, (v - value[s]).abs());
            value[s] = v;
        }
        sweeps += 1;
        if residual <= config.tol_v {
            break;
        }
    }
    if residual > config.tol_v {
        return Err(RmabError::NonConvergence { sweeps, residual });
    }
    let tol = config.tol_v;
    let region = |cont: &[f64]| -> Vec<bool> {
        (0..n).map(|s| arm.is_switchable(s) && cont[s] <= m + tol).collect()
    };
    let mut cont = continuation(arm, gamma, &rewards, &value);
    let mut stop = region(&cont);
    let mut rounds = 0;
    if config.polish {
        while rounds < 64 {
            rounds += 1;
            let exact = evaluate_stop_rule(arm, discount, m, &stop);
            let exact_cont = continuation(arm, gamma, &rewards, &exact);
            let next = region(&exact_cont);
            value = exact;
            cont = exact_cont;
            if next == stop {
                break;
            }
            stop = next;
        }
    }
    Ok(finish(arm, m, tol, value, cont, stop, sweeps, rounds))
}

/// Finite-horizon backward induction; retirement is forced at `horizon`,
/// which stands in for the instant at infinity. Returns the stage-0 solution.
pub fn solve_snell_backward(
    arm: &ArmModel,
    discount: &Discount,
    gain: GainSpec,
    horizon: usize,
) -> SnellSolution {
    let m = gain.m;
    let rewards = step_rewards(arm, discount);
    let mut value = vec![m; arm.len()];
    let mut cont = value.clone();
    for _ in 0..horizon {
        cont = continuation(arm, discount.gamma, &rewards, &value);
        value = (0..arm.len())
            .map(|s| if arm.is_switchable(s) { m.max(cont[s]) } else { cont[s] })
            .collect();
    }
    let stop = (0..arm.len())
        .map(|s| arm.is_switchable(s) && cont[s] <= m)
        .collect();
    finish(arm, m, 0.0, value, cont, stop, horizon, 0)
}

/// `φ(s, m)`: optimal excess of serving at least one more step over
/// retiring now. Defined at switch points only.
pub fn phi_value(arm: &ArmModel, discount: &Discount, m: f64, state: usize) -> Result<f64> {
    if !arm.is_switchable(state) {
        return Err(RmabError::Domain(format!(
            "state {state} is not a switch point; use the carried index instead"
        )));
    }
    let sol = solve_snell(arm, discount, GainSpec::new(m)?)?;
    Ok(sol.phi[state].expect("switch point has φ"))
}

/// Stationary hitting rule: stop at the first instant whose state lies in
/// the stop region.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    pub start: usize,
    pub stop_region: Vec<bool>,
}

impl StoppingRule {
    /// First stopping index along `path` (which starts at `start`); a path
    /// that never stops returns `path.len()`, the stand-in for infinity.
    pub fn stop_time(&self, path: &[usize]) -> usize {
        debug_assert_eq!(path.first(), Some(&self.start));
        path.iter()
            .position(|&s| self.stop_region[s])
            .unwrap_or(path.len())
    }

    pub fn stops_immediately(&self) -> bool {
        self.stop_region[self.start]
    }

    pub fn never_stops(&self) -> bool {
        !self.stop_region.iter().any(|&b| b)
    }
}

/// The earliest optimal stopping time from `from_state`.
pub fn sigma(solution: &SnellSolution, from_state: usize) -> StoppingRule {
    StoppingRule {
        start: from_state,
        stop_region: solution.stop_region.clone(),
    }
}

/// `D^λ`: first switch point where `λ·Z ≤ G`. `Z` and `G` share the reward
/// accrued so far, so the rule depends on the path, not only on the state.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRule {
    pub lambda: f64,
    pub start: usize,
    m: f64,
    tol: f64,
    gamma: f64,
    value: Vec<f64>,
    rewards: Vec<f64>,
    switchable: Vec<bool>,
}

impl LambdaRule {
    pub fn stop_time(&self, path: &[usize]) -> usize {
        debug_assert_eq!(path.first(), Some(&self.start));
        let mut accrued = 0.0;
        let mut disc = 1.0;
        for (n, &s) in path.iter().enumerate() {
            if self.switchable[s] {
                let z = accrued + disc * self.value[s];
                let g = accrued + disc * self.m;
                if self.lambda * z <= g + disc * self.tol {
                    return n;
                }
            }
            accrued += disc * self.rewards[s];
            disc *= self.gamma;
        }
        path.len()
    }
}

pub fn d_lambda(
    solution: &SnellSolution,
    arm: &ArmModel,
    discount: &Discount,
    lambda: f64,
    from_state: usize,
) -> Result<LambdaRule> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(RmabError::Domain(format!("λ = {lambda} must lie in (0, 1]")));
    }
    Ok(LambdaRule {
        lambda,
        start: from_state,
        m: solution.m,
        tol: solution.tol,
        gamma: discount.gamma,
        value: solution.value.clone(),
        rewards: step_rewards(arm, discount),
        switchable: arm.switchable_flags().to_vec(),
    })
}

/// `E[Z_{n+1} | s_n = s] − Z_n`, divided by `γ^n`: equals `C(s) − V(s)`.
/// Non-positive everywhere (supermartingale) and zero off the stop region
/// (martingale up to the optimal stopping time).
pub fn one_step_drift(solution: &SnellSolution, arm: &ArmModel, discount: &Discount) -> Vec<f64> {
    let rewards = step_rewards(arm, discount);
    (0..arm.len())
        .map(|s| {
            let next: f64 = arm.successors(s).map(|(t, p)| p * solution.value[t]).sum();
            rewards[s] + discount.gamma * next - solution.value[s]
        })
        .collect()
}

/// `E[γ^σ | s]` for the optimal stopping time σ, with `γ^∞ = 0`.
pub fn expected_discount_at_stop(solution: &SnellSolution, arm: &ArmModel, discount: &Discount) -> Vec<f64> {
    let stop = &solution.stop_region;
    let rhs: Vec<f64> = stop.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    solve_discounted(
        arm.len(),
        discount.gamma,
        |i, j| if stop[i] { 0.0 } else { arm.kernel_row(i)[j] },
        &rhs,
    )
}
