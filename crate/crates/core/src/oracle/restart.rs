use crate::error::{RmabError, Result};
use crate::model::{ArmModel, Discount};

/// Classical index of an arm that may be switched at every instant, via
/// the restart-in-state MDP: in every state one may either continue or
/// restart from `state`. The optimal value at `state` is the index.
pub fn classical_gittins_restart(arm: &ArmModel, discount: &Discount, state: usize) -> Result<f64> {
    if !arm.all_switchable() {
        return Err(RmabError::Domain("restart-in-state needs every state to be a switch point".into()));
    }
    let n = arm.len();
    let gamma = discount.gamma;
    let rewards: Vec<f64> = arm.reward_rates().iter().map(|&r| discount.step_reward(r)).collect();
    let mut value = vec![0.0; n];
    let scale = arm.max_rate().max(1e-300) / discount.beta;
    let tol = 1e-14 * scale;
    // contraction by γ per sweep: 40/(1 − γ) sweeps shrink the error by e^{-40}
    let max_sweeps = (40.0 / discount.one_minus_gamma) as usize + 1_000;
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let backup = |x: usize, v: &[f64]| rewards[x] + gamma * arm.successors(x).map(|(y, p)| p * v[y]).sum::<f64>();
        let restart = backup(state, &value);
        residual = 0.0;
        let next: Vec<f64> = (0..n)
            .map(|x| {
                let v = backup(x, &value).max(restart);
                residual = residual.max((v - value[x]).abs());
                v
            })
            .collect();
        value = next;
        if residual <= tol {
            return Ok(value[state]);
        }
    }
    // rounding can keep the residual a few ulps above `tol`
    if residual <= 1e-12 * scale {
        return Ok(value[state]);
    }
    Err(RmabError::NonConvergence {
        sweeps: max_sweeps,
        residual,
    })
}
