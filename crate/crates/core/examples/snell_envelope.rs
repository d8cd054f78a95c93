//! Solve the stopping problem with retirement reward `m` and watch the stop
//! region grow with `m`.

use rmab::model::{compile_restriction, ArmModel, Discount, RestrictionSpec};
use rmab::stopping::{one_step_drift, solve_snell, GainSpec};

fn main() -> rmab::Result<()> {
    let base = ArmModel::unrestricted(
        vec![3.0, 1.5, 0.0],
        vec![vec![0.9, 0.08, 0.02], vec![0.0, 0.85, 0.15], vec![0.3, 0.0, 0.7]],
        0,
    )?;
    let arm = compile_restriction(&RestrictionSpec::StateBased { switchable: vec![true, true, false] }, &base)?;
    let d = Discount::new(1.0, 0.1);
    println!("{:>6}  {:>30}  stop region", "m", "value per state");
    for i in 0..=6 {
        let m = 0.5 * i as f64;
        let sol = solve_snell(&arm, &d, GainSpec::new(m)?)?;
        let values: Vec<String> = sol.value.iter().map(|v| format!("{v:.4}")).collect();
        let worst_drift = one_step_drift(&sol, &arm, &d).into_iter().fold(f64::NEG_INFINITY, f64::max);
        println!("{m:>6.2}  {:>30}  {:?}  (max drift {worst_drift:.1e})", values.join(" "), sol.stop_states());
    }
    Ok(())
}
