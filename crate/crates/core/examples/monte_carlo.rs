//! Monte Carlo estimates with standard errors next to the exact values.

use std::path::Path;

use rmab::format::load_scenario;
use rmab::index::IndexTable;
use rmab::oracle::evaluate_policy_exact;
use rmab::policy::{Bandit, PolicySpec};
use rmab::simulate::{estimate_envelope_value, monte_carlo};

fn main() -> rmab::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/mixed_grid.toml");
    let (_, scenario) = load_scenario(&path)?;
    let d = scenario.discount();
    let tables: Vec<IndexTable> = scenario.arms.iter().map(|a| IndexTable::compute(a, &d)).collect::<Result<_, _>>()?;
    let bandit = Bandit::new(&scenario, &tables)?;
    let h = scenario.horizon_steps;
    for policy in ["gittins", "myopic", "round-robin", "random"] {
        let policy: PolicySpec = policy.parse()?;
        let exact = evaluate_policy_exact(&bandit, &policy, h)?.total;
        let mc = monte_carlo(&bandit, &policy, 20_000, 1, h)?;
        println!(
            "{:<12} exact {exact:.6}  estimate {:.6} ± {:.1e}  z {:+.2}",
            policy.to_string(),
            mc.mean,
            mc.se,
            (mc.mean - exact) / mc.se
        );
    }
    let env = estimate_envelope_value(&bandit, 20_000, 1, h)?;
    println!("envelope integral estimate {:.6} ± {:.1e}", env.mean, env.se);
    Ok(())
}
