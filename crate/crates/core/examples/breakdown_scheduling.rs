//! Scheduling machines that must be repaired without interruption once they
//! break down: indices, exact optimum and policy comparison.

use std::path::Path;

use rmab::format::load_scenario;
use rmab::index::IndexTable;
use rmab::model::validate_scenario;
use rmab::oracle::{default_baselines, run_oracle};

fn main() -> rmab::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/breakdown.toml");
    let (file, scenario) = load_scenario(&path)?;
    validate_scenario(&scenario, file.tail_tolerance()).into_result()?;
    let d = scenario.discount();
    let tables: Vec<IndexTable> = scenario.arms.iter().map(|a| IndexTable::compute(a, &d)).collect::<Result<_, _>>()?;
    for (arm, t) in scenario.arms.iter().zip(&tables) {
        for s in 0..arm.len() {
            match t.index(s) {
                Some(v) => println!("{:<6} {:<8} index {v:.6}", arm.name(), arm.label(s)),
                None => println!("{:<6} {:<8} under repair, no switching", arm.name(), arm.label(s)),
            }
        }
    }
    let r = run_oracle(&scenario, &tables, &default_baselines(scenario.num_arms()))?;
    println!("optimal {:.10}, index policy gap {:.1e}", r.optimal, r.index_gap());
    for b in &r.baselines {
        println!("  {:<12} loses {:.4}", b.policy.to_string(), r.optimal - b.total);
    }
    Ok(())
}
