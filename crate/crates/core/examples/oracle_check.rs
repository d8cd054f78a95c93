//! Exact optimum by backward induction on the joint chain, compared with the
//! index policy, the envelope formula and simple baselines.

use rmab::index::IndexTable;
use rmab::model::{compile_restriction, ArmModel, RestrictionSpec, Scenario};
use rmab::oracle::{default_baselines, run_oracle};

fn main() -> rmab::Result<()> {
    let job = ArmModel::unrestricted(
        vec![1.0, 3.0, 0.5],
        vec![vec![0.7, 0.3, 0.0], vec![0.0, 0.8, 0.2], vec![0.0, 0.0, 1.0]],
        0,
    )?;
    let other = ArmModel::unrestricted(vec![2.0, 0.5], vec![vec![0.9, 0.1], vec![0.2, 0.8]], 0)?;
    let scenario = Scenario::new(
        vec![
            compile_restriction(&RestrictionSpec::Nonpreemptive, &job)?,
            compile_restriction(&RestrictionSpec::IntegerGrid { period: 3 }, &other)?,
            ArmModel::constant(1.2),
        ],
        1.0,
        0.1,
        0,
    )
    .with_tail_tolerance(1e-10);
    let d = scenario.discount();
    let tables: Vec<IndexTable> = scenario.arms.iter().map(|a| IndexTable::compute(a, &d)).collect::<Result<_, _>>()?;
    let r = run_oracle(&scenario, &tables, &default_baselines(scenario.num_arms()))?;
    println!("optimal          {:.12}  ({} joint states, horizon {})", r.optimal, r.product_states, r.horizon);
    println!("index policy     {:.12}  gap {:.1e}", r.index_policy.total, r.index_gap());
    println!("envelope formula {:.12}  gap {:.1e}", r.envelope, r.envelope_gap());
    for b in &r.baselines {
        println!("{:<16} {:.12}", b.policy.to_string(), b.total);
    }
    Ok(())
}
