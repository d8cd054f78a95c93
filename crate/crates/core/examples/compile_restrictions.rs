//! Encode switching restrictions as state predicates and show the resulting
//! switch points.

use rmab::model::{compile_restriction, ArmModel, RestrictionSpec};

fn main() -> rmab::Result<()> {
    let job = ArmModel::unrestricted(
        vec![1.0, 3.0, 0.5],
        vec![vec![0.7, 0.3, 0.0], vec![0.0, 0.8, 0.2], vec![0.0, 0.0, 1.0]],
        0,
    )?
    .with_name("job")
    .with_labels(vec!["setup".into(), "busy".into(), "done".into()])?;

    let specs = [
        RestrictionSpec::Unrestricted,
        RestrictionSpec::IntegerGrid { period: 3 },
        RestrictionSpec::StateBased { switchable: vec![true, false, true] },
        RestrictionSpec::Nonpreemptive,
    ];
    for spec in &specs {
        let arm = compile_restriction(spec, &job)?;
        println!("{spec}: {} states", arm.len());
        for s in 0..arm.len() {
            let mark = if arm.is_switchable(s) { "switch point" } else { "committed" };
            println!("  {:<10} rate {:.1}  {mark}", arm.label(s), arm.reward_rate(s));
        }
    }
    Ok(())
}
