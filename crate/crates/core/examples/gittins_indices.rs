//! Restricted indices against their unrestricted counterparts, with the
//! restart-in-state computation as an independent check.

use rmab::index::IndexTable;
use rmab::model::{compile_restriction, ArmModel, Discount, RestrictionSpec};
use rmab::oracle::classical_gittins_restart;

fn main() -> rmab::Result<()> {
    let d = Discount::new(1.0, 0.1);
    let base = ArmModel::unrestricted(vec![1.0, 3.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0)?;
    let free = IndexTable::compute(&base, &d)?;
    for s in 0..base.len() {
        let restart = classical_gittins_restart(&base, &d, s)?;
        println!(
            "unrestricted s{s}: bisection {:.10}  restart {restart:.10}  ({} iterations)",
            free.index(s).unwrap(),
            free.iterations(s)
        );
    }
    for period in [2, 5, 10] {
        let arm = compile_restriction(&RestrictionSpec::IntegerGrid { period }, &base)?;
        let table = IndexTable::compute(&arm, &d)?;
        let at = |b: usize| table.index(arm.switchable_state_for(b).unwrap()).unwrap();
        println!("grid period {period:>2}: s0 {:.10}  s1 {:.10}", at(0), at(1));
    }
    Ok(())
}
