//! Follow the index policy on the machine-breakdown scenario and print its
//! excursions.

use std::path::Path;

use rmab::format::load_scenario;
use rmab::index::IndexTable;
use rmab::policy::{excursion_segments, run_policy, Bandit, PolicySpec};

fn main() -> rmab::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/breakdown.toml");
    let (_, scenario) = load_scenario(&path)?;
    let d = scenario.discount();
    let tables: Vec<IndexTable> = scenario.arms.iter().map(|a| IndexTable::compute(a, &d)).collect::<Result<_, _>>()?;
    let bandit = Bandit::new(&scenario, &tables)?;
    let trace = run_policy(&bandit, &PolicySpec::gittins(), 7, 120)?;
    trace.check_invariants().expect("restrictions hold");
    // merge back-to-back excursions of the same arm into one service run
    let mut runs: Vec<(usize, usize, usize, usize)> = Vec::new();
    for seg in excursion_segments(&trace) {
        match runs.last_mut() {
            Some((arm, _, end, n)) if *arm == seg.arm => {
                *end = seg.end;
                *n += 1;
            }
            _ => runs.push((seg.arm, seg.start, seg.end, 1)),
        }
    }
    for (k, start, end, excursions) in runs {
        let arm = &scenario.arms[k];
        let mut states: Vec<(&str, usize)> = Vec::new();
        for step in &trace.steps[start..end] {
            match states.last_mut() {
                Some((label, n)) if *label == arm.label(step.state) => *n += 1,
                _ => states.push((arm.label(step.state), 1)),
            }
        }
        let states: Vec<String> = states.iter().map(|(l, n)| format!("{l} x{n}")).collect();
        println!("t {start:>3}..{end:<3} {:<6} {excursions:>2} decisions: {}", arm.name(), states.join(", "));
    }
    println!("discounted reward over 120 steps: {:.6}", trace.total_reward());
    Ok(())
}
