//! Scenario suite shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmab::index::IndexTable;
use rmab::model::{compile_restriction, ArmModel, RestrictionSpec, Scenario};

pub const TAIL_TOL: f64 = 1e-10;

pub fn arm(rates: &[f64], kernel: &[&[f64]]) -> ArmModel {
    ArmModel::unrestricted(rates.to_vec(), kernel.iter().map(|r| r.to_vec()).collect(), 0).unwrap()
}

pub fn restrict(spec: RestrictionSpec, base: &ArmModel) -> ArmModel {
    compile_restriction(&spec, base).unwrap()
}

pub fn grid(period: usize, base: &ArmModel) -> ArmModel {
    restrict(RestrictionSpec::IntegerGrid { period }, base)
}

pub fn states(flags: &[bool], base: &ArmModel) -> ArmModel {
    restrict(RestrictionSpec::StateBased { switchable: flags.to_vec() }, base)
}

pub fn nonpreemptive(base: &ArmModel) -> ArmModel {
    restrict(RestrictionSpec::Nonpreemptive, base)
}

pub fn volatile() -> ArmModel {
    arm(&[1.0, 3.0], &[&[0.5, 0.5], &[0.5, 0.5]])
}

/// Rate rises then falls for good.
pub fn rise_fall() -> ArmModel {
    arm(&[1.0, 3.0, 0.5], &[&[0.7, 0.3, 0.0], &[0.0, 0.8, 0.2], &[0.0, 0.0, 1.0]])
}

/// Running, worn, under repair.
pub fn machine() -> ArmModel {
    arm(&[3.0, 1.5, 0.0], &[&[0.9, 0.08, 0.02], &[0.0, 0.85, 0.15], &[0.3, 0.0, 0.7]])
}

pub fn lathe() -> ArmModel {
    arm(&[2.0, 0.0], &[&[0.95, 0.05], &[0.4, 0.6]])
}

pub fn four_state() -> ArmModel {
    arm(
        &[0.5, 2.0, 3.5, 1.0],
        &[&[0.6, 0.4, 0.0, 0.0], &[0.0, 0.5, 0.3, 0.2], &[0.3, 0.0, 0.5, 0.2], &[0.5, 0.0, 0.0, 0.5]],
    )
}

pub fn sticky() -> ArmModel {
    arm(&[2.0, 0.5], &[&[0.9, 0.1], &[0.2, 0.8]])
}

pub fn det_three() -> ArmModel {
    arm(&[3.0, 2.0, 1.0], &[&[0.8, 0.2, 0.0], &[0.0, 0.8, 0.2], &[0.0, 0.0, 1.0]])
}

pub fn det_two() -> ArmModel {
    arm(&[2.5, 0.8], &[&[0.9, 0.1], &[0.0, 1.0]])
}

pub fn det_skip() -> ArmModel {
    arm(&[2.8, 1.2, 0.3], &[&[0.85, 0.1, 0.05], &[0.0, 0.9, 0.1], &[0.0, 0.0, 1.0]])
}

pub struct Case {
    pub name: String,
    pub scenario: Scenario,
    /// Unrestricted base of every arm, in arm order.
    pub bases: Vec<ArmModel>,
    /// Every arm's rate is non-increasing along every transition.
    pub deteriorating: bool,
}

fn case(name: &str, delta: f64, arms: Vec<(ArmModel, ArmModel)>) -> Case {
    let (bases, compiled): (Vec<_>, Vec<_>) = arms.into_iter().unzip();
    Case {
        name: name.into(),
        scenario: Scenario::new(compiled, 1.0, delta, 0).with_tail_tolerance(TAIL_TOL),
        bases,
        deteriorating: false,
    }
}

fn plain(a: ArmModel) -> (ArmModel, ArmModel) {
    (a.clone(), a)
}

/// Random arm with `n` states: sparse stochastic rows, rates in [0, 3).
pub fn random_arm(rng: &mut impl Rng, n: usize) -> ArmModel {
    let rates: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0..3.0) * 100.0_f64).round() / 100.0).collect();
    let kernel = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.35) { 0.0 } else { rng.gen_range(0.05..1.0) })
                .collect();
            if row.iter().all(|&p| p == 0.0) {
                row[rng.gen_range(0..n)] = 1.0;
            }
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|p| p / sum).collect()
        })
        .collect();
    ArmModel::unrestricted(rates, kernel, 0).unwrap()
}

/// A random restriction that keeps every state able to reach a switch point.
pub fn random_restriction(rng: &mut impl Rng, base: &ArmModel) -> RestrictionSpec {
    match rng.gen_range(0..4) {
        0 => RestrictionSpec::Unrestricted,
        1 => RestrictionSpec::IntegerGrid { period: rng.gen_range(2..=3) },
        2 => {
            // state 0 stays a switch point; others only if reachable back
            let flags: Vec<bool> = (0..base.len()).map(|s| s == 0 || rng.gen_bool(0.5)).collect();
            let ok = (0..base.len()).all(|s| base.reachable_from(s).iter().any(|&t| flags[t]));
            if ok {
                RestrictionSpec::StateBased { switchable: flags }
            } else {
                RestrictionSpec::Unrestricted
            }
        }
        _ => RestrictionSpec::Nonpreemptive,
    }
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=3);
    let mut arms = Vec::new();
    let mut nonpreemptive = 0;
    for _ in 0..d {
        let n = rng.gen_range(1..=4);
        let base = random_arm(&mut rng, n);
        let mut spec = random_restriction(&mut rng, &base);
        if spec == RestrictionSpec::Nonpreemptive {
            nonpreemptive += 1;
            // at most one arm that never returns, so the optimum stays rich
            if nonpreemptive > 1 {
                spec = RestrictionSpec::Unrestricted;
            }
        }
        arms.push((base.clone(), compile_restriction(&spec, &base).unwrap()));
    }
    case(&format!("random-{seed}"), 0.1, arms)
}

pub fn suite() -> Vec<Case> {
    let mut out = vec![
        case("classical", 0.1, vec![plain(ArmModel::constant(1.8)), plain(volatile())]),
        case("unrestricted-3", 0.1, vec![plain(rise_fall()), plain(sticky())]),
        case("grid-2", 0.2, vec![(volatile(), grid(2, &volatile())), plain(sticky())]),
        case(
            "grid-3+repair",
            0.1,
            vec![(sticky(), grid(3, &sticky())), (lathe(), states(&[true, false], &lathe()))],
        ),
        case(
            "breakdown",
            0.1,
            vec![
                (machine(), states(&[true, true, false], &machine())),
                (lathe(), states(&[true, false], &lathe())),
            ],
        ),
        case("nonpreemptive", 0.1, vec![(rise_fall(), nonpreemptive(&rise_fall())), plain(volatile())]),
        case(
            "two-nonpreemptive",
            0.1,
            vec![
                (rise_fall(), nonpreemptive(&rise_fall())),
                (sticky(), nonpreemptive(&sticky())),
                plain(ArmModel::constant(1.0)),
            ],
        ),
        case(
            "mixed-3",
            0.1,
            vec![
                plain(volatile()),
                (rise_fall(), grid(2, &rise_fall())),
                (machine(), states(&[true, true, false], &machine())),
            ],
        ),
        case(
            "grids-3",
            0.25,
            vec![
                (volatile(), grid(2, &volatile())),
                (sticky(), grid(3, &sticky())),
                (det_two(), grid(2, &det_two())),
            ],
        ),
        case(
            "nonpreemptive+grid",
            0.1,
            vec![(four_state(), nonpreemptive(&four_state())), (rise_fall(), grid(2, &rise_fall()))],
        ),
        case(
            "four-state",
            0.1,
            vec![
                plain(four_state()),
                (four_state(), states(&[true, false, true, false], &four_state())),
                plain(ArmModel::constant(1.5)),
            ],
        ),
    ];
    let mut det = case("deteriorating-2", 0.1, vec![plain(det_three()), plain(det_two())]);
    det.deteriorating = true;
    out.push(det);
    let mut det = case(
        "deteriorating-3",
        0.1,
        vec![plain(det_three()), plain(det_skip()), plain(ArmModel::constant(1.2))],
    );
    det.deteriorating = true;
    out.push(det);
    out.extend((1..=4).map(random_case));
    out
}

pub fn tables(s: &Scenario) -> Vec<IndexTable> {
    s.arms.iter().map(|a| IndexTable::compute(a, &s.discount()).unwrap()).collect()
}
