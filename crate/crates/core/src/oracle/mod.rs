//! Exact ground truth at desk scale.
//!
//! Nothing here relies on the index theory being right: the optimum comes
//! from backward induction on the joint chain of all arms, classical
//! indices from the restart-in-state MDP, and single-arm stopping optima from
//! brute-force enumeration of feasible rules. Policy values (including the
//! index policy) are exact expectations over the policy-augmented chain.

mod enumerate;
mod evaluate;
mod product;
mod restart;
mod tree;

pub use enumerate::{
    enumerate_feasible_stopping, enumerate_feasible_stopping_capped, enumerate_retirement_value, EnumeratedRule,
    StoppingEnumeration, DEFAULT_RULE_CAP,
};
pub use evaluate::{envelope_formula_value, evaluate_policy_capped, evaluate_policy_exact, PolicyValue, DEFAULT_CHAIN_CAP};
pub use product::{
    build_product_mdp, build_product_mdp_capped, optimal_value, optimal_values, ProductMdp, DEFAULT_PRODUCT_CAP,
};
pub use restart::classical_gittins_restart;
pub use tree::{exhaustive_tree_value, TREE_CAP};

use crate::error::Result;
use crate::index::IndexTable;
use crate::model::Scenario;
use crate::policy::{Bandit, PolicySpec};

/// Optimum, index-policy value, envelope formula and baselines for one
/// scenario, all at the scenario horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub horizon: usize,
    pub tail_bound: f64,
    pub product_states: usize,
    pub optimal: f64,
    pub index_policy: PolicyValue,
    pub envelope: f64,
    pub baselines: Vec<PolicyValue>,
}

impl OracleReport {
    pub fn index_gap(&self) -> f64 {
        (self.index_policy.total - self.optimal).abs()
    }

    pub fn envelope_gap(&self) -> f64 {
        (self.envelope - self.optimal).abs()
    }
}

/// Myopic, round robin, reverse-order cycling and uniform random.
pub fn default_baselines(arms: usize) -> Vec<PolicySpec> {
    vec![
        PolicySpec::Myopic,
        PolicySpec::RoundRobin,
        PolicySpec::Fixed((0..arms).rev().collect()),
        PolicySpec::Random(0),
    ]
}

pub fn run_oracle(scenario: &Scenario, tables: &[IndexTable], baselines: &[PolicySpec]) -> Result<OracleReport> {
    let bandit = Bandit::new(scenario, tables)?;
    let mdp = build_product_mdp(scenario)?;
    let horizon = scenario.horizon_steps;
    let optimal = optimal_value(&mdp);
    let index_policy = evaluate_policy_exact(&bandit, &PolicySpec::gittins(), horizon)?;
    let baselines = baselines
        .iter()
        .map(|p| evaluate_policy_exact(&bandit, p, horizon))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        horizon,
        tail_bound: scenario.tail_bound(),
        product_states: mdp.len(),
        optimal,
        envelope: index_policy.envelope_max,
        index_policy,
        baselines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::gittins_index;
    use crate::model::{compile_restriction, ArmModel, Discount, RestrictionSpec};

    fn tables(s: &Scenario) -> Vec<IndexTable> {
        s.arms.iter().map(|a| IndexTable::compute(a, &s.discount()).unwrap()).collect()
    }

    #[test]
    fn product_counts() {
        let one = Scenario::new(vec![ArmModel::unrestricted(vec![1.0, 2.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0).unwrap()], 1.0, 0.1, 10);
        let mdp = build_product_mdp(&one).unwrap();
        assert_eq!(mdp.len(), 2);
        assert!(mdp.actions.iter().all(|a| a == &vec![0]));

        let a = ArmModel::unrestricted(vec![1.0, 2.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0).unwrap();
        let two = Scenario::new(vec![a.clone(), a.clone()], 1.0, 0.1, 10);
        let mdp = build_product_mdp(&two).unwrap();
        assert_eq!(mdp.len(), 4);
        assert!(mdp.actions.iter().all(|x| x.len() == 2));
        assert!(mdp.committed.iter().all(Option::is_none));

        // nonpreemptive 2-state arm compiles to entry + 2 committed copies
        let np = compile_restriction(&RestrictionSpec::Nonpreemptive, &a).unwrap();
        let mixed = Scenario::new(vec![np, a], 1.0, 0.1, 10);
        let mdp = build_product_mdp(&mixed).unwrap();
        assert_eq!(mdp.len(), 6);
        assert_eq!(mdp.committed.iter().filter(|c| c.is_some()).count(), 4);
        for (c, acts) in mdp.committed.iter().zip(&mdp.actions) {
            if let Some(k) = c {
                assert_eq!(acts, &vec![*k]);
            }
        }
    }

    #[test]
    fn product_cap() {
        let big = ArmModel::unrestricted(vec![1.0; 60], vec![vec![1.0 / 60.0; 60]; 60], 0).unwrap();
        let s = Scenario::new(vec![big.clone(), big.clone(), big], 1.0, 0.1, 10);
        assert!(matches!(build_product_mdp(&s), Err(crate::RmabError::TooLarge { count: 648_000, .. })));
    }

    #[test]
    fn dominant_constant_arm_value() {
        let s = Scenario::new(vec![ArmModel::constant(1.0), ArmModel::constant(2.0)], 1.0, 0.1, 0).with_tail_tolerance(1e-10);
        let mdp = build_product_mdp(&s).unwrap();
        let h = s.horizon_steps;
        let expect = 2.0 * (1.0 - s.discount().power(h));
        assert!((optimal_value(&mdp) - expect).abs() < 1e-12);
        let t = tables(&s);
        let b = Bandit::new(&s, &t).unwrap();
        let idx = evaluate_policy_exact(&b, &PolicySpec::gittins(), h).unwrap();
        assert!((idx.total - expect).abs() < 1e-12);
        // round robin alternates: 1, 2, 1, 2, ...
        let d = s.discount();
        let rr_expect: f64 = (0..h).map(|n| d.power(n) * d.step_reward(if n % 2 == 0 { 1.0 } else { 2.0 })).sum();
        let rr = evaluate_policy_exact(&b, &PolicySpec::RoundRobin, h).unwrap();
        assert!((rr.total - rr_expect).abs() < 1e-12);
        assert!(rr.total < expect - 0.1);
    }

    #[test]
    fn single_deteriorating_arm() {
        let arm = ArmModel::unrestricted(vec![3.0, 1.0], vec![vec![0.9, 0.1], vec![0.0, 1.0]], 0).unwrap();
        let s = Scenario::new(vec![arm], 1.0, 0.2, 0).with_tail_tolerance(1e-12);
        let d = s.discount();
        // own discounted reward, closed form
        let v1 = d.step_reward(1.0) / (1.0 - d.gamma);
        let v0 = (d.step_reward(3.0) + d.gamma * 0.1 * v1) / (1.0 - 0.9 * d.gamma);
        let opt = optimal_value(&build_product_mdp(&s).unwrap());
        assert!((opt - v0).abs() < 1e-11);
        let t = tables(&s);
        let env = envelope_formula_value(&Bandit::new(&s, &t).unwrap(), s.horizon_steps).unwrap();
        assert!((env - v0).abs() < 1e-11);
    }

    #[test]
    fn tree_search_matches_backward_induction() {
        let a = ArmModel::unrestricted(vec![1.0, 3.0], vec![vec![0.6, 0.4], vec![0.3, 0.7]], 0).unwrap();
        let b = compile_restriction(
            &RestrictionSpec::StateBased { switchable: vec![true, false] },
            &ArmModel::unrestricted(vec![2.5, 0.2], vec![vec![0.5, 0.5], vec![0.4, 0.6]], 0).unwrap(),
        )
        .unwrap();
        let s = Scenario::new(vec![a, b], 1.0, 0.25, 12);
        let tree = exhaustive_tree_value(&s, 12).unwrap();
        let bi = optimal_value(&build_product_mdp(&s).unwrap());
        assert!((tree - bi).abs() < 1e-12, "{tree} vs {bi}");
    }

    #[test]
    fn restart_index_closed_forms() {
        let d = Discount::new(1.0, 0.1);
        assert!((classical_gittins_restart(&ArmModel::constant(1.7), &d, 0).unwrap() - 1.7).abs() < 1e-12);
        let det = ArmModel::unrestricted(vec![3.0, 2.0, 1.0], vec![vec![0.8, 0.2, 0.0], vec![0.0, 0.8, 0.2], vec![0.0, 0.0, 1.0]], 0).unwrap();
        for s in 0..3 {
            assert!((classical_gittins_restart(&det, &d, s).unwrap() - det.reward_rate(s)).abs() < 1e-11);
        }
        let sym = ArmModel::unrestricted(vec![1.0, 3.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0).unwrap();
        let a = classical_gittins_restart(&sym, &d, 0).unwrap();
        let b = gittins_index(&sym, &d, 0).unwrap().value;
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        let grid = compile_restriction(&RestrictionSpec::IntegerGrid { period: 2 }, &sym).unwrap();
        assert!(classical_gittins_restart(&grid, &d, 0).is_err());
    }

    #[test]
    fn enumeration_matches_index() {
        let d = Discount::new(1.0, 0.1);
        let sym = ArmModel::unrestricted(vec![1.0, 3.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0).unwrap();
        let e = enumerate_feasible_stopping(&sym, &d, 0, 6).unwrap();
        let idx = gittins_index(&sym, &d, 0).unwrap().value;
        assert!((e.best - idx).abs() < 1e-9, "{} vs {idx}", e.best);
        assert!(e.rules_examined > 1000);
        let c = ArmModel::constant(2.0);
        assert!((enumerate_feasible_stopping(&c, &d, 0, 8).unwrap().best - 2.0).abs() < 1e-12);
        // tiny cap triggers the size error
        assert!(matches!(
            enumerate_feasible_stopping_capped(&sym, &d, 0, 30, 1 << 20),
            Err(crate::RmabError::TooLarge { .. })
        ));
    }

    #[test]
    fn enumeration_on_deteriorating_arm_stops_at_once() {
        let d = Discount::new(1.0, 0.1);
        let det = ArmModel::unrestricted(vec![3.0, 2.0, 1.0], vec![vec![0.8, 0.2, 0.0], vec![0.0, 0.8, 0.2], vec![0.0, 0.0, 1.0]], 0).unwrap();
        let e = enumerate_feasible_stopping(&det, &d, 0, 4).unwrap();
        // stopping after one step already attains the supremum
        let one_step = d.step_reward(3.0) / (1.0 - d.gamma);
        assert!((one_step - 3.0).abs() < 1e-12);
        assert!((e.best - one_step).abs() < 1e-12);
    }
}
