//! Restricted Gittins indices by calibration against a retirement level.
//!
//! At a switch point `s` the index `M(s)` is the retirement level at which
//! serving at least one more step (and then stopping optimally at a later
//! switch point) is exactly as good as retiring: `φ(s, M(s)) = 0`. Since
//! `φ(s, ·)` is strictly decreasing, bisection on `[0, max_rate/β]` finds it;
//! the bracket is then refined by solving the affine fixed point for the
//! stop region found at the upper end.
//!
//! Off the switch points the index is carried: it equals the index at the
//! most recent switch point on the path, which makes it a path quantity.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::error::{RmabError, Result};
use crate::linalg::solve_discounted;
use crate::model::{ArmModel, Discount};
use crate::stopping::{solve_snell_with, GainSpec, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    /// Bisection stops once the bracket is narrower than
    /// `tol_m_rel · max_rate / β`.
    pub tol_m_rel: f64,
    pub solver: SolverConfig,
    pub polish: bool,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            tol_m_rel: 1e-9,
            solver: SolverConfig::default(),
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateIndex {
    pub value: f64,
    pub iterations: usize,
    /// No reward is ever reachable; the index is 0 by convention.
    pub worthless: bool,
}

fn phi_at(arm: &ArmModel, discount: &Discount, m: f64, state: usize, cfg: &SolverConfig) -> Result<(f64, Vec<bool>)> {
    let sol = solve_snell_with(arm, discount, GainSpec::new(m)?, cfg)?;
    Ok((sol.phi[state].expect("switch point"), sol.stop_region))
}

/// Level `m` solving `C(state; m) = m` when the stop region is held fixed.
fn affine_root(arm: &ArmModel, discount: &Discount, stop: &[bool], state: usize) -> f64 {
    let n = arm.len();
    let coeff = |i: usize, j: usize| if stop[j] { 0.0 } else { arm.kernel_row(i)[j] };
    let rewards: Vec<f64> = arm.reward_rates().iter().map(|&r| discount.step_reward(r)).collect();
    let a = solve_discounted(n, discount.gamma, coeff, &rewards);
    let into_stop: Vec<f64> = (0..n)
        .map(|i| {
            discount.gamma
                * arm
                    .successors(i)
                    .filter(|&(j, _)| stop[j])
                    .map(|(_, p)| p)
                    .sum::<f64>()
        })
        .collect();
    let b = solve_discounted(n, discount.gamma, coeff, &into_stop);
    a[state] / (1.0 - b[state])
}

pub fn gittins_index(arm: &ArmModel, discount: &Discount, state: usize) -> Result<StateIndex> {
    gittins_index_with(arm, discount, state, &IndexConfig::default())
}

pub fn gittins_index_with(
    arm: &ArmModel,
    discount: &Discount,
    state: usize,
    config: &IndexConfig,
) -> Result<StateIndex> {
    if !arm.is_switchable(state) {
        return Err(RmabError::Domain(format!("state {state} is not a switch point")));
    }
    let upper = arm.max_rate() / discount.beta;
    let worthless = StateIndex {
        value: 0.0,
        iterations: 0,
        worthless: true,
    };
    if upper <= 0.0 {
        return Ok(worthless);
    }
    let (phi0, _) = phi_at(arm, discount, 0.0, state, &config.solver)?;
    if phi0 <= 0.0 {
        return Ok(worthless);
    }
    let tol_m = config.tol_m_rel * upper;
    let (mut lo, mut hi) = (0.0, upper);
    let mut iterations = 0;
    let mut hi_region = None;
    while hi - lo > tol_m {
        let mid = 0.5 * (lo + hi);
        let (phi, region) = phi_at(arm, discount, mid, state, &config.solver)?;
        if phi > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            hi_region = Some(region);
        }
        iterations += 1;
    }
    let mut value = 0.5 * (lo + hi);
    if config.polish {
        let region = match hi_region {
            Some(r) => r,
            None => phi_at(arm, discount, hi, state, &config.solver)?.1,
        };
        let root = affine_root(arm, discount, &region, state);
        if root.is_finite() && root >= lo - tol_m && root <= hi + tol_m {
            value = root;
        }
    }
    Ok(StateIndex {
        value: value.max(0.0),
        iterations,
        worthless: false,
    })
}

/// Indices of every switch point of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    index: Vec<Option<f64>>,
    iterations: Vec<usize>,
    worthless: Vec<bool>,
    pub tol_m: f64,
}

impl IndexTable {
    pub fn compute(arm: &ArmModel, discount: &Discount) -> Result<Self> {
        Self::compute_with(arm, discount, &IndexConfig::default())
    }

    pub fn compute_with(arm: &ArmModel, discount: &Discount, config: &IndexConfig) -> Result<Self> {
        let per_state: Vec<Option<StateIndex>> = (0..arm.len())
            .into_par_iter()
            .map(|s| {
                if arm.is_switchable(s) {
                    gittins_index_with(arm, discount, s, config).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            index: per_state.iter().map(|x| x.map(|i| i.value)).collect(),
            iterations: per_state.iter().map(|x| x.map_or(0, |i| i.iterations)).collect(),
            worthless: per_state.iter().map(|x| x.is_some_and(|i| i.worthless)).collect(),
            tol_m: config.tol_m_rel * arm.max_rate() / discount.beta,
        })
    }

    /// Index at a switch point; `None` elsewhere.
    pub fn index(&self, s: usize) -> Option<f64> {
        self.index[s]
    }

    pub fn iterations(&self, s: usize) -> usize {
        self.iterations[s]
    }

    pub fn is_worthless(&self, s: usize) -> bool {
        self.worthless[s]
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Distinct index values, ascending. Envelopes and carried indices only
    /// ever take these values.
    pub fn levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.index.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

pub fn gittins_index_table(arm: &ArmModel, discount: &Discount) -> Result<IndexTable> {
    IndexTable::compute(arm, discount)
}

/// Checks that every switch point of `restricted` is a switch point of
/// `unrestricted` along coupled paths started from base state `base`.
fn check_nested(restricted: &ArmModel, unrestricted: &ArmModel, start: (usize, usize)) -> Result<()> {
    let mut seen = HashMap::new();
    let mut queue = VecDeque::from([start]);
    seen.insert(start, ());
    while let Some((a, b)) = queue.pop_front() {
        if restricted.base_state(a) != unrestricted.base_state(b) || restricted.reward_rate(a) != unrestricted.reward_rate(b) {
            return Err(RmabError::Domain("arms do not share base dynamics".into()));
        }
        if restricted.is_switchable(a) && !unrestricted.is_switchable(b) {
            return Err(RmabError::Domain(format!(
                "switch points are not nested: `{}` may switch where `{}` may not",
                restricted.label(a),
                unrestricted.label(b)
            )));
        }
        let mut by_base: HashMap<usize, (f64, Vec<usize>)> = HashMap::new();
        for (t, p) in unrestricted.successors(b) {
            let e = by_base.entry(unrestricted.base_state(t)).or_default();
            e.0 += p;
            e.1.push(t);
        }
        let mut mass: HashMap<usize, f64> = HashMap::new();
        for (t, p) in restricted.successors(a) {
            *mass.entry(restricted.base_state(t)).or_default() += p;
            let Some((_, partners)) = by_base.get(&restricted.base_state(t)) else {
                return Err(RmabError::Domain("arms do not share base dynamics".into()));
            };
            for &u in partners {
                if seen.insert((t, u), ()).is_none() {
                    queue.push_back((t, u));
                }
            }
        }
        for (base, (p, _)) in &by_base {
            if (mass.get(base).copied().unwrap_or(0.0) - p).abs() > 1e-12 {
                return Err(RmabError::Domain("arms do not share base dynamics".into()));
            }
        }
    }
    Ok(())
}

/// `(M_restricted, M_unrestricted)` at the switch points projecting onto
/// `base_state`. Shrinking the feasible set cannot raise the index.
pub fn index_with_restriction_dominance(
    restricted: &ArmModel,
    unrestricted: &ArmModel,
    discount: &Discount,
    base_state: usize,
) -> Result<(f64, f64)> {
    let a = restricted.switchable_state_for(base_state).ok_or_else(|| {
        RmabError::Domain(format!("base state {base_state} is never a switch point of the restricted arm"))
    })?;
    let b = unrestricted.switchable_state_for(base_state).ok_or_else(|| {
        RmabError::Domain(format!("base state {base_state} is never a switch point of the wider arm"))
    })?;
    check_nested(restricted, unrestricted, (a, b))?;
    Ok((
        gittins_index(restricted, discount, a)?.value,
        gittins_index(unrestricted, discount, b)?.value,
    ))
}

/// Index carried into `new_state`: its own index at a switch point,
/// otherwise the value carried so far.
pub fn carried_index_step(table: &IndexTable, prev_carried: f64, new_state: usize) -> f64 {
    table.index(new_state).unwrap_or(prev_carried)
}

/// Running minimum of the index over the switch points visited so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerEnvelope {
    pub value: f64,
}

impl LowerEnvelope {
    /// Before the first switch point the envelope is `+∞`.
    pub fn new() -> Self {
        Self { value: f64::INFINITY }
    }
}

impl Default for LowerEnvelope {
    fn default() -> Self {
        Self::new()
    }
}

pub fn lower_envelope_update(env: LowerEnvelope, carried: f64, is_switchable: bool) -> LowerEnvelope {
    if is_switchable {
        LowerEnvelope {
            value: env.value.min(carried),
        }
    } else {
        env
    }
}

/// Both sides of `E Σ γ^n R(s_n) = E Σ γ^n (1 − γ) M̲(n)` from local time 0,
/// truncated at `horizon`, by exact propagation of the joint law of
/// (state, envelope level).
pub fn representation_check(
    arm: &ArmModel,
    discount: &Discount,
    table: &IndexTable,
    horizon: usize,
    tail_tol: f64,
) -> Result<(f64, f64)> {
    let tail = discount.tail_bound(horizon, arm.max_rate());
    if tail > tail_tol {
        return Err(RmabError::HorizonTail { tail, tol: tail_tol });
    }
    let levels = table.levels();
    let nl = levels.len();
    let level_of = |v: f64| levels.iter().position(|&x| x == v).expect("index level");
    let s0 = arm.initial();
    let start = table
        .index(s0)
        .ok_or_else(|| RmabError::Domain("initial state is not a switch point".into()))?;
    let n = arm.len();
    let mut dist = vec![0.0; n * nl];
    dist[s0 * nl + level_of(start)] = 1.0;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let mut disc = 1.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; n * nl];
        for s in 0..n {
            for l in 0..nl {
                let p = dist[s * nl + l];
                if p == 0.0 {
                    continue;
                }
                lhs += disc * p * discount.step_reward(arm.reward_rate(s));
                rhs += disc * p * discount.one_minus_gamma * levels[l];
                for (t, q) in arm.successors(s) {
                    let lt = match table.index(t) {
                        Some(v) if v < levels[l] => level_of(v),
                        _ => l,
                    };
                    next[t * nl + lt] += p * q;
                }
            }
        }
        dist = next;
        disc *= discount.gamma;
    }
    Ok((lhs, rhs))
}
