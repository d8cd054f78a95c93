//! Allocation policies that respect switch restrictions.
//!
//! Time runs on the global grid; at each step exactly one arm is served for a
//! whole step and only that arm advances. An arm whose current state is not a
//! switch point must keep the machine. The index policy additionally keeps
//! serving an arm while its carried index sits above its lower envelope, so
//! time is given exclusively to one arm over each excursion.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{RmabError, Result};
use crate::index::{carried_index_step, lower_envelope_update, IndexTable, LowerEnvelope};
use crate::model::{Discount, Scenario};

/// Order used to break ties among maximal indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestId,
    /// Earlier arms in the list win.
    Order(Vec<usize>),
}

impl TieBreak {
    fn rank(&self, arm: usize) -> usize {
        match self {
            Self::LowestId => arm,
            Self::Order(order) => order.iter().position(|&a| a == arm).unwrap_or(usize::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    GittinsIndex(TieBreak),
    /// Highest current reward rate.
    Myopic,
    /// Cycle through the arms at every free decision point.
    RoundRobin,
    /// At the n-th free decision point serve `order[n mod len]`.
    Fixed(Vec<usize>),
    /// Uniform over all arms at every free decision point.
    Random(u64),
}

impl PolicySpec {
    pub fn gittins() -> Self {
        Self::GittinsIndex(TieBreak::LowestId)
    }

    /// Checks arm ids against a scenario with `arms` arms.
    pub fn check(&self, arms: usize) -> Result<()> {
        let bad = |ids: &[usize]| ids.is_empty() || ids.iter().any(|&a| a >= arms);
        match self {
            Self::Fixed(order) | Self::GittinsIndex(TieBreak::Order(order)) if bad(order) => {
                Err(RmabError::PolicySpec(self.to_string()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        match self {
            Self::GittinsIndex(TieBreak::LowestId) => write!(f, "gittins"),
            Self::GittinsIndex(TieBreak::Order(o)) => write!(f, "gittins:{}", join(o)),
            Self::Myopic => write!(f, "myopic"),
            Self::RoundRobin => write!(f, "round-robin"),
            Self::Fixed(o) => write!(f, "fixed:{}", join(o)),
            Self::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = RmabError;

    /// `gittins`, `gittins:<order>`, `myopic`, `round-robin`,
    /// `fixed:<order>`, `random[:<seed>]`; `<order>` is comma-separated ids.
    fn from_str(s: &str) -> Result<Self> {
        let err = || RmabError::PolicySpec(s.to_string());
        let ids = |list: &str| -> Result<Vec<usize>> {
            list.split(',').map(|x| x.trim().parse().map_err(|_| err())).collect()
        };
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head.trim(), arg) {
            ("gittins", None) => Ok(Self::gittins()),
            ("gittins", Some(a)) => Ok(Self::GittinsIndex(TieBreak::Order(ids(a)?))),
            ("myopic", None) => Ok(Self::Myopic),
            ("round-robin", None) => Ok(Self::RoundRobin),
            ("fixed", Some(a)) => Ok(Self::Fixed(ids(a)?)),
            ("random", None) => Ok(Self::Random(0)),
            ("random", Some(a)) => a.trim().parse().map(Self::Random).map_err(|_| err()),
            _ => Err(err()),
        }
    }
}

/// The commitment-aware index rule: a committed arm keeps the machine,
/// otherwise the largest carried index wins.
pub fn index_policy_step(carried: &[f64], committed: Option<usize>, tie_break: &TieBreak) -> usize {
    if let Some(k) = committed {
        return k;
    }
    let mut best = 0;
    for k in 1..carried.len() {
        let better = carried[k] > carried[best]
            || (carried[k] == carried[best] && tie_break.rank(k) < tie_break.rank(best));
        if better {
            best = k;
        }
    }
    best
}

/// Everything a policy may look at: per-arm state, local time, carried
/// index, lower envelope, plus the last served arm and a cyclic cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocState {
    pub states: Vec<usize>,
    pub local_time: Vec<usize>,
    pub carried: Vec<f64>,
    pub envelope: Vec<f64>,
    pub last: Option<usize>,
    pub cursor: usize,
}

impl AllocState {
    /// Hashable identity, ignoring local times.
    pub fn key(&self) -> Vec<u64> {
        let mut k = Vec::with_capacity(3 * self.states.len() + 2);
        k.extend(self.states.iter().map(|&s| s as u64));
        k.extend(self.carried.iter().map(|v| v.to_bits()));
        k.extend(self.envelope.iter().map(|v| v.to_bits()));
        k.push(self.last.map_or(u64::MAX, |a| a as u64));
        k.push(self.cursor as u64);
        k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    /// Restriction or excursion leaves no choice.
    Forced(usize),
    /// Free decision point, deterministic rule.
    Chosen(usize),
    /// Free decision point, uniform over the listed arms.
    Uniform(Vec<usize>),
}

impl Choice {
    pub fn is_free(&self) -> bool {
        !matches!(self, Self::Forced(_))
    }
}

/// A scenario with its per-arm index tables.
#[derive(Debug, Clone, Copy)]
pub struct Bandit<'a> {
    pub scenario: &'a Scenario,
    pub tables: &'a [IndexTable],
}

impl<'a> Bandit<'a> {
    pub fn new(scenario: &'a Scenario, tables: &'a [IndexTable]) -> Result<Self> {
        if tables.len() != scenario.arms.len()
            || tables.iter().zip(&scenario.arms).any(|(t, a)| t.len() != a.len())
        {
            return Err(RmabError::Domain("index tables do not match the scenario arms".into()));
        }
        Ok(Self { scenario, tables })
    }

    pub fn discount(&self) -> Discount {
        self.scenario.discount()
    }

    pub fn num_arms(&self) -> usize {
        self.scenario.arms.len()
    }

    pub fn initial_state(&self) -> AllocState {
        let states: Vec<usize> = self.scenario.arms.iter().map(|a| a.initial()).collect();
        let carried: Vec<f64> = states
            .iter()
            .zip(self.tables)
            .map(|(&s, t)| t.index(s).expect("initial state is a switch point"))
            .collect();
        AllocState {
            local_time: vec![0; states.len()],
            envelope: carried.clone(),
            carried,
            states,
            last: None,
            cursor: 0,
        }
    }

    /// The unique arm whose current state is not a switch point, if any.
    pub fn committed_arm(&self, st: &AllocState) -> Option<usize> {
        let mut committed = None;
        for (k, arm) in self.scenario.arms.iter().enumerate() {
            if !arm.is_switchable(st.states[k]) {
                debug_assert!(committed.is_none(), "two arms away from switch points");
                committed = Some(k);
            }
        }
        committed
    }

    pub fn decide(&self, policy: &PolicySpec, st: &AllocState) -> Choice {
        let d = self.num_arms();
        if let Some(k) = self.committed_arm(st) {
            return Choice::Forced(k);
        }
        if d == 1 {
            return Choice::Chosen(0);
        }
        match policy {
            PolicySpec::GittinsIndex(tie) => match st.last {
                Some(k) if st.carried[k] > st.envelope[k] => Choice::Forced(k),
                _ => Choice::Chosen(index_policy_step(&st.carried, None, tie)),
            },
            PolicySpec::Myopic => {
                let rates: Vec<f64> = (0..d)
                    .map(|k| self.scenario.arms[k].reward_rate(st.states[k]))
                    .collect();
                Choice::Chosen(index_policy_step(&rates, None, &TieBreak::LowestId))
            }
            PolicySpec::RoundRobin => Choice::Chosen(st.cursor % d),
            PolicySpec::Fixed(order) => Choice::Chosen(order[st.cursor % order.len()]),
            PolicySpec::Random(_) => Choice::Uniform((0..d).collect()),
        }
    }

    /// Serves `arm` for one step, landing in `next`.
    pub fn advance(&self, policy: &PolicySpec, st: &AllocState, arm: usize, next: usize, free: bool) -> AllocState {
        let mut out = st.clone();
        self.advance_in_place(policy, &mut out, arm, next, free);
        out
    }

    pub fn advance_in_place(&self, policy: &PolicySpec, st: &mut AllocState, arm: usize, next: usize, free: bool) {
        let model = &self.scenario.arms[arm];
        st.states[arm] = next;
        st.local_time[arm] += 1;
        st.carried[arm] = carried_index_step(&self.tables[arm], st.carried[arm], next);
        st.envelope[arm] = lower_envelope_update(
            LowerEnvelope { value: st.envelope[arm] },
            st.carried[arm],
            model.is_switchable(next),
        )
        .value;
        st.last = Some(arm);
        if free {
            st.cursor = match policy {
                PolicySpec::RoundRobin => (st.cursor + 1) % self.num_arms(),
                PolicySpec::Fixed(order) => (st.cursor + 1) % order.len(),
                _ => 0,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub arm: usize,
    /// State of the served arm at the start of the step.
    pub state: usize,
    pub switchable: bool,
    /// True when the step began at a free decision point.
    pub decision: bool,
    pub local_times: Vec<usize>,
    pub carried: Vec<f64>,
    pub envelope: Vec<f64>,
    /// `rate · (1 − γ)/β`, undiscounted.
    pub step_reward: f64,
    pub discounted_cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTrace {
    pub policy: PolicySpec,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    /// Horizon tail bound exceeded the default tolerance.
    pub tail_warning: bool,
}

pub const TRACE_TAIL_TOL: f64 = 1e-8;

impl AllocationTrace {
    pub fn total_reward(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.discounted_cumulative)
    }

    /// Checks step by step that local times start at 0 and add up to t, that
    /// only the served arm advances, and that no arm is left or entered away
    /// from a switch point.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut prev: Option<&TraceStep> = None;
        for step in &self.steps {
            let total: usize = step.local_times.iter().sum();
            if total != step.t {
                return Err(format!("t={}: local times sum to {total}", step.t));
            }
            match prev {
                None => {
                    if step.local_times.iter().any(|&x| x != 0) {
                        return Err("local times must start at 0".into());
                    }
                }
                Some(p) => {
                    for (k, (&a, &b)) in p.local_times.iter().zip(&step.local_times).enumerate() {
                        let expect = a + usize::from(k == p.arm);
                        if b != expect {
                            return Err(format!("t={}: local time of arm {k} jumped", step.t));
                        }
                    }
                    if !step.switchable && p.arm != step.arm {
                        return Err(format!("t={}: arm {} left away from a switch point", step.t, p.arm));
                    }
                }
            }
            if !step.switchable && step.local_times[step.arm] == 0 {
                return Err(format!("t={}: entry instant must be a switch point", step.t));
            }
            prev = Some(step);
        }
        Ok(())
    }
}

pub(crate) struct Sampler {
    rows: Vec<Vec<(Vec<usize>, WeightedIndex<f64>)>>,
}

impl Sampler {
    pub(crate) fn new(scenario: &Scenario) -> Self {
        let rows = scenario
            .arms
            .iter()
            .map(|arm| {
                (0..arm.len())
                    .map(|s| {
                        let (targets, weights): (Vec<usize>, Vec<f64>) = arm.successors(s).unzip();
                        let dist = WeightedIndex::new(&weights).expect("kernel row has positive mass");
                        (targets, dist)
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub(crate) fn next_state<R: Rng>(&self, arm: usize, state: usize, rng: &mut R) -> usize {
        let (targets, dist) = &self.rows[arm][state];
        targets[dist.sample(rng)]
    }
}

pub(crate) fn choose<R: Rng>(choice: &Choice, rng: &mut R) -> usize {
    match choice {
        Choice::Forced(k) | Choice::Chosen(k) => *k,
        Choice::Uniform(arms) => arms[rng.gen_range(0..arms.len())],
    }
}

/// Simulates one allocation path of `horizon` steps.
pub fn run_policy(bandit: &Bandit<'_>, policy: &PolicySpec, seed: u64, horizon: usize) -> Result<AllocationTrace> {
    policy.check(bandit.num_arms())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = Sampler::new(bandit.scenario);
    let discount = bandit.discount();
    let mut st = bandit.initial_state();
    let mut steps = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;
    let mut disc = 1.0;
    for t in 0..horizon {
        let choice = bandit.decide(policy, &st);
        let k = choose(&choice, &mut rng);
        let arm = &bandit.scenario.arms[k];
        let s = st.states[k];
        let reward = discount.step_reward(arm.reward_rate(s));
        cumulative += disc * reward;
        steps.push(TraceStep {
            t,
            arm: k,
            state: s,
            switchable: arm.is_switchable(s),
            decision: choice.is_free(),
            local_times: st.local_time.clone(),
            carried: st.carried.clone(),
            envelope: st.envelope.clone(),
            step_reward: reward,
            discounted_cumulative: cumulative,
        });
        let next = sampler.next_state(k, s, &mut rng);
        st = bandit.advance(policy, &st, k, next, choice.is_free());
        disc *= discount.gamma;
    }
    Ok(AllocationTrace {
        policy: policy.clone(),
        seed,
        steps,
        tail_warning: discount.tail_bound(horizon, bandit.scenario.max_rate()) > TRACE_TAIL_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub arm: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

/// Splits the trace at free decision points: within a segment one arm is
/// served exclusively because it is away from a switch point or above its
/// envelope.
pub fn excursion_segments(trace: &AllocationTrace) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for step in &trace.steps {
        match out.last_mut() {
            Some(seg) if !step.decision && seg.arm == step.arm => seg.end = step.t + 1,
            _ => out.push(Segment {
                arm: step.arm,
                start: step.t,
                end: step.t + 1,
            }),
        }
    }
    out
}
