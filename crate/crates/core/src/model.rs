//! Arms, switch restrictions and scenarios on a uniform time grid.
//!
//! An arm is a finite Markov chain observed at grid instants `0, Δ, 2Δ, ...`
//! of its own (local) operating time. While the arm sits in state `s` it pays
//! reward at rate `reward_rate(s)` per unit time; one grid step occupying
//! `[t, t + Δ)` therefore contributes `rate · (1 − γ)/β · e^{−βt}` with
//! `γ = e^{−βΔ}`.
//!
//! The feasible time set of an arm is encoded as a predicate on its state:
//! local instant `n` is a switch point iff `switchable(state at n)`. Richer
//! restrictions (integer grids, non-preemption) are expressed by augmenting
//! the state with phase or commitment information, see
//! [`compile_restriction`]. Local time 0 is always a switch point; arms whose
//! initial state is flagged non-switchable get a switchable entry copy.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{RmabError, Result};

/// Row sums must match 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite-state Markov arm with a state-encoded feasible time set.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    name: String,
    labels: Vec<String>,
    reward_rate: Vec<f64>,
    kernel: Vec<Vec<f64>>,
    switchable: Vec<bool>,
    initial: usize,
    base_state: Vec<usize>,
    nonpreemptive: bool,
}

impl ArmModel {
    /// Builds an arm from per-state reward rates, a one-step kernel and
    /// switchability flags. Only the shapes are checked here; stochasticity
    /// and sign constraints are reported by [`validate_scenario`].
    pub fn new(
        reward_rate: Vec<f64>,
        kernel: Vec<Vec<f64>>,
        switchable: Vec<bool>,
        initial: usize,
    ) -> Result<Self> {
        let n = reward_rate.len();
        if n == 0 {
            return Err(RmabError::InvalidModel("arm has no states".into()));
        }
        if kernel.len() != n || kernel.iter().any(|row| row.len() != n) {
            return Err(RmabError::InvalidModel(format!(
                "kernel must be {n}x{n} to match {n} reward rates"
            )));
        }
        if switchable.len() != n {
            return Err(RmabError::InvalidModel(format!(
                "{} switchable flags for {n} states",
                switchable.len()
            )));
        }
        if initial >= n {
            return Err(RmabError::InvalidModel(format!(
                "initial state {initial} out of range for {n} states"
            )));
        }
        Ok(Self {
            name: String::new(),
            labels: (0..n).map(|s| format!("s{s}")).collect(),
            reward_rate,
            kernel,
            switchable,
            initial,
            base_state: (0..n).collect(),
            nonpreemptive: false,
        })
    }

    /// An arm that may be switched away from at every instant.
    pub fn unrestricted(reward_rate: Vec<f64>, kernel: Vec<Vec<f64>>, initial: usize) -> Result<Self> {
        let n = reward_rate.len();
        Self::new(reward_rate, kernel, vec![true; n], initial)
    }

    /// Single absorbing state paying `rate` forever.
    pub fn constant(rate: f64) -> Self {
        Self::unrestricted(vec![rate], vec![vec![1.0]], 0).expect("1-state arm is well formed")
    }

    /// Dummy arm with constantly zero reward; adding it to a scenario lets
    /// policies idle the machine.
    pub fn idle() -> Self {
        Self::constant(0.0).with_name("idle")
    }

    /// Discretizes a continuous-time chain with generator `generator` on a
    /// grid of step `delta`: the one-step kernel is `exp(Q·Δ)`.
    pub fn from_generator(
        reward_rate: Vec<f64>,
        generator: Vec<Vec<f64>>,
        initial: usize,
        delta: f64,
    ) -> Result<Self> {
        let n = reward_rate.len();
        if generator.len() != n || generator.iter().any(|row| row.len() != n) {
            return Err(RmabError::InvalidModel(format!("generator must be {n}x{n}")));
        }
        for (i, row) in generator.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let off_diag_ok = row.iter().enumerate().all(|(j, &q)| i == j || q >= 0.0);
            if sum.abs() > 1e-9 || !off_diag_ok {
                return Err(RmabError::InvalidModel(format!(
                    "generator row {i} is not a rate row (sum {sum})"
                )));
            }
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(RmabError::InvalidModel(format!("grid step {delta} must be positive")));
        }
        let q = DMatrix::from_fn(n, n, |i, j| generator[i][j] * delta);
        let p = q.exp();
        let kernel = (0..n)
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|j| p[(i, j)].max(0.0)).collect();
                let sum: f64 = row.iter().sum();
                row.into_iter().map(|v| v / sum).collect()
            })
            .collect();
        Self::unrestricted(reward_rate, kernel, initial)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(RmabError::InvalidModel(format!(
                "{} labels for {} states",
                labels.len(),
                self.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn len(&self) -> usize {
        self.reward_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward_rate.is_empty()
    }

    pub fn reward_rate(&self, s: usize) -> f64 {
        self.reward_rate[s]
    }

    pub fn reward_rates(&self) -> &[f64] {
        &self.reward_rate
    }

    pub fn max_rate(&self) -> f64 {
        self.reward_rate.iter().copied().fold(0.0, f64::max)
    }

    pub fn kernel_row(&self, s: usize) -> &[f64] {
        &self.kernel[s]
    }

    /// Nonzero transitions out of `s`.
    pub fn successors(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.kernel[s]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(t, &p)| (t, p))
    }

    pub fn is_switchable(&self, s: usize) -> bool {
        self.switchable[s]
    }

    pub fn switchable_flags(&self) -> &[bool] {
        &self.switchable
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// State of the uncompiled arm this state projects onto.
    pub fn base_state(&self, s: usize) -> usize {
        self.base_state[s]
    }

    pub fn is_nonpreemptive(&self) -> bool {
        self.nonpreemptive
    }

    pub fn all_switchable(&self) -> bool {
        self.switchable.iter().all(|&b| b)
    }

    /// The switchable state projecting onto base state `base`, preferring the
    /// lowest id when several exist.
    pub fn switchable_state_for(&self, base: usize) -> Option<usize> {
        (0..self.len()).find(|&s| self.switchable[s] && self.base_state[s] == base)
    }

    /// States reachable from `from` (including itself), in BFS order.
    pub fn reachable_from(&self, from: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(s) = queue.pop_front() {
            order.push(s);
            for (t, _) in self.successors(s) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        order
    }

    /// Makes local time 0 a switch point: if the initial state is flagged
    /// non-switchable, a switchable copy of it is appended and made initial.
    /// Nothing transitions into the copy.
    pub fn with_feasible_entry(mut self) -> Self {
        if self.switchable[self.initial] {
            return self;
        }
        let src = self.initial;
        let n = self.len();
        for row in &mut self.kernel {
            row.push(0.0);
        }
        let mut entry_row = self.kernel[src].clone();
        entry_row[n] = 0.0;
        self.kernel.push(entry_row);
        self.reward_rate.push(self.reward_rate[src]);
        self.switchable.push(true);
        self.base_state.push(self.base_state[src]);
        self.labels.push(format!("{}^", self.labels[src]));
        self.initial = n;
        self
    }

    /// Reports every violated arm invariant.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let who = if self.name.is_empty() { "arm".to_string() } else { format!("arm `{}`", self.name) };
        for (s, &r) in self.reward_rate.iter().enumerate() {
            if !r.is_finite() {
                out.push(Violation::new(ViolationKind::NonFiniteRate, format!("{who}: rate of state {s} is {r}")));
            } else if r < 0.0 {
                out.push(Violation::new(ViolationKind::NegativeRate, format!("{who}: rate of state {s} is {r}")));
            }
        }
        for (s, row) in self.kernel.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            // NaN counts as negative
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            let negative = row.iter().any(|&p| !(p >= 0.0));
            if negative || (sum - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::new(
                    ViolationKind::RowStochastic,
                    format!("{who}: kernel row {s} sums to {sum}"),
                ));
            }
        }
        if !self.switchable[self.initial] {
            out.push(Violation::new(
                ViolationKind::EntryNotSwitchable,
                format!("{who}: initial state is not a switch point (use with_feasible_entry)"),
            ));
        }
        let reach = self.reachable_from(self.initial);
        if !self.nonpreemptive && !reach.iter().any(|&s| self.switchable[s]) {
            out.push(Violation::new(
                ViolationKind::NoSwitchableState,
                format!("{who}: no reachable switchable state and not flagged non-preemptive"),
            ));
        }
        out
    }
}

/// A restriction on the instants at which an arm may be switched away from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RestrictionSpec {
    /// Keep the arm's own switchability flags.
    Unrestricted,
    /// Switching only at local times that are multiples of `period` steps.
    IntegerGrid { period: usize },
    /// Switching only in the flagged base states (semi-Markov epochs,
    /// repair periods, ...).
    StateBased { switchable: Vec<bool> },
    /// Once started, the arm is served forever.
    Nonpreemptive,
}

impl fmt::Display for RestrictionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unrestricted => write!(f, "unrestricted"),
            Self::IntegerGrid { period } => write!(f, "integer-grid({period})"),
            Self::StateBased { .. } => write!(f, "state-based"),
            Self::Nonpreemptive => write!(f, "nonpreemptive"),
        }
    }
}

/// Realizes `spec` on top of `base` by intersecting switchability and, where
/// needed, augmenting the state. Reward rates and the marginal dynamics of
/// the base states are preserved.
pub fn compile_restriction(spec: &RestrictionSpec, base: &ArmModel) -> Result<ArmModel> {
    if base.is_empty() {
        return Err(RmabError::InvalidModel("cannot restrict an arm with no states".into()));
    }
    let n = base.len();
    let compiled = match spec {
        RestrictionSpec::Unrestricted => base.clone(),
        RestrictionSpec::StateBased { switchable } => {
            if switchable.len() != n {
                return Err(RmabError::InvalidModel(format!(
                    "state-based restriction has {} flags for {n} states",
                    switchable.len()
                )));
            }
            let mut arm = base.clone();
            for (flag, &allowed) in arm.switchable.iter_mut().zip(switchable) {
                *flag = *flag && allowed;
            }
            arm
        }
        RestrictionSpec::IntegerGrid { period } => {
            let p = *period;
            if p == 0 {
                return Err(RmabError::InvalidModel("integer grid period must be positive".into()));
            }
            // state (s, phase) has id s * p + phase
            let id = |s: usize, ph: usize| s * p + ph;
            let m = n * p;
            let mut kernel = vec![vec![0.0; m]; m];
            let mut rates = vec![0.0; m];
            let mut switchable = vec![false; m];
            let mut base_state = vec![0; m];
            let mut labels = Vec::with_capacity(m);
            for s in 0..n {
                for ph in 0..p {
                    let x = id(s, ph);
                    rates[x] = base.reward_rate[s];
                    switchable[x] = ph == 0 && base.switchable[s];
                    base_state[x] = base.base_state[s];
                    labels.push(format!("{}@{ph}", base.labels[s]));
                    for (t, prob) in base.successors(s) {
                        kernel[x][id(t, (ph + 1) % p)] = prob;
                    }
                }
            }
            ArmModel {
                name: base.name.clone(),
                labels,
                reward_rate: rates,
                kernel,
                switchable,
                initial: id(base.initial, 0),
                base_state,
                nonpreemptive: base.nonpreemptive,
            }
        }
        RestrictionSpec::Nonpreemptive => {
            // state 0 is the entry instant, 1 + s the committed copy of s
            let m = n + 1;
            let mut kernel = vec![vec![0.0; m]; m];
            for (t, prob) in base.successors(base.initial) {
                kernel[0][1 + t] = prob;
            }
            for s in 0..n {
                for (t, prob) in base.successors(s) {
                    kernel[1 + s][1 + t] = prob;
                }
            }
            let mut rates = vec![base.reward_rate[base.initial]];
            rates.extend_from_slice(&base.reward_rate);
            let mut base_state = vec![base.base_state[base.initial]];
            base_state.extend_from_slice(&base.base_state);
            let mut labels = vec![format!("{}^", base.labels[base.initial])];
            labels.extend(base.labels.iter().map(|l| format!("{l}*")));
            let mut switchable = vec![false; m];
            switchable[0] = true;
            ArmModel {
                name: base.name.clone(),
                labels,
                reward_rate: rates,
                kernel,
                switchable,
                initial: 0,
                base_state,
                nonpreemptive: true,
            }
        }
    };
    Ok(compiled.with_feasible_entry())
}

/// Per-step discounting derived from the continuous-time rate β and grid step Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount {
    pub beta: f64,
    pub delta: f64,
    /// `e^{−βΔ}`
    pub gamma: f64,
    /// `1 − e^{−βΔ}`, computed without cancellation.
    pub one_minus_gamma: f64,
}

impl Discount {
    pub fn new(beta: f64, delta: f64) -> Self {
        let x = beta * delta;
        Self {
            beta,
            delta,
            gamma: (-x).exp(),
            one_minus_gamma: -(-x).exp_m1(),
        }
    }

    /// Present value, at the start of a step, of rate `rate` held for one step.
    pub fn step_reward(&self, rate: f64) -> f64 {
        rate * self.one_minus_gamma / self.beta
    }

    /// `γ^n` evaluated as `e^{−βΔn}`.
    pub fn power(&self, n: usize) -> f64 {
        (-self.beta * self.delta * n as f64).exp()
    }

    /// `γ^H · max_rate / β`: bound on the value lost by truncating at `horizon`.
    pub fn tail_bound(&self, horizon: usize, max_rate: f64) -> f64 {
        self.power(horizon) * max_rate / self.beta
    }

    /// Smallest horizon whose tail bound is at most `tol`.
    pub fn horizon_for_tail(&self, max_rate: f64, tol: f64) -> usize {
        if max_rate <= 0.0 {
            return 1;
        }
        let need = (max_rate / (self.beta * tol)).ln() / (self.beta * self.delta);
        let mut h = need.ceil().max(1.0) as usize;
        while self.tail_bound(h, max_rate) > tol {
            h += 1;
        }
        h
    }
}

/// A set of arms sharing one machine, with discounting and truncation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub arms: Vec<ArmModel>,
    pub beta: f64,
    pub delta: f64,
    pub horizon_steps: usize,
}

impl Scenario {
    pub fn new(arms: Vec<ArmModel>, beta: f64, delta: f64, horizon_steps: usize) -> Self {
        Self {
            arms,
            beta,
            delta,
            horizon_steps,
        }
    }

    /// Same arms with the horizon chosen so the truncation tail is `≤ tol`.
    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.horizon_steps = self.discount().horizon_for_tail(self.max_rate(), tol);
        self
    }

    pub fn discount(&self) -> Discount {
        Discount::new(self.beta, self.delta)
    }

    pub fn max_rate(&self) -> f64 {
        self.arms.iter().map(ArmModel::max_rate).fold(0.0, f64::max)
    }

    pub fn tail_bound(&self) -> f64 {
        self.discount().tail_bound(self.horizon_steps, self.max_rate())
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }
}

/// `e^{−βΔ}`.
pub fn discount_per_step(scenario: &Scenario) -> f64 {
    scenario.discount().gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    NoArms,
    Beta,
    Delta,
    NonFiniteRate,
    NegativeRate,
    RowStochastic,
    EntryNotSwitchable,
    NoSwitchableState,
    HorizonTail,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            Self::NoArms => "no-arms",
            Self::Beta => "beta",
            Self::Delta => "delta",
            Self::NonFiniteRate => "finite-rate",
            Self::NegativeRate => "nonnegative-rate",
            Self::RowStochastic => "row-stochastic",
            Self::EntryNotSwitchable => "entry-switchable",
            Self::NoSwitchableState => "reachable-switch-point",
            Self::HorizonTail => "horizon-tail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn new(kind: ViolationKind, message: String) -> Self {
        Self { kind, message }
    }
}

/// Every violated scenario invariant; empty iff the scenario is accepted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(RmabError::Rejected(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  [{}] {}", v.kind.code(), v.message)?;
        }
        Ok(())
    }
}

/// Checks every scenario invariant; `tail_tol` bounds `γ^H · max_rate / β`.
pub fn validate_scenario(scenario: &Scenario, tail_tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    if scenario.arms.is_empty() {
        violations.push(Violation::new(ViolationKind::NoArms, "scenario has no arms".into()));
    }
    if !(scenario.beta > 0.0 && scenario.beta.is_finite()) {
        violations.push(Violation::new(ViolationKind::Beta, format!("beta = {} must be positive", scenario.beta)));
    }
    if !(scenario.delta > 0.0 && scenario.delta.is_finite()) {
        violations.push(Violation::new(ViolationKind::Delta, format!("delta = {} must be positive", scenario.delta)));
    }
    for arm in &scenario.arms {
        violations.extend(arm.violations());
    }
    // the tail bound only needs a valid discount and finite rates
    let blocking = [ViolationKind::NoArms, ViolationKind::Beta, ViolationKind::Delta, ViolationKind::NonFiniteRate];
    if !violations.iter().any(|v| blocking.contains(&v.kind)) {
        let tail = scenario.tail_bound();
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(tail <= tail_tol) {
            violations.push(Violation::new(
                ViolationKind::HorizonTail,
                format!(
                    "horizon {} leaves tail bound {tail:e} above {tail_tol:e} (need {})",
                    scenario.horizon_steps,
                    scenario.discount().horizon_for_tail(scenario.max_rate(), tail_tol)
                ),
            ));
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> ArmModel {
        ArmModel::unrestricted(vec![1.0, 3.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0).unwrap()
    }

    /// Distribution of the base state after `n` steps, by forward propagation.
    fn base_marginals(arm: &ArmModel, steps: usize) -> Vec<Vec<f64>> {
        let nb = (0..arm.len()).map(|s| arm.base_state(s)).max().unwrap() + 1;
        let mut dist = vec![0.0; arm.len()];
        dist[arm.initial()] = 1.0;
        let mut out = Vec::new();
        for _ in 0..=steps {
            let mut proj = vec![0.0; nb];
            for (s, &p) in dist.iter().enumerate() {
                proj[arm.base_state(s)] += p;
            }
            out.push(proj);
            let mut next = vec![0.0; arm.len()];
            for (s, &p) in dist.iter().enumerate() {
                for (t, q) in arm.successors(s) {
                    next[t] += p * q;
                }
            }
            dist = next;
        }
        out
    }

    #[test]
    fn unrestricted_is_identity() {
        let arm = two_state();
        let c = compile_restriction(&RestrictionSpec::Unrestricted, &arm).unwrap();
        assert_eq!(c, arm);
        assert!(c.all_switchable());
    }

    #[test]
    fn integer_grid_on_single_state() {
        let c = compile_restriction(&RestrictionSpec::IntegerGrid { period: 3 }, &ArmModel::constant(1.0)).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.switchable_flags(), &[true, false, false]);
        assert_eq!(c.kernel_row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(c.kernel_row(2), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn nonpreemptive_commits_forever() {
        let c = compile_restriction(&RestrictionSpec::Nonpreemptive, &two_state()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.is_switchable(c.initial()));
        assert!(c.is_nonpreemptive());
        for s in c.reachable_from(c.initial()).into_iter().skip(1) {
            assert!(!c.is_switchable(s));
        }
        assert!(c.violations().is_empty());
    }

    #[test]
    fn zero_state_arm_is_rejected() {
        assert!(matches!(ArmModel::new(vec![], vec![], vec![], 0), Err(RmabError::InvalidModel(_))));
    }

    #[test]
    fn state_based_entry_is_made_feasible() {
        let arm = two_state().with_feasible_entry();
        let c = compile_restriction(&RestrictionSpec::StateBased { switchable: vec![false, true] }, &arm).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.is_switchable(c.initial()));
        assert_eq!(c.base_state(c.initial()), 0);
        assert!(!c.is_switchable(0));
    }

    #[test]
    fn integer_grid_switch_points_are_multiples_of_period() {
        let base = ArmModel::unrestricted(
            vec![1.0, 2.0, 0.5],
            vec![vec![0.2, 0.5, 0.3], vec![0.0, 0.4, 0.6], vec![0.7, 0.0, 0.3]],
            0,
        )
        .unwrap();
        for p in 1..=4 {
            let c = compile_restriction(&RestrictionSpec::IntegerGrid { period: p }, &base).unwrap();
            // enumerate every path of length 9
            let mut paths = vec![vec![c.initial()]];
            for _ in 0..9 {
                paths = paths
                    .into_iter()
                    .flat_map(|path| {
                        let last = *path.last().unwrap();
                        c.successors(last)
                            .map(|(t, _)| {
                                let mut q = path.clone();
                                q.push(t);
                                q
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
            }
            for path in &paths {
                for (n, &s) in path.iter().enumerate() {
                    assert_eq!(c.is_switchable(s), n % p == 0, "period {p}, local time {n}");
                }
            }
        }
    }

    #[test]
    fn compilation_preserves_marginals() {
        let base = ArmModel::unrestricted(
            vec![0.0, 1.0, 2.5, 4.0],
            vec![
                vec![0.1, 0.2, 0.3, 0.4],
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.0, 0.25, 0.25, 0.5],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
            1,
        )
        .unwrap();
        let specs = [
            RestrictionSpec::Unrestricted,
            RestrictionSpec::IntegerGrid { period: 3 },
            RestrictionSpec::StateBased { switchable: vec![true, false, true, false] },
            RestrictionSpec::Nonpreemptive,
        ];
        let expected = base_marginals(&base, 20);
        for spec in &specs {
            let c = compile_restriction(spec, &base).unwrap();
            let got = base_marginals(&c, 20);
            for (a, b) in expected.iter().zip(&got) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-14, "{spec}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn compile_unrestricted_is_idempotent_on_compiled_arms() {
        let base = two_state();
        for spec in [
            RestrictionSpec::IntegerGrid { period: 2 },
            RestrictionSpec::Nonpreemptive,
            RestrictionSpec::StateBased { switchable: vec![true, false] },
        ] {
            let once = compile_restriction(&spec, &base).unwrap();
            let again = compile_restriction(&RestrictionSpec::Unrestricted, &once).unwrap();
            assert_eq!(once, again);
        }
    }

    #[test]
    fn discount_closed_forms() {
        let s = Scenario::new(vec![ArmModel::constant(1.0)], 0.5, 2.0, 10);
        assert!((discount_per_step(&s) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((discount_per_step(&s) - 0.367879441).abs() < 1e-9);
        let mut prev = 0.0;
        for k in 1..12 {
            let g = Discount::new(1.0, 10f64.powi(-k)).gamma;
            assert!(g > prev && g < 1.0);
            prev = g;
        }
        assert!(1.0 - prev < 2e-11);
    }

    #[test]
    fn tiny_discount_rate_does_not_round_to_one() {
        let d = Discount::new(1e-9, 1.0);
        // 1 − e^{−x} = x − x²/2 + x³/6 − ...
        let x = 1e-9f64;
        let series = x - x * x / 2.0 + x * x * x / 6.0;
        assert!(d.gamma < 1.0);
        assert!((d.one_minus_gamma - series).abs() <= 1e-24);
        assert!(d.tail_bound(1_000, 1.0) < 1.0 / 1e-9);
    }

    #[test]
    fn validation_reports() {
        let bad_row = ArmModel::unrestricted(vec![1.0, 1.0], vec![vec![0.5, 0.499], vec![0.0, 1.0]], 0).unwrap();
        let r = validate_scenario(&Scenario::new(vec![bad_row], 1.0, 0.1, 1000), 1e-8);
        assert!(r.has(ViolationKind::RowStochastic));

        let arms = vec![two_state(), ArmModel::constant(2.0)];
        let short = Scenario::new(arms.clone(), 1.0, 0.1, 50);
        // γ^50 · 3 / 1 = 3e^{-5} ≈ 0.0202
        assert!((short.tail_bound() - 3.0 * (-5.0f64).exp()).abs() < 1e-15);
        assert!(validate_scenario(&short, 1e-8).has(ViolationKind::HorizonTail));

        let good = Scenario::new(arms, 1.0, 0.1, 0).with_tail_tolerance(1e-8);
        assert!(good.tail_bound() <= 1e-8);
        assert!(good.discount().tail_bound(good.horizon_steps - 1, 3.0) > 1e-8);
        assert!(validate_scenario(&good, 1e-8).is_ok());
    }

    #[test]
    fn generator_discretization_is_stochastic() {
        let arm = ArmModel::from_generator(vec![1.0, 3.0], vec![vec![-2.0, 2.0], vec![1.0, -1.0]], 0, 0.1).unwrap();
        // two-state closed form: P01 = a/(a+b)·(1 − e^{−(a+b)Δ})
        let p01 = 2.0 / 3.0 * (1.0 - (-0.3f64).exp());
        assert!((arm.kernel_row(0)[1] - p01).abs() < 1e-12);
        assert!(arm.violations().is_empty());
    }
}
