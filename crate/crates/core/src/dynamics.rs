//! The randomized-Pavlov edge-update process on the n-cycle.
//!
//! Players sit on vertices `0..n` and every index is taken modulo `n`. One
//! step picks a single edge `{i, i+1}` uniformly at random and lets its two
//! endpoints play one round; the pair updates according to the strategy's
//! transition diagram:
//!
//! | pair  | Pavlov | RP (each player independently)     | SRP (jointly)      |
//! |-------|--------|------------------------------------|--------------------|
//! | `++`  | `++`   | `++`                               | `++`               |
//! | `+-`  | `--`   | `--`                               | `--`               |
//! | `-+`  | `--`   | `--`                               | `--`               |
//! | `--`  | `++`   | each side becomes `+` w.p. `p`     | `++` w.p. `p`      |
//!
//! Pavlov is the `p = 1` member of both randomized families, and at `p = 0`
//! the two families coincide (mutual defection is then absorbing).
//!
//! Randomness is consumed in a fixed order so trajectories are reproducible:
//! one uniform integer in `[0, n)` for the edge, then, only on a `--` edge,
//! two uniforms (left player first) for RP or one uniform for SRP. A player
//! cooperates iff its uniform `u` satisfies `u < p`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A player's current action. Serialized as `-1` / `+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Action {
    Defect,
    Cooperate,
}

impl Action {
    pub fn sign(self) -> i8 {
        match self {
            Action::Defect => -1,
            Action::Cooperate => 1,
        }
    }

    pub fn is_defect(self) -> bool {
        self == Action::Defect
    }

    fn symbol(self) -> char {
        match self {
            Action::Defect => '-',
            Action::Cooperate => '+',
        }
    }
}

impl From<Action> for i8 {
    fn from(a: Action) -> i8 {
        a.sign()
    }
}

impl TryFrom<i8> for Action {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Action::Defect),
            1 => Ok(Action::Cooperate),
            other => Err(format!("player state must be -1 or +1, got {other}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Deterministic win-stay lose-shift.
    Pavlov,
    /// Rational Pavlov: after `--` each player independently cooperates w.p. `p`.
    Rp,
    /// Simplified Rational Pavlov: after `--` both cooperate together w.p. `p`.
    Srp,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Pavlov => "pavlov",
            StrategyKind::Rp => "rp",
            StrategyKind::Srp => "srp",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pavlov" => Ok(StrategyKind::Pavlov),
            "rp" => Ok(StrategyKind::Rp),
            "srp" => Ok(StrategyKind::Srp),
            other => Err(Error::invalid(format!("unknown strategy `{other}` (expected pavlov, rp or srp)"))),
        }
    }
}

/// Strategy kind together with the forgiveness parameter `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub p: f64,
}

impl Strategy {
    pub fn new(kind: StrategyKind, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("p must lie in [0, 1], got {p}")));
        }
        Ok(Strategy { kind, p })
    }

    pub fn pavlov() -> Self {
        Strategy { kind: StrategyKind::Pavlov, p: 1.0 }
    }

    pub fn rp(p: f64) -> Result<Self> {
        Self::new(StrategyKind::Rp, p)
    }

    pub fn srp(p: f64) -> Result<Self> {
        Self::new(StrategyKind::Srp, p)
    }

    /// The probability actually used by the dynamics; Pavlov always forgives.
    pub fn effective_p(&self) -> f64 {
        match self.kind {
            StrategyKind::Pavlov => 1.0,
            _ => self.p,
        }
    }

    /// Whether mutual defection is absorbing (`p = 0`).
    pub fn defection_absorbs(&self) -> bool {
        self.effective_p() == 0.0
    }

    /// The randomized family whose equations describe this strategy. Pavlov is
    /// RP at `p = 1`.
    pub fn family(&self) -> StrategyKind {
        match self.kind {
            StrategyKind::Pavlov => StrategyKind::Rp,
            k => k,
        }
    }
}

/// One round played on an edge. Pure: all randomness arrives through `u1`
/// (left player, or the joint draw for SRP) and `u2` (right player, RP only).
pub fn edge_transition(left: Action, right: Action, strategy: &Strategy, u1: f64, u2: f64) -> (Action, Action) {
    use Action::*;
    match (left, right) {
        (Cooperate, Cooperate) => (Cooperate, Cooperate),
        (Cooperate, Defect) | (Defect, Cooperate) => (Defect, Defect),
        (Defect, Defect) => {
            let p = strategy.effective_p();
            let choose = |u: f64| if u < p { Cooperate } else { Defect };
            match strategy.kind {
                StrategyKind::Pavlov => (Cooperate, Cooperate),
                StrategyKind::Rp => (choose(u1), choose(u2)),
                StrategyKind::Srp => {
                    let a = choose(u1);
                    (a, a)
                }
            }
        }
    }
}

/// Initial configuration of the cycle. Serialized in its string form, see
/// the `FromStr` impl.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitConfig {
    #[default]
    AllDefect,
    AllCooperate,
    /// A single defector at the given vertex.
    SingleDefector(usize),
    /// Each vertex independently defects with probability `q`.
    Bernoulli(f64),
    Explicit(Vec<Action>),
}

impl fmt::Display for InitConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitConfig::AllDefect => f.write_str("all-defect"),
            InitConfig::AllCooperate => f.write_str("all-cooperate"),
            InitConfig::SingleDefector(i) => write!(f, "single-defector:{i}"),
            InitConfig::Bernoulli(q) => write!(f, "bernoulli:{q}"),
            InitConfig::Explicit(v) => {
                f.write_str("explicit:")?;
                v.iter().try_for_each(|a| write!(f, "{}", a.symbol()))
            }
        }
    }
}

/// Parses `all-defect`, `all-cooperate`, `single-defector[:i]`,
/// `bernoulli:q` or `explicit:+-+-...`.
impl FromStr for InitConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::invalid(format!("cannot parse initial configuration `{s}`"));
        match (head, arg) {
            ("all-defect", None) => Ok(InitConfig::AllDefect),
            ("all-cooperate", None) => Ok(InitConfig::AllCooperate),
            ("single-defector", None) => Ok(InitConfig::SingleDefector(0)),
            ("single-defector", Some(a)) => a.parse().map(InitConfig::SingleDefector).map_err(|_| bad()),
            ("bernoulli", Some(a)) => a.parse().map(InitConfig::Bernoulli).map_err(|_| bad()),
            ("explicit", Some(a)) => a
                .chars()
                .map(|c| match c {
                    '+' => Ok(Action::Cooperate),
                    '-' => Ok(Action::Defect),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>>>()
                .map(InitConfig::Explicit),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for InitConfig {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitConfig> for String {
    fn from(c: InitConfig) -> String {
        c.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    /// The chosen edge joins vertices `edge` and `edge + 1 (mod n)`.
    pub edge: usize,
    pub old: (Action, Action),
    pub new: (Action, Action),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AllPlus,
    AllMinus,
    Capped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::AllPlus => "all_plus",
            Outcome::AllMinus => "all_minus",
            Outcome::Capped => "capped",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_plus" => Ok(Outcome::AllPlus),
            "all_minus" => Ok(Outcome::AllMinus),
            "capped" => Ok(Outcome::Capped),
            other => Err(Error::Parse(format!("unknown outcome `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunResult {
    pub steps_taken: u64,
    pub outcome: Outcome,
    pub cooperator_fraction: f64,
}

/// A maximal cyclic interval of equal actions starting at `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunList {
    pub plus_runs: Vec<Run>,
    pub minus_runs: Vec<Run>,
    pub is_all_minus: bool,
    pub is_all_plus: bool,
}

/// Maximal runs of `states` in cyclic order, starting from the first run
/// boundary at or after vertex 0. A uniform cycle yields a single pseudo-run
/// of length `n` starting at 0.
pub fn extract_runs(states: &[Action]) -> RunList {
    let n = states.len();
    let mut list = RunList { plus_runs: Vec::new(), minus_runs: Vec::new(), is_all_minus: false, is_all_plus: false };
    if n == 0 {
        return list;
    }
    // First index whose left neighbour differs, i.e. the start of a run.
    let Some(first) = (0..n).find(|&i| states[(i + n - 1) % n] != states[i]) else {
        let whole = Run { start: 0, len: n };
        if states[0].is_defect() {
            list.is_all_minus = true;
            list.minus_runs.push(whole);
        } else {
            list.is_all_plus = true;
            list.plus_runs.push(whole);
        }
        return list;
    };

    let mut start = first;
    let mut len = 0;
    for k in 0..n {
        let i = (first + k) % n;
        if k > 0 && states[i] != states[(i + n - 1) % n] {
            push_run(&mut list, states[start], Run { start, len });
            start = i;
            len = 0;
        }
        len += 1;
    }
    push_run(&mut list, states[start], Run { start, len });
    list
}

fn push_run(list: &mut RunList, a: Action, run: Run) {
    match a {
        Action::Defect => list.minus_runs.push(run),
        Action::Cooperate => list.plus_runs.push(run),
    }
}

/// The ±1 configuration of the cycle together with its private RNG.
#[derive(Clone, Debug)]
pub struct CycleState {
    states: Vec<Action>,
    minus_count: usize,
    rng: ChaCha8Rng,
    step_count: u64,
}

impl CycleState {
    /// Builds the initial configuration. The generator is ChaCha8 seeded from
    /// `seed`; `Bernoulli` draws its vertices from that same stream before any
    /// step is taken.
    pub fn new(n: usize, init: &InitConfig, seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid(format!("the cycle needs at least 3 players, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = match init {
            InitConfig::AllDefect => vec![Action::Defect; n],
            InitConfig::AllCooperate => vec![Action::Cooperate; n],
            InitConfig::SingleDefector(i) => {
                if *i >= n {
                    return Err(Error::invalid(format!("defector position {i} outside 0..{n}")));
                }
                let mut v = vec![Action::Cooperate; n];
                v[*i] = Action::Defect;
                v
            }
            InitConfig::Bernoulli(q) => {
                if !(0.0..=1.0).contains(q) {
                    return Err(Error::invalid(format!("bernoulli q must lie in [0, 1], got {q}")));
                }
                (0..n)
                    .map(|_| if rng.random::<f64>() < *q { Action::Defect } else { Action::Cooperate })
                    .collect()
            }
            InitConfig::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::invalid(format!("explicit configuration has {} entries, expected {n}", v.len())));
                }
                v.clone()
            }
        };
        let minus_count = states.iter().filter(|a| a.is_defect()).count();
        Ok(CycleState { states, minus_count, rng, step_count: 0 })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Action] {
        &self.states
    }

    pub fn minus_count(&self) -> usize {
        self.minus_count
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn is_all_plus(&self) -> bool {
        self.minus_count == 0
    }

    pub fn is_all_minus(&self) -> bool {
        self.minus_count == self.states.len()
    }

    pub fn cooperator_fraction(&self) -> f64 {
        (self.n() - self.minus_count) as f64 / self.n() as f64
    }

    pub fn runs(&self) -> RunList {
        extract_runs(&self.states)
    }

    /// One update of a uniformly chosen edge.
    pub fn step(&mut self, strategy: &Strategy) -> StepOutcome {
        let n = self.states.len();
        let i = self.rng.random_range(0..n);
        let j = if i + 1 == n { 0 } else { i + 1 };
        let old = (self.states[i], self.states[j]);
        let (u1, u2) = match (old, strategy.kind) {
            ((Action::Defect, Action::Defect), StrategyKind::Rp) => (self.rng.random::<f64>(), self.rng.random::<f64>()),
            ((Action::Defect, Action::Defect), StrategyKind::Srp) => (self.rng.random::<f64>(), 0.0),
            _ => (0.0, 0.0),
        };
        let new = edge_transition(old.0, old.1, strategy, u1, u2);
        if new != old {
            let before = old.0.is_defect() as usize + old.1.is_defect() as usize;
            let after = new.0.is_defect() as usize + new.1.is_defect() as usize;
            self.minus_count = self.minus_count + after - before;
            self.states[i] = new.0;
            self.states[j] = new.1;
        }
        self.step_count += 1;
        StepOutcome { edge: i, old, new }
    }

    fn absorbed(&self, strategy: &Strategy) -> Option<Outcome> {
        if self.is_all_plus() {
            Some(Outcome::AllPlus)
        } else if strategy.defection_absorbs() && self.is_all_minus() {
            Some(Outcome::AllMinus)
        } else {
            None
        }
    }

    /// Steps until all-cooperate (or all-defect when `p = 0`), or until this
    /// call has taken `max_steps` steps.
    pub fn run(&mut self, strategy: &Strategy, max_steps: u64) -> RunResult {
        let mut taken = 0;
        let outcome = loop {
            if let Some(o) = self.absorbed(strategy) {
                break o;
            }
            if taken == max_steps {
                break Outcome::Capped;
            }
            self.step(strategy);
            taken += 1;
        };
        RunResult { steps_taken: taken, outcome, cooperator_fraction: self.cooperator_fraction() }
    }
}

impl fmt::Display for CycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.states.iter().try_for_each(|a| write!(f, "{}", a.symbol()))
    }
}

pub fn run_until_absorbed(n: usize, init: &InitConfig, strategy: &Strategy, seed: u64, max_steps: u64) -> Result<RunResult> {
    if max_steps == 0 {
        return Err(Error::invalid("max_steps must be at least 1"));
    }
    Ok(CycleState::new(n, init, seed)?.run(strategy, max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{Cooperate as P, Defect as M};

    fn rp(p: f64) -> Strategy {
        Strategy::rp(p).unwrap()
    }

    fn srp(p: f64) -> Strategy {
        Strategy::srp(p).unwrap()
    }

    #[test]
    fn new_state_initial_configurations() {
        let s = CycleState::new(5, &InitConfig::AllDefect, 9).unwrap();
        assert_eq!(s.states(), &[M; 5]);
        assert_eq!(s.minus_count(), 5);
        assert_eq!(s.step_count(), 0);

        let s = CycleState::new(4, &InitConfig::SingleDefector(2), 9).unwrap();
        assert_eq!(s.states(), &[P, P, M, P]);
        assert_eq!(s.minus_count(), 1);

        for seed in 0..50 {
            let s = CycleState::new(6, &InitConfig::Bernoulli(0.0), seed).unwrap();
            assert!(s.is_all_plus());
        }
    }

    #[test]
    fn new_state_rejects_bad_input() {
        assert!(matches!(CycleState::new(2, &InitConfig::AllDefect, 0), Err(Error::InvalidArgument(_))));
        let short = InitConfig::Explicit(vec![M, P, M]);
        assert!(matches!(CycleState::new(4, &short, 0), Err(Error::InvalidArgument(_))));
        assert!(CycleState::new(4, &InitConfig::SingleDefector(4), 0).is_err());
        assert!(CycleState::new(4, &InitConfig::Bernoulli(1.5), 0).is_err());
        assert!(Strategy::rp(-0.1).is_err());
    }

    #[test]
    fn bernoulli_init_is_seed_deterministic() {
        let a = CycleState::new(64, &InitConfig::Bernoulli(0.5), 42).unwrap();
        let b = CycleState::new(64, &InitConfig::Bernoulli(0.5), 42).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn transition_diagram() {
        assert_eq!(edge_transition(P, P, &rp(0.3), 0.0, 0.0), (P, P));
        assert_eq!(edge_transition(M, P, &rp(0.3), 0.0, 0.0), (M, M));
        assert_eq!(edge_transition(P, M, &srp(0.3), 0.0, 0.0), (M, M));
        assert_eq!(edge_transition(M, M, &rp(0.9), 0.5, 0.95), (P, M));
        assert_eq!(edge_transition(M, M, &rp(0.9), 0.95, 0.5), (M, P));
        assert_eq!(edge_transition(M, M, &srp(0.9), 0.5, 0.99), (P, P));
        assert_eq!(edge_transition(M, M, &srp(0.9), 0.95, 0.0), (M, M));
        assert_eq!(edge_transition(M, M, &Strategy::pavlov(), 0.999, 0.999), (P, P));
        for s in [rp(0.0), srp(0.0)] {
            assert_eq!(edge_transition(M, M, &s, 0.0, 0.0), (M, M));
        }
        // Half-open uniforms: p = 1 always cooperates.
        assert_eq!(edge_transition(M, M, &rp(1.0), 0.999_999, 0.999_999), (P, P));
    }

    #[test]
    fn rp_and_srp_agree_at_extremes() {
        for &(u1, u2) in &[(0.0, 0.0), (0.3, 0.7), (0.999, 0.1)] {
            for l in [M, P] {
                for r in [M, P] {
                    assert_eq!(edge_transition(l, r, &rp(0.0), u1, u2), edge_transition(l, r, &srp(0.0), u1, u2));
                    assert_eq!(edge_transition(l, r, &rp(1.0), u1, u2), edge_transition(l, r, &Strategy::pavlov(), u1, u2));
                }
            }
        }
    }

    #[test]
    fn all_plus_is_fixed() {
        let mut s = CycleState::new(9, &InitConfig::AllCooperate, 3).unwrap();
        for _ in 0..100 {
            s.step(&rp(0.5));
        }
        assert!(s.is_all_plus());
        assert_eq!(s.step_count(), 100);
    }

    #[test]
    fn all_minus_is_fixed_at_zero_p() {
        let mut s = CycleState::new(9, &InitConfig::AllDefect, 3).unwrap();
        for _ in 0..100 {
            s.step(&srp(0.0));
        }
        assert!(s.is_all_minus());
    }

    #[test]
    fn three_cycle_single_defector_step() {
        // The two edges touching the defector collapse to --; the ++ edge is inert.
        for seed in 0..30 {
            let mut s = CycleState::new(3, &InitConfig::Explicit(vec![P, M, P]), seed).unwrap();
            let out = s.step(&rp(0.7));
            if out.edge == 2 {
                assert_eq!(s.states(), [P, M, P]);
                assert_eq!(out.new, (P, P));
            } else {
                assert!(s.states() == [M, M, P] || s.states() == [P, M, M], "{}", s);
                assert_eq!(out.new, (M, M));
                assert_eq!(s.minus_count(), 2);
            }
        }
    }

    #[test]
    fn run_until_absorbed_basic_outcomes() {
        let r = run_until_absorbed(10, &InitConfig::AllCooperate, &Strategy::pavlov(), 0, 10).unwrap();
        assert_eq!(r.steps_taken, 0);
        assert_eq!(r.outcome, Outcome::AllPlus);

        let r = run_until_absorbed(10, &InitConfig::AllDefect, &rp(0.0), 0, 10).unwrap();
        assert_eq!((r.steps_taken, r.outcome), (0, Outcome::AllMinus));

        let r = run_until_absorbed(10, &InitConfig::AllDefect, &rp(0.3), 0, 1).unwrap();
        assert!(r.steps_taken <= 1);

        assert!(run_until_absorbed(10, &InitConfig::AllDefect, &rp(0.3), 0, 0).is_err());
    }

    #[test]
    fn defection_spreads_to_all_minus_at_zero_p() {
        let n = 20;
        let reps = 400;
        let mean: f64 = (0..reps)
            .map(|seed| {
                let r = run_until_absorbed(n, &InitConfig::SingleDefector(0), &rp(0.0), seed, 1 << 30).unwrap();
                assert_eq!(r.outcome, Outcome::AllMinus);
                assert_eq!(r.cooperator_fraction, 0.0);
                r.steps_taken as f64
            })
            .sum::<f64>()
            / reps as f64;
        // Sum of n-1 geometrics with success 2/n: mean 190, sd ~ 40 per run.
        let expected = (n * (n - 1) / 2) as f64;
        let var = (n - 1) as f64 * (1.0 - 2.0 / n as f64) * (n * n) as f64 / 4.0;
        let se = (var / reps as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * se, "mean {mean} vs {expected} (se {se})");
    }

    #[test]
    fn small_p_caps_with_fraction_near_p() {
        let r = run_until_absorbed(100, &InitConfig::AllDefect, &rp(0.2), 11, 1_000_000).unwrap();
        assert_eq!(r.outcome, Outcome::Capped);
        assert_eq!(r.steps_taken, 1_000_000);
        assert!((r.cooperator_fraction - 0.2).abs() <= 0.1, "{}", r.cooperator_fraction);
    }

    #[test]
    fn extract_runs_examples() {
        let r = extract_runs(&[M; 7]);
        assert!(r.is_all_minus && !r.is_all_plus);
        assert_eq!(r.minus_runs, vec![Run { start: 0, len: 7 }]);
        assert!(r.plus_runs.is_empty());

        let r = extract_runs(&[P, M, M, P, P]);
        assert_eq!(r.minus_runs, vec![Run { start: 1, len: 2 }]);
        assert_eq!(r.plus_runs, vec![Run { start: 3, len: 3 }]);

        let r = extract_runs(&[M, P, M, P]);
        assert_eq!(r.minus_runs.len(), 2);
        assert_eq!(r.plus_runs.len(), 2);
        assert!(r.minus_runs.iter().chain(&r.plus_runs).all(|run| run.len == 1));

        let r = extract_runs(&[P; 4]);
        assert!(r.is_all_plus);
        assert_eq!(r.plus_runs, vec![Run { start: 0, len: 4 }]);
    }

    #[test]
    fn init_config_parsing() {
        assert_eq!("all-defect".parse::<InitConfig>().unwrap(), InitConfig::AllDefect);
        assert_eq!("single-defector".parse::<InitConfig>().unwrap(), InitConfig::SingleDefector(0));
        assert_eq!("single-defector:3".parse::<InitConfig>().unwrap(), InitConfig::SingleDefector(3));
        assert_eq!("bernoulli:0.25".parse::<InitConfig>().unwrap(), InitConfig::Bernoulli(0.25));
        assert_eq!("explicit:+-+".parse::<InitConfig>().unwrap(), InitConfig::Explicit(vec![P, M, P]));
        assert!("bernoulli".parse::<InitConfig>().is_err());
        assert!("explicit:+x".parse::<InitConfig>().is_err());
        for s in ["all-cooperate", "bernoulli:0.5", "explicit:-+-", "single-defector:2"] {
            assert_eq!(s.parse::<InitConfig>().unwrap().to_string(), s);
        }
    }
}
