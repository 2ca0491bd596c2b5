//! Online execution of belief-based programs.
//!
//! A configuration holds the remaining program, the agent's belief and the
//! actual world. Guards are evaluated against the belief only; objective
//! guards are read as `Know(φ)` unless strict guards are requested.
//! Preconditions are checked in the actual world. After each primitive action
//! nature picks an outcome, the actual world is progressed and the belief is
//! updated with the observation of that outcome.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::action::{Bat, GroundAction, IssuedAction};
use crate::belief::{BeliefModel, BeliefState};
use crate::logic::{eval_epistemic, CmpOp, Env, Epistemic, Formula, Value, World};
use crate::program::{issue, Program};
use crate::rational::Rational;
use crate::trace::{OracleSource, Status, Trace, TraceStep};

pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Cap on consecutive transitions that execute no primitive action.
pub const SILENT_TRANSITION_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    /// Additionally require `Know(Poss)` before executing an action.
    pub strict_poss: bool,
    /// Reject guards and tests that are not explicitly epistemic.
    pub strict_guards: bool,
    /// Maximum number of primitive actions per run.
    pub max_steps: usize,
    /// Record the belief after every step in the trace.
    pub snapshots: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            strict_poss: false,
            strict_guards: false,
            max_steps: DEFAULT_MAX_STEPS,
            snapshots: false,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Failure {
    #[error("test failed: {0}")]
    TestFailed(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("precondition not known: {0}")]
    PreconditionNotKnown(String),
    #[error("script mismatch: {0}")]
    ScriptMismatch(String),
    #[error("script underrun at {0}")]
    ScriptUnderrun(String),
    #[error("objective guard in strict mode: {0}")]
    ObjectiveGuard(String),
    #[error("{0}")]
    Inconsistent(String),
    #[error("evaluation error: {0}")]
    Eval(String),
}

/// The pending part of a program as a stack of nodes (top is last). Nodes are
/// compared by address, so continuations into the same program tree hash and
/// compare cheaply.
#[derive(Clone, Debug, Default)]
pub struct Continuation<'p> {
    stack: Vec<&'p Program>,
}

impl<'p> Continuation<'p> {
    pub fn new(p: &'p Program) -> Continuation<'p> {
        Continuation { stack: vec![p] }
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }
}

impl PartialEq for Continuation<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.stack.len() == other.stack.len()
            && self.stack.iter().zip(&other.stack).all(|(a, b)| std::ptr::eq(*a, *b))
    }
}

impl Eq for Continuation<'_> {}

impl Hash for Continuation<'_> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for p in &self.stack {
            std::ptr::hash(*p, state);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config<'p, B = BeliefState> {
    pub cont: Continuation<'p>,
    pub belief: B,
    pub actual: World,
    /// Primitive actions executed so far.
    pub steps: usize,
}

/// Something that happened while advancing to the next primitive action.
#[derive(Clone, Debug)]
pub enum GuardEvent<'p> {
    /// A guard (of `if`, `while` or `test`) was evaluated.
    Evaluated { guard: &'p Formula, value: bool },
    /// A `while` loop was left.
    LoopExit(&'p Program),
}

#[derive(Clone, Debug)]
pub enum Settled<'p> {
    Done,
    Act {
        issued: IssuedAction,
        rest: Continuation<'p>,
    },
}

#[derive(Clone, Debug)]
pub enum SettleError {
    Failure(Failure),
    /// Too many transitions without a primitive action.
    Diverged,
}

impl From<Failure> for SettleError {
    fn from(f: Failure) -> Self {
        SettleError::Failure(f)
    }
}

#[derive(Clone, Debug)]
pub struct Machine<'b> {
    pub bat: &'b Bat,
    pub options: EngineOptions,
}

impl<'b> Machine<'b> {
    pub fn new(bat: &'b Bat, options: EngineOptions) -> Machine<'b> {
        Machine { bat, options }
    }

    /// Guard semantics: explicitly epistemic formulas as written, objective
    /// ones as `Know(φ)` (or rejected in strict mode).
    pub fn eval_guard<B: Epistemic>(&self, guard: &Formula, belief: &B) -> Result<bool, Failure> {
        let mut env = Env::new();
        let r = if guard.is_objective() && guard.mentions_fluents() {
            if self.options.strict_guards {
                return Err(Failure::ObjectiveGuard(crate::syntax::print_formula(guard)));
            }
            belief.believes(guard, &mut env, CmpOp::Eq, &Rational::one())
        } else {
            eval_epistemic(guard, belief, &mut env)
        };
        r.map_err(|e| Failure::Eval(e.to_string()))
    }

    /// Runs tests, conditionals and loops until the next primitive action or
    /// the end of the program.
    pub fn settle<'p, B: Epistemic>(
        &self,
        cont: &Continuation<'p>,
        belief: &B,
        events: &mut Vec<GuardEvent<'p>>,
    ) -> Result<Settled<'p>, SettleError> {
        let mut stack = cont.stack.clone();
        let mut silent = 0usize;
        // The belief is fixed while settling, so reaching a loop head twice
        // with the same continuation is a silent cycle.
        let mut heads: HashSet<Vec<*const Program>> = HashSet::new();
        while let Some(node) = stack.pop() {
            silent += 1;
            if silent > SILENT_TRANSITION_LIMIT {
                return Err(SettleError::Diverged);
            }
            match node {
                Program::Nil => {}
                Program::Seq(items) => stack.extend(items.iter().rev()),
                Program::Test(f) => {
                    let value = self.eval_guard(f, belief)?;
                    events.push(GuardEvent::Evaluated { guard: f, value });
                    if !value {
                        return Err(Failure::TestFailed(crate::syntax::print_formula(f)).into());
                    }
                }
                Program::If(c, t, e) => {
                    let value = self.eval_guard(c, belief)?;
                    events.push(GuardEvent::Evaluated { guard: c, value });
                    stack.push(if value { t } else { e });
                }
                Program::While(c, body) => {
                    let key = stack.iter().copied().chain([node]).map(|p| p as *const Program).collect();
                    if !heads.insert(key) {
                        return Err(SettleError::Diverged);
                    }
                    let value = self.eval_guard(c, belief)?;
                    events.push(GuardEvent::Evaluated { guard: c, value });
                    if value {
                        stack.push(node);
                        stack.push(body);
                    } else {
                        events.push(GuardEvent::LoopExit(node));
                    }
                }
                Program::Act { name, args } => {
                    let issued = issue(name, args).map_err(|e| Failure::Eval(e.to_string()))?;
                    return Ok(Settled::Act {
                        issued,
                        rest: Continuation { stack },
                    });
                }
            }
        }
        Ok(Settled::Done)
    }

    /// Outcomes nature may choose in the actual world with their
    /// probabilities (likelihoods renormalized over the possible outcomes),
    /// in canonical order.
    pub fn outcome_distribution<B: BeliefModel>(
        &self,
        belief: &B,
        actual: &World,
        issued: &IssuedAction,
    ) -> Result<Vec<(GroundAction, Rational)>, Failure> {
        let eval = |e: crate::action::ActionError| Failure::Eval(e.to_string());
        let outcomes = self.bat.outcomes(issued).map_err(eval)?;
        if self.options.strict_poss {
            for w in belief.worlds() {
                let mut possible = false;
                for a in &outcomes {
                    if self.bat.poss(w, a).map_err(eval)? {
                        possible = true;
                        break;
                    }
                }
                if !possible {
                    return Err(Failure::PreconditionNotKnown(issued.to_string()));
                }
            }
        }
        let mut dist = Vec::new();
        let mut total = Rational::zero();
        for a in outcomes {
            if !self.bat.poss(actual, &a).map_err(eval)? {
                continue;
            }
            let l = self.bat.likelihood(actual, &a).map_err(eval)?;
            if l.is_zero() {
                continue;
            }
            total += &l;
            dist.push((a, l));
        }
        if dist.is_empty() {
            return Err(Failure::PreconditionViolated(issued.to_string()));
        }
        if !total.is_one() {
            for (_, p) in &mut dist {
                *p = &*p / &total;
            }
        }
        Ok(dist)
    }

    /// Executes one ground action: progress the actual world, update the
    /// belief with the action's observation.
    pub fn apply<B: BeliefModel>(
        &self,
        belief: &B,
        actual: &World,
        action: &GroundAction,
    ) -> Result<(B, World), Failure> {
        let obs = self
            .bat
            .observation_of(action)
            .map_err(|e| Failure::Eval(e.to_string()))?;
        let next_actual = self
            .bat
            .progress(actual, action)
            .map_err(|e| Failure::Eval(e.to_string()))?;
        let next_belief = belief.update(&obs, self.bat).map_err(|e| match e {
            crate::belief::BeliefError::InconsistentObservation(_) => Failure::Inconsistent(e.to_string()),
            e => Failure::Eval(e.to_string()),
        })?;
        Ok((next_belief, next_actual))
    }

    /// One online transition up to and including the next primitive action.
    pub fn step<'p>(&self, config: Config<'p>, oracle: &mut NatureOracle) -> StepOutcome<'p> {
        if config.steps >= self.options.max_steps {
            return StepOutcome::StepLimit(config);
        }
        let mut events = Vec::new();
        let (issued, rest) = match self.settle(&config.cont, &config.belief, &mut events) {
            Ok(Settled::Done) => return StepOutcome::Done(config),
            Ok(Settled::Act { issued, rest }) => (issued, rest),
            Err(SettleError::Diverged) => return StepOutcome::StepLimit(config),
            Err(SettleError::Failure(f)) => return StepOutcome::Failed(config, f),
        };
        let result = self
            .outcome_distribution(&config.belief, &config.actual, &issued)
            .and_then(|dist| oracle.choose(self.bat, &issued, &dist))
            .and_then(|action| {
                let (belief, actual) = self.apply(&config.belief, &config.actual, &action)?;
                Ok((action, belief, actual))
            });
        match result {
            Err(f) => StepOutcome::Failed(config, f),
            Ok((action, belief, actual)) => {
                let observed = self
                    .bat
                    .observation_of(&action)
                    .expect("observation of an outcome of a known schema");
                let step = TraceStep {
                    index: config.steps + 1,
                    issued,
                    actual: action,
                    observed,
                    belief: self.options.snapshots.then(|| belief.snapshot(self.bat)),
                };
                let next = Config {
                    cont: rest,
                    belief,
                    actual,
                    steps: config.steps + 1,
                };
                StepOutcome::Advanced(next, step)
            }
        }
    }

    /// Initial configuration; the actual world is the designated one, or is
    /// drawn from the initial belief by the oracle.
    pub fn initial<'p>(&self, program: &'p Program, oracle: &mut NatureOracle) -> Result<Config<'p>, Failure> {
        let belief = BeliefState::initial(self.bat).map_err(|e| Failure::Eval(e.to_string()))?;
        let actual = match self.bat.initial_actual_world().map_err(|e| Failure::Eval(e.to_string()))? {
            Some(w) => w,
            None => oracle.choose_world(&belief)?,
        };
        Ok(Config {
            cont: Continuation::new(program),
            belief,
            actual,
            steps: 0,
        })
    }

    /// Iterates `step` until the program completes, fails, or hits the step
    /// bound.
    pub fn run<'p>(&self, program: &'p Program, oracle: &mut NatureOracle) -> (Trace, Option<Config<'p>>) {
        let mut trace = Trace {
            bat_digest: self.bat.digest(),
            oracle: oracle.source(),
            steps: Vec::new(),
            status: Status::Completed,
            warnings: Vec::new(),
        };
        let mut config = match self.initial(program, oracle) {
            Ok(c) => c,
            Err(f) => {
                trace.status = Status::Failed(f.to_string());
                return (trace, None);
            }
        };
        loop {
            match self.step(config, oracle) {
                StepOutcome::Advanced(next, step) => {
                    trace.steps.push(step);
                    config = next;
                }
                StepOutcome::Done(c) => {
                    trace.status = Status::Completed;
                    if let Some(rest) = oracle.remaining() {
                        if rest > 0 {
                            trace.warnings.push(format!("{rest} unused trailing outcome value(s) in nature script"));
                        }
                    }
                    return (trace, Some(c));
                }
                StepOutcome::Failed(c, f) => {
                    trace.status = Status::Failed(f.to_string());
                    return (trace, Some(c));
                }
                StepOutcome::StepLimit(c) => {
                    trace.status = Status::StepLimit;
                    return (trace, Some(c));
                }
            }
        }
    }
}

#[derive(Debug)]
pub enum StepOutcome<'p> {
    Advanced(Config<'p>, TraceStep),
    Done(Config<'p>),
    Failed(Config<'p>, Failure),
    StepLimit(Config<'p>),
}

/// Nature's choices: a seeded pseudo-random sampler or a fixed script.
///
/// The sampler is ChaCha8 seeded from a `u64`; each choice draws one `u64`
/// `r` and picks the first outcome (in canonical order) whose cumulative
/// probability exceeds `r / 2^64`, compared exactly.
#[derive(Clone, Debug)]
pub enum NatureOracle {
    Seeded { seed: u64, rng: Box<ChaCha8Rng> },
    Scripted { script: Vec<Value>, pos: usize },
}

impl NatureOracle {
    pub fn seeded(seed: u64) -> NatureOracle {
        NatureOracle::Seeded {
            seed,
            rng: Box::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn scripted(script: Vec<Value>) -> NatureOracle {
        NatureOracle::Scripted { script, pos: 0 }
    }

    pub fn source(&self) -> OracleSource {
        match self {
            NatureOracle::Seeded { seed, .. } => OracleSource::Seed(*seed),
            NatureOracle::Scripted { script, .. } => OracleSource::Script(script.clone()),
        }
    }

    /// Unconsumed script values (`None` for the sampler).
    pub fn remaining(&self) -> Option<usize> {
        match self {
            NatureOracle::Seeded { .. } => None,
            NatureOracle::Scripted { script, pos } => Some(script.len() - pos),
        }
    }

    fn draw<T: Clone>(rng: &mut ChaCha8Rng, items: &[(T, Rational)]) -> T {
        let r = BigInt::from(rng.next_u64());
        let scale = BigInt::one() << 64;
        let mut cumulative = Rational::zero();
        for (item, p) in items {
            cumulative += p;
            // r / 2^64 < cumulative  <=>  r * den < num * 2^64
            if &r * cumulative.denom() < cumulative.numer() * &scale {
                return item.clone();
            }
        }
        items.last().expect("nonempty distribution").0.clone()
    }

    pub fn choose(
        &mut self,
        bat: &Bat,
        issued: &IssuedAction,
        dist: &[(GroundAction, Rational)],
    ) -> Result<GroundAction, Failure> {
        match self {
            NatureOracle::Seeded { rng, .. } => Ok(Self::draw(rng, dist)),
            NatureOracle::Scripted { script, pos } => {
                let schema = bat.schema(&issued.name).map_err(|e| Failure::Eval(e.to_string()))?;
                let needed = schema.params.len() - schema.agent_arity();
                if *pos + needed > script.len() {
                    return Err(Failure::ScriptUnderrun(issued.to_string()));
                }
                let mut args = issued.args.clone();
                args.extend(script[*pos..*pos + needed].iter().cloned());
                let action = GroundAction {
                    name: issued.name.clone(),
                    args,
                };
                if !dist.iter().any(|(a, _)| *a == action) {
                    return Err(Failure::ScriptMismatch(format!(
                        "{action} is not a possible outcome of {issued} in the actual world"
                    )));
                }
                *pos += needed;
                Ok(action)
            }
        }
    }

    pub fn choose_world(&mut self, belief: &BeliefState) -> Result<World, Failure> {
        match self {
            NatureOracle::Seeded { rng, .. } => Ok(Self::draw(rng, belief.entries())),
            NatureOracle::Scripted { .. } => {
                if belief.len() == 1 {
                    Ok(belief.entries()[0].0.clone())
                } else {
                    Err(Failure::ScriptMismatch(
                        "a scripted run needs a designated initial actual world or a certain initial belief".into(),
                    ))
                }
            }
        }
    }
}

impl fmt::Display for NatureOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatureOracle::Seeded { seed, .. } => write!(f, "seed {seed}"),
            NatureOracle::Scripted { script, .. } => write!(f, "script of {} values", script.len()),
        }
    }
}

/// Runs a program against a nature script.
pub fn replay(bat: &Bat, program: &Program, script: Vec<Value>, options: EngineOptions) -> Trace {
    let machine = Machine::new(bat, options);
    machine.run(program, &mut NatureOracle::scripted(script)).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::rational::ratio;
    use crate::syntax::parse_program;

    fn w(loc: i64) -> World {
        World::new(vec![Value::Int(loc)])
    }

    fn ints(v: &[i64]) -> Vec<Value> {
        v.iter().map(|&i| Value::Int(i)).collect()
    }

    #[test]
    fn sonar_step_keeps_certainty() {
        let bat = bundled::move_bat();
        let p = parse_program("sonar(); move(-1);", &bat, "t.prog").unwrap();
        let m = Machine::new(&bat, EngineOptions::default());
        let mut oracle = NatureOracle::scripted(ints(&[3, 0]));
        let c = m.initial(&p, &mut oracle).unwrap();
        let StepOutcome::Advanced(c, step) = m.step(c, &mut oracle) else { panic!() };
        assert_eq!(step.actual.to_string(), "sonar(3)");
        assert_eq!(step.observed.to_string(), "sonar(3)");
        assert_eq!(c.belief, BeliefState::certain(w(3)));
        let StepOutcome::Advanced(c, step) = m.step(c, &mut oracle) else { panic!() };
        assert_eq!(step.actual.to_string(), "move(-1, 0)");
        assert_eq!(c.actual, w(3));
        assert_eq!(
            c.belief,
            BeliefState::normalize(vec![(w(1), ratio(1, 5)), (w(2), ratio(3, 5)), (w(3), ratio(1, 5))]).unwrap()
        );
        assert!(matches!(m.step(c, &mut oracle), StepOutcome::Done(_)));
    }

    #[test]
    fn loop_guard_unrolls_when_not_known() {
        let bat = bundled::move_bat();
        let p = parse_program("while not know(Loc <= 2) { move(-1); }", &bat, "t.prog").unwrap();
        let m = Machine::new(&bat, EngineOptions::default());
        let c = m.initial(&p, &mut NatureOracle::seeded(0)).unwrap();
        let mut events = Vec::new();
        let Ok(Settled::Act { issued, .. }) = m.settle(&c.cont, &c.belief, &mut events) else { panic!() };
        assert_eq!(issued.to_string(), "move(-1)");
        assert!(matches!(events[0], GuardEvent::Evaluated { value: true, .. }));
    }

    #[test]
    fn script_mismatch_and_underrun() {
        let bat = bundled::move_bat();
        let p = parse_program("sonar(); move(-1);", &bat, "t.prog").unwrap();
        let t = replay(&bat, &p, ints(&[3, 7]), EngineOptions::default());
        assert!(matches!(&t.status, Status::Failed(r) if r.starts_with("script mismatch")), "{:?}", t.status);
        let t = replay(&bat, &p, ints(&[3]), EngineOptions::default());
        assert!(matches!(&t.status, Status::Failed(r) if r.starts_with("script underrun")));
        let t = replay(&bat, &p, ints(&[3, 0, 1]), EngineOptions::default());
        assert_eq!(t.status, Status::Completed);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn precondition_checked_in_actual_world() {
        let bat = bundled::move_bat();
        let p = parse_program("move(2);", &bat, "t.prog").unwrap();
        let t = replay(&bat, &p, ints(&[2]), EngineOptions::default());
        assert!(matches!(&t.status, Status::Failed(r) if r.starts_with("precondition violated")));
    }

    #[test]
    fn strict_guards_reject_bare_objective_guards() {
        let bat = bundled::move_bat();
        let p = parse_program("if Loc = 3 { sonar(); }", &bat, "t.prog").unwrap();
        let lenient = replay(&bat, &p, ints(&[3]), EngineOptions::default());
        assert_eq!(lenient.status, Status::Completed);
        assert_eq!(lenient.steps.len(), 1);
        let strict = EngineOptions {
            strict_guards: true,
            ..EngineOptions::default()
        };
        let t = replay(&bat, &p, ints(&[3]), strict);
        assert!(matches!(&t.status, Status::Failed(r) if r.starts_with("objective guard")));
    }

    #[test]
    fn strict_poss_requires_knowledge() {
        let text = "sort S = int[0..1]\nfluent F : S\naction a()\n  poss: F = 0\ninitial actual F = 0\ninitial belief weight 1/2 : F = 0\ninitial belief weight 1/2 : F = 1\n";
        let bat = crate::syntax::parse_bat(text, "t.bat").unwrap();
        let p = parse_program("a();", &bat, "t.prog").unwrap();
        let t = replay(&bat, &p, vec![], EngineOptions::default());
        assert_eq!(t.status, Status::Completed);
        let strict = EngineOptions {
            strict_poss: true,
            ..EngineOptions::default()
        };
        let t = replay(&bat, &p, vec![], strict);
        assert!(matches!(&t.status, Status::Failed(r) if r.starts_with("precondition not known")));
    }

    #[test]
    fn step_limit_counts_actions() {
        let bat = bundled::move_bat();
        let p = parse_program("while know(true) { sonar(); }", &bat, "t.prog").unwrap();
        let options = EngineOptions {
            max_steps: 4,
            ..EngineOptions::default()
        };
        let (t, _) = Machine::new(&bat, options).run(&p, &mut NatureOracle::seeded(1));
        assert_eq!(t.status, Status::StepLimit);
        assert_eq!(t.steps.len(), 4);
    }

    #[test]
    fn silent_loop_hits_the_bound() {
        let bat = bundled::move_bat();
        let p = parse_program("while know(true) { test know(true); }", &bat, "t.prog").unwrap();
        let (t, _) = Machine::new(&bat, EngineOptions::default()).run(&p, &mut NatureOracle::seeded(1));
        assert_eq!(t.status, Status::StepLimit);
    }

    #[test]
    fn nested_silent_loop_is_detected() {
        let bat = bundled::move_bat();
        let p = parse_program("while know(Loc = 3) { while know(Loc = 4) { sonar(); } }", &bat, "t.prog").unwrap();
        let m = Machine::new(&bat, EngineOptions::default());
        let cont = Continuation::new(&p);
        let belief = BeliefState::initial(&bat).unwrap();
        let mut events = Vec::new();
        assert!(matches!(m.settle(&cont, &belief, &mut events), Err(SettleError::Diverged)));
        // Two guard evaluations per pass, and the cycle closes on the second pass.
        assert_eq!(events.iter().filter(|e| matches!(e, GuardEvent::Evaluated { .. })).count(), 2);
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let bat = bundled::move_bat();
        let p = bundled::wall_program(&bat);
        let m = Machine::new(&bat, EngineOptions::default());
        let a = m.run(&p, &mut NatureOracle::seeded(42)).0;
        let b = m.run(&p, &mut NatureOracle::seeded(42)).0;
        assert_eq!(a, b);
    }
}
