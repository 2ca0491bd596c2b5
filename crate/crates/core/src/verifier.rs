//! Exhaustive analysis of a program over every choice nature can make.
//!
//! The execution tree is walked depth-first up to a bound on primitive
//! actions. Each leaf carries the exact probability of its branch, so the
//! completed, failed and still-running masses sum to exactly one. The same
//! walk backs the belief-consistency audit and the refinement checker.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::action::{Bat, GroundAction, IssuedAction};
use crate::belief::{BeliefModel, BeliefState};
use crate::engine::{Continuation, EngineOptions, GuardEvent, Machine, SettleError, Settled};
use crate::logic::{eval_epistemic, eval_objective, CmpOp, Env, Epistemic, EvalError, Formula, World};
use crate::program::Program;
use crate::rational::{format_decimal, format_ratio, Rational};
use crate::syntax::print_formula;

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// Steps below which sibling subtrees are explored in parallel.
const PARALLEL_DEPTH: usize = 3;

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    /// Bound on primitive actions along any branch.
    pub max_actions: usize,
    /// Configurations expanded before the result is flagged incomplete.
    pub node_budget: usize,
    /// Share results between identical configurations (same remaining
    /// program, belief, actual world and remaining bound). Changes only the
    /// node count.
    pub memo: bool,
    /// Worker threads; 1 explores sequentially.
    pub jobs: usize,
    pub engine: EngineOptions,
    /// Branches of each kind kept for the report.
    pub keep_branches: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            max_actions: 10,
            node_budget: DEFAULT_NODE_BUDGET,
            memo: false,
            jobs: 1,
            engine: EngineOptions::default(),
            keep_branches: 10,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("cannot start exploration: {0}")]
    Setup(String),
    #[error("cannot evaluate goal: {0}")]
    Goal(String),
}

/// A path through the execution tree with its probability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub actions: Vec<GroundAction>,
    pub probability: Rational,
    pub outcome: String,
}

impl Branch {
    fn here(outcome: impl Into<String>) -> Branch {
        Branch {
            actions: Vec::new(),
            probability: Rational::one(),
            outcome: outcome.into(),
        }
    }

    fn behind(&self, a: Option<&GroundAction>, p: &Rational) -> Branch {
        let mut actions = Vec::with_capacity(self.actions.len() + 1);
        actions.extend(a.cloned());
        actions.extend(self.actions.iter().cloned());
        Branch {
            actions,
            probability: p * &self.probability,
            outcome: self.outcome.clone(),
        }
    }

    pub fn path(&self) -> String {
        let parts: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        format!("⟨{}⟩", parts.join(", "))
    }

    fn to_json(&self) -> Json {
        json!({
            "actions": self.actions.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "probability": prob_json(&self.probability),
            "outcome": self.outcome,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalStats {
    pub formula: String,
    /// Mass of completed branches whose final belief satisfies the goal
    /// (objective goals are read as `Know(φ)`).
    pub believed: Rational,
    /// Mass of completed branches whose final actual world satisfies the
    /// goal; only for objective goals.
    pub actual: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationStats {
    pub max_actions: usize,
    pub completed: Rational,
    pub failed: Rational,
    pub running: Rational,
    /// Expected number of actions, conditional on completion.
    pub expected_actions: Option<Rational>,
    pub goals: Vec<GoalStats>,
    /// Number of distinct completed branches.
    pub completed_paths: u64,
    pub completed_branches: Vec<Branch>,
    pub failed_branches: Vec<Branch>,
    pub running_branches: Vec<Branch>,
    /// Configurations expanded.
    pub nodes: usize,
    /// False when the node budget ran out (unexplored mass counts as running).
    pub complete: bool,
}

fn prob_json(r: &Rational) -> Json {
    json!({ "exact": format_ratio(r), "decimal": format_decimal(r, 6) })
}

fn prob_text(r: &Rational) -> String {
    format!("{} ({})", format_ratio(r), format_decimal(r, 6))
}

impl ExplorationStats {
    pub fn to_json(&self) -> String {
        let goals: Vec<Json> = self
            .goals
            .iter()
            .map(|g| {
                json!({
                    "formula": g.formula,
                    "believed": prob_json(&g.believed),
                    "actual": g.actual.as_ref().map(prob_json),
                })
            })
            .collect();
        let v = json!({
            "max_actions": self.max_actions,
            "completed": prob_json(&self.completed),
            "failed": prob_json(&self.failed),
            "running": prob_json(&self.running),
            "expected_actions": self.expected_actions.as_ref().map(prob_json),
            "goals": goals,
            "completed_paths": self.completed_paths,
            "nodes": self.nodes,
            "complete": self.complete,
            "failed_branches": self.failed_branches.iter().map(Branch::to_json).collect::<Vec<_>>(),
            "running_branches": self.running_branches.iter().map(Branch::to_json).collect::<Vec<_>>(),
        });
        let mut s = serde_json::to_string_pretty(&v).expect("stats serialize");
        s.push('\n');
        s
    }
}

impl fmt::Display for ExplorationStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "max actions: {}", self.max_actions)?;
        writeln!(f, "P(completed): {}", prob_text(&self.completed))?;
        writeln!(f, "P(failed):    {}", prob_text(&self.failed))?;
        writeln!(f, "P(running):   {}", prob_text(&self.running))?;
        match &self.expected_actions {
            Some(e) => writeln!(f, "expected actions (completed): {}", prob_text(e))?,
            None => writeln!(f, "expected actions (completed): n/a")?,
        }
        for g in &self.goals {
            write!(f, "goal {}: believed {}", g.formula, prob_text(&g.believed))?;
            if let Some(a) = &g.actual {
                write!(f, ", actual {}", prob_text(a))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "completed branches: {}", self.completed_paths)?;
        writeln!(f, "nodes: {}{}", self.nodes, if self.complete { "" } else { " (budget exhausted, incomplete)" })?;
        for b in &self.failed_branches {
            writeln!(f, "failed: {} with probability {}: {}", b.path(), format_ratio(&b.probability), b.outcome)?;
        }
        Ok(())
    }
}

/// Objective conditions checked against the actual world during an audit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditChecks {
    /// Whenever the loop with this pre-order ordinal is left.
    pub loop_exit: Vec<(usize, Formula)>,
    /// Whenever the program completes.
    pub completion: Option<Formula>,
}

/// What leaving `while guard` tells the agent: for `not know(φ)` (or
/// `not bel(φ) >= 1`) the agent then knows φ, which must hold in reality.
fn exit_condition(guard: &Formula) -> Option<Formula> {
    match guard {
        Formula::Not(inner) => match &**inner {
            Formula::Know(body) => Some((**body).clone()),
            Formula::Bel(body, CmpOp::Eq | CmpOp::Ge, r) if r.is_one() => Some((**body).clone()),
            _ => None,
        },
        _ => None,
    }
}

impl AuditChecks {
    /// The checks implied by the program's own loop guards; the completion
    /// check is the exit condition of a final top-level loop.
    pub fn derived(program: &Program) -> AuditChecks {
        let mut checks = AuditChecks::default();
        for (i, l) in program.while_loops().into_iter().enumerate() {
            if let Program::While(c, _) = l {
                if let Some(f) = exit_condition(c) {
                    checks.loop_exit.push((i, f));
                }
            }
        }
        let last = match program {
            Program::Seq(items) => items.last(),
            other => Some(other),
        };
        if let Some(Program::While(c, _)) = last {
            checks.completion = exit_condition(c);
        }
        checks
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NotNormalized,
    ActualOutsideSupport,
    ObservationMismatch,
    KnownButFalse,
    LoopExit(usize),
    Completion,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NotNormalized => f.write_str("belief not normalized"),
            ViolationKind::ActualOutsideSupport => f.write_str("actual world outside belief support"),
            ViolationKind::ObservationMismatch => f.write_str("observation inconsistent with executed action"),
            ViolationKind::KnownButFalse => f.write_str("known guard condition false in actual world"),
            ViolationKind::LoopExit(i) => write!(f, "exit condition of loop {i} false in actual world"),
            ViolationKind::Completion => f.write_str("completion condition false in actual world"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub branch: Vec<GroundAction>,
    pub detail: String,
}

impl Violation {
    fn behind(&self, a: Option<&GroundAction>) -> Violation {
        let mut branch: Vec<GroundAction> = a.cloned().into_iter().collect();
        branch.extend(self.branch.iter().cloned());
        Violation {
            kind: self.kind.clone(),
            branch,
            detail: self.detail.clone(),
        }
    }

    pub fn path(&self) -> String {
        let parts: Vec<String> = self.branch.iter().map(|a| a.to_string()).collect();
        format!("⟨{}⟩", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub max_actions: usize,
    pub nodes: usize,
    pub complete: bool,
    pub checks: AuditChecks,
    /// Total number of violations found (counting each branch).
    pub violation_count: u64,
    /// The first violations in canonical branch order.
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    pub fn to_json(&self) -> String {
        let v = json!({
            "max_actions": self.max_actions,
            "passed": self.passed(),
            "nodes": self.nodes,
            "complete": self.complete,
            "loop_exit_checks": self.checks.loop_exit.iter()
                .map(|(i, f)| json!({"loop": i, "condition": print_formula(f)}))
                .collect::<Vec<_>>(),
            "completion_check": self.checks.completion.as_ref().map(print_formula),
            "violation_count": self.violation_count,
            "violations": self.violations.iter().map(|v| json!({
                "kind": v.kind.to_string(),
                "branch": v.branch.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "detail": v.detail,
            })).collect::<Vec<_>>(),
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "audit to {} actions: {} ({} nodes{})",
            self.max_actions,
            if self.passed() { "passed" } else { "FAILED" },
            self.nodes,
            if self.complete { "" } else { ", budget exhausted" }
        )?;
        for (i, c) in &self.checks.loop_exit {
            writeln!(f, "  loop {i} exit: {}", print_formula(c))?;
        }
        if let Some(c) = &self.checks.completion {
            writeln!(f, "  completion: {}", print_formula(c))?;
        }
        if let Some(v) = self.violations.first() {
            writeln!(f, "{} violation(s); first: {} on {}: {}", self.violation_count, v.kind, v.path(), v.detail)?;
        }
        Ok(())
    }
}

/// An expanded outcome: the action nature chose, its probability and the subtree.
type Child<B> = (GroundAction, Rational, Result<Arc<Sub<B>>, String>);

/// Result of a subtree, relative to reaching its root.
#[derive(Clone, Debug)]
struct Sub<B> {
    completed: Rational,
    failed: Rational,
    running: Rational,
    /// Σ over completed leaves of probability × actions from the root.
    action_sum: Rational,
    goals_believed: Vec<Rational>,
    goals_actual: Vec<Rational>,
    completed_paths: u64,
    leaves: BTreeMap<(B, World), Rational>,
    completed_branches: Vec<Branch>,
    failed_branches: Vec<Branch>,
    running_branches: Vec<Branch>,
    violations: Vec<Violation>,
    violation_count: u64,
}

impl<B: BeliefModel> Sub<B> {
    fn new(goals: usize) -> Sub<B> {
        Sub {
            completed: Rational::zero(),
            failed: Rational::zero(),
            running: Rational::zero(),
            action_sum: Rational::zero(),
            goals_believed: vec![Rational::zero(); goals],
            goals_actual: vec![Rational::zero(); goals],
            completed_paths: 0,
            leaves: BTreeMap::new(),
            completed_branches: Vec::new(),
            failed_branches: Vec::new(),
            running_branches: Vec::new(),
            violations: Vec::new(),
            violation_count: 0,
        }
    }

    fn fail(&mut self, a: Option<&GroundAction>, p: &Rational, reason: String, keep: usize) {
        self.failed += p;
        if self.failed_branches.len() < keep {
            self.failed_branches.push(Branch::here(reason).behind(a, p));
        }
    }

    fn violate(&mut self, v: Violation, keep: usize) {
        self.violation_count += 1;
        if self.violations.len() < keep {
            self.violations.push(v);
        }
    }

    /// Adds a child reached through `a` with conditional probability `p`.
    fn absorb(&mut self, child: &Sub<B>, a: Option<&GroundAction>, p: &Rational, keep: usize) {
        self.completed += p * &child.completed;
        self.failed += p * &child.failed;
        self.running += p * &child.running;
        let steps = if a.is_some() { &child.action_sum + &child.completed } else { child.action_sum.clone() };
        self.action_sum += p * steps;
        for (acc, c) in self.goals_believed.iter_mut().zip(&child.goals_believed) {
            *acc += p * c;
        }
        for (acc, c) in self.goals_actual.iter_mut().zip(&child.goals_actual) {
            *acc += p * c;
        }
        self.completed_paths += child.completed_paths;
        for (k, q) in &child.leaves {
            *self.leaves.entry(k.clone()).or_insert_with(Rational::zero) += p * q;
        }
        for (mine, theirs) in [
            (&mut self.completed_branches, &child.completed_branches),
            (&mut self.failed_branches, &child.failed_branches),
            (&mut self.running_branches, &child.running_branches),
        ] {
            for b in theirs.iter().take(keep.saturating_sub(mine.len())) {
                mine.push(b.behind(a, p));
            }
        }
        self.violation_count += child.violation_count;
        for v in child.violations.iter().take(keep.saturating_sub(self.violations.len())) {
            self.violations.push(v.behind(a));
        }
    }
}

type MemoKey<'p, B> = (Continuation<'p>, B, World, usize);

struct Walker<'a, 'p, B> {
    machine: Machine<'a>,
    root: &'p Program,
    max_actions: usize,
    goals: &'a [Formula],
    audit: Option<&'a AuditChecks>,
    collect_leaves: bool,
    keep: usize,
    parallel: bool,
    memo: Option<HashMap<MemoKey<'p, B>, Arc<Sub<B>>>>,
    budget: usize,
    nodes: &'a AtomicUsize,
    incomplete: &'a AtomicBool,
    error: &'a Mutex<Option<String>>,
}

impl<'a, 'p, B: BeliefModel> Walker<'a, 'p, B> {
    fn fork(&self) -> Walker<'a, 'p, B> {
        Walker {
            machine: self.machine.clone(),
            root: self.root,
            max_actions: self.max_actions,
            goals: self.goals,
            audit: self.audit,
            collect_leaves: self.collect_leaves,
            keep: self.keep,
            parallel: self.parallel,
            memo: self.memo.as_ref().map(|_| HashMap::new()),
            budget: self.budget,
            nodes: self.nodes,
            incomplete: self.incomplete,
            error: self.error,
        }
    }

    fn record_error(&self, e: String) {
        let mut slot = self.error.lock().expect("error slot");
        if slot.is_none() {
            *slot = Some(e);
        }
    }

    fn node(&mut self, cont: Continuation<'p>, belief: B, actual: World, steps: usize) -> Arc<Sub<B>> {
        let key = self
            .memo
            .as_ref()
            .map(|_| (cont.clone(), belief.clone(), actual.clone(), self.max_actions - steps));
        if let (Some(memo), Some(k)) = (&self.memo, &key) {
            if let Some(hit) = memo.get(k) {
                return hit.clone();
            }
        }
        let sub = Arc::new(self.expand(cont, belief, actual, steps));
        if let (Some(memo), Some(k)) = (&mut self.memo, key) {
            memo.insert(k, sub.clone());
        }
        sub
    }

    fn expand(&mut self, cont: Continuation<'p>, belief: B, actual: World, steps: usize) -> Sub<B> {
        let mut sub = Sub::new(self.goals.len());
        let one = Rational::one();
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.budget {
            self.incomplete.store(true, Ordering::Relaxed);
            sub.running = one;
            sub.running_branches.push(Branch::here("node budget exhausted"));
            return sub;
        }
        if self.audit.is_some() {
            self.check_state(&belief, &actual, &mut sub);
        }
        let mut events = Vec::new();
        let settled = self.machine.settle(&cont, &belief, &mut events);
        if let Some(checks) = self.audit {
            self.check_events(checks, &events, &belief, &actual, &mut sub);
        }
        match settled {
            Err(SettleError::Diverged) => {
                sub.running = one;
                sub.running_branches.push(Branch::here("no primitive action within the transition limit"));
            }
            Err(SettleError::Failure(f)) => sub.fail(None, &one, f.to_string(), self.keep),
            Ok(Settled::Done) => self.complete(&belief, &actual, &mut sub),
            Ok(Settled::Act { issued, rest }) => {
                if steps >= self.max_actions {
                    sub.running = one;
                    sub.running_branches.push(Branch::here(format!("action bound reached before {issued}")));
                    return sub;
                }
                let dist = match self.machine.outcome_distribution(&belief, &actual, &issued) {
                    Ok(d) => d,
                    Err(f) => {
                        sub.fail(None, &one, f.to_string(), self.keep);
                        return sub;
                    }
                };
                let children: Vec<Child<B>> =
                    if self.parallel && steps < PARALLEL_DEPTH && dist.len() > 1 {
                        dist.into_par_iter()
                            .map(|(a, p)| {
                                let mut w = self.fork();
                                let r = w.child(&issued, &a, &rest, &belief, &actual, steps);
                                (a, p, r)
                            })
                            .collect()
                    } else {
                        dist.into_iter()
                            .map(|(a, p)| {
                                let r = self.child(&issued, &a, &rest, &belief, &actual, steps);
                                (a, p, r)
                            })
                            .collect()
                    };
                for (a, p, r) in children {
                    match r {
                        Ok(child) => sub.absorb(&child, Some(&a), &p, self.keep),
                        Err(reason) => sub.fail(Some(&a), &p, reason, self.keep),
                    }
                }
            }
        }
        sub
    }

    fn child(
        &mut self,
        issued: &IssuedAction,
        a: &GroundAction,
        rest: &Continuation<'p>,
        belief: &B,
        actual: &World,
        steps: usize,
    ) -> Result<Arc<Sub<B>>, String> {
        let (b2, w2) = self.machine.apply(belief, actual, a).map_err(|f| f.to_string())?;
        let mismatch = self.audit.and_then(|_| self.observation_mismatch(issued, a));
        let child = self.node(rest.clone(), b2, w2, steps + 1);
        match mismatch {
            None => Ok(child),
            Some(detail) => {
                let mut wrapped = Sub::new(self.goals.len());
                wrapped.absorb(&child, None, &Rational::one(), self.keep);
                wrapped.violation_count += 1;
                wrapped.violations.insert(
                    0,
                    Violation {
                        kind: ViolationKind::ObservationMismatch,
                        branch: Vec::new(),
                        detail,
                    },
                );
                wrapped.violations.truncate(self.keep);
                Ok(Arc::new(wrapped))
            }
        }
    }

    fn observation_mismatch(&self, issued: &IssuedAction, a: &GroundAction) -> Option<String> {
        let bat = self.machine.bat;
        let obs = match bat.observation_of(a) {
            Ok(o) => o,
            Err(e) => return Some(e.to_string()),
        };
        match bat.candidates(&obs) {
            Ok(c) if c.contains(a) => {}
            Ok(_) => return Some(format!("{a} is not among the candidates of {obs}")),
            Err(e) => return Some(e.to_string()),
        }
        match bat.issued_of(a) {
            Ok(i) if i == *issued => None,
            Ok(i) => Some(format!("{a} was issued as {issued} but erases to {i}")),
            Err(e) => Some(e.to_string()),
        }
    }

    fn complete(&self, belief: &B, actual: &World, sub: &mut Sub<B>) {
        sub.completed = Rational::one();
        sub.completed_paths = 1;
        sub.completed_branches.push(Branch::here("completed"));
        for (i, g) in self.goals.iter().enumerate() {
            let mut env = Env::new();
            let (believed, real) = if g.is_objective() {
                let b = belief.believes(g, &mut env, CmpOp::Eq, &Rational::one());
                (b, eval_objective(g, actual, &mut env))
            } else {
                (eval_epistemic(g, belief, &mut env), Ok(false))
            };
            match (believed, real) {
                (Ok(b), Ok(r)) => {
                    if b {
                        sub.goals_believed[i] = Rational::one();
                    }
                    if r {
                        sub.goals_actual[i] = Rational::one();
                    }
                }
                (Err(e), _) | (_, Err(e)) => self.record_error(format!("{}: {e}", print_formula(g))),
            }
        }
        if self.collect_leaves {
            sub.leaves.insert((belief.clone(), actual.clone()), Rational::one());
        }
        if let Some(Some(c)) = self.audit.map(|a| &a.completion) {
            if let Some(detail) = self.falsified(c, actual) {
                sub.violate(
                    Violation {
                        kind: ViolationKind::Completion,
                        branch: Vec::new(),
                        detail,
                    },
                    self.keep,
                );
            }
        }
    }

    /// `Some(description)` when the objective condition is false in `actual`.
    fn falsified(&self, c: &Formula, actual: &World) -> Option<String> {
        match eval_objective(c, actual, &mut Env::new()) {
            Ok(true) => None,
            Ok(false) => Some(format!(
                "{} is false in {}",
                print_formula(c),
                self.machine.bat.show_world(actual)
            )),
            Err(e) => Some(format!("cannot evaluate {}: {e}", print_formula(c))),
        }
    }

    fn check_state(&self, belief: &B, actual: &World, sub: &mut Sub<B>) {
        if !belief.is_normalized() {
            sub.violate(
                Violation {
                    kind: ViolationKind::NotNormalized,
                    branch: Vec::new(),
                    detail: format!("{belief:?}"),
                },
                self.keep,
            );
        }
        if !belief.contains(actual) {
            sub.violate(
                Violation {
                    kind: ViolationKind::ActualOutsideSupport,
                    branch: Vec::new(),
                    detail: self.machine.bat.show_world(actual),
                },
                self.keep,
            );
        }
    }

    fn check_events(&self, checks: &AuditChecks, events: &[GuardEvent<'p>], belief: &B, actual: &World, sub: &mut Sub<B>) {
        for e in events {
            match e {
                GuardEvent::Evaluated { guard, .. } => {
                    let wrapped;
                    let g = if guard.is_objective() && guard.mentions_fluents() {
                        wrapped = Formula::know((*guard).clone());
                        &wrapped
                    } else {
                        *guard
                    };
                    let mut found = Vec::new();
                    if let Err(err) = known_but_false(g, belief, actual, &mut Env::new(), &mut found) {
                        found.push(format!("cannot check {}: {err}", print_formula(g)));
                    }
                    for detail in found {
                        sub.violate(
                            Violation {
                                kind: ViolationKind::KnownButFalse,
                                branch: Vec::new(),
                                detail,
                            },
                            self.keep,
                        );
                    }
                }
                GuardEvent::LoopExit(node) => {
                    let Some(ordinal) = self.root.loop_ordinal(node) else { continue };
                    for (i, c) in &checks.loop_exit {
                        if *i != ordinal {
                            continue;
                        }
                        if let Some(detail) = self.falsified(c, actual) {
                            sub.violate(
                                Violation {
                                    kind: ViolationKind::LoopExit(ordinal),
                                    branch: Vec::new(),
                                    detail,
                                },
                                self.keep,
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Collects every knowledge atom of `f` (under the current bindings) that
/// the belief holds with certainty although its body is false in `actual`.
fn known_but_false<B: Epistemic>(
    f: &Formula,
    belief: &B,
    actual: &World,
    env: &mut Env,
    out: &mut Vec<String>,
) -> Result<(), EvalError> {
    match f {
        Formula::Know(body) => certain_but_false(body, belief, actual, env, out),
        Formula::Bel(body, CmpOp::Eq | CmpOp::Ge, r) if r.is_one() => certain_but_false(body, belief, actual, env, out),
        Formula::Not(g) => known_but_false(g, belief, actual, env, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            known_but_false(a, belief, actual, env, out)?;
            known_but_false(b, belief, actual, env, out)
        }
        Formula::Exists(v, s, body) | Formula::Forall(v, s, body) => {
            for value in s.values() {
                env.push(v.clone(), value);
                let r = known_but_false(body, belief, actual, env, out);
                env.pop();
                r?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn certain_but_false<B: Epistemic>(
    body: &Formula,
    belief: &B,
    actual: &World,
    env: &mut Env,
    out: &mut Vec<String>,
) -> Result<(), EvalError> {
    if belief.believes(body, env, CmpOp::Eq, &Rational::one())? && !eval_objective(body, actual, env)? {
        out.push(format!("{} is known but false", print_formula(body)));
    }
    Ok(())
}

/// A finished walk over every root.
pub struct Exploration<B> {
    pub stats: ExplorationStats,
    /// Completed leaves: final belief and actual world with their mass.
    pub leaves: Vec<(B, World, Rational)>,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
}

struct WalkPlan<'a> {
    goals: &'a [Formula],
    audit: Option<&'a AuditChecks>,
    collect_leaves: bool,
}

fn walk<B: BeliefModel>(
    bat: &Bat,
    program: &Program,
    roots: Vec<(B, World, Rational)>,
    options: &ExploreOptions,
    plan: WalkPlan<'_>,
) -> Result<Exploration<B>, VerifyError> {
    let nodes = AtomicUsize::new(0);
    let incomplete = AtomicBool::new(false);
    let error = Mutex::new(None);
    let run = || {
        let mut w = Walker {
            machine: Machine::new(bat, options.engine.clone()),
            root: program,
            max_actions: options.max_actions,
            goals: plan.goals,
            audit: plan.audit,
            collect_leaves: plan.collect_leaves,
            keep: options.keep_branches,
            parallel: options.jobs > 1,
            memo: options.memo.then(HashMap::new),
            budget: options.node_budget,
            nodes: &nodes,
            incomplete: &incomplete,
            error: &error,
        };
        let mut total = Sub::new(plan.goals.len());
        for (belief, actual, p) in roots {
            let sub = w.node(Continuation::new(program), belief, actual, 0);
            total.absorb(&sub, None, &p, options.keep_branches);
        }
        total
    };
    let total = if options.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| VerifyError::Setup(e.to_string()))?
            .install(run)
    } else {
        run()
    };
    if let Some(e) = error.into_inner().expect("error slot") {
        return Err(VerifyError::Goal(e));
    }
    let expected_actions = (!total.completed.is_zero()).then(|| &total.action_sum / &total.completed);
    let goals = plan
        .goals
        .iter()
        .zip(total.goals_believed)
        .zip(total.goals_actual)
        .map(|((g, believed), actual)| GoalStats {
            formula: print_formula(g),
            believed,
            actual: g.is_objective().then_some(actual),
        })
        .collect();
    Ok(Exploration {
        stats: ExplorationStats {
            max_actions: options.max_actions,
            completed: total.completed,
            failed: total.failed,
            running: total.running,
            expected_actions,
            goals,
            completed_paths: total.completed_paths,
            completed_branches: total.completed_branches,
            failed_branches: total.failed_branches,
            running_branches: total.running_branches,
            nodes: nodes.into_inner(),
            complete: !incomplete.into_inner(),
        },
        leaves: total.leaves.into_iter().map(|((b, w), p)| (b, w, p)).collect(),
        violation_count: total.violation_count,
        violations: total.violations,
    })
}

/// Initial configurations: the designated actual world, or every world of
/// the initial belief weighted by its degree of belief.
fn roots<B: BeliefModel>(bat: &Bat) -> Result<Vec<(B, World, Rational)>, VerifyError> {
    let setup = |e: String| VerifyError::Setup(e);
    let full = BeliefState::initial(bat).map_err(|e| setup(e.to_string()))?;
    let belief = B::initial(bat).map_err(|e| setup(e.to_string()))?;
    match bat.initial_actual_world().map_err(|e| setup(e.to_string()))? {
        Some(w) => Ok(vec![(belief, w, Rational::one())]),
        None => Ok(full
            .entries()
            .iter()
            .map(|(w, p)| (belief.clone(), w.clone(), p.clone()))
            .collect()),
    }
}

fn check_goals(goals: &[Formula]) -> Result<(), VerifyError> {
    for g in goals {
        if !(g.is_objective() || g.is_subjective()) {
            return Err(VerifyError::Goal(format!(
                "{} mixes objective conditions with belief operators",
                print_formula(g)
            )));
        }
    }
    Ok(())
}

/// Explores every branch of `program` up to `options.max_actions` actions.
pub fn explore(
    bat: &Bat,
    program: &Program,
    goals: &[Formula],
    options: &ExploreOptions,
) -> Result<ExplorationStats, VerifyError> {
    check_goals(goals)?;
    let plan = WalkPlan {
        goals,
        audit: None,
        collect_leaves: false,
    };
    Ok(walk::<BeliefState>(bat, program, roots(bat)?, options, plan)?.stats)
}

/// Explores from a given belief and actual world, collecting the completed
/// leaves. With [`crate::belief::SupportBelief`] only knowledge-level goals
/// can be evaluated.
pub fn explore_from<B: BeliefModel>(
    bat: &Bat,
    program: &Program,
    belief: B,
    actual: World,
    goals: &[Formula],
    options: &ExploreOptions,
) -> Result<Exploration<B>, VerifyError> {
    check_goals(goals)?;
    let plan = WalkPlan {
        goals,
        audit: None,
        collect_leaves: true,
    };
    walk(bat, program, vec![(belief, actual, Rational::one())], options, plan)
}

/// Walks every branch up to `options.max_actions` actions checking, at each
/// configuration: the belief is normalized, the actual world lies in its
/// support, observations agree with the executed actions, every knowledge
/// atom the agent holds while evaluating a guard is true, and the given
/// loop-exit and completion conditions hold in the actual world.
pub fn audit(
    bat: &Bat,
    program: &Program,
    checks: &AuditChecks,
    options: &ExploreOptions,
) -> Result<AuditReport, VerifyError> {
    let plan = WalkPlan {
        goals: &[],
        audit: Some(checks),
        collect_leaves: false,
    };
    let ex = walk::<BeliefState>(bat, program, roots(bat)?, options, plan)?;
    Ok(AuditReport {
        max_actions: options.max_actions,
        nodes: ex.stats.nodes,
        complete: ex.stats.complete,
        checks: checks.clone(),
        violation_count: ex.violation_count,
        violations: ex.violations,
    })
}

/// Probability that executing `program` produces exactly the action
/// sequence `actions` (as a prefix of the run), from the designated initial
/// actual world. `None` if some action is not a possible outcome.
pub fn path_probability(
    bat: &Bat,
    program: &Program,
    actions: &[GroundAction],
    engine: EngineOptions,
) -> Result<Option<Rational>, VerifyError> {
    let machine = Machine::new(bat, engine);
    let setup = |e: String| VerifyError::Setup(e);
    let mut belief = BeliefState::initial(bat).map_err(|e| setup(e.to_string()))?;
    let mut actual = bat
        .initial_actual_world()
        .map_err(|e| setup(e.to_string()))?
        .ok_or_else(|| setup("no designated initial actual world".into()))?;
    let mut cont = Continuation::new(program);
    let mut p = Rational::one();
    for a in actions {
        let (issued, rest) = match machine.settle(&cont, &belief, &mut Vec::new()) {
            Ok(Settled::Act { issued, rest }) => (issued, rest),
            _ => return Ok(None),
        };
        let dist = match machine.outcome_distribution(&belief, &actual, &issued) {
            Ok(d) => d,
            Err(_) => return Ok(None),
        };
        let Some((_, q)) = dist.iter().find(|(b, _)| b == a) else { return Ok(None) };
        p *= q;
        match machine.apply(&belief, &actual, a) {
            Ok((b, w)) => {
                belief = b;
                actual = w;
            }
            Err(_) => return Ok(None),
        }
        cont = rest;
    }
    Ok(Some(p))
}
