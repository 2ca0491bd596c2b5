//! Refinement mappings from a high-level action theory onto a low-level one,
//! translation of high-level formulas and programs, and the bounded
//! refinement checker.
//!
//! A mapping gives, for every high-level fluent `F`, a template `m(F = v)`
//! (an objective low-level formula per value) and, for every high-level
//! action, a low-level program over the action's parameters.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::action::{cartesian, Bat, GroundAction};
use crate::belief::{BeliefModel, SupportBelief};
use crate::logic::{eval_objective, CmpOp, Env, Epistemic, Formula, Symbol, Term, Value, World};
use crate::program::{issue, Program};
use crate::rational::{format_decimal, format_ratio, Rational};
use crate::syntax::print_formula;
use crate::verifier::{explore_from, ExploreOptions, VerifyError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FluentTemplate {
    /// One low-level formula per value of the fluent's sort.
    Case(Vec<(Value, Formula)>),
    /// A formula with the template variable free.
    Open(Formula),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluentMapping {
    pub fluent: Symbol,
    pub var: Symbol,
    pub template: FluentTemplate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionMapping {
    pub action: Symbol,
    pub params: Vec<Symbol>,
    pub body: Program,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefinementMapping {
    pub fluents: Vec<FluentMapping>,
    pub actions: Vec<ActionMapping>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("no mapping for high-level fluent {0}")]
    UnmappedFluent(String),
    #[error("no mapping for high-level action {0}")]
    UnmappedAction(String),
    #[error("mapping for {name} takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("no case for value {value} of {fluent}")]
    MissingCase { fluent: String, value: Value },
    #[error("cannot evaluate arguments of {0}")]
    Arguments(String),
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl RefinementMapping {
    fn fluent(&self, name: &str) -> Result<&FluentMapping, AbstractionError> {
        self.fluents
            .iter()
            .find(|f| &*f.fluent == name)
            .ok_or_else(|| AbstractionError::UnmappedFluent(name.to_string()))
    }

    /// The low-level formula `m(F = v)`.
    pub fn atom(&self, fluent: &str, value: &Value) -> Result<Formula, AbstractionError> {
        let m = self.fluent(fluent)?;
        match &m.template {
            FluentTemplate::Case(arms) => arms
                .iter()
                .find(|(v, _)| v == value)
                .map(|(_, f)| f.clone())
                .ok_or_else(|| AbstractionError::MissingCase {
                    fluent: fluent.to_string(),
                    value: value.clone(),
                }),
            FluentTemplate::Open(f) => Ok(f.substitute(&m.var, value)),
        }
    }

    /// Maps a high-level formula: every atom mentioning high-level fluents
    /// `F1..Fk` becomes `⋁ (m(F1 = v1) ∧ … ∧ m(Fk = vk) ∧ atom[Fi := vi])`
    /// over all value combinations; connectives, quantifiers and belief
    /// operators are kept.
    pub fn map_formula(&self, hl: &Bat, f: &Formula) -> Result<Formula, AbstractionError> {
        Ok(self.map_rec(hl, f)?.simplify())
    }

    fn map_rec(&self, hl: &Bat, f: &Formula) -> Result<Formula, AbstractionError> {
        Ok(match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Cmp(op, a, b) => self.map_atom(hl, *op, a, b)?,
            Formula::Not(g) => Formula::not(self.map_rec(hl, g)?),
            Formula::And(a, b) => Formula::and(self.map_rec(hl, a)?, self.map_rec(hl, b)?),
            Formula::Or(a, b) => Formula::or(self.map_rec(hl, a)?, self.map_rec(hl, b)?),
            Formula::Exists(v, s, g) => Formula::Exists(v.clone(), s.clone(), Box::new(self.map_rec(hl, g)?)),
            Formula::Forall(v, s, g) => Formula::Forall(v.clone(), s.clone(), Box::new(self.map_rec(hl, g)?)),
            Formula::Know(g) => Formula::know(self.map_rec(hl, g)?),
            Formula::Bel(g, op, r) => Formula::Bel(Box::new(self.map_rec(hl, g)?), *op, r.clone()),
        })
    }

    fn map_atom(&self, hl: &Bat, op: CmpOp, a: &Term, b: &Term) -> Result<Formula, AbstractionError> {
        let mut refs = Vec::new();
        a.fluents(&mut refs);
        b.fluents(&mut refs);
        let mut names: Vec<Symbol> = Vec::new();
        for r in refs {
            if !names.contains(&r.name) {
                names.push(r.name.clone());
            }
        }
        if names.is_empty() {
            return Ok(Formula::Cmp(op, a.clone(), b.clone()));
        }
        let mut domains = Vec::with_capacity(names.len());
        for n in &names {
            let decl = hl
                .fluents
                .iter()
                .find(|d| d.name == *n)
                .ok_or_else(|| AbstractionError::UnmappedFluent(n.to_string()))?;
            domains.push(decl.sort.values().collect::<Vec<_>>());
        }
        let mut out = Formula::False;
        for combo in cartesian(&domains) {
            let (mut x, mut y) = (a.clone(), b.clone());
            let mut conj = Formula::True;
            for (n, v) in names.iter().zip(&combo) {
                x = replace_fluent(&x, n, v);
                y = replace_fluent(&y, n, v);
                conj = Formula::and(conj, self.atom(n, v)?);
            }
            let disjunct = Formula::and(conj, Formula::Cmp(op, x, y)).simplify();
            out = Formula::or(out, disjunct).simplify();
        }
        Ok(out)
    }

    /// The low-level program of a ground high-level action.
    pub fn map_action(&self, name: &str, args: &[Value]) -> Result<Program, AbstractionError> {
        let m = self
            .actions
            .iter()
            .find(|a| &*a.action == name)
            .ok_or_else(|| AbstractionError::UnmappedAction(name.to_string()))?;
        if m.params.len() != args.len() {
            return Err(AbstractionError::Arity {
                name: name.to_string(),
                expected: m.params.len(),
                got: args.len(),
            });
        }
        let mut body = m.body.clone();
        for (p, v) in m.params.iter().zip(args) {
            body = body.substitute(p, v);
        }
        Ok(body.partial_eval())
    }

    /// Translates a high-level program: guards and tests through
    /// [`Self::map_formula`], each action to its mapped program (as a block).
    pub fn translate(&self, hl: &Bat, p: &Program) -> Result<Program, AbstractionError> {
        Ok(match p {
            Program::Nil => Program::Nil,
            Program::Act { name, args } => {
                let issued = issue(name, args).map_err(|_| AbstractionError::Arguments(name.to_string()))?;
                match self.map_action(name, &issued.args)? {
                    Program::Seq(items) => Program::Seq(items),
                    other => Program::Seq(vec![other]),
                }
            }
            Program::Test(f) => Program::Test(self.map_formula(hl, f)?),
            Program::Seq(items) => Program::Seq(items.iter().map(|q| self.translate(hl, q)).collect::<Result<_, _>>()?),
            Program::If(c, t, e) => Program::If(
                self.map_formula(hl, c)?,
                Box::new(self.translate(hl, t)?),
                Box::new(self.translate(hl, e)?),
            ),
            Program::While(c, body) => Program::While(self.map_formula(hl, c)?, Box::new(self.translate(hl, body)?)),
        })
    }
}

fn replace_fluent(t: &Term, name: &str, v: &Value) -> Term {
    match t {
        Term::Fluent(f) if &*f.name == name => Term::Const(v.clone()),
        Term::Const(_) | Term::Var(_) | Term::Fluent(_) => t.clone(),
        Term::Neg(a) => Term::Neg(Box::new(replace_fluent(a, name, v))),
        Term::Abs(a) => Term::Abs(Box::new(replace_fluent(a, name, v))),
        Term::Add(a, b) => Term::Add(Box::new(replace_fluent(a, name, v)), Box::new(replace_fluent(b, name, v))),
        Term::Sub(a, b) => Term::Sub(Box::new(replace_fluent(a, name, v)), Box::new(replace_fluent(b, name, v))),
    }
}

#[derive(Clone, Debug)]
pub struct RefinementOptions {
    /// Low-level actions allowed per high-level action.
    pub depth: usize,
    /// Length of the high-level action sequences checked.
    pub hl_horizon: usize,
    /// Tolerated probability of not terminating within `depth`.
    pub epsilon: Rational,
    /// Exploration settings for the low-level programs (the action bound is
    /// replaced by `depth`).
    pub explore: ExploreOptions,
}

impl Default for RefinementOptions {
    fn default() -> Self {
        RefinementOptions {
            depth: 30,
            hl_horizon: 2,
            epsilon: Rational::new(1.into(), 100.into()),
            explore: ExploreOptions {
                memo: true,
                ..ExploreOptions::default()
            },
        }
    }
}

/// A high-level fluent atom with its truth value and low-level image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomCheck {
    pub atom: String,
    /// Truth value known at the high level.
    pub holds: bool,
    pub mapped: String,
    /// Whether the low-level belief knows the image (or its negation).
    pub known: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepCheck {
    /// High-level actions executed before this one.
    pub prefix: Vec<GroundAction>,
    pub action: GroundAction,
    /// Distinct low-level configurations the mapped program was run from.
    pub start_states: usize,
    /// Smallest termination probability over the start states.
    pub min_termination: Rational,
    /// Termination probability weighted by how likely each start state is.
    pub termination: Rational,
    /// Every terminating branch knows the successor atoms.
    pub knowledge_ok: bool,
    /// Weighted mass of terminating branches whose actual world agrees with
    /// the successor atoms, relative to the terminating mass.
    pub actual_agreement: Rational,
    pub passed: bool,
    pub counterexample: Option<String>,
}

impl StepCheck {
    pub fn label(&self) -> String {
        let mut parts: Vec<String> = self.prefix.iter().map(|a| a.to_string()).collect();
        parts.push(self.action.to_string());
        parts.join(" · ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementReport {
    pub depth: usize,
    pub hl_horizon: usize,
    pub epsilon: Rational,
    pub initial: Vec<AtomCheck>,
    pub steps: Vec<StepCheck>,
    pub nodes: usize,
    pub complete: bool,
}

impl RefinementReport {
    pub fn initial_ok(&self) -> bool {
        self.initial.iter().all(|a| a.known)
    }

    pub fn steps_ok(&self) -> bool {
        self.steps.iter().all(|s| s.passed)
    }

    pub fn passed(&self) -> bool {
        self.initial_ok() && self.steps_ok()
    }

    pub fn to_json(&self) -> String {
        let p = |r: &Rational| json!({ "exact": format_ratio(r), "decimal": format_decimal(r, 6) });
        let v: Json = json!({
            "passed": self.passed(),
            "depth": self.depth,
            "hl_horizon": self.hl_horizon,
            "epsilon": format_ratio(&self.epsilon),
            "initial": {
                "passed": self.initial_ok(),
                "atoms": self.initial.iter().map(|a| json!({
                    "atom": a.atom,
                    "holds": a.holds,
                    "mapped": a.mapped,
                    "known": a.known,
                })).collect::<Vec<_>>(),
            },
            "steps": self.steps.iter().map(|s| json!({
                "prefix": s.prefix.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "action": s.action.to_string(),
                "start_states": s.start_states,
                "min_termination": p(&s.min_termination),
                "termination": p(&s.termination),
                "knowledge_ok": s.knowledge_ok,
                "actual_agreement": p(&s.actual_agreement),
                "passed": s.passed,
                "counterexample": s.counterexample,
            })).collect::<Vec<_>>(),
            "nodes": self.nodes,
            "complete": self.complete,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for RefinementReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "refinement check (depth {}, horizon {}, epsilon {}): {}",
            self.depth,
            self.hl_horizon,
            format_ratio(&self.epsilon),
            if self.passed() { "passed" } else { "FAILED" }
        )?;
        writeln!(f, "initial correspondence: {}", if self.initial_ok() { "ok" } else { "FAILED" })?;
        for a in &self.initial {
            writeln!(
                f,
                "  {} is {}: {} {}",
                a.atom,
                a.holds,
                if a.known { "known" } else { "NOT known" },
                if a.holds { a.mapped.clone() } else { format!("not ({})", a.mapped) }
            )?;
        }
        for s in &self.steps {
            writeln!(
                f,
                "{}: {} (termination min {}, weighted {}; knowledge {}; actual agreement {}; {} start state(s))",
                s.label(),
                if s.passed { "ok" } else { "FAILED" },
                format_decimal(&s.min_termination, 6),
                format_decimal(&s.termination, 6),
                if s.knowledge_ok { "ok" } else { "FAILED" },
                format_decimal(&s.actual_agreement, 6),
                s.start_states
            )?;
            if let Some(c) = &s.counterexample {
                writeln!(f, "  counterexample: {c}")?;
            }
        }
        if !self.complete {
            writeln!(f, "node budget exhausted; results are incomplete")?;
        }
        Ok(())
    }
}

/// High-level atoms `F = v` whose truth value the belief knows.
fn known_atoms(hl: &Bat, belief: &SupportBelief) -> Vec<(Symbol, Value, bool)> {
    let mut out = Vec::new();
    for d in &hl.fluents {
        let Some(fluent) = hl.fluent(&d.name) else { continue };
        for v in d.sort.values() {
            let atom = Formula::cmp(CmpOp::Eq, Term::Fluent(fluent.clone()), Term::Const(v.clone()));
            let mut env = Env::new();
            if belief.believes(&atom, &mut env, CmpOp::Eq, &Rational::one()).unwrap_or(false) {
                out.push((d.name.clone(), v, true));
            } else if belief.believes(&atom, &mut env, CmpOp::Eq, &Rational::zero()).unwrap_or(false) {
                out.push((d.name.clone(), v, false));
            }
        }
    }
    out
}

/// Low-level images of known high-level atoms: `(label, image, holds)`.
type Images = Vec<(String, Formula, bool)>;

fn images(m: &RefinementMapping, atoms: &[(Symbol, Value, bool)]) -> Result<Images, AbstractionError> {
    atoms
        .iter()
        .map(|(f, v, holds)| Ok((format!("{f} = {v}"), m.atom(f, v)?, *holds)))
        .collect()
}

fn knows(belief: &SupportBelief, image: &Formula, holds: bool) -> bool {
    let bound = if holds { Rational::one() } else { Rational::zero() };
    belief
        .believes(image, &mut Env::new(), CmpOp::Eq, &bound)
        .unwrap_or(false)
}

fn agrees(actual: &World, images: &Images) -> bool {
    images
        .iter()
        .all(|(_, f, holds)| eval_objective(f, actual, &mut Env::new()).map(|r| r == *holds).unwrap_or(false))
}

type LlStates = BTreeMap<(SupportBelief, World), Rational>;

/// Checks that `m` refines `hl` onto `ll`:
///
/// * every high-level atom known initially has its image known (true atoms
///   known true, false atoms known false) in the low-level initial belief;
/// * for every high-level action sequence up to `hl_horizon`, from every
///   low-level configuration reached so far, the mapped program of the next
///   action terminates within `depth` actions with probability at least
///   `1 − epsilon`, and every terminating branch knows the images of the
///   atoms the high level knows after the action.
///
/// Beliefs are tracked by their support, which decides every knowledge
/// query exactly.
pub fn check_refinement(
    hl: &Bat,
    ll: &Bat,
    m: &RefinementMapping,
    options: &RefinementOptions,
) -> Result<RefinementReport, AbstractionError> {
    let setup = |e: String| AbstractionError::Setup(e);
    let hl_belief = SupportBelief::initial(hl).map_err(|e| setup(format!("high-level theory: {e}")))?;
    let ll_belief = SupportBelief::initial(ll).map_err(|e| setup(format!("low-level theory: {e}")))?;
    let ll_full = crate::belief::BeliefState::initial(ll).map_err(|e| setup(e.to_string()))?;

    let initial_images = images(m, &known_atoms(hl, &hl_belief))?;
    let initial: Vec<AtomCheck> = initial_images
        .iter()
        .map(|(label, image, holds)| AtomCheck {
            atom: label.clone(),
            holds: *holds,
            mapped: print_formula(image),
            known: knows(&ll_belief, image, *holds),
        })
        .collect();

    let mut start: LlStates = BTreeMap::new();
    match ll.initial_actual_world().map_err(|e| setup(e.to_string()))? {
        Some(w) => {
            start.insert((ll_belief.clone(), w), Rational::one());
        }
        None => {
            for (w, p) in ll_full.entries() {
                start.insert((ll_belief.clone(), w.clone()), p.clone());
            }
        }
    }

    let explore = ExploreOptions {
        max_actions: options.depth,
        ..options.explore.clone()
    };
    let threshold = Rational::one() - &options.epsilon;
    let mut report = RefinementReport {
        depth: options.depth,
        hl_horizon: options.hl_horizon,
        epsilon: options.epsilon.clone(),
        initial,
        steps: Vec::new(),
        nodes: 0,
        complete: true,
    };

    let mut frontier: Vec<(Vec<GroundAction>, SupportBelief, LlStates)> = vec![(Vec::new(), hl_belief, start)];
    for _ in 0..options.hl_horizon {
        let mut next_frontier = Vec::new();
        for (prefix, hb, states) in &frontier {
            for issued in hl.issuable() {
                let outcomes = hl.outcomes(&issued).map_err(|e| setup(e.to_string()))?;
                for a in outcomes {
                    let executable = hb.worlds().iter().any(|w| {
                        hl.poss(w, &a).unwrap_or(false) && !hl.likelihood(w, &a).map(|l| l.is_zero()).unwrap_or(true)
                    });
                    if !executable {
                        continue;
                    }
                    let obs = hl.observation_of(&a).map_err(|e| setup(e.to_string()))?;
                    let Ok(hb2) = BeliefModel::update(hb, &obs, hl) else { continue };
                    let successor = images(m, &known_atoms(hl, &hb2))?;
                    let program = m.map_action(&a.name, &a.args)?;
                    let (check, reached) =
                        check_step(ll, &program, prefix, &a, states, &successor, &explore, &threshold, &mut report)?;
                    report.steps.push(check);
                    if !reached.is_empty() {
                        let mut p = prefix.clone();
                        p.push(a.clone());
                        next_frontier.push((p, hb2, reached));
                    }
                }
            }
        }
        frontier = next_frontier;
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn check_step(
    ll: &Bat,
    program: &Program,
    prefix: &[GroundAction],
    action: &GroundAction,
    states: &LlStates,
    successor: &Images,
    explore: &ExploreOptions,
    threshold: &Rational,
    report: &mut RefinementReport,
) -> Result<(StepCheck, LlStates), AbstractionError> {
    let mut min_termination: Option<Rational> = None;
    let mut termination = Rational::zero();
    let mut agreement = Rational::zero();
    let mut knowledge_ok = true;
    let mut counterexample = None;
    let mut reached: LlStates = BTreeMap::new();
    for ((belief, actual), weight) in states {
        let ex = explore_from(ll, program, belief.clone(), actual.clone(), &[], explore)?;
        report.nodes += ex.stats.nodes;
        report.complete &= ex.stats.complete;
        let t = ex.stats.completed.clone();
        termination += weight * &t;
        if min_termination.as_ref().is_none_or(|m| t < *m) {
            if t < *threshold && counterexample.is_none() {
                let b = ex.stats.running_branches.first().or(ex.stats.failed_branches.first());
                counterexample = Some(match b {
                    Some(b) => format!(
                        "from {} terminates with probability {} < {}; e.g. {} ({}, probability {})",
                        ll.show_world(actual),
                        format_decimal(&t, 6),
                        format_decimal(threshold, 6),
                        b.path(),
                        b.outcome,
                        format_ratio(&b.probability)
                    ),
                    None => format!("from {} terminates with probability {}", ll.show_world(actual), format_decimal(&t, 6)),
                });
            }
            min_termination = Some(t);
        }
        for (b, w, p) in ex.leaves {
            let known = successor.iter().all(|(_, f, holds)| knows(&b, f, *holds));
            if !known {
                if knowledge_ok {
                    let missing: Vec<&str> = successor
                        .iter()
                        .filter(|(_, f, holds)| !knows(&b, f, *holds))
                        .map(|(l, _, _)| l.as_str())
                        .collect();
                    let text = format!(
                        "a terminating branch from {} ends in {} without knowing the image of {}",
                        ll.show_world(actual),
                        ll.show_world(&w),
                        missing.join(", ")
                    );
                    if counterexample.is_none() {
                        counterexample = Some(text);
                    }
                }
                knowledge_ok = false;
            }
            let mass = weight * &p;
            if agrees(&w, successor) {
                agreement += &mass;
            }
            *reached.entry((b, w)).or_insert_with(Rational::zero) += mass;
        }
    }
    let min_termination = min_termination.unwrap_or_else(Rational::zero);
    let total: Rational = reached.values().cloned().fold(Rational::zero(), |a, b| a + b);
    if !total.is_zero() {
        for p in reached.values_mut() {
            *p = &*p / &total;
        }
        agreement /= &total;
    }
    let passed = knowledge_ok && min_termination >= *threshold && !states.is_empty();
    Ok((
        StepCheck {
            prefix: prefix.to_vec(),
            action: action.clone(),
            start_states: states.len(),
            min_termination,
            termination,
            knowledge_ok,
            actual_agreement: agreement,
            passed,
            counterexample,
        },
        reached,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::syntax::{parse_formula, print_program};

    #[test]
    fn atoms_map_through_cases() {
        let hl = bundled::goto_bat();
        let ll = bundled::move_bat();
        let m = bundled::mapping(&hl, &ll);
        let f = parse_formula("know(At = far)", &hl, "t").unwrap();
        let g = m.map_formula(&hl, &f).unwrap();
        assert_eq!(print_formula(&g), "know(exists x:Dist (Loc = x and x > 5))");
    }

    #[test]
    fn disequality_expands_over_values() {
        let hl = bundled::goto_bat();
        let ll = bundled::move_bat();
        let m = bundled::mapping(&hl, &ll);
        let f = parse_formula("know(At != near)", &hl, "t").unwrap();
        let g = m.map_formula(&hl, &f).unwrap();
        assert_eq!(print_formula(&g), "know(exists x:Dist (Loc = x and x > 5))");
    }

    #[test]
    fn action_mapping_selects_branch() {
        let hl = bundled::goto_bat();
        let ll = bundled::move_bat();
        let m = bundled::mapping(&hl, &ll);
        let p = m.map_action("goto", &[Value::sym("far")]).unwrap();
        let text = print_program(&p);
        assert!(text.starts_with("sonar();\nwhile not know(exists x:Dist (Loc = x and x > 5))"), "{text}");
        assert!(!text.contains("if"));
        assert!(matches!(m.map_action("goto", &[]), Err(AbstractionError::Arity { .. })));
    }

    #[test]
    fn uncorrected_start_fails_initial_correspondence() {
        let hl = bundled::goto_bat();
        let ll = bundled::move_bat();
        let m = bundled::mapping(&hl, &ll);
        let opts = RefinementOptions {
            depth: 4,
            hl_horizon: 0,
            ..RefinementOptions::default()
        };
        let r = check_refinement(&hl, &ll, &m, &opts).unwrap();
        assert!(!r.initial_ok());
        let ll = bundled::move_corrected_bat();
        let r = check_refinement(&hl, &ll, &m, &opts).unwrap();
        assert!(r.initial_ok(), "{r}");
    }
}
