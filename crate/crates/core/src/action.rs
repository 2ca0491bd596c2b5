//! Basic action theories: fluents, action schemas with agent-chosen and
//! nature-chosen parameters, progression, preconditions, likelihoods and
//! observational indistinguishability.
//!
//! Indistinguishability is expressed through parameter roles. Two ground
//! actions are indistinguishable exactly when they agree on every parameter
//! that is not `hidden`, which makes it an equivalence by construction.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::logic::{
    eval_objective, eval_term, Env, EvalError, FluentRef, Formula, SortRef, Symbol, Term, Value,
    World,
};
use crate::rational::{format_ratio, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluentDecl {
    pub name: Symbol,
    pub sort: SortRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamRole {
    /// Chosen by the agent when issuing the action; observable.
    Agent,
    /// Chosen by nature; observable (sensing results).
    Sensed,
    /// Chosen by nature; not observable.
    Hidden,
}

impl ParamRole {
    pub fn is_nature(self) -> bool {
        !matches!(self, ParamRole::Agent)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: Symbol,
    pub sort: SortRef,
    pub role: ParamRole,
    /// Outcome domain of a nature parameter as expressions over the agent
    /// parameters. `None` means the whole carrier of `sort`.
    pub domain: Option<Vec<Term>>,
}

/// Likelihood expression: a constant or a first-match conditional.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Likelihood {
    Const(Rational),
    Cond(Vec<(Formula, Likelihood)>, Box<Likelihood>),
}

impl Likelihood {
    pub fn eval(&self, w: &World, env: &mut Env) -> Result<Rational, EvalError> {
        match self {
            Likelihood::Const(r) => Ok(r.clone()),
            Likelihood::Cond(arms, otherwise) => {
                for (cond, value) in arms {
                    if eval_objective(cond, w, env)? {
                        return value.eval(w, env);
                    }
                }
                otherwise.eval(w, env)
            }
        }
    }

    fn conditions<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        if let Likelihood::Cond(arms, otherwise) = self {
            for (c, v) in arms {
                out.push(c);
                v.conditions(out);
            }
            otherwise.conditions(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Effect {
    pub fluent: FluentRef,
    pub value: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: Symbol,
    /// Agent parameters first, then nature parameters.
    pub params: Vec<Param>,
    pub poss: Formula,
    pub likelihood: Likelihood,
    /// Simultaneous updates evaluated in the pre-action world; fluents not
    /// listed are inertial.
    pub effects: Vec<Effect>,
}

impl ActionSchema {
    pub fn agent_params(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| p.role == ParamRole::Agent)
    }

    pub fn agent_arity(&self) -> usize {
        self.agent_params().count()
    }

    pub fn is_deterministic(&self) -> bool {
        self.params.iter().all(|p| p.role == ParamRole::Agent)
    }

    fn env_for(&self, args: &[Value]) -> Env {
        let mut env = Env::new();
        for (p, v) in self.params.iter().zip(args) {
            env.push(p.name.clone(), v.clone());
        }
        env
    }
}

/// An action with all parameters instantiated, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAction {
    pub name: Symbol,
    pub args: Vec<Value>,
}

/// An action as issued by the agent: agent arguments only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IssuedAction {
    pub name: Symbol,
    pub args: Vec<Value>,
}

/// The indistinguishability class of a ground action: hidden arguments erased.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation {
    pub name: Symbol,
    pub args: Vec<Option<Value>>,
}

fn write_call<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    name: &str,
    args: impl Iterator<Item = T>,
) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, a) in args.enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, self.args.iter())
    }
}

impl fmt::Display for IssuedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, self.args.iter())
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(
            f,
            &self.name,
            self.args.iter().map(|a| match a {
                Some(v) => v.to_string(),
                None => "_".to_string(),
            }),
        )
    }
}

impl IssuedAction {
    pub fn new(name: &str, args: Vec<Value>) -> IssuedAction {
        IssuedAction {
            name: Arc::from(name),
            args,
        }
    }
}

impl GroundAction {
    pub fn new(name: &str, args: Vec<Value>) -> GroundAction {
        GroundAction {
            name: Arc::from(name),
            args,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitialWorld {
    pub weight: Rational,
    pub assignments: Vec<(FluentRef, Value)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bat {
    pub sorts: Vec<SortRef>,
    pub fluents: Vec<FluentDecl>,
    pub actions: Vec<ActionSchema>,
    pub initial_belief: Vec<InitialWorld>,
    pub initial_actual: Option<Vec<(FluentRef, Value)>>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ActionError {
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("action {name} expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("argument {param} = {value} of {action} is outside sort {sort}")]
    ArgumentOutOfSort {
        action: String,
        param: String,
        value: Value,
        sort: String,
    },
    #[error("negative likelihood {value} for {action}")]
    NegativeLikelihood { action: String, value: String },
    #[error("empty outcome domain for {0}")]
    EmptyOutcomes(String),
    #[error("initial state: {0}")]
    Initial(String),
    #[error("{context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },
}

fn eval_ctx(context: impl fmt::Display) -> impl FnOnce(EvalError) -> ActionError {
    let context = context.to_string();
    move |source| ActionError::Eval { context, source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
    pub subject: Subject,
}

/// The declaration an issue is about.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subject {
    Theory,
    Initial,
    Action(Symbol),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub worlds_checked: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    fn error(&mut self, subject: Subject, message: String) {
        self.issues.push(Issue {
            severity: Severity::Error,
            message,
            subject,
        });
    }

    fn warning(&mut self, subject: Subject, message: String) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message,
            subject,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{tag}: {}", issue.message)?;
        }
        Ok(())
    }
}

/// Cap on the number of worlds enumerated by default during validation.
pub const VALIDATION_WORLD_LIMIT: usize = 100_000;

impl Bat {
    pub fn schema(&self, name: &str) -> Result<&ActionSchema, ActionError> {
        self.actions
            .iter()
            .find(|a| &*a.name == name)
            .ok_or_else(|| ActionError::UnknownAction(name.to_string()))
    }

    pub fn fluent(&self, name: &str) -> Option<FluentRef> {
        self.fluents
            .iter()
            .position(|f| &*f.name == name)
            .map(|index| FluentRef {
                name: self.fluents[index].name.clone(),
                index,
            })
    }

    pub fn sort(&self, name: &str) -> Option<&SortRef> {
        self.sorts.iter().find(|s| &*s.name == name)
    }

    /// Hex SHA-256 of the canonical printed form.
    pub fn digest(&self) -> String {
        let text = crate::syntax::print_bat(self);
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn check_args(&self, schema: &ActionSchema, args: &[Value]) -> Result<(), ActionError> {
        if args.len() != schema.params.len() {
            return Err(ActionError::Arity {
                name: schema.name.to_string(),
                expected: schema.params.len(),
                got: args.len(),
            });
        }
        for (p, v) in schema.params.iter().zip(args) {
            if !p.sort.contains(v) {
                return Err(ActionError::ArgumentOutOfSort {
                    action: schema.name.to_string(),
                    param: p.name.to_string(),
                    value: v.clone(),
                    sort: p.sort.name.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Successor world: effects evaluated in `w`, other fluents unchanged.
    pub fn progress(&self, w: &World, a: &GroundAction) -> Result<World, ActionError> {
        let schema = self.schema(&a.name)?;
        self.check_args(schema, &a.args)?;
        let env = schema.env_for(&a.args);
        let mut updates = Vec::with_capacity(schema.effects.len());
        for effect in &schema.effects {
            let value = eval_term(&effect.value, w, &env).map_err(eval_ctx(format!("effect of {a}")))?;
            let sort = &self.fluents[effect.fluent.index].sort;
            if !sort.contains(&value) {
                return Err(ActionError::Eval {
                    context: format!("effect of {a}"),
                    source: EvalError::OutOfCarrier {
                        what: format!("fluent {}", effect.fluent.name),
                        value,
                        sort: sort.name.to_string(),
                    },
                });
            }
            updates.push((effect.fluent.index, value));
        }
        let mut values = w.values().to_vec();
        for (index, value) in updates {
            values[index] = value;
        }
        Ok(World::new(values))
    }

    pub fn poss(&self, w: &World, a: &GroundAction) -> Result<bool, ActionError> {
        let schema = self.schema(&a.name)?;
        self.check_args(schema, &a.args)?;
        let mut env = schema.env_for(&a.args);
        eval_objective(&schema.poss, w, &mut env).map_err(eval_ctx(format!("precondition of {a}")))
    }

    pub fn likelihood(&self, w: &World, a: &GroundAction) -> Result<Rational, ActionError> {
        let schema = self.schema(&a.name)?;
        self.check_args(schema, &a.args)?;
        let mut env = schema.env_for(&a.args);
        let value = schema
            .likelihood
            .eval(w, &mut env)
            .map_err(eval_ctx(format!("likelihood of {a}")))?;
        if value < Rational::zero() {
            return Err(ActionError::NegativeLikelihood {
                action: a.to_string(),
                value: format_ratio(&value),
            });
        }
        Ok(value)
    }

    /// Values of each nature parameter for the given agent arguments, sorted
    /// canonically and deduplicated.
    fn nature_domains(
        &self,
        schema: &ActionSchema,
        agent_args: &[Value],
    ) -> Result<Vec<Vec<Value>>, ActionError> {
        let mut env = Env::new();
        for (p, v) in schema.agent_params().zip(agent_args) {
            env.push(p.name.clone(), v.clone());
        }
        let empty = World::default();
        let mut domains = Vec::new();
        for p in schema.params.iter().filter(|p| p.role.is_nature()) {
            let mut values: Vec<Value> = match &p.domain {
                None => p.sort.values().collect(),
                Some(exprs) => {
                    let mut vs = Vec::with_capacity(exprs.len());
                    for e in exprs {
                        let v = eval_term(e, &empty, &env)
                            .map_err(eval_ctx(format!("outcome domain of {}.{}", schema.name, p.name)))?;
                        if !p.sort.contains(&v) {
                            return Err(ActionError::ArgumentOutOfSort {
                                action: schema.name.to_string(),
                                param: p.name.to_string(),
                                value: v,
                                sort: p.sort.name.to_string(),
                            });
                        }
                        vs.push(v);
                    }
                    vs
                }
            };
            values.sort();
            values.dedup();
            if values.is_empty() {
                return Err(ActionError::EmptyOutcomes(schema.name.to_string()));
            }
            domains.push(values);
        }
        Ok(domains)
    }

    /// All ground instances nature may pick for an issued action, in canonical order.
    pub fn outcomes(&self, issued: &IssuedAction) -> Result<Vec<GroundAction>, ActionError> {
        let schema = self.schema(&issued.name)?;
        let arity = schema.agent_arity();
        if issued.args.len() != arity {
            return Err(ActionError::Arity {
                name: schema.name.to_string(),
                expected: arity,
                got: issued.args.len(),
            });
        }
        for (p, v) in schema.agent_params().zip(&issued.args) {
            if !p.sort.contains(v) {
                return Err(ActionError::ArgumentOutOfSort {
                    action: schema.name.to_string(),
                    param: p.name.to_string(),
                    value: v.clone(),
                    sort: p.sort.name.to_string(),
                });
            }
        }
        let domains = self.nature_domains(schema, &issued.args)?;
        let mut out = Vec::new();
        for combo in cartesian(&domains) {
            let mut args = issued.args.clone();
            args.extend(combo);
            out.push(GroundAction {
                name: schema.name.clone(),
                args,
            });
        }
        Ok(out)
    }

    pub fn observation_of(&self, a: &GroundAction) -> Result<Observation, ActionError> {
        let schema = self.schema(&a.name)?;
        self.check_args(schema, &a.args)?;
        Ok(Observation {
            name: schema.name.clone(),
            args: schema
                .params
                .iter()
                .zip(&a.args)
                .map(|(p, v)| (p.role != ParamRole::Hidden).then(|| v.clone()))
                .collect(),
        })
    }

    pub fn issued_of(&self, a: &GroundAction) -> Result<IssuedAction, ActionError> {
        let schema = self.schema(&a.name)?;
        self.check_args(schema, &a.args)?;
        Ok(IssuedAction {
            name: schema.name.clone(),
            args: schema
                .params
                .iter()
                .zip(&a.args)
                .filter(|(p, _)| p.role == ParamRole::Agent)
                .map(|(_, v)| v.clone())
                .collect(),
        })
    }

    /// Ground actions indistinguishable from the observed one.
    pub fn candidates(&self, obs: &Observation) -> Result<Vec<GroundAction>, ActionError> {
        let schema = self.schema(&obs.name)?;
        if obs.args.len() != schema.params.len() {
            return Err(ActionError::Arity {
                name: schema.name.to_string(),
                expected: schema.params.len(),
                got: obs.args.len(),
            });
        }
        let agent_args: Vec<Value> = schema
            .params
            .iter()
            .zip(&obs.args)
            .filter(|(p, _)| p.role == ParamRole::Agent)
            .map(|(_, v)| v.clone().unwrap_or(Value::Int(0)))
            .collect();
        let domains = self.nature_domains(schema, &agent_args)?;
        let mut per_param: Vec<Vec<Value>> = Vec::with_capacity(schema.params.len());
        let mut nature = domains.into_iter();
        for (p, v) in schema.params.iter().zip(&obs.args) {
            match (p.role, v) {
                (ParamRole::Hidden, _) => per_param.push(nature.next().unwrap_or_default()),
                (ParamRole::Sensed, Some(v)) => {
                    let dom = nature.next().unwrap_or_default();
                    per_param.push(if dom.contains(v) { vec![v.clone()] } else { vec![] });
                }
                (_, Some(v)) => per_param.push(vec![v.clone()]),
                (_, None) => per_param.push(vec![]),
            }
        }
        Ok(cartesian(&per_param)
            .map(|args| GroundAction {
                name: schema.name.clone(),
                args,
            })
            .collect())
    }

    /// Every agent-issuable instance of every schema.
    pub fn issuable(&self) -> Vec<IssuedAction> {
        let mut out = Vec::new();
        for schema in &self.actions {
            let domains: Vec<Vec<Value>> = schema.agent_params().map(|p| p.sort.values().collect()).collect();
            for args in cartesian(&domains) {
                out.push(IssuedAction {
                    name: schema.name.clone(),
                    args,
                });
            }
        }
        out
    }

    /// All worlds over the declared carriers, or `None` beyond `limit`.
    pub fn all_worlds(&self, limit: usize) -> Option<Vec<World>> {
        let mut total: usize = 1;
        for f in &self.fluents {
            total = total.checked_mul(f.sort.len())?;
            if total > limit {
                return None;
            }
        }
        let domains: Vec<Vec<Value>> = self.fluents.iter().map(|f| f.sort.values().collect()).collect();
        Some(cartesian(&domains).map(World::new).collect())
    }

    /// Initial worlds with their declared (unnormalized) weights.
    pub fn initial_worlds(&self) -> Result<Vec<(World, Rational)>, ActionError> {
        if self.initial_belief.is_empty() {
            return Err(ActionError::Initial("no initial belief declared".into()));
        }
        let mut out = Vec::with_capacity(self.initial_belief.len());
        for line in &self.initial_belief {
            out.push((self.world_from(&line.assignments)?, line.weight.clone()));
        }
        Ok(out)
    }

    pub fn initial_actual_world(&self) -> Result<Option<World>, ActionError> {
        self.initial_actual.as_ref().map(|a| self.world_from(a)).transpose()
    }

    /// Builds a world from a complete assignment.
    pub fn world_from(&self, assignments: &[(FluentRef, Value)]) -> Result<World, ActionError> {
        let mut values: Vec<Option<Value>> = vec![None; self.fluents.len()];
        for (f, v) in assignments {
            let decl = self
                .fluents
                .get(f.index)
                .ok_or_else(|| ActionError::Initial(format!("unknown fluent {}", f.name)))?;
            if !decl.sort.contains(v) {
                return Err(ActionError::Initial(format!(
                    "value {v} of fluent {} is outside sort {}",
                    f.name, decl.sort.name
                )));
            }
            if values[f.index].replace(v.clone()).is_some() {
                return Err(ActionError::Initial(format!("fluent {} assigned twice", f.name)));
            }
        }
        let mut out = Vec::with_capacity(values.len());
        for (v, decl) in values.into_iter().zip(&self.fluents) {
            out.push(v.ok_or_else(|| ActionError::Initial(format!("fluent {} not assigned", decl.name)))?);
        }
        Ok(World::new(out))
    }

    /// Checks the theory against all worlds over the declared carriers (or
    /// `worlds` when given).
    pub fn validate(&self, worlds: Option<&[World]>) -> ValidationReport {
        let mut report = ValidationReport::default();
        for schema in &self.actions {
            let mut conds = vec![&schema.poss];
            schema.likelihood.conditions(&mut conds);
            for c in conds {
                if !c.is_objective() {
                    report.error(Subject::Action(schema.name.clone()), format!("{}: precondition and likelihood conditions must be objective", schema.name));
                }
            }
            for e in &schema.effects {
                if self.fluents.get(e.fluent.index).map(|f| &f.name) != Some(&e.fluent.name) {
                    report.error(Subject::Action(schema.name.clone()), format!("{}: effect on undeclared fluent {}", schema.name, e.fluent.name));
                }
            }
        }

        match self.initial_worlds() {
            Err(e) => report.error(Subject::Initial, e.to_string()),
            Ok(ws) => {
                let mut total = Rational::zero();
                for (w, weight) in &ws {
                    if *weight <= Rational::zero() {
                        report.error(Subject::Initial, format!("initial world {} has non-positive weight {}", self.show_world(w), format_ratio(weight)));
                    }
                    total += weight;
                }
                if !total.is_one() {
                    report.error(Subject::Initial, format!("initial belief weights sum to {}, not 1", format_ratio(&total)));
                }
                match self.initial_actual_world() {
                    Err(e) => report.error(Subject::Initial, e.to_string()),
                    Ok(Some(actual)) => {
                        if !ws.iter().any(|(w, p)| *w == actual && *p > Rational::zero()) {
                            report.error(Subject::Initial, format!(
                                "initial actual world {} is not in the support of the initial belief",
                                self.show_world(&actual)
                            ));
                        }
                    }
                    Ok(None) => {}
                }
            }
        }

        let owned;
        let worlds = match worlds {
            Some(ws) => ws,
            None => match self.all_worlds(VALIDATION_WORLD_LIMIT) {
                Some(ws) => {
                    owned = ws;
                    &owned[..]
                }
                None => {
                    report.warning(Subject::Theory, format!(
                        "more than {VALIDATION_WORLD_LIMIT} worlds over the declared carriers; likelihood checks skipped"
                    ));
                    return report;
                }
            },
        };
        report.worlds_checked = worlds.len();

        // Outcomes leaving a fluent's carrier, per action: (count, first example).
        let mut escapes: Vec<(Symbol, usize, String)> = Vec::new();
        for issued in self.issuable() {
            let outcomes = match self.outcomes(&issued) {
                Ok(o) => o,
                Err(e) => {
                    report.error(Subject::Action(issued.name.clone()), format!("{issued}: {e}"));
                    continue;
                }
            };
            for w in worlds {
                let mut total = Rational::zero();
                let mut any_possible = false;
                let mut failed = false;
                for a in &outcomes {
                    let possible = match self.poss(w, a) {
                        Ok(p) => p,
                        Err(e) => {
                            report.error(Subject::Action(issued.name.clone()), format!("{a} in {}: {e}", self.show_world(w)));
                            failed = true;
                            break;
                        }
                    };
                    any_possible |= possible;
                    let l = match self.likelihood(w, a) {
                        Ok(l) => l,
                        Err(e) => {
                            report.error(Subject::Action(issued.name.clone()), format!("{a} in {}: {e}", self.show_world(w)));
                            failed = true;
                            break;
                        }
                    };
                    if possible && !l.is_zero() {
                        if let Err(e) = self.progress(w, a) {
                            match escapes.iter_mut().find(|(n, _, _)| *n == issued.name) {
                                Some((_, count, _)) => *count += 1,
                                None => escapes.push((issued.name.clone(), 1, format!("{a} in {}: {e}", self.show_world(w)))),
                            }
                        }
                    }
                    total += l;
                }
                if !failed && any_possible && !total.is_one() {
                    report.error(Subject::Action(issued.name.clone()), format!(
                        "likelihoods of the outcomes of {issued} sum to {} in {} (must be 1)",
                        format_ratio(&total),
                        self.show_world(w)
                    ));
                }
            }
        }
        for (name, count, example) in escapes {
            let more = if count > 1 { format!(" (and {} similar)", count - 1) } else { String::new() };
            report.warning(Subject::Action(name), format!("{example}{more}; such outcomes fail when executed"));
        }
        report
    }

    pub fn show_world(&self, w: &World) -> String {
        let parts: Vec<String> = self
            .fluents
            .iter()
            .zip(w.values())
            .map(|(f, v)| format!("{}={v}", f.name))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// Cartesian product in lexicographic order.
pub(crate) fn cartesian(domains: &[Vec<Value>]) -> impl Iterator<Item = Vec<Value>> + '_ {
    let empty = domains.iter().any(|d| d.is_empty());
    let mut idx = vec![0usize; domains.len()];
    let mut done = empty;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let item: Vec<Value> = idx.iter().zip(domains).map(|(&i, d)| d[i].clone()).collect();
        done = true;
        for k in (0..domains.len()).rev() {
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                done = false;
                break;
            }
            idx[k] = 0;
        }
        Some(item)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::rational::ratio;

    fn w(loc: i64) -> World {
        World::new(vec![Value::Int(loc)])
    }

    fn mv(x: i64, y: i64) -> GroundAction {
        GroundAction::new("move", vec![Value::Int(x), Value::Int(y)])
    }

    fn sonar(z: i64) -> GroundAction {
        GroundAction::new("sonar", vec![Value::Int(z)])
    }

    #[test]
    fn progress_follows_actual_displacement() {
        let bat = bundled::move_bat();
        assert_eq!(bat.progress(&w(3), &mv(-1, -1)).unwrap(), w(2));
        assert_eq!(bat.progress(&w(3), &mv(-1, 0)).unwrap(), w(3));
        assert_eq!(bat.progress(&w(3), &sonar(5)).unwrap(), w(3));
    }

    #[test]
    fn progress_out_of_carrier_names_the_fluent() {
        let bat = bundled::move_bat();
        let err = bat.progress(&w(20), &mv(1, 1)).unwrap_err();
        assert!(err.to_string().contains("fluent Loc"), "{err}");
    }

    #[test]
    fn goto_progress() {
        let bat = bundled::goto_bat();
        let near = World::new(vec![Value::sym("near")]);
        let far = World::new(vec![Value::sym("far")]);
        assert_eq!(bat.progress(&near, &GroundAction::new("goto", vec![Value::sym("far")])).unwrap(), far);
    }

    #[test]
    fn preconditions() {
        let bat = bundled::move_bat();
        assert!(bat.poss(&w(3), &mv(1, 1)).unwrap());
        assert!(!bat.poss(&w(3), &mv(2, 2)).unwrap());
        assert!(bat.poss(&w(-5), &sonar(7)).unwrap());
        assert!(bat.poss(&w(3), &sonar(7)).unwrap());
    }

    #[test]
    fn likelihoods() {
        let bat = bundled::move_bat();
        assert_eq!(bat.likelihood(&w(3), &sonar(3)).unwrap(), ratio(4, 5));
        assert_eq!(bat.likelihood(&w(3), &sonar(4)).unwrap(), ratio(1, 10));
        assert_eq!(bat.likelihood(&w(3), &sonar(5)).unwrap(), ratio(0, 1));
        for loc in [-5, 0, 3, 20] {
            assert_eq!(bat.likelihood(&w(loc), &mv(-1, 0)).unwrap(), ratio(1, 5));
            assert_eq!(bat.likelihood(&w(loc), &mv(-1, -1)).unwrap(), ratio(3, 5));
        }
        let goto = bundled::goto_bat();
        let a = GroundAction::new("goto", vec![Value::sym("near")]);
        assert!(goto.likelihood(&World::new(vec![Value::sym("far")]), &a).unwrap().is_one());
    }

    #[test]
    fn outcome_enumeration() {
        let bat = bundled::move_bat();
        let out = bat.outcomes(&IssuedAction::new("move", vec![Value::Int(-1)])).unwrap();
        assert_eq!(out, vec![mv(-1, -2), mv(-1, -1), mv(-1, 0)]);
        let sonar_out = bat.outcomes(&IssuedAction::new("sonar", vec![])).unwrap();
        assert_eq!(sonar_out.len(), bat.sort("Reading").unwrap().len());
        let positive = sonar_out
            .iter()
            .filter(|a| !bat.likelihood(&w(3), a).unwrap().is_zero())
            .count();
        assert_eq!(positive, 3);
        let goto = bundled::goto_bat();
        assert_eq!(
            goto.outcomes(&IssuedAction::new("goto", vec![Value::sym("near")])).unwrap(),
            vec![GroundAction::new("goto", vec![Value::sym("near")])]
        );
    }

    #[test]
    fn observations_erase_hidden_arguments() {
        let bat = bundled::move_bat();
        let o = bat.observation_of(&mv(-1, 0)).unwrap();
        assert_eq!(o.to_string(), "move(-1, _)");
        assert_eq!(o, bat.observation_of(&mv(-1, -2)).unwrap());
        assert_ne!(o, bat.observation_of(&mv(1, 0)).unwrap());
        assert_eq!(bat.observation_of(&sonar(3)).unwrap().to_string(), "sonar(3)");
        assert_ne!(bat.observation_of(&sonar(3)).unwrap(), bat.observation_of(&sonar(4)).unwrap());
        let goto = bundled::goto_bat();
        let g = GroundAction::new("goto", vec![Value::sym("near")]);
        assert_eq!(goto.observation_of(&g).unwrap().to_string(), "goto(near)");
    }

    #[test]
    fn candidates_match_observation() {
        let bat = bundled::move_bat();
        let o = bat.observation_of(&mv(-1, 0)).unwrap();
        assert_eq!(bat.candidates(&o).unwrap(), vec![mv(-1, -2), mv(-1, -1), mv(-1, 0)]);
        let s = bat.observation_of(&sonar(3)).unwrap();
        assert_eq!(bat.candidates(&s).unwrap(), vec![sonar(3)]);
    }

    #[test]
    fn bundled_theories_validate() {
        for bat in [bundled::move_bat(), bundled::move_corrected_bat(), bundled::move_literal_bat(), bundled::goto_bat()] {
            let report = bat.validate(None);
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn unnormalized_likelihood_is_reported() {
        let text = "sort S = int[0..2]\nfluent F : S\naction a(hidden y: S)\n  likelihood: 1/2\ninitial belief weight 1 : F = 0\n";
        let bat = crate::syntax::parse_bat(text, "bad.bat").unwrap();
        let report = bat.validate(None);
        assert!(!report.passed());
        assert!(report.to_string().contains("sum to 3/2"), "{report}");
    }

    #[test]
    fn initial_weights_must_sum_to_one() {
        let text = "sort S = int[0..2]\nfluent F : S\ninitial belief weight 1/2 : F = 0\n";
        let bat = crate::syntax::parse_bat(text, "bad.bat").unwrap();
        assert!(bat.validate(None).to_string().contains("sum to 1/2"));
    }

    #[test]
    fn cartesian_order() {
        let d = vec![vec![Value::Int(0), Value::Int(1)], vec![Value::Int(5), Value::Int(6)]];
        let all: Vec<_> = cartesian(&d).collect();
        assert_eq!(all.len(), 4);
        assert_eq!(all[1], vec![Value::Int(0), Value::Int(6)]);
        assert_eq!(cartesian(&[]).count(), 1);
    }
}
