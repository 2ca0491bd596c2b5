//! Sorts, terms and formulas, and their evaluation against a single world or
//! against an epistemic state.
//!
//! Fluents are functional: a world assigns exactly one value to every fluent.
//! The relational reading `Loc(x)` is accepted by the parser as sugar for
//! `Loc = x`. Every sort has a finite carrier so quantifiers are evaluated by
//! plain expansion.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::Rational;

pub type Symbol = Arc<str>;

/// A value of some sort: an integer or a named constant of an enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Sym(Symbol),
}

impl Value {
    pub fn sym(name: &str) -> Value {
        Value::Sym(Arc::from(name))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Sym(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => s.serialize_i64(*i),
            Value::Sym(name) => s.serialize_str(name),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Sym(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Int(i) => Value::Int(i),
            Raw::Sym(s) => Value::Sym(Arc::from(s)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Carrier {
    /// Inclusive integer interval.
    Int { lo: i64, hi: i64 },
    Enum(Vec<Symbol>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sort {
    pub name: Symbol,
    pub carrier: Carrier,
}

pub type SortRef = Arc<Sort>;

impl Sort {
    pub fn int(name: &str, lo: i64, hi: i64) -> Result<Sort, LogicError> {
        if lo > hi {
            return Err(LogicError::EmptySort(name.to_string()));
        }
        Ok(Sort {
            name: Arc::from(name),
            carrier: Carrier::Int { lo, hi },
        })
    }

    pub fn enumeration(name: &str, constants: &[&str]) -> Result<Sort, LogicError> {
        if constants.is_empty() {
            return Err(LogicError::EmptySort(name.to_string()));
        }
        Ok(Sort {
            name: Arc::from(name),
            carrier: Carrier::Enum(constants.iter().map(|c| Arc::from(*c)).collect()),
        })
    }

    pub fn is_int(&self) -> bool {
        matches!(self.carrier, Carrier::Int { .. })
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (&self.carrier, v) {
            (Carrier::Int { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (Carrier::Enum(cs), Value::Sym(s)) => cs.iter().any(|c| c == s),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        match &self.carrier {
            Carrier::Int { lo, hi } => (hi - lo + 1) as usize,
            Carrier::Enum(cs) => cs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Carrier values in canonical order (ascending integers, declaration order
    /// for enumerations).
    pub fn values(&self) -> Box<dyn Iterator<Item = Value> + '_> {
        match &self.carrier {
            Carrier::Int { lo, hi } => Box::new((*lo..=*hi).map(Value::Int)),
            Carrier::Enum(cs) => Box::new(cs.iter().map(|c| Value::Sym(c.clone()))),
        }
    }
}

/// A fluent resolved to its slot in the world vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FluentRef {
    pub name: Symbol,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Value),
    Var(Symbol),
    Fluent(FluentRef),
    Neg(Box<Term>),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Abs(Box<Term>),
}

impl Term {
    pub fn int(i: i64) -> Term {
        Term::Const(Value::Int(i))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(Arc::from(name))
    }

    /// True when no fluent occurs in the term.
    pub fn is_rigid(&self) -> bool {
        match self {
            Term::Const(_) | Term::Var(_) => true,
            Term::Fluent(_) => false,
            Term::Neg(t) | Term::Abs(t) => t.is_rigid(),
            Term::Add(a, b) | Term::Sub(a, b) => a.is_rigid() && b.is_rigid(),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) => true,
            Term::Var(_) | Term::Fluent(_) => false,
            Term::Neg(t) | Term::Abs(t) => t.is_ground(),
            Term::Add(a, b) | Term::Sub(a, b) => a.is_ground() && b.is_ground(),
        }
    }

    pub fn substitute(&self, var: &str, value: &Value) -> Term {
        match self {
            Term::Var(v) if &**v == var => Term::Const(value.clone()),
            Term::Const(_) | Term::Var(_) | Term::Fluent(_) => self.clone(),
            Term::Neg(t) => Term::Neg(Box::new(t.substitute(var, value))),
            Term::Abs(t) => Term::Abs(Box::new(t.substitute(var, value))),
            Term::Add(a, b) => Term::Add(
                Box::new(a.substitute(var, value)),
                Box::new(b.substitute(var, value)),
            ),
            Term::Sub(a, b) => Term::Sub(
                Box::new(a.substitute(var, value)),
                Box::new(b.substitute(var, value)),
            ),
        }
    }

    pub fn fluents<'a>(&'a self, out: &mut Vec<&'a FluentRef>) {
        match self {
            Term::Fluent(f) => out.push(f),
            Term::Const(_) | Term::Var(_) => {}
            Term::Neg(t) | Term::Abs(t) => t.fluents(out),
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.fluents(out);
                b.fluents(out);
            }
        }
    }

    fn free_vars(&self, bound: &mut Vec<Symbol>, out: &mut Vec<Symbol>) {
        match self {
            Term::Var(v) => {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Const(_) | Term::Fluent(_) => {}
            Term::Neg(t) | Term::Abs(t) => t.free_vars(bound, out),
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.free_vars(bound, out);
                b.free_vars(bound, out);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    /// Compares two values. Ordering comparisons are only defined on integers.
    pub fn compare(self, a: &Value, b: &Value) -> Result<bool, EvalError> {
        match (a, b) {
            (Value::Int(x), Value::Int(y)) => Ok(self.holds(x.cmp(y))),
            (Value::Sym(x), Value::Sym(y)) if self.is_equality() => {
                Ok(self.holds(if x == y { Ordering::Equal } else { Ordering::Less }))
            }
            _ => Err(EvalError::SortMismatch(format!(
                "cannot compare {a} {} {b}",
                self.symbol()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists(Symbol, SortRef, Box<Formula>),
    Forall(Symbol, SortRef, Box<Formula>),
    /// Alias for `Bel(body) = 1`.
    Know(Box<Formula>),
    /// Degree of belief in an objective body compared against a bound in [0, 1].
    Bel(Box<Formula>, CmpOp, Rational),
}

impl Formula {
    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Formula {
        Formula::Cmp(op, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn know(f: Formula) -> Formula {
        Formula::Know(Box::new(f))
    }

    pub fn exists(var: &str, sort: SortRef, body: Formula) -> Formula {
        Formula::Exists(Arc::from(var), sort, Box::new(body))
    }

    pub fn is_epistemic_atom(&self) -> bool {
        matches!(self, Formula::Know(_) | Formula::Bel(..))
    }

    /// No `Know`/`Bel` anywhere.
    pub fn is_objective(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => true,
            Formula::Not(f) | Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => {
                f.is_objective()
            }
            Formula::And(a, b) | Formula::Or(a, b) => a.is_objective() && b.is_objective(),
            Formula::Know(_) | Formula::Bel(..) => false,
        }
    }

    /// Every fluent occurrence sits under an epistemic operator.
    pub fn is_subjective(&self) -> bool {
        match self {
            Formula::True | Formula::False => true,
            Formula::Cmp(_, a, b) => a.is_rigid() && b.is_rigid(),
            Formula::Not(f) | Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => {
                f.is_subjective()
            }
            Formula::And(a, b) | Formula::Or(a, b) => a.is_subjective() && b.is_subjective(),
            Formula::Know(_) | Formula::Bel(..) => true,
        }
    }

    pub fn has_nested_epistemic(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => false,
            Formula::Not(f) | Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => {
                f.has_nested_epistemic()
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.has_nested_epistemic() || b.has_nested_epistemic()
            }
            Formula::Know(body) | Formula::Bel(body, _, _) => !body.is_objective(),
        }
    }

    pub fn mentions_fluents(&self) -> bool {
        let mut out = Vec::new();
        self.fluents(&mut out);
        !out.is_empty()
    }

    pub fn fluents<'a>(&'a self, out: &mut Vec<&'a FluentRef>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, a, b) => {
                a.fluents(out);
                b.fluents(out);
            }
            Formula::Not(f)
            | Formula::Exists(_, _, f)
            | Formula::Forall(_, _, f)
            | Formula::Know(f)
            | Formula::Bel(f, _, _) => f.fluents(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.fluents(out);
                b.fluents(out);
            }
        }
    }

    /// Epistemic atoms in left-to-right order.
    pub fn epistemic_atoms<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => {}
            Formula::Not(f) | Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => {
                f.epistemic_atoms(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.epistemic_atoms(out);
                b.epistemic_atoms(out);
            }
            Formula::Know(_) | Formula::Bel(..) => out.push(self),
        }
    }

    pub fn free_vars(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Symbol>, out: &mut Vec<Symbol>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, a, b) => {
                a.free_vars(bound, out);
                b.free_vars(bound, out);
            }
            Formula::Not(f) | Formula::Know(f) | Formula::Bel(f, _, _) => {
                f.collect_free(bound, out)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(v, _, f) | Formula::Forall(v, _, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Replaces free occurrences of `var`; quantifiers binding `var` shadow it.
    pub fn substitute(&self, var: &str, value: &Value) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(op, a, b) => {
                Formula::Cmp(*op, a.substitute(var, value), b.substitute(var, value))
            }
            Formula::Not(f) => Formula::not(f.substitute(var, value)),
            Formula::And(a, b) => Formula::and(a.substitute(var, value), b.substitute(var, value)),
            Formula::Or(a, b) => Formula::or(a.substitute(var, value), b.substitute(var, value)),
            Formula::Exists(v, s, f) | Formula::Forall(v, s, f) => {
                let body = if &**v == var {
                    (**f).clone()
                } else {
                    f.substitute(var, value)
                };
                if matches!(self, Formula::Exists(..)) {
                    Formula::Exists(v.clone(), s.clone(), Box::new(body))
                } else {
                    Formula::Forall(v.clone(), s.clone(), Box::new(body))
                }
            }
            Formula::Know(f) => Formula::know(f.substitute(var, value)),
            Formula::Bel(f, op, r) => {
                Formula::Bel(Box::new(f.substitute(var, value)), *op, r.clone())
            }
        }
    }

    /// Folds ground comparisons and boolean constants. Comparisons that cannot
    /// be decided (sort errors) are left in place.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(op, a, b) => {
                if a.is_ground() && b.is_ground() {
                    let empty = World::default();
                    let env = Env::new();
                    if let (Ok(x), Ok(y)) = (eval_term(a, &empty, &env), eval_term(b, &empty, &env)) {
                        if let Ok(r) = op.compare(&x, &y) {
                            return if r { Formula::True } else { Formula::False };
                        }
                    }
                }
                self.clone()
            }
            Formula::Not(f) => match f.simplify() {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                g => Formula::not(g),
            },
            Formula::And(a, b) => match (a.simplify(), b.simplify()) {
                (Formula::False, _) | (_, Formula::False) => Formula::False,
                (Formula::True, g) | (g, Formula::True) => g,
                (x, y) => Formula::and(x, y),
            },
            Formula::Or(a, b) => match (a.simplify(), b.simplify()) {
                (Formula::True, _) | (_, Formula::True) => Formula::True,
                (Formula::False, g) | (g, Formula::False) => g,
                (x, y) => Formula::or(x, y),
            },
            Formula::Exists(v, s, f) => match f.simplify() {
                g @ (Formula::True | Formula::False) => g,
                g => Formula::Exists(v.clone(), s.clone(), Box::new(g)),
            },
            Formula::Forall(v, s, f) => match f.simplify() {
                g @ (Formula::True | Formula::False) => g,
                g => Formula::Forall(v.clone(), s.clone(), Box::new(g)),
            },
            Formula::Know(f) => Formula::know(f.simplify()),
            Formula::Bel(f, op, r) => Formula::Bel(Box::new(f.simplify()), *op, r.clone()),
        }
    }

    /// Rejects nested epistemic operators and belief bounds outside [0, 1].
    pub fn validate(&self) -> Result<(), LogicError> {
        if self.has_nested_epistemic() {
            return Err(LogicError::NestedEpistemic);
        }
        let mut atoms = Vec::new();
        self.epistemic_atoms(&mut atoms);
        for atom in atoms {
            if let Formula::Bel(_, _, r) = atom {
                if *r < Rational::zero() || *r > Rational::one() {
                    return Err(LogicError::BoundOutOfRange(crate::rational::format_ratio(r)));
                }
            }
        }
        Ok(())
    }
}

/// A total assignment of values to the declared fluents, indexed by fluent slot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct World(Vec<Value>);

impl World {
    pub fn new(values: Vec<Value>) -> World {
        World(values)
    }

    pub fn get(&self, index: usize) -> Option<&Value> {
        self.0.get(index)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn with(&self, index: usize, value: Value) -> World {
        let mut values = self.0.clone();
        values[index] = value;
        World(values)
    }
}

/// Variable bindings; inner bindings shadow outer ones.
#[derive(Clone, Debug, Default)]
pub struct Env {
    bindings: Vec<(Symbol, Value)>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn bind(mut self, name: &str, value: Value) -> Env {
        self.push(Arc::from(name), value);
        self
    }

    pub fn push(&mut self, name: Symbol, value: Value) {
        self.bindings.push((name, value));
    }

    pub fn pop(&mut self) {
        self.bindings.pop();
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        self.bindings
            .iter()
            .rev()
            .find(|(n, _)| &**n == name)
            .map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("value {value} of {what} is outside the carrier of sort {sort}")]
    OutOfCarrier {
        what: String,
        value: Value,
        sort: String,
    },
    #[error("world has no value for fluent {0}")]
    MissingFluent(String),
    #[error("integer overflow in term evaluation")]
    Overflow,
    #[error("epistemic operator in an objective context")]
    EpistemicInObjective,
    #[error("objective formula outside a belief operator: {0}")]
    ObjectiveOutsideBelief(String),
    #[error("belief query depends on exact weights, which this belief representation does not track")]
    WeightDependent,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("sort {0} has an empty carrier")]
    EmptySort(String),
    #[error("nested epistemic operator")]
    NestedEpistemic,
    #[error("belief bound {0} is outside [0, 1]")]
    BoundOutOfRange(String),
}

pub fn eval_term(t: &Term, w: &World, env: &Env) -> Result<Value, EvalError> {
    let int = |t: &Term| -> Result<i64, EvalError> {
        match eval_term(t, w, env)? {
            Value::Int(i) => Ok(i),
            v => Err(EvalError::SortMismatch(format!(
                "arithmetic on non-integer value {v}"
            ))),
        }
    };
    match t {
        Term::Const(v) => Ok(v.clone()),
        Term::Var(name) => env
            .lookup(name)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(name.to_string())),
        Term::Fluent(f) => w
            .get(f.index)
            .cloned()
            .ok_or_else(|| EvalError::MissingFluent(f.name.to_string())),
        Term::Neg(a) => int(a)?.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
        Term::Abs(a) => int(a)?.checked_abs().map(Value::Int).ok_or(EvalError::Overflow),
        Term::Add(a, b) => int(a)?
            .checked_add(int(b)?)
            .map(Value::Int)
            .ok_or(EvalError::Overflow),
        Term::Sub(a, b) => int(a)?
            .checked_sub(int(b)?)
            .map(Value::Int)
            .ok_or(EvalError::Overflow),
    }
}

/// Tarskian evaluation of an objective formula in one world.
pub fn eval_objective(f: &Formula, w: &World, env: &mut Env) -> Result<bool, EvalError> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Cmp(op, a, b) => op.compare(&eval_term(a, w, env)?, &eval_term(b, w, env)?),
        Formula::Not(g) => Ok(!eval_objective(g, w, env)?),
        Formula::And(a, b) => Ok(eval_objective(a, w, env)? && eval_objective(b, w, env)?),
        Formula::Or(a, b) => Ok(eval_objective(a, w, env)? || eval_objective(b, w, env)?),
        Formula::Exists(v, sort, body) => {
            for value in sort.values() {
                env.push(v.clone(), value);
                let r = eval_objective(body, w, env);
                env.pop();
                if r? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Forall(v, sort, body) => {
            for value in sort.values() {
                env.push(v.clone(), value);
                let r = eval_objective(body, w, env);
                env.pop();
                if !r? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Know(_) | Formula::Bel(..) => Err(EvalError::EpistemicInObjective),
    }
}

/// Anything that can answer degree-of-belief comparisons for objective bodies.
pub trait Epistemic {
    /// Decides `Bel(body) op bound`.
    fn believes(
        &self,
        body: &Formula,
        env: &mut Env,
        op: CmpOp,
        bound: &Rational,
    ) -> Result<bool, EvalError>;
}

/// Evaluates a subjective formula: epistemic atoms against `state`, boolean
/// structure classically, rigid comparisons directly.
pub fn eval_epistemic<E: Epistemic + ?Sized>(
    f: &Formula,
    state: &E,
    env: &mut Env,
) -> Result<bool, EvalError> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Cmp(op, a, b) => {
            if !(a.is_rigid() && b.is_rigid()) {
                return Err(EvalError::ObjectiveOutsideBelief(crate::syntax::print_formula(f)));
            }
            let empty = World::default();
            op.compare(&eval_term(a, &empty, env)?, &eval_term(b, &empty, env)?)
        }
        Formula::Not(g) => Ok(!eval_epistemic(g, state, env)?),
        Formula::And(a, b) => Ok(eval_epistemic(a, state, env)? && eval_epistemic(b, state, env)?),
        Formula::Or(a, b) => Ok(eval_epistemic(a, state, env)? || eval_epistemic(b, state, env)?),
        Formula::Exists(v, sort, body) => {
            for value in sort.values() {
                env.push(v.clone(), value);
                let r = eval_epistemic(body, state, env);
                env.pop();
                if r? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Forall(v, sort, body) => {
            for value in sort.values() {
                env.push(v.clone(), value);
                let r = eval_epistemic(body, state, env);
                env.pop();
                if !r? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Know(body) => state.believes(body, env, CmpOp::Eq, &Rational::one()),
        Formula::Bel(body, op, bound) => state.believes(body, env, *op, bound),
    }
}

/// Whether `Bel(·) op bound` is decided by the support of a belief alone
/// (i.e. does not depend on the exact weights).
pub fn support_determined(op: CmpOp, bound: &Rational) -> bool {
    let _ = op;
    *bound <= Rational::zero() || *bound >= Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc() -> FluentRef {
        FluentRef {
            name: Arc::from("Loc"),
            index: 0,
        }
    }

    fn dist() -> SortRef {
        Arc::new(Sort::int("Dist", -5, 20).unwrap())
    }

    fn near_wall() -> Formula {
        Formula::exists(
            "x",
            dist(),
            Formula::and(
                Formula::cmp(CmpOp::Eq, Term::Fluent(loc()), Term::var("x")),
                Formula::cmp(CmpOp::Le, Term::var("x"), Term::int(2)),
            ),
        )
    }

    #[test]
    fn exists_witness() {
        let w = World::new(vec![Value::Int(2)]);
        assert!(eval_objective(&near_wall(), &w, &mut Env::new()).unwrap());
        let w = World::new(vec![Value::Int(3)]);
        assert!(!eval_objective(&near_wall(), &w, &mut Env::new()).unwrap());
    }

    #[test]
    fn enum_equality() {
        let at = FluentRef {
            name: Arc::from("At"),
            index: 0,
        };
        let f = Formula::cmp(CmpOp::Eq, Term::Fluent(at), Term::Const(Value::sym("near")));
        let w = World::new(vec![Value::sym("near")]);
        assert!(eval_objective(&f, &w, &mut Env::new()).unwrap());
    }

    #[test]
    fn unbound_variable_is_reported() {
        let f = Formula::cmp(CmpOp::Eq, Term::Fluent(loc()), Term::var("y"));
        let w = World::new(vec![Value::Int(2)]);
        assert_eq!(
            eval_objective(&f, &w, &mut Env::new()),
            Err(EvalError::UnboundVariable("y".into()))
        );
    }

    #[test]
    fn ordering_on_symbols_is_a_sort_mismatch() {
        let f = Formula::cmp(
            CmpOp::Lt,
            Term::Const(Value::sym("near")),
            Term::Const(Value::sym("far")),
        );
        assert!(matches!(
            eval_objective(&f, &World::default(), &mut Env::new()),
            Err(EvalError::SortMismatch(_))
        ));
    }

    #[test]
    fn epistemic_atom_rejected_in_objective_context() {
        let f = Formula::know(Formula::True);
        assert_eq!(
            eval_objective(&f, &World::default(), &mut Env::new()),
            Err(EvalError::EpistemicInObjective)
        );
    }

    #[test]
    fn nested_belief_is_invalid() {
        let f = Formula::know(Formula::know(Formula::True));
        assert_eq!(f.validate(), Err(LogicError::NestedEpistemic));
        assert!(Formula::know(near_wall()).validate().is_ok());
    }

    #[test]
    fn substitution_respects_shadowing() {
        let f = Formula::and(
            Formula::cmp(CmpOp::Eq, Term::var("x"), Term::int(1)),
            Formula::exists(
                "x",
                dist(),
                Formula::cmp(CmpOp::Eq, Term::var("x"), Term::int(2)),
            ),
        );
        let g = f.substitute("x", &Value::Int(1));
        assert_eq!(g.free_vars(), Vec::<Symbol>::new());
        match g {
            Formula::And(a, b) => {
                assert_eq!(*a, Formula::cmp(CmpOp::Eq, Term::int(1), Term::int(1)));
                let Formula::And(_, original) = &f else { unreachable!() };
                assert_eq!(b, *original);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn simplify_folds_ground_tests() {
        let f = Formula::and(
            Formula::cmp(CmpOp::Eq, Term::Const(Value::sym("near")), Term::Const(Value::sym("near"))),
            near_wall(),
        );
        assert_eq!(f.simplify(), near_wall());
        let g = Formula::and(
            Formula::cmp(CmpOp::Eq, Term::Const(Value::sym("far")), Term::Const(Value::sym("near"))),
            near_wall(),
        );
        assert_eq!(g.simplify(), Formula::False);
    }

    #[test]
    fn sort_carrier_checks() {
        assert!(Sort::int("S", 3, 2).is_err());
        assert!(Sort::enumeration("E", &[]).is_err());
        let s = Sort::int("S", -1, 1).unwrap();
        assert_eq!(s.values().collect::<Vec<_>>(), vec![Value::Int(-1), Value::Int(0), Value::Int(1)]);
        assert!(!s.contains(&Value::Int(2)));
        assert!(!s.contains(&Value::sym("a")));
    }
}
