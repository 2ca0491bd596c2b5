//! Programs over a basic action theory: primitive actions, tests, sequences,
//! conditionals and loops.

use crate::action::{ActionError, Bat, IssuedAction};
use thiserror::Error;

use crate::logic::{eval_term, Env, EvalError, Formula, LogicError, Symbol, Term, Value, World};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("{formula}: {source}")]
    Formula {
        formula: String,
        #[source]
        source: LogicError,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Program {
    Nil,
    /// An action issued with its agent arguments; nature fills in the rest.
    Act { name: Symbol, args: Vec<Term> },
    Test(Formula),
    Seq(Vec<Program>),
    If(Formula, Box<Program>, Box<Program>),
    While(Formula, Box<Program>),
}

impl Program {
    pub fn act(name: &str, args: Vec<Term>) -> Program {
        Program::Act {
            name: Symbol::from(name),
            args,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + match self {
            Program::Nil | Program::Act { .. } | Program::Test(_) => 0,
            Program::Seq(items) => items.iter().map(Program::node_count).sum(),
            Program::If(_, t, e) => t.node_count() + e.node_count(),
            Program::While(_, body) => body.node_count(),
        }
    }

    /// Number of `Act` nodes (static, not executed).
    pub fn action_count(&self) -> usize {
        match self {
            Program::Nil | Program::Test(_) => 0,
            Program::Act { .. } => 1,
            Program::Seq(items) => items.iter().map(Program::action_count).sum(),
            Program::If(_, t, e) => t.action_count() + e.action_count(),
            Program::While(_, body) => body.action_count(),
        }
    }

    /// While loops in pre-order; a loop's position in this list is its ordinal.
    pub fn while_loops(&self) -> Vec<&Program> {
        let mut out = Vec::new();
        self.collect_loops(&mut out);
        out
    }

    fn collect_loops<'a>(&'a self, out: &mut Vec<&'a Program>) {
        match self {
            Program::Nil | Program::Act { .. } | Program::Test(_) => {}
            Program::Seq(items) => items.iter().for_each(|p| p.collect_loops(out)),
            Program::If(_, t, e) => {
                t.collect_loops(out);
                e.collect_loops(out);
            }
            Program::While(_, body) => {
                out.push(self);
                body.collect_loops(out);
            }
        }
    }

    /// Ordinal of a loop node identified by address.
    pub fn loop_ordinal(&self, node: &Program) -> Option<usize> {
        self.while_loops().iter().position(|p| std::ptr::eq(*p, node))
    }

    /// Every guard and test formula.
    pub fn formulas(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        self.collect_formulas(&mut out);
        out
    }

    fn collect_formulas<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        match self {
            Program::Nil | Program::Act { .. } => {}
            Program::Test(f) => out.push(f),
            Program::Seq(items) => items.iter().for_each(|p| p.collect_formulas(out)),
            Program::If(c, t, e) => {
                out.push(c);
                t.collect_formulas(out);
                e.collect_formulas(out);
            }
            Program::While(c, body) => {
                out.push(c);
                body.collect_formulas(out);
            }
        }
    }

    pub fn substitute(&self, var: &str, value: &Value) -> Program {
        match self {
            Program::Nil => Program::Nil,
            Program::Act { name, args } => Program::Act {
                name: name.clone(),
                args: args.iter().map(|t| t.substitute(var, value)).collect(),
            },
            Program::Test(f) => Program::Test(f.substitute(var, value)),
            Program::Seq(items) => Program::Seq(items.iter().map(|p| p.substitute(var, value)).collect()),
            Program::If(c, t, e) => Program::If(
                c.substitute(var, value),
                Box::new(t.substitute(var, value)),
                Box::new(e.substitute(var, value)),
            ),
            Program::While(c, body) => {
                Program::While(c.substitute(var, value), Box::new(body.substitute(var, value)))
            }
        }
    }

    /// Removes conditionals whose guard is decided without any fluent, and
    /// flattens nested sequences.
    pub fn partial_eval(&self) -> Program {
        match self {
            Program::Nil | Program::Act { .. } => self.clone(),
            Program::Test(f) => match f.simplify() {
                Formula::True => Program::Seq(vec![]),
                g => Program::Test(g),
            },
            Program::Seq(items) => {
                let mut out = Vec::with_capacity(items.len());
                for p in items {
                    match p.partial_eval() {
                        Program::Seq(inner) => out.extend(inner),
                        Program::Nil => {}
                        q => out.push(q),
                    }
                }
                Program::Seq(out)
            }
            Program::If(c, t, e) => match c.simplify() {
                Formula::True => t.partial_eval(),
                Formula::False => e.partial_eval(),
                g => Program::If(g, Box::new(t.partial_eval()), Box::new(e.partial_eval())),
            },
            Program::While(c, body) => Program::While(c.simplify(), Box::new(body.partial_eval())),
        }
    }
}

/// Evaluates the (ground) argument terms of an act node.
pub fn issue(name: &Symbol, args: &[Term]) -> Result<IssuedAction, EvalError> {
    let empty = World::default();
    let env = Env::new();
    let mut values = Vec::with_capacity(args.len());
    for t in args {
        values.push(eval_term(t, &empty, &env)?);
    }
    Ok(IssuedAction {
        name: name.clone(),
        args: values,
    })
}

/// Checks that every action exists with the right arity and every guard is a
/// valid formula.
pub fn check_program(p: &Program, bat: &Bat) -> Result<(), ProgramError> {
    match p {
        Program::Nil => Ok(()),
        Program::Act { name, args } => {
            let schema = bat.schema(name)?;
            if schema.agent_arity() != args.len() {
                return Err(ActionError::Arity {
                    name: name.to_string(),
                    expected: schema.agent_arity(),
                    got: args.len(),
                }
                .into());
            }
            Ok(())
        }
        Program::Test(f) => check_formula(f),
        Program::Seq(items) => items.iter().try_for_each(|q| check_program(q, bat)),
        Program::If(c, t, e) => {
            check_formula(c)?;
            check_program(t, bat)?;
            check_program(e, bat)
        }
        Program::While(c, body) => {
            check_formula(c)?;
            check_program(body, bat)
        }
    }
}

fn check_formula(f: &Formula) -> Result<(), ProgramError> {
    f.validate().map_err(|source| ProgramError::Formula {
        formula: crate::syntax::print_formula(f),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn counts_and_loops() {
        let bat = bundled::move_bat();
        let p = bundled::wall_program(&bat);
        assert_eq!(p.action_count(), 5);
        assert_eq!(p.while_loops().len(), 2);
        let second = p.while_loops()[1];
        assert_eq!(p.loop_ordinal(second), Some(1));
    }

    #[test]
    fn partial_eval_selects_branch() {
        let near = Value::sym("near");
        let p = Program::If(
            Formula::cmp(crate::logic::CmpOp::Eq, Term::var("x"), Term::Const(Value::sym("near"))),
            Box::new(Program::Seq(vec![Program::act("a", vec![])])),
            Box::new(Program::Seq(vec![Program::act("b", vec![])])),
        );
        let q = p.substitute("x", &near).partial_eval();
        assert_eq!(q, Program::Seq(vec![Program::act("a", vec![])]));
        let r = p.substitute("x", &Value::sym("far")).partial_eval();
        assert_eq!(r, Program::Seq(vec![Program::act("b", vec![])]));
    }
}
