//! Canonical printers. Output reparses to a structurally equal value.

use std::fmt::Write as _;

use num_traits::One;

use crate::abstraction::{FluentTemplate, RefinementMapping};
use crate::action::{ActionSchema, Bat, Likelihood, ParamRole};
use crate::logic::{Carrier, Formula, Term, Value};
use crate::program::Program;
use crate::rational::format_ratio;

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    term(t, &mut out, 0);
    out
}

/// Precedence levels: 0 sum, 1 unary operand.
fn term(t: &Term, out: &mut String, level: u8) {
    match t {
        Term::Const(v) => out.push_str(&v.to_string()),
        Term::Var(v) => out.push_str(v),
        Term::Fluent(f) => out.push_str(&f.name),
        Term::Neg(a) => {
            out.push('-');
            match &**a {
                Term::Const(Value::Int(n)) if *n >= 0 => {
                    let _ = write!(out, "({n})");
                }
                _ => term(a, out, 1),
            }
        }
        Term::Abs(a) => {
            out.push_str("abs(");
            term(a, out, 0);
            out.push(')');
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            if level > 0 {
                out.push('(');
            }
            term(a, out, 0);
            out.push_str(if matches!(t, Term::Add(..)) { " + " } else { " - " });
            term(b, out, 1);
            if level > 0 {
                out.push(')');
            }
        }
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    formula(f, &mut out, 0);
    out
}

/// Precedence levels: 0 disjunction, 1 conjunction, 2 negation operand.
fn formula(f: &Formula, out: &mut String, level: u8) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Cmp(op, a, b) => {
            term(a, out, 0);
            let _ = write!(out, " {} ", op.symbol());
            term(b, out, 0);
        }
        Formula::Not(g) => {
            out.push_str("not ");
            formula(g, out, 2);
        }
        Formula::And(a, b) => {
            if level > 1 {
                out.push('(');
            }
            formula(a, out, 1);
            out.push_str(" and ");
            formula(b, out, 2);
            if level > 1 {
                out.push(')');
            }
        }
        Formula::Or(a, b) => {
            if level > 0 {
                out.push('(');
            }
            formula(a, out, 0);
            out.push_str(" or ");
            formula(b, out, 1);
            if level > 0 {
                out.push(')');
            }
        }
        Formula::Exists(v, s, body) | Formula::Forall(v, s, body) => {
            let q = if matches!(f, Formula::Exists(..)) { "exists" } else { "forall" };
            let _ = write!(out, "{q} {v}:{} (", s.name);
            formula(body, out, 0);
            out.push(')');
        }
        Formula::Know(body) => {
            out.push_str("know(");
            formula(body, out, 0);
            out.push(')');
        }
        Formula::Bel(body, op, r) => {
            out.push_str("bel(");
            formula(body, out, 0);
            let _ = write!(out, ") {} {}", op.symbol(), format_ratio(r));
        }
    }
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    match p {
        Program::Seq(items) => {
            for item in items {
                statement(item, &mut out, 0);
            }
        }
        other => statement(other, &mut out, 0),
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn block(p: &Program, out: &mut String, depth: usize) {
    let items: Vec<&Program> = match p {
        Program::Seq(items) => items.iter().collect(),
        other => vec![other],
    };
    if items.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for item in items {
        statement(item, out, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn statement(p: &Program, out: &mut String, depth: usize) {
    indent(out, depth);
    match p {
        Program::Nil => out.push_str("nil;"),
        Program::Act { name, args } => {
            let args: Vec<String> = args.iter().map(print_term).collect();
            let _ = write!(out, "{name}({});", args.join(", "));
        }
        Program::Test(f) => {
            let _ = write!(out, "test {};", print_formula(f));
        }
        Program::Seq(_) => block(p, out, depth),
        Program::If(c, t, e) => {
            let _ = write!(out, "if {} ", print_formula(c));
            block(t, out, depth);
            if !matches!(&**e, Program::Seq(items) if items.is_empty()) {
                out.push_str(" else ");
                block(e, out, depth);
            }
        }
        Program::While(c, body) => {
            let _ = write!(out, "while {} ", print_formula(c));
            block(body, out, depth);
        }
    }
    out.push('\n');
}

fn likelihood(l: &Likelihood, out: &mut String, depth: usize) {
    match l {
        Likelihood::Const(r) => out.push_str(&format_ratio(r)),
        Likelihood::Cond(arms, otherwise) => {
            out.push_str("cond");
            for (c, v) in arms {
                out.push('\n');
                indent(out, depth + 1);
                let _ = write!(out, "({}) -> ", print_formula(c));
                likelihood(v, out, depth + 1);
            }
            out.push('\n');
            indent(out, depth + 1);
            out.push_str("else ");
            likelihood(otherwise, out, depth + 1);
        }
    }
}

fn action(schema: &ActionSchema, out: &mut String) {
    let params: Vec<String> = schema
        .params
        .iter()
        .map(|p| {
            let role = match p.role {
                ParamRole::Agent => "",
                ParamRole::Sensed => "sensed ",
                ParamRole::Hidden => "hidden ",
            };
            let mut s = format!("{role}{}: {}", p.name, p.sort.name);
            if let Some(domain) = &p.domain {
                let exprs: Vec<String> = domain.iter().map(print_term).collect();
                let _ = write!(s, " in {{{}}}", exprs.join(", "));
            }
            s
        })
        .collect();
    let _ = writeln!(out, "action {}({})", schema.name, params.join(", "));
    if schema.poss != Formula::True {
        let _ = writeln!(out, "  poss: {}", print_formula(&schema.poss));
    }
    if !matches!(&schema.likelihood, Likelihood::Const(r) if r.is_one()) {
        out.push_str("  likelihood: ");
        likelihood(&schema.likelihood, out, 1);
        out.push('\n');
    }
    if !schema.effects.is_empty() {
        let effects: Vec<String> = schema
            .effects
            .iter()
            .map(|e| format!("{} := {}", e.fluent.name, print_term(&e.value)))
            .collect();
        let _ = writeln!(out, "  effects: {}", effects.join(", "));
    }
}

pub fn print_bat(bat: &Bat) -> String {
    let mut out = String::new();
    for s in &bat.sorts {
        match &s.carrier {
            Carrier::Int { lo, hi } => {
                let _ = writeln!(out, "sort {} = int[{lo}..{hi}]", s.name);
            }
            Carrier::Enum(cs) => {
                let cs: Vec<&str> = cs.iter().map(|c| &**c).collect();
                let _ = writeln!(out, "sort {} = {{{}}}", s.name, cs.join(", "));
            }
        }
    }
    if !bat.fluents.is_empty() {
        out.push('\n');
    }
    for f in &bat.fluents {
        let _ = writeln!(out, "fluent {} : {}", f.name, f.sort.name);
    }
    for a in &bat.actions {
        out.push('\n');
        action(a, &mut out);
    }
    let assignments = |a: &[(crate::logic::FluentRef, Value)]| -> String {
        a.iter().map(|(f, v)| format!("{} = {v}", f.name)).collect::<Vec<_>>().join(", ")
    };
    if bat.initial_actual.is_some() || !bat.initial_belief.is_empty() {
        out.push('\n');
    }
    if let Some(actual) = &bat.initial_actual {
        let _ = writeln!(out, "initial actual {}", assignments(actual));
    }
    for w in &bat.initial_belief {
        let _ = writeln!(out, "initial belief weight {} : {}", format_ratio(&w.weight), assignments(&w.assignments));
    }
    out
}

pub fn print_mapping(m: &RefinementMapping) -> String {
    let mut out = String::new();
    for (i, f) in m.fluents.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match &f.template {
            FluentTemplate::Case(arms) => {
                let _ = writeln!(out, "fluent {}({}) -> case {} {{", f.fluent, f.var, f.var);
                for (v, g) in arms {
                    let _ = writeln!(out, "  {v}: {};", print_formula(g));
                }
                out.push_str("}\n");
            }
            FluentTemplate::Open(g) => {
                let _ = writeln!(out, "fluent {}({}) -> {}", f.fluent, f.var, print_formula(g));
            }
        }
    }
    for a in &m.actions {
        out.push('\n');
        let params: Vec<&str> = a.params.iter().map(|p| &**p).collect();
        let _ = write!(out, "action {}({}) -> ", a.action, params.join(", "));
        block(&a.body, &mut out, 0);
        out.push('\n');
    }
    out
}
