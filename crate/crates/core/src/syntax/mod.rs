//! Concrete syntax: parsers and printers for action theories (`.bat`),
//! programs (`.prog`), refinement mappings (`.map`) and nature scripts.
//!
//! All three file kinds share one lexical structure: `#` comments,
//! whitespace-insensitive tokens, rationals written `p/q`.
//!
//! ```text
//! sort Dist = int[-5..20]
//! sort Location = {near, far}
//! fluent Loc : Dist
//! action move(x: Dir, hidden y: Offset in {x - 1, x, x + 1})
//!   poss: x = 1 or x = -1
//!   likelihood: cond (y = x) -> 3/5 (abs(y - x) = 1) -> 1/5 else 0
//!   effects: Loc := Loc + y
//! initial actual Loc = 3
//! initial belief weight 1 : Loc = 3
//! ```
//!
//! Programs are statement lists: `a(args);`, `test F;`, `nil;`,
//! `if F { ... } else { ... }`, `while F { ... }` and `{ ... }` blocks.
//! Formulas use `not`/`and`/`or`, comparisons, `exists v:Sort (F)`,
//! `forall v:Sort (F)`, `know(F)` and `bel(F) >= p/q`; `Loc(x)` abbreviates
//! `Loc = x`.

mod diag;
mod lexer;
mod parser;
mod printer;

pub use diag::{Diagnostic, Diagnostics, Level, SourceSpan};
pub use printer::{print_bat, print_formula, print_mapping, print_program, print_term};

pub use crate::trace::{emit_trace, TraceStyle};

use crate::abstraction::RefinementMapping;
use crate::action::{Bat, Severity, Subject, ValidationReport};
use crate::logic::{Formula, Value};
use crate::program::Program;
use parser::{Parser, Scope};

fn run<T>(mut p: Parser, f: impl FnOnce(&mut Parser) -> Result<T, Diagnostic>) -> Result<T, Diagnostics> {
    match f(&mut p).and_then(|v| p.expect_eof().map(|_| v)) {
        Ok(v) => p.finish(v),
        Err(d) => p.fail(d),
    }
}

/// Parses an action theory without validating its probabilistic content.
pub fn parse_bat(text: &str, file: &str) -> Result<Bat, Diagnostics> {
    let p = Parser::new(text, file, Scope::default())?;
    run(p, |p| p.bat()).map(|(bat, _)| bat)
}

/// Parses and validates an action theory. Validation errors become
/// diagnostics pointing at the offending declaration; warnings are returned
/// in the report.
pub fn load_bat(text: &str, file: &str) -> Result<(Bat, ValidationReport), Diagnostics> {
    let p = Parser::new(text, file, Scope::default())?;
    let (bat, spans) = run(p, |p| p.bat())?;
    let report = bat.validate(None);
    let start = SourceSpan {
        file: file.into(),
        line: 1,
        column: 1,
        length: 0,
    };
    let errors: Vec<Diagnostic> = report
        .issues
        .iter()
        .filter(|i| i.severity == Severity::Error)
        .map(|i| {
            let span = match &i.subject {
                Subject::Action(name) => spans
                    .actions
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, s)| s.clone()),
                Subject::Initial => spans.initial.clone(),
                Subject::Theory => None,
            };
            Diagnostic::error(span.unwrap_or_else(|| start.clone()), i.message.clone())
        })
        .collect();
    if errors.is_empty() {
        Ok((bat, report))
    } else {
        Err(Diagnostics(errors))
    }
}

pub fn parse_program(text: &str, bat: &Bat, file: &str) -> Result<Program, Diagnostics> {
    let p = Parser::new(text, file, Scope::of(bat))?;
    run(p, |p| p.program())
}

/// Parses a single formula in the program formula grammar.
pub fn parse_formula(text: &str, bat: &Bat, file: &str) -> Result<Formula, Diagnostics> {
    let p = Parser::new(text, file, Scope::of(bat))?;
    run(p, |p| p.formula())
}

/// Parses a refinement mapping. Templates are resolved against the
/// low-level theory; high-level constants may appear as values, high-level
/// fluents and actions may not.
pub fn parse_mapping(text: &str, hl: &Bat, ll: &Bat, file: &str) -> Result<RefinementMapping, Diagnostics> {
    let mut scope = Scope::of(ll);
    scope.extra_sorts = hl.sorts.clone();
    for name in hl.fluents.iter().map(|f| &f.name).chain(hl.actions.iter().map(|a| &a.name)) {
        let known = ll.fluents.iter().any(|f| f.name == *name) || ll.actions.iter().any(|a| a.name == *name);
        if !known {
            scope.foreign.push(name.clone());
        }
    }
    let p = Parser::new(text, file, scope)?;
    run(p, |p| p.mapping(hl))
}

/// Parses a nature script: outcome values separated by whitespace or commas.
pub fn parse_nature(text: &str, file: &str) -> Result<Vec<Value>, Diagnostics> {
    let p = Parser::new(text, file, Scope::default())?;
    run(p, |p| p.values())
}

pub fn print_nature(values: &[Value]) -> String {
    let parts: Vec<String> = values.iter().map(Value::to_string).collect();
    format!("{}\n", parts.join(" "))
}

#[cfg(test)]
mod tests;
