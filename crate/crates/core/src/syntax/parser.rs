//! Recursive-descent parser shared by the three file kinds.
//!
//! Syntax errors abort parsing; semantic errors (unknown or duplicate
//! names, sort mismatches, nesting) are collected and parsing continues, so
//! one run reports as many problems as possible.

use std::collections::HashSet;
use std::sync::Arc;

use num_traits::One;

use super::diag::{Diagnostic, Diagnostics, SourceSpan};
use super::lexer::{tokenize, Tok, Token};
use crate::abstraction::{ActionMapping, FluentMapping, FluentTemplate, RefinementMapping};
use crate::action::{
    ActionSchema, Bat, Effect, FluentDecl, InitialWorld, Likelihood, Param, ParamRole,
};
use crate::logic::{
    eval_term, Carrier, CmpOp, Env, FluentRef, Formula, Sort, SortRef, Symbol, Term, Value, World,
};
use crate::program::Program;
use crate::rational::Rational;

type PResult<T> = Result<T, Diagnostic>;

const KEYWORDS: &[&str] = &[
    "sort", "fluent", "action", "hidden", "sensed", "in", "poss", "likelihood", "effects",
    "initial", "actual", "belief", "weight", "int", "cond", "else", "true", "false", "not", "and",
    "or", "exists", "forall", "know", "bel", "abs", "test", "if", "while", "nil", "case",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Names visible while parsing formulas, terms and programs.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scope {
    pub sorts: Vec<SortRef>,
    pub fluents: Vec<FluentDecl>,
    /// Action names with the sorts of their agent parameters.
    pub actions: Vec<(Symbol, Vec<SortRef>)>,
    /// Sorts whose constants may be used but whose fluents may not.
    pub extra_sorts: Vec<SortRef>,
    /// Names that exist only at the other abstraction level.
    pub foreign: Vec<Symbol>,
}

impl Scope {
    pub fn of(bat: &Bat) -> Scope {
        Scope {
            sorts: bat.sorts.clone(),
            fluents: bat.fluents.clone(),
            actions: bat
                .actions
                .iter()
                .map(|a| (a.name.clone(), a.agent_params().map(|p| p.sort.clone()).collect()))
                .collect(),
            extra_sorts: Vec::new(),
            foreign: Vec::new(),
        }
    }

    fn constant(&self, name: &str) -> Option<SortRef> {
        self.sorts.iter().chain(&self.extra_sorts).find_map(|s| match &s.carrier {
            Carrier::Enum(cs) if cs.iter().any(|c| &**c == name) => Some(s.clone()),
            _ => None,
        })
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Int,
    Enum(SortRef),
    Unknown,
}

fn kind_of(sort: &SortRef) -> Kind {
    if sort.is_int() {
        Kind::Int
    } else {
        Kind::Enum(sort.clone())
    }
}

fn placeholder_sort(name: &str) -> SortRef {
    Arc::new(Sort {
        name: Arc::from(name),
        carrier: Carrier::Int { lo: 0, hi: 0 },
    })
}

/// Spans of BAT declarations, used to attach validation issues.
#[derive(Clone, Debug, Default)]
pub(crate) struct BatSpans {
    pub actions: Vec<(Symbol, SourceSpan)>,
    pub initial: Option<SourceSpan>,
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: Arc<str>,
    diags: Vec<Diagnostic>,
    scope: Scope,
    vars: Vec<(Symbol, SortRef)>,
    epistemic_depth: usize,
}

impl Parser {
    pub fn new(text: &str, file: &str, scope: Scope) -> Result<Parser, Diagnostics> {
        let file: Arc<str> = Arc::from(file);
        let toks = tokenize(text, &file)?;
        Ok(Parser {
            toks,
            pos: 0,
            file,
            diags: Vec::new(),
            scope,
            vars: Vec::new(),
            epistemic_depth: 0,
        })
    }

    // ----- token helpers -----

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn span(&self) -> SourceSpan {
        self.token().span(&self.file)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(self.span(), format!("expected {expected}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok, expected: &str) -> PResult<Token> {
        if *self.peek() == t {
            Ok(self.advance())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        if self.is_kw(kw) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// A non-keyword identifier.
    fn name(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let span = self.span();
                self.advance();
                Ok((s, span))
            }
            Tok::Ident(s) => Err(Diagnostic::error(self.span(), format!("expected {what}, found keyword `{s}`"))),
            _ => Err(self.unexpected(what)),
        }
    }

    fn error(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, message));
    }

    fn last_span(&self) -> SourceSpan {
        let i = self.toks.len().saturating_sub(2);
        if self.toks[i].tok == Tok::Eof {
            SourceSpan {
                file: self.file.clone(),
                line: 1,
                column: 1,
                length: 0,
            }
        } else {
            self.toks[i].span(&self.file)
        }
    }

    pub fn finish<T>(self, value: T) -> Result<T, Diagnostics> {
        if self.diags.is_empty() {
            Ok(value)
        } else {
            Err(Diagnostics(self.diags))
        }
    }

    /// Converts a syntax error into the collected diagnostics.
    pub fn fail<T>(mut self, d: Diagnostic) -> Result<T, Diagnostics> {
        self.diags.push(d);
        Err(Diagnostics(self.diags))
    }

    pub fn expect_eof(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn lookup_sort(&mut self, name: &str, span: SourceSpan) -> SortRef {
        match self.scope.sorts.iter().chain(&self.scope.extra_sorts).find(|s| &*s.name == name) {
            Some(s) => s.clone(),
            None => {
                self.error(span, format!("unknown sort {name}"));
                placeholder_sort(name)
            }
        }
    }

    fn foreign_or_unknown(&mut self, name: &str, span: SourceSpan, what: &str) {
        if self.scope.foreign.iter().any(|f| &**f == name) {
            self.diags.push(
                Diagnostic::error(span, "high-level symbol in low-level template")
                    .with_hint(format!("{name} is declared only in the high-level theory")),
            );
        } else {
            self.error(span, format!("unknown {what} {name}"));
        }
    }

    // ----- numbers -----

    fn int_literal(&mut self) -> PResult<i64> {
        let negative = self.eat(&Tok::Minus);
        let span = self.span();
        match *self.peek() {
            Tok::Int(n) => {
                self.advance();
                let v = i64::try_from(n).map_err(|_| Diagnostic::error(span.clone(), "integer literal out of range"))?;
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    /// `p/q` or an integer.
    fn ratio(&mut self) -> PResult<Rational> {
        let span = self.span();
        let n = match *self.peek() {
            Tok::Int(n) => n,
            _ => return Err(self.unexpected("a rational p/q")),
        };
        self.advance();
        let d = if self.eat(&Tok::Slash) {
            match *self.peek() {
                Tok::Int(d) => {
                    self.advance();
                    d
                }
                _ => return Err(self.unexpected("a denominator")),
            }
        } else {
            1
        };
        if d == 0 {
            return Err(Diagnostic::error(span, "zero denominator"));
        }
        let big = |x: u64| num_bigint::BigInt::from(x);
        Ok(Rational::new(big(n), big(d)))
    }

    // ----- terms -----

    fn term(&mut self) -> PResult<(Term, Kind)> {
        let span = self.span();
        let (mut t, mut k) = self.unary()?;
        loop {
            let add = match self.peek() {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => break,
            };
            self.advance();
            let rspan = self.span();
            let (r, rk) = self.unary()?;
            self.require_int(&k, span.clone());
            self.require_int(&rk, rspan);
            t = if add {
                Term::Add(Box::new(t), Box::new(r))
            } else {
                Term::Sub(Box::new(t), Box::new(r))
            };
            k = Kind::Int;
        }
        Ok((t, k))
    }

    fn require_int(&mut self, k: &Kind, span: SourceSpan) {
        if let Kind::Enum(s) = k {
            self.error(span, format!("sort mismatch: arithmetic on a value of sort {}", s.name));
        }
    }

    fn unary(&mut self) -> PResult<(Term, Kind)> {
        if *self.peek() == Tok::Minus {
            let span = self.span();
            self.advance();
            if let Tok::Int(n) = *self.peek() {
                self.advance();
                let v = i64::try_from(n).map_err(|_| Diagnostic::error(span, "integer literal out of range"))?;
                return Ok((Term::int(-v), Kind::Int));
            }
            let (t, k) = self.unary()?;
            self.require_int(&k, span);
            return Ok((Term::Neg(Box::new(t)), Kind::Int));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<(Term, Kind)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                let v = i64::try_from(n).map_err(|_| Diagnostic::error(span, "integer literal out of range"))?;
                Ok((Term::int(v), Kind::Int))
            }
            Tok::LParen => {
                self.advance();
                let r = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(r)
            }
            Tok::Ident(s) if s == "abs" => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let (t, k) = self.term()?;
                self.require_int(&k, span);
                self.expect(Tok::RParen, "`)`")?;
                Ok((Term::Abs(Box::new(t)), Kind::Int))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(self.resolve(&s, span))
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn resolve(&mut self, name: &str, span: SourceSpan) -> (Term, Kind) {
        if let Some((v, sort)) = self.vars.iter().rev().find(|(v, _)| &**v == name) {
            return (Term::Var(v.clone()), kind_of(sort));
        }
        if let Some(index) = self.scope.fluents.iter().position(|f| &*f.name == name) {
            let decl = &self.scope.fluents[index];
            return (
                Term::Fluent(FluentRef {
                    name: decl.name.clone(),
                    index,
                }),
                kind_of(&decl.sort),
            );
        }
        if let Some(sort) = self.scope.constant(name) {
            return (Term::Const(Value::sym(name)), Kind::Enum(sort));
        }
        self.foreign_or_unknown(name, span, "symbol");
        (Term::Const(Value::sym(name)), Kind::Unknown)
    }

    // ----- formulas -----

    pub fn formula(&mut self) -> PResult<Formula> {
        let mut f = self.conjunction()?;
        while self.eat_kw("or") {
            let g = self.conjunction()?;
            f = Formula::or(f, g);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut f = self.negation()?;
        while self.eat_kw("and") {
            let g = self.negation()?;
            f = Formula::and(f, g);
        }
        Ok(f)
    }

    fn negation(&mut self) -> PResult<Formula> {
        if self.eat_kw("not") {
            return Ok(Formula::not(self.negation()?));
        }
        self.atom()
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    fn epistemic_body(&mut self, kw_span: SourceSpan) -> PResult<Formula> {
        if self.epistemic_depth > 0 {
            self.diags.push(
                Diagnostic::error(kw_span, "nested epistemic operator")
                    .with_hint("belief operators may only contain objective formulas"),
            );
        }
        self.expect(Tok::LParen, "`(`")?;
        self.epistemic_depth += 1;
        let body = self.formula();
        self.epistemic_depth -= 1;
        let body = body?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(body)
    }

    fn atom(&mut self) -> PResult<Formula> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.advance();
                    Ok(Formula::True)
                }
                "false" => {
                    self.advance();
                    Ok(Formula::False)
                }
                "know" => {
                    self.advance();
                    let body = self.epistemic_body(span)?;
                    Ok(Formula::know(body))
                }
                "bel" => {
                    self.advance();
                    let body = self.epistemic_body(span)?;
                    let op = self.cmp_op().ok_or_else(|| self.unexpected("a comparison operator"))?;
                    self.advance();
                    let bspan = self.span();
                    let bound = self.ratio()?;
                    if bound > Rational::one() {
                        self.error(bspan, "belief bound must lie in [0, 1]");
                    }
                    Ok(Formula::Bel(Box::new(body), op, bound))
                }
                "exists" | "forall" => {
                    self.advance();
                    let (var, _) = self.name("a variable name")?;
                    self.expect(Tok::Colon, "`:`")?;
                    let (sort_name, sspan) = self.name("a sort name")?;
                    let sort = self.lookup_sort(&sort_name, sspan);
                    self.expect(Tok::LParen, "`(`")?;
                    let var: Symbol = Arc::from(var.as_str());
                    self.vars.push((var.clone(), sort.clone()));
                    let body = self.formula();
                    self.vars.pop();
                    let body = Box::new(body?);
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(if s == "exists" {
                        Formula::Exists(var, sort, body)
                    } else {
                        Formula::Forall(var, sort, body)
                    })
                }
                _ if !is_keyword(&s)
                    && *self.peek_at(1) == Tok::LParen
                    && !self.vars.iter().any(|(v, _)| &**v == s.as_str())
                    && self.scope.fluents.iter().any(|f| &*f.name == s.as_str()) =>
                {
                    // Relational reading F(t) of a functional fluent: F = t.
                    self.advance();
                    let (lhs, lk) = self.resolve(&s, span.clone());
                    self.advance();
                    let (rhs, rk) = self.term()?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.check_cmp(CmpOp::Eq, &lk, &rk, span);
                    Ok(Formula::Cmp(CmpOp::Eq, lhs, rhs))
                }
                _ => self.comparison(),
            },
            Tok::LParen => {
                let (save_pos, save_diags, save_vars) = (self.pos, self.diags.len(), self.vars.len());
                self.advance();
                if let Ok(f) = self.formula() {
                    if self.eat(&Tok::RParen)
                        && self.cmp_op().is_none()
                        && !matches!(self.peek(), Tok::Plus | Tok::Minus)
                    {
                        return Ok(f);
                    }
                }
                self.pos = save_pos;
                self.diags.truncate(save_diags);
                self.vars.truncate(save_vars);
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let span = self.span();
        let (a, ka) = self.term()?;
        let op = self.cmp_op().ok_or_else(|| self.unexpected("a comparison operator"))?;
        self.advance();
        let (b, kb) = self.term()?;
        self.check_cmp(op, &ka, &kb, span);
        Ok(Formula::Cmp(op, a, b))
    }

    fn check_cmp(&mut self, op: CmpOp, a: &Kind, b: &Kind, span: SourceSpan) {
        match (a, b) {
            (Kind::Int, Kind::Enum(s)) | (Kind::Enum(s), Kind::Int) => {
                self.error(span, format!("sort mismatch: cannot compare an integer with a value of sort {}", s.name))
            }
            (Kind::Enum(s), Kind::Enum(t)) if s.name != t.name => {
                self.error(span, format!("sort mismatch: cannot compare values of sorts {} and {}", s.name, t.name))
            }
            (Kind::Enum(s), _) | (_, Kind::Enum(s)) if !op.is_equality() => {
                self.error(span, format!("ordering comparison on sort {}", s.name))
            }
            _ => {}
        }
    }

    /// A formula used as a program guard or test.
    fn guard(&mut self) -> PResult<Formula> {
        let span = self.span();
        let f = self.formula()?;
        if !f.is_objective() && !f.is_subjective() {
            self.diags.push(
                Diagnostic::error(span, "guard mixes objective conditions with belief operators")
                    .with_hint("wrap the objective part in know(...)"),
            );
        }
        Ok(f)
    }

    // ----- programs -----

    pub fn program(&mut self) -> PResult<Program> {
        let mut items = Vec::new();
        while !matches!(self.peek(), Tok::Eof | Tok::RBrace) {
            items.push(self.statement()?);
        }
        Ok(Program::Seq(items))
    }

    fn block(&mut self) -> PResult<Program> {
        self.expect(Tok::LBrace, "`{`")?;
        let p = self.program()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(p)
    }

    fn statement(&mut self) -> PResult<Program> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LBrace => self.block(),
            Tok::Ident(s) => match s.as_str() {
                "nil" => {
                    self.advance();
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Program::Nil)
                }
                "test" => {
                    self.advance();
                    let f = self.guard()?;
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Program::Test(f))
                }
                "if" => {
                    self.advance();
                    let c = self.guard()?;
                    let then = self.block()?;
                    let otherwise = if self.eat_kw("else") {
                        if self.is_kw("if") {
                            Program::Seq(vec![self.statement()?])
                        } else {
                            self.block()?
                        }
                    } else {
                        Program::Seq(vec![])
                    };
                    Ok(Program::If(c, Box::new(then), Box::new(otherwise)))
                }
                "while" => {
                    self.advance();
                    let c = self.guard()?;
                    let body = self.block()?;
                    Ok(Program::While(c, Box::new(body)))
                }
                _ if !is_keyword(&s) => {
                    self.advance();
                    self.expect(Tok::LParen, "`(`")?;
                    let mut args = Vec::new();
                    let mut arg_spans = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            arg_spans.push(self.span());
                            args.push(self.term()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::Semi, "`;`")?;
                    self.check_call(&s, &args, &arg_spans, span);
                    Ok(Program::Act {
                        name: Arc::from(s.as_str()),
                        args: args.into_iter().map(|(t, _)| t).collect(),
                    })
                }
                _ => Err(self.unexpected("a statement")),
            },
            _ => Err(self.unexpected("a statement")),
        }
    }

    fn check_call(&mut self, name: &str, args: &[(Term, Kind)], spans: &[SourceSpan], span: SourceSpan) {
        let Some((_, sorts)) = self.scope.actions.iter().find(|(a, _)| &**a == name).cloned() else {
            self.foreign_or_unknown(name, span, "action");
            return;
        };
        if sorts.len() != args.len() {
            self.error(
                span,
                format!("arity mismatch: {name} takes {} argument(s), got {}", sorts.len(), args.len()),
            );
            return;
        }
        for ((sort, (t, k)), aspan) in sorts.iter().zip(args).zip(spans) {
            match (kind_of(sort), k) {
                (Kind::Int, Kind::Enum(s)) => {
                    self.error(aspan.clone(), format!("sort mismatch: {name} expects an integer, got sort {}", s.name));
                    continue;
                }
                (Kind::Enum(s), Kind::Int) => {
                    self.error(aspan.clone(), format!("sort mismatch: {name} expects sort {}, got an integer", s.name));
                    continue;
                }
                _ => {}
            }
            if t.is_ground() {
                if let Ok(v) = eval_term(t, &World::default(), &Env::new()) {
                    if !sort.contains(&v) {
                        self.error(aspan.clone(), format!("argument {v} of {name} is outside sort {}", sort.name));
                    }
                }
            }
        }
    }

    // ----- action theories -----

    pub fn bat(&mut self) -> PResult<(Bat, BatSpans)> {
        let mut bat = Bat {
            sorts: Vec::new(),
            fluents: Vec::new(),
            actions: Vec::new(),
            initial_belief: Vec::new(),
            initial_actual: None,
        };
        let mut spans = BatSpans::default();
        let mut names: HashSet<String> = HashSet::new();
        loop {
            let span = self.span();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "sort" => {
                    self.advance();
                    let (name, nspan) = self.name("a sort name")?;
                    self.declare(&mut names, &name, nspan.clone());
                    self.expect(Tok::Eq, "`=`")?;
                    let carrier = if self.eat_kw("int") {
                        self.expect(Tok::LBracket, "`[`")?;
                        let lo = self.int_literal()?;
                        self.expect(Tok::DotDot, "`..`")?;
                        let hi = self.int_literal()?;
                        self.expect(Tok::RBracket, "`]`")?;
                        if lo > hi {
                            self.error(nspan.clone(), format!("sort {name} has an empty carrier"));
                        }
                        Carrier::Int { lo, hi }
                    } else {
                        self.expect(Tok::LBrace, "`int[..]` or `{`")?;
                        let mut cs: Vec<Symbol> = Vec::new();
                        loop {
                            let (c, cspan) = self.name("a constant name")?;
                            self.declare(&mut names, &c, cspan);
                            cs.push(Arc::from(c.as_str()));
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RBrace, "`}`")?;
                        Carrier::Enum(cs)
                    };
                    let sort = Arc::new(Sort {
                        name: Arc::from(name.as_str()),
                        carrier,
                    });
                    bat.sorts.push(sort.clone());
                    self.scope.sorts.push(sort);
                }
                Tok::Ident(kw) if kw == "fluent" => {
                    self.advance();
                    let (name, nspan) = self.name("a fluent name")?;
                    self.declare(&mut names, &name, nspan);
                    self.expect(Tok::Colon, "`:`")?;
                    let (sort_name, sspan) = self.name("a sort name")?;
                    let sort = self.lookup_sort(&sort_name, sspan);
                    let decl = FluentDecl {
                        name: Arc::from(name.as_str()),
                        sort,
                    };
                    bat.fluents.push(decl.clone());
                    self.scope.fluents.push(decl);
                }
                Tok::Ident(kw) if kw == "action" => {
                    self.advance();
                    let schema = self.action(&mut names)?;
                    spans.actions.push((schema.name.clone(), span));
                    self.scope
                        .actions
                        .push((schema.name.clone(), schema.agent_params().map(|p| p.sort.clone()).collect()));
                    bat.actions.push(schema);
                }
                Tok::Ident(kw) if kw == "initial" => {
                    self.advance();
                    spans.initial.get_or_insert(span.clone());
                    if self.eat_kw("actual") {
                        let assignments = self.assignments()?;
                        if bat.initial_actual.is_some() {
                            self.error(span, "duplicate initial actual declaration");
                        }
                        bat.initial_actual = Some(assignments);
                    } else if self.eat_kw("belief") {
                        self.expect_kw("weight")?;
                        let weight = self.ratio()?;
                        self.expect(Tok::Colon, "`:`")?;
                        let assignments = self.assignments()?;
                        bat.initial_belief.push(InitialWorld { weight, assignments });
                    } else {
                        return Err(self.unexpected("`actual` or `belief`"));
                    }
                }
                _ => return Err(self.unexpected("a declaration (sort, fluent, action or initial)")),
            }
        }
        Ok((bat, spans))
    }

    fn declare(&mut self, names: &mut HashSet<String>, name: &str, span: SourceSpan) {
        if !names.insert(name.to_string()) {
            self.error(span, format!("duplicate declaration of {name}"));
        }
    }

    fn action(&mut self, names: &mut HashSet<String>) -> PResult<ActionSchema> {
        let (name, nspan) = self.name("an action name")?;
        self.declare(names, &name, nspan);
        self.expect(Tok::LParen, "`(`")?;
        let mut params: Vec<Param> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let role = if self.eat_kw("hidden") {
                    ParamRole::Hidden
                } else if self.eat_kw("sensed") {
                    ParamRole::Sensed
                } else {
                    ParamRole::Agent
                };
                let (pname, pspan) = self.name("a parameter name")?;
                if params.iter().any(|p| &*p.name == pname.as_str()) {
                    self.error(pspan.clone(), format!("duplicate parameter {pname}"));
                }
                if role == ParamRole::Agent && params.iter().any(|p| p.role.is_nature()) {
                    self.error(pspan.clone(), "agent parameters must precede nature parameters");
                }
                self.expect(Tok::Colon, "`:`")?;
                let (sort_name, sspan) = self.name("a sort name")?;
                let sort = self.lookup_sort(&sort_name, sspan);
                let domain = if self.eat_kw("in") {
                    if role == ParamRole::Agent {
                        self.error(pspan.clone(), "only nature parameters take an outcome domain");
                    }
                    self.expect(Tok::LBrace, "`{`")?;
                    // Outcome domains may refer to agent parameters only.
                    let saved = self.vars.len();
                    for p in params.iter().filter(|p| p.role == ParamRole::Agent) {
                        self.vars.push((p.name.clone(), p.sort.clone()));
                    }
                    let mut exprs = Vec::new();
                    let result: PResult<()> = (|| {
                        loop {
                            exprs.push(self.term()?.0);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        Ok(())
                    })();
                    self.vars.truncate(saved);
                    result?;
                    self.expect(Tok::RBrace, "`}`")?;
                    Some(exprs)
                } else {
                    None
                };
                params.push(Param {
                    name: Arc::from(pname.as_str()),
                    sort,
                    role,
                    domain,
                });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;

        let saved = self.vars.len();
        for p in &params {
            self.vars.push((p.name.clone(), p.sort.clone()));
        }
        let clauses = self.clauses();
        self.vars.truncate(saved);
        let (poss, likelihood, effects) = clauses?;
        Ok(ActionSchema {
            name: Arc::from(name.as_str()),
            params,
            poss: poss.unwrap_or(Formula::True),
            likelihood: likelihood.unwrap_or_else(|| Likelihood::Const(Rational::one())),
            effects,
        })
    }

    #[allow(clippy::type_complexity)]
    fn clauses(&mut self) -> PResult<(Option<Formula>, Option<Likelihood>, Vec<Effect>)> {
        let (mut poss, mut likelihood, mut effects) = (None, None, None);
        loop {
            let span = self.span();
            if self.eat_kw("poss") {
                self.expect(Tok::Colon, "`:`")?;
                let f = self.objective()?;
                if poss.replace(f).is_some() {
                    self.error(span, "duplicate poss clause");
                }
            } else if self.eat_kw("likelihood") {
                self.expect(Tok::Colon, "`:`")?;
                let l = self.likelihood()?;
                if likelihood.replace(l).is_some() {
                    self.error(span, "duplicate likelihood clause");
                }
            } else if self.eat_kw("effects") {
                self.expect(Tok::Colon, "`:`")?;
                let mut list: Vec<Effect> = Vec::new();
                loop {
                    let (fname, fspan) = self.name("a fluent name")?;
                    self.expect(Tok::Assign, "`:=`")?;
                    let tspan = self.span();
                    let (value, k) = self.term()?;
                    match self.scope.fluents.iter().position(|f| &*f.name == fname.as_str()) {
                        Some(index) => {
                            let fk = kind_of(&self.scope.fluents[index].sort);
                            self.check_cmp(CmpOp::Eq, &fk, &k, tspan);
                            if list.iter().any(|e| e.fluent.index == index) {
                                self.error(fspan, format!("fluent {fname} updated twice"));
                            }
                            list.push(Effect {
                                fluent: FluentRef {
                                    name: Arc::from(fname.as_str()),
                                    index,
                                },
                                value,
                            });
                        }
                        None => self.error(fspan, format!("unknown fluent {fname}")),
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                if effects.replace(list).is_some() {
                    self.error(span, "duplicate effects clause");
                }
            } else {
                break;
            }
        }
        Ok((poss, likelihood, effects.unwrap_or_default()))
    }

    fn objective(&mut self) -> PResult<Formula> {
        let span = self.span();
        let f = self.formula()?;
        if !f.is_objective() {
            self.error(span, "belief operator in an action theory");
        }
        Ok(f)
    }

    fn likelihood(&mut self) -> PResult<Likelihood> {
        if self.eat_kw("cond") {
            let mut arms = Vec::new();
            while *self.peek() == Tok::LParen {
                self.advance();
                let c = self.objective()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Arrow, "`->`")?;
                arms.push((c, self.likelihood()?));
            }
            if arms.is_empty() {
                return Err(self.unexpected("a condition `(...)`"));
            }
            self.expect_kw("else")?;
            let otherwise = self.likelihood()?;
            Ok(Likelihood::Cond(arms, Box::new(otherwise)))
        } else {
            Ok(Likelihood::Const(self.ratio()?))
        }
    }

    fn assignments(&mut self) -> PResult<Vec<(FluentRef, Value)>> {
        let mut out: Vec<(FluentRef, Value)> = Vec::new();
        loop {
            let (fname, fspan) = self.name("a fluent name")?;
            self.expect(Tok::Eq, "`=`")?;
            let vspan = self.span();
            let value = self.value()?;
            match self.scope.fluents.iter().position(|f| &*f.name == fname.as_str()) {
                Some(index) => {
                    let sort = self.scope.fluents[index].sort.clone();
                    if !sort.contains(&value) {
                        self.error(vspan, format!("value {value} is outside sort {}", sort.name));
                    }
                    if out.iter().any(|(f, _)| f.index == index) {
                        self.error(fspan, format!("fluent {fname} assigned twice"));
                    }
                    out.push((
                        FluentRef {
                            name: Arc::from(fname.as_str()),
                            index,
                        },
                        value,
                    ));
                }
                None => self.error(fspan, format!("unknown fluent {fname}")),
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn value(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(Value::sym(&s))
            }
            Tok::Int(_) | Tok::Minus => Ok(Value::Int(self.int_literal()?)),
            _ => Err(self.unexpected("a value")),
        }
    }

    // ----- nature scripts -----

    pub fn values(&mut self) -> PResult<Vec<Value>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            out.push(self.value()?);
            self.eat(&Tok::Comma);
        }
        Ok(out)
    }

    // ----- mappings -----

    pub fn mapping(&mut self, hl: &Bat) -> PResult<RefinementMapping> {
        let mut fluents: Vec<FluentMapping> = Vec::new();
        let mut actions: Vec<ActionMapping> = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "fluent" => {
                    self.advance();
                    let (name, nspan) = self.name("a high-level fluent name")?;
                    self.expect(Tok::LParen, "`(`")?;
                    let (var, _) = self.name("a variable name")?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::Arrow, "`->`")?;
                    let sort = match hl.fluents.iter().find(|f| &*f.name == name.as_str()) {
                        Some(f) => f.sort.clone(),
                        None => {
                            self.error(nspan.clone(), format!("unknown high-level fluent {name}"));
                            placeholder_sort(&name)
                        }
                    };
                    if fluents.iter().any(|m| &*m.fluent == name.as_str()) {
                        self.error(nspan.clone(), format!("duplicate entry for fluent {name}"));
                    }
                    let var: Symbol = Arc::from(var.as_str());
                    let template = if self.eat_kw("case") {
                        let (cv, cspan) = self.name("the template variable")?;
                        if *cv != *var {
                            self.error(cspan, format!("case must branch on {var}"));
                        }
                        self.expect(Tok::LBrace, "`{`")?;
                        let mut arms: Vec<(Value, Formula)> = Vec::new();
                        while *self.peek() != Tok::RBrace {
                            let vspan = self.span();
                            let value = self.value()?;
                            if !sort.contains(&value) {
                                self.error(vspan.clone(), format!("{value} is not a value of sort {}", sort.name));
                            }
                            if arms.iter().any(|(v, _)| *v == value) {
                                self.error(vspan, format!("duplicate case {value}"));
                            }
                            self.expect(Tok::Colon, "`:`")?;
                            let f = self.template_formula(&var, &sort)?;
                            self.expect(Tok::Semi, "`;`")?;
                            arms.push((value, f));
                        }
                        self.expect(Tok::RBrace, "`}`")?;
                        for v in sort.values() {
                            if !arms.iter().any(|(a, _)| *a == v) {
                                self.error(nspan.clone(), format!("case for {name} does not cover {v}"));
                            }
                        }
                        FluentTemplate::Case(arms)
                    } else {
                        FluentTemplate::Open(self.template_formula(&var, &sort)?)
                    };
                    fluents.push(FluentMapping {
                        fluent: Arc::from(name.as_str()),
                        var,
                        template,
                    });
                }
                Tok::Ident(kw) if kw == "action" => {
                    self.advance();
                    let (name, nspan) = self.name("a high-level action name")?;
                    self.expect(Tok::LParen, "`(`")?;
                    let mut params: Vec<(String, SourceSpan)> = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            params.push(self.name("a parameter name")?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::Arrow, "`->`")?;
                    let sorts: Vec<SortRef> = match hl.actions.iter().find(|a| &*a.name == name.as_str()) {
                        Some(schema) => {
                            let sorts: Vec<SortRef> = schema.agent_params().map(|p| p.sort.clone()).collect();
                            if sorts.len() != params.len() {
                                self.error(
                                    nspan.clone(),
                                    format!("arity mismatch: {name} takes {} argument(s), got {}", sorts.len(), params.len()),
                                );
                            }
                            sorts
                        }
                        None => {
                            self.error(nspan.clone(), format!("unknown high-level action {name}"));
                            Vec::new()
                        }
                    };
                    if actions.iter().any(|m| &*m.action == name.as_str()) {
                        self.error(nspan.clone(), format!("duplicate entry for action {name}"));
                    }
                    let saved = self.vars.len();
                    for (i, (p, _)) in params.iter().enumerate() {
                        let sort = sorts.get(i).cloned().unwrap_or_else(|| placeholder_sort("?"));
                        self.vars.push((Arc::from(p.as_str()), sort));
                    }
                    let body = self.block();
                    self.vars.truncate(saved);
                    actions.push(ActionMapping {
                        action: Arc::from(name.as_str()),
                        params: params.iter().map(|(p, _)| Arc::from(p.as_str())).collect(),
                        body: body?,
                    });
                }
                _ => return Err(self.unexpected("`fluent` or `action`")),
            }
        }
        let span = self.last_span();
        for f in &hl.fluents {
            if !fluents.iter().any(|m| m.fluent == f.name) {
                self.error(span.clone(), format!("unmapped fluent {}", f.name));
            }
        }
        for a in &hl.actions {
            if !actions.iter().any(|m| m.action == a.name) {
                self.error(span.clone(), format!("unmapped action {}", a.name));
            }
        }
        Ok(RefinementMapping { fluents, actions })
    }

    fn template_formula(&mut self, var: &Symbol, sort: &SortRef) -> PResult<Formula> {
        self.vars.push((var.clone(), sort.clone()));
        let f = self.objective();
        self.vars.pop();
        f
    }
}

