//! Action schemas and plan library, read from a line-oriented text file.
//!
//! ```text
//! tracelab-domain 1
//!
//! action quick-deposit ?c ?a ?t
//!   pre account-owner(?c, ?a)
//!   pre transaction-amount(?t) > 0
//!   add transaction-destination(?t, ?a)
//!   inc balance(?a) += transaction-amount(?t)
//! end
//!
//! template deposit
//!   goal transaction-destination(?t, ?a)
//!   bind ?a : has-card(?c, ?a)
//!   draw $x log $deposit_min $deposit_max
//!   fresh ?t transaction
//!   do quick-deposit(?c, ?a, ?t) with transaction-amount(?t) = $x
//! end
//! ```
//!
//! Action lines: `pre COND`, `add LIT`, `del LIT`, `set F = EXPR`,
//! `inc F += EXPR`, `inc F -= EXPR`. A condition is a literal, `not LIT`,
//! `distinct T T` or `EXPR CMP EXPR`. Expressions use numbers, `$params`,
//! function atoms, `+ - *` and parentheses.
//!
//! Template lines: `goal CONDS`, `fresh ?x TYPE`, `draw $x log|uniform|int LO HI`,
//! `let $x = EXPR`, `let ?x = ?y`, `init LIT [= EXPR]`,
//! `bind ?x.. : CONDS [else NAME(args)]`, `need CONDS else NAME(args) [max N]`,
//! `do ACTION(args) [with LIT [= EXPR]; ...]`, and the blocks
//! `repeat EXPR … end` and `split $x of EXPR below EXPR … end`.
//! `?c` is always the simulated customer. Arguments without `?` are constants.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use crate::amount::Amount;
use crate::catalog::{Catalog, SymbolKind};
use crate::error::{Error, Result};

pub const DOMAIN_FORMAT: &str = "tracelab-domain";
pub const DOMAIN_VERSION: u32 = 1;
pub const DOMAIN_DATA: &str = include_str!("../../data/domain.txt");

/// The variable bound to the simulated customer in every template.
pub const AGENT_VAR: &str = "c";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LitPat {
    pub name: String,
    pub args: Vec<Term>,
}

impl fmt::Display for LitPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Amount),
    Param(String),
    Func(LitPat),
    Bin(Box<Expr>, Op, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, a: Amount, b: Amount) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Pos(LitPat),
    Neg(LitPat),
    Distinct(Term, Term),
    Num(Expr, Cmp, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Add(LitPat),
    Del(LitPat),
    Set(LitPat, Expr),
    Inc(LitPat, Expr),
    Dec(LitPat, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub pre: Vec<Cond>,
    pub effects: Vec<Effect>,
    pub line: usize,
}

/// A literal to place in the state, with a value for function atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Inject {
    pub lit: LitPat,
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    LogUniform(Expr, Expr),
    Uniform(Expr, Expr),
    Int(Expr, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub template: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Goal(Vec<Cond>),
    Fresh { var: String, kind: String },
    Draw { param: String, dist: Dist },
    LetNum { param: String, expr: Expr },
    LetVar { var: String, from: String },
    Init(Inject),
    Bind { vars: Vec<String>, conds: Vec<Cond>, repair: Option<Call> },
    Need { conds: Vec<Cond>, repair: Call, max: usize },
    Do { action: String, args: Vec<Term>, with: Vec<Inject> },
    Repeat { count: Expr, body: Vec<Stmt> },
    Split { param: String, total: Expr, below: Expr, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    /// Variables a caller may pre-bind, in call-argument order.
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub version: u32,
    pub actions: BTreeMap<String, ActionSchema>,
    pub templates: BTreeMap<String, Template>,
}

impl Domain {
    /// The embedded domain, parsed and validated once.
    pub fn builtin() -> &'static Domain {
        static BUILTIN: OnceLock<Domain> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            let d = Domain::parse(DOMAIN_DATA).expect("embedded domain parses");
            d.validate(Catalog::builtin()).expect("embedded domain is valid");
            d
        })
    }

    pub fn load(path: &Path) -> Result<Domain> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d = Domain::parse(&text)?;
        d.validate(Catalog::builtin())?;
        Ok(d)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.get(name)
    }

    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.get(name)
    }

    pub fn parse(text: &str) -> Result<Domain> {
        Parser::new(text)?.domain()
    }

    /// Checks every symbol against the catalog, variable scoping, template
    /// references, and that every catalog action has a schema.
    pub fn validate(&self, cat: &Catalog) -> Result<()> {
        for a in self.actions.values() {
            let err = |msg: String| Error::Domain { line: a.line, msg };
            check_symbol(cat, &a.name, a.params.len(), SymbolKind::Action).map_err(err)?;
            let declared: HashSet<&str> = a.params.iter().map(String::as_str).collect();
            let mut syms = Vec::new();
            for c in &a.pre {
                cond_symbols(c, &mut syms);
            }
            for e in &a.effects {
                effect_symbols(e, &mut syms);
            }
            for (name, arity, kind, vars) in syms {
                check_symbol(cat, &name, arity, kind).map_err(err)?;
                if let Some(v) = vars.iter().find(|v| !declared.contains(v.as_str())) {
                    return Err(err(format!("`?{v}` is not a parameter of `{}`", a.name)));
                }
            }
        }
        for row in cat.rows().iter().filter(|r| r.kind == SymbolKind::Action) {
            if !self.actions.contains_key(&row.name) {
                return Err(Error::Domain {
                    line: 0,
                    msg: format!("no schema for action `{}`", row.name),
                });
            }
        }
        for t in self.templates.values() {
            let mut bound: HashSet<String> = t.params.iter().cloned().collect();
            bound.insert(AGENT_VAR.to_string());
            self.check_block(cat, t, &t.body, &mut bound)
                .map_err(|msg| Error::Domain { line: t.line, msg })?;
        }
        Ok(())
    }

    fn check_call(&self, c: &Call, bound: &HashSet<String>) -> std::result::Result<(), String> {
        let t = self
            .templates
            .get(&c.template)
            .ok_or_else(|| format!("unknown template `{}`", c.template))?;
        if c.args.len() > t.params.len() {
            return Err(format!("`{}` takes {} arguments", t.name, t.params.len()));
        }
        check_terms_bound(&c.args, bound)
    }

    fn check_block(
        &self,
        cat: &Catalog,
        t: &Template,
        body: &[Stmt],
        bound: &mut HashSet<String>,
    ) -> std::result::Result<(), String> {
        for s in body {
            let mut syms = Vec::new();
            match s {
                Stmt::Goal(conds) => conds.iter().for_each(|c| cond_symbols(c, &mut syms)),
                Stmt::Fresh { var, .. } => {
                    bound.insert(var.clone());
                }
                Stmt::Draw { dist, .. } => match dist {
                    Dist::LogUniform(a, b) | Dist::Uniform(a, b) | Dist::Int(a, b) => {
                        expr_symbols(a, &mut syms);
                        expr_symbols(b, &mut syms);
                    }
                },
                Stmt::LetNum { expr, .. } => expr_symbols(expr, &mut syms),
                Stmt::LetVar { var, from } => {
                    if !bound.contains(from) {
                        return Err(format!("`?{from}` used before it is bound in `{}`", t.name));
                    }
                    bound.insert(var.clone());
                }
                Stmt::Init(i) => inject_symbols(i, &mut syms),
                Stmt::Bind { vars, conds, repair } => {
                    if let Some(c) = repair {
                        self.check_call(c, bound)?;
                    }
                    conds.iter().for_each(|c| cond_symbols(c, &mut syms));
                    for v in vars {
                        bound.insert(v.clone());
                    }
                }
                Stmt::Need { conds, repair, .. } => {
                    self.check_call(repair, bound)?;
                    conds.iter().for_each(|c| cond_symbols(c, &mut syms));
                }
                Stmt::Do { action, args, with } => {
                    check_symbol(cat, action, args.len(), SymbolKind::Action)?;
                    if !self.actions.contains_key(action) {
                        return Err(format!("no schema for `{action}`"));
                    }
                    check_terms_bound(args, bound)?;
                    with.iter().for_each(|i| inject_symbols(i, &mut syms));
                }
                Stmt::Repeat { count, body } => {
                    expr_symbols(count, &mut syms);
                    self.check_block(cat, t, body, bound)?;
                }
                Stmt::Split { total, below, body, .. } => {
                    expr_symbols(total, &mut syms);
                    expr_symbols(below, &mut syms);
                    self.check_block(cat, t, body, bound)?;
                }
            }
            for (name, arity, kind, _) in syms {
                check_symbol(cat, &name, arity, kind)?;
            }
        }
        Ok(())
    }
}

fn check_terms_bound(args: &[Term], bound: &HashSet<String>) -> std::result::Result<(), String> {
    for a in args {
        if let Term::Var(v) = a {
            if !bound.contains(v) {
                return Err(format!("`?{v}` used before it is bound"));
            }
        }
    }
    Ok(())
}

fn check_symbol(cat: &Catalog, name: &str, arity: usize, kind: SymbolKind) -> std::result::Result<(), String> {
    let row = cat.get(name).ok_or_else(|| format!("`{name}` is not in the catalog"))?;
    if row.kind != kind {
        return Err(format!("`{name}` is a {:?}, used as a {:?}", row.kind, kind));
    }
    if row.args.len() != arity {
        return Err(format!("`{name}` takes {} arguments, got {arity}", row.args.len()));
    }
    Ok(())
}

type SymUse = (String, usize, SymbolKind, Vec<String>);

fn pat_use(p: &LitPat, kind: SymbolKind) -> SymUse {
    let vars = p
        .args
        .iter()
        .filter_map(|a| match a {
            Term::Var(v) => Some(v.clone()),
            Term::Const(_) => None,
        })
        .collect();
    (p.name.clone(), p.args.len(), kind, vars)
}

fn expr_symbols(e: &Expr, out: &mut Vec<SymUse>) {
    match e {
        Expr::Num(_) | Expr::Param(_) => {}
        Expr::Func(p) => out.push(pat_use(p, SymbolKind::Function)),
        Expr::Bin(a, _, b) => {
            expr_symbols(a, out);
            expr_symbols(b, out);
        }
    }
}

fn cond_symbols(c: &Cond, out: &mut Vec<SymUse>) {
    match c {
        Cond::Pos(p) | Cond::Neg(p) => out.push(pat_use(p, SymbolKind::Predicate)),
        Cond::Distinct(..) => {}
        Cond::Num(a, _, b) => {
            expr_symbols(a, out);
            expr_symbols(b, out);
        }
    }
}

fn effect_symbols(e: &Effect, out: &mut Vec<SymUse>) {
    match e {
        Effect::Add(p) | Effect::Del(p) => out.push(pat_use(p, SymbolKind::Predicate)),
        Effect::Set(p, x) | Effect::Inc(p, x) | Effect::Dec(p, x) => {
            out.push(pat_use(p, SymbolKind::Function));
            expr_symbols(x, out);
        }
    }
}

fn inject_symbols(i: &Inject, out: &mut Vec<SymUse>) {
    match &i.value {
        None => out.push(pat_use(&i.lit, SymbolKind::Predicate)),
        Some(v) => {
            out.push(pat_use(&i.lit, SymbolKind::Function));
            expr_symbols(v, out);
        }
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Param(String),
    Num(String),
    P(&'static str),
}

fn tokenize(line: &str) -> std::result::Result<Vec<Tok>, String> {
    let ident = |c: char| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.';
    let cs: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        let next = cs.get(i + 1).copied();
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let two = |s: &'static str| Tok::P(s);
        let (tok, len) = match (c, next) {
            ('<', Some('=')) => (two("<="), 2),
            ('>', Some('=')) => (two(">="), 2),
            ('+', Some('=')) => (two("+="), 2),
            ('-', Some('=')) => (two("-="), 2),
            ('<', _) => (two("<"), 1),
            ('>', _) => (two(">"), 1),
            ('=', _) => (two("="), 1),
            ('+', _) => (two("+"), 1),
            ('-', _) => (two("-"), 1),
            ('*', _) => (two("*"), 1),
            ('(', _) => (two("("), 1),
            (')', _) => (two(")"), 1),
            (',', _) => (two(","), 1),
            (':', _) => (two(":"), 1),
            (';', _) => (two(";"), 1),
            ('?' | '$', _) => {
                let mut j = i + 1;
                while j < cs.len() && ident(cs[j]) {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(format!("empty name after `{c}`"));
                }
                let name: String = cs[i + 1..j].iter().collect();
                let t = if c == '?' { Tok::Var(name) } else { Tok::Param(name) };
                (t, j - i)
            }
            (d, _) if d.is_ascii_digit() => {
                let mut j = i;
                while j < cs.len() && (cs[j].is_ascii_digit() || cs[j] == '.') {
                    j += 1;
                }
                (Tok::Num(cs[i..j].iter().collect()), j - i)
            }
            (a, _) if a.is_ascii_alphabetic() || a == '_' => {
                let mut j = i;
                while j < cs.len() && ident(cs[j]) {
                    j += 1;
                }
                (Tok::Ident(cs[i..j].iter().collect()), j - i)
            }
            _ => return Err(format!("unexpected character `{c}`")),
        };
        out.push(tok);
        i += len;
    }
    Ok(out)
}

struct Line {
    no: usize,
    toks: Vec<Tok>,
}

struct Cur<'a> {
    toks: &'a [Tok],
    pos: usize,
}

type PResult<T> = std::result::Result<T, String>;

impl<'a> Cur<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn is_p(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::P(q)) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_p(&mut self, p: &str) -> PResult<()> {
        if self.is_p(p) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of line".into(),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Var(s)) => format!("`?{s}`"),
            Some(Tok::Param(s)) => format!("`${s}`"),
            Some(Tok::Num(s)) => format!("`{s}`"),
            Some(Tok::P(p)) => format!("`{p}`"),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s.clone()),
            _ => {
                self.pos -= 1;
                Err(format!("expected a name, found {}", self.describe()))
            }
        }
    }

    fn var(&mut self) -> PResult<String> {
        match self.next() {
            Some(Tok::Var(s)) => Ok(s.clone()),
            _ => {
                self.pos -= 1;
                Err(format!("expected a `?variable`, found {}", self.describe()))
            }
        }
    }

    fn param(&mut self) -> PResult<String> {
        match self.next() {
            Some(Tok::Param(s)) => Ok(s.clone()),
            _ => {
                self.pos -= 1;
                Err(format!("expected a `$parameter`, found {}", self.describe()))
            }
        }
    }

    fn term(&mut self) -> PResult<Term> {
        match self.next() {
            Some(Tok::Var(s)) => Ok(Term::Var(s.clone())),
            Some(Tok::Ident(s)) => Ok(Term::Const(s.clone())),
            _ => {
                self.pos -= 1;
                Err(format!("expected an argument, found {}", self.describe()))
            }
        }
    }

    fn args(&mut self) -> PResult<Vec<Term>> {
        self.expect_p("(")?;
        let mut args = Vec::new();
        if self.is_p(")") {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            if self.is_p(",") {
                self.pos += 1;
            } else {
                self.expect_p(")")?;
                return Ok(args);
            }
        }
    }

    fn lit(&mut self) -> PResult<LitPat> {
        let name = self.ident()?;
        let args = self.args()?;
        Ok(LitPat { name, args })
    }

    fn call(&mut self) -> PResult<Call> {
        let template = self.ident()?;
        let args = if self.is_p("(") { self.args()? } else { Vec::new() };
        Ok(Call { template, args })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.product()?;
        loop {
            let op = if self.is_p("+") {
                Op::Add
            } else if self.is_p("-") {
                Op::Sub
            } else {
                return Ok(e);
            };
            self.pos += 1;
            let r = self.product()?;
            e = Expr::Bin(Box::new(e), op, Box::new(r));
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut e = self.factor()?;
        while self.is_p("*") {
            self.pos += 1;
            let r = self.factor()?;
            e = Expr::Bin(Box::new(e), Op::Mul, Box::new(r));
        }
        Ok(e)
    }

    fn factor(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::Num(s)) => {
                let v = s.parse::<Amount>().map_err(|e| e.to_string())?;
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Param(s)) => {
                self.pos += 1;
                Ok(Expr::Param(s.clone()))
            }
            Some(Tok::Ident(_)) => Ok(Expr::Func(self.lit()?)),
            Some(Tok::P("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_p(")")?;
                Ok(e)
            }
            _ => Err(format!("expected an expression, found {}", self.describe())),
        }
    }

    fn cmp(&mut self) -> Option<Cmp> {
        let c = match self.peek() {
            Some(Tok::P("<")) => Cmp::Lt,
            Some(Tok::P("<=")) => Cmp::Le,
            Some(Tok::P("=")) => Cmp::Eq,
            Some(Tok::P(">=")) => Cmp::Ge,
            Some(Tok::P(">")) => Cmp::Gt,
            _ => return None,
        };
        self.pos += 1;
        Some(c)
    }

    fn cond(&mut self) -> PResult<Cond> {
        if self.is_kw("not") && matches!(self.peek_at(1), Some(Tok::Ident(_))) {
            self.pos += 1;
            return Ok(Cond::Neg(self.lit()?));
        }
        if self.is_kw("distinct") && !matches!(self.peek_at(1), Some(Tok::P("("))) {
            self.pos += 1;
            return Ok(Cond::Distinct(self.term()?, self.term()?));
        }
        let lhs = self.expr()?;
        match self.cmp() {
            Some(c) => Ok(Cond::Num(lhs, c, self.expr()?)),
            None => match lhs {
                Expr::Func(p) => Ok(Cond::Pos(p)),
                _ => Err("expected a comparison".into()),
            },
        }
    }

    fn conds(&mut self) -> PResult<Vec<Cond>> {
        let mut out = vec![self.cond()?];
        while self.is_p(",") {
            self.pos += 1;
            out.push(self.cond()?);
        }
        Ok(out)
    }

    fn inject(&mut self) -> PResult<Inject> {
        let lit = self.lit()?;
        let value = if self.is_p("=") {
            self.pos += 1;
            Some(self.expr()?)
        } else {
            None
        };
        Ok(Inject { lit, value })
    }

    fn end(&self) -> PResult<()> {
        if self.done() {
            Ok(())
        } else {
            Err(format!("unexpected {}", self.describe()))
        }
    }
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
}

fn perr(no: usize, msg: impl Into<String>) -> Error {
    Error::Domain { line: no, msg: msg.into() }
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        let mut lines = Vec::new();
        for (i, l) in text.lines().enumerate() {
            let toks = tokenize(l).map_err(|m| perr(i + 1, m))?;
            if !toks.is_empty() {
                lines.push(Line { no: i + 1, toks });
            }
        }
        Ok(Parser { lines, pos: 0 })
    }

    fn domain(mut self) -> Result<Domain> {
        let header = self.lines.first().ok_or_else(|| perr(1, "empty domain file"))?;
        let version = match header.toks.as_slice() {
            [Tok::Ident(f), Tok::Num(v)] if f == DOMAIN_FORMAT => v
                .parse::<u32>()
                .map_err(|_| perr(header.no, "bad version number"))?,
            _ => return Err(perr(header.no, format!("expected `{DOMAIN_FORMAT} <version>`"))),
        };
        if version != DOMAIN_VERSION {
            return Err(perr(header.no, format!("unsupported domain version {version}")));
        }
        self.pos = 1;
        let mut actions = BTreeMap::new();
        let mut templates = BTreeMap::new();
        while self.pos < self.lines.len() {
            let line = &self.lines[self.pos];
            let no = line.no;
            match line.toks.first() {
                Some(Tok::Ident(k)) if k == "action" => {
                    let a = self.action()?;
                    if actions.insert(a.name.clone(), a).is_some() {
                        return Err(perr(no, "duplicate action"));
                    }
                }
                Some(Tok::Ident(k)) if k == "template" => {
                    let t = self.template()?;
                    if templates.insert(t.name.clone(), t).is_some() {
                        return Err(perr(no, "duplicate template"));
                    }
                }
                _ => return Err(perr(no, "expected `action` or `template`")),
            }
        }
        Ok(Domain { version, actions, templates })
    }

    fn header(&mut self, kw: &str) -> Result<(usize, String, Vec<String>)> {
        let line = &self.lines[self.pos];
        self.pos += 1;
        let mut c = Cur { toks: &line.toks, pos: 0 };
        let parsed = (|| {
            c.expect_kw(kw)?;
            let name = c.ident()?;
            let mut params = Vec::new();
            while !c.done() {
                params.push(c.var()?);
            }
            Ok::<_, String>((name, params))
        })();
        let (name, params) = parsed.map_err(|m| perr(line.no, m))?;
        Ok((line.no, name, params))
    }

    fn action(&mut self) -> Result<ActionSchema> {
        let (line, name, params) = self.header("action")?;
        let mut pre = Vec::new();
        let mut effects = Vec::new();
        loop {
            let l = self
                .lines
                .get(self.pos)
                .ok_or_else(|| perr(line, format!("action `{name}` lacks `end`")))?;
            self.pos += 1;
            let mut c = Cur { toks: &l.toks, pos: 0 };
            let r: PResult<bool> = (|| {
                let kw = c.ident()?;
                match kw.as_str() {
                    "end" => {
                        c.end()?;
                        return Ok(true);
                    }
                    "pre" => pre.extend(c.conds()?),
                    "add" => effects.push(Effect::Add(c.lit()?)),
                    "del" => effects.push(Effect::Del(c.lit()?)),
                    "set" => {
                        let f = c.lit()?;
                        c.expect_p("=")?;
                        effects.push(Effect::Set(f, c.expr()?));
                    }
                    "inc" => {
                        let f = c.lit()?;
                        let e = if c.is_p("+=") {
                            c.pos += 1;
                            Effect::Inc(f, c.expr()?)
                        } else {
                            c.expect_p("-=")?;
                            Effect::Dec(f, c.expr()?)
                        };
                        effects.push(e);
                    }
                    other => return Err(format!("unknown action clause `{other}`")),
                }
                c.end()?;
                Ok(false)
            })();
            if r.map_err(|m| perr(l.no, m))? {
                break;
            }
        }
        Ok(ActionSchema { name, params, pre, effects, line })
    }

    fn template(&mut self) -> Result<Template> {
        let (line, name, params) = self.header("template")?;
        let body = self.block(line, &name)?;
        Ok(Template { name, params, body, line })
    }

    /// Statements up to the matching `end`.
    fn block(&mut self, open: usize, what: &str) -> Result<Vec<Stmt>> {
        let mut body = Vec::new();
        loop {
            let l = self
                .lines
                .get(self.pos)
                .ok_or_else(|| perr(open, format!("`{what}` lacks `end`")))?;
            let no = l.no;
            self.pos += 1;
            let toks = l.toks.clone();
            let mut c = Cur { toks: &toks, pos: 0 };
            let kw = c.ident().map_err(|m| perr(no, m))?;
            let stmt = match kw.as_str() {
                "end" => {
                    c.end().map_err(|m| perr(no, m))?;
                    return Ok(body);
                }
                "repeat" => {
                    let count = c.expr().and_then(|e| c.end().map(|_| e)).map_err(|m| perr(no, m))?;
                    let inner = self.block(no, "repeat")?;
                    Stmt::Repeat { count, body: inner }
                }
                "split" => {
                    let head = (|| {
                        let param = c.param()?;
                        c.expect_kw("of")?;
                        let total = c.expr()?;
                        c.expect_kw("below")?;
                        let below = c.expr()?;
                        c.end()?;
                        Ok::<_, String>((param, total, below))
                    })();
                    let (param, total, below) = head.map_err(|m| perr(no, m))?;
                    let inner = self.block(no, "split")?;
                    Stmt::Split { param, total, below, body: inner }
                }
                _ => statement(&kw, &mut c).map_err(|m| perr(no, m))?,
            };
            body.push(stmt);
        }
    }
}

fn statement(kw: &str, c: &mut Cur<'_>) -> PResult<Stmt> {
    let s = match kw {
        "goal" => Stmt::Goal(c.conds()?),
        "fresh" => Stmt::Fresh { var: c.var()?, kind: c.ident()? },
        "draw" => {
            let param = c.param()?;
            let kind = c.ident()?;
            let (lo, hi) = (c.factor()?, c.factor()?);
            let dist = match kind.as_str() {
                "log" => Dist::LogUniform(lo, hi),
                "uniform" => Dist::Uniform(lo, hi),
                "int" => Dist::Int(lo, hi),
                other => return Err(format!("unknown distribution `{other}`")),
            };
            Stmt::Draw { param, dist }
        }
        "let" => match c.peek() {
            Some(Tok::Var(_)) => {
                let var = c.var()?;
                c.expect_p("=")?;
                Stmt::LetVar { var, from: c.var()? }
            }
            _ => {
                let param = c.param()?;
                c.expect_p("=")?;
                Stmt::LetNum { param, expr: c.expr()? }
            }
        },
        "init" => Stmt::Init(c.inject()?),
        "bind" => {
            let mut vars = vec![c.var()?];
            while matches!(c.peek(), Some(Tok::Var(_))) {
                vars.push(c.var()?);
            }
            c.expect_p(":")?;
            let conds = c.conds()?;
            let repair = if c.is_kw("else") {
                c.pos += 1;
                Some(c.call()?)
            } else {
                None
            };
            Stmt::Bind { vars, conds, repair }
        }
        "need" => {
            let conds = c.conds()?;
            c.expect_kw("else")?;
            let repair = c.call()?;
            let max = if c.is_kw("max") {
                c.pos += 1;
                match c.next() {
                    Some(Tok::Num(n)) => n.parse().map_err(|_| format!("bad count `{n}`"))?,
                    _ => return Err("expected a count after `max`".into()),
                }
            } else {
                1
            };
            Stmt::Need { conds, repair, max }
        }
        "do" => {
            let action = c.ident()?;
            let args = c.args()?;
            let mut with = Vec::new();
            if c.is_kw("with") {
                c.pos += 1;
                with.push(c.inject()?);
                while c.is_p(";") {
                    c.pos += 1;
                    with.push(c.inject()?);
                }
            }
            Stmt::Do { action, args, with }
        }
        other => return Err(format!("unknown template statement `{other}`")),
    };
    c.end()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_domain_validates() {
        let d = Domain::builtin();
        assert_eq!(d.version, DOMAIN_VERSION);
        assert_eq!(d.actions.len(), 28);
        assert!(d.template("deposit").is_some());
    }

    #[test]
    fn tokenizer_keeps_hyphenated_names() {
        let t = tokenize("inc balance(?a) -= transaction-amount(?t) # note").unwrap();
        assert_eq!(t[0], Tok::Ident("inc".into()));
        assert_eq!(t[5], Tok::P("-="));
        assert_eq!(t[6], Tok::Ident("transaction-amount".into()));
        assert_eq!(t.len(), 10);
    }

    #[test]
    fn parses_a_small_domain() {
        let text = "tracelab-domain 1\n\
            action work ?c\n  pre employed(?c)\n  inc working-day(?c) += 1\nend\n\
            template w\n  goal working-day(?c) >= 2 * 1\n  repeat 2\n    do work(?c)\n  end\nend\n";
        let d = Domain::parse(text).unwrap();
        let w = &d.actions["work"];
        assert_eq!(w.params, vec!["c"]);
        assert_eq!(w.pre.len(), 1);
        let t = &d.templates["w"];
        assert!(matches!(&t.body[0], Stmt::Goal(c) if matches!(c[0], Cond::Num(_, Cmp::Ge, Expr::Bin(..)))));
        assert!(matches!(&t.body[1], Stmt::Repeat { body, .. } if body.len() == 1));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "tracelab-domain 1\naction work ?c\n  pre employed(?c\nend\n";
        match Domain::parse(text) {
            Err(Error::Domain { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Domain::parse("tracelab-domain 9\n"), Err(Error::Domain { line: 1, .. })));
        assert!(matches!(
            Domain::parse("tracelab-domain 1\ntemplate t\n  do work(?c)\n"),
            Err(Error::Domain { line: 2, .. })
        ));
    }

    #[test]
    fn validation_rejects_bad_symbols_and_scoping() {
        let cat = Catalog::builtin();
        let mut d = Domain::builtin().clone();
        d.actions.get_mut("work").unwrap().effects.push(Effect::Add(LitPat {
            name: "employed".into(),
            args: vec![Term::Var("x".into())],
        }));
        assert!(d.validate(cat).is_err());

        let mut d = Domain::builtin().clone();
        d.actions.remove("layering");
        assert!(d.validate(cat).is_err());

        let text = format!("{}\ntemplate bad\n  do work(?nobody)\nend\n", DOMAIN_DATA);
        let d = Domain::parse(&text).unwrap();
        assert!(d.validate(cat).is_err());

        let text = format!("{}\ntemplate bad2\n  goal balance(?c)\nend\n", DOMAIN_DATA);
        let d = Domain::parse(&text).unwrap();
        assert!(d.validate(cat).is_err());
    }
}
