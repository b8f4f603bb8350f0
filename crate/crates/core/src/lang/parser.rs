//! Recursive-descent parser producing a [`Program`].

use thiserror::Error;

use crate::constraint::{SoftConstraint, Universe, VarId};
use crate::lang::ast::{
    Agent, AskBranch, CLabel, CRef, ConstraintDecl, Dialect, ProcDecl, Program, Threshold,
};
use crate::lang::lexer::{lex, LexError, Tok, Token};
use crate::semiring::{Grade, SemiringKind};

pub const KEYWORDS: &[&str] = &[
    "semiring",
    "dialect",
    "var",
    "constraint",
    "proc",
    "main",
    "in",
    "on",
    "default",
    "success",
    "tell",
    "ask",
    "now",
    "then",
    "else",
    "askp",
    "exists",
    "timeout",
    "do",
    "watching",
    "top",
    "bot",
    "diag",
    "true",
    "false",
    "inf",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("line {line}, col {col}: expected {expected}, found {found}")]
    Unexpected {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("line {line}, col {col}: {msg}")]
    At { line: u32, col: u32, msg: String },
    #[error("{0}")]
    Invalid(String),
}

type R<T> = Result<T, ParseError>;

pub fn parse_program(src: &str) -> R<Program> {
    let tokens = lex(src)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        kind: None,
        dialect: None,
        universe: None,
        constraints: Vec::new(),
        decls: Vec::new(),
    };
    p.program()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    kind: Option<SemiringKind>,
    dialect: Option<Dialect>,
    universe: Option<Universe>,
    constraints: Vec<ConstraintDecl>,
    decls: Vec<ProcDecl>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Unexpected {
            line,
            col,
            expected: expected.into(),
            found: self.peek().to_string(),
        }
    }

    fn fail(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::At {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> R<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn ident(&mut self, what: &str) -> R<String> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> R<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(format!("`{kw}`")))
        }
    }

    fn fresh_name(&mut self, what: &str) -> R<String> {
        let name = self.ident(what)?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(self.fail(format!("`{name}` is a reserved word")));
        }
        Ok(name)
    }

    fn kind(&self) -> R<SemiringKind> {
        self.kind
            .ok_or_else(|| self.fail("declare the semiring first"))
    }

    fn universe(&self) -> R<&Universe> {
        self.universe
            .as_ref()
            .ok_or_else(|| self.fail("declare the semiring first"))
    }

    fn var(&mut self, what: &str) -> R<VarId> {
        let name = self.ident(what)?;
        self.universe()?
            .var_id(&name)
            .ok_or_else(|| self.fail(format!("unknown variable `{name}`")))
    }

    fn program(&mut self) -> R<Program> {
        let main = loop {
            match self.peek().clone() {
                Tok::Ident(kw) => match kw.as_str() {
                    "semiring" => self.semiring_decl()?,
                    "dialect" => self.dialect_decl()?,
                    "var" => self.var_decl()?,
                    "constraint" => self.constraint_decl()?,
                    "proc" => self.proc_decl()?,
                    "main" => {
                        self.bump();
                        self.expect(Tok::Colon, "`:` after `main`")?;
                        break self.agent()?;
                    }
                    _ => return Err(self.unexpected("a declaration or `main`")),
                },
                Tok::Eof => return Err(self.unexpected("`main`")),
                _ => return Err(self.unexpected("a declaration or `main`")),
            }
        };
        self.expect(Tok::Eof, "end of input after the main agent")?;
        let dialect = self
            .dialect
            .ok_or_else(|| ParseError::Invalid("missing `dialect` declaration".into()))?;
        let kind = self
            .kind
            .ok_or_else(|| ParseError::Invalid("missing `semiring` declaration".into()))?;
        let universe = self.universe.take().expect("kind implies universe");
        let program = Program {
            dialect,
            kind,
            universe,
            constraints: std::mem::take(&mut self.constraints),
            decls: std::mem::take(&mut self.decls),
            main,
        };
        validate(&program)?;
        Ok(program)
    }

    fn semiring_decl(&mut self) -> R<()> {
        self.bump();
        if self.kind.is_some() {
            return Err(self.fail("the semiring is declared twice"));
        }
        let name = self.ident("a semiring name")?;
        let kind = SemiringKind::parse_name(&name).map_err(|e| self.fail(e.to_string()))?;
        self.kind = Some(kind);
        self.universe = Some(Universe::new(kind));
        Ok(())
    }

    fn dialect_decl(&mut self) -> R<()> {
        self.bump();
        if self.dialect.is_some() {
            return Err(self.fail("the dialect is declared twice"));
        }
        let name = self.ident("`tsccp` or `tsccp-i`")?;
        if name != "tsccp" {
            return Err(self.fail(format!("unknown dialect `{name}`")));
        }
        let mut dialect = Dialect::Mp;
        if *self.peek() == Tok::Minus {
            self.bump();
            let suffix = self.ident("`i`")?;
            if suffix != "i" {
                return Err(self.fail(format!("unknown dialect `tsccp-{suffix}`")));
            }
            dialect = Dialect::Il;
        }
        self.dialect = Some(dialect);
        Ok(())
    }

    fn value(&mut self) -> R<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Number(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("a domain value")),
        }
    }

    fn var_decl(&mut self) -> R<()> {
        self.bump();
        let name = self.fresh_name("a variable name")?;
        self.keyword("in")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut values = vec![self.value()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            values.push(self.value()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        if self.universe.is_none() {
            return Err(self.fail("declare the semiring before variables"));
        }
        self.universe
            .as_mut()
            .unwrap()
            .add_var(&name, values)
            .map_err(|e| self.fail(e.to_string()))?;
        Ok(())
    }

    fn grade(&mut self) -> R<Grade> {
        let kind = self.kind()?;
        let text = match self.peek().clone() {
            Tok::Ident(s) if s == "true" || s == "false" || s == "inf" => {
                self.bump();
                s
            }
            Tok::Number(a) => {
                self.bump();
                if *self.peek() == Tok::Slash {
                    self.bump();
                    match self.peek().clone() {
                        Tok::Number(b) => {
                            self.bump();
                            format!("{a}/{b}")
                        }
                        _ => return Err(self.unexpected("a denominator")),
                    }
                } else {
                    a
                }
            }
            _ => return Err(self.unexpected("a grade")),
        };
        kind.parse_grade(&text).map_err(|e| self.fail(e.to_string()))
    }

    fn int(&mut self, what: &str) -> R<u32> {
        match self.peek().clone() {
            Tok::Number(s) if !s.contains('.') => {
                self.bump();
                s.parse()
                    .map_err(|_| self.fail(format!("{what} `{s}` is out of range")))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn constraint_decl(&mut self) -> R<()> {
        self.bump();
        let name = self.fresh_name("a constraint name")?;
        if self.constraints.iter().any(|c| c.name == name) {
            return Err(self.fail(format!("constraint `{name}` is declared twice")));
        }
        self.keyword("on")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut vars = vec![self.var("a variable name")?];
        while *self.peek() == Tok::Comma {
            self.bump();
            vars.push(self.var("a variable name")?);
        }
        self.expect(Tok::RParen, "`)`")?;
        let mut sorted = vars.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != vars.len() {
            return Err(self.fail("a variable repeats in the constraint header"));
        }
        self.expect(Tok::LBrace, "`{`")?;
        let mut entries: Vec<(Vec<usize>, Grade)> = Vec::new();
        let mut default: Option<Grade> = None;
        while *self.peek() != Tok::RBrace {
            if self.eat_keyword("default") {
                self.expect(Tok::Arrow(None), "`->`")?;
                if default.is_some() {
                    return Err(self.fail("`default` appears twice"));
                }
                default = Some(self.grade()?);
                continue;
            }
            self.expect(Tok::LParen, "`(` or `default`")?;
            let mut tuple = Vec::new();
            loop {
                let value = self.value()?;
                let var = vars[tuple.len().min(vars.len() - 1)];
                let ix = self
                    .universe()?
                    .value_index(var, &value)
                    .ok_or_else(|| {
                        let vn = self.universe().unwrap().var_name(var).to_string();
                        self.fail(format!("`{value}` is not in the domain of `{vn}`"))
                    })?;
                tuple.push(ix);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "`)`")?;
            if tuple.len() != vars.len() {
                return Err(self.fail(format!(
                    "row has {} values but the constraint is on {} variables",
                    tuple.len(),
                    vars.len()
                )));
            }
            self.expect(Tok::Arrow(None), "`->`")?;
            entries.push((tuple, self.grade()?));
        }
        self.bump();
        let u = self.universe()?;
        let total: usize = vars.iter().map(|&v| u.card(v)).product();
        let covered: std::collections::BTreeSet<&Vec<usize>> =
            entries.iter().map(|(t, _)| t).collect();
        let default = match default {
            Some(g) => g,
            None if covered.len() == total => self.kind()?.one(),
            None => {
                return Err(self.fail(format!(
                    "rows cover {} of {} tuples and there is no `default`",
                    covered.len(),
                    total
                )))
            }
        };
        let table = SoftConstraint::build(u, &vars, &entries, default);
        self.constraints.push(ConstraintDecl { name, vars, table });
        Ok(())
    }

    fn proc_decl(&mut self) -> R<()> {
        self.bump();
        let name = self.fresh_name("a procedure name")?;
        if self.decls.iter().any(|d| d.name == name) {
            return Err(self.fail(format!("procedure `{name}` is declared twice")));
        }
        self.expect(Tok::LParen, "`(`")?;
        let mut formals = Vec::new();
        if *self.peek() != Tok::RParen {
            formals.push(self.var("a formal parameter")?);
            while *self.peek() == Tok::Comma {
                self.bump();
                formals.push(self.var("a formal parameter")?);
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let mut sorted = formals.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != formals.len() {
            return Err(self.fail("a formal parameter repeats"));
        }
        self.expect(Tok::ColonColon, "`::`")?;
        let body = self.agent()?;
        self.decls.push(ProcDecl {
            name,
            formals,
            body,
        });
        Ok(())
    }

    fn cref(&mut self) -> R<CRef> {
        match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "top" => {
                    self.bump();
                    Ok(CRef::top(self.kind()?))
                }
                "bot" => {
                    self.bump();
                    Ok(CRef::bot(self.kind()?))
                }
                "diag" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let x = self.var("a variable name")?;
                    self.expect(Tok::Comma, "`,`")?;
                    let y = self.var("a variable name")?;
                    self.expect(Tok::RParen, "`)`")?;
                    let u = self.universe()?;
                    Ok(CRef {
                        label: CLabel::Diag(
                            u.var_name(x).to_string(),
                            u.var_name(y).to_string(),
                        ),
                        table: SoftConstraint::diagonal(u, x, y),
                    })
                }
                _ => {
                    self.bump();
                    let decl = self
                        .constraints
                        .iter()
                        .find(|c| c.name == s)
                        .ok_or_else(|| self.fail(format!("unknown constraint `{s}`")))?;
                    Ok(CRef::named(&s, decl.table.clone()))
                }
            },
            _ => Err(self.unexpected("a constraint")),
        }
    }

    /// `[g]`, `{c}`, or nothing for the plain threshold.
    fn threshold(&mut self) -> R<Threshold> {
        match self.peek() {
            Tok::LBracket => {
                self.bump();
                let g = self.grade()?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Threshold::Value(g))
            }
            Tok::LBrace => {
                self.bump();
                let c = self.cref()?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Threshold::Constraint(c))
            }
            _ => Ok(Threshold::plain(self.kind()?)),
        }
    }

    fn agent(&mut self) -> R<Agent> {
        let left = self.sum()?;
        if *self.peek() == Tok::Par {
            self.bump();
            let right = self.agent()?;
            Ok(Agent::Parallel(Box::new(left), Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn sum(&mut self) -> R<Agent> {
        let first = self.prefix()?;
        if *self.peek() != Tok::Plus {
            return Ok(first);
        }
        let mut branches = vec![self.ask_branch(first)?];
        while *self.peek() == Tok::Plus {
            self.bump();
            let next = self.prefix()?;
            branches.push(self.ask_branch(next)?);
        }
        if branches.iter().any(|b| b.delay > 0) {
            return Err(self.fail("delayed prefixes cannot appear in a choice"));
        }
        Ok(Agent::Sum(branches))
    }

    fn ask_branch(&self, agent: Agent) -> R<AskBranch> {
        match agent {
            Agent::Sum(mut v) if v.len() == 1 => Ok(v.pop().unwrap()),
            _ => Err(self.fail("every branch of a choice must be an ask prefix")),
        }
    }

    /// One continuation-level agent; sums and parallels need parens.
    fn prefix(&mut self) -> R<Agent> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let a = self.agent()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(a)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "success" => {
                    self.bump();
                    Ok(Agent::Success)
                }
                "tell" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let c = self.cref()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let (thr, delay, cont) = self.tail()?;
                    Ok(Agent::Tell {
                        c,
                        thr,
                        delay,
                        cont: Box::new(cont),
                    })
                }
                "ask" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let c = self.cref()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let (thr, delay, cont) = self.tail()?;
                    Ok(Agent::Sum(vec![AskBranch {
                        c,
                        thr,
                        delay,
                        cont,
                    }]))
                }
                "now" => {
                    self.bump();
                    let thr = self.threshold()?;
                    let c = self.cref()?;
                    let then = if self.eat_keyword("then") {
                        self.prefix()?
                    } else {
                        Agent::Success
                    };
                    self.keyword("else")?;
                    let els = self.prefix()?;
                    Ok(Agent::Now {
                        c,
                        thr,
                        then: Box::new(then),
                        els: Box::new(els),
                    })
                }
                "askp" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let t = self.int("a timer")?;
                    self.expect(Tok::Comma, "`,`")?;
                    let c = self.cref()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let thr = self.threshold()?;
                    self.expect(Tok::Question, "`?`")?;
                    let then = self.prefix()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let els = self.prefix()?;
                    Ok(Agent::Askp {
                        t,
                        c,
                        thr,
                        then: Box::new(then),
                        els: Box::new(els),
                    })
                }
                "exists" => {
                    self.bump();
                    let var = self.var("a variable name")?;
                    self.expect(Tok::Dot, "`.`")?;
                    let body = self.prefix()?;
                    Ok(Agent::Exists {
                        var,
                        body: Box::new(body),
                    })
                }
                "timeout" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let m = self.int("a timeout bound")?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::LBrace, "`{`")?;
                    let body = self.sum()?;
                    self.expect(Tok::RBrace, "`}`")?;
                    let branches = match body {
                        Agent::Sum(v) => v,
                        _ => return Err(self.fail("timeout branches must be ask prefixes")),
                    };
                    if branches.iter().any(|b| b.delay > 0) {
                        return Err(self.fail("delayed prefixes cannot appear under `timeout`"));
                    }
                    self.keyword("else")?;
                    let els = self.prefix()?;
                    Ok(Agent::Timeout {
                        branches,
                        m,
                        els: Box::new(els),
                    })
                }
                "do" => {
                    self.bump();
                    let body = self.prefix()?;
                    self.keyword("watching")?;
                    let thr = self.threshold()?;
                    self.expect(Tok::LParen, "`(`")?;
                    let c = self.cref()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let els = if self.eat_keyword("else") {
                        Some(Box::new(self.prefix()?))
                    } else {
                        None
                    };
                    Ok(Agent::Watchdog {
                        body: Box::new(body),
                        c,
                        thr,
                        els,
                    })
                }
                _ => {
                    if KEYWORDS.contains(&kw.as_str()) {
                        return Err(self.unexpected("an agent"));
                    }
                    self.bump();
                    self.expect(Tok::LParen, "`(` after a procedure name")?;
                    let mut actuals = Vec::new();
                    if *self.peek() != Tok::RParen {
                        actuals.push(self.var("an actual parameter")?);
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            actuals.push(self.var("an actual parameter")?);
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Agent::Call { name: kw, actuals })
                }
            },
            _ => Err(self.unexpected("an agent")),
        }
    }

    /// Arrow, threshold and continuation of a tell/ask prefix; a bare
    /// prefix continues with `success`.
    fn tail(&mut self) -> R<(Threshold, u32, Agent)> {
        match *self.peek() {
            Tok::Arrow(delay) => {
                self.bump();
                let thr = self.threshold()?;
                let cont = self.prefix()?;
                Ok((thr, delay.unwrap_or(0), cont))
            }
            _ => Ok((Threshold::plain(self.kind()?), 0, Agent::Success)),
        }
    }
}

fn walk_calls<'a>(agent: &'a Agent, out: &mut Vec<(&'a str, &'a [VarId])>) {
    match agent {
        Agent::Success => {}
        Agent::Call { name, actuals } => out.push((name, actuals)),
        Agent::Tell { cont, .. } => walk_calls(cont, out),
        Agent::Sum(branches) => {
            for b in branches {
                walk_calls(&b.cont, out);
            }
        }
        Agent::Parallel(l, r) => {
            walk_calls(l, out);
            walk_calls(r, out);
        }
        Agent::Exists { body, .. } => walk_calls(body, out),
        Agent::Now { then, els, .. } | Agent::Askp { then, els, .. } => {
            walk_calls(then, out);
            walk_calls(els, out);
        }
        Agent::Timeout { branches, els, .. } => {
            for b in branches {
                walk_calls(&b.cont, out);
            }
            walk_calls(els, out);
        }
        Agent::Watchdog { body, els, .. } => {
            walk_calls(body, out);
            if let Some(e) = els {
                walk_calls(e, out);
            }
        }
    }
}

fn validate(program: &Program) -> R<()> {
    let u = &program.universe;
    let mut agents: Vec<(&str, &Agent)> = vec![("main", &program.main)];
    for d in &program.decls {
        agents.push((&d.name, &d.body));
    }
    for (owner, agent) in &agents {
        let mut calls = Vec::new();
        walk_calls(agent, &mut calls);
        for (name, actuals) in calls {
            let decl = program.decl(name).ok_or_else(|| {
                ParseError::Invalid(format!("`{owner}` calls undeclared procedure `{name}`"))
            })?;
            if decl.formals.len() != actuals.len() {
                return Err(ParseError::Invalid(format!(
                    "`{owner}` calls `{name}` with {} arguments, expected {}",
                    actuals.len(),
                    decl.formals.len()
                )));
            }
            for (&f, &a) in decl.formals.iter().zip(actuals) {
                if u.domain(f) != u.domain(a) {
                    return Err(ParseError::Invalid(format!(
                        "`{owner}` calls `{name}` binding `{}` to `{}`, whose domains differ",
                        u.var_name(f),
                        u.var_name(a)
                    )));
                }
            }
        }
    }
    for d in &program.decls {
        for v in d.body.free_vars() {
            if !d.formals.contains(&v) {
                return Err(ParseError::Invalid(format!(
                    "the body of `{}` uses `{}`, which is not a formal parameter",
                    d.name,
                    u.var_name(v)
                )));
            }
        }
    }
    Ok(())
}
