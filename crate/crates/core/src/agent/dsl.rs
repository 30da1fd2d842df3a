//! Parser and printer for the agent plan language.
//!
//! ```text
//! GOALS:
//!   ACHIEVE live;
//! FACTS:
//!   FACT friends "Lovisa" "Karin" 1;
//! PLAN:
//! {
//! NAME: "live"
//! GOAL: ACHIEVE live;
//! BODY:
//!   FACT friends "Lovisa" "Karin" $strength;
//!   OR { TEST( > $strength 1); ACHIEVE gossip; } { EXECUTE doIdle; };
//! }
//! ```
//!
//! Optional plan sections: `UTILITY: n;`, `PRECONDITION: steps`, `EFFECTS: steps`.
//! Goal declarations accept a trailing `:PRIORITY n`.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{CmpOp, GoalDecl, GoalKind, GoalPattern, Plan, Program, Step};
use crate::atom::{quote_atom, quote_str, Atom, Fact, Num, Pattern, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unbound variable ${0}")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(Num),
    Var(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, m: &str| DslError::Syntax {
        line,
        col,
        message: m.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let (sl, sc) = (line, col);
        let adv = |n: usize, i: &mut usize, line: &mut usize, col: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            adv(1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                adv(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '"' {
            adv(1, &mut i, &mut line, &mut col);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err(sl, sc, "unterminated string")),
                    Some('"') => {
                        adv(1, &mut i, &mut line, &mut col);
                        break;
                    }
                    Some('\\') => {
                        let e = chars.get(i + 1).copied();
                        s.push(match e {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some(x) => x,
                            None => return Err(err(sl, sc, "unterminated string")),
                        });
                        adv(2, &mut i, &mut line, &mut col);
                    }
                    Some(&x) => {
                        s.push(x);
                        adv(1, &mut i, &mut line, &mut col);
                    }
                }
            }
            out.push(Spanned { tok: Tok::Str(s), line: sl, col: sc });
            continue;
        }
        if c == '$' {
            adv(1, &mut i, &mut line, &mut col);
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                adv(1, &mut i, &mut line, &mut col);
            }
            if start == i {
                return Err(err(sl, sc, "expected variable name after '$'"));
            }
            out.push(Spanned {
                tok: Tok::Var(chars[start..i].iter().collect()),
                line: sl,
                col: sc,
            });
            continue;
        }
        let is_num_start =
            c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if is_num_start {
            let start = i;
            adv(1, &mut i, &mut line, &mut col);
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                adv(1, &mut i, &mut line, &mut col);
            }
            let text: String = chars[start..i].iter().collect();
            let n = Num::parse(&text).ok_or_else(|| err(sl, sc, &format!("bad number '{text}'")))?;
            out.push(Spanned { tok: Tok::Num(n), line: sl, col: sc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                adv(1, &mut i, &mut line, &mut col);
            }
            out.push(Spanned {
                tok: Tok::Word(chars[start..i].iter().collect()),
                line: sl,
                col: sc,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (p, n): (&'static str, usize) = match two.as_str() {
            ">=" => (">=", 2),
            "<=" => ("<=", 2),
            "==" => ("==", 2),
            "!=" => ("!=", 2),
            _ => match c {
                ';' => (";", 1),
                '{' => ("{", 1),
                '}' => ("}", 1),
                '(' => ("(", 1),
                ')' => (")", 1),
                ':' => (":", 1),
                '*' => ("*", 1),
                '>' => (">", 1),
                '<' => ("<", 1),
                '=' => ("==", 1),
                _ => return Err(err(sl, sc, &format!("unexpected character '{c}'"))),
            },
        };
        adv(n, &mut i, &mut line, &mut col);
        out.push(Spanned { tok: Tok::Punct(p), line: sl, col: sc });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

const SECTIONS: &[&str] = &["GOALS", "FACTS", "PLAN"];
const PLAN_SECTIONS: &[&str] = &["NAME", "GOAL", "UTILITY", "PRECONDITION", "BODY", "EFFECTS"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, DslError> {
        let s = &self.toks[self.pos];
        Err(DslError::Syntax {
            line: s.line,
            col: s.col,
            message: message.into(),
        })
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), DslError> {
        if *self.peek() == Tok::Punct(leak(p)) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected '{p}', found {}", describe(self.peek())))
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn is_section_header(&self, names: &[&str]) -> bool {
        matches!(self.peek(), Tok::Word(x) if names.contains(&x.as_str()))
            && *self.peek_at(1) == Tok::Punct(":")
    }

    fn expect_word(&mut self, w: &str) -> Result<(), DslError> {
        if self.is_word(w) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected '{w}', found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Word(w) => {
                self.next();
                Ok(w)
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn program(&mut self) -> Result<Program, DslError> {
        let mut prog = Program::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Word(w) if SECTIONS.contains(&w.as_str()) => {
                    self.next();
                    self.expect_punct(":")?;
                    match w.as_str() {
                        "GOALS" => {
                            while !self.at_section_or_end() {
                                prog.goals.push(self.goal_decl()?);
                            }
                        }
                        "FACTS" => {
                            while !self.at_section_or_end() {
                                prog.facts.push(self.fact_decl()?);
                            }
                        }
                        _ => prog.plans.push(Arc::new(self.plan()?)),
                    }
                }
                other => return self.err(format!("expected GOALS:, FACTS: or PLAN:, found {}", describe(&other))),
            }
        }
        Ok(prog)
    }

    fn at_section_or_end(&self) -> bool {
        *self.peek() == Tok::Eof || self.is_section_header(SECTIONS)
    }

    fn goal_decl(&mut self) -> Result<GoalDecl, DslError> {
        let kind = self.goal_kind()?;
        let name = self.ident()?;
        let mut args = Vec::new();
        let mut priority = 0;
        loop {
            match self.peek().clone() {
                Tok::Punct(";") => {
                    self.next();
                    break;
                }
                Tok::Punct(":") => {
                    self.next();
                    self.expect_word("PRIORITY")?;
                    match self.next() {
                        Tok::Num(n) if n.tenths() >= 0 && n.tenths() % 10 == 0 => priority = n.round(),
                        _ => return self.err("priority must be a non-negative integer"),
                    }
                }
                _ => match self.term()? {
                    Term::Atom(a) => args.push(a),
                    _ => return self.err("goal arguments must be ground"),
                },
            }
        }
        Ok(GoalDecl {
            kind,
            name,
            args,
            priority,
            tag: None,
        })
    }

    fn goal_kind(&mut self) -> Result<GoalKind, DslError> {
        if self.is_word("ACHIEVE") {
            self.next();
            Ok(GoalKind::Achieve)
        } else if self.is_word("PERFORM") {
            self.next();
            Ok(GoalKind::Perform)
        } else {
            self.err(format!("expected ACHIEVE or PERFORM, found {}", describe(self.peek())))
        }
    }

    fn fact_decl(&mut self) -> Result<Fact, DslError> {
        self.expect_word("FACT")?;
        let predicate = self.ident()?;
        let mut args = Vec::new();
        while *self.peek() != Tok::Punct(";") {
            match self.term()? {
                Term::Atom(a) => args.push(a),
                _ => return self.err("facts must be ground"),
            }
        }
        self.next();
        Ok(Fact::new(predicate, args))
    }

    fn term(&mut self) -> Result<Term, DslError> {
        match self.next() {
            Tok::Str(s) => Ok(Term::Atom(Atom::Str(s))),
            Tok::Word(w) => Ok(Term::Atom(Atom::Str(w))),
            Tok::Num(n) => Ok(Term::Atom(Atom::Num(n))),
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Punct("*") => Ok(Term::Wild),
            other => {
                self.pos -= 1;
                self.err(format!("expected argument, found {}", describe(&other)))
            }
        }
    }

    fn terms_until_semi(&mut self) -> Result<Vec<Term>, DslError> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Punct(";") {
            if *self.peek() == Tok::Eof || *self.peek() == Tok::Punct("}") {
                return self.err("expected ';'");
            }
            out.push(self.term()?);
        }
        self.next();
        Ok(out)
    }

    fn plan(&mut self) -> Result<Plan, DslError> {
        self.expect_punct("{")?;
        self.expect_word("NAME")?;
        self.expect_punct(":")?;
        let name = match self.next() {
            Tok::Str(s) | Tok::Word(s) => s,
            _ => return self.err("expected plan name"),
        };
        if !self.is_word("GOAL") {
            return self.err("plan is missing its GOAL section");
        }
        self.next();
        self.expect_punct(":")?;
        let kind = self.goal_kind()?;
        let gname = self.ident()?;
        let gargs = self.terms_until_semi()?;
        let goal = GoalPattern {
            kind,
            name: gname,
            args: gargs,
        };
        let mut utility = 0;
        let mut precondition = Vec::new();
        let mut body = None;
        let mut effects = Vec::new();
        loop {
            if *self.peek() == Tok::Punct("}") {
                self.next();
                break;
            }
            let section = self.ident()?;
            self.expect_punct(":")?;
            match section.as_str() {
                "UTILITY" => {
                    match self.next() {
                        Tok::Num(n) => utility = n.round(),
                        _ => return self.err("expected utility number"),
                    }
                    if *self.peek() == Tok::Punct(";") {
                        self.next();
                    }
                }
                "PRECONDITION" => precondition = self.steps_until_section()?,
                "BODY" => body = Some(self.steps_until_section()?),
                "EFFECTS" => effects = self.steps_until_section()?,
                other => return self.err(format!("unknown plan section '{other}'")),
            }
        }
        let body = match body {
            Some(b) => b,
            None => return self.err(format!("plan \"{name}\" has no BODY")),
        };
        for s in &effects {
            if !matches!(s, Step::Assert(_) | Step::Retract(_)) {
                return self.err("EFFECTS may only ASSERT or RETRACT");
            }
        }
        let plan = Plan::new(name, goal, precondition, body, effects, utility);
        check_bindings(&plan)?;
        Ok(plan)
    }

    fn steps_until_section(&mut self) -> Result<Vec<Step>, DslError> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Punct("}") && !self.is_section_header(PLAN_SECTIONS) {
            out.push(self.step()?);
        }
        Ok(out)
    }

    fn pattern(&mut self) -> Result<Pattern, DslError> {
        let pred = self.ident()?;
        let args = self.terms_until_semi()?;
        Ok(Pattern::new(pred, args))
    }

    fn step(&mut self) -> Result<Step, DslError> {
        let kw = match self.peek().clone() {
            Tok::Word(w) => w,
            other => return self.err(format!("expected a plan step, found {}", describe(&other))),
        };
        self.next();
        Ok(match kw.as_str() {
            "FACT" => Step::Fact(self.pattern()?),
            "RETRIEVE" => Step::Retrieve(self.pattern()?),
            "ASSERT" => Step::Assert(self.pattern()?),
            "RETRACT" => Step::Retract(self.pattern()?),
            "TEST" => {
                self.expect_punct("(")?;
                let op = match self.next() {
                    Tok::Punct(">") => CmpOp::Gt,
                    Tok::Punct("<") => CmpOp::Lt,
                    Tok::Punct(">=") => CmpOp::Ge,
                    Tok::Punct("<=") => CmpOp::Le,
                    Tok::Punct("==") => CmpOp::Eq,
                    Tok::Punct("!=") => CmpOp::Ne,
                    _ => {
                        self.pos -= 1;
                        return self.err("expected comparison operator");
                    }
                };
                let lhs = self.term()?;
                let rhs = self.term()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Step::Test { op, lhs, rhs }
            }
            "ACHIEVE" => {
                let name = self.ident()?;
                Step::Achieve {
                    name,
                    args: self.terms_until_semi()?,
                }
            }
            "PERFORM" | "EXECUTE" => {
                let action = self.ident()?;
                let args = self.terms_until_semi()?;
                if kw == "PERFORM" {
                    Step::Perform { action, args }
                } else {
                    Step::Execute { action, args }
                }
            }
            "OR" => {
                let mut branches = Vec::new();
                while *self.peek() == Tok::Punct("{") {
                    self.next();
                    let mut block = Vec::new();
                    while *self.peek() != Tok::Punct("}") {
                        if *self.peek() == Tok::Eof {
                            return self.err("unterminated OR branch");
                        }
                        block.push(self.step()?);
                    }
                    self.next();
                    branches.push(block);
                }
                if branches.is_empty() {
                    return self.err("OR needs at least one branch");
                }
                if *self.peek() == Tok::Punct(";") {
                    self.next();
                }
                Step::Or(branches)
            }
            other => {
                self.pos -= 1;
                return self.err(format!("unknown step '{other}'"));
            }
        })
    }
}

fn leak(p: &str) -> &'static str {
    match p {
        ";" => ";",
        "{" => "{",
        "}" => "}",
        "(" => "(",
        ")" => ")",
        ":" => ":",
        _ => "?",
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("'{w}'"),
        Tok::Str(s) => format!("string {}", quote_str(s)),
        Tok::Num(n) => format!("number {n}"),
        Tok::Var(v) => format!("${v}"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".to_string(),
    }
}

fn check_bindings(plan: &Plan) -> Result<(), DslError> {
    let mut bound: BTreeSet<String> = plan
        .goal
        .args
        .iter()
        .filter_map(|t| match t {
            Term::Var(v) => Some(v.clone()),
            _ => None,
        })
        .collect();
    check_steps(&plan.precondition, &mut bound)?;
    check_steps(&plan.body, &mut bound)?;
    check_steps(&plan.effects, &mut bound)
}

fn require(terms: &[Term], bound: &BTreeSet<String>) -> Result<(), DslError> {
    for t in terms {
        if let Term::Var(v) = t {
            if !bound.contains(v) {
                return Err(DslError::UnboundVariable(v.clone()));
            }
        }
    }
    Ok(())
}

fn check_steps(steps: &[Step], bound: &mut BTreeSet<String>) -> Result<(), DslError> {
    for s in steps {
        match s {
            Step::Fact(p) | Step::Retrieve(p) => {
                bound.extend(p.vars().map(str::to_string));
            }
            Step::Test { lhs, rhs, .. } => require(&[lhs.clone(), rhs.clone()], bound)?,
            Step::Achieve { args, .. } | Step::Perform { args, .. } | Step::Execute { args, .. } => {
                require(args, bound)?
            }
            Step::Assert(p) | Step::Retract(p) => require(&p.args, bound)?,
            Step::Or(branches) => {
                let mut common: Option<BTreeSet<String>> = None;
                for b in branches {
                    let mut local = bound.clone();
                    check_steps(b, &mut local)?;
                    common = Some(match common {
                        None => local,
                        Some(c) => c.intersection(&local).cloned().collect(),
                    });
                }
                if let Some(c) = common {
                    *bound = c;
                }
            }
        }
    }
    Ok(())
}

/// Parses an agent program (goals, facts, plans).
pub fn parse_program(src: &str) -> Result<Program, DslError> {
    let toks = lex(src)?;
    Parser { toks, pos: 0 }.program()
}

/// Renders a program in canonical source form; `parse_program` reads it back
/// to an equal value.
pub fn write_program(p: &Program) -> String {
    let mut out = String::new();
    if !p.goals.is_empty() {
        out.push_str("GOALS:\n");
        for g in &p.goals {
            out.push_str("  ");
            out.push_str(&goal_source(g));
            out.push('\n');
        }
    }
    if !p.facts.is_empty() {
        out.push_str("FACTS:\n");
        for f in &p.facts {
            let args: Vec<String> = f.args.iter().map(quote_atom).collect();
            out.push_str(&format!("  FACT {} {};\n", f.predicate, args.join(" ")).replace(" ;", ";"));
        }
    }
    for plan in &p.plans {
        out.push_str(&plan_source(plan));
    }
    out
}

pub fn goal_source(g: &GoalDecl) -> String {
    let mut s = format!("{} {}", g.kind.keyword(), g.name);
    for a in &g.args {
        s.push(' ');
        s.push_str(&quote_atom(a));
    }
    if g.priority != 0 {
        s.push_str(&format!(" :PRIORITY {}", g.priority));
    }
    s.push(';');
    s
}

pub fn plan_source(plan: &Plan) -> String {
    let mut out = String::from("PLAN:\n{\nNAME:\n  ");
    out.push_str(&quote_str(&plan.name));
    out.push_str("\nGOAL:\n  ");
    out.push_str(&format!(
        "{} {}{};\n",
        plan.goal.kind.keyword(),
        plan.goal.name,
        terms_source(&plan.goal.args)
    ));
    if plan.utility != 0 {
        out.push_str(&format!("UTILITY: {};\n", plan.utility));
    }
    if !plan.precondition.is_empty() {
        out.push_str("PRECONDITION:\n");
        write_steps(&mut out, &plan.precondition, 1);
    }
    out.push_str("BODY:\n");
    write_steps(&mut out, &plan.body, 1);
    if !plan.effects.is_empty() {
        out.push_str("EFFECTS:\n");
        write_steps(&mut out, &plan.effects, 1);
    }
    out.push_str("}\n");
    out
}

fn terms_source(ts: &[Term]) -> String {
    ts.iter().map(|t| format!(" {}", t.source())).collect()
}

fn write_steps(out: &mut String, steps: &[Step], depth: usize) {
    let pad = "  ".repeat(depth);
    for s in steps {
        match s {
            Step::Or(branches) => {
                out.push_str(&format!("{pad}OR\n"));
                for b in branches {
                    out.push_str(&format!("{pad}{{\n"));
                    write_steps(out, b, depth + 1);
                    out.push_str(&format!("{pad}}}\n"));
                }
                out.push_str(&format!("{pad};\n"));
            }
            other => {
                out.push_str(&pad);
                out.push_str(&step_source(other));
                out.push('\n');
            }
        }
    }
}

/// Single-line source of a non-OR step.
pub fn step_source(s: &Step) -> String {
    let pat = |kw: &str, p: &Pattern| format!("{kw} {}{};", p.predicate, terms_source(&p.args));
    match s {
        Step::Fact(p) => pat("FACT", p),
        Step::Retrieve(p) => pat("RETRIEVE", p),
        Step::Assert(p) => pat("ASSERT", p),
        Step::Retract(p) => pat("RETRACT", p),
        Step::Test { op, lhs, rhs } => format!("TEST( {} {} {});", op.symbol(), lhs.source(), rhs.source()),
        Step::Achieve { name, args } => format!("ACHIEVE {name}{};", terms_source(args)),
        Step::Perform { action, args } => format!("PERFORM {action}{};", terms_source(args)),
        Step::Execute { action, args } => format!("EXECUTE {action}{};", terms_source(args)),
        Step::Or(_) => "OR ...".to_string(),
    }
}
