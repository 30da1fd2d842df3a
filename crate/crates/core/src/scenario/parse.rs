use std::collections::BTreeSet;

use super::*;
use crate::agent::{parse_program, DslError};
use crate::atom::{Atom, Term};

const TOP: [&str; 6] = ["value", "condition", "agent", "scene", "transition", "effector"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Open,
    Close,
    Eof,
}

#[derive(Clone)]
struct Scanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, m: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax {
        line,
        col,
        message: m.into(),
    }
}

impl Scanner {
    fn new(src: &str) -> Self {
        Scanner {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                self.skip_comment();
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    /// True when only blanks or a comment remain on the current line.
    fn at_line_end(&mut self) -> bool {
        while let Some(c) = self.peek() {
            match c {
                '\n' => return true,
                '#' => {
                    self.skip_comment();
                    return true;
                }
                c if c.is_whitespace() => {
                    self.bump();
                }
                _ => return false,
            }
        }
        true
    }

    fn here(&self) -> (usize, usize) {
        (self.line, self.col)
    }

    fn string_body(&mut self) -> Result<String, ScenarioError> {
        let (l, c) = self.here();
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(syntax(l, c, "unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(e) => out.push(e),
                    None => return Err(syntax(l, c, "unterminated string")),
                },
                Some(ch) => out.push(ch),
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize, usize), ScenarioError> {
        self.skip_ws();
        let (l, c) = self.here();
        let tok = match self.peek() {
            None => Tok::Eof,
            Some('{') => {
                self.bump();
                Tok::Open
            }
            Some('}') => {
                self.bump();
                Tok::Close
            }
            Some('"') => Tok::Str(self.string_body()?),
            Some(_) => {
                let mut w = String::new();
                let mut depth = 0i32;
                let mut quoted = false;
                while let Some(ch) = self.peek() {
                    if !quoted && depth == 0 && (ch.is_whitespace() || ch == '{' || ch == '}') {
                        break;
                    }
                    if ch == '\n' {
                        return Err(syntax(l, c, "unbalanced parentheses"));
                    }
                    match ch {
                        '"' => quoted = !quoted,
                        '\\' if quoted => {
                            w.push(ch);
                            self.bump();
                            if let Some(e) = self.bump() {
                                w.push(e);
                            }
                            continue;
                        }
                        '(' if !quoted => depth += 1,
                        ')' if !quoted => depth -= 1,
                        _ => {}
                    }
                    w.push(ch);
                    self.bump();
                }
                Tok::Word(w)
            }
        };
        Ok((tok, l, c))
    }

    fn peek_tok(&self) -> Tok {
        self.clone().next().map(|t| t.0).unwrap_or(Tok::Eof)
    }

    fn word(&mut self, what: &str) -> Result<(String, usize, usize), ScenarioError> {
        match self.next()? {
            (Tok::Word(w), l, c) => Ok((w, l, c)),
            (t, l, c) => Err(syntax(l, c, format!("expected {what}, found {}", show(&t)))),
        }
    }

    fn string(&mut self, what: &str) -> Result<String, ScenarioError> {
        match self.next()? {
            (Tok::Str(s), _, _) => Ok(s),
            (t, l, c) => Err(syntax(l, c, format!("expected {what}, found {}", show(&t)))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ScenarioError> {
        match self.next()? {
            (Tok::Word(w), _, _) if w == kw => Ok(()),
            (t, l, c) => Err(syntax(l, c, format!("expected '{kw}', found {}", show(&t)))),
        }
    }

    fn open(&mut self) -> Result<(), ScenarioError> {
        match self.next()? {
            (Tok::Open, _, _) => Ok(()),
            (t, l, c) => Err(syntax(l, c, format!("expected '{{', found {}", show(&t)))),
        }
    }

    /// Raw text between a `{` and its matching `}`, plus the position of
    /// the first character.
    fn raw_block(&mut self) -> Result<(String, usize, usize), ScenarioError> {
        self.open()?;
        let (l0, c0) = self.here();
        let start = self.pos;
        let mut depth = 1;
        loop {
            match self.peek() {
                None => return Err(syntax(l0, c0, "unterminated block")),
                Some('"') => {
                    self.string_body()?;
                    continue;
                }
                Some('#') => {
                    self.skip_comment();
                    continue;
                }
                Some('/') if self.chars.get(self.pos + 1) == Some(&'/') => {
                    self.skip_comment();
                    continue;
                }
                Some('{') => depth += 1,
                Some('}') => {
                    depth -= 1;
                    if depth == 0 {
                        let text: String = self.chars[start..self.pos].iter().collect();
                        self.bump();
                        return Ok((text, l0, c0));
                    }
                }
                _ => {}
            }
            self.bump();
        }
    }

    /// Error recovery: advance to the next line that starts with a
    /// top-level keyword.
    fn resync(&mut self) {
        loop {
            while let Some(c) = self.bump() {
                if c == '\n' {
                    break;
                }
            }
            if self.peek().is_none() {
                return;
            }
            let mut probe = self.clone();
            while matches!(probe.peek(), Some(c) if c == ' ' || c == '\t') {
                probe.bump();
            }
            if let Ok((Tok::Word(w), _, _)) = probe.clone().next() {
                if probe.peek() != Some('\n') && TOP.contains(&w.as_str()) {
                    return;
                }
            }
        }
    }
}

fn show(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("'{w}'"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Open => "'{'".into(),
        Tok::Close => "'}'".into(),
        Tok::Eof => "end of file".into(),
    }
}

fn dsl_error(e: DslError, l0: usize, c0: usize, ctx: &str) -> ScenarioError {
    match e {
        DslError::Syntax { line, col, message } => syntax(
            l0 + line - 1,
            if line == 1 { c0 + col - 1 } else { col },
            format!("{ctx}: {message}"),
        ),
        DslError::UnboundVariable(v) => syntax(l0, c0, format!("{ctx}: unbound variable ${v}")),
    }
}

fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '"' => {
                quoted = !quoted;
                cur.push(ch);
            }
            '\\' if quoted => {
                cur.push(ch);
                if let Some(e) = chars.next() {
                    cur.push(e);
                }
            }
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

fn parse_term(s: &str) -> Result<Term, String> {
    let s = s.trim();
    if s == "*" {
        return Ok(Term::Wild);
    }
    if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        let mut out = String::new();
        let mut it = inner.chars();
        while let Some(c) = it.next() {
            if c == '\\' {
                match it.next() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(e) => out.push(e),
                    None => {}
                }
            } else {
                out.push(c);
            }
        }
        return Ok(Term::Atom(Atom::Str(out)));
    }
    if let Some(n) = Num::parse(s) {
        return Ok(Term::Atom(Atom::Num(n)));
    }
    if is_ident(s) {
        return Ok(Term::Atom(Atom::str(s)));
    }
    Err(format!("bad pattern argument '{s}'"))
}

/// `pred(arg, …)` or bare `pred`. Arguments are quoted strings, bare
/// identifiers, numbers or `*`.
pub fn parse_pattern(s: &str) -> Result<Pattern, String> {
    let s = s.trim();
    match s.find('(') {
        None if is_ident(s) => Ok(Pattern::new(s, Vec::new())),
        None => Err(format!("bad pattern '{s}'")),
        Some(i) => {
            let pred = &s[..i];
            let Some(inner) = s[i + 1..].strip_suffix(')') else {
                return Err(format!("pattern '{s}' lacks ')'"));
            };
            if !is_ident(pred) {
                return Err(format!("bad predicate '{pred}'"));
            }
            let args = split_args(inner)
                .iter()
                .map(|a| parse_term(a))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Pattern::new(pred, args))
        }
    }
}

/// `Agent:pattern`, `*:pattern`, `global:name` or `value:name`.
pub fn parse_path(s: &str) -> Result<ParamPath, String> {
    let (head, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("parameter path '{s}' lacks ':'"))?;
    match head {
        "global" if is_ident(rest) => Ok(ParamPath::Global(rest.into())),
        "value" if is_ident(rest) => Ok(ParamPath::Value(rest.into())),
        "*" => Ok(ParamPath::Fact {
            scope: Scope::All,
            pattern: parse_pattern(rest)?,
        }),
        a if is_ident(a) => Ok(ParamPath::Fact {
            scope: Scope::Agent(a.into()),
            pattern: parse_pattern(rest)?,
        }),
        _ => Err(format!("bad parameter path '{s}'")),
    }
}

fn agent_item(s: &str, what: &str) -> Result<(String, String), String> {
    match s.split_once(':') {
        Some((a, n)) if is_ident(a) && !n.is_empty() => Ok((a.into(), n.into())),
        _ => Err(format!("expected Agent:{what}, found '{s}'")),
    }
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    let open = s.find('(').ok_or_else(|| format!("bad aggregation '{s}'"))?;
    let func = match &s[..open] {
        "max" => AggFn::Max,
        "min" => AggFn::Min,
        "avg" => AggFn::Avg,
        "sum" => AggFn::Sum,
        "count" => AggFn::Count,
        f => return Err(format!("unknown aggregation '{f}'")),
    };
    // matching close paren, respecting quotes
    let mut depth = 0;
    let mut quoted = false;
    let mut close = None;
    for (i, ch) in s.char_indices().skip(open) {
        match ch {
            '"' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close.ok_or_else(|| format!("bad aggregation '{s}'"))?;
    let (scope, pattern) = match parse_path(&s[open + 1..close])? {
        ParamPath::Fact { scope, pattern } => (scope, pattern),
        _ => return Err("aggregations range over facts".into()),
    };
    let mut mul = 1;
    let mut add = 0;
    let mut rest = &s[close + 1..];
    while !rest.is_empty() {
        let op = &rest[..1];
        let end = rest[1..].find(['*', '+']).map_or(rest.len(), |i| i + 1);
        let n: i64 = rest[1..end]
            .parse()
            .map_err(|_| format!("bad aggregation suffix '{rest}'"))?;
        match op {
            "*" => mul = n,
            "+" => add = n,
            _ => return Err(format!("bad aggregation suffix '{rest}'")),
        }
        rest = &rest[end..];
    }
    Ok(Aggregation {
        func,
        scope,
        pattern,
        mul,
        add,
    })
}

struct Parser {
    sc: Scanner,
    errors: Vec<ScenarioError>,
    s: Scenario,
}

type PResult<T> = Result<T, ScenarioError>;

impl Parser {
    fn num(&mut self, what: &str) -> PResult<Num> {
        let (w, l, c) = self.sc.word(what)?;
        Num::parse(&w).ok_or_else(|| syntax(l, c, format!("expected {what}, found '{w}'")))
    }

    fn int(&mut self, what: &str) -> PResult<i64> {
        let (w, l, c) = self.sc.word(what)?;
        w.parse()
            .map_err(|_| syntax(l, c, format!("expected {what}, found '{w}'")))
    }

    fn header(&mut self) -> PResult<()> {
        let (w, _, _) = self.sc.word("scenario name")?;
        self.s.name = w;
        self.sc.open()?;
        loop {
            let (t, l, c) = self.sc.next()?;
            let key = match t {
                Tok::Close => return Ok(()),
                Tok::Word(w) => w,
                t => return Err(syntax(l, c, format!("expected setting, found {}", show(&t)))),
            };
            let st = &mut self.s.settings;
            match key.as_str() {
                "player" => st.player = self.sc.word("player name")?.0,
                "radical" => self.s.settings.radical = self.int("radical threshold")?,
                "max_updates" => self.s.settings.max_updates = self.int("update count")? as usize,
                "oscillation" => {
                    let (v, l, c) = self.sc.word("on/off")?;
                    self.s.settings.oscillation = match v.as_str() {
                        "on" => true,
                        "off" => false,
                        _ => return Err(syntax(l, c, "expected 'on' or 'off'")),
                    };
                }
                "global" => {
                    let (n, _, _) = self.sc.word("global name")?;
                    let v = self.num("number")?;
                    self.s.settings.globals.push((n, v));
                }
                "primitive" => loop {
                    let (n, _, _) = self.sc.word("primitive name")?;
                    self.s.settings.primitives.push(n);
                    if self.sc.at_line_end() {
                        break;
                    }
                },
                "repertoire" => {
                    let line = self.sc.string("input line")?;
                    self.s.settings.repertoire.push(line);
                }
                "cost" => {
                    let (a, l, c) = self.sc.word("action name")?;
                    let action = ActionKind::from_name(&a)
                        .ok_or_else(|| syntax(l, c, format!("unknown action '{a}'")))?;
                    let n = self.int("cost")?;
                    self.s.settings.costs.push((action, n));
                }
                other => return Err(syntax(l, c, format!("unknown setting '{other}'"))),
            }
        }
    }

    fn value(&mut self) -> PResult<()> {
        let (name, _, _) = self.sc.word("value name")?;
        let (range, l, c) = self.sc.word("range lo..hi")?;
        let (lo, hi) = range
            .split_once("..")
            .and_then(|(a, b)| Some((a.parse::<i64>().ok()?, b.parse::<i64>().ok()?)))
            .ok_or_else(|| syntax(l, c, format!("bad range '{range}'")))?;
        if lo >= hi {
            return Err(syntax(l, c, format!("empty range '{range}'")));
        }
        self.sc.keyword("poles")?;
        let poles = self.sc.string("poles \"low/high\"")?;
        let (pole_low, pole_high) = poles
            .split_once('/')
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .ok_or_else(|| syntax(l, c, "poles must read \"low/high\""))?;
        self.sc.keyword("derive")?;
        let (expr, el, ec) = self.sc.word("aggregation")?;
        let derive = parse_aggregation(&expr).map_err(|m| syntax(el, ec, m))?;
        let mut neutral = None;
        if !self.sc.at_line_end() {
            self.sc.keyword("neutral")?;
            neutral = Some(self.int("neutral value")?);
        }
        self.s.values.push(StoryValueDef {
            name,
            lo,
            hi,
            pole_low,
            pole_high,
            derive,
            neutral,
        });
        Ok(())
    }

    fn condition(&mut self) -> PResult<()> {
        let expected = self.s.conditions.len();
        let (iw, l, c) = self.sc.word("condition index")?;
        let index: usize = iw
            .parse()
            .map_err(|_| syntax(l, c, format!("bad condition index '{iw}'")))?;
        if index != expected {
            return Err(syntax(
                l,
                c,
                format!("condition index {index} out of sequence (expected {expected})"),
            ));
        }
        let (kind, kl, kc) = self.sc.word("condition kind")?;
        let (subj, sl, scol) = self.sc.word("condition subject")?;
        let path = |s: &str| parse_path(s).map_err(|m| syntax(sl, scol, m));
        let kind = match kind.as_str() {
            "Range" => ConditionKind::Range {
                path: path(&subj)?,
                lo: self.num("lower bound")?,
                hi: self.num("upper bound")?,
            },
            "Boolean" => ConditionKind::Boolean { path: path(&subj)? },
            "Greater" => ConditionKind::Greater {
                path: path(&subj)?,
                threshold: self.num("threshold")?,
            },
            "Less" => ConditionKind::Less {
                path: path(&subj)?,
                threshold: self.num("threshold")?,
            },
            "Equal" => ConditionKind::Equal {
                path: path(&subj)?,
                threshold: self.num("threshold")?,
            },
            "Knows" => {
                let (agent, pat) = agent_item(&subj, "pattern").map_err(|m| syntax(sl, scol, m))?;
                ConditionKind::Knows {
                    agent,
                    pattern: parse_pattern(&pat).map_err(|m| syntax(sl, scol, m))?,
                }
            }
            "Feels" => {
                let (agent, emotion) = agent_item(&subj, "emotion").map_err(|m| syntax(sl, scol, m))?;
                ConditionKind::Feels {
                    agent,
                    emotion,
                    min: self.num("intensity")?,
                }
            }
            "HasGoal" => {
                let (agent, goal) = agent_item(&subj, "goal").map_err(|m| syntax(sl, scol, m))?;
                ConditionKind::HasGoal { agent, goal }
            }
            "HasPlan" => {
                let (agent, plan) = agent_item(&subj, "plan").map_err(|m| syntax(sl, scol, m))?;
                ConditionKind::HasPlan { agent, plan }
            }
            other => return Err(syntax(kl, kc, format!("unknown condition kind '{other}'"))),
        };
        self.s.conditions.push(ConditionDef { index, kind });
        Ok(())
    }

    fn agent(&mut self) -> PResult<()> {
        let (name, _, _) = self.sc.word("agent name")?;
        let mut offstage = false;
        if self.sc.peek_tok() == Tok::Word("offstage".into()) {
            self.sc.next()?;
            offstage = true;
        }
        let (src, l, c) = self.sc.raw_block()?;
        let program = parse_program(&src).map_err(|e| dsl_error(e, l, c, &format!("agent {name}")))?;
        self.s.agents.push(AgentDef {
            name,
            offstage,
            program,
        });
        Ok(())
    }

    fn scene(&mut self) -> PResult<()> {
        let (id, _, _) = self.sc.word("scene id")?;
        let mut scene = SceneDef {
            id,
            desirable: true,
            start: false,
            end: false,
            kind: SceneKind::Satellite,
            climactic: false,
            beats: Vec::new(),
        };
        loop {
            match self.sc.next()? {
                (Tok::Open, _, _) => break,
                (Tok::Word(w), l, c) => match w.as_str() {
                    "desirable" => scene.desirable = true,
                    "undesirable" => scene.desirable = false,
                    "start" => scene.start = true,
                    "end" => scene.end = true,
                    "kernel" => scene.kind = SceneKind::Kernel,
                    "satellite" => scene.kind = SceneKind::Satellite,
                    "climactic" => scene.climactic = true,
                    other => return Err(syntax(l, c, format!("unknown scene flag '{other}'"))),
                },
                (t, l, c) => return Err(syntax(l, c, format!("expected scene flag, found {}", show(&t)))),
            }
        }
        loop {
            match self.sc.next()? {
                (Tok::Close, _, _) => break,
                (Tok::Word(w), _, _) if w == "beat" => {
                    let (bid, _, _) = self.sc.word("beat id")?;
                    self.sc.keyword("agent")?;
                    let (agent, _, _) = self.sc.word("agent name")?;
                    let (src, l, c) = self.sc.raw_block()?;
                    let ctx = format!("beat {}/{bid}", scene.id);
                    let program = parse_program(&src).map_err(|e| dsl_error(e, l, c, &ctx))?;
                    if !program.facts.is_empty() {
                        return Err(syntax(l, c, format!("{ctx}: beats may not declare FACTS")));
                    }
                    scene.beats.push(BeatDef {
                        id: bid,
                        agent,
                        program,
                    });
                }
                (t, l, c) => return Err(syntax(l, c, format!("expected 'beat' or '}}', found {}", show(&t)))),
            }
        }
        self.s.scenes.push(scene);
        Ok(())
    }

    fn transition(&mut self) -> PResult<()> {
        let (name, _, _) = self.sc.word("transition name")?;
        let (from, _, _) = self.sc.word("source scene")?;
        self.sc.keyword("->")?;
        let (to, _, _) = self.sc.word("target scene")?;
        self.sc.skip_ws();
        let (gl, gc) = self.sc.here();
        self.sc.keyword("guard")?;
        let mut guards = Vec::new();
        while let Tok::Str(_) = self.sc.peek_tok() {
            let (t, l, c) = self.sc.next()?;
            let Tok::Str(g) = t else { unreachable!() };
            guards.push(
                Guard::parse(&g).ok_or_else(|| syntax(l, c, format!("guard \"{g}\" uses symbols outside {{0,1,?}}")))?,
            );
        }
        if guards.is_empty() {
            return Err(syntax(gl, gc, format!("transition {name} has a label of length 0")));
        }
        self.s.transitions.push(TransitionDef {
            name,
            from,
            to,
            guards,
        });
        Ok(())
    }

    fn effector(&mut self) -> PResult<()> {
        let (id, _, _) = self.sc.word("effector id")?;
        let (cls, l, c) = self.sc.word("effector class")?;
        let class = EffectorClass::ALL
            .into_iter()
            .find(|k| k.name() == cls)
            .ok_or_else(|| syntax(l, c, format!("unknown effector class '{cls}'")))?;
        let (act, l, c) = self.sc.word("action")?;
        let action = ActionKind::from_name(&act).ok_or_else(|| syntax(l, c, format!("unknown action '{act}'")))?;
        let mut args = Vec::new();
        let mut cost = None;
        while !self.sc.at_line_end() {
            match self.sc.next()? {
                (Tok::Word(w), _, _) if w == "cost" => {
                    let (n, l, c) = self.sc.word("cost")?;
                    let n: i64 = n.parse().map_err(|_| syntax(l, c, format!("bad cost '{n}'")))?;
                    if n <= 0 {
                        return Err(syntax(l, c, "effector cost must be positive"));
                    }
                    cost = Some(n);
                }
                (Tok::Word(w), _, _) | (Tok::Str(w), _, _) => args.push(w),
                (t, l, c) => return Err(syntax(l, c, format!("unexpected {}", show(&t)))),
            }
        }
        self.s.effectors.push(EffectorDef {
            id,
            class,
            action,
            args,
            cost,
        });
        Ok(())
    }

    fn item(&mut self) -> PResult<bool> {
        let (t, l, c) = self.sc.next()?;
        match t {
            Tok::Eof => Ok(false),
            Tok::Word(w) => {
                match w.as_str() {
                    "value" => self.value()?,
                    "condition" => self.condition()?,
                    "agent" => self.agent()?,
                    "scene" => self.scene()?,
                    "transition" => self.transition()?,
                    "effector" => self.effector()?,
                    "scenario" => return Err(syntax(l, c, "duplicate 'scenario' header")),
                    other => return Err(syntax(l, c, format!("unknown item '{other}'"))),
                }
                Ok(true)
            }
            t => Err(syntax(l, c, format!("expected an item, found {}", show(&t)))),
        }
    }

    fn resolve(&mut self) {
        let s = &self.s;
        let mut errs = Vec::new();
        let mut dup = |names: Vec<&str>| {
            let mut seen = BTreeSet::new();
            for n in names {
                if !seen.insert(n) {
                    errs.push(ScenarioError::DuplicateName(n.to_string()));
                }
            }
        };
        dup(s.scenes.iter().map(|x| x.id.as_str()).collect());
        dup(s.transitions.iter().map(|x| x.name.as_str()).collect());
        dup(s.agents.iter().map(|x| x.name.as_str()).collect());
        dup(s.values.iter().map(|x| x.name.as_str()).collect());
        dup(s.effectors.iter().map(|x| x.id.as_str()).collect());
        for sc in &s.scenes {
            dup(sc.beats.iter().map(|b| b.id.as_str()).collect());
        }
        let agent = |a: &str| s.agent(a).is_some();
        let mut unresolved = |n: &str| errs.push(ScenarioError::UnresolvedReference(n.to_string()));
        let check_path = |p: &ParamPath, unresolved: &mut dyn FnMut(&str)| match p {
            ParamPath::Fact {
                scope: Scope::Agent(a),
                ..
            } if !agent(a) => unresolved(a),
            ParamPath::Global(g) if g != "beat" && !s.settings.globals.iter().any(|(n, _)| n == g) => unresolved(g),
            ParamPath::Value(v) if s.value(v).is_none() => unresolved(v),
            _ => {}
        };
        for v in &s.values {
            if let Scope::Agent(a) = &v.derive.scope {
                if !agent(a) {
                    unresolved(a);
                }
            }
        }
        for cnd in &s.conditions {
            match &cnd.kind {
                ConditionKind::Range { path, .. }
                | ConditionKind::Boolean { path }
                | ConditionKind::Greater { path, .. }
                | ConditionKind::Less { path, .. }
                | ConditionKind::Equal { path, .. } => check_path(path, &mut unresolved),
                k => {
                    let a = k.agent().unwrap_or_default();
                    if !agent(a) {
                        unresolved(a);
                    }
                }
            }
        }
        for sc in &s.scenes {
            for b in &sc.beats {
                if !agent(&b.agent) {
                    unresolved(&b.agent);
                }
            }
        }
        for t in &s.transitions {
            for end in [&t.from, &t.to] {
                if s.scene(end).is_none() {
                    unresolved(end);
                }
            }
        }
        for e in &s.effectors {
            let targets_agent = matches!(
                e.action,
                ActionKind::SetFact
                    | ActionKind::RemovePlan
                    | ActionKind::ReplacePlan
                    | ActionKind::AddGoal
                    | ActionKind::RemoveGoal
                    | ActionKind::IntroduceCharacter
                    | ActionKind::RemoveCharacter
            );
            if targets_agent {
                match e.args.first() {
                    Some(a) if agent(a) => {}
                    Some(a) => unresolved(a),
                    None => unresolved(&format!("{}: target agent", e.id)),
                }
            }
        }
        let k = s.conditions.len();
        for t in &s.transitions {
            for g in &t.guards {
                if g.len() != k {
                    errs.push(ScenarioError::GuardLengthMismatch {
                        transition: t.name.clone(),
                        expected: k,
                        got: g.len(),
                    });
                }
            }
        }
        self.errors.extend(errs);
    }
}

/// Parses a whole `.plot` file, collecting every error rather than stopping
/// at the first.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<ScenarioError>> {
    let mut p = Parser {
        sc: Scanner::new(text),
        errors: Vec::new(),
        s: Scenario::empty(""),
    };
    match p.sc.next() {
        Ok((Tok::Word(w), _, _)) if w == "scenario" => {
            if let Err(e) = p.header() {
                p.errors.push(e);
                p.sc.resync();
            }
        }
        Ok((_, l, c)) => {
            p.errors.push(syntax(l, c, "expected 'scenario' header"));
            if p.sc.peek().is_some() {
                p.sc.resync();
            }
        }
        Err(e) => {
            p.errors.push(e);
            p.sc.resync();
        }
    }
    loop {
        match p.item() {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                p.errors.push(e);
                p.sc.resync();
            }
        }
    }
    if p.errors.is_empty() {
        p.resolve();
    }
    if p.errors.is_empty() {
        Ok(p.s)
    } else {
        Err(p.errors)
    }
}
