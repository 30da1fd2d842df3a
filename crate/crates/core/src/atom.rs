//! Ground values, facts, and positional patterns over them.

use std::collections::BTreeMap;
use std::fmt;

/// Fixed-point number in tenths. World models never hold floats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Num(i64);

impl Num {
    pub const ZERO: Num = Num(0);

    pub fn from_int(v: i64) -> Self {
        Num(v * 10)
    }

    pub fn from_tenths(t: i64) -> Self {
        Num(t)
    }

    pub fn tenths(self) -> i64 {
        self.0
    }

    /// Integer part, rounded half away from zero.
    pub fn round(self) -> i64 {
        if self.0 >= 0 {
            (self.0 + 5) / 10
        } else {
            (self.0 - 5) / 10
        }
    }

    pub fn abs_diff(self, other: Num) -> Num {
        Num((self.0 - other.0).abs())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        if body.is_empty() {
            return None;
        }
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (body, None),
        };
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut t: i64 = int.parse::<i64>().ok()?.checked_mul(10)?;
        if let Some(f) = frac {
            if f.len() != 1 || !f.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            t += i64::from(f.as_bytes()[0] - b'0');
        }
        Some(Num(if neg { -t } else { t }))
    }
}

impl std::ops::Add for Num {
    type Output = Num;
    fn add(self, rhs: Num) -> Num {
        Num(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Num {
    type Output = Num;
    fn sub(self, rhs: Num) -> Num {
        Num(self.0 - rhs.0)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 10 == 0 {
            write!(f, "{}", self.0 / 10)
        } else {
            let sign = if self.0 < 0 { "-" } else { "" };
            write!(f, "{}{}.{}", sign, self.0.abs() / 10, self.0.abs() % 10)
        }
    }
}

/// A ground argument: a string/symbol or a number.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Str(String),
    Num(Num),
}

impl Atom {
    pub fn str(s: impl Into<String>) -> Self {
        Atom::Str(s.into())
    }

    pub fn int(v: i64) -> Self {
        Atom::Num(Num::from_int(v))
    }

    pub fn as_num(&self) -> Option<Num> {
        match self {
            Atom::Num(n) => Some(*n),
            Atom::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Atom::Str(s) => Some(s),
            Atom::Num(_) => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Str(s) => f.write_str(s),
            Atom::Num(n) => write!(f, "{n}"),
        }
    }
}

/// Renders an atom in source form: strings quoted, numbers bare.
pub fn quote_atom(a: &Atom) -> String {
    match a {
        Atom::Str(s) => quote_str(s),
        Atom::Num(n) => n.to_string(),
    }
}

pub fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Ground fact, e.g. `friends("Lovisa","Karin",1)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<Atom>,
}

/// Identity of a fact slot: predicate plus key arguments. When the last
/// argument is numeric it is the slot's value and not part of the key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactKey {
    pub predicate: String,
    pub key_args: Vec<Atom>,
}

impl Fact {
    pub fn new(predicate: impl Into<String>, args: Vec<Atom>) -> Self {
        Fact {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn key(&self) -> FactKey {
        let key_args = match self.args.last() {
            Some(Atom::Num(_)) => self.args[..self.args.len() - 1].to_vec(),
            _ => self.args.clone(),
        };
        FactKey {
            predicate: self.predicate.clone(),
            key_args,
        }
    }

    /// Numeric slot value, if the fact carries one.
    pub fn value(&self) -> Option<Num> {
        self.args.last().and_then(Atom::as_num)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.key_args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Pattern argument.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Atom(Atom),
    Var(String),
    Wild,
}

pub type Bindings = BTreeMap<String, Atom>;

impl Term {
    pub fn resolve(&self, b: &Bindings) -> Option<Atom> {
        match self {
            Term::Atom(a) => Some(a.clone()),
            Term::Var(v) => b.get(v).cloned(),
            Term::Wild => None,
        }
    }

    pub fn source(&self) -> String {
        match self {
            Term::Atom(a) => quote_atom(a),
            Term::Var(v) => format!("${v}"),
            Term::Wild => "*".to_string(),
        }
    }
}

/// Positional pattern over facts of one predicate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Pattern {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Pattern {
            predicate: predicate.into(),
            args,
        }
    }

    /// Matches `fact` against all arguments, extending `bindings` on success.
    pub fn unify(&self, fact: &Fact, bindings: &Bindings) -> Option<Bindings> {
        if fact.predicate != self.predicate || fact.args.len() != self.args.len() {
            return None;
        }
        let mut out = bindings.clone();
        for (t, a) in self.args.iter().zip(&fact.args) {
            match t {
                Term::Wild => {}
                Term::Atom(x) => {
                    if x != a {
                        return None;
                    }
                }
                Term::Var(v) => match out.get(v) {
                    Some(bound) if bound != a => return None,
                    Some(_) => {}
                    None => {
                        out.insert(v.clone(), a.clone());
                    }
                },
            }
        }
        Some(out)
    }

    pub fn matches(&self, fact: &Fact) -> bool {
        self.unify(fact, &Bindings::new()).is_some()
    }

    /// Matches a fact slot key against the pattern (the pattern names key
    /// arguments only).
    pub fn matches_key(&self, key: &FactKey) -> bool {
        key.predicate == self.predicate
            && key.key_args.len() == self.args.len()
            && self.args.iter().zip(&key.key_args).all(|(t, a)| match t {
                Term::Wild | Term::Var(_) => true,
                Term::Atom(x) => x == a,
            })
    }

    /// Instantiates the pattern into a ground fact; `None` if a variable is
    /// unbound or a wildcard remains.
    pub fn ground(&self, b: &Bindings) -> Option<Fact> {
        let args = self
            .args
            .iter()
            .map(|t| t.resolve(b))
            .collect::<Option<Vec<_>>>()?;
        Some(Fact::new(self.predicate.clone(), args))
    }

    /// Substitutes bound variables, leaving unbound ones and wildcards.
    pub fn substitute(&self, b: &Bindings) -> Pattern {
        Pattern {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => b.get(v).map(|a| Term::Atom(a.clone())).unwrap_or(Term::Wild),
                    other => other.clone(),
                })
                .collect(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }

    /// `pred(a,b,*)` form used by scenario files and logs.
    pub fn call_form(&self) -> String {
        let args: Vec<String> = self.args.iter().map(Term::source).collect();
        format!("{}({})", self.predicate, args.join(","))
    }
}
