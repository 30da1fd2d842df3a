//! The plot model: a finite automaton over transition names whose runtime
//! moves are gated by condition guards.

mod minimize;

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::rng::SimRng;
use crate::scenario::{validate_scenario, Finding, Guard, Scenario};

pub use minimize::{determinize, minimize_brzozowski, minimize_hopcroft, table_filling_classes};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AutomatonError {
    #[error("scenario has lint errors: {}", .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    CompileError(Vec<Finding>),
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),
    #[error("automaton is not deterministic")]
    NotDeterministic,
    #[error("no enabled transition")]
    NoEnabledTransition,
    #[error("transition '{transition}' is not defined from state '{state}'")]
    IllegalTransition { state: String, transition: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Desirability {
    Desirable,
    Undesirable,
    /// Only on merged subset states that mix both.
    Mixed,
}

impl Desirability {
    pub fn join(self, other: Desirability) -> Desirability {
        if self == other {
            self
        } else {
            Desirability::Mixed
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Desirability::Desirable => "desirable",
            Desirability::Undesirable => "undesirable",
            Desirability::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Scene,
    /// Intermediate state of an expanded string label.
    Synthetic,
    Dead,
    /// Produced by determinization or minimization.
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateInfo {
    pub name: String,
    /// Scene ids, synthetic names, or `dead`.
    pub origins: BTreeSet<String>,
    pub desirability: Desirability,
    pub end: bool,
    pub kind: StateKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotAutomaton {
    pub name: String,
    pub symbols: Vec<String>,
    /// Runtime guard per symbol; absent on hand-built automata.
    pub guards: Vec<Option<Guard>>,
    pub states: Vec<StateInfo>,
    /// `delta[state][symbol]`: sorted target set.
    pub delta: Vec<Vec<Vec<usize>>>,
    pub starts: Vec<usize>,
    pub dead: Option<usize>,
}

/// Runtime position in the model plus story-manager bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelState {
    pub current: usize,
    pub played: BTreeSet<String>,
    pub playable: BTreeSet<String>,
    pub active: Option<String>,
    pub dead: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reach {
    pub reachable: BTreeSet<usize>,
    pub end_reaching: BTreeSet<usize>,
}

impl PlotAutomaton {
    /// Bare automaton with no states; used by tests and generators.
    pub fn new(name: impl Into<String>, symbols: Vec<String>) -> Self {
        let k = symbols.len();
        PlotAutomaton {
            name: name.into(),
            symbols,
            guards: vec![None; k],
            states: Vec::new(),
            delta: Vec::new(),
            starts: Vec::new(),
            dead: None,
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>, end: bool, desirability: Desirability) -> usize {
        let name = name.into();
        self.states.push(StateInfo {
            origins: [name.clone()].into(),
            name,
            desirability,
            end,
            kind: StateKind::Scene,
        });
        self.delta.push(vec![Vec::new(); self.symbols.len()]);
        self.states.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, symbol: usize, to: usize) {
        let cell = &mut self.delta[from][symbol];
        if let Err(i) = cell.binary_search(&to) {
            cell.insert(i, to);
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn symbol(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == name)
    }

    pub fn state(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn start(&self) -> usize {
        self.starts[0]
    }

    pub fn is_deterministic(&self) -> bool {
        self.starts.len() == 1 && self.delta.iter().all(|row| row.iter().all(|c| c.len() <= 1))
    }

    pub fn is_complete(&self) -> bool {
        self.delta.iter().all(|row| row.iter().all(|c| !c.is_empty()))
    }

    /// Single successor of a deterministic automaton.
    pub fn next(&self, state: usize, symbol: usize) -> Option<usize> {
        self.delta[state][symbol].first().copied()
    }

    /// Routes every undefined move to the dead state, creating it if needed.
    pub fn complete(&mut self) {
        if self.is_complete() {
            return;
        }
        let dead = match self.dead {
            Some(d) => d,
            None => {
                self.states.push(StateInfo {
                    name: "dead".into(),
                    origins: ["dead".to_string()].into(),
                    desirability: Desirability::Undesirable,
                    end: false,
                    kind: StateKind::Dead,
                });
                self.delta.push(vec![Vec::new(); self.symbols.len()]);
                self.dead = Some(self.states.len() - 1);
                self.states.len() - 1
            }
        };
        for row in &mut self.delta {
            for cell in row.iter_mut() {
                if cell.is_empty() {
                    cell.push(dead);
                }
            }
        }
    }

    pub fn completed(&self) -> Self {
        let mut a = self.clone();
        a.complete();
        a
    }

    pub fn word(&self, names: &[&str]) -> Result<Vec<usize>, AutomatonError> {
        names
            .iter()
            .map(|n| self.symbol(n).ok_or_else(|| AutomatonError::UnknownSymbol(n.to_string())))
            .collect()
    }

    /// Some run over the symbol indices ends in an end state.
    pub fn accepts_symbols(&self, word: &[usize]) -> bool {
        let mut cur: BTreeSet<usize> = self.starts.iter().copied().collect();
        for &s in word {
            cur = cur.iter().flat_map(|&q| self.delta[q][s].iter().copied()).collect();
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|&q| self.states[q].end)
    }

    pub fn accepts(&self, word: &[&str]) -> Result<bool, AutomatonError> {
        Ok(self.accepts_symbols(&self.word(word)?))
    }

    /// Forward closure from the start and backward closure from the ends.
    pub fn reach_analysis(&self) -> Reach {
        let n = self.len();
        let mut fwd = vec![BTreeSet::new(); n];
        let mut back = vec![BTreeSet::new(); n];
        for (q, row) in self.delta.iter().enumerate() {
            for cell in row {
                for &t in cell {
                    fwd[q].insert(t);
                    back[t].insert(q);
                }
            }
        }
        let close = |seeds: Vec<usize>, adj: &Vec<BTreeSet<usize>>| {
            let mut seen: BTreeSet<usize> = seeds.iter().copied().collect();
            let mut q: VecDeque<usize> = seeds.into();
            while let Some(x) = q.pop_front() {
                for &y in &adj[x] {
                    if seen.insert(y) {
                        q.push_back(y);
                    }
                }
            }
            seen
        };
        Reach {
            reachable: close(self.starts.clone(), &fwd),
            end_reaching: close((0..n).filter(|&q| self.states[q].end).collect(), &back),
        }
    }

    fn is_live_move(&self, from: usize, to: usize) -> bool {
        Some(to) != self.dead || Some(from) == self.dead
    }

    /// Deterministic text form: sorted states, sorted authored edges, and
    /// a closing line for the dead-state completion.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "automaton {}", self.name);
        let _ = writeln!(out, "states {}", self.len());
        let starts: Vec<&str> = self.starts.iter().map(|&s| self.states[s].name.as_str()).collect();
        let _ = writeln!(out, "start {}", starts.join(" "));
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.states[a].name.cmp(&self.states[b].name));
        for &q in &order {
            let s = &self.states[q];
            let _ = write!(out, "state {} {}", s.name, s.desirability.name());
            if s.end {
                out.push_str(" end");
            }
            match s.kind {
                StateKind::Synthetic => out.push_str(" synthetic"),
                StateKind::Dead => out.push_str(" dead"),
                StateKind::Merged => {
                    let o: Vec<&str> = s.origins.iter().map(String::as_str).collect();
                    let _ = write!(out, " from {}", o.join(","));
                }
                StateKind::Scene => {}
            }
            out.push('\n');
        }
        let mut edges = Vec::new();
        for (q, row) in self.delta.iter().enumerate() {
            for (sym, cell) in row.iter().enumerate() {
                for &t in cell {
                    if self.is_live_move(q, t) {
                        let label = match &self.guards[sym] {
                            Some(g) => format!("{}/{g}", self.symbols[sym]),
                            None => self.symbols[sym].clone(),
                        };
                        edges.push(format!("edge {} --{label}--> {}", self.states[q].name, self.states[t].name));
                    }
                }
            }
        }
        edges.sort();
        for e in edges {
            let _ = writeln!(out, "{e}");
        }
        if let Some(d) = self.dead {
            let _ = writeln!(out, "otherwise --> {}", self.states[d].name);
        }
        out
    }

    /// Graphviz description; moves into the dead state are omitted.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", self.name);
        out.push_str("  rankdir=LR;\n");
        for (q, s) in self.states.iter().enumerate() {
            let shape = if s.end { "doublecircle" } else { "circle" };
            let color = match s.desirability {
                Desirability::Desirable => "black",
                Desirability::Undesirable => "red",
                Desirability::Mixed => "orange",
            };
            let _ = writeln!(out, "  s{q} [label=\"{}\" shape={shape} color={color}];", s.name);
        }
        for &s in &self.starts {
            let _ = writeln!(out, "  start{s} [shape=point];\n  start{s} -> s{s};");
        }
        for (q, row) in self.delta.iter().enumerate() {
            for (sym, cell) in row.iter().enumerate() {
                for &t in cell {
                    if self.is_live_move(q, t) && Some(q) != self.dead {
                        let label = match &self.guards[sym] {
                            Some(g) => format!("{}\\n{g}", self.symbols[sym]),
                            None => self.symbols[sym].clone(),
                        };
                        let _ = writeln!(out, "  s{q} -> s{t} [label=\"{label}\"];");
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Scene a state belongs to at runtime, if any.
    pub fn scene_of(&self, state: usize) -> Option<&str> {
        let s = &self.states[state];
        match s.kind {
            StateKind::Scene => Some(&s.name),
            _ => None,
        }
    }

    pub fn initial_state(&self) -> ModelState {
        let start = self.start();
        let mut m = ModelState {
            current: start,
            played: BTreeSet::new(),
            playable: BTreeSet::new(),
            active: self.scene_of(start).map(str::to_string),
            dead: Some(start) == self.dead,
        };
        m.playable = self.playable_from(start);
        m
    }

    fn playable_from(&self, q: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for cell in &self.delta[q] {
            for &t in cell {
                if self.is_live_move(q, t) {
                    // follow synthetic chains to the scene they lead to
                    let mut cur = t;
                    let mut guard = 0;
                    while self.states[cur].kind == StateKind::Synthetic && guard < self.len() {
                        match self.delta[cur].iter().flatten().find(|&&x| Some(x) != self.dead) {
                            Some(&x) => cur = x,
                            None => break,
                        }
                        guard += 1;
                    }
                    if let Some(s) = self.scene_of(cur) {
                        out.insert(s.to_string());
                    }
                }
            }
        }
        out
    }

    /// Guarded symbols from the current state whose guard admits `evals`.
    pub fn enabled_transitions(&self, m: &ModelState, evals: &[bool]) -> Vec<usize> {
        (0..self.symbols.len())
            .filter(|&sym| {
                self.delta[m.current][sym]
                    .iter()
                    .any(|&t| self.is_live_move(m.current, t))
                    && self.guards[sym].as_ref().is_some_and(|g| g.admits(evals))
            })
            .collect()
    }

    /// Value-semantics step; the input state is left untouched.
    pub fn step(&self, m: &ModelState, symbol: usize) -> Result<ModelState, AutomatonError> {
        let illegal = || AutomatonError::IllegalTransition {
            state: self.states[m.current].name.clone(),
            transition: self.symbols.get(symbol).cloned().unwrap_or_else(|| format!("#{symbol}")),
        };
        if symbol >= self.symbols.len() {
            return Err(illegal());
        }
        let target = match self.delta[m.current][symbol].as_slice() {
            [t] => *t,
            _ => return Err(illegal()),
        };
        let mut next = m.clone();
        next.current = target;
        next.dead = Some(target) == self.dead;
        let new_active = match self.states[target].kind {
            StateKind::Scene => Some(self.states[target].name.clone()),
            StateKind::Dead => None,
            _ => m.active.clone(),
        };
        if new_active != m.active {
            if let Some(old) = &m.active {
                next.played.insert(old.clone());
            }
        }
        next.active = new_active;
        next.playable = self.playable_from(target);
        Ok(next)
    }
}

/// Uniform seeded pick; a singleton is returned without touching the rng.
pub fn choose_transition(enabled: &[usize], rng: &mut SimRng) -> Result<usize, AutomatonError> {
    match enabled {
        [] => Err(AutomatonError::NoEnabledTransition),
        [only] => Ok(*only),
        many => Ok(many[rng.below(many.len())]),
    }
}

fn primes(n: usize) -> String {
    "'".repeat(n)
}

/// Builds the model from a lint-clean scenario: scenes become states,
/// string labels of length k expand through k−1 synthetic states, and the
/// automaton is completed with an absorbing dead state.
pub fn compile(s: &Scenario) -> Result<PlotAutomaton, AutomatonError> {
    let report = validate_scenario(s);
    if report.has_errors() {
        return Err(AutomatonError::CompileError(report.findings));
    }
    let mut symbols = Vec::new();
    let mut guards = Vec::new();
    for t in &s.transitions {
        if t.guards.len() == 1 {
            symbols.push(t.name.clone());
            guards.push(Some(t.guards[0].clone()));
        } else {
            for (i, g) in t.guards.iter().enumerate() {
                symbols.push(format!("{}.{}", t.name, i + 1));
                guards.push(Some(g.clone()));
            }
        }
    }
    let mut a = PlotAutomaton::new(s.name.clone(), symbols);
    a.guards = guards;
    for sc in &s.scenes {
        let d = if sc.desirable {
            Desirability::Desirable
        } else {
            Desirability::Undesirable
        };
        a.add_state(sc.id.clone(), sc.end, d);
    }
    let mut synthetic_count = vec![0usize; s.scenes.len()];
    let mut sym = 0;
    for t in &s.transitions {
        let from = a.state(&t.from).expect("resolved by the parser");
        let to = a.state(&t.to).expect("resolved by the parser");
        let mut cur = from;
        for i in 0..t.guards.len() {
            let target = if i + 1 == t.guards.len() {
                to
            } else {
                synthetic_count[from] += 1;
                let name = format!("{}{}", t.from, primes(synthetic_count[from]));
                let q = a.add_state(name, false, a.states[from].desirability);
                a.states[q].kind = StateKind::Synthetic;
                q
            };
            a.add_edge(cur, sym, target);
            cur = target;
            sym += 1;
        }
    }
    a.starts = s.scenes.iter().position(|x| x.start).into_iter().collect();
    // the dead state always exists, even when the graph is already total
    a.states.push(StateInfo {
        name: "dead".into(),
        origins: ["dead".to_string()].into(),
        desirability: Desirability::Undesirable,
        end: false,
        kind: StateKind::Dead,
    });
    a.delta.push(vec![Vec::new(); a.symbols.len()]);
    a.dead = Some(a.states.len() - 1);
    a.complete();
    Ok(a)
}

#[cfg(test)]
mod tests;
