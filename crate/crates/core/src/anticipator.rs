//! Lookahead over the live system: snapshot at the barrier, run forward with
//! a stand-in player, and when the prediction leaves the desirable part of
//! the automaton, search the effector catalog for the cheapest set that
//! keeps it there.

use std::collections::BTreeSet;
use std::fmt;

use crate::agent::{Direction, WriteRecord};
use crate::atom::{Atom, FactKey, Pattern, Term};
use crate::automaton::{Desirability, ModelState};
use crate::dialog::convert_input;
use crate::effector::{apply_all, Effect, Effector, EffectorError, UpdateTarget, WriteSet};
use crate::policy::PlayerPolicy;
use crate::scenario::{ConditionKind, ParamPath, Scope};
use crate::world::{SystemSnapshot, TickOutcome, World, WorldError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnticipatorError {
    #[error("lookahead horizon must be at least one beat")]
    HorizonZero,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Effector(#[from] EffectorError),
}

/// Outcome of a lookahead: the first bad transition, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Ok,
    EntersUndesirable(u64),
    EntersDead(u64),
}

impl Verdict {
    pub fn is_ok(self) -> bool {
        self == Verdict::Ok
    }

    pub fn beat(self) -> Option<u64> {
        match self {
            Verdict::Ok => None,
            Verdict::EntersUndesirable(b) | Verdict::EntersDead(b) => Some(b),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Ok => f.write_str("ok"),
            Verdict::EntersUndesirable(b) => write!(f, "enters_undesirable({b})"),
            Verdict::EntersDead(b) => write!(f, "enters_dead({b})"),
        }
    }
}

/// One simulated beat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionStep {
    pub beat: u64,
    /// Model state and uncached condition values while parked at the barrier.
    pub barrier_model: ModelState,
    pub barrier_evals: Vec<bool>,
    /// After the beat.
    pub model: ModelState,
    pub evals: Vec<bool>,
    pub fired: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub start_beat: u64,
    pub horizon: u64,
    pub trajectory: Vec<PredictionStep>,
    pub verdict: Verdict,
    /// Symbol of the first bad transition.
    pub bad_symbol: Option<usize>,
    pub writes: Vec<WriteRecord>,
    pub outcomes: Vec<TickOutcome>,
}

impl Prediction {
    pub fn step_at(&self, beat: u64) -> Option<&PredictionStep> {
        self.trajectory.iter().find(|s| s.beat == beat)
    }
}

fn barrier_evals(w: &World) -> Vec<bool> {
    let view = w.view();
    w.scenario.conditions.iter().map(|c| view.evaluate(&c.kind)).collect()
}

fn collect_trace(w: &mut World, into: &mut Vec<WriteRecord>) {
    for a in &mut w.agents {
        into.extend(a.take_trace());
    }
}

/// Runs a copy of the snapshot forward. The snapshot sits at a barrier, so
/// the first simulated beat is the snapshot's own; later beats take input
/// from `stub`. Stops early at an end state.
pub fn simulate(snap: &SystemSnapshot, horizon: u64, stub: &PlayerPolicy) -> Result<Prediction, AnticipatorError> {
    if horizon == 0 {
        return Err(AnticipatorError::HorizonZero);
    }
    let mut w = snap.restore();
    let mut stub = stub.clone();
    for a in &mut w.agents {
        a.set_tracing(true);
    }
    let mut p = Prediction {
        start_beat: w.beat,
        horizon,
        trajectory: Vec::new(),
        verdict: Verdict::Ok,
        bad_symbol: None,
        writes: Vec::new(),
        outcomes: Vec::new(),
    };
    for i in 0..horizon {
        let mut out = if i == 0 {
            TickOutcome {
                beat: w.beat,
                ..Default::default()
            }
        } else {
            if w.at_end() {
                break;
            }
            w.begin_tick(&stub.next_input())?
        };
        let barrier_model = w.model.clone();
        let bevals = barrier_evals(&w);
        w.finish_tick(&mut out)?;
        collect_trace(&mut w, &mut p.writes);
        if let (Some(sym), Verdict::Ok) = (out.fired, p.verdict) {
            let st = &w.automaton.states[w.model.current];
            if w.model.dead {
                p.verdict = Verdict::EntersDead(w.beat);
                p.bad_symbol = Some(sym);
            } else if st.desirability == Desirability::Undesirable {
                p.verdict = Verdict::EntersUndesirable(w.beat);
                p.bad_symbol = Some(sym);
            }
        }
        p.trajectory.push(PredictionStep {
            beat: w.beat,
            barrier_model,
            barrier_evals: bevals,
            model: w.model.clone(),
            evals: out.evals.clone(),
            fired: out.fired,
        });
        p.outcomes.push(out);
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sensibility {
    Keep,
    Discard(String),
}

/// Conditions whose value decides which transition leaves the current state.
pub fn watched_conditions(w: &World) -> BTreeSet<usize> {
    let a = &w.automaton;
    (0..a.symbols.len())
        .filter(|&s| !a.delta[w.model.current][s].is_empty())
        .filter_map(|s| a.guards[s].as_ref())
        .flat_map(|g| g.fixed().map(|(i, _)| i))
        .collect()
}

/// Whether a standing prediction still describes the live system: it must
/// cover the current beat, agree on the model state at the barrier, and
/// agree on every watched condition.
pub fn sensibility_check(pred: &Prediction, live: &SystemSnapshot) -> Sensibility {
    let Some(step) = pred.step_at(live.beat()) else {
        return Sensibility::Discard(format!("beat {} outside prediction", live.beat()));
    };
    if step.barrier_model != *live.model() {
        return Sensibility::Discard("model state diverged".into());
    }
    let now = barrier_evals(live.world());
    for i in watched_conditions(live.world()) {
        if now.get(i) != step.barrier_evals.get(i) {
            return Sensibility::Discard(format!("condition {i} diverged"));
        }
    }
    Sensibility::Keep
}

/// Something a guard condition reads.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Read {
    Fact(Scope, Pattern),
    Global(String),
    Structure(String),
}

fn reads_of(w: &World, kind: &ConditionKind) -> Vec<Read> {
    let path_reads = |p: &ParamPath| match p {
        ParamPath::Fact { scope, pattern } => vec![Read::Fact(scope.clone(), pattern.clone())],
        ParamPath::Global(g) => vec![Read::Global(g.clone())],
        ParamPath::Value(v) => w
            .scenario
            .value(v)
            .map(|s| vec![Read::Fact(s.derive.scope.clone(), s.derive.pattern.clone())])
            .unwrap_or_default(),
    };
    match kind {
        ConditionKind::Range { path, .. }
        | ConditionKind::Boolean { path }
        | ConditionKind::Greater { path, .. }
        | ConditionKind::Less { path, .. }
        | ConditionKind::Equal { path, .. } => path_reads(path),
        ConditionKind::Knows { agent, pattern } => vec![Read::Fact(Scope::Agent(agent.clone()), pattern.clone())],
        ConditionKind::Feels { agent, emotion, .. } => {
            let p = Pattern::new("emotion", vec![Term::Atom(Atom::str(agent.as_str())), Term::Atom(Atom::str(emotion.as_str()))]);
            vec![Read::Fact(Scope::Agent(agent.clone()), p)]
        }
        ConditionKind::HasGoal { agent, .. } | ConditionKind::HasPlan { agent, .. } => {
            vec![Read::Structure(agent.clone())]
        }
    }
}

fn scope_has(scope: &Scope, agent: &str) -> bool {
    match scope {
        Scope::All => true,
        Scope::Agent(a) => a == agent,
    }
}

/// Read patterns name key arguments; a written pattern may carry a value.
fn pattern_touches(read: &Pattern, written: &Pattern) -> bool {
    if read.predicate != written.predicate {
        return false;
    }
    let n = read.args.len();
    if written.args.len() != n && written.args.len() != n + 1 {
        return false;
    }
    read.args.iter().zip(&written.args).all(|(r, w)| match (r, w) {
        (Term::Atom(x), Term::Atom(y)) => x == y,
        _ => true,
    })
}

fn reads_touch_key(reads: &[Read], agent: &str, key: &FactKey) -> bool {
    reads.iter().any(|r| match r {
        Read::Fact(scope, p) => scope_has(scope, agent) && p.matches_key(key),
        _ => false,
    })
}

fn reads_touch_writes(reads: &[Read], ws: &WriteSet) -> bool {
    ws.updates.iter().any(|u| match &u.target {
        UpdateTarget::Fact { agent, key } => reads_touch_key(reads, agent, key),
        UpdateTarget::Global(g) => reads.iter().any(|r| *r == Read::Global(g.clone())),
    })
}

fn direction_fits(d: Direction, delta: i64) -> bool {
    match d {
        Direction::Down => delta < 0,
        Direction::Up => delta > 0,
        Direction::Either => true,
    }
}

/// Catalog entries that can plausibly change the predicted bad transition,
/// restricted to those applicable in `w`. Falls back to every applicable
/// entry when nothing is found relevant.
pub fn relevant_effectors(w: &World, pred: &Prediction, catalog: &[Effector]) -> Vec<usize> {
    let applicable: Vec<usize> = (0..catalog.len()).filter(|&i| catalog[i].applicable(w)).collect();
    let Some(sym) = pred.bad_symbol else {
        return applicable;
    };
    let bad_beat = pred.verdict.beat().unwrap_or(u64::MAX);
    let reads: Vec<Read> = w.automaton.guards[sym]
        .iter()
        .flat_map(|g| g.fixed().map(|(i, _)| i).collect::<Vec<_>>())
        .filter_map(|i| w.scenario.conditions.get(i))
        .flat_map(|c| reads_of(w, &c.kind))
        .collect();
    let culprits: Vec<&WriteRecord> = pred
        .writes
        .iter()
        .filter(|r| r.cycle <= bad_beat)
        .filter(|r| {
            reads.iter().any(|rd| match rd {
                Read::Fact(scope, p) => scope_has(scope, &r.agent) && pattern_touches(p, &r.written),
                _ => false,
            })
        })
        .collect();
    let relevant: Vec<usize> = applicable
        .iter()
        .copied()
        .filter(|&i| {
            let e = &catalog[i];
            let by_culprit = match &e.effect {
                Effect::Nudge { agent, key, delta } => culprits.iter().any(|c| {
                    c.agent == *agent && c.supports.iter().any(|(k, d)| k == key && direction_fits(*d, *delta))
                }),
                Effect::RemovePlan { agent, plan } | Effect::ReplacePlan { agent, plan } => {
                    culprits.iter().any(|c| c.agent == *agent && c.plan == *plan)
                }
                Effect::AddGoal { agent, .. } => culprits.iter().any(|c| c.agent == *agent),
                _ => false,
            };
            if by_culprit {
                return true;
            }
            let structural = match (&e.effect, e.effect.agent()) {
                (
                    Effect::RemovePlan { .. }
                    | Effect::ReplacePlan { .. }
                    | Effect::AddGoal { .. }
                    | Effect::RemoveGoal { .. },
                    Some(a),
                ) => reads.iter().any(|r| *r == Read::Structure(a.to_string())),
                _ => false,
            };
            if structural {
                return true;
            }
            if let Effect::FilterPlayerAction { line } = &e.effect {
                if let Ok(m) = convert_input(line, &w.scenario.settings.player) {
                    let f = m.pattern();
                    if reads.iter().any(|r| matches!(r, Read::Fact(_, p) if pattern_touches(p, &f))) {
                        return true;
                    }
                }
            }
            let mut scratch = w.clone();
            e.apply(&mut scratch).is_ok_and(|ws| reads_touch_writes(&reads, &ws))
        })
        .collect();
    if relevant.is_empty() {
        applicable
    } else {
        relevant
    }
}

/// A committed change to the live system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intervention {
    pub beat: u64,
    pub effectors: Vec<Effector>,
    pub write_set: WriteSet,
    /// The prediction that motivated it.
    pub verdict: Verdict,
    /// Prediction after applying.
    pub after: Verdict,
    /// Ids of every candidate that was simulated, in order.
    pub considered: Vec<String>,
}

impl Intervention {
    pub fn ids(&self) -> Vec<&str> {
        self.effectors.iter().map(|e| e.id.as_str()).collect()
    }

    /// `beat<TAB>verdict<TAB>ids<TAB>writes`
    pub fn feed_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.beat, self.verdict, self.ids().join(","), self.write_set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnticipatorConfig {
    pub horizon: u64,
    /// Largest effector set tried.
    pub k_max: usize,
    /// Off: predict and log, but never touch the live system.
    pub interventions: bool,
}

impl Default for AnticipatorConfig {
    fn default() -> Self {
        AnticipatorConfig {
            horizon: 12,
            k_max: 2,
            interventions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnticipatorStats {
    pub simulations: u64,
    pub beats_simulated: u64,
    pub kept: u64,
    pub discarded: u64,
}

/// Best effector set found by a search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Found {
    pub set: Vec<usize>,
    pub prediction: Prediction,
    pub considered: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Anticipator {
    pub config: AnticipatorConfig,
    pub catalog: Vec<Effector>,
    pub stub: PlayerPolicy,
    pub standing: Option<Prediction>,
    /// One line per barrier: `beat<TAB>event<TAB>detail`.
    pub log: Vec<String>,
    pub interventions: Vec<Intervention>,
    pub stats: AnticipatorStats,
}

impl Anticipator {
    pub fn new(catalog: Vec<Effector>, config: AnticipatorConfig) -> Self {
        Anticipator {
            config,
            catalog,
            stub: PlayerPolicy::Silence,
            standing: None,
            log: Vec::new(),
            interventions: Vec::new(),
            stats: AnticipatorStats::default(),
        }
    }

    pub fn predict(&mut self, snap: &SystemSnapshot) -> Result<Prediction, AnticipatorError> {
        let p = simulate(snap, self.config.horizon, &self.stub)?;
        self.stats.simulations += 1;
        self.stats.beats_simulated += p.trajectory.len() as u64;
        Ok(p)
    }

    /// Cheapest effector set (by cost, then catalog order) under which the
    /// lookahead stays clear. Larger sets extend smaller ones with entries
    /// relevant to what still goes wrong. If no set clears the horizon, the
    /// one postponing the bad transition longest is returned, cheapest first;
    /// `None` if nothing even postpones it.
    pub fn search(&mut self, snap: &SystemSnapshot, pred: &Prediction) -> Result<Option<Found>, AnticipatorError> {
        let base = snap.world();
        let rel = relevant_effectors(base, pred, &self.catalog);
        let mut considered = Vec::new();
        let mut best: Option<(u64, i64, Vec<usize>, Prediction)> = None;
        let bad_at = pred.verdict.beat().unwrap_or(u64::MAX);
        let mut frontier: Vec<(Vec<usize>, Prediction, SystemSnapshot)> = Vec::new();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for k in 1..=self.config.k_max.max(1) {
            let mut cands: BTreeSet<Vec<usize>> = BTreeSet::new();
            if k == 1 {
                cands.extend(rel.iter().map(|&i| vec![i]));
            } else {
                for (set, p, s) in &frontier {
                    for i in relevant_effectors(s.world(), p, &self.catalog) {
                        if !set.contains(&i) {
                            let mut c = set.clone();
                            c.push(i);
                            c.sort_unstable();
                            cands.insert(c);
                        }
                    }
                }
            }
            let mut cands: Vec<(i64, Vec<usize>)> = cands
                .into_iter()
                .filter(|c| seen.insert(c.clone()))
                .map(|c| (c.iter().map(|&i| self.catalog[i].cost_in(base)).sum(), c))
                .collect();
            cands.sort();
            let mut next = Vec::new();
            for (cost, set) in cands {
                let effs: Vec<Effector> = set.iter().map(|&i| self.catalog[i].clone()).collect();
                let mut w = snap.restore();
                if apply_all(&effs, &mut w).is_err() {
                    continue;
                }
                considered.push(effs.iter().map(|e| e.id.as_str()).collect::<Vec<_>>().join("+"));
                let after = w.snapshot();
                let p = self.predict(&after)?;
                if p.verdict.is_ok() {
                    return Ok(Some(Found {
                        set,
                        prediction: p,
                        considered,
                    }));
                }
                let at = p.verdict.beat().unwrap_or(u64::MAX);
                if at > bad_at && best.as_ref().is_none_or(|(b, c, ..)| at > *b || (at == *b && cost < *c)) {
                    best = Some((at, cost, set.clone(), p.clone()));
                }
                next.push((set, p, after));
            }
            frontier = next;
        }
        Ok(best.map(|(_, _, set, prediction)| Found {
            set,
            prediction,
            considered,
        }))
    }

    /// Barrier hook: reuse the standing prediction if it still makes sense,
    /// otherwise predict afresh, and intervene when the prediction goes bad.
    pub fn at_barrier(&mut self, w: &mut World) -> Result<Option<Intervention>, AnticipatorError> {
        let snap = w.snapshot();
        let beat = w.beat;
        if let Some(p) = &self.standing {
            match sensibility_check(p, &snap) {
                Sensibility::Keep => {
                    self.stats.kept += 1;
                    self.log.push(format!("{beat}\tkeep\t{}", p.verdict));
                    if p.verdict.is_ok() || !self.config.interventions {
                        return Ok(None);
                    }
                }
                Sensibility::Discard(why) => {
                    self.stats.discarded += 1;
                    self.log.push(format!("{beat}\tdiscard\t{why}"));
                }
            }
        }
        let pred = self.predict(&snap)?;
        self.log.push(format!("{beat}\tsnapshot\t{}", pred.verdict));
        if pred.verdict.is_ok() || !self.config.interventions {
            self.standing = Some(pred);
            return Ok(None);
        }
        let Some(found) = self.search(&snap, &pred)? else {
            self.log.push(format!("{beat}\tno_effector\t{}", pred.verdict));
            self.standing = Some(pred);
            return Ok(None);
        };
        let effectors: Vec<Effector> = found.set.iter().map(|&i| self.catalog[i].clone()).collect();
        let write_set = apply_all(&effectors, w)?;
        let iv = Intervention {
            beat,
            effectors,
            write_set,
            verdict: pred.verdict,
            after: found.prediction.verdict,
            considered: found.considered,
        };
        self.log.push(format!("{beat}\tintervene\t{}", iv.ids().join(",")));
        self.standing = Some(found.prediction);
        self.interventions.push(iv.clone());
        Ok(Some(iv))
    }
}

#[cfg(test)]
mod tests;
