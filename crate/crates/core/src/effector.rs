//! Effectors: the steering actions available to the look-ahead, their
//! costs, and the atomic parameter updates they produce.

use std::fmt;
use std::sync::Arc;

use crate::agent::{GoalDecl, GoalKind, Step};
use crate::atom::{Atom, Fact, FactKey, Num, Pattern, Term};
use crate::condition::StoryValueReading;
use crate::dialog::convert_input;
use crate::scenario::{parse_path, parse_pattern, ActionKind, EffectorClass, EffectorDef, ParamPath, Scenario, Scope};
use crate::world::World;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EffectorError {
    #[error("target missing: {0}")]
    TargetMissing(String),
    #[error("story value '{0}' is derived and cannot be written")]
    WouldWriteDerivedValue(String),
    #[error("'{0}' is not numeric")]
    NonNumericTarget(String),
    #[error("effector {id}: {message}")]
    BadArguments { id: String, message: String },
    #[error("effector would change nothing")]
    NoChange,
    #[error("aggregation of '{0}' names an unknown agent")]
    AggregationUnresolved(String),
}

/// Value of a parameter slot before or after an update.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Absent,
    /// A non-numeric fact that holds.
    Present,
    Num(Num),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Absent => f.write_str("-"),
            Slot::Present => f.write_str("+"),
            Slot::Num(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UpdateTarget {
    Fact { agent: String, key: FactKey },
    Global(String),
}

impl fmt::Display for UpdateTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateTarget::Fact { agent, key } => write!(f, "{agent}:{key}"),
            UpdateTarget::Global(g) => write!(f, "global:{g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParameterUpdate {
    pub target: UpdateTarget,
    pub old: Slot,
    pub new: Slot,
}

impl fmt::Display for ParameterUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}→{}", self.target, self.old, self.new)
    }
}

/// Exact write set of one or more applied effectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WriteSet {
    pub updates: Vec<ParameterUpdate>,
    /// Plan-library, goal, presence and input-stream edits.
    pub structural: Vec<String>,
}

impl WriteSet {
    pub fn is_empty(&self) -> bool {
        self.updates.is_empty() && self.structural.is_empty()
    }

    pub fn extend(&mut self, other: WriteSet) {
        self.updates.extend(other.updates);
        self.structural.extend(other.structural);
    }
}

impl fmt::Display for WriteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .updates
            .iter()
            .map(ToString::to_string)
            .chain(self.structural.iter().cloned())
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// What an effector does, with its payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Effect {
    SetFact { target: ParamPath, value: Num },
    /// Relative change of one numeric fact slot.
    Nudge { agent: String, key: FactKey, delta: i64 },
    RemovePlan { agent: String, plan: String },
    /// Swaps the plan for an idle version with the same goal.
    ReplacePlan { agent: String, plan: String },
    AddGoal { agent: String, goal: GoalDecl },
    RemoveGoal { agent: String, goal: String },
    SimulatePlayerAction { line: String },
    FilterPlayerAction { line: String },
    IntroduceCharacter { agent: String },
    RemoveCharacter { agent: String },
    /// Every present character loses this many beats.
    AlterTime { beats: u32 },
    StartTopic { topic: String },
    StopTopic { topic: String },
    DisruptiveEvent { scope: Scope, fact: Fact },
    GiveHint { text: String },
}

impl Effect {
    pub fn action(&self) -> ActionKind {
        match self {
            Effect::SetFact { .. } | Effect::Nudge { .. } => ActionKind::SetFact,
            Effect::RemovePlan { .. } => ActionKind::RemovePlan,
            Effect::ReplacePlan { .. } => ActionKind::ReplacePlan,
            Effect::AddGoal { .. } => ActionKind::AddGoal,
            Effect::RemoveGoal { .. } => ActionKind::RemoveGoal,
            Effect::SimulatePlayerAction { .. } => ActionKind::SimulatePlayerAction,
            Effect::FilterPlayerAction { .. } => ActionKind::FilterPlayerAction,
            Effect::IntroduceCharacter { .. } => ActionKind::IntroduceCharacter,
            Effect::RemoveCharacter { .. } => ActionKind::RemoveCharacter,
            Effect::AlterTime { .. } => ActionKind::AlterTime,
            Effect::StartTopic { .. } => ActionKind::StartTopic,
            Effect::StopTopic { .. } => ActionKind::StopTopic,
            Effect::DisruptiveEvent { .. } => ActionKind::DisruptiveEvent,
            Effect::GiveHint { .. } => ActionKind::GiveHint,
        }
    }

    /// Character the effect is confined to, if any.
    pub fn agent(&self) -> Option<&str> {
        match self {
            Effect::SetFact {
                target: ParamPath::Fact {
                    scope: Scope::Agent(a), ..
                },
                ..
            }
            | Effect::Nudge { agent: a, .. }
            | Effect::RemovePlan { agent: a, .. }
            | Effect::ReplacePlan { agent: a, .. }
            | Effect::AddGoal { agent: a, .. }
            | Effect::RemoveGoal { agent: a, .. }
            | Effect::IntroduceCharacter { agent: a }
            | Effect::RemoveCharacter { agent: a }
            | Effect::DisruptiveEvent {
                scope: Scope::Agent(a), ..
            } => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Effector {
    pub id: String,
    pub class: EffectorClass,
    pub effect: Effect,
    /// Authored override; otherwise the scenario's cost model.
    pub cost: Option<i64>,
}

impl fmt::Display for Effector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

fn fact_slot(w: &World, agent: &str, key: &FactKey) -> Slot {
    match w.agent(agent).and_then(|a| a.world.get(key)) {
        None => Slot::Absent,
        Some(f) => f.value().map_or(Slot::Present, Slot::Num),
    }
}

fn key_pattern(key: &FactKey) -> Pattern {
    let mut args: Vec<Term> = key.key_args.iter().cloned().map(Term::Atom).collect();
    args.push(Term::Wild);
    Pattern::new(key.predicate.clone(), args)
}

fn with_value(key: &FactKey, v: Num) -> Fact {
    let mut args = key.key_args.clone();
    args.push(Atom::Num(v));
    Fact::new(key.predicate.clone(), args)
}

impl Effector {
    pub fn action(&self) -> ActionKind {
        self.effect.action()
    }

    /// Cost under the scenario's model; fact writes cost their magnitude.
    pub fn cost_in(&self, w: &World) -> i64 {
        if let Some(c) = self.cost {
            return c;
        }
        let unit = w.scenario.settings.cost_of(self.action());
        let units = match &self.effect {
            Effect::Nudge { delta, .. } => delta.abs(),
            Effect::SetFact { target, value } => {
                let old = match target {
                    ParamPath::Fact {
                        scope: Scope::Agent(a),
                        pattern,
                    } => pattern
                        .ground(&Default::default())
                        .and_then(|f| w.agent(a).and_then(|ag| ag.world.value(&f.key()))),
                    ParamPath::Global(g) => w.globals.get(g).copied(),
                    _ => None,
                };
                old.map_or(1, |o| o.abs_diff(*value).round().max(1))
            }
            _ => 1,
        };
        unit * units
    }

    /// Applies atomically: either every write lands or the world is left
    /// exactly as it was.
    pub fn apply(&self, w: &mut World) -> Result<WriteSet, EffectorError> {
        apply_all(std::slice::from_ref(self), w)
    }

    /// Whether applying now would succeed and change something.
    pub fn applicable(&self, w: &World) -> bool {
        let mut scratch = w.clone();
        self.apply_in(&mut scratch).is_ok_and(|ws| !ws.is_empty())
    }

    fn present_agent<'w>(&self, w: &'w mut World, name: &str) -> Result<&'w mut crate::agent::AgentState, EffectorError> {
        match w.agent_mut(name) {
            Some(a) if a.present => Ok(a),
            _ => Err(EffectorError::TargetMissing(name.to_string())),
        }
    }

    fn apply_in(&self, w: &mut World) -> Result<WriteSet, EffectorError> {
        let mut ws = WriteSet::default();
        let action = self.action().name();
        match &self.effect {
            Effect::SetFact { target, value } => match target {
                ParamPath::Value(v) => return Err(EffectorError::WouldWriteDerivedValue(v.clone())),
                ParamPath::Global(g) => {
                    if w.scenario.value(g).is_some() {
                        return Err(EffectorError::WouldWriteDerivedValue(g.clone()));
                    }
                    let old = w.globals.insert(g.clone(), *value);
                    ws.updates.push(ParameterUpdate {
                        target: UpdateTarget::Global(g.clone()),
                        old: old.map_or(Slot::Absent, Slot::Num),
                        new: Slot::Num(*value),
                    });
                }
                ParamPath::Fact { scope, pattern } => {
                    let key = pattern
                        .ground(&Default::default())
                        .ok_or_else(|| EffectorError::TargetMissing(target.to_string()))?
                        .key();
                    let names: Vec<String> = match scope {
                        Scope::Agent(a) => vec![a.clone()],
                        Scope::All => w
                            .agents
                            .iter()
                            .filter(|a| a.present && a.world.get(&key).is_some())
                            .map(|a| a.id.clone())
                            .collect(),
                    };
                    if names.is_empty() {
                        return Err(EffectorError::TargetMissing(target.to_string()));
                    }
                    for name in names {
                        let old = fact_slot(w, &name, &key);
                        if old == Slot::Present {
                            return Err(EffectorError::NonNumericTarget(key.to_string()));
                        }
                        self.present_agent(w, &name)?.assert_fact(with_value(&key, *value));
                        ws.updates.push(ParameterUpdate {
                            target: UpdateTarget::Fact { agent: name, key: key.clone() },
                            old,
                            new: Slot::Num(*value),
                        });
                    }
                }
            },
            Effect::Nudge { agent, key, delta } => {
                let old = match fact_slot(w, agent, key) {
                    Slot::Num(n) => n,
                    Slot::Present => return Err(EffectorError::NonNumericTarget(key.to_string())),
                    Slot::Absent => return Err(EffectorError::TargetMissing(format!("{agent}:{key}"))),
                };
                let new = Num::from_tenths((old.tenths() + delta * 10).clamp(0, 90));
                if new == old {
                    return Err(EffectorError::NoChange);
                }
                self.present_agent(w, agent)?.assert_fact(with_value(key, new));
                ws.updates.push(ParameterUpdate {
                    target: UpdateTarget::Fact {
                        agent: agent.clone(),
                        key: key.clone(),
                    },
                    old: Slot::Num(old),
                    new: Slot::Num(new),
                });
            }
            Effect::RemovePlan { agent, plan } => {
                if !self.present_agent(w, agent)?.remove_plan(plan) {
                    return Err(EffectorError::TargetMissing(format!("{agent}/{plan}")));
                }
                ws.structural.push(format!("{action} {agent}/{plan}"));
            }
            Effect::ReplacePlan { agent, plan } => {
                let a = self.present_agent(w, agent)?;
                let sub = a
                    .plan(plan)
                    .map(|p| p.idle_substitute())
                    .ok_or_else(|| EffectorError::TargetMissing(format!("{agent}/{plan}")))?;
                a.replace_plan(plan, Arc::new(sub));
                ws.structural.push(format!("{action} {agent}/{plan}"));
            }
            Effect::AddGoal { agent, goal } => {
                let a = self.present_agent(w, agent)?;
                if a.has_goal(&goal.name) {
                    return Err(EffectorError::NoChange);
                }
                a.add_goal(goal.clone());
                ws.structural.push(format!("{action} {agent}/{} :PRIORITY {}", goal.name, goal.priority));
            }
            Effect::RemoveGoal { agent, goal } => {
                if !self.present_agent(w, agent)?.remove_goal(goal) {
                    return Err(EffectorError::TargetMissing(format!("{agent}/{goal}")));
                }
                ws.structural.push(format!("{action} {agent}/{goal}"));
            }
            Effect::SimulatePlayerAction { line } => {
                convert_input(line, &w.scenario.settings.player).map_err(|e| EffectorError::BadArguments {
                    id: self.id.clone(),
                    message: e.to_string(),
                })?;
                w.pending.push(line.clone());
                ws.structural.push(format!("{action} {line}"));
            }
            Effect::FilterPlayerAction { line } => {
                let m = convert_input(line, &w.scenario.settings.player).map_err(|e| EffectorError::BadArguments {
                    id: self.id.clone(),
                    message: e.to_string(),
                })?;
                if w.is_filtered(&m) {
                    return Err(EffectorError::NoChange);
                }
                // what was already heard is taken back, later repeats are dropped
                let pat = m.pattern();
                for a in &mut w.agents {
                    for f in a.retract_fact(&pat) {
                        ws.updates.push(ParameterUpdate {
                            target: UpdateTarget::Fact {
                                agent: a.id.clone(),
                                key: f.key(),
                            },
                            old: Slot::Present,
                            new: Slot::Absent,
                        });
                    }
                }
                w.filters.push(m);
                ws.structural.push(format!("{action} {line}"));
            }
            Effect::IntroduceCharacter { agent } => {
                let a = w.agent_mut(agent).ok_or_else(|| EffectorError::TargetMissing(agent.clone()))?;
                if a.present {
                    return Err(EffectorError::NoChange);
                }
                a.present = true;
                ws.structural.push(format!("{action} {agent}"));
            }
            Effect::RemoveCharacter { agent } => {
                let a = self.present_agent(w, agent)?;
                a.present = false;
                a.intentions.clear();
                ws.structural.push(format!("{action} {agent}"));
            }
            Effect::AlterTime { beats } => {
                for a in w.agents.iter_mut().filter(|a| a.present) {
                    a.skip_cycles += beats;
                }
                ws.structural.push(format!("{action} +{beats}"));
            }
            Effect::StartTopic { topic } | Effect::StopTopic { topic } => {
                let start = matches!(self.effect, Effect::StartTopic { .. });
                let fact = Fact::new("topic", vec![Atom::str(topic.as_str())]);
                let pat = Pattern::new("topic", vec![Term::Atom(Atom::str(topic.as_str()))]);
                for a in w.agents.iter_mut().filter(|a| a.present) {
                    let changed = if start {
                        a.assert_fact(fact.clone())
                    } else {
                        !a.retract_fact(&pat).is_empty()
                    };
                    if changed {
                        ws.updates.push(ParameterUpdate {
                            target: UpdateTarget::Fact {
                                agent: a.id.clone(),
                                key: fact.key(),
                            },
                            old: if start { Slot::Absent } else { Slot::Present },
                            new: if start { Slot::Present } else { Slot::Absent },
                        });
                    }
                }
                if ws.updates.is_empty() {
                    return Err(EffectorError::NoChange);
                }
            }
            Effect::DisruptiveEvent { scope, fact } => {
                let names: Vec<String> = match scope {
                    Scope::Agent(a) => vec![a.clone()],
                    Scope::All => w.agents.iter().filter(|a| a.present).map(|a| a.id.clone()).collect(),
                };
                for name in names {
                    let old = fact_slot(w, &name, &fact.key());
                    if self.present_agent(w, &name)?.assert_fact(fact.clone()) {
                        ws.updates.push(ParameterUpdate {
                            target: UpdateTarget::Fact {
                                agent: name,
                                key: fact.key(),
                            },
                            old,
                            new: fact.value().map_or(Slot::Present, Slot::Num),
                        });
                    }
                }
                if ws.updates.is_empty() {
                    return Err(EffectorError::NoChange);
                }
            }
            Effect::GiveHint { text } => {
                w.hints.push(text.clone());
                ws.structural.push(format!("{action} \"{text}\""));
            }
        }
        // the write set must never name a story value
        for u in &ws.updates {
            if let UpdateTarget::Global(g) = &u.target {
                if w.scenario.value(g).is_some() {
                    return Err(EffectorError::WouldWriteDerivedValue(g.clone()));
                }
            }
        }
        Ok(ws)
    }
}

/// Applies a set of effectors as one transaction.
pub fn apply_all(effectors: &[Effector], w: &mut World) -> Result<WriteSet, EffectorError> {
    let mut scratch = w.clone();
    let mut ws = WriteSet::default();
    for e in effectors {
        ws.extend(e.apply_in(&mut scratch)?);
    }
    *w = scratch;
    Ok(ws)
}

fn bad(id: &str, message: impl Into<String>) -> EffectorError {
    EffectorError::BadArguments {
        id: id.to_string(),
        message: message.into(),
    }
}

/// Instantiates an authored effector declaration.
pub fn from_def(def: &EffectorDef) -> Result<Effector, EffectorError> {
    let id = def.id.as_str();
    let a = &def.args;
    let arg = |i: usize, what: &str| a.get(i).cloned().ok_or_else(|| bad(id, format!("missing {what}")));
    let rest = |from: usize| a.get(from..).map(|r| r.join(" ")).unwrap_or_default();
    let effect = match def.action {
        ActionKind::SetFact => {
            let path = parse_path(&format!("{}:{}", arg(0, "agent")?, arg(1, "fact")?)).map_err(|m| bad(id, m))?;
            let value = Num::parse(&arg(2, "value")?).ok_or_else(|| bad(id, "value must be numeric"))?;
            Effect::SetFact { target: path, value }
        }
        ActionKind::RemovePlan => Effect::RemovePlan {
            agent: arg(0, "agent")?,
            plan: arg(1, "plan")?,
        },
        ActionKind::ReplacePlan => Effect::ReplacePlan {
            agent: arg(0, "agent")?,
            plan: arg(1, "plan")?,
        },
        ActionKind::AddGoal => {
            let priority = match a.get(2) {
                Some(p) => p.parse().map_err(|_| bad(id, "priority must be an integer"))?,
                None => 1,
            };
            Effect::AddGoal {
                agent: arg(0, "agent")?,
                goal: GoalDecl::achieve(arg(1, "goal")?, priority),
            }
        }
        ActionKind::RemoveGoal => Effect::RemoveGoal {
            agent: arg(0, "agent")?,
            goal: arg(1, "goal")?,
        },
        ActionKind::SimulatePlayerAction => Effect::SimulatePlayerAction { line: rest(0) },
        ActionKind::FilterPlayerAction => Effect::FilterPlayerAction { line: rest(0) },
        ActionKind::IntroduceCharacter => Effect::IntroduceCharacter { agent: arg(0, "agent")? },
        ActionKind::RemoveCharacter => Effect::RemoveCharacter { agent: arg(0, "agent")? },
        ActionKind::AlterTime => Effect::AlterTime {
            beats: match a.first() {
                Some(n) => n.trim_start_matches('+').parse().map_err(|_| bad(id, "beats must be a count"))?,
                None => 1,
            },
        },
        ActionKind::StartTopic => Effect::StartTopic { topic: arg(0, "topic")? },
        ActionKind::StopTopic => Effect::StopTopic { topic: arg(0, "topic")? },
        ActionKind::DisruptiveEvent => {
            let who = arg(0, "agent or *")?;
            let pat = parse_pattern(&arg(1, "fact")?).map_err(|m| bad(id, m))?;
            let fact = pat.ground(&Default::default()).ok_or_else(|| bad(id, "fact must be ground"))?;
            Effect::DisruptiveEvent {
                scope: if who == "*" { Scope::All } else { Scope::Agent(who) },
                fact,
            }
        }
        ActionKind::GiveHint => Effect::GiveHint { text: rest(0) },
    };
    if matches!(&effect, Effect::SimulatePlayerAction { line } | Effect::FilterPlayerAction { line } | Effect::GiveHint { text: line } if line.is_empty())
    {
        return Err(bad(id, "missing text"));
    }
    Ok(Effector {
        id: def.id.clone(),
        class: def.class,
        effect,
        cost: def.cost,
    })
}

/// Authored effectors followed by generic ones derived from agent
/// structure: per plan a removal, per numeric fact slot a one-unit nudge
/// each way, per plan goal the agent does not hold an added goal above its
/// current priorities; then the global time shift and hint.
pub fn builtin_catalog(s: &Scenario) -> Result<Vec<Effector>, EffectorError> {
    let mut out: Vec<Effector> = s.effectors.iter().map(from_def).collect::<Result<_, _>>()?;
    for a in &s.agents {
        let name = &a.name;
        for p in &a.program.plans {
            out.push(Effector {
                id: format!("remove_plan:{name}/{}", p.name),
                class: EffectorClass::Denier,
                effect: Effect::RemovePlan {
                    agent: name.clone(),
                    plan: p.name.clone(),
                },
                cost: None,
            });
        }
        for f in &a.program.facts {
            if f.value().is_none() {
                continue;
            }
            for delta in [-1i64, 1] {
                out.push(Effector {
                    id: format!("set_fact:{name}:{}{delta:+}", f.key()),
                    class: if delta < 0 { EffectorClass::Denier } else { EffectorClass::Causer },
                    effect: Effect::Nudge {
                        agent: name.clone(),
                        key: f.key(),
                        delta,
                    },
                    cost: None,
                });
            }
        }
        let top = a.program.goals.iter().map(|g| g.priority).max().unwrap_or(0);
        let mut seen: Vec<&str> = Vec::new();
        for p in &a.program.plans {
            let g = &p.goal;
            if g.kind != GoalKind::Achieve
                || a.program.goals.iter().any(|d| d.name == g.name)
                || seen.contains(&g.name.as_str())
                || !g.args.is_empty()
            {
                continue;
            }
            // a goal only reachable as a subgoal is not a distraction
            let is_subgoal = a.program.plans.iter().any(|q| mentions_subgoal(&q.body, &g.name));
            if is_subgoal {
                continue;
            }
            seen.push(&g.name);
            out.push(Effector {
                id: format!("add_goal:{name}/{}", g.name),
                class: EffectorClass::Substitution,
                effect: Effect::AddGoal {
                    agent: name.clone(),
                    goal: GoalDecl::achieve(g.name.clone(), top + 1),
                },
                cost: None,
            });
        }
    }
    out.push(Effector {
        id: "alter_time:+1".into(),
        class: EffectorClass::Delayer,
        effect: Effect::AlterTime { beats: 1 },
        cost: None,
    });
    out.push(Effector {
        id: "give_hint".into(),
        class: EffectorClass::Hint,
        effect: Effect::GiveHint {
            text: "Perhaps someone here has something to tell you.".into(),
        },
        cost: None,
    });
    Ok(out)
}

fn mentions_subgoal(steps: &[Step], goal: &str) -> bool {
    steps.iter().any(|s| match s {
        Step::Achieve { name, .. } => name == goal,
        Step::Or(branches) => branches.iter().any(|b| mentions_subgoal(b, goal)),
        _ => false,
    })
}

/// `|new − old| ≥ threshold` for a numeric update.
pub fn is_radical(u: &ParameterUpdate, threshold: i64) -> Result<bool, EffectorError> {
    match (&u.old, &u.new) {
        (Slot::Num(a), Slot::Num(b)) => Ok(a.abs_diff(*b) >= Num::from_int(threshold)),
        _ => Err(EffectorError::NonNumericTarget(u.target.to_string())),
    }
}

/// Story-unit size of a change, by the total story-value movement it
/// induces: 0 parameter update, 1–2 beat, 3–4 scene, 5–7 sequence, ≥8 act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Magnitude {
    ParameterUpdate,
    Beat,
    Scene,
    Sequence,
    Act,
}

impl Magnitude {
    pub fn of_delta(total: i64) -> Magnitude {
        match total {
            i64::MIN..=0 => Magnitude::ParameterUpdate,
            1..=2 => Magnitude::Beat,
            3..=4 => Magnitude::Scene,
            5..=7 => Magnitude::Sequence,
            _ => Magnitude::Act,
        }
    }
}

/// Replays `updates` on a copy of `w` and measures how far the derived
/// story values move.
pub fn classify_magnitude(w: &World, updates: &[ParameterUpdate]) -> Magnitude {
    let before = w.story_values();
    let mut after_w = w.clone();
    for u in updates {
        match &u.target {
            UpdateTarget::Global(g) => match u.new {
                Slot::Num(n) => {
                    after_w.globals.insert(g.clone(), n);
                }
                _ => {
                    after_w.globals.remove(g);
                }
            },
            UpdateTarget::Fact { agent, key } => {
                let Some(a) = after_w.agent_mut(agent) else { continue };
                match u.new {
                    Slot::Num(n) => {
                        a.assert_fact(with_value(key, n));
                    }
                    Slot::Present => {
                        a.assert_fact(Fact::new(key.predicate.clone(), key.key_args.clone()));
                    }
                    Slot::Absent => {
                        a.retract_fact(&key_pattern(key));
                        a.retract_fact(&Pattern::new(
                            key.predicate.clone(),
                            key.key_args.iter().cloned().map(Term::Atom).collect(),
                        ));
                    }
                }
            }
        }
    }
    let after = after_w.story_values();
    let total: i64 = before.iter().zip(&after).map(|(a, b)| (a.current - b.current).abs()).sum();
    Magnitude::of_delta(total)
}

/// Current readings of every story value.
pub fn derived_story_values(w: &World) -> Result<Vec<StoryValueReading>, EffectorError> {
    for v in &w.scenario.values {
        if let Scope::Agent(a) = &v.derive.scope {
            if w.scenario.agent(a).is_none() {
                return Err(EffectorError::AggregationUnresolved(v.name.clone()));
            }
        }
    }
    Ok(w.story_values())
}
