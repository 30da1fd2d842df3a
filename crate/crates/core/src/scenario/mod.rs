//! Authored content: story values, the condition registry, scenes with their
//! beats, guarded transitions, agents and declared effectors. Parsed from and
//! written to the `.plot` block format.

mod lint;
mod parse;
mod write;

use std::fmt;

use crate::agent::Program;
use crate::atom::{Num, Pattern};

pub use lint::{lint_scene_graph, validate_scenario, Finding, LintCode, LintReport, Severity};
pub use parse::{parse_path, parse_pattern, parse_scenario};
pub use write::serialize_scenario;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unresolved reference '{0}'")]
    UnresolvedReference(String),
    #[error("duplicate name '{0}'")]
    DuplicateName(String),
    #[error("guard of {transition} has length {got}, expected {expected}")]
    GuardLengthMismatch {
        transition: String,
        expected: usize,
        got: usize,
    },
}

/// Whose world model a fact path reads.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scope {
    Agent(String),
    /// `*`: every agent.
    All,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Agent(a) => f.write_str(a),
            Scope::All => f.write_str("*"),
        }
    }
}

/// Parameter path: `Agent:pred(args)`, `global:name` or `value:name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParamPath {
    Fact { scope: Scope, pattern: Pattern },
    Global(String),
    Value(String),
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::Fact { scope, pattern } => write!(f, "{scope}:{}", pattern.call_form()),
            ParamPath::Global(g) => write!(f, "global:{g}"),
            ParamPath::Value(v) => write!(f, "value:{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFn {
    Max,
    Min,
    Avg,
    Sum,
    Count,
}

impl AggFn {
    pub fn name(self) -> &'static str {
        match self {
            AggFn::Max => "max",
            AggFn::Min => "min",
            AggFn::Avg => "avg",
            AggFn::Sum => "sum",
            AggFn::Count => "count",
        }
    }
}

/// `agg(scope:pattern)[*k][+k]`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Aggregation {
    pub func: AggFn,
    pub scope: Scope,
    pub pattern: Pattern,
    pub mul: i64,
    pub add: i64,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}:{})", self.func.name(), self.scope, self.pattern.call_form())?;
        if self.mul != 1 {
            write!(f, "*{}", self.mul)?;
        }
        if self.add != 0 {
            write!(f, "+{}", self.add)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StoryValueDef {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub pole_low: String,
    pub pole_high: String,
    pub derive: Aggregation,
    /// Reading when no fact contributes; midpoint when not given.
    pub neutral: Option<i64>,
}

impl StoryValueDef {
    pub fn neutral_value(&self) -> i64 {
        self.neutral.unwrap_or((self.lo + self.hi) / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConditionKind {
    Range { path: ParamPath, lo: Num, hi: Num },
    Boolean { path: ParamPath },
    Greater { path: ParamPath, threshold: Num },
    Less { path: ParamPath, threshold: Num },
    Equal { path: ParamPath, threshold: Num },
    Knows { agent: String, pattern: Pattern },
    Feels { agent: String, emotion: String, min: Num },
    HasGoal { agent: String, goal: String },
    HasPlan { agent: String, plan: String },
}

impl ConditionKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            ConditionKind::Range { .. } => "Range",
            ConditionKind::Boolean { .. } => "Boolean",
            ConditionKind::Greater { .. } => "Greater",
            ConditionKind::Less { .. } => "Less",
            ConditionKind::Equal { .. } => "Equal",
            ConditionKind::Knows { .. } => "Knows",
            ConditionKind::Feels { .. } => "Feels",
            ConditionKind::HasGoal { .. } => "HasGoal",
            ConditionKind::HasPlan { .. } => "HasPlan",
        }
    }

    /// Agent whose world model the condition reads, if exactly one.
    pub fn agent(&self) -> Option<&str> {
        match self {
            ConditionKind::Range { path, .. }
            | ConditionKind::Boolean { path }
            | ConditionKind::Greater { path, .. }
            | ConditionKind::Less { path, .. }
            | ConditionKind::Equal { path, .. } => match path {
                ParamPath::Fact {
                    scope: Scope::Agent(a),
                    ..
                } => Some(a),
                _ => None,
            },
            ConditionKind::Knows { agent, .. }
            | ConditionKind::Feels { agent, .. }
            | ConditionKind::HasGoal { agent, .. }
            | ConditionKind::HasPlan { agent, .. } => Some(agent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConditionDef {
    pub index: usize,
    pub kind: ConditionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardSym {
    False,
    True,
    Any,
}

/// Fixed-length `{0,1,?}` string over the condition registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Guard(pub Vec<GuardSym>);

impl Guard {
    pub fn parse(s: &str) -> Option<Guard> {
        s.chars()
            .map(|c| match c {
                '0' => Some(GuardSym::False),
                '1' => Some(GuardSym::True),
                '?' => Some(GuardSym::Any),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Guard)
    }

    pub fn any(k: usize) -> Guard {
        Guard(vec![GuardSym::Any; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every non-`?` position agrees with the evaluation vector.
    pub fn admits(&self, evals: &[bool]) -> bool {
        self.0.iter().zip(evals).all(|(g, e)| match g {
            GuardSym::Any => true,
            GuardSym::True => *e,
            GuardSym::False => !*e,
        })
    }

    /// Indices of fixed (non-`?`) positions.
    pub fn fixed(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.0.iter().enumerate().filter_map(|(i, g)| match g {
            GuardSym::Any => None,
            GuardSym::True => Some((i, true)),
            GuardSym::False => Some((i, false)),
        })
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.0 {
            f.write_str(match g {
                GuardSym::False => "0",
                GuardSym::True => "1",
                GuardSym::Any => "?",
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneKind {
    Kernel,
    Satellite,
}

/// Goals and plans handed to one agent while the owning scene is active.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatDef {
    pub id: String,
    pub agent: String,
    pub program: Program,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDef {
    pub id: String,
    pub desirable: bool,
    pub start: bool,
    pub end: bool,
    pub kind: SceneKind,
    pub climactic: bool,
    pub beats: Vec<BeatDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionDef {
    pub name: String,
    pub from: String,
    pub to: String,
    /// One guard per symbol of the string label; never empty.
    pub guards: Vec<Guard>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDef {
    pub name: String,
    /// Not on stage until introduced.
    pub offstage: bool,
    pub program: Program,
}

/// Weyhrauch-style effector class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EffectorClass {
    Causer,
    Denier,
    Delayer,
    Substitution,
    Hint,
}

impl EffectorClass {
    pub const ALL: [EffectorClass; 5] = [
        EffectorClass::Causer,
        EffectorClass::Denier,
        EffectorClass::Delayer,
        EffectorClass::Substitution,
        EffectorClass::Hint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EffectorClass::Causer => "causer",
            EffectorClass::Denier => "denier",
            EffectorClass::Delayer => "delayer",
            EffectorClass::Substitution => "substitution",
            EffectorClass::Hint => "hint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    SetFact,
    RemovePlan,
    ReplacePlan,
    AddGoal,
    RemoveGoal,
    SimulatePlayerAction,
    FilterPlayerAction,
    IntroduceCharacter,
    RemoveCharacter,
    AlterTime,
    StartTopic,
    StopTopic,
    DisruptiveEvent,
    GiveHint,
}

impl ActionKind {
    pub const ALL: [ActionKind; 14] = [
        ActionKind::SetFact,
        ActionKind::RemovePlan,
        ActionKind::ReplacePlan,
        ActionKind::AddGoal,
        ActionKind::RemoveGoal,
        ActionKind::SimulatePlayerAction,
        ActionKind::FilterPlayerAction,
        ActionKind::IntroduceCharacter,
        ActionKind::RemoveCharacter,
        ActionKind::AlterTime,
        ActionKind::StartTopic,
        ActionKind::StopTopic,
        ActionKind::DisruptiveEvent,
        ActionKind::GiveHint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::SetFact => "set_fact",
            ActionKind::RemovePlan => "remove_plan",
            ActionKind::ReplacePlan => "replace_plan",
            ActionKind::AddGoal => "add_goal",
            ActionKind::RemoveGoal => "remove_goal",
            ActionKind::SimulatePlayerAction => "simulate_player_action",
            ActionKind::FilterPlayerAction => "filter_player_action",
            ActionKind::IntroduceCharacter => "introduce_character",
            ActionKind::RemoveCharacter => "remove_character",
            ActionKind::AlterTime => "alter_time",
            ActionKind::StartTopic => "start_topic",
            ActionKind::StopTopic => "stop_topic",
            ActionKind::DisruptiveEvent => "disruptive_event",
            ActionKind::GiveHint => "give_hint",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Cost under the default model.
    pub fn default_cost(self) -> i64 {
        match self {
            ActionKind::SetFact => 1,
            ActionKind::RemovePlan | ActionKind::ReplacePlan => 3,
            ActionKind::AddGoal | ActionKind::RemoveGoal => 2,
            ActionKind::SimulatePlayerAction | ActionKind::FilterPlayerAction => 4,
            ActionKind::IntroduceCharacter | ActionKind::RemoveCharacter => 6,
            ActionKind::AlterTime => 5,
            ActionKind::StartTopic | ActionKind::StopTopic => 2,
            ActionKind::DisruptiveEvent => 4,
            ActionKind::GiveHint => 1,
        }
    }
}

/// `effector <id> <class> <action> [args…] [cost <n>]`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EffectorDef {
    pub id: String,
    pub class: EffectorClass,
    pub action: ActionKind,
    pub args: Vec<String>,
    pub cost: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    /// Name the human player's moves are attributed to.
    pub player: String,
    pub radical: i64,
    pub max_updates: usize,
    pub oscillation: bool,
    pub globals: Vec<(String, Num)>,
    pub primitives: Vec<String>,
    /// Raw input lines the random player policy draws from.
    pub repertoire: Vec<String>,
    /// Per-action cost overrides.
    pub costs: Vec<(ActionKind, i64)>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            player: "Player".into(),
            radical: 5,
            max_updates: 4,
            oscillation: true,
            globals: Vec::new(),
            primitives: Vec::new(),
            repertoire: Vec::new(),
            costs: Vec::new(),
        }
    }
}

impl Settings {
    pub fn cost_of(&self, a: ActionKind) -> i64 {
        self.costs
            .iter()
            .find(|(k, _)| *k == a)
            .map_or(a.default_cost(), |(_, c)| *c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub settings: Settings,
    pub values: Vec<StoryValueDef>,
    pub conditions: Vec<ConditionDef>,
    pub agents: Vec<AgentDef>,
    pub scenes: Vec<SceneDef>,
    pub transitions: Vec<TransitionDef>,
    pub effectors: Vec<EffectorDef>,
}

impl Scenario {
    pub fn empty(name: impl Into<String>) -> Self {
        Scenario {
            name: name.into(),
            settings: Settings::default(),
            values: Vec::new(),
            conditions: Vec::new(),
            agents: Vec::new(),
            scenes: Vec::new(),
            transitions: Vec::new(),
            effectors: Vec::new(),
        }
    }

    /// Size K of the condition registry.
    pub fn k(&self) -> usize {
        self.conditions.len()
    }

    pub fn scene(&self, id: &str) -> Option<&SceneDef> {
        self.scenes.iter().find(|s| s.id == id)
    }

    pub fn scene_mut(&mut self, id: &str) -> Option<&mut SceneDef> {
        self.scenes.iter_mut().find(|s| s.id == id)
    }

    pub fn agent(&self, name: &str) -> Option<&AgentDef> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn transition(&self, name: &str) -> Option<&TransitionDef> {
        self.transitions.iter().find(|t| t.name == name)
    }

    pub fn value(&self, name: &str) -> Option<&StoryValueDef> {
        self.values.iter().find(|v| v.name == name)
    }

    /// Author-flagged, or some beat asserts a numeric fact that moves the
    /// target agent's initial value by at least the radical threshold.
    pub fn is_climactic(&self, scene: &SceneDef) -> bool {
        use crate::agent::Step;
        if scene.climactic {
            return true;
        }
        scene.beats.iter().any(|b| {
            let Some(agent) = self.agent(&b.agent) else {
                return false;
            };
            b.program.plans.iter().any(|p| {
                p.body.iter().chain(&p.effects).any(|s| {
                    let Step::Assert(pat) = s else { return false };
                    let Some(f) = pat.ground(&Default::default()) else {
                        return false;
                    };
                    let (Some(new), Some(old)) = (
                        f.value(),
                        agent.program.facts.iter().find(|g| g.key() == f.key()).and_then(|g| g.value()),
                    ) else {
                        return false;
                    };
                    new.abs_diff(old) >= Num::from_int(self.settings.radical)
                })
            })
        })
    }
}

#[cfg(test)]
mod tests;
