//! Condition registry evaluation and derived story values.

use std::collections::BTreeMap;

use crate::agent::{AgentState, CachedCondition};
use crate::atom::{Atom, Fact, Num, Pattern, Term};
use crate::scenario::{AggFn, Aggregation, ConditionKind, ConditionDef, ParamPath, Scope, StoryValueDef};

pub type Globals = BTreeMap<String, Num>;

/// Read-only view of everything a condition may look at.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub agents: &'a [AgentState],
    pub globals: &'a Globals,
    pub values: &'a [StoryValueDef],
}

impl<'a> View<'a> {
    pub fn agent(&self, name: &str) -> Option<&'a AgentState> {
        self.agents.iter().find(|a| a.id == name)
    }

    fn facts(&self, scope: &Scope, pattern: &'a Pattern) -> Vec<&'a Fact> {
        let agents: Vec<&AgentState> = match scope {
            Scope::Agent(a) => self.agent(a).into_iter().collect(),
            Scope::All => self.agents.iter().collect(),
        };
        agents.into_iter().flat_map(|a| a.world.matching(pattern)).collect()
    }

    /// Numeric reading of a parameter path; `None` when nothing matches.
    pub fn path_value(&self, path: &ParamPath) -> Option<Num> {
        match path {
            ParamPath::Fact { scope, pattern } => self.facts(scope, pattern).into_iter().find_map(Fact::value),
            ParamPath::Global(g) => self.globals.get(g).copied(),
            ParamPath::Value(v) => {
                let def = self.values.iter().find(|s| s.name == *v)?;
                Some(Num::from_int(self.story_value(def).current))
            }
        }
    }

    pub fn aggregate(&self, agg: &Aggregation) -> Option<(Num, Vec<Fact>)> {
        let facts: Vec<Fact> = self.facts(&agg.scope, &agg.pattern).into_iter().cloned().collect();
        let nums: Vec<Num> = facts.iter().filter_map(Fact::value).collect();
        let raw = match agg.func {
            AggFn::Count if facts.is_empty() => return None,
            AggFn::Count => Num::from_int(facts.len() as i64),
            _ if nums.is_empty() => return None,
            AggFn::Max => *nums.iter().max()?,
            AggFn::Min => *nums.iter().min()?,
            AggFn::Sum => nums.iter().fold(Num::ZERO, |a, b| a + *b),
            AggFn::Avg => {
                let t: i64 = nums.iter().map(|n| n.tenths()).sum();
                let n = nums.len() as i64;
                Num::from_tenths((2 * t + n * t.signum()) / (2 * n))
            }
        };
        let v = Num::from_tenths(raw.tenths() * agg.mul) + Num::from_int(agg.add);
        Some((v, facts))
    }

    /// Rounded, clamped reading; the neutral default when no fact contributes.
    pub fn story_value(&self, def: &StoryValueDef) -> StoryValueReading {
        let (current, derived_from) = match self.aggregate(&def.derive) {
            Some((v, facts)) => (v.round().clamp(def.lo, def.hi), facts),
            None => (def.neutral_value(), Vec::new()),
        };
        StoryValueReading {
            name: def.name.clone(),
            current,
            derived_from,
        }
    }

    pub fn story_values(&self) -> Vec<StoryValueReading> {
        self.values.iter().map(|s| self.story_value(s)).collect()
    }

    /// Uncached evaluation.
    pub fn evaluate(&self, kind: &ConditionKind) -> bool {
        match kind {
            ConditionKind::Range { path, lo, hi } => self.path_value(path).is_some_and(|v| *lo <= v && v <= *hi),
            ConditionKind::Boolean { path } => match path {
                ParamPath::Fact { scope, pattern } => self
                    .facts(scope, pattern)
                    .first()
                    .is_some_and(|f| f.value().is_none_or(|v| v != Num::ZERO)),
                _ => self.path_value(path).is_some_and(|v| v != Num::ZERO),
            },
            ConditionKind::Greater { path, threshold } => self.path_value(path).is_some_and(|v| v > *threshold),
            ConditionKind::Less { path, threshold } => self.path_value(path).is_some_and(|v| v < *threshold),
            ConditionKind::Equal { path, threshold } => self.path_value(path) == Some(*threshold),
            ConditionKind::Knows { agent, pattern } => self
                .agent(agent)
                .is_some_and(|a| a.world.matching(pattern).next().is_some()),
            ConditionKind::Feels { agent, emotion, min } => self.agent(agent).is_some_and(|a| {
                let p = Pattern::new(
                    "emotion",
                    vec![
                        Term::Atom(Atom::str(agent.as_str())),
                        Term::Atom(Atom::str(emotion.as_str())),
                        Term::Wild,
                    ],
                );
                let felt = a.world.matching(&p).any(|f| f.value().is_some_and(|v| v >= *min));
                felt
            }),
            ConditionKind::HasGoal { agent, goal } => self.agent(agent).is_some_and(|a| a.has_goal(goal)),
            ConditionKind::HasPlan { agent, plan } => self.agent(agent).is_some_and(|a| a.plan(plan).is_some()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoryValueReading {
    pub name: String,
    pub current: i64,
    pub derived_from: Vec<Fact>,
}

/// World-model predicates (or structural markers) a condition reads; its
/// cached value is dropped when any of them is written.
fn reads(kind: &ConditionKind) -> Vec<String> {
    match kind {
        ConditionKind::Range { path, .. }
        | ConditionKind::Boolean { path }
        | ConditionKind::Greater { path, .. }
        | ConditionKind::Less { path, .. }
        | ConditionKind::Equal { path, .. } => match path {
            ParamPath::Fact { pattern, .. } => vec![pattern.predicate.clone()],
            _ => vec!["*".into()],
        },
        ConditionKind::Knows { pattern, .. } => vec![pattern.predicate.clone()],
        ConditionKind::Feels { .. } => vec!["emotion".into()],
        ConditionKind::HasGoal { .. } => vec!["#goal".into()],
        ConditionKind::HasPlan { .. } => vec!["#plan".into()],
    }
}

/// Owning agent for conditions confined to one world model.
fn cache_owner(kind: &ConditionKind) -> Option<&str> {
    match kind {
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
        k => k.agent(),
    }
}

/// Evaluates the registry into a truth vector. Conditions confined to one
/// agent go through that agent's per-cycle cache, so each is computed at
/// most once per cycle unless a write it depends on intervenes.
pub fn evaluate_registry(
    conditions: &[ConditionDef],
    agents: &mut [AgentState],
    globals: &Globals,
    values: &[StoryValueDef],
) -> Vec<bool> {
    let mut out = Vec::with_capacity(conditions.len());
    for c in conditions {
        let owner = cache_owner(&c.kind).and_then(|o| agents.iter().position(|a| a.id == o));
        if let Some(i) = owner {
            if let Some(hit) = agents[i].cond_cache.get(&c.index) {
                out.push(hit.value);
                continue;
            }
        }
        let value = View {
            agents,
            globals,
            values,
        }
        .evaluate(&c.kind);
        if let Some(i) = owner {
            let a = &mut agents[i];
            a.cond_evals += 1;
            a.cond_cache.insert(
                c.index,
                CachedCondition {
                    value,
                    reads: reads(&c.kind),
                },
            );
        }
        out.push(value);
    }
    out
}
