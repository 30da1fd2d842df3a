//! The live object system: agents, globals and the model position, advanced
//! one beat at a time. A tick is split at the synchronization barrier so a
//! look-ahead can snapshot and steer while every agent is parked between
//! its observer call and its next plan step.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::agent::{AgentError, AgentEvent, AgentState, EventKind, Primitives};
use crate::atom::{Atom, Fact, Num};
use crate::automaton::{choose_transition, AutomatonError, Desirability, ModelState, PlotAutomaton};
use crate::condition::{evaluate_registry, Globals, StoryValueReading, View};
use crate::dialog::{convert_input, DialogMove, MoveKind};
use crate::rng::SimRng;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("barrier timed out waiting for {0:?}")]
    Timeout(Vec<String>),
}

/// Check-in point shared by the observers of one beat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Barrier {
    registered: BTreeSet<String>,
    arrived: BTreeSet<String>,
}

impl Barrier {
    pub fn new<I: IntoIterator<Item = String>>(agents: I) -> Self {
        Barrier {
            registered: agents.into_iter().collect(),
            arrived: BTreeSet::new(),
        }
    }

    pub fn check_in(&mut self, agent: &str) {
        if self.registered.contains(agent) {
            self.arrived.insert(agent.to_string());
        }
    }

    pub fn missing(&self) -> Vec<String> {
        self.registered.difference(&self.arrived).cloned().collect()
    }

    pub fn is_complete(&self) -> bool {
        self.arrived.len() == self.registered.len()
    }

    /// Releases the barrier, or reports who never arrived.
    pub fn release(&self) -> Result<(), WorldError> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(WorldError::Timeout(self.missing()))
        }
    }
}

/// Everything one beat produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TickOutcome {
    pub beat: u64,
    pub delivered: Vec<DialogMove>,
    /// Blocked by a filter effector.
    pub filtered: Vec<DialogMove>,
    /// Lines that did not parse.
    pub rejected: Vec<String>,
    pub events: Vec<AgentEvent>,
    pub evals: Vec<bool>,
    pub fired: Option<usize>,
    pub scene_change: Option<(Option<String>, Option<String>)>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Arc<Scenario>,
    pub automaton: Arc<PlotAutomaton>,
    pub prims: Arc<Primitives>,
    pub beat: u64,
    pub agents: Vec<AgentState>,
    pub globals: Globals,
    pub model: ModelState,
    /// Drives transition choice only; player policies own their own rng.
    pub rng: SimRng,
    /// Player moves blocked by filter effectors.
    pub filters: Vec<DialogMove>,
    /// Lines injected by effectors, delivered on the next beat.
    pub pending: Vec<String>,
    /// Hints waiting to be shown to the player.
    pub hints: Vec<String>,
    /// Symbols fired so far.
    pub word: Vec<usize>,
}

pub fn scene_tag(scene: &str) -> String {
    format!("scene:{scene}")
}

impl World {
    pub fn new(scenario: Arc<Scenario>, automaton: Arc<PlotAutomaton>, seed: u64) -> Self {
        let prims = if scenario.settings.primitives.is_empty() {
            Primitives::standard()
        } else {
            Primitives::new(scenario.settings.primitives.iter().cloned())
        };
        let agents = scenario
            .agents
            .iter()
            .map(|a| {
                let mut st = AgentState::new(a.name.clone(), &a.program);
                st.present = !a.offstage;
                st
            })
            .collect();
        let mut globals: Globals = scenario.settings.globals.iter().cloned().collect();
        globals.insert("beat".into(), Num::ZERO);
        let model = automaton.initial_state();
        let mut w = World {
            scenario,
            automaton,
            prims: Arc::new(prims),
            beat: 0,
            agents,
            globals,
            model,
            rng: SimRng::new(seed),
            filters: Vec::new(),
            pending: Vec::new(),
            hints: Vec::new(),
            word: Vec::new(),
        };
        if let Some(s) = w.model.active.clone() {
            w.activate_scene(&s);
        }
        w
    }

    pub fn agent(&self, name: &str) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.id == name)
    }

    pub fn agent_mut(&mut self, name: &str) -> Option<&mut AgentState> {
        self.agents.iter_mut().find(|a| a.id == name)
    }

    pub fn view(&self) -> View<'_> {
        View {
            agents: &self.agents,
            globals: &self.globals,
            values: &self.scenario.values,
        }
    }

    pub fn story_values(&self) -> Vec<StoryValueReading> {
        self.view().story_values()
    }

    pub fn desirability(&self) -> Desirability {
        self.automaton.states[self.model.current].desirability
    }

    pub fn at_end(&self) -> bool {
        self.automaton.states[self.model.current].end
    }

    /// Transition names fired so far.
    pub fn trace_word(&self) -> Vec<String> {
        self.word.iter().map(|&s| self.automaton.symbols[s].clone()).collect()
    }

    /// Gives the scene's beat agents their goals and plans, tagged so
    /// deactivation removes exactly these.
    pub fn activate_scene(&mut self, scene: &str) {
        let Some(def) = self.scenario.scene(scene).cloned() else {
            return;
        };
        let tag = scene_tag(scene);
        for beat in &def.beats {
            let Some(a) = self.agents.iter_mut().find(|a| a.id == beat.agent) else {
                continue;
            };
            for p in &beat.program.plans {
                a.add_plan(Arc::new((**p).clone().with_tag(Some(tag.clone()))));
            }
            for g in &beat.program.goals {
                let mut g = g.clone();
                g.tag = Some(tag.clone());
                a.add_goal(g);
            }
        }
    }

    pub fn deactivate_scene(&mut self, scene: &str) {
        let tag = scene_tag(scene);
        for a in &mut self.agents {
            a.remove_tagged(&tag);
        }
    }

    /// Names of the characters the active scene's beats belong to.
    fn scene_agents(&self) -> Vec<String> {
        let Some(s) = self.model.active.as_deref().and_then(|s| self.scenario.scene(s)) else {
            return Vec::new();
        };
        let mut out: Vec<String> = Vec::new();
        for b in &s.beats {
            if !out.contains(&b.agent) {
                out.push(b.agent.clone());
            }
        }
        out
    }

    fn deliver(&mut self, m: &DialogMove) {
        let fact = m.fact();
        let targets: Vec<String> = match (m.kind, &m.addressee) {
            (MoveKind::Act, _) => self.agents.iter().map(|a| a.id.clone()).collect(),
            (_, Some(a)) if self.agent(a).is_some() => vec![a.clone()],
            _ => {
                let s = self.scene_agents();
                if s.is_empty() {
                    self.agents.iter().map(|a| a.id.clone()).collect()
                } else {
                    s
                }
            }
        };
        for a in &mut self.agents {
            if a.present && targets.contains(&a.id) {
                a.assert_fact(fact.clone());
            }
        }
    }

    pub fn is_filtered(&self, m: &DialogMove) -> bool {
        self.filters.iter().any(|f| f.kind == m.kind && f.content == m.content && f.addressee == m.addressee)
    }

    /// First half of a beat: deliver input and run every present agent's
    /// observer. On return the barrier holds.
    pub fn begin_tick(&mut self, inputs: &[String]) -> Result<TickOutcome, WorldError> {
        self.beat += 1;
        self.globals.insert("beat".into(), Num::from_int(self.beat as i64));
        let mut out = TickOutcome {
            beat: self.beat,
            ..Default::default()
        };
        let mut lines = std::mem::take(&mut self.pending);
        lines.extend(inputs.iter().cloned());
        let player = self.scenario.settings.player.clone();
        for line in lines {
            match convert_input(&line, &player) {
                Ok(m) if self.is_filtered(&m) => out.filtered.push(m),
                Ok(m) => {
                    self.deliver(&m);
                    out.delivered.push(m);
                }
                Err(_) => out.rejected.push(line),
            }
        }
        let mut barrier = Barrier::new(self.agents.iter().filter(|a| a.present).map(|a| a.id.clone()));
        for a in self.agents.iter_mut().filter(|a| a.present) {
            a.begin_cycle(&mut |st| barrier.check_in(&st.id));
        }
        barrier.release()?;
        Ok(out)
    }

    /// Second half of a beat: plan steps, condition evaluation, model step
    /// and scene bookkeeping.
    pub fn finish_tick(&mut self, out: &mut TickOutcome) -> Result<(), WorldError> {
        for i in 0..self.agents.len() {
            if !self.agents[i].present {
                continue;
            }
            let events = self.agents[i].execute_step(&self.prims)?;
            for mut e in events {
                e.cycle = self.beat;
                self.relay(&e);
                out.events.push(e);
            }
        }
        let evals = evaluate_registry(
            &self.scenario.conditions,
            &mut self.agents,
            &self.globals,
            &self.scenario.values,
        );
        let enabled = self.automaton.enabled_transitions(&self.model, &evals);
        if !enabled.is_empty() {
            let sym = choose_transition(&enabled, &mut self.rng)?;
            let next = self.automaton.step(&self.model, sym)?;
            self.word.push(sym);
            out.fired = Some(sym);
            if next.active != self.model.active {
                if let Some(old) = self.model.active.clone() {
                    self.deactivate_scene(&old);
                }
                if let Some(new) = next.active.clone() {
                    self.activate_scene(&new);
                }
                out.scene_change = Some((self.model.active.clone(), next.active.clone()));
            }
            self.model = next;
        }
        out.evals = evals;
        Ok(())
    }

    /// Character speech addressed to another present character lands in
    /// that character's world model.
    fn relay(&mut self, e: &AgentEvent) {
        if e.kind != EventKind::Perform || !matches!(e.action.as_str(), "say" | "ask" | "tell") {
            return;
        }
        let Some(Atom::Str(to)) = e.args.first() else { return };
        let mut args = vec![Atom::str(e.agent.as_str())];
        args.extend(e.args[1..].iter().cloned());
        let fact = Fact::new("heard", args);
        if let Some(a) = self.agents.iter_mut().find(|a| a.id == *to && a.present) {
            a.assert_fact(fact);
        }
    }

    /// A whole beat; `at_barrier` runs while every agent is parked.
    pub fn tick(
        &mut self,
        inputs: &[String],
        at_barrier: &mut dyn FnMut(&mut World) -> Result<(), WorldError>,
    ) -> Result<TickOutcome, WorldError> {
        let mut out = self.begin_tick(inputs)?;
        at_barrier(self)?;
        self.finish_tick(&mut out)?;
        Ok(out)
    }

    pub fn tick_plain(&mut self, inputs: &[String]) -> Result<TickOutcome, WorldError> {
        self.tick(inputs, &mut |_| Ok(()))
    }

    pub fn snapshot(&self) -> SystemSnapshot {
        SystemSnapshot(self.clone())
    }

    /// Deterministic dump of all live state, for equality checks.
    pub fn digest(&self) -> String {
        let mut s = format!(
            "beat {}\nmodel {:?}\nrng {}\nglobals {:?}\nfilters {:?}\npending {:?}\nword {:?}\n",
            self.beat,
            self.model,
            self.rng.state(),
            self.globals,
            self.filters,
            self.pending,
            self.word
        );
        for a in &self.agents {
            s.push_str(&a.state_digest());
            s.push('\n');
        }
        s
    }
}

/// Deep, immutable copy of the whole system taken at the barrier.
#[derive(Debug, Clone)]
pub struct SystemSnapshot(World);

impl SystemSnapshot {
    pub fn beat(&self) -> u64 {
        self.0.beat
    }

    pub fn model(&self) -> &ModelState {
        &self.0.model
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.0.agents
    }

    pub fn globals(&self) -> &Globals {
        &self.0.globals
    }

    pub fn rng_state(&self) -> u64 {
        self.0.rng.state()
    }

    pub fn world(&self) -> &World {
        &self.0
    }

    /// An independent live copy to run forward.
    pub fn restore(&self) -> World {
        self.0.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::compile;
    use crate::scenario::parse_scenario;

    pub(crate) fn kaktus_world(seed: u64) -> World {
        let s = parse_scenario(include_str!("../../../fixtures/kaktus.plot")).unwrap();
        let a = compile(&s).unwrap();
        World::new(Arc::new(s), Arc::new(a), seed)
    }

    #[test]
    fn barrier_outcomes() {
        let mut b = Barrier::new(["A", "B", "C"].map(String::from));
        b.check_in("A");
        b.check_in("B");
        assert_eq!(b.release(), Err(WorldError::Timeout(vec!["C".into()])));
        b.check_in("C");
        assert!(b.release().is_ok());
        let mut one = Barrier::new(["A".to_string()]);
        one.check_in("A");
        assert!(one.is_complete());
    }

    #[test]
    fn start_scene_is_active() {
        let w = kaktus_world(1);
        assert_eq!(w.model.active.as_deref(), Some("q1"));
        assert!(w.agent("Ebba").unwrap().plan("propose").is_some());
        assert!(!w.agent("Niklas").unwrap().present);
    }

    #[test]
    fn activation_is_reversible() {
        let mut w = kaktus_world(1);
        let before: Vec<String> = w.agents.iter().map(|a| format!("{:?}{:?}", a.plans, a.goals)).collect();
        w.activate_scene("q3");
        let ebba = w.agent("Ebba").unwrap();
        assert!(ebba.plan("reveal").is_some());
        assert!(w.agent("Lovisa").unwrap().plan("give_in").is_some());
        w.deactivate_scene("q3");
        let after: Vec<String> = w.agents.iter().map(|a| format!("{:?}{:?}", a.plans, a.goals)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn first_beats_follow_the_kernel() {
        let mut w = kaktus_world(1);
        let mut fired = Vec::new();
        for _ in 0..6 {
            let o = w.tick_plain(&[]).unwrap();
            fired.extend(o.fired.map(|s| w.automaton.symbols[s].clone()));
        }
        // propose raises Ebba's wish; a0 then leaves q1
        assert_eq!(fired.first().map(String::as_str), Some("a0"));
        assert_eq!(w.agent("Ebba").unwrap().world.iter().find(|f| f.predicate == "wants_party").unwrap().value(), Some(Num::from_int(7)));
    }

    #[test]
    fn player_act_reaches_every_present_agent_unless_filtered() {
        let mut w = kaktus_world(1);
        let o = w.tick_plain(&["/act invite Niklas".into()]).unwrap();
        assert_eq!(o.delivered.len(), 1);
        let p = o.delivered[0].pattern();
        assert!(w.agent("Lovisa").unwrap().world.matching(&p).next().is_some());
        assert!(w.agent("Niklas").unwrap().world.matching(&p).next().is_none());
        w.filters.push(o.delivered[0].clone());
        let o = w.tick_plain(&["/act invite Niklas".into(), "".into()]).unwrap();
        assert_eq!((o.delivered.len(), o.filtered.len(), o.rejected.len()), (0, 1, 1));
    }

    #[test]
    fn snapshots_are_isolated() {
        let mut w = kaktus_world(3);
        w.tick_plain(&[]).unwrap();
        let snap = w.snapshot();
        let digest = w.digest();
        let mut copy = snap.restore();
        for _ in 0..5 {
            copy.tick_plain(&["/act shrug".into()]).unwrap();
        }
        assert_eq!(w.digest(), digest);
        assert_eq!(snap.world().digest(), digest);
    }
}
