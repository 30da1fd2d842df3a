//! The live story: a session binding the world to the anticipator, the
//! headless harness, and the play-session server.

mod protocol;
mod server;

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::agent::EventKind;
use crate::anticipator::{Anticipator, AnticipatorConfig, AnticipatorError};
use crate::automaton::{Desirability, PlotAutomaton};
use crate::effector::{builtin_catalog, EffectorError};
use crate::policy::PlayerPolicy;
use crate::scenario::Scenario;
use crate::world::{World, WorldError};

pub use protocol::{check_hello, Frame, FrameKind, ProtocolError, PROTOCOL_VERSION};
pub use server::{bind, serve, ServeOptions, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Anticipator(#[from] AnticipatorError),
    #[error(transparent)]
    Effector(#[from] EffectorError),
    #[error("cannot bind: {0}")]
    BindFailure(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Headless,
    Interactive,
}

/// The live system: world, optional anticipator and the append-only frame
/// log of everything that happened.
#[derive(Debug, Clone)]
pub struct Session {
    pub world: World,
    pub anticipator: Option<Anticipator>,
    pub seed: u64,
    pub mode: Mode,
    pub log: Vec<Frame>,
    pub undesirable_entries: u32,
    pub recovered: u32,
    last_values: Vec<i64>,
}

impl Session {
    pub fn new(
        scenario: Arc<Scenario>,
        automaton: Arc<PlotAutomaton>,
        seed: u64,
        anticipator: Option<AnticipatorConfig>,
    ) -> Result<Self, RuntimeError> {
        let anticipator = match anticipator {
            Some(cfg) => Some(Anticipator::new(builtin_catalog(&scenario)?, cfg)),
            None => None,
        };
        let world = World::new(scenario, automaton, seed);
        let last_values = world.story_values().iter().map(|v| v.current).collect();
        Ok(Session {
            world,
            anticipator,
            seed,
            mode: Mode::Headless,
            log: Vec::new(),
            undesirable_entries: 0,
            recovered: 0,
            last_values,
        })
    }

    pub fn scene(&self) -> &str {
        self.world.model.active.as_deref().unwrap_or("-")
    }

    pub fn is_over(&self) -> bool {
        self.world.at_end() || self.world.model.dead
    }

    /// Full picture for a (re)connecting client: one `state` frame and one
    /// `value` frame per story value.
    pub fn state_frames(&self) -> Vec<Frame> {
        let w = &self.world;
        let m = &w.model;
        let mut out = vec![Frame::new(FrameKind::State)
            .with("beat", w.beat)
            .with("scene", self.scene())
            .with("state", &w.automaton.states[m.current].name)
            .with("desirability", w.desirability().name())
            .with("played", m.played.iter().cloned().collect::<Vec<_>>().join(","))
            .with("playable", m.playable.iter().cloned().collect::<Vec<_>>().join(","))
            .with("end", w.at_end())];
        out.extend(self.value_frames(|_, _| true));
        out
    }

    fn value_frames(&self, keep: impl Fn(usize, i64) -> bool) -> Vec<Frame> {
        self.world
            .story_values()
            .iter()
            .enumerate()
            .filter(|(i, v)| keep(*i, v.current))
            .map(|(_, v)| {
                Frame::new(FrameKind::Value)
                    .with("beat", self.world.beat)
                    .with("name", &v.name)
                    .with("value", v.current)
            })
            .collect()
    }

    /// One beat. Returns the frames it produced, which are also appended to
    /// the log. Intervention frames are always logged; callers decide whether
    /// to show them.
    pub fn tick(&mut self, inputs: &[String]) -> Result<Vec<Frame>, RuntimeError> {
        let mut frames = Vec::new();
        let was_bad = self.world.desirability() == Desirability::Undesirable;
        let mut out = self.world.begin_tick(inputs)?;
        let beat = self.world.beat;
        for line in &out.rejected {
            frames.push(Frame::error(format!("malformed command: {line}")).with("beat", beat));
        }
        for m in &out.filtered {
            frames.push(Frame::new(FrameKind::Error).with("beat", beat).with("message", format!("ignored: {m}")));
        }
        if let Some(ant) = &mut self.anticipator {
            if let Some(iv) = ant.at_barrier(&mut self.world)? {
                frames.push(
                    Frame::new(FrameKind::Intervention)
                        .with("beat", iv.beat)
                        .with("verdict", iv.verdict)
                        .with("effectors", iv.ids().join(","))
                        .with("writes", &iv.write_set),
                );
            }
        }
        self.world.finish_tick(&mut out)?;
        for e in out.events.iter().filter(|e| e.kind == EventKind::Perform) {
            let mut args = e.args.iter().map(ToString::to_string);
            let f = Frame::new(FrameKind::Utterance).with("beat", beat).with("speaker", &e.agent).with("action", &e.action);
            let f = match e.action.as_str() {
                "say" | "ask" | "tell" => f.with("to", args.next().unwrap_or_default()),
                _ => f,
            };
            frames.push(f.with("text", args.collect::<Vec<_>>().join(" ")));
        }
        for h in self.world.hints.drain(..) {
            frames.push(Frame::new(FrameKind::Utterance).with("beat", beat).with("speaker", "narrator").with("action", "hint").with("text", h));
        }
        if let Some((from, to)) = &out.scene_change {
            frames.push(
                Frame::new(FrameKind::Scene)
                    .with("beat", beat)
                    .with("from", from.as_deref().unwrap_or("-"))
                    .with("to", to.as_deref().unwrap_or("-"))
                    .with("via", out.fired.map_or("-", |s| self.world.automaton.symbols[s].as_str())),
            );
        }
        let now: Vec<i64> = self.world.story_values().iter().map(|v| v.current).collect();
        let last = std::mem::replace(&mut self.last_values, now);
        frames.extend(self.value_frames(|i, v| last.get(i) != Some(&v)));
        let is_bad = self.world.desirability() == Desirability::Undesirable;
        match (was_bad, is_bad) {
            (false, true) => self.undesirable_entries += 1,
            (true, false) => self.recovered += 1,
            _ => {}
        }
        self.log.extend(frames.iter().cloned());
        Ok(frames)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub seed: u64,
    pub max_beats: u64,
    /// `None` runs without lookahead.
    pub anticipator: Option<AnticipatorConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            max_beats: 100,
            anticipator: Some(AnticipatorConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub seed: u64,
    pub policy: String,
    pub word: Vec<String>,
    pub final_state: String,
    pub ended_at_end: bool,
    pub dead: bool,
    pub undesirable_entries: u32,
    pub recovered: u32,
    /// Feed lines of every intervention.
    pub interventions: Vec<String>,
    pub beats: u64,
    pub simulated_beats: u64,
    pub log: Vec<Frame>,
    pub wall: Duration,
}

impl RunReport {
    /// Entered the undesirable region and never made it back out.
    pub fn unrecovered(&self) -> u32 {
        self.undesirable_entries - self.recovered + u32::from(self.dead)
    }

    pub fn flagged(&self) -> bool {
        self.undesirable_entries > 0 || self.dead
    }

    /// Tab-separated, wall time excluded.
    pub fn summary_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.seed,
            self.policy,
            self.beats,
            self.final_state,
            self.ended_at_end,
            self.undesirable_entries,
            self.recovered,
            self.interventions.len(),
            self.word.join(" ")
        )
    }
}

/// Plays the story with a stand-in player until an end state or `max_beats`.
pub fn run_headless(
    scenario: &Arc<Scenario>,
    automaton: &Arc<PlotAutomaton>,
    mut policy: PlayerPolicy,
    cfg: &RunConfig,
) -> Result<RunReport, RuntimeError> {
    let started = Instant::now();
    let mut s = Session::new(scenario.clone(), automaton.clone(), cfg.seed, cfg.anticipator)?;
    let policy_name = policy.name().to_string();
    while s.world.beat < cfg.max_beats && !s.is_over() {
        let input = policy.next_input();
        s.tick(&input)?;
    }
    let (interventions, simulated_beats) = match &s.anticipator {
        Some(a) => (
            a.interventions.iter().map(|i| i.feed_line()).collect(),
            a.stats.beats_simulated,
        ),
        None => (Vec::new(), 0),
    };
    let w = &s.world;
    Ok(RunReport {
        seed: cfg.seed,
        policy: policy_name,
        word: w.trace_word(),
        final_state: w.automaton.states[w.model.current].name.clone(),
        ended_at_end: w.at_end(),
        dead: w.model.dead,
        undesirable_entries: s.undesirable_entries,
        recovered: s.recovered,
        interventions,
        beats: w.beat,
        simulated_beats,
        log: s.log,
        wall: started.elapsed(),
    })
}

/// Runs `runs` independent stories, seeds `base_seed..base_seed+runs`,
/// spread over the available cores. Reports come back in seed order.
pub fn monte_carlo(
    scenario: &Arc<Scenario>,
    automaton: &Arc<PlotAutomaton>,
    runs: u64,
    base_seed: u64,
    policy: &(dyn Fn(u64) -> PlayerPolicy + Sync),
    template: &RunConfig,
) -> Result<Vec<RunReport>, RuntimeError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()) as u64;
    let chunk = runs.div_ceil(workers.max(1)).max(1);
    let parts: Vec<Result<Vec<RunReport>, RuntimeError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..runs)
            .step_by(chunk as usize)
            .map(|lo| {
                sc.spawn(move || {
                    (lo..(lo + chunk).min(runs))
                        .map(|i| {
                            let seed = base_seed.wrapping_add(i);
                            run_headless(scenario, automaton, policy(seed), &RunConfig { seed, ..*template })
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(runs as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    /// Final state name and how many runs ended there, by name.
    pub finals: std::collections::BTreeMap<String, usize>,
    pub ended_at_end: usize,
    pub flagged: usize,
    pub entered: u64,
    pub recovered: u64,
    pub unrecovered: u64,
    pub interventions: usize,
    pub beats: u64,
    pub simulated_beats: u64,
    pub wall: Duration,
}

impl MonteCarloSummary {
    pub fn of(reports: &[RunReport]) -> Self {
        let mut s = MonteCarloSummary {
            runs: reports.len(),
            ..Default::default()
        };
        for r in reports {
            *s.finals.entry(r.final_state.clone()).or_default() += 1;
            s.ended_at_end += usize::from(r.ended_at_end);
            s.flagged += usize::from(r.flagged());
            s.entered += u64::from(r.undesirable_entries);
            s.recovered += u64::from(r.recovered);
            s.unrecovered += u64::from(r.unrecovered());
            s.interventions += r.interventions.len();
            s.beats += r.beats;
            s.simulated_beats += r.simulated_beats;
            s.wall += r.wall;
        }
        s
    }

    pub fn render(&self) -> String {
        let n = self.runs.max(1) as f64;
        let finals: Vec<String> = self.finals.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let all_beats = (self.beats + self.simulated_beats).max(1) as f64;
        let per_beat = self.wall.as_secs_f64() * 1e6 / all_beats;
        format!(
            "runs {}\nfinal states {}\nended at an end state {}\nflagged runs {}\nundesirable entries {} recovered {} unrecovered {}\n\
             interventions per run {:.3}\nmean beats {:.2}\nmean wall per run {:.3} ms\nwall per beat, live or simulated {:.2} us\n",
            self.runs,
            finals.join(" "),
            self.ended_at_end,
            self.flagged,
            self.entered,
            self.recovered,
            self.unrecovered,
            self.interventions as f64 / n,
            self.beats as f64 / n,
            self.wall.as_secs_f64() * 1e3 / n,
            per_beat,
        )
    }
}

#[cfg(test)]
mod tests;
