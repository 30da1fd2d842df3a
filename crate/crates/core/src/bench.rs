//! Exhaustive lookahead versus the anticipator's single simulated line, on
//! a synthetic ring of scenes where the player's action picks the next one.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::anticipator::{simulate, AnticipatorError};
use crate::automaton::{compile, AutomatonError};
use crate::policy::PlayerPolicy;
use crate::scenario::{parse_scenario, Scenario, ScenarioError};
use crate::world::{World, WorldError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("a synthetic scenario needs at least two scenes")]
    TooFewScenes,
    #[error("{}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Scenario(Vec<ScenarioError>),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Anticipator(#[from] AnticipatorError),
}

fn go_line(scene: usize) -> String {
    format!("/act go s{scene}")
}

fn successors(n: usize, b: usize, i: usize) -> impl Iterator<Item = usize> {
    (1..=b.min(n - 1)).map(move |k| (i + k) % n)
}

/// `n` scenes in a ring; scene `i` leads to the next `b`. Entering scene
/// `j` requires the player to have performed `/act go sj`. The last scene is
/// an end, never reached without input.
pub fn synthetic_source(n: usize, b: usize) -> Result<String, BenchError> {
    if n < 2 {
        return Err(BenchError::TooFewScenes);
    }
    let mut s = format!("scenario Ring{n} {{\n  player P\n  primitive doIdle\n");
    for j in 0..n {
        s.push_str(&format!("  repertoire \"{}\"\n", go_line(j)));
    }
    s.push_str("}\n\n");
    for j in 0..n {
        s.push_str(&format!("condition {j} Knows host:act(\"P\",\"go\",\"s{j}\")\n"));
    }
    s.push_str("\nagent host {\n  FACTS:\n    FACT awake \"host\";\n}\n\n");
    for i in 0..n {
        let role = match i {
            0 => " start",
            _ if i == n - 1 => " end",
            _ => "",
        };
        s.push_str(&format!("scene s{i} desirable{role} kernel {{ }}\n"));
    }
    for i in 0..n - 1 {
        for j in successors(n, b, i) {
            let guard: String = (0..n).map(|c| if c == j { '1' } else { '?' }).collect();
            s.push_str(&format!("transition t{i}_{j} s{i} -> s{j} guard \"{guard}\"\n"));
        }
    }
    Ok(s)
}

pub fn synthetic_world(n: usize, b: usize, seed: u64) -> Result<World, BenchError> {
    let s: Scenario = parse_scenario(&synthetic_source(n, b)?).map_err(BenchError::Scenario)?;
    let a = compile(&s)?;
    Ok(World::new(Arc::new(s), Arc::new(a), seed))
}

/// Beats simulated by a full search of every player choice (silence or a
/// move to any successor scene) `depth` beats deep; the root counts as one.
pub fn exhaustive_nodes(w: &World, depth: usize, b: usize) -> Result<u64, BenchError> {
    if depth == 0 {
        return Ok(1);
    }
    let n = w.scenario.scenes.len();
    let here = w.model.active.as_deref().and_then(|s| s.strip_prefix('s')).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut options = vec![Vec::new()];
    options.extend(successors(n, b, here).map(|j| vec![go_line(j)]));
    let mut total = 1;
    for input in options {
        let mut child = w.clone();
        child.tick_plain(&input)?;
        total += exhaustive_nodes(&child, depth - 1, b)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub depth: usize,
    pub nodes: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRow {
    pub horizon: u64,
    pub beats: u64,
    /// Fastest of the repetitions.
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub scenes: usize,
    pub branching: usize,
    pub depths: Vec<DepthRow>,
    pub horizons: Vec<HorizonRow>,
}

impl BenchReport {
    /// Smallest ratio between successive exhaustive node counts.
    pub fn min_growth(&self) -> Option<f64> {
        self.depths
            .windows(2)
            .filter(|w| w[0].depth > 0)
            .map(|w| w[1].nodes as f64 / w[0].nodes as f64)
            .reduce(f64::min)
    }

    pub fn horizon_fit(&self) -> Option<LinearFit> {
        let xs: Vec<f64> = self.horizons.iter().map(|r| r.horizon as f64).collect();
        let ys: Vec<f64> = self.horizons.iter().map(|r| r.wall.as_secs_f64()).collect();
        linear_fit(&xs, &ys)
    }

    pub fn render(&self) -> String {
        let mut s = format!("scenes {}  branching {}\n", self.scenes, self.branching);
        s.push_str("depth\tnodes\twall_ms\n");
        for r in &self.depths {
            s.push_str(&format!("{}\t{}\t{:.3}\n", r.depth, r.nodes, r.wall.as_secs_f64() * 1e3));
        }
        s.push_str("horizon\tbeats\twall_ms\n");
        for r in &self.horizons {
            s.push_str(&format!("{}\t{}\t{:.3}\n", r.horizon, r.beats, r.wall.as_secs_f64() * 1e3));
        }
        if let Some(g) = self.min_growth() {
            s.push_str(&format!("exhaustive growth per depth >= {g:.2}\n"));
        }
        if let Some(f) = self.horizon_fit() {
            s.push_str(&format!(
                "lookahead ms/beat {:.4}  r2 {:.4}\n",
                f.slope * 1e3,
                f.r2
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares; `None` with fewer than two distinct x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Wall time of silent lookaheads at each horizon: the fastest of `reps`
/// rounds, with horizons interleaved inside a round so drift in machine load
/// hits them all alike.
pub fn time_horizons(w: &World, horizons: &[u64], reps: usize) -> Result<Vec<HorizonRow>, BenchError> {
    let snap = w.snapshot();
    let mut rows: Vec<HorizonRow> = horizons
        .iter()
        .map(|&horizon| HorizonRow {
            horizon,
            beats: 0,
            wall: Duration::MAX,
        })
        .collect();
    for _ in 0..reps.max(1) {
        for row in &mut rows {
            let t = Instant::now();
            let p = simulate(&snap, row.horizon, &PlayerPolicy::Silence)?;
            row.wall = row.wall.min(t.elapsed());
            row.beats = p.trajectory.len() as u64;
        }
    }
    Ok(rows)
}

pub fn run_bench(scenes: usize, branching: usize, max_depth: usize, horizons: &[u64]) -> Result<BenchReport, BenchError> {
    let w = synthetic_world(scenes, branching, 1)?;
    let mut depths = Vec::new();
    for d in 0..=max_depth {
        let t = Instant::now();
        let nodes = exhaustive_nodes(&w, d, branching)?;
        depths.push(DepthRow {
            depth: d,
            nodes,
            wall: t.elapsed(),
        });
    }
    let horizons = time_horizons(&w, horizons, 15)?;
    Ok(BenchReport {
        scenes,
        branching: branching.min(scenes - 1),
        depths,
        horizons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_compiles_and_needs_input() {
        let mut w = synthetic_world(16, 3, 1).unwrap();
        assert_eq!(w.automaton.symbols.len(), 15 * 3);
        for _ in 0..5 {
            w.tick_plain(&[]).unwrap();
        }
        assert!(w.word.is_empty());
        w.tick_plain(&[go_line(2)]).unwrap();
        assert_eq!(w.model.active.as_deref(), Some("s2"));
    }

    #[test]
    fn node_counts_are_geometric() {
        let w = synthetic_world(16, 3, 1).unwrap();
        let counts: Vec<u64> = (0..=4).map(|d| exhaustive_nodes(&w, d, 3).unwrap()).collect();
        // 1 + 4 + 16 + …
        assert_eq!(counts, [1, 5, 21, 85, 341]);
    }

    #[test]
    fn small_and_degenerate_cases() {
        assert_eq!(synthetic_source(1, 3), Err(BenchError::TooFewScenes));
        let w = synthetic_world(2, 3, 1).unwrap();
        assert_eq!(exhaustive_nodes(&w, 0, 3).unwrap(), 1);
        assert_eq!(exhaustive_nodes(&w, 1, 3).unwrap(), 3);
    }

    #[test]
    fn fit_of_a_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn lookahead_beats_match_horizon() {
        let w = synthetic_world(16, 3, 1).unwrap();
        assert_eq!(time_horizons(&w, &[50], 1).unwrap()[0].beats, 50);
    }
}
