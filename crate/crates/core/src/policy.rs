//! Headless stand-ins for the human player.

use std::collections::VecDeque;

use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlayerPolicy {
    Silence,
    /// Each beat, with probability `num/den`, one line drawn uniformly from
    /// the repertoire.
    Random {
        rng: SimRng,
        lines: Vec<String>,
        num: u32,
        den: u32,
    },
    /// One entry per beat (`None` is a silent beat), then silence.
    Scripted(VecDeque<Option<String>>),
}

impl PlayerPolicy {
    pub fn random(seed: u64, lines: Vec<String>) -> Self {
        PlayerPolicy::Random {
            // decorrelated from the world rng that shares the seed
            rng: SimRng::new(seed ^ 0x9e37_79b9_7f4a_7c15),
            lines,
            num: 1,
            den: 3,
        }
    }

    pub fn scripted<I, S>(moves: I) -> Self
    where
        I: IntoIterator<Item = Option<S>>,
        S: Into<String>,
    {
        PlayerPolicy::Scripted(moves.into_iter().map(|m| m.map(Into::into)).collect())
    }

    /// Script file form: one line per beat, blank lines are silent beats.
    pub fn parse_script(text: &str) -> Self {
        Self::scripted(text.lines().map(|l| {
            let l = l.trim_end();
            (!l.trim().is_empty()).then(|| l.to_string())
        }))
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlayerPolicy::Silence => "silence",
            PlayerPolicy::Random { .. } => "random",
            PlayerPolicy::Scripted(_) => "scripted",
        }
    }

    /// Input for the next beat.
    pub fn next_input(&mut self) -> Vec<String> {
        match self {
            PlayerPolicy::Silence => Vec::new(),
            PlayerPolicy::Random { rng, lines, num, den } => {
                if lines.is_empty() || !rng.chance(*num, *den) {
                    return Vec::new();
                }
                vec![lines[rng.below(lines.len())].clone()]
            }
            PlayerPolicy::Scripted(q) => q.pop_front().flatten().into_iter().collect(),
        }
    }
}
