//! A thousand random players on Kaktus, with and without look-ahead.
//!
//!     cargo run --release --example monte_carlo -- 1000

use std::sync::Arc;

use plotguide::automaton::compile;
use plotguide::policy::PlayerPolicy;
use plotguide::runtime::{monte_carlo, MonteCarloSummary, RunConfig};
use plotguide::scenario::parse_scenario;

fn main() {
    let runs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let s = parse_scenario(include_str!("../../../fixtures/kaktus.plot")).unwrap();
    let a = Arc::new(compile(&s).unwrap());
    let s = Arc::new(s);
    let lines = s.settings.repertoire.clone();
    let policy = move |seed| PlayerPolicy::random(seed, lines.clone());
    for anticipate in [false, true] {
        let cfg = RunConfig {
            anticipator: if anticipate { RunConfig::default().anticipator } else { None },
            ..Default::default()
        };
        let reports = monte_carlo(&s, &a, runs, 7, &policy, &cfg).unwrap();
        println!("== look-ahead {}", if anticipate { "on" } else { "off" });
        print!("{}", MonteCarloSummary::of(&reports).render());
    }
}
