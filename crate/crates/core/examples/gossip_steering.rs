//! The anticipator at work: Lovisa would spill her secret within a few beats,
//! so at the first barrier the cheapest effector that prevents it is applied.

use std::sync::Arc;

use plotguide::anticipator::{relevant_effectors, Anticipator, AnticipatorConfig};
use plotguide::automaton::compile;
use plotguide::effector::builtin_catalog;
use plotguide::scenario::parse_scenario;
use plotguide::world::World;

fn main() {
    let s = parse_scenario(include_str!("../../../fixtures/gossip.plot")).unwrap();
    let a = compile(&s).unwrap();
    let catalog = builtin_catalog(&s).unwrap();
    let mut w = World::new(Arc::new(s), Arc::new(a), 1);
    let mut ant = Anticipator::new(catalog, AnticipatorConfig::default());

    // peek at the reasoning before committing anything
    w.begin_tick(&[]).unwrap();
    let snap = w.snapshot();
    let pred = ant.predict(&snap).unwrap();
    println!("unattended: {}", pred.verdict);
    for i in relevant_effectors(&w, &pred, &ant.catalog) {
        let e = &ant.catalog[i];
        println!("  candidate {:<45} cost {}", e.id, e.cost_in(&w));
    }

    if let Some(iv) = ant.at_barrier(&mut w).unwrap() {
        println!("feed: {}", iv.feed_line());
    }
    let mut out = Default::default();
    w.finish_tick(&mut out).unwrap();
    while !w.at_end() {
        let out = w.tick(&[], &mut |w| {
            ant.at_barrier(w).map(drop).map_err(|e| panic!("{e}"))
        });
        out.unwrap();
    }
    println!("story: {}", w.trace_word().join(" "));
    for l in &ant.log {
        println!("  {l}");
    }
}
