use std::sync::Arc;

use super::*;
use crate::automaton::compile;
use crate::effector::builtin_catalog;
use crate::scenario::parse_scenario;

const KAKTUS: &str = include_str!("../../../../fixtures/kaktus.plot");
const GOSSIP: &str = include_str!("../../../../fixtures/gossip.plot");

fn world(src: &str, seed: u64) -> World {
    let s = parse_scenario(src).unwrap();
    let a = compile(&s).unwrap();
    World::new(Arc::new(s), Arc::new(a), seed)
}

fn anticipator(w: &World) -> Anticipator {
    Anticipator::new(builtin_catalog(&w.scenario).unwrap(), AnticipatorConfig::default())
}

/// Runs `beats` full beats with the anticipator at every barrier.
fn run(w: &mut World, ant: &mut Anticipator, beats: usize) -> Vec<String> {
    let mut scenes = Vec::new();
    for _ in 0..beats {
        if w.at_end() {
            break;
        }
        let mut out = w.begin_tick(&[]).unwrap();
        ant.at_barrier(w).unwrap();
        w.finish_tick(&mut out).unwrap();
        scenes.extend(w.model.active.clone());
    }
    scenes
}

#[test]
fn gossip_unattended_goes_bad() {
    let mut w = world(GOSSIP, 1);
    w.begin_tick(&[]).unwrap();
    let p = simulate(&w.snapshot(), 12, &PlayerPolicy::Silence).unwrap();
    assert!(matches!(p.verdict, Verdict::EntersUndesirable(_)), "{}", p.verdict);
    assert_eq!(w.automaton.symbols[p.bad_symbol.unwrap()], "leak");
    assert!(p.writes.iter().any(|r| r.plan == "gossip" && r.written.predicate == "knows"));
}

#[test]
fn gossip_three_candidates_cheapest_wins() {
    let mut w = world(GOSSIP, 1);
    w.begin_tick(&[]).unwrap();
    let snap = w.snapshot();
    let mut ant = anticipator(&w);
    let pred = ant.predict(&snap).unwrap();
    let rel = relevant_effectors(&w, &pred, &ant.catalog);
    let mut ids: Vec<&str> = rel.iter().map(|&i| ant.catalog[i].id.as_str()).collect();
    ids.sort_unstable();
    assert_eq!(
        ids,
        ["add_goal:Lovisa/homework", "remove_plan:Lovisa/gossip", "set_fact:Lovisa:friends(Lovisa,Karin)-1"]
    );
    let found = ant.search(&snap, &pred).unwrap().unwrap();
    assert_eq!(ant.catalog[found.set[0]].id, "set_fact:Lovisa:friends(Lovisa,Karin)-1");
    assert_eq!(found.considered, ["set_fact:Lovisa:friends(Lovisa,Karin)-1"]);
    assert!(found.prediction.verdict.is_ok());
}

#[test]
fn gossip_live_run_never_exposed() {
    let mut w = world(GOSSIP, 1);
    let mut ant = anticipator(&w);
    let scenes = run(&mut w, &mut ant, 30);
    assert!(!scenes.iter().any(|s| s == "exposed"), "{scenes:?}");
    assert!(w.at_end());
    assert_eq!(ant.interventions.len(), 1);
    let iv = &ant.interventions[0];
    assert_eq!(iv.ids(), ["set_fact:Lovisa:friends(Lovisa,Karin)-1"]);
    assert_eq!(iv.write_set.to_string(), "Lovisa:friends(Lovisa,Karin) 2→1");
    assert!(iv.feed_line().starts_with("1\tenters_undesirable("));
}

#[test]
fn low_friendship_is_already_fine() {
    let src = GOSSIP.replace("FACT friends \"Lovisa\" \"Karin\" 2;", "FACT friends \"Lovisa\" \"Karin\" 1;");
    let mut w = world(&src, 1);
    w.begin_tick(&[]).unwrap();
    let p = simulate(&w.snapshot(), 12, &PlayerPolicy::Silence).unwrap();
    assert_eq!(p.verdict, Verdict::Ok);
    assert!(p.trajectory.len() <= 12);
}

#[test]
fn horizon_zero_is_an_error() {
    let w = world(GOSSIP, 1);
    assert_eq!(
        simulate(&w.snapshot(), 0, &PlayerPolicy::Silence),
        Err(AnticipatorError::HorizonZero)
    );
}

#[test]
fn empty_catalog_finds_nothing_and_leaves_world_alone() {
    let mut w = world(GOSSIP, 1);
    let mut ant = Anticipator::new(Vec::new(), AnticipatorConfig::default());
    w.begin_tick(&[]).unwrap();
    let before = w.digest();
    assert_eq!(ant.at_barrier(&mut w).unwrap(), None);
    assert_eq!(w.digest(), before);
    assert!(ant.log.iter().any(|l| l.contains("no_effector")));
}

#[test]
fn simulation_is_deterministic_and_pure() {
    let mut w = world(KAKTUS, 7);
    for _ in 0..3 {
        w.tick_plain(&["/act invite Niklas".into()]).unwrap();
    }
    w.begin_tick(&[]).unwrap();
    let snap = w.snapshot();
    let before = w.digest();
    let stub = PlayerPolicy::random(3, w.scenario.settings.repertoire.clone());
    let a = simulate(&snap, 20, &stub).unwrap();
    let b = simulate(&snap, 20, &stub).unwrap();
    assert_eq!(a, b);
    assert_eq!(snap.world().digest(), before);
}

#[test]
fn sensibility_keeps_then_discards() {
    let mut w = world(GOSSIP, 1);
    w.begin_tick(&[]).unwrap();
    let mut ant = Anticipator::new(Vec::new(), AnticipatorConfig {
        interventions: false,
        ..Default::default()
    });
    let p = ant.predict(&w.snapshot()).unwrap();
    assert_eq!(sensibility_check(&p, &w.snapshot()), Sensibility::Keep);
    let mut out = TickOutcome::default();
    w.finish_tick(&mut out).unwrap();
    w.begin_tick(&[]).unwrap();
    assert_eq!(sensibility_check(&p, &w.snapshot()), Sensibility::Keep);
    // the player blurts out the secret themselves: the watched condition flips
    w.agent_mut("Lovisa").unwrap().assert_fact(crate::atom::Fact::new(
        "knows",
        ["Karin", "in_love", "Lovisa", "Niklas"].map(Atom::str).to_vec(),
    ));
    assert!(matches!(sensibility_check(&p, &w.snapshot()), Sensibility::Discard(_)));
    let late = {
        let mut w2 = w.clone();
        for _ in 0..20 {
            w2.tick_plain(&[]).unwrap();
        }
        w2.begin_tick(&[]).unwrap();
        w2.snapshot()
    };
    assert!(matches!(sensibility_check(&p, &late), Sensibility::Discard(_)));
}

#[test]
fn disabled_interventions_never_touch_the_world() {
    for seed in 0..5 {
        let mut plain = world(KAKTUS, seed);
        let mut watched = world(KAKTUS, seed);
        let mut ant = Anticipator::new(builtin_catalog(&watched.scenario).unwrap(), AnticipatorConfig {
            interventions: false,
            ..Default::default()
        });
        let mut player = PlayerPolicy::random(seed, plain.scenario.settings.repertoire.clone());
        for _ in 0..25 {
            let input = player.next_input();
            plain.tick_plain(&input).unwrap();
            let mut out = watched.begin_tick(&input).unwrap();
            ant.at_barrier(&mut watched).unwrap();
            watched.finish_tick(&mut out).unwrap();
            assert_eq!(plain.digest(), watched.digest());
        }
        assert!(ant.interventions.is_empty());
    }
}

const ROW: &str = include_str!("../../../../fixtures/row.plot");

#[test]
fn two_agents_need_a_pair() {
    let mut w = world(ROW, 1);
    w.begin_tick(&[]).unwrap();
    let snap = w.snapshot();
    let mut ant = anticipator(&w);
    let pred = ant.predict(&snap).unwrap();
    assert!(!pred.verdict.is_ok());
    let found = ant.search(&snap, &pred).unwrap().unwrap();
    let mut ids: Vec<&str> = found.set.iter().map(|&i| ant.catalog[i].id.as_str()).collect();
    ids.sort_unstable();
    assert_eq!(
        ids,
        ["set_fact:Anna:friends(Anna,Karin)-1", "set_fact:Bert:friends(Bert,Karin)-1"]
    );
    assert!(found.prediction.verdict.is_ok());

    let mut w = world(ROW, 1);
    let mut ant = anticipator(&w);
    let scenes = run(&mut w, &mut ant, 30);
    assert!(!scenes.iter().any(|s| s == "row"), "{scenes:?}");
    assert!(w.at_end());
}

#[test]
fn single_size_search_can_only_postpone() {
    let mut w = world(ROW, 1);
    w.begin_tick(&[]).unwrap();
    let snap = w.snapshot();
    let mut ant = Anticipator::new(builtin_catalog(&w.scenario).unwrap(), AnticipatorConfig {
        k_max: 1,
        ..Default::default()
    });
    let pred = ant.predict(&snap).unwrap();
    // nothing clears the horizon; whatever comes back must at least postpone
    if let Some(found) = ant.search(&snap, &pred).unwrap() {
        assert!(found.prediction.verdict.beat() > pred.verdict.beat());
    }
}
