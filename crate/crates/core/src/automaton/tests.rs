use proptest::prelude::*;

use super::*;
use crate::scenario::parse_scenario;

const KAKTUS: &str = include_str!("../../../../fixtures/kaktus.plot");

fn kaktus() -> PlotAutomaton {
    compile(&parse_scenario(KAKTUS).unwrap()).unwrap()
}

fn evals(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

#[test]
fn kaktus_compiles_to_nine_states() {
    let a = kaktus();
    assert_eq!(a.len(), 9);
    assert!(a.is_deterministic());
    assert!(a.is_complete());
    assert_eq!(a.states[a.start()].name, "q1");
    assert_eq!(a.states[a.dead.unwrap()].kind, StateKind::Dead);
}

#[test]
fn kaktus_language() {
    let a = kaktus();
    assert!(a.accepts(&["a0", "a3", "a4", "a3", "a4", "a6"]).unwrap());
    assert!(a.accepts(&["a0", "a2", "a1"]).unwrap());
    assert!(!a.accepts(&[]).unwrap());
    assert!(!a.accepts(&["a0", "a16"]).unwrap());
    assert!(a.accepts(&["a0", "a16", "a17", "a6"]).unwrap());
    assert_eq!(a.accepts(&["zz"]), Err(AutomatonError::UnknownSymbol("zz".into())));
}

#[test]
fn string_labels_expand_through_synthetic_states() {
    let src = r#"scenario s { }
        condition 0 Greater global:beat 1
        scene q1 start { }
        scene q2 end { }
        transition t q1 -> q2 guard "1" "?" "0"
    "#;
    let a = compile(&parse_scenario(src).unwrap()).unwrap();
    assert_eq!(a.symbols, ["t.1", "t.2", "t.3"]);
    let synth: Vec<&str> = a
        .states
        .iter()
        .filter(|s| s.kind == StateKind::Synthetic)
        .map(|s| s.name.as_str())
        .collect();
    assert_eq!(synth, ["q1'", "q1''"]);
    assert_eq!(a.len(), 5);
    assert!(a.accepts(&["t.1", "t.2", "t.3"]).unwrap());
    assert!(!a.accepts(&["t.1", "t.2"]).unwrap());
    let m = a.initial_state();
    let m = a.step(&m, 0).unwrap();
    assert_eq!(m.active.as_deref(), Some("q1"));
    assert_eq!(m.playable, ["q2".to_string()].into());
}

#[test]
fn single_scene_has_two_states() {
    let src = "scenario one { }\nscene only start end { }\n";
    let a = compile(&parse_scenario(src).unwrap()).unwrap();
    assert_eq!(a.len(), 2);
    assert!(a.accepts(&[]).unwrap());
}

#[test]
fn compile_refuses_lint_errors() {
    let src = KAKTUS.replace("scene u1 undesirable satellite", "scene u1 undesirable end satellite");
    assert!(matches!(
        compile(&parse_scenario(&src).unwrap()),
        Err(AutomatonError::CompileError(f)) if f.len() == 1
    ));
}

#[test]
fn guards_gate_enabled_transitions() {
    let a = kaktus();
    let q2 = a.state("q2").unwrap();
    let m = ModelState {
        current: q2,
        ..a.initial_state()
    };
    let a2 = a.symbol("a2").unwrap();
    assert!(a.enabled_transitions(&m, &evals("011100")).contains(&a2));
    assert!(!a.enabled_transitions(&m, &evals("111100")).contains(&a2));
    // a6 needs c2 false; a2 needs it true
    assert_eq!(a.enabled_transitions(&m, &evals("011100")), vec![a2]);
    // initial evaluations from q1: a0 needs c2, which starts false
    assert!(a.enabled_transitions(&a.initial_state(), &evals("010000")).is_empty());
}

#[test]
fn wildcard_guard_admits_every_vector() {
    let g = Guard::any(6);
    for bits in 0u32..64 {
        let v: Vec<bool> = (0..6).map(|i| bits >> i & 1 == 1).collect();
        assert!(g.admits(&v));
    }
}

#[test]
fn step_is_pure_and_tracks_scenes() {
    let a = kaktus();
    let m0 = a.initial_state();
    assert_eq!(m0.active.as_deref(), Some("q1"));
    assert_eq!(m0.playable, ["q2".to_string()].into());
    let before = m0.clone();
    let m1 = a.step(&m0, a.symbol("a0").unwrap()).unwrap();
    assert_eq!(m0, before);
    assert_eq!(m1.active.as_deref(), Some("q2"));
    assert_eq!(m1.played, ["q1".to_string()].into());
    let want: BTreeSet<String> = ["q3", "q5", "q7", "u1"].iter().map(|s| s.to_string()).collect();
    assert_eq!(m1.playable, want);
    // undefined moves land in the dead state
    let d = a.step(&m1, a.symbol("a1").unwrap()).unwrap();
    assert!(d.dead);
    assert_eq!(d.active, None);
}

#[test]
fn step_on_nfa_is_illegal() {
    let mut a = PlotAutomaton::new("n", vec!["x".into()]);
    let p = a.add_state("p", false, Desirability::Desirable);
    let q = a.add_state("q", true, Desirability::Desirable);
    a.add_edge(p, 0, p);
    a.add_edge(p, 0, q);
    a.starts = vec![p];
    assert!(matches!(
        a.step(&a.initial_state(), 0),
        Err(AutomatonError::IllegalTransition { .. })
    ));
    assert_eq!(minimize_hopcroft(&a), Err(AutomatonError::NotDeterministic));
}

#[test]
fn choose_is_seeded_and_uniformish() {
    let mut r = SimRng::new(42);
    let picks: Vec<usize> = (0..8).map(|_| choose_transition(&[3, 5, 7], &mut r).unwrap()).collect();
    let mut again = SimRng::new(42);
    let replay: Vec<usize> = (0..8).map(|_| choose_transition(&[3, 5, 7], &mut again).unwrap()).collect();
    assert_eq!(picks, replay);
    assert_eq!(picks, [5, 5, 7, 5, 7, 3, 3, 7]);
    let mut r = SimRng::new(42);
    let before = r.state();
    assert_eq!(choose_transition(&[9], &mut r), Ok(9));
    assert_eq!(r.state(), before);
    assert_eq!(choose_transition(&[], &mut r), Err(AutomatonError::NoEnabledTransition));
    let mut counts = [0usize; 3];
    let mut r = SimRng::new(7);
    for _ in 0..3000 {
        counts[choose_transition(&[0, 1, 2], &mut r).unwrap()] += 1;
    }
    assert!(counts.iter().all(|&c| (900..1100).contains(&c)), "{counts:?}");
}

#[test]
fn reach_analysis_on_kaktus() {
    let a = kaktus();
    let r = a.reach_analysis();
    assert_eq!(r.reachable.len(), 9);
    assert!(!r.end_reaching.contains(&a.dead.unwrap()));
    assert!(r.end_reaching.contains(&a.state("u1").unwrap()));
}

#[test]
fn dump_is_stable() {
    let d = kaktus().dump();
    assert!(d.starts_with("automaton Kaktus\nstates 9\nstart q1\n"));
    assert!(d.contains("edge q2 --a2/0111??--> q3\n"));
    assert!(d.ends_with("otherwise --> dead\n"));
    assert_eq!(d, kaktus().dump());
}

fn three_state_dfa() -> PlotAutomaton {
    // q and r are interchangeable ends
    let mut a = PlotAutomaton::new("t", vec!["x".into(), "y".into()]);
    let p = a.add_state("p", false, Desirability::Desirable);
    let q = a.add_state("q", true, Desirability::Desirable);
    let r = a.add_state("r", true, Desirability::Desirable);
    a.add_edge(p, 0, q);
    a.add_edge(p, 1, r);
    a.add_edge(q, 0, q);
    a.add_edge(q, 1, r);
    a.add_edge(r, 0, q);
    a.add_edge(r, 1, r);
    a.starts = vec![p];
    a
}

#[test]
fn three_state_dfa_minimizes_to_two() {
    let a = three_state_dfa();
    let h = minimize_hopcroft(&a).unwrap();
    let b = minimize_brzozowski(&a);
    assert_eq!(h.len(), 2);
    assert_eq!(b.len(), 2);
    assert_eq!(table_filling_classes(&a), 2);
    assert_eq!(h.states[1].origins, ["q".to_string(), "r".to_string()].into());
}

#[test]
fn kaktus_minimizes_to_eight() {
    let a = kaktus();
    let h = minimize_hopcroft(&a).unwrap();
    let b = minimize_brzozowski(&a);
    assert_eq!(h.len(), 8);
    assert_eq!(b.len(), 8);
    assert_eq!(table_filling_classes(&a), 8);
    let merged: Vec<&StateInfo> = h.states.iter().filter(|s| s.origins.len() > 1).collect();
    assert_eq!(merged.len(), 1);
    assert_eq!(merged[0].origins, ["q6".to_string(), "q7".to_string()].into());
    let mb: Vec<&StateInfo> = b.states.iter().filter(|s| s.origins.len() > 1).collect();
    assert_eq!(mb[0].origins, merged[0].origins);
}

#[test]
fn determinize_joins_desirability() {
    let mut a = PlotAutomaton::new("n", vec!["x".into()]);
    let p = a.add_state("p", false, Desirability::Desirable);
    let q = a.add_state("q", true, Desirability::Desirable);
    let u = a.add_state("u", false, Desirability::Undesirable);
    a.add_edge(p, 0, q);
    a.add_edge(p, 0, u);
    a.starts = vec![p];
    let d = determinize(&a);
    assert!(d.is_deterministic() && d.is_complete());
    let s = d.next(0, 0).unwrap();
    assert_eq!(d.states[s].desirability, Desirability::Mixed);
    assert!(d.states[s].end);
    assert_eq!(minimize_brzozowski(&a).len(), table_filling_classes(&a));
}

fn arb_automaton() -> impl Strategy<Value = PlotAutomaton> {
    (1usize..=8, 1usize..=3).prop_flat_map(|(n, k)| {
        (
            Just(n),
            Just(k),
            prop::collection::vec((any::<bool>(), any::<bool>()), n),
            prop::collection::vec(prop::collection::vec(0..n + 1, 0..3), n * k),
            prop::collection::vec(0..n, 1..3),
        )
            .prop_map(|(n, k, flags, cells, starts)| {
                let syms = (0..k).map(|i| format!("s{i}")).collect();
                let mut a = PlotAutomaton::new("r", syms);
                for (i, (end, des)) in flags.into_iter().enumerate() {
                    let d = if des { Desirability::Desirable } else { Desirability::Undesirable };
                    a.add_state(format!("q{i}"), end, d);
                }
                for (c, targets) in cells.into_iter().enumerate() {
                    for t in targets {
                        // index n means "no edge"
                        if t < n {
                            a.add_edge(c / k, c % k, t);
                        }
                    }
                }
                let mut starts = starts;
                starts.sort();
                starts.dedup();
                a.starts = starts;
                a
            })
    })
}

/// (end, desirability) of the subset reached after `word`, the observable
/// the minimizers must preserve.
fn observe(a: &PlotAutomaton, word: &[usize]) -> (bool, Desirability, bool) {
    let d = determinize(a);
    let mut q = d.start();
    for &s in word {
        q = d.next(q, s).unwrap();
    }
    (d.states[q].end, d.states[q].desirability, Some(q) == d.dead)
}

fn observe_dfa(m: &PlotAutomaton, word: &[usize]) -> (bool, Desirability, bool) {
    let mut q = m.start();
    for &s in word {
        q = m.next(q, s).unwrap();
    }
    (m.states[q].end, m.states[q].desirability, Some(q) == m.dead)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn minimizers_agree_with_the_oracle(a in arb_automaton(),
                                        words in prop::collection::vec(prop::collection::vec(0usize..3, 0..=10), 8)) {
        let classes = table_filling_classes(&a);
        let h = minimize_hopcroft(&determinize(&a)).unwrap();
        let b = minimize_brzozowski(&a);
        prop_assert_eq!(h.len(), classes);
        prop_assert_eq!(b.len(), classes);
        prop_assert!(h.is_deterministic() && h.is_complete());
        prop_assert!(b.is_deterministic() && b.is_complete());
        for w in words {
            let w: Vec<usize> = w.into_iter().filter(|&s| s < a.symbols.len()).collect();
            let want = observe(&a, &w);
            prop_assert_eq!(observe_dfa(&h, &w), want);
            prop_assert_eq!(observe_dfa(&b, &w), want);
            prop_assert_eq!(a.accepts_symbols(&w), want.0);
        }
    }

    #[test]
    fn minimization_is_idempotent(a in arb_automaton()) {
        let h = minimize_hopcroft(&determinize(&a)).unwrap();
        prop_assert_eq!(minimize_hopcroft(&h).unwrap().len(), h.len());
        let b = minimize_brzozowski(&a);
        prop_assert_eq!(minimize_brzozowski(&b).len(), b.len());
        prop_assert_eq!(minimize_hopcroft(&b).unwrap().len(), b.len());
    }
}
