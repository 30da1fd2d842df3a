use super::dsl::tests::LOVISA;
use super::*;

fn lovisa(strength: i64) -> AgentState {
    let mut a = AgentState::parse("Lovisa", LOVISA).unwrap();
    a.assert_fact(Fact::new(
        "friends",
        vec![Atom::str("Lovisa"), Atom::str("Karin"), Atom::int(strength)],
    ));
    a
}

fn run(a: &mut AgentState, cycles: usize) -> Vec<AgentEvent> {
    let prims = Primitives::standard();
    let mut out = Vec::new();
    for _ in 0..cycles {
        out.extend(a.interpreter_cycle(&prims, &mut |_| {}).unwrap());
    }
    out
}

fn knows() -> Fact {
    Fact::new(
        "knows",
        ["Karin", "in_love", "Lovisa", "Niklas"].into_iter().map(Atom::str).collect(),
    )
}

#[test]
fn weak_friendship_only_idles() {
    let mut a = lovisa(1);
    let ev = run(&mut a, 20);
    assert!(!ev.is_empty());
    assert!(ev.iter().all(|e| e.action == "doIdle" && e.kind == EventKind::Execute));
    assert!(!a.world.contains(&knows()));
}

#[test]
fn strong_friendship_gossips_once() {
    let mut a = lovisa(2);
    let mut asserted = 0;
    let prims = Primitives::standard();
    let mut had = false;
    let mut tells = Vec::new();
    for _ in 0..30 {
        for e in a.interpreter_cycle(&prims, &mut |_| {}).unwrap() {
            if e.action == "tell" {
                tells.push(e);
            }
        }
        let now = a.world.contains(&knows());
        if now && !had {
            asserted += 1;
        }
        had = now;
    }
    assert_eq!(asserted, 1);
    assert_eq!(tells.len(), 1);
    assert_eq!(tells[0].kind, EventKind::Perform);
    assert_eq!(tells[0].cycle, 6);
    assert_eq!(tells[0].to_string(), "6\tLovisa\tPERFORM\ttell(Karin,in_love,Lovisa,Niklas)");
}

#[test]
fn or_emits_one_branch_per_execution() {
    let mut a = lovisa(2);
    let ev = run(&mut a, 40);
    // after the single gossip, every later pass through `live` idles
    let idles = ev.iter().filter(|e| e.action == "doIdle").count();
    let tells = ev.iter().filter(|e| e.action == "tell").count();
    assert_eq!(tells, 1);
    assert!(idles > 0);
    let mut b = lovisa(1);
    let ev = run(&mut b, 40);
    assert!(ev.iter().all(|e| e.action == "doIdle"));
}

#[test]
fn empty_goal_list_still_observes() {
    let mut a = AgentState::parse("x", "FACTS: FACT mood 3;").unwrap();
    let prims = Primitives::standard();
    let mut seen = 0;
    for _ in 0..5 {
        let ev = a.interpreter_cycle(&prims, &mut |_| seen += 1).unwrap();
        assert!(ev.is_empty());
    }
    assert_eq!(seen, 5);
    assert_eq!(a.observer_calls, 5);
}

#[test]
fn observer_runs_once_between_steps() {
    let mut a = lovisa(2);
    let prims = Primitives::standard();
    for _ in 0..25 {
        let before = (a.observer_calls, a.steps_executed);
        a.interpreter_cycle(&prims, &mut |_| {}).unwrap();
        assert_eq!(a.observer_calls, before.0 + 1);
        assert!(a.steps_executed <= before.1 + 1);
    }
}

#[test]
fn selection_prefers_utility_then_order() {
    let src = r#"GOALS: ACHIEVE g;
        PLAN: { NAME: "low" GOAL: ACHIEVE g; UTILITY: 1; BODY: EXECUTE idle; }
        PLAN: { NAME: "high" GOAL: ACHIEVE g; UTILITY: 2; BODY: EXECUTE idle; }
        PLAN: { NAME: "high2" GOAL: ACHIEVE g; UTILITY: 2; BODY: EXECUTE idle; }"#;
    let a = AgentState::parse("x", src).unwrap();
    let g = GoalInstance {
        kind: GoalKind::Achieve,
        name: "g".into(),
        args: vec![],
    };
    assert_eq!(a.select_plan(&g).unwrap().0.name, "high");
    let l = lovisa(1);
    let live = GoalInstance {
        kind: GoalKind::Achieve,
        name: "live".into(),
        args: vec![],
    };
    assert_eq!(l.select_plan(&live).unwrap().0.name, "live");
}

#[test]
fn leading_prefix_gates_applicability() {
    let src = r#"GOALS: ACHIEVE g;
        FACTS: FACT mood 1;
        PLAN: { NAME: "cheer" GOAL: ACHIEVE g; UTILITY: 5; BODY: FACT mood $m; TEST(> $m 3); EXECUTE idle; }
        PLAN: { NAME: "sulk" GOAL: ACHIEVE g; BODY: EXECUTE wait; }"#;
    let mut a = AgentState::parse("x", src).unwrap();
    let g = GoalInstance {
        kind: GoalKind::Achieve,
        name: "g".into(),
        args: vec![],
    };
    assert_eq!(a.select_plan(&g).unwrap().0.name, "sulk");
    a.assert_fact(Fact::new("mood", vec![Atom::int(4)]));
    assert_eq!(a.select_plan(&g).unwrap().0.name, "cheer");
}

#[test]
fn assert_is_last_writer_wins() {
    let mut a = lovisa(1);
    let n = a.world.len();
    a.assert_fact(Fact::new(
        "friends",
        vec![Atom::str("Lovisa"), Atom::str("Karin"), Atom::int(2)],
    ));
    assert_eq!(a.world.len(), n);
    let key = Fact::new("friends", vec![Atom::str("Lovisa"), Atom::str("Karin")]).key();
    assert_eq!(a.world.value(&key), Some(Num::from_int(2)));
}

#[test]
fn retracting_belief_blocks_gossip() {
    let mut a = lovisa(2);
    let gone = a.retract_fact(&Pattern::new(
        "in_love",
        vec![Term::Atom(Atom::str("Lovisa")), Term::Wild],
    ));
    assert_eq!(gone.len(), 1);
    let ev = run(&mut a, 20);
    assert!(ev.iter().all(|e| e.action != "tell"));
    assert!(a.retract_fact(&Pattern::new("nothing", vec![])).is_empty());
}

#[test]
fn unregistered_primitive_errors() {
    let mut a = lovisa(1);
    let prims = Primitives::new(["tell"]);
    let mut err = None;
    for _ in 0..10 {
        if let Err(e) = a.interpreter_cycle(&prims, &mut |_| {}) {
            err = Some(e);
            break;
        }
    }
    assert_eq!(err, Some(AgentError::PrimitiveNotRegistered("doIdle".into())));
}

#[test]
fn snapshot_restore_replays_identically() {
    let mut a = lovisa(2);
    run(&mut a, 3);
    let snap = a.snapshot();
    let original = run(&mut a, 10);
    let mut copy = snap.restore();
    assert_eq!(run(&mut copy, 10), original);
    assert_eq!(snap.restore().snapshot(), snap);
}

#[test]
fn snapshot_copy_is_isolated() {
    let a = lovisa(2);
    let digest = a.state_digest();
    let mut copy = a.snapshot().restore();
    copy.retract_fact(&Pattern::new("friends", vec![Term::Wild, Term::Wild]));
    copy.remove_plan("gossip");
    run(&mut copy, 5);
    assert_eq!(a.state_digest(), digest);
}

#[test]
fn removing_running_plan_aborts_to_fallback() {
    let mut a = lovisa(2);
    run(&mut a, 4); // gossip pushed on cycle 4
    assert_eq!(a.intentions.last().unwrap().plan.name, "gossip");
    assert!(a.remove_plan("gossip"));
    let ev = run(&mut a, 10);
    assert!(ev.iter().all(|e| e.action != "tell"));
    assert!(ev.iter().any(|e| e.action == "doIdle"));
}

#[test]
fn higher_priority_goal_preempts_at_selection() {
    let mut a = lovisa(2);
    a.add_plan(Arc::new(Plan::new(
        "chores".into(),
        GoalPattern {
            kind: GoalKind::Achieve,
            name: "chores".into(),
            args: vec![],
        },
        vec![],
        vec![Step::Execute {
            action: "wait".into(),
            args: vec![],
        }],
        vec![],
        0,
    )));
    run(&mut a, 3);
    a.add_goal(GoalDecl::achieve("chores", 1));
    let ev = run(&mut a, 20);
    assert!(ev.iter().all(|e| e.action == "wait"));
}

#[test]
fn perform_goal_is_dropped_after_success() {
    let src = r#"GOALS: PERFORM greet;
        PLAN: { NAME: "hi" GOAL: PERFORM greet; BODY: PERFORM say "hello"; }"#;
    let mut a = AgentState::parse("x", src).unwrap();
    let ev = run(&mut a, 6);
    assert_eq!(ev.len(), 1);
    assert!(a.goals.is_empty());
}

#[test]
fn write_trace_records_support_direction() {
    let mut a = lovisa(2);
    a.set_tracing(true);
    run(&mut a, 6);
    let t = a.take_trace();
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].plan, "gossip");
    assert_eq!(t[0].root_goal, "live");
    let key = Fact::new("friends", vec![Atom::str("Lovisa"), Atom::str("Karin")]).key();
    assert_eq!(t[0].supports, vec![(key, Direction::Down)]);
}

#[test]
fn cache_invalidated_by_dependent_write() {
    let mut a = lovisa(1);
    a.cond_cache.insert(
        0,
        CachedCondition {
            value: true,
            reads: vec!["friends".into()],
        },
    );
    a.cond_cache.insert(
        1,
        CachedCondition {
            value: true,
            reads: vec!["money".into()],
        },
    );
    a.assert_fact(Fact::new(
        "friends",
        vec![Atom::str("Lovisa"), Atom::str("Karin"), Atom::int(3)],
    ));
    assert!(!a.cond_cache.contains_key(&0));
    assert!(a.cond_cache.contains_key(&1));
}
