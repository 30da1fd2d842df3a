use super::*;

const KAKTUS: &str = include_str!("../../../../fixtures/kaktus.plot");

fn kaktus() -> Scenario {
    parse_scenario(KAKTUS).unwrap()
}

#[test]
fn kaktus_shape() {
    let s = kaktus();
    assert_eq!(s.name, "Kaktus");
    let ids: Vec<&str> = s.scenes.iter().map(|x| x.id.as_str()).collect();
    assert_eq!(ids, ["q1", "q2", "q3", "q4", "q5", "q6", "q7", "u1"]);
    assert_eq!(s.k(), 6);
    let mut names: Vec<&str> = s.transitions.iter().map(|t| t.name.as_str()).collect();
    names.sort();
    assert_eq!(names, ["a0", "a1", "a16", "a17", "a2", "a3", "a4", "a5", "a6"]);
    assert_eq!(s.agents.len(), 3);
    assert!(s.agent("Niklas").unwrap().offstage);
    assert_eq!(s.settings.player, "Karin");
}

#[test]
fn kaktus_is_lint_clean() {
    let r = validate_scenario(&kaktus());
    assert!(r.is_clean(), "{:?}", r.findings);
}

#[test]
fn round_trip() {
    let s = kaktus();
    let text = serialize_scenario(&s);
    assert_eq!(parse_scenario(&text).unwrap(), s);
}

#[test]
fn minimal_round_trip_keeps_wildcard_guards() {
    let src = r#"scenario tiny { }
        condition 0 Greater global:beat 3
        condition 1 Boolean global:beat
        scene only start end { }
        transition loop only -> only guard "??" "??"
    "#;
    let s = parse_scenario(src).unwrap();
    assert_eq!(s.transitions[0].guards[1].to_string(), "??");
    let again = parse_scenario(&serialize_scenario(&s)).unwrap();
    assert_eq!(again, s);
}

#[test]
fn empty_file_needs_header() {
    let errs = parse_scenario("").unwrap_err();
    assert_eq!(
        errs,
        vec![ScenarioError::Syntax {
            line: 1,
            col: 1,
            message: "expected 'scenario' header".into()
        }]
    );
}

#[test]
fn short_guard_is_reported() {
    let src = KAKTUS.replace("guard \"0111??\"", "guard \"0111?\"");
    let errs = parse_scenario(&src).unwrap_err();
    assert_eq!(
        errs,
        vec![ScenarioError::GuardLengthMismatch {
            transition: "a2".into(),
            expected: 6,
            got: 5
        }]
    );
}

#[test]
fn errors_are_collected_not_fatal() {
    let src = "scenario x { }\nscene a start end { }\nbogus line\ntransition t a -> a guard \"2\"\nscene b { }\n";
    let errs = parse_scenario(src).unwrap_err();
    assert_eq!(errs.len(), 2, "{errs:?}");
}

#[test]
fn dsl_errors_carry_file_positions() {
    let src = "scenario x { }\nagent A {\n  GOALS:\n    ACHIEVE live\n  FACTS: FACT x 1;\n}\n";
    match &parse_scenario(src).unwrap_err()[0] {
        ScenarioError::Syntax { line, message, .. } => {
            assert!(*line >= 4, "{line}");
            assert!(message.starts_with("agent A"), "{message}");
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn references_are_resolved() {
    let src = "scenario x { }\nscene a start end { }\nscene a { }\ntransition t a -> nowhere guard \"\"\n";
    let errs = parse_scenario(src).unwrap_err();
    assert!(errs.contains(&ScenarioError::DuplicateName("a".into())));
    assert!(errs.contains(&ScenarioError::UnresolvedReference("nowhere".into())));
}

#[test]
fn empty_label_is_rejected() {
    let src = "scenario x { }\nscene a start end { }\ntransition t a -> a guard\n";
    assert!(matches!(
        &parse_scenario(src).unwrap_err()[0],
        ScenarioError::Syntax { message, .. } if message.contains("length 0")
    ));
}

#[test]
fn removing_recovery_warns_w2() {
    let mut s = kaktus();
    s.transitions.retain(|t| t.name != "a17");
    let r = validate_scenario(&s);
    assert_eq!(r.codes(), vec![(LintCode::W2, "u1")]);
    assert!(!r.has_errors());
}

#[test]
fn undesirable_end_is_e1() {
    let mut s = kaktus();
    s.scene_mut("u1").unwrap().end = true;
    let r = validate_scenario(&s);
    assert_eq!(r.codes(), vec![(LintCode::E1, "u1")]);
    assert!(r.has_errors());
}

#[test]
fn start_must_be_unique() {
    let mut s = kaktus();
    s.scene_mut("q2").unwrap().start = true;
    assert_eq!(validate_scenario(&s).codes(), vec![(LintCode::E2, "Kaktus")]);
}

#[test]
fn adjacent_climaxes_warn_w3() {
    let mut s = kaktus();
    s.scene_mut("q4").unwrap().climactic = true;
    assert_eq!(validate_scenario(&s).codes(), vec![(LintCode::W3, "a1")]);
    s.settings.oscillation = false;
    assert!(validate_scenario(&s).is_clean());
}

#[test]
fn radical_beats_make_a_scene_climactic() {
    let mut s = kaktus();
    s.scene_mut("q3").unwrap().climactic = false;
    assert!(s.is_climactic(s.scene("q3").unwrap()));
    assert!(!s.is_climactic(s.scene("q1").unwrap()));
}

#[test]
fn over_constrained_label_warns_w4() {
    let mut s = kaktus();
    s.settings.max_updates = 3;
    assert_eq!(validate_scenario(&s).codes(), vec![(LintCode::W4, "a2")]);
}

#[test]
fn dead_end_desirable_scene_warns_w1() {
    let mut s = kaktus();
    s.transitions.retain(|t| t.name != "a4");
    assert_eq!(validate_scenario(&s).codes(), vec![(LintCode::W1, "q5")]);
}

#[test]
fn paths_parse() {
    assert_eq!(
        parse_path("Ebba:friends(Ebba,\"Karin\")").unwrap().to_string(),
        "Ebba:friends(\"Ebba\",\"Karin\")"
    );
    assert_eq!(parse_path("global:beat").unwrap(), ParamPath::Global("beat".into()));
    assert!(parse_path("nocolon").is_err());
    assert_eq!(parse_pattern("x").unwrap().args.len(), 0);
}
