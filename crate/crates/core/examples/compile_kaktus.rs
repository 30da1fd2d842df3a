//! Lint and compile the Kaktus scenario, then check a few words against it.

use plotguide::automaton::compile;
use plotguide::scenario::{parse_scenario, validate_scenario};

fn main() {
    let src = include_str!("../../../fixtures/kaktus.plot");
    let scenario = parse_scenario(src).expect("fixture parses");
    let report = validate_scenario(&scenario);
    println!("lint findings: {}", report.findings.len());

    let m = compile(&scenario).expect("fixture compiles");
    print!("{}", m.dump());

    for word in [&["a0", "a3", "a4", "a3", "a4", "a6"][..], &[], &["a0", "a16"]] {
        println!("{:<24} accepted: {}", word.join(" "), m.accepts(word).unwrap());
    }
    let reach = m.reach_analysis();
    println!("reachable {} / end-reaching {}", reach.reachable.len(), reach.end_reaching.len());
}
