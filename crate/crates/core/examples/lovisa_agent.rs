//! Lovisa's gossip agent: with a friendship of strength 1 she idles, with
//! strength 2 she tells Karin who she is in love with.

use plotguide::agent::{AgentState, Primitives};
use plotguide::atom::{Atom, Fact};

fn main() {
    let src = include_str!("../../../fixtures/lovisa.agent");
    let prims = Primitives::standard();
    for strength in [1, 2] {
        let mut lovisa = AgentState::parse("Lovisa", src).unwrap();
        lovisa.assert_fact(Fact::new(
            "friends",
            vec![Atom::str("Lovisa"), Atom::str("Karin"), Atom::int(strength)],
        ));
        println!("-- strength {strength}");
        for _ in 0..8 {
            for e in lovisa.interpreter_cycle(&prims, &mut |_| {}).unwrap() {
                println!("{e}");
            }
        }
        let knows: Vec<String> = lovisa.world.iter().filter(|f| f.predicate == "knows").map(ToString::to_string).collect();
        println!("knows: {knows:?}");
    }
}
