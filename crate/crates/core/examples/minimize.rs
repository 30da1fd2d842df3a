//! Both minimizers on Kaktus, checked against the table-filling oracle.

use plotguide::automaton::{compile, minimize_brzozowski, minimize_hopcroft, table_filling_classes};
use plotguide::scenario::parse_scenario;

fn main() {
    let s = parse_scenario(include_str!("../../../fixtures/kaktus.plot")).unwrap();
    let a = compile(&s).unwrap();
    let h = minimize_hopcroft(&a).unwrap();
    let b = minimize_brzozowski(&a);
    let oracle = table_filling_classes(&a);
    println!("compiled {} states", a.len());
    println!("hopcroft {} / brzozowski {} / table filling {}", h.len(), b.len(), oracle);
    for st in h.states.iter().filter(|q| q.origins.len() > 1) {
        println!("merged {} <- {:?}", st.name, st.origins);
    }
    print!("{}", h.to_dot());
}
