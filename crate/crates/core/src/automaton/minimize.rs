//! Subset construction, Hopcroft partition refinement, Brzozowski double
//! reversal, and a table-filling oracle. Every minimizer keeps end states,
//! desirable states and undesirable states in separate classes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::*;

fn dead_info() -> StateInfo {
    StateInfo {
        name: "dead".into(),
        origins: ["dead".to_string()].into(),
        desirability: Desirability::Undesirable,
        end: false,
        kind: StateKind::Dead,
    }
}

/// Metadata of a subset state. The dead state contributes nothing: a set
/// holding it plus live states behaves exactly like the live states alone.
fn merge_info(a: &PlotAutomaton, members: &BTreeSet<usize>) -> StateInfo {
    let live: BTreeSet<usize> = members.iter().copied().filter(|&m| Some(m) != a.dead).collect();
    let members = if live.is_empty() { members } else { &live };
    if members.len() == 1 {
        return a.states[*members.first().unwrap()].clone();
    }
    if members.is_empty() {
        return dead_info();
    }
    let mut names: Vec<&str> = members.iter().map(|&m| a.states[m].name.as_str()).collect();
    names.sort();
    let first = &a.states[*members.first().unwrap()];
    StateInfo {
        name: format!("{{{}}}", names.join(",")),
        origins: members.iter().flat_map(|&m| a.states[m].origins.iter().cloned()).collect(),
        desirability: members
            .iter()
            .map(|&m| a.states[m].desirability)
            .fold(first.desirability, Desirability::join),
        end: members.iter().any(|&m| a.states[m].end),
        kind: StateKind::Merged,
    }
}

fn shell(a: &PlotAutomaton) -> PlotAutomaton {
    let mut out = PlotAutomaton::new(a.name.clone(), a.symbols.clone());
    out.guards = a.guards.clone();
    out
}

fn push_state(out: &mut PlotAutomaton, info: StateInfo) -> usize {
    out.states.push(info);
    out.delta.push(vec![Vec::new(); out.symbols.len()]);
    out.states.len() - 1
}

/// Subset construction from the start set. Empty subsets collapse into a
/// dead state, so the result is deterministic and complete.
pub fn determinize(a: &PlotAutomaton) -> PlotAutomaton {
    let mut out = shell(a);
    let mut index: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let norm = |set: BTreeSet<usize>| -> BTreeSet<usize> { set.into_iter().filter(|&q| Some(q) != a.dead).collect() };
    let start = norm(a.starts.iter().copied().collect());
    let s0 = push_state(&mut out, merge_info(a, &start));
    index.insert(start.clone(), s0);
    queue.push_back(start);
    out.starts = vec![s0];
    while let Some(set) = queue.pop_front() {
        let from = index[&set];
        for sym in 0..a.symbols.len() {
            let next = norm(set.iter().flat_map(|&q| a.delta[q][sym].iter().copied()).collect());
            let to = match index.get(&next) {
                Some(&t) => t,
                None => {
                    let t = push_state(&mut out, merge_info(a, &next));
                    index.insert(next.clone(), t);
                    queue.push_back(next);
                    t
                }
            };
            out.delta[from][sym] = vec![to];
        }
    }
    out.dead = index.get(&BTreeSet::new()).copied();
    if let Some(d) = out.dead {
        out.states[d] = dead_info();
    }
    out
}

/// Builds the quotient automaton for a class assignment of reachable
/// states; classes are renumbered in breadth-first order from the start.
fn quotient(a: &PlotAutomaton, class_of: &[Option<usize>]) -> PlotAutomaton {
    let mut members: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (q, c) in class_of.iter().enumerate() {
        if let Some(c) = c {
            members.entry(*c).or_default().insert(q);
        }
    }
    let mut out = shell(a);
    let mut renum: BTreeMap<usize, usize> = BTreeMap::new();
    let start_class = class_of[a.start()].expect("start is reachable");
    let mut queue = VecDeque::from([start_class]);
    renum.insert(start_class, push_state(&mut out, merge_info(a, &members[&start_class])));
    while let Some(c) = queue.pop_front() {
        let rep = *members[&c].first().unwrap();
        for sym in 0..a.symbols.len() {
            let t = a.next(rep, sym).expect("complete input");
            let tc = class_of[t].expect("successor of a reachable state is reachable");
            if let std::collections::btree_map::Entry::Vacant(e) = renum.entry(tc) {
                e.insert(push_state(&mut out, merge_info(a, &members[&tc])));
                queue.push_back(tc);
            }
        }
    }
    for (&c, &n) in &renum {
        let rep = *members[&c].first().unwrap();
        for sym in 0..a.symbols.len() {
            let t = a.next(rep, sym).unwrap();
            out.delta[n][sym] = vec![renum[&class_of[t].unwrap()]];
        }
    }
    out.starts = vec![0];
    out.dead = a.dead.and_then(|d| class_of[d]).map(|c| renum[&c]);
    out
}

fn reachable(a: &PlotAutomaton) -> Vec<bool> {
    let r = a.reach_analysis().reachable;
    (0..a.len()).map(|q| r.contains(&q)).collect()
}

/// Initial partition key. The dead state is kept apart from ordinary
/// undesirable sinks: it stands for "no continuation at all".
fn signature(a: &PlotAutomaton, q: usize) -> (bool, Desirability, bool) {
    (a.states[q].end, a.states[q].desirability, Some(q) == a.dead)
}

/// Hopcroft partition refinement on a deterministic automaton; incomplete
/// input is completed first and unreachable states are dropped.
pub fn minimize_hopcroft(a: &PlotAutomaton) -> Result<PlotAutomaton, AutomatonError> {
    if !a.is_deterministic() {
        return Err(AutomatonError::NotDeterministic);
    }
    let a = a.completed();
    let live = reachable(&a);
    let states: Vec<usize> = (0..a.len()).filter(|&q| live[q]).collect();
    let nsym = a.symbols.len();

    // inverse transitions restricted to reachable states
    let mut inv: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); a.len()]; nsym];
    for &q in &states {
        for (sym, row) in inv.iter_mut().enumerate() {
            row[a.next(q, sym).unwrap()].push(q);
        }
    }

    let mut groups: BTreeMap<(bool, Desirability, bool), Vec<usize>> = BTreeMap::new();
    for &q in &states {
        groups.entry(signature(&a, q)).or_default().push(q);
    }
    let mut blocks: Vec<Vec<usize>> = groups.into_values().collect();
    let mut block_of = vec![usize::MAX; a.len()];
    for (b, qs) in blocks.iter().enumerate() {
        for &q in qs {
            block_of[q] = b;
        }
    }
    let mut work: VecDeque<(usize, usize)> = VecDeque::new();
    let mut in_work: BTreeSet<(usize, usize)> = BTreeSet::new();
    for b in 0..blocks.len() {
        for sym in 0..nsym {
            work.push_back((b, sym));
            in_work.insert((b, sym));
        }
    }
    while let Some((splitter, sym)) = work.pop_front() {
        in_work.remove(&(splitter, sym));
        let mut x: BTreeSet<usize> = BTreeSet::new();
        for &q in &blocks[splitter] {
            x.extend(inv[sym][q].iter().copied());
        }
        let touched: BTreeSet<usize> = x.iter().map(|&q| block_of[q]).collect();
        for y in touched {
            let (inside, outside): (Vec<usize>, Vec<usize>) = blocks[y].iter().partition(|q| x.contains(q));
            if outside.is_empty() {
                continue;
            }
            let new = blocks.len();
            blocks[y] = inside;
            blocks.push(outside);
            for &q in &blocks[new] {
                block_of[q] = new;
            }
            for s in 0..nsym {
                if in_work.contains(&(y, s)) {
                    work.push_back((new, s));
                    in_work.insert((new, s));
                } else {
                    let smaller = if blocks[y].len() <= blocks[new].len() { y } else { new };
                    work.push_back((smaller, s));
                    in_work.insert((smaller, s));
                }
            }
        }
    }
    let class_of: Vec<Option<usize>> = (0..a.len()).map(|q| live[q].then_some(block_of[q])).collect();
    Ok(quotient(&a, &class_of))
}

/// Plain NFA used by the double-reversal construction.
struct Nfa {
    delta: Vec<Vec<Vec<usize>>>,
    starts: Vec<usize>,
    accept: Vec<bool>,
    nsym: usize,
}

impl Nfa {
    fn reverse(&self) -> Nfa {
        let n = self.delta.len();
        let mut delta = vec![vec![Vec::new(); self.nsym]; n];
        for (q, row) in self.delta.iter().enumerate() {
            for (s, cell) in row.iter().enumerate() {
                for &t in cell {
                    delta[t][s].push(q);
                }
            }
        }
        let mut accept = vec![false; n];
        for &s in &self.starts {
            accept[s] = true;
        }
        Nfa {
            delta,
            starts: (0..n).filter(|&q| self.accept[q]).collect(),
            accept,
            nsym: self.nsym,
        }
    }

    /// Accessible partial DFA (no empty subset).
    fn determinize(&self) -> Nfa {
        let mut index: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
        let mut sets: Vec<BTreeSet<usize>> = Vec::new();
        let start: BTreeSet<usize> = self.starts.iter().copied().collect();
        let mut delta = Vec::new();
        let mut queue = VecDeque::new();
        if !start.is_empty() {
            index.insert(start.clone(), 0);
            sets.push(start);
            delta.push(vec![Vec::new(); self.nsym]);
            queue.push_back(0);
        }
        while let Some(i) = queue.pop_front() {
            for s in 0..self.nsym {
                let next: BTreeSet<usize> = sets[i].iter().flat_map(|&q| self.delta[q][s].iter().copied()).collect();
                if next.is_empty() {
                    continue;
                }
                let j = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        let j = sets.len();
                        index.insert(next.clone(), j);
                        sets.push(next);
                        delta.push(vec![Vec::new(); self.nsym]);
                        queue.push_back(j);
                        j
                    }
                };
                delta[i][s] = vec![j];
            }
        }
        let accept = sets.iter().map(|set| set.iter().any(|&q| self.accept[q])).collect();
        Nfa {
            starts: if sets.is_empty() { vec![] } else { vec![0] },
            delta,
            accept,
            nsym: self.nsym,
        }
    }
}

const MARK_END: usize = 0;
const MARK_DES: usize = 1;
const MARK_UNDES: usize = 2;

/// Brzozowski minimization, usable on non-deterministic input. Each live
/// state gets marker moves (end / desirable / undesirable) into a fresh
/// accepting sink, so the minimal automaton of the marked language separates
/// exactly the classes the model needs; the markers are stripped afterwards.
/// The dead state carries no marker and so vanishes with the empty set; it
/// is recreated by completion.
pub fn minimize_brzozowski(a: &PlotAutomaton) -> PlotAutomaton {
    let nsym = a.symbols.len();
    let n = a.len();
    let sink = n;
    let mut delta: Vec<Vec<Vec<usize>>> = a
        .delta
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.extend([Vec::new(), Vec::new(), Vec::new()]);
            r
        })
        .collect();
    delta.push(vec![Vec::new(); nsym + 3]);
    for (q, s) in a.states.iter().enumerate() {
        if Some(q) == a.dead {
            continue;
        }
        if s.end {
            delta[q][nsym + MARK_END].push(sink);
        }
        if matches!(s.desirability, Desirability::Desirable | Desirability::Mixed) {
            delta[q][nsym + MARK_DES].push(sink);
        }
        if matches!(s.desirability, Desirability::Undesirable | Desirability::Mixed) {
            delta[q][nsym + MARK_UNDES].push(sink);
        }
    }
    let mut accept = vec![false; n + 1];
    accept[sink] = true;
    let marked = Nfa {
        delta,
        starts: a.starts.clone(),
        accept,
        nsym: nsym + 3,
    };
    let min = marked.reverse().determinize().reverse().determinize();

    // keep what is reachable over real symbols, read metadata off markers
    let mut out = shell(a);
    let mut renum: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order = Vec::new();
    if let Some(&s0) = min.starts.first() {
        let mut queue = VecDeque::from([s0]);
        renum.insert(s0, 0);
        order.push(s0);
        while let Some(q) = queue.pop_front() {
            for s in 0..nsym {
                if let Some(&t) = min.delta[q][s].first() {
                    if let std::collections::btree_map::Entry::Vacant(e) = renum.entry(t) {
                        e.insert(order.len());
                        order.push(t);
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    for &q in &order {
        let has = |m: usize| !min.delta[q][nsym + m].is_empty();
        let desirability = match (has(MARK_DES), has(MARK_UNDES)) {
            (true, false) => Desirability::Desirable,
            (false, true) => Desirability::Undesirable,
            _ => Desirability::Mixed,
        };
        push_state(
            &mut out,
            StateInfo {
                name: String::new(),
                origins: BTreeSet::new(),
                desirability,
                end: has(MARK_END),
                kind: StateKind::Merged,
            },
        );
    }
    for &q in &order {
        for s in 0..nsym {
            if let Some(&t) = min.delta[q][s].first() {
                out.delta[renum[&q]][s] = vec![renum[&t]];
            }
        }
    }
    if out.is_empty() || !out.is_complete() {
        let d = push_state(&mut out, dead_info());
        out.dead = Some(d);
        for row in &mut out.delta {
            for cell in row.iter_mut() {
                if cell.is_empty() {
                    cell.push(d);
                }
            }
        }
    }
    out.starts = vec![0];
    carry_origins(a, &mut out);
    out
}

/// Names each result state after the input states that run in lockstep
/// with it.
fn carry_origins(input: &PlotAutomaton, out: &mut PlotAutomaton) {
    let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); out.len()];
    let mut seen: BTreeSet<(BTreeSet<usize>, usize)> = BTreeSet::new();
    let start: BTreeSet<usize> = input.starts.iter().copied().collect();
    let mut queue = VecDeque::from([(start, out.start())]);
    while let Some((set, r)) = queue.pop_front() {
        if !seen.insert((set.clone(), r)) {
            continue;
        }
        members[r].extend(set.iter().copied());
        for sym in 0..input.symbols.len() {
            let next: BTreeSet<usize> = set.iter().flat_map(|&q| input.delta[q][sym].iter().copied()).collect();
            let t = out.next(r, sym).unwrap();
            queue.push_back((next, t));
        }
    }
    for (r, m) in members.iter().enumerate() {
        if Some(r) == out.dead {
            continue;
        }
        let m: BTreeSet<usize> = m.iter().copied().filter(|&q| Some(q) != input.dead).collect();
        let info = merge_info(input, &m);
        let s = &mut out.states[r];
        s.name = info.name;
        s.origins = info.origins;
        s.kind = if m.len() == 1 { info.kind } else { StateKind::Merged };
    }
}

/// Myhill–Nerode oracle: number of distinguishable classes among the
/// reachable states of the determinized automaton, by pair marking.
pub fn table_filling_classes(a: &PlotAutomaton) -> usize {
    let d = determinize(a);
    let live = reachable(&d);
    let qs: Vec<usize> = (0..d.len()).filter(|&q| live[q]).collect();
    let n = d.len();
    let mut marked = vec![vec![false; n]; n];
    for &p in &qs {
        for &q in &qs {
            if signature(&d, p) != signature(&d, q) {
                marked[p][q] = true;
            }
        }
    }
    loop {
        let mut changed = false;
        for &p in &qs {
            for &q in &qs {
                if p >= q || marked[p][q] {
                    continue;
                }
                let split = (0..d.symbols.len()).any(|s| {
                    let (x, y) = (d.next(p, s).unwrap(), d.next(q, s).unwrap());
                    marked[x][y]
                });
                if split {
                    marked[p][q] = true;
                    marked[q][p] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    // count classes: a state starts a new class unless equal to an earlier one
    qs.iter()
        .enumerate()
        .filter(|&(i, &q)| qs[..i].iter().all(|&p| marked[p][q]))
        .count()
}
