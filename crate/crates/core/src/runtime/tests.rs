use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::thread;

use proptest::prelude::*;

use super::*;
use crate::automaton::compile;
use crate::scenario::parse_scenario;

const KAKTUS: &str = include_str!("../../../../fixtures/kaktus.plot");
const GOSSIP: &str = include_str!("../../../../fixtures/gossip.plot");
const GOLDEN: &str = "../../fixtures/sessions/gossip_debug.txt";

fn load(src: &str) -> (Arc<Scenario>, Arc<PlotAutomaton>) {
    let s = parse_scenario(src).unwrap();
    let a = compile(&s).unwrap();
    (Arc::new(s), Arc::new(a))
}

fn cfg(seed: u64, on: bool) -> RunConfig {
    RunConfig {
        seed,
        max_beats: 100,
        anticipator: on.then(AnticipatorConfig::default),
    }
}

#[test]
fn kaktus_silence_reaches_an_end() {
    let (s, a) = load(KAKTUS);
    let r = run_headless(&s, &a, PlayerPolicy::Silence, &cfg(1, true)).unwrap();
    assert!(r.ended_at_end);
    assert_eq!(r.unrecovered(), 0);
    assert_eq!(r.word, ["a0", "a2", "a1"]);
    assert_eq!(r.final_state, "q4");
}

#[test]
fn zero_beats_is_an_empty_run() {
    let (s, a) = load(KAKTUS);
    let r = run_headless(&s, &a, PlayerPolicy::Silence, &RunConfig {
        max_beats: 0,
        ..cfg(1, true)
    })
    .unwrap();
    assert!(r.word.is_empty());
    assert!(!r.ended_at_end);
    assert_eq!(r.beats, 0);
}

#[test]
fn runs_reproduce_per_seed() {
    let (s, a) = load(KAKTUS);
    let pol = || PlayerPolicy::random(11, s.settings.repertoire.clone());
    let r1 = run_headless(&s, &a, pol(), &cfg(11, true)).unwrap();
    let r2 = run_headless(&s, &a, pol(), &cfg(11, true)).unwrap();
    assert_eq!(
        RunReport {
            wall: Duration::ZERO,
            ..r1
        },
        RunReport {
            wall: Duration::ZERO,
            ..r2
        }
    );
}

#[test]
fn invitation_is_steered_around() {
    let (s, a) = load(KAKTUS);
    // invite Niklas as soon as the second scene is under way
    let script = || PlayerPolicy::scripted([None, None, Some("/act invite Niklas")]);
    let off = run_headless(&s, &a, script(), &cfg(3, false)).unwrap();
    assert!(off.word.contains(&"a16".to_string()), "{:?}", off.word);
    assert_eq!(off.undesirable_entries, 1);
    let on = run_headless(&s, &a, script(), &cfg(3, true)).unwrap();
    assert!(!on.word.contains(&"a16".to_string()), "{:?}", on.word);
    assert_eq!(on.undesirable_entries, 0);
    let first_iv = on.log.iter().position(|f| f.kind == FrameKind::Intervention).unwrap();
    assert_eq!(on.log[first_iv].get("effectors"), Some("deny_invite"));
    assert!(on.ended_at_end);
}

#[test]
fn scene_frames_follow_fired_transitions() {
    let (s, a) = load(KAKTUS);
    let r = run_headless(&s, &a, PlayerPolicy::Silence, &cfg(1, false)).unwrap();
    let scenes: Vec<&str> = r.log.iter().filter(|f| f.kind == FrameKind::Scene).filter_map(|f| f.get("via")).collect();
    assert_eq!(scenes, ["a0", "a2", "a1"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_word_accepted_iff_ended(seed in 0u64..10_000, on in any::<bool>(), max in 0u64..30) {
        let (s, a) = load(KAKTUS);
        let p = PlayerPolicy::random(seed, s.settings.repertoire.clone());
        let r = run_headless(&s, &a, p, &RunConfig { max_beats: max, ..cfg(seed, on) }).unwrap();
        let word: Vec<&str> = r.word.iter().map(String::as_str).collect();
        prop_assert_eq!(a.accepts(&word).unwrap(), r.ended_at_end);
        prop_assert!(r.recovered <= r.undesirable_entries);
    }

    #[test]
    fn played_never_shrinks(seed in 0u64..10_000) {
        let (s, a) = load(KAKTUS);
        let mut sess = Session::new(s.clone(), a, seed, None).unwrap();
        let mut p = PlayerPolicy::random(seed, s.settings.repertoire.clone());
        let mut played = sess.world.model.played.clone();
        for _ in 0..30 {
            sess.tick(&p.next_input()).unwrap();
            prop_assert!(sess.world.model.played.is_superset(&played));
            played = sess.world.model.played.clone();
        }
    }
}

/// Line client speaking raw TCP.
struct Client(BufReader<TcpStream>, TcpStream);

impl Client {
    fn connect(port: u16) -> Client {
        let s = TcpStream::connect(("127.0.0.1", port)).unwrap();
        Client(BufReader::new(s.try_clone().unwrap()), s)
    }

    fn send(&mut self, line: &str) {
        writeln!(self.1, "{line}").unwrap();
    }

    fn recv(&mut self) -> Option<Frame> {
        let mut l = String::new();
        (self.0.read_line(&mut l).unwrap() > 0).then(|| Frame::parse(&l).unwrap())
    }

    /// Sends one input and reads the `expect` frames its beat produces.
    fn beat(&mut self, line: &str, expect: usize) -> Vec<Frame> {
        self.send(&Frame::input(line).to_string());
        (0..expect).map(|_| self.recv().unwrap()).collect()
    }
}

fn session(src: &str, seed: u64) -> Session {
    let (s, a) = load(src);
    Session::new(s, a, seed, Some(AnticipatorConfig::default())).unwrap()
}

/// Frames the server will send for `inputs`, computed on a twin session.
fn expected_frames(src: &str, seed: u64, inputs: &[&str], debug: bool) -> Vec<Vec<Frame>> {
    let mut s = session(src, seed);
    inputs
        .iter()
        .map(|i| {
            let input: Vec<String> = (!i.is_empty()).then(|| i.to_string()).into_iter().collect();
            let mut fs: Vec<Frame> = s
                .tick(&input)
                .unwrap()
                .into_iter()
                .filter(|f| debug || f.kind != FrameKind::Intervention)
                .collect();
            if s.is_over() {
                fs.push(s.state_frames().remove(0));
            }
            fs
        })
        .collect()
}

const SCRIPT: [&str; 11] = ["@Lovisa: hi", "", "how was school?", "", "", "/act shrug", "", "", "", "", "good night"];

fn run_script(port: u16, inputs: &[&str], expect: &[Vec<Frame>]) -> Vec<Frame> {
    let mut c = Client::connect(port);
    c.send(&Frame::hello().to_string());
    // hello, state, one value frame per story value
    let got: Vec<Frame> = (0..4).map(|_| c.recv().unwrap()).collect();
    assert_eq!(got[1].kind, FrameKind::State);
    assert_eq!(got[3].kind, FrameKind::Value);
    let mut got = got;
    for (i, e) in inputs.iter().zip(expect) {
        got.extend(c.beat(i, e.len()));
    }
    got
}

#[test]
fn tcp_session_streams_beats_with_debug() {
    let listener = bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let expect = expected_frames(GOSSIP, 7, &SCRIPT, true);
    let server = thread::spawn(move || {
        let mut s = session(GOSSIP, 7);
        let t = serve(&mut s, &listener, ServeOptions { debug: true }).unwrap();
        (t, s.world.trace_word())
    });
    let got = run_script(port, &SCRIPT, &expect);
    assert_eq!(got[0].kind, FrameKind::Hello);
    assert_eq!(got[1].get("scene"), Some("evening"));
    let beats: Vec<Frame> = expect.concat();
    assert!(got.ends_with(&beats));
    let iv = got.iter().find(|f| f.kind == FrameKind::Intervention).unwrap();
    assert_eq!(iv.get("effectors"), Some("set_fact:Lovisa:friends(Lovisa,Karin)-1"));
    assert_eq!(iv.get("writes"), Some("Lovisa:friends(Lovisa,Karin) 2→1"));
    let (t, word) = server.join().unwrap();
    assert_eq!(t.violations, 0);

    // the same lines replayed headless give the same story
    let (s, a) = load(GOSSIP);
    let pol = PlayerPolicy::scripted(SCRIPT.iter().map(|l| (!l.is_empty()).then_some(*l)));
    let r = run_headless(&s, &a, pol, &RunConfig { max_beats: SCRIPT.len() as u64, ..cfg(7, true) }).unwrap();
    assert_eq!(r.word, word);
}

#[test]
fn golden_session_transcript() {
    let listener = bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let expect = expected_frames(GOSSIP, 7, &SCRIPT, true);
    let server = thread::spawn(move || {
        let mut s = session(GOSSIP, 7);
        serve(&mut s, &listener, ServeOptions { debug: true }).unwrap()
    });
    run_script(port, &SCRIPT, &expect);
    let t = server.join().unwrap();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, t.text()).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(t.text(), golden);
}

#[test]
fn debug_off_hides_interventions() {
    let listener = bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let expect = expected_frames(GOSSIP, 7, &SCRIPT, false);
    let server = thread::spawn(move || {
        let mut s = session(GOSSIP, 7);
        let t = serve(&mut s, &listener, ServeOptions::default()).unwrap();
        (t, s.log)
    });
    let got = run_script(port, &SCRIPT, &expect);
    assert!(!got.iter().any(|f| f.kind == FrameKind::Intervention));
    let (_, log) = server.join().unwrap();
    assert!(log.iter().any(|f| f.kind == FrameKind::Intervention));
}

#[test]
fn violation_drops_client_but_keeps_session() {
    let listener = bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = thread::spawn(move || {
        let mut s = session(GOSSIP, 7);
        let t = serve(&mut s, &listener, ServeOptions::default()).unwrap();
        (t, s.world.beat)
    });
    let mut c = Client::connect(port);
    c.send(&Frame::hello().to_string());
    while c.recv().unwrap().kind != FrameKind::Value {}
    c.recv().unwrap();
    c.beat("", 0);
    c.send("nonsense without type");
    let mut last = None;
    while let Some(f) = c.recv() {
        last = Some(f);
    }
    assert_eq!(last.unwrap().kind, FrameKind::Error);
    // reconnect: the state frame shows the beat already played
    let mut c = Client::connect(port);
    c.send(&Frame::hello().to_string());
    c.recv().unwrap();
    let st = c.recv().unwrap();
    assert_eq!(st.get("beat"), Some("1"));
    drop(c);
    let (t, beat) = server.join().unwrap();
    assert_eq!(t.violations, 1);
    assert_eq!(beat, 1);
}

#[test]
fn version_mismatch_is_a_violation() {
    let listener = bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = thread::spawn(move || {
        let mut s = session(GOSSIP, 7);
        serve(&mut s, &listener, ServeOptions::default()).unwrap()
    });
    let mut c = Client::connect(port);
    c.send("hello\tversion=99");
    assert_eq!(c.recv().unwrap().kind, FrameKind::Error);
    drop(c);
    let c = Client::connect(port);
    drop(c);
    let t = server.join().unwrap();
    assert_eq!(t.violations, 1);
}

#[test]
fn websocket_carries_the_same_frames() {
    let listener = bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = thread::spawn(move || {
        let mut s = session(GOSSIP, 7);
        serve(&mut s, &listener, ServeOptions { debug: true }).unwrap()
    });
    let (mut ws, _) = tungstenite::connect(format!("ws://127.0.0.1:{port}/")).unwrap();
    let recv = |ws: &mut tungstenite::WebSocket<_>| loop {
        if let tungstenite::Message::Text(t) = ws.read().unwrap() {
            return Frame::parse(&t).unwrap();
        }
    };
    ws.send(tungstenite::Message::text(Frame::hello().to_string())).unwrap();
    assert_eq!(recv(&mut ws).kind, FrameKind::Hello);
    let st = recv(&mut ws);
    assert_eq!(st.get("scene"), Some("evening"));
    ws.send(tungstenite::Message::text(Frame::input("@Lovisa: hi").to_string())).unwrap();
    let mut saw_iv = false;
    for _ in 0..8 {
        let f = recv(&mut ws);
        saw_iv |= f.kind == FrameKind::Intervention;
        if saw_iv {
            break;
        }
    }
    assert!(saw_iv);
    ws.close(None).unwrap();
    while ws.read().is_ok() {}
    let t = server.join().unwrap();
    assert_eq!(t.violations, 0);
}

#[test]
fn port_in_use_is_a_bind_failure() {
    let l = bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    assert!(matches!(bind(&addr), Err(RuntimeError::BindFailure(_))));
}
