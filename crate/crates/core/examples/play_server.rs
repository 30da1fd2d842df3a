//! Serves the gossip story on a local port and plays it with a scripted
//! client over plain TCP, printing the transcript.
//!
//! Point a WebSocket client at the same port to play by hand:
//!     cargo run --example play_server -- 7700 wait

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;

use plotguide::anticipator::AnticipatorConfig;
use plotguide::automaton::compile;
use plotguide::runtime::{bind, serve, Frame, ServeOptions, Session};
use plotguide::scenario::parse_scenario;

fn main() {
    let port: u16 = std::env::args().nth(1).and_then(|p| p.parse().ok()).unwrap_or(0);
    let wait = std::env::args().nth(2).is_some();
    let s = parse_scenario(include_str!("../../../fixtures/gossip.plot")).unwrap();
    let a = compile(&s).unwrap();
    let mut session = Session::new(Arc::new(s), Arc::new(a), 7, Some(AnticipatorConfig::default())).unwrap();
    let listener = bind(&format!("127.0.0.1:{port}")).unwrap();
    let port = listener.local_addr().unwrap().port();
    println!("listening on {port}");

    if !wait {
        std::thread::spawn(move || {
            let stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
            let mut w = stream.try_clone().unwrap();
            writeln!(w, "{}", Frame::hello()).unwrap();
            for line in ["@Lovisa: hi", "how was your day?"].into_iter().chain([""; 9]) {
                writeln!(w, "{}", Frame::input(line)).unwrap();
            }
            // drain until the server hangs up
            for _ in BufReader::new(stream).lines() {}
        });
    }
    let t = serve(&mut session, &listener, ServeOptions { debug: true }).unwrap();
    print!("{}", t.text());
}
