//! Exhaustive depth-d search against a single look-ahead line on a 16-scene
//! ring.
//!
//!     cargo run --release --example bench_lookahead -- 16 6

use plotguide::bench::run_bench;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let scenes = args.next().flatten().unwrap_or(16);
    let depth = args.next().flatten().unwrap_or(6);
    let report = run_bench(scenes, 3, depth, &[10, 50, 100, 150, 200]).unwrap();
    print!("{}", report.render());
}
