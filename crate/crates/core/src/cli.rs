//! `plotguide` command line: compile, simulate, bench, play.
//!
//! Exit codes: 0 success, 1 lint errors, 2 unreadable or unparsable input
//! (and other runtime failures), 3 the port could not be bound.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::anticipator::AnticipatorConfig;
use crate::automaton::{compile, minimize_brzozowski, minimize_hopcroft, PlotAutomaton};
use crate::bench::run_bench;
use crate::policy::PlayerPolicy;
use crate::runtime::{bind, monte_carlo, serve, MonteCarloSummary, RunConfig, RuntimeError, ServeOptions, Session};
use crate::scenario::{parse_scenario, validate_scenario, Scenario};

pub const EXIT_OK: u8 = 0;
pub const EXIT_LINT: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_BIND: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "plotguide", version, about = "Plot automata, character agents and look-ahead steering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Minimizer {
    Hopcroft,
    Brzozowski,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Silence,
    Random,
    Scripted,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lint, compile and minimize a scenario; print the automaton.
    Compile {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "hopcroft")]
        minimize: Minimizer,
        /// Write the dump here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a Graphviz rendering of the minimized automaton.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Headless runs with a stand-in player.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// First seed; run i uses seed + i.
        #[arg(long, env = "PLOT_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "silence")]
        policy: PolicyArg,
        /// Player lines for `--policy scripted`, one per beat.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        horizon: u64,
        #[arg(long)]
        no_anticipator: bool,
        #[arg(long, default_value_t = 100)]
        max_beats: u64,
        /// Print one tab-separated line per run.
        #[arg(long)]
        per_run: bool,
    },
    /// Exhaustive search versus look-ahead on a synthetic scenario.
    Bench {
        #[arg(long, default_value_t = 16)]
        scenes: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        branching: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,150,200")]
        horizons: Vec<u64>,
    },
    /// Serve one interactive session over TCP or WebSocket.
    Play {
        path: PathBuf,
        #[arg(long, default_value_t = 7700)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "PLOT_SEED", default_value_t = 1)]
        seed: u64,
        /// Mirror interventions to the client.
        #[arg(long)]
        debug: bool,
        #[arg(long, default_value_t = 12)]
        horizon: u64,
        #[arg(long)]
        no_anticipator: bool,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

struct Failure(u8, String);

fn input_error(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_INPUT, e.to_string())
}

fn load(path: &Path) -> Result<(Arc<Scenario>, Arc<PlotAutomaton>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let s = parse_scenario(&text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}: {e}", path.display())).collect();
        input_error(lines.join("\n"))
    })?;
    let report = validate_scenario(&s);
    if report.has_errors() {
        let lines: Vec<String> = report.findings.iter().map(ToString::to_string).collect();
        return Err(Failure(EXIT_LINT, lines.join("\n")));
    }
    let a = compile(&s).map_err(input_error)?;
    Ok((Arc::new(s), Arc::new(a)))
}

fn write_to(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn cmd_compile(path: &Path, m: Minimizer, out: Option<&Path>, dot: Option<&Path>, o: &mut dyn Write, e: &mut dyn Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|err| input_error(format!("{}: {err}", path.display())))?;
    let s = parse_scenario(&text).map_err(|errs| input_error(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")))?;
    let report = validate_scenario(&s);
    for f in &report.findings {
        let _ = writeln!(e, "{f}");
    }
    if report.has_errors() {
        return Err(Failure(EXIT_LINT, format!("{}: lint errors", path.display())));
    }
    let a = compile(&s).map_err(input_error)?;
    let t = Instant::now();
    let min = match m {
        Minimizer::Hopcroft => minimize_hopcroft(&a).map_err(input_error)?,
        Minimizer::Brzozowski => minimize_brzozowski(&a),
    };
    let wall = t.elapsed();
    let dump = min.dump();
    match out {
        Some(p) => write_to(p, &dump)?,
        None => {
            let _ = o.write_all(dump.as_bytes());
        }
    }
    if let Some(p) = dot {
        write_to(p, &min.to_dot())?;
    }
    let _ = writeln!(
        o,
        "states {} -> {} ({:?}, {:.3} ms)",
        a.len(),
        min.len(),
        m,
        wall.as_secs_f64() * 1e3
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    runs: u64,
    seed: u64,
    policy: PolicyArg,
    script: Option<&Path>,
    horizon: u64,
    no_anticipator: bool,
    max_beats: u64,
    per_run: bool,
    o: &mut dyn Write,
) -> Result<(), Failure> {
    let (s, a) = load(path)?;
    let script = match (policy, script) {
        (PolicyArg::Scripted, Some(p)) => {
            Some(std::fs::read_to_string(p).map_err(|err| input_error(format!("{}: {err}", p.display())))?)
        }
        (PolicyArg::Scripted, None) => return Err(input_error("--policy scripted needs --script")),
        _ => None,
    };
    let lines = s.settings.repertoire.clone();
    let make = move |seed: u64| match policy {
        PolicyArg::Silence => PlayerPolicy::Silence,
        PolicyArg::Random => PlayerPolicy::random(seed, lines.clone()),
        PolicyArg::Scripted => PlayerPolicy::parse_script(script.as_deref().unwrap_or("")),
    };
    let cfg = RunConfig {
        seed,
        max_beats,
        anticipator: (!no_anticipator).then_some(AnticipatorConfig {
            horizon,
            ..Default::default()
        }),
    };
    let reports = monte_carlo(&s, &a, runs, seed, &make, &cfg).map_err(input_error)?;
    if per_run {
        let _ = writeln!(o, "#seed\tpolicy\tbeats\tfinal\tended\tentered\trecovered\tinterventions\tword");
        for r in &reports {
            let _ = writeln!(o, "{}", r.summary_line());
        }
    }
    let _ = o.write_all(MonteCarloSummary::of(&reports).render().as_bytes());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_play(
    path: &Path,
    host: &str,
    port: u16,
    seed: u64,
    debug: bool,
    horizon: u64,
    no_anticipator: bool,
    transcript: Option<&Path>,
    o: &mut dyn Write,
) -> Result<(), Failure> {
    let (s, a) = load(path)?;
    let listener = bind(&format!("{host}:{port}")).map_err(|err| Failure(EXIT_BIND, err.to_string()))?;
    let cfg = (!no_anticipator).then_some(AnticipatorConfig {
        horizon,
        ..Default::default()
    });
    let mut session = Session::new(s, a, seed, cfg).map_err(input_error)?;
    let _ = writeln!(o, "serving {} on {host}:{port}", session.world.scenario.name);
    let _ = o.flush();
    let t = serve(&mut session, &listener, ServeOptions { debug }).map_err(|err| match err {
        RuntimeError::BindFailure(m) => Failure(EXIT_BIND, m),
        other => input_error(other),
    })?;
    if let Some(p) = transcript {
        write_to(p, &t.text())?;
    }
    let _ = writeln!(
        o,
        "session over at beat {}: {} ({} protocol violations)",
        session.world.beat,
        session.world.trace_word().join(" "),
        t.violations
    );
    Ok(())
}

/// Runs the command line against the given streams; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let res = match cli.command {
        Command::Compile { path, minimize, out: o, dot } => cmd_compile(&path, minimize, o.as_deref(), dot.as_deref(), out, err),
        Command::Simulate {
            path,
            runs,
            seed,
            policy,
            script,
            horizon,
            no_anticipator,
            max_beats,
            per_run,
        } => cmd_simulate(&path, runs, seed, policy, script.as_deref(), horizon, no_anticipator, max_beats, per_run, out),
        Command::Bench {
            scenes,
            depth,
            branching,
            horizons,
        } => run_bench(scenes, branching, depth, &horizons)
            .map(|r| {
                let _ = out.write_all(r.render().as_bytes());
            })
            .map_err(input_error),
        Command::Play {
            path,
            port,
            host,
            seed,
            debug,
            horizon,
            no_anticipator,
            transcript,
        } => cmd_play(&path, &host, port, seed, debug, horizon, no_anticipator, transcript.as_deref(), out),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr()))
}
