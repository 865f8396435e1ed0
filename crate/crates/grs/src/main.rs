use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};
use grs_core::framing::LinkConfig;
use grs_core::signal_map::build_default_map;
use grs_core::time::{Instant, Span};
use grs_core::{generate_codebook, SignalMap};

use grs::auth::{make_record, SystemClock};
use grs::formats::config::Config;
use grs::formats::map_file::{parse_map, write_map};
use grs::formats::scenario::{parse_scenario, parse_time};
use grs::formats::trace::{codebook_table, waveform_table};
use grs::gateway::Gateway;
use grs::http::{drive_clock, router, Pace};
use grs::sim::{build_gateway, open_audit, run_scenario};

#[derive(Parser)]
#[command(name = "grs", version, about = "Boiler panel simulator and supervisory gateway")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML configuration; a single default panel when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Pace virtual time to the wall clock instead of running flat out.
    #[arg(long)]
    realtime: bool,
    /// Directory for audit.log and trace.log.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Run this script instead of serving HTTP.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Stop after this much virtual time (e.g. 600s, 1500ms).
    #[arg(long, value_parser = parse_span)]
    duration: Option<Span>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the HTTP API, or run a scenario with --scenario.
    Run(RunArgs),
    /// Run a scenario script and print the check report.
    Scenario {
        script: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Print the character assignment for a signal map.
    DumpCodebook {
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Print the bit timing of one character on the wire.
    DumpWaveform {
        /// A single character, or a code such as 0x61.
        char: String,
        #[arg(long, default_value_t = 9600)]
        baud: u32,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Print a signal map in the map file format.
    DumpMap {
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Read a password from stdin and print a credential line.
    HashPassword {
        user: String,
        /// Comma separated panel ids, or `*`.
        #[arg(long, default_value = "*")]
        panels: String,
        #[arg(long, default_value_t = 100_000)]
        iterations: u32,
    },
}

fn parse_span(s: &str) -> Result<Span, String> {
    parse_time(s).ok_or_else(|| format!("bad duration `{s}`"))
}

/// Usage problems exit with 2, failed checks with 1.
enum Failure {
    Usage(String),
    Checks,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::single_panel(),
    })
}

fn load_map(path: Option<&Path>) -> Result<SignalMap, Failure> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok(parse_map(&text).map_err(|e| format!("{}: {e}", p.display()))?)
        }
        None => Ok(build_default_map()),
    }
}

fn setup(cfg: &Config, log_dir: Option<&Path>) -> Result<Gateway, Failure> {
    if let Some(d) = log_dir {
        std::fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
    }
    let audit = open_audit(cfg, log_dir)?;
    let mut gw = build_gateway(cfg, Arc::new(SystemClock), audit)?;
    if log_dir.is_some() {
        gw.enable_trace();
    }
    Ok(gw)
}

fn write_trace(file: &mut Option<std::io::BufWriter<std::fs::File>>, gw: &mut Gateway) {
    if let Some(f) = file.as_mut() {
        for line in gw.take_trace() {
            let _ = writeln!(f, "{line}");
        }
    }
}

fn open_trace(log_dir: Option<&Path>) -> Result<Option<std::io::BufWriter<std::fs::File>>, Failure> {
    let Some(d) = log_dir else { return Ok(None) };
    let path = d.join("trace.log");
    let f = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Some(std::io::BufWriter::new(f)))
}

fn scenario(cfg: &Config, script: &Path, seed: u64, log_dir: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(script).map_err(|e| format!("{}: {e}", script.display()))?;
    let sc = parse_scenario(&text).map_err(|e| format!("{}:{e}", script.display()))?;
    let mut gw = setup(cfg, log_dir)?;
    let mut trace = open_trace(log_dir)?;
    let panel = cfg.panels[0].id.clone();
    let report = run_scenario(&mut gw, &sc, seed, &panel);
    write_trace(&mut trace, &mut gw);
    gw.audit_mut().flush()?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let log_dir = args.log_dir.clone().or_else(|| cfg.log_dir.clone());
    if let Some(script) = &args.scenario {
        return scenario(&cfg, script, seed, log_dir.as_deref());
    }
    let gw = setup(&cfg, log_dir.as_deref())?;
    let mut trace = open_trace(log_dir.as_deref())?;
    let shared = Arc::new(Mutex::new(gw));
    let pace = if args.realtime { Pace::Realtime } else { Pace::Fast };
    let until = args.duration.map(|d| Instant::ZERO + d);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.listen).await.map_err(|e| format!("{}: {e}", cfg.listen))?;
        eprintln!("listening on {}", listener.local_addr()?);
        let app = router(shared.clone());
        let server = tokio::spawn(async move { axum::serve(listener, app).await });
        let clock =
            drive_clock(shared.clone(), pace, Span::from_millis(10), until, move |gw| write_trace(&mut trace, gw));
        tokio::select! {
            _ = clock => {}
            _ = tokio::signal::ctrl_c() => {}
            r = server => { r??; }
        }
        let mut gw = shared.lock().unwrap_or_else(|e| e.into_inner());
        gw.audit_mut().flush()?;
        eprintln!("stopped at {:.3}s", gw.now().as_secs_f64());
        Ok::<_, Failure>(())
    })
}

fn parse_char(s: &str) -> Option<u8> {
    if let Some(hex) = s.strip_prefix("0x") {
        return u8::from_str_radix(hex, 16).ok();
    }
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) if c.is_ascii() => Some(c as u8),
        _ => None,
    }
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Run(args) => run(args),
        Cmd::Scenario { script, config, seed, log_dir } => {
            let cfg = load_config(config.as_deref())?;
            let log_dir = log_dir.or_else(|| cfg.log_dir.clone());
            scenario(&cfg, &script, seed.unwrap_or(cfg.seed), log_dir.as_deref())
        }
        Cmd::DumpCodebook { map } => {
            let cb = generate_codebook(&load_map(map.as_deref())?)?;
            print!("{}", codebook_table(&cb));
            Ok(())
        }
        Cmd::DumpWaveform { char, baud, map } => {
            let cb = generate_codebook(&load_map(map.as_deref())?)?;
            let byte = parse_char(&char).ok_or_else(|| format!("`{char}` is not a single ASCII character"))?;
            let mut assigned = cb.command_alphabet();
            assigned.extend(cb.status_alphabet());
            if !assigned.contains(&byte) {
                let show = |mut v: Vec<u8>| {
                    v.sort_unstable();
                    v.into_iter().map(|b| b as char).collect::<String>()
                };
                return Err(Failure::Usage(format!(
                    "`{char}` is not assigned\ncommands: {}\nstatus:   {}",
                    show(cb.command_alphabet()),
                    show(cb.status_alphabet())
                )));
            }
            print!("{}", waveform_table(byte, &LinkConfig::new(baud)?));
            Ok(())
        }
        Cmd::DumpMap { map } => {
            print!("{}", write_map(&load_map(map.as_deref())?));
            Ok(())
        }
        Cmd::HashPassword { user, panels, iterations } => {
            let mut line = String::new();
            std::io::stdin().lock().read_line(&mut line)?;
            let pw = line.trim_end_matches(['\r', '\n']);
            if pw.is_empty() {
                return Err(Failure::Usage("empty password".into()));
            }
            println!("{}", make_record(&user, pw, iterations, &panels));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("grs: {msg}");
            ExitCode::from(2)
        }
    }
}
