//! Building a gateway from configuration and running scenario scripts
//! against it.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use grs_core::link::LinkDir;
use grs_core::signal_map::{build_default_map, Direction, SignalKind, SignalMap};
use grs_core::station::Station;
use grs_core::time::{Instant, Span};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::{AuditLog, EventKind};
use crate::auth::{AuthPolicy, CredentialStore, WallClock};
use crate::formats::config::{Config, PanelConfig};
use crate::formats::map_file::parse_map;
use crate::formats::scenario::{Directive, Expectation, LinkSide, Scenario, Verb};
use crate::gateway::{Gateway, GatewayOptions, Source};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{0}")]
    Map(String),
    #[error("{0}")]
    Credentials(String),
    #[error("{0}")]
    Setup(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn load_map(panel: &PanelConfig) -> Result<SignalMap, SimError> {
    let Some(path) = &panel.map else { return Ok(build_default_map()) };
    let text =
        std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.display().to_string(), source })?;
    parse_map(&text).map_err(|e| SimError::Map(format!("{}: {e}", path.display())))
}

pub fn open_audit(cfg: &Config, log_dir: Option<&Path>) -> Result<AuditLog, SimError> {
    match log_dir {
        Some(dir) => {
            let path = dir.join("audit.log");
            AuditLog::to_file(&path, cfg.gateway.audit_rotate_bytes, cfg.gateway.audit_keep)
                .map_err(|source| SimError::Io { path: path.display().to_string(), source })
        }
        None => Ok(AuditLog::in_memory()),
    }
}

pub fn build_gateway(cfg: &Config, clock: Arc<dyn WallClock>, audit: AuditLog) -> Result<Gateway, SimError> {
    let store = match &cfg.credentials {
        Some(path) => {
            CredentialStore::load(path).map_err(|e| SimError::Credentials(format!("{}: {e}", path.display())))?
        }
        None => CredentialStore::default(),
    };
    let mut stations = Vec::new();
    for p in &cfg.panels {
        let map = load_map(p)?;
        let sc = p.station_config().map_err(|e| SimError::Setup(format!("panel {}: {e}", p.id)))?;
        let station = Station::new(map, sc).map_err(|e| SimError::Setup(format!("panel {}: {e}", p.id)))?;
        stations.push((p.id.clone(), p.name.clone(), station));
    }
    let g = &cfg.gateway;
    let opts = GatewayOptions {
        auth: AuthPolicy {
            lockout_threshold: g.lockout_threshold,
            lockout: std::time::Duration::from_secs(g.lockout_seconds),
            session_ttl: std::time::Duration::from_secs(g.session_seconds),
        },
        auto_hysteresis: g.auto_hysteresis,
    };
    Gateway::new(stations, store, clock, audit, opts).map_err(SimError::Setup)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub line: usize,
    pub at: Instant,
    pub what: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub outcomes: Vec<Outcome>,
    pub end: Instant,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.passed).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            let verdict = if o.passed { "PASS" } else { "FAIL" };
            write!(f, "{verdict} line {} at {:.3}s: {}", o.line, o.at.as_secs_f64(), o.what)?;
            if !o.detail.is_empty() {
                write!(f, " ({})", o.detail)?;
            }
            writeln!(f)?;
        }
        writeln!(
            f,
            "{} checks, {} failed, ended at {:.3}s",
            self.outcomes.len(),
            self.failures(),
            self.end.as_secs_f64()
        )
    }
}

struct Step {
    d: Directive,
    fuzz: bool,
}

/// Replaces every `fuzz` directive with concrete random commands drawn from
/// the panel's map, spaced evenly over its span.
fn expand(gw: &Gateway, sc: &Scenario, default_panel: &str, rng: &mut ChaCha8Rng) -> Vec<Step> {
    let mut steps = Vec::new();
    for d in &sc.directives {
        let Verb::Fuzz { count, over } = d.verb else {
            steps.push(Step { d: d.clone(), fuzz: false });
            continue;
        };
        let panel = d.panel.clone().unwrap_or_else(|| default_panel.to_string());
        let Some(station) = gw.station(&panel) else {
            steps.push(Step { d: d.clone(), fuzz: false });
            continue;
        };
        let map = station.map();
        let buttons: Vec<String> = map
            .outputs()
            .filter(|e| matches!(e.kind, SignalKind::PushButton | SignalKind::EmergencyStop))
            .map(|e| e.description.clone())
            .collect();
        let selectors: Vec<String> =
            map.outputs().filter(|e| e.kind == SignalKind::SelectorSwitch).map(|e| e.description.clone()).collect();
        let inputs: Vec<String> = map
            .entries
            .iter()
            .filter(|e| {
                e.direction == Direction::DigitalIn
                    && e.pin.is_some()
                    && (e.fault_class.is_some() || e.color == grs_core::signal_map::Color::Green)
            })
            .map(|e| e.description.clone())
            .collect();
        let gap = if count == 0 { 0 } else { over.ticks() / count as u64 };
        for k in 0..count {
            let at = d.at + Span(gap * k as u64);
            let verb = match rng.random_range(0..3) {
                0 if !buttons.is_empty() => Verb::Press { signal: buttons[rng.random_range(0..buttons.len())].clone() },
                1 if !selectors.is_empty() => Verb::Select {
                    signal: selectors[rng.random_range(0..selectors.len())].clone(),
                    position: if rng.random_bool(0.5) { "on" } else { "off" }.into(),
                },
                _ if !inputs.is_empty() => {
                    Verb::Inject { signal: inputs[rng.random_range(0..inputs.len())].clone(), on: rng.random_bool(0.5) }
                }
                _ => continue,
            };
            steps.push(Step { d: Directive { line: d.line, at, panel: d.panel.clone(), verb }, fuzz: true });
        }
    }
    steps.sort_by_key(|s| s.d.at);
    steps
}

fn side_dir(s: LinkSide) -> LinkDir {
    match s {
        LinkSide::Up => LinkDir::Up,
        LinkSide::Down => LinkDir::Down,
    }
}

fn check(gw: &Gateway, panel: &str, e: &Expectation) -> Result<(String, bool, String), String> {
    let station = gw.station(panel).ok_or_else(|| format!("unknown panel `{panel}`"))?;
    let state = station.state();
    Ok(match e {
        Expectation::Lamp { signal, on } => {
            let got = gw.lamp(panel, signal).map_err(|e| e.to_string())?;
            (
                format!("expect `{signal}` {}", if *on { "on" } else { "off" }),
                got == *on,
                format!("lamp is {}", if got { "on" } else { "off" }),
            )
        }
        Expectation::Phase(p) => {
            (format!("expect phase {}", p.as_str()), state.phase == *p, format!("phase is {}", state.phase.as_str()))
        }
        Expectation::Temperature { cmp, value } => (
            format!("expect temperature {} {value}", cmp.as_str()),
            cmp.holds(state.temperature, *value),
            format!("temperature is {:.3}", state.temperature),
        ),
        Expectation::Byte { side, byte } => {
            let seen = gw.last_seen(panel, side_dir(*side), *byte);
            let dir = side_dir(*side).as_str();
            (
                format!("expect byte {dir} 0x{byte:02x}"),
                seen.is_some(),
                seen.map_or("never seen".into(), |t| format!("last at {:.6}s", t.as_secs_f64())),
            )
        }
        Expectation::Online(on) => {
            let got = gw.view(panel).map_err(|e| e.to_string())?.online;
            (format!("expect online {on}"), got == *on, format!("online is {got}"))
        }
        Expectation::Order(signals) => {
            let map = station.map();
            let mut seqs = Vec::new();
            for s in signals {
                let def = map.resolve(s).ok_or_else(|| format!("unknown signal `{s}`"))?;
                let seq = gw
                    .audit()
                    .events()
                    .find(|ev| {
                        ev.kind == EventKind::StatusEdge
                            && ev.panel.as_deref() == Some(panel)
                            && ev.payload["signal"] == def.description.as_str()
                            && ev.payload["on"] == true
                    })
                    .map(|ev| ev.seq);
                seqs.push(seq);
            }
            let ok = seqs.iter().all(Option::is_some) && seqs.windows(2).all(|w| w[0] < w[1]);
            let detail = seqs
                .iter()
                .zip(signals)
                .map(|(q, s)| format!("{s}={}", q.map_or("missing".into(), |v| v.to_string())))
                .collect::<Vec<_>>()
                .join(", ");
            (format!("expect-order {}", signals.join(" < ")), ok, detail)
        }
    })
}

/// Runs a scenario against `gw`. `default_panel` is used by directives
/// that precede any `panel` line. Random choices come from `seed` only.
pub fn run_scenario(gw: &mut Gateway, sc: &Scenario, seed: u64, default_panel: &str) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = expand(gw, sc, default_panel, &mut rng);
    let mut report = Report::default();
    for Step { d, fuzz } in steps {
        gw.advance_to(d.at);
        let panel = d.panel.as_deref().unwrap_or(default_panel).to_string();
        let result: Result<Option<(String, bool, String)>, String> = match &d.verb {
            Verb::Inject { signal, on } => gw.inject(&panel, signal, *on).map(|_| None).map_err(|e| e.to_string()),
            Verb::Press { signal } => {
                gw.press_button_as(Source::Script, &panel, signal).map(|_| None).map_err(|e| e.to_string())
            }
            Verb::Select { signal, position } => {
                gw.set_selector_as(Source::Script, &panel, signal, position).map(|_| None).map_err(|e| e.to_string())
            }
            Verb::Auto { on, setpoint } => {
                gw.set_auto_mode_as(Source::Script, &panel, *on, *setpoint).map(|_| None).map_err(|e| e.to_string())
            }
            Verb::GeneralReset => gw.general_reset_as(Source::Script, &panel).map(|_| None).map_err(|e| e.to_string()),
            Verb::Link { up } => gw.set_link(&panel, *up).map(|_| None).map_err(|e| e.to_string()),
            Verb::Setpoint(v) => gw.set_local_setpoint(&panel, *v).map(|_| None).map_err(|e| e.to_string()),
            Verb::Expect(e) => check(gw, &panel, e).map(Some),
            Verb::Fuzz { .. } | Verb::End => Ok(None),
        };
        match result {
            Ok(Some((what, passed, detail))) => {
                report.outcomes.push(Outcome { line: d.line, at: d.at, what, passed, detail });
            }
            Ok(None) => {}
            // random commands are expected to be refused now and then
            Err(_) if fuzz => {}
            Err(msg) => report.outcomes.push(Outcome {
                line: d.line,
                at: d.at,
                what: "directive".into(),
                passed: false,
                detail: msg,
            }),
        }
    }
    gw.advance_to(sc.end());
    report.end = gw.now();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::SystemClock;
    use crate::formats::scenario::parse_scenario;

    fn gw() -> Gateway {
        build_gateway(&Config::single_panel(), Arc::new(SystemClock), AuditLog::in_memory()).unwrap()
    }

    #[test]
    fn failing_expectation_is_reported() {
        let sc = parse_scenario("at 1 expect \"LOW GAS PRESSURE\" on\n").unwrap();
        let r = run_scenario(&mut gw(), &sc, 0, "panel-1");
        assert!(!r.passed());
        assert!(r.to_string().contains("FAIL line 1"), "{r}");
        assert!(r.to_string().contains("lamp is off"), "{r}");
    }

    #[test]
    fn rejected_directive_fails() {
        let sc = parse_scenario("at 1 press \"NOT A BUTTON\"\n").unwrap();
        assert!(!run_scenario(&mut gw(), &sc, 0, "panel-1").passed());
    }

    #[test]
    fn fuzz_is_seeded() {
        let sc = parse_scenario("at 0 press RC4\nat 1 fuzz 50 20s\nat 30 end\n").unwrap();
        let run = |seed| {
            let mut g = gw();
            run_scenario(&mut g, &sc, seed, "panel-1");
            g.audit().events().cloned().collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
