//! Supervisory gateway: authenticated operators, a registry of simulated
//! panels, command forwarding, the auto loop and an audit trail.
//!
//! The gateway is synchronous and owns the virtual clock. Callers move time
//! forward with [`Gateway::advance_to`]; the HTTP layer wraps it in a mutex.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use grs_core::auto::{AutoCommand, AutoController, Observation};
use grs_core::codec::Action;
use grs_core::firmware::Counters;
use grs_core::link::LinkDir;
use grs_core::pin::PinId;
use grs_core::plant::{names, PlantError, SETPOINT_MAX, SETPOINT_MIN};
use grs_core::signal_map::{Color, Direction, SignalDef, SignalKind};
use grs_core::station::Station;
use grs_core::time::{Instant, Span};
use serde::Serialize;
use serde_json::json;
use tokio::sync::broadcast;

use crate::audit::{AuditLog, EventKind};
use crate::auth::{AuthError, AuthPolicy, Authenticator, CredentialStore, Session, WallClock};
use crate::formats::trace::trace_line;

pub const STREAM_CAPACITY: usize = 1024;
const WATCHDOG: Span = Span::from_secs(1);
const HEARTBEAT: Span = Span::from_secs(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Manual,
    Auto,
}

/// Who issued a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Operator(String),
    Auto,
    Script,
}

impl Source {
    fn label(&self) -> String {
        match self {
            Source::Operator(u) => format!("operator:{u}"),
            Source::Auto => "auto".into(),
            Source::Script => "script".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("bad credentials")]
    BadCredentials,
    #[error("account locked after repeated failures")]
    LockedOut,
    #[error("unknown panel `{0}`")]
    UnknownPanel(String),
    #[error("`{0}` is not a push button on this panel")]
    UnknownButton(String),
    #[error("`{0}` is not a selector position on this panel")]
    UnknownSelector(String),
    #[error("`{0}` is not a field input on this panel")]
    UnknownSignal(String),
    #[error("manual commands are locked while the panel is in auto mode")]
    ModeLocked,
    #[error("setpoint {0} outside 0..=100")]
    Range(f64),
    #[error("panel link is offline")]
    PanelOffline,
    #[error("{0}")]
    BadRequest(String),
}

impl GatewayError {
    /// Stable machine-readable error name.
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::Unauthorized => "unauthorized",
            GatewayError::BadCredentials => "bad-credentials",
            GatewayError::LockedOut => "locked-out",
            GatewayError::UnknownPanel(_) => "unknown-panel",
            GatewayError::UnknownButton(_) => "unknown-button",
            GatewayError::UnknownSelector(_) => "unknown-selector",
            GatewayError::UnknownSignal(_) => "unknown-signal",
            GatewayError::ModeLocked => "mode-locked",
            GatewayError::Range(_) => "range-error",
            GatewayError::PanelOffline => "panel-offline",
            GatewayError::BadRequest(_) => "bad-request",
        }
    }
}

impl From<AuthError> for GatewayError {
    fn from(e: AuthError) -> Self {
        match e {
            AuthError::BadCredentials => GatewayError::BadCredentials,
            AuthError::LockedOut => GatewayError::LockedOut,
            AuthError::Unauthorized => GatewayError::Unauthorized,
        }
    }
}

fn color_name(c: Color) -> &'static str {
    match c {
        Color::Green => "green",
        Color::Red => "red",
        Color::Yellow => "yellow",
        Color::None => "none",
    }
}

fn char_name(b: u8) -> String {
    if b.is_ascii_graphic() {
        (b as char).to_string()
    } else {
        format!("0x{b:02x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LampView {
    pub signal_no: String,
    pub pin: String,
    pub label: String,
    pub description: String,
    pub color: &'static str,
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlView {
    pub signal_no: String,
    pub pin: String,
    pub label: String,
    pub description: String,
    /// `push-button`, `selector` or `emergency-stop`.
    pub kind: &'static str,
    /// Last commanded position, selectors only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<bool>,
    /// True while auto mode rejects this control.
    pub locked: bool,
}

/// Analog values sampled from the panel outside the character protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Telemetry {
    pub phase: String,
    pub temperature: f64,
    pub setpoint: f64,
    pub burner_on: bool,
    pub pump_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelView {
    pub id: String,
    pub name: String,
    pub seq: u64,
    pub time_s: f64,
    pub mode: Mode,
    pub auto_setpoint: Option<f64>,
    pub online: bool,
    pub telemetry: Telemetry,
    pub lamps: Vec<LampView>,
    pub controls: Vec<ControlView>,
    pub counters: Counters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSummary {
    pub id: String,
    pub name: String,
    pub mode: Mode,
    pub online: bool,
    pub phase: String,
}

/// Messages pushed to stream subscribers. `seq` is per panel and strictly
/// increasing; a subscriber that misses one must resubscribe.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum StreamMsg {
    Snapshot(PanelView),
    StatusEdge { seq: u64, time_s: f64, pin: String, description: String, color: &'static str, on: bool, byte: String },
    Selector { seq: u64, time_s: f64, pin: String, description: String, position: bool },
    ModeChange { seq: u64, time_s: f64, mode: Mode, setpoint: Option<f64> },
    Heartbeat { seq: u64, time_s: f64, telemetry: Telemetry },
    PanelOffline { seq: u64, time_s: f64 },
    PanelOnline { seq: u64, time_s: f64 },
}

impl StreamMsg {
    pub fn seq(&self) -> u64 {
        match self {
            StreamMsg::Snapshot(v) => v.seq,
            StreamMsg::StatusEdge { seq, .. }
            | StreamMsg::Selector { seq, .. }
            | StreamMsg::ModeChange { seq, .. }
            | StreamMsg::Heartbeat { seq, .. }
            | StreamMsg::PanelOffline { seq, .. }
            | StreamMsg::PanelOnline { seq, .. } => *seq,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StreamMsg::Snapshot(_) => "snapshot",
            StreamMsg::StatusEdge { .. } => "status-edge",
            StreamMsg::Selector { .. } => "selector",
            StreamMsg::ModeChange { .. } => "mode-change",
            StreamMsg::Heartbeat { .. } => "heartbeat",
            StreamMsg::PanelOffline { .. } => "panel-offline",
            StreamMsg::PanelOnline { .. } => "panel-online",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandReceipt {
    pub byte: String,
    pub audit_seq: u64,
    pub snapshot_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReceipt {
    pub mode: Mode,
    pub setpoint: Option<f64>,
    pub audit_seq: u64,
    pub snapshot_seq: u64,
}

struct Panel {
    id: String,
    name: String,
    station: Station,
    lamps: BTreeMap<PinId, bool>,
    selectors: BTreeMap<PinId, bool>,
    mode: Mode,
    auto: Option<AutoController>,
    seq: u64,
    tx: broadcast::Sender<StreamMsg>,
    online: bool,
    last_eval: Instant,
    next_heartbeat: Instant,
    last_seen: HashMap<(LinkDir, u8), Instant>,
    reset_pin: PinId,
    receipt_pin: PinId,
    start_pin: PinId,
    stop_pin: PinId,
}

fn pin_of(station: &Station, description: &str) -> Result<PinId, String> {
    station
        .map()
        .lookup_by_description(description)
        .and_then(|d| d.pin)
        .ok_or_else(|| format!("signal map has no `{description}` output"))
}

impl Panel {
    fn new(id: String, name: String, station: Station) -> Result<Panel, String> {
        let lamps = station.map().inputs().filter_map(|d| d.pin).map(|p| (p, false)).collect();
        let selectors = station
            .map()
            .outputs()
            .filter(|d| d.kind == SignalKind::SelectorSwitch)
            .filter_map(|d| d.pin)
            .map(|p| (p, false))
            .collect();
        let (tx, _) = broadcast::channel(STREAM_CAPACITY);
        Ok(Panel {
            reset_pin: pin_of(&station, names::RESET)?,
            receipt_pin: pin_of(&station, names::ALARM_RECEIPT)?,
            start_pin: pin_of(&station, names::START)?,
            stop_pin: pin_of(&station, names::STOP)?,
            id,
            name,
            station,
            lamps,
            selectors,
            mode: Mode::Manual,
            auto: None,
            seq: 0,
            tx,
            online: true,
            last_eval: Instant::ZERO,
            next_heartbeat: Instant::ZERO + HEARTBEAT,
            last_seen: HashMap::new(),
        })
    }

    fn publish(&mut self, build: impl FnOnce(u64) -> StreamMsg) -> u64 {
        self.seq += 1;
        // no subscribers is fine
        let _ = self.tx.send(build(self.seq));
        self.seq
    }

    fn telemetry(&self) -> Telemetry {
        let s = self.station.state();
        Telemetry {
            phase: s.phase.as_str().to_string(),
            temperature: s.temperature,
            setpoint: s.setpoint,
            burner_on: s.burner_on,
            pump_on: s.pump_on,
        }
    }

    fn view(&self, now: Instant) -> PanelView {
        let map = self.station.map();
        let lamps = map
            .inputs()
            .filter_map(|d| {
                let pin = d.pin?;
                Some(LampView {
                    signal_no: d.signal_no.clone(),
                    pin: pin.to_string(),
                    label: d.label.clone(),
                    description: d.description.clone(),
                    color: color_name(d.color),
                    on: self.lamps.get(&pin).copied().unwrap_or(false),
                })
            })
            .collect();
        let controls = map
            .outputs()
            .filter_map(|d| {
                let pin = d.pin?;
                let kind = match d.kind {
                    SignalKind::PushButton => "push-button",
                    SignalKind::SelectorSwitch => "selector",
                    SignalKind::EmergencyStop => "emergency-stop",
                    SignalKind::Indicator => return None,
                };
                Some(ControlView {
                    signal_no: d.signal_no.clone(),
                    pin: pin.to_string(),
                    label: d.label.clone(),
                    description: d.description.clone(),
                    kind,
                    position: self.selectors.get(&pin).copied(),
                    locked: self.mode == Mode::Auto && d.kind != SignalKind::EmergencyStop,
                })
            })
            .collect();
        PanelView {
            id: self.id.clone(),
            name: self.name.clone(),
            seq: self.seq,
            time_s: now.as_secs_f64(),
            mode: self.mode,
            auto_setpoint: self.auto.as_ref().map(AutoController::setpoint),
            online: self.online,
            telemetry: self.telemetry(),
            lamps,
            controls,
            counters: self.station.counters(),
        }
    }

    fn resolve(&self, signal: &str) -> Option<&SignalDef> {
        self.station.map().resolve(signal)
    }
}

fn parse_position(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" | "1" | "true" | "high" | "remote" => Some(true),
        "off" | "0" | "false" | "low" | "local" => Some(false),
        _ => None,
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayOptions {
    pub auth: AuthPolicy,
    pub auto_hysteresis: f64,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        GatewayOptions { auth: AuthPolicy::default(), auto_hysteresis: 2.0 }
    }
}

pub struct Gateway {
    now: Instant,
    step: Span,
    panels: Vec<Panel>,
    auth: Authenticator,
    audit: AuditLog,
    auto_hysteresis: f64,
    trace: Option<Vec<String>>,
}

impl Gateway {
    pub fn new(
        stations: Vec<(String, String, Station)>,
        credentials: CredentialStore,
        clock: Arc<dyn WallClock>,
        audit: AuditLog,
        opts: GatewayOptions,
    ) -> Result<Gateway, String> {
        let mut step = 0;
        let mut panels = Vec::new();
        for (id, name, station) in stations {
            if panels.iter().any(|p: &Panel| p.id == id) {
                return Err(format!("duplicate panel id `{id}`"));
            }
            step = gcd(step, station.firmware().config().cycle.ticks());
            panels.push(Panel::new(id, name, station)?);
        }
        if panels.is_empty() {
            return Err("no panels".into());
        }
        Ok(Gateway {
            now: Instant::ZERO,
            step: Span(step.max(1)),
            panels,
            auth: Authenticator::new(credentials, clock, opts.auth),
            audit,
            auto_hysteresis: opts.auto_hysteresis,
            trace: None,
        })
    }

    pub fn now(&self) -> Instant {
        self.now
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn audit_mut(&mut self) -> &mut AuditLog {
        &mut self.audit
    }

    /// Keeps a text line for every delivered frame until [`Gateway::take_trace`].
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn panel_ids(&self) -> Vec<String> {
        self.panels.iter().map(|p| p.id.clone()).collect()
    }

    pub fn station(&self, panel: &str) -> Option<&Station> {
        self.panels.iter().find(|p| p.id == panel).map(|p| &p.station)
    }

    fn index(&self, panel: &str) -> Result<usize, GatewayError> {
        self.panels.iter().position(|p| p.id == panel).ok_or_else(|| GatewayError::UnknownPanel(panel.to_string()))
    }

    // ---- authentication ----

    pub fn login(&mut self, user: &str, password: &str) -> Result<Session, GatewayError> {
        match self.auth.login(user, password) {
            Ok(s) => Ok(s),
            Err(e) => {
                let reason = GatewayError::from(e).code();
                self.audit.append(self.now, None, EventKind::AuthFailure, json!({ "user": user, "reason": reason }));
                Err(e.into())
            }
        }
    }

    pub fn logout(&mut self, token: &str) {
        self.auth.logout(token);
    }

    fn session(&mut self, token: Option<&str>) -> Result<Session, GatewayError> {
        let token = token.ok_or(GatewayError::Unauthorized)?;
        Ok(self.auth.authorize(token)?.clone())
    }

    fn permitted(&mut self, token: Option<&str>, panel: &str) -> Result<Session, GatewayError> {
        let s = self.session(token)?;
        self.index(panel)?;
        if !s.panels.permits(panel) {
            return Err(GatewayError::Unauthorized);
        }
        Ok(s)
    }

    // ---- authenticated operations ----

    pub fn list_panels(&mut self, token: Option<&str>) -> Result<Vec<PanelSummary>, GatewayError> {
        let s = self.session(token)?;
        Ok(self
            .panels
            .iter()
            .filter(|p| s.panels.permits(&p.id))
            .map(|p| PanelSummary {
                id: p.id.clone(),
                name: p.name.clone(),
                mode: p.mode,
                online: p.online,
                phase: p.station.state().phase.as_str().to_string(),
            })
            .collect())
    }

    pub fn panel_state(&mut self, token: Option<&str>, panel: &str) -> Result<PanelView, GatewayError> {
        self.permitted(token, panel)?;
        self.view(panel)
    }

    pub fn press_button(
        &mut self,
        token: Option<&str>,
        panel: &str,
        signal: &str,
    ) -> Result<CommandReceipt, GatewayError> {
        let s = self.permitted(token, panel)?;
        self.press_button_as(Source::Operator(s.user), panel, signal)
    }

    pub fn set_selector(
        &mut self,
        token: Option<&str>,
        panel: &str,
        signal: &str,
        position: &str,
    ) -> Result<CommandReceipt, GatewayError> {
        let s = self.permitted(token, panel)?;
        self.set_selector_as(Source::Operator(s.user), panel, signal, position)
    }

    pub fn set_auto_mode(
        &mut self,
        token: Option<&str>,
        panel: &str,
        on: bool,
        setpoint: Option<f64>,
    ) -> Result<ModeReceipt, GatewayError> {
        let s = self.permitted(token, panel)?;
        self.set_auto_mode_as(Source::Operator(s.user), panel, on, setpoint)
    }

    pub fn general_reset(&mut self, token: Option<&str>, panel: &str) -> Result<Vec<CommandReceipt>, GatewayError> {
        let s = self.permitted(token, panel)?;
        self.general_reset_as(Source::Operator(s.user), panel)
    }

    /// Full snapshot plus a receiver for everything published after it.
    pub fn subscribe(
        &mut self,
        token: Option<&str>,
        panel: &str,
    ) -> Result<(PanelView, broadcast::Receiver<StreamMsg>), GatewayError> {
        self.permitted(token, panel)?;
        self.subscribe_unchecked(panel)
    }

    // ---- operations on behalf of an already authorized source ----

    pub fn view(&self, panel: &str) -> Result<PanelView, GatewayError> {
        let i = self.index(panel)?;
        Ok(self.panels[i].view(self.now))
    }

    pub fn subscribe_unchecked(
        &self,
        panel: &str,
    ) -> Result<(PanelView, broadcast::Receiver<StreamMsg>), GatewayError> {
        let i = self.index(panel)?;
        let p = &self.panels[i];
        Ok((p.view(self.now), p.tx.subscribe()))
    }

    pub fn press_button_as(&mut self, src: Source, panel: &str, signal: &str) -> Result<CommandReceipt, GatewayError> {
        let i = self.index(panel)?;
        let p = &self.panels[i];
        let def = p
            .resolve(signal)
            .filter(|d| d.direction == Direction::DigitalOut)
            .filter(|d| matches!(d.kind, SignalKind::PushButton | SignalKind::EmergencyStop))
            .ok_or_else(|| GatewayError::UnknownButton(signal.to_string()))?;
        let pin = def.pin.ok_or_else(|| GatewayError::UnknownButton(signal.to_string()))?;
        if p.mode == Mode::Auto && def.kind != SignalKind::EmergencyStop && src != Source::Auto {
            return Err(GatewayError::ModeLocked);
        }
        self.send(i, Action::Press(pin), &src)
    }

    pub fn set_selector_as(
        &mut self,
        src: Source,
        panel: &str,
        signal: &str,
        position: &str,
    ) -> Result<CommandReceipt, GatewayError> {
        let i = self.index(panel)?;
        let p = &self.panels[i];
        let pin = p
            .resolve(signal)
            .filter(|d| d.direction == Direction::DigitalOut && d.kind == SignalKind::SelectorSwitch)
            .and_then(|d| d.pin)
            .ok_or_else(|| GatewayError::UnknownSelector(signal.to_string()))?;
        let level =
            parse_position(position).ok_or_else(|| GatewayError::UnknownSelector(format!("{signal}={position}")))?;
        if p.mode == Mode::Auto {
            return Err(GatewayError::ModeLocked);
        }
        self.send(i, Action::Select(pin, level), &src)
    }

    pub fn set_auto_mode_as(
        &mut self,
        src: Source,
        panel: &str,
        on: bool,
        setpoint: Option<f64>,
    ) -> Result<ModeReceipt, GatewayError> {
        let i = self.index(panel)?;
        let auto = if on {
            let sp =
                setpoint.ok_or_else(|| GatewayError::BadRequest("setpoint is required to enable auto mode".into()))?;
            if !(SETPOINT_MIN..=SETPOINT_MAX).contains(&sp) {
                return Err(GatewayError::Range(sp));
            }
            Some(AutoController::new(sp, self.auto_hysteresis).map_err(|e| GatewayError::Range(e.0))?)
        } else {
            None
        };
        let now = self.now;
        let p = &mut self.panels[i];
        p.mode = if on { Mode::Auto } else { Mode::Manual };
        let sp = auto.as_ref().map(AutoController::setpoint);
        p.auto = auto;
        let mode = p.mode;
        let audit_seq = self.audit.append(
            now,
            Some(&p.id),
            EventKind::ModeChange,
            json!({ "mode": mode, "setpoint": sp, "source": src.label() }),
        );
        let snapshot_seq =
            p.publish(|seq| StreamMsg::ModeChange { seq, time_s: now.as_secs_f64(), mode, setpoint: sp });
        if on {
            self.evaluate_auto(i);
        }
        Ok(ModeReceipt { mode, setpoint: sp, audit_seq, snapshot_seq })
    }

    /// Sends RESET BURNER CONTROL then ALARM RECEIPT.
    pub fn general_reset_as(&mut self, src: Source, panel: &str) -> Result<Vec<CommandReceipt>, GatewayError> {
        let i = self.index(panel)?;
        let p = &self.panels[i];
        if p.mode == Mode::Auto {
            return Err(GatewayError::ModeLocked);
        }
        if !p.online {
            return Err(GatewayError::PanelOffline);
        }
        let (reset, receipt) = (p.reset_pin, p.receipt_pin);
        let src = Source::Operator(format!("{}+general-reset", src.label()));
        Ok(vec![self.send(i, Action::Press(reset), &src)?, self.send(i, Action::Press(receipt), &src)?])
    }

    // ---- simulation controls ----

    /// Drives a field input on the simulated panel (fault cause, pump status).
    pub fn inject(&mut self, panel: &str, signal: &str, on: bool) -> Result<(), GatewayError> {
        let i = self.index(panel)?;
        let p = &mut self.panels[i];
        let pin = p
            .resolve(signal)
            .filter(|d| d.direction == Direction::DigitalIn)
            .and_then(|d| d.pin)
            .ok_or_else(|| GatewayError::UnknownSignal(signal.to_string()))?;
        p.station.drive_field_input(pin, on).map_err(|e| match e {
            PlantError::Range(v) => GatewayError::Range(v),
            _ => GatewayError::UnknownSignal(signal.to_string()),
        })?;
        Ok(())
    }

    /// Local thermostat setpoint on the panel.
    pub fn set_local_setpoint(&mut self, panel: &str, sp: f64) -> Result<(), GatewayError> {
        let i = self.index(panel)?;
        self.panels[i].station.set_local_setpoint(sp).map_err(|_| GatewayError::Range(sp))
    }

    pub fn set_link(&mut self, panel: &str, up: bool) -> Result<(), GatewayError> {
        let i = self.index(panel)?;
        let now = self.now;
        let p = &mut self.panels[i];
        if p.online == up {
            return Ok(());
        }
        p.station.set_link_open(up);
        p.online = up;
        self.audit.append(
            now,
            Some(&p.id),
            EventKind::LinkFault,
            json!({ "state": if up { "restored" } else { "down" } }),
        );
        let t = now.as_secs_f64();
        p.publish(|seq| {
            if up {
                StreamMsg::PanelOnline { seq, time_s: t }
            } else {
                StreamMsg::PanelOffline { seq, time_s: t }
            }
        });
        Ok(())
    }

    /// Gateway's view of an indicator lamp, driven by received status bytes.
    pub fn lamp(&self, panel: &str, signal: &str) -> Result<bool, GatewayError> {
        let i = self.index(panel)?;
        let p = &self.panels[i];
        let pin = p
            .resolve(signal)
            .filter(|d| d.direction == Direction::DigitalIn)
            .and_then(|d| d.pin)
            .ok_or_else(|| GatewayError::UnknownSignal(signal.to_string()))?;
        Ok(p.lamps.get(&pin).copied().unwrap_or(false))
    }

    /// Last time `byte` was delivered in direction `dir` on this panel's link.
    pub fn last_seen(&self, panel: &str, dir: LinkDir, byte: u8) -> Option<Instant> {
        let i = self.index(panel).ok()?;
        self.panels[i].last_seen.get(&(dir, byte)).copied()
    }

    pub fn mode(&self, panel: &str) -> Result<Mode, GatewayError> {
        Ok(self.panels[self.index(panel)?].mode)
    }

    // ---- internals ----

    fn send(&mut self, i: usize, action: Action, src: &Source) -> Result<CommandReceipt, GatewayError> {
        let now = self.now;
        let p = &mut self.panels[i];
        if !p.online {
            return Err(GatewayError::PanelOffline);
        }
        let byte = p.station.codebook().encode_command(action).map_err(|_| match action {
            Action::Press(pin) => GatewayError::UnknownButton(pin.to_string()),
            Action::Select(pin, _) => GatewayError::UnknownSelector(pin.to_string()),
        })?;
        p.station.send_down(byte).map_err(|_| GatewayError::PanelOffline)?;
        let (pin, act) = match action {
            Action::Press(pin) => (pin, "press".to_string()),
            Action::Select(pin, level) => (pin, format!("select-{}", if level { "on" } else { "off" })),
        };
        let description = p.station.map().lookup_by_pin(pin).map(|d| d.description.clone()).unwrap_or_default();
        let audit_seq = self.audit.append(
            now,
            Some(&p.id),
            EventKind::Command,
            json!({
                "byte": format!("0x{byte:02x}"),
                "char": char_name(byte),
                "pin": pin.to_string(),
                "signal": description,
                "action": act,
                "source": src.label(),
            }),
        );
        if let Action::Select(pin, level) = action {
            p.selectors.insert(pin, level);
            let t = now.as_secs_f64();
            p.publish(|seq| StreamMsg::Selector { seq, time_s: t, pin: pin.to_string(), description, position: level });
        }
        Ok(CommandReceipt { byte: char_name(byte), audit_seq, snapshot_seq: p.seq })
    }

    fn next_grid(&self) -> Instant {
        let step = self.step.ticks();
        Instant((self.now.ticks() / step + 1) * step)
    }

    /// Runs every panel up to `t`. Status frames are handled at their exact
    /// delivery times; the auto loop runs on each status delta and on a 1 s
    /// watchdog.
    pub fn advance_to(&mut self, t: Instant) {
        while self.now < t {
            let mut next = self.next_grid().min(t);
            for p in &self.panels {
                if let Some(d) = p.station.next_uplink() {
                    if d > self.now && d < next {
                        next = d;
                    }
                }
            }
            for i in 0..self.panels.len() {
                self.panels[i].station.advance_to(next);
                self.now = next;
                let delta = self.drain(i);
                let p = &self.panels[i];
                let watchdog = next.since(p.last_eval) >= WATCHDOG;
                if p.mode == Mode::Auto && (delta || watchdog) {
                    self.evaluate_auto(i);
                }
                let p = &mut self.panels[i];
                if next >= p.next_heartbeat {
                    p.next_heartbeat += HEARTBEAT;
                    let telemetry = p.telemetry();
                    p.publish(|seq| StreamMsg::Heartbeat { seq, time_s: next.as_secs_f64(), telemetry });
                }
            }
            self.now = next;
        }
    }

    pub fn advance_by(&mut self, span: Span) {
        self.advance_to(self.now + span);
    }

    /// Handles frames that reached the gateway. Returns true if any lamp changed.
    fn drain(&mut self, i: usize) -> bool {
        let p = &mut self.panels[i];
        for rec in p.station.take_trace() {
            p.last_seen.insert((rec.dir, rec.frame.sent_byte), rec.frame.at);
            if let Some(trace) = self.trace.as_mut() {
                trace.push(trace_line(&p.id, &rec));
            }
        }
        p.station.take_actuations();

        let mut delta = false;
        for r in p.station.take_uplink() {
            let at = r.at;
            let byte = match r.result {
                Ok(b) => b,
                Err(e) => {
                    self.audit.append(
                        at,
                        Some(&p.id),
                        EventKind::LinkFault,
                        json!({ "reason": "framing-error", "detail": e.to_string(), "sent": format!("0x{:02x}", r.sent_byte) }),
                    );
                    continue;
                }
            };
            let Ok(code) = p.station.codebook().decode_status(byte) else {
                self.audit.append(
                    at,
                    Some(&p.id),
                    EventKind::LinkFault,
                    json!({ "reason": "unknown-byte", "byte": format!("0x{byte:02x}") }),
                );
                continue;
            };
            let (pin, on) = (code.pin, code.edge.level());
            let description = code.description.clone();
            let color = p.station.map().lookup_by_pin(pin).map_or(Color::None, |d| d.color);
            p.lamps.insert(pin, on);
            self.audit.append(
                at,
                Some(&p.id),
                EventKind::StatusEdge,
                json!({
                    "byte": format!("0x{byte:02x}"),
                    "char": char_name(byte),
                    "pin": pin.to_string(),
                    "signal": description,
                    "on": on,
                }),
            );
            p.publish(|seq| StreamMsg::StatusEdge {
                seq,
                time_s: at.as_secs_f64(),
                pin: pin.to_string(),
                description,
                color: color_name(color),
                on,
                byte: char_name(byte),
            });
            delta = true;
        }
        delta
    }

    fn evaluate_auto(&mut self, i: usize) {
        let now = self.now;
        let p = &mut self.panels[i];
        p.last_eval = now;
        let s = p.station.state();
        let obs = Observation { now, phase: s.phase, temperature: s.temperature };
        let Some(auto) = p.auto.as_mut() else { return };
        let Some(cmd) = auto.decide(obs) else { return };
        let pin = match cmd {
            AutoCommand::Reset => p.reset_pin,
            AutoCommand::Start => p.start_pin,
            AutoCommand::Stop => p.stop_pin,
        };
        // an offline link is reported through LinkFault already
        let _ = self.send(i, Action::Press(pin), &Source::Auto);
    }
}
