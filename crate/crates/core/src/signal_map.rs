//! Canonical association of panel signals, controller pins, lamp colors and
//! protocol characters.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::pin::{PinId, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Direction {
    DigitalIn,
    DigitalOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SignalKind {
    Indicator,
    PushButton,
    SelectorSwitch,
    EmergencyStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Color {
    Green,
    Red,
    Yellow,
    None,
}

/// The "Indication" column of the panel signal table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Indication {
    Fault,
    Run,
    RunOk,
    Event,
    Start,
    Stop,
    Reset,
    Selector,
    Test,
    EmergencyStop,
}

impl Indication {
    pub const ALL: [Indication; 10] = [
        Indication::Fault,
        Indication::Run,
        Indication::RunOk,
        Indication::Event,
        Indication::Start,
        Indication::Stop,
        Indication::Reset,
        Indication::Selector,
        Indication::Test,
        Indication::EmergencyStop,
    ];

    pub fn kind(self) -> SignalKind {
        match self {
            Indication::Fault | Indication::Run | Indication::RunOk | Indication::Event => SignalKind::Indicator,
            Indication::Start | Indication::Stop | Indication::Reset | Indication::Test => SignalKind::PushButton,
            Indication::Selector => SignalKind::SelectorSwitch,
            Indication::EmergencyStop => SignalKind::EmergencyStop,
        }
    }

    /// Lamp color: green for normal operation, red for faults, yellow for
    /// operating events. Commands carry no lamp.
    pub fn default_color(self) -> Color {
        match self {
            Indication::Fault => Color::Red,
            Indication::RunOk => Color::Green,
            Indication::Run | Indication::Event => Color::Yellow,
            _ => Color::None,
        }
    }

    /// Spelling used in the panel signal table.
    pub fn as_str(self) -> &'static str {
        match self {
            Indication::Fault => "Fault",
            Indication::Run => "Run",
            Indication::RunOk => "Run OK",
            Indication::Event => "Event",
            Indication::Start => "start",
            Indication::Stop => "stop",
            Indication::Reset => "RESET",
            Indication::Selector => "SELECTOR",
            Indication::Test => "TEST",
            Indication::EmergencyStop => "EMERGENCY STOP",
        }
    }

    pub fn parse(s: &str) -> Option<Indication> {
        let s = s.trim();
        Indication::ALL.into_iter().find(|i| i.as_str().eq_ignore_ascii_case(s))
    }
}

/// Whether a latched fault shuts the burner down or only annunciates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FaultClass {
    Trip,
    Alarm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignalDef {
    pub signal_no: String,
    pub pin: Option<PinId>,
    pub label: String,
    pub indication: Indication,
    pub direction: Direction,
    pub kind: SignalKind,
    pub color: Color,
    pub description: String,
    pub fault_class: Option<FaultClass>,
    pub proto_char: Option<u8>,
}

impl SignalDef {
    pub fn new(
        signal_no: &str,
        pin: Option<PinId>,
        label: &str,
        indication: Indication,
        direction: Direction,
        description: &str,
    ) -> SignalDef {
        SignalDef {
            signal_no: signal_no.into(),
            pin,
            label: label.into(),
            indication,
            direction,
            kind: indication.kind(),
            color: indication.default_color(),
            description: description.into(),
            fault_class: None,
            proto_char: None,
        }
    }

    pub fn is_fault(&self) -> bool {
        self.direction == Direction::DigitalIn && self.color == Color::Red
    }
}

/// A pin that is wired but carries no named signal.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReservedPin {
    pub signal_no: String,
    pub pin: PinId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignalMap {
    pub version: String,
    pub entries: Vec<SignalDef>,
    pub reserved: Vec<ReservedPin>,
}

/// The rule a map entry breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    DuplicatePin(PinId),
    DuplicateChar(u8),
    InputNotIndicator,
    InputWithoutColor,
    ColorOnOutput,
    OutputIsIndicator,
    InputPinOutOfRange(PinId),
    OutputPinOutOfRange(PinId),
    FaultClassOnNonFault,
    InputCount { found: usize },
    TooManyPins { found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// `<signal_no> <description>` of the offending entry, or `map` for
    /// whole-map rules.
    pub entry: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.entry)?;
        match &self.rule {
            Rule::DuplicatePin(p) => write!(f, "duplicate pin {p}"),
            Rule::DuplicateChar(c) => write!(f, "duplicate protocol char {c}"),
            Rule::InputNotIndicator => f.write_str("digital input must be an indicator"),
            Rule::InputWithoutColor => f.write_str("digital input must have a lamp color"),
            Rule::ColorOnOutput => f.write_str("digital output must not have a lamp color"),
            Rule::OutputIsIndicator => f.write_str("digital output cannot be an indicator"),
            Rule::InputPinOutOfRange(p) => write!(f, "input on {p}, outside RA0-RA5/RB0-RB7/RE0"),
            Rule::OutputPinOutOfRange(p) => write!(f, "output on {p}, outside RC0-RC7/RD0-RD6"),
            Rule::FaultClassOnNonFault => f.write_str("fault class on a non-fault signal"),
            Rule::InputCount { found } => write!(f, "expected 15 pinned inputs, found {found}"),
            Rule::TooManyPins { found } => write!(f, "{found} pins mapped, at most 30"),
        }
    }
}

pub const INPUT_COUNT: usize = 15;
pub const MAX_PINS: usize = 30;

pub fn is_input_pin(pin: PinId) -> bool {
    match pin.port() {
        Port::A => pin.index() <= 5,
        Port::B => true,
        Port::E => pin.index() == 0,
        _ => false,
    }
}

pub fn is_output_pin(pin: PinId) -> bool {
    match pin.port() {
        Port::C => true,
        Port::D => pin.index() <= 6,
        _ => false,
    }
}

impl SignalMap {
    pub fn lookup_by_pin(&self, pin: PinId) -> Option<&SignalDef> {
        self.entries.iter().find(|e| e.pin == Some(pin))
    }

    pub fn lookup_by_description(&self, description: &str) -> Option<&SignalDef> {
        let d = description.trim();
        self.entries.iter().find(|e| e.description.eq_ignore_ascii_case(d))
    }

    /// Resolves a pin name (`RA1`) or a description, case-insensitively.
    pub fn resolve(&self, reference: &str) -> Option<&SignalDef> {
        match reference.parse::<PinId>() {
            Ok(pin) => self.lookup_by_pin(pin),
            Err(_) => self.lookup_by_description(reference),
        }
    }

    pub fn is_reserved(&self, pin: PinId) -> bool {
        self.reserved.iter().any(|r| r.pin == pin)
    }

    /// Pinned digital inputs in table order.
    pub fn inputs(&self) -> impl Iterator<Item = &SignalDef> {
        self.entries.iter().filter(|e| e.direction == Direction::DigitalIn && e.pin.is_some())
    }

    /// Pinned digital outputs in table order.
    pub fn outputs(&self) -> impl Iterator<Item = &SignalDef> {
        self.entries.iter().filter(|e| e.direction == Direction::DigitalOut && e.pin.is_some())
    }

    /// Every output pin, named or reserved, sorted.
    pub fn output_pins(&self) -> Vec<PinId> {
        let mut pins: Vec<PinId> =
            self.outputs().filter_map(|e| e.pin).chain(self.reserved.iter().map(|r| r.pin)).collect();
        pins.sort();
        pins
    }

    /// Every pin the map claims, sorted.
    pub fn mapped_pins(&self) -> Vec<PinId> {
        let mut pins: Vec<PinId> =
            self.entries.iter().filter_map(|e| e.pin).chain(self.reserved.iter().map(|r| r.pin)).collect();
        pins.sort();
        pins
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_map(self)
    }
}

fn entry_name(e: &SignalDef) -> String {
    format!("{} {}", e.signal_no, e.description)
}

pub fn lookup_by_pin(map: &SignalMap, pin: PinId) -> Option<&SignalDef> {
    map.lookup_by_pin(pin)
}

/// Checks every map invariant; an empty result means the map is valid.
pub fn validate_map(map: &SignalMap) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_pins: Vec<PinId> = Vec::new();
    let mut seen_chars: Vec<u8> = Vec::new();

    for e in &map.entries {
        let name = || entry_name(e);
        match e.direction {
            Direction::DigitalIn => {
                if e.kind != SignalKind::Indicator {
                    out.push(Violation { entry: name(), rule: Rule::InputNotIndicator });
                }
                if e.color == Color::None {
                    out.push(Violation { entry: name(), rule: Rule::InputWithoutColor });
                }
                if let Some(pin) = e.pin.filter(|p| !is_input_pin(*p)) {
                    out.push(Violation { entry: name(), rule: Rule::InputPinOutOfRange(pin) });
                }
            }
            Direction::DigitalOut => {
                if e.color != Color::None {
                    out.push(Violation { entry: name(), rule: Rule::ColorOnOutput });
                }
                if e.kind == SignalKind::Indicator {
                    out.push(Violation { entry: name(), rule: Rule::OutputIsIndicator });
                }
                if let Some(pin) = e.pin.filter(|p| !is_output_pin(*p)) {
                    out.push(Violation { entry: name(), rule: Rule::OutputPinOutOfRange(pin) });
                }
            }
        }
        if e.fault_class.is_some() && !e.is_fault() {
            out.push(Violation { entry: name(), rule: Rule::FaultClassOnNonFault });
        }
        if let Some(pin) = e.pin {
            if seen_pins.contains(&pin) {
                out.push(Violation { entry: name(), rule: Rule::DuplicatePin(pin) });
            }
            seen_pins.push(pin);
        }
        if let Some(c) = e.proto_char {
            if seen_chars.contains(&c) {
                out.push(Violation { entry: name(), rule: Rule::DuplicateChar(c) });
            }
            seen_chars.push(c);
        }
    }

    for r in &map.reserved {
        let name = || format!("{} (reserved)", r.signal_no);
        if !is_output_pin(r.pin) {
            out.push(Violation { entry: name(), rule: Rule::OutputPinOutOfRange(r.pin) });
        }
        if seen_pins.contains(&r.pin) {
            out.push(Violation { entry: name(), rule: Rule::DuplicatePin(r.pin) });
        }
        seen_pins.push(r.pin);
    }

    let inputs = map.inputs().count();
    if inputs != INPUT_COUNT {
        out.push(Violation { entry: "map".to_string(), rule: Rule::InputCount { found: inputs } });
    }
    if seen_pins.len() > MAX_PINS {
        out.push(Violation { entry: "map".to_string(), rule: Rule::TooManyPins { found: seen_pins.len() } });
    }
    out
}

pub const DEFAULT_MAP_VERSION: &str = "grs-panel-1";

/// The panel's 15 indicator inputs, 11 named outputs, 4 reserved output pins
/// and the pinless signals known only by their panel designation.
type Row = (&'static str, PinId, &'static str, Indication, Direction, &'static str, Option<FaultClass>);

pub fn build_default_map() -> SignalMap {
    use Direction::{DigitalIn as In, DigitalOut as Out};
    use FaultClass::{Alarm, Trip};
    use Indication::*;

    let pinned: [Row; 26] = [
        ("1", PinId::ra(0), "LED1", Fault, In, "CIRCULATION PUMP OVERLOAD", Some(Trip)),
        ("2", PinId::ra(1), "LED2", RunOk, In, "CIRCULATION PUMP IN OPERATION", None),
        ("3", PinId::ra(2), "LED4A", Run, In, "IGNITION GAS", None),
        ("4", PinId::ra(3), "LED4B", Fault, In, "LEAKAGE ALARM GAS VALVE", Some(Trip)),
        ("5", PinId::ra(4), "LED4", Fault, In, "BURNER MOTOR OVERLOAD", Some(Trip)),
        ("6", PinId::ra(5), "LED5", Run, In, "BURNER START", None),
        ("7", PinId::rb(0), "LED6", Fault, In, "BURNER DISTURB", Some(Trip)),
        ("8", PinId::rb(1), "LED7", Run, In, "BURNER IN OPERATION", None),
        ("9", PinId::rb(2), "LED15", Fault, In, "LSA-00EKT21CL081", Some(Alarm)),
        ("10", PinId::rb(3), "LED16", Fault, In, "PSA-00EKT21CP083", Some(Alarm)),
        ("11", PinId::rb(4), "LED17", Fault, In, "PSA+00EKT21CP082", Some(Alarm)),
        ("12", PinId::rb(5), "LED18", Fault, In, "SAFETY CIRCUIT BURNER CONTROL", Some(Trip)),
        ("13", PinId::rb(6), "LED20", Fault, In, "LOW GAS PRESSURE", Some(Alarm)),
        ("14", PinId::rb(7), "LED21", Fault, In, "TS+00EKT21CT081", Some(Trip)),
        ("15", PinId::re(0), "LED22", Fault, In, "TA+00EKT21CT082", Some(Trip)),
        ("16", PinId::rc(0), "SWITCH3", Selector, Out, "SELECTOR SWITCH LOCAL/REMOTE", None),
        ("18", PinId::rc(2), "Button8", Start, Out, "BURNER START LOCAL", None),
        ("19", PinId::rc(3), "Button9", Stop, Out, "BURNER STOP LOCAL", None),
        ("20", PinId::rc(4), "Button10", Reset, Out, "RESET BURNER CONTROL", None),
        ("21", PinId::rc(5), "SWITCH11", Selector, Out, "BURNER OPERATION LOCAL REMOTE", None),
        ("23", PinId::rc(7), "Button13", Test, Out, "TEST FLAME DETECTOR", None),
        ("24", PinId::rd(0), "SWITCH14", Selector, Out, "BURNER OPERATION MODE", None),
        ("26", PinId::rd(2), "Button19", Reset, Out, "ALARM RECEIPT", None),
        ("28", PinId::rd(4), "Button23", Test, Out, "TEST TA+00EKT21CT082", None),
        ("29", PinId::rd(5), "Button25", Test, Out, "LAMP TEST", None),
        ("30", PinId::rd(6), "SWITCH26", EmergencyStop, Out, "EMERGENCY STOP", None),
    ];

    let pinless: [(&str, &str, Indication, Direction, &str); 6] = [
        ("T2-3", "", Selector, Out, "CIRCULATION PUMP SELECTOR SWITCH"),
        ("T2-12", "N1", Selector, Out, "TEMPERATURE CONTROL"),
        ("T2-27", "Q1", Selector, Out, "MAIN SWITCH"),
        ("T2-28", "S1", Selector, Out, "THERMOSTAT (INSIDE DOOR)"),
        ("T2-29", "M1", Event, In, "SWITCHBOARD FAN + AIR INLET"),
        ("T2-30", "", Event, In, "AIR OUTLET FILTER"),
    ];

    let mut entries: Vec<SignalDef> = pinned
        .iter()
        .map(|&(no, pin, label, ind, dir, desc, class)| {
            let mut def = SignalDef::new(no, Some(pin), label, ind, dir, desc);
            def.fault_class = class;
            def
        })
        .collect();
    entries.extend(pinless.iter().map(|&(no, label, ind, dir, desc)| SignalDef::new(no, None, label, ind, dir, desc)));

    let reserved = [("17", PinId::rc(1)), ("22", PinId::rc(6)), ("25", PinId::rd(1)), ("27", PinId::rd(3))]
        .iter()
        .map(|&(no, pin)| ReservedPin { signal_no: no.into(), pin })
        .collect();

    let mut map = SignalMap { version: DEFAULT_MAP_VERSION.into(), entries, reserved };
    let codebook = crate::codec::generate_codebook(&map).expect("default map fits the printable alphabet");
    codebook.annotate(&mut map);
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_rows() {
        let map = build_default_map();
        let ra0 = map.lookup_by_pin(PinId::ra(0)).unwrap();
        assert_eq!(ra0.direction, Direction::DigitalIn);
        assert_eq!(ra0.description, "CIRCULATION PUMP OVERLOAD");
        assert_eq!(ra0.color, Color::Red);

        let rc2 = map.lookup_by_pin(PinId::rc(2)).unwrap();
        assert_eq!(rc2.direction, Direction::DigitalOut);
        assert_eq!(rc2.kind, SignalKind::PushButton);
        assert_eq!(rc2.description, "BURNER START LOCAL");

        assert_eq!(map.inputs().count(), 15);
        assert_eq!(map.outputs().count(), 11);
        assert_eq!(map.reserved.len(), 4);
        assert_eq!(map.mapped_pins().len(), 30);
        assert_eq!(map.output_pins().len(), 15);
    }

    #[test]
    fn lookup_edges() {
        let map = build_default_map();
        let rb0 = map.lookup_by_pin(PinId::rb(0)).unwrap();
        assert_eq!(rb0.description, "BURNER DISTURB");
        assert_eq!(rb0.indication, Indication::Fault);
        assert_eq!(rb0.color, Color::Red);
        assert!(map.lookup_by_pin(PinId::rc(1)).is_none());
        assert!(map.is_reserved(PinId::rc(1)));
        assert!(map.lookup_by_pin(PinId::re(7)).is_none());
        assert_eq!(map.resolve("ra1").unwrap().description, "CIRCULATION PUMP IN OPERATION");
        assert_eq!(map.resolve("burner start local").unwrap().pin, Some(PinId::rc(2)));
    }

    #[test]
    fn default_map_is_valid() {
        assert_eq!(validate_map(&build_default_map()), Vec::new());
    }

    #[test]
    fn duplicate_pin_is_reported() {
        let mut map = build_default_map();
        let idx = map.entries.iter().position(|e| e.pin == Some(PinId::ra(1))).unwrap();
        map.entries[idx].pin = Some(PinId::ra(0));
        let v = validate_map(&map);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::DuplicatePin(PinId::ra(0)));
    }

    #[test]
    fn colored_output_is_reported() {
        let mut map = build_default_map();
        let idx = map.entries.iter().position(|e| e.pin == Some(PinId::rc(2))).unwrap();
        map.entries[idx].color = Color::Green;
        let v = validate_map(&map);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::ColorOnOutput);
        assert!(v[0].entry.contains("BURNER START LOCAL"));
    }

    #[test]
    fn direction_partition_by_exhaustive_scan() {
        let map = build_default_map();
        for pin in PinId::all() {
            match map.lookup_by_pin(pin) {
                Some(e) if e.direction == Direction::DigitalIn => assert!(is_input_pin(pin)),
                Some(_) => assert!(is_output_pin(pin)),
                None => {}
            }
        }
        for e in &map.entries {
            if let Some(pin) = e.pin {
                assert_eq!(map.lookup_by_pin(pin), Some(e));
            }
        }
    }

    #[test]
    fn lamp_colors_follow_indication() {
        let map = build_default_map();
        let color = |d: &str| map.lookup_by_description(d).unwrap().color;
        assert_eq!(color("CIRCULATION PUMP IN OPERATION"), Color::Green);
        assert_eq!(color("IGNITION GAS"), Color::Yellow);
        assert_eq!(color("BURNER START"), Color::Yellow);
        assert_eq!(color("LOW GAS PRESSURE"), Color::Red);
    }
}
