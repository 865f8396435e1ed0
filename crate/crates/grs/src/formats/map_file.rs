//! Plain-text signal map: one pipe-separated row per signal.
//!
//! ```text
//! version grs-panel-1
//! # no | pin | label | indication | type | description | color | class | code
//! 1 | RA0 | LED1 | Fault | DigitalIn | CIRCULATION PUMP OVERLOAD | red | trip | 121
//! 17 | RC1 | RESERVED
//! ```
//!
//! `-` marks an empty cell. `code` is the decimal ASCII value of the
//! protocol character (some assigned characters are not safe to write
//! literally, `|` among them). It is checked against the generated codebook, so an edited map cannot silently disagree with the
//! characters the controller uses.

use std::fmt::Write as _;

use grs_core::codec::generate_codebook;
use grs_core::pin::PinId;
use grs_core::signal_map::{Color, Direction, FaultClass, Indication, ReservedPin, SignalDef, SignalMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `version` line")]
    NoVersion,
    #[error("map is invalid: {0}")]
    Invalid(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> MapFileError {
    MapFileError::Syntax { line, msg: msg.into() }
}

fn cell(s: &str) -> Option<&str> {
    match s.trim() {
        "-" | "" => None,
        v => Some(v),
    }
}

fn color_name(c: Color) -> &'static str {
    match c {
        Color::Green => "green",
        Color::Red => "red",
        Color::Yellow => "yellow",
        Color::None => "-",
    }
}

fn parse_color(s: &str) -> Option<Color> {
    match s.to_ascii_lowercase().as_str() {
        "green" => Some(Color::Green),
        "red" => Some(Color::Red),
        "yellow" => Some(Color::Yellow),
        _ => None,
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::DigitalIn => "DigitalIn",
        Direction::DigitalOut => "DigitalOut",
    }
}

pub fn parse_map(text: &str) -> Result<SignalMap, MapFileError> {
    let mut version = None;
    let mut entries = Vec::new();
    let mut reserved = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("version ") {
            version = Some(v.trim().to_string());
            continue;
        }
        let cols: Vec<&str> = line.split('|').map(str::trim).collect();
        if cols.len() == 3 && cols[2].eq_ignore_ascii_case("RESERVED") {
            let pin: PinId = cols[1].parse().map_err(|e| syntax(n, format!("{e}")))?;
            reserved.push(ReservedPin { signal_no: cols[0].to_string(), pin });
            continue;
        }
        if cols.len() != 9 {
            return Err(syntax(n, format!("expected 9 columns, found {}", cols.len())));
        }
        let pin = match cell(cols[1]) {
            Some(p) => Some(p.parse::<PinId>().map_err(|e| syntax(n, format!("{e}")))?),
            None => None,
        };
        let indication =
            Indication::parse(cols[3]).ok_or_else(|| syntax(n, format!("unknown indication `{}`", cols[3])))?;
        let direction = match cols[4] {
            "DigitalIn" => Direction::DigitalIn,
            "DigitalOut" => Direction::DigitalOut,
            other => return Err(syntax(n, format!("unknown type `{other}`"))),
        };
        let mut def = SignalDef::new(cols[0], pin, cell(cols[2]).unwrap_or(""), indication, direction, cols[5]);
        def.color = match cell(cols[6]) {
            Some(c) => parse_color(c).ok_or_else(|| syntax(n, format!("unknown color `{c}`")))?,
            None => Color::None,
        };
        def.fault_class = match cell(cols[7]).map(str::to_ascii_lowercase).as_deref() {
            None => None,
            Some("trip") => Some(FaultClass::Trip),
            Some("alarm") => Some(FaultClass::Alarm),
            Some(other) => return Err(syntax(n, format!("unknown fault class `{other}`"))),
        };
        def.proto_char = match cell(cols[8]) {
            None => None,
            Some(c) => Some(c.parse::<u8>().map_err(|_| syntax(n, format!("protocol code must be 0-255, got `{c}`")))?),
        };
        entries.push(def);
    }

    let mut map = SignalMap { version: version.ok_or(MapFileError::NoVersion)?, entries, reserved };
    let violations = map.validate();
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(MapFileError::Invalid(msgs.join("; ")));
    }
    let codebook = generate_codebook(&map).map_err(|e| MapFileError::Invalid(e.to_string()))?;
    let declared: Vec<Option<u8>> = map.entries.iter().map(|e| e.proto_char).collect();
    codebook.annotate(&mut map);
    for (def, want) in map.entries.iter().zip(declared) {
        if want.is_some() && want != def.proto_char {
            return Err(MapFileError::Invalid(format!(
                "`{}` declares char {:?} but the codebook assigns {:?}",
                def.description,
                want.map(char::from),
                def.proto_char.map(char::from)
            )));
        }
    }
    Ok(map)
}

pub fn write_map(map: &SignalMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "version {}", map.version);
    out.push_str("# no | pin | label | indication | type | description | color | class | code\n");
    for e in &map.entries {
        let pin = e.pin.map_or("-".to_string(), |p| p.to_string());
        let label = if e.label.is_empty() { "-" } else { &e.label };
        let class = match e.fault_class {
            Some(FaultClass::Trip) => "trip",
            Some(FaultClass::Alarm) => "alarm",
            None => "-",
        };
        let ch = e.proto_char.map_or("-".to_string(), |c| c.to_string());
        let _ = writeln!(
            out,
            "{} | {} | {} | {} | {} | {} | {} | {} | {}",
            e.signal_no,
            pin,
            label,
            e.indication.as_str(),
            direction_name(e.direction),
            e.description,
            color_name(e.color),
            class,
            ch
        );
    }
    for r in &map.reserved {
        let _ = writeln!(out, "{} | {} | RESERVED", r.signal_no, r.pin);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use grs_core::signal_map::build_default_map;

    #[test]
    fn default_map_round_trips() {
        let map = build_default_map();
        let text = write_map(&map);
        assert_eq!(parse_map(&text).unwrap(), map);
    }

    #[test]
    fn wrong_char_is_rejected() {
        let text = write_map(&build_default_map()).replace("| trip | 121", "| trip | 120");
        assert!(matches!(parse_map(&text), Err(MapFileError::Invalid(_))));
    }

    #[test]
    fn reports_line_numbers() {
        let text = "version v\n\n1 | RA0 | LED1 | Fault\n";
        assert_eq!(parse_map(text).unwrap_err(), syntax(3, "expected 9 columns, found 4"));
    }

    #[test]
    fn duplicate_pin_fails_validation() {
        let text = write_map(&build_default_map()).replace("2 | RA1 |", "2 | RA0 |");
        assert!(matches!(parse_map(&text), Err(MapFileError::Invalid(_))));
    }
}
