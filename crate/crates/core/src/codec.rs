//! Single-character protocol between supervisor and controller.
//!
//! Commands travel down the link and select an output action; status
//! characters travel up and report an input edge. Every status signal has an
//! Asserted and a Cleared character. All characters are generated from the
//! signal map, with `a`/`b` (burner start/stop) and `y`/`z` (circulation pump
//! overload / in operation) as fixed anchors.

use alloc::string::String;
use alloc::vec::Vec;

use crate::pin::PinId;
use crate::signal_map::{Indication, SignalKind, SignalMap};

/// First and last character of the printable pool shared by commands and
/// Asserted status characters. Cleared partners sit 0x20 below.
pub const POOL_FIRST: u8 = 0x60;
pub const POOL_LAST: u8 = 0x7E;
pub const CLEARED_OFFSET: u8 = 0x20;

pub const START_CHAR: u8 = b'a';
pub const STOP_CHAR: u8 = b'b';
pub const OVERLOAD_CHAR: u8 = b'y';
pub const RUNNING_CHAR: u8 = b'z';

pub const OVERLOAD_SIGNAL: &str = "CIRCULATION PUMP OVERLOAD";
pub const RUNNING_SIGNAL: &str = "CIRCULATION PUMP IN OPERATION";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pulse {
    Momentary,
    Latching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Edge {
    Asserted,
    Cleared,
}

impl Edge {
    pub fn from_level(level: bool) -> Edge {
        if level {
            Edge::Asserted
        } else {
            Edge::Cleared
        }
    }

    pub fn level(self) -> bool {
        self == Edge::Asserted
    }
}

/// An output action the supervisor can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Momentary press of a push button or emergency stop.
    Press(PinId),
    /// Latch a selector switch to a position.
    Select(PinId, bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandCode {
    pub char: u8,
    pub pin: PinId,
    pub description: String,
    pub pulse: Pulse,
    /// Pin level a latching command sets; always `true` for momentary ones.
    pub level: bool,
}

impl CommandCode {
    pub fn action(&self) -> Action {
        match self.pulse {
            Pulse::Momentary => Action::Press(self.pin),
            Pulse::Latching => Action::Select(self.pin, self.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusCode {
    pub char: u8,
    pub pin: PinId,
    pub description: String,
    pub edge: Edge,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("no command character for {0:?}")]
    UnknownAction(Action),
    #[error("no status character for pin {0}")]
    UnknownSignal(PinId),
    #[error("alphabet exhausted: {needed} characters needed, {available} available")]
    AlphabetExhausted { needed: usize, available: usize },
}

/// A byte outside the alphabet being decoded. Not a fault: the receiver
/// ignores and counts it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Reject {
    #[error("unknown byte 0x{0:02x}")]
    UnknownByte(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    commands: Vec<CommandCode>,
    statuses: Vec<StatusCode>,
}

/// One row of a codebook dump: character, decimal code, signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpRow {
    pub char: u8,
    pub signal: String,
}

struct Pool {
    used: [bool; 256],
}

impl Pool {
    fn take(&mut self, c: u8) {
        self.used[c as usize] = true;
    }

    fn is_free(&self, c: u8) -> bool {
        !self.used[c as usize]
    }

    /// Next free character scanning up from `from`, wrapping within the pool.
    fn next_free(&self, from: u8) -> Option<u8> {
        let span = (POOL_LAST - POOL_FIRST + 1) as usize;
        let offset = from.clamp(POOL_FIRST, POOL_LAST) - POOL_FIRST;
        (0..span).map(|k| POOL_FIRST + ((offset as usize + k) % span) as u8).find(|&c| self.is_free(c))
    }
}

pub fn generate_codebook(map: &SignalMap) -> Result<Codebook, CodecError> {
    struct Slot {
        pin: PinId,
        description: String,
        pulse: Pulse,
        level: bool,
        anchor: Option<u8>,
    }

    let mut slots: Vec<Slot> = Vec::new();
    let mut start_seen = false;
    let mut stop_seen = false;
    for e in map.outputs() {
        let pin = e.pin.expect("outputs() yields pinned entries");
        let anchor = match e.indication {
            Indication::Start if !start_seen => {
                start_seen = true;
                Some(START_CHAR)
            }
            Indication::Stop if !stop_seen => {
                stop_seen = true;
                Some(STOP_CHAR)
            }
            _ => None,
        };
        if e.kind == SignalKind::SelectorSwitch {
            for level in [true, false] {
                slots.push(Slot {
                    pin,
                    description: e.description.clone(),
                    pulse: Pulse::Latching,
                    level,
                    anchor: None,
                });
            }
        } else {
            slots.push(Slot { pin, description: e.description.clone(), pulse: Pulse::Momentary, level: true, anchor });
        }
    }

    let inputs: Vec<_> = map.inputs().collect();
    let status_anchor = |desc: &str| {
        if desc.eq_ignore_ascii_case(OVERLOAD_SIGNAL) {
            Some(OVERLOAD_CHAR)
        } else if desc.eq_ignore_ascii_case(RUNNING_SIGNAL) {
            Some(RUNNING_CHAR)
        } else {
            None
        }
    };

    let available = (POOL_LAST - POOL_FIRST + 1) as usize;
    let needed = slots.len() + inputs.len();
    if needed > available {
        return Err(CodecError::AlphabetExhausted { needed, available });
    }

    let mut pool = Pool { used: [false; 256] };
    for s in &slots {
        if let Some(c) = s.anchor {
            pool.take(c);
        }
    }
    for e in &inputs {
        if let Some(c) = status_anchor(&e.description) {
            pool.take(c);
        }
    }

    let mut commands = Vec::with_capacity(slots.len());
    for s in &slots {
        let char = match s.anchor {
            Some(c) => c,
            None => {
                let c = pool.next_free(START_CHAR).ok_or(CodecError::AlphabetExhausted { needed, available })?;
                pool.take(c);
                c
            }
        };
        commands.push(CommandCode {
            char,
            pin: s.pin,
            description: s.description.clone(),
            pulse: s.pulse,
            level: s.level,
        });
    }

    let mut statuses = Vec::with_capacity(inputs.len() * 2);
    for e in &inputs {
        let pin = e.pin.expect("inputs() yields pinned entries");
        let asserted = match status_anchor(&e.description) {
            Some(c) => c,
            None => {
                let c = pool.next_free(RUNNING_CHAR + 1).ok_or(CodecError::AlphabetExhausted { needed, available })?;
                pool.take(c);
                c
            }
        };
        for (char, edge) in [(asserted, Edge::Asserted), (asserted - CLEARED_OFFSET, Edge::Cleared)] {
            statuses.push(StatusCode { char, pin, description: e.description.clone(), edge });
        }
    }

    Ok(Codebook { commands, statuses })
}

impl Codebook {
    pub fn commands(&self) -> &[CommandCode] {
        &self.commands
    }

    pub fn statuses(&self) -> &[StatusCode] {
        &self.statuses
    }

    pub fn encode_command(&self, action: Action) -> Result<u8, CodecError> {
        self.commands.iter().find(|c| c.action() == action).map(|c| c.char).ok_or(CodecError::UnknownAction(action))
    }

    pub fn decode_command(&self, b: u8) -> Result<&CommandCode, Reject> {
        self.commands.iter().find(|c| c.char == b).ok_or(Reject::UnknownByte(b))
    }

    pub fn encode_status(&self, pin: PinId, edge: Edge) -> Result<u8, CodecError> {
        self.statuses
            .iter()
            .find(|s| s.pin == pin && s.edge == edge)
            .map(|s| s.char)
            .ok_or(CodecError::UnknownSignal(pin))
    }

    pub fn decode_status(&self, b: u8) -> Result<&StatusCode, Reject> {
        self.statuses.iter().find(|s| s.char == b).ok_or(Reject::UnknownByte(b))
    }

    pub fn command_alphabet(&self) -> Vec<u8> {
        self.commands.iter().map(|c| c.char).collect()
    }

    pub fn status_alphabet(&self) -> Vec<u8> {
        self.statuses.iter().map(|s| s.char).collect()
    }

    /// Writes each pinned entry's primary character into the map: the
    /// command character for outputs (position "on" for selectors) and the
    /// Asserted character for inputs.
    pub fn annotate(&self, map: &mut SignalMap) {
        for e in map.entries.iter_mut() {
            let Some(pin) = e.pin else { continue };
            e.proto_char =
                self.commands.iter().find(|c| c.pin == pin && c.level).map(|c| c.char).or_else(|| {
                    self.statuses.iter().find(|s| s.pin == pin && s.edge == Edge::Asserted).map(|s| s.char)
                });
        }
    }

    /// Rows for a codebook listing. Anchored characters come first, in
    /// `a`, `b`, `y`, `z` order, then remaining commands, then remaining
    /// status characters, each in character order.
    pub fn dump_rows(&self) -> Vec<DumpRow> {
        let anchors = [START_CHAR, STOP_CHAR, OVERLOAD_CHAR, RUNNING_CHAR];
        let mut cmd: Vec<DumpRow> = self
            .commands
            .iter()
            .map(|c| {
                let mut signal = c.description.clone();
                if c.pulse == Pulse::Latching {
                    signal.push_str(if c.level { " (on)" } else { " (off)" });
                }
                DumpRow { char: c.char, signal }
            })
            .collect();
        let mut st: Vec<DumpRow> = self
            .statuses
            .iter()
            .map(|s| {
                let mut signal = s.description.clone();
                signal.push_str(match s.edge {
                    Edge::Asserted => " (asserted)",
                    Edge::Cleared => " (cleared)",
                });
                DumpRow { char: s.char, signal }
            })
            .collect();
        cmd.sort_by_key(|r| r.char);
        st.sort_by_key(|r| (r.char < POOL_FIRST, r.char));

        let mut rows = Vec::with_capacity(cmd.len() + st.len());
        for a in anchors {
            if let Some(i) = cmd.iter().position(|r| r.char == a) {
                rows.push(cmd.remove(i));
            } else if let Some(i) = st.iter().position(|r| r.char == a) {
                rows.push(st.remove(i));
            }
        }
        rows.extend(cmd);
        rows.extend(st);
        rows
    }
}
