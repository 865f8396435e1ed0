//! 8N1 asynchronous framing: one start bit, eight data bits LSB first, one
//! stop bit. Line idles high (mark).

use alloc::vec::Vec;

use crate::time::{Span, TICKS_PER_SECOND};

pub const FRAME_BITS: usize = 10;
pub const DEFAULT_BAUD: u32 = 9600;
pub const IDLE_LEVEL: bool = true;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SerialFrame {
    pub data: u8,
    /// start, d0..d7, stop; `true` is a high (mark) level.
    pub bits: [bool; FRAME_BITS],
    pub bit_duration: Span,
}

impl SerialFrame {
    pub fn duration(&self) -> Span {
        Span(self.bit_duration.0 * FRAME_BITS as u64)
    }

    /// Frame bits as a `0`/`1` string in wire order.
    pub fn bit_string(&self) -> [u8; FRAME_BITS] {
        bit_string(&self.bits)
    }
}

pub fn bit_string(bits: &[bool; FRAME_BITS]) -> [u8; FRAME_BITS] {
    let mut out = [b'0'; FRAME_BITS];
    for (o, b) in out.iter_mut().zip(bits) {
        if *b {
            *o = b'1';
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LinkConfigError {
    #[error("baud rate must be positive")]
    ZeroBaud,
    #[error("baud {0} does not give an integral bit time on the virtual clock")]
    UnsupportedBaud(u32),
}

/// How an injected fault mutates a frame on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FaultKind {
    /// Invert the bit at this wire position (0 = start, 9 = stop).
    FlipBit(u8),
    /// Pull the stop bit low.
    DropStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InjectedFault {
    /// 1-based ordinal of the frame on its channel.
    pub frame: u64,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultPlan {
    pub faults: Vec<InjectedFault>,
}

impl FaultPlan {
    pub fn none() -> FaultPlan {
        FaultPlan::default()
    }

    pub fn with(mut self, frame: u64, kind: FaultKind) -> FaultPlan {
        self.faults.push(InjectedFault { frame, kind });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    /// Applies every fault scheduled for `frame_no` to `bits`.
    pub fn apply(&self, frame_no: u64, bits: &mut [bool; FRAME_BITS]) {
        for f in self.faults.iter().filter(|f| f.frame == frame_no) {
            match f.kind {
                FaultKind::FlipBit(i) => {
                    if let Some(b) = bits.get_mut(i as usize) {
                        *b = !*b;
                    }
                }
                FaultKind::DropStop => bits[FRAME_BITS - 1] = false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkConfig {
    pub baud: u32,
    pub propagation_delay: Span,
    pub fault_plan: FaultPlan,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { baud: DEFAULT_BAUD, propagation_delay: Span::ZERO, fault_plan: FaultPlan::none() }
    }
}

impl LinkConfig {
    pub fn new(baud: u32) -> Result<LinkConfig, LinkConfigError> {
        if baud == 0 {
            return Err(LinkConfigError::ZeroBaud);
        }
        if !TICKS_PER_SECOND.is_multiple_of(baud as u64) {
            return Err(LinkConfigError::UnsupportedBaud(baud));
        }
        Ok(LinkConfig { baud, ..LinkConfig::default() })
    }

    pub fn with_propagation(mut self, delay: Span) -> LinkConfig {
        self.propagation_delay = delay;
        self
    }

    pub fn with_faults(mut self, plan: FaultPlan) -> LinkConfig {
        self.fault_plan = plan;
        self
    }

    pub fn bit_duration(&self) -> Span {
        Span(TICKS_PER_SECOND / self.baud as u64)
    }

    pub fn frame_duration(&self) -> Span {
        Span(self.bit_duration().0 * FRAME_BITS as u64)
    }
}

pub fn frame_byte(b: u8, cfg: &LinkConfig) -> SerialFrame {
    let mut bits = [false; FRAME_BITS];
    for (i, bit) in bits[1..9].iter_mut().enumerate() {
        *bit = (b >> i) & 1 == 1;
    }
    bits[FRAME_BITS - 1] = true;
    SerialFrame { data: b, bits, bit_duration: cfg.bit_duration() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FramingError {
    #[error("framing error: missing start bit")]
    MissingStart,
    #[error("framing error: missing stop bit")]
    MissingStop,
    #[error("framing error: expected 10 bits, got {0}")]
    BadLength(usize),
}

pub fn unframe_bits(bits: &[bool]) -> Result<u8, FramingError> {
    if bits.len() != FRAME_BITS {
        return Err(FramingError::BadLength(bits.len()));
    }
    if bits[0] {
        return Err(FramingError::MissingStart);
    }
    if !bits[FRAME_BITS - 1] {
        return Err(FramingError::MissingStop);
    }
    Ok(bits[1..9].iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i)))
}

/// One bit cell of a rendered waveform, relative to the start-bit edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: Span,
    pub end: Span,
    pub level: bool,
}

/// Piecewise-constant line level for one frame. Before `t = 0` and after the
/// last segment the line is idle high.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waveform {
    pub segments: Vec<Segment>,
}

impl Waveform {
    /// Level changes as `(time, new level)`, starting from the idle level.
    pub fn transitions(&self) -> Vec<(Span, bool)> {
        let mut out = Vec::new();
        let mut level = IDLE_LEVEL;
        for s in &self.segments {
            if s.level != level {
                out.push((s.start, s.level));
                level = s.level;
            }
        }
        if level != IDLE_LEVEL {
            if let Some(last) = self.segments.last() {
                out.push((last.end, IDLE_LEVEL));
            }
        }
        out
    }

    /// Maximal runs of equal level within the frame.
    pub fn intervals(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for s in &self.segments {
            match out.last_mut() {
                Some(prev) if prev.level == s.level => prev.end = s.end,
                _ => out.push(*s),
            }
        }
        out
    }

    pub fn level_at(&self, t: Span) -> bool {
        self.segments.iter().find(|s| s.start <= t && t < s.end).map_or(IDLE_LEVEL, |s| s.level)
    }
}

pub fn render_waveform(frame: &SerialFrame) -> Waveform {
    let bit = frame.bit_duration.0;
    let segments = frame
        .bits
        .iter()
        .enumerate()
        .map(|(i, &level)| Segment { start: Span(bit * i as u64), end: Span(bit * (i as u64 + 1)), level })
        .collect();
    Waveform { segments }
}

/// Seven-bit binary rendering of an ASCII code, most significant bit first,
/// as printed in code tables (`'a'` -> `1100001`).
pub fn ascii_binary(b: u8) -> [u8; 7] {
    let mut out = [b'0'; 7];
    for (i, o) in out.iter_mut().enumerate() {
        if (b >> (6 - i)) & 1 == 1 {
            *o = b'1';
        }
    }
    out
}
