//! Simulated point-to-point serial link: two independent unidirectional
//! channels, each with its own UART transmitter and fault plan.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::framing::{frame_byte, unframe_bits, FramingError, LinkConfig, FRAME_BITS};
use crate::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("link closed")]
    Closed,
}

/// Direction of travel on a panel link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LinkDir {
    /// Supervisor to controller (commands).
    Down,
    /// Controller to supervisor (status).
    Up,
}

impl LinkDir {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkDir::Down => "down",
            LinkDir::Up => "up",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub frame_no: u64,
    pub started_at: Instant,
    pub deliver_at: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct InFlight {
    byte: u8,
    frame_no: u64,
    started_at: Instant,
    deliver_at: Instant,
    bits: [bool; FRAME_BITS],
}

/// A frame as observed by the receiving end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Received {
    pub frame_no: u64,
    pub sent_byte: u8,
    pub started_at: Instant,
    pub at: Instant,
    /// Bits as they arrived, after any injected fault.
    pub bits: [bool; FRAME_BITS],
    pub result: Result<u8, FramingError>,
}

#[derive(Debug, Clone)]
pub struct Channel {
    cfg: LinkConfig,
    in_flight: VecDeque<InFlight>,
    line_free_at: Instant,
    frames_sent: u64,
    open: bool,
}

impl Channel {
    pub fn new(cfg: LinkConfig) -> Channel {
        Channel { cfg, in_flight: VecDeque::new(), line_free_at: Instant::ZERO, frames_sent: 0, open: true }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn frames_sent(&self) -> u64 {
        self.frames_sent
    }

    /// Closing drops frames still on the wire.
    pub fn set_open(&mut self, open: bool) {
        self.open = open;
        if !open {
            self.in_flight.clear();
        }
    }

    /// Queues `byte` behind any frame still being shifted out. The frame is
    /// delivered one frame time plus the propagation delay after it starts.
    pub fn transmit(&mut self, now: Instant, byte: u8) -> Result<Transmission, LinkError> {
        if !self.open {
            return Err(LinkError::Closed);
        }
        let frame = frame_byte(byte, &self.cfg);
        let started_at = now.max(self.line_free_at);
        self.line_free_at = started_at + frame.duration();
        let deliver_at = self.line_free_at + self.cfg.propagation_delay;
        self.frames_sent += 1;
        let frame_no = self.frames_sent;
        let mut bits = frame.bits;
        self.cfg.fault_plan.apply(frame_no, &mut bits);
        self.in_flight.push_back(InFlight { byte, frame_no, started_at, deliver_at, bits });
        Ok(Transmission { frame_no, started_at, deliver_at })
    }

    pub fn next_delivery(&self) -> Option<Instant> {
        self.in_flight.front().map(|f| f.deliver_at)
    }

    /// Pops the oldest frame if it has arrived by `until`.
    pub fn pop_due(&mut self, until: Instant) -> Option<Received> {
        if self.in_flight.front()?.deliver_at > until {
            return None;
        }
        let f = self.in_flight.pop_front()?;
        Some(Received {
            frame_no: f.frame_no,
            sent_byte: f.byte,
            started_at: f.started_at,
            at: f.deliver_at,
            bits: f.bits,
            result: unframe_bits(&f.bits),
        })
    }

    pub fn drain_due(&mut self, until: Instant) -> Vec<Received> {
        let mut out = Vec::new();
        while let Some(r) = self.pop_due(until) {
            out.push(r);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SerialLink {
    pub down: Channel,
    pub up: Channel,
}

impl SerialLink {
    pub fn new(cfg: LinkConfig) -> SerialLink {
        SerialLink { down: Channel::new(cfg.clone()), up: Channel::new(cfg) }
    }

    pub fn with_channels(down: LinkConfig, up: LinkConfig) -> SerialLink {
        SerialLink { down: Channel::new(down), up: Channel::new(up) }
    }

    pub fn channel_mut(&mut self, dir: LinkDir) -> &mut Channel {
        match dir {
            LinkDir::Down => &mut self.down,
            LinkDir::Up => &mut self.up,
        }
    }

    pub fn set_open(&mut self, open: bool) {
        self.down.set_open(open);
        self.up.set_open(open);
    }

    pub fn is_open(&self) -> bool {
        self.down.is_open() && self.up.is_open()
    }

    pub fn next_delivery(&self) -> Option<Instant> {
        match (self.down.next_delivery(), self.up.next_delivery()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::{FaultKind, FaultPlan};
    use crate::time::{Span, TICKS_PER_SECOND};

    #[test]
    fn idle_link_delivers_after_one_frame() {
        let mut ch = Channel::new(LinkConfig::default());
        let t0 = Instant(Span::from_millis(5).ticks());
        let tx = ch.transmit(t0, b'a').unwrap();
        assert_eq!(tx.started_at, t0);
        assert_eq!((tx.deliver_at - t0).ticks() * 9600, 10 * TICKS_PER_SECOND);
        assert!(ch.pop_due(Instant(tx.deliver_at.0 - 1)).is_none());
        let r = ch.pop_due(tx.deliver_at).unwrap();
        assert_eq!(r.result, Ok(b'a'));
        assert_eq!(r.at, tx.deliver_at);
    }

    #[test]
    fn back_to_back_frames_queue_fifo() {
        let mut ch = Channel::new(LinkConfig::default());
        let frame = LinkConfig::default().frame_duration();
        let a = ch.transmit(Instant::ZERO, 1).unwrap();
        let b = ch.transmit(Instant::ZERO, 2).unwrap();
        assert_eq!(b.started_at, a.started_at + frame);
        let got: Vec<u8> = ch.drain_due(Instant(u64::MAX)).into_iter().map(|r| r.result.unwrap()).collect();
        assert_eq!(got, [1, 2]);
    }

    #[test]
    fn stop_bit_drop_reaches_receiver() {
        let cfg = LinkConfig::default().with_faults(FaultPlan::none().with(1, FaultKind::DropStop));
        let mut ch = Channel::new(cfg);
        ch.transmit(Instant::ZERO, b'b').unwrap();
        ch.transmit(Instant::ZERO, b'b').unwrap();
        let r = ch.drain_due(Instant(u64::MAX));
        assert_eq!(r[0].result, Err(FramingError::MissingStop));
        assert_eq!(r[1].result, Ok(b'b'));
    }

    #[test]
    fn closed_link_refuses() {
        let mut link = SerialLink::new(LinkConfig::default());
        link.set_open(false);
        assert_eq!(link.down.transmit(Instant::ZERO, b'a'), Err(LinkError::Closed));
    }

    #[test]
    fn propagation_delay_adds() {
        let cfg = LinkConfig::default().with_propagation(Span::from_micros(3));
        let mut ch = Channel::new(cfg.clone());
        let tx = ch.transmit(Instant::ZERO, 0).unwrap();
        assert_eq!(tx.deliver_at - Instant::ZERO, cfg.frame_duration() + Span::from_micros(3));
    }
}
