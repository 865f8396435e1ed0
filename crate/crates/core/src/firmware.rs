//! Controller node: a transparent bridge between serial characters and pins.
//!
//! Command characters received on the link actuate output pins; debounced
//! edges on input pins are reported as status characters. No plant logic
//! lives here.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::codec::{Codebook, Edge, Pulse, Reject};
use crate::framing::FramingError;
use crate::pin::PinId;
use crate::signal_map::SignalMap;
use crate::time::{Instant, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmwareConfig {
    /// High time of a momentary output.
    pub pulse: Span,
    /// Minimum spacing between two reported edges on one input pin.
    pub debounce: Span,
    /// Main loop period.
    pub cycle: Span,
    /// Received characters handled per loop pass.
    pub max_rx_per_cycle: usize,
}

impl Default for FirmwareConfig {
    fn default() -> Self {
        FirmwareConfig {
            pulse: Span::from_millis(200),
            debounce: Span::from_millis(50),
            cycle: Span::from_millis(10),
            max_rx_per_cycle: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counters {
    pub bytes_rx: u64,
    pub bytes_tx: u64,
    pub unknown_bytes: u64,
    pub framing_errors: u64,
    pub edges: u64,
    pub actuations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PinState {
    pub level: bool,
    pub last_change: Option<Instant>,
}

/// Level and last change time of every mapped pin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinImage {
    pins: BTreeMap<PinId, PinState>,
}

impl PinImage {
    pub fn new(map: &SignalMap) -> PinImage {
        let pins = map.mapped_pins().into_iter().map(|p| (p, PinState { level: false, last_change: None })).collect();
        PinImage { pins }
    }

    pub fn get(&self, pin: PinId) -> Option<PinState> {
        self.pins.get(&pin).copied()
    }

    pub fn level(&self, pin: PinId) -> bool {
        self.pins.get(&pin).is_some_and(|s| s.level)
    }

    pub fn pins(&self) -> impl Iterator<Item = PinId> + '_ {
        self.pins.keys().copied()
    }

    fn set(&mut self, pin: PinId, level: bool, at: Instant) -> bool {
        match self.pins.get_mut(&pin) {
            Some(s) if s.level != level => {
                s.level = level;
                s.last_change = Some(at);
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Actuation {
    pub pin: PinId,
    pub level: bool,
    pub at: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOutcome {
    Actuated(Actuation),
    Ignored(Reject),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FirmwareError {
    #[error("pin {0} is not a mapped input")]
    UnmappedPin(PinId),
}

/// Pins as seen from the controller: inputs are sampled, outputs driven.
pub trait FieldIo {
    fn read_input(&self, pin: PinId) -> bool;
    fn write_output(&mut self, act: Actuation);
}

#[derive(Debug, Clone)]
pub struct Firmware {
    cfg: FirmwareConfig,
    codebook: Codebook,
    inputs: Vec<PinId>,
    image: PinImage,
    rx: VecDeque<Result<u8, FramingError>>,
    tx: VecDeque<u8>,
    pulses: BTreeMap<PinId, Instant>,
    counters: Counters,
}

impl Firmware {
    pub fn new(map: &SignalMap, codebook: Codebook, cfg: FirmwareConfig) -> Firmware {
        Firmware {
            cfg,
            codebook,
            inputs: map.inputs().filter_map(|e| e.pin).collect(),
            image: PinImage::new(map),
            rx: VecDeque::new(),
            tx: VecDeque::new(),
            pulses: BTreeMap::new(),
            counters: Counters::default(),
        }
    }

    pub fn config(&self) -> &FirmwareConfig {
        &self.cfg
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn pin_image(&self) -> &PinImage {
        &self.image
    }

    pub fn rx_pending(&self) -> usize {
        self.rx.len()
    }

    /// Queues a received frame for the next loop pass.
    pub fn receive(&mut self, frame: Result<u8, FramingError>) {
        self.rx.push_back(frame);
    }

    /// Decodes one received character. Momentary commands raise their pin
    /// for `pulse`; latching commands set the level. Anything else is
    /// ignored and counted.
    pub fn on_serial_byte(&mut self, now: Instant, b: u8) -> ByteOutcome {
        self.counters.bytes_rx += 1;
        let cmd = match self.codebook.decode_command(b) {
            Ok(c) => c,
            Err(r) => {
                self.counters.unknown_bytes += 1;
                return ByteOutcome::Ignored(r);
            }
        };
        let (pin, level) = (cmd.pin, cmd.level);
        if cmd.pulse == Pulse::Momentary {
            self.pulses.insert(pin, now + self.cfg.pulse);
        }
        self.image.set(pin, level, now);
        self.counters.actuations += 1;
        ByteOutcome::Actuated(Actuation { pin, level, at: now })
    }

    /// Encodes an input edge and queues the status character for sending.
    pub fn on_input_edge(&mut self, now: Instant, pin: PinId, level: bool) -> Result<u8, FirmwareError> {
        if !self.inputs.contains(&pin) {
            return Err(FirmwareError::UnmappedPin(pin));
        }
        let b =
            self.codebook.encode_status(pin, Edge::from_level(level)).map_err(|_| FirmwareError::UnmappedPin(pin))?;
        self.image.set(pin, level, now);
        self.tx.push_back(b);
        self.counters.edges += 1;
        self.counters.bytes_tx += 1;
        Ok(b)
    }

    /// One pass of the main loop: end due pulses, act on queued characters,
    /// sample inputs. Returns the status characters to send, in edge order.
    pub fn run_cycle(&mut self, now: Instant, io: &mut impl FieldIo) -> Vec<u8> {
        let mut due: Vec<(Instant, PinId)> =
            self.pulses.iter().filter(|(_, &until)| until <= now).map(|(&pin, &until)| (until, pin)).collect();
        due.sort();
        for (until, pin) in due {
            self.pulses.remove(&pin);
            self.image.set(pin, false, until);
            io.write_output(Actuation { pin, level: false, at: until });
        }

        for _ in 0..self.cfg.max_rx_per_cycle {
            let Some(frame) = self.rx.pop_front() else { break };
            match frame {
                Ok(b) => {
                    if let ByteOutcome::Actuated(act) = self.on_serial_byte(now, b) {
                        io.write_output(act);
                    }
                }
                Err(_) => self.counters.framing_errors += 1,
            }
        }

        for i in 0..self.inputs.len() {
            let pin = self.inputs[i];
            let raw = io.read_input(pin);
            let Some(state) = self.image.get(pin) else { continue };
            let settled = state.last_change.is_none_or(|t| now.since(t) >= self.cfg.debounce);
            if raw != state.level && settled {
                // pin is in `inputs` and the codebook, so this cannot fail
                let _ = self.on_input_edge(now, pin, raw);
            }
        }

        self.tx.drain(..).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::generate_codebook;
    use crate::signal_map::build_default_map;
    use alloc::vec;

    #[derive(Default)]
    struct Bench {
        inputs: BTreeMap<PinId, bool>,
        writes: Vec<Actuation>,
    }

    impl FieldIo for Bench {
        fn read_input(&self, pin: PinId) -> bool {
            self.inputs.get(&pin).copied().unwrap_or(false)
        }
        fn write_output(&mut self, act: Actuation) {
            self.writes.push(act);
        }
    }

    fn fw() -> Firmware {
        let map = build_default_map();
        let cb = generate_codebook(&map).unwrap();
        Firmware::new(&map, cb, FirmwareConfig::default())
    }

    fn at_ms(ms: u64) -> Instant {
        Instant(Span::from_millis(ms).ticks())
    }

    #[test]
    fn start_and_stop_characters_pulse_their_pins() {
        let mut f = fw();
        assert_eq!(
            f.on_serial_byte(at_ms(0), b'a'),
            ByteOutcome::Actuated(Actuation { pin: PinId::rc(2), level: true, at: at_ms(0) })
        );
        assert_eq!(
            f.on_serial_byte(at_ms(0), b'b'),
            ByteOutcome::Actuated(Actuation { pin: PinId::rc(3), level: true, at: at_ms(0) })
        );
    }

    #[test]
    fn unknown_byte_is_counted_and_changes_nothing() {
        let mut f = fw();
        let before = f.pin_image().clone();
        assert_eq!(f.on_serial_byte(at_ms(0), 0x05), ByteOutcome::Ignored(Reject::UnknownByte(0x05)));
        assert_eq!(f.counters().unknown_bytes, 1);
        assert_eq!(f.pin_image(), &before);
    }

    #[test]
    fn input_edges_become_status_characters() {
        let mut f = fw();
        assert_eq!(f.on_input_edge(at_ms(0), PinId::ra(0), true), Ok(b'y'));
        assert_eq!(f.on_input_edge(at_ms(0), PinId::ra(1), true), Ok(b'z'));
        assert_eq!(f.on_input_edge(at_ms(100), PinId::ra(0), false), Ok(b'Y'));
        assert_eq!(f.on_input_edge(at_ms(0), PinId::rc(2), true), Err(FirmwareError::UnmappedPin(PinId::rc(2))));
    }

    #[test]
    fn idle_cycle_emits_nothing() {
        let mut f = fw();
        let mut io = Bench::default();
        assert!(f.run_cycle(at_ms(0), &mut io).is_empty());
        assert!(io.writes.is_empty());
    }

    #[test]
    fn two_edges_in_one_cycle_keep_order() {
        let mut f = fw();
        let mut io = Bench::default();
        io.inputs.insert(PinId::ra(5), true);
        io.inputs.insert(PinId::ra(2), true);
        assert_eq!(f.run_cycle(at_ms(0), &mut io), vec![b'{', b'~']);
    }

    #[test]
    fn pulse_is_exactly_pulse_width() {
        let mut f = fw();
        let mut io = Bench::default();
        f.receive(Ok(b'a'));
        let mut t = 0;
        while t <= 400 {
            f.run_cycle(at_ms(t), &mut io);
            t += 10;
        }
        assert_eq!(io.writes.len(), 2);
        assert_eq!(io.writes[1].at - io.writes[0].at, Span::from_millis(200));
        assert!(!io.writes[1].level);
    }

    #[test]
    fn latching_is_idempotent() {
        let mut f = fw();
        f.on_serial_byte(at_ms(0), b'c');
        let once = f.pin_image().get(PinId::rc(0)).unwrap();
        f.on_serial_byte(at_ms(10), b'c');
        assert_eq!(f.pin_image().get(PinId::rc(0)).unwrap(), once);
        assert!(once.level);
        f.on_serial_byte(at_ms(20), b'd');
        assert!(!f.pin_image().level(PinId::rc(0)));
    }

    #[test]
    fn glitch_shorter_than_debounce_is_coalesced() {
        let mut f = fw();
        let mut io = Bench::default();
        io.inputs.insert(PinId::ra(1), true);
        assert_eq!(f.run_cycle(at_ms(0), &mut io), vec![b'z']);
        io.inputs.insert(PinId::ra(1), false);
        assert!(f.run_cycle(at_ms(10), &mut io).is_empty());
        io.inputs.insert(PinId::ra(1), true);
        assert!(f.run_cycle(at_ms(20), &mut io).is_empty());
        assert!(f.run_cycle(at_ms(60), &mut io).is_empty());
        assert_eq!(f.counters().edges, 1);
    }

    #[test]
    fn pin_image_covers_mapped_pins() {
        let f = fw();
        assert_eq!(f.pin_image().pins().count(), 30);
    }
}
