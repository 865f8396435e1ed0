//! Panel-side simulation: plant, controller and serial link advanced
//! together on one virtual clock.

use alloc::vec::Vec;

use crate::codec::{generate_codebook, Codebook, CodecError};
use crate::firmware::{Actuation, Counters, FieldIo, Firmware, FirmwareConfig};
use crate::framing::LinkConfig;
use crate::link::{LinkDir, LinkError, Received, SerialLink, Transmission};
use crate::pin::PinId;
use crate::plant::{
    set_setpoint, BoilerState, Outcome, PanelSnapshot, PlantError, PlantModel, PlantParams, PlantSetupError, Transition,
};
use crate::signal_map::SignalMap;
use crate::time::{Instant, Span};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationConfig {
    pub params: PlantParams,
    pub firmware: FirmwareConfig,
    pub down: LinkConfig,
    pub up: LinkConfig,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StationError {
    #[error(transparent)]
    Plant(#[from] PlantSetupError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// A frame that reached either end of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub dir: LinkDir,
    pub frame: Received,
}

/// Plant response to an output the controller drove.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationRecord {
    pub actuation: Actuation,
    pub outcome: Outcome,
}

struct PlantIo<'a> {
    model: &'a PlantModel,
    state: &'a mut BoilerState,
    log: &'a mut Vec<ActuationRecord>,
}

impl FieldIo for PlantIo<'_> {
    fn read_input(&self, pin: PinId) -> bool {
        self.model.input_level(self.state, pin)
    }

    fn write_output(&mut self, act: Actuation) {
        if let Ok(t) = self.model.apply_output(self.state, act.pin, act.level) {
            *self.state = t.state;
            self.log.push(ActuationRecord { actuation: act, outcome: t.outcome });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Due {
    Down,
    Up,
    Plant,
    Firmware,
}

pub struct Station {
    map: SignalMap,
    codebook: Codebook,
    model: PlantModel,
    state: BoilerState,
    firmware: Firmware,
    link: SerialLink,
    now: Instant,
    plant_tick: Span,
    next_plant: Instant,
    next_fw: Instant,
    uplink: Vec<Received>,
    trace: Vec<FrameRecord>,
    actuations: Vec<ActuationRecord>,
    dropped_tx: u64,
}

impl Station {
    pub fn new(map: SignalMap, cfg: StationConfig) -> Result<Station, StationError> {
        let model = PlantModel::new(cfg.params, &map)?;
        let codebook = generate_codebook(&map)?;
        let firmware = Firmware::new(&map, codebook.clone(), cfg.firmware);
        let state = model.initial_state();
        let plant_tick = Span::from_secs_f64(model.params.dt);
        Ok(Station {
            map,
            codebook,
            model,
            state,
            firmware,
            link: SerialLink::with_channels(cfg.down, cfg.up),
            now: Instant::ZERO,
            plant_tick,
            next_plant: Instant::ZERO + plant_tick,
            next_fw: Instant::ZERO,
            uplink: Vec::new(),
            trace: Vec::new(),
            actuations: Vec::new(),
            dropped_tx: 0,
        })
    }

    pub fn now(&self) -> Instant {
        self.now
    }

    pub fn map(&self) -> &SignalMap {
        &self.map
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn model(&self) -> &PlantModel {
        &self.model
    }

    pub fn state(&self) -> &BoilerState {
        &self.state
    }

    pub fn firmware(&self) -> &Firmware {
        &self.firmware
    }

    pub fn counters(&self) -> Counters {
        self.firmware.counters()
    }

    /// Status characters the controller could not send because the link
    /// was closed.
    pub fn dropped_tx(&self) -> u64 {
        self.dropped_tx
    }

    pub fn snapshot(&self) -> PanelSnapshot {
        self.model.snapshot(&self.state, &self.map)
    }

    pub fn link_open(&self) -> bool {
        self.link.is_open()
    }

    pub fn set_link_open(&mut self, open: bool) {
        self.link.set_open(open);
    }

    /// Sends a command character from the supervisor end at the current time.
    pub fn send_down(&mut self, byte: u8) -> Result<Transmission, LinkError> {
        self.link.down.transmit(self.now, byte)
    }

    /// Drives a field input (fault cause or pump status) at the current time.
    pub fn drive_field_input(&mut self, pin: PinId, level: bool) -> Result<Transition, PlantError> {
        let t = self.model.drive_field_input(&self.state, pin, level)?;
        self.state = t.state.clone();
        Ok(t)
    }

    /// Changes the local thermostat setpoint.
    pub fn set_local_setpoint(&mut self, sp: f64) -> Result<(), PlantError> {
        self.state = set_setpoint(&self.state, sp)?;
        Ok(())
    }

    /// Delivery time of the next status frame in flight toward the supervisor.
    pub fn next_uplink(&self) -> Option<Instant> {
        self.link.up.next_delivery()
    }

    pub fn take_uplink(&mut self) -> Vec<Received> {
        core::mem::take(&mut self.uplink)
    }

    pub fn take_trace(&mut self) -> Vec<FrameRecord> {
        core::mem::take(&mut self.trace)
    }

    pub fn take_actuations(&mut self) -> Vec<ActuationRecord> {
        core::mem::take(&mut self.actuations)
    }

    fn next_due(&self) -> (Instant, Due) {
        let mut best = (self.next_plant, Due::Plant);
        if self.next_fw < best.0 {
            best = (self.next_fw, Due::Firmware);
        }
        // deliveries win ties so a frame arriving on a loop tick is handled in it
        if let Some(t) = self.link.up.next_delivery() {
            if t <= best.0 {
                best = (t, Due::Up);
            }
        }
        if let Some(t) = self.link.down.next_delivery() {
            if t <= best.0 {
                best = (t, Due::Down);
            }
        }
        best
    }

    /// Processes every event due at or before `t`, then sets the clock to `t`.
    pub fn advance_to(&mut self, t: Instant) {
        loop {
            let (at, due) = self.next_due();
            if at > t {
                break;
            }
            self.now = at;
            match due {
                Due::Down => {
                    if let Some(r) = self.link.down.pop_due(at) {
                        self.firmware.receive(r.result);
                        self.trace.push(FrameRecord { dir: LinkDir::Down, frame: r });
                    }
                }
                Due::Up => {
                    if let Some(r) = self.link.up.pop_due(at) {
                        self.uplink.push(r);
                        self.trace.push(FrameRecord { dir: LinkDir::Up, frame: r });
                    }
                }
                Due::Plant => {
                    let dt = self.model.params.dt;
                    if let Ok(tr) = self.model.step(&self.state, dt) {
                        self.state = tr.state;
                    }
                    self.next_plant += self.plant_tick;
                }
                Due::Firmware => {
                    let mut io = PlantIo { model: &self.model, state: &mut self.state, log: &mut self.actuations };
                    let tx = self.firmware.run_cycle(at, &mut io);
                    for b in tx {
                        if self.link.up.transmit(at, b).is_err() {
                            self.dropped_tx += 1;
                        }
                    }
                    self.next_fw += self.firmware.config().cycle;
                }
            }
        }
        if t > self.now {
            self.now = t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::Phase;
    use crate::signal_map::build_default_map;

    fn station() -> Station {
        Station::new(build_default_map(), StationConfig::default()).unwrap()
    }

    fn ms(v: u64) -> Instant {
        Instant(Span::from_millis(v).ticks())
    }

    #[test]
    fn pump_edge_reaches_supervisor_end_as_z() {
        let mut st = station();
        st.advance_to(ms(100));
        st.drive_field_input(PinId::ra(1), true).unwrap();
        st.advance_to(ms(200));
        let up = st.take_uplink();
        assert_eq!(up.len(), 1);
        assert_eq!(up[0].result, Ok(b'z'));
    }

    #[test]
    fn reset_then_start_over_the_link() {
        let mut st = station();
        st.send_down(st.codebook().encode_command(crate::codec::Action::Press(PinId::rc(4))).unwrap()).unwrap();
        st.advance_to(ms(500));
        assert_eq!(st.state().phase, Phase::Ready);
        st.send_down(b'a').unwrap();
        st.advance_to(ms(600));
        assert_eq!(st.state().phase, Phase::Igniting);
        let up: Vec<u8> = st.take_uplink().into_iter().map(|r| r.result.unwrap()).collect();
        assert_eq!(up, [b'{', b'~']);
        st.advance_to(ms(3000));
        assert_eq!(st.state().phase, Phase::Heating);
    }
}
