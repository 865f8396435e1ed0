//! Boiler plant: first-order thermal model, burner operating sequence,
//! latched faults, and the panel's input/output signal surface.
//!
//! Every operation is a pure function from one [`BoilerState`] to the next;
//! [`PlantModel`] only carries the immutable parameters and pin wiring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::codec::Edge;
use crate::pin::PinId;
use crate::signal_map::{Direction, FaultClass, SignalMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Phase {
    PoweredDown,
    ReadyCheck,
    Ready,
    Igniting,
    Heating,
    AtSetpoint,
    HighHighShutdown,
    Faulted,
    EmergencyStopped,
}

impl Phase {
    pub const ALL: [Phase; 9] = [
        Phase::PoweredDown,
        Phase::ReadyCheck,
        Phase::Ready,
        Phase::Igniting,
        Phase::Heating,
        Phase::AtSetpoint,
        Phase::HighHighShutdown,
        Phase::Faulted,
        Phase::EmergencyStopped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PoweredDown => "PoweredDown",
            Phase::ReadyCheck => "ReadyCheck",
            Phase::Ready => "Ready",
            Phase::Igniting => "Igniting",
            Phase::Heating => "Heating",
            Phase::AtSetpoint => "AtSetpoint",
            Phase::HighHighShutdown => "HighHighShutdown",
            Phase::Faulted => "Faulted",
            Phase::EmergencyStopped => "EmergencyStopped",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
    }

    /// Phases in which the burner sequence is running.
    pub fn is_running(self) -> bool {
        matches!(self, Phase::Igniting | Phase::Heating | Phase::AtSetpoint)
    }

    pub fn is_shutdown(self) -> bool {
        matches!(self, Phase::HighHighShutdown | Phase::Faulted | Phase::EmergencyStopped)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PlantParams {
    /// Burner heating rate, °C/s.
    pub k_heat: f64,
    /// Cooling rate toward ambient, °C/s.
    pub k_cool: f64,
    pub t_ambient: f64,
    pub t_highhigh: f64,
    pub hysteresis: f64,
    /// Integration tick, seconds.
    pub dt: f64,
    /// Seconds spent in Igniting before the flame is proven.
    pub ignition_time: f64,
    /// Local thermostat setpoint at power-up.
    pub initial_setpoint: f64,
    /// Maintenance override for the thermostat's effective setpoint. Not
    /// range-checked; used to drive the boiler into its high-high trip.
    pub setpoint_override: Option<f64>,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            k_heat: 0.5,
            k_cool: 0.1,
            t_ambient: 25.0,
            t_highhigh: 110.0,
            hysteresis: 2.0,
            dt: 0.1,
            ignition_time: 2.0,
            initial_setpoint: 60.0,
            setpoint_override: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ParamError {
    #[error("k_heat must be > 0")]
    HeatRate,
    #[error("k_cool must be >= 0")]
    CoolRate,
    #[error("t_ambient must be below t_highhigh")]
    Ambient,
    #[error("t_highhigh must exceed 100 °C")]
    HighHigh,
    #[error("hysteresis must be > 0")]
    Hysteresis,
    #[error("dt must be > 0")]
    Tick,
    #[error("ignition_time must be >= 0")]
    Ignition,
    #[error("initial_setpoint must be within 0..=100 °C")]
    Setpoint,
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.k_heat > 0.0) {
            return Err(ParamError::HeatRate);
        }
        if !(self.k_cool >= 0.0) {
            return Err(ParamError::CoolRate);
        }
        if !(self.t_ambient < self.t_highhigh) {
            return Err(ParamError::Ambient);
        }
        if !(self.t_highhigh > 100.0) {
            return Err(ParamError::HighHigh);
        }
        if !(self.hysteresis > 0.0) {
            return Err(ParamError::Hysteresis);
        }
        if !(self.dt > 0.0) {
            return Err(ParamError::Tick);
        }
        if !(self.ignition_time >= 0.0) {
            return Err(ParamError::Ignition);
        }
        if !(0.0..=100.0).contains(&self.initial_setpoint) {
            return Err(ParamError::Setpoint);
        }
        Ok(())
    }
}

pub const SETPOINT_MIN: f64 = 0.0;
pub const SETPOINT_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoilerState {
    pub temperature: f64,
    pub setpoint: f64,
    pub phase: Phase,
    pub burner_on: bool,
    pub pump_on: bool,
    pub latched_faults: BTreeSet<PinId>,
    /// Faults whose physical cause is present.
    pub active_causes: BTreeSet<PinId>,
    pub sim_time: f64,
    /// Seconds spent in the current phase.
    pub phase_time: f64,
    /// Levels last driven onto each output pin.
    pub outputs: BTreeMap<PinId, bool>,
}

impl BoilerState {
    pub fn output_level(&self, pin: PinId) -> bool {
        self.outputs.get(&pin).copied().unwrap_or(false)
    }

    fn enter(&mut self, phase: Phase) {
        if self.phase != phase {
            self.phase = phase;
            self.phase_time = 0.0;
        }
        if !matches!(phase, Phase::Igniting | Phase::Heating) {
            self.burner_on = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputEdge {
    pub pin: PinId,
    pub edge: Edge,
}

/// What the plant did with an output actuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    IgnoredInPhase(Phase),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: BoilerState,
    pub edges: Vec<InputEdge>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("pin {0} is not a mapped output")]
    InvalidPin(PinId),
    #[error("pin {0} is not a fault input")]
    UnknownFault(PinId),
    #[error("pin {0} is not a field-driven input")]
    NotFieldInput(PinId),
    #[error("setpoint {0} °C outside 0..=100")]
    Range(f64),
    #[error("time step must be positive")]
    NonPositiveDt,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WiringError {
    #[error("signal map has no `{0}` signal")]
    Missing(&'static str),
}

/// Role of an output pin in the operating sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRole {
    Start,
    Stop,
    Reset,
    AlarmReceipt,
    EmergencyStop,
    /// Selector or test button: recorded as a mode flag only.
    Flag,
}

/// Pin assignment of the signals the plant model drives or reacts to,
/// resolved from a signal map by description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wiring {
    pub pump_overload: PinId,
    pub pump_running: PinId,
    pub ignition_gas: PinId,
    pub burner_start: PinId,
    pub burner_running: PinId,
    pub temp_switch_high: PinId,
    pub temp_alarm_high: PinId,
    pub start: PinId,
    pub stop: PinId,
    pub reset: PinId,
    pub alarm_receipt: PinId,
    pub emergency_stop: PinId,
    /// Every pinned input, in map order.
    pub inputs: Vec<PinId>,
    /// Fault inputs and their class.
    pub faults: BTreeMap<PinId, FaultClass>,
    pub outputs: BTreeMap<PinId, OutputRole>,
}

pub mod names {
    pub const PUMP_OVERLOAD: &str = "CIRCULATION PUMP OVERLOAD";
    pub const PUMP_RUNNING: &str = "CIRCULATION PUMP IN OPERATION";
    pub const IGNITION_GAS: &str = "IGNITION GAS";
    pub const BURNER_START: &str = "BURNER START";
    pub const BURNER_RUNNING: &str = "BURNER IN OPERATION";
    pub const TEMP_SWITCH_HIGH: &str = "TS+00EKT21CT081";
    pub const TEMP_ALARM_HIGH: &str = "TA+00EKT21CT082";
    pub const START: &str = "BURNER START LOCAL";
    pub const STOP: &str = "BURNER STOP LOCAL";
    pub const RESET: &str = "RESET BURNER CONTROL";
    pub const ALARM_RECEIPT: &str = "ALARM RECEIPT";
    pub const EMERGENCY_STOP: &str = "EMERGENCY STOP";
    pub const LOCAL_REMOTE: &str = "SELECTOR SWITCH LOCAL/REMOTE";
    pub const BURNER_MODE: &str = "BURNER OPERATION MODE";
    pub const LOW_GAS_PRESSURE: &str = "LOW GAS PRESSURE";
    pub const LEAKAGE: &str = "LEAKAGE ALARM GAS VALVE";
    pub const BURNER_DISTURB: &str = "BURNER DISTURB";
}

impl Wiring {
    pub fn from_map(map: &SignalMap) -> Result<Wiring, WiringError> {
        let pin = |name: &'static str, dir: Direction| {
            map.lookup_by_description(name)
                .filter(|e| e.direction == dir)
                .and_then(|e| e.pin)
                .ok_or(WiringError::Missing(name))
        };
        use Direction::{DigitalIn as In, DigitalOut as Out};
        let start = pin(names::START, Out)?;
        let stop = pin(names::STOP, Out)?;
        let reset = pin(names::RESET, Out)?;
        let alarm_receipt = pin(names::ALARM_RECEIPT, Out)?;
        let emergency_stop = pin(names::EMERGENCY_STOP, Out)?;

        let outputs = map
            .outputs()
            .filter_map(|e| e.pin)
            .map(|p| {
                let role = if p == start {
                    OutputRole::Start
                } else if p == stop {
                    OutputRole::Stop
                } else if p == reset {
                    OutputRole::Reset
                } else if p == alarm_receipt {
                    OutputRole::AlarmReceipt
                } else if p == emergency_stop {
                    OutputRole::EmergencyStop
                } else {
                    OutputRole::Flag
                };
                (p, role)
            })
            .collect();

        let faults = map
            .inputs()
            .filter(|e| e.is_fault())
            .filter_map(|e| Some((e.pin?, e.fault_class.unwrap_or(FaultClass::Trip))))
            .collect();

        Ok(Wiring {
            pump_overload: pin(names::PUMP_OVERLOAD, In)?,
            pump_running: pin(names::PUMP_RUNNING, In)?,
            ignition_gas: pin(names::IGNITION_GAS, In)?,
            burner_start: pin(names::BURNER_START, In)?,
            burner_running: pin(names::BURNER_RUNNING, In)?,
            temp_switch_high: pin(names::TEMP_SWITCH_HIGH, In)?,
            temp_alarm_high: pin(names::TEMP_ALARM_HIGH, In)?,
            start,
            stop,
            reset,
            alarm_receipt,
            emergency_stop,
            inputs: map.inputs().filter_map(|e| e.pin).collect(),
            faults,
            outputs,
        })
    }

    pub fn fault_class(&self, pin: PinId) -> Option<FaultClass> {
        self.faults.get(&pin).copied()
    }
}

/// Immutable view of every mapped signal at one instant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PanelSnapshot {
    /// Pinned inputs in map order.
    pub inputs: Vec<(PinId, bool)>,
    /// Output pins, named and reserved, in pin order.
    pub outputs: Vec<(PinId, bool)>,
    pub phase: Phase,
    pub temperature: f64,
    pub setpoint: f64,
    pub sim_time: f64,
}

impl PanelSnapshot {
    pub fn input(&self, pin: PinId) -> Option<bool> {
        self.inputs.iter().find(|(p, _)| *p == pin).map(|(_, l)| *l)
    }

    pub fn output(&self, pin: PinId) -> Option<bool> {
        self.outputs.iter().find(|(p, _)| *p == pin).map(|(_, l)| *l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub params: PlantParams,
    pub wiring: Wiring,
}

impl PlantModel {
    pub fn new(params: PlantParams, map: &SignalMap) -> Result<PlantModel, PlantSetupError> {
        params.validate()?;
        Ok(PlantModel { params, wiring: Wiring::from_map(map)? })
    }

    pub fn initial_state(&self) -> BoilerState {
        BoilerState {
            temperature: self.params.t_ambient,
            setpoint: self.params.initial_setpoint,
            phase: Phase::PoweredDown,
            burner_on: false,
            pump_on: false,
            latched_faults: BTreeSet::new(),
            active_causes: BTreeSet::new(),
            sim_time: 0.0,
            phase_time: 0.0,
            outputs: self.wiring.outputs.keys().map(|&p| (p, false)).collect(),
        }
    }

    pub fn input_level(&self, s: &BoilerState, pin: PinId) -> bool {
        let w = &self.wiring;
        if w.faults.contains_key(&pin) {
            s.latched_faults.contains(&pin)
        } else if pin == w.pump_running {
            s.pump_on
        } else if pin == w.ignition_gas {
            s.phase == Phase::Igniting
        } else if pin == w.burner_start {
            s.phase.is_running()
        } else if pin == w.burner_running {
            s.phase == Phase::Heating && s.burner_on
        } else {
            false
        }
    }

    /// Levels of every pinned input, in map order.
    pub fn input_levels(&self, s: &BoilerState) -> Vec<(PinId, bool)> {
        self.wiring.inputs.iter().map(|&p| (p, self.input_level(s, p))).collect()
    }

    fn finish(&self, before: &BoilerState, state: BoilerState, outcome: Outcome) -> Transition {
        let edges = self
            .wiring
            .inputs
            .iter()
            .filter_map(|&pin| {
                let (a, b) = (self.input_level(before, pin), self.input_level(&state, pin));
                (a != b).then_some(InputEdge { pin, edge: Edge::from_level(b) })
            })
            .collect();
        Transition { state, edges, outcome }
    }

    fn effective_setpoint(&self, s: &BoilerState) -> f64 {
        self.params.setpoint_override.unwrap_or(s.setpoint)
    }

    /// Temperature after `dt` seconds with the burner off.
    pub fn cooled(&self, t: f64, dt: f64) -> f64 {
        let amb = self.params.t_ambient;
        let d = self.params.k_cool * dt;
        if t > amb {
            (t - d).max(amb)
        } else {
            (t + d).min(amb)
        }
    }

    fn clear_released_latches(&self, s: &mut BoilerState, class: Option<FaultClass>) {
        let w = &self.wiring;
        let causes = &s.active_causes;
        s.latched_faults.retain(|p| {
            let in_class = class.is_none() || w.fault_class(*p) == class;
            !in_class || causes.contains(p)
        });
    }

    fn has_trip_latched(&self, s: &BoilerState) -> bool {
        s.latched_faults.iter().any(|p| self.wiring.fault_class(*p) == Some(FaultClass::Trip))
    }

    /// Advances the plant by `dt` seconds.
    pub fn step(&self, state: &BoilerState, dt: f64) -> Result<Transition, PlantError> {
        if !(dt > 0.0) {
            return Err(PlantError::NonPositiveDt);
        }
        let p = &self.params;
        let w = &self.wiring;
        let mut s = state.clone();
        s.sim_time += dt;
        s.phase_time += dt;

        match s.phase {
            Phase::ReadyCheck => {
                let next = if self.has_trip_latched(&s) { Phase::Faulted } else { Phase::Ready };
                s.enter(next);
            }
            Phase::Igniting if s.phase_time >= p.ignition_time - 1e-9 => {
                s.phase = Phase::Heating;
                s.phase_time = 0.0;
            }
            _ => {}
        }

        s.temperature = if s.burner_on { s.temperature + p.k_heat * dt } else { self.cooled(s.temperature, dt) };

        if s.temperature >= p.t_highhigh {
            for pin in [w.temp_switch_high, w.temp_alarm_high] {
                s.active_causes.insert(pin);
                s.latched_faults.insert(pin);
            }
            if !matches!(s.phase, Phase::Faulted | Phase::EmergencyStopped | Phase::PoweredDown) {
                s.enter(Phase::HighHighShutdown);
            }
            s.burner_on = false;
        } else if s.temperature < p.t_highhigh - p.hysteresis {
            s.active_causes.remove(&w.temp_switch_high);
            s.active_causes.remove(&w.temp_alarm_high);
        }

        let sp = self.effective_setpoint(&s);
        match s.phase {
            Phase::Heating if s.temperature >= sp => s.enter(Phase::AtSetpoint),
            // look one tick ahead so the next cooling step cannot leave the band
            Phase::AtSetpoint if self.cooled(s.temperature, dt) < sp - p.hysteresis => {
                s.enter(Phase::Heating);
                s.burner_on = true;
            }
            _ => {}
        }

        Ok(self.finish(state, s, Outcome::Accepted))
    }

    /// Drives an output pin. Push buttons act on the rising level; a second
    /// high while already high re-triggers the press.
    pub fn apply_output(&self, state: &BoilerState, pin: PinId, level: bool) -> Result<Transition, PlantError> {
        let role = *self.wiring.outputs.get(&pin).ok_or(PlantError::InvalidPin(pin))?;
        let mut s = state.clone();
        s.outputs.insert(pin, level);
        if !level || role == OutputRole::Flag {
            return Ok(self.finish(state, s, Outcome::Accepted));
        }
        let phase = s.phase;
        let outcome = match role {
            OutputRole::Start => {
                if phase == Phase::Ready {
                    s.enter(Phase::Igniting);
                    s.burner_on = true;
                    Outcome::Accepted
                } else {
                    Outcome::IgnoredInPhase(phase)
                }
            }
            OutputRole::Stop => {
                if phase.is_running() {
                    s.enter(Phase::Ready);
                    Outcome::Accepted
                } else {
                    Outcome::IgnoredInPhase(phase)
                }
            }
            OutputRole::Reset => {
                self.clear_released_latches(&mut s, None);
                if matches!(
                    phase,
                    Phase::PoweredDown
                        | Phase::Ready
                        | Phase::Faulted
                        | Phase::HighHighShutdown
                        | Phase::EmergencyStopped
                ) {
                    s.enter(Phase::ReadyCheck);
                }
                Outcome::Accepted
            }
            OutputRole::AlarmReceipt => {
                self.clear_released_latches(&mut s, Some(FaultClass::Alarm));
                Outcome::Accepted
            }
            OutputRole::EmergencyStop => {
                s.enter(Phase::EmergencyStopped);
                s.pump_on = false;
                Outcome::Accepted
            }
            OutputRole::Flag => Outcome::Accepted,
        };
        Ok(self.finish(state, s, outcome))
    }

    /// Raises a fault's cause and latches it. Trip-class faults shut the
    /// burner down; alarm-class faults only annunciate.
    pub fn inject_fault(&self, state: &BoilerState, pin: PinId) -> Result<Transition, PlantError> {
        let class = self.wiring.fault_class(pin).ok_or(PlantError::UnknownFault(pin))?;
        let mut s = state.clone();
        s.active_causes.insert(pin);
        s.latched_faults.insert(pin);
        if class == FaultClass::Trip {
            if matches!(s.phase, Phase::ReadyCheck | Phase::Ready) || s.phase.is_running() {
                s.enter(Phase::Faulted);
            }
            if pin == self.wiring.pump_overload {
                s.pump_on = false;
            }
        }
        Ok(self.finish(state, s, Outcome::Accepted))
    }

    /// Removes a fault's physical cause. The latch stays until a reset.
    pub fn clear_fault_cause(&self, state: &BoilerState, pin: PinId) -> Result<Transition, PlantError> {
        if self.wiring.fault_class(pin).is_none() {
            return Err(PlantError::UnknownFault(pin));
        }
        let mut s = state.clone();
        s.active_causes.remove(&pin);
        Ok(self.finish(state, s, Outcome::Accepted))
    }

    /// Field-driven circulation pump status.
    pub fn set_pump(&self, state: &BoilerState, on: bool) -> Transition {
        let mut s = state.clone();
        s.pump_on = on;
        self.finish(state, s, Outcome::Accepted)
    }

    /// Drives a field input by pin: faults are injected or have their cause
    /// removed, the pump status is set. Sequence lamps are plant-owned.
    pub fn drive_field_input(&self, state: &BoilerState, pin: PinId, level: bool) -> Result<Transition, PlantError> {
        if self.wiring.fault_class(pin).is_some() {
            if level {
                self.inject_fault(state, pin)
            } else {
                self.clear_fault_cause(state, pin)
            }
        } else if pin == self.wiring.pump_running {
            Ok(self.set_pump(state, level))
        } else {
            Err(PlantError::NotFieldInput(pin))
        }
    }

    pub fn snapshot(&self, state: &BoilerState, map: &SignalMap) -> PanelSnapshot {
        snapshot(self, state, map)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlantSetupError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Wiring(#[from] WiringError),
}

pub fn set_setpoint(state: &BoilerState, sp: f64) -> Result<BoilerState, PlantError> {
    if !(SETPOINT_MIN..=SETPOINT_MAX).contains(&sp) {
        return Err(PlantError::Range(sp));
    }
    let mut s = state.clone();
    s.setpoint = sp;
    Ok(s)
}

pub fn snapshot(model: &PlantModel, state: &BoilerState, map: &SignalMap) -> PanelSnapshot {
    PanelSnapshot {
        inputs: map.inputs().filter_map(|e| e.pin).map(|p| (p, model.input_level(state, p))).collect(),
        outputs: map.output_pins().into_iter().map(|p| (p, state.output_level(p))).collect(),
        phase: state.phase,
        temperature: state.temperature,
        setpoint: state.setpoint,
        sim_time: state.sim_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_map::build_default_map;

    fn model() -> (PlantModel, SignalMap) {
        let map = build_default_map();
        (PlantModel::new(PlantParams::default(), &map).unwrap(), map)
    }

    fn press(m: &PlantModel, s: &BoilerState, pin: PinId) -> Transition {
        let t = m.apply_output(s, pin, true).unwrap();
        let released = m.apply_output(&t.state, pin, false).unwrap();
        Transition { state: released.state, edges: t.edges, outcome: t.outcome }
    }

    fn ready(m: &PlantModel) -> BoilerState {
        let s = press(m, &m.initial_state(), m.wiring.reset).state;
        assert_eq!(s.phase, Phase::ReadyCheck);
        let s = m.step(&s, 0.1).unwrap().state;
        assert_eq!(s.phase, Phase::Ready);
        s
    }

    fn run_until(m: &PlantModel, mut s: BoilerState, secs: f64) -> BoilerState {
        let n = (secs / m.params.dt).round() as usize;
        for _ in 0..n {
            s = m.step(&s, m.params.dt).unwrap().state;
        }
        s
    }

    #[test]
    fn equilibrium_with_burner_off() {
        let (m, _) = model();
        let s = m.initial_state();
        let t = m.step(&s, 1.0).unwrap();
        assert_eq!(t.state.temperature, 25.0);
        assert!(t.edges.is_empty());
    }

    #[test]
    fn euler_heating() {
        let map = build_default_map();
        let params = PlantParams { k_heat: 2.0, ..PlantParams::default() };
        let m = PlantModel::new(params, &map).unwrap();
        let mut s = ready(&m);
        s = m.apply_output(&s, m.wiring.start, true).unwrap().state;
        s.temperature = 20.0;
        let t = m.step(&s, 1.0).unwrap();
        assert_eq!(t.state.temperature, 22.0);
    }

    #[test]
    fn start_from_ready_orders_ignition_before_burner_start() {
        let (m, _) = model();
        let s = ready(&m);
        let t = m.apply_output(&s, m.wiring.start, true).unwrap();
        assert_eq!(t.outcome, Outcome::Accepted);
        assert_eq!(t.state.phase, Phase::Igniting);
        assert_eq!(
            t.edges,
            [
                InputEdge { pin: m.wiring.ignition_gas, edge: Edge::Asserted },
                InputEdge { pin: m.wiring.burner_start, edge: Edge::Asserted },
            ]
        );
        let s = run_until(&m, t.state, 2.0);
        assert_eq!(s.phase, Phase::Heating);
    }

    #[test]
    fn start_while_faulted_is_ignored() {
        let (m, _) = model();
        let s = m.inject_fault(&ready(&m), m.wiring.pump_overload).unwrap().state;
        assert_eq!(s.phase, Phase::Faulted);
        let t = m.apply_output(&s, m.wiring.start, true).unwrap();
        assert_eq!(t.outcome, Outcome::IgnoredInPhase(Phase::Faulted));
        assert!(!t.state.burner_on);
    }

    #[test]
    fn emergency_stop_from_any_phase() {
        let (m, _) = model();
        let mut s = m.apply_output(&ready(&m), m.wiring.start, true).unwrap().state;
        s = run_until(&m, s, 3.0);
        assert!(s.burner_on);
        let t = m.apply_output(&s, m.wiring.emergency_stop, true).unwrap();
        assert_eq!(t.state.phase, Phase::EmergencyStopped);
        assert!(!t.state.burner_on);
    }

    #[test]
    fn pump_overload_trips_and_low_gas_only_alarms() {
        let (m, map) = model();
        let heating = run_until(&m, m.apply_output(&ready(&m), m.wiring.start, true).unwrap().state, 3.0);
        assert_eq!(heating.phase, Phase::Heating);

        let t = m.inject_fault(&heating, m.wiring.pump_overload).unwrap();
        assert_eq!(t.state.phase, Phase::Faulted);
        assert!(!t.state.burner_on);
        assert!(t.edges.contains(&InputEdge { pin: m.wiring.pump_overload, edge: Edge::Asserted }));

        let low_gas = map.lookup_by_description(names::LOW_GAS_PRESSURE).unwrap().pin.unwrap();
        let t = m.inject_fault(&heating, low_gas).unwrap();
        assert_eq!(t.state.phase, Phase::Heating);
        assert!(t.state.latched_faults.contains(&low_gas));

        assert_eq!(m.inject_fault(&heating, PinId::re(7)), Err(PlantError::UnknownFault(PinId::re(7))));
        assert_eq!(
            m.inject_fault(&heating, m.wiring.pump_running),
            Err(PlantError::UnknownFault(m.wiring.pump_running))
        );
    }

    #[test]
    fn setpoint_range() {
        let (m, _) = model();
        let s = m.initial_state();
        assert_eq!(set_setpoint(&s, 60.0).unwrap().setpoint, 60.0);
        assert_eq!(set_setpoint(&s, 150.0), Err(PlantError::Range(150.0)));
        assert_eq!(set_setpoint(&s, 0.0).unwrap().setpoint, 0.0);
    }

    #[test]
    fn zero_setpoint_never_heats_above_ignition_rise() {
        let (m, _) = model();
        let mut s = set_setpoint(&ready(&m), 0.0).unwrap();
        s = m.apply_output(&s, m.wiring.start, true).unwrap().state;
        s = run_until(&m, s, 2.1);
        assert_eq!(s.phase, Phase::AtSetpoint);
        let peak = s.temperature;
        for _ in 0..2000 {
            s = m.step(&s, 0.1).unwrap().state;
            assert!(!s.burner_on);
            assert!(s.temperature <= peak);
        }
        assert_eq!(s.temperature, 25.0);
    }

    #[test]
    fn high_high_trip_latches() {
        let map = build_default_map();
        let params = PlantParams { setpoint_override: Some(120.0), ..PlantParams::default() };
        let m = PlantModel::new(params, &map).unwrap();
        let mut s = m.apply_output(&ready(&m), m.wiring.start, true).unwrap().state;
        let mut tripped = None;
        for _ in 0..3000 {
            let t = m.step(&s, 0.1).unwrap();
            s = t.state;
            if s.phase == Phase::HighHighShutdown {
                tripped = Some(t.edges);
                break;
            }
        }
        let edges = tripped.expect("trip");
        assert!(!s.burner_on);
        assert!(edges.contains(&InputEdge { pin: m.wiring.temp_switch_high, edge: Edge::Asserted }));
        let snap = m.snapshot(&s, &map);
        assert_eq!(snap.input(m.wiring.temp_switch_high), Some(true));
        for pin in [m.wiring.ignition_gas, m.wiring.burner_start, m.wiring.burner_running] {
            assert_eq!(snap.input(pin), Some(false));
        }

        let t = m.apply_output(&s, m.wiring.start, true).unwrap();
        assert_eq!(t.outcome, Outcome::IgnoredInPhase(Phase::HighHighShutdown));
    }

    #[test]
    fn reset_keeps_active_causes_latched() {
        let (m, _) = model();
        let s = m.inject_fault(&ready(&m), m.wiring.pump_overload).unwrap().state;
        let s = press(&m, &s, m.wiring.reset).state;
        let s = m.step(&s, 0.1).unwrap().state;
        assert_eq!(s.phase, Phase::Faulted);
        assert!(s.latched_faults.contains(&m.wiring.pump_overload));

        let s = m.clear_fault_cause(&s, m.wiring.pump_overload).unwrap().state;
        assert!(s.latched_faults.contains(&m.wiring.pump_overload));
        let s = press(&m, &s, m.wiring.reset).state;
        let s = m.step(&s, 0.1).unwrap().state;
        assert_eq!(s.phase, Phase::Ready);
        assert!(s.latched_faults.is_empty());
    }

    #[test]
    fn snapshot_keys_match_map() {
        let (m, map) = model();
        let snap = m.snapshot(&m.initial_state(), &map);
        assert_eq!(snap.inputs.len(), 15);
        assert_eq!(snap.outputs.len(), 15);
        assert!(snap.inputs.iter().all(|(_, l)| !l));
        let s = m.set_pump(&m.initial_state(), true).state;
        assert_eq!(m.snapshot(&s, &map).input(m.wiring.pump_running), Some(true));
    }

    #[test]
    fn invalid_output_pin() {
        let (m, _) = model();
        let s = m.initial_state();
        assert_eq!(m.apply_output(&s, PinId::rc(1), true), Err(PlantError::InvalidPin(PinId::rc(1))));
        assert_eq!(m.apply_output(&s, PinId::ra(0), true), Err(PlantError::InvalidPin(PinId::ra(0))));
        assert_eq!(m.step(&s, 0.0), Err(PlantError::NonPositiveDt));
    }

    #[test]
    fn params_validate() {
        assert!(PlantParams::default().validate().is_ok());
        let bad = PlantParams { t_highhigh: 95.0, ..PlantParams::default() };
        assert_eq!(bad.validate(), Err(ParamError::HighHigh));
        let bad = PlantParams { k_heat: 0.0, ..PlantParams::default() };
        assert_eq!(bad.validate(), Err(ParamError::HeatRate));
    }
}
