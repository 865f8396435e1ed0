use grs_core::pin::PinId;
use grs_core::plant::{set_setpoint, BoilerState, Phase, PlantModel, PlantParams};
use grs_core::signal_map::build_default_map;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
enum Cmd {
    Start,
    Stop,
    Reset,
    Receipt,
    Estop,
    Fault(usize, bool),
    Pump(bool),
    Setpoint(u8),
    Step(u8),
}

const FAULT_PINS: [PinId; 11] = [
    PinId::ra(0),
    PinId::ra(3),
    PinId::ra(4),
    PinId::rb(0),
    PinId::rb(2),
    PinId::rb(3),
    PinId::rb(4),
    PinId::rb(5),
    PinId::rb(6),
    PinId::rb(7),
    PinId::re(0),
];

fn cmd() -> impl Strategy<Value = Cmd> {
    prop_oneof![
        2 => Just(Cmd::Start),
        2 => Just(Cmd::Stop),
        2 => Just(Cmd::Reset),
        2 => Just(Cmd::Receipt),
        1 => Just(Cmd::Estop),
        2 => (0..FAULT_PINS.len(), any::<bool>()).prop_map(|(i, b)| Cmd::Fault(i, b)),
        1 => any::<bool>().prop_map(Cmd::Pump),
        1 => (0u8..=100).prop_map(Cmd::Setpoint),
        6 => (1u8..=50).prop_map(Cmd::Step),
    ]
}

fn model(params: PlantParams) -> PlantModel {
    PlantModel::new(params, &build_default_map()).unwrap()
}

fn press(m: &PlantModel, s: &BoilerState, pin: PinId) -> BoilerState {
    let s = m.apply_output(s, pin, true).unwrap().state;
    m.apply_output(&s, pin, false).unwrap().state
}

/// Applies one command; `Step(n)` advances n ticks and checks invariants
/// after every tick.
fn apply(m: &PlantModel, s: BoilerState, c: Cmd) -> BoilerState {
    let w = &m.wiring;
    match c {
        Cmd::Start => press(m, &s, w.start),
        Cmd::Stop => press(m, &s, w.stop),
        Cmd::Reset => press(m, &s, w.reset),
        Cmd::Receipt => press(m, &s, w.alarm_receipt),
        Cmd::Estop => press(m, &s, w.emergency_stop),
        Cmd::Fault(i, on) => m.drive_field_input(&s, FAULT_PINS[i], on).unwrap().state,
        Cmd::Pump(on) => m.set_pump(&s, on).state,
        Cmd::Setpoint(v) => set_setpoint(&s, v as f64).unwrap(),
        Cmd::Step(n) => {
            let mut s = s;
            for _ in 0..n {
                s = m.step(&s, m.params.dt).unwrap().state;
                check_invariants(m, &s);
            }
            s
        }
    }
}

fn check_invariants(m: &PlantModel, s: &BoilerState) {
    if s.burner_on {
        assert!(matches!(s.phase, Phase::Igniting | Phase::Heating), "{:?}", s.phase);
    }
    if matches!(s.phase, Phase::Faulted | Phase::HighHighShutdown | Phase::EmergencyStopped) {
        assert!(!s.burner_on);
    }
    let p = &m.params;
    assert!(s.temperature <= p.t_highhigh + p.k_heat * p.dt + 1e-9, "{}", s.temperature);
    assert!((0.0..=100.0).contains(&s.setpoint));
}

fn ready(m: &PlantModel) -> BoilerState {
    let s = press(m, &m.initial_state(), m.wiring.reset);
    m.step(&s, m.params.dt).unwrap().state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_walk_keeps_safety_invariants(cmds in prop::collection::vec(cmd(), 1..200)) {
        let m = model(PlantParams::default());
        let mut s = m.initial_state();
        for c in cmds {
            s = apply(&m, s, c);
            check_invariants(&m, &s);
        }
    }

    #[test]
    fn forced_overheat_stays_bounded(cmds in prop::collection::vec(cmd(), 1..200)) {
        let m = model(PlantParams { setpoint_override: Some(120.0), ..PlantParams::default() });
        let mut s = m.initial_state();
        for c in cmds {
            s = apply(&m, s, c);
            check_invariants(&m, &s);
        }
    }

    #[test]
    fn no_reignition_after_trip_without_reset(cmds in prop::collection::vec(cmd(), 1..300)) {
        let m = model(PlantParams { setpoint_override: Some(120.0), ..PlantParams::default() });
        let mut s = press(&m, &ready(&m), m.wiring.start);
        while s.phase != Phase::HighHighShutdown {
            s = m.step(&s, m.params.dt).unwrap().state;
        }
        for c in cmds.into_iter().filter(|c| !matches!(c, Cmd::Reset)) {
            s = apply(&m, s, c);
            prop_assert!(!s.burner_on);
            prop_assert!(!s.phase.is_running());
        }
    }

    #[test]
    fn same_commands_same_trajectory(cmds in prop::collection::vec(cmd(), 1..100)) {
        let m = model(PlantParams::default());
        let mut a = m.initial_state();
        let mut b = m.initial_state();
        for c in cmds {
            a = apply(&m, a, c);
            b = apply(&m, b, c);
        }
        prop_assert_eq!(a, b);
    }
}

/// Next phase after a button press, written out by hand for every phase.
fn press_oracle(phase: Phase, button: Cmd) -> Phase {
    use Phase::*;
    match (button, phase) {
        (Cmd::Start, Ready) => Igniting,
        (Cmd::Stop, Igniting | Heating | AtSetpoint) => Ready,
        (Cmd::Reset, PoweredDown | Ready | Faulted | HighHighShutdown | EmergencyStopped) => ReadyCheck,
        (Cmd::Estop, _) => EmergencyStopped,
        (_, p) => p,
    }
}

#[test]
fn button_transition_table() {
    let m = model(PlantParams::default());
    let w = &m.wiring;
    let mut states: Vec<BoilerState> = Vec::new();
    states.push(m.initial_state());
    let r = ready(&m);
    states.push(press(&m, &m.initial_state(), w.reset));
    states.push(r.clone());
    let ign = press(&m, &r, w.start);
    states.push(ign.clone());
    let mut heat = ign.clone();
    while heat.phase != Phase::Heating {
        heat = m.step(&heat, 0.1).unwrap().state;
    }
    states.push(heat.clone());
    let mut at = set_setpoint(&heat, 30.0).unwrap();
    while at.phase != Phase::AtSetpoint {
        at = m.step(&at, 0.1).unwrap().state;
    }
    states.push(at);
    states.push(m.drive_field_input(&r, PinId::ra(0), true).unwrap().state);
    states.push(press(&m, &r, w.emergency_stop));
    let hot = model(PlantParams { setpoint_override: Some(120.0), ..PlantParams::default() });
    let mut hh = press(&hot, &ready(&hot), w.start);
    while hh.phase != Phase::HighHighShutdown {
        hh = hot.step(&hh, 0.1).unwrap().state;
    }
    states.push(hh);

    let covered: std::collections::BTreeSet<Phase> = states.iter().map(|s| s.phase).collect();
    assert_eq!(covered.len(), Phase::ALL.len());

    for s in &states {
        for (button, pin) in
            [(Cmd::Start, w.start), (Cmd::Stop, w.stop), (Cmd::Reset, w.reset), (Cmd::Estop, w.emergency_stop)]
        {
            let next = press(&m, s, pin).phase;
            assert_eq!(next, press_oracle(s.phase, button), "{:?} + {:?}", s.phase, button);
        }
    }
}

#[test]
fn euler_matches_closed_form_while_heating() {
    let m = model(PlantParams::default());
    let mut s = press(&m, &ready(&m), m.wiring.start);
    for i in 1..=100 {
        s = m.step(&s, 0.1).unwrap().state;
        let expected = 25.0 + 0.5 * 0.1 * i as f64;
        assert!((s.temperature - expected).abs() < 1e-9);
    }
}

#[test]
fn thermostat_holds_band_at_setpoint() {
    let m = model(PlantParams::default());
    let mut s = press(&m, &ready(&m), m.wiring.start);
    let mut reached = false;
    for _ in 0..20_000 {
        s = m.step(&s, 0.1).unwrap().state;
        if s.phase == Phase::AtSetpoint {
            reached = true;
        }
        if reached {
            assert!(s.temperature >= 58.0 - 1e-9 && s.temperature <= 60.0 + 0.05 + 1e-9, "{}", s.temperature);
        }
    }
    assert!(reached);
}
