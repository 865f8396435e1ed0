use grs_core::codec::{Action, Edge};
use grs_core::framing::{FaultKind, FaultPlan, LinkConfig};
use grs_core::pin::PinId;
use grs_core::plant::Phase;
use grs_core::signal_map::build_default_map;
use grs_core::station::{Station, StationConfig};
use grs_core::time::{Instant, Span};

fn at_ms(ms: u64) -> Instant {
    Instant::ZERO + Span::from_millis(ms)
}

fn station(cfg: StationConfig) -> Station {
    Station::new(build_default_map(), cfg).unwrap()
}

#[test]
fn every_field_edge_arrives_as_its_status_byte() {
    let mut st = station(StationConfig::default());
    let cb = st.codebook().clone();
    let faults = [PinId::ra(0), PinId::ra(3), PinId::rb(2), PinId::rb(7), PinId::re(0)];
    let mut t = 100;
    for pin in faults {
        for level in [true, false] {
            st.advance_to(at_ms(t));
            st.drive_field_input(pin, level).unwrap();
            t += 100;
            st.advance_to(at_ms(t));
            let got: Vec<u8> = st.take_uplink().iter().map(|r| r.result.unwrap()).collect();
            if level {
                assert_eq!(got, [cb.encode_status(pin, Edge::Asserted).unwrap()], "{pin}");
            } else {
                // the latch holds the lamp until a reset, so nothing is sent
                assert!(got.is_empty(), "{pin}: {got:?}");
            }
        }
    }
}

#[test]
fn burst_of_one_hundred_commands_is_all_handled() {
    let mut st = station(StationConfig::default());
    let sel = PinId::rc(0);
    let on = st.codebook().encode_command(Action::Select(sel, true)).unwrap();
    let off = st.codebook().encode_command(Action::Select(sel, false)).unwrap();
    for i in 0..100 {
        st.send_down(if i % 2 == 0 { on } else { off }).unwrap();
    }
    st.advance_to(at_ms(1000));
    let c = st.counters();
    assert_eq!(c.bytes_rx, 100);
    assert_eq!(c.actuations, 100);
    assert_eq!(c.unknown_bytes, 0);
    assert_eq!(st.take_actuations().len(), 100);
    assert!(!st.state().output_level(sel));
}

#[test]
fn burst_spacing_is_one_frame() {
    let mut st = station(StationConfig::default());
    let frame = LinkConfig::default().frame_duration();
    let mut last = None;
    for _ in 0..100 {
        let tx = st.send_down(b'b').unwrap();
        if let Some(prev) = last {
            assert_eq!(tx.deliver_at.since(prev), frame);
        }
        last = Some(tx.deliver_at);
    }
}

#[test]
fn corrupted_frame_is_counted_not_acted_on() {
    let cfg = StationConfig {
        down: LinkConfig::default().with_faults(FaultPlan::none().with(1, FaultKind::DropStop)),
        ..StationConfig::default()
    };
    let mut st = station(cfg);
    st.send_down(b'a').unwrap();
    st.advance_to(at_ms(100));
    assert_eq!(st.counters().framing_errors, 1);
    assert_eq!(st.counters().actuations, 0);
}

#[test]
fn closed_link_drops_commands_and_status() {
    let mut st = station(StationConfig::default());
    st.set_link_open(false);
    assert!(st.send_down(b'a').is_err());
    st.drive_field_input(PinId::ra(1), true).unwrap();
    st.advance_to(at_ms(100));
    assert!(st.take_uplink().is_empty());
    assert_eq!(st.dropped_tx(), 1);
}

#[test]
fn ignition_lamp_precedes_burner_start_lamp() {
    let mut st = station(StationConfig::default());
    let cb = st.codebook().clone();
    let reset = cb.encode_command(Action::Press(PinId::rc(4))).unwrap();
    st.send_down(reset).unwrap();
    st.advance_to(at_ms(300));
    assert_eq!(st.state().phase, Phase::Ready);
    st.take_uplink();
    st.send_down(b'a').unwrap();
    st.advance_to(at_ms(5000));
    let got: Vec<u8> = st.take_uplink().iter().map(|r| r.result.unwrap()).collect();
    let ign = cb.encode_status(PinId::ra(2), Edge::Asserted).unwrap();
    let start = cb.encode_status(PinId::ra(5), Edge::Asserted).unwrap();
    let i = got.iter().position(|&b| b == ign).unwrap();
    let j = got.iter().position(|&b| b == start).unwrap();
    assert!(i <= j, "{got:?}");
}

#[test]
fn identical_runs_are_identical() {
    let run = || {
        let mut st = station(StationConfig::default());
        let reset = st.codebook().encode_command(Action::Press(PinId::rc(4))).unwrap();
        st.send_down(reset).unwrap();
        st.advance_to(at_ms(500));
        st.send_down(b'a').unwrap();
        st.advance_to(at_ms(90_000));
        (st.take_trace(), st.state().clone())
    };
    assert_eq!(run(), run());
}
