//! Automatic operation: a bang-bang loop that holds the boiler near a
//! setpoint using only the panel's start, stop and reset commands.

use crate::plant::{Phase, SETPOINT_MAX, SETPOINT_MIN};
use crate::time::{Instant, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AutoCommand {
    Reset,
    Start,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub now: Instant,
    pub phase: Phase,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("setpoint {0} °C outside 0..=100")]
pub struct RangeError(pub f64);

#[derive(Debug, Clone, PartialEq)]
pub struct AutoController {
    setpoint: f64,
    hysteresis: f64,
    repeat_guard: Span,
    tripped: bool,
    last: Option<(AutoCommand, Instant, Phase)>,
}

impl AutoController {
    /// `hysteresis` is the full dead-band width, centred on the setpoint.
    pub fn new(setpoint: f64, hysteresis: f64) -> Result<AutoController, RangeError> {
        if !(SETPOINT_MIN..=SETPOINT_MAX).contains(&setpoint) {
            return Err(RangeError(setpoint));
        }
        Ok(AutoController { setpoint, hysteresis, repeat_guard: Span::from_secs(1), tripped: false, last: None })
    }

    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    /// True after a high-high trip or emergency stop, until the panel is
    /// back in Ready.
    pub fn is_tripped(&self) -> bool {
        self.tripped
    }

    pub fn band(&self) -> (f64, f64) {
        let half = self.hysteresis / 2.0;
        (self.setpoint - half, self.setpoint + half)
    }

    pub fn decide(&mut self, obs: Observation) -> Option<AutoCommand> {
        if matches!(obs.phase, Phase::HighHighShutdown | Phase::EmergencyStopped) {
            self.tripped = true;
            return None;
        }
        if self.tripped {
            if obs.phase != Phase::Ready {
                return None;
            }
            self.tripped = false;
        }

        let (low, high) = self.band();
        let cmd = match obs.phase {
            Phase::PoweredDown | Phase::Faulted => AutoCommand::Reset,
            Phase::Ready if obs.temperature <= low => AutoCommand::Start,
            p if p.is_running() && obs.temperature >= high => AutoCommand::Stop,
            _ => return None,
        };

        if let Some((prev, at, phase)) = self.last {
            if prev == cmd && phase == obs.phase && obs.now.since(at) < self.repeat_guard {
                return None;
            }
        }
        self.last = Some((cmd, obs.now, obs.phase));
        Some(cmd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(ms: u64, phase: Phase, temperature: f64) -> Observation {
        Observation { now: Instant(Span::from_millis(ms).ticks()), phase, temperature }
    }

    #[test]
    fn rejects_out_of_range_setpoint() {
        assert_eq!(AutoController::new(150.0, 2.0), Err(RangeError(150.0)));
        assert!(AutoController::new(100.0, 2.0).is_ok());
    }

    #[test]
    fn powers_up_then_starts_then_stops() {
        let mut a = AutoController::new(60.0, 2.0).unwrap();
        assert_eq!(a.decide(obs(0, Phase::PoweredDown, 25.0)), Some(AutoCommand::Reset));
        assert_eq!(a.decide(obs(10, Phase::PoweredDown, 25.0)), None);
        assert_eq!(a.decide(obs(1000, Phase::PoweredDown, 25.0)), Some(AutoCommand::Reset));
        assert_eq!(a.decide(obs(1100, Phase::Ready, 25.0)), Some(AutoCommand::Start));
        assert_eq!(a.decide(obs(2000, Phase::Heating, 60.0)), None);
        assert_eq!(a.decide(obs(3000, Phase::Heating, 61.0)), Some(AutoCommand::Stop));
        assert_eq!(a.decide(obs(4000, Phase::Ready, 60.0)), None);
        assert_eq!(a.decide(obs(5000, Phase::Ready, 59.0)), Some(AutoCommand::Start));
    }

    #[test]
    fn silent_after_high_high_until_ready() {
        let mut a = AutoController::new(60.0, 2.0).unwrap();
        assert_eq!(a.decide(obs(0, Phase::HighHighShutdown, 111.0)), None);
        assert_eq!(a.decide(obs(5000, Phase::Faulted, 50.0)), None);
        assert_eq!(a.decide(obs(6000, Phase::ReadyCheck, 50.0)), None);
        assert!(a.is_tripped());
        assert_eq!(a.decide(obs(7000, Phase::Ready, 50.0)), Some(AutoCommand::Start));
        assert!(!a.is_tripped());
    }

    #[test]
    fn never_starts_from_faulted() {
        let mut a = AutoController::new(60.0, 2.0).unwrap();
        for t in 0..100 {
            assert_ne!(a.decide(obs(t * 500, Phase::Faulted, 20.0)), Some(AutoCommand::Start));
        }
    }
}
