//! Virtual clock.
//!
//! Time is counted in integer ticks so that every bit period of the
//! supported baud rates, and every millisecond, is an exact tick count.

use core::fmt;
use core::ops::{Add, AddAssign, Sub};

/// Ticks per simulated second: 115200 * 10_000.
pub const TICKS_PER_SECOND: u64 = 1_152_000_000;
pub const TICKS_PER_MILLI: u64 = TICKS_PER_SECOND / 1_000;
pub const TICKS_PER_MICRO: u64 = TICKS_PER_SECOND / 1_000_000;

/// A point on the virtual clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instant(pub u64);

/// A length of virtual time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Span(pub u64);

impl Instant {
    pub const ZERO: Instant = Instant(0);

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_MICRO as f64
    }

    pub fn since(self, earlier: Instant) -> Span {
        Span(self.0.saturating_sub(earlier.0))
    }

    /// Rounds a second count to the nearest tick. Negative input clamps to zero.
    pub fn from_secs_f64(secs: f64) -> Instant {
        Instant(Span::from_secs_f64(secs).0)
    }
}

impl Span {
    pub const ZERO: Span = Span(0);

    pub const fn from_millis(ms: u64) -> Span {
        Span(ms * TICKS_PER_MILLI)
    }

    pub const fn from_micros(us: u64) -> Span {
        Span(us * TICKS_PER_MICRO)
    }

    pub const fn from_secs(s: u64) -> Span {
        Span(s * TICKS_PER_SECOND)
    }

    pub fn from_secs_f64(secs: f64) -> Span {
        if !(secs > 0.0) {
            return Span(0);
        }
        // round half away from zero without libm
        Span((secs * TICKS_PER_SECOND as f64 + 0.5) as u64)
    }

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_MICRO as f64
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_MILLI as f64
    }
}

impl Add<Span> for Instant {
    type Output = Instant;
    fn add(self, rhs: Span) -> Instant {
        Instant(self.0 + rhs.0)
    }
}

impl AddAssign<Span> for Instant {
    fn add_assign(&mut self, rhs: Span) {
        self.0 += rhs.0;
    }
}

impl Sub<Instant> for Instant {
    type Output = Span;
    fn sub(self, rhs: Instant) -> Span {
        Span(self.0 - rhs.0)
    }
}

impl Add for Span {
    type Output = Span;
    fn add(self, rhs: Span) -> Span {
        Span(self.0 + rhs.0)
    }
}

impl fmt::Display for Instant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}
