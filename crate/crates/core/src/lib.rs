//! Core model of a remotely supervised boiler panel: signal map, serial
//! framing and link, command/status codebook, plant dynamics, panel
//! firmware and the automatic control loop.

#![no_std]
// `!(x > 0.0)` is how the range checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod auto;
pub mod codec;
pub mod firmware;
pub mod framing;
pub mod link;
pub mod pin;
pub mod plant;
pub mod signal_map;
pub mod station;
pub mod time;

pub use codec::{generate_codebook, Action, Codebook};
pub use pin::{PinId, Port};
pub use plant::{BoilerState, Phase, PlantModel, PlantParams};
pub use signal_map::{build_default_map, SignalDef, SignalMap};
pub use station::{Station, StationConfig};
pub use time::{Instant, Span};
