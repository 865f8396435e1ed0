use core::fmt;
use core::str::FromStr;

/// One of the five controller ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Port {
    A,
    B,
    C,
    D,
    E,
}

impl Port {
    pub const ALL: [Port; 5] = [Port::A, Port::B, Port::C, Port::D, Port::E];

    fn letter(self) -> char {
        match self {
            Port::A => 'A',
            Port::B => 'B',
            Port::C => 'C',
            Port::D => 'D',
            Port::E => 'E',
        }
    }
}

/// A controller pin, rendered as `RA0`..`RE7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PinId {
    port: Port,
    index: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PinParseError {
    #[error("pin `{0}` is not of the form R<port><0-7>")]
    Malformed(alloc::string::String),
}

impl PinId {
    pub const fn new(port: Port, index: u8) -> Option<PinId> {
        if index > 7 {
            None
        } else {
            Some(PinId { port, index })
        }
    }

    pub const fn port(self) -> Port {
        self.port
    }

    pub const fn index(self) -> u8 {
        self.index
    }

    /// Every pin of the 40-pin controller's five ports, A0..E7.
    pub fn all() -> impl Iterator<Item = PinId> {
        Port::ALL.into_iter().flat_map(|port| (0..8).map(move |index| PinId { port, index }))
    }
}

macro_rules! pin_ctor {
    ($($name:ident => $port:ident),*) => {
        impl PinId {
            $(
                /// Panics when `index > 7`; intended for constant tables.
                pub const fn $name(index: u8) -> PinId {
                    assert!(index <= 7);
                    PinId { port: Port::$port, index }
                }
            )*
        }
    };
}

pin_ctor!(ra => A, rb => B, rc => C, rd => D, re => E);

impl fmt::Display for PinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}{}", self.port.letter(), self.index)
    }
}

impl FromStr for PinId {
    type Err = PinParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PinParseError::Malformed(s.into());
        let b = s.trim().as_bytes();
        if b.len() != 3 || !b[0].eq_ignore_ascii_case(&b'R') {
            return Err(bad());
        }
        let port = match b[1].to_ascii_uppercase() {
            b'A' => Port::A,
            b'B' => Port::B,
            b'C' => Port::C,
            b'D' => Port::D,
            b'E' => Port::E,
            _ => return Err(bad()),
        };
        match b[2] {
            d @ b'0'..=b'7' => Ok(PinId { port, index: d - b'0' }),
            _ => Err(bad()),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for PinId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for PinId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parse_and_display() {
        assert_eq!("RA0".parse::<PinId>().unwrap(), PinId::ra(0));
        assert_eq!("rd6".parse::<PinId>().unwrap(), PinId::rd(6));
        assert_eq!(PinId::re(0).to_string(), "RE0");
        assert!("RA8".parse::<PinId>().is_err());
        assert!("RF1".parse::<PinId>().is_err());
        assert!("A0".parse::<PinId>().is_err());
        assert!(PinId::new(Port::B, 8).is_none());
    }

    #[test]
    fn forty_pins() {
        assert_eq!(PinId::all().count(), 40);
    }
}
