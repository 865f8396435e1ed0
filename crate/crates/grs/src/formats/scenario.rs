//! Timed scenario scripts.
//!
//! ```text
//! # pump starts and the lamp follows
//! panel panel-1
//! at 0.5s inject "CIRCULATION PUMP IN OPERATION" on
//! at 0.6s expect "CIRCULATION PUMP IN OPERATION" on
//! at 0.6s expect byte up 'z'
//! at 2s end
//! ```
//!
//! Directives run in time order; directives sharing a time run in file
//! order. Signals are pin names (`RA1`) or quoted descriptions.

use grs_core::plant::Phase;
use grs_core::time::{Instant, Span};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ScenarioError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkSide {
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    /// Indicator lamp state as seen by the gateway.
    Lamp {
        signal: String,
        on: bool,
    },
    Phase(Phase),
    Temperature {
        cmp: Cmp,
        value: f64,
    },
    /// Asserted status edges of these signals were logged in this order.
    Order(Vec<String>),
    /// This byte has crossed the link in that direction.
    Byte {
        side: LinkSide,
        byte: u8,
    },
    Online(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verb {
    /// Drive a field input (fault cause or pump status).
    Inject {
        signal: String,
        on: bool,
    },
    Press {
        signal: String,
    },
    Select {
        signal: String,
        position: String,
    },
    Auto {
        on: bool,
        setpoint: Option<f64>,
    },
    GeneralReset,
    Link {
        up: bool,
    },
    /// Local thermostat setpoint on the panel itself.
    Setpoint(f64),
    /// Random operator commands spread evenly over a span; driven by the run seed.
    Fuzz {
        count: u32,
        over: Span,
    },
    Expect(Expectation),
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Directive {
    pub line: usize,
    pub at: Instant,
    pub panel: Option<String>,
    pub verb: Verb,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub directives: Vec<Directive>,
}

impl Scenario {
    /// Time of the last directive.
    pub fn end(&self) -> Instant {
        self.directives.iter().map(|d| d.at).max().unwrap_or(Instant::ZERO)
    }
}

fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => s.push(ch),
                    None => return Err("unterminated quote".into()),
                }
            }
            out.push(s);
        } else if c == '#' {
            break;
        } else {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// `1.5`, `1.5s`, `200ms` or `750us`.
pub fn parse_time(s: &str) -> Option<Span> {
    let (num, scale) = if let Some(v) = s.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = s.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.parse().ok()?;
    if !v.is_finite() || v < 0.0 {
        return None;
    }
    Some(Span::from_secs_f64(v * scale))
}

fn parse_level(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "high" | "1" => Some(true),
        "off" | "false" | "low" | "0" => Some(false),
        _ => None,
    }
}

fn parse_byte(s: &str) -> Option<u8> {
    let b = s.as_bytes();
    if b.len() == 3 && b[0] == b'\'' && b[2] == b'\'' {
        return Some(b[1]);
    }
    if let Some(h) = s.strip_prefix("0x") {
        return u8::from_str_radix(h, 16).ok();
    }
    if b.len() == 1 {
        return Some(b[0]);
    }
    None
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_expect(args: &[String]) -> Result<Expectation, String> {
    match args {
        [k, v] if k == "phase" => Phase::parse(v).map(Expectation::Phase).ok_or_else(|| format!("unknown phase `{v}`")),
        [k, op, v] if k == "temperature" => {
            let cmp = match op.as_str() {
                "<" => Cmp::Lt,
                "<=" => Cmp::Le,
                ">" => Cmp::Gt,
                ">=" => Cmp::Ge,
                _ => return Err(format!("unknown comparison `{op}`")),
            };
            let value = parse_number(v).ok_or_else(|| format!("bad number `{v}`"))?;
            Ok(Expectation::Temperature { cmp, value })
        }
        [k, side, b] if k == "byte" => {
            let side = match side.as_str() {
                "up" => LinkSide::Up,
                "down" => LinkSide::Down,
                _ => return Err(format!("link side must be up or down, got `{side}`")),
            };
            let byte = parse_byte(b).ok_or_else(|| format!("bad byte `{b}`"))?;
            Ok(Expectation::Byte { side, byte })
        }
        [k, v] if k == "online" => parse_level(v).map(Expectation::Online).ok_or_else(|| format!("bad level `{v}`")),
        [signal, v] => {
            let on = parse_level(v).ok_or_else(|| format!("bad level `{v}`"))?;
            Ok(Expectation::Lamp { signal: signal.clone(), on })
        }
        _ => Err("expect needs a signal and a level, or phase/temperature/byte/online".into()),
    }
}

fn parse_verb(verb: &str, args: &[String]) -> Result<Verb, String> {
    let want = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{verb}` takes {n} argument(s), got {}", args.len()))
        }
    };
    match verb {
        "inject" => {
            want(2)?;
            let on = parse_level(&args[1]).ok_or_else(|| format!("bad level `{}`", args[1]))?;
            Ok(Verb::Inject { signal: args[0].clone(), on })
        }
        "clear" => {
            want(1)?;
            Ok(Verb::Inject { signal: args[0].clone(), on: false })
        }
        "press" => {
            want(1)?;
            Ok(Verb::Press { signal: args[0].clone() })
        }
        "select" => {
            want(2)?;
            Ok(Verb::Select { signal: args[0].clone(), position: args[1].clone() })
        }
        "auto" => match args {
            [on] if on == "off" => Ok(Verb::Auto { on: false, setpoint: None }),
            [on, sp] if on == "on" => {
                let v = parse_number(sp).ok_or_else(|| format!("bad setpoint `{sp}`"))?;
                Ok(Verb::Auto { on: true, setpoint: Some(v) })
            }
            _ => Err("usage: auto on <setpoint> | auto off".into()),
        },
        "general-reset" => {
            want(0)?;
            Ok(Verb::GeneralReset)
        }
        "link" => {
            want(1)?;
            match args[0].as_str() {
                "up" => Ok(Verb::Link { up: true }),
                "down" => Ok(Verb::Link { up: false }),
                other => Err(format!("link takes up or down, got `{other}`")),
            }
        }
        "setpoint" => {
            want(1)?;
            parse_number(&args[0]).map(Verb::Setpoint).ok_or_else(|| format!("bad setpoint `{}`", args[0]))
        }
        "fuzz" => {
            want(2)?;
            let count = args[0].parse().map_err(|_| format!("bad count `{}`", args[0]))?;
            let over = parse_time(&args[1]).ok_or_else(|| format!("bad span `{}`", args[1]))?;
            Ok(Verb::Fuzz { count, over })
        }
        "expect" => parse_expect(args).map(Verb::Expect),
        "expect-order" => {
            if args.len() < 2 {
                return Err("expect-order needs at least two signals".into());
            }
            Ok(Verb::Expect(Expectation::Order(args.to_vec())))
        }
        "end" => {
            want(0)?;
            Ok(Verb::End)
        }
        other => Err(format!("unknown directive `{other}`")),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut panel = None;
    let mut directives = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| ScenarioError { line, msg };
        let toks = tokenize(raw).map_err(err)?;
        match toks.first().map(String::as_str) {
            None => continue,
            Some("panel") => {
                if toks.len() != 2 {
                    return Err(err("usage: panel <id>".into()));
                }
                panel = Some(toks[1].clone());
            }
            Some("at") => {
                if toks.len() < 3 {
                    return Err(err("usage: at <time> <directive> ...".into()));
                }
                let at = parse_time(&toks[1]).ok_or_else(|| err(format!("bad time `{}`", toks[1])))?;
                let verb = parse_verb(&toks[2], &toks[3..]).map_err(err)?;
                directives.push(Directive { line, at: Instant::ZERO + at, panel: panel.clone(), verb });
            }
            Some(other) => return Err(err(format!("expected `at` or `panel`, got `{other}`"))),
        }
    }
    // stable: equal times keep file order
    directives.sort_by_key(|d| d.at);
    Ok(Scenario { directives })
}
