//! JSON readers and writers for systems, histories and forcings.
//!
//! Parse errors carry `line:column` positions from the JSON parser.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::piecewise::PiecewiseMatrixPolynomial;
use crate::solve::{ForcingSpec, HistorySpec};
use crate::system::{Delay, DelaySystem, TimeKind};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    d: usize,
    #[serde(rename = "A0")]
    a0: Matrix,
    #[serde(rename = "A1")]
    a1: Matrix,
    kind: TimeKind,
    delay: f64,
}

impl TryFrom<SystemFile> for DelaySystem {
    type Error = Error;

    fn try_from(f: SystemFile) -> Result<Self> {
        for m in [&f.a0, &f.a1] {
            if m.dim() != f.d {
                return Err(Error::DimensionMismatch {
                    expected: f.d,
                    found: m.dim(),
                });
            }
        }
        let delay = match f.kind {
            TimeKind::Continuous => Delay::Continuous(f.delay),
            TimeKind::Discrete => {
                if !(f.delay.fract() == 0.0 && f.delay >= 1.0 && f.delay <= u32::MAX as f64) {
                    return Err(Error::InvalidDelay(format!(
                        "discrete delay must be a positive integer, got {}",
                        f.delay
                    )));
                }
                Delay::Discrete(f.delay as usize)
            }
        };
        DelaySystem::new(f.a0, f.a1, delay)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataFile {
    kind: TimeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    piecewise: Option<PiecewiseMatrixPolynomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<Matrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hold_last: Option<bool>,
}

impl DataFile {
    fn payload(self, what: &str) -> Result<Payload> {
        match (self.kind, self.piecewise, self.values) {
            (TimeKind::Continuous, Some(p), None) if self.hold_last.is_none() => Ok(Payload::Piecewise(p)),
            (TimeKind::Discrete, None, Some(v)) => {
                if v.is_empty() {
                    return Err(Error::Format(format!("{what} has no values")));
                }
                let d = v[0].dim();
                if let Some(bad) = v.iter().find(|m| m.dim() != d) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: bad.dim(),
                    });
                }
                Ok(Payload::Values(v, self.hold_last.unwrap_or(false)))
            }
            (TimeKind::Continuous, _, _) => Err(Error::Format(format!(
                "a continuous {what} needs exactly the field \"piecewise\""
            ))),
            (TimeKind::Discrete, _, _) => Err(Error::Format(format!(
                "a discrete {what} needs the field \"values\" and no \"piecewise\""
            ))),
        }
    }
}

enum Payload {
    Piecewise(PiecewiseMatrixPolynomial),
    Values(Vec<Matrix>, bool),
}

fn position_of_end(text: &str) -> (usize, usize) {
    let trimmed = text.trim_end();
    let line = trimmed.lines().count().max(1);
    let col = trimmed.lines().last().map_or(0, |l| l.chars().count());
    (line, col)
}

fn anchored(source: &str, line: usize, col: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{source}:{line}:{col}: {msg}"))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, source: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(head, _)| head);
        anchored(source, e.line(), e.column(), msg)
    })
}

/// Errors found after parsing point at the end of the document.
fn semantic<T>(text: &str, source: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        let (line, col) = position_of_end(text);
        anchored(source, line, col, e)
    })
}

pub fn parse_system(text: &str, source: &str) -> Result<DelaySystem> {
    let raw: SystemFile = parse_json(text, source)?;
    semantic(text, source, DelaySystem::try_from(raw))
}

pub fn parse_history(text: &str, source: &str) -> Result<HistorySpec> {
    let raw: DataFile = parse_json(text, source)?;
    match semantic(text, source, raw.payload("history"))? {
        Payload::Piecewise(p) => Ok(HistorySpec::Continuous(p)),
        Payload::Values(v, false) => Ok(HistorySpec::Discrete(v)),
        Payload::Values(_, true) => semantic(
            text,
            source,
            Err(Error::Format("\"hold_last\" is only meaningful for a forcing".into())),
        ),
    }
}

pub fn parse_forcing(text: &str, source: &str) -> Result<ForcingSpec> {
    let raw: DataFile = parse_json(text, source)?;
    match semantic(text, source, raw.payload("forcing"))? {
        Payload::Piecewise(p) => Ok(ForcingSpec::Continuous(p)),
        Payload::Values(values, hold_last) => Ok(ForcingSpec::Discrete { values, hold_last }),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn load_system(path: &Path) -> Result<DelaySystem> {
    parse_system(&read(path)?, &path.display().to_string())
}

pub fn load_history(path: &Path) -> Result<HistorySpec> {
    parse_history(&read(path)?, &path.display().to_string())
}

pub fn load_forcing(path: &Path) -> Result<ForcingSpec> {
    parse_forcing(&read(path)?, &path.display().to_string())
}

pub fn system_to_json(sys: &DelaySystem) -> String {
    let f = SystemFile {
        d: sys.dim(),
        a0: sys.a0().clone(),
        a1: sys.a1().clone(),
        kind: sys.kind(),
        delay: sys.delay_value(),
    };
    serde_json::to_string_pretty(&f).expect("system serializes")
}

pub fn history_to_json(psi: &HistorySpec) -> String {
    let f = match psi {
        HistorySpec::Continuous(p) => DataFile {
            kind: TimeKind::Continuous,
            piecewise: Some(p.clone()),
            values: None,
            hold_last: None,
        },
        HistorySpec::Discrete(v) => DataFile {
            kind: TimeKind::Discrete,
            piecewise: None,
            values: Some(v.clone()),
            hold_last: None,
        },
    };
    serde_json::to_string_pretty(&f).expect("history serializes")
}

pub fn forcing_to_json(g: &ForcingSpec) -> String {
    let f = match g {
        ForcingSpec::Continuous(p) => DataFile {
            kind: TimeKind::Continuous,
            piecewise: Some(p.clone()),
            values: None,
            hold_last: None,
        },
        ForcingSpec::Discrete { values, hold_last } => DataFile {
            kind: TimeKind::Discrete,
            piecewise: None,
            values: Some(values.clone()),
            hold_last: Some(*hold_last),
        },
    };
    serde_json::to_string_pretty(&f).expect("forcing serializes")
}
