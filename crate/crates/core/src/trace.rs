//! Execution traces and their text and JSON renderings.
//!
//! JSON layout (field order fixed):
//!
//! ```text
//! { "format_version": 1, "bat_digest": "<sha256>",
//!   "oracle": {"seed": N} | {"script": [v, ...]},
//!   "steps": [{"i": 1, "issued": "move(-1)", "actual": "move(-1, 0)",
//!              "observed": "move(-1, _)", "belief": [{"world": {...}, "weight": "p/q"}]}],
//!   "status": "completed" | "failed" | "step-limit", "reason": "..." }
//! ```
//!
//! `belief` is present only when snapshots were requested, `reason` only for
//! failures, and `warnings` only when nonempty.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{GroundAction, IssuedAction, Observation};
use crate::belief::WeightedWorld;
use crate::logic::Value;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSource {
    Seed(u64),
    Script(Vec<Value>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Completed,
    Failed(String),
    StepLimit,
}

impl Status {
    pub fn is_completed(&self) -> bool {
        matches!(self, Status::Completed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    /// 1-based position in the trace.
    pub index: usize,
    pub issued: IssuedAction,
    pub actual: GroundAction,
    pub observed: Observation,
    pub belief: Option<Vec<WeightedWorld>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub bat_digest: String,
    pub oracle: OracleSource,
    pub steps: Vec<TraceStep>,
    pub status: Status,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceStyle {
    Text,
    Json,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported trace format version {0}")]
    Version(u32),
    #[error("malformed action term {0:?}")]
    Action(String),
    #[error("unknown status {0:?}")]
    Status(String),
    #[error("step {0} is out of sequence")]
    Index(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OracleJson {
    Seed(u64),
    Script(Vec<Value>),
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    i: usize,
    issued: String,
    actual: String,
    observed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    belief: Option<Vec<WeightedWorld>>,
}

#[derive(Serialize, Deserialize)]
struct TraceJson {
    format_version: u32,
    bat_digest: String,
    oracle: OracleJson,
    steps: Vec<StepJson>,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl Trace {
    /// The executed ground actions.
    pub fn actions(&self) -> Vec<&GroundAction> {
        self.steps.iter().map(|s| &s.actual).collect()
    }

    /// `⟨a1, a2, ...⟩` with the actual outcome arguments.
    pub fn to_text(&self) -> String {
        let mut out = String::from("⟨");
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}", s.actual);
        }
        out.push('⟩');
        out
    }

    pub fn to_json(&self) -> String {
        let (status, reason) = match &self.status {
            Status::Completed => ("completed", None),
            Status::Failed(r) => ("failed", Some(r.clone())),
            Status::StepLimit => ("step-limit", None),
        };
        let doc = TraceJson {
            format_version: FORMAT_VERSION,
            bat_digest: self.bat_digest.clone(),
            oracle: match &self.oracle {
                OracleSource::Seed(s) => OracleJson::Seed(*s),
                OracleSource::Script(v) => OracleJson::Script(v.clone()),
            },
            steps: self
                .steps
                .iter()
                .map(|s| StepJson {
                    i: s.index,
                    issued: s.issued.to_string(),
                    actual: s.actual.to_string(),
                    observed: s.observed.to_string(),
                    belief: s.belief.clone(),
                })
                .collect(),
            status: status.to_string(),
            reason,
            warnings: self.warnings.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("trace serialization is infallible");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Trace, TraceError> {
        let doc: TraceJson = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(TraceError::Version(doc.format_version));
        }
        let mut steps = Vec::with_capacity(doc.steps.len());
        for (k, s) in doc.steps.into_iter().enumerate() {
            if s.i != k + 1 {
                return Err(TraceError::Index(s.i));
            }
            let (name, args) = parse_call(&s.issued)?;
            let issued = IssuedAction {
                name,
                args: args.into_iter().map(|a| a.ok_or_else(|| TraceError::Action(s.issued.clone()))).collect::<Result<_, _>>()?,
            };
            let (name, args) = parse_call(&s.actual)?;
            let actual = GroundAction {
                name,
                args: args.into_iter().map(|a| a.ok_or_else(|| TraceError::Action(s.actual.clone()))).collect::<Result<_, _>>()?,
            };
            let (name, args) = parse_call(&s.observed)?;
            let observed = Observation { name, args };
            steps.push(TraceStep {
                index: s.i,
                issued,
                actual,
                observed,
                belief: s.belief,
            });
        }
        let status = match (doc.status.as_str(), doc.reason) {
            ("completed", None) => Status::Completed,
            ("step-limit", None) => Status::StepLimit,
            ("failed", Some(r)) => Status::Failed(r),
            (other, _) => return Err(TraceError::Status(other.to_string())),
        };
        Ok(Trace {
            bat_digest: doc.bat_digest,
            oracle: match doc.oracle {
                OracleJson::Seed(s) => OracleSource::Seed(s),
                OracleJson::Script(v) => OracleSource::Script(v),
            },
            steps,
            status,
            warnings: doc.warnings,
        })
    }
}

pub fn emit_trace(trace: &Trace, style: TraceStyle) -> Vec<u8> {
    match style {
        TraceStyle::Text => {
            let mut s = trace.to_text();
            s.push('\n');
            s.into_bytes()
        }
        TraceStyle::Json => trace.to_json().into_bytes(),
    }
}

/// Parses `name(a, b, _)`; `_` yields `None`.
fn parse_call(text: &str) -> Result<(Arc<str>, Vec<Option<Value>>), TraceError> {
    let bad = || TraceError::Action(text.to_string());
    let open = text.find('(').ok_or_else(bad)?;
    let inner = text[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    let name = text[..open].trim();
    if name.is_empty() {
        return Err(bad());
    }
    let mut args = Vec::new();
    if !inner.trim().is_empty() {
        for part in inner.split(',') {
            let part = part.trim();
            args.push(match part {
                "_" => None,
                p if p.parse::<i64>().is_ok() => Some(Value::Int(p.parse().unwrap())),
                p if !p.is_empty() && p.chars().all(|c| c.is_alphanumeric() || c == '_') => Some(Value::sym(p)),
                _ => return Err(bad()),
            });
        }
    }
    Ok((Arc::from(name), args))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        Trace {
            bat_digest: "abc".into(),
            oracle: OracleSource::Script(vec![Value::Int(3), Value::Int(0)]),
            steps: vec![
                TraceStep {
                    index: 1,
                    issued: IssuedAction::new("sonar", vec![]),
                    actual: GroundAction::new("sonar", vec![Value::Int(3)]),
                    observed: Observation {
                        name: Arc::from("sonar"),
                        args: vec![Some(Value::Int(3))],
                    },
                    belief: None,
                },
                TraceStep {
                    index: 2,
                    issued: IssuedAction::new("move", vec![Value::Int(-1)]),
                    actual: GroundAction::new("move", vec![Value::Int(-1), Value::Int(0)]),
                    observed: Observation {
                        name: Arc::from("move"),
                        args: vec![Some(Value::Int(-1)), None],
                    },
                    belief: Some(vec![]),
                },
            ],
            status: Status::Failed("script underrun at sonar()".into()),
            warnings: vec![],
        }
    }

    #[test]
    fn text_style() {
        assert_eq!(sample().to_text(), "⟨sonar(3), move(-1, 0)⟩");
        let empty = Trace {
            steps: vec![],
            ..sample()
        };
        assert_eq!(empty.to_text(), "⟨⟩");
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let json = t.to_json();
        assert!(json.find("format_version").unwrap() < json.find("bat_digest").unwrap());
        assert!(json.contains("\"observed\": \"move(-1, _)\""));
        assert_eq!(Trace::from_json(&json).unwrap(), t);
    }

    #[test]
    fn rejects_bad_json() {
        assert!(Trace::from_json("{}").is_err());
        let json = sample().to_json().replace("\"i\": 2", "\"i\": 5");
        assert!(matches!(Trace::from_json(&json), Err(TraceError::Index(5))));
    }
}
