use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{tally, TallyTranscript};
use crate::canonical;
use crate::ledger::{EventLog, Ledger};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDiff {
    /// JSON path of the mismatching field, e.g. `result.counts.valid`.
    pub path: String,
    pub expected: Value,
    pub found: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub diffs: Vec<FieldDiff>,
}

impl VerifyReport {
    fn failure(path: &str, expected: Value, found: Value) -> Self {
        VerifyReport { ok: false, diffs: vec![FieldDiff { path: path.to_owned(), expected, found }] }
    }
}

fn diff_values(path: &str, expected: &Value, found: &Value, out: &mut Vec<FieldDiff>) {
    match (expected, found) {
        (Value::Object(a), Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                diff_values(
                    &child,
                    a.get(key).unwrap_or(&Value::Null),
                    b.get(key).unwrap_or(&Value::Null),
                    out,
                );
            }
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                diff_values(&format!("{path}[{i}]"), x, y, out);
            }
        }
        _ if expected != found => out.push(FieldDiff {
            path: path.to_owned(),
            expected: expected.clone(),
            found: found.clone(),
        }),
        _ => {}
    }
}

/// Replays the public log (up to the transcript's anchor, if any), re-runs
/// the tally and compares every field of the result.
pub fn verify_transcript(transcript: &TallyTranscript, log: &EventLog) -> VerifyReport {
    let prefix = match transcript.anchor {
        Some(anchor) => {
            if anchor.events > log.len() {
                return VerifyReport::failure(
                    "anchor.events",
                    Value::from(log.len()),
                    Value::from(anchor.events),
                );
            }
            let mut prefix = EventLog::new();
            for record in &log.records()[..anchor.events] {
                let next = prefix.next_record(record.event.clone());
                prefix.push(next);
            }
            if prefix.head() != anchor.head {
                return VerifyReport::failure(
                    "anchor.head",
                    Value::from(prefix.head().to_hex()),
                    Value::from(anchor.head.to_hex()),
                );
            }
            prefix
        }
        None => log.clone(),
    };

    let state = match Ledger::replay(&prefix) {
        Ok(ledger) => match ledger.session() {
            Some(state) => state.clone(),
            None => return VerifyReport::failure("log", Value::from("session"), Value::Null),
        },
        Err(e) => return VerifyReport::failure("log", Value::from("replayable log"), Value::from(e.to_string())),
    };
    let mut recomputed = match tally(&state) {
        Ok(t) => t,
        Err(e) => return VerifyReport::failure("tally", Value::from("tally succeeds"), Value::from(e.to_string())),
    };
    recomputed.anchor = transcript.anchor;

    let mut diffs = Vec::new();
    diff_values("", &canonical::to_value(&recomputed), &canonical::to_value(transcript), &mut diffs);
    VerifyReport { ok: diffs.is_empty(), diffs }
}
