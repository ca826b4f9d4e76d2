use serde::{Deserialize, Serialize};

use crate::datagen::TurnPair;
use crate::error::{Error, Result};

/// Schema version written on every corpus line.
pub const CORPUS_VERSION: u32 = 1;

#[derive(Serialize)]
struct RecordOut<'a> {
    version: u32,
    #[serde(flatten)]
    pair: &'a TurnPair,
}

#[derive(Deserialize)]
struct RecordIn {
    version: u32,
    #[serde(flatten)]
    pair: TurnPair,
}

/// One JSON object per line:
/// `{"version":1,"first_asr":"...","followup":"...","reference":"...","is_correction":true,"error_span":[2,2]}`.
pub fn write_corpus(pairs: &[TurnPair]) -> Result<String> {
    let mut out = String::new();
    for pair in pairs {
        out.push_str(&serde_json::to_string(&RecordOut { version: CORPUS_VERSION, pair })?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses [`write_corpus`] output. Blank lines are skipped; any other line
/// must carry version [`CORPUS_VERSION`] and a valid pair.
pub fn read_corpus(text: &str) -> Result<Vec<TurnPair>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(CORPUS_VERSION) => {}
            Some(v) => return Err(Error::SchemaVersion(u32::try_from(v).unwrap_or(u32::MAX))),
            None => return Err(Error::Parse { line: i + 1, message: "missing version field".into() }),
        }
        let record: RecordIn = serde_json::from_value(value).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        debug_assert_eq!(record.version, CORPUS_VERSION);
        record.pair.validate().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        pairs.push(record.pair);
    }
    Ok(pairs)
}
