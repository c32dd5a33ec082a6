//! CSV and JSON rendering of a result table.

use std::io::Write;

use serde::Serialize;
use sphp_core::table::{Cell, Table};

use crate::config::{Format, Resolved};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Note<'a> {
    pub key: &'a str,
    pub value: &'a str,
}

#[derive(Debug, Serialize)]
pub struct ResultEnvelope<'a> {
    pub version: &'a str,
    pub config_sha256: String,
    pub timestamp: String,
    pub columns: &'a [String],
    pub notes: Vec<Note<'a>>,
    pub rows: &'a [Vec<Cell>],
}

/// CSV with `# key = value` provenance lines; no timestamp, so identical
/// configs give identical bytes.
pub fn render_csv(table: &Table, resolved: &Resolved) -> Vec<u8> {
    let mut notes = vec![
        ("sphp_version".to_string(), VERSION.to_string()),
        ("config_sha256".to_string(), resolved.digest()),
    ];
    notes.extend(table.notes.iter().cloned());
    let stamped = Table {
        notes,
        ..table.clone()
    };
    let mut out = Vec::new();
    stamped.write_csv(&mut out).expect("writing to memory");
    out
}

pub fn render_json(table: &Table, resolved: &Resolved) -> Vec<u8> {
    let envelope = ResultEnvelope {
        version: VERSION,
        config_sha256: resolved.digest(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        columns: &table.columns,
        notes: table
            .notes
            .iter()
            .map(|(key, value)| Note { key, value })
            .collect(),
        rows: &table.rows,
    };
    let mut out = serde_json::to_vec_pretty(&envelope).expect("envelope serializes");
    out.push(b'\n');
    out
}

pub fn emit(table: &Table, resolved: &Resolved) -> Result<(), CliError> {
    let bytes = match resolved.config.output.format {
        Format::Csv => render_csv(table, resolved),
        Format::Json => render_json(table, resolved),
    };
    match &resolved.config.output.path {
        Some(path) => std::fs::write(path, &bytes).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        }),
        None => match std::io::stdout().lock().write_all(&bytes) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            result => result.map_err(|source| CliError::Write {
                path: "<stdout>".into(),
                source,
            }),
        },
    }
}
