//! Scenario files in TOML.
//!
//! One file describes one [`Scenario`]; keys mirror its fields exactly:
//!
//! ```toml
//! noise_var = 1.0
//! beta1 = 0.7
//! beta2 = 0.0
//! alpha = 0.0
//! arch = "HSU"          # HU, HSU or HUS
//! csit = "perfect"      # perfect or none
//! sleep_enabled = false
//!
//! [harvest]
//! support = [0.5, 1.0]
//! probs = [0.6, 0.4]
//!
//! [fade]
//! support = [0.4, 0.8, 1.0]
//! probs = [0.4, 0.5, 0.1]
//! ```
//!
//! Errors carry the line and column they refer to.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Scenario;

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, col)
}

/// Line of the first `key = ...` assignment, for errors found after parsing.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Parses and validates a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                Error::Config(format!("line {line}, column {col}: {msg}"))
            }
            None => Error::Config(msg),
        }
    })?;
    scenario.check().map_err(|e| {
        let line = match &e {
            Error::InvalidParameter { name, .. } => key_line(text, name),
            _ => None,
        };
        match line {
            Some(line) => Error::Config(format!("line {line}: {e}")),
            None => Error::Config(e.to_string()),
        }
    })?;
    Ok(scenario)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes a scenario; parsing the output gives back the same value.
pub fn scenario_to_toml(s: &Scenario) -> Result<String> {
    toml::to_string(s).map_err(|e| Error::Config(e.to_string()))
}

pub fn save_scenario(path: &Path, s: &Scenario) -> Result<()> {
    let text = scenario_to_toml(s)?;
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
