//! Plain-text event files: one observation per row, columns separated by
//! whitespace or commas, `#` starts a comment line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{GofError, Result};
use crate::sample::Sample;

/// Parses event-file text. `origin` only labels error messages.
pub fn parse_events(text: &str, origin: &str) -> Result<Sample> {
    let err = |line: usize, message: String| GofError::EventFile {
        path: origin.to_string(),
        line,
        message,
    };
    let mut dim = None;
    let mut data = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = 0;
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(lineno, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("`{tok}` is not finite")));
            }
            data.push(v);
            cols += 1;
        }
        match dim {
            None => dim = Some(cols),
            Some(d) if d != cols => {
                return Err(err(lineno, format!("expected {d} columns, found {cols}")))
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| err(0, "no observations".into()))?;
    Sample::from_flat(dim, data)
}

pub fn read_event_file(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path).map_err(|e| GofError::EventFile {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_events(&text, &path.display().to_string())
}

/// Formats a sample with shortest round-trip decimals, so reading the
/// text back gives identical values.
pub fn format_events(sample: &Sample) -> String {
    let mut s = String::new();
    for p in sample.points() {
        for (j, v) in p.iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v:?}");
        }
        s.push('\n');
    }
    s
}

pub fn write_event_file(path: &Path, sample: &Sample) -> Result<()> {
    std::fs::write(path, format_events(sample))?;
    Ok(())
}
