use std::fs;
use std::path::Path;

use crate::data::LabelSeries;
use crate::error::{Error, Result};

pub const LABELS_HEADER: &str = "frame_index,label";

/// Parses `frame_index,label` CSV text. Rows may appear in any order but
/// must cover `0..n` exactly once.
pub fn parse_labels_str(text: &str) -> Result<LabelSeries> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    match lines.next() {
        Some(h) if h.trim() == LABELS_HEADER => {}
        other => {
            return Err(Error::Data(format!(
                "labels header must be `{LABELS_HEADER}`, found {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("malformed labels row {}: `{line}`", lineno + 2));
        let (idx, label) = line.split_once(',').ok_or_else(bad)?;
        let idx: usize = idx.trim().parse().map_err(|_| bad())?;
        let label: u8 = label.trim().parse().map_err(|_| bad())?;
        if label > 1 {
            return Err(Error::Data(format!("frame {idx}: label {label} is not 0 or 1")));
        }
        rows.push((idx, label));
    }
    rows.sort_by_key(|r| r.0);
    for (expect, w) in rows.iter().enumerate() {
        if w.0 != expect {
            let msg = if w.0 < expect {
                format!("duplicate frame_index {}", w.0)
            } else {
                format!("missing frame_index {expect}")
            };
            return Err(Error::Data(msg));
        }
    }
    LabelSeries::new(rows.into_iter().map(|r| r.1).collect())
}

pub fn parse_labels(path: &Path) -> Result<LabelSeries> {
    let text = fs::read_to_string(path)?;
    parse_labels_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn labels_to_csv(labels: &LabelSeries) -> String {
    let mut out = String::with_capacity(16 + labels.len() * 8);
    out.push_str(LABELS_HEADER);
    out.push('\n');
    for (i, l) in labels.labels().iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

pub fn write_labels(path: &Path, labels: &LabelSeries) -> Result<()> {
    fs::write(path, labels_to_csv(labels))?;
    Ok(())
}
