//! Per-run metrics CSV: one `# meta:` line, the fixed header, then one row per iteration.

use std::collections::BTreeMap;

use discor_core::diagnostics::RunRecord;

use crate::error::{LabError, LabResult};

const META_PREFIX: &str = "# meta:";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsCsv {
    /// Whitespace-separated `key=value` pairs; values may not contain whitespace.
    pub meta: BTreeMap<String, String>,
    pub records: Vec<RunRecord>,
}

fn bad(message: impl Into<String>) -> LabError {
    LabError::Runtime(format!("metrics csv: {}", message.into()))
}

impl MetricsCsv {
    pub fn to_text(&self) -> String {
        let mut out = String::from(META_PREFIX);
        for (k, v) in &self.meta {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(RunRecord::COLUMNS).expect("in-memory write");
        for r in &self.records {
            let metrics = r.metrics();
            let row = std::iter::once(r.iter.to_string()).chain(metrics.iter().map(|v| format!("{v:.16e}")));
            w.write_record(row).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ascii"));
        out
    }

    pub fn parse(text: &str) -> LabResult<Self> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let meta_text = first
            .strip_prefix(META_PREFIX)
            .ok_or_else(|| bad("first line must start with `# meta:`"))?;
        let mut meta = BTreeMap::new();
        for pair in meta_text.split_whitespace() {
            let (k, v) = pair.split_once('=').ok_or_else(|| bad(format!("meta entry `{pair}` is not key=value")))?;
            if k.is_empty() || meta.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(format!("bad or duplicate meta key `{k}`")));
            }
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(RunRecord::COLUMNS) {
            return Err(bad(format!("header must be `{}`", RunRecord::COLUMNS.join(","))));
        }
        let mut records = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let line = i + 3;
            if row.len() != RunRecord::COLUMNS.len() {
                return Err(bad(format!("line {line}: expected {} fields", RunRecord::COLUMNS.len())));
            }
            let iter: usize = row[0].parse().map_err(|_| bad(format!("line {line}: iter `{}` is not an integer", &row[0])))?;
            let mut m = [0.0; 14];
            for (j, slot) in m.iter_mut().enumerate() {
                let field = &row[j + 1];
                *slot = field
                    .parse()
                    .map_err(|_| bad(format!("line {line}: {} `{field}` is not a number", RunRecord::COLUMNS[j + 1])))?;
            }
            records.push(RunRecord::from_metrics(iter, m));
        }
        Ok(MetricsCsv { meta, records })
    }
}

/// File-name-safe form of an environment id.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}
