use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::checks::Check;

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn table(checks: &[Check]) -> String {
    let cw = checks.iter().map(|c| c.curve.len()).max().unwrap_or(5).max(5);
    let nw = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = writeln!(s, "{:<cw$}  {:<nw$}  {:>10}  {:>10}  status", "curve", "check", "value", "threshold");
    for c in checks {
        let _ = writeln!(
            s,
            "{:<cw$}  {:<nw$}  {:>10.3e}  {:>10.1e}  {}",
            c.curve,
            c.name,
            c.value,
            c.threshold,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}
