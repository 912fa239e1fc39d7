use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Shortest round-trip form, switching to exponent notation for very large
/// or small magnitudes; infinities print as `inf`, NaN as `NaN`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn special_values() {
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(3.5e-52), "3.5e-52");
        assert_eq!(num(f64::NAN), "NaN");
    }
}
