//! File artifacts. Every writer goes through a temporary file in the target
//! directory followed by a rename, so readers never observe partial output.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;
use tempfile::NamedTempFile;

use crate::error::Result;
use crate::trajectory::Trajectory;

/// Writes `path` atomically with the bytes produced by `fill`.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_trajectory_csv(trajectory: &Trajectory, path: &Path) -> Result<()> {
    write_atomic(path, |w| trajectory.write_csv(w))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    Trajectory::read_csv_file(path)
}

/// Pretty JSON with a trailing newline. Object keys come out sorted because
/// `serde_json` maps are ordered.
pub fn report_string(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("Value serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_report_json(report: &Value, path: &Path) -> Result<()> {
    let s = report_string(report);
    write_atomic(path, |w| w.write_all(s.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted() {
        let s = report_string(&json!({"zeta": 1, "alpha": {"y": 2, "b": 3}}));
        let alpha = s.find("alpha").unwrap();
        assert!(alpha < s.find("zeta").unwrap());
        assert!(s.find("\"b\"").unwrap() < s.find("\"y\"").unwrap());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_report_json(&json!([1]), &p).unwrap();
        write_report_json(&json!([]), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "[]\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
