//! Artifact writing: CSV tables with unit comments, JSON records, and the
//! provenance file. Every file is written to a temporary sibling first and
//! renamed into place, so readers never see a partial artifact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// A column of a CSV table: name and physical unit.
pub type Column = (&'static str, &'static str);

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    /// Names of the artifacts written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn write_atomic(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", target.display()));
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        fs::rename(&tmp, &target).map_err(io)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(target)
    }

    /// Writes a CSV table preceded by `# name [unit]` comment lines.
    pub fn csv<R>(&mut self, name: &str, columns: &[Column], rows: R) -> Result<PathBuf, CliError>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = f64>,
    {
        let mut buf = Vec::new();
        for (col, unit) in columns {
            writeln!(buf, "# {col} [{unit}]").expect("writing to memory");
        }
        let mut w = csv::Writer::from_writer(buf);
        let csv_err = |e: csv::Error| CliError::Io(format!("cannot encode {name}: {e}"));
        w.write_record(columns.iter().map(|(c, _)| *c)).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.into_iter().map(format_value)).map_err(csv_err)?;
        }
        let buf = w.into_inner().map_err(|e| CliError::Io(format!("cannot encode {name}: {e}")))?;
        self.write_atomic(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot encode {name}: {e}")))?;
        bytes.push(b'\n');
        self.write_atomic(name, &bytes)
    }
}

/// Shortest round-tripping decimal form.
fn format_value(v: f64) -> String {
    format!("{v:e}")
}

/// What every run records about itself.
#[derive(Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub command: &'a str,
    pub cli_version: &'a str,
    pub core_version: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub outputs: Vec<String>,
    pub exit_code: u8,
    /// Excluded from reproducibility comparisons.
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_units_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let path = out.csv("t.csv", &[("r", "length"), ("rho", "mass/length^3")], vec![vec![0.5, 1.0], vec![1.0, 0.25]]).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, "# r [length]\n# rho [mass/length^3]\nr,rho\n5e-1,1e0\n1e0,2.5e-1\n");
        assert_eq!(out.written(), ["t.csv"]);
        assert!(!dir.path().join(".t.csv.tmp").exists());
    }

    #[test]
    fn values_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }
}
