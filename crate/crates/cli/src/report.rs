use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "yes" } else { "no" }.into())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Formats `v` with nine significant digits in plain notation where that
/// stays readable, trailing zeros removed.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan"
        } else if v > 0.0 {
            "inf"
        } else {
            "-inf"
        }
        .into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Rectangular table with a unit for every column.
#[derive(Debug, Clone)]
pub struct ReportTable {
    columns: Vec<(String, String)>,
    rows: Vec<Vec<Cell>>,
}

impl ReportTable {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|(n, u)| (n.to_string(), u.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    /// CSV with a unit row under the header and a `# run` footer.
    pub fn to_csv(&self, run_id: &str) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>, rec: Vec<String>| {
            w.write_record(&rec).expect("in-memory csv write");
        };
        write(&mut w, self.columns.iter().map(|c| c.0.clone()).collect());
        write(&mut w, self.columns.iter().map(|c| c.1.clone()).collect());
        for row in &self.rows {
            write(
                &mut w,
                row.iter()
                    .map(|c| match c {
                        Cell::Num(v) => format_number(*v),
                        Cell::Text(s) => s.clone(),
                        Cell::Empty => String::new(),
                    })
                    .collect(),
            );
        }
        let mut out = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        out.push_str(&format!("# run {run_id}\n"));
        out
    }

    pub fn write(&self, dir: &Path, name: &str, run_id: &str) -> io::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.to_csv(run_id))?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Provenance of a run. `run_id` hashes everything that determines the
/// outputs; timings and the timestamp do not enter it.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub scenario_path: Option<String>,
    pub scenario_sha256: String,
    pub mechanism: Option<String>,
    pub seed: u64,
    pub run_id: String,
    pub created_unix_s: u64,
    pub timings: Vec<StageTime>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        scenario_path: Option<&Path>,
        scenario_text: &str,
        mechanism: Option<String>,
        seed: u64,
    ) -> Self {
        let scenario_sha256 = sha256_hex(scenario_text.as_bytes());
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let key = format!(
            "{tool_version}\n{command}\n{scenario_sha256}\n{}\n{seed}",
            mechanism.as_deref().unwrap_or("")
        );
        Self {
            tool_version,
            command: command.to_string(),
            scenario_path: scenario_path.map(|p| p.display().to_string()),
            scenario_sha256,
            mechanism,
            seed,
            run_id: sha256_hex(key.as_bytes())[..16].to_string(),
            created_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            timings: Vec::new(),
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timings.push(StageTime {
            stage: stage.to_string(),
            seconds: seconds.max(0.0),
        });
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(self).expect("manifest serializes") + "\n",
        )?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_number(2300.0), "2300");
        assert_eq!(format_number(63.44123456789), "63.4412346");
        assert_eq!(format_number(-0.000123456789123), "-0.000123456789");
        assert_eq!(format_number(413416.5), "413416.5");
        assert_eq!(format_number(1.0e20), "1.00000000e20");
        assert_eq!(format_number(0.0), "0");
    }

    #[test]
    fn unit_row_and_footer() {
        let mut t = ReportTable::new(&[("price", "CNY/t"), ("label", "")]);
        t.push(vec![Cell::from(1.5), Cell::from("a,b")]);
        let csv = t.to_csv("abc");
        assert_eq!(csv, "price,label\nCNY/t,\n1.5,\"a,b\"\n# run abc\n");
    }
}
