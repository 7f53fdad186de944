use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};

pub const VERSION: &str = env!("KNNRGG_VERSION");

/// A command's results as a table (CSV) and as structured JSON. Both forms
/// carry the version, master seed and resolved parameters.
pub struct Report {
    pub command: &'static str,
    pub seed: u64,
    pub params: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub results: Value,
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

impl Report {
    pub fn header_lines(command: &str, seed: u64, params: &Value) -> String {
        format!("# knnrgg {VERSION}\n# command: {command}\n# seed: {seed}\n# params: {params}\n")
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let body = String::from_utf8(w.into_inner()?)?;
        Ok(Report::header_lines(self.command, self.seed, &self.params) + &body)
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let doc = json!({
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "params": self.params,
            "results": self.results,
        });
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Writes JSON for a `.json` path, CSV otherwise; stdout without a path.
    pub fn write(&self, out: Option<&Path>) -> anyhow::Result<()> {
        match out {
            Some(p) => {
                let text = if is_json(p) { self.to_json()? } else { self.to_csv()? };
                write_file(p, &text)
            }
            None => {
                std::io::stdout().write_all(self.to_csv()?.as_bytes())?;
                Ok(())
            }
        }
    }
}

pub fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
