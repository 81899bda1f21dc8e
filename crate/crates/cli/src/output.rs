//! Output files: CSV with `#` metadata lines, or pretty JSON.

use std::io::Write;
use std::path::PathBuf;

use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

/// Where results go: files in a directory, or standard output.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::Config(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Self { dir })
    }

    pub fn emit(&self, file_name: &str, contents: &str) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let path = d.join(file_name);
                std::fs::write(&path, contents)
                    .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
                println!("{}", path.display());
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(contents.as_bytes()).map_err(|e| CliError::Config(format!("stdout: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Lossless fixed-width scientific notation (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv(command: &str, cfg: &RunConfig, health: &Value, columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    s.push_str(&format!("# qfpme {command}\n"));
    s.push_str(&format!("# config: {}\n", serde_json::to_string(cfg).expect("serializable config")));
    s.push_str(&format!("# health: {health}\n"));
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
