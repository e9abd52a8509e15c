use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use kinfront::io::{write_key_values, Meta};

/// Collects parameters and written files of one run; writes the manifest.
pub struct Ctx {
    dir: PathBuf,
    command: &'static str,
    params: Vec<(String, String)>,
    files: Vec<String>,
    summary: Vec<(String, String)>,
}

impl Ctx {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), command, params: Vec::new(), files: Vec::new(), summary: Vec::new() })
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.param(key, kinfront::io::fmt_num(value));
    }

    /// Registers `name` as an output and returns its path.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    /// Metadata for CSV headers: command and parameters.
    pub fn meta(&self) -> Meta {
        let mut m = vec![("command".to_string(), self.command.to_string())];
        m.extend(self.params.iter().cloned());
        m
    }

    pub fn report(&mut self, key: &str, value: impl Display) {
        println!("{key}={value}");
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn report_num(&mut self, key: &str, value: f64) {
        self.report(key, kinfront::io::fmt_num(value));
    }

    pub fn report_opt(&mut self, key: &str, value: Option<f64>) {
        self.report(key, value.map(kinfront::io::fmt_num).unwrap_or_default());
    }

    /// Writes the key/value summary collected by `report`, if any.
    pub fn write_summary(&mut self) -> Result<()> {
        if self.summary.is_empty() {
            return Ok(());
        }
        let path = self.file("summary.csv");
        let meta = self.meta();
        write_key_values(&path, &meta, &self.summary)?;
        Ok(())
    }

    /// `manifest.csv`: a timestamp comment line, then `kind,key,value` rows.
    pub fn write_manifest(&self, status: &str) -> Result<()> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let path = self.dir.join("manifest.csv");
        let mut buf = format!("# timestamp={stamp}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["kind", "key", "value"])?;
            w.write_record(["artifact", "name", env!("CARGO_PKG_NAME")])?;
            w.write_record(["artifact", "version", env!("CARGO_PKG_VERSION")])?;
            w.write_record(["artifact", "command", self.command])?;
            for (k, v) in &self.params {
                w.write_record(["param", k, v])?;
            }
            for f in &self.files {
                w.write_record(["file", f, ""])?;
            }
            w.write_record(["status", "status", status])?;
            w.flush()?;
        }
        fs::write(&path, buf).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
