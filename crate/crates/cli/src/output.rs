//! Run directory: config.json, manifest.json and the artifacts, each stamped
//! with the config hash and the crate version. Nothing time dependent is
//! written, so reruns are byte identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsii_core::{Error, Field, Result, VERSION};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub struct Run {
    dir: PathBuf,
    command: String,
    hash: String,
    artifacts: Vec<String>,
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidConfig(format!("serialise: {e}")))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::InvalidConfig(format!("serialise: {e}")))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

impl Run {
    pub fn start(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let run = Run { dir: dir.to_path_buf(), command: command.to_string(), hash: cfg.hash(), artifacts: Vec::new() };
        let _ = fs::remove_file(dir.join("error.json"));
        write_json(&dir.join("config.json"), &run.stamp(to_value(cfg)?))?;
        run.manifest("incomplete", None)?;
        Ok(run)
    }

    fn stamp(&self, v: Value) -> Value {
        match v {
            Value::Object(mut m) => {
                m.insert("config_hash".into(), Value::String(self.hash.clone()));
                m.insert("version".into(), Value::String(VERSION.into()));
                Value::Object(m)
            }
            other => json!({"config_hash": self.hash, "version": VERSION, "result": other}),
        }
    }

    fn manifest(&self, status: &str, error: Option<&Value>) -> Result<()> {
        let mut m = json!({
            "command": self.command,
            "status": status,
            "artifacts": self.artifacts,
        });
        if let Some(e) = error {
            m["error"] = e.clone();
        }
        write_json(&self.dir.join("manifest.json"), &self.stamp(m))
    }

    fn record(&mut self, path: &Path) {
        let name = match path.strip_prefix(&self.dir) {
            Ok(rel) => rel.display().to_string(),
            Err(_) => path.display().to_string(),
        };
        if !self.artifacts.contains(&name) {
            self.artifacts.push(name);
        }
    }

    pub fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let path = self.dir.join(name);
        write_json(&path, &self.stamp(to_value(v)?))?;
        self.record(&path);
        Ok(())
    }

    /// Writes to `path` if given, else to `name` inside the run directory.
    pub fn csv(&mut self, path: Option<&Path>, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = path.map(Path::to_path_buf).unwrap_or_else(|| self.dir.join(name));
        let mut s = format!("# config_hash={}\n# version={VERSION}\n{}\n", self.hash, header.join(","));
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        fs::write(&path, s)?;
        self.record(&path);
        Ok(())
    }

    pub fn field(&mut self, name: &str, f: &Field) -> Result<()> {
        let meta = BTreeMap::from([
            ("config_hash".to_string(), self.hash.clone()),
            ("version".to_string(), VERSION.to_string()),
        ]);
        let path = self.dir.join(name);
        dsii_core::io::save_with_meta(f, &meta, &path)?;
        self.record(&path);
        Ok(())
    }

    /// `|f|` as a matrix (rows = y, top row = smallest y) plus a gnuplot script.
    pub fn heatmap(&mut self, stem: &str, f: &Field) -> Result<()> {
        let n = f.n();
        let mut s = format!("# config_hash={}\n# version={VERSION}\n", self.hash);
        for row in 0..n {
            let line: Vec<String> = (0..n).map(|col| format!("{:.9e}", f.at(row, col).norm())).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        let csv = self.dir.join(format!("{stem}.csv"));
        fs::write(&csv, s)?;
        self.record(&csv);

        let p = f.plane();
        let lo = p.point(0, 0);
        let hi = p.point(n - 1, n - 1);
        let mut gp = String::new();
        let _ = writeln!(gp, "# config_hash={}\n# version={VERSION}", self.hash);
        let _ = writeln!(gp, "set datafile separator ','");
        let _ = writeln!(gp, "set size ratio -1\nset xlabel 'x'\nset ylabel 'y'\nset cblabel '|q|'");
        let _ = writeln!(gp, "set xrange [{}:{}]\nset yrange [{}:{}]", lo.re, hi.re, lo.im, hi.im);
        let _ = writeln!(
            gp,
            "plot '{stem}.csv' matrix using ({}+$1*{}):({}+$2*{}):3 with image notitle",
            lo.re, p.spacing, lo.im, p.spacing
        );
        let gpath = self.dir.join(format!("{stem}.gp"));
        fs::write(&gpath, gp)?;
        self.record(&gpath);
        Ok(())
    }

    /// Final manifest; on failure also error.json.
    pub fn finish(&mut self, err: Option<&Error>) -> Result<()> {
        match err {
            None => self.manifest("complete", None),
            Some(e) => {
                let body = json!({"class": format!("{:?}", e.class()).to_lowercase(), "message": e.to_string()});
                write_json(&self.dir.join("error.json"), &self.stamp(json!({"error": body})))?;
                self.manifest("incomplete", Some(&body))
            }
        }
    }
}

/// error.json for failures before a run directory is set up.
pub fn write_error(dir: &Path, e: &Error) {
    let body = json!({"error": {"class": format!("{:?}", e.class()).to_lowercase(), "message": e.to_string()}, "version": VERSION});
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_json(&dir.join("error.json"), &body);
    }
}
