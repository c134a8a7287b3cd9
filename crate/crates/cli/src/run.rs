//! Output directory and summary plumbing.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<parent>/run-<timestamp>/`, suffixing on collision, and
    /// writes the config snapshot.
    pub fn create(config: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(&config.output)?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut path = config.output.join(format!("run-{stamp}"));
        let mut k = 1;
        loop {
            match fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    k += 1;
                    path = config.output.join(format!("run-{stamp}-{k}"));
                }
                Err(e) => return Err(e),
            }
        }
        let dir = Self { path };
        let snapshot = toml::to_string(config).map_err(io::Error::other)?;
        fs::write(dir.file("config.toml"), snapshot)?;
        Ok(dir)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_with<F>(&self, name: &str, f: F) -> io::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let mut w = BufWriter::new(File::create(self.file(name))?);
        f(&mut w)?;
        w.flush()
    }

    pub fn write_json(&self, name: &str, value: &Value) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.file(name), text)
    }
}

/// Six significant digits.
pub fn round6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string()))
}

/// JSON object builder: every float is stored rounded under its key and in
/// full under `<key>_full`.
#[derive(Default)]
pub struct Summary {
    map: Map<String, Value>,
    checks: Vec<Value>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        let mut s = Self::default();
        s.text("command", command);
        s
    }

    pub fn num(&mut self, key: &str, x: f64) -> &mut Self {
        self.map.insert(key.into(), number(round6(x)));
        self.map.insert(format!("{key}_full"), number(x));
        self
    }

    pub fn opt_num(&mut self, key: &str, x: Option<f64>) -> &mut Self {
        match x {
            Some(x) => self.num(key, x),
            None => self.value(key, Value::Null),
        }
    }

    pub fn text(&mut self, key: &str, s: impl Into<String>) -> &mut Self {
        self.value(key, Value::String(s.into()))
    }

    pub fn flag(&mut self, key: &str, b: bool) -> &mut Self {
        self.value(key, Value::Bool(b))
    }

    pub fn value(&mut self, key: &str, v: Value) -> &mut Self {
        self.map.insert(key.into(), v);
        self
    }

    pub fn serialized<T: Serialize>(&mut self, key: &str, v: &T) -> &mut Self {
        let v = serde_json::to_value(v).unwrap_or(Value::Null);
        self.value(key, v)
    }

    pub fn check(&mut self, name: &str, measured: f64, target: &str, pass: bool) -> &mut Self {
        let mut c = Map::new();
        c.insert("name".into(), Value::String(name.into()));
        c.insert("measured".into(), number(round6(measured)));
        c.insert("measured_full".into(), number(measured));
        c.insert("target".into(), Value::String(target.into()));
        c.insert("pass".into(), Value::Bool(pass));
        self.checks.push(Value::Object(c));
        self
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c["pass"] == Value::Bool(true))
            && self.map.get("aborted") != Some(&Value::Bool(true))
    }

    pub fn finish(mut self) -> (Value, bool) {
        let pass = self.pass();
        self.map.insert("checks".into(), Value::Array(self.checks));
        self.map.insert("pass".into(), Value::Bool(pass));
        (Value::Object(self.map), pass)
    }
}

pub fn display_path(p: &Path) -> String {
    p.display().to_string()
}
