//! Effective-parameter resolution: flag, then config file, then profile default.
//! Every resolved value is recorded for the config echo.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kirigami::geometry::GridShape;
use kirigami::pipeline::{Problem, DEFAULT_PHI};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Full,
    Desk,
}

pub struct Settings {
    file: BTreeMap<String, String>,
    echo: Map<String, Value>,
    pub profile: Profile,
}

fn file_entries(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let obj: Map<String, Value> =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("bad config JSON: {e}")))?;
        for (k, v) in obj {
            let s = match v {
                Value::String(s) => s,
                Value::Null => continue,
                other => other.to_string(),
            };
            out.insert(k, s);
        }
        return Ok(out);
    }
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn new(config: Option<&PathBuf>, profile_flag: Option<String>) -> Result<Self, CliError> {
        let file = match config {
            Some(p) => file_entries(p)?,
            None => BTreeMap::new(),
        };
        let mut s = Self { file, echo: Map::new(), profile: Profile::Full };
        let name: String = s.get("profile", profile_flag, "full".to_string())?;
        s.profile = match name.as_str() {
            "full" => Profile::Full,
            "desk" => Profile::Desk,
            other => return Err(CliError::config(format!("unknown profile {other}"))),
        };
        Ok(s)
    }

    fn record(&mut self, key: &str, v: Value) {
        self.echo.insert(key.to_string(), v);
    }

    /// Resolve `key`; the echo stores the value as a JSON number/bool when it parses as one.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(s) => s.parse().map_err(|e| CliError::config(format!("bad value for {key}: {e}")))?,
                None => default,
            },
        };
        self.record_value(key, &v);
        Ok(v)
    }

    fn record_value<T: Display>(&mut self, key: &str, v: &T) {
        let text = v.to_string();
        let json = match serde_json::from_str::<Value>(&text) {
            Ok(n @ (Value::Number(_) | Value::Bool(_))) => n,
            _ => Value::String(text),
        };
        self.record(key, json);
    }

    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key).map(String::as_str) {
                None | Some("null") => None,
                Some(s) => Some(s.parse().map_err(|e| CliError::config(format!("bad value for {key}: {e}")))?),
            },
        };
        match &v {
            Some(v) => self.record_value(key, v),
            None => self.record(key, Value::Null),
        }
        Ok(v)
    }

    pub fn problem(&mut self, grid: Option<String>, phi: Option<f64>, raster: Option<usize>, tau_ov: Option<f64>, tau_siou: Option<f64>) -> Result<Problem, CliError> {
        let grid: String = self.get("grid", grid, "10x10".to_string())?;
        let shape = parse_grid(&grid)?;
        let phi = self.get("phi", phi, DEFAULT_PHI)?;
        let raster = self.get("raster", raster, 128usize)?;
        let tau_ov = self.get("tau_ov", tau_ov, 0.02)?;
        let tau_siou = self.get("tau_siou", tau_siou, 0.85)?;
        let mut p = Problem::new(shape, phi)?;
        p.raster.width = raster;
        p.raster.height = raster;
        p.reward.tau_ov = tau_ov;
        p.reward.tau_siou = tau_siou;
        Ok(p)
    }

    /// Write the echo with the subcommand name and artifact version.
    pub fn write_echo(&self, subcommand: &str, path: &Path) -> Result<(), CliError> {
        let mut obj = self.echo.clone();
        obj.insert("subcommand".into(), Value::String(subcommand.into()));
        obj.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(CliError::io)?;
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("echo serializes") + "\n";
        std::fs::write(path, text).map_err(CliError::io)
    }
}

pub fn parse_grid(s: &str) -> Result<GridShape, CliError> {
    let (m, n) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (a.trim().parse::<usize>(), b.trim().parse::<usize>()),
        None => (s.trim().parse::<usize>(), s.trim().parse::<usize>()),
    };
    match (m, n) {
        (Ok(m), Ok(n)) => Ok(GridShape::new(m, n)?),
        _ => Err(CliError::config(format!("bad grid {s:?}; expected N or MxN"))),
    }
}

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| CliError::config(format!("bad {what} {t:?}: {e}"))))
        .collect()
}
