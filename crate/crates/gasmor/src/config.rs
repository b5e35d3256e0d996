//! INI-style key/value files: the global configuration and the shared parser used by
//! scenario files.

use crate::error::{Error, Result};
use crate::gasmodel::{CompressibilityVariant, CriticalPoint, FrictionVariant, ModelConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Parsed `key = value` document with optional `[section]` headers. Keys outside
/// any section belong to the section "".
#[derive(Clone, Debug, Default)]
pub struct Ini {
    entries: Vec<IniEntry>,
}

#[derive(Clone, Debug)]
struct IniEntry {
    section: String,
    key: String,
    value: String,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries: Vec<IniEntry> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line: no + 1, msg: "unterminated section header".into() })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: no + 1, msg: format!("expected key = value, got `{line}`") })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse { line: no + 1, msg: "empty key".into() });
            }
            if entries.iter().any(|e| e.section == section && e.key == key) {
                return Err(Error::Parse { line: no + 1, msg: format!("duplicate key `{key}`") });
            }
            entries.push(IniEntry { section: section.clone(), key, value: v.trim().to_string() });
        }
        Ok(Ini { entries })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.section == section && e.key == key).map(|e| e.value.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn keys<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |e| e.section == section).map(|e| e.key.as_str())
    }
}

/// Splits a list value on whitespace and commas.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Invalid(format!("{key}: `{t}` is not a number"))))
        .collect()
}

pub fn parse_scalar(key: &str, value: &str) -> Result<f64> {
    let v = parse_list(key, value)?;
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::Invalid(format!("{key}: expected one number, got {}", v.len()))),
    }
}

/// Training input waveform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputShape {
    Impulse,
    Step,
    Binary,
    Gauss,
}

impl std::str::FromStr for InputShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "impulse" => Ok(InputShape::Impulse),
            "step" => Ok(InputShape::Step),
            "binary" | "random-binary" => Ok(InputShape::Binary),
            "gauss" => Ok(InputShape::Gauss),
            _ => Err(Error::Invalid(format!("unknown input shape `{s}`"))),
        }
    }
}

/// Global configuration, read from a `gasmor.ini` file.
///
/// ```ini
/// [parameters]
/// T0 = 273.15 288.15     # kelvin
/// RS = 500 600           # J/(kg K)
/// [model]
/// vmax = 20
/// eps = 0.01
/// friction = schifrinson
/// compressibility = aga88
/// viscosity = 1e-5
/// pc = 46.4e5
/// tc = 192
/// [solver]
/// dt = 60
/// solver = imex1
/// gamma = 1
/// lambda = 0.5
/// [training]
/// horizon = 3600
/// shape = step
/// scale = 0.01
/// [steady]
/// tol = 1e-9
/// corrections = 10
/// [bench]
/// orders = 150
/// samples = 5
/// seed = 1009
/// [cache]
/// dir = .gasmor-cache
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    pub t0_range: (f64, f64),
    pub rs_range: (f64, f64),
    pub v_max: f64,
    pub eps: f64,
    pub model: ModelConfig,
    pub dt: f64,
    pub solver: String,
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: f64,
    pub shape: InputShape,
    pub scale: f64,
    pub steady_tol: f64,
    pub steady_corrections: usize,
    pub order_max: usize,
    pub test_samples: usize,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            t0_range: (273.15, 288.15),
            rs_range: (500.0, 600.0),
            v_max: 20.0,
            eps: 0.01,
            model: ModelConfig::default(),
            dt: 60.0,
            solver: "imex1".into(),
            gamma: 1.0,
            lambda: 0.5,
            horizon: 3600.0,
            shape: InputShape::Step,
            scale: 0.01,
            steady_tol: 1e-9,
            steady_corrections: 10,
            order_max: 150,
            test_samples: 5,
            seed: 1009,
            cache_dir: None,
        }
    }
}

impl GlobalConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses a configuration; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::parse(text)?;
        let mut c = GlobalConfig::default();
        let range = |key: &str, v: &str| -> Result<(f64, f64)> {
            let l = parse_list(key, v)?;
            match l.as_slice() {
                [a, b] if a < b => Ok((*a, *b)),
                _ => Err(Error::Invalid(format!("{key}: expected an increasing pair"))),
            }
        };
        let num = |sec: &str, key: &str, dst: &mut f64| -> Result<()> {
            if let Some(v) = ini.get(sec, key) {
                *dst = parse_scalar(key, v)?;
            }
            Ok(())
        };
        if let Some(v) = ini.get("parameters", "T0") {
            c.t0_range = range("T0", v)?;
        }
        if let Some(v) = ini.get("parameters", "RS") {
            c.rs_range = range("RS", v)?;
        }
        num("model", "vmax", &mut c.v_max)?;
        num("model", "eps", &mut c.eps)?;
        num("model", "viscosity", &mut c.model.viscosity)?;
        let mut crit = c.model.critical;
        num("model", "pc", &mut crit.pc)?;
        num("model", "tc", &mut crit.tc)?;
        c.model.critical = CriticalPoint { pc: crit.pc, tc: crit.tc };
        if let Some(v) = ini.get("model", "friction") {
            c.model.friction = v.parse::<FrictionVariant>()?;
        }
        if let Some(v) = ini.get("model", "compressibility") {
            c.model.compressibility = v.parse::<CompressibilityVariant>()?;
        }
        num("solver", "dt", &mut c.dt)?;
        num("solver", "gamma", &mut c.gamma)?;
        num("solver", "lambda", &mut c.lambda)?;
        if let Some(v) = ini.get("solver", "solver") {
            c.solver = v.to_string();
        }
        num("training", "horizon", &mut c.horizon)?;
        num("training", "scale", &mut c.scale)?;
        if let Some(v) = ini.get("training", "shape") {
            c.shape = v.parse()?;
        }
        num("steady", "tol", &mut c.steady_tol)?;
        let mut tmp = c.steady_corrections as f64;
        num("steady", "corrections", &mut tmp)?;
        c.steady_corrections = tmp as usize;
        let mut tmp = c.order_max as f64;
        num("bench", "orders", &mut tmp)?;
        c.order_max = tmp as usize;
        let mut tmp = c.test_samples as f64;
        num("bench", "samples", &mut tmp)?;
        c.test_samples = tmp as usize;
        let mut tmp = c.seed as f64;
        num("bench", "seed", &mut tmp)?;
        c.seed = tmp as u64;
        if let Some(v) = ini.get("cache", "dir") {
            c.cache_dir = Some(PathBuf::from(v));
        }
        if !(c.v_max > 0.0 && c.dt > 0.0 && c.horizon > 0.0 && (0.0..1.0).contains(&c.eps)) {
            return Err(Error::Invalid("vmax, dt and horizon must be positive and 0 <= eps < 1".into()));
        }
        Ok(c)
    }
}
