//! Plain-text experiment configuration.
//!
//! One `key = value` per line, `#` starts a comment, and a `[section]`
//! header prefixes the keys that follow it, so `[run]` then `m = 10` is the
//! same as `run.m = 10`. Command-line `--set key=value` overrides are
//! applied on top, in order.

use std::collections::BTreeMap;
use std::fmt;

use rcmlab::connfn::ConnectionFunction;
use rcmlab::moments::{DensityRule, ModelConfig};
use rcmlab::quadrature::QuadratureSpec;
use rcmlab::region::Region;
use rcmlab::Dimension;
use sha2::{Digest, Sha256};

/// A configuration error, with the line it came from when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: Origin,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override(usize),
    Whole,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            Origin::Line(n) => write!(f, "config line {n}: {}", self.msg),
            Origin::Override(k) => write!(f, "--set #{k}: {}", self.msg),
            Origin::Whole => write!(f, "config: {}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(origin: Origin, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        origin,
        msg: msg.into(),
    }
}

/// Every key the tool understands with its default. Keys missing here are
/// rejected, which catches typos.
const DEFAULTS: &[(&str, &str)] = &[
    ("model.d", "2"),
    ("model.lambda", "1"),
    ("model.density", "power"),
    ("model.window.lower", "0"),
    ("model.window.sides", "1"),
    ("model.g.kind", "exponential"),
    ("model.g.scale", "1"),
    ("run.n", "2,4,8"),
    ("run.R", "1"),
    ("run.r", "1"),
    ("run.m", "1000"),
    ("run.seed", "1"),
    ("run.workers", "1"),
    ("run.boxes", "4,8,16"),
    ("run.z_max", "auto"),
    ("run.window_side", "auto"),
    ("run.blocks", "2,3,4"),
    ("numerics.rel_tol", "1e-8"),
    ("numerics.abs_tol", "1e-10"),
    ("numerics.max_subdivisions", "4000"),
    ("numerics.tail_eps", "1e-12"),
    ("numerics.bias_eps", "1e-6"),
    ("numerics.ks_threshold", "0.05"),
    ("numerics.density_gap", "0.05"),
    ("numerics.collapse_threshold", "0.25"),
    ("numerics.standardization", "sample"),
    ("numerics.profile", "full"),
    ("output.dir", "."),
    ("output.format", "both"),
];

/// Keys that only steer where and how fast results are produced; they
/// stay out of the config hash.
fn affects_results(key: &str) -> bool {
    !(key.starts_with("output.") || key == "run.workers" || key == "run.seed")
}

/// Optional connection-function keys with no default.
const OPTIONAL: &[&str] = &["model.g.table", "model.g.tail", "model.g.transforms"];

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Raw key/value map after overrides, remembering where each value came
/// from.
#[derive(Clone, Debug)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key) || OPTIONAL.contains(&key)
}

fn split_kv(line: &str, origin: Origin) -> Result<(String, String), ConfigError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| err(origin, format!("expected key = value, found `{line}`")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(err(origin, "empty key"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

impl RawConfig {
    pub fn defaults() -> Self {
        let entries = DEFAULTS
            .iter()
            .map(|(k, v)| {
                (
                    k.to_string(),
                    Entry {
                        value: v.to_string(),
                        origin: Origin::Whole,
                    },
                )
            })
            .collect();
        RawConfig { entries }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let origin = Origin::Line(line_no);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(origin, "unterminated section header"))?
                    .trim();
                section = if name.is_empty() {
                    String::new()
                } else {
                    format!("{name}.")
                };
                continue;
            }
            let (key, value) = split_kv(line, origin)?;
            cfg.set(&format!("{section}{key}"), value, origin)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: String, origin: Origin) -> Result<(), ConfigError> {
        if !known(key) {
            return Err(err(origin, format!("unknown key `{key}`")));
        }
        self.entries
            .insert(key.to_string(), Entry { value, origin });
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for (k, o) in overrides.iter().enumerate() {
            let origin = Origin::Override(k + 1);
            let (key, value) = split_kv(o, origin)?;
            self.set(&key, value, origin)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn origin(&self, key: &str) -> Origin {
        self.entries
            .get(key)
            .map(|e| e.origin)
            .unwrap_or(Origin::Whole)
    }

    fn req(&self, key: &str) -> &str {
        self.get(key).expect("every required key has a default")
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self.req(key);
        v.parse().map_err(|_| {
            err(
                self.origin(key),
                format!("`{key}`: `{v}` is not a valid number"),
            )
        })
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let v = self.req(key);
        let out: Result<Vec<T>, _> = v.split(',').map(|s| s.trim().parse()).collect();
        let out = out.map_err(|_| {
            err(
                self.origin(key),
                format!("`{key}`: `{v}` is not a list of numbers"),
            )
        })?;
        if out.is_empty() {
            return Err(err(self.origin(key), format!("`{key}` is empty")));
        }
        Ok(out)
    }

    fn parse_auto<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        if self.req(key) == "auto" {
            Ok(None)
        } else {
            self.parse_num(key).map(Some)
        }
    }

    /// Canonical `key=value` lines of everything that influences results.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| affects_results(k))
            .map(|(k, e)| format!("{k}={}\n", e.value))
            .collect()
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "both" => Some(Format::Both),
            _ => None,
        }
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: ModelConfig<f64>,
    pub ns: Vec<f64>,
    pub rs: Vec<f64>,
    pub component_size: u32,
    pub m: usize,
    pub seed: u64,
    pub workers: usize,
    pub boxes: Vec<usize>,
    pub z_max: Option<i64>,
    pub window_side: Option<usize>,
    pub blocks: Vec<u64>,
    pub spec: QuadratureSpec<f64>,
    pub bias_eps: f64,
    pub ks_threshold: f64,
    pub density_gap: f64,
    pub collapse_threshold: f64,
    pub standardization: StandardizationMode,
    pub quick: bool,
    pub out_dir: std::path::PathBuf,
    pub format: Format,
    pub hash: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StandardizationMode {
    Sample,
    Oracle,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let d: usize = raw.parse_num("model.d")?;
        Dimension::new(d).map_err(|e| err(raw.origin("model.d"), e.to_string()))?;
        let lambda: f64 = raw.parse_num("model.lambda")?;

        let expand = |key: &str| -> Result<Vec<f64>, ConfigError> {
            let v: Vec<f64> = raw.parse_list(key)?;
            match v.len() {
                1 => Ok(vec![v[0]; d]),
                k if k == d => Ok(v),
                _ => Err(err(
                    raw.origin(key),
                    format!("`{key}` needs 1 or {d} values"),
                )),
            }
        };
        let window = Region::new(expand("model.window.lower")?, expand("model.window.sides")?)
            .map_err(|e| err(raw.origin("model.window.sides"), e.to_string()))?;

        let g_keys = ["kind", "scale", "table", "tail", "transforms"];
        let g_entries: Vec<(&str, &str, usize)> = g_keys
            .iter()
            .filter_map(|k| {
                let key = format!("model.g.{k}");
                raw.get(&key).map(|v| {
                    let line = match raw.origin(&key) {
                        Origin::Line(n) => n,
                        _ => 0,
                    };
                    (*k, v, line)
                })
            })
            .collect();
        let g = ConnectionFunction::from_entries(g_entries)
            .map_err(|e| err(raw.origin("model.g.kind"), e.to_string()))?;

        let ns: Vec<f64> = raw.parse_list("run.n")?;
        let mut model = ModelConfig::new(lambda, ns[0], window, g)
            .map_err(|e| err(raw.origin("model.lambda"), e.to_string()))?;
        let density = raw.req("model.density");
        if density != "power" {
            let seq: Vec<f64> = raw.parse_list("model.density")?;
            model.density = DensityRule::Sequence(seq);
        }
        for &n in &ns {
            model
                .with_n(n)
                .map_err(|e| err(raw.origin("run.n"), e.to_string()))?;
        }

        let rs: Vec<f64> = raw.parse_list("run.R")?;
        if rs.iter().any(|&r| !(r > 0.0)) {
            return Err(err(
                raw.origin("run.R"),
                "truncation radii must be positive",
            ));
        }
        let component_size: u32 = raw.parse_num("run.r")?;
        if component_size == 0 {
            return Err(err(raw.origin("run.r"), "component size must be >= 1"));
        }
        let m: usize = raw.parse_num("run.m")?;
        if m < 2 {
            return Err(err(raw.origin("run.m"), "need at least 2 replications"));
        }
        let workers: usize = raw.parse_num("run.workers")?;
        if workers == 0 {
            return Err(err(raw.origin("run.workers"), "need at least one worker"));
        }
        let boxes: Vec<usize> = raw.parse_list("run.boxes")?;
        if boxes.contains(&0) {
            return Err(err(raw.origin("run.boxes"), "box sides must be positive"));
        }
        let blocks: Vec<u64> = raw.parse_list("run.blocks")?;
        if blocks.contains(&0) {
            return Err(err(
                raw.origin("run.blocks"),
                "block counts must be positive",
            ));
        }

        let spec = QuadratureSpec {
            rel_tol: raw.parse_num("numerics.rel_tol")?,
            abs_tol: raw.parse_num("numerics.abs_tol")?,
            max_subdivisions: raw.parse_num("numerics.max_subdivisions")?,
            tail_eps: raw.parse_num("numerics.tail_eps")?,
        };
        spec.validate()
            .map_err(|e| err(raw.origin("numerics.rel_tol"), e.to_string()))?;
        let positive = |key: &str| -> Result<f64, ConfigError> {
            let v: f64 = raw.parse_num(key)?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(err(raw.origin(key), format!("`{key}` must be positive")));
            }
            Ok(v)
        };
        let standardization = match raw.req("numerics.standardization") {
            "sample" => StandardizationMode::Sample,
            "oracle" => StandardizationMode::Oracle,
            other => {
                return Err(err(
                    raw.origin("numerics.standardization"),
                    format!("standardization `{other}` is not sample or oracle"),
                ))
            }
        };
        let quick = match raw.req("numerics.profile") {
            "full" => false,
            "quick" => true,
            other => {
                return Err(err(
                    raw.origin("numerics.profile"),
                    format!("profile `{other}` is not full or quick"),
                ))
            }
        };
        let format = Format::parse(raw.req("output.format")).ok_or_else(|| {
            err(
                raw.origin("output.format"),
                "format must be csv, json or both",
            )
        })?;

        Ok(ExperimentConfig {
            model,
            ns,
            rs,
            component_size,
            m,
            seed: raw.parse_num("run.seed")?,
            workers,
            boxes,
            z_max: raw.parse_auto("run.z_max")?,
            window_side: raw.parse_auto("run.window_side")?,
            blocks,
            spec,
            bias_eps: positive("numerics.bias_eps")?,
            ks_threshold: positive("numerics.ks_threshold")?,
            density_gap: positive("numerics.density_gap")?,
            collapse_threshold: positive("numerics.collapse_threshold")?,
            standardization,
            quick,
            out_dir: raw.req("output.dir").into(),
            format,
            hash: raw.hash(),
        })
    }

    pub fn batch(&self) -> rcmlab::stats::Batch {
        rcmlab::stats::Batch::new(self.m, self.seed, self.workers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = RawConfig::parse("[run]\nm = 10\n[model.g]\nkind = hard-disk\n").unwrap();
        let b = RawConfig::parse("run.m=10\nmodel.g.kind=hard-disk # same\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = RawConfig::parse("# header\n\nrun.m = 10\nrun.bogus = 1\n").unwrap_err();
        assert_eq!(e.origin, Origin::Line(4));
        let e = RawConfig::parse("run.m 10\n").unwrap_err();
        assert_eq!(e.origin, Origin::Line(1));
        let raw = RawConfig::parse("\nrun.m = ten\n").unwrap();
        let e = ExperimentConfig::from_raw(&raw).unwrap_err();
        assert_eq!(e.origin, Origin::Line(2));
        assert!(e.to_string().starts_with("config line 2:"));
    }

    #[test]
    fn overrides_win_and_change_the_hash() {
        let mut raw = RawConfig::parse("run.m = 10\n").unwrap();
        let before = raw.hash();
        raw.apply_overrides(&["run.m=20".into()]).unwrap();
        assert_eq!(raw.get("run.m"), Some("20"));
        assert_ne!(raw.hash(), before);
        let e = raw
            .apply_overrides(&["run.m=1".into(), "nope".into()])
            .unwrap_err();
        assert_eq!(e.origin, Origin::Override(2));
    }

    #[test]
    fn output_and_workers_do_not_change_the_hash() {
        let mut raw = RawConfig::defaults();
        let before = raw.hash();
        raw.apply_overrides(&[
            "run.workers=8".into(),
            "output.format=csv".into(),
            "run.seed=9".into(),
        ])
        .unwrap();
        assert_eq!(raw.hash(), before);
    }

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::from_raw(&RawConfig::defaults()).unwrap();
        assert_eq!(cfg.ns, vec![2.0, 4.0, 8.0]);
        assert_eq!(cfg.model.window.volume(), 1.0);
        assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn window_lists_expand() {
        let raw = RawConfig::parse("model.d = 2\nmodel.window.sides = 2, 3\n").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.model.window.volume(), 6.0);
        let raw = RawConfig::parse("model.d = 2\nmodel.window.sides = 2,3,4\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn table_function_needs_tail() {
        let raw = RawConfig::parse("model.g.kind = table\nmodel.g.table = 0:1,1:0.5\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw =
            RawConfig::parse("model.g.kind = table\nmodel.g.table = 0:1,1:0.5\nmodel.g.tail = 2\n")
                .unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_ok());
    }
}
