//! Run configuration: one JSON file with a `schema_version`, overridden key
//! by key from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use billiards_core::weights::WeightSpec;
use billiards_core::Weight;
use billiards_core::{Horizon, Region, ZetaConfig, DEFAULT_GRAZING_TOL};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u64,
    /// Obstacle JSON file.
    pub obstacles: Option<PathBuf>,
    #[serde(default = "default_grazing_tol")]
    pub grazing_tol: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    /// Escape-domain radius; defaults to the set's `default_domain_radius`.
    #[serde(default)]
    pub r_dom: Option<f64>,
    #[serde(default)]
    pub zeta: ZetaConfig,
    #[serde(default = "default_region")]
    pub region: Region,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Existing orbit database to reuse instead of rebuilding.
    #[serde(default)]
    pub orbit_db: Option<PathBuf>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub zeta_eval: ZetaEvalConfig,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub trapped_set: TrappedConfig,
    #[serde(default)]
    pub det_grid: GridConfig,
}

fn default_grazing_tol() -> f64 {
    DEFAULT_GRAZING_TOL
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_region() -> Region {
    Region {
        re_min: -2.0,
        re_max: 0.0,
        im_min: -1.0,
        im_max: 1.0,
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub x: [f64; 2],
    /// Direction as a vector (normalized on load) or an angle in radians.
    #[serde(default)]
    pub v: Option<[f64; 2]>,
    #[serde(default)]
    pub angle: Option<f64>,
    pub horizon: Horizon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaEvalConfig {
    pub lambda: [f64; 2],
}

impl Default for ZetaEvalConfig {
    fn default() -> Self {
        ZetaEvalConfig { lambda: [1.0, 0.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    pub lambda: [f64; 2],
    pub dt: f64,
    pub n_samples: usize,
    /// Second test function of the matrix coefficient; defaults to `weight`.
    pub g: Option<WeightSpec>,
    pub identity_states: usize,
    pub identity_threshold: f64,
    pub fd_step: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig {
            lambda: [2.0, 0.0],
            dt: 0.25,
            n_samples: 10_000,
            g: None,
            identity_states: 100,
            identity_threshold: 1e-3,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrappedConfig {
    pub n_s: usize,
    pub n_p: usize,
    pub n_bounce: usize,
}

impl Default for TrappedConfig {
    fn default() -> Self {
        TrappedConfig {
            n_s: 200,
            n_p: 201,
            n_bounce: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 101, ny: 101 }
    }
}

/// Sets `path` (dot-separated) in a JSON object tree, creating objects on the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("empty key segment in override `{path}`");
        }
        let obj = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just created")
            }
            _ => bail!("override `{path}`: `{}` is not an object", parts[..k].join(".")),
        };
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Parses `key=value`; the value is read as JSON, falling back to a string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .with_context(|| format!("override `{text}` is not of the form key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// Loads the config file (if any), applies overrides and resolves relative
/// paths: those from the file against its directory, those from the command
/// line against the working directory.
pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let (mut tree, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let tree: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            if !tree.is_object() {
                bail!("config {} must be a JSON object", p.display());
            }
            (tree, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (
            serde_json::json!({ "schema_version": SCHEMA_VERSION }),
            PathBuf::new(),
        ),
    };
    let from_file = |key: &str| !overrides.iter().any(|(k, _)| k == key);
    for (k, v) in overrides {
        set_path(&mut tree, k, v.clone())?;
    }
    let version = tree.get("schema_version").and_then(Value::as_u64);
    match version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => bail!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"),
        None => bail!("config lacks an integer schema_version"),
    }
    let mut cfg: RunConfig = serde_json::from_value(tree).context("invalid configuration")?;
    let resolve = |p: &mut PathBuf, key: &str| {
        if p.is_relative() && from_file(key) {
            *p = base.join(&*p);
        }
    };
    if let Some(p) = cfg.obstacles.as_mut() {
        resolve(p, "obstacles");
    }
    if let Some(p) = cfg.orbit_db.as_mut() {
        resolve(p, "orbit_db");
    }
    resolve(&mut cfg.output_dir, "output_dir");
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grazing_tol > 0.0 && self.grazing_tol < 1.0) {
            bail!("grazing_tol must lie in (0, 1), got {}", self.grazing_tol);
        }
        if !(self.newton_tol > 0.0 && self.newton_tol < 1e-3) {
            bail!("newton_tol must lie in (0, 1e-3), got {}", self.newton_tol);
        }
        if let Some(r) = self.r_dom {
            if !(r > 0.0 && r.is_finite()) {
                bail!("r_dom must be positive, got {r}");
            }
        }
        self.zeta.validate()?;
        self.region.validate()?;
        Weight::from_spec(&self.weight).context("invalid weight spec")?;
        if let Some(g) = &self.resolvent.g {
            Weight::from_spec(g).context("invalid resolvent.g")?;
        }
        for p in [&self.obstacles, &self.orbit_db].into_iter().flatten() {
            if !p.is_file() {
                bail!("referenced file {} does not exist", p.display());
            }
        }
        let r = &self.resolvent;
        if !(r.dt > 0.0) || !(r.fd_step > 0.0) || !(r.identity_threshold > 0.0) {
            bail!("resolvent dt, fd_step and identity_threshold must be positive");
        }
        if r.n_samples < 2 {
            bail!("resolvent n_samples must be at least 2");
        }
        let t = &self.trapped_set;
        if t.n_s == 0 || t.n_p == 0 {
            bail!("trapped_set grid dimensions must be positive");
        }
        if self.det_grid.nx < 2 || self.det_grid.ny < 2 {
            bail!("det_grid needs at least 2 points per axis");
        }
        Ok(())
    }

    pub fn obstacles_path(&self) -> Result<&Path> {
        self.obstacles
            .as_deref()
            .context("no obstacle file given (config key `obstacles` or --obstacles)")
    }
}
