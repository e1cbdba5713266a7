//! Run configuration: a TOML file checked strictly (unknown keys are errors)
//! and validated against every module's constraints before anything runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use toml::{Table, Value};

use nullwave_core::diagnostics::{monitor_registry, DiagnosticsConfig};
use nullwave_core::geometry::{check_grid_params, ObstacleShape, DEFAULT_MIN_FRACTION};
use nullwave_core::initdata::{Bump, ComponentProfile, DataProfile};
use nullwave_core::nullforms::{preset_registry, CoefficientTensor};
use nullwave_core::solver::{truncation_registry, SolverConfig};

/// Names accepted in `[diagnostics.windows]`.
pub const FIT_NAMES: [&str; 4] = ["energy", "linf", "local_energy", "s_u"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{} problem(s) in config:\n  - {}", .0.len(), .0.join("\n  - "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn violations(&self) -> &[String] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Read { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterRadius {
    Auto,
    Fixed(f64),
}

impl Serialize for OuterRadius {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            OuterRadius::Auto => s.serialize_str("auto"),
            OuterRadius::Fixed(r) => s.serialize_f64(*r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleSpec {
    pub kind: String,
    pub r0: f64,
    pub fourier: Vec<[f64; 2]>,
}

impl ObstacleSpec {
    pub fn shape(&self) -> ObstacleShape {
        let f = self.fourier.iter().map(|p| (p[0], p[1])).collect();
        if self.kind == "disk" {
            ObstacleShape::disk(self.r0)
        } else {
            ObstacleShape::star(self.r0, f)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub h: f64,
    pub r_out: OuterRadius,
    pub min_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSpec {
    pub cfl: f64,
    pub t_final: f64,
    pub sample_every: usize,
    pub truncation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Absolute path of a tensor text file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSpec {
    pub u0: Vec<BumpSpec>,
    pub u1: Vec<BumpSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSpec {
    pub epsilon: f64,
    pub m0: f64,
    pub allow_overlap: bool,
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSpec {
    pub r_list: Vec<f64>,
    pub z_max: usize,
    pub monitors: Vec<String>,
    pub windows: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub dir: String,
    pub snapshots: bool,
}

/// A fully validated run configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub obstacle: ObstacleSpec,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub coefficients: CoefficientSpec,
    pub data: DataSpec,
    pub diagnostics: DiagnosticsSpec,
    pub output: OutputSpec,
    #[serde(skip)]
    pub tensor: CoefficientTensor,
}

impl RunConfig {
    pub fn r_out(&self) -> f64 {
        match self.grid.r_out {
            OuterRadius::Auto => auto_r_out(self.time.t_final, self.data.m0, self.grid.h),
            OuterRadius::Fixed(r) => r,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.time.cfl,
            t_final: self.time.t_final,
            truncation: self.time.truncation.clone(),
            sample_every: self.time.sample_every,
        }
    }

    pub fn profile(&self) -> DataProfile {
        let bumps = |v: &[BumpSpec]| v.iter().map(|b| Bump::new(b.center, b.radius, b.amplitude)).collect();
        DataProfile {
            components: self
                .data
                .components
                .iter()
                .map(|c| ComponentProfile {
                    u0: bumps(&c.u0),
                    u1: bumps(&c.u1),
                })
                .collect(),
            epsilon: self.data.epsilon,
            m0: self.data.m0,
        }
    }

    pub fn diagnostics(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            r_list: self.diagnostics.r_list.clone(),
            z_max: self.diagnostics.z_max,
            m0: self.data.m0,
            monitors: self.diagnostics.monitors.clone(),
        }
    }

    /// Canonical TOML text; parsing it gives back an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }
}

pub fn auto_r_out(t_final: f64, m0: f64, h: f64) -> f64 {
    t_final + m0 + 2.0 * h
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parse config text; relative tensor paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(vec![format!("TOML syntax: {e}")]))?;
    let mut w = Walker::default();
    let cfg = w.run_config(&root, base);
    if w.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(w.errors))
    }
}

#[derive(Default)]
struct Walker {
    errors: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Walker {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn allow(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(format!("unknown key '{}' (allowed: {})", join(path, k), allowed.join(", ")));
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a Table> {
        match t.get(key) {
            None => None,
            Some(Value::Table(s)) => Some(s),
            Some(_) => {
                self.err(format!("'{}' must be a table", join(path, key)));
                None
            }
        }
    }

    fn as_f64(v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn num(&mut self, t: Option<&Table>, path: &str, key: &str, default: Option<f64>) -> f64 {
        match t.and_then(|t| t.get(key)) {
            Some(v) => Self::as_f64(v).unwrap_or_else(|| {
                self.err(format!("'{}' must be a number", join(path, key)));
                f64::NAN
            }),
            None => default.unwrap_or_else(|| {
                self.err(format!("missing required key '{}'", join(path, key)));
                f64::NAN
            }),
        }
    }

    fn int(&mut self, t: Option<&Table>, path: &str, key: &str, default: usize) -> usize {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(_) => {
                self.err(format!("'{}' must be a non-negative integer", join(path, key)));
                default
            }
            None => default,
        }
    }

    fn string(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<String> {
        match t.and_then(|t| t.get(key)) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.err(format!("'{}' must be a string", join(path, key)));
                None
            }
            None => None,
        }
    }

    fn boolean(&mut self, t: Option<&Table>, path: &str, key: &str, default: bool) -> bool {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.err(format!("'{}' must be true or false", join(path, key)));
                default
            }
            None => default,
        }
    }

    fn array<'a>(&mut self, t: Option<&'a Table>, path: &str, key: &str) -> Option<&'a Vec<Value>> {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Array(a)) => Some(a),
            Some(_) => {
                self.err(format!("'{}' must be an array", join(path, key)));
                None
            }
            None => None,
        }
    }

    fn nums(&mut self, v: &Value, path: &str, len: Option<usize>) -> Vec<f64> {
        let vals: Option<Vec<f64>> = match v {
            Value::Array(a) => a.iter().map(Self::as_f64).collect(),
            _ => None,
        };
        match vals {
            Some(v) if len.is_none_or(|n| v.len() == n) => v,
            _ => {
                let what = len.map_or("an array of numbers".to_string(), |n| format!("an array of {n} numbers"));
                self.err(format!("'{path}' must be {what}"));
                Vec::new()
            }
        }
    }

    fn pair(&mut self, v: &Value, path: &str) -> [f64; 2] {
        let v = self.nums(v, path, Some(2));
        if v.len() == 2 {
            [v[0], v[1]]
        } else {
            [f64::NAN; 2]
        }
    }

    fn run_config(&mut self, root: &Table, base: &Path) -> RunConfig {
        self.allow(
            root,
            "",
            &["obstacle", "grid", "time", "coefficients", "data", "diagnostics", "output"],
        );
        let obstacle = self.obstacle(root);
        let (coefficients, tensor) = self.coefficients(root, base);
        let mut time = self.time(root);
        let h_tab = self.table(root, "", "grid");
        let grid = self.grid(h_tab);
        let data = self.data(root, tensor.components());
        if time.sample_every == 0 {
            time.sample_every = ((1.0 / (time.cfl * grid.h)).round() as usize).max(1);
        }
        let diagnostics = self.diagnostics_spec(root, time.t_final);
        let output = self.output(root);
        let cfg = RunConfig {
            obstacle,
            grid,
            time,
            coefficients,
            data,
            diagnostics,
            output,
            tensor,
        };
        self.cross_check(&cfg);
        cfg
    }

    fn obstacle(&mut self, root: &Table) -> ObstacleSpec {
        let t = self.table(root, "", "obstacle");
        if let Some(t) = t {
            self.allow(t, "obstacle", &["kind", "r0", "fourier"]);
        }
        let kind = self.string(t, "obstacle", "kind").unwrap_or_else(|| "disk".into());
        if kind != "disk" && kind != "star" {
            self.err(format!("obstacle.kind must be \"disk\" or \"star\", got \"{kind}\""));
        }
        let r0 = self.num(t, "obstacle", "r0", Some(0.3));
        let fourier = self
            .array(t, "obstacle", "fourier")
            .cloned()
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(k, v)| self.pair(v, &format!("obstacle.fourier[{k}]")))
            .collect();
        ObstacleSpec { kind, r0, fourier }
    }

    fn grid(&mut self, t: Option<&Table>) -> GridSpec {
        if let Some(t) = t {
            self.allow(t, "grid", &["h", "r_out", "min_fraction"]);
        }
        let h = self.num(t, "grid", "h", Some(0.1));
        if !(h.is_finite() && h > 0.0) {
            self.err(format!("grid.h = {h} must be positive"));
        }
        let r_out = match t.and_then(|t| t.get("r_out")) {
            None => OuterRadius::Auto,
            Some(Value::String(s)) if s == "auto" => OuterRadius::Auto,
            Some(v) => match Self::as_f64(v) {
                Some(r) => OuterRadius::Fixed(r),
                None => {
                    self.err("grid.r_out must be a number or \"auto\"".into());
                    OuterRadius::Auto
                }
            },
        };
        let min_fraction = self.num(t, "grid", "min_fraction", Some(DEFAULT_MIN_FRACTION));
        if !(0.0..1.0).contains(&min_fraction) {
            self.err(format!("grid.min_fraction = {min_fraction} must lie in [0, 1)"));
        }
        GridSpec { h, r_out, min_fraction }
    }

    fn time(&mut self, root: &Table) -> TimeSpec {
        let t = self.table(root, "", "time");
        if let Some(t) = t {
            self.allow(t, "time", &["cfl", "t_final", "sample_every", "truncation"]);
        }
        let d = SolverConfig::default();
        let spec = TimeSpec {
            cfl: self.num(t, "time", "cfl", Some(d.cfl)),
            t_final: self.num(t, "time", "t_final", Some(10.0)),
            sample_every: self.int(t, "time", "sample_every", 0),
            truncation: self.string(t, "time", "truncation").unwrap_or(d.truncation),
        };
        if t.is_some_and(|t| t.contains_key("sample_every")) && spec.sample_every == 0 {
            self.err("time.sample_every must be at least 1".into());
        }
        let probe = SolverConfig {
            cfl: spec.cfl,
            t_final: spec.t_final,
            truncation: spec.truncation.clone(),
            sample_every: spec.sample_every.max(1),
        };
        if let Err(e) = probe.validate() {
            self.err(format!("time: {e}"));
        }
        if let Err(e) = truncation_registry().get(&spec.truncation) {
            self.err(format!("time.truncation: {e}"));
        }
        spec
    }

    fn coefficients(&mut self, root: &Table, base: &Path) -> (CoefficientSpec, CoefficientTensor) {
        let t = self.table(root, "", "coefficients");
        if let Some(t) = t {
            self.allow(t, "coefficients", &["preset", "file"]);
        }
        let preset = self.string(t, "coefficients", "preset");
        let file = self.string(t, "coefficients", "file");
        let fallback = CoefficientTensor::zeros(1);
        match (preset, file) {
            (Some(p), None) => match preset_registry().get(&p) {
                Ok(pre) => (
                    CoefficientSpec {
                        preset: Some(p),
                        file: None,
                    },
                    pre.build(),
                ),
                Err(e) => {
                    self.err(format!("coefficients.preset: {e}"));
                    (CoefficientSpec { preset: Some(p), file: None }, fallback)
                }
            },
            (None, Some(f)) => {
                let path = base.join(&f);
                let path = std::path::absolute(&path).unwrap_or(path);
                let spec = CoefficientSpec {
                    preset: None,
                    file: Some(path.display().to_string()),
                };
                let tensor = std::fs::read_to_string(&path)
                    .map_err(|e| format!("coefficients.file {}: {e}", path.display()))
                    .and_then(|s| {
                        CoefficientTensor::parse_text(&s).map_err(|e| format!("coefficients.file {}: {e}", path.display()))
                    })
                    .and_then(|t| t.validate().map(|_| t).map_err(|e| format!("coefficients.file: {e}")));
                match tensor {
                    Ok(t) => (spec, t),
                    Err(e) => {
                        self.err(e);
                        (spec, fallback)
                    }
                }
            }
            (Some(_), Some(_)) => {
                self.err("coefficients: give either 'preset' or 'file', not both".into());
                (CoefficientSpec { preset: None, file: None }, fallback)
            }
            (None, None) => {
                self.err("coefficients: one of 'preset' or 'file' is required".into());
                (CoefficientSpec { preset: None, file: None }, fallback)
            }
        }
    }

    fn bumps(&mut self, t: &Table, path: &str, key: &str) -> Vec<BumpSpec> {
        let Some(arr) = self.array(Some(t), path, key) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (k, v) in arr.iter().enumerate() {
            let p = format!("{path}.{key}[{k}]");
            let Value::Table(b) = v else {
                self.err(format!("'{p}' must be a table {{ center, radius, amplitude }}"));
                continue;
            };
            self.allow(b, &p, &["center", "radius", "amplitude"]);
            let center = match b.get("center") {
                Some(v) => self.pair(v, &format!("{p}.center")),
                None => {
                    self.err(format!("missing required key '{p}.center'"));
                    [f64::NAN; 2]
                }
            };
            out.push(BumpSpec {
                center,
                radius: self.num(Some(b), &p, "radius", None),
                amplitude: self.num(Some(b), &p, "amplitude", Some(1.0)),
            });
        }
        out
    }

    fn data(&mut self, root: &Table, m: usize) -> DataSpec {
        let t = self.table(root, "", "data");
        if let Some(t) = t {
            self.allow(t, "data", &["epsilon", "m0", "allow_overlap", "components"]);
        }
        let epsilon = self.num(t, "data", "epsilon", Some(0.05));
        let m0 = self.num(t, "data", "m0", Some(3.5));
        let allow_overlap = self.boolean(t, "data", "allow_overlap", false);
        let components = match self.array(t, "data", "components") {
            Some(arr) => {
                let mut out = Vec::new();
                for (k, v) in arr.clone().iter().enumerate() {
                    let p = format!("data.components[{k}]");
                    let Value::Table(c) = v else {
                        self.err(format!("'{p}' must be a table"));
                        continue;
                    };
                    self.allow(c, &p, &["u0", "u1"]);
                    out.push(ComponentSpec {
                        u0: self.bumps(c, &p, "u0"),
                        u1: self.bumps(c, &p, "u1"),
                    });
                }
                out
            }
            None => default_components(m),
        };
        DataSpec {
            epsilon,
            m0,
            allow_overlap,
            components,
        }
    }

    fn diagnostics_spec(&mut self, root: &Table, t_final: f64) -> DiagnosticsSpec {
        let t = self.table(root, "", "diagnostics");
        if let Some(t) = t {
            self.allow(t, "diagnostics", &["r_list", "z_max", "monitors", "windows"]);
        }
        let d = DiagnosticsConfig::default();
        let r_list = match t.and_then(|t| t.get("r_list")) {
            Some(v) => self.nums(v, "diagnostics.r_list", None),
            None => d.r_list,
        };
        let z_max = self.int(t, "diagnostics", "z_max", d.z_max);
        let monitors = match self.array(t, "diagnostics", "monitors") {
            Some(a) => a
                .iter()
                .filter_map(|v| match v {
                    Value::String(s) => Some(s.clone()),
                    _ => {
                        self.err("diagnostics.monitors must list monitor names".into());
                        None
                    }
                })
                .collect(),
            None => monitor_registry().names().iter().map(|s| s.to_string()).collect(),
        };
        let default_window = [0.2 * t_final, t_final];
        let mut windows: BTreeMap<String, [f64; 2]> =
            FIT_NAMES.iter().map(|n| (n.to_string(), default_window)).collect();
        if let Some(wt) = self.table(t.unwrap_or(&Table::new()), "diagnostics", "windows") {
            self.allow(wt, "diagnostics.windows", &FIT_NAMES);
            for (k, v) in wt {
                if FIT_NAMES.contains(&k.as_str()) {
                    let w = self.pair(v, &format!("diagnostics.windows.{k}"));
                    if !(w[0] <= w[1]) {
                        self.err(format!("diagnostics.windows.{k} = {w:?} must satisfy t_lo ≤ t_hi"));
                    }
                    windows.insert(k.clone(), w);
                }
            }
        }
        DiagnosticsSpec {
            r_list,
            z_max,
            monitors,
            windows,
        }
    }

    fn output(&mut self, root: &Table) -> OutputSpec {
        let t = self.table(root, "", "output");
        if let Some(t) = t {
            self.allow(t, "output", &["dir", "snapshots"]);
        }
        OutputSpec {
            dir: self.string(t, "output", "dir").unwrap_or_else(|| "nullwave-out".into()),
            snapshots: self.boolean(t, "output", "snapshots", false),
        }
    }

    /// Constraints that span sections, delegated to the owning modules.
    fn cross_check(&mut self, cfg: &RunConfig) {
        let r_out = cfg.r_out();
        if cfg.obstacle.kind == "disk" || cfg.obstacle.kind == "star" {
            if cfg.obstacle.kind == "disk" && !cfg.obstacle.fourier.is_empty() {
                self.err("obstacle: disk obstacles take no fourier coefficients".into());
            } else if let Err(e) = check_grid_params(&cfg.obstacle.shape(), cfg.grid.h, r_out) {
                self.err(format!("obstacle/grid: {e}"));
            }
        }
        let needed = auto_r_out(cfg.time.t_final, cfg.data.m0, cfg.grid.h);
        if cfg.time.truncation == "exact_cone" && r_out < needed - 1e-12 {
            self.err(format!(
                "grid.r_out = {r_out} is inside the influence cone T + M0 + 2h = {needed}; use \"auto\" or the sponge truncation"
            ));
        }
        let profile = cfg.profile();
        if let Err(e) = profile.validate() {
            self.err(format!("data: {e}"));
        } else if profile.m() != cfg.tensor.components() {
            self.err(format!(
                "data has {} components but the coefficients have {}",
                profile.m(),
                cfg.tensor.components()
            ));
        } else if !cfg.data.allow_overlap {
            if let Some(e) = profile.overlap(&cfg.obstacle.shape()) {
                self.err(format!("data: {e}"));
            }
        }
        if let Err(e) = cfg.diagnostics().validate() {
            self.err(format!("diagnostics: {e}"));
        }
    }
}

/// One bump of radius 1 per component, centred on the circle `|x| = 2`.
fn default_components(m: usize) -> Vec<ComponentSpec> {
    (0..m)
        .map(|c| {
            let th = 2.0 * std::f64::consts::PI * c as f64 / m as f64;
            ComponentSpec {
                u0: vec![BumpSpec {
                    center: [2.0 * th.cos(), 2.0 * th.sin()],
                    radius: 1.0,
                    amplitude: 1.0,
                }],
                u1: Vec::new(),
            }
        })
        .collect()
}
