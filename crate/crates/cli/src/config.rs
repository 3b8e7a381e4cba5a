//! Run configuration. A TOML file (or the `config` block of a previous
//! manifest), then `--set key=value` overrides, then explicit flags, merged
//! in that order and resolved before anything is computed.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;
use std::path::{Path, PathBuf};

use qwalk_core::gaussian::{Decoherence, Functional, GaussianState, ModeNetwork, SymplecticOp};
use qwalk_core::noise::{HistogramOptions, NoiseKind, NoiseSpec, ScalingOptions};
use qwalk_core::topology::{domain_walls, EdgeOptions};
use qwalk_core::{
    make_localized_state, Boundary, CoinProfile, Complex64, LatticeSpec, Protocol, SpinorField,
    WalkSpec, DENSE_CAP,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} does not exist")]
    MissingFile(PathBuf),
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),
}

impl ConfigError {
    /// Short category name printed in front of the message.
    pub fn category(&self) -> &'static str {
        match self {
            Self::MissingFile(_) => "missing-file",
            Self::Unreadable { .. } => "unreadable-file",
            Self::Syntax(_) => "syntax",
            Self::UnknownKey(_) => "unknown-key",
            Self::Schema(_) => "schema",
            Self::OutOfRange(_) => "out-of-range",
            Self::DimensionCap(_) => "dimension-cap",
        }
    }
}

fn range(msg: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange(msg.into())
}

fn schema(msg: impl Into<String>) -> ConfigError {
    ConfigError::Schema(msg.into())
}

/// Core validation failures found while resolving a config.
fn rejected(e: qwalk_core::Error) -> ConfigError {
    match e {
        qwalk_core::Error::DimensionCap { .. } => ConfigError::DimensionCap(e.to_string()),
        _ => ConfigError::OutOfRange(e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Walk,
    PhaseDiagram,
    Edge,
    Gaussian,
    NoiseSweep,
    GainScan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::Walk,
        Self::PhaseDiagram,
        Self::Edge,
        Self::Gaussian,
        Self::NoiseSweep,
        Self::GainScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Walk => "walk",
            Self::PhaseDiagram => "phase-diagram",
            Self::Edge => "edge",
            Self::Gaussian => "gaussian",
            Self::NoiseSweep => "noise-sweep",
            Self::GainScan => "gain-scan",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Self::Json
    }

    pub fn json(self) -> bool {
        self != Self::Csv
    }
}

/// A single angle for every site, or one per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angles {
    Uniform(f64),
    PerSite(Vec<f64>),
}

impl Angles {
    fn expand(&self, sites: usize) -> Vec<f64> {
        match self {
            Self::Uniform(t) => vec![*t; sites],
            Self::PerSite(v) => v.clone(),
        }
    }
}

/// Two `theta2` domains: sites `[0, split)` carry `left`, the rest `right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub left: f64,
    pub right: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites_y: Option<usize>,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    pub theta1: Angles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<Angles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

/// Localized initial walker: `coin_up` and `coin_down` are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
    #[serde(default = "coin_up")]
    pub coin_up: [f64; 2],
    #[serde(default = "coin_down")]
    pub coin_down: [f64; 2],
}

fn coin_up() -> [f64; 2] {
    [FRAC_1_SQRT_2, 0.0]
}

fn coin_down() -> [f64; 2] {
    [0.0, FRAC_1_SQRT_2]
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            site: None,
            coin_up: coin_up(),
            coin_down: coin_down(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub resolution: usize,
    pub sites: usize,
}

impl Default for PhaseDiagramConfig {
    fn default() -> Self {
        Self {
            resolution: 16,
            sites: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall: Option<usize>,
    pub half_width: usize,
    pub mass_threshold: f64,
    pub pr_fraction: f64,
    pub cluster_tol: f64,
    pub pin_tol: f64,
    pub cap: usize,
    /// Step counts of the boundary walks launched from `[input]`.
    pub walk_steps: Vec<usize>,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        let o = EdgeOptions::default();
        Self {
            wall: None,
            half_width: o.half_width,
            mass_threshold: o.mass_threshold,
            pr_fraction: o.pr_fraction,
            cluster_tol: o.cluster_tol,
            pin_tol: o.pin_tol,
            cap: o.cap,
            walk_steps: vec![80, 160],
        }
    }
}

impl EdgeConfig {
    pub fn options(&self) -> EdgeOptions {
        EdgeOptions {
            half_width: self.half_width,
            mass_threshold: self.mass_threshold,
            pr_fraction: self.pr_fraction,
            cluster_tol: self.cluster_tol,
            pin_tol: self.pin_tol,
            cap: self.cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceConfig {
    pub loss: f64,
    /// Phase variance per mode per step, rad^2.
    pub dephasing: f64,
}

impl From<DecoherenceConfig> for Decoherence {
    fn from(d: DecoherenceConfig) -> Self {
        Decoherence {
            loss: d.loss,
            dephasing: d.dephasing,
        }
    }
}

/// Gaussian input states. `walker` is a coherent state shaped like the
/// `[input]` walker with `photons` photons in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaussianInput {
    Vacuum,
    Walker {
        photons: f64,
    },
    Coherent {
        mode: usize,
        photons: f64,
        #[serde(default)]
        phase: f64,
    },
    Squeezed {
        mode: usize,
        r: f64,
    },
    Thermal {
        nbar: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Passive two-rail network built from `[walk]`.
    #[default]
    Walk,
    Amplifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifierConfig {
    pub sites: usize,
    pub theta: f64,
    pub chi: f64,
    pub steps: usize,
}

impl Default for AmplifierConfig {
    fn default() -> Self {
        Self {
            sites: 4,
            theta: FRAC_PI_2,
            chi: 0.3,
            steps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianConfig {
    pub network: NetworkKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplifier: Option<AmplifierConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<GaussianInput>,
    pub decoherence: DecoherenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub bins: usize,
    pub photons: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<usize>>,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        let o = HistogramOptions::default();
        Self {
            steps: None,
            bins: o.bins,
            photons: o.photons,
            sites: o.sites,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub amplitude_noise: f64,
    pub phase_noise: f64,
    pub coin_dephasing: f64,
    pub realizations: usize,
    pub n_values: Vec<usize>,
    pub batches: usize,
    pub exclude_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramConfig>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let s = ScalingOptions::default();
        Self {
            amplitude_noise: 0.0,
            phase_noise: 0.0,
            coin_dephasing: 0.0,
            realizations: 1000,
            n_values: vec![10, 20, 40, 60, 80, 100],
            batches: s.batches,
            exclude_fraction: s.exclude_fraction,
            fit_window: None,
            histogram: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub kind: NoiseKind,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<usize>,
    #[serde(default = "half_width")]
    pub half_width: usize,
    #[serde(default = "robustness_steps")]
    pub steps: usize,
    pub series: Vec<SeriesConfig>,
}

fn half_width() -> usize {
    EdgeOptions::default().half_width
}

fn robustness_steps() -> usize {
    80
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl ChiGrid {
    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.start + span * i as f64 / last)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainScanConfig {
    pub sites: usize,
    pub theta: f64,
    pub steps: usize,
    pub chi: ChiGrid,
    pub functional: Functional,
    pub input: GaussianInput,
    pub decoherence: DecoherenceConfig,
}

impl Default for GainScanConfig {
    fn default() -> Self {
        Self {
            sites: 4,
            theta: FRAC_PI_2,
            steps: 4,
            chi: ChiGrid {
                start: 0.0,
                stop: 1.0,
                points: 11,
            },
            functional: Functional::default(),
            input: GaussianInput::Squeezed { mode: 0, r: 0.3 },
            decoherence: DecoherenceConfig {
                loss: 0.05,
                dephasing: 0.05,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_diagram: Option<PhaseDiagramConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_scan: Option<GainScanConfig>,
}

fn one() -> usize {
    1
}

/// Values given on the command line. They override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    /// `key.path=value`; values are parsed as TOML, falling back to a string.
    pub set: Vec<String>,
}

/// Read a config file into a table. A `.json` file is taken to be a run
/// manifest and its `config` block is used.
pub fn read_table(path: &Path) -> Result<toml::Table, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let config = doc
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| schema(format!("{} has no config block", path.display())))?;
        serde_json::from_value(config).map_err(|e| ConfigError::Syntax(e.to_string()))
    } else {
        text.parse::<toml::Table>()
            .map_err(|e| ConfigError::Syntax(e.to_string()))
    }
}

fn apply_set(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::Syntax(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Syntax(format!(
            "override key `{key}` is malformed"
        )));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let next = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = next
            .as_table_mut()
            .ok_or_else(|| schema(format!("override `{key}`: `{p}` is not a table")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Merge the file, `--set` overrides and flags, then resolve.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    for item in &ov.set {
        apply_set(&mut table, item)?;
    }
    if let Some(k) = ov.experiment {
        table.insert("experiment".into(), k.name().into());
    }
    if let Some(seed) = ov.seed {
        let seed =
            i64::try_from(seed).map_err(|_| range(format!("seed {seed} exceeds 2^63 - 1")))?;
        table.insert("seed".into(), seed.into());
    }
    if let Some(t) = ov.threads {
        table.insert("threads".into(), (t as i64).into());
    }
    if let Some(f) = ov.format {
        let name = match f {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Both => "both",
        };
        table.insert("format".into(), name.into());
    }
    from_table(table)?.resolve()
}

/// Deserialize without resolving.
pub fn from_table(table: toml::Table) -> Result<RunConfig, ConfigError> {
    RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| {
        let msg = e.message().trim().to_string();
        if msg.starts_with("unknown field") {
            ConfigError::UnknownKey(msg)
        } else {
            ConfigError::Schema(msg)
        }
    })
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let table = text
        .parse::<toml::Table>()
        .map_err(|e| ConfigError::Syntax(e.to_string()))?;
    from_table(table)?.resolve()
}

fn finite(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(range(format!("{name} must be finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(range(format!("{name} must be finite and >= 0, got {v}")))
    }
}

impl RunConfig {
    fn sections(&self) -> [(&'static str, bool); 8] {
        [
            ("walk", self.walk.is_some()),
            ("input", self.input.is_some()),
            ("phase_diagram", self.phase_diagram.is_some()),
            ("edge", self.edge.is_some()),
            ("gaussian", self.gaussian.is_some()),
            ("noise", self.noise.is_some()),
            ("robustness", self.robustness.is_some()),
            ("gain_scan", self.gain_scan.is_some()),
        ]
    }

    /// Fill defaults and check every value the experiment will use.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        use ExperimentKind::*;
        if self.threads == 0 {
            return Err(range("threads must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(range(format!("seed {} exceeds 2^63 - 1", self.seed)));
        }
        let kind = self.experiment;
        let allowed: &[&str] = match kind {
            Walk => &["walk", "input"],
            PhaseDiagram => &["phase_diagram"],
            Edge => &["walk", "input", "edge"],
            Gaussian => &["gaussian", "walk", "input"],
            NoiseSweep => &["walk", "input", "noise", "robustness"],
            GainScan => &["gain_scan"],
        };
        for (name, present) in self.sections() {
            if present && !allowed.contains(&name) {
                return Err(schema(format!(
                    "section [{name}] is not used by the {kind} experiment"
                )));
            }
        }
        match kind {
            Walk => {
                self.resolve_walk(true)?;
                self.resolve_input(None)?;
            }
            PhaseDiagram => {
                let pd = self.phase_diagram.get_or_insert_with(Default::default);
                if pd.resolution < 8 {
                    return Err(range(format!(
                        "phase_diagram.resolution must be at least 8, got {}",
                        pd.resolution
                    )));
                }
                if pd.sites < 2 {
                    return Err(range("phase_diagram.sites must be at least 2"));
                }
            }
            Edge => self.resolve_edge()?,
            Gaussian => self.resolve_gaussian()?,
            NoiseSweep => self.resolve_noise()?,
            GainScan => self.resolve_gain_scan()?,
        }
        Ok(self)
    }

    fn walk_section(&self) -> Result<&WalkConfig, ConfigError> {
        self.walk.as_ref().ok_or_else(|| {
            schema(format!(
                "the {} experiment needs a [walk] section",
                self.experiment
            ))
        })
    }

    fn resolve_walk(&mut self, needs_steps: bool) -> Result<(), ConfigError> {
        let kind = self.experiment;
        let w = self
            .walk
            .as_mut()
            .ok_or_else(|| schema(format!("the {kind} experiment needs a [walk] section")))?;
        match (needs_steps, w.steps) {
            (true, None) => return Err(schema("walk.steps is required")),
            (false, Some(_)) => {
                return Err(schema(format!(
                    "walk.steps is not used by the {kind} experiment"
                )))
            }
            _ => {}
        }
        if w.theta2.is_some() && w.domain.is_some() {
            return Err(schema("give either walk.theta2 or [walk.domain], not both"));
        }
        let has_theta2 = w.theta2.is_some() || w.domain.is_some();
        let protocol = *w.protocol.get_or_insert(match (w.sites_y, has_theta2) {
            (Some(_), _) => Protocol::SplitStep2d,
            (None, true) => Protocol::SplitStep,
            (None, false) => Protocol::Simple,
        });
        match protocol {
            Protocol::Simple if has_theta2 => {
                return Err(schema("the simple protocol takes no theta2"));
            }
            Protocol::SplitStep | Protocol::SplitStep2d if !has_theta2 => {
                return Err(schema(
                    "split-step walks need walk.theta2 or a [walk.domain]",
                ));
            }
            _ => {}
        }
        if let Some(d) = &mut w.domain {
            if w.sites_y.is_some() {
                return Err(schema("domains are only supported on chains"));
            }
            finite("walk.domain.left", d.left)?;
            finite("walk.domain.right", d.right)?;
            d.split.get_or_insert(w.sites / 2);
        }
        self.walk_spec()?;
        Ok(())
    }

    fn resolve_input(&mut self, default_site: Option<usize>) -> Result<(), ConfigError> {
        let lattice = self.lattice()?;
        let centre = match lattice.dimension() {
            1 => lattice.sites() / 2,
            _ => lattice.site_at(
                lattice.extent(qwalk_core::Axis::X) / 2,
                lattice.extent(qwalk_core::Axis::Y) / 2,
            ),
        };
        let input = self.input.get_or_insert_with(Default::default);
        input.site.get_or_insert(default_site.unwrap_or(centre));
        for v in input.coin_up.iter().chain(&input.coin_down) {
            finite("input coin amplitude", *v)?;
        }
        self.initial_state()?;
        Ok(())
    }

    fn walls(&self) -> Result<Vec<usize>, ConfigError> {
        domain_walls(&self.walk_spec()?).map_err(rejected)
    }

    fn default_wall(&self) -> Result<usize, ConfigError> {
        self.walk_section()?
            .domain
            .as_ref()
            .and_then(|d| d.split)
            .ok_or_else(|| {
                schema(format!(
                    "the {} experiment needs a [walk.domain]",
                    self.experiment
                ))
            })
    }

    fn check_wall(&self, wall: usize) -> Result<(), ConfigError> {
        let walls = self.walls()?;
        if walls.contains(&wall) {
            Ok(())
        } else {
            Err(range(format!(
                "site {wall} is not a domain wall (walls at {walls:?})"
            )))
        }
    }

    fn resolve_edge(&mut self) -> Result<(), ConfigError> {
        self.resolve_walk(false)?;
        let wall = self.default_wall()?;
        let e = self.edge.get_or_insert_with(Default::default);
        let wall = *e.wall.get_or_insert(wall);
        if e.half_width == 0 {
            return Err(range("edge.half_width must be at least 1"));
        }
        if !(e.mass_threshold > 0.0 && e.mass_threshold <= 1.0) {
            return Err(range("edge.mass_threshold must lie in (0, 1]"));
        }
        if !(e.pr_fraction > 0.0 && e.pr_fraction <= 1.0) {
            return Err(range("edge.pr_fraction must lie in (0, 1]"));
        }
        non_negative("edge.cluster_tol", e.cluster_tol)?;
        non_negative("edge.pin_tol", e.pin_tol)?;
        if e.walk_steps.contains(&0) {
            return Err(range("edge.walk_steps must be positive"));
        }
        let cap = e.cap;
        self.check_wall(wall)?;
        let dim = self.lattice()?.hilbert_dim();
        if dim > cap {
            return Err(ConfigError::DimensionCap(format!(
                "hilbert dimension {dim} exceeds edge.cap {cap}"
            )));
        }
        // launch on the last site before the wall, coin down
        let sites = self.lattice()?.sites();
        let launch = (wall + sites - 1) % sites;
        if self.input.is_none() {
            self.input = Some(InputConfig {
                site: Some(launch),
                coin_up: [0.0, 0.0],
                coin_down: [1.0, 0.0],
            });
        }
        self.resolve_input(Some(launch))
    }

    fn resolve_gaussian(&mut self) -> Result<(), ConfigError> {
        let g = self.gaussian.get_or_insert_with(Default::default);
        let network = g.network;
        match network {
            NetworkKind::Walk => {
                if g.amplifier.is_some() {
                    return Err(schema(
                        "[gaussian.amplifier] needs gaussian.network = \"amplifier\"",
                    ));
                }
                g.input
                    .get_or_insert(GaussianInput::Walker { photons: 1.0 });
                self.resolve_walk(true)?;
            }
            NetworkKind::Amplifier => {
                if self.walk.is_some() {
                    return Err(schema("section [walk] is not used by an amplifier network"));
                }
                let a = g.amplifier.get_or_insert_with(Default::default);
                finite("gaussian.amplifier.theta", a.theta)?;
                finite("gaussian.amplifier.chi", a.chi)?;
                g.input
                    .get_or_insert(GaussianInput::Squeezed { mode: 0, r: 0.3 });
            }
        }
        let g = self.gaussian.as_ref().expect("filled above");
        let walker = matches!(g.input, Some(GaussianInput::Walker { .. }));
        if walker && network != NetworkKind::Walk {
            return Err(schema("a walker input needs gaussian.network = \"walk\""));
        }
        if !walker && self.input.is_some() {
            return Err(schema("section [input] is only used by a walker input"));
        }
        Decoherence::from(g.decoherence)
            .validate()
            .map_err(rejected)?;
        let modes = match network {
            NetworkKind::Walk => self.lattice()?.hilbert_dim(),
            NetworkKind::Amplifier => 2 * g.amplifier.as_ref().expect("filled above").sites,
        };
        if 2 * modes > DENSE_CAP {
            return Err(ConfigError::DimensionCap(format!(
                "{modes} modes need a {0}x{0} covariance matrix, above the cap {DENSE_CAP}",
                2 * modes
            )));
        }
        if walker {
            self.resolve_input(None)?;
        }
        let net = self.mode_network()?;
        self.gaussian_input(&net)?;
        Ok(())
    }

    fn resolve_noise(&mut self) -> Result<(), ConfigError> {
        self.resolve_walk(false)?;
        self.resolve_input(None)?;
        let n = self.noise.get_or_insert_with(Default::default);
        let mut ns = n.n_values.clone();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() < 5 || ns[0] == 0 || ns[ns.len() - 1] < 4 * ns[0] {
            return Err(range(format!(
                "noise.n_values needs at least 5 distinct positive step counts spanning a factor 4, got {:?}",
                n.n_values
            )));
        }
        if n.batches == 0 {
            return Err(range("noise.batches must be at least 1"));
        }
        if !(0.0..1.0).contains(&n.exclude_fraction) {
            return Err(range("noise.exclude_fraction must lie in [0, 1)"));
        }
        if let Some([lo, hi]) = n.fit_window {
            if lo > hi {
                return Err(range("noise.fit_window must be [low, high]"));
            }
        }
        let max_n = ns[ns.len() - 1];
        if let Some(h) = &mut n.histogram {
            h.steps.get_or_insert(max_n);
            if h.bins == 0 {
                return Err(range("noise.histogram.bins must be at least 1"));
            }
            if !(h.photons > 0.0 && h.photons.is_finite()) {
                return Err(range("noise.histogram.photons must be positive"));
            }
        }
        self.noise_spec().validate().map_err(rejected)?;
        if let Some(sites) = self
            .noise
            .as_ref()
            .and_then(|n| n.histogram.as_ref())
            .and_then(|h| h.sites.as_ref())
        {
            let total = self.lattice()?.sites();
            if let Some(bad) = sites.iter().find(|&&s| s >= total) {
                return Err(range(format!(
                    "histogram site {bad} is outside a lattice of {total} sites"
                )));
            }
        }
        if let Some(mut r) = self.robustness.take() {
            let wall = *r.wall.get_or_insert(self.default_wall()?);
            if r.series.is_empty() {
                return Err(range("robustness.series must not be empty"));
            }
            for s in &r.series {
                if s.levels.is_empty() {
                    return Err(range("every robustness series needs levels"));
                }
                for &l in &s.levels {
                    non_negative("robustness level", l)?;
                    if s.kind == NoiseKind::Dephasing && l > 1.0 {
                        return Err(range(format!("dephasing level {l} exceeds 1")));
                    }
                }
            }
            if r.half_width == 0 || r.steps == 0 {
                return Err(range(
                    "robustness.half_width and robustness.steps must be positive",
                ));
            }
            self.check_wall(wall)?;
            self.robustness = Some(r);
        }
        Ok(())
    }

    fn resolve_gain_scan(&mut self) -> Result<(), ConfigError> {
        let g = self.gain_scan.get_or_insert_with(Default::default);
        finite("gain_scan.theta", g.theta)?;
        finite("gain_scan.chi.start", g.chi.start)?;
        finite("gain_scan.chi.stop", g.chi.stop)?;
        if g.chi.points < 2 || g.chi.stop <= g.chi.start {
            return Err(range(
                "gain_scan.chi needs at least 2 points and stop > start",
            ));
        }
        if matches!(g.input, GaussianInput::Walker { .. }) {
            return Err(schema("gain_scan.input cannot be a walker"));
        }
        Decoherence::from(g.decoherence)
            .validate()
            .map_err(rejected)?;
        if 4 * g.sites > DENSE_CAP {
            return Err(ConfigError::DimensionCap(format!(
                "{} modes exceed the covariance cap {DENSE_CAP}",
                2 * g.sites
            )));
        }
        let net = self.mode_network()?;
        self.gaussian_input(&net)?;
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeSpec, ConfigError> {
        let w = self.walk_section()?;
        match w.sites_y {
            None => LatticeSpec::line(w.sites, w.boundary),
            Some(ly) => LatticeSpec::square(w.sites, ly, w.boundary),
        }
        .map_err(rejected)
    }

    /// The walk of `[walk]`, with `steps` taken from the section (or 0).
    pub fn walk_spec(&self) -> Result<WalkSpec, ConfigError> {
        let w = self.walk_section()?;
        let lattice = self.lattice()?;
        let n = lattice.sites();
        let theta2 = match (&w.theta2, &w.domain) {
            (Some(t), _) => Some(t.expand(n)),
            (None, Some(d)) => {
                let split = d.split.unwrap_or(n / 2);
                let coins = CoinProfile::two_domain(&lattice, 0.0, d.left, d.right, split)
                    .map_err(rejected)?;
                coins.theta2().map(<[f64]>::to_vec)
            }
            (None, None) => None,
        };
        let coins = CoinProfile::new(&lattice, w.theta1.expand(n), theta2).map_err(rejected)?;
        let protocol = w.protocol.unwrap_or(Protocol::Simple);
        WalkSpec::new(lattice, coins, protocol, w.steps.unwrap_or(0)).map_err(rejected)
    }

    pub fn initial_state(&self) -> Result<SpinorField, ConfigError> {
        let lattice = self.lattice()?;
        let input = self.input.clone().unwrap_or_default();
        let site = input.site.unwrap_or(0);
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        make_localized_state(lattice, site, [c(input.coin_up), c(input.coin_down)])
            .map_err(rejected)
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        let n = self.noise.clone().unwrap_or_default();
        NoiseSpec {
            amplitude_noise: n.amplitude_noise,
            phase_noise: n.phase_noise,
            coin_dephasing: n.coin_dephasing,
            seed: self.seed,
            realizations: n.realizations,
        }
    }

    /// Network of the gaussian or gain-scan experiment.
    pub fn mode_network(&self) -> Result<ModeNetwork, ConfigError> {
        if let Some(g) = &self.gain_scan {
            return ModeNetwork::amplifier(g.sites, g.theta, g.chi.start, g.steps)
                .map_err(rejected);
        }
        let g = self
            .gaussian
            .as_ref()
            .ok_or_else(|| schema("no network configured"))?;
        match g.network {
            NetworkKind::Walk => ModeNetwork::from_walk(&self.walk_spec()?).map_err(rejected),
            NetworkKind::Amplifier => {
                let a = g.amplifier.clone().unwrap_or_default();
                ModeNetwork::amplifier(a.sites, a.theta, a.chi, a.steps).map_err(rejected)
            }
        }
    }

    pub fn gaussian_input(&self, net: &ModeNetwork) -> Result<GaussianState, ConfigError> {
        let input = match (&self.gain_scan, &self.gaussian) {
            (Some(g), _) => g.input.clone(),
            (None, Some(g)) => g.input.clone().unwrap_or(GaussianInput::Vacuum),
            (None, None) => return Err(schema("no gaussian input configured")),
        };
        let m = net.modes();
        let check_mode = |mode: usize| {
            if mode < m {
                Ok(())
            } else {
                Err(range(format!("input mode {mode} is outside {m} modes")))
            }
        };
        match input {
            GaussianInput::Vacuum => Ok(GaussianState::vacuum(m)),
            GaussianInput::Walker { photons } => {
                non_negative("walker photons", photons)?;
                let psi = self.initial_state()?;
                let alphas: Vec<Complex64> = psi
                    .amplitudes()
                    .iter()
                    .map(|a| a * photons.sqrt())
                    .collect();
                Ok(GaussianState::coherent(&alphas))
            }
            GaussianInput::Coherent {
                mode,
                photons,
                phase,
            } => {
                check_mode(mode)?;
                non_negative("coherent photons", photons)?;
                finite("coherent phase", phase)?;
                let mut alphas = vec![Complex64::new(0.0, 0.0); m];
                alphas[mode] = Complex64::from_polar(photons.sqrt(), phase);
                Ok(GaussianState::coherent(&alphas))
            }
            GaussianInput::Squeezed { mode, r } => {
                check_mode(mode)?;
                finite("squeezing r", r)?;
                SymplecticOp::single_mode_squeeze(m, mode, r)
                    .apply(&GaussianState::vacuum(m))
                    .map_err(rejected)
            }
            GaussianInput::Thermal { nbar } => {
                non_negative("thermal nbar", nbar)?;
                GaussianState::thermal(&vec![nbar; m]).map_err(rejected)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}
