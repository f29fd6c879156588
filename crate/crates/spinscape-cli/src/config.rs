//! Experiment configuration: file format, flag overrides and resolution
//! into library objects.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use spinscape::critical::classical_m;
use spinscape::landscape::{auto_offset, FKind, ModificationParams};
use spinscape::model::ENUMERATION_LIMIT;
use spinscape::rem::preset_threshold;
use spinscape::{EnergyModel, GraphSpec, Landscape, RemDisorder, SpinConfig};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Analyze,
    Sweep,
    Sample,
    Tunnel,
    Anneal,
    RemStudy,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::Sweep => "sweep",
            Mode::Sample => "sample",
            Mode::Tunnel => "tunnel",
            Mode::Anneal => "anneal",
            Mode::RemStudy => "rem-study",
        }
    }

    pub fn randomized(self) -> bool {
        matches!(self, Mode::Sample | Mode::Tunnel | Mode::Anneal | Mode::RemStudy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum GraphConfig {
    Complete,
    RandomRegular { r: usize, seed: u64 },
    ErdosRenyi { p: f64, seed: u64 },
    Edges { edges: Vec<(usize, usize)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ModelConfig {
    /// Explicit energies indexed by state bits.
    Table { energies: Vec<f64> },
    Ising {
        n: usize,
        j: f64,
        #[serde(default)]
        h: f64,
        graph: GraphConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tie_tol: Option<f64>,
    },
    /// Disorder drawn from `seed`, or read from a binary disorder file.
    Rem {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
}

impl ModelConfig {
    pub fn n(&self) -> Result<usize> {
        Ok(match self {
            ModelConfig::Table { energies } => {
                let len = energies.len();
                ensure!(len >= 2 && len.is_power_of_two(), "table length {len} is not 2^N with N >= 1");
                len.trailing_zeros() as usize
            }
            ModelConfig::Ising { n, .. } | ModelConfig::Rem { n, .. } => *n,
        })
    }

    pub fn build(&self) -> Result<EnergyModel> {
        Ok(match self {
            ModelConfig::Table { energies } => EnergyModel::table(energies.clone())?,
            ModelConfig::Ising { n, j, h, graph, tie_tol } => {
                let g = match graph {
                    GraphConfig::Complete => GraphSpec::complete(*n, *j, *h)?,
                    GraphConfig::RandomRegular { r, seed } => GraphSpec::random_regular(*n, *r, *j, *h, *seed)?,
                    GraphConfig::ErdosRenyi { p, seed } => GraphSpec::erdos_renyi(*n, *p, *j, *h, *seed)?,
                    GraphConfig::Edges { edges } => GraphSpec::new(*n, edges.clone(), *j, *h)?,
                };
                let m = EnergyModel::ising(g)?;
                match tie_tol {
                    Some(t) => m.with_tie_tolerance(*t)?,
                    None => m,
                }
            }
            ModelConfig::Rem { n, seed, file } => {
                let d = match (seed, file) {
                    (_, Some(path)) => {
                        let f = fs::File::open(path).with_context(|| format!("opening disorder file {}", path.display()))?;
                        let d = RemDisorder::read_from(std::io::BufReader::new(f))?;
                        ensure!(d.n == *n, "disorder file holds N = {}, config says {n}", d.n);
                        d
                    }
                    (Some(s), None) => RemDisorder::generate(*n, *s)?,
                    (None, None) => bail!("rem model needs a disorder seed or file"),
                };
                EnergyModel::rem(d)
            }
        })
    }
}

/// How `α` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", untagged)]
pub enum AlphaRule {
    Fixed(f64),
    /// The literal string `"beta"`: `α = β` at every temperature.
    Named(AlphaName),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaName {
    Beta,
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::Named(AlphaName::Beta)
    }
}

impl AlphaRule {
    fn at(&self, beta: f64) -> f64 {
        match self {
            AlphaRule::Fixed(a) => *a,
            AlphaRule::Named(AlphaName::Beta) => beta,
        }
    }
}

/// Where `c` comes from. Absent everything, `c = H* + auto offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModificationConfig {
    #[serde(default = "quadratic")]
    pub f: FKind,
    #[serde(default)]
    pub alpha: AlphaRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    /// `c = -N√(2 ln 2) + N^{1/4}/4`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub rem_preset: bool,
    /// Overrides the enumerated ground energy (required past the enumeration limit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_star: Option<f64>,
}

impl Default for ModificationConfig {
    fn default() -> Self {
        Self {
            f: FKind::Quadratic,
            alpha: AlphaRule::default(),
            c: None,
            offset: None,
            rem_preset: false,
            h_star: None,
        }
    }
}

fn quadratic() -> FKind {
    FKind::Quadratic
}

fn is_false(b: &bool) -> bool {
    !b
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Skip the `δ < c - H*` check in `anneal`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub unchecked_delta: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    /// Annealing exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillation: Option<f64>,
    /// Bitstrings, most significant coordinate first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<Vec<Chain>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chain {
    Original,
    Modified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub model: ModelConfig,
    #[serde(default)]
    pub modification: ModificationConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn of(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Ok(Format::Toml),
            Some("json") => Ok(Format::Json),
            _ => bail!("config {} must end in .toml or .json", path.display()),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, format: Format) -> Result<Self> {
        Ok(match format {
            Format::Toml => toml::from_str(text)?,
            Format::Json => serde_json::from_str(text)?,
        })
    }

    #[cfg(test)]
    pub fn serialize(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Toml => toml::to_string(self)?,
            Format::Json => serde_json::to_string_pretty(self)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, Format::of(path)?).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies flag overrides and checks everything that can be checked
    /// without running.
    pub fn resolve(mut self, mode: Mode, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(m) = self.mode {
            ensure!(m == mode, "config is for '{}', invoked as '{}'", m.name(), mode.name());
        }
        self.mode = Some(mode);
        if seed.is_some() {
            self.seed = seed;
        }
        if out.is_some() {
            self.out = out;
        }
        if mode.randomized() {
            ensure!(self.seed.is_some(), "'{}' is randomized: pass --seed or set seed in the config", mode.name());
        }
        if let ModelConfig::Rem { file: Some(p), .. } = &self.model {
            ensure!(p.exists(), "disorder file {} does not exist", p.display());
        }
        let n = self.model.n()?;
        ensure!((1..=spinscape::spin::MAX_SPINS).contains(&n), "N = {n} outside 1..=30");
        let r = &self.run;
        for (name, grid) in [("betas", &r.betas), ("horizons", &r.horizons)] {
            if let Some(g) = grid {
                ensure!(!g.is_empty(), "{name} grid is empty");
            }
        }
        if let Some(s) = &r.starts {
            ensure!(!s.is_empty(), "start list is empty");
            for b in s {
                let c = SpinConfig::parse(b)?;
                ensure!(c.n() == n, "start {b} has {} digits, model has N = {n}", c.n());
            }
        }
        if let Some(0) = r.runs {
            bail!("runs must be positive");
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("resolved config of a randomized mode has a seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn starts(&self) -> Option<Vec<u32>> {
        self.run
            .starts
            .as_ref()
            .map(|v| v.iter().map(|s| SpinConfig::parse(s).expect("validated").bits()).collect())
    }

    pub fn beta(&self) -> Result<f64> {
        self.run.beta.context("run.beta is required")
    }
}

/// Built model plus the quantities the modification depends on.
pub struct Instance {
    pub model: EnergyModel,
    /// Present when `N` is within the enumeration limit.
    pub land: Option<Landscape>,
    pub h_star: f64,
    pub c: f64,
    pub c_source: &'static str,
    pub warnings: Vec<String>,
}

/// `c`, `H*` and anything else resolved from the instance, for the output header.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub n: usize,
    pub h_star: f64,
    pub c: f64,
    pub c_source: &'static str,
    pub warnings: Vec<String>,
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let model = cfg.model.build()?;
        let n = model.n();
        let land = if n <= ENUMERATION_LIMIT { Some(model.landscape()?) } else { None };
        let md = &cfg.modification;
        let h_star = match (md.h_star, &land) {
            (Some(h), _) => h,
            (None, Some(l)) => l.stats.h_star,
            (None, None) => bail!("N = {n} is past the enumeration limit: set modification.h_star"),
        };
        let mut warnings = Vec::new();
        let explicit = [md.c.is_some(), md.offset.is_some(), md.rem_preset].iter().filter(|b| **b).count();
        ensure!(explicit <= 1, "set at most one of modification.c, offset, rem_preset");
        let (c, c_source) = if let Some(c) = md.c {
            (c, "explicit")
        } else if let Some(o) = md.offset {
            (h_star + o, "offset")
        } else if md.rem_preset {
            (preset_threshold(n), "rem-preset")
        } else {
            let Some(l) = &land else {
                bail!("N = {n} is past the enumeration limit: set modification.c or offset");
            };
            let m = classical_m(l)?.m;
            let (o, w) = auto_offset(l, Some(m))?;
            warnings.extend(w);
            (h_star + o, "auto-offset")
        };
        ensure!(c >= h_star, "c = {c} lies below H* = {h_star}");
        Ok(Self {
            model,
            land,
            h_star,
            c,
            c_source,
            warnings,
        })
    }

    pub fn land(&self, what: &str) -> Result<&Landscape> {
        self.land.as_ref().with_context(|| {
            format!("{what} needs an enumerated landscape (N <= {ENUMERATION_LIMIT})")
        })
    }

    pub fn params(&self, cfg: &ExperimentConfig, beta: f64) -> Result<ModificationParams> {
        let md = &cfg.modification;
        Ok(ModificationParams::new(md.f.clone(), md.alpha.at(beta), self.c, beta, self.h_star)?)
    }

    pub fn unmodified(&self, beta: f64) -> Result<ModificationParams> {
        Ok(ModificationParams::unmodified(beta, self.h_star)?)
    }

    pub fn resolved(&self) -> Resolved {
        Resolved {
            n: self.model.n(),
            h_star: self.h_star,
            c: self.c,
            c_source: self.c_source,
            warnings: self.warnings.clone(),
        }
    }
}
