//! Experiment configuration: one JSON document.
//!
//! ```json
//! {
//!   "mechanisms": [{"id": "warmup", "params": {"c": 2}, "catalogs": ["alice.json", [...]]}],
//!   "library": {"m": 4},
//!   "suites": ["measure", "theorem-check"],
//!   "seed": 7,
//!   "outputs": {"dir": "out"}
//! }
//! ```
//!
//! A catalog source is either a path (relative to the config file) to a JSON
//! list of valuations or the list itself. Mechanisms without catalogs use the
//! library defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use taxlab::disjointness::ZDisjointnessInstance;
use taxlab::json::catalog_from_json;
use taxlab::protocol::library::{default_catalogs, library_at};
use taxlab::{make_example, Catalog, MechanismSpec, Rat};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Measure,
    ReconstructValue,
    ReconstructComm,
    ExtractMinAffine,
    VerifyMenu,
    Disjointness,
    Transform,
    Simultaneous,
    TheoremCheck,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Measure => "measure",
            Suite::ReconstructValue => "reconstruct-value",
            Suite::ReconstructComm => "reconstruct-comm",
            Suite::ExtractMinAffine => "extract-min-affine",
            Suite::VerifyMenu => "verify-menu",
            Suite::Disjointness => "disjointness",
            Suite::Transform => "transform",
            Suite::Simultaneous => "simultaneous",
            Suite::TheoremCheck => "theorem-check",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Source {
    Path(String),
    Inline(Value),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MechanismEntry {
    id: String,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    catalogs: Option<Vec<Source>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryEntry {
    m: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Outputs {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    mechanism: Option<MechanismEntry>,
    #[serde(default)]
    mechanisms: Vec<MechanismEntry>,
    #[serde(default)]
    library: Option<LibraryEntry>,
    #[serde(default)]
    suites: Vec<Suite>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    outputs: Outputs,
    /// Base functions per (profile, player, class) in the verify suite.
    #[serde(default = "default_verify_trials")]
    verify_trials: usize,
    /// Catalog entries per player kept by the deviation audit.
    #[serde(default)]
    audit_catalog_size: Option<usize>,
    #[serde(default)]
    disjointness: Vec<Source>,
}

fn default_verify_trials() -> usize {
    2
}

pub struct Experiment {
    pub mechanism: MechanismSpec<Rat>,
    pub catalogs: Vec<Catalog<Rat>>,
}

pub struct Config {
    pub experiments: Vec<Experiment>,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub verify_trials: usize,
    pub audit_catalog_size: Option<usize>,
    pub instances: Vec<ZDisjointnessInstance>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn read_json(base: &Path, path: &str) -> Result<Value, CliError> {
    let full = base.join(path);
    let text = std::fs::read_to_string(&full).map_err(|e| config_err(format!("{}: {e}", full.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", full.display())))
}

fn load_source(base: &Path, src: &Source) -> Result<Value, CliError> {
    match src {
        Source::Path(p) => read_json(base, p),
        Source::Inline(v) => Ok(v.clone()),
    }
}

fn load_experiment(base: &Path, entry: &MechanismEntry) -> Result<Experiment, CliError> {
    let mechanism = make_example::<Rat>(&entry.id, &entry.params).map_err(|e| config_err(format!("{}: {e}", entry.id)))?;
    let catalogs = match &entry.catalogs {
        None => default_catalogs(mechanism.as_ref()).map_err(|e| config_err(e.to_string()))?,
        Some(list) => list
            .iter()
            .map(|src| catalog_from_json(&load_source(base, src)?).map_err(|e| config_err(format!("{}: {e}", entry.id))))
            .collect::<Result<_, _>>()?,
    };
    let id = mechanism.id();
    if catalogs.len() != mechanism.players() {
        return Err(config_err(format!("{id}: {} catalogs for {} players", catalogs.len(), mechanism.players())));
    }
    for (i, cat) in catalogs.iter().enumerate() {
        if cat.m() != mechanism.items() {
            return Err(config_err(format!("{id}: catalog {i} has m = {}, mechanism has m = {}", cat.m(), mechanism.items())));
        }
        for (k, v) in cat.entries().iter().enumerate() {
            mechanism
                .check_domain(i, v)
                .map_err(|e| config_err(format!("{id}: player {i} entry {k}: {e}")))?;
        }
    }
    Ok(Experiment { mechanism, catalogs })
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let raw: RawConfig = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut experiments = Vec::new();
        for entry in raw.mechanism.iter().chain(&raw.mechanisms) {
            experiments.push(load_experiment(base, entry)?);
        }
        if let Some(lib) = &raw.library {
            for mechanism in library_at::<Rat>(lib.m).map_err(|e| config_err(format!("library: {e}")))? {
                let catalogs = default_catalogs(mechanism.as_ref()).map_err(|e| config_err(e.to_string()))?;
                experiments.push(Experiment { mechanism, catalogs });
            }
        }
        let mut suites = raw.suites;
        suites.dedup();
        let needs_mechanism = suites.iter().any(|s| *s != Suite::Disjointness);
        if needs_mechanism && experiments.is_empty() {
            return Err(config_err("suites need at least one mechanism"));
        }
        let instances = raw
            .disjointness
            .iter()
            .map(|src| {
                let v = load_source(base, src)?;
                ZDisjointnessInstance::from_json(&v.to_string()).map_err(|e| config_err(format!("disjointness: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if suites.contains(&Suite::Disjointness) && instances.is_empty() {
            return Err(config_err("the disjointness suite needs \"disjointness\" instances"));
        }
        if raw.verify_trials == 0 && suites.contains(&Suite::VerifyMenu) {
            return Err(config_err("verify_trials must be positive"));
        }
        Ok(Config {
            experiments,
            suites,
            seed: raw.seed,
            out_dir: raw.outputs.dir.map(|d| base.join(d)).unwrap_or_else(|| PathBuf::from("taxlab-out")),
            verify_trials: raw.verify_trials,
            audit_catalog_size: raw.audit_catalog_size,
            instances,
        })
    }
}
