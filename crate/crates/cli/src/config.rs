//! Pipeline configuration: one TOML file, relative paths resolved against
//! the file's directory, flags applied on top.

use std::path::{Path, PathBuf};

use cellmine_core::digitizer::DigitizerConfig;
use cellmine_core::features::{FilterCriteria, Target};
use cellmine_core::merge::MergeConfig;
use cellmine_core::ml::{ForestParams, GbmParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_API_KEY_ENV: &str = "CELLMINE_API_KEY";
pub const TARGET_CYCLES: [u32; 3] = [100, 200, 300];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory of `<doi stem>.xml` papers.
    pub corpus: PathBuf,
    /// Directory of graph images, annotation sidecars and fixture specs.
    pub fixtures: PathBuf,
    /// Replay transcript (read in replay mode, written when recording).
    pub transcripts: PathBuf,
    /// Answer key used by `record` mode.
    #[serde(default)]
    pub answer_key: Option<PathBuf>,
    /// Intermediate artifacts and the manifest.
    #[serde(default = "default_work")]
    pub work: PathBuf,
    #[serde(default)]
    pub db: Option<PathBuf>,
    #[serde(default)]
    pub models: Option<PathBuf>,
    #[serde(default)]
    pub reports: Option<PathBuf>,
}

fn default_work() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    /// Answers come from the transcript only; a miss is an error.
    Replay,
    /// Answers come from the answer key and are written to the transcript.
    Record,
    /// Answers come from the live endpoint and are written to the transcript.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySettings {
    pub mode: GatewayMode,
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key. The key itself never
    /// appears in the file.
    pub api_key_env: String,
    pub requests_per_minute: Option<f64>,
    pub retries: u32,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            mode: GatewayMode::Replay,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            requests_per_minute: None,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMatcher {
    Fallback,
    Gateway,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeSettings {
    pub matcher: LabelMatcher,
    /// Dictionary TSV replacing the built-in one.
    pub dictionary: Option<PathBuf>,
    #[serde(flatten)]
    pub config: MergeConfig,
}

impl Default for MergeSettings {
    fn default() -> Self {
        Self { matcher: LabelMatcher::Fallback, dictionary: None, config: MergeConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    InitialCapacity,
    CapacityAtCycle,
    Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rf,
    Gbm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Gbm => "gbm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSettings {
    pub target: TargetKind,
    pub target_cycle: Option<u32>,
    pub model: ModelKind,
    pub split_ratio: f64,
    pub forest: ForestParams,
    pub gbm: GbmParams,
}

impl Default for TaskSettings {
    fn default() -> Self {
        Self {
            target: TargetKind::InitialCapacity,
            target_cycle: None,
            model: ModelKind::Rf,
            split_ratio: 0.7,
            forest: ForestParams::default(),
            gbm: GbmParams::default(),
        }
    }
}

impl TaskSettings {
    pub fn target(&self) -> Target {
        match (self.target, self.target_cycle) {
            (TargetKind::CapacityAtCycle, Some(n)) => Target::CapacityAtCycle(n),
            (TargetKind::Stability, Some(n)) => Target::Stability(n),
            _ => Target::InitialCapacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub gateway: GatewaySettings,
    #[serde(default)]
    pub digitizer: DigitizerConfig,
    #[serde(default)]
    pub merge: MergeSettings,
    #[serde(default)]
    pub filter: FilterCriteria,
    #[serde(default)]
    pub task: TaskSettings,
}

/// Values given on the command line; each replaces the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub work: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<GatewayMode>,
    pub target: Option<TargetKind>,
    pub target_cycle: Option<u32>,
    pub model: Option<ModelKind>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

impl PipelineConfig {
    pub fn from_toml(src: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: PipelineConfig = toml::from_str(src).map_err(|e| invalid(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&src, base)
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for path in [&mut p.corpus, &mut p.fixtures, &mut p.transcripts, &mut p.work] {
            abs(path);
        }
        for path in [&mut p.answer_key, &mut p.db, &mut p.models, &mut p.reports].into_iter().flatten() {
            abs(path);
        }
        if let Some(d) = &mut self.merge.dictionary {
            abs(d);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = &o.work {
            self.paths.work = w.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.gateway.mode = m;
        }
        if let Some(t) = o.target {
            self.task.target = t;
            if t == TargetKind::InitialCapacity {
                self.task.target_cycle = None;
            }
        }
        if let Some(c) = o.target_cycle {
            self.task.target_cycle = Some(c);
        }
        if let Some(m) = o.model {
            self.task.model = m;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.task;
        match (t.target, t.target_cycle) {
            (TargetKind::InitialCapacity, Some(_)) => {
                return Err(invalid("target_cycle must be unset for initial_capacity"));
            }
            (TargetKind::CapacityAtCycle | TargetKind::Stability, None) => {
                return Err(invalid(format!("target {:?} needs target_cycle", t.target)));
            }
            (_, Some(n)) if !TARGET_CYCLES.contains(&n) => {
                return Err(invalid(format!("target_cycle {n} not in {TARGET_CYCLES:?}")));
            }
            _ => {}
        }
        if !(t.split_ratio > 0.0 && t.split_ratio < 1.0) {
            return Err(invalid(format!("split_ratio {} outside (0, 1)", t.split_ratio)));
        }
        if let Some(n) = t.target_cycle {
            if !self.merge.config.targets.contains(&n) {
                return Err(invalid(format!("target_cycle {n} not among merge targets")));
            }
        }
        if self.gateway.mode == GatewayMode::Record && self.paths.answer_key.is_none() {
            return Err(invalid("record mode needs paths.answer_key"));
        }
        if self.gateway.requests_per_minute.is_some_and(|r| r.is_nan() || r <= 0.0) {
            return Err(invalid("requests_per_minute must be positive"));
        }
        let f = &self.filter;
        if f.temperature_band[0].partial_cmp(&f.temperature_band[1]).is_none_or(|o| o.is_gt()) {
            return Err(invalid("filter temperature_band must be increasing"));
        }
        if !(self.merge.config.match_threshold > 0.0 && self.merge.config.match_threshold <= 1.0) {
            return Err(invalid("match_threshold outside (0, 1]"));
        }
        Ok(())
    }

    pub fn db_path(&self) -> PathBuf {
        self.paths.db.clone().unwrap_or_else(|| self.paths.work.join("db.jsonl"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.paths.models.clone().unwrap_or_else(|| self.paths.work.join("models"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.paths.reports.clone().unwrap_or_else(|| self.paths.work.join("reports"))
    }

    /// `{target}_{cycle|na}_{model}_{seed}`, shared by model and report files.
    pub fn run_stem(&self) -> String {
        let target = self.task.target();
        cellmine_core::eval::report_stem(target.name(), target.cycle(), self.task.model.as_str(), self.seed)
    }
}
