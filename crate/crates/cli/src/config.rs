//! Run configuration: command-line flags over a TOML file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use salesdialog::{GenerationParams, PolarityThresholds};
use serde::{Deserialize, Serialize};

pub const MAX_PER_TEMPLATE: usize = 100_000;

/// Every setting a run may take, all optional. Used both for the config
/// file and for the flags of one invocation.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub meta: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub phrasebank: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub per_template: Option<usize>,
    pub positive_threshold: Option<f64>,
    pub negative_threshold: Option<f64>,
    pub p_skip: Option<f64>,
    pub retry_budget: Option<usize>,
    pub top_k: Option<usize>,
    pub min_opinions: Option<usize>,
    pub local_retries: Option<usize>,
    pub strict: Option<bool>,
    pub workers: Option<usize>,
}

macro_rules! overlay {
    ($low:expr, $high:expr, $($field:ident),*) => {
        RunConfig { $($field: $high.$field.or($low.$field)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Fields set in `flags` win over fields set in `self`.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        overlay!(
            self,
            flags,
            meta,
            reviews,
            corpus,
            lexicon,
            phrasebank,
            templates,
            annotations,
            dataset,
            out,
            seed,
            per_template,
            positive_threshold,
            negative_threshold,
            p_skip,
            retry_budget,
            top_k,
            min_opinions,
            local_retries,
            strict,
            workers
        )
    }

    /// Applies defaults and checks bounds.
    pub fn resolve(self) -> Result<Settings> {
        let defaults = GenerationParams::default();
        let default_thresholds = PolarityThresholds::default();
        let Some(out) = self.out else { bail!("an output directory is required (--out)") };
        let corpus = self.corpus.unwrap_or_else(|| out.join("corpus.json"));
        let settings = Settings {
            meta: self.meta,
            reviews: self.reviews,
            corpus,
            lexicon: self.lexicon,
            phrasebank: self.phrasebank,
            templates: self.templates,
            annotations: self.annotations,
            dataset: self.dataset,
            out,
            seed: self.seed,
            per_template: self.per_template.unwrap_or(10),
            positive_threshold: self.positive_threshold.unwrap_or(default_thresholds.positive),
            negative_threshold: self.negative_threshold.unwrap_or(default_thresholds.negative),
            params: GenerationParams {
                p_skip: self.p_skip.unwrap_or(defaults.p_skip),
                retry_budget: self.retry_budget.unwrap_or(defaults.retry_budget),
                top_k: self.top_k.unwrap_or(defaults.top_k),
                min_opinions: self.min_opinions.unwrap_or(defaults.min_opinions),
                local_retries: self.local_retries.unwrap_or(defaults.local_retries),
            },
            strict: self.strict.unwrap_or(false),
            workers: self.workers,
        };
        settings.params.validate()?;
        settings.thresholds()?;
        if !(1..=MAX_PER_TEMPLATE).contains(&settings.per_template) {
            bail!("per_template must be in 1..={MAX_PER_TEMPLATE}, got {}", settings.per_template);
        }
        if settings.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        Ok(settings)
    }
}

/// Fully resolved settings; echoed into run reports.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub meta: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub corpus: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub phrasebank: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub per_template: usize,
    pub positive_threshold: f64,
    pub negative_threshold: f64,
    #[serde(flatten)]
    pub params: GenerationParams,
    pub strict: bool,
    pub workers: Option<usize>,
}

impl Settings {
    pub fn thresholds(&self) -> Result<PolarityThresholds> {
        Ok(PolarityThresholds::new(self.positive_threshold, self.negative_threshold)?)
    }
}
