use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stmcmc::engine::{CorrMeasure, SamplerConfig, SubsetConfig, UpdatingConfig};
use stmcmc::samplers::KernelKind;
use stmcmc_hydro::Case;

use crate::error::CliError;

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "STMCMC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Subset simulation from prior draws.
    PriorFail,
    /// Tempered updating from prior to posterior.
    Update,
    /// Updating followed by subset simulation on the posterior.
    PosteriorFail,
    /// Updating on a model with a closed-form evidence, reported side by side.
    EvidenceDemo,
    /// Predicted against simulated effective sample sizes.
    EssTable,
}

impl Pipeline {
    pub fn needs_failure(self) -> bool {
        matches!(self, Pipeline::PriorFail | Pipeline::PosteriorFail)
    }

    pub fn needs_likelihood(self) -> bool {
        matches!(self, Pipeline::Update | Pipeline::PosteriorFail | Pipeline::EvidenceDemo)
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pipeline::PriorFail => "prior-fail",
            Pipeline::Update => "update",
            Pipeline::PosteriorFail => "posterior-fail",
            Pipeline::EvidenceDemo => "evidence-demo",
            Pipeline::EssTable => "ess-table",
        };
        f.write_str(s)
    }
}

impl FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown pipeline `{s}`"))
    }
}

/// Synthetic head observations generated from a known leak configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub case: Case,
    #[serde(default = "defaults::conditions")]
    pub conditions: usize,
    pub truth_seed: u64,
    pub data_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Water network with leak parameters. `network` defaults to the bundled
    /// Hanoi fixture. Observations come either from files or from a
    /// synthetic case.
    Hanoi {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        network: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observations: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conditions: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        synthetic: Option<SyntheticData>,
        #[serde(default = "defaults::sigma_m")]
        sigma_m: f64,
    },
    /// Standard normal prior, failure when the first coordinate exceeds
    /// `threshold`.
    GaussianTail { dim: usize, threshold: f64 },
    /// Gaussian prior on a mean with Gaussian observations of it.
    Conjugate { prior_mean: f64, prior_sd: f64, noise_sd: f64, data: Vec<f64> },
    /// Standard normal prior with a likelihood equal to `exp(log_value)`
    /// everywhere; failure as for `gaussian-tail`.
    Constant {
        dim: usize,
        threshold: f64,
        #[serde(default)]
        log_value: f64,
    },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Hanoi { .. } => "hanoi",
            ModelConfig::GaussianTail { .. } => "gaussian-tail",
            ModelConfig::Conjugate { .. } => "conjugate",
            ModelConfig::Constant { .. } => "constant",
        }
    }

    fn has_failure(&self) -> bool {
        !matches!(self, ModelConfig::Conjugate { .. })
    }

    fn has_likelihood(&self) -> bool {
        match self {
            ModelConfig::Hanoi { observations, synthetic, .. } => {
                observations.is_some() || synthetic.is_some()
            }
            ModelConfig::GaussianTail { .. } => false,
            ModelConfig::Conjugate { .. } | ModelConfig::Constant { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssTableConfig {
    #[serde(default = "defaults::ess_rho")]
    pub rho: Vec<f64>,
    #[serde(default = "defaults::ess_levels")]
    pub levels: usize,
    #[serde(default = "defaults::ess_reps")]
    pub reps: usize,
}

impl Default for EssTableConfig {
    fn default() -> Self {
        Self { rho: defaults::ess_rho(), levels: defaults::ess_levels(), reps: defaults::ess_reps() }
    }
}

/// One experiment. Every field except `pipeline` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    #[serde(default = "defaults::kernel")]
    pub kernel: KernelKind,
    #[serde(default = "defaults::n")]
    pub n: usize,
    /// Level probability for subset simulation.
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
    /// Target weight COV for updating.
    #[serde(default = "defaults::kappa_star")]
    pub kappa_star: f64,
    #[serde(default = "defaults::rho_target")]
    pub rho_target: f64,
    /// Acceptance rate the proposal scale is tuned towards.
    #[serde(default = "defaults::target_rate", alias = "alpha_star")]
    pub target_rate: f64,
    #[serde(default = "defaults::gain")]
    pub gain: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::repeat")]
    pub repeat: usize,
    /// Threads for the chain updates; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "defaults::block")]
    pub block: usize,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
    /// Correlation measure while updating; cca when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr_measure: Option<CorrMeasure>,
    /// Correlation measure during subset levels; log-target when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_corr_measure: Option<CorrMeasure>,
    #[serde(default = "defaults::subset_max_levels")]
    pub subset_max_levels: usize,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess: Option<EssTableConfig>,
}

mod defaults {
    use std::path::PathBuf;
    use stmcmc::samplers::KernelKind;

    pub fn kernel() -> KernelKind {
        KernelKind::Romma
    }
    pub fn n() -> usize {
        1024
    }
    pub fn kappa() -> f64 {
        0.5
    }
    pub fn kappa_star() -> f64 {
        1.0
    }
    pub fn rho_target() -> f64 {
        0.6
    }
    pub fn target_rate() -> f64 {
        0.234
    }
    pub fn gain() -> f64 {
        2.1
    }
    pub fn repeat() -> usize {
        1
    }
    pub fn block() -> usize {
        5
    }
    pub fn max_steps() -> usize {
        200
    }
    pub fn subset_max_levels() -> usize {
        40
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn conditions() -> usize {
        10
    }
    pub fn sigma_m() -> f64 {
        1.0
    }
    pub fn ess_rho() -> Vec<f64> {
        vec![0.3, 0.6, 0.75]
    }
    pub fn ess_levels() -> usize {
        40
    }
    pub fn ess_reps() -> usize {
        400
    }
}

/// Command-line replacements for config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kernel: Option<KernelKind>,
    pub n: Option<usize>,
    pub kappa: Option<f64>,
    pub kappa_star: Option<f64>,
    pub rho_target: Option<f64>,
    pub target_rate: Option<f64>,
    pub gain: Option<f64>,
    pub seed: Option<u64>,
    pub repeat: Option<usize>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal config for `pipeline` with every other field at its default.
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            kernel: defaults::kernel(),
            n: defaults::n(),
            kappa: defaults::kappa(),
            kappa_star: defaults::kappa_star(),
            rho_target: defaults::rho_target(),
            target_rate: defaults::target_rate(),
            gain: defaults::gain(),
            seed: 0,
            repeat: defaults::repeat(),
            workers: 0,
            block: defaults::block(),
            max_steps: defaults::max_steps(),
            corr_measure: None,
            subset_corr_measure: None,
            subset_max_levels: defaults::subset_max_levels(),
            output_dir: defaults::output_dir(),
            model: None,
            ess: None,
        }
    }

    /// Parse TOML. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    /// Read a config file; precedence is flags, then the output directory
    /// environment variable, then the file, then defaults.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, Some(base))?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        cfg.apply(overrides);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(ModelConfig::Hanoi { network, observations, conditions, .. }) = &mut self.model {
            network.iter_mut().for_each(fix);
            observations.iter_mut().for_each(fix);
            conditions.iter_mut().for_each(fix);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { self.$f = v; } )* };
        }
        set!(kernel, n, kappa, kappa_star, rho_target, target_rate, gain, seed, repeat, workers, output_dir);
    }

    /// Every problem with the config, collected before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        check(self.n >= 2, format!("n = {} must be at least 2", self.n));
        check(self.repeat >= 1, "repeat must be at least 1".into());
        check(
            self.rho_target > 0.0 && self.rho_target < 1.0,
            format!("rho_target = {} must lie in (0, 1)", self.rho_target),
        );
        check(
            self.target_rate > 0.0 && self.target_rate < 1.0,
            format!("target_rate = {} must lie in (0, 1)", self.target_rate),
        );
        check(self.gain > 1.0, format!("gain = {} must exceed 1", self.gain));
        check(self.block > 0 && self.max_steps > 0, "block and max_steps must be positive".into());
        if self.pipeline.needs_failure() {
            check(self.kappa > 0.0 && self.kappa < 1.0, format!("kappa = {} must lie in (0, 1)", self.kappa));
            let kn = self.kappa * self.n as f64;
            check(
                (kn - kn.round()).abs() < 1e-9 && kn >= 1.0,
                format!("kappa * n = {kn} must be a positive integer (n even when kappa = 1/2)"),
            );
            check(self.subset_max_levels > 0, "subset_max_levels must be positive".into());
        }
        if self.pipeline.needs_likelihood() {
            check(
                self.kappa_star > 0.0 && self.kappa_star.is_finite(),
                format!("kappa_star = {} must be positive", self.kappa_star),
            );
        }

        match (&self.model, self.pipeline) {
            (_, Pipeline::EssTable) => {
                let ess = self.ess.clone().unwrap_or_default();
                check(
                    !ess.rho.is_empty() && ess.rho.iter().all(|r| *r > 0.0 && *r < 1.0),
                    "ess.rho must be a non-empty list in (0, 1)".into(),
                );
                check(ess.levels >= 2 && ess.reps >= 2, "ess.levels and ess.reps must be at least 2".into());
            }
            (None, p) => errs.push(format!("pipeline {p} needs a [model] section")),
            (Some(m), p) => {
                if p.needs_failure() && !m.has_failure() {
                    errs.push(format!("model {} has no failure function for pipeline {p}", m.name()));
                }
                if p.needs_likelihood() && !m.has_likelihood() {
                    errs.push(format!("model {} has no likelihood for pipeline {p}", m.name()));
                }
                if p == Pipeline::EvidenceDemo
                    && !matches!(m, ModelConfig::Conjugate { .. } | ModelConfig::Constant { .. })
                {
                    errs.push("evidence-demo needs a model with a known evidence (conjugate or constant)".into());
                }
                validate_model(m, &mut errs);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }

    pub fn sampler(&self, seed: u64, corr: CorrMeasure) -> SamplerConfig {
        SamplerConfig {
            n: self.n,
            kernel: self.kernel,
            rho_target: self.rho_target,
            block: self.block,
            max_steps: self.max_steps,
            corr_measure: corr,
            target_rate: self.target_rate,
            gain: self.gain,
            initial_sigma: None,
            seed,
        }
    }

    pub fn updating(&self, seed: u64) -> UpdatingConfig {
        UpdatingConfig {
            sampler: self.sampler(seed, self.corr_measure.unwrap_or(CorrMeasure::Cca)),
            kappa_star: self.kappa_star,
            ..UpdatingConfig::default()
        }
    }

    pub fn subset(&self, seed: u64) -> SubsetConfig {
        SubsetConfig {
            sampler: self.sampler(seed, self.subset_corr_measure.unwrap_or(CorrMeasure::LogTarget)),
            kappa: self.kappa,
            max_levels: self.subset_max_levels,
            ..SubsetConfig::default()
        }
    }

    /// The config without its output directory, which does not affect
    /// results.
    pub fn normalized(&self) -> Self {
        Self { output_dir: PathBuf::new(), ..self.clone() }
    }

    /// SHA-256 of the normalized config in canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.normalized()).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

fn validate_model(m: &ModelConfig, errs: &mut Vec<String>) {
    let mut exists = |what: &str, p: &Option<PathBuf>| {
        if let Some(p) = p {
            if !p.is_file() {
                errs.push(format!("{what} file {} does not exist", p.display()));
            }
        }
    };
    match m {
        ModelConfig::Hanoi { network, observations, conditions, synthetic, sigma_m } => {
            exists("network", network);
            exists("observations", observations);
            exists("conditions", conditions);
            if observations.is_some() != conditions.is_some() {
                errs.push("observations and conditions files must be given together".into());
            }
            if observations.is_some() && synthetic.is_some() {
                errs.push("give either observation files or a synthetic case, not both".into());
            }
            if let Some(s) = synthetic {
                if s.conditions == 0 {
                    errs.push("synthetic.conditions must be positive".into());
                }
            }
            if !(*sigma_m > 0.0 && sigma_m.is_finite()) {
                errs.push(format!("sigma_m = {sigma_m} must be positive"));
            }
        }
        ModelConfig::GaussianTail { dim, threshold } | ModelConfig::Constant { dim, threshold, .. } => {
            if *dim == 0 {
                errs.push("model dim must be positive".into());
            }
            if !threshold.is_finite() {
                errs.push("model threshold must be finite".into());
            }
            if let ModelConfig::Constant { log_value, .. } = m {
                if !log_value.is_finite() {
                    errs.push("constant log_value must be finite".into());
                }
            }
        }
        ModelConfig::Conjugate { prior_mean, prior_sd, noise_sd, data } => {
            if !(prior_mean.is_finite() && *prior_sd > 0.0 && *noise_sd > 0.0) {
                errs.push("conjugate model needs a finite prior mean and positive deviations".into());
            }
            if data.is_empty() || data.iter().any(|y| !y.is_finite()) {
                errs.push("conjugate model needs finite data".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "pipeline = \"prior-fail\"\n[model]\nkind = \"gaussian-tail\"\ndim = 2\nthreshold = 3.0\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.n, 1024);
        assert_eq!(cfg.kernel, KernelKind::Romma);
        assert_eq!(cfg.kappa, 0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn alias_and_unknown_fields() {
        let cfg = ExperimentConfig::from_toml("pipeline = \"ess-table\"\nalpha_star = 0.3\n", None).unwrap();
        assert_eq!(cfg.target_rate, 0.3);
        assert!(ExperimentConfig::from_toml("pipeline = \"update\"\nbogus = 1\n", None).is_err());
    }

    #[test]
    fn all_problems_reported_together() {
        let mut cfg = ExperimentConfig::new(Pipeline::PriorFail);
        cfg.n = 1023;
        cfg.rho_target = 1.5;
        cfg.model = Some(ModelConfig::Hanoi {
            network: Some("/no/such/net.json".into()),
            observations: None,
            conditions: None,
            synthetic: None,
            sigma_m: 1.0,
        });
        match cfg.validate() {
            Err(CliError::Config(e)) => {
                assert_eq!(e.len(), 3, "{e:?}");
                assert!(e.iter().any(|m| m.contains("n even")));
                assert!(e.iter().any(|m| m.contains("/no/such/net.json")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_must_fit_pipeline() {
        let mut cfg = ExperimentConfig::new(Pipeline::Update);
        cfg.model = Some(ModelConfig::GaussianTail { dim: 2, threshold: 3.0 });
        assert!(cfg.validate().is_err());
        cfg.pipeline = Pipeline::PriorFail;
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::new(Pipeline::EssTable);
        cfg.apply(&Overrides { n: Some(64), kernel: Some(KernelKind::Mma), ..Default::default() });
        assert_eq!((cfg.n, cfg.kernel), (64, KernelKind::Mma));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::new(Pipeline::EssTable);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
