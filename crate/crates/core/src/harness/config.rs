//! Experiment configuration: flat TOML, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ScalarKernel;
use crate::schedule::{
    theorem_preset_with, FiniteHorizonSchedule, OnlineSchedule, Regime, Schedule, Setting, Target,
};
use crate::spectral::{NoiseMode, SpectralWorld, WorldConfig, XiLaw};
use crate::structured::{LabelKernel, StructuredTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RateExpectation,
    RateHighprob,
    Decomposition,
    LemmaAudit,
    StructuredDemo,
    PcaDemo,
    DualVsSpectral,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::RateExpectation => "rate-expectation",
            ExperimentKind::RateHighprob => "rate-highprob",
            ExperimentKind::Decomposition => "decomposition",
            ExperimentKind::LemmaAudit => "lemma-audit",
            ExperimentKind::StructuredDemo => "structured-demo",
            ExperimentKind::PcaDemo => "pca-demo",
            ExperimentKind::DualVsSpectral => "dual-vs-spectral",
        }
    }

    pub fn regime(self) -> Regime {
        if self == ExperimentKind::RateHighprob {
            Regime::HighProbability
        } else {
            Regime::Expectation
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SettingKind {
    Online,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSource {
    /// Exponents and constants from the theorem presets.
    Preset,
    /// `theta1 .. t0` (online) or `theta3 .. lambda1` (finite) from the config.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelTask {
    /// Rankings of 3 items, Kendall kernel.
    Ranking,
    /// Binary words of length 3, matching kernel.
    Tagging,
    /// `labels` and `label_kernel` from the config.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialKernel {
    Gaussian,
    InverseMultiquadric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,

    pub d: usize,
    pub d_y: usize,
    pub s: f64,
    pub r: f64,
    pub sigma: f64,
    pub xi_law: XiLaw,
    pub u1: f64,
    pub kappa_sq: f64,
    pub noise: NoiseKind,
    pub noise_clip: f64,

    pub target: Target,
    pub setting: SettingKind,
    pub schedule: ScheduleSource,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub eta_bar: Option<f64>,
    pub lambda_bar: Option<f64>,
    pub t0: Option<f64>,
    pub theta3: Option<f64>,
    pub theta4: Option<f64>,
    pub eta1: Option<f64>,
    pub lambda1: Option<f64>,
    pub allow_invalid_schedule: bool,

    pub horizons: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub seed: u64,
    pub output: PathBuf,
    pub tolerance: Option<f64>,
    pub quantile: f64,
    pub r_sweep: Vec<f64>,
    pub saturation_tolerance: f64,
    pub trials: Option<usize>,

    pub label_task: LabelTask,
    pub label_kernel: LabelKernel,
    pub labels: Vec<Vec<i64>>,
    pub toy_inputs: usize,
    pub eval_draws: usize,
    pub fisher_draws: usize,
    pub monotone_horizons: Vec<usize>,
    pub monotone_slack: f64,

    pub grid: usize,
    pub rank_x: usize,
    pub rank_y: usize,
    pub n_test: usize,
    pub pca_noise: f64,
    pub kernel: RadialKernel,
    pub kernel_alpha: f64,
    pub imq_c: f64,
    pub imq_beta: f64,

    pub max_length: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::RateExpectation,
            d: 200,
            d_y: 4,
            s: 1.0,
            r: 0.5,
            sigma: 1.0,
            xi_law: XiLaw::Rademacher,
            u1: 0.5,
            kappa_sq: 1.0,
            noise: NoiseKind::Gaussian,
            noise_clip: 3.0,
            target: Target::Prediction,
            setting: SettingKind::Online,
            schedule: ScheduleSource::Preset,
            theta1: None,
            theta2: None,
            eta_bar: None,
            lambda_bar: None,
            t0: None,
            theta3: None,
            theta4: None,
            eta1: None,
            lambda1: None,
            allow_invalid_schedule: false,
            horizons: None,
            replicates: None,
            seed: 0,
            output: PathBuf::from("out"),
            tolerance: None,
            quantile: 0.95,
            r_sweep: Vec::new(),
            saturation_tolerance: 0.08,
            trials: None,
            label_task: LabelTask::Ranking,
            label_kernel: LabelKernel::Kendall,
            labels: Vec::new(),
            toy_inputs: 3,
            eval_draws: 2000,
            fisher_draws: 10_000,
            monotone_horizons: vec![64, 256, 1024],
            monotone_slack: 0.1,
            grid: 16,
            rank_x: 4,
            rank_y: 4,
            n_test: 500,
            pca_noise: 0.05,
            kernel: RadialKernel::Gaussian,
            kernel_alpha: 0.5,
            imq_c: 1.0,
            imq_beta: 0.5,
            max_length: 100,
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            ..Default::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn horizons(&self) -> Vec<usize> {
        if let Some(h) = &self.horizons {
            return h.clone();
        }
        match self.experiment {
            ExperimentKind::StructuredDemo => (1..=10).map(|k| 1 << k).collect(),
            ExperimentKind::PcaDemo => vec![2048],
            _ => (8..=13).map(|k| 1 << k).collect(),
        }
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(match self.experiment {
            ExperimentKind::RateExpectation => 50,
            ExperimentKind::RateHighprob => 100,
            ExperimentKind::Decomposition => 200,
            ExperimentKind::StructuredDemo => 20,
            _ => 1,
        })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
            .unwrap_or(if self.experiment == ExperimentKind::RateHighprob {
                0.15
            } else {
                0.1
            })
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.experiment {
            ExperimentKind::Decomposition => 30,
            ExperimentKind::LemmaAudit => 100,
            ExperimentKind::DualVsSpectral => 200,
            _ => 1,
        })
    }

    /// Source exponents to run: `r_sweep`, or just `r`.
    pub fn r_values(&self) -> Vec<f64> {
        if self.r_sweep.is_empty() {
            vec![self.r]
        } else {
            self.r_sweep.clone()
        }
    }

    pub fn noise_mode(&self) -> NoiseMode {
        match self.noise {
            NoiseKind::Gaussian => NoiseMode::Gaussian,
            NoiseKind::Bounded => NoiseMode::Bounded {
                clip: self.noise_clip,
            },
        }
    }

    pub fn world_config(&self, r: f64) -> WorldConfig {
        WorldConfig {
            d: self.d,
            d_y: self.d_y,
            s: self.s,
            r,
            sigma: self.sigma,
            xi_law: self.xi_law,
            noise: self.noise_mode(),
            kappa_sq: self.kappa_sq,
            u1: self.u1,
            seed: self.seed,
        }
    }

    pub fn world(&self, r: f64) -> Result<SpectralWorld> {
        SpectralWorld::new(&self.world_config(r))
    }

    /// Schedule for source exponent `r`; `horizon` is required for finite settings.
    pub fn schedule_for(&self, r: f64, horizon: usize) -> Result<Schedule> {
        let setting = match self.setting {
            SettingKind::Online => Setting::Online,
            SettingKind::Finite => Setting::Finite { horizon },
        };
        match self.schedule {
            ScheduleSource::Preset => theorem_preset_with(
                r,
                self.s,
                self.target,
                setting,
                self.experiment.regime(),
                self.kappa_sq,
            ),
            ScheduleSource::Manual => match self.setting {
                SettingKind::Online => {
                    let get = |v: Option<f64>, name: &str| {
                        v.ok_or_else(|| {
                            Error::Config(vec![format!("manual online schedule needs `{name}`")])
                        })
                    };
                    Ok(Schedule::Online(OnlineSchedule::new(
                        get(self.theta1, "theta1")?,
                        get(self.theta2, "theta2")?,
                        get(self.eta_bar, "eta_bar")?,
                        get(self.lambda_bar, "lambda_bar")?,
                        get(self.t0, "t0")?,
                    )?))
                }
                SettingKind::Finite => {
                    let get = |v: Option<f64>, name: &str| {
                        v.ok_or_else(|| {
                            Error::Config(vec![format!("manual finite schedule needs `{name}`")])
                        })
                    };
                    Ok(Schedule::Finite(FiniteHorizonSchedule::new(
                        get(self.theta3, "theta3")?,
                        get(self.theta4, "theta4")?,
                        get(self.eta1, "eta1")?,
                        get(self.lambda1, "lambda1")?,
                        horizon,
                    )?))
                }
            },
        }
    }

    pub fn structured_task(&self) -> Result<StructuredTask> {
        match self.label_task {
            LabelTask::Ranking => StructuredTask::label_ranking(3),
            LabelTask::Tagging => StructuredTask::tagging(3, 2),
            LabelTask::Custom => StructuredTask::new(self.labels.clone(), self.label_kernel),
        }
    }

    pub fn radial_kernel(&self) -> Result<ScalarKernel> {
        match self.kernel {
            RadialKernel::Gaussian => ScalarKernel::gaussian(self.kernel_alpha),
            RadialKernel::InverseMultiquadric => {
                ScalarKernel::inverse_multiquadric(self.imq_c, self.imq_beta)
            }
        }
    }

    /// Every violated invariant, as one `Config` error.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let kind = self.experiment;
        let horizons = self.horizons();
        let rate_kind = matches!(
            kind,
            ExperimentKind::RateExpectation | ExperimentKind::RateHighprob
        );
        let uses_horizons = rate_kind
            || matches!(
                kind,
                ExperimentKind::StructuredDemo | ExperimentKind::PcaDemo
            );

        if uses_horizons {
            if horizons.is_empty() {
                errs.push("horizons must be non-empty".to_string());
            }
            if horizons.windows(2).any(|w| w[1] <= w[0]) {
                errs.push(format!(
                    "horizons must be strictly increasing, got {horizons:?}"
                ));
            }
            if horizons.first() == Some(&0) {
                errs.push("horizons must be positive".to_string());
            }
            if rate_kind && horizons.len() < 3 {
                errs.push(format!(
                    "slope fitting needs at least 3 horizons, got {}",
                    horizons.len()
                ));
            }
            if self.setting == SettingKind::Finite && horizons.first().is_some_and(|h| *h < 2) {
                errs.push("finite-horizon runs need T >= 2".to_string());
            }
        }
        if self.replicates() < 1 {
            errs.push("replicates must be at least 1".to_string());
        }
        if kind == ExperimentKind::RateHighprob && self.replicates() < 20 {
            errs.push(format!(
                "quantile estimates need at least 20 replicates, got {}",
                self.replicates()
            ));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            errs.push(format!("quantile must be in (0, 1), got {}", self.quantile));
        }
        if self.trials() < 1 {
            errs.push("trials must be at least 1".to_string());
        }
        if !(self.tolerance() > 0.0) || !(self.saturation_tolerance > 0.0) {
            errs.push("tolerances must be positive".to_string());
        }
        if self.output.as_os_str().is_empty() {
            errs.push("output path is empty".to_string());
        }
        if self.r_sweep.iter().any(|r| !(*r > 0.0)) {
            errs.push("r_sweep values must be positive".to_string());
        }
        if self.noise == NoiseKind::Bounded && !(self.noise_clip > 0.0) {
            errs.push(format!(
                "noise_clip must be positive, got {}",
                self.noise_clip
            ));
        }

        if rate_kind {
            for r in self.r_values() {
                if let Err(e) = self.world(r) {
                    errs.push(format!("world (r={r}): {e}"));
                    continue;
                }
                match self.schedule_for(r, horizons.first().copied().unwrap_or(2).max(2)) {
                    Err(Error::Config(m)) => errs.extend(m),
                    Err(e) => errs.push(format!("schedule (r={r}): {e}")),
                    Ok(s) if !self.allow_invalid_schedule => {
                        for v in s.validate(self.kappa_sq, r) {
                            errs.push(format!(
                                "schedule (r={r}) violates {} (margin {:e})",
                                v.constraint, v.margin
                            ));
                        }
                    }
                    Ok(_) => {}
                }
            }
        }
        match kind {
            ExperimentKind::StructuredDemo => {
                if let Err(e) = self.structured_task() {
                    errs.push(format!("label task: {e}"));
                }
                if self.toy_inputs == 0 {
                    errs.push("toy_inputs must be positive".to_string());
                }
                if self.eval_draws < 100 {
                    errs.push(format!(
                        "eval_draws must be at least 100, got {}",
                        self.eval_draws
                    ));
                }
                if let Some(h) = self
                    .monotone_horizons
                    .iter()
                    .find(|h| !horizons.contains(h))
                {
                    errs.push(format!("monotone horizon {h} is not in horizons"));
                }
                if self.monotone_horizons.windows(2).any(|w| w[1] <= w[0]) {
                    errs.push("monotone_horizons must be strictly increasing".to_string());
                }
                if !(self.monotone_slack >= 0.0) {
                    errs.push("monotone_slack must be non-negative".to_string());
                }
                if let Err(e) =
                    self.schedule_for(self.r, horizons.last().copied().unwrap_or(2).max(2))
                {
                    errs.push(format!("schedule: {e}"));
                }
            }
            ExperimentKind::PcaDemo => {
                if self.grid < 2 {
                    errs.push("grid must be at least 2".to_string());
                }
                if self.rank_x == 0
                    || self.rank_x > self.grid
                    || self.rank_y == 0
                    || self.rank_y > self.grid
                {
                    errs.push(format!(
                        "ranks must be in 1..={}, got {} and {}",
                        self.grid, self.rank_x, self.rank_y
                    ));
                }
                if self.n_test < 2 {
                    errs.push("n_test must be at least 2".to_string());
                }
                if horizons.len() != 1 || horizons[0] < self.grid {
                    errs.push(format!(
                        "pca-demo needs a single training size >= grid, got {horizons:?}"
                    ));
                }
                if !(self.pca_noise >= 0.0) {
                    errs.push("pca_noise must be non-negative".to_string());
                }
                if let Err(e) = self.radial_kernel() {
                    errs.push(format!("kernel: {e}"));
                }
                if let Err(e) =
                    self.schedule_for(self.r, horizons.last().copied().unwrap_or(2).max(2))
                {
                    errs.push(format!("schedule: {e}"));
                }
            }
            ExperimentKind::DualVsSpectral if self.max_length == 0 => {
                errs.push("max_length must be positive".to_string());
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_rejected() {
        let err = ExperimentConfig::from_toml_str("experiment = \"lemma-audit\"\nbogus = 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err:?}");
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig {
            r_sweep: vec![0.5, 1.0],
            horizons: Some(vec![8, 16, 32]),
            ..Default::default()
        };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn defaults_validate_for_every_kind() {
        for kind in [
            ExperimentKind::RateExpectation,
            ExperimentKind::RateHighprob,
            ExperimentKind::Decomposition,
            ExperimentKind::LemmaAudit,
            ExperimentKind::StructuredDemo,
            ExperimentKind::PcaDemo,
            ExperimentKind::DualVsSpectral,
        ] {
            ExperimentConfig::for_kind(kind)
                .validate()
                .unwrap_or_else(|e| panic!("{kind:?}: {e}"));
        }
    }

    #[test]
    fn violations_are_all_listed() {
        let cfg = ExperimentConfig {
            horizons: Some(vec![16, 8]),
            quantile: 2.0,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Config(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manual_schedule_missing_field() {
        let cfg = ExperimentConfig {
            schedule: ScheduleSource::Manual,
            theta1: Some(0.5),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
