//! Experiment configuration (TOML). Every section rejects unknown keys.

use std::path::{Path, PathBuf};

use oamlink::measurement::{NoiseModel, DEFAULT_ETA_SUPER};
use oamlink::modes::DEFAULT_TRUNCATION;
use oamlink::source::DEFAULT_SIGMA;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Werner fraction used when none is configured.
pub const DEFAULT_WERNER_P: f64 = 0.1923;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub hologram: HologramConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: default_output_dir(),
            source: SourceConfig::default(),
            noise: NoiseConfig::default(),
            experiment: ExperimentSection::default(),
            analysis: AnalysisConfig::default(),
            hologram: HologramConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Charge carried by the classical 1550 nm input.
    pub classical_oam_1550: i32,
    /// Charge of the 795 nm beam it is summed with.
    pub pump_oam_795: i32,
    pub sigma: f64,
    pub truncation: u32,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            classical_oam_1550: 0,
            pump_oam_795: 0,
            sigma: DEFAULT_SIGMA,
            truncation: DEFAULT_TRUNCATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub crosstalk_eps: f64,
    pub accidental_rate: f64,
    pub eta_eigen: f64,
    pub eta_super: f64,
    /// Pair rate scale in counts/s. When absent it is chosen so the `(0, 0)`
    /// entry of the `l_p = 0` correlation matrix reaches 31475 counts per 10 s.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// White-noise fraction mixed into the post-selected two-qubit state.
    pub werner_p: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let n = NoiseModel::default();
        NoiseConfig {
            crosstalk_eps: n.crosstalk_eps,
            accidental_rate: n.accidental_rate,
            eta_eigen: n.eta_eigen,
            eta_super: DEFAULT_ETA_SUPER,
            r0: None,
            werner_p: DEFAULT_WERNER_P,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Qubit subspace `{|l>, |-l>}` used by fringes, CHSH and tomography.
    pub subspace_l: u32,
    /// Seconds per setting.
    pub integration_time: f64,
    /// Correlation matrix covers charges `-m_range..=m_range`.
    pub m_range: u32,
    /// Signal hologram angles per fringe, spread over one period.
    pub fringe_points: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            subspace_l: 1,
            integration_time: 10.0,
            m_range: 5,
            fringe_points: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub bootstrap_resamples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bootstrap_resamples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HologramKind {
    Sector,
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HologramConfig {
    pub kind: HologramKind,
    pub l: i32,
    /// Sector rotation angle (ignored for eigenmodes).
    pub theta: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for HologramConfig {
    fn default() -> Self {
        HologramConfig {
            kind: HologramKind::Sector,
            l: 1,
            theta: 0.0,
            width: 512,
            height: 512,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn pump_oam(&self) -> i32 {
        self.source.classical_oam_1550 + self.source.pump_oam_795
    }

    /// Detector model with the given rate scale.
    pub fn noise_model(&self, r0: f64) -> NoiseModel {
        NoiseModel {
            crosstalk_eps: self.noise.crosstalk_eps,
            accidental_rate: self.noise.accidental_rate,
            eta_eigen: self.noise.eta_eigen,
            eta_super: self.noise.eta_super,
            r0,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.source;
        let m = s.truncation;
        check(m >= 1, || "source.truncation must be at least 1".into())?;
        check(s.sigma > 0.0 && s.sigma.is_finite(), || {
            format!("source.sigma must be positive, got {}", s.sigma)
        })?;
        check(self.pump_oam().unsigned_abs() <= m, || {
            format!("pump charge {} exceeds truncation {m}", self.pump_oam())
        })?;

        let n = &self.noise;
        if let Some(r0) = n.r0 {
            check(r0 > 0.0 && r0.is_finite(), || {
                format!("noise.r0 must be positive, got {r0}")
            })?;
        }
        check((0.0..=1.0).contains(&n.werner_p), || {
            format!("noise.werner_p must lie in [0, 1], got {}", n.werner_p)
        })?;
        self.noise_model(n.r0.unwrap_or(1.0))
            .validate()
            .map_err(|e| CliError::Config(format!("noise: {e}")))?;

        let e = &self.experiment;
        check(e.subspace_l >= 1 && e.subspace_l <= m, || {
            format!(
                "experiment.subspace_l must lie in [1, {m}], got {}",
                e.subspace_l
            )
        })?;
        check(
            e.integration_time > 0.0 && e.integration_time.is_finite(),
            || {
                format!(
                    "experiment.integration_time must be positive, got {}",
                    e.integration_time
                )
            },
        )?;
        check(e.m_range <= m, || {
            format!("experiment.m_range {} exceeds truncation {m}", e.m_range)
        })?;
        check(e.fringe_points >= 6, || {
            format!(
                "experiment.fringe_points must be at least 6, got {}",
                e.fringe_points
            )
        })?;

        check(self.analysis.bootstrap_resamples >= 2, || {
            "analysis.bootstrap_resamples must be at least 2".into()
        })?;

        let h = &self.hologram;
        check(h.width >= 16 && h.height >= 16, || {
            format!(
                "hologram must be at least 16x16, got {}x{}",
                h.width, h.height
            )
        })?;
        check(h.theta.is_finite(), || {
            "hologram.theta must be finite".into()
        })?;
        check(h.kind == HologramKind::Eigen || h.l != 0, || {
            "sector holograms need hologram.l != 0".into()
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.noise.werner_p, DEFAULT_WERNER_P);
        assert_eq!(cfg.source.sigma, 2.12);
    }

    #[test]
    fn roundtrip_is_identity() {
        let text = r#"
            seed = 99
            output_dir = "results/run1"
            [source]
            classical_oam_1550 = -1
            sigma = 1.7320508075688772
            [noise]
            r0 = 12345.678901234567
            werner_p = 0.1
            [experiment]
            subspace_l = 2
            [hologram]
            kind = "eigen"
            l = -3
        "#;
        let a = ExperimentConfig::from_toml(text).unwrap();
        let b = ExperimentConfig::from_toml(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b);
        let d = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::from_toml(&d.to_toml().unwrap()).unwrap(),
            d
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "sead = 1",
            "[source]\nsigmaa = 2.0",
            "[noise]\nwerner = 0.1",
            "[plots]\nx = 1",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn ranges_are_checked() {
        for text in [
            "[source]\nsigma = -1.0",
            "[source]\nclassical_oam_1550 = 11",
            "[noise]\ncrosstalk_eps = 0.7",
            "[noise]\nwerner_p = 1.5",
            "[noise]\nr0 = 0.0",
            "[experiment]\nsubspace_l = 0",
            "[experiment]\nfringe_points = 4",
            "[hologram]\nwidth = 8",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }
}
