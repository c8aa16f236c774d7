//! The JSON run configuration shared by every subcommand. Unknown fields
//! are rejected so typos surface as config errors instead of silently
//! falling back to defaults.

use std::path::{Path, PathBuf};

use relevance_lens::augment::AugmentSpec;
use serde::{Deserialize, Serialize};

use crate::errors::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Waveform,
    Logmel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    Epsilon,
    Zplus,
    EpsilonPlus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub audio_dir: PathBuf,
    pub metadata_csv: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StdftParams {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StdftParams {
    fn default() -> Self {
        Self { window_len: 800, hop: 800 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelParams {
    pub filters: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        Self { filters: 64, f_min_hz: 0.0, f_max_hz: 8000.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessParams {
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
    pub pitch_semitones: f64,
    /// Class whose clips get pitch-shifted (the others are left alone).
    pub pitch_class: String,
    /// Re-normalize RMS after augmenting, before the forward pass.
    pub renormalize_after_augment: bool,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        Self {
            highpass_hz: 3000.0,
            lowpass_hz: 3000.0,
            pitch_semitones: 7.0,
            pitch_class: "Siren".into(),
            renormalize_after_augment: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: Option<DatasetPaths>,
    /// Clip cache path; defaults to `<out_dir>/cache.rlns`.
    pub cache: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Must match the model's input kind when both are given.
    pub representation: Option<Representation>,
    pub rule: RuleName,
    pub epsilon: f64,
    pub delta: f64,
    pub stdft: StdftParams,
    pub mel: MelParams,
    pub augmentations: Vec<AugmentSpec>,
    pub robustness: RobustnessParams,
    /// Relevance-map file; defaults to `<out_dir>/maps.rlnr`.
    pub maps: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub folds: Option<Vec<u16>>,
    pub between_pair_cap: usize,
    pub render_scale: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            cache: None,
            model: None,
            representation: None,
            rule: RuleName::EpsilonPlus,
            epsilon: 1e-6,
            delta: 1e-9,
            stdft: StdftParams::default(),
            mel: MelParams::default(),
            augmentations: Vec::new(),
            robustness: RobustnessParams::default(),
            maps: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            folds: None,
            between_pair_cap: relevance_lens::analysis::DEFAULT_BETWEEN_PAIR_CAP,
            render_scale: 8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::config(msg));
        if self.epsilon <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.delta <= 0.0 {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.stdft.window_len == 0 || self.stdft.window_len % 2 != 0 {
            return bad(format!(
                "stdft.window_len must be even and positive, got {}",
                self.stdft.window_len
            ));
        }
        if self.stdft.hop != self.stdft.window_len {
            return bad(format!(
                "stdft.hop must equal stdft.window_len (non-overlapping frames), got hop {} for window {}",
                self.stdft.hop, self.stdft.window_len
            ));
        }
        if self.mel.filters == 0 {
            return bad("mel.filters must be at least 1".into());
        }
        if !(self.mel.f_min_hz >= 0.0 && self.mel.f_min_hz < self.mel.f_max_hz) {
            return bad(format!(
                "mel range [{}, {}] is not ordered",
                self.mel.f_min_hz, self.mel.f_max_hz
            ));
        }
        if self.between_pair_cap == 0 {
            return bad("between_pair_cap must be at least 1".into());
        }
        if self.render_scale == 0 {
            return bad("render_scale must be at least 1".into());
        }
        if relevance_lens::signal::labels::class_id(&self.robustness.pitch_class).is_none() {
            return bad(format!(
                "robustness.pitch_class {:?} is not an UrbanSound8K class",
                self.robustness.pitch_class
            ));
        }
        if self.robustness.highpass_hz <= 0.0 || self.robustness.lowpass_hz <= 0.0 {
            return bad("robustness cutoffs must be positive".into());
        }
        if self.robustness.pitch_semitones.abs() > 12.0 {
            return bad(format!(
                "robustness.pitch_semitones {} outside [-12, 12]",
                self.robustness.pitch_semitones
            ));
        }
        Ok(())
    }

    pub fn cache_path(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.out_dir.join("cache.rlns"))
    }

    pub fn maps_path(&self) -> PathBuf {
        self.maps.clone().unwrap_or_else(|| self.out_dir.join("maps.rlnr"))
    }
}
