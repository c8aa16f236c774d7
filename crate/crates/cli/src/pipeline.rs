//! Plumbing shared by the subcommands: cache/model loading with filter
//! and consistency checks, and the per-clip explanation pipeline.

use relevance_lens::dftlrp::{dft_lrp, relevance_to_mel, VirtualInspectionConfig};
use relevance_lens::lrp::{explanation_to_map, lrp_backward, LrpRule, RelevanceMap};
use relevance_lens::model::{load_model, InputKind, ModelGraph, Tensor};
use relevance_lens::signal::{
    labels, logmel, mel_spectrogram, read_clip_cache, stdft, CachedClip, MelFilterbank,
    StdftConfig,
};

use crate::config::{Representation, RunConfig};
use crate::errors::{CliError, CliResult};

pub const LOGMEL_FLOOR: f64 = 1e-10;
pub const TARGET_RATE_HZ: u32 = 16000;

/// Loads the clip cache and applies the fold / class filters.
pub fn load_cache(cfg: &RunConfig, class: Option<&str>) -> CliResult<Vec<CachedClip<f64>>> {
    let path = cfg.cache_path();
    let mut clips = read_clip_cache::<f64>(&path)
        .map_err(|e| CliError::data(format!("cannot read cache {}: {e}", path.display())))?;
    if let Some(folds) = &cfg.folds {
        clips.retain(|c| folds.contains(&c.fold));
    }
    if let Some(name) = class {
        let id = labels::class_id(name)
            .ok_or_else(|| CliError::config(format!("unknown class {name:?}")))?;
        clips.retain(|c| c.class_id == id);
    }
    if clips.is_empty() {
        return Err(CliError::data(format!(
            "no clips remain in {} after fold/class filtering",
            path.display()
        )));
    }
    Ok(clips)
}

fn representation_of(model: &ModelGraph<f64>) -> Representation {
    match model.input {
        InputKind::Waveform { .. } => Representation::Waveform,
        InputKind::Logmel { .. } => Representation::Logmel,
    }
}

/// Loads the model and checks it against the declared representation.
pub fn load_model_checked(cfg: &RunConfig) -> CliResult<ModelGraph<f64>> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs a model path in the config"))?;
    let model = load_model::<f64>(path)
        .map_err(|e| CliError::data(format!("cannot load model {}: {e}", path.display())))?;
    if let Some(declared) = cfg.representation {
        let actual = representation_of(&model);
        if declared != actual {
            return Err(CliError::config(format!(
                "config declares representation {declared:?} but model {:?} takes {actual:?} input",
                model.name
            )));
        }
    }
    Ok(model)
}

pub fn virtual_config(cfg: &RunConfig) -> CliResult<VirtualInspectionConfig<f64>> {
    let stdft_cfg = StdftConfig::rectangular(cfg.stdft.window_len, cfg.stdft.hop)
        .map_err(|e| CliError::config(e.to_string()))?;
    VirtualInspectionConfig::new(stdft_cfg, cfg.delta).map_err(|e| CliError::config(e.to_string()))
}

pub fn filterbank(cfg: &RunConfig) -> CliResult<MelFilterbank<f64>> {
    let bins = cfg.stdft.window_len / 2 + 1;
    MelFilterbank::new(bins, cfg.mel.filters, TARGET_RATE_HZ, cfg.mel.f_min_hz, cfg.mel.f_max_hz)
        .map_err(|e| CliError::config(e.to_string()))
}

pub fn lrp_rule(cfg: &RunConfig, model: &ModelGraph<f64>) -> CliResult<LrpRule<f64>> {
    Ok(match cfg.rule {
        crate::config::RuleName::Epsilon => {
            LrpRule::epsilon(cfg.epsilon).map_err(|e| CliError::config(e.to_string()))?
        }
        crate::config::RuleName::Zplus => LrpRule::zplus(),
        crate::config::RuleName::EpsilonPlus => LrpRule::composite_epsilon_plus(model),
    })
}

/// Builds the model input tensor for a waveform: the raw samples for
/// waveform models, the logmel image for logmel models.
pub fn waveform_input(
    model: &ModelGraph<f64>,
    vic: &VirtualInspectionConfig<f64>,
    fb: &MelFilterbank<f64>,
    waveform: &relevance_lens::signal::Waveform<f64>,
) -> CliResult<Tensor<f64>> {
    match model.input {
        InputKind::Waveform { len } => {
            if waveform.len() != len {
                return Err(CliError::data(format!(
                    "clip has {} samples but model {:?} expects {len}",
                    waveform.len(),
                    model.name
                )));
            }
            Ok(Tensor::new(vec![1, len], waveform.samples().to_vec())?)
        }
        InputKind::Logmel { filters, frames } => {
            let spec = stdft(waveform, vic.stdft())?;
            let mel = mel_spectrogram(&spec, fb)?;
            let lm = logmel(&mel, LOGMEL_FLOOR)?;
            if lm.values().rows() != frames || lm.values().cols() != filters {
                return Err(CliError::data(format!(
                    "clip produces a {}x{} logmel but model {:?} expects {filters}x{frames}",
                    lm.values().cols(),
                    lm.values().rows(),
                    model.name
                )));
            }
            // MelSpectrogram is frames x filters; the model wants [1, filters, frames].
            let mut data = vec![0.0f64; filters * frames];
            for m in 0..frames {
                for p in 0..filters {
                    data[p * frames + m] = lm.values()[(m, p)];
                }
            }
            Ok(Tensor::new(vec![1, filters, frames], data)?)
        }
    }
}

pub fn clip_input(
    model: &ModelGraph<f64>,
    vic: &VirtualInspectionConfig<f64>,
    fb: &MelFilterbank<f64>,
    clip: &CachedClip<f64>,
) -> CliResult<Tensor<f64>> {
    waveform_input(model, vic, fb, &clip.waveform)
}

/// Argmax class for one waveform.
pub fn predict_waveform(
    model: &ModelGraph<f64>,
    vic: &VirtualInspectionConfig<f64>,
    fb: &MelFilterbank<f64>,
    waveform: &relevance_lens::signal::Waveform<f64>,
) -> CliResult<usize> {
    let input = waveform_input(model, vic, fb, waveform)?;
    Ok(model.forward(&input)?.predicted_class())
}

pub struct ClipExplanation {
    /// Always in the mel time-frequency domain, P x M.
    pub map: RelevanceMap<f64>,
    pub predicted: usize,
    pub logits: Vec<f64>,
}

/// Explains one cached clip for its true class. Waveform models go
/// through the virtual inspection layer and mel rebinning; logmel models
/// stop at their input, which is already on the mel grid.
pub fn explain_clip(
    model: &ModelGraph<f64>,
    rule: &LrpRule<f64>,
    vic: &VirtualInspectionConfig<f64>,
    fb: &MelFilterbank<f64>,
    clip: &CachedClip<f64>,
) -> CliResult<ClipExplanation> {
    if clip.class_id as usize >= model.class_count {
        return Err(CliError::data(format!(
            "clip class {} out of range for model with {} classes",
            clip.class_id, model.class_count
        )));
    }
    let input = clip_input(model, vic, fb, clip)?;
    let trace = model.forward(&input)?;
    let expl = lrp_backward(model, &trace, clip.class_id as usize, rule)?;
    let input_map = explanation_to_map(model, &expl)?;
    let map = match model.input {
        InputKind::Waveform { .. } => {
            let tf = dft_lrp(&clip.waveform, &input_map, vic)?;
            relevance_to_mel(&tf, fb)?
        }
        InputKind::Logmel { .. } => input_map,
    };
    Ok(ClipExplanation { map, predicted: trace.predicted_class(), logits: trace.logits().data().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::fixture;
    use relevance_lens::lrp::Domain;
    use relevance_lens::signal::{preprocess_dataset, read_metadata, write_clip_cache};
    use tempfile::tempdir;

    fn fixture_cache(dir: &std::path::Path) -> std::path::PathBuf {
        let paths = fixture::write_fixture_dataset(dir, &fixture::FixtureSpec::default()).unwrap();
        let rows = read_metadata(&paths.metadata_csv).unwrap();
        let report = preprocess_dataset::<f64>(&paths.audio_dir, &rows);
        let cache = dir.join("cache.rlns");
        write_clip_cache(&cache, &report.clips).unwrap();
        cache
    }

    #[test]
    fn cache_filters_apply_and_empty_result_is_a_data_error() {
        let dir = tempdir().unwrap();
        let cache = fixture_cache(dir.path());
        let mut cfg = RunConfig::default();
        cfg.cache = Some(cache);

        let all = load_cache(&cfg, None).unwrap();
        assert_eq!(all.len(), 24);

        let sirens = load_cache(&cfg, Some("Siren")).unwrap();
        assert!(sirens.iter().all(|c| c.class_id == fixture::TONE_CLASS));
        assert_eq!(sirens.len(), 12);

        let err = load_cache(&cfg, Some("Gun Shot")).unwrap_err();
        assert_eq!(err.exit_code(), 3);

        cfg.folds = Some(vec![9]);
        let err = load_cache(&cfg, None).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn unknown_class_name_is_a_config_error() {
        let dir = tempdir().unwrap();
        let cache = fixture_cache(dir.path());
        let mut cfg = RunConfig::default();
        cfg.cache = Some(cache);
        let err = load_cache(&cfg, Some("Theremin")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn representation_mismatch_is_a_config_error() {
        let dir = tempdir().unwrap();
        let manifest = fixture::write_fixture_model(dir.path()).unwrap();
        let mut cfg = RunConfig::default();
        cfg.model = Some(manifest);
        cfg.representation = Some(Representation::Logmel);
        let err = load_model_checked(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        cfg.representation = Some(Representation::Waveform);
        load_model_checked(&cfg).unwrap();
    }

    #[test]
    fn explain_clip_lands_on_the_mel_grid_and_conserves() {
        let dir = tempdir().unwrap();
        let cache = fixture_cache(dir.path());
        let manifest = fixture::write_fixture_model(dir.path()).unwrap();
        let mut cfg = RunConfig::default();
        cfg.cache = Some(cache);
        cfg.model = Some(manifest);

        let model = load_model_checked(&cfg).unwrap();
        let rule = lrp_rule(&cfg, &model).unwrap();
        let vic = virtual_config(&cfg).unwrap();
        let fb = filterbank(&cfg).unwrap();
        let clips = load_cache(&cfg, None).unwrap();

        let clip = &clips[0];
        let out = explain_clip(&model, &rule, &vic, &fb, clip).unwrap();
        assert_eq!(out.map.domain, Domain::MelTimeFrequency);
        assert_eq!(out.map.values.rows(), 64);
        assert_eq!(out.map.values.cols(), 20);
        assert_eq!(out.logits.len(), 10);
        assert_eq!(out.predicted as u16, clip.class_id);

        // Relocation preserves whatever relevance reached the waveform.
        let input = clip_input(&model, &vic, &fb, clip).unwrap();
        let trace = model.forward(&input).unwrap();
        let expl = lrp_backward(&model, &trace, clip.class_id as usize, &rule).unwrap();
        let time_total: f64 = expl.relevance.data().iter().sum();
        let mel_total: f64 = out.map.values.data().iter().sum();
        assert!(
            (time_total - mel_total).abs() <= 1e-6 * time_total.abs().max(1.0),
            "time {time_total} vs mel {mel_total}"
        );
    }
}
