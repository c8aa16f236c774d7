//! `robustness`: Table-3-protocol accuracy deltas. Clean accuracy first,
//! then high-pass and low-pass over every class and a pitch shift in both
//! directions restricted to one named class.

use std::collections::BTreeMap;
use std::fs;

use rayon::prelude::*;
use relevance_lens::augment::{apply_pipeline, AugmentSpec};
use relevance_lens::signal::{labels, CachedClip};
use serde::Serialize;

use crate::config::RunConfig;
use crate::errors::{CliError, CliResult};
use crate::pipeline::{filterbank, load_cache, load_model_checked, predict_waveform, virtual_config};

#[derive(Serialize)]
struct ClassAccuracy {
    class_id: u16,
    class: &'static str,
    count: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct ClassDelta {
    class_id: u16,
    class: &'static str,
    count: usize,
    acc_before: f64,
    acc_after: f64,
    delta: f64,
}

#[derive(Serialize)]
struct Overall {
    count: usize,
    acc_before: f64,
    acc_after: f64,
    delta: f64,
}

#[derive(Serialize)]
struct AugmentationOutcome {
    name: String,
    specs: Vec<AugmentSpec>,
    scope_class: Option<&'static str>,
    overall: Overall,
    per_class: Vec<ClassDelta>,
}

#[derive(Serialize)]
struct RobustnessReport {
    total_clips: usize,
    renormalize_after_augment: bool,
    clean_overall_accuracy: f64,
    clean_per_class: Vec<ClassAccuracy>,
    augmentations: Vec<AugmentationOutcome>,
}

fn accuracy(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

/// (count, hits) per class over the given clip subset.
fn tally(clips: &[&CachedClip<f64>], predictions: &[usize]) -> BTreeMap<u16, (usize, usize)> {
    let mut by_class: BTreeMap<u16, (usize, usize)> = BTreeMap::new();
    for (clip, &pred) in clips.iter().zip(predictions) {
        let entry = by_class.entry(clip.class_id).or_default();
        entry.0 += 1;
        entry.1 += (pred as u16 == clip.class_id) as usize;
    }
    by_class
}

pub fn run(cfg: &RunConfig, class_override: Option<&str>) -> CliResult<()> {
    let model = load_model_checked(cfg)?;
    let vic = virtual_config(cfg)?;
    let fb = filterbank(cfg)?;
    let clips = load_cache(cfg, None)?;

    let pitch_name = class_override.unwrap_or(&cfg.robustness.pitch_class);
    let pitch_id = labels::class_id(pitch_name)
        .ok_or_else(|| CliError::config(format!("unknown class {pitch_name:?}")))?;

    let clean: Vec<usize> = clips
        .par_iter()
        .map(|c| predict_waveform(&model, &vic, &fb, &c.waveform))
        .collect::<CliResult<_>>()?;

    let all_refs: Vec<&CachedClip<f64>> = clips.iter().collect();
    let clean_tally = tally(&all_refs, &clean);
    let clean_hits: usize = clean_tally.values().map(|&(_, h)| h).sum();
    let clean_per_class: Vec<ClassAccuracy> = clean_tally
        .iter()
        .map(|(&id, &(count, hits))| {
            Ok(ClassAccuracy {
                class_id: id,
                class: labels::class_name(id)?,
                count,
                accuracy: accuracy(hits, count),
            })
        })
        .collect::<CliResult<_>>()?;

    let st = cfg.robustness.pitch_semitones;
    let mut protocol: Vec<(String, Vec<AugmentSpec>, Option<u16>)> = vec![
        (
            format!("highpass_{}hz", cfg.robustness.highpass_hz),
            vec![AugmentSpec::Highpass { cutoff_hz: cfg.robustness.highpass_hz }],
            None,
        ),
        (
            format!("lowpass_{}hz", cfg.robustness.lowpass_hz),
            vec![AugmentSpec::Lowpass { cutoff_hz: cfg.robustness.lowpass_hz }],
            None,
        ),
        (
            format!("pitch_up_{st}semitones"),
            vec![AugmentSpec::PitchShift { semitones: st }],
            Some(pitch_id),
        ),
        (
            format!("pitch_down_{st}semitones"),
            vec![AugmentSpec::PitchShift { semitones: -st }],
            Some(pitch_id),
        ),
    ];
    if !cfg.augmentations.is_empty() {
        protocol.push(("config_pipeline".into(), cfg.augmentations.clone(), None));
    }

    let mut outcomes = Vec::with_capacity(protocol.len());
    for (name, specs, scope) in &protocol {
        let scoped: Vec<(usize, &CachedClip<f64>)> = clips
            .iter()
            .enumerate()
            .filter(|(_, c)| scope.map_or(true, |id| c.class_id == id))
            .collect();
        if scoped.is_empty() {
            return Err(CliError::data(format!(
                "augmentation {name} has no clips in scope (class {pitch_name:?} missing from cache)"
            )));
        }
        let augmented: Vec<usize> = scoped
            .par_iter()
            .map(|(_, clip)| {
                let mut w = apply_pipeline(specs, &clip.waveform)?;
                if cfg.robustness.renormalize_after_augment {
                    w.rms_normalize();
                }
                predict_waveform(&model, &vic, &fb, &w)
            })
            .collect::<CliResult<_>>()?;

        let scoped_refs: Vec<&CachedClip<f64>> = scoped.iter().map(|&(_, c)| c).collect();
        let after_tally = tally(&scoped_refs, &augmented);
        let before: Vec<usize> = scoped.iter().map(|&(i, _)| clean[i]).collect();
        let before_tally = tally(&scoped_refs, &before);

        let per_class: Vec<ClassDelta> = after_tally
            .iter()
            .map(|(&id, &(count, hits_after))| {
                let (_, hits_before) = before_tally[&id];
                let acc_before = accuracy(hits_before, count);
                let acc_after = accuracy(hits_after, count);
                Ok(ClassDelta {
                    class_id: id,
                    class: labels::class_name(id)?,
                    count,
                    acc_before,
                    acc_after,
                    delta: acc_after - acc_before,
                })
            })
            .collect::<CliResult<_>>()?;
        let hits_before: usize = before_tally.values().map(|&(_, h)| h).sum();
        let hits_after: usize = after_tally.values().map(|&(_, h)| h).sum();
        let acc_before = accuracy(hits_before, scoped.len());
        let acc_after = accuracy(hits_after, scoped.len());
        outcomes.push(AugmentationOutcome {
            name: name.clone(),
            specs: specs.clone(),
            scope_class: scope.map(|id| labels::class_name(id)).transpose()?,
            overall: Overall {
                count: scoped.len(),
                acc_before,
                acc_after,
                delta: acc_after - acc_before,
            },
            per_class,
        });
    }

    let report = RobustnessReport {
        total_clips: clips.len(),
        renormalize_after_augment: cfg.robustness.renormalize_after_augment,
        clean_overall_accuracy: accuracy(clean_hits, clips.len()),
        clean_per_class,
        augmentations: outcomes,
    };

    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("robustness_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;

    let mut csv = String::from(
        "augmentation,scope,class_id,class,count,acc_before,acc_after,delta\n",
    );
    for aug in &report.augmentations {
        let scope = aug.scope_class.unwrap_or("all");
        csv.push_str(&format!(
            "{},{scope},,all,{},{},{},{}\n",
            aug.name, aug.overall.count, aug.overall.acc_before, aug.overall.acc_after,
            aug.overall.delta
        ));
        for row in &aug.per_class {
            csv.push_str(&format!(
                "{},{scope},{},{},{},{},{},{}\n",
                aug.name, row.class_id, row.class, row.count, row.acc_before, row.acc_after,
                row.delta
            ));
        }
    }
    fs::write(cfg.out_dir.join("robustness.csv"), csv)?;

    println!(
        "robustness: {} clips, clean accuracy {:.4}, {} augmentation rows -> {}",
        clips.len(),
        report.clean_overall_accuracy,
        report.augmentations.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use relevance_lens::signal::{preprocess_dataset, read_metadata, write_clip_cache};
    use tempfile::tempdir;

    fn ready_config(dir: &std::path::Path) -> RunConfig {
        let paths =
            fixture::write_fixture_dataset(dir, &fixture::FixtureSpec::default()).unwrap();
        let rows = read_metadata(&paths.metadata_csv).unwrap();
        let report = preprocess_dataset::<f64>(&paths.audio_dir, &rows);
        let cache = dir.join("cache.rlns");
        write_clip_cache(&cache, &report.clips).unwrap();
        let manifest = fixture::write_fixture_model(dir).unwrap();

        let mut cfg = RunConfig::default();
        cfg.cache = Some(cache);
        cfg.model = Some(manifest);
        cfg.out_dir = dir.join("out");
        cfg
    }

    fn load_report(cfg: &RunConfig) -> serde_json::Value {
        serde_json::from_str(
            &fs::read_to_string(cfg.out_dir.join("robustness_report.json")).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn highpass_above_the_band_drives_tone_accuracy_to_chance() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        run(&cfg, None).unwrap();
        let report = load_report(&cfg);

        assert_eq!(report["clean_overall_accuracy"], 1.0);
        assert_eq!(report["total_clips"], 24);

        let augs = report["augmentations"].as_array().unwrap();
        let hp = augs.iter().find(|a| a["name"].as_str().unwrap().starts_with("highpass")).unwrap();
        // Tone clips lose their band entirely: overall accuracy falls to
        // chance because every tone clip flips while noise clips hold.
        let overall_after = hp["overall"]["acc_after"].as_f64().unwrap();
        assert!((overall_after - 0.5).abs() <= 0.1, "overall after HP = {overall_after}");
        let tone = hp["per_class"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["class_id"] == fixture::TONE_CLASS)
            .unwrap();
        assert_eq!(tone["acc_after"], 0.0);
        assert_eq!(tone["delta"], -1.0);

        // Per-class counts in all-class rows sum to the cache total.
        for aug in augs {
            if aug["scope_class"].is_null() {
                let total: u64 = aug["per_class"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|c| c["count"].as_u64().unwrap())
                    .sum();
                assert_eq!(total, 24);
            }
        }
    }

    #[test]
    fn pitch_rows_are_scoped_to_the_named_class() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        run(&cfg, None).unwrap();
        let report = load_report(&cfg);
        let augs = report["augmentations"].as_array().unwrap();
        let pitch: Vec<_> =
            augs.iter().filter(|a| a["name"].as_str().unwrap().starts_with("pitch")).collect();
        assert_eq!(pitch.len(), 2);
        for p in pitch {
            assert_eq!(p["scope_class"], "Siren");
            assert_eq!(p["overall"]["count"], 12);
            let classes = p["per_class"].as_array().unwrap();
            assert_eq!(classes.len(), 1);
            assert_eq!(classes[0]["class_id"], fixture::TONE_CLASS);
        }
    }

    #[test]
    fn identity_pipeline_reports_zero_delta() {
        let dir = tempdir().unwrap();
        let mut cfg = ready_config(dir.path());
        cfg.augmentations = vec![AugmentSpec::Gain { db: 0.0 }];
        run(&cfg, None).unwrap();
        let report = load_report(&cfg);
        let augs = report["augmentations"].as_array().unwrap();
        let identity = augs.iter().find(|a| a["name"] == "config_pipeline").unwrap();
        assert_eq!(identity["overall"]["delta"], 0.0);
        for c in identity["per_class"].as_array().unwrap() {
            assert_eq!(c["delta"], 0.0);
        }
    }

    #[test]
    fn unknown_pitch_class_is_a_config_error() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        assert_eq!(run(&cfg, Some("Theremin")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn pitch_class_absent_from_cache_is_a_data_error() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        assert_eq!(run(&cfg, Some("Gun Shot")).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn csv_mirrors_the_json_report() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        run(&cfg, None).unwrap();
        let csv = fs::read_to_string(cfg.out_dir.join("robustness.csv")).unwrap();
        let report = load_report(&cfg);
        let augs = report["augmentations"].as_array().unwrap();
        let expected_rows: usize =
            augs.iter().map(|a| 1 + a["per_class"].as_array().unwrap().len()).sum();
        assert_eq!(csv.lines().count(), 1 + expected_rows);
        assert!(csv.contains("pitch_up_7semitones,Siren,8,Siren,12,1,"));
    }
}
