//! `explain`: batch LRP over the clip cache, one mel-domain relevance map
//! per clip plus a prediction log.

use std::fs;
use std::io::{BufWriter, Write};

use rayon::prelude::*;
use relevance_lens::lrp::io::write_map_record;
use relevance_lens::signal::labels;

use crate::config::RunConfig;
use crate::errors::CliResult;
use crate::pipeline::{
    explain_clip, filterbank, load_cache, load_model_checked, lrp_rule, virtual_config,
    ClipExplanation,
};

pub fn run(cfg: &RunConfig, class: Option<&str>) -> CliResult<()> {
    let model = load_model_checked(cfg)?;
    let vic = virtual_config(cfg)?;
    let fb = filterbank(cfg)?;
    let rule = lrp_rule(cfg, &model)?;
    let clips = load_cache(cfg, class)?;

    let results: Vec<ClipExplanation> = clips
        .par_iter()
        .map(|clip| explain_clip(&model, &rule, &vic, &fb, clip))
        .collect::<CliResult<_>>()?;

    fs::create_dir_all(&cfg.out_dir)?;
    let maps_path = cfg.maps_path();
    if let Some(parent) = maps_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(&maps_path)?);
    for (clip, res) in clips.iter().zip(&results) {
        write_map_record(&mut out, &res.map, clip.class_id, res.predicted as u16)?;
    }
    out.flush()?;

    let mut log = String::from(
        "index,fold,class_id,class,predicted_id,predicted,correct,logit_true,logit_predicted\n",
    );
    let mut correct = 0usize;
    for (i, (clip, res)) in clips.iter().zip(&results).enumerate() {
        let hit = res.predicted as u16 == clip.class_id;
        correct += hit as usize;
        log.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{}\n",
            clip.fold,
            clip.class_id,
            clip.class_name,
            res.predicted,
            labels::class_name(res.predicted as u16).unwrap_or("?"),
            hit,
            res.logits[clip.class_id as usize],
            res.logits[res.predicted],
        ));
    }
    fs::write(cfg.out_dir.join("predictions.csv"), log)?;

    println!(
        "explain: {} maps -> {} (accuracy {:.4})",
        results.len(),
        maps_path.display(),
        correct as f64 / results.len() as f64
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use relevance_lens::lrp::io::read_map_file;
    use relevance_lens::lrp::Domain;
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

    #[test]
    fn emits_one_mel_map_per_clip_and_a_prediction_log() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        run(&cfg, None).unwrap();

        let stored = read_map_file::<f64>(&cfg.maps_path()).unwrap();
        assert_eq!(stored.len(), 24);
        for s in &stored {
            assert_eq!(s.map.domain, Domain::MelTimeFrequency);
            assert_eq!(s.map.values.rows(), 64);
            assert_eq!(s.map.values.cols(), 20);
            assert_eq!(s.true_class, s.predicted_class, "fixture classifies perfectly");
        }

        let log = fs::read_to_string(cfg.out_dir.join("predictions.csv")).unwrap();
        assert_eq!(log.lines().count(), 25);
        assert!(log.lines().skip(1).all(|l| l.contains(",true,")));
    }

    #[test]
    fn class_filter_narrows_the_output() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        run(&cfg, Some("Siren")).unwrap();
        let stored = read_map_file::<f64>(&cfg.maps_path()).unwrap();
        assert_eq!(stored.len(), 12);
        assert!(stored.iter().all(|s| s.true_class == fixture::TONE_CLASS));
    }

    #[test]
    fn missing_model_is_a_config_error_missing_cache_a_data_error() {
        let dir = tempdir().unwrap();
        let mut cfg = ready_config(dir.path());
        cfg.model = None;
        assert_eq!(run(&cfg, None).unwrap_err().exit_code(), 2);

        let mut cfg = ready_config(dir.path());
        cfg.cache = Some(dir.path().join("absent.rlns"));
        assert_eq!(run(&cfg, None).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn rerunning_the_same_config_is_bitwise_identical() {
        let dir = tempdir().unwrap();
        let cfg = ready_config(dir.path());
        run(&cfg, None).unwrap();
        let first = fs::read(cfg.maps_path()).unwrap();
        let first_log = fs::read(cfg.out_dir.join("predictions.csv")).unwrap();
        run(&cfg, None).unwrap();
        assert_eq!(first, fs::read(cfg.maps_path()).unwrap());
        assert_eq!(first_log, fs::read(cfg.out_dir.join("predictions.csv")).unwrap());
    }
}
