//! `preprocess`: slice the raw dataset into cached one-second clips.

use std::collections::BTreeMap;
use std::fs;

use relevance_lens::signal::{labels, preprocess_dataset, read_metadata, write_clip_cache};
use serde::Serialize;

use crate::config::RunConfig;
use crate::errors::{CliError, CliResult};

#[derive(Serialize)]
struct Summary {
    clips: usize,
    per_class: BTreeMap<String, usize>,
    per_fold: BTreeMap<u16, usize>,
    dropped_patches: usize,
    skipped_files: Vec<SkippedFile>,
    cache: String,
}

#[derive(Serialize)]
struct SkippedFile {
    file: String,
    reason: String,
}

pub fn run(cfg: &RunConfig, class: Option<&str>) -> CliResult<()> {
    let ds = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::config("preprocess needs dataset paths in the config"))?;
    let mut rows = read_metadata(&ds.metadata_csv)
        .map_err(|e| CliError::data(format!("metadata {}: {e}", ds.metadata_csv.display())))?;
    if let Some(folds) = &cfg.folds {
        rows.retain(|r| folds.contains(&r.fold));
    }
    if let Some(name) = class {
        let id = labels::class_id(name)
            .ok_or_else(|| CliError::config(format!("unknown class {name:?}")))?;
        rows.retain(|r| r.class_id == id);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!(
            "no metadata rows to process in {}",
            ds.metadata_csv.display()
        )));
    }

    let report = preprocess_dataset::<f64>(&ds.audio_dir, &rows);
    if report.clips.is_empty() {
        let mut msg = format!("no clips produced from {}", ds.audio_dir.display());
        if let Some((file, reason)) = report.skipped_files.first() {
            msg.push_str(&format!(" (first skip: {file}: {reason})"));
        }
        return Err(CliError::data(msg));
    }

    fs::create_dir_all(&cfg.out_dir)?;
    let cache_path = cfg.cache_path();
    if let Some(parent) = cache_path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_clip_cache(&cache_path, &report.clips)?;

    let mut per_class: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_fold: BTreeMap<u16, usize> = BTreeMap::new();
    for clip in &report.clips {
        *per_class.entry(labels::class_name(clip.class_id)?.to_string()).or_default() += 1;
        *per_fold.entry(clip.fold).or_default() += 1;
    }

    let summary = Summary {
        clips: report.clips.len(),
        per_class: per_class.clone(),
        per_fold,
        dropped_patches: report.dropped_patches,
        skipped_files: report
            .skipped_files
            .iter()
            .map(|(file, reason)| SkippedFile { file: file.clone(), reason: reason.clone() })
            .collect(),
        cache: cache_path.display().to_string(),
    };
    fs::write(
        cfg.out_dir.join("preprocess_summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;

    let mut counts_csv = String::from("class_id,class,clips\n");
    let mut by_id: BTreeMap<u16, usize> = BTreeMap::new();
    for clip in &report.clips {
        *by_id.entry(clip.class_id).or_default() += 1;
    }
    for (id, count) in &by_id {
        counts_csv.push_str(&format!("{id},{},{count}\n", labels::class_name(*id)?));
    }
    fs::write(cfg.out_dir.join("class_counts.csv"), counts_csv)?;

    println!(
        "preprocess: {} clips from {} metadata rows -> {} ({} skipped files, {} dropped patches)",
        report.clips.len(),
        rows.len(),
        cache_path.display(),
        report.skipped_files.len(),
        report.dropped_patches
    );
    Ok(())
}
