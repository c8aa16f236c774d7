//! `analyze`: strategy-comparison reports over a relevance-map file —
//! per-class frequency focus, centroid curves, within/between similarity,
//! and average-heatmap renders.

use std::collections::BTreeMap;
use std::fs;

use relevance_lens::analysis::{
    class_average_heatmaps, class_relevance_stats, similarity_report, AverageMode,
    SimilarityReport,
};
use relevance_lens::lrp::io::{read_map_file, write_grid_csv, StoredMap};
use relevance_lens::lrp::RelevanceMap;
use relevance_lens::render::write_ppm_with_sidecar;
use relevance_lens::signal::labels;
use serde::Serialize;

use crate::config::RunConfig;
use crate::errors::{CliError, CliResult};
use crate::pipeline::filterbank;

#[derive(Serialize)]
#[serde(untagged)]
enum SimilaritySection {
    Computed(SimilarityReport),
    Skipped { skipped: String },
}

pub fn run(cfg: &RunConfig, class: Option<&str>) -> CliResult<()> {
    let maps_path = cfg.maps_path();
    let mut stored: Vec<StoredMap<f64>> = read_map_file(&maps_path)
        .map_err(|e| CliError::data(format!("cannot read maps {}: {e}", maps_path.display())))?;
    if let Some(name) = class {
        let id = labels::class_id(name)
            .ok_or_else(|| CliError::config(format!("unknown class {name:?}")))?;
        stored.retain(|s| s.true_class == id);
    }
    if stored.is_empty() {
        return Err(CliError::data(format!("no maps to analyze in {}", maps_path.display())));
    }

    let fb = filterbank(cfg)?;
    let centers = fb.centers_hz();

    let mut groups: BTreeMap<u16, Vec<RelevanceMap<f64>>> = BTreeMap::new();
    let mut hits: BTreeMap<u16, usize> = BTreeMap::new();
    for s in &stored {
        groups.entry(s.true_class).or_default().push(s.map.clone());
        *hits.entry(s.true_class).or_default() += (s.predicted_class == s.true_class) as usize;
    }

    fs::create_dir_all(&cfg.out_dir)?;
    let mut table = String::from(
        "class_id,class,clips,accuracy,f_rel_hz,f_rel_index,f_rel_mean_index\n",
    );
    let mut centroids = String::from("class_id,class,frame,centroid_hz\n");
    for (&id, maps) in &groups {
        let stats = class_relevance_stats(id, maps, centers)?;
        let name = labels::class_name(id)?;
        let accuracy = hits[&id] as f64 / maps.len() as f64;
        table.push_str(&format!(
            "{id},{name},{},{accuracy},{},{},{}\n",
            maps.len(),
            stats.f_rel.hz,
            stats.f_rel.index,
            stats.f_rel.mean_index,
        ));
        for (frame, c) in stats.centroid_hz.iter().enumerate() {
            let cell = c.map(|v| v.to_string()).unwrap_or_default();
            centroids.push_str(&format!("{id},{name},{frame},{cell}\n"));
        }
    }
    fs::write(cfg.out_dir.join("analysis_table.csv"), table)?;
    fs::write(cfg.out_dir.join("centroids.csv"), centroids)?;

    for (mode, tag) in [(AverageMode::Signed, "signed"), (AverageMode::PositiveOnly, "positive")] {
        let averages = class_average_heatmaps(&groups, mode)?;
        for (id, grid) in &averages {
            let stem = cfg.out_dir.join(format!("avg_heatmap_{id:02}_{tag}"));
            write_grid_csv(&stem.with_extension("csv"), grid)?;
            write_ppm_with_sidecar(&stem.with_extension("ppm"), grid, cfg.render_scale)?;
        }
    }

    let similarity = if groups.len() >= 2 && groups.values().all(|m| m.len() >= 2) {
        SimilaritySection::Computed(similarity_report(&groups, cfg.between_pair_cap, cfg.seed)?)
    } else {
        let reason = format!(
            "similarity needs at least 2 classes with 2 maps each, have {} class(es)",
            groups.len()
        );
        eprintln!("analyze: {reason}");
        SimilaritySection::Skipped { skipped: reason }
    };
    fs::write(
        cfg.out_dir.join("similarity_report.json"),
        serde_json::to_string_pretty(&similarity).expect("report serializes") + "\n",
    )?;

    println!(
        "analyze: {} maps across {} classes -> {}",
        stored.len(),
        groups.len(),
        cfg.out_dir.display()
    );
    Ok(())
}
