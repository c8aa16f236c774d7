//! `render`: relevance maps or CSV grids to PPM heatmaps with min/max
//! sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use relevance_lens::lrp::io::{read_grid_csv, read_map_file, write_grid_csv};
use relevance_lens::render::write_ppm_with_sidecar;

use crate::config::RunConfig;
use crate::errors::{CliError, CliResult};

pub fn run(cfg: &RunConfig, input: Option<&Path>) -> CliResult<()> {
    let path: PathBuf = input.map(Path::to_path_buf).unwrap_or_else(|| cfg.maps_path());
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let render_dir = cfg.out_dir.join("render");
    fs::create_dir_all(&render_dir)?;

    let rendered = match ext {
        "rlnr" => {
            let stored = read_map_file::<f64>(&path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            if stored.is_empty() {
                return Err(CliError::data(format!("{} holds no maps", path.display())));
            }
            let mut index = String::from(
                "index,file,domain,true_class,predicted_class,explained_class,logit\n",
            );
            for (i, s) in stored.iter().enumerate() {
                let stem = format!("map_{i:04}");
                write_grid_csv(&render_dir.join(format!("{stem}.csv")), &s.map.values)?;
                write_ppm_with_sidecar(
                    &render_dir.join(format!("{stem}.ppm")),
                    &s.map.values,
                    cfg.render_scale,
                )?;
                index.push_str(&format!(
                    "{i},{stem}.ppm,{:?},{},{},{},{}\n",
                    s.map.domain, s.true_class, s.predicted_class, s.map.class_index, s.map.logit
                ));
            }
            fs::write(render_dir.join("index.csv"), index)?;
            stored.len()
        }
        "csv" => {
            let grid = read_grid_csv::<f64>(&path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CliError::data(format!("{} has no usable stem", path.display())))?;
            write_ppm_with_sidecar(&render_dir.join(format!("{stem}.ppm")), &grid, cfg.render_scale)?;
            1
        }
        other => {
            return Err(CliError::data(format!(
                "cannot render {}: unsupported extension {other:?} (expected .rlnr or .csv)",
                path.display()
            )));
        }
    };

    println!("render: {rendered} image(s) -> {}", render_dir.display());
    Ok(())
}
