//! Relevance-map persistence: a binary record mirroring the clip cache
//! (magic "RLNR") and a plain CSV grid.
//!
//! Record layout, little-endian: magic "RLNR", version u16, domain u8,
//! explained_class u16, true_class u16, predicted_class u16, rows u32,
//! cols u32, logit f32, then rows*cols f32 values row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lrp::{Domain, RelevanceMap};
use crate::scalar::{cast, Scalar};

pub const MAP_MAGIC: &[u8; 4] = b"RLNR";
pub const MAP_VERSION: u16 = 1;

/// A relevance map together with the harness-level labels it was filed
/// under.
#[derive(Debug, Clone)]
pub struct StoredMap<T> {
    pub map: RelevanceMap<T>,
    pub true_class: u16,
    pub predicted_class: u16,
}

pub fn write_map_record<T: Scalar, W: Write>(
    out: &mut W,
    map: &RelevanceMap<T>,
    true_class: u16,
    predicted_class: u16,
) -> Result<()> {
    out.write_all(MAP_MAGIC)?;
    out.write_all(&MAP_VERSION.to_le_bytes())?;
    out.write_all(&[map.domain.tag()])?;
    out.write_all(&(map.class_index as u16).to_le_bytes())?;
    out.write_all(&true_class.to_le_bytes())?;
    out.write_all(&predicted_class.to_le_bytes())?;
    out.write_all(&(map.values.rows() as u32).to_le_bytes())?;
    out.write_all(&(map.values.cols() as u32).to_le_bytes())?;
    out.write_all(&(map.logit.to_f64().unwrap() as f32).to_le_bytes())?;
    for &v in map.values.data() {
        out.write_all(&(v.to_f64().unwrap() as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0usize;
    while filled < buf.len() {
        let n = reader.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(Error::MapFile(format!(
                "truncated record: wanted {} bytes, found {filled}",
                buf.len()
            )));
        }
        filled += n;
    }
    Ok(true)
}

pub fn read_map_record<T: Scalar, R: Read>(reader: &mut R) -> Result<Option<StoredMap<T>>> {
    let mut header = [0u8; 25];
    if !read_exact_or_eof(reader, &mut header)? {
        return Ok(None);
    }
    if &header[0..4] != MAP_MAGIC {
        return Err(Error::MapFile("bad magic; not a relevance map".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != MAP_VERSION {
        return Err(Error::MapFile(format!("unsupported version {version}")));
    }
    let domain = Domain::from_tag(header[6])?;
    let class_index = u16::from_le_bytes([header[7], header[8]]) as usize;
    let true_class = u16::from_le_bytes([header[9], header[10]]);
    let predicted_class = u16::from_le_bytes([header[11], header[12]]);
    let rows = u32::from_le_bytes([header[13], header[14], header[15], header[16]]) as usize;
    let cols = u32::from_le_bytes([header[17], header[18], header[19], header[20]]) as usize;
    let logit = f32::from_le_bytes([header[21], header[22], header[23], header[24]]);
    if rows == 0 || cols == 0 {
        return Err(Error::MapFile("empty grid".into()));
    }
    let mut bytes = vec![0u8; rows * cols * 4];
    if !read_exact_or_eof(reader, &mut bytes)? {
        return Err(Error::MapFile("record header without grid data".into()));
    }
    let data: Vec<T> = bytes
        .chunks_exact(4)
        .map(|c| cast::<T>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Ok(Some(StoredMap {
        map: RelevanceMap {
            domain,
            values: Grid::from_vec(rows, cols, data)?,
            class_index,
            logit: cast::<T>(logit as f64),
        },
        true_class,
        predicted_class,
    }))
}

pub fn write_map_file<T: Scalar>(
    path: &Path,
    map: &RelevanceMap<T>,
    true_class: u16,
    predicted_class: u16,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write_map_record(&mut out, map, true_class, predicted_class)?;
    out.flush()?;
    Ok(())
}

/// Reads every record in a map file (usually one).
pub fn read_map_file<T: Scalar>(path: &Path) -> Result<Vec<StoredMap<T>>> {
    let mut reader = std::io::BufReader::new(fs::File::open(path)?);
    let mut maps = Vec::new();
    while let Some(m) = read_map_record(&mut reader)? {
        maps.push(m);
    }
    if maps.is_empty() {
        return Err(Error::MapFile(format!("{}: no records", path.display())));
    }
    Ok(maps)
}

/// Writes the bare grid as CSV, one line per row, shortest round-trip
/// float formatting.
pub fn write_grid_csv<T: Scalar>(path: &Path, grid: &Grid<T>) -> Result<()> {
    let mut out = String::new();
    for r in 0..grid.rows() {
        let row = grid.row(r);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_grid_csv<T: Scalar>(path: &Path) -> Result<Grid<T>> {
    let text = fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| {
                Error::MapFile(format!("{} line {}: {e}", path.display(), lineno + 1))
            })?;
            data.push(cast::<T>(v));
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::MapFile(format!(
                    "{} line {}: expected {c} columns, got {count}",
                    path.display(),
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::MapFile(format!("{}: empty CSV", path.display())))?;
    Grid::from_vec(rows, cols, data)
}
