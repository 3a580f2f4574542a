//! On-disk formats for grids and value grids.
//!
//! A value-grid directory holds `valuegrid.json` (slice times, certified
//! region, file names) and, per slice `NNNN`:
//!
//! * `slice_NNNN.json`: header with box, counts, time and untrusted nodes;
//! * `slice_NNNN.f64`: the nodal values as little-endian `f64`, row-major with
//!   the third axis fastest;
//! * `slice_NNNN.csv` (optional): `x1,x2,x3,value,trusted` per node.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Grid3, GridSpec, ValueGrid};
use crate::error::{Error, Result};
use crate::group::BoxRegion;

pub const GRID_FORMAT: &str = "heisgame.grid/v1";
pub const VALUE_GRID_FORMAT: &str = "heisgame.valuegrid/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceHeader {
    pub format: String,
    pub region: BoxRegion,
    pub counts: [usize; 3],
    pub time: f64,
    pub dtype: String,
    pub byte_order: String,
    pub values_file: String,
    /// Flat indices of nodes whose trust flag is false.
    pub untrusted: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueGridHeader {
    pub format: String,
    pub times: Vec<f64>,
    pub trusted_region: BoxRegion,
    pub slices: Vec<String>,
}

pub fn grid_to_csv(grid: &Grid3) -> String {
    let mut out = String::with_capacity(grid.values.len() * 96);
    out.push_str("x1,x2,x3,value,trusted\n");
    for (idx, v) in grid.values.iter().enumerate() {
        let p = grid.spec.node_at(idx);
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            p.x1,
            p.x2,
            p.x3,
            v,
            u8::from(grid.trusted[idx])
        ));
    }
    out
}

pub fn values_to_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn values_from_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!("binary length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes header and binary values (and CSV when `csv` is set) for one slice.
pub fn write_slice(dir: &Path, stem: &str, grid: &Grid3, time: f64, csv: bool) -> Result<()> {
    let values_file = format!("{stem}.f64");
    let header = SliceHeader {
        format: GRID_FORMAT.to_string(),
        region: grid.spec.region,
        counts: grid.spec.counts,
        time,
        dtype: "f64".to_string(),
        byte_order: "little".to_string(),
        values_file: values_file.clone(),
        untrusted: grid
            .trusted
            .iter()
            .enumerate()
            .filter(|(_, t)| !**t)
            .map(|(i, _)| i)
            .collect(),
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header)?)?;
    fs::write(dir.join(values_file), values_to_bytes(&grid.values))?;
    if csv {
        fs::write(dir.join(format!("{stem}.csv")), grid_to_csv(grid))?;
    }
    Ok(())
}

pub fn read_slice(dir: &Path, stem: &str) -> Result<(Grid3, f64)> {
    let header: SliceHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    if header.format != GRID_FORMAT {
        return Err(Error::Format(format!("unknown grid format {}", header.format)));
    }
    let spec = GridSpec::new(header.region, header.counts)?;
    let values = values_from_bytes(&fs::read(dir.join(&header.values_file))?)?;
    let mut grid = Grid3::new(spec, values)?;
    for idx in header.untrusted {
        if idx >= grid.trusted.len() {
            return Err(Error::Format(format!("untrusted index {idx} out of range")));
        }
        grid.trusted[idx] = false;
    }
    Ok((grid, header.time))
}

pub fn write_value_grid(dir: &Path, vg: &ValueGrid, csv: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut stems = Vec::with_capacity(vg.len());
    for (s, (grid, &t)) in vg.slices.iter().zip(&vg.times).enumerate() {
        let stem = format!("slice_{s:04}");
        write_slice(dir, &stem, grid, t, csv)?;
        stems.push(stem);
    }
    let header = ValueGridHeader {
        format: VALUE_GRID_FORMAT.to_string(),
        times: vg.times.clone(),
        trusted_region: vg.trusted_region,
        slices: stems,
    };
    fs::write(dir.join("valuegrid.json"), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_value_grid(dir: &Path) -> Result<ValueGrid> {
    let header: ValueGridHeader = serde_json::from_str(&fs::read_to_string(dir.join("valuegrid.json"))?)?;
    if header.format != VALUE_GRID_FORMAT {
        return Err(Error::Format(format!("unknown value-grid format {}", header.format)));
    }
    let mut slices = Vec::with_capacity(header.slices.len());
    for stem in &header.slices {
        slices.push(read_slice(dir, stem)?.0);
    }
    ValueGrid::new(header.times, slices, header.trusted_region)
}
