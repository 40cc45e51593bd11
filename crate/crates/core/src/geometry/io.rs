//! Flat binary field container plus JSON sidecar.
//!
//! Layout (all 8-byte little-endian): `d, N, M` as u64, `L, T1, T2` as f64,
//! component count as u64, then samples ordered by component, time sample,
//! spatial flat index.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::ScalarField;
use crate::geometry::grid::SpaceTimeGrid;

const HEADER_BYTES: usize = 7 * 8;

/// Metadata mirrored in the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub dim: usize,
    pub points: usize,
    pub time_samples: usize,
    pub period: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub components: usize,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl FieldMeta {
    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::with_dims(
            self.dim,
            self.period,
            self.points,
            self.t_start,
            self.t_end,
            self.time_samples,
        )
    }
}

pub fn encode_fields(comps: &[&ScalarField]) -> Result<Vec<u8>> {
    let Some(first) = comps.first() else {
        return Err(Error::Format("nothing to encode".into()));
    };
    let g = *first.grid();
    if comps.iter().any(|c| *c.grid() != g) {
        return Err(Error::GridMismatch("components live on different grids".into()));
    }
    let l = g.lattice();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * g.samples() * comps.len());
    for v in [l.dim() as u64, l.points() as u64, g.steps() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [l.period(), g.t_start(), g.t_end()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(comps.len() as u64).to_le_bytes());
    for c in comps {
        for v in c.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn word(bytes: &[u8], i: usize) -> [u8; 8] {
    let mut w = [0u8; 8];
    w.copy_from_slice(&bytes[8 * i..8 * i + 8]);
    w
}

pub fn decode_fields(bytes: &[u8]) -> Result<Vec<ScalarField>> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format("truncated header".into()));
    }
    let int = |i| u64::from_le_bytes(word(bytes, i)) as usize;
    let flt = |i| f64::from_le_bytes(word(bytes, i));
    let grid = SpaceTimeGrid::with_dims(int(0), flt(3), int(1), flt(4), flt(5), int(2))?;
    let ncomp = int(6);
    let per = grid.samples();
    let want = HEADER_BYTES + 8 * per * ncomp;
    if bytes.len() != want {
        return Err(Error::Format(format!("expected {want} bytes, found {}", bytes.len())));
    }
    let mut out = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let data = (0..per).map(|i| flt(7 + c * per + i)).collect();
        out.push(ScalarField::from_data(grid, data)?);
    }
    Ok(out)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` and its `.json` sidecar; returns the sidecar path.
pub fn write_fields(
    path: &Path,
    comps: &[&ScalarField],
    names: &[&str],
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let bytes = encode_fields(comps)?;
    let g = comps[0].grid();
    let meta = FieldMeta {
        dim: g.lattice().dim(),
        points: g.lattice().points(),
        time_samples: g.steps(),
        period: g.lattice().period(),
        t_start: g.t_start(),
        t_end: g.t_end(),
        components: comps.len(),
        names: names.iter().map(|s| s.to_string()).collect(),
        extra,
    };
    fs::write(path, bytes)?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&meta)?)?;
    Ok(side)
}

/// Reads a container and checks it against its sidecar when present.
pub fn read_fields(path: &Path) -> Result<(Vec<ScalarField>, Option<FieldMeta>)> {
    let fields = decode_fields(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let m: FieldMeta = serde_json::from_str(&fs::read_to_string(&side)?)?;
        if m.grid()? != *fields[0].grid() || m.components != fields.len() {
            return Err(Error::Format("sidecar disagrees with container header".into()));
        }
        Some(m)
    } else {
        None
    };
    Ok((fields, meta))
}
