//! `RBCI` index files.
//!
//! All integers are `u32` little-endian, reals `f32` little-endian:
//!
//! ```text
//! magic "RBCI" | version | variant (0 exact, 1 one-shot)
//! metric kind (0 l2, 1 l1) | metric dim
//! sampling mode (0 bernoulli, 1 fixed) | seed low | seed high | requested n_r
//! |R| | rep ids[|R|]
//! exact:    offsets[|R|+1] | member ids[n] | member dists[n] | radii[|R|]
//! one-shot: s | member ids[|R|·s] | radii[|R|]
//! embedded RBCM database matrix
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::dataset::{read_f32s, read_matrix, read_u32, write_f32s, write_matrix};
use crate::error::{RbcError, Result};
use crate::metric::{MetricKind, MetricSpec};

use super::{RbcExactIndex, RbcIndex, RbcOneShotIndex, RepSet, SamplingMode};

pub const INDEX_MAGIC: &[u8; 4] = b"RBCI";
pub const INDEX_VERSION: u32 = 1;

const VARIANT_EXACT: u32 = 0;
const VARIANT_ONE_SHOT: u32 = 1;

fn put(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_all(w: &mut impl Write, vals: &[u32]) -> Result<()> {
    let mut buf = Vec::with_capacity(vals.len() * 4);
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32s(r: &mut impl Read, count: usize) -> Result<Vec<u32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_header(w: &mut impl Write, variant: u32, metric: &MetricSpec, reps: &RepSet) -> Result<()> {
    w.write_all(INDEX_MAGIC)?;
    put(w, INDEX_VERSION)?;
    put(w, variant)?;
    put(w, metric.kind.code())?;
    put(w, metric.dim as u32)?;
    put(w, reps.mode.code())?;
    put(w, reps.seed as u32)?;
    put(w, (reps.seed >> 32) as u32)?;
    put(w, reps.n_r as u32)?;
    put(w, reps.len() as u32)?;
    put_all(w, &reps.ids)
}

pub fn write_index(index: &RbcIndex, w: &mut impl Write) -> Result<()> {
    match index {
        RbcIndex::Exact(ix) => {
            write_header(w, VARIANT_EXACT, &ix.metric, &ix.reps)?;
            put_all(w, &ix.offsets)?;
            put_all(w, &ix.members)?;
            write_f32s(w, &ix.member_dists)?;
            write_f32s(w, &ix.radii)?;
            write_matrix(&ix.data, w)
        }
        RbcIndex::OneShot(ix) => {
            write_header(w, VARIANT_ONE_SHOT, &ix.metric, &ix.reps)?;
            put(w, ix.s as u32)?;
            put_all(w, &ix.members)?;
            write_f32s(w, &ix.radii)?;
            write_matrix(&ix.data, w)
        }
    }
}

pub fn read_index(r: &mut impl Read) -> Result<RbcIndex> {
    let fmt = |m: String| RbcError::Format(m);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != INDEX_MAGIC {
        return Err(fmt(format!("bad index magic {magic:?}, expected \"RBCI\"")));
    }
    let version = read_u32(r)?;
    if version != INDEX_VERSION {
        return Err(fmt(format!("unsupported index version {version}")));
    }
    let variant = read_u32(r)?;
    let kind = MetricKind::from_code(read_u32(r)?).ok_or_else(|| fmt("unknown metric code".into()))?;
    let dim = read_u32(r)? as usize;
    let metric = MetricSpec::new(kind, dim).map_err(|e| fmt(e.to_string()))?;
    let mode = SamplingMode::from_code(read_u32(r)?).ok_or_else(|| fmt("unknown sampling mode".into()))?;
    let seed = u64::from(read_u32(r)?) | (u64::from(read_u32(r)?) << 32);
    let n_r = read_u32(r)? as usize;
    let nr = read_u32(r)? as usize;
    let ids = read_u32s(r, nr)?;
    let reps = RepSet { ids, mode, seed, n_r };

    let index = match variant {
        VARIANT_EXACT => {
            let offsets = read_u32s(r, nr + 1)?;
            let n = *offsets.last().unwrap() as usize;
            let members = read_u32s(r, n)?;
            let member_dists = read_f32s(r, n)?;
            let radii = read_f32s(r, nr)?;
            let data = read_matrix(r)?;
            check_shape(&data, &metric, &reps)?;
            if data.n() != n || offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
                return Err(fmt("ownership table does not match the database".into()));
            }
            if members.iter().any(|&m| m as usize >= n) {
                return Err(fmt("member id out of range".into()));
            }
            let rep_points = data.select_rows(&reps.ids)?;
            let list_points = data.select_rows(&members)?;
            RbcIndex::Exact(RbcExactIndex {
                data: Arc::new(data),
                metric,
                reps,
                rep_points,
                list_points,
                offsets,
                members,
                member_dists,
                radii,
            })
        }
        VARIANT_ONE_SHOT => {
            let s = read_u32(r)? as usize;
            let members = read_u32s(r, nr * s)?;
            let radii = read_f32s(r, nr)?;
            let data = read_matrix(r)?;
            check_shape(&data, &metric, &reps)?;
            if s == 0 || s > data.n() || members.iter().any(|&m| m as usize >= data.n()) {
                return Err(fmt("one-shot lists do not match the database".into()));
            }
            let rep_points = data.select_rows(&reps.ids)?;
            RbcIndex::OneShot(RbcOneShotIndex {
                data: Arc::new(data),
                metric,
                reps,
                rep_points,
                s,
                members,
                radii,
            })
        }
        other => return Err(fmt(format!("unknown index variant {other}"))),
    };
    Ok(index)
}

fn check_shape(data: &crate::dataset::DataMatrix, metric: &MetricSpec, reps: &RepSet) -> Result<()> {
    if data.d() != metric.dim {
        return Err(RbcError::Format("metric dimension does not match embedded data".into()));
    }
    if reps.is_empty() || reps.ids.iter().any(|&i| i as usize >= data.n()) {
        return Err(RbcError::Format("representative ids out of range".into()));
    }
    Ok(())
}

pub fn save_index(index: &RbcIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(index, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<RbcIndex> {
    let mut r = BufReader::new(File::open(path)?);
    read_index(&mut r)
}
