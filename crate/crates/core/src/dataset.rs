//! Point sets: storage, file formats, synthetic generators and random
//! projection.
//!
//! The canonical on-disk format is `RBCM`:
//!
//! | bytes   | content                                  |
//! |---------|------------------------------------------|
//! | 0..4    | magic `RBCM`                             |
//! | 4..8    | version, `u32` LE, currently 1           |
//! | 8..12   | n, `u32` LE                              |
//! | 12..16  | d, `u32` LE                              |
//! | 16..    | n·d `f32` LE values, row-major           |
//!
//! CSV holds one point per line, comma separated, no header.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{RbcError, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"RBCM";
pub const MATRIX_VERSION: u32 = 1;

/// Dense n×d row-major matrix of finite `f32` coordinates. Point ids are the
/// row indices `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f32>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f32>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(RbcError::invalid(format!("matrix must be non-empty, got {n}x{d}")));
        }
        if n > u32::MAX as usize || d > u32::MAX as usize {
            return Err(RbcError::invalid("matrix too large for 32-bit ids"));
        }
        if values.len() != n * d {
            return Err(RbcError::invalid(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(RbcError::Data(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(RbcError::invalid(format!("row {i} has {} columns, expected {d}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.d)
    }

    /// New matrix holding the listed rows, in order.
    pub fn select_rows(&self, ids: &[u32]) -> Result<Self> {
        let mut values = Vec::with_capacity(ids.len() * self.d);
        for &id in ids {
            let id = id as usize;
            if id >= self.n {
                return Err(RbcError::invalid(format!("row id {id} out of range (n={})", self.n)));
            }
            values.extend_from_slice(self.row(id));
        }
        Self::new(ids.len(), self.d, values)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &DataMatrix) -> Result<Self> {
        if self.d != other.d {
            return Err(RbcError::invalid(format!(
                "cannot stack d={} on d={}",
                other.d, self.d
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(self.n + other.n, self.d, values)
    }

    /// Splits off the last `count` rows: returns (head, tail).
    pub fn split_tail(&self, count: usize) -> Result<(Self, Self)> {
        if count == 0 || count >= self.n {
            return Err(RbcError::invalid(format!(
                "tail size {count} must be in 1..{}",
                self.n
            )));
        }
        let cut = (self.n - count) * self.d;
        Ok((
            Self::new(self.n - count, self.d, self.values[..cut].to_vec())?,
            Self::new(count, self.d, self.values[cut..].to_vec())?,
        ))
    }

    pub fn scaled(&self, alpha: f32) -> Result<Self> {
        Self::new(self.n, self.d, self.values.iter().map(|v| v * alpha).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    Csv,
}

impl MatrixFormat {
    /// Guesses from the extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = RbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" => Ok(MatrixFormat::Binary),
            "csv" => Ok(MatrixFormat::Csv),
            other => Err(RbcError::invalid(format!("unknown matrix format '{other}'"))),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixFormat::Binary => "binary",
            MatrixFormat::Csv => "csv",
        })
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix> {
    let file = File::open(path.as_ref())?;
    let mut reader = BufReader::new(file);
    match format {
        MatrixFormat::Binary => read_matrix(&mut reader),
        MatrixFormat::Csv => read_csv(reader),
    }
}

pub fn save_matrix(x: &DataMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    match format {
        MatrixFormat::Binary => write_matrix(x, &mut w)?,
        MatrixFormat::Csv => write_csv(x, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f32s(r: &mut impl Read, count: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn write_f32s(w: &mut impl Write, vals: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(vals.len() * 4);
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one `RBCM` block from a stream.
pub fn read_matrix(r: &mut impl Read) -> Result<DataMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(RbcError::Format(format!("bad matrix magic {magic:?}, expected \"RBCM\"")));
    }
    let version = read_u32(r)?;
    if version != MATRIX_VERSION {
        return Err(RbcError::Format(format!("unsupported matrix version {version}")));
    }
    let n = read_u32(r)? as usize;
    let d = read_u32(r)? as usize;
    if n == 0 || d == 0 {
        return Err(RbcError::Format(format!("empty matrix header {n}x{d}")));
    }
    let values = read_f32s(r, n.checked_mul(d).ok_or_else(|| RbcError::Format("header overflow".into()))?)?;
    DataMatrix::new(n, d, values)
}

/// Writes one `RBCM` block to a stream.
pub fn write_matrix(x: &DataMatrix, w: &mut impl Write) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(x.n as u32).to_le_bytes())?;
    w.write_all(&(x.d as u32).to_le_bytes())?;
    write_f32s(w, &x.values)
}

fn read_csv(r: impl BufRead) -> Result<DataMatrix> {
    let mut values = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| {
                RbcError::Format(format!("line {}: cannot parse '{}'", lineno + 1, field.trim()))
            })?;
            values.push(v);
        }
        let width = values.len() - before;
        if n == 0 {
            d = width;
        } else if width != d {
            return Err(RbcError::Format(format!(
                "line {}: {width} columns, expected {d}",
                lineno + 1
            )));
        }
        n += 1;
    }
    if n == 0 {
        return Err(RbcError::Format("empty CSV file".into()));
    }
    DataMatrix::new(n, d, values)
}

fn write_csv(x: &DataMatrix, w: &mut impl Write) -> Result<()> {
    for row in x.rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            // `Display` for f32 prints the shortest string that round-trips.
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Synthetic point distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticSpec {
    /// i.i.d. uniform on `[0,1]^d`.
    UniformCube,
    /// The lattice `{0..side-1}^d`, `n = side^d`, last coordinate fastest.
    IntegerGrid,
    /// `clusters` centers uniform on `[0,1]^d`, points isotropic Gaussian
    /// around a uniformly chosen center.
    GaussianClusters { clusters: usize, sigma: f32 },
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticSpec::UniformCube => f.write_str("uniform"),
            SyntheticSpec::IntegerGrid => f.write_str("grid"),
            SyntheticSpec::GaussianClusters { clusters, sigma } => {
                write!(f, "gaussian:{clusters}:{sigma}")
            }
        }
    }
}

impl FromStr for SyntheticSpec {
    type Err = RbcError;

    /// Accepts `uniform`, `grid`, or `gaussian[:clusters[:sigma]]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next().unwrap_or("").to_ascii_lowercase().as_str() {
            "uniform" | "uniform-cube" => Ok(SyntheticSpec::UniformCube),
            "grid" | "integer-grid" => Ok(SyntheticSpec::IntegerGrid),
            "gaussian" | "gaussian-clusters" => {
                let clusters = match parts.next() {
                    Some(v) => v.parse().map_err(|_| RbcError::invalid(format!("bad cluster count '{v}'")))?,
                    None => 10,
                };
                let sigma = match parts.next() {
                    Some(v) => v.parse().map_err(|_| RbcError::invalid(format!("bad sigma '{v}'")))?,
                    None => 0.05,
                };
                Ok(SyntheticSpec::GaussianClusters { clusters, sigma })
            }
            other => Err(RbcError::invalid(format!("unknown generator '{other}'"))),
        }
    }
}

/// Exact integer `d`-th root of `n`, if one exists.
fn exact_root(n: usize, d: usize) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / d as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&side| {
        side > 0 && (0..d).try_fold(1usize, |acc, _| acc.checked_mul(side)) == Some(n)
    })
}

pub fn gen_synthetic(spec: SyntheticSpec, n: usize, d: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 || d == 0 {
        return Err(RbcError::invalid("n and d must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match spec {
        SyntheticSpec::UniformCube => (0..n * d).map(|_| rng.random::<f32>()).collect(),
        SyntheticSpec::IntegerGrid => {
            let side = exact_root(n, d).ok_or_else(|| {
                RbcError::invalid(format!("integer grid needs n to be a perfect {d}-th power, got {n}"))
            })?;
            let mut values = Vec::with_capacity(n * d);
            let mut coord = vec![0usize; d];
            for _ in 0..n {
                values.extend(coord.iter().map(|&c| c as f32));
                for c in coord.iter_mut().rev() {
                    *c += 1;
                    if *c < side {
                        break;
                    }
                    *c = 0;
                }
            }
            values
        }
        SyntheticSpec::GaussianClusters { clusters, sigma } => {
            if clusters == 0 {
                return Err(RbcError::invalid("gaussian clusters needs at least one cluster"));
            }
            let noise = Normal::new(0.0f32, sigma)
                .map_err(|e| RbcError::invalid(format!("bad sigma {sigma}: {e}")))?;
            let centers: Vec<f32> = (0..clusters * d).map(|_| rng.random::<f32>()).collect();
            let mut values = Vec::with_capacity(n * d);
            for _ in 0..n {
                let c = rng.random_range(0..clusters);
                for j in 0..d {
                    values.push(centers[c * d + j] + noise.sample(&mut rng));
                }
            }
            values
        }
    };
    DataMatrix::new(n, d, values)
}

/// Projects `x` onto `target_dim` dimensions with a dense Gaussian matrix
/// drawn from `seed`: `Y = X·P/√k`.
pub fn random_project(x: &DataMatrix, target_dim: usize, seed: u64) -> Result<DataMatrix> {
    check_target(x, target_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f32> = (0..x.d * target_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    project_with(x, &p, target_dim)
}

/// Same as [`random_project`] with a caller-supplied d×k row-major
/// projection matrix.
pub fn project_with(x: &DataMatrix, p: &[f32], target_dim: usize) -> Result<DataMatrix> {
    check_target(x, target_dim)?;
    if p.len() != x.d * target_dim {
        return Err(RbcError::invalid(format!(
            "projection matrix must be {}x{target_dim}",
            x.d
        )));
    }
    let scale = 1.0 / (target_dim as f64).sqrt();
    let mut out = Vec::with_capacity(x.n * target_dim);
    let mut acc = vec![0.0f64; target_dim];
    for row in x.rows() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (i, &v) in row.iter().enumerate() {
            let v = f64::from(v);
            for (a, &pij) in acc.iter_mut().zip(&p[i * target_dim..(i + 1) * target_dim]) {
                *a += v * f64::from(pij);
            }
        }
        out.extend(acc.iter().map(|a| (a * scale) as f32));
    }
    DataMatrix::new(x.n, target_dim, out)
}

fn check_target(x: &DataMatrix, target_dim: usize) -> Result<()> {
    if target_dim == 0 || target_dim > x.d {
        return Err(RbcError::invalid(format!(
            "target dimension must be in 1..={}, got {target_dim}",
            x.d
        )));
    }
    Ok(())
}
