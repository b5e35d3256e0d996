//! Binary containers: `.rom` projector files and the on-disk Gramian cache.
//!
//! Layout: 8-byte magic, u64 LE header length, JSON header, then column-major
//! little-endian f64 payload in the order listed by the header.

use crate::error::{Error, Result};
use crate::gramians::{GramianKind, GramianPair};
use crate::reductors::ProjectorSeries;
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

const ROM_MAGIC: &[u8; 8] = b"GASMROM1";
const GRAM_MAGIC: &[u8; 8] = b"GASMGRM1";

/// Provenance and steady anchor of a `.rom` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RomHeader {
    pub method: String,
    pub model_hash: String,
    pub model: String,
    pub solver: String,
    /// Training parameter samples (T0, RS).
    pub thetas: Vec<(f64, f64)>,
    pub galerkin: bool,
    pub np: usize,
    pub nq: usize,
    pub rank_p: usize,
    pub rank_q: usize,
    /// Training steady state (center sample).
    pub pbar: Vec<f64>,
    pub qbar: Vec<f64>,
    pub offline_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RomFile<T: Scalar> {
    pub header: RomHeader,
    pub series: ProjectorSeries<T>,
}

fn put<T: Scalar>(buf: &mut Vec<u8>, v: impl IntoIterator<Item = T>) {
    for x in v {
        buf.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let end = self.pos + 8 * n;
        if end > self.data.len() {
            return Err(Error::Invalid("truncated payload".into()));
        }
        let out = self.data[self.pos..end]
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        self.pos = end;
        Ok(out)
    }

    fn matrix<T: Scalar>(&mut self, r: usize, c: usize) -> Result<DMatrix<T>> {
        Ok(DMatrix::from_vec(r, c, self.take(r * c)?))
    }
}

fn write_container(path: &Path, magic: &[u8; 8], header: &impl Serialize, payload: &[u8]) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Invalid(format!("header: {e}")))?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = |b: &[u8]| f.write_all(b).map_err(|e| Error::io(path, e));
    w(magic)?;
    w(&(json.len() as u64).to_le_bytes())?;
    w(&json)?;
    w(payload)
}

fn read_container<H: for<'de> Deserialize<'de>>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<u8>)> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    if data.len() < 16 || &data[..8] != magic {
        return Err(Error::Invalid(format!("{}: not a {} container", path.display(), String::from_utf8_lossy(magic))));
    }
    let hl = u64::from_le_bytes(data[8..16].try_into().expect("8 bytes")) as usize;
    if 16 + hl > data.len() {
        return Err(Error::Invalid(format!("{}: truncated header", path.display())));
    }
    let header = serde_json::from_slice(&data[16..16 + hl]).map_err(|e| Error::Invalid(format!("header: {e}")))?;
    Ok((header, data[16 + hl..].to_vec()))
}

pub fn save_rom<T: Scalar>(path: &Path, rom: &RomFile<T>) -> Result<()> {
    let s = &rom.series;
    let mut h = rom.header.clone();
    h.np = s.up.nrows();
    h.nq = s.uq.nrows();
    h.rank_p = s.rank_p();
    h.rank_q = s.rank_q();
    h.galerkin = s.galerkin;
    h.method = s.method.clone();
    let mut buf = Vec::new();
    for m in [&s.up, &s.vp, &s.uq, &s.vq] {
        put(&mut buf, m.iter().copied());
    }
    put(&mut buf, s.wp.iter().copied());
    put(&mut buf, s.wq.iter().copied());
    write_container(path, ROM_MAGIC, &h, &buf)
}

pub fn load_rom<T: Scalar>(path: &Path) -> Result<RomFile<T>> {
    let (h, payload): (RomHeader, _) = read_container(path, ROM_MAGIC)?;
    let mut c = Cursor { data: &payload, pos: 0 };
    let up = c.matrix(h.np, h.rank_p)?;
    let vp = c.matrix(h.np, h.rank_p)?;
    let uq = c.matrix(h.nq, h.rank_q)?;
    let vq = c.matrix(h.nq, h.rank_q)?;
    let wp = c.take(h.rank_p)?;
    let wq = c.take(h.rank_q)?;
    if c.pos != payload.len() {
        return Err(Error::Invalid(format!("{}: trailing payload", path.display())));
    }
    let series = ProjectorSeries { up, vp, uq, vq, wp, wq, galerkin: h.galerkin, method: h.method.clone() };
    Ok(RomFile { header: h, series })
}

#[derive(Serialize, Deserialize)]
struct GramHeader {
    key: String,
    kind: GramianKind,
    dual: bool,
    np: usize,
    nq: usize,
}

/// Hex SHA-256 of a string.
pub fn digest(s: &str) -> String {
    let d = Sha256::digest(s.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory of Gramians keyed by training provenance.
#[derive(Clone, Debug)]
pub struct GramianCache {
    pub dir: std::path::PathBuf,
}

impl GramianCache {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(GramianCache { dir })
    }

    fn path(&self, key: &str, kind: GramianKind, dual: bool) -> std::path::PathBuf {
        let name = digest(&format!("{key}|{kind:?}|{dual}"));
        self.dir.join(format!("{}.gram", &name[..24]))
    }

    pub fn load<T: Scalar>(&self, key: &str, kind: GramianKind, dual: bool) -> Option<GramianPair<T>> {
        let path = self.path(key, kind, dual);
        let (h, payload): (GramHeader, _) = read_container(&path, GRAM_MAGIC).ok()?;
        if h.key != key || h.kind != kind || h.dual != dual {
            return None;
        }
        let mut c = Cursor { data: &payload, pos: 0 };
        let wp = c.matrix(h.np, h.np).ok()?;
        let wq = c.matrix(h.nq, h.nq).ok()?;
        Some(GramianPair { wp, wq, kind, dual_based: dual })
    }

    pub fn store<T: Scalar>(&self, key: &str, g: &GramianPair<T>) -> Result<()> {
        let h = GramHeader { key: key.to_string(), kind: g.kind, dual: g.dual_based, np: g.wp.nrows(), nq: g.wq.nrows() };
        let mut buf = Vec::new();
        put(&mut buf, g.wp.iter().copied());
        put(&mut buf, g.wq.iter().copied());
        write_container(&self.path(key, g.kind, g.dual_based), GRAM_MAGIC, &h, &buf)
    }
}
