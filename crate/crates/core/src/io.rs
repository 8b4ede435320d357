//! Binary snapshots, checkpoint metadata and NDJSON output.
//!
//! Snapshot layout (little-endian): magic `MRE1`, `u32 d`, `u32 n`,
//! `u64 count`, then `count` entries of `d` x `i32` wave-vector components
//! followed by `d` complex coefficients as `f64` (re, im). Entries cover every
//! retained `k != 0`, sorted lexicographically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Martingale;
use crate::spectral::{GridSpec, SpectralField, WaveVector};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"MRE1";

fn retained_modes(grid: GridSpec) -> Vec<(WaveVector, usize)> {
    let t = grid.tables();
    let d = grid.dim();
    let mut out: Vec<(WaveVector, usize)> = (0..grid.len())
        .filter(|&i| t.retained[i])
        .filter_map(|i| {
            let kv = grid.wavevector_at(i);
            let comps: Vec<i32> = kv[..d].iter().map(|&c| c as i32).collect();
            WaveVector::new(&comps).ok().map(|k| (k, i))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn encode_snapshot(b: &SpectralField) -> Vec<u8> {
    let grid = b.grid();
    let d = grid.dim();
    let modes = retained_modes(grid);
    let mut buf = Vec::with_capacity(20 + modes.len() * d * 20);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    buf.extend_from_slice(&(modes.len() as u64).to_le_bytes());
    for (k, idx) in &modes {
        for &c in k.components() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        for c in 0..d {
            let v = b.component(c)[*idx];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Snapshot(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SpectralField> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take()?;
    if magic[..3] != SNAPSHOT_MAGIC[..3] {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    if magic[3] != SNAPSHOT_MAGIC[3] {
        return Err(Error::Snapshot(format!(
            "unsupported version byte {:?} (expected {:?})",
            magic[3] as char, SNAPSHOT_MAGIC[3] as char
        )));
    }
    let d = u32::from_le_bytes(cur.take()?) as usize;
    let n = u32::from_le_bytes(cur.take()?) as usize;
    let count = u64::from_le_bytes(cur.take()?);
    let grid = GridSpec::new(d, n)?;
    let mut b = SpectralField::zeros(grid);
    for _ in 0..count {
        let mut comps = [0i32; 3];
        for c in comps.iter_mut().take(d) {
            *c = i32::from_le_bytes(cur.take()?);
        }
        let k = WaveVector::new(&comps[..d])?;
        let idx = grid
            .index_of(&k)
            .ok_or_else(|| Error::Snapshot(format!("{k} lies outside the grid {grid}")))?;
        for c in 0..d {
            let re = f64::from_le_bytes(cur.take()?);
            let im = f64::from_le_bytes(cur.take()?);
            b.component_mut(c)[idx] = Complex64::new(re, im);
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Snapshot(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(b)
}

pub fn write_snapshot(path: impl AsRef<Path>, b: &SpectralField) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_snapshot(b))?;
    f.flush()?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<SpectralField> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

/// Everything besides the field needed to continue a run bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub t: f64,
    pub t0: f64,
    pub step: u64,
    pub dt: f64,
    pub seed: u64,
    pub trajectory: u64,
    pub threshold: f64,
    pub config_hash: String,
    pub martingale: Martingale,
}

pub fn write_checkpoint(dir: impl AsRef<Path>, b: &SpectralField, meta: &CheckpointMeta) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_snapshot(dir.join("state.bin"), b)?;
    let mut f = BufWriter::new(File::create(dir.join("meta.json"))?);
    write_json(&mut f, meta)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<(SpectralField, CheckpointMeta)> {
    let dir = dir.as_ref();
    let b = read_snapshot(dir.join("state.bin"))?;
    let meta: CheckpointMeta =
        serde_json::from_reader(BufReader::new(File::open(dir.join("meta.json"))?))?;
    Ok((b, meta))
}

/// JSON formatter printing every float with 17 significant digits.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            // JSON has no infinities; serde_json writes null for them too.
            w.write_all(b"null")
        }
    }
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(w: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, Sig17);
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

/// One JSON document per line.
pub struct NdjsonWriter<W: Write> {
    inner: W,
}

impl<W: Write> NdjsonWriter<W> {
    pub fn new(inner: W) -> Self {
        NdjsonWriter { inner }
    }

    pub fn write<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<()> {
        write_json(&mut self.inner, value)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
