//! `NFLW` frame container.
//!
//! Layout (little-endian): magic `b"NFLW"`, version `u16`, height `u32`,
//! width `u32`, pixel pitch `f64`, timestamp `f64`, then row-major planes:
//! `g_u` (H*W `f32`), `g_v` (H*W `f32`), heights (H*W `f32`), mask (H*W bytes,
//! 0 or 1). Normals are not stored; they are derived on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, GridGeometry, TactileFrame};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NFLW";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 8;

pub fn write_frame<W: Write>(w: &mut W, f: &TactileFrame) -> Result<()> {
    let g = &f.geometry;
    let mut buf = Vec::with_capacity(HEADER_LEN + g.len() * 13);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.height_px as u32).to_le_bytes());
    buf.extend_from_slice(&(g.width_px as u32).to_le_bytes());
    buf.extend_from_slice(&g.pixel_pitch.to_le_bytes());
    buf.extend_from_slice(&f.timestamp.to_le_bytes());
    for c in 0..2 {
        for v in f.gradients.data() {
            buf.extend_from_slice(&(v[c] as f32).to_le_bytes());
        }
    }
    for &h in f.heights.data() {
        buf.extend_from_slice(&(h as f32).to_le_bytes());
    }
    buf.extend(f.mask.data().iter().map(|&m| m as u8));
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<TactileFrame> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated NFLW header: {e}")))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not an NFLW frame".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported NFLW version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let (rows, cols) = (u32_at(6), u32_at(10));
    let pitch = f64_at(14);
    let timestamp = f64_at(22);
    let geometry = GridGeometry::new(rows, cols, pitch)?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;

    let mut body = vec![0u8; n * 13];
    r.read_exact(&mut body)
        .map_err(|e| Error::Format(format!("truncated NFLW body: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after NFLW body".into()));
    }

    let plane = |k: usize| {
        body[k * 4 * n..(k + 1) * 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
    };
    let gradients: Vec<[f64; 2]> = plane(0).zip(plane(1)).map(|(a, b)| [a, b]).collect();
    let heights: Vec<f64> = plane(2).collect();
    let mask = body[12 * n..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("mask byte {other} is not 0/1"))),
        })
        .collect::<Result<Vec<bool>>>()?;

    TactileFrame::new(
        geometry,
        Grid::from_vec(rows, cols, gradients)?,
        Grid::from_vec(rows, cols, heights)?,
        Grid::from_vec(rows, cols, mask)?,
        timestamp,
    )
}

pub fn save_frame(path: impl AsRef<Path>, f: &TactileFrame) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_frame(&mut w, f)?;
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<TactileFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_frame(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
