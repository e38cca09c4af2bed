//! Binary field snapshots.
//!
//! Layout: `PHI4FLD1`, u32 d, u32 n, u8 flag (0 physical, 1 spectral), then
//! little-endian f64 values or interleaved re/im over the full cube.

use super::{Field, GridSpec, C64};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path as FsPath;

pub const MAGIC: &[u8; 8] = b"PHI4FLD1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Physical = 0,
    Spectral = 1,
}

pub fn write_field<W: Write>(w: &mut W, f: &Field, repr: Representation) -> Result<()> {
    let g = f.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.d() as u32).to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&[repr as u8])?;
    let mut bytes = Vec::with_capacity(g.len() * 16);
    match repr {
        Representation::Physical => {
            for v in f.values() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Representation::Spectral => {
            for c in f.coeffs() {
                bytes.extend_from_slice(&c.re.to_le_bytes());
                bytes.extend_from_slice(&c.im.to_le_bytes());
            }
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_field<R: Read>(r: &mut R) -> Result<Field> {
    let mut head = [0u8; 17];
    r.read_exact(&mut head)?;
    if &head[..8] != MAGIC {
        return Err(Error::Format("missing PHI4FLD1 magic".into()));
    }
    let d = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(head[12..16].try_into().expect("4 bytes")) as usize;
    let grid = GridSpec::new(d, n).map_err(|e| Error::Format(e.to_string()))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let f64s = |b: &[u8]| -> Vec<f64> {
        b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    match head[16] {
        0 => {
            if rest.len() != grid.len() * 8 {
                return Err(Error::Format("truncated physical payload".into()));
            }
            Field::from_values(grid, f64s(&rest))
        }
        1 => {
            if rest.len() != grid.len() * 16 {
                return Err(Error::Format("truncated spectral payload".into()));
            }
            let v = f64s(&rest);
            let c = v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
            Field::from_coeffs(grid, c)
        }
        x => Err(Error::Format(format!("unknown representation flag {x}"))),
    }
}

pub fn save(path: &FsPath, f: &Field, repr: Representation) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut file, f, repr)?;
    file.flush()?;
    Ok(())
}

pub fn load(path: &FsPath) -> Result<Field> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut file)
}
