//! The shared "CGWM" binary snapshot format.
//!
//! Layout (all integers and floats little-endian):
//!   magic "CGWM" | version u32 | m u32 | n u32 | margin u32 | h f64
//!   | base point: (m+1) f64 | block count u32
//!   | per block: name length u32, UTF-8 name bytes, components u32,
//!     payload n*n*components f64 (row-major over cells, fastest index x)
//!
//! Readers validate the header and, for the standard `phi0`/`phi1` blocks,
//! the sheet, tangency and margin invariants.

use crate::grid::{DataPair, GridSpec, MapField, TangentField};
use crate::hyperbolic::{minkowski_inner, HyperbolicPoint};
use crate::{CoreError, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"CGWM";
pub const VERSION: u32 = 1;

pub struct Snapshot {
    pub m: usize,
    pub spec: GridSpec,
    pub base: Vec<f64>,
    pub blocks: Vec<Block>,
}

pub struct Block {
    pub name: String,
    pub components: usize,
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn new(m: usize, spec: GridSpec, base: Vec<f64>) -> Self {
        Self {
            m,
            spec,
            base,
            blocks: Vec::new(),
        }
    }

    pub fn push_block(&mut self, name: &str, components: usize, data: Vec<f64>) {
        assert_eq!(data.len(), self.spec.cells() * components);
        self.blocks.push(Block {
            name: name.to_string(),
            components,
            data,
        });
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&(self.spec.n as u32).to_le_bytes())?;
        w.write_all(&(self.spec.margin as u32).to_le_bytes())?;
        w.write_all(&self.spec.h.to_le_bytes())?;
        for v in &self.base {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.blocks.len() as u32).to_le_bytes())?;
        for b in &self.blocks {
            let name = b.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(b.components as u32).to_le_bytes())?;
            for v in &b.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CoreError::Snapshot {
                reason: format!("bad magic {magic:?}"),
            });
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(CoreError::Snapshot {
                reason: format!("unsupported version {version}"),
            });
        }
        let m = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let margin = read_u32(r)? as usize;
        let h = read_f64(r)?;
        let spec = GridSpec::new(n, h, margin).map_err(|e| CoreError::Snapshot {
            reason: format!("invalid grid in header: {e}"),
        })?;
        let mut base = vec![0.0; m + 1];
        for v in base.iter_mut() {
            *v = read_f64(r)?;
        }
        let n_blocks = read_u32(r)? as usize;
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let name_len = read_u32(r)? as usize;
            if name_len > 256 {
                return Err(CoreError::Snapshot {
                    reason: format!("block name length {name_len}"),
                });
            }
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| CoreError::Snapshot {
                reason: "block name is not UTF-8".into(),
            })?;
            let components = read_u32(r)? as usize;
            let mut data = vec![0.0; spec.cells() * components];
            for v in data.iter_mut() {
                *v = read_f64(r)?;
            }
            blocks.push(Block {
                name,
                components,
                data,
            });
        }
        Ok(Self {
            m,
            spec,
            base,
            blocks,
        })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Write classical data as the standard two-block snapshot.
pub fn save_data_pair(d: &DataPair, path: &std::path::Path) -> Result<()> {
    let spec = *d.spec();
    let m = d.dim();
    let mut snap = Snapshot::new(m, spec, d.phi0.base().to_vec());
    snap.push_block("phi0", m + 1, d.phi0.data().to_vec());
    snap.push_block("phi1", m + 1, d.phi1.data().to_vec());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    snap.write_to(&mut f)
}

/// Load and validate classical data from a snapshot.
pub fn load_data_pair(path: &std::path::Path) -> Result<DataPair> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let snap = Snapshot::read_from(&mut f)?;
    let m = snap.m;
    let spec = snap.spec;
    let base = HyperbolicPoint::new(snap.base.clone()).map_err(|e| CoreError::Snapshot {
        reason: format!("invalid base point: {e}"),
    })?;
    let b0 = snap.block("phi0").ok_or_else(|| CoreError::Snapshot {
        reason: "missing phi0 block".into(),
    })?;
    let b1 = snap.block("phi1").ok_or_else(|| CoreError::Snapshot {
        reason: "missing phi1 block".into(),
    })?;
    if b0.components != m + 1 || b1.components != m + 1 {
        return Err(CoreError::Snapshot {
            reason: "unexpected component counts".into(),
        });
    }
    let mut phi0 = MapField::constant(spec, &base);
    phi0.data_mut().copy_from_slice(&b0.data);
    let mut phi1 = TangentField::zeros(&spec, m);
    phi1.data_mut().copy_from_slice(&b1.data);
    let d = DataPair { phi0, phi1 };
    d.validate().map_err(|e| CoreError::Snapshot {
        reason: format!("snapshot violates data invariants: {e}"),
    })?;
    Ok(d)
}

/// Write a single map slice (heat ladder checkpoints).
pub fn save_map_field(phi: &MapField, path: &std::path::Path) -> Result<()> {
    let mut snap = Snapshot::new(phi.dim(), *phi.spec(), phi.base().to_vec());
    snap.push_block("phi0", phi.dim() + 1, phi.data().to_vec());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    snap.write_to(&mut f)
}

/// Wave solver checkpoint: the two exact leapfrog levels for restart
/// (the step size is reconstructed from the run configuration as cfl * h).
pub fn save_wave_checkpoint(
    spec: &GridSpec,
    m: usize,
    base: &[f64],
    prev: &[f64],
    cur: &[f64],
    path: &std::path::Path,
) -> Result<()> {
    let mut snap = Snapshot::new(m, *spec, base.to_vec());
    snap.push_block("level_prev", m + 1, prev.to_vec());
    snap.push_block("level_cur", m + 1, cur.to_vec());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    snap.write_to(&mut f)
}

/// Check that every cell of a loaded phi0 block sits on the sheet.
pub fn validate_sheet(block: &Block, m: usize) -> Result<()> {
    for c in block.data.chunks(m + 1) {
        let sp = minkowski_inner(c, c);
        if !(sp + 1.0).is_finite() || (sp + 1.0).abs() > 1e-9 * (1.0 + c[0] * c[0]) {
            return Err(CoreError::Snapshot {
                reason: format!("off-sheet cell, <p,p> = {sp:.12e}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_geodesic_data;

    #[test]
    fn data_pair_round_trip_is_bitwise() {
        let spec = GridSpec::new(32, 16.0 / 32.0, 4).unwrap();
        let g = |x: f64, y: f64| 0.4 * (-(x * x + y * y) / 1.5).exp();
        let d = make_geodesic_data(spec, 2, &g, &g, &[0.6, 0.8]).unwrap();
        let dir = std::env::temp_dir().join(format!("cgwm-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pair.cgwm");
        save_data_pair(&d, &path).unwrap();
        let back = load_data_pair(&path).unwrap();
        assert_eq!(d.phi0.data(), back.phi0.data());
        assert_eq!(d.phi1.data(), back.phi1.data());
        assert_eq!(d.spec(), back.spec());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupted_snapshots_are_rejected() {
        let spec = GridSpec::new(32, 16.0 / 32.0, 4).unwrap();
        let d = DataPair::constant(spec, &HyperbolicPoint::basepoint(2));
        let dir = std::env::temp_dir().join(format!("cgwm-test2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pair.cgwm");
        save_data_pair(&d, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // bad magic
        let mut broken = bytes.clone();
        broken[0] = b'X';
        std::fs::write(&path, &broken).unwrap();
        assert!(load_data_pair(&path).is_err());
        // invariant violation: perturb a phi0 payload value away from the sheet
        let header = 4 + 4 + 4 + 4 + 4 + 8 + 3 * 8 + 4 + 4 + 4 + 4;
        let off = header + 8; // second coordinate of the first cell
        bytes[off..off + 8].copy_from_slice(&5.0f64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_data_pair(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
