//! Binary and JSON containers for [`DensityField`].
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "LIOU"
//!      4     2  version (u16)
//!      6     2  axes M (u16)
//!      8     4  levels n (u32)
//!     12     4  reserved (u32, zero)
//!     16     8  u_min (f64)
//!     24     8  u_max (f64)
//!     32  8n^M  cell masses (f64), axis 0 slowest
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DensityField, PhaseGrid};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"LIOU";
pub const BINARY_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct FieldJson {
    axes: usize,
    levels: usize,
    u_min: f64,
    u_max: f64,
    values: Vec<f64>,
}

impl DensityField {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        w.write_all(&BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(g.axes() as u16).to_le_bytes())?;
        w.write_all(&(g.levels() as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&g.u_min().to_le_bytes())?;
        w.write_all(&g.u_max().to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values().len() * 8);
        for v in self.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.values().len() * 8);
        self.write_binary(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 32];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        if header[0..4] != BINARY_MAGIC {
            return Err(Error::Format("bad magic, expected \"LIOU\"".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != BINARY_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let axes = u16::from_le_bytes([header[6], header[7]]) as usize;
        let levels = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let u_min = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let u_max = f64::from_le_bytes(header[24..32].try_into().unwrap());
        let grid = PhaseGrid::new(axes, levels, u_min, u_max)?;
        let mut raw = vec![0u8; grid.cell_count() * 8];
        r.read_exact(&mut raw)
            .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DensityField::new(grid, values)
    }

    pub fn to_json(&self) -> Result<String> {
        let g = self.grid();
        Ok(serde_json::to_string(&FieldJson {
            axes: g.axes(),
            levels: g.levels(),
            u_min: g.u_min(),
            u_max: g.u_max(),
            values: self.values().to_vec(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: FieldJson = serde_json::from_str(s)?;
        let grid = PhaseGrid::new(f.axes, f.levels, f.u_min, f.u_max)?;
        DensityField::new(grid, f.values)
    }
}
