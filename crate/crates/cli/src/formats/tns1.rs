//! TNS1 tensor snapshots: magic `TNS1`, u32 rank, u64 dims, raw f32 data.

use anyhow::{bail, Context, Result};
use std::io::{Read, Write};

use glotvec_core::Tensor;

const MAGIC: &[u8; 4] = b"TNS1";

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor<f32>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor<f32>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).context("reading TNS1 magic")?;
    if &magic != MAGIC {
        bail!("bad tensor magic {magic:?}");
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let rank = u32::from_le_bytes(u32buf) as usize;
    if rank > 8 {
        bail!("implausible tensor rank {rank}");
    }
    let mut shape = Vec::with_capacity(rank);
    let mut u64buf = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut u64buf)?;
        shape.push(u64::from_le_bytes(u64buf) as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    let mut f32buf = [0u8; 4];
    for _ in 0..len {
        r.read_exact(&mut f32buf)?;
        data.push(f32::from_le_bytes(f32buf));
    }
    Ok(Tensor::from_vec(&shape, data)?)
}
