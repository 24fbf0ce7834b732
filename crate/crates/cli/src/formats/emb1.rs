//! EMB1 embedding files: magic `EMB1`, u32 dim, u64 count, raw f32 rows,
//! then newline-separated UTF-8 row ids.

use anyhow::{bail, Context, Result};
use std::io::{Read, Write};

use glotvec_core::retrieval::EmbeddingMatrix;

const MAGIC: &[u8; 4] = b"EMB1";

pub fn write_embeddings<W: Write>(w: &mut W, m: &EmbeddingMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.dim() as u32).to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    for &v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for (i, id) in m.ids().iter().enumerate() {
        if i > 0 {
            w.write_all(b"\n")?;
        }
        w.write_all(id.as_bytes())?;
    }
    Ok(())
}

pub fn read_embeddings<R: Read>(r: &mut R) -> Result<EmbeddingMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).context("reading EMB1 magic")?;
    if &magic != MAGIC {
        bail!("bad embedding magic {magic:?}");
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let mut data = Vec::with_capacity(dim * count);
    let mut f32buf = [0u8; 4];
    for _ in 0..dim * count {
        r.read_exact(&mut f32buf)?;
        data.push(f32::from_le_bytes(f32buf));
    }
    let mut id_bytes = Vec::new();
    r.read_to_end(&mut id_bytes)?;
    let id_text = String::from_utf8(id_bytes).context("ids are not UTF-8")?;
    let ids: Vec<String> = if count == 0 {
        Vec::new()
    } else {
        id_text.split('\n').map(str::to_string).collect()
    };
    if ids.len() != count {
        bail!("embedding file declares {count} rows but carries {} ids", ids.len());
    }
    Ok(EmbeddingMatrix::new(dim, data, ids)?)
}
