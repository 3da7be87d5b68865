//! Little-endian binary formats.
//!
//! Embeddings (`EMB1`): magic, u32 dim, u32 count, then `count` records of
//! `[u16 id length, id bytes, dim x f32]`.
//!
//! Index snapshot (`IVF1`): magic, u32 dim, u32 nlist, `nlist x dim` f32
//! centroids, then per list a u32 length followed by that many records in
//! the embedding record layout.

use std::io::{self, Read, Write};

use super::{ClipEmbedding, IvfIndex, RetrievalError};

const EMB_MAGIC: &[u8; 4] = b"EMB1";
const IVF_MAGIC: &[u8; 4] = b"IVF1";

fn read_u16(r: &mut impl Read) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> io::Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32s(w: &mut impl Write, v: &[f32]) -> io::Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_magic(r: &mut impl Read, expected: &[u8; 4]) -> Result<(), RetrievalError> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != expected {
        return Err(RetrievalError::Corrupt(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(expected)
        )));
    }
    Ok(())
}

fn read_record(r: &mut impl Read, dim: usize) -> Result<(String, Vec<f32>), RetrievalError> {
    let len = read_u16(r)? as usize;
    let mut id = vec![0u8; len];
    r.read_exact(&mut id)?;
    let id = String::from_utf8(id).map_err(|_| RetrievalError::Corrupt("clip id is not UTF-8".into()))?;
    Ok((id, read_f32s(r, dim)?))
}

fn write_record(w: &mut impl Write, e: &ClipEmbedding) -> Result<(), RetrievalError> {
    let id = e.clip_id().as_bytes();
    let len = u16::try_from(id.len()).map_err(|_| RetrievalError::InvalidId)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(id)?;
    write_f32s(w, e.vector())?;
    Ok(())
}

fn to_u32(n: usize, what: &str) -> Result<u32, RetrievalError> {
    u32::try_from(n).map_err(|_| RetrievalError::Corrupt(format!("{what} {n} does not fit in u32")))
}

/// Reads an embedding file; vectors are normalized on the way in.
pub fn read_embeddings(r: &mut impl Read) -> Result<Vec<ClipEmbedding>, RetrievalError> {
    read_magic(r, EMB_MAGIC)?;
    let dim = read_u32(r)? as usize;
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let (id, v) = read_record(r, dim)?;
        out.push(ClipEmbedding::new(id, &v)?);
    }
    Ok(out)
}

pub fn write_embeddings(w: &mut impl Write, embeddings: &[ClipEmbedding]) -> Result<(), RetrievalError> {
    let dim = embeddings.first().map_or(0, ClipEmbedding::dim);
    w.write_all(EMB_MAGIC)?;
    w.write_all(&to_u32(dim, "dimension")?.to_le_bytes())?;
    w.write_all(&to_u32(embeddings.len(), "count")?.to_le_bytes())?;
    for e in embeddings {
        if e.dim() != dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                got: e.dim(),
            });
        }
        write_record(w, e)?;
    }
    Ok(())
}

pub fn write_index(w: &mut impl Write, index: &IvfIndex) -> Result<(), RetrievalError> {
    w.write_all(IVF_MAGIC)?;
    w.write_all(&to_u32(index.dim(), "dimension")?.to_le_bytes())?;
    w.write_all(&to_u32(index.nlist(), "nlist")?.to_le_bytes())?;
    for c in index.centroids() {
        write_f32s(w, c)?;
    }
    for list in index.lists() {
        w.write_all(&to_u32(list.len(), "list length")?.to_le_bytes())?;
        for e in list {
            write_record(w, e)?;
        }
    }
    Ok(())
}

/// Reads a snapshot. Stored vectors are kept bit-for-bit and must already be unit length.
pub fn read_index(r: &mut impl Read) -> Result<IvfIndex, RetrievalError> {
    read_magic(r, IVF_MAGIC)?;
    let dim = read_u32(r)? as usize;
    let nlist = read_u32(r)? as usize;
    let mut centroids = Vec::with_capacity(nlist.min(1 << 16));
    for _ in 0..nlist {
        centroids.push(read_f32s(r, dim)?);
    }
    let mut lists = Vec::with_capacity(nlist.min(1 << 16));
    for _ in 0..nlist {
        let len = read_u32(r)? as usize;
        let mut list = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            let (id, v) = read_record(r, dim)?;
            list.push(ClipEmbedding::from_normalized(id, v)?);
        }
        lists.push(list);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(RetrievalError::Corrupt("trailing bytes after last list".into()));
    }
    IvfIndex::from_parts(dim, centroids, lists)
}
