use std::path::Path;

use super::{read_file, write_file, ByteReader};
use crate::error::Result;
use crate::grid::PointCloud;

pub const LPC_MAGIC: &[u8; 4] = b"LPC1";

/// Serializes a cloud: magic, point count, channel table, then `[x, y, z, intensity, aux...]` rows of f32.
pub fn encode_lpc(pc: &PointCloud) -> Vec<u8> {
    let c = pc.channels().len();
    let mut out = Vec::with_capacity(16 + pc.len() * (4 + c) * 4);
    out.extend_from_slice(LPC_MAGIC);
    out.extend_from_slice(&(pc.len() as u64).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    for name in pc.channels() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for i in 0..pc.len() {
        let p = pc.position(i);
        for v in p.iter().chain(std::iter::once(&pc.intensity(i))).chain(pc.aux(i)) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_lpc(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let mut r = ByteReader::new(bytes, path);
    let magic = r.take(4, "magic")?;
    if magic != LPC_MAGIC {
        return Err(r.error(0, format!("bad magic {magic:?}, expected LPC1")));
    }
    let count_at = r.pos();
    let count = r.u64("point count")?;
    let nch = r.u32("channel count")? as usize;
    let mut channels = Vec::with_capacity(nch.min(1024));
    for _ in 0..nch {
        let len = r.u32("channel name length")? as usize;
        let at = r.pos();
        let raw = r.take(len, "channel name")?;
        let name = std::str::from_utf8(raw).map_err(|_| r.error(at, "channel name is not UTF-8"))?;
        channels.push(name.to_string());
    }
    let row = 4 + nch;
    let needed = (count as u128) * (row as u128) * 4;
    let left = (bytes.len() - r.pos()) as u128;
    if needed != left {
        return Err(r.error(
            count_at,
            format!("point count {count} implies {needed} payload bytes, file has {left}"),
        ));
    }
    let mut pc = PointCloud::with_capacity(channels, count as usize);
    let mut vals = vec![0f64; row];
    for _ in 0..count {
        let at = r.pos();
        for v in vals.iter_mut() {
            *v = r.f32("point row")? as f64;
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(r.error(at, "non-finite point value"));
        }
        pc.push([vals[0], vals[1], vals[2]], vals[3], &vals[4..])?;
    }
    r.finish()?;
    Ok(pc)
}

pub fn write_lpc(path: &Path, pc: &PointCloud) -> Result<()> {
    write_file(path, &encode_lpc(pc))
}

pub fn read_lpc(path: &Path) -> Result<PointCloud> {
    decode_lpc(&read_file(path)?, path)
}
