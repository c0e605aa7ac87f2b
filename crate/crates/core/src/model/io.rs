//! MOFW weight files.
//!
//! Little-endian binary: magic `MOFW`, u32 version (=1), u32 entry count,
//! then per entry: u16 name length + UTF-8 name, u8 rank, rank×u32 dims,
//! f32 data in row-major order; trailing u32 IEEE CRC32 of everything before
//! it. Entries are written in a fixed order (meta block, then per layer:
//! weights, bias, Adam moments, step), so save→load→save is byte-identical.

use super::{build_zeroed, Arch, ModelConfig, ModelWeights, UNITS};
use crate::error::{Error, Result};
use crate::motion::io::write_atomic;
use crate::nn::LayerParams;
use crate::tensor::Tensor4;
use std::collections::HashMap;
use std::path::Path;

// ── CRC32 (IEEE reflected, poly 0xEDB88320) ──────────────────────────────────

const fn crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

static CRC_TABLE: [u32; 256] = crc_table();

pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

// ── writing ──────────────────────────────────────────────────────────────────

fn push_entry(buf: &mut Vec<u8>, name: &str, dims: &[u32], data: &[f32]) {
    debug_assert_eq!(
        dims.iter().map(|&d| d as usize).product::<usize>(),
        data.len()
    );
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.push(dims.len() as u8);
    for &d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor4<f32>) {
    let dims: Vec<u32> = t.shape().iter().map(|&d| d as u32).collect();
    push_entry(buf, name, &dims, t.data());
}

fn push_vec(buf: &mut Vec<u8>, name: &str, v: &[f32]) {
    push_entry(buf, name, &[v.len() as u32], v);
}

/// Entries per parameterized layer (weights, bias, four moments, step).
const LAYER_ENTRIES: u32 = 7;
const META_ENTRIES: u32 = 5;

pub fn encode_weights(weights: &ModelWeights<f32>) -> Vec<u8> {
    let layer_count = weights.param_layers().count() as u32;
    let mut buf = Vec::with_capacity(weights.param_count() * 12 + 4096);
    buf.extend_from_slice(b"MOFW");
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&(META_ENTRIES + layer_count * LAYER_ENTRIES).to_le_bytes());

    let cfg = &weights.config;
    let arch = match cfg.arch {
        Arch::Full => 0.0f32,
        Arch::Vanilla => 1.0,
    };
    push_vec(&mut buf, "meta.arch", &[arch]);
    let channels: Vec<f32> = cfg.channels.iter().map(|&c| c as f32).collect();
    push_vec(&mut buf, "meta.channels", &channels);
    push_vec(&mut buf, "meta.leaky_slope", &[cfg.leaky_slope]);
    push_vec(&mut buf, "meta.input_rows", &[cfg.input_rows as f32]);
    push_vec(&mut buf, "meta.trained_epochs", &[weights.trained_epochs as f32]);

    for p in weights.param_layers() {
        push_tensor(&mut buf, &p.name, &p.weights);
        push_vec(&mut buf, &format!("{}.bias", p.name), &p.bias);
        push_tensor(&mut buf, &format!("{}.adam_m", p.name), &p.adam_m);
        push_tensor(&mut buf, &format!("{}.adam_v", p.name), &p.adam_v);
        push_vec(&mut buf, &format!("{}.adam_mb", p.name), &p.adam_mb);
        push_vec(&mut buf, &format!("{}.adam_vb", p.name), &p.adam_vb);
        push_vec(&mut buf, &format!("{}.step", p.name), &[p.step as f32]);
    }

    let crc = crc32(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn save_weights(weights: &ModelWeights<f32>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_weights(weights))
}

// ── reading ──────────────────────────────────────────────────────────────────

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::WeightFile {
            path: self.path.display().to_string(),
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err(format!(
                "truncated: need {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

struct RawEntry {
    dims: Vec<u32>,
    data: Vec<f32>,
    offset: usize,
}

fn parse_entries(reader: &mut Reader, count: u32) -> Result<HashMap<String, RawEntry>> {
    let mut entries = HashMap::with_capacity(count as usize);
    for _ in 0..count {
        let offset = reader.pos;
        let name_len = reader.u16()? as usize;
        let name = std::str::from_utf8(reader.take(name_len)?)
            .map_err(|_| {
                let e = Reader {
                    bytes: reader.bytes,
                    pos: offset,
                    path: reader.path,
                };
                e.err("entry name is not UTF-8")
            })?
            .to_string();
        let rank = reader.u8()? as usize;
        if rank == 0 || rank > 4 {
            return Err(reader.err(format!("entry `{name}`: bad rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut len = 1usize;
        for _ in 0..rank {
            let d = reader.u32()?;
            len = len
                .checked_mul(d as usize)
                .ok_or_else(|| reader.err(format!("entry `{name}`: dim overflow")))?;
            dims.push(d);
        }
        let raw = reader.take(len * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if entries
            .insert(name.clone(), RawEntry { dims, data, offset })
            .is_some()
        {
            return Err(reader.err(format!("duplicate entry `{name}`")));
        }
    }
    Ok(entries)
}

fn scalar(entries: &HashMap<String, RawEntry>, name: &str, path: &Path) -> Result<f32> {
    let e = entries.get(name).ok_or_else(|| Error::WeightFile {
        path: path.display().to_string(),
        offset: 0,
        msg: format!("missing entry `{name}`"),
    })?;
    if e.data.len() != 1 {
        return Err(Error::WeightFile {
            path: path.display().to_string(),
            offset: e.offset,
            msg: format!("entry `{name}` must hold one value, has {}", e.data.len()),
        });
    }
    Ok(e.data[0])
}

fn fill_layer(
    p: &mut LayerParams<f32>,
    entries: &HashMap<String, RawEntry>,
    consumed: &mut usize,
    path: &Path,
) -> Result<()> {
    let file_err = |offset: usize, msg: String| Error::WeightFile {
        path: path.display().to_string(),
        offset,
        msg,
    };
    let tensor = |name: String, expect: [usize; 4], consumed: &mut usize| -> Result<Tensor4<f32>> {
        let e = entries
            .get(&name)
            .ok_or_else(|| file_err(0, format!("missing entry `{name}`")))?;
        let dims: Vec<usize> = e.dims.iter().map(|&d| d as usize).collect();
        if dims != expect {
            return Err(file_err(
                e.offset,
                format!("entry `{name}`: shape {dims:?} does not match layer shape {expect:?}"),
            ));
        }
        *consumed += 1;
        Tensor4::from_vec(expect, e.data.clone())
    };
    let vector = |name: String, expect: usize, consumed: &mut usize| -> Result<Vec<f32>> {
        let e = entries
            .get(&name)
            .ok_or_else(|| file_err(0, format!("missing entry `{name}`")))?;
        if e.dims.len() != 1 || e.data.len() != expect {
            return Err(file_err(
                e.offset,
                format!("entry `{name}`: length {} does not match {expect}", e.data.len()),
            ));
        }
        *consumed += 1;
        Ok(e.data.clone())
    };

    let shape = p.weights.shape();
    p.weights = tensor(p.name.clone(), shape, consumed)?;
    p.bias = vector(format!("{}.bias", p.name), p.bias.len(), consumed)?;
    p.adam_m = tensor(format!("{}.adam_m", p.name), shape, consumed)?;
    p.adam_v = tensor(format!("{}.adam_v", p.name), shape, consumed)?;
    p.adam_mb = vector(format!("{}.adam_mb", p.name), p.bias.len(), consumed)?;
    p.adam_vb = vector(format!("{}.adam_vb", p.name), p.bias.len(), consumed)?;
    let step = vector(format!("{}.step", p.name), 1, consumed)?[0];
    if step < 0.0 || step.fract() != 0.0 {
        return Err(file_err(0, format!("entry `{}.step`: bad counter {step}", p.name)));
    }
    p.step = step as u64;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<ModelWeights<f32>> {
    let bytes = std::fs::read(path)?;
    let mut reader = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if reader.take(4)? != b"MOFW" {
        reader.pos = 0;
        return Err(reader.err("bad magic (expected MOFW)"));
    }
    let version = reader.u32()?;
    if version != 1 {
        reader.pos = 4;
        return Err(reader.err(format!("unsupported version {version}")));
    }
    if bytes.len() < 16 {
        return Err(reader.err("file too short for checksum"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let actual = crc32(body);
    if stored != actual {
        reader.pos = bytes.len() - 4;
        return Err(reader.err(format!(
            "checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }
    let count = reader.u32()?;
    let entries = parse_entries(&mut reader, count)?;
    if reader.pos != bytes.len() - 4 {
        return Err(reader.err("trailing bytes after final entry"));
    }

    let arch = match scalar(&entries, "meta.arch", path)? {
        v if v == 0.0 => Arch::Full,
        v if v == 1.0 => Arch::Vanilla,
        v => {
            return Err(Error::WeightFile {
                path: path.display().to_string(),
                offset: entries["meta.arch"].offset,
                msg: format!("unknown architecture tag {v}"),
            })
        }
    };
    let ch = entries.get("meta.channels").ok_or_else(|| Error::WeightFile {
        path: path.display().to_string(),
        offset: 0,
        msg: "missing entry `meta.channels`".into(),
    })?;
    if ch.data.len() != UNITS {
        return Err(Error::WeightFile {
            path: path.display().to_string(),
            offset: ch.offset,
            msg: format!("meta.channels must hold {UNITS} values"),
        });
    }
    let mut channels = [0usize; UNITS];
    for (c, &v) in channels.iter_mut().zip(&ch.data) {
        *c = v as usize;
    }
    let config = ModelConfig {
        channels,
        leaky_slope: scalar(&entries, "meta.leaky_slope", path)?,
        input_rows: scalar(&entries, "meta.input_rows", path)? as usize,
        arch,
    };
    config.validate()?;
    let trained_epochs = scalar(&entries, "meta.trained_epochs", path)? as u32;

    let mut weights = build_zeroed(&config)?;
    weights.trained_epochs = trained_epochs;
    let mut consumed = META_ENTRIES as usize;
    for stack in [&mut weights.encoder, &mut weights.decoder] {
        for layer in &mut stack.layers {
            if let Some(p) = layer.params_mut() {
                fill_layer(p, &entries, &mut consumed, path)?;
            }
        }
    }
    if consumed != entries.len() {
        return Err(Error::WeightFile {
            path: path.display().to_string(),
            offset: 0,
            msg: format!(
                "{} entries in file but {consumed} expected by the architecture",
                entries.len()
            ),
        });
    }
    Ok(weights)
}
