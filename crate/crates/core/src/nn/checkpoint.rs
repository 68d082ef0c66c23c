//! Model checkpoint file format.
//!
//! A checkpoint is a single binary file, little-endian throughout:
//!
//! ```text
//! magic       8 bytes  "SIGSHCKP"
//! version     u32      currently 1
//! config_len  u32      length of the model-config JSON
//! config      bytes    UTF-8 JSON describing the architecture
//! n_entries   u32
//! entry*      repeated n_entries times:
//!   name_len  u16
//!   name      bytes    UTF-8
//!   kind      u8       0 = learnable parameter, 1 = running statistic
//!   ndim      u8
//!   dims      u32 * ndim
//!   data      f64 * prod(dims)
//! ```
//!
//! Serialization is fully deterministic: entry order is the model's
//! construction order, so two runs with identical seeds produce
//! byte-identical files.

use super::NnError;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SIGSHCKP";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Parameter,
    RunningStat,
}

#[derive(Debug, Clone)]
pub struct CheckpointEntry {
    pub name: String,
    pub kind: EntryKind,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Architecture config plus the flat list of tensors.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_json: String,
    pub entries: Vec<CheckpointEntry>,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), NnError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let cfg = ckpt.config_json.as_bytes();
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(cfg);
    buf.extend_from_slice(&(ckpt.entries.len() as u32).to_le_bytes());
    for e in &ckpt.entries {
        let name = e.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(match e.kind {
            EntryKind::Parameter => 0,
            EntryKind::RunningStat => 1,
        });
        buf.push(e.shape.len() as u8);
        for &d in &e.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        debug_assert_eq!(e.shape.iter().product::<usize>(), e.data.len());
        for &v in &e.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::MalformedCheckpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let mut raw = Vec::new();
    fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut cur = Cursor { buf: &raw, pos: 0 };

    if cur.take(8)? != MAGIC {
        return Err(NnError::MalformedCheckpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::MalformedCheckpoint(format!("unsupported version {version}")));
    }
    let cfg_len = cur.u32()? as usize;
    let config_json = String::from_utf8(cur.take(cfg_len)?.to_vec())
        .map_err(|_| NnError::MalformedCheckpoint("config is not UTF-8".into()))?;

    let n_entries = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| NnError::MalformedCheckpoint("entry name is not UTF-8".into()))?;
        let kind = match cur.u8()? {
            0 => EntryKind::Parameter,
            1 => EntryKind::RunningStat,
            k => return Err(NnError::MalformedCheckpoint(format!("unknown entry kind {k}"))),
        };
        let ndim = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
        }
        entries.push(CheckpointEntry { name, kind, shape, data });
    }
    Ok(Checkpoint { config_json, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_everything() {
        let ckpt = Checkpoint {
            config_json: r#"{"arch":"test"}"#.to_string(),
            entries: vec![
                CheckpointEntry {
                    name: "layer.w".into(),
                    kind: EntryKind::Parameter,
                    shape: vec![2, 3],
                    data: vec![1.0, -2.5, 3.25, 0.0, f64::MIN_POSITIVE, 1e300],
                },
                CheckpointEntry {
                    name: "bn.mean".into(),
                    kind: EntryKind::RunningStat,
                    shape: vec![2],
                    data: vec![0.5, -0.5],
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.config_json, ckpt.config_json);
        assert_eq!(back.entries.len(), 2);
        for (a, b) in back.entries.iter().zip(&ckpt.entries) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.shape, b.shape);
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn serialization_is_byte_deterministic() {
        let ckpt = Checkpoint {
            config_json: "{}".into(),
            entries: vec![CheckpointEntry {
                name: "w".into(),
                kind: EntryKind::Parameter,
                shape: vec![4],
                data: vec![0.1, 0.2, 0.3, 0.4],
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        save_checkpoint(&ckpt, &p1).unwrap();
        save_checkpoint(&ckpt, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(NnError::MalformedCheckpoint(_))));
    }
}
