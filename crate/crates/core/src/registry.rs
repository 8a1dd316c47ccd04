//! Snapshot persistence: one file captures a whole engine session.
//!
//! File layout, little-endian throughout:
//!
//! ```text
//! offset 0   magic bytes `SLK1`
//! offset 4   format version, u32 (currently 1)
//! offset 8   record stream: repeated [u32 length][payload bytes]
//! tail       u32 CRC-32 (IEEE) over the whole record stream
//! ```
//!
//! The stream holds exactly six records in fixed order - clock, VIM
//! registry, orchestrator, tenant tree, fabric, metric store - each a JSON
//! payload. A truncated file, a bad checksum or an undecodable record all
//! surface as `CorruptSnapshot`; a version other than 1 is
//! `UnsupportedVersion`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::engine::Engine;

pub const MAGIC: &[u8; 4] = b"SLK1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("io: {0}")]
    Io(String),
}

fn crc32(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for byte in data {
        crc ^= u32::from(*byte);
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

fn push_record<T: Serialize>(stream: &mut Vec<u8>, value: &T) -> Result<(), SnapshotError> {
    let payload = serde_json::to_vec(value).map_err(|e| SnapshotError::Io(e.to_string()))?;
    stream.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    stream.extend_from_slice(&payload);
    Ok(())
}

struct RecordReader<'a> {
    stream: &'a [u8],
    pos: usize,
}

impl<'a> RecordReader<'a> {
    fn next<T: DeserializeOwned>(&mut self, what: &str) -> Result<T, SnapshotError> {
        let corrupt = |msg: String| SnapshotError::CorruptSnapshot(msg);
        if self.pos + 4 > self.stream.len() {
            return Err(corrupt(format!("record stream truncated before `{what}`")));
        }
        let len = u32::from_le_bytes(self.stream[self.pos..self.pos + 4].try_into().expect("4 bytes")) as usize;
        self.pos += 4;
        if self.pos + len > self.stream.len() {
            return Err(corrupt(format!("record `{what}` truncated")));
        }
        let payload = &self.stream[self.pos..self.pos + len];
        self.pos += len;
        serde_json::from_slice(payload).map_err(|e| corrupt(format!("record `{what}` undecodable: {e}")))
    }
}

pub fn to_bytes(engine: &Engine) -> Result<Vec<u8>, SnapshotError> {
    let mut stream = Vec::new();
    push_record(&mut stream, &engine.clock())?;
    push_record(&mut stream, &engine.vims)?;
    push_record(&mut stream, &engine.orchestrator)?;
    push_record(&mut stream, &engine.tenants)?;
    push_record(&mut stream, &engine.fabric)?;
    push_record(&mut stream, &engine.metrics)?;

    let mut out = Vec::with_capacity(stream.len() + 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&stream);
    out.extend_from_slice(&crc32(&stream).to_le_bytes());
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Engine, SnapshotError> {
    let corrupt = |msg: &str| SnapshotError::CorruptSnapshot(msg.to_string());
    if bytes.len() < 12 {
        return Err(corrupt("file shorter than header and checksum"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let stream = &bytes[8..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    if crc32(stream) != stored_crc {
        return Err(corrupt("checksum mismatch"));
    }

    let mut reader = RecordReader { stream, pos: 0 };
    let clock: u64 = reader.next("clock")?;
    let mut engine = Engine {
        vims: reader.next("vims")?,
        orchestrator: reader.next("orchestrator")?,
        tenants: reader.next("tenants")?,
        fabric: reader.next("fabric")?,
        metrics: reader.next("metrics")?,
        ..Engine::new()
    };
    if reader.pos != stream.len() {
        return Err(corrupt("trailing bytes after final record"));
    }
    engine.set_clock(clock);
    Ok(engine)
}

pub fn save(engine: &Engine, path: &Path) -> Result<(), SnapshotError> {
    let bytes = to_bytes(engine)?;
    std::fs::write(path, bytes).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Engine, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))?;
    from_bytes(&bytes)
}
