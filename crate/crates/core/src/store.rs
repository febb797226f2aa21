//! Persistent hash store: one file holding per-video hash records.
//!
//! The file is an append-only log. Each [`put`] appends the record and a fresh
//! index footer; readers only trust the last footer, so older footers and
//! superseded records become dead bytes. Every frame carries a CRC-32 of its
//! payload, which makes torn or corrupted writes detectable.
//!
//! ```text
//! header   "TVHS" | version: u8 (=1)
//! frame    kind: u8 | payload_len: u32 LE | payload | crc32(payload): u32 LE
//! trailer  footer_offset: u64 LE | "TVHE"
//! ```
//!
//! Frame kinds are `R` (record) and `I` (index). Record payload, all integers
//! little-endian and all floats IEEE-754 binary64 little-endian:
//!
//! ```text
//! id_len: u32 | id: utf-8 | fingerprint: [u8; 32]
//! frame_count: u32 | frame_count * (horizontal: f64, vertical: f64)
//! flow_kind: u8 (0 = hash, 1 = zero sentinel) | bins: u32 | len: u32 | len * f64
//! ```
//!
//! Index payload: `count: u32`, then per record (sorted by id)
//! `id_len: u32 | id | record_offset: u64`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowHash;
use crate::frame_hash::FrameHashSeries;

pub const STORE_MAGIC: &[u8; 4] = b"TVHS";
const TRAILER_MAGIC: &[u8; 4] = b"TVHE";
const VERSION: u8 = 1;
const HEADER_LEN: u64 = 5;
const TRAILER_LEN: usize = 12;

/// SHA-256 digest of a canonical configuration description.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn of(description: &str) -> Self {
        use sha2::{Digest, Sha256};
        Fingerprint(Sha256::digest(description.as_bytes()).into())
    }

    pub fn short(&self) -> String {
        self.0[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.short())
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashRecord {
    pub source_id: String,
    pub frame_hashes: FrameHashSeries,
    /// All zeros for static videos.
    pub flow_hash: FlowHash,
    pub config_fingerprint: Fingerprint,
}

impl HashRecord {
    /// Fails unless both records were produced under the same configuration.
    pub fn ensure_compatible(&self, other: &HashRecord) -> Result<()> {
        self.ensure_fingerprint(&other.config_fingerprint, &other.source_id)
    }

    pub fn ensure_fingerprint(&self, fingerprint: &Fingerprint, other_name: &str) -> Result<()> {
        if self.config_fingerprint != *fingerprint {
            return Err(Error::FingerprintMismatch(
                format!("{} ({})", self.source_id, self.config_fingerprint.short()),
                format!("{other_name} ({})", fingerprint.short()),
            ));
        }
        Ok(())
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_str(&mut out, &self.source_id);
        out.extend_from_slice(&self.config_fingerprint.0);
        out.extend_from_slice(&(self.frame_hashes.frame_count() as u32).to_le_bytes());
        for v in self.frame_hashes.flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(u8::from(self.flow_hash.is_zero()));
        out.extend_from_slice(&(self.flow_hash.bins() as u32).to_le_bytes());
        out.extend_from_slice(&(self.flow_hash.len() as u32).to_le_bytes());
        for v in self.flow_hash.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn decode(payload: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: payload, pos: 0 };
        let source_id = r.string()?;
        let fingerprint = Fingerprint(r.take(32)?.try_into().unwrap());
        let frames = r.u32()? as usize;
        let flat = r.f64s(2 * frames)?;
        let _sentinel = r.take(1)?[0];
        let bins = r.u32()? as usize;
        let len = r.u32()? as usize;
        if bins == 0 || !len.is_multiple_of(bins) {
            return Err(Error::CorruptStore(format!("record {source_id}: flow hash of {len} values with {bins} bins")));
        }
        let values = r.f64s(len)?;
        if r.pos != payload.len() {
            return Err(Error::CorruptStore(format!("record {source_id} has trailing bytes")));
        }
        Ok(HashRecord {
            source_id,
            frame_hashes: FrameHashSeries::from_flat(&flat)?,
            flow_hash: FlowHash::new(values, bins),
            config_fingerprint: fingerprint,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CorruptStore("payload is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::CorruptStore("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::CorruptStore("identifier is not UTF-8".into()))
    }
}

fn frame(kind: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 9);
    out.push(kind);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

fn read_frame(bytes: &[u8], offset: u64, expected_kind: u8) -> Result<&[u8]> {
    let offset = usize::try_from(offset).map_err(|_| Error::CorruptStore("offset overflow".into()))?;
    let mut r = Reader { buf: bytes, pos: offset };
    let kind = r.take(1)?[0];
    if kind != expected_kind {
        return Err(Error::CorruptStore(format!("frame at {offset} has kind {kind:#04x}")));
    }
    let len = r.u32()? as usize;
    let payload = r.take(len)?;
    let crc = r.u32()?;
    if crc != crc32fast::hash(payload) {
        return Err(Error::CorruptStore(format!("checksum mismatch in frame at {offset}")));
    }
    Ok(payload)
}

/// Loads the index of the last committed footer.
fn read_index(bytes: &[u8]) -> Result<BTreeMap<String, u64>> {
    if bytes.len() < HEADER_LEN as usize || &bytes[..4] != STORE_MAGIC {
        return Err(Error::CorruptStore("missing TVHS header".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::CorruptStore(format!("unsupported store version {}", bytes[4])));
    }
    if bytes.len() == HEADER_LEN as usize {
        return Ok(BTreeMap::new());
    }
    if bytes.len() < HEADER_LEN as usize + TRAILER_LEN || &bytes[bytes.len() - 4..] != TRAILER_MAGIC {
        return Err(Error::CorruptStore("missing trailer; the last write did not complete".into()));
    }
    let at = bytes.len() - TRAILER_LEN;
    let footer = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let payload = read_frame(bytes, footer, b'I')?;
    let mut r = Reader { buf: payload, pos: 0 };
    let count = r.u32()?;
    let mut index = BTreeMap::new();
    for _ in 0..count {
        let id = r.string()?;
        let offset = r.u64()?;
        index.insert(id, offset);
    }
    Ok(index)
}

/// Appends (or replaces) a record, creating the store if needed.
pub fn put(record: &HashRecord, store: impl AsRef<Path>) -> Result<()> {
    let path = store.as_ref();
    let existing = match fs::read(path) {
        Ok(bytes) => Some(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let mut index = match &existing {
        Some(bytes) => read_index(bytes)?,
        None => BTreeMap::new(),
    };
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut offset = file.seek(SeekFrom::End(0))?;
    let mut out = Vec::new();
    if existing.is_none() || offset == 0 {
        out.extend_from_slice(STORE_MAGIC);
        out.push(VERSION);
        offset = 0;
    }
    let record_offset = offset + out.len() as u64;
    out.extend(frame(b'R', &record.encode()));
    index.insert(record.source_id.clone(), record_offset);

    let footer_offset = offset + out.len() as u64;
    let mut payload = (index.len() as u32).to_le_bytes().to_vec();
    for (id, off) in &index {
        put_str(&mut payload, id);
        payload.extend_from_slice(&off.to_le_bytes());
    }
    out.extend(frame(b'I', &payload));
    out.extend_from_slice(&footer_offset.to_le_bytes());
    out.extend_from_slice(TRAILER_MAGIC);
    file.write_all(&out)?;
    file.sync_all()?;
    Ok(())
}

pub fn get(source_id: &str, store: impl AsRef<Path>) -> Result<HashRecord> {
    let bytes = fs::read(store)?;
    let index = read_index(&bytes)?;
    let offset = *index.get(source_id).ok_or_else(|| Error::NotFound(source_id.to_owned()))?;
    let record = HashRecord::decode(read_frame(&bytes, offset, b'R')?)?;
    if record.source_id != source_id {
        return Err(Error::CorruptStore(format!("index entry {source_id} points at record {}", record.source_id)));
    }
    Ok(record)
}

/// Sorted, duplicate-free record identifiers.
pub fn list(store: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(read_index(&fs::read(store)?)?.into_keys().collect())
}

/// True when the file at `path` starts with the store magic.
pub fn is_store(path: impl AsRef<Path>) -> bool {
    let mut magic = [0u8; 4];
    fs::File::open(path).and_then(|mut f| std::io::Read::read_exact(&mut f, &mut magic)).is_ok() && &magic == STORE_MAGIC
}
