//! Binary index snapshot.
//!
//! All integers are little-endian; strings are a `u32` byte length followed
//! by UTF-8 bytes.
//!
//! ```text
//! magic      8 bytes   "ARAGIDX1"
//! flags      u8        bit 0 = stemming, bit 1 = stopword removal
//! k1, b      f64, f64
//! doc_count  u64
//! doc_count × { doc_id: str, title: str, text: str, length: u32 }
//! term_count u64
//! term_count × { term: str, n: u32, n × { ordinal: u32, tf: u32 } }
//! ```
//!
//! Terms are written in byte order so identical indexes produce identical
//! files.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Bm25Params, InvertedIndex, Posting, SearchIndex, TokenizerConfig};
use crate::corpus::{CorpusStats, Document};

pub const MAGIC: &[u8; 8] = b"ARAGIDX1";
const MAGIC_FAMILY: &[u8; 7] = b"ARAGIDX";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an index snapshot (bad magic bytes)")]
    BadMagic,
    #[error("unsupported index snapshot version {found:?} (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },
    #[error("corrupt index snapshot: {0}")]
    Corrupt(String),
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| SnapshotError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, SnapshotError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| SnapshotError::Corrupt(format!("invalid UTF-8 before byte {}", self.pos)))
    }
    fn count(&mut self) -> Result<usize, SnapshotError> {
        let n = self.u64()?;
        // Every entry takes at least 4 bytes, which bounds any honest count.
        if n > (self.buf.len() - self.pos) as u64 / 4 + 1 {
            return Err(SnapshotError::Corrupt(format!("implausible count {n}")));
        }
        Ok(n as usize)
    }
}

pub fn encode(search: &SearchIndex) -> Vec<u8> {
    let index = search.index();
    let mut enc = Encoder(Vec::new());
    enc.0.extend_from_slice(MAGIC);
    let tok = index.tokenizer();
    enc.u8(u8::from(tok.stem) | (u8::from(tok.remove_stopwords) << 1));
    enc.f64(index.params().k1);
    enc.f64(index.params().b);
    enc.u64(search.documents().len() as u64);
    for (doc, &len) in search.documents().iter().zip(index.doc_lengths()) {
        enc.str(&doc.doc_id);
        enc.str(&doc.title);
        enc.str(&doc.text);
        enc.u32(len);
    }
    let mut terms: Vec<&str> = index.terms().collect();
    terms.sort_unstable();
    enc.u64(terms.len() as u64);
    for term in terms {
        let list = index.postings(term);
        enc.str(term);
        enc.u32(list.len() as u32);
        for p in list {
            enc.u32(p.doc);
            enc.u32(p.tf);
        }
    }
    enc.0
}

pub fn decode(bytes: &[u8]) -> Result<SearchIndex, SnapshotError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC_FAMILY.len()] != MAGIC_FAMILY {
        return Err(SnapshotError::BadMagic);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(SnapshotError::VersionMismatch {
            found: String::from_utf8_lossy(&bytes[..MAGIC.len()]).into_owned(),
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
        });
    }
    let mut dec = Decoder {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let flags = dec.u8()?;
    if flags & !0b11 != 0 {
        return Err(SnapshotError::Corrupt(format!("unknown flags {flags:#04x}")));
    }
    let tokenizer = TokenizerConfig {
        stem: flags & 1 != 0,
        remove_stopwords: flags & 2 != 0,
    };
    let params = Bm25Params {
        k1: dec.f64()?,
        b: dec.f64()?,
    }
    .validate()
    .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;

    let doc_count = dec.count()?;
    let mut docs = Vec::with_capacity(doc_count);
    let mut doc_lengths = Vec::with_capacity(doc_count);
    for _ in 0..doc_count {
        docs.push(Document {
            doc_id: dec.str()?,
            title: dec.str()?,
            text: dec.str()?,
        });
        doc_lengths.push(dec.u32()?);
    }

    let term_count = dec.count()?;
    let mut postings = HashMap::with_capacity(term_count);
    for _ in 0..term_count {
        let term = dec.str()?;
        let n = dec.u32()? as usize;
        let mut list = Vec::with_capacity(n.min(doc_count));
        for _ in 0..n {
            let p = Posting {
                doc: dec.u32()?,
                tf: dec.u32()?,
            };
            let in_order = list.last().is_none_or(|prev: &Posting| prev.doc < p.doc);
            if p.tf == 0 || p.doc as usize >= doc_count || !in_order {
                return Err(SnapshotError::Corrupt(format!(
                    "invalid posting for term {term:?}"
                )));
            }
            list.push(p);
        }
        if postings.insert(term.clone(), list).is_some() {
            return Err(SnapshotError::Corrupt(format!("duplicate term {term:?}")));
        }
    }
    if dec.pos != bytes.len() {
        return Err(SnapshotError::Corrupt(format!(
            "{} trailing bytes",
            bytes.len() - dec.pos
        )));
    }

    let doc_ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let mut unique: Vec<&str> = doc_ids.iter().map(String::as_str).collect();
    unique.sort_unstable();
    if unique.windows(2).any(|w| w[0] == w[1]) {
        return Err(SnapshotError::Corrupt("duplicate doc_id".into()));
    }
    let index = InvertedIndex {
        postings,
        stats: CorpusStats::from_lengths(&doc_lengths),
        doc_lengths,
        doc_ids,
        params,
        tokenizer,
    };
    Ok(SearchIndex::from_parts(index, docs))
}

pub fn save(search: &SearchIndex, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    let path = path.as_ref();
    let io = |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&encode(search)).map_err(io)?;
    f.flush().map_err(io)
}

pub fn load(path: impl AsRef<Path>) -> Result<SearchIndex, SnapshotError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}
