//! Reading and writing embedding files.
//!
//! Binary layout (`S3EM`, all integers little-endian):
//!
//! ```text
//! magic     4 bytes   "S3EM"
//! version   u32       1
//! dim       u32
//! count     u32
//! values    count * dim f32, row-major
//! label_len u32       0 => no labels
//! labels    label_len bytes of '\n'-separated UTF-8
//! ```
//!
//! The text alternative holds one record per line: `label<TAB>v1,v2,...,vD`.
//! Files ending in `.txt` or `.tsv` use the text format; anything else is
//! binary.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::embedding::{Embedding, EmbeddingSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"S3EM";
pub const VERSION: u32 = 1;

/// Which on-disk representation a path uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Binary,
    Text,
}

impl FileFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("tsv") => FileFormat::Text,
            _ => FileFormat::Binary,
        }
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match FileFormat::for_path(path) {
        FileFormat::Binary => decode(&bytes),
        FileFormat::Text => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::MalformedRecord {
                line: 0,
                reason: e.to_string(),
            })?;
            decode_text(text)
        }
    }
}

/// Writes `set` atomically (temp file + rename).
pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match FileFormat::for_path(path) {
        FileFormat::Binary => encode(set)?,
        FileFormat::Text => encode_text(set)?.into_bytes(),
    };
    write_atomic(path, &bytes)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn check_labels(labels: &[String]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|l| l.contains('\n')) {
        return Err(Error::MalformedLabels(format!(
            "label {bad:?} contains a newline"
        )));
    }
    Ok(())
}

fn u32_field(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value)
        .map_err(|_| Error::MalformedLabels(format!("{what} {value} does not fit in u32")))
}

/// Serializes to the binary `S3EM` layout.
pub fn encode(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let label_block = match set.labels() {
        Some(labels) => {
            check_labels(labels)?;
            labels.join("\n").into_bytes()
        }
        None => Vec::new(),
    };
    let mut out = Vec::with_capacity(20 + set.len() * set.dim() * 4 + label_block.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_field(set.dim(), "dim")?.to_le_bytes());
    out.extend_from_slice(&u32_field(set.len(), "count")?.to_le_bytes());
    for item in set {
        for v in item.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&u32_field(label_block.len(), "label block length")?.to_le_bytes());
    out.extend_from_slice(&label_block);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, needed: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.offset;
        if needed > available {
            return Err(Error::TruncatedFile {
                offset: self.offset,
                needed,
                available,
            });
        }
        let slice = &self.bytes[self.offset..self.offset + needed];
        self.offset += needed;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses the binary `S3EM` layout.
pub fn decode(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut cur = Cursor { bytes, offset: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(magic);
        return Err(Error::BadMagic { found });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = cur.u32()? as usize;
    let count = cur.u32()? as usize;
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let value_bytes = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::TruncatedFile {
            offset: cur.offset,
            needed: usize::MAX,
            available: bytes.len() - cur.offset,
        })?;
    let raw = cur.take(value_bytes)?;
    let mut items = Vec::with_capacity(count);
    for row in raw.chunks_exact(dim * 4) {
        let values: Vec<f32> = row
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        items.push(Embedding::new(values)?);
    }
    let label_len = cur.u32()? as usize;
    let block = cur.take(label_len)?;
    if cur.offset != bytes.len() {
        return Err(Error::MalformedLabels(format!(
            "{} trailing bytes after label block",
            bytes.len() - cur.offset
        )));
    }
    let labels = if label_len == 0 {
        None
    } else {
        let text = std::str::from_utf8(block)
            .map_err(|e| Error::MalformedLabels(format!("label block is not UTF-8: {e}")))?;
        let labels: Vec<String> = text.split('\n').map(str::to_owned).collect();
        if labels.len() != count {
            return Err(Error::MalformedLabels(format!(
                "{} labels for {count} embeddings",
                labels.len()
            )));
        }
        Some(labels)
    };
    EmbeddingSet::new(dim, items, labels)
}

/// Serializes to the `label<TAB>v1,...,vD` text layout.
pub fn encode_text(set: &EmbeddingSet) -> Result<String> {
    let mut out = String::new();
    for (i, item) in set.iter().enumerate() {
        let label = set.label(i).unwrap_or("");
        if label.contains('\t') || label.contains('\n') {
            return Err(Error::MalformedLabels(format!(
                "label {label:?} contains a tab or newline"
            )));
        }
        out.push_str(label);
        out.push('\t');
        let values: Vec<String> = item.as_slice().iter().map(|v| v.to_string()).collect();
        out.push_str(&values.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Parses the text layout. A file whose labels are all empty yields no labels.
pub fn decode_text(text: &str) -> Result<EmbeddingSet> {
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::MalformedRecord {
                line: lineno + 1,
                reason: "missing tab separator".into(),
            })?;
        let row = values
            .split(',')
            .map(|v| v.trim().parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedRecord {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        labels.push(label.to_owned());
        rows.push(row);
    }
    let dim = rows.first().map(Vec::len).ok_or(Error::EmptySet)?;
    let labels = if labels.iter().all(String::is_empty) {
        None
    } else {
        Some(labels)
    };
    EmbeddingSet::from_rows(dim, rows, labels)
}
