//! Content-addressed object store with a JSON-lines metadata index.
//!
//! Layout: `objects/<d0d1>/<digest>` and `index.jsonl` under the root.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TAG_FORMAT: &str = "format";
pub const TAG_DISEASE: &str = "disease_id";
pub const TAG_PATIENT: &str = "patient";
pub const TAG_CREATED: &str = "created_at";
pub const TAG_DOC: &str = "doc_id";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("object {0} not found")]
    NotFound(String),
    #[error("object {digest} is corrupt: content hashes to {actual}")]
    Corrupt { digest: String, actual: String },
    #[error("index {path} line {line}: {message}")]
    Index {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectRef {
    pub digest: String,
    pub size_bytes: u64,
}

impl ObjectRef {
    pub fn of(bytes: &[u8]) -> ObjectRef {
        ObjectRef {
            digest: hex::encode(Sha256::digest(bytes)),
            size_bytes: bytes.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub object: ObjectRef,
    pub tags: BTreeMap<String, String>,
}

impl MetadataRecord {
    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }

    fn sort_key(&self) -> (&str, &str, &str, &str) {
        (
            self.tag(TAG_PATIENT).unwrap_or(""),
            self.tag(TAG_CREATED).unwrap_or(""),
            self.tag(TAG_DOC).unwrap_or(""),
            &self.object.digest,
        )
    }
}

#[derive(Debug)]
pub struct DocStore {
    root: PathBuf,
    records: Vec<MetadataRecord>,
    dirty: bool,
}

impl DocStore {
    /// Opens (creating if needed) a store and loads its index.
    pub fn open(root: &Path) -> Result<DocStore, StoreError> {
        let objects = root.join("objects");
        fs::create_dir_all(&objects).map_err(io_err(&objects))?;
        let index = root.join("index.jsonl");
        let mut records = Vec::new();
        if index.exists() {
            let text = fs::read_to_string(&index).map_err(io_err(&index))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let rec = serde_json::from_str(line).map_err(|e| StoreError::Index {
                    path: index.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                records.push(rec);
            }
        }
        Ok(DocStore {
            root: root.to_path_buf(),
            records,
            dirty: false,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, digest: &str) -> PathBuf {
        self.root.join("objects").join(&digest[..2.min(digest.len())]).join(digest)
    }

    /// Stores the bytes once per distinct content and records the tags.
    /// Repeating an identical (content, tags) pair is a no-op.
    pub fn put_object(&mut self, bytes: &[u8], tags: BTreeMap<String, String>) -> Result<ObjectRef, StoreError> {
        let r = ObjectRef::of(bytes);
        let path = self.object_path(&r.digest);
        if !path.exists() {
            let dir = path.parent().expect("object path has a parent");
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
        let rec = MetadataRecord { object: r.clone(), tags };
        if !self.records.contains(&rec) {
            self.records.push(rec);
            self.dirty = true;
        }
        Ok(r)
    }

    pub fn get_object(&self, r: &ObjectRef) -> Result<Vec<u8>, StoreError> {
        let path = self.object_path(&r.digest);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(r.digest.clone())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let actual = ObjectRef::of(&bytes).digest;
        if actual != r.digest {
            return Err(StoreError::Corrupt {
                digest: r.digest.clone(),
                actual,
            });
        }
        Ok(bytes)
    }

    /// Records whose tags contain every filter pair, ordered by
    /// (patient, created_at, doc_id, digest).
    pub fn query_by_tags(&self, filter: &BTreeMap<String, String>) -> Vec<MetadataRecord> {
        let mut out: Vec<MetadataRecord> = self
            .records
            .iter()
            .filter(|r| filter.iter().all(|(k, v)| r.tags.get(k) == Some(v)))
            .cloned()
            .collect();
        out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out
    }

    pub fn records(&self) -> &[MetadataRecord] {
        &self.records
    }

    /// Number of distinct stored contents.
    pub fn object_count(&self) -> usize {
        self.records.iter().map(|r| &r.object.digest).collect::<BTreeSet<_>>().len()
    }

    /// Rewrites the index atomically (temp file, then rename), sorted.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        let path = self.root.join("index.jsonl");
        let tmp = self.root.join("index.jsonl.tmp");
        let mut sorted: Vec<&MetadataRecord> = self.records.iter().collect();
        sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        for r in sorted {
            let line = serde_json::to_string(r).expect("metadata serializes");
            writeln!(f, "{line}").map_err(io_err(&tmp))?;
        }
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        self.dirty = false;
        Ok(())
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }
}
