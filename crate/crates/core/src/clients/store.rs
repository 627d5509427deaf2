//! Content-addressed artifact store with provenance sidecars.
//!
//! Layout under the store root:
//!
//! ```text
//! objects/ab/cdef…            artifact bytes, named by SHA-256 of the content
//! objects/ab/cdef….prov.json  provenance sidecar (first writer wins)
//! cache/<request-key>         digest of the artifact produced for a request
//! wire/<request-key>.json     canonical request payload as sent
//! ```
//!
//! Every write goes to a temporary file first and is published with a rename
//! or hard link, so a crash never leaves a partially written object behind a
//! valid name.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("artifact {0} not found")]
    NotFound(Digest),
    #[error("artifact {0} failed integrity check")]
    Corrupt(Digest),
    #[error("invalid digest {0:?}")]
    InvalidDigest(String),
    #[error("malformed sidecar for {0}: {1}")]
    Sidecar(Digest, String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Lower-case hex SHA-256 of an artifact's bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Digest(String);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Digest {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            Ok(Digest(s.to_string()))
        } else {
            Err(StoreError::InvalidDigest(s.to_string()))
        }
    }
}

impl TryFrom<String> for Digest {
    type Error = StoreError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Digest> for String {
    fn from(d: Digest) -> String {
        d.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Sidecar record stored next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub kind: String,
    pub payload_hash: String,
    pub seed: u64,
    pub timestamp: chrono::DateTime<chrono::Utc>,
    #[serde(default)]
    pub inputs: Vec<Digest>,
}

impl Provenance {
    /// Provenance for artifacts produced locally rather than by a model.
    pub fn local(producer: &str, kind: &str, payload: &[u8], inputs: Vec<Digest>) -> Self {
        Self {
            model_id: format!("local:{producer}"),
            kind: kind.to_string(),
            payload_hash: Digest::of(payload).0,
            seed: 0,
            timestamp: chrono::Utc::now(),
            inputs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["objects", "cache", "wire", "tmp"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, digest: &Digest) -> PathBuf {
        let s = digest.as_str();
        self.root.join("objects").join(&s[..2]).join(&s[2..])
    }

    fn sidecar_path(&self, digest: &Digest) -> PathBuf {
        let mut p = self.object_path(digest).into_os_string();
        p.push(".prov.json");
        PathBuf::from(p)
    }

    fn tmp_file(&self, bytes: &[u8]) -> Result<PathBuf, StoreError> {
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = self.root.join("tmp").join(format!("{}-{n}", std::process::id()));
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(bytes).map_err(io_err(&path))?;
        f.sync_all().map_err(io_err(&path))?;
        Ok(path)
    }

    /// Publishes `bytes` at `dest` unless something is already there.
    /// Returns whether this call created the file.
    fn publish_once(&self, dest: &Path, bytes: &[u8]) -> Result<bool, StoreError> {
        if dest.exists() {
            return Ok(false);
        }
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let tmp = self.tmp_file(bytes)?;
        let created = match fs::hard_link(&tmp, dest) {
            Ok(()) => true,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => false,
            Err(e) => {
                let _ = fs::remove_file(&tmp);
                return Err(StoreError::Io { path: dest.to_path_buf(), source: e });
            }
        };
        let _ = fs::remove_file(&tmp);
        Ok(created)
    }

    /// Stores `bytes` and its provenance sidecar; idempotent per content.
    pub fn put(&self, bytes: &[u8], provenance: &Provenance) -> Result<Digest, StoreError> {
        let digest = Digest::of(bytes);
        self.publish_once(&self.object_path(&digest), bytes)?;
        let sidecar = serde_json::to_vec_pretty(provenance).expect("provenance serializes");
        self.publish_once(&self.sidecar_path(&digest), &sidecar)?;
        Ok(digest)
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.object_path(digest).is_file()
    }

    /// Reads an artifact back, re-hashing it to detect corruption.
    pub fn get(&self, digest: &Digest) -> Result<Vec<u8>, StoreError> {
        let path = self.object_path(digest);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(digest.clone())),
            Err(e) => return Err(StoreError::Io { path, source: e }),
        };
        if Digest::of(&bytes) != *digest {
            return Err(StoreError::Corrupt(digest.clone()));
        }
        Ok(bytes)
    }

    pub fn provenance(&self, digest: &Digest) -> Result<Provenance, StoreError> {
        let path = self.sidecar_path(digest);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(digest.clone()),
            _ => StoreError::Io { path: path.clone(), source: e },
        })?;
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Sidecar(digest.clone(), e.to_string()))
    }

    pub fn cache_lookup(&self, key: &str) -> Result<Option<Digest>, StoreError> {
        let path = self.root.join("cache").join(key);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(s.trim().parse().ok().filter(|d| self.contains(d))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    /// Records `digest` as the result for `key`. When another writer got there
    /// first, that writer's digest is returned instead.
    pub fn cache_insert(&self, key: &str, digest: &Digest) -> Result<Digest, StoreError> {
        let path = self.root.join("cache").join(key);
        if self.publish_once(&path, digest.as_str().as_bytes())? {
            return Ok(digest.clone());
        }
        Ok(self.cache_lookup(key)?.unwrap_or_else(|| digest.clone()))
    }

    pub fn log_wire(&self, key: &str, canonical: &str) -> Result<(), StoreError> {
        let path = self.root.join("wire").join(format!("{key}.json"));
        self.publish_once(&path, canonical.as_bytes()).map(|_| ())
    }

    pub fn wire_payload(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.root.join("wire").join(format!("{key}.json"))).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance::local("test", "blob", b"payload", vec![])
    }

    #[test]
    fn put_get_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let d = store.put(b"hello", &prov()).unwrap();
        assert_eq!(d, Digest::of(b"hello"));
        assert_eq!(store.get(&d).unwrap(), b"hello");
        assert_eq!(store.provenance(&d).unwrap().model_id, "local:test");
    }

    #[test]
    fn corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let d = store.put(b"hello", &prov()).unwrap();
        fs::write(store.object_path(&d), b"tampered").unwrap();
        assert!(matches!(store.get(&d), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn cache_first_writer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let a = store.put(b"a", &prov()).unwrap();
        let b = store.put(b"b", &prov()).unwrap();
        assert_eq!(store.cache_insert("k", &a).unwrap(), a);
        assert_eq!(store.cache_insert("k", &b).unwrap(), a);
        assert_eq!(store.cache_lookup("k").unwrap(), Some(a));
    }

    #[test]
    fn digest_parsing() {
        assert!("xyz".parse::<Digest>().is_err());
        let d = Digest::of(b"");
        assert_eq!(d.as_str().parse::<Digest>().unwrap(), d);
    }
}
