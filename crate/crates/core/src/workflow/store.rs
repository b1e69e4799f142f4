use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::command::ArtifactRef;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    /// Raw uploaded CSV.
    Csv,
    Dataset,
    Graph,
    Labels,
    Knowledge,
    Profile,
    Eda,
    Recommendations,
    Discovery,
    Evaluation,
    Effect,
    Ranking,
    Benchmark,
    Report,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 14] = [
        ArtifactKind::Csv,
        ArtifactKind::Dataset,
        ArtifactKind::Graph,
        ArtifactKind::Labels,
        ArtifactKind::Knowledge,
        ArtifactKind::Profile,
        ArtifactKind::Eda,
        ArtifactKind::Recommendations,
        ArtifactKind::Discovery,
        ArtifactKind::Evaluation,
        ArtifactKind::Effect,
        ArtifactKind::Ranking,
        ArtifactKind::Benchmark,
        ArtifactKind::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ArtifactKind::Csv => "csv",
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::Graph => "graph",
            ArtifactKind::Labels => "labels",
            ArtifactKind::Knowledge => "knowledge",
            ArtifactKind::Profile => "profile",
            ArtifactKind::Eda => "eda",
            ArtifactKind::Recommendations => "recommendations",
            ArtifactKind::Discovery => "discovery",
            ArtifactKind::Evaluation => "evaluation",
            ArtifactKind::Effect => "effect",
            ArtifactKind::Ranking => "ranking",
            ArtifactKind::Benchmark => "benchmark",
            ArtifactKind::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn media_type(&self) -> &'static str {
        match self {
            ArtifactKind::Csv => "text/csv",
            ArtifactKind::Report => "text/markdown; charset=utf-8",
            _ => "application/json",
        }
    }
}

/// Hex SHA-256 of the bytes.
pub fn content_ref(bytes: &[u8]) -> ArtifactRef {
    hex::encode(Sha256::digest(bytes))
}

/// Content-addressed blobs, optionally mirrored to `<dir>/<ref>.<kind>`.
#[derive(Debug, Clone, Default)]
pub struct ArtifactStore {
    dir: Option<PathBuf>,
    blobs: HashMap<ArtifactRef, (ArtifactKind, Arc<[u8]>)>,
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl ArtifactStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a directory-backed store and loads its blobs.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut blobs = HashMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let (Some(stem), Some(ext)) = (
                path.file_stem().and_then(|s| s.to_str()),
                path.extension().and_then(|s| s.to_str()),
            ) else {
                continue;
            };
            let Some(kind) = ArtifactKind::parse(ext) else {
                continue;
            };
            let bytes = fs::read(&path)?;
            if content_ref(&bytes) != stem {
                return Err(Error::Io(format!("artifact {} is corrupt", path.display())));
            }
            blobs.insert(stem.to_string(), (kind, Arc::from(bytes)));
        }
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            blobs,
        })
    }

    pub fn put(&mut self, kind: ArtifactKind, bytes: Vec<u8>) -> Result<ArtifactRef> {
        let r = content_ref(&bytes);
        if !self.blobs.contains_key(&r) {
            if let Some(dir) = &self.dir {
                write_atomic(&dir.join(format!("{r}.{}", kind.name())), &bytes)?;
            }
            self.blobs.insert(r.clone(), (kind, Arc::from(bytes)));
        }
        Ok(r)
    }

    pub fn get(&self, r: &str) -> Result<(ArtifactKind, Arc<[u8]>)> {
        self.blobs
            .get(r)
            .map(|(k, b)| (*k, b.clone()))
            .ok_or_else(|| Error::NotFound(format!("artifact {r}")))
    }

    pub fn contains(&self, r: &str) -> bool {
        self.blobs.contains_key(r)
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ArtifactStore::open(dir.path()).unwrap();
        let r = s.put(ArtifactKind::Report, b"abc".to_vec()).unwrap();
        assert_eq!(
            r,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(s.put(ArtifactKind::Report, b"abc".to_vec()).unwrap(), r);
        let again = ArtifactStore::open(dir.path()).unwrap();
        let (k, b) = again.get(&r).unwrap();
        assert_eq!((k, &*b), (ArtifactKind::Report, &b"abc"[..]));
        assert!(matches!(again.get("00"), Err(Error::NotFound(_))));
        for k in ArtifactKind::ALL {
            assert_eq!(ArtifactKind::parse(k.name()), Some(k));
        }
    }
}
