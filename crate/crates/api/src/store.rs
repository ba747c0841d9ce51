//! Named scenario documents with per-key revisions, optionally mirrored to a
//! directory of scenario files.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use settle_core::io::{parse_scenario, serialize_scenario, ScenarioDocument};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub revision: u64,
    pub document: ScenarioDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreError {
    NotFound,
    /// The caller expected a different revision than the one stored.
    RevisionMismatch {
        current: u64,
    },
}

#[derive(Debug, Default)]
struct Inner {
    entries: BTreeMap<String, Entry>,
    next_id: u64,
}

#[derive(Debug, Default)]
pub struct SessionStore {
    inner: RwLock<Inner>,
    dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// A store backed by `dir`. Every `*.toml` file already there is loaded
    /// at revision 1 under its file stem.
    pub fn file_backed(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut inner = Inner::default();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("toml") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = std::fs::read_to_string(&path)?;
            let document = parse_scenario(&text).map_err(|e| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}: {e}", path.display()),
                )
            })?;
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                inner.next_id = inner.next_id.max(n);
            }
            inner.entries.insert(
                id.to_string(),
                Entry {
                    revision: 1,
                    document,
                },
            );
        }
        Ok(SessionStore {
            inner: RwLock::new(inner),
            dir: Some(dir),
        })
    }

    pub fn create(&self, document: ScenarioDocument) -> io::Result<(String, u64)> {
        let mut inner = self.inner.write().expect("store lock poisoned");
        inner.next_id += 1;
        let id = format!("s{}", inner.next_id);
        self.persist(&id, &document)?;
        inner.entries.insert(
            id.clone(),
            Entry {
                revision: 1,
                document,
            },
        );
        Ok((id, 1))
    }

    /// Replace a document. With `expected` set, the write only happens when
    /// the stored revision still matches.
    pub fn update(
        &self,
        id: &str,
        document: ScenarioDocument,
        expected: Option<u64>,
    ) -> io::Result<Result<u64, StoreError>> {
        let mut inner = self.inner.write().expect("store lock poisoned");
        let Some(entry) = inner.entries.get_mut(id) else {
            return Ok(Err(StoreError::NotFound));
        };
        if let Some(rev) = expected {
            if rev != entry.revision {
                return Ok(Err(StoreError::RevisionMismatch {
                    current: entry.revision,
                }));
            }
        }
        if let Some(dir) = &self.dir {
            write_file(dir, id, &document)?;
        }
        entry.revision += 1;
        entry.document = document;
        Ok(Ok(entry.revision))
    }

    pub fn get(&self, id: &str) -> Option<Entry> {
        self.inner
            .read()
            .expect("store lock poisoned")
            .entries
            .get(id)
            .cloned()
    }

    pub fn delete(&self, id: &str) -> io::Result<bool> {
        let mut inner = self.inner.write().expect("store lock poisoned");
        if inner.entries.remove(id).is_none() {
            return Ok(false);
        }
        if let Some(dir) = &self.dir {
            match std::fs::remove_file(file_path(dir, id)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
        Ok(true)
    }

    fn persist(&self, id: &str, document: &ScenarioDocument) -> io::Result<()> {
        match &self.dir {
            Some(dir) => write_file(dir, id, document),
            None => Ok(()),
        }
    }
}

fn file_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.toml"))
}

fn write_file(dir: &Path, id: &str, document: &ScenarioDocument) -> io::Result<()> {
    // write-then-rename so a crash never leaves a half-written scenario
    let tmp = dir.join(format!(".{id}.toml.tmp"));
    std::fs::write(&tmp, serialize_scenario(document))?;
    std::fs::rename(tmp, file_path(dir, id))
}
