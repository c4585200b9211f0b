//! One JSON-lines file per session, one event per line, flushed and synced
//! before an append is acknowledged.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use concord_core::events::{read_log, Event, ReplayError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: ReplayError,
    },
}

#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(FileStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    /// Appends one event. On failure the file is cut back to its previous
    /// length so no partial line survives.
    pub fn append(&self, session_id: &str, event: &Event) -> io::Result<()> {
        let mut line = event.to_json_line();
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(session_id))?;
        let before = file.metadata()?.len();
        let written = file
            .write_all(line.as_bytes())
            .and_then(|()| file.flush())
            .and_then(|()| file.sync_data());
        if let Err(e) = written {
            let _ = file.set_len(before);
            return Err(e);
        }
        Ok(())
    }

    /// Session ids with a log file in the directory, sorted.
    pub fn session_ids(&self) -> io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load(&self, session_id: &str) -> Result<Vec<Event>, LoadError> {
        load_log(self.path(session_id))
    }
}

/// Reads a log file, reporting the first unreadable line.
pub fn load_log(path: impl AsRef<Path>) -> Result<Vec<Event>, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_log(BufReader::new(file)).map_err(|source| LoadError::Corrupt {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use concord_core::events::{Analysis, EventKind};

    #[test]
    fn append_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let a = Event::new(
            1,
            EventKind::SessionCreated {
                session_id: "a".into(),
                facilitator_token: None,
                participant_token: None,
            },
        );
        let b = Event::new(2, EventKind::AnalysisRun(Analysis::Pma));
        store.append("a", &a).unwrap();
        store.append("b", &a).unwrap();
        store.append("a", &b).unwrap();
        assert_eq!(store.load("a").unwrap(), vec![a.clone(), b]);
        assert_eq!(store.load("b").unwrap(), vec![a]);
        assert_eq!(store.session_ids().unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("nope"), Err(LoadError::Io { .. })));
    }
}
