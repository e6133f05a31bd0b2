//! Response serial numbers: strictly increasing for the server's lifetime,
//! across restarts when backed by a file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, thiserror::Error)]
pub enum SerialError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: not a serial number: {text:?}")]
    Corrupt { path: PathBuf, text: String },
}

#[derive(Debug)]
pub struct SerialCounter {
    last: Mutex<u64>,
    file: Option<PathBuf>,
}

impl SerialCounter {
    /// Counter starting after 0, not persisted.
    pub fn in_memory() -> Self {
        Self {
            last: Mutex::new(0),
            file: None,
        }
    }

    /// Counter resuming from the high-water mark stored in `path` (0 if absent).
    pub fn open(path: &Path) -> Result<Self, SerialError> {
        let last = match fs::read_to_string(path) {
            Ok(text) => text.trim().parse().map_err(|_| SerialError::Corrupt {
                path: path.to_owned(),
                text: text.clone(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(source) => {
                return Err(SerialError::Io {
                    path: path.to_owned(),
                    source,
                })
            }
        };
        Ok(Self {
            last: Mutex::new(last),
            file: Some(path.to_owned()),
        })
    }

    /// Next serial. The new high-water mark is on disk before the serial is handed out.
    pub fn next(&self) -> Result<u64, SerialError> {
        let mut last = self.last.lock().expect("serial lock");
        let next = *last + 1;
        if let Some(path) = &self.file {
            persist(path, next)?;
        }
        *last = next;
        Ok(next)
    }

    pub fn last(&self) -> u64 {
        *self.last.lock().expect("serial lock")
    }
}

fn persist(path: &Path, value: u64) -> Result<(), SerialError> {
    let io = |source| SerialError::Io {
        path: path.to_owned(),
        source,
    };
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    writeln!(f, "{value}").map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
