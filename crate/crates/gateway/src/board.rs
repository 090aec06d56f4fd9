//! Durable bulletin-board backends.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use collvote_core::ledger::{BulletinBoard, EventLog, InMemoryBoard, Ledger, LedgerError, LogRecord};

/// Appends every accepted record to a binary log file and syncs it to disk
/// before the ledger applies it.
#[derive(Debug)]
pub struct FileBoard {
    path: PathBuf,
    file: File,
}

impl FileBoard {
    fn open_append(path: &Path) -> Result<Self, LedgerError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| storage(path, e))?;
        Ok(FileBoard { path: path.to_owned(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl BulletinBoard for FileBoard {
    fn persist(&mut self, record: &LogRecord) -> Result<(), LedgerError> {
        self.file.write_all(&record.to_bytes()).map_err(|e| storage(&self.path, e))?;
        self.file.sync_data().map_err(|e| storage(&self.path, e))
    }
}

fn storage(path: &Path, e: std::io::Error) -> LedgerError {
    LedgerError::Storage(format!("{}: {e}", path.display()))
}

/// Decodes the log file at `path`; a missing file is an empty log.
pub fn read_log(path: &Path) -> Result<EventLog, LedgerError> {
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes).map_err(|e| storage(path, e))?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(storage(path, e)),
    }
    EventLog::from_bytes(&bytes)
}

/// Backend selected at startup.
#[derive(Debug)]
pub enum Board {
    Memory(InMemoryBoard),
    File(FileBoard),
}

impl BulletinBoard for Board {
    fn persist(&mut self, record: &LogRecord) -> Result<(), LedgerError> {
        match self {
            Board::Memory(b) => b.persist(record),
            Board::File(b) => b.persist(record),
        }
    }
}

impl Board {
    pub fn memory_ledger() -> Ledger<Board> {
        Ledger::empty(Board::Memory(InMemoryBoard))
    }

    /// Replays the log at `path` (empty if absent) and keeps appending to it.
    pub fn file_ledger(path: &Path) -> Result<Ledger<Board>, LedgerError> {
        let log = read_log(path)?;
        Ledger::replay_onto(&log, Board::File(FileBoard::open_append(path)?))
    }
}
