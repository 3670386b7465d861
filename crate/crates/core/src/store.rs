//! Append-only write-ahead log of JSON lines, one line per atomic commit.
//!
//! A commit is acknowledged only after the line is written and flushed to
//! disk. On open, every complete line is replayed; a torn final line (from a
//! crash mid-write) is discarded and truncated away.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_FILE: &str = "events.wal";

#[derive(Deserialize)]
struct Line<E> {
    seq: u64,
    events: Vec<E>,
}

#[derive(Serialize)]
struct LineRef<'a, E> {
    seq: u64,
    events: &'a [E],
}

/// Injected termination for crash testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailPoint {
    /// Commits allowed to succeed before the crash.
    pub after_commits: u64,
    /// Leave a partial line behind, as a crash mid-write would.
    pub torn: bool,
}

pub struct Wal<E> {
    file: Option<File>,
    path: Option<PathBuf>,
    next_seq: u64,
    failpoint: Option<FailPoint>,
    crashed: bool,
    read_only: bool,
    _events: PhantomData<fn(E)>,
}

impl<E: Serialize + DeserializeOwned> Wal<E> {
    /// A log that keeps nothing; for scratch systems and tests.
    pub fn ephemeral() -> Self {
        Wal {
            file: None,
            path: None,
            next_seq: 1,
            failpoint: None,
            crashed: false,
            read_only: false,
            _events: PhantomData,
        }
    }

    /// A log that refuses commits, standing in for `committed` batches read
    /// elsewhere; lets tools inspect a store another process is writing.
    pub fn read_only(committed: u64) -> Self {
        Wal {
            next_seq: committed + 1,
            read_only: true,
            ..Self::ephemeral()
        }
    }

    /// Opens (creating if needed) the log in `dir` and returns it with the
    /// batches already committed, in order.
    pub fn open(dir: &Path) -> Result<(Self, Vec<Vec<E>>)> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        // One writer per data directory; the lock dies with the process.
        file.try_lock().map_err(|e| match e {
            std::fs::TryLockError::WouldBlock => {
                Error::Conflict(format!("{} is in use by another process", dir.display()))
            }
            std::fs::TryLockError::Error(e) => Error::Io(e),
        })?;
        file.seek(SeekFrom::Start(0))?;
        let (batches, good_len, next_seq) = scan::<E>(BufReader::new(&mut file))?;
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.sync_all()?;
        }
        Ok((
            Wal {
                file: Some(file),
                path: Some(path),
                next_seq,
                failpoint: None,
                crashed: false,
                read_only: false,
                _events: PhantomData,
            },
            batches,
        ))
    }

    /// Reads the committed batches without opening the log for writing.
    pub fn read(dir: &Path) -> Result<Vec<Vec<E>>> {
        let path = dir.join(LOG_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        Ok(scan::<E>(BufReader::new(File::open(path)?))?.0)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Commits acknowledged so far, including replayed ones.
    pub fn committed(&self) -> u64 {
        self.next_seq - 1
    }

    pub fn set_failpoint(&mut self, fp: Option<FailPoint>) {
        self.failpoint = fp;
    }

    pub fn is_crashed(&self) -> bool {
        self.crashed
    }

    /// Durably appends one batch. Nothing is applied unless this succeeds.
    pub fn commit(&mut self, events: &[E]) -> Result<()> {
        if self.crashed {
            return Err(Error::Crashed);
        }
        if self.read_only {
            return Err(Error::Storage("store is open read-only".into()));
        }
        let mut line = serde_json::to_vec(&LineRef {
            seq: self.next_seq,
            events,
        })
        .map_err(|e| Error::Storage(e.to_string()))?;
        line.push(b'\n');
        if let Some(fp) = &mut self.failpoint {
            if fp.after_commits == 0 {
                self.crashed = true;
                if fp.torn {
                    if let Some(f) = &mut self.file {
                        f.write_all(&line[..line.len() / 2])?;
                        f.sync_data()?;
                    }
                }
                return Err(Error::Crashed);
            }
            fp.after_commits -= 1;
        }
        if let Some(f) = &mut self.file {
            f.write_all(&line)?;
            f.sync_data()?;
        }
        self.next_seq += 1;
        Ok(())
    }
}

/// Parses complete lines; returns the batches, the byte length they span
/// and the next sequence number.
fn scan<E: DeserializeOwned>(mut reader: impl BufRead) -> Result<(Vec<Vec<E>>, u64, u64)> {
    let mut batches = Vec::new();
    let mut good_len = 0u64;
    let mut next_seq = 1;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let complete = buf.last() == Some(&b'\n');
        match serde_json::from_slice::<Line<E>>(&buf) {
            Ok(line) if complete => {
                if line.seq != next_seq {
                    return Err(Error::Storage(format!(
                        "log sequence gap: expected {next_seq}, found {}",
                        line.seq
                    )));
                }
                next_seq += 1;
                good_len += n as u64;
                batches.push(line.events);
            }
            _ => {
                // Only a torn final line is tolerated.
                let mut rest = Vec::new();
                reader.read_to_end(&mut rest)?;
                if !rest.is_empty() || complete {
                    return Err(Error::Storage(format!("corrupt log record {next_seq}")));
                }
                tracing::warn!(seq = next_seq, "discarding torn log tail");
                break;
            }
        }
    }
    Ok((batches, good_len, next_seq))
}
