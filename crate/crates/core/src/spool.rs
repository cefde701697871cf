//! File-backed holding area between extraction and detection.
//!
//! Events are appended as JSON lines. Draining hands back everything pending
//! in append order and empties the file, so each event is processed once.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::flow::FlowEvent;

#[derive(Debug, Error)]
pub enum SpoolError {
    #[error("spool {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// A line that could not be parsed during a drain. It is dropped from the
/// spool along with everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptLine {
    /// 1-based line number within the drained file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Drained {
    pub events: Vec<FlowEvent>,
    pub corrupt: Vec<CorruptLine>,
}

pub struct Spool {
    path: PathBuf,
    writer: BufWriter<File>,
    pending: usize,
}

impl Spool {
    /// Opens (or creates) a spool file, keeping anything already pending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SpoolError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| SpoolError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)
            .map_err(io_err)?;
        let pending = BufReader::new(File::open(&path).map_err(io_err)?)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .count();
        Ok(Spool {
            path,
            writer: BufWriter::new(file),
            pending,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn pending(&self) -> usize {
        self.pending
    }

    fn io_err(&self, source: io::Error) -> SpoolError {
        SpoolError::Io {
            path: self.path.clone(),
            source,
        }
    }

    pub fn append(&mut self, event: &FlowEvent) -> Result<(), SpoolError> {
        // FlowEvent serialization cannot fail: every field is plain data.
        let line = serde_json::to_string(event).expect("flow event serializes");
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(|e| self.io_err(e))?;
        self.pending += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), SpoolError> {
        self.writer.flush().map_err(|e| self.io_err(e))
    }

    /// Returns all pending events and truncates the backing file.
    pub fn drain(&mut self) -> Result<Drained, SpoolError> {
        self.flush()?;
        let file = File::open(&self.path).map_err(|e| self.io_err(e))?;
        let mut out = Drained::default();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| self.io_err(e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<FlowEvent>(&line) {
                Ok(ev) => out.events.push(ev),
                Err(e) => out.corrupt.push(CorruptLine {
                    line: idx + 1,
                    message: e.to_string(),
                }),
            }
        }
        self.writer
            .get_ref()
            .set_len(0)
            .map_err(|e| self.io_err(e))?;
        self.pending = 0;
        Ok(out)
    }
}
