//! Append-only session journal: one JSON object per line, one file per session.
//!
//! ```text
//! {"session":"5f1c...","op":"create","canvas_w":512,"canvas_h":512,"seed":0}
//! {"session":"5f1c...","op":"submit_sketch","topk":10,"png":"iVBORw0..."}
//! ```
//!
//! Binary bodies are base64. Only calls that succeeded are written, so
//! replaying a file in order reproduces the session.

use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const JOURNAL_ENV: &str = "SKETCHLOOP_JOURNAL_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalOp {
    Create {
        canvas_w: usize,
        canvas_h: usize,
        seed: u64,
    },
    LoadCloud {
        format: Option<String>,
        body: String,
    },
    SubmitSketch {
        topk: usize,
        png: String,
    },
    SelectAndAlign {
        model_id: u32,
    },
    ExtractContour {
        direction: [f64; 3],
    },
    Export,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub session: String,
    #[serde(flatten)]
    pub op: JournalOp,
}

#[derive(Debug, Clone)]
pub struct Journal {
    dir: PathBuf,
}

fn invalid(path: &Path, line: usize, e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {e}", path.display()))
}

impl Journal {
    pub fn open(dir: &Path) -> io::Result<Journal> {
        fs::create_dir_all(dir)?;
        Ok(Journal { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session: &str) -> PathBuf {
        self.dir.join(format!("{session}.jsonl"))
    }

    pub fn append(&self, entry: &JournalEntry) -> io::Result<()> {
        let mut line = serde_json::to_string(entry).map_err(io::Error::other)?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path_for(&entry.session))?;
        file.write_all(line.as_bytes())?;
        file.flush()
    }

    /// Every journal file in the directory, sorted by file name.
    pub fn read_all(&self) -> io::Result<Vec<Vec<JournalEntry>>> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        files.iter().map(|p| read_journal(p)).collect()
    }
}

/// Entries of one journal file; a torn final line is dropped.
pub fn read_journal(path: &Path) -> io::Result<Vec<JournalEntry>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<io::Result<_>>()?;
    let mut entries = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(entry) => entries.push(entry),
            Err(e) if i + 1 == lines.len() => log::warn!("{}: ignoring torn last line: {e}", path.display()),
            Err(e) => return Err(invalid(path, i + 1, e)),
        }
    }
    Ok(entries)
}
