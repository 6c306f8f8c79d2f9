//! Append-only journal of URL, tag, verdict and search records.
//!
//! The journal is a text file whose first line is [`JOURNAL_HEADER`]; every
//! following line is one JSON-encoded [`Record`] with an `op` discriminator.
//! Each append is fsynced before it is acknowledged. A torn trailing line
//! (no newline) left by a crash is discarded on reopen. A snapshot of the
//! materialized state is written every `snapshot_every` appends so reopening
//! only replays the journal suffix.
//!
//! One process writes; readers open with [`Store::open_read_only`] and see
//! every complete line written so far.

mod records;
mod state;

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

pub use records::*;
pub use state::{Ack, StoreState};

use crate::dnsprobe::Verdict;

pub const JOURNAL_HEADER: &str = "#tagcrawl-journal v1";
pub const JOURNAL_FILE: &str = "journal.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const SNAPSHOT_VERSION: u32 = 1;
const DEFAULT_SNAPSHOT_EVERY: u64 = 5_000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io: {0}")]
    Io(#[from] io::Error),
    #[error("journal line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("journal header mismatch: found {0:?}")]
    BadHeader(String),
    #[error("record violates invariant: {0}")]
    Invariant(String),
    #[error("store opened read-only")]
    ReadOnly,
    #[error("simulated crash (fault injection)")]
    Crashed,
}

impl StoreError {
    /// True for the fault-injected crash from [`Store::fail_after_appends`].
    pub fn is_crash(&self) -> bool {
        matches!(self, StoreError::Crashed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub urls_crawled: u64,
    pub domains_crawled: u64,
    pub filtered_urls: u64,
    pub poisoned_domains: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    journal_offset: u64,
    journal_lines: usize,
    state: StoreState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierKind {
    UncheckedUrls,
    UnsearchedTags,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontierBatch {
    Urls(Vec<UrlRecord>),
    Tags(Vec<TagRecord>),
}

impl FrontierBatch {
    pub fn len(&self) -> usize {
        match self {
            FrontierBatch::Urls(v) => v.len(),
            FrontierBatch::Tags(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct Store {
    dir: PathBuf,
    journal: Option<File>,
    state: StoreState,
    offset: u64,
    lines: usize,
    appends_since_snapshot: u64,
    snapshot_every: u64,
    crash_after: Option<u64>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("dir", &self.dir)
            .field("offset", &self.offset)
            .field("lines", &self.lines)
            .finish()
    }
}

impl Store {
    /// Opens (or creates) the store in `dir` for writing.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_inner(dir.as_ref(), true, true)
    }

    /// Opens for reading; nothing on disk is modified.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_inner(dir.as_ref(), false, true)
    }

    /// Opens for writing but ignores any snapshot and replays the whole
    /// journal.
    pub fn open_full_replay(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_inner(dir.as_ref(), true, false)
    }

    fn open_inner(dir: &Path, writable: bool, use_snapshot: bool) -> Result<Self, StoreError> {
        let journal_path = dir.join(JOURNAL_FILE);
        if writable {
            fs::create_dir_all(dir)?;
            if !journal_path.exists() {
                let mut f = File::create(&journal_path)?;
                writeln!(f, "{JOURNAL_HEADER}")?;
                f.sync_all()?;
                if let Ok(d) = File::open(dir) {
                    let _ = d.sync_all();
                }
            }
        } else if !journal_path.exists() {
            // An absent store reads as empty.
            return Ok(Self {
                dir: dir.to_path_buf(),
                journal: None,
                state: StoreState::default(),
                offset: 0,
                lines: 0,
                appends_since_snapshot: 0,
                snapshot_every: DEFAULT_SNAPSHOT_EVERY,
                crash_after: None,
            });
        }

        let mut file = OpenOptions::new()
            .read(true)
            .write(writable)
            .open(&journal_path)?;
        let len = file.metadata()?.len();

        let snapshot = if use_snapshot {
            load_snapshot(&dir.join(SNAPSHOT_FILE), &mut file, len)
        } else {
            None
        };
        let (mut state, start, start_lines) = match snapshot {
            Some(s) => (s.state, s.journal_offset, s.journal_lines),
            None => (StoreState::default(), 0, 0),
        };
        state.reindex();

        file.seek(SeekFrom::Start(start))?;
        let mut buf = Vec::with_capacity((len - start) as usize);
        file.read_to_end(&mut buf)?;

        let mut pos = 0usize;
        let mut line_no = start_lines;
        while let Some(nl) = buf[pos..].iter().position(|&b| b == b'\n') {
            let line = &buf[pos..pos + nl];
            line_no += 1;
            if line_no == 1 {
                let text = String::from_utf8_lossy(line);
                if text.trim_end() != JOURNAL_HEADER {
                    return Err(StoreError::BadHeader(text.into_owned()));
                }
            } else if !line.is_empty() {
                let record: Record =
                    serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                state.apply(record);
            }
            pos += nl + 1;
        }
        let offset = start + pos as u64;
        if offset < len {
            if writable {
                warn!(bytes = len - offset, "discarding torn journal tail");
                file.set_len(offset)?;
                file.sync_all()?;
            } else {
                debug!(bytes = len - offset, "ignoring incomplete journal tail");
            }
        }
        if line_no == 0 {
            return Err(StoreError::BadHeader(String::new()));
        }

        let journal = if writable {
            file.seek(SeekFrom::Start(offset))?;
            Some(file)
        } else {
            None
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            journal,
            state,
            offset,
            lines: line_no,
            appends_since_snapshot: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            crash_after: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn journal_path(&self) -> PathBuf {
        self.dir.join(JOURNAL_FILE)
    }

    pub fn set_snapshot_every(&mut self, n: u64) {
        self.snapshot_every = n.max(1);
    }

    /// Fault injection: after `n` more acknowledged records every further
    /// append fails with [`StoreError::Crashed`] and writes nothing, which is
    /// what a reader observes after the writer is killed right after an fsync.
    pub fn fail_after_appends(&mut self, n: u64) {
        self.crash_after = Some(n);
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    /// Durably appends one record.
    pub fn append(&mut self, record: impl Into<Record>) -> Result<Ack, StoreError> {
        let acks = self.append_batch(std::iter::once(record.into()))?;
        Ok(acks[0])
    }

    /// Appends several records with a single fsync. Records are validated in
    /// order, so later ones may depend on earlier ones in the same batch.
    pub fn append_batch(
        &mut self,
        records: impl IntoIterator<Item = Record>,
    ) -> Result<Vec<Ack>, StoreError> {
        if self.journal.is_none() {
            return Err(if self.crash_after == Some(0) {
                StoreError::Crashed
            } else {
                StoreError::ReadOnly
            });
        }
        let mut out = Vec::new();
        let mut acks = Vec::new();
        let mut failure: Option<StoreError> = None;
        let mut written = 0u64;
        for record in records {
            if self.crash_after == Some(0) {
                failure = Some(StoreError::Crashed);
                break;
            }
            if self.state.is_duplicate(&record) {
                acks.push(Ack::AlreadyKnown);
                continue;
            }
            if let Err(e) = self.state.validate(&record) {
                failure = Some(e);
                break;
            }
            let line = match serde_json::to_string(&record) {
                Ok(l) => l,
                Err(e) => {
                    failure = Some(StoreError::Invariant(format!("unserializable record: {e}")));
                    break;
                }
            };
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
            self.state.apply(record);
            acks.push(Ack::Written);
            written += 1;
            if let Some(left) = self.crash_after.as_mut() {
                *left -= 1;
            }
        }
        // Records already applied to the in-memory state are flushed even
        // when a later record in the batch is rejected.
        if !out.is_empty() {
            let file = self.journal.as_mut().expect("checked above");
            file.write_all(&out)?;
            file.sync_data()?;
            self.offset += out.len() as u64;
            self.lines += written as usize;
            self.appends_since_snapshot += written;
        }
        if let Some(e) = failure {
            if e.is_crash() {
                self.journal = None;
            }
            return Err(e);
        }
        if self.appends_since_snapshot >= self.snapshot_every {
            self.checkpoint()?;
        }
        Ok(acks)
    }

    /// Writes a snapshot of the current state atomically.
    pub fn checkpoint(&mut self) -> Result<(), StoreError> {
        if self.journal.is_none() {
            return Err(StoreError::ReadOnly);
        }
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            journal_offset: self.offset,
            journal_lines: self.lines,
            state: self.state.clone(),
        };
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, &snap)
                .map_err(|e| StoreError::Io(io::Error::other(e)))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        self.appends_since_snapshot = 0;
        Ok(())
    }

    pub fn query_frontier(&self, kind: FrontierKind, limit: usize) -> FrontierBatch {
        match kind {
            FrontierKind::UncheckedUrls => FrontierBatch::Urls(self.state.unchecked_urls(limit)),
            FrontierKind::UnsearchedTags => FrontierBatch::Tags(self.state.unsearched_tags(limit)),
        }
    }

    /// Exact counts over the journal. A URL counts as crawled once its
    /// filtering check is recorded; domains are collapsed domains.
    pub fn snapshot_counts(&self) -> Counts {
        counts_of(&self.state)
    }
}

pub fn counts_of(state: &StoreState) -> Counts {
    let mut domains = std::collections::HashSet::new();
    let mut c = Counts::default();
    for u in state.urls() {
        if u.status == UrlStatus::Unchecked {
            continue;
        }
        c.urls_crawled += 1;
        domains.insert(u.collapsed_domain.as_str());
        if u.status.is_filtered() {
            c.filtered_urls += 1;
        }
    }
    c.domains_crawled = domains.len() as u64;
    c.poisoned_domains = state
        .verdicts()
        .values()
        .filter(|v| v.verdict == Verdict::Poisoned)
        .count() as u64;
    c
}

fn load_snapshot(path: &Path, journal: &mut File, journal_len: u64) -> Option<Snapshot> {
    let bytes = fs::read(path).ok()?;
    let snap: Snapshot = match serde_json::from_slice(&bytes) {
        Ok(s) => s,
        Err(e) => {
            warn!(error = %e, "ignoring unreadable snapshot");
            return None;
        }
    };
    if snap.version != SNAPSHOT_VERSION || snap.journal_offset == 0 || snap.journal_offset > journal_len {
        return None;
    }
    // The snapshot must end exactly on a line boundary of this journal.
    let mut b = [0u8; 1];
    journal.seek(SeekFrom::Start(snap.journal_offset - 1)).ok()?;
    journal.read_exact(&mut b).ok()?;
    (b[0] == b'\n').then_some(snap)
}
