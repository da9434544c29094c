//! Append-only event journal.
//!
//! One JSON object per line, written with a single `write_all` under a lock
//! and synced before the append returns. A crash can therefore only leave a
//! partial final line without its newline; replay skips such a line and
//! [`Journal::open`] truncates it away before appending again.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use medas_core::meta::{AgentStats, ConsolidatedResponse, Strategy, WeightVector};
use medas_core::{CaseInquiry, ConfirmedDiagnosis, DispatchResult, InquiryId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    InquirySubmitted { case: CaseInquiry, deadline_ms: u64, strategy: Strategy },
    DispatchCompleted { dispatch: DispatchResult },
    DispatchFailed { inquiry_id: InquiryId, reason: String, dispatch: Option<DispatchResult> },
    Consolidated { consolidated: ConsolidatedResponse },
    Confirmed { confirmation: ConfirmedDiagnosis },
    WeightsUpdated { stats: Vec<AgentStats>, weights: WeightVector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: JournalEvent,
}

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("journal corrupt at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error("cannot encode journal event: {0}")]
    Encode(#[from] serde_json::Error),
}

/// Result of reading a journal from disk.
#[derive(Debug, Default)]
pub struct Replayed {
    pub entries: Vec<JournalEntry>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    /// Set when a partial final line was skipped.
    pub truncated_tail: bool,
    /// Set when the final record parsed but lacks its newline.
    pub unterminated_tail: bool,
}

/// Parses journal bytes. A final line without a newline that does not
/// parse is tolerated; any other bad line is corruption.
pub fn parse_journal(bytes: &[u8]) -> Result<Replayed, JournalError> {
    let mut replayed = Replayed::default();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        let (line, complete) = match rest.iter().position(|&b| b == b'\n') {
            Some(end) => (&rest[..end], true),
            None => (rest, false),
        };
        let consumed = line.len() + usize::from(complete);
        if line.iter().all(u8::is_ascii_whitespace) {
            offset += consumed;
            replayed.valid_len = offset as u64;
            continue;
        }
        match serde_json::from_slice::<JournalEntry>(line) {
            Ok(entry) if complete => {
                replayed.entries.push(entry);
                offset += consumed;
                replayed.valid_len = offset as u64;
            }
            // complete record whose newline never hit the disk
            Ok(entry) => {
                replayed.entries.push(entry);
                replayed.unterminated_tail = true;
                break;
            }
            Err(_) if !complete => {
                replayed.truncated_tail = true;
                break;
            }
            Err(e) => return Err(JournalError::Corrupt { offset: offset as u64, reason: e.to_string() }),
        }
    }
    Ok(replayed)
}

/// Reads and parses a journal file. A missing file is an empty journal.
pub fn replay_journal(path: &Path) -> Result<Replayed, JournalError> {
    match std::fs::read(path) {
        Ok(bytes) => {
            let replayed = parse_journal(&bytes)?;
            if replayed.truncated_tail {
                tracing::warn!(path = %path.display(), valid_len = replayed.valid_len, "skipping partial final journal line");
            }
            Ok(replayed)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Replayed::default()),
        Err(source) => Err(JournalError::Io { path: path.into(), source }),
    }
}

#[derive(Debug)]
struct Writer {
    file: File,
    next_seq: u64,
}

/// Single-writer handle on a journal file.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    writer: Mutex<Writer>,
}

impl Journal {
    /// Opens (creating if needed) the journal, replays it, and repairs a
    /// partial tail so the next append starts on a fresh line.
    pub fn open(path: &Path) -> Result<(Self, Replayed), JournalError> {
        let io = |source| JournalError::Io { path: path.into(), source };
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path).map_err(io)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io)?;
        let replayed = parse_journal(&bytes)?;
        if replayed.truncated_tail {
            tracing::warn!(path = %path.display(), "repairing partial final journal line");
            file.set_len(replayed.valid_len).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io)?;
        if replayed.unterminated_tail {
            file.write_all(b"\n").map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        let next_seq = replayed.entries.last().map_or(0, |e| e.seq + 1);
        Ok((Self { path: path.into(), writer: Mutex::new(Writer { file, next_seq }) }, replayed))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event durably and returns the written entry.
    pub fn append(&self, event: JournalEvent) -> Result<JournalEntry, JournalError> {
        let mut writer = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let entry = JournalEntry { seq: writer.next_seq, at: Utc::now(), event };
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        let io = |source| JournalError::Io { path: self.path.clone(), source };
        writer.file.write_all(&line).map_err(io)?;
        writer.file.sync_data().map_err(io)?;
        writer.next_seq += 1;
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use medas_core::InquirySource;

    fn submitted(id: &str) -> JournalEvent {
        JournalEvent::InquirySubmitted {
            case: CaseInquiry::new(id.into(), "chest pain", Utc::now(), InquirySource::Api).unwrap(),
            deadline_ms: 1000,
            strategy: Strategy::Top1WeightedVote,
        }
    }

    #[test]
    fn empty_and_missing_journals_are_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(replay_journal(&dir.path().join("none.jsonl")).unwrap().entries.is_empty());
        assert!(parse_journal(b"").unwrap().entries.is_empty());
    }

    #[test]
    fn appends_and_replays_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (journal, replayed) = Journal::open(&path).unwrap();
        assert!(replayed.entries.is_empty());
        for i in 0..3 {
            journal.append(submitted(&format!("q{i}"))).unwrap();
        }
        drop(journal);
        let replayed = replay_journal(&path).unwrap();
        assert_eq!(replayed.entries.iter().map(|e| e.seq).collect::<Vec<_>>(), [0, 1, 2]);
        let (journal, _) = Journal::open(&path).unwrap();
        assert_eq!(journal.append(submitted("q3")).unwrap().seq, 3);
    }

    #[test]
    fn partial_tail_is_skipped_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (journal, _) = Journal::open(&path).unwrap();
        journal.append(submitted("q0")).unwrap();
        journal.append(submitted("q1")).unwrap();
        drop(journal);
        let full = std::fs::read(&path).unwrap();
        let mut torn = full.clone();
        torn.extend_from_slice(br#"{"seq":2,"at":"2026-01-01T00:00:00Z","event":"inquiry_sub"#);
        std::fs::write(&path, &torn).unwrap();

        let replayed = replay_journal(&path).unwrap();
        assert!(replayed.truncated_tail);
        assert_eq!(replayed.entries.len(), 2);

        let (journal, replayed) = Journal::open(&path).unwrap();
        assert_eq!(replayed.entries.len(), 2);
        assert_eq!(std::fs::read(&path).unwrap(), full);
        journal.append(submitted("q2")).unwrap();
        assert_eq!(replay_journal(&path).unwrap().entries.len(), 3);
    }

    #[test]
    fn unterminated_complete_record_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (journal, _) = Journal::open(&path).unwrap();
        journal.append(submitted("q0")).unwrap();
        drop(journal);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        let (journal, replayed) = Journal::open(&path).unwrap();
        assert_eq!(replayed.entries.len(), 1);
        journal.append(submitted("q1")).unwrap();
        let replayed = replay_journal(&path).unwrap();
        assert!(!replayed.truncated_tail);
        assert_eq!(replayed.entries.len(), 2);
    }

    #[test]
    fn corrupt_interior_line_reports_offset() {
        let good = serde_json::to_string(&JournalEntry { seq: 0, at: Utc::now(), event: submitted("q0") }).unwrap();
        let text = format!("{good}\nnot json\n{good}\n");
        match parse_journal(text.as_bytes()) {
            Err(JournalError::Corrupt { offset, .. }) => assert_eq!(offset, good.len() as u64 + 1),
            other => panic!("expected corruption, got {other:?}"),
        }
    }

    #[test]
    fn concurrent_appends_never_interleave() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (journal, _) = Journal::open(&path).unwrap();
        let journal = std::sync::Arc::new(journal);
        let threads: Vec<_> = (0..8)
            .map(|t| {
                let journal = journal.clone();
                std::thread::spawn(move || {
                    for i in 0..25 {
                        journal.append(submitted(&format!("t{t}-{i}"))).unwrap();
                    }
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        let replayed = replay_journal(&path).unwrap();
        assert_eq!(replayed.entries.len(), 200);
        let mut seqs: Vec<u64> = replayed.entries.iter().map(|e| e.seq).collect();
        seqs.sort_unstable();
        assert_eq!(seqs, (0..200).collect::<Vec<_>>());
    }
}
