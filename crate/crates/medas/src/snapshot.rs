//! Weight/stats snapshot files.
//!
//! A header line `{"schema":"medas.weights","version":1,"alpha":..}` followed
//! by one `{"agent_id","c","n","weight"}` record per agent. Files are
//! written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use medas_core::meta::{compute_weights, AgentStats, WeightVector};
use medas_core::MetaError;
use medas_core::AgentId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA: &str = "medas.weights";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("snapshot line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Meta(#[from] MetaError),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    alpha: f64,
}

/// One agent's row, as served by `GET /api/v1/weights` and stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub agent_id: AgentId,
    pub c: u64,
    pub n: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub alpha: f64,
    pub records: Vec<WeightRecord>,
}

impl WeightSnapshot {
    /// Rows in the order of `stats`.
    pub fn from_stats<'a>(stats: impl IntoIterator<Item = &'a AgentStats> + Clone, alpha: f64) -> Result<Self, MetaError> {
        let weights = compute_weights(stats.clone(), alpha)?;
        let records = stats
            .into_iter()
            .map(|s| WeightRecord {
                agent_id: s.agent_id.clone(),
                c: s.correct,
                n: s.scored,
                weight: weights.get(&s.agent_id).unwrap_or(0.0),
            })
            .collect();
        Ok(Self { alpha, records })
    }

    pub fn weight_vector(&self) -> WeightVector {
        WeightVector {
            weights: self.records.iter().map(|r| (r.agent_id.clone(), r.weight)).collect(),
            alpha: self.alpha,
        }
    }

    pub fn to_text(&self) -> String {
        let header = Header { schema: SCHEMA.into(), version: VERSION, alpha: self.alpha };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SnapshotError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(SnapshotError::Format { line: 1, reason: "missing header".into() })?;
        let header: Header =
            serde_json::from_str(first).map_err(|e| SnapshotError::Format { line: 1, reason: e.to_string() })?;
        if header.schema != SCHEMA || header.version != VERSION {
            return Err(SnapshotError::Format {
                line: 1,
                reason: format!("unsupported schema {} v{}", header.schema, header.version),
            });
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let record: WeightRecord =
                serde_json::from_str(line).map_err(|e| SnapshotError::Format { line: idx + 1, reason: e.to_string() })?;
            if record.c > record.n || !(record.weight.is_finite() && record.weight > 0.0) {
                return Err(SnapshotError::Format { line: idx + 1, reason: "invalid tallies or weight".into() });
            }
            records.push(record);
        }
        Ok(Self { alpha: header.alpha, records })
    }

    pub fn read(path: &Path) -> Result<Self, SnapshotError> {
        let text = std::fs::read_to_string(path).map_err(|source| SnapshotError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    /// Writes via temp file plus rename so readers never see a partial file.
    pub fn write_atomic(&self, path: &Path) -> Result<(), SnapshotError> {
        let io = |source| SnapshotError::Io { path: path.into(), source };
        let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "weights".into());
        let tmp = path.with_file_name(format!(".{file_name}.tmp"));
        let mut file = std::fs::File::create(&tmp).map_err(io)?;
        file.write_all(self.to_text().as_bytes()).map_err(io)?;
        file.sync_all().map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)?;
        Ok(())
    }
}
