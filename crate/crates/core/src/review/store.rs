//! Likert responses: validation, an append-only JSONL log and per-finalist
//! criterion means.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::packet::{BlindingKey, ReviewPacket};

pub const CRITERIA: usize = 10;

/// One reviewer's ratings of one entry: C1–C9 agreement, C10 satisfaction, all 1–5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewResponse {
    pub reviewer_token: String,
    pub packet_id: String,
    pub entry_id: String,
    pub c1: u8,
    pub c2: u8,
    pub c3: u8,
    pub c4: u8,
    pub c5: u8,
    pub c6: u8,
    pub c7: u8,
    pub c8: u8,
    pub c9: u8,
    pub c10: u8,
}

impl ReviewResponse {
    pub fn scores(&self) -> [u8; CRITERIA] {
        [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8, self.c9, self.c10,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.reviewer_token.trim().is_empty() {
            return Err(Error::InvalidParameter("reviewer token is empty".into()));
        }
        for (i, v) in self.scores().into_iter().enumerate() {
            if !(1..=5).contains(&v) {
                return Err(Error::LikertOutOfRange { index: i + 1, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    /// Position of the response in the log.
    pub sequence: usize,
}

/// Responses in arrival order, optionally mirrored to an append-only file.
/// The mutex is the single serialization point for concurrent submissions.
#[derive(Debug, Default)]
pub struct ResponseStore {
    inner: Mutex<StoreInner>,
}

#[derive(Debug, Default)]
struct StoreInner {
    log: Vec<ReviewResponse>,
    file: Option<(PathBuf, File)>,
}

impl ResponseStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a JSONL log and replays its responses.
    pub fn open(path: &Path) -> Result<Self> {
        let mut log = Vec::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    log.push(serde_json::from_str(&line)?);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Mutex::new(StoreInner {
                log,
                file: Some((path.to_path_buf(), file)),
            }),
        })
    }

    pub fn submit(&self, packet: &ReviewPacket, response: ReviewResponse) -> Result<Ack> {
        if response.packet_id != packet.packet_id {
            return Err(Error::UnknownPacket(response.packet_id));
        }
        if packet.entry(&response.entry_id).is_none() {
            return Err(Error::UnknownEntry(response.entry_id));
        }
        response.validate()?;
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, file)) = inner.file.as_mut() {
            let mut line = serde_json::to_vec(&response)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        inner.log.push(response);
        Ok(Ack {
            accepted: true,
            sequence: inner.log.len() - 1,
        })
    }

    /// Consistent copy of the log.
    pub fn snapshot(&self) -> Vec<ReviewResponse> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).log.clone()
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.inner
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .file
            .as_ref()
            .map(|(p, _)| p.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    /// Blinded label, or the pipeline id once unblinded.
    pub finalist: String,
    /// C1..C10 means, rounded to 2 decimals.
    pub means: [f64; CRITERIA],
    pub overall: f64,
    pub responses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub entry_id: String,
    pub responses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub packet_id: String,
    pub rows: Vec<AggregateRow>,
    pub cells: Vec<CellCount>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Latest response per (reviewer, entry) wins; rows follow the packet's labels
/// and omit finalists nobody rated.
pub fn aggregate(packet: &ReviewPacket, responses: &[ReviewResponse]) -> Result<AggregateTable> {
    let mut latest: BTreeMap<(&str, &str), &ReviewResponse> = BTreeMap::new();
    for r in responses.iter().filter(|r| r.packet_id == packet.packet_id) {
        if packet.entry(&r.entry_id).is_some() {
            latest.insert((r.reviewer_token.as_str(), r.entry_id.as_str()), r);
        }
    }
    if latest.is_empty() {
        return Err(Error::NoResponses(packet.packet_id.clone()));
    }
    let mut sums: BTreeMap<&str, ([u64; CRITERIA], usize)> = BTreeMap::new();
    let mut cells: BTreeMap<&str, usize> = BTreeMap::new();
    for r in latest.values() {
        let entry = packet.entry(&r.entry_id).expect("filtered");
        let (s, n) = sums.entry(entry.label.as_str()).or_default();
        for (acc, v) in s.iter_mut().zip(r.scores()) {
            *acc += u64::from(v);
        }
        *n += 1;
        *cells.entry(entry.entry_id.as_str()).or_default() += 1;
    }
    let rows = packet
        .labels
        .iter()
        .filter_map(|label| {
            let (s, n) = sums.get(label.as_str())?;
            let means = s.map(|v| v as f64 / *n as f64);
            Some(AggregateRow {
                finalist: label.clone(),
                overall: round2(means.iter().sum::<f64>() / CRITERIA as f64),
                means: means.map(round2),
                responses: *n,
            })
        })
        .collect();
    Ok(AggregateTable {
        packet_id: packet.packet_id.clone(),
        rows,
        cells: packet
            .entries
            .iter()
            .map(|e| CellCount {
                entry_id: e.entry_id.clone(),
                responses: cells.get(e.entry_id.as_str()).copied().unwrap_or(0),
            })
            .collect(),
    })
}

impl AggregateTable {
    /// Replaces blinded labels with pipeline ids.
    pub fn unblind(&self, key: &BlindingKey) -> Result<Self> {
        if key.packet_id != self.packet_id {
            return Err(Error::UnknownPacket(key.packet_id.clone()));
        }
        let mut out = self.clone();
        for row in &mut out.rows {
            if let Some(id) = key.labels.get(&row.finalist) {
                row.finalist = id.clone();
            }
        }
        Ok(out)
    }

    /// Markdown table with one row per finalist and columns C1..C10.
    pub fn render(&self) -> String {
        let mut s = String::from("| Contestants |");
        for c in 1..=CRITERIA {
            let _ = write!(s, " C{c} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(CRITERIA));
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "| {} |", r.finalist);
            for m in r.means {
                let _ = write!(s, " {m:.2} |");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(c: [u8; CRITERIA]) -> ReviewResponse {
        ReviewResponse {
            reviewer_token: "t".into(),
            packet_id: "p".into(),
            entry_id: "e".into(),
            c1: c[0],
            c2: c[1],
            c3: c[2],
            c4: c[3],
            c5: c[4],
            c6: c[5],
            c7: c[6],
            c8: c[7],
            c9: c[8],
            c10: c[9],
        }
    }

    #[test]
    fn likert_range_checked() {
        assert!(response([3; CRITERIA]).validate().is_ok());
        let mut c = [3; CRITERIA];
        c[9] = 6;
        assert!(matches!(
            response(c).validate(),
            Err(Error::LikertOutOfRange { index: 10, value: 6 })
        ));
        c[9] = 0;
        assert!(response(c).validate().is_err());
    }
}
