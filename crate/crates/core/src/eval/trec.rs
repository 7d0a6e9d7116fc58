//! TREC qrels and run files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::RankedList;

/// Graded judgments: query id → doc id → grade.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    pub judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    /// Parses `query_id 0 doc_id grade` lines; blank lines are skipped.
    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut q = Self::default();
        for (i, line) in text.lines().enumerate() {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                continue;
            }
            let [qid, _, doc, grade] = cols[..] else {
                return Err((i + 1, format!("expected 4 columns, found {}", cols.len())));
            };
            let grade: u32 = grade
                .parse()
                .map_err(|_| (i + 1, format!("grade `{grade}` is not a nonnegative integer")))?;
            if q.judgments
                .entry(qid.to_string())
                .or_default()
                .insert(doc.to_string(), grade)
                .is_some()
            {
                return Err((i + 1, format!("duplicate judgment for ({qid}, {doc})")));
            }
        }
        Ok(q)
    }

    pub fn grade(&self, qid: &str, doc: &str) -> u32 {
        self.judgments.get(qid).and_then(|m| m.get(doc)).copied().unwrap_or(0)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub query_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
    pub run_tag: String,
}

/// Ranked records per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    pub queries: BTreeMap<String, Vec<RunRecord>>,
}

impl Run {
    pub fn insert(&mut self, query_id: &str, list: &RankedList, run_tag: &str) {
        let recs = list
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| RunRecord {
                query_id: query_id.to_string(),
                doc_id: e.doc_id.clone(),
                rank: i + 1,
                score: e.score,
                run_tag: run_tag.to_string(),
            })
            .collect();
        self.queries.insert(query_id.to_string(), recs);
    }

    /// Ranked doc ids for a query (empty if absent).
    pub fn docs(&self, qid: &str) -> Vec<&str> {
        self.queries
            .get(qid)
            .map(|v| v.iter().map(|r| r.doc_id.as_str()).collect())
            .unwrap_or_default()
    }

    /// `query_id Q0 doc_id rank score run_tag`, queries in id order. Scores
    /// use the shortest representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for recs in self.queries.values() {
            for r in recs {
                let _ = writeln!(s, "{} Q0 {} {} {} {}", r.query_id, r.doc_id, r.rank, r.score, r.run_tag);
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    /// Parses a run file, requiring contiguous ranks from 1 and
    /// nonincreasing scores within each query.
    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut run = Self::default();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                continue;
            }
            let [qid, _, doc, rank, score, tag] = cols[..] else {
                return Err((ln, format!("expected 6 columns, found {}", cols.len())));
            };
            let rank: usize = rank.parse().map_err(|_| (ln, format!("bad rank `{rank}`")))?;
            let score: f64 = score.parse().map_err(|_| (ln, format!("bad score `{score}`")))?;
            let recs = run.queries.entry(qid.to_string()).or_default();
            if rank != recs.len() + 1 {
                return Err((ln, format!("rank {rank} for query {qid}, expected {}", recs.len() + 1)));
            }
            if let Some(prev) = recs.last() {
                if score > prev.score {
                    return Err((ln, format!("score increases at rank {rank} for query {qid}")));
                }
            }
            recs.push(RunRecord {
                query_id: qid.to_string(),
                doc_id: doc.to_string(),
                rank,
                score,
                run_tag: tag.to_string(),
            });
        }
        Ok(run)
    }
}
