//! Evaluation: graded and binary ranking metrics, TREC file formats,
//! significance testing and parameter sweeps.

mod metrics;
mod stats;
mod sweep;
mod trec;

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub use metrics::{average_precision, mrr, ndcg_at_k, precision_at_k};
pub use stats::{paired_t_test, TTest};
pub use sweep::{sweep, Grid, SweepCell, SweepTable};
pub use trec::{Qrels, Run, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Minimum grade counted as relevant by the binary metrics.
    pub relevance_cutoff: u32,
    /// Keep queries without any relevant document in the mean (scoring 0).
    pub include_empty_queries: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            relevance_cutoff: 1,
            include_empty_queries: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricValues {
    pub ndcg5: f64,
    pub ndcg10: f64,
    pub ndcg: f64,
    pub p5: f64,
    pub p10: f64,
    pub map: f64,
    pub mrr: f64,
}

impl MetricValues {
    pub const NAMES: [&'static str; 7] = ["ndcg@5", "ndcg@10", "ndcg", "p@5", "p@10", "map", "mrr"];

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.ndcg5,
            self.ndcg10,
            self.ndcg,
            self.p5,
            self.p10,
            self.map,
            self.mrr,
        ]
    }

    fn from_array(a: [f64; 7]) -> Self {
        Self {
            ndcg5: a[0],
            ndcg10: a[1],
            ndcg: a[2],
            p5: a[3],
            p10: a[4],
            map: a[5],
            mrr: a[6],
        }
    }

    /// Metric by its column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES.iter().position(|&n| n == name).map(|i| self.as_array()[i])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub per_query: BTreeMap<String, MetricValues>,
    pub mean: MetricValues,
}

/// Scores one ranked doc list against the judgments of its query.
pub fn evaluate_query(docs: &[&str], judged: &BTreeMap<String, u32>, cfg: &EvalConfig) -> MetricValues {
    let grades: Vec<u32> = docs.iter().map(|d| judged.get(*d).copied().unwrap_or(0)).collect();
    let all: Vec<u32> = judged.values().copied().collect();
    let rel: Vec<bool> = grades.iter().map(|&g| g >= cfg.relevance_cutoff).collect();
    let total = all.iter().filter(|&&g| g >= cfg.relevance_cutoff).count();
    MetricValues {
        ndcg5: ndcg_at_k(&grades, &all, Some(5)),
        ndcg10: ndcg_at_k(&grades, &all, Some(10)),
        ndcg: ndcg_at_k(&grades, &all, None),
        p5: precision_at_k(&rel, 5),
        p10: precision_at_k(&rel, 10),
        map: average_precision(&rel, total),
        mrr: mrr(&rel),
    }
}

/// Evaluates every query of `qrels`; queries missing from the run score 0.
pub fn evaluate(run: &Run, qrels: &Qrels, cfg: &EvalConfig) -> MetricReport {
    let mut report = MetricReport::default();
    for (qid, judged) in &qrels.judgments {
        if !cfg.include_empty_queries && !judged.values().any(|&g| g >= cfg.relevance_cutoff.max(1)) {
            continue;
        }
        report
            .per_query
            .insert(qid.clone(), evaluate_query(&run.docs(qid), judged, cfg));
    }
    let n = report.per_query.len();
    if n > 0 {
        let mut sum = [0.0; 7];
        for v in report.per_query.values() {
            for (s, x) in sum.iter_mut().zip(v.as_array()) {
                *s += x;
            }
        }
        report.mean = MetricValues::from_array(sum.map(|s| s / n as f64));
    }
    report
}

impl MetricReport {
    /// Aligned table: one row per query, then the mean row `all`.
    pub fn to_table(&self) -> String {
        let width = self.per_query.keys().map(String::len).max().unwrap_or(0).max(5);
        let mut s = format!("{:<width$}", "query");
        for n in MetricValues::NAMES {
            let _ = write!(s, " {n:>8}");
        }
        s.push('\n');
        for (q, v) in self.rows() {
            let _ = write!(s, "{q:<width$}");
            for x in v.as_array() {
                let _ = write!(s, " {x:>8.4}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("query,{}\n", MetricValues::NAMES.join(","));
        for (q, v) in self.rows() {
            s.push_str(q);
            for x in v.as_array() {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }

    fn rows(&self) -> impl Iterator<Item = (&str, &MetricValues)> {
        self.per_query
            .iter()
            .map(|(q, v)| (q.as_str(), v))
            .chain(std::iter::once(("all", &self.mean)))
    }

    /// Per-query values of one metric, in query order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.per_query.values().map(|v| v.get(name)).collect()
    }
}
