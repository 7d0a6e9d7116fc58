use std::fmt::Write as _;

use rayon::prelude::*;

use super::{MetricReport, MetricValues};
use crate::error::{Error, Result};

/// Named parameter axes; the cartesian product is enumerated with the last
/// axis varying fastest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis<S: ToString>(mut self, key: &str, values: impl IntoIterator<Item = S>) -> Self {
        self.axes
            .push((key.to_string(), values.into_iter().map(|v| v.to_string()).collect()));
        self
    }

    /// Parses `key=v1,v2,...`.
    pub fn parse_axis(spec: &str) -> Result<(String, Vec<String>)> {
        let (k, vs) = spec
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("grid axis `{spec}` is not key=v1,v2,...")))?;
        let vals: Vec<String> = vs
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if k.trim().is_empty() || vals.is_empty() {
            return Err(Error::Invalid(format!("grid axis `{spec}` has no key or no values")));
        }
        Ok((k.trim().to_string(), vals))
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All grid points in enumeration order.
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut out = vec![vec![]];
        if self.axes.is_empty() {
            return vec![];
        }
        for (k, vals) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((k.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub params: Vec<(String, String)>,
    pub outcome: std::result::Result<MetricReport, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub cells: Vec<SweepCell>,
}

/// Evaluates every grid point. Cells run in parallel; results keep the
/// grid order and a failing cell records its error without stopping the rest.
pub fn sweep<F>(grid: &Grid, eval: F) -> SweepTable
where
    F: Fn(&[(String, String)]) -> Result<MetricReport> + Sync,
{
    let cells = grid
        .points()
        .into_par_iter()
        .map(|params| {
            let outcome = eval(&params).map_err(|e| e.to_string());
            SweepCell { params, outcome }
        })
        .collect();
    SweepTable {
        axes: grid.axes.iter().map(|(k, _)| k.clone()).collect(),
        cells,
    }
}

impl SweepTable {
    /// First cell with the highest mean nDCG@5.
    pub fn best(&self) -> Option<&SweepCell> {
        let mut best: Option<(&SweepCell, f64)> = None;
        for c in &self.cells {
            if let Ok(r) = &c.outcome {
                if best.is_none_or(|(_, b)| r.mean.ndcg5 > b) {
                    best = Some((c, r.mean.ndcg5));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    /// One row per cell: parameter values, mean metrics, error message.
    pub fn to_csv(&self) -> String {
        let mut s = self.axes.join(",");
        for n in MetricValues::NAMES {
            let _ = write!(s, ",{n}");
        }
        s.push_str(",error\n");
        for c in &self.cells {
            let vals: Vec<&str> = c.params.iter().map(|(_, v)| v.as_str()).collect();
            s.push_str(&vals.join(","));
            match &c.outcome {
                Ok(r) => {
                    for x in r.mean.as_array() {
                        let _ = write!(s, ",{x}");
                    }
                    s.push_str(",\n");
                }
                Err(e) => {
                    s.push_str(&",".repeat(MetricValues::NAMES.len()));
                    let _ = writeln!(s, ",\"{}\"", e.replace('"', "'"));
                }
            }
        }
        s
    }
}
