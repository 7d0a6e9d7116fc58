//! Word vectors and the similarity primitives built on them.
//!
//! Vectors are L2-normalized at load time, so squared Euclidean distance and
//! cosine are tied by `|w - t|^2 = 2 - 2 cos(w, t)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

/// Gaussian kernel parameters. Only the product `sigma * h` affects the
/// exponent; `sigma` also scales the `1 / (sigma sqrt(2 pi))` prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub h: f64,
    pub sigma: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { h: 1.0, sigma: 1.0 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.sigma > 0.0) {
            return Err(Error::Invalid(format!(
                "kernel needs h > 0 and sigma > 0, got h={} sigma={}",
                self.h, self.sigma
            )));
        }
        Ok(())
    }

    /// The kernel as a function of squared distance.
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        let s2h2 = self.sigma * self.sigma * self.h * self.h;
        (-sq_dist / (2.0 * s2h2)).exp() / (self.sigma * (2.0 * PI).sqrt())
    }
}

/// Result of [`EmbeddingStore::max_sim`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxSim {
    pub value: f64,
    /// Set when no in-vocabulary comparison was possible; `value` is then 1.0.
    pub oov: bool,
}

impl EmbeddingStore {
    /// Reads the word2vec text format: a `count dim` header, then
    /// `word v1 ... v_dim` per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::parse(path, 1, "missing header")),
        };
        let mut hdr = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(count)), Some(Ok(dim)), None) = (hdr.next(), hdr.next(), hdr.next()) else {
            return Err(Error::parse(path, 1, "header must be `count dim`"));
        };
        if dim == 0 {
            return Err(Error::parse(path, 1, "dimension must be positive"));
        }

        let mut vectors = HashMap::with_capacity(count);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default().to_string();
            let v = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, line_no, format!("bad component: {e}")))?;
            if v.len() != dim {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {dim} components, found {}", v.len()),
                ));
            }
            let v = unit(v).ok_or_else(|| Error::parse(path, line_no, "zero or non-finite vector"))?;
            if vectors.insert(word.clone(), v).is_some() {
                return Err(Error::parse(path, line_no, format!("duplicate word `{word}`")));
            }
        }
        if vectors.len() != count {
            return Err(Error::parse(
                path,
                1,
                format!("header declares {count} vectors, found {}", vectors.len()),
            ));
        }
        Ok(Self { dim, vectors })
    }

    /// Builds a store from in-memory vectors (normalized here).
    pub fn from_vectors<I, S>(dim: usize, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut vectors = HashMap::new();
        for (w, v) in items {
            let w = w.into();
            if v.len() != dim {
                return Err(Error::Invalid(format!("vector for `{w}` has wrong dimension")));
            }
            let v = unit(v).ok_or_else(|| Error::Invalid(format!("zero vector for `{w}`")))?;
            if vectors.insert(w.clone(), v).is_some() {
                return Err(Error::DuplicateId(w));
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// `None` when either word is out of vocabulary.
    pub fn cosine(&self, w: &str, t: &str) -> Option<f64> {
        let (a, b) = (self.vectors.get(w)?, self.vectors.get(t)?);
        Some(dot(a, b).clamp(-1.0, 1.0))
    }

    pub fn sq_dist(&self, w: &str, t: &str) -> Option<f64> {
        let (a, b) = (self.vectors.get(w)?, self.vectors.get(t)?);
        Some(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
    }

    pub fn gaussian_kernel(&self, w: &str, t: &str, cfg: &KernelConfig) -> Option<f64> {
        self.sq_dist(w, t).map(|d| cfg.eval_sq_dist(d))
    }

    /// Largest cosine between `w` and any seed, with negatives clamped to 0.
    /// Seeds outside the vocabulary are skipped.
    pub fn max_sim<'a, I>(&self, w: &str, seeds: I) -> MaxSim
    where
        I: IntoIterator<Item = &'a str>,
    {
        const NEUTRAL: MaxSim = MaxSim { value: 1.0, oov: true };
        let Some(wv) = self.vectors.get(w) else {
            return NEUTRAL;
        };
        let mut best: Option<f64> = None;
        for s in seeds {
            if let Some(sv) = self.vectors.get(s) {
                let c = dot(wv, sv).clamp(0.0, 1.0);
                best = Some(best.map_or(c, |b| b.max(c)));
            }
        }
        match best {
            Some(value) => MaxSim { value, oov: false },
            None => NEUTRAL,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = dot(&v, &v).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}
