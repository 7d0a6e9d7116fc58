//! Sparse nonnegative term weights.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that weights sum to one.
pub const NORM_TOL: f64 = 1e-9;

/// A sparse map from term to nonnegative weight.
///
/// Zero weights are never stored. Iteration via [`TermDistribution::sorted`]
/// is by weight descending, then term ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermDistribution {
    weights: BTreeMap<String, f64>,
}

impl TermDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from (term, weight) pairs, accumulating repeated terms.
    pub fn from_weights<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut d = Self::new();
        for (t, w) in pairs {
            d.add(t, w)?;
        }
        Ok(d)
    }

    /// Maximum-likelihood distribution of a token sequence.
    pub fn mle<'a, I>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::from_weights(tokens.into_iter().map(|t| (t, 1.0)))?.normalized()
    }

    pub fn add(&mut self, term: impl Into<String>, weight: f64) -> Result<()> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Invalid(format!(
                "term weight {weight} is not a finite nonnegative number"
            )));
        }
        if weight > 0.0 {
            *self.weights.entry(term.into()).or_insert(0.0) += weight;
        }
        Ok(())
    }

    pub fn get(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Terms in ascending lexical order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, &w)| (t.as_str(), w))
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.weights.keys().map(String::as_str)
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(mut self) -> Result<Self> {
        let total = self.sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Degenerate(format!(
                "cannot normalize weights summing to {total}"
            )));
        }
        for w in self.weights.values_mut() {
            *w /= total;
        }
        Ok(self)
    }

    /// Weight descending, term ascending.
    pub fn sorted(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| cmp_weight_desc(a.1, b.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Keeps the `tau` heaviest terms and renormalizes.
    pub fn truncate(&self, tau: usize) -> Result<Self> {
        Self::from_weights(self.sorted().into_iter().take(tau))?.normalized()
    }

    /// Multiplies every weight by `f(term)` and drops terms that reach zero.
    pub fn reweight(&self, mut f: impl FnMut(&str) -> f64) -> Result<Self> {
        Self::from_weights(self.iter().map(|(t, w)| (t, w * f(t))))
    }

    /// Two-column `term<TAB>weight` text, in sorted order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, w) in self.sorted() {
            let _ = writeln!(s, "{t}\t{w}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut d = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(t), Some(w), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Invalid(format!("line {}: expected term<TAB>weight", i + 1)));
            };
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("line {}: bad weight `{w}`", i + 1)))?;
            d.add(t, w)?;
        }
        Ok(d)
    }
}

pub(crate) fn cmp_weight_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Convex combination `alpha * a + (1 - alpha) * b`, renormalized.
pub(crate) fn convex_mix(a: &TermDistribution, b: &TermDistribution, alpha: f64) -> Result<TermDistribution> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Invalid(format!("mixture weight {alpha} outside [0, 1]")));
    }
    let mut out = BTreeMap::new();
    for (t, w) in a.iter() {
        *out.entry(t.to_string()).or_insert(0.0) += alpha * w;
    }
    for (t, w) in b.iter() {
        *out.entry(t.to_string()).or_insert(0.0) += (1.0 - alpha) * w;
    }
    TermDistribution::from_weights(out)?.normalized()
}
