//! Relevance-model estimators: RM1/RM3, the profile RLM, the factored RLM,
//! their kernel-density (word-embedding) generalizations and the
//! exploitation/exploration combination.
//!
//! All co-occurrence weights use maximum-likelihood document models
//! (`P(w|D) = tf / |D|`). Products of per-document probabilities are
//! accumulated in log space and rescaled by the largest document weight
//! before exponentiation; the common factor cancels on normalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::UserProfile;
use crate::dist::{convex_mix, TermDistribution};
use crate::embeddings::{EmbeddingStore, KernelConfig};
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::tripctx::{Psi, PsiMode};

/// What happens to a (w, t) kernel pair when either word has no vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelOovPolicy {
    /// The pair contributes nothing.
    #[default]
    Skip,
    /// The pair contributes the zero-distance kernel value when `w == t`,
    /// nothing otherwise.
    ExactMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// M: number of feedback documents.
    pub feedback_docs: usize,
    /// tau: number of expansion terms kept after each estimation stage.
    pub expansion_terms: usize,
    /// Weight of the exploitation (profile) model in the final mixture.
    pub gamma_h: f64,
    /// RM3 weight of the feedback model against the original tag query.
    pub lambda: f64,
    pub kernel: KernelConfig,
    pub kernel_oov: KernelOovPolicy,
    pub psi_mode: PsiMode,
    /// Stand-in for a zero P(t|d) inside co-occurrence products.
    pub zero_floor: f64,
    /// Dirichlet prior for the retrieval document models.
    pub mu: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            feedback_docs: 5,
            expansion_terms: 25,
            gamma_h: 0.8,
            lambda: 0.6,
            kernel: KernelConfig::default(),
            kernel_oov: KernelOovPolicy::Skip,
            psi_mode: PsiMode::Location,
            zero_floor: 1e-9,
            mu: 1000.0,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if self.feedback_docs == 0 {
            return bad("feedback_docs (M) must be at least 1");
        }
        if self.expansion_terms == 0 {
            return bad("expansion_terms (tau) must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma_h) {
            return bad("gamma_h must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.zero_floor >= 0.0 && self.zero_floor < 1.0) {
            return bad("zero_floor must lie in [0, 1)");
        }
        if self.mu.is_nan() || self.mu < 0.0 {
            return bad("mu must be >= 0");
        }
        self.kernel.validate()
    }
}

/// A feedback document: its multiplicative scale and the log of its
/// co-occurrence factor.
struct WeightedDoc<'a> {
    id: &'a str,
    scale: f64,
    log_factor: f64,
}

fn ln_floored(p: f64, floor: f64) -> f64 {
    p.max(floor).ln()
}

/// `weight(w) = psi(w) * sum_d scale_d * exp(log_factor_d) * P(w|d)`.
fn doc_mixture(index: &InvertedIndex, docs: &[WeightedDoc<'_>], psi: &Psi<'_>) -> Result<TermDistribution> {
    let max_log = docs
        .iter()
        .filter(|d| d.scale > 0.0)
        .map(|d| d.log_factor)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_log == f64::NEG_INFINITY {
        return Err(Error::Degenerate(
            "no feedback document co-occurs with the observed terms".into(),
        ));
    }
    let mut acc: BTreeMap<&str, f64> = BTreeMap::new();
    for d in docs {
        let f = d.scale * (d.log_factor - max_log).exp();
        if f == 0.0 {
            continue;
        }
        let len = index.doc_len(d.id)? as f64;
        for (w, tf) in index.doc_terms(d.id)? {
            *acc.entry(w).or_insert(0.0) += f * tf as f64 / len;
        }
    }
    let weighted = TermDistribution::from_weights(acc.into_iter().map(|(w, x)| (w, x * psi.value(w))))?;
    if weighted.is_empty() {
        return Err(Error::Degenerate("all term weights are zero".into()));
    }
    weighted.normalized()
}

fn dedup<'a>(terms: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut v: Vec<&str> = terms.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Relevance model with psi weighting and a floored plain product over
/// the query terms. `estimate_rm1` is the unweighted, unfloored case.
pub fn rm1_with<'a>(
    query: impl IntoIterator<Item = &'a str>,
    top_docs: &[String],
    index: &InvertedIndex,
    psi: &Psi<'_>,
    zero_floor: f64,
) -> Result<TermDistribution> {
    let query = dedup(query);
    if query.is_empty() {
        return Err(Error::Invalid("relevance model needs at least one query term".into()));
    }
    if top_docs.is_empty() {
        return Err(Error::Invalid("relevance model needs feedback documents".into()));
    }
    let docs = top_docs
        .iter()
        .map(|d| {
            let log_factor = query
                .iter()
                .map(|q| Ok(ln_floored(index.lm_prob(q, d, 0.0)?, zero_floor)))
                .sum::<Result<f64>>()?;
            Ok(WeightedDoc {
                id: d,
                scale: 1.0,
                log_factor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    doc_mixture(index, &docs, psi)
}

/// RM1: `P(w|Q) ∝ sum_D P(w|D) prod_q P(q|D)` over the feedback documents.
pub fn estimate_rm1(query: &[&str], top_docs: &[String], index: &InvertedIndex) -> Result<TermDistribution> {
    rm1_with(query.iter().copied(), top_docs, index, &Psi::constant(), 0.0)
}

/// RM3: `lambda * feedback + (1 - lambda) * query`.
pub fn mix_rm3(feedback: &TermDistribution, query_mle: &TermDistribution, lambda: f64) -> Result<TermDistribution> {
    require_normalized(feedback)?;
    require_normalized(query_mle)?;
    convex_mix(feedback, query_mle, lambda)
}

/// `gamma_h * exploit + (1 - gamma_h) * explore`.
pub fn combine_frlm(exploit: &TermDistribution, explore: &TermDistribution, gamma_h: f64) -> Result<TermDistribution> {
    require_normalized(exploit)?;
    require_normalized(explore)?;
    convex_mix(exploit, explore, gamma_h)
}

fn require_normalized(d: &TermDistribution) -> Result<()> {
    if d.is_normalized() {
        Ok(())
    } else {
        Err(Error::NotNormalized(d.sum()))
    }
}

fn require_tags(profile: &UserProfile) -> Result<Vec<String>> {
    let tags = profile.tag_union();
    if tags.is_empty() {
        return Err(Error::Invalid(format!(
            "profile `{}` has no tags to act as the query",
            profile.user_id
        )));
    }
    Ok(tags)
}

/// Exploitation model over the user's rated history:
/// `P(w|theta_U) ∝ sum_(D,T,r) r P(w|D) psi(w) prod_(t in T') P(t|D)`.
pub fn profile_rlm(
    profile: &UserProfile,
    psi: &Psi<'_>,
    index: &InvertedIndex,
    zero_floor: f64,
) -> Result<TermDistribution> {
    let tags = require_tags(profile)?;
    let docs = profile
        .preferences
        .iter()
        .map(|p| {
            let log_factor = tags
                .iter()
                .map(|t| Ok(ln_floored(index.lm_prob(t, &p.doc_id, 0.0)?, zero_floor)))
                .sum::<Result<f64>>()?;
            Ok(WeightedDoc {
                id: &p.doc_id,
                scale: p.rating,
                log_factor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    doc_mixture(index, &docs, psi)
}

fn explore_docs(
    profile_dist: &TermDistribution,
    location: &str,
    index: &InvertedIndex,
    cfg: &FeedbackConfig,
) -> Result<Vec<String>> {
    require_normalized(profile_dist)?;
    let top = index.kl_retrieve(profile_dist, Some(location), cfg.mu, cfg.feedback_docs)?;
    if top.is_empty() {
        return Err(Error::NoDocsInLocation(location.to_string()));
    }
    Ok(top.doc_ids().map(str::to_string).collect())
}

/// `sum_t theta(t) ln max(P(t|d), floor)`: the geometrically weighted
/// product over the expansion terms.
fn geometric_log_factor(
    profile_dist: &TermDistribution,
    doc: &str,
    index: &InvertedIndex,
    zero_floor: f64,
) -> Result<f64> {
    profile_dist
        .iter()
        .map(|(t, th)| Ok(th * ln_floored(index.lm_prob(t, doc, 0.0)?, zero_floor)))
        .sum()
}

/// Exploration model over the top-M documents of the current city, with
/// the profile model as the observed terms:
/// `P(w|theta_{U,l}) ∝ sum_d P(w|d) psi(w) prod_t P(t|d)^theta(t)`.
pub fn factored_rlm(
    profile_dist: &TermDistribution,
    location: &str,
    psi: &Psi<'_>,
    index: &InvertedIndex,
    cfg: &FeedbackConfig,
) -> Result<TermDistribution> {
    let top = explore_docs(profile_dist, location, index, cfg)?;
    let docs = top
        .iter()
        .map(|d| {
            Ok(WeightedDoc {
                id: d,
                scale: 1.0,
                log_factor: geometric_log_factor(profile_dist, d, index, cfg.zero_floor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    doc_mixture(index, &docs, psi)
}

fn kernel_value(store: &EmbeddingStore, w: &str, t: &str, kernel: &KernelConfig, oov: KernelOovPolicy) -> Option<f64> {
    match store.gaussian_kernel(w, t, kernel) {
        Some(k) => Some(k),
        None if oov == KernelOovPolicy::ExactMatch && w == t => Some(kernel.eval_sq_dist(0.0)),
        None => None,
    }
}

/// `weight(w) = psi(w) * base(w) * sum_t pivot(t) * K(w, t)`.
fn kde_estimate(
    base: &BTreeMap<&str, f64>,
    pivots: &[(&str, f64)],
    psi: &Psi<'_>,
    store: &EmbeddingStore,
    kernel: &KernelConfig,
    oov: KernelOovPolicy,
) -> Result<TermDistribution> {
    kernel.validate()?;
    let mut out = TermDistribution::new();
    for (&w, &bw) in base {
        if bw == 0.0 {
            continue;
        }
        let spread: f64 = pivots
            .iter()
            .filter_map(|&(t, pt)| kernel_value(store, w, t, kernel, oov).map(|k| pt * k))
            .sum();
        out.add(w, psi.value(w) * bw * spread)?;
    }
    if out.is_empty() {
        return Err(Error::Degenerate(
            "kernel density estimate is zero everywhere (no in-vocabulary term/pivot pairs?)".into(),
        ));
    }
    out.normalized()
}

/// MLE over the concatenation of the given documents.
fn concatenated_mle<'i>(docs: &[&str], index: &'i InvertedIndex) -> Result<BTreeMap<&'i str, f64>> {
    let mut counts: BTreeMap<&'i str, f64> = BTreeMap::new();
    let mut total = 0.0;
    for d in docs {
        for (w, tf) in index.doc_terms(d)? {
            *counts.entry(w).or_insert(0.0) += tf as f64;
        }
        total += index.doc_len(d)? as f64;
    }
    if total > 0.0 {
        counts.values_mut().for_each(|c| *c /= total);
    }
    Ok(counts)
}

/// Kernel-density RLM over feedback documents (the tags act as pivots):
/// `f(w) ∝ sum_q P(w|M) psi(w) P(q|M) K(w, q)` with `M` the concatenation of
/// the feedback documents.
pub fn kde_rlm<'a>(
    query: impl IntoIterator<Item = &'a str>,
    top_docs: &[String],
    index: &InvertedIndex,
    psi: &Psi<'_>,
    store: &EmbeddingStore,
    cfg: &FeedbackConfig,
) -> Result<TermDistribution> {
    let query = dedup(query);
    if query.is_empty() || top_docs.is_empty() {
        return Err(Error::Invalid(
            "kernel RLM needs query terms and feedback documents".into(),
        ));
    }
    let ids: Vec<&str> = top_docs.iter().map(String::as_str).collect();
    let model = concatenated_mle(&ids, index)?;
    let pivots: Vec<(&str, f64)> = query
        .iter()
        .map(|&q| (q, model.get(q).copied().unwrap_or(0.0)))
        .collect();
    kde_estimate(&model, &pivots, psi, store, &cfg.kernel, cfg.kernel_oov)
}

/// Kernel-density exploitation model:
/// `P(w|theta_U) ∝ sum_(t in T') [sum_(D,T,r) r P(w|D)] psi(w) P(t|M) K(w, t)`
/// where `M` concatenates the profile documents.
pub fn kde_profile_rlm(
    profile: &UserProfile,
    psi: &Psi<'_>,
    store: &EmbeddingStore,
    index: &InvertedIndex,
    cfg: &FeedbackConfig,
) -> Result<TermDistribution> {
    let tags = require_tags(profile)?;
    let mut rated: BTreeMap<&str, f64> = BTreeMap::new();
    for p in &profile.preferences {
        let len = index.doc_len(&p.doc_id)? as f64;
        for (w, tf) in index.doc_terms(&p.doc_id)? {
            *rated.entry(w).or_insert(0.0) += p.rating * tf as f64 / len;
        }
    }
    let ids: Vec<&str> = profile.preferences.iter().map(|p| p.doc_id.as_str()).collect();
    let model = concatenated_mle(&ids, index)?;
    let pivots: Vec<(&str, f64)> = tags
        .iter()
        .map(|t| (t.as_str(), model.get(t.as_str()).copied().unwrap_or(0.0)))
        .collect();
    kde_estimate(&rated, &pivots, psi, store, &cfg.kernel, cfg.kernel_oov)
}

/// Kernel-density exploration model:
/// `P(w|theta_{U,l}) ∝ sum_d P(w|d) prod_t P(t|d)^theta(t) psi(w) sum_t K(w, t)`
/// over the top-M documents of the current city. The kernel is summed
/// (unweighted) over the expansion terms `t` of `profile_dist`.
pub fn kde_factored_rlm(
    profile_dist: &TermDistribution,
    location: &str,
    psi: &Psi<'_>,
    store: &EmbeddingStore,
    index: &InvertedIndex,
    cfg: &FeedbackConfig,
) -> Result<TermDistribution> {
    cfg.kernel.validate()?;
    let top = explore_docs(profile_dist, location, index, cfg)?;
    let docs = top
        .iter()
        .map(|d| {
            Ok(WeightedDoc {
                id: d,
                scale: 1.0,
                log_factor: geometric_log_factor(profile_dist, d, index, cfg.zero_floor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cooc = doc_mixture(index, &docs, &Psi::constant())?;
    let pivots: Vec<(&str, f64)> = profile_dist.terms().map(|t| (t, 1.0)).collect();
    let base: BTreeMap<&str, f64> = cooc.iter().collect();
    kde_estimate(&base, &pivots, psi, store, &cfg.kernel, cfg.kernel_oov)
}
