//! Query-formulation baselines (tags, selected profile terms, popular
//! tags), the content + tag matcher, and CombSUM fusion.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::UserProfile;
use crate::dist::{cmp_weight_desc, TermDistribution};
use crate::error::{Error, Result};
use crate::index::{Bm25Params, InvertedIndex, RankedList, ScoredDoc};
use crate::tripctx::Psi;

/// Score normalization applied to each list before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    MinMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    pub lists: Vec<RankedList>,
    pub normalization: Normalization,
}

impl FusionInput {
    pub fn new(lists: Vec<RankedList>) -> Result<Self> {
        if lists.len() < 2 {
            return Err(Error::Invalid(format!(
                "fusion needs at least two lists, got {}",
                lists.len()
            )));
        }
        if let Some(i) = lists.iter().position(RankedList::is_empty) {
            return Err(Error::Invalid(format!("fusion input list {i} is empty")));
        }
        Ok(Self {
            lists,
            normalization: Normalization::MinMax,
        })
    }
}

/// The tag union as a query, each tag weighted by `psi`.
pub fn tag_query(profile: &UserProfile, psi: &Psi<'_>) -> Result<TermDistribution> {
    let tags = profile.tag_union();
    if tags.is_empty() {
        return Err(Error::Invalid(format!("profile `{}` has no tags", profile.user_id)));
    }
    psi_weighted(tags.iter().map(|t| (t.as_str(), 1.0)), psi)
}

fn psi_weighted<'a>(terms: impl IntoIterator<Item = (&'a str, f64)>, psi: &Psi<'_>) -> Result<TermDistribution> {
    let d = TermDistribution::from_weights(terms.into_iter().map(|(t, w)| (t, w * psi.value(t))))?;
    if d.is_empty() {
        return Err(Error::Degenerate("every query term has zero context weight".into()));
    }
    d.normalized()
}

/// Term counts of the profile documents concatenated into one pseudo-document.
fn pseudo_document<'i>(profile: &UserProfile, index: &'i InvertedIndex) -> Result<(BTreeMap<&'i str, u64>, u64)> {
    let mut counts = BTreeMap::new();
    let mut len = 0u64;
    for p in &profile.preferences {
        for (w, tf) in index.doc_terms(&p.doc_id)? {
            *counts.entry(w).or_insert(0) += tf as u64;
        }
        len += index.doc_len(&p.doc_id)? as u64;
    }
    Ok((counts, len))
}

/// BM25 weight of every term of the profile pseudo-document.
pub fn profile_term_weights<'i>(
    profile: &UserProfile,
    index: &'i InvertedIndex,
    params: Bm25Params,
) -> Result<Vec<(&'i str, f64)>> {
    let (counts, len) = pseudo_document(profile, index)?;
    if len == 0 {
        return Err(Error::Invalid(format!(
            "profile `{}` has no document text",
            profile.user_id
        )));
    }
    let norm = params.k1 * (1.0 - params.b + params.b * len as f64 / index.avg_doc_len());
    let mut v: Vec<_> = counts
        .into_iter()
        .map(|(w, tf)| {
            let tf = tf as f64;
            (w, index.bm25_idf(w) * tf * (params.k1 + 1.0) / (tf + norm))
        })
        .collect();
    v.sort_by(|a, b| cmp_weight_desc(a.1, b.1).then_with(|| a.0.cmp(b.0)));
    Ok(v)
}

/// The `k_terms` profile terms with the highest BM25 weight, each carrying
/// weight `psi(t)` in the query.
pub fn term_selection(
    profile: &UserProfile,
    k_terms: usize,
    psi: &Psi<'_>,
    index: &InvertedIndex,
    params: Bm25Params,
) -> Result<TermDistribution> {
    if k_terms == 0 {
        return Err(Error::Invalid("term selection needs k_terms >= 1".into()));
    }
    let ranked = profile_term_weights(profile, index, params)?;
    psi_weighted(ranked.into_iter().take(k_terms).map(|(t, _)| (t, 1.0)), psi)
}

/// Min-max normalizes each list, sums per document and re-ranks. A list
/// whose scores are all equal contributes 1.0 to each of its documents.
pub fn combsum(inputs: &FusionInput, top_k: usize) -> RankedList {
    let mut fused: BTreeMap<&str, f64> = BTreeMap::new();
    for list in &inputs.lists {
        for (id, s) in minmax(list, 1.0) {
            *fused.entry(id).or_insert(0.0) += s;
        }
    }
    RankedList::from_scores(
        fused
            .into_iter()
            .map(|(doc_id, score)| ScoredDoc {
                doc_id: doc_id.to_string(),
                score,
            })
            .collect(),
        top_k,
    )
}

fn minmax(list: &RankedList, constant: f64) -> Vec<(&str, f64)> {
    let (lo, hi) = list
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.score), hi.max(e.score))
        });
    list.entries
        .iter()
        .map(|e| {
            let s = if hi > lo { (e.score - lo) / (hi - lo) } else { constant };
            (e.doc_id.as_str(), s)
        })
        .collect()
}

/// Uniform distribution over the tag terms whose mean rating across the
/// given triples is at least `threshold`.
fn popular_tags<'a>(profiles: impl IntoIterator<Item = &'a UserProfile>, threshold: f64) -> Result<TermDistribution> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut any = false;
    for u in profiles {
        any = true;
        for p in &u.preferences {
            let terms: BTreeSet<&str> = p.tag_terms.iter().map(String::as_str).collect();
            for t in terms {
                let e = sums.entry(t).or_insert((0.0, 0));
                e.0 += p.rating;
                e.1 += 1;
            }
        }
    }
    if !any {
        return Err(Error::Invalid("popular tags need at least one profile".into()));
    }
    let d = TermDistribution::from_weights(
        sums.into_iter()
            .filter(|&(_, (s, n))| s / n as f64 >= threshold)
            .map(|(t, _)| (t, 1.0)),
    )?;
    if d.is_empty() {
        return Err(Error::Degenerate(format!(
            "no tag has a mean rating of at least {threshold}"
        )));
    }
    d.normalized()
}

/// Tags popular across all users.
pub fn most_popular_k(profiles: &[UserProfile], threshold: f64) -> Result<TermDistribution> {
    popular_tags(profiles, threshold)
}

/// Tags popular within one user's history.
pub fn profile_popular_k(profile: &UserProfile, threshold: f64) -> Result<TermDistribution> {
    popular_tags(std::iter::once(profile), threshold)
}

/// Hybrid content + tag matcher over the candidates of `location`.
///
/// Content score: BM25 of the psi-weighted MLE of the profile text. Tag
/// score: psi-weighted Jaccard overlap between the profile tags and the
/// candidate's tags. Each is min-max normalized over the candidates (an
/// all-zero list stays zero) and the two are summed.
pub fn content_tag_match(
    profile: &UserProfile,
    psi: &Psi<'_>,
    index: &InvertedIndex,
    location: &str,
    params: Bm25Params,
    top_k: usize,
) -> Result<RankedList> {
    let cands = index.docs_in(location);
    if cands.is_empty() {
        return Err(Error::NoDocsInLocation(location.to_string()));
    }
    let (counts, len) = pseudo_document(profile, index)?;
    if len == 0 {
        return Err(Error::Invalid(format!(
            "profile `{}` has no document text",
            profile.user_id
        )));
    }
    let query = psi_weighted(counts.iter().map(|(&w, &c)| (w, c as f64)), psi)?;
    let content = index.bm25_retrieve(&query, Some(location), params, cands.len())?;
    let content: BTreeMap<&str, f64> = content.entries.iter().map(|e| (e.doc_id.as_str(), e.score)).collect();

    let profile_tags: BTreeSet<String> = profile.tag_union().into_iter().collect();
    let mut rows = Vec::with_capacity(cands.len());
    for &d in &cands {
        let doc_tags: BTreeSet<&str> = index.doc_tag_terms(d)?.iter().map(String::as_str).collect();
        let mut inter = 0.0;
        let mut union = 0.0;
        for t in profile_tags
            .iter()
            .map(String::as_str)
            .chain(doc_tags.iter().copied())
            .collect::<BTreeSet<_>>()
        {
            let w = psi.value(t);
            union += w;
            if profile_tags.contains(t) && doc_tags.contains(t) {
                inter += w;
            }
        }
        let tag = if union > 0.0 { inter / union } else { 0.0 };
        rows.push((d, content.get(d).copied().unwrap_or(0.0), tag));
    }
    let c = minmax_zero(rows.iter().map(|r| r.1));
    let t = minmax_zero(rows.iter().map(|r| r.2));
    Ok(RankedList::from_scores(
        rows.iter()
            .zip(c.zip(t))
            .map(|(r, (c, t))| ScoredDoc {
                doc_id: r.0.to_string(),
                score: c + t,
            })
            .collect(),
        top_k,
    ))
}

/// Min-max over raw scores; a constant list maps to 0 if it is all zero, 1 otherwise.
fn minmax_zero(scores: impl Iterator<Item = f64> + Clone) -> impl Iterator<Item = f64> {
    let (lo, hi) = scores
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    scores.map(move |s| {
        if hi > lo {
            (s - lo) / (hi - lo)
        } else if hi == 0.0 {
            0.0
        } else {
            1.0
        }
    })
}
