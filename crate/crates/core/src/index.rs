//! Immutable inverted index with BM25 and query-likelihood (KL) retrieval.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::PoiDocument;
use crate::dist::{cmp_weight_desc, TermDistribution};
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMetadata {
    pub format_version: u32,
    pub pipeline: PipelineConfig,
    pub num_docs: usize,
    pub num_terms: usize,
    pub collection_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Documents ordered by score descending, doc id ascending on ties.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<ScoredDoc>,
}

impl RankedList {
    /// Sorts and truncates arbitrary (doc, score) pairs.
    pub fn from_scores(mut scored: Vec<ScoredDoc>, top_k: usize) -> Self {
        scored.sort_by(|a, b| cmp_weight_desc(a.score, b.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        scored.truncate(top_k);
        Self { entries: scored }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }
}

type TermId = u32;
type DocIdx = u32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    metadata: IndexMetadata,
    /// Sorted ascending; a term's id is its position.
    vocab: Vec<String>,
    /// Sorted ascending; a document's index is its position.
    doc_ids: Vec<String>,
    cities: Vec<String>,
    doc_len: Vec<u32>,
    coll_tf: Vec<u64>,
    /// Per term, (doc, tf) sorted by doc.
    postings: Vec<Vec<(DocIdx, u32)>>,
    /// Per document, (term, tf) sorted by term.
    forward: Vec<Vec<(TermId, u32)>>,
    /// Per document, its distinct tag terms, sorted.
    doc_tags: Vec<Vec<String>>,
    #[serde(skip)]
    term_lookup: HashMap<String, TermId>,
    #[serde(skip)]
    doc_lookup: HashMap<String, DocIdx>,
    #[serde(skip)]
    city_docs: BTreeMap<String, Vec<DocIdx>>,
}

impl InvertedIndex {
    pub fn build(docs: &[PoiDocument], pipeline: &PipelineConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCollection);
        }
        let mut order: Vec<&PoiDocument> = docs.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        for w in order.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateId(w[0].id.clone()));
            }
        }

        let vocab: Vec<String> = order
            .iter()
            .flat_map(|d| d.terms())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        let term_lookup: HashMap<String, TermId> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();

        let mut postings = vec![Vec::new(); vocab.len()];
        let mut coll_tf = vec![0u64; vocab.len()];
        let mut forward = Vec::with_capacity(order.len());
        let mut doc_len = Vec::with_capacity(order.len());
        for (di, doc) in order.iter().enumerate() {
            let mut counts: BTreeMap<TermId, u32> = BTreeMap::new();
            let mut len = 0u32;
            for t in doc.terms() {
                *counts.entry(term_lookup[t]).or_insert(0) += 1;
                len += 1;
            }
            for (&tid, &tf) in &counts {
                postings[tid as usize].push((di as DocIdx, tf));
                coll_tf[tid as usize] += tf as u64;
            }
            forward.push(counts.into_iter().collect());
            doc_len.push(len);
        }

        let collection_len = doc_len.iter().map(|&l| l as u64).sum();
        let mut index = Self {
            metadata: IndexMetadata {
                format_version: INDEX_FORMAT_VERSION,
                pipeline: pipeline.clone(),
                num_docs: order.len(),
                num_terms: vocab.len(),
                collection_len,
            },
            vocab,
            doc_ids: order.iter().map(|d| d.id.clone()).collect(),
            cities: order.iter().map(|d| d.city.clone()).collect(),
            doc_len,
            coll_tf,
            postings,
            forward,
            doc_tags: order
                .iter()
                .map(|d| {
                    d.tag_terms
                        .iter()
                        .cloned()
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect()
                })
                .collect(),
            term_lookup,
            doc_lookup: HashMap::new(),
            city_docs: BTreeMap::new(),
        };
        index.rebuild_lookups();
        Ok(index)
    }

    fn rebuild_lookups(&mut self) {
        self.term_lookup = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        self.doc_lookup = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as DocIdx))
            .collect();
        self.city_docs.clear();
        for (i, c) in self.cities.iter().enumerate() {
            self.city_docs.entry(c.clone()).or_default().push(i as DocIdx);
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self).map_err(|e| Error::Invalid(format!("serializing index: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut index: Self =
            serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        if index.metadata.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "index format version {} (expected {INDEX_FORMAT_VERSION})",
                index.metadata.format_version
            )));
        }
        index.rebuild_lookups();
        Ok(index)
    }

    pub fn metadata(&self) -> &IndexMetadata {
        &self.metadata
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn collection_len(&self) -> u64 {
        self.metadata.collection_len
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.collection_len() as f64 / self.num_docs() as f64
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lookup.contains_key(doc_id)
    }

    pub fn city_of(&self, doc_id: &str) -> Option<&str> {
        self.doc_lookup.get(doc_id).map(|&i| self.cities[i as usize].as_str())
    }

    pub fn doc_len(&self, doc_id: &str) -> Result<u32> {
        Ok(self.doc_len[self.idx(doc_id)? as usize])
    }

    pub fn cities(&self) -> impl Iterator<Item = &str> {
        self.city_docs.keys().map(String::as_str)
    }

    /// Document ids located in `city`, ascending.
    pub fn docs_in(&self, city: &str) -> Vec<&str> {
        self.city_docs
            .get(city)
            .map(|v| v.iter().map(|&i| self.doc_ids[i as usize].as_str()).collect())
            .unwrap_or_default()
    }

    pub fn coll_tf(&self, term: &str) -> u64 {
        self.term_lookup.get(term).map_or(0, |&t| self.coll_tf[t as usize])
    }

    pub fn df(&self, term: &str) -> usize {
        self.term_lookup
            .get(term)
            .map_or(0, |&t| self.postings[t as usize].len())
    }

    /// Postings of `term` as (doc_id, tf), ascending by doc id.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.term_lookup
            .get(term)
            .map(|&t| {
                self.postings[t as usize]
                    .iter()
                    .map(|&(d, tf)| (self.doc_ids[d as usize].as_str(), tf))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(String::as_str)
    }

    pub fn tf(&self, term: &str, doc_id: &str) -> Result<u32> {
        let d = self.idx(doc_id)?;
        Ok(self.tf_idx(term, d))
    }

    /// (term, tf) pairs of a document, ascending by term.
    pub fn doc_terms(&self, doc_id: &str) -> Result<Vec<(&str, u32)>> {
        let d = self.idx(doc_id)?;
        Ok(self.forward[d as usize]
            .iter()
            .map(|&(t, tf)| (self.vocab[t as usize].as_str(), tf))
            .collect())
    }

    /// Distinct tag terms of a document, ascending.
    pub fn doc_tag_terms(&self, doc_id: &str) -> Result<&[String]> {
        let d = self.idx(doc_id)?;
        Ok(&self.doc_tags[d as usize])
    }

    fn idx(&self, doc_id: &str) -> Result<DocIdx> {
        self.doc_lookup
            .get(doc_id)
            .copied()
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))
    }

    fn tf_idx(&self, term: &str, d: DocIdx) -> u32 {
        let Some(&tid) = self.term_lookup.get(term) else {
            return 0;
        };
        let fwd = &self.forward[d as usize];
        fwd.binary_search_by_key(&tid, |&(t, _)| t).map_or(0, |i| fwd[i].1)
    }

    /// Dirichlet-smoothed P(w|d); `mu = 0` gives the maximum-likelihood estimate.
    pub fn lm_prob(&self, term: &str, doc_id: &str, mu: f64) -> Result<f64> {
        if mu.is_nan() || mu < 0.0 {
            return Err(Error::Invalid(format!("smoothing mu must be >= 0, got {mu}")));
        }
        let d = self.idx(doc_id)?;
        Ok(self.lm_prob_idx(term, d, mu))
    }

    fn lm_prob_idx(&self, term: &str, d: DocIdx, mu: f64) -> f64 {
        let tf = self.tf_idx(term, d) as f64;
        let len = self.doc_len[d as usize] as f64;
        if mu == 0.0 {
            return if len > 0.0 { tf / len } else { 0.0 };
        }
        let p_coll = self.coll_tf(term) as f64 / self.collection_len() as f64;
        (tf + mu * p_coll) / (len + mu)
    }

    fn candidates(&self, location: Option<&str>) -> Vec<DocIdx> {
        match location {
            Some(city) => self.city_docs.get(city).cloned().unwrap_or_default(),
            None => (0..self.num_docs() as DocIdx).collect(),
        }
    }

    pub fn bm25_idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 with each term's contribution scaled by its query weight. Only
    /// documents matching at least one query term are returned.
    pub fn bm25_retrieve(
        &self,
        query: &TermDistribution,
        location: Option<&str>,
        params: Bm25Params,
        top_k: usize,
    ) -> Result<RankedList> {
        if query.is_empty() {
            return Err(Error::Invalid("empty BM25 query".into()));
        }
        if top_k == 0 {
            return Err(Error::Invalid("top_k must be at least 1".into()));
        }
        let avgdl = self.avg_doc_len();
        let mut scores: BTreeMap<DocIdx, f64> = BTreeMap::new();
        for (term, qw) in query.iter() {
            let Some(&tid) = self.term_lookup.get(term) else {
                continue;
            };
            let idf = self.bm25_idf(term);
            for &(d, tf) in &self.postings[tid as usize] {
                if let Some(city) = location {
                    if self.cities[d as usize] != city {
                        continue;
                    }
                }
                let tf = tf as f64;
                let norm = params.k1 * (1.0 - params.b + params.b * self.doc_len[d as usize] as f64 / avgdl);
                *scores.entry(d).or_insert(0.0) += qw * idf * tf * (params.k1 + 1.0) / (tf + norm);
            }
        }
        Ok(RankedList::from_scores(
            scores
                .into_iter()
                .map(|(d, score)| ScoredDoc {
                    doc_id: self.doc_ids[d as usize].clone(),
                    score,
                })
                .collect(),
            top_k,
        ))
    }

    /// Ranks candidates by `sum_w theta(w) * ln P(w|d)` under Dirichlet
    /// smoothing. Terms whose smoothed probability is zero contribute nothing.
    pub fn kl_retrieve(
        &self,
        theta: &TermDistribution,
        location: Option<&str>,
        mu: f64,
        top_k: usize,
    ) -> Result<RankedList> {
        if !theta.is_normalized() {
            return Err(Error::NotNormalized(theta.sum()));
        }
        if top_k == 0 {
            return Err(Error::Invalid("top_k must be at least 1".into()));
        }
        if mu.is_nan() || mu < 0.0 {
            return Err(Error::Invalid(format!("smoothing mu must be >= 0, got {mu}")));
        }
        let cands = self.candidates(location);
        let mut scores = vec![0.0f64; cands.len()];
        for (term, w) in theta.sorted() {
            for (s, &d) in scores.iter_mut().zip(&cands) {
                let p = self.lm_prob_idx(term, d, mu);
                if p > 0.0 {
                    *s += w * p.ln();
                }
            }
        }
        Ok(RankedList::from_scores(
            cands
                .iter()
                .zip(scores)
                .map(|(&d, score)| ScoredDoc {
                    doc_id: self.doc_ids[d as usize].clone(),
                    score,
                })
                .collect(),
            top_k,
        ))
    }
}
