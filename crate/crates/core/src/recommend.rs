//! End-to-end recommendation: profile filtering, context weighting, query
//! estimation and location-constrained retrieval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, FusionInput};
use crate::corpus::{relevant_subset, UserProfile};
use crate::dist::TermDistribution;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::index::{Bm25Params, InvertedIndex, RankedList};
use crate::rlm::{self, FeedbackConfig};
use crate::tripctx::{ContextKB, Psi, PsiMode, PsiOovPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Bm25,
    TermSel,
    Bm25TermSel,
    Rlm,
    KdeRlm,
    MostPopular,
    ProfilePopular,
    ContentTag,
    Hybrid,
    Frlm,
    KdeFrlm,
}

impl Model {
    pub const ALL: [Model; 11] = [
        Model::Bm25,
        Model::TermSel,
        Model::Bm25TermSel,
        Model::Rlm,
        Model::KdeRlm,
        Model::MostPopular,
        Model::ProfilePopular,
        Model::ContentTag,
        Model::Hybrid,
        Model::Frlm,
        Model::KdeFrlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Bm25 => "bm25",
            Model::TermSel => "term-sel",
            Model::Bm25TermSel => "bm25-term-sel",
            Model::Rlm => "rlm",
            Model::KdeRlm => "kde-rlm",
            Model::MostPopular => "most-popular",
            Model::ProfilePopular => "profile-popular",
            Model::ContentTag => "content-tag",
            Model::Hybrid => "hybrid",
            Model::Frlm => "frlm",
            Model::KdeFrlm => "kde-frlm",
        }
    }

    /// Whether the model reads word embeddings.
    pub fn uses_embeddings(self) -> bool {
        matches!(self, Model::KdeRlm | Model::Hybrid | Model::KdeFrlm)
    }

    /// Tuned feedback settings for this model under the given psi mode.
    pub fn default_feedback(self, psi_mode: PsiMode) -> FeedbackConfig {
        let base = FeedbackConfig {
            psi_mode,
            ..FeedbackConfig::default()
        };
        match self {
            Model::KdeRlm | Model::Hybrid => FeedbackConfig {
                feedback_docs: 3,
                expansion_terms: 80,
                ..base
            },
            Model::KdeFrlm => FeedbackConfig {
                feedback_docs: 2,
                expansion_terms: 100,
                gamma_h: match psi_mode {
                    PsiMode::Location => 0.6,
                    PsiMode::Single | PsiMode::Joint => 0.7,
                },
                ..base
            },
            _ => base,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Model::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommendConfig {
    pub model: Model,
    pub feedback: FeedbackConfig,
    pub bm25: Bm25Params,
    /// Length of the returned ranking.
    pub top_k: usize,
    /// Normalized rating a profile triple needs to count as relevant.
    pub relevance_threshold: f64,
    /// Mean normalized rating a tag needs to count as popular.
    pub popularity_threshold: f64,
    /// Number of profile terms kept by term selection.
    pub selected_terms: usize,
    pub psi_oov: PsiOovPolicy,
}

impl RecommendConfig {
    /// Tuned defaults for `model` under `psi_mode`.
    pub fn for_model(model: Model, psi_mode: PsiMode) -> Self {
        Self {
            model,
            feedback: model.default_feedback(psi_mode),
            bm25: Bm25Params::default(),
            top_k: 50,
            relevance_threshold: 0.8,
            popularity_threshold: 0.8,
            selected_terms: 25,
            psi_oov: PsiOovPolicy::Neutral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.feedback.validate()?;
        if self.top_k == 0 {
            return Err(Error::Invalid("top_k must be at least 1".into()));
        }
        if self.selected_terms == 0 {
            return Err(Error::Invalid("selected_terms must be at least 1".into()));
        }
        if !(self.bm25.k1 >= 0.0 && (0.0..=1.0).contains(&self.bm25.b)) {
            return Err(Error::Invalid("bm25 needs k1 >= 0 and b in [0, 1]".into()));
        }
        for (name, v) in [
            ("relevance_threshold", self.relevance_threshold),
            ("popularity_threshold", self.popularity_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

impl Default for RecommendConfig {
    fn default() -> Self {
        Self::for_model(Model::Frlm, PsiMode::Location)
    }
}

/// Shared read-only inputs.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub index: &'a InvertedIndex,
    pub store: &'a EmbeddingStore,
    pub kb: &'a ContextKB,
    /// Every user profile, for the cross-user popularity baseline.
    pub profiles: &'a [UserProfile],
}

/// Ranks the POIs of the user's city for one profile.
pub fn recommend(profile: &UserProfile, res: &Resources<'_>, cfg: &RecommendConfig) -> Result<RankedList> {
    cfg.validate()?;
    let fb = &cfg.feedback;
    let location = profile.location.as_str();
    if res.index.docs_in(location).is_empty() {
        return Err(Error::NoDocsInLocation(location.to_string()));
    }
    let psi = Psi::for_context(fb.psi_mode, profile.context, res.kb, res.store, cfg.psi_oov)?;
    let rel = relevant_subset(profile, cfg.relevance_threshold)?;
    let bm25 = |q: &TermDistribution| res.index.bm25_retrieve(q, Some(location), cfg.bm25, cfg.top_k);
    let lm = |q: &TermDistribution| res.index.kl_retrieve(q, Some(location), fb.mu, cfg.top_k);

    match cfg.model {
        Model::Bm25 => bm25(&baselines::tag_query(&rel, &psi)?),
        Model::TermSel => bm25(&term_selection(&rel, &psi, res, cfg)?),
        Model::Bm25TermSel => fuse(
            vec![
                bm25(&baselines::tag_query(&rel, &psi)?)?,
                bm25(&term_selection(&rel, &psi, res, cfg)?)?,
            ],
            cfg.top_k,
        ),
        Model::MostPopular => bm25(&with_psi(
            &baselines::most_popular_k(res.profiles, cfg.popularity_threshold)?,
            &psi,
        )?),
        Model::ProfilePopular => bm25(&with_psi(
            &baselines::profile_popular_k(profile, cfg.popularity_threshold)?,
            &psi,
        )?),
        Model::ContentTag => baselines::content_tag_match(&rel, &psi, res.index, location, cfg.bm25, cfg.top_k),
        Model::Hybrid => fuse(
            vec![
                lm(&estimate(&rel, &psi, res, cfg, Model::KdeRlm)?)?,
                baselines::content_tag_match(&rel, &psi, res.index, location, cfg.bm25, cfg.top_k)?,
            ],
            cfg.top_k,
        ),
        m => lm(&estimate(&rel, &psi, res, cfg, m)?),
    }
}

/// The final query distribution of a feedback model (RLM, KDERLM, FRLM,
/// KDEFRLM), truncated to the expansion size. `rel` must already be the
/// relevant subset of the profile.
pub fn estimate(
    rel: &UserProfile,
    psi: &Psi<'_>,
    res: &Resources<'_>,
    cfg: &RecommendConfig,
    model: Model,
) -> Result<TermDistribution> {
    let fb = &cfg.feedback;
    let location = rel.location.as_str();
    let tags = baselines::tag_query(rel, psi)?;
    let tau = fb.expansion_terms;
    match model {
        Model::Rlm | Model::KdeRlm => {
            let top: Vec<String> = res
                .index
                .kl_retrieve(&tags, Some(location), fb.mu, fb.feedback_docs)?
                .doc_ids()
                .map(str::to_string)
                .collect();
            if top.is_empty() {
                return Err(Error::NoDocsInLocation(location.to_string()));
            }
            let terms = rel.tag_union();
            let feedback = if model == Model::Rlm {
                rlm::rm1_with(terms.iter().map(String::as_str), &top, res.index, psi, fb.zero_floor)?
            } else {
                rlm::kde_rlm(terms.iter().map(String::as_str), &top, res.index, psi, res.store, fb)?
            };
            rlm::mix_rm3(&feedback, &tags, fb.lambda)?.truncate(tau)
        }
        Model::Frlm | Model::KdeFrlm => {
            let profile_model = if model == Model::Frlm {
                rlm::profile_rlm(rel, psi, res.index, fb.zero_floor)?
            } else {
                rlm::kde_profile_rlm(rel, psi, res.store, res.index, fb)?
            };
            let exploit = rlm::mix_rm3(&profile_model, &tags, fb.lambda)?.truncate(tau)?;
            let explore = if model == Model::Frlm {
                rlm::factored_rlm(&exploit, location, psi, res.index, fb)?
            } else {
                rlm::kde_factored_rlm(&exploit, location, psi, res.store, res.index, fb)?
            }
            .truncate(tau)?;
            rlm::combine_frlm(&exploit, &explore, fb.gamma_h)?.truncate(tau)
        }
        other => Err(Error::Invalid(format!("`{other}` is not a feedback model"))),
    }
}

fn term_selection(
    rel: &UserProfile,
    psi: &Psi<'_>,
    res: &Resources<'_>,
    cfg: &RecommendConfig,
) -> Result<TermDistribution> {
    baselines::term_selection(rel, cfg.selected_terms, psi, res.index, cfg.bm25)
}

fn with_psi(d: &TermDistribution, psi: &Psi<'_>) -> Result<TermDistribution> {
    let w = d.reweight(|t| psi.value(t))?;
    if w.is_empty() {
        return Err(Error::Degenerate("every popular tag has zero context weight".into()));
    }
    w.normalized()
}

/// CombSUM over the nonempty lists; a single nonempty list passes through.
fn fuse(lists: Vec<RankedList>, top_k: usize) -> Result<RankedList> {
    let mut lists: Vec<RankedList> = lists.into_iter().filter(|l| !l.is_empty()).collect();
    match lists.len() {
        0 => Ok(RankedList::default()),
        1 => Ok(lists.pop().unwrap_or_default()),
        _ => Ok(baselines::combsum(&FusionInput::new(lists)?, top_k)),
    }
}
