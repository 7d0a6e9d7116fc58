//! Text normalization shared by documents, tags and knowledge-base phrases.

use std::collections::BTreeSet;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

/// Separator used when a multi-word tag is kept as a single unit token.
pub const UNIT_JOINER: char = '_';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    None,
    #[default]
    Porter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub lowercase: bool,
    /// `None` disables stopword removal.
    pub stopwords: Option<BTreeSet<String>>,
    pub stemmer: StemmerKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: Some(default_stopwords()),
            stemmer: StemmerKind::Porter,
        }
    }
}

impl PipelineConfig {
    /// Lowercasing only; no stopwords, no stemming.
    pub fn raw() -> Self {
        Self {
            lowercase: true,
            stopwords: None,
            stemmer: StemmerKind::None,
        }
    }

    pub fn build(&self) -> Pipeline {
        Pipeline {
            config: self.clone(),
            stemmer: match self.stemmer {
                StemmerKind::None => None,
                StemmerKind::Porter => Some(Stemmer::create(Algorithm::English)),
            },
        }
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    stemmer: Option<Stemmer>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("config", &self.config).finish()
    }
}

impl Pipeline {
    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Splits on anything that is not alphanumeric, then lowercases, filters
    /// stopwords and stems.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .filter_map(|raw| self.token(raw))
            .collect()
    }

    fn token(&self, raw: &str) -> Option<String> {
        let word = if self.config.lowercase {
            raw.to_lowercase()
        } else {
            raw.to_string()
        };
        if let Some(stop) = &self.config.stopwords {
            if stop.contains(&word) {
                return None;
            }
        }
        Some(match &self.stemmer {
            Some(s) => s.stem(&word).into_owned(),
            None => word,
        })
    }

    /// Tokens for one tag. A multi-word tag yields its joined unit token
    /// followed by its constituents; a single-word tag yields one token.
    pub fn tag_tokens(&self, tag: &str) -> Vec<String> {
        let parts = self.tokens(tag);
        match parts.len() {
            0 => Vec::new(),
            1 => parts,
            _ => {
                let mut out = Vec::with_capacity(parts.len() + 1);
                out.push(join_unit(&parts));
                out.extend(parts);
                out
            }
        }
    }

    /// The single key a phrase is matched under (the unit token for
    /// multi-word phrases).
    pub fn phrase_key(&self, phrase: &str) -> Option<String> {
        let parts = self.tokens(phrase);
        if parts.is_empty() {
            None
        } else {
            Some(join_unit(&parts))
        }
    }
}

fn join_unit(parts: &[String]) -> String {
    let mut s = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            s.push(UNIT_JOINER);
        }
        s.push_str(p);
    }
    s
}

const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

pub fn default_stopwords() -> BTreeSet<String> {
    STOPWORDS.iter().map(|s| s.to_string()).collect()
}
