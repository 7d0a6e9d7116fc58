//! Seeded synthetic collections with planted topical relevance.
//!
//! Every POI belongs to one topic and mixes topic words, topic tags and
//! background noise; some POIs also mention the tags of an unrelated
//! topic. Each user prefers one topic, has rated POIs in other cities and
//! is judged on the POIs of their own city: grade 2 for the preferred
//! topic, 1 for its sibling topic, 0 otherwise. Word vectors cluster by
//! topic, with sibling topics close to each other.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{
    normalize_rating, AccompaniedBy, PoiDocument, PreferenceTriple, RatingScale, TripContext, TripDuration, TripType,
    UserProfile,
};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::pipeline::Pipeline;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub num_pois: usize,
    pub num_users: usize,
    pub num_cities: usize,
    /// Must be even: topics come in sibling pairs.
    pub num_topics: usize,
    pub content_words_per_topic: usize,
    pub tags_per_topic: usize,
    pub noise_words: usize,
    pub doc_len: usize,
    /// Fraction of a document's tokens drawn from its topic vocabulary.
    pub topic_share: f64,
    /// Probability that a POI also mentions the tags of an unrelated topic.
    pub decoy_rate: f64,
    pub profile_size: usize,
    pub dim: usize,
    /// Spread of word vectors around their topic centroid.
    pub embedding_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_pois: 200,
            num_users: 10,
            num_cities: 4,
            num_topics: 8,
            content_words_per_topic: 12,
            tags_per_topic: 3,
            noise_words: 120,
            doc_len: 30,
            topic_share: 0.3,
            decoy_rate: 0.5,
            profile_size: 12,
            dim: 16,
            embedding_noise: 0.35,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawPoi {
    pub id: String,
    pub city: String,
    pub text: String,
    pub tags: Vec<String>,
    #[serde(skip)]
    pub topic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawPreference {
    pub doc_id: String,
    pub tags: Vec<String>,
    pub rating: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawProfile {
    pub user_id: String,
    pub location: String,
    pub context: TripContext,
    pub preferences: Vec<RawPreference>,
    #[serde(skip)]
    pub topic: usize,
}

/// A generated collection in the on-disk record shapes.
#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub pois: Vec<RawPoi>,
    pub profiles: Vec<RawProfile>,
    pub qrels: Qrels,
    /// Word vectors (not yet normalized) for every generated word.
    pub vectors: Vec<(String, Vec<f64>)>,
}

fn content_word(t: usize, k: usize) -> String {
    format!("w{t}x{k}")
}

fn tag_word(t: usize, k: usize) -> String {
    format!("g{t}x{k}")
}

fn noise_word(k: usize) -> String {
    format!("n{k}")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn sibling(t: usize) -> usize {
    t ^ 1
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCollection> {
    if cfg.num_topics < 4 || !cfg.num_topics.is_multiple_of(2) {
        return Err(Error::Invalid("synthetic topics must be an even number >= 4".into()));
    }
    if cfg.num_cities < 2 || cfg.num_pois < cfg.num_cities || cfg.num_users == 0 {
        return Err(Error::Invalid(
            "synthetic collection needs >= 2 cities, a POI per city and a user".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nt = cfg.num_topics;

    // Word vectors: sibling topics share most of their centroid.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(nt);
    for t in 0..nt {
        let fresh: Vec<f64> = (0..cfg.dim).map(|_| gaussian(&mut rng)).collect();
        let c = if t % 2 == 1 {
            centroids[t - 1]
                .iter()
                .zip(&fresh)
                .map(|(a, b)| 0.8 * a + 0.45 * b)
                .collect()
        } else {
            fresh
        };
        centroids.push(c);
    }
    let mut vectors = Vec::new();
    for (t, c) in centroids.iter().enumerate() {
        let words = (0..cfg.content_words_per_topic)
            .map(|k| content_word(t, k))
            .chain((0..cfg.tags_per_topic).map(|k| tag_word(t, k)));
        for w in words {
            let v = c
                .iter()
                .map(|x| x + cfg.embedding_noise * 2.0 * gaussian(&mut rng))
                .collect();
            vectors.push((w, v));
        }
    }
    for k in 0..cfg.noise_words {
        vectors.push((noise_word(k), (0..cfg.dim).map(|_| 2.0 * gaussian(&mut rng)).collect()));
    }

    let mut pois = Vec::with_capacity(cfg.num_pois);
    for i in 0..cfg.num_pois {
        let topic = rng.random_range(0..nt);
        let city = format!("city{}", i % cfg.num_cities);
        let mut words = Vec::with_capacity(cfg.doc_len + 2);
        for _ in 0..cfg.doc_len {
            let r: f64 = rng.random();
            let w = if r < cfg.topic_share * 0.8 {
                content_word(topic, rng.random_range(0..cfg.content_words_per_topic))
            } else if r < cfg.topic_share {
                tag_word(topic, rng.random_range(0..cfg.tags_per_topic))
            } else {
                noise_word(rng.random_range(0..cfg.noise_words))
            };
            words.push(w);
        }
        let mut tags = vec![tag_word(topic, rng.random_range(0..cfg.tags_per_topic))];
        if rng.random::<f64>() < cfg.decoy_rate {
            let mut decoy = rng.random_range(0..nt);
            while decoy / 2 == topic / 2 {
                decoy = rng.random_range(0..nt);
            }
            let d = tag_word(decoy, rng.random_range(0..cfg.tags_per_topic));
            words.push(d.clone());
            words.push(d.clone());
            tags.push(d);
        }
        tags.dedup();
        pois.push(RawPoi {
            id: format!("p{i:03}"),
            city,
            text: words.join(" "),
            tags,
            topic,
        });
    }

    let contexts = [
        TripContext {
            trip_type: TripType::Holiday,
            trip_duration: TripDuration::WeekendTrip,
            accompanied_by: AccompaniedBy::Friends,
        },
        TripContext {
            trip_type: TripType::Business,
            trip_duration: TripDuration::NightOut,
            accompanied_by: AccompaniedBy::Alone,
        },
        TripContext {
            trip_type: TripType::Other,
            trip_duration: TripDuration::DayTrip,
            accompanied_by: AccompaniedBy::Family,
        },
    ];
    let mut profiles = Vec::with_capacity(cfg.num_users);
    let mut qrels = Qrels::default();
    for u in 0..cfg.num_users {
        let topic = u % nt;
        let city = format!("city{}", u % cfg.num_cities);
        let elsewhere: Vec<&RawPoi> = pois.iter().filter(|p| p.city != city).collect();
        let liked: Vec<&RawPoi> = elsewhere.iter().copied().filter(|p| p.topic == topic).collect();
        let other: Vec<&RawPoi> = elsewhere.iter().copied().filter(|p| p.topic / 2 != topic / 2).collect();
        if liked.is_empty() || other.is_empty() {
            return Err(Error::Invalid(format!("synthetic user {u} has no POIs to rate")));
        }
        let mut preferences = Vec::with_capacity(cfg.profile_size);
        for j in 0..cfg.profile_size {
            let (p, rating) = if j % 2 == 0 {
                (liked[rng.random_range(0..liked.len())], rng.random_range(3..=4))
            } else {
                (other[rng.random_range(0..other.len())], rng.random_range(-1..=2))
            };
            if preferences.iter().any(|x: &RawPreference| x.doc_id == p.id) {
                continue;
            }
            preferences.push(RawPreference {
                doc_id: p.id.clone(),
                tags: p.tags.clone(),
                rating,
            });
        }
        let user_id = format!("u{u:02}");
        let judged = qrels.judgments.entry(user_id.clone()).or_default();
        for p in pois.iter().filter(|p| p.city == city) {
            let grade = if p.topic == topic {
                2
            } else if p.topic == sibling(topic) {
                1
            } else {
                0
            };
            judged.insert(p.id.clone(), grade);
        }
        profiles.push(RawProfile {
            user_id,
            location: city,
            context: contexts[u % contexts.len()],
            preferences,
            topic,
        });
    }
    Ok(SyntheticCollection {
        pois,
        profiles,
        qrels,
        vectors,
    })
}

impl SyntheticCollection {
    /// Runs the raw records through `pipeline` into library types.
    pub fn materialize(
        &self,
        pipeline: &Pipeline,
        scale: RatingScale,
    ) -> Result<(Vec<PoiDocument>, Vec<UserProfile>, EmbeddingStore)> {
        let docs = self
            .pois
            .iter()
            .map(|p| PoiDocument {
                id: p.id.clone(),
                city: p.city.clone(),
                text: pipeline.tokens(&p.text),
                tags: p.tags.clone(),
                tag_terms: p.tags.iter().flat_map(|t| pipeline.tag_tokens(t)).collect(),
            })
            .collect();
        let profiles = self
            .profiles
            .iter()
            .map(|u| {
                let preferences = u
                    .preferences
                    .iter()
                    .map(|p| {
                        Ok(PreferenceTriple {
                            doc_id: p.doc_id.clone(),
                            tags: p.tags.clone(),
                            tag_terms: p.tags.iter().flat_map(|t| pipeline.tag_tokens(t)).collect(),
                            rating_raw: p.rating,
                            rating: normalize_rating(p.rating, scale.min, scale.max)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(UserProfile {
                    user_id: u.user_id.clone(),
                    preferences,
                    location: u.location.clone(),
                    context: Some(u.context),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let store = EmbeddingStore::from_vectors(
            self.vectors.first().map_or(0, |v| v.1.len()),
            self.vectors
                .iter()
                .filter_map(|(w, v)| pipeline.tokens(w).pop().map(|t| (t, v.clone()))),
        )?;
        Ok((docs, profiles, store))
    }

    /// Writes `pois.jsonl`, `profiles.jsonl`, `qrels.txt` and
    /// `embeddings.txt` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let jsonl = |items: Vec<String>| items.join("\n") + "\n";
        let enc = |v: serde_json::Result<String>| v.map_err(|e| Error::Invalid(e.to_string()));
        let pois = self
            .pois
            .iter()
            .map(|p| enc(serde_json::to_string(p)))
            .collect::<Result<Vec<_>>>()?;
        let profiles = self
            .profiles
            .iter()
            .map(|p| enc(serde_json::to_string(p)))
            .collect::<Result<Vec<_>>>()?;
        let mut qrels = String::new();
        for (q, docs) in &self.qrels.judgments {
            for (d, g) in docs {
                let _ = writeln!(qrels, "{q} 0 {d} {g}");
            }
        }
        let dim = self.vectors.first().map_or(0, |v| v.1.len());
        let mut emb = format!("{} {dim}\n", self.vectors.len());
        for (w, v) in &self.vectors {
            emb.push_str(w);
            for x in v {
                let _ = write!(emb, " {x}");
            }
            emb.push('\n');
        }
        for (name, body) in [
            ("pois.jsonl", jsonl(pois)),
            ("profiles.jsonl", jsonl(profiles)),
            ("qrels.txt", qrels),
            ("embeddings.txt", emb),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
