//! POI documents, user profiles and their JSON Lines loaders.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Pipeline;

/// A point of interest as a bag of words with its city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiDocument {
    pub id: String,
    pub city: String,
    /// Pipeline tokens of the descriptive text.
    pub text: Vec<String>,
    /// Raw tag strings as they appear in the source.
    pub tags: Vec<String>,
    /// Pipeline tokens of the tags (unit tokens plus constituents).
    pub tag_terms: Vec<String>,
}

impl PoiDocument {
    /// The bag of words that gets indexed: text tokens followed by tag tokens.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.text.iter().chain(self.tag_terms.iter()).map(String::as_str)
    }
}

#[derive(Deserialize)]
struct PoiRecord {
    id: String,
    city: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    tags: Vec<String>,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

pub fn load_pois(path: impl AsRef<Path>, pipeline: &Pipeline) -> Result<Vec<PoiDocument>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PoiRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if rec.id.is_empty() {
            return Err(Error::parse(path, line_no, "empty id"));
        }
        if rec.city.is_empty() {
            return Err(Error::parse(path, line_no, "empty city"));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        let text = pipeline.tokens(&rec.text);
        let tag_terms: Vec<String> = rec.tags.iter().flat_map(|t| pipeline.tag_tokens(t)).collect();
        if text.is_empty() && tag_terms.is_empty() {
            return Err(Error::parse(
                path,
                line_no,
                format!("document `{}` has neither text nor tags", rec.id),
            ));
        }
        docs.push(PoiDocument {
            id: rec.id,
            city: rec.city,
            text,
            tags: rec.tags,
            tag_terms,
        });
    }
    Ok(docs)
}

macro_rules! context_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let norm = s.trim().to_lowercase().replace([' ', '_'], "-");
                match norm.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Invalid(format!(
                        "`{}` is not a valid {}",
                        s,
                        stringify!($name)
                    ))),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.as_str().to_string()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

context_enum!(TripType {
    Business => "business",
    Holiday => "holiday",
    Other => "other",
});

context_enum!(TripDuration {
    DayTrip => "day-trip",
    Longer => "longer",
    NightOut => "night-out",
    WeekendTrip => "weekend-trip",
});

context_enum!(AccompaniedBy {
    Alone => "alone",
    Family => "family",
    Friends => "friends",
    Other => "other",
});

/// The three soft trip qualifiers of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripContext {
    pub trip_type: TripType,
    pub trip_duration: TripDuration,
    pub accompanied_by: AccompaniedBy,
}

impl fmt::Display for TripContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.trip_type, self.trip_duration, self.accompanied_by)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriple {
    pub doc_id: String,
    pub tags: Vec<String>,
    /// Pipeline tokens of `tags`.
    pub tag_terms: Vec<String>,
    pub rating_raw: i64,
    /// `rating_raw` min-max normalized into [0, 1].
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub preferences: Vec<PreferenceTriple>,
    /// Current city (the hard constraint).
    pub location: String,
    pub context: Option<TripContext>,
}

impl UserProfile {
    /// Union of the tag terms over all triples, in first-seen order.
    pub fn tag_union(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for p in &self.preferences {
            for t in &p.tag_terms {
                if seen.insert(t.as_str()) {
                    out.push(t.clone());
                }
            }
        }
        out
    }
}

/// Bounds of the integer rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: i64,
    pub max: i64,
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: -1, max: 4 }
    }
}

pub fn normalize_rating(raw: i64, min: i64, max: i64) -> Result<f64> {
    if min >= max {
        return Err(Error::Invalid(format!(
            "rating scale needs min < max, got [{min}, {max}]"
        )));
    }
    if raw < min || raw > max {
        return Err(Error::RatingOutOfRange { raw, min, max });
    }
    Ok((raw - min) as f64 / (max - min) as f64)
}

/// Keeps the triples rated at or above `threshold`, in their original order.
pub fn relevant_subset(profile: &UserProfile, threshold: f64) -> Result<UserProfile> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Invalid(format!(
            "relevance threshold {threshold} outside [0, 1]"
        )));
    }
    let preferences: Vec<_> = profile
        .preferences
        .iter()
        .filter(|p| p.rating >= threshold)
        .cloned()
        .collect();
    if preferences.is_empty() {
        return Err(Error::NoRelevantHistory(profile.user_id.clone()));
    }
    Ok(UserProfile {
        preferences,
        ..profile.clone()
    })
}

#[derive(Deserialize)]
struct ProfileRecord {
    user_id: String,
    location: String,
    #[serde(default)]
    context: Option<TripContext>,
    preferences: Vec<PreferenceRecord>,
}

#[derive(Deserialize)]
struct PreferenceRecord {
    doc_id: String,
    #[serde(default)]
    tags: Vec<String>,
    rating: i64,
}

pub fn load_profiles(path: impl AsRef<Path>, pipeline: &Pipeline, scale: RatingScale) -> Result<Vec<UserProfile>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ProfileRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if rec.user_id.is_empty() || rec.location.is_empty() {
            return Err(Error::parse(path, line_no, "empty user_id or location"));
        }
        if rec.preferences.is_empty() {
            return Err(Error::parse(path, line_no, "profile has no preferences"));
        }
        if !seen.insert(rec.user_id.clone()) {
            return Err(Error::DuplicateId(rec.user_id));
        }
        let mut preferences = Vec::with_capacity(rec.preferences.len());
        for p in rec.preferences {
            let rating = normalize_rating(p.rating, scale.min, scale.max)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            let tag_terms = p.tags.iter().flat_map(|t| pipeline.tag_tokens(t)).collect();
            preferences.push(PreferenceTriple {
                doc_id: p.doc_id,
                tags: p.tags,
                tag_terms,
                rating_raw: p.rating,
                rating,
            });
        }
        out.push(UserProfile {
            user_id: rec.user_id,
            preferences,
            location: rec.location,
            context: rec.context,
        });
    }
    Ok(out)
}
