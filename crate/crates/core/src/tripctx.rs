//! Trip-qualifier knowledge base (single and joint context appropriateness)
//! and the term weighting functions built on it.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{AccompaniedBy, TripContext, TripDuration, TripType};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, PipelineConfig};

/// One value of one trip qualifier, e.g. `trip-duration=weekend-trip`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    TripType(TripType),
    TripDuration(TripDuration),
    AccompaniedBy(AccompaniedBy),
}

impl Category {
    /// The three single categories contained in a joint context.
    pub fn of_context(ctx: &TripContext) -> [Category; 3] {
        [
            Category::TripType(ctx.trip_type),
            Category::TripDuration(ctx.trip_duration),
            Category::AccompaniedBy(ctx.accompanied_by),
        ]
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::TripType(v) => write!(f, "trip-type={v}"),
            Category::TripDuration(v) => write!(f, "trip-duration={v}"),
            Category::AccompaniedBy(v) => write!(f, "accompanied-by={v}"),
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("category `{s}` is not `qualifier=value`")))?;
        match key.trim().to_lowercase().replace([' ', '_'], "-").as_str() {
            "trip-type" => Ok(Category::TripType(value.parse()?)),
            "trip-duration" => Ok(Category::TripDuration(value.parse()?)),
            "accompanied-by" => Ok(Category::AccompaniedBy(value.parse()?)),
            other => Err(Error::Invalid(format!("unknown trip qualifier `{other}`"))),
        }
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleContextEntry {
    pub term: String,
    pub category: Category,
    /// Raw appropriateness in [-1, 1].
    pub score: f64,
    pub assessors: u32,
}

impl SingleContextEntry {
    /// Appropriateness mapped from [-1, 1] to [0, 1].
    pub fn normalized(&self) -> f64 {
        (self.score + 1.0) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointContextEntry {
    pub term: String,
    pub context: TripContext,
    /// +1 appropriate, -1 inappropriate.
    pub label: i8,
    pub assessors: u32,
}

#[derive(Debug, Clone, Default)]
pub struct ContextKB {
    single: Vec<SingleContextEntry>,
    joint: Vec<JointContextEntry>,
    pipeline: PipelineConfig,
    single_lookup: HashMap<(String, Category), f64>,
    joint_lookup: HashMap<(String, TripContext), i8>,
}

fn tsv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        // optional header, as the first non-comment line
        if rows.is_empty() && line.to_lowercase().starts_with("assessors") {
            continue;
        }
        rows.push((i + 1, line.split('\t').map(|s| s.trim().to_string()).collect()));
    }
    Ok(rows)
}

impl ContextKB {
    pub fn empty(pipeline: PipelineConfig) -> Self {
        Self {
            pipeline,
            ..Self::default()
        }
    }

    pub fn from_entries(
        single: Vec<SingleContextEntry>,
        joint: Vec<JointContextEntry>,
        pipeline: PipelineConfig,
    ) -> Result<Self> {
        let mut single_lookup = HashMap::new();
        for e in &single {
            if !(-1.0..=1.0).contains(&e.score) {
                return Err(Error::Invalid(format!(
                    "appropriateness {} for `{}` outside [-1, 1]",
                    e.score, e.term
                )));
            }
            if single_lookup
                .insert((e.term.clone(), e.category), e.normalized())
                .is_some()
            {
                return Err(Error::DuplicateId(format!("{} @ {}", e.term, e.category)));
            }
        }
        let mut joint_lookup = HashMap::new();
        for e in &joint {
            if e.label != 1 && e.label != -1 {
                return Err(Error::Invalid(format!("joint label {} is not +-1", e.label)));
            }
            if joint_lookup.insert((e.term.clone(), e.context), e.label).is_some() {
                return Err(Error::DuplicateId(format!("{} @ {}", e.term, e.context)));
            }
        }
        Ok(Self {
            single,
            joint,
            pipeline,
            single_lookup,
            joint_lookup,
        })
    }

    /// Loads the single-context TSV (`assessors, raw_score, term, category`)
    /// and the joint-context TSV (`assessors, label, term, trip_type,
    /// trip_duration, accompanied_by`). Terms are keyed by the pipeline's
    /// phrase key.
    pub fn load(path_single: impl AsRef<Path>, path_joint: impl AsRef<Path>, pipeline: &Pipeline) -> Result<Self> {
        let (ps, pj) = (path_single.as_ref(), path_joint.as_ref());
        let key = |path: &Path, line: usize, phrase: &str| {
            pipeline
                .phrase_key(phrase)
                .ok_or_else(|| Error::parse(path, line, format!("term `{phrase}` is empty after processing")))
        };

        let mut single = Vec::new();
        for (line, cols) in tsv_rows(ps)? {
            let [assessors, score, term, category] = cols.as_slice() else {
                return Err(Error::parse(
                    ps,
                    line,
                    format!("expected 4 columns, found {}", cols.len()),
                ));
            };
            let bad = |m: String| Error::parse(ps, line, m);
            let score: f64 = score.parse().map_err(|_| bad(format!("bad score `{score}`")))?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(bad(format!("score {score} outside [-1, 1]")));
            }
            single.push(SingleContextEntry {
                term: key(ps, line, term)?,
                category: category.parse().map_err(|e: Error| bad(e.to_string()))?,
                score,
                assessors: assessors
                    .parse()
                    .map_err(|_| bad(format!("bad assessor count `{assessors}`")))?,
            });
        }

        let mut joint = Vec::new();
        for (line, cols) in tsv_rows(pj)? {
            let [assessors, label, term, tt, td, ab] = cols.as_slice() else {
                return Err(Error::parse(
                    pj,
                    line,
                    format!("expected 6 columns, found {}", cols.len()),
                ));
            };
            let bad = |m: String| Error::parse(pj, line, m);
            let label = match label.parse::<f64>() {
                Ok(1.0) => 1,
                Ok(-1.0) => -1,
                _ => return Err(bad(format!("label `{label}` is not +-1"))),
            };
            let context = TripContext {
                trip_type: tt.parse().map_err(|e: Error| bad(e.to_string()))?,
                trip_duration: td.parse().map_err(|e: Error| bad(e.to_string()))?,
                accompanied_by: ab.parse().map_err(|e: Error| bad(e.to_string()))?,
            };
            joint.push(JointContextEntry {
                term: key(pj, line, term)?,
                context,
                label,
                assessors: assessors
                    .parse()
                    .map_err(|_| bad(format!("bad assessor count `{assessors}`")))?,
            });
        }
        Self::from_entries(single, joint, pipeline.config().clone())
    }

    pub fn pipeline(&self) -> &PipelineConfig {
        &self.pipeline
    }

    pub fn single_entries(&self) -> &[SingleContextEntry] {
        &self.single
    }

    pub fn joint_entries(&self) -> &[JointContextEntry] {
        &self.joint
    }

    pub fn is_empty(&self) -> bool {
        self.single.is_empty() && self.joint.is_empty()
    }

    /// Normalized single-context appropriateness; 0 when unjudged.
    pub fn kappa_s(&self, term: &str, q: Category) -> f64 {
        self.single_lookup.get(&(term.to_string(), q)).copied().unwrap_or(0.0)
    }

    /// 1 iff the term is judged appropriate for the joint context.
    pub fn kappa_j(&self, term: &str, q: &TripContext) -> u8 {
        match self.joint_lookup.get(&(term.to_string(), *q)) {
            Some(1) => 1,
            _ => 0,
        }
    }

    /// Terms with positive single-context appropriateness, sorted.
    pub fn seeds_single(&self, q: Category) -> Vec<&str> {
        self.single
            .iter()
            .filter(|e| e.category == q && e.normalized() > 0.0)
            .map(|e| e.term.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Terms labelled appropriate for the joint context, sorted.
    pub fn seeds_joint(&self, q: &TripContext) -> Vec<&str> {
        self.joint
            .iter()
            .filter(|e| e.context == *q && e.label == 1)
            .map(|e| e.term.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Which soft-constraint weighting is applied to terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PsiMode {
    /// Location only: constant 1.
    #[default]
    #[serde(rename = "l")]
    Location,
    #[serde(rename = "s")]
    Single,
    #[serde(rename = "j")]
    Joint,
}

impl PsiMode {
    pub const ALL: [PsiMode; 3] = [PsiMode::Location, PsiMode::Single, PsiMode::Joint];

    pub fn as_str(self) -> &'static str {
        match self {
            PsiMode::Location => "l",
            PsiMode::Single => "s",
            PsiMode::Joint => "j",
        }
    }
}

impl FromStr for PsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "l" | "location" => Ok(PsiMode::Location),
            "s" | "single" => Ok(PsiMode::Single),
            "j" | "joint" => Ok(PsiMode::Joint),
            _ => Err(Error::Invalid(format!("unknown psi mode `{s}` (expected l, s or j)"))),
        }
    }
}

impl fmt::Display for PsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to return for a term with no usable embedding evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PsiOovPolicy {
    #[default]
    Neutral,
    Zero,
}

/// The soft constraint carried by a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryContext {
    Single(Category),
    Joint(TripContext),
}

/// A term weighting function `psi(w, q_U)` with its seed sets resolved.
#[derive(Debug, Clone)]
pub struct Psi<'a> {
    inner: PsiInner<'a>,
}

#[derive(Debug, Clone)]
enum PsiInner<'a> {
    Constant,
    Seeded {
        store: &'a EmbeddingStore,
        /// One seed set per averaged component; an empty set scores 1.
        seed_sets: Vec<Vec<String>>,
        oov: PsiOovPolicy,
    },
}

impl<'a> Psi<'a> {
    /// The constant function 1.
    pub fn constant() -> Self {
        Self {
            inner: PsiInner::Constant,
        }
    }

    pub fn new(
        mode: PsiMode,
        context: Option<QueryContext>,
        kb: &ContextKB,
        store: &'a EmbeddingStore,
        oov: PsiOovPolicy,
    ) -> Result<Self> {
        let own = |v: Vec<&str>| v.into_iter().map(str::to_string).collect::<Vec<_>>();
        let seed_sets = match (mode, context) {
            (PsiMode::Location, _) => return Ok(Self::constant()),
            (PsiMode::Single, Some(QueryContext::Single(c))) => vec![own(kb.seeds_single(c))],
            (PsiMode::Single, Some(QueryContext::Joint(ctx))) => Category::of_context(&ctx)
                .iter()
                .map(|&c| own(kb.seeds_single(c)))
                .collect(),
            (PsiMode::Joint, Some(QueryContext::Joint(ctx))) => vec![own(kb.seeds_joint(&ctx))],
            (PsiMode::Joint, Some(QueryContext::Single(_))) => {
                return Err(Error::MissingContext(
                    "joint-context weighting needs all three trip qualifiers".into(),
                ))
            }
            (_, None) => return Err(Error::MissingContext(format!("psi mode `{mode}` needs a trip context"))),
        };
        Ok(Self {
            inner: PsiInner::Seeded { store, seed_sets, oov },
        })
    }

    /// Convenience for profiles, whose context is optional.
    pub fn for_context(
        mode: PsiMode,
        context: Option<TripContext>,
        kb: &ContextKB,
        store: &'a EmbeddingStore,
        oov: PsiOovPolicy,
    ) -> Result<Self> {
        Self::new(mode, context.map(QueryContext::Joint), kb, store, oov)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.inner, PsiInner::Constant)
    }

    /// psi(w) in [0, 1].
    pub fn value(&self, w: &str) -> f64 {
        match &self.inner {
            PsiInner::Constant => 1.0,
            PsiInner::Seeded { store, seed_sets, oov } => {
                let total: f64 = seed_sets
                    .iter()
                    .map(|seeds| {
                        if seeds.is_empty() {
                            return 1.0;
                        }
                        let m = store.max_sim(w, seeds.iter().map(String::as_str));
                        match (m.oov, oov) {
                            (true, PsiOovPolicy::Zero) => 0.0,
                            _ => m.value,
                        }
                    })
                    .sum();
                if seed_sets.len() == 1 {
                    total
                } else {
                    total / seed_sets.len() as f64
                }
            }
        }
    }
}
