//! Layered run configuration: built-in defaults, then config files, then
//! `--set` overrides. Everything is kept as flat `section.key` strings until
//! [`Settings::resolve`] turns it into typed library configs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use poirec::corpus::RatingScale;
use poirec::eval::EvalConfig;
use poirec::pipeline::{default_stopwords, PipelineConfig, StemmerKind};
use poirec::recommend::{Model, RecommendConfig};
use poirec::rlm::{FeedbackConfig, KernelOovPolicy};
use poirec::tripctx::{PsiMode, PsiOovPolicy};
use sha2::{Digest, Sha256};

pub const DEFAULTS: &str = include_str!("../configs/defaults.toml");

/// A bad configuration or command line. Maps to exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

const PATH_KEYS: [&str; 8] = [
    "pois",
    "profiles",
    "embeddings",
    "kb_single",
    "kb_joint",
    "qrels",
    "index",
    "output",
];

const FEEDBACK_KEYS: [&str; 9] = [
    "feedback_docs",
    "expansion_terms",
    "gamma_h",
    "lambda",
    "h",
    "sigma",
    "mu",
    "zero_floor",
    "kernel_oov",
];

const PLAIN_KEYS: [&str; 16] = [
    "model.name",
    "model.psi",
    "model.psi_oov",
    "pipeline.lowercase",
    "pipeline.stopwords",
    "pipeline.stemmer",
    "ratings.min",
    "ratings.max",
    "retrieval.top_k",
    "retrieval.bm25_k1",
    "retrieval.bm25_b",
    "retrieval.relevance_threshold",
    "retrieval.popularity_threshold",
    "retrieval.selected_terms",
    "eval.relevance_cutoff",
    "eval.include_empty_queries",
];

fn check_key(key: &str) -> Result<(), UsageError> {
    if PLAIN_KEYS.contains(&key) {
        return Ok(());
    }
    let parts: Vec<&str> = key.split('.').collect();
    let ok = match parts.as_slice() {
        ["paths", k] => PATH_KEYS.contains(k),
        ["feedback", k] => FEEDBACK_KEYS.contains(k),
        ["tuned", m, k] => Model::from_str(m).is_ok() && FEEDBACK_KEYS.contains(k),
        ["tuned", m, psi, k] => {
            Model::from_str(m).is_ok()
                && psi.strip_prefix("psi-").is_some_and(|p| PsiMode::from_str(p).is_ok())
                && FEEDBACK_KEYS.contains(k)
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(usage(format!("unknown config key `{key}`")))
    }
}

/// Keys that change which data gets loaded; a sweep may not vary them.
pub fn is_data_key(key: &str) -> bool {
    ["paths.", "pipeline.", "ratings."].iter().any(|p| key.starts_with(p))
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Directory relative paths are resolved against.
    base: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Settings {
    entries: BTreeMap<String, Entry>,
}

impl Settings {
    pub fn defaults() -> Self {
        let mut s = Self {
            entries: BTreeMap::new(),
        };
        s.merge_toml(DEFAULTS, Path::new("."), "built-in defaults")
            .expect("built-in defaults parse");
        s
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        self.merge_toml(&text, &base, &path.display().to_string())
    }

    fn merge_toml(&mut self, text: &str, base: &Path, origin: &str) -> Result<(), UsageError> {
        let table: toml::Table = text.parse().map_err(|e| usage(format!("{origin}: {e}")))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat).map_err(|e| usage(format!("{origin}: {e}")))?;
        for (key, value) in flat {
            check_key(&key).map_err(|e| usage(format!("{origin}: {e}")))?;
            self.entries.insert(
                key,
                Entry {
                    value,
                    base: base.to_path_buf(),
                },
            );
        }
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, spec: &str) -> Result<(), UsageError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("override `{spec}` is not of the form key=value")))?;
        self.set_value(key.trim(), value.trim())
    }

    pub fn set_value(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        check_key(key)?;
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                base: PathBuf::from("."),
            },
        );
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parse<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>, UsageError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| usage(format!("{key}: expected {expected}, got `{v}`")))
            })
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str, expected: &str) -> Result<T, UsageError> {
        self.parse(key, expected)?
            .ok_or_else(|| usage(format!("{key}: missing")))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.entries
            .get(key)
            .filter(|e| !e.value.is_empty())
            .map(|e| e.base.join(&e.value))
    }

    /// Hex SHA-256 over every setting except the output path.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, e) in &self.entries {
            if k != "paths.output" {
                h.update(format!("{k}={}\n", e.value));
            }
        }
        hex::encode(h.finalize())
    }

    pub fn resolve(&self) -> Result<RunConfig, UsageError> {
        let model: Model = self.require("model.name", "a model name")?;
        let psi: PsiMode = self.require("model.psi", "one of l, s, j")?;
        let mut feedback = model.default_feedback(psi);
        let tuned = format!("tuned.{model}");
        for prefix in [tuned.clone(), format!("{tuned}.psi-{psi}"), "feedback".to_string()] {
            self.apply_feedback(&prefix, &mut feedback)?;
        }

        let mut rec = RecommendConfig::for_model(model, psi);
        rec.feedback = feedback;
        if let Some(v) = self.parse("model.psi_oov", "neutral or zero")? {
            rec.psi_oov = match v {
                PsiOovWord::Neutral => PsiOovPolicy::Neutral,
                PsiOovWord::Zero => PsiOovPolicy::Zero,
            };
        }
        let r = "retrieval";
        if let Some(v) = self.parse(&format!("{r}.top_k"), "a positive integer")? {
            rec.top_k = v;
        }
        if let Some(v) = self.parse(&format!("{r}.bm25_k1"), "a number")? {
            rec.bm25.k1 = v;
        }
        if let Some(v) = self.parse(&format!("{r}.bm25_b"), "a number")? {
            rec.bm25.b = v;
        }
        if let Some(v) = self.parse(&format!("{r}.relevance_threshold"), "a number")? {
            rec.relevance_threshold = v;
        }
        if let Some(v) = self.parse(&format!("{r}.popularity_threshold"), "a number")? {
            rec.popularity_threshold = v;
        }
        if let Some(v) = self.parse(&format!("{r}.selected_terms"), "a positive integer")? {
            rec.selected_terms = v;
        }
        rec.validate()
            .map_err(|e| usage(format!("invalid {model} configuration: {e}")))?;

        let stemmer = match self.get("pipeline.stemmer").unwrap_or("porter") {
            "porter" => StemmerKind::Porter,
            "none" => StemmerKind::None,
            other => {
                return Err(usage(format!(
                    "pipeline.stemmer: expected porter or none, got `{other}`"
                )))
            }
        };
        let pipeline = PipelineConfig {
            lowercase: self.parse("pipeline.lowercase", "true or false")?.unwrap_or(true),
            stopwords: self
                .parse("pipeline.stopwords", "true or false")?
                .unwrap_or(true)
                .then(default_stopwords),
            stemmer,
        };
        let ratings = RatingScale {
            min: self
                .parse("ratings.min", "an integer")?
                .unwrap_or(RatingScale::default().min),
            max: self
                .parse("ratings.max", "an integer")?
                .unwrap_or(RatingScale::default().max),
        };
        if ratings.min >= ratings.max {
            return Err(usage("ratings: min must be below max"));
        }
        let eval = EvalConfig {
            relevance_cutoff: self
                .parse("eval.relevance_cutoff", "a non-negative integer")?
                .unwrap_or(1),
            include_empty_queries: self
                .parse("eval.include_empty_queries", "true or false")?
                .unwrap_or(true),
        };
        Ok(RunConfig {
            paths: Paths {
                pois: self.path("paths.pois"),
                profiles: self.path("paths.profiles"),
                embeddings: self.path("paths.embeddings"),
                kb_single: self.path("paths.kb_single"),
                kb_joint: self.path("paths.kb_joint"),
                qrels: self.path("paths.qrels"),
                index: self.path("paths.index"),
                output: self.path("paths.output"),
            },
            pipeline,
            ratings,
            recommend: rec,
            eval,
            digest: self.digest(),
        })
    }

    fn apply_feedback(&self, prefix: &str, f: &mut FeedbackConfig) -> Result<(), UsageError> {
        let key = |k: &str| format!("{prefix}.{k}");
        if let Some(v) = self.parse(&key("feedback_docs"), "a positive integer")? {
            f.feedback_docs = v;
        }
        if let Some(v) = self.parse(&key("expansion_terms"), "a positive integer")? {
            f.expansion_terms = v;
        }
        if let Some(v) = self.parse(&key("gamma_h"), "a number in [0, 1]")? {
            f.gamma_h = v;
        }
        if let Some(v) = self.parse(&key("lambda"), "a number in [0, 1]")? {
            f.lambda = v;
        }
        if let Some(v) = self.parse(&key("h"), "a positive number")? {
            f.kernel.h = v;
        }
        if let Some(v) = self.parse(&key("sigma"), "a positive number")? {
            f.kernel.sigma = v;
        }
        if let Some(v) = self.parse(&key("mu"), "a positive number")? {
            f.mu = v;
        }
        if let Some(v) = self.parse(&key("zero_floor"), "a non-negative number")? {
            f.zero_floor = v;
        }
        if let Some(v) = self.get(&key("kernel_oov")) {
            f.kernel_oov = match v {
                "skip" => KernelOovPolicy::Skip,
                "exact-match" => KernelOovPolicy::ExactMatch,
                _ => {
                    return Err(usage(format!(
                        "{}: expected skip or exact-match, got `{v}`",
                        key("kernel_oov")
                    )))
                }
            };
        }
        Ok(())
    }
}

enum PsiOovWord {
    Neutral,
    Zero,
}

impl FromStr for PsiOovWord {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "neutral" => Ok(PsiOovWord::Neutral),
            "zero" => Ok(PsiOovWord::Zero),
            _ => Err(()),
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<(), String> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::String(s) => out.push((key, s.clone())),
            toml::Value::Integer(i) => out.push((key, i.to_string())),
            toml::Value::Float(x) => out.push((key, x.to_string())),
            toml::Value::Boolean(b) => out.push((key, b.to_string())),
            _ => return Err(format!("{key}: arrays and dates are not supported")),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Paths {
    pub pois: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub kb_single: Option<PathBuf>,
    pub kb_joint: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub paths: Paths,
    pub pipeline: PipelineConfig,
    pub ratings: RatingScale,
    pub recommend: RecommendConfig,
    pub eval: EvalConfig,
    pub digest: String,
}

impl RunConfig {
    /// Run tag written into every run line: model, psi mode and config digest.
    pub fn run_tag(&self) -> String {
        let r = &self.recommend;
        format!("{}-{}-{}", r.model, r.feedback.psi_mode, &self.digest[..12])
    }

    pub fn needs_embeddings(&self) -> bool {
        self.recommend.model.uses_embeddings() || self.recommend.feedback.psi_mode != PsiMode::Location
    }

    pub fn needs_kb(&self) -> bool {
        self.recommend.feedback.psi_mode != PsiMode::Location
    }
}

/// An existing file named by `key`, or a usage error.
pub fn existing<'a>(key: &str, p: &'a Option<PathBuf>) -> Result<&'a Path, UsageError> {
    let p = p
        .as_deref()
        .ok_or_else(|| usage(format!("paths.{key}: required by this command")))?;
    if !p.exists() {
        return Err(usage(format!("paths.{key}: `{}` does not exist", p.display())));
    }
    Ok(p)
}
