use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use poirec::corpus::{load_pois, load_profiles, TripContext, UserProfile};
use poirec::embeddings::EmbeddingStore;
use poirec::eval::{evaluate, paired_t_test, sweep, Grid, MetricReport, MetricValues, Qrels, Run};
use poirec::index::InvertedIndex;
use poirec::recommend::{recommend, Resources};
use poirec::synthetic::{generate, SyntheticConfig};
use poirec::tripctx::{Category, ContextKB, Psi, PsiMode};
use rayon::prelude::*;

use crate::config::{existing, is_data_key, RunConfig, Settings, UsageError};

/// Writes via a temporary file in the destination directory, then renames.
/// `None` or `-` means standard output.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => std::io::stdout().write_all(bytes).context("writing to stdout"),
        Some(p) if p == Path::new("-") => std::io::stdout().write_all(bytes).context("writing to stdout"),
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).with_context(|| format!("writing {}", p.display()))?;
            Ok(())
        }
    }
}

/// Everything a recommendation run reads from disk.
pub struct Data {
    pub index: InvertedIndex,
    pub profiles: Vec<UserProfile>,
    pub store: EmbeddingStore,
    pub kb: ContextKB,
    has_store: bool,
    has_kb: bool,
}

impl Data {
    pub fn resources(&self) -> Resources<'_> {
        Resources {
            index: &self.index,
            store: &self.store,
            kb: &self.kb,
            profiles: &self.profiles,
        }
    }

    /// Fails when `cfg` needs a resource that was not configured.
    pub fn check(&self, cfg: &RunConfig) -> Result<(), UsageError> {
        let model = cfg.recommend.model;
        let psi = cfg.recommend.feedback.psi_mode;
        if cfg.needs_embeddings() && !self.has_store {
            return Err(UsageError(format!(
                "paths.embeddings: required by model {model} with psi {psi}"
            )));
        }
        if cfg.needs_kb() && !self.has_kb {
            return Err(UsageError(format!(
                "paths.kb_single and paths.kb_joint: required by psi {psi}"
            )));
        }
        Ok(())
    }
}

fn load_index(cfg: &RunConfig) -> Result<InvertedIndex> {
    if let Some(p) = cfg.paths.index.as_deref().filter(|p| p.exists()) {
        let index = InvertedIndex::load(p)?;
        if index.metadata().pipeline != cfg.pipeline {
            bail!(UsageError(format!(
                "paths.index: `{}` was built with a different text pipeline; rebuild it with build-index",
                p.display()
            )));
        }
        return Ok(index);
    }
    let pois = existing("pois", &cfg.paths.pois)?;
    let docs = load_pois(pois, &cfg.pipeline.build())?;
    Ok(InvertedIndex::build(&docs, &cfg.pipeline)?)
}

pub fn load_data(cfg: &RunConfig) -> Result<Data> {
    let index = load_index(cfg)?;
    let pipeline = cfg.pipeline.build();
    let profiles = load_profiles(existing("profiles", &cfg.paths.profiles)?, &pipeline, cfg.ratings)?;
    let (store, has_store) = match &cfg.paths.embeddings {
        Some(_) => (
            EmbeddingStore::load(existing("embeddings", &cfg.paths.embeddings)?)?,
            true,
        ),
        None => (
            EmbeddingStore::from_vectors(1, Vec::<(String, Vec<f64>)>::new())?,
            false,
        ),
    };
    let (kb, has_kb) = match (&cfg.paths.kb_single, &cfg.paths.kb_joint) {
        (None, None) => (ContextKB::empty(cfg.pipeline.clone()), false),
        _ => (
            ContextKB::load(
                existing("kb_single", &cfg.paths.kb_single)?,
                existing("kb_joint", &cfg.paths.kb_joint)?,
                &pipeline,
            )?,
            true,
        ),
    };
    Ok(Data {
        index,
        profiles,
        store,
        kb,
        has_store,
        has_kb,
    })
}

pub fn build_index(cfg: &RunConfig) -> Result<()> {
    let out = cfg
        .paths
        .index
        .as_deref()
        .ok_or_else(|| UsageError("paths.index: required by build-index".into()))?;
    let pois = existing("pois", &cfg.paths.pois)?;
    let docs = load_pois(pois, &cfg.pipeline.build())?;
    let index = InvertedIndex::build(&docs, &cfg.pipeline)?;
    let dir = match out.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    index.save(tmp.path())?;
    tmp.persist(out).with_context(|| format!("writing {}", out.display()))?;
    let m = index.metadata();
    eprintln!(
        "indexed {} documents, {} terms, {} tokens -> {}",
        m.num_docs,
        m.num_terms,
        m.collection_len,
        out.display()
    );
    Ok(())
}

/// Runs the configured model for one user or for everyone. Users whose
/// request fails are reported and left out of the run; a run in which every
/// user fails is an error.
pub fn run_recommend(cfg: &RunConfig, data: &Data, user: Option<&str>) -> Result<Run> {
    data.check(cfg)?;
    let res = data.resources();
    let users: Vec<&UserProfile> = match user {
        Some(id) => vec![data
            .profiles
            .iter()
            .find(|p| p.user_id == id)
            .ok_or_else(|| UsageError(format!("unknown user `{id}`")))?],
        None => data.profiles.iter().collect(),
    };
    let lists: Vec<_> = users.par_iter().map(|u| recommend(u, &res, &cfg.recommend)).collect();
    let tag = cfg.run_tag();
    let mut run = Run::default();
    let mut first_err = None;
    for (u, list) in users.iter().zip(lists) {
        match list {
            Ok(list) => run.insert(&u.user_id, &list, &tag),
            Err(e) => {
                if user.is_some() {
                    return Err(e).with_context(|| format!("user `{}`", u.user_id));
                }
                eprintln!("warning: user `{}` skipped: {e}", u.user_id);
                first_err.get_or_insert(e);
            }
        }
    }
    if run.queries.is_empty() {
        if let Some(e) = first_err {
            return Err(e).context("no user could be served");
        }
    }
    Ok(run)
}

pub fn load_qrels(cfg: &RunConfig) -> Result<Qrels> {
    Ok(Qrels::load(existing("qrels", &cfg.paths.qrels)?)?)
}

pub fn run_evaluate(cfg: &RunConfig, run_path: &Path) -> Result<MetricReport> {
    let qrels = load_qrels(cfg)?;
    let run = Run::load(run_path)?;
    Ok(evaluate(&run, &qrels, &cfg.eval))
}

/// Paired t-test of `metric` between two reports over the same queries.
pub fn compare(a: &MetricReport, b: &MetricReport, metric: &str) -> Result<String> {
    if !MetricValues::NAMES.contains(&metric) {
        bail!(UsageError(format!(
            "unknown metric `{metric}` (expected one of {})",
            MetricValues::NAMES.join(", ")
        )));
    }
    let (x, y) = (a.column(metric).unwrap(), b.column(metric).unwrap());
    let t = paired_t_test(&x, &y)?;
    Ok(format!(
        "{metric}: run {:.4} baseline {:.4} t={:.4} df={} p={:.4}{}\n",
        a.mean.get(metric).unwrap(),
        b.mean.get(metric).unwrap(),
        t.t,
        t.df,
        t.p,
        if t.degenerate { " (zero variance)" } else { "" }
    ))
}

pub fn run_sweep(base: &Settings, specs: &[String]) -> Result<poirec::eval::SweepTable> {
    let mut grid = Grid::new();
    for spec in specs {
        let (key, values) = Grid::parse_axis(spec).map_err(|e| UsageError(format!("--grid {spec}: {e}")))?;
        if is_data_key(&key) {
            bail!(UsageError(format!(
                "--grid {key}: paths, pipeline and ratings cannot be swept"
            )));
        }
        let mut probe = base.clone();
        probe.set_value(&key, &values[0])?;
        grid = grid.axis(&key, values);
    }
    if grid.is_empty() {
        bail!(UsageError("sweep needs at least one --grid axis".into()));
    }
    let cfg = base.resolve()?;
    let data = load_data(&cfg)?;
    let qrels = load_qrels(&cfg)?;
    let table = sweep(&grid, |params| {
        let mut s = base.clone();
        for (k, v) in params {
            s.set_value(k, v).map_err(|e| poirec::Error::Invalid(e.0))?;
        }
        let cell = s.resolve().map_err(|e| poirec::Error::Invalid(e.0))?;
        data.check(&cell).map_err(|e| poirec::Error::Invalid(e.0))?;
        // Same policy as `recommend`: a failing user scores zero, unless all fail.
        let res = data.resources();
        let mut run = Run::default();
        let mut first_err = None;
        for u in &data.profiles {
            match recommend(u, &res, &cell.recommend) {
                Ok(list) => run.insert(&u.user_id, &list, "sweep"),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) if run.queries.is_empty() => Err(e),
            _ => Ok(evaluate(&run, &qrels, &cell.eval)),
        }
    });
    Ok(table)
}

pub fn parse_context(s: &str) -> Result<TripContext, UsageError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(UsageError(format!(
            "--context `{s}`: expected trip-type,trip-duration,accompanied-by"
        )));
    };
    let bad = |e: poirec::Error| UsageError(format!("--context `{s}`: {e}"));
    Ok(TripContext {
        trip_type: a.parse().map_err(bad)?,
        trip_duration: b.parse().map_err(bad)?,
        accompanied_by: c.parse().map_err(bad)?,
    })
}

/// One row per term: knowledge-base lookups for each category of `ctx` and
/// the joint context, then the psi weights where embeddings are available.
pub fn kb_inspect(cfg: &RunConfig, terms: &[String], ctx: TripContext) -> Result<String> {
    let pipeline = cfg.pipeline.build();
    let kb = ContextKB::load(
        existing("kb_single", &cfg.paths.kb_single)?,
        existing("kb_joint", &cfg.paths.kb_joint)?,
        &pipeline,
    )?;
    let store = match &cfg.paths.embeddings {
        Some(_) => Some(EmbeddingStore::load(existing("embeddings", &cfg.paths.embeddings)?)?),
        None => None,
    };
    let cats = Category::of_context(&ctx);
    let psis = match &store {
        Some(st) => Some((
            Psi::for_context(PsiMode::Single, Some(ctx), &kb, st, cfg.recommend.psi_oov)?,
            Psi::for_context(PsiMode::Joint, Some(ctx), &kb, st, cfg.recommend.psi_oov)?,
        )),
        None => None,
    };
    let mut out = format!("# context {ctx}\nterm\tkey");
    for c in cats {
        out.push_str(&format!("\tkappa_s[{c}]"));
    }
    out.push_str("\tkappa_j");
    if psis.is_some() {
        out.push_str("\tpsi_s\tpsi_j");
    }
    out.push('\n');
    for term in terms {
        let Some(key) = pipeline.phrase_key(term) else {
            out.push_str(&format!("{term}\t-\n"));
            continue;
        };
        out.push_str(&format!("{term}\t{key}"));
        for c in cats {
            out.push_str(&format!("\t{}", kb.kappa_s(&key, c)));
        }
        out.push_str(&format!("\t{}", kb.kappa_j(&key, &ctx)));
        if let Some((s, j)) = &psis {
            out.push_str(&format!("\t{:.6}\t{:.6}", s.value(&key), j.value(&key)));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes a synthetic collection plus a config pointing at it.
pub fn generate_synthetic(dir: &Path, cfg: &SyntheticConfig) -> Result<PathBuf> {
    let synth = generate(cfg)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    synth.write_to(dir)?;
    let config = "[paths]\n\
        pois = \"pois.jsonl\"\n\
        profiles = \"profiles.jsonl\"\n\
        embeddings = \"embeddings.txt\"\n\
        qrels = \"qrels.txt\"\n\
        index = \"index.json\"\n";
    let path = dir.join("config.toml");
    write_output(Some(&path), config.as_bytes())?;
    Ok(path)
}
