//! Library-versus-oracle comparisons shared by the oracle and acceptance
//! targets. Each returns the number of weights compared, or a description
//! of the first mismatch.

use poirec::baselines::tag_query;
use poirec::corpus::relevant_subset;
use poirec::dist::TermDistribution;
use poirec::embeddings::KernelConfig;
use poirec::recommend::{estimate, Model, RecommendConfig, Resources};
use poirec::rlm::{self, FeedbackConfig};
use poirec::tripctx::{Psi, PsiMode, PsiOovPolicy};

use super::oracle::{self, Corpus, Dist, PsiOracle, Vectors};
use super::{fixture_dir, Fixture};

pub const TOL: f64 = 1e-9;

pub fn compare(what: &str, lib: &TermDistribution, orc: &Dist, tol: f64) -> Result<usize, String> {
    let mut n = 0;
    for t in lib.terms().chain(orc.keys().map(String::as_str)) {
        let (a, b) = (lib.get(t), orc.get(t).copied().unwrap_or(0.0));
        if (a - b).abs() > tol || a.is_nan() {
            return Err(format!("{what}: weight of `{t}` is {a}, oracle {b}"));
        }
        n += 1;
    }
    Ok(n)
}

fn to_dist(d: &Dist) -> TermDistribution {
    TermDistribution::from_weights(d.iter().map(|(k, v)| (k.as_str(), *v))).unwrap()
}

pub fn vectors() -> Vectors {
    Vectors::load(&fixture_dir().join("embeddings.txt"))
}

pub fn psi_oracle() -> PsiOracle {
    let d = fixture_dir();
    PsiOracle::load(&d.join("kb_single.tsv"), &d.join("kb_joint.tsv"))
}

/// Every estimator, for every user and psi mode of the fixture.
pub fn oracle_equivalence(fx: &Fixture) -> Result<usize, String> {
    let corpus = Corpus::new(&fx.docs);
    let vec = vectors();
    let po = psi_oracle();
    let mut n = 0;
    for u in &fx.profiles {
        let ctx = u.context.expect("fixture profiles carry a context");
        for mode in [PsiMode::Location, PsiMode::Single, PsiMode::Joint] {
            let tag = format!("{}/{}/{mode}", fx.name, u.user_id);
            let psi = Psi::for_context(mode, Some(ctx), &fx.kb, &fx.store, PsiOovPolicy::Neutral)
                .map_err(|e| e.to_string())?;
            let psi_o = |w: &str| match mode {
                PsiMode::Location => 1.0,
                PsiMode::Single => po.single(&vec, &ctx, w),
                PsiMode::Joint => po.joint(&vec, &ctx, w),
            };
            for w in fx.index.vocabulary() {
                if (psi.value(w) - psi_o(w)).abs() > 1e-12 {
                    return Err(format!("{tag}: psi({w}) = {}, oracle {}", psi.value(w), psi_o(w)));
                }
            }
            n += estimators(fx, &corpus, &vec, &tag, u, &psi, &psi_o)?;
        }
    }
    Ok(n)
}

fn estimators(
    fx: &Fixture,
    c: &Corpus,
    vec: &Vectors,
    tag: &str,
    u: &poirec::corpus::UserProfile,
    psi: &Psi<'_>,
    psi_o: &dyn Fn(&str) -> f64,
) -> Result<usize, String> {
    let e = |x: poirec::Error| format!("{tag}: {x}");
    let cfg = FeedbackConfig::default();
    let floor = cfg.zero_floor;
    let rel_lib = relevant_subset(u, 0.8).map_err(e)?;
    let rel = oracle::relevant(u, 0.8);
    let tags = oracle::tag_union(&rel);
    let mut n = 0;

    let tq = tag_query(&rel_lib, psi).map_err(e)?;
    let tq_o = oracle::tag_query(&rel, psi_o);
    n += compare(&format!("{tag} tag query"), &tq, &tq_o, TOL)?;

    // RM1 / RM3 over the top documents retrieved by the tag query.
    let top_o = c.kl_top(&tq_o, &u.location, cfg.mu, cfg.feedback_docs);
    let top: Vec<String> = fx
        .index
        .kl_retrieve(&tq, Some(&u.location), cfg.mu, cfg.feedback_docs)
        .map_err(e)?
        .doc_ids()
        .map(str::to_string)
        .collect();
    if top != top_o {
        return Err(format!("{tag}: feedback docs {top:?}, oracle {top_o:?}"));
    }
    let rm1 = rlm::rm1_with(tags.iter().map(String::as_str), &top, &fx.index, psi, floor).map_err(e)?;
    let rm1_o = oracle::rm1(c, &tags, &top_o, psi_o, floor);
    n += compare(&format!("{tag} rm1"), &rm1, &rm1_o, TOL)?;
    let rm3 = rlm::mix_rm3(&rm1, &tq, cfg.lambda).map_err(e)?;
    n += compare(
        &format!("{tag} rm3"),
        &rm3,
        &oracle::mix(&rm1_o, &tq_o, cfg.lambda),
        TOL,
    )?;

    // Exploitation.
    let prof = rlm::profile_rlm(&rel_lib, psi, &fx.index, floor).map_err(e)?;
    let prof_o = oracle::profile_rlm(c, &rel, psi_o, floor);
    n += compare(&format!("{tag} profile rlm"), &prof, &prof_o, TOL)?;

    // Exploration from the same (oracle) profile model.
    let theta_o = oracle::truncate(&oracle::mix(&prof_o, &tq_o, cfg.lambda), cfg.expansion_terms);
    let theta = to_dist(&theta_o);
    for m in [1, 2, 5] {
        let fcfg = FeedbackConfig {
            feedback_docs: m,
            ..cfg
        };
        let top_o = c.kl_top(&theta_o, &u.location, cfg.mu, m);
        let f = rlm::factored_rlm(&theta, &u.location, psi, &fx.index, &fcfg).map_err(e)?;
        n += compare(
            &format!("{tag} factored rlm M={m}"),
            &f,
            &oracle::factored_rlm(c, &theta_o, &top_o, psi_o, floor),
            TOL,
        )?;
        for h in [1.0, 0.5] {
            let kcfg = FeedbackConfig {
                kernel: KernelConfig { h, sigma: 1.0 },
                ..fcfg
            };
            let kf = rlm::kde_factored_rlm(&theta, &u.location, psi, &fx.store, &fx.index, &kcfg).map_err(e)?;
            let kf_o = oracle::kde_factored(c, &theta_o, &top_o, psi_o, vec, h, 1.0, floor);
            n += compare(&format!("{tag} kde factored rlm M={m} h={h}"), &kf, &kf_o, TOL)?;
        }
    }

    for (h, sigma) in [(1.0, 1.0), (0.5, 1.0), (2.0, 0.7)] {
        let kcfg = FeedbackConfig {
            kernel: KernelConfig { h, sigma },
            ..cfg
        };
        let kp = rlm::kde_profile_rlm(&rel_lib, psi, &fx.store, &fx.index, &kcfg).map_err(e)?;
        n += compare(
            &format!("{tag} kde profile rlm h={h}"),
            &kp,
            &oracle::kde_profile(c, &rel, psi_o, vec, h, sigma),
            TOL,
        )?;
        let kr = rlm::kde_rlm(tags.iter().map(String::as_str), &top, &fx.index, psi, &fx.store, &kcfg).map_err(e)?;
        n += compare(
            &format!("{tag} kde rlm h={h}"),
            &kr,
            &oracle::kde_rlm(c, &tags, &top_o, psi_o, vec, h, sigma),
            TOL,
        )?;
    }

    // Whole query-estimation pipelines.
    let res = Resources {
        index: &fx.index,
        store: &fx.store,
        kb: &fx.kb,
        profiles: &fx.profiles,
    };
    for model in [Model::Frlm, Model::KdeFrlm] {
        let rc = RecommendConfig::for_model(model, PsiMode::Location);
        let fb = rc.feedback;
        let got = estimate(&rel_lib, psi, &res, &rc, model).map_err(e)?;
        let exploit_base = if model == Model::Frlm {
            oracle::profile_rlm(c, &rel, psi_o, floor)
        } else {
            oracle::kde_profile(c, &rel, psi_o, vec, fb.kernel.h, fb.kernel.sigma)
        };
        let exploit = oracle::truncate(&oracle::mix(&exploit_base, &tq_o, fb.lambda), fb.expansion_terms);
        let top_o = c.kl_top(&exploit, &u.location, fb.mu, fb.feedback_docs);
        let explore = if model == Model::Frlm {
            oracle::factored_rlm(c, &exploit, &top_o, psi_o, floor)
        } else {
            oracle::kde_factored(c, &exploit, &top_o, psi_o, vec, fb.kernel.h, fb.kernel.sigma, floor)
        };
        let explore = oracle::truncate(&explore, fb.expansion_terms);
        let want = oracle::truncate(&oracle::mix(&exploit, &explore, fb.gamma_h), fb.expansion_terms);
        n += compare(&format!("{tag} {model} pipeline"), &got, &want, TOL)?;
    }
    Ok(n)
}
