mod common;

use std::collections::{BTreeMap, BTreeSet};

use poirec::baselines::{
    content_tag_match, most_popular_k, profile_popular_k, profile_term_weights, tag_query, term_selection,
};
use poirec::corpus::{relevant_subset, UserProfile};
use poirec::eval::{
    average_precision, evaluate, mrr, ndcg_at_k, paired_t_test, precision_at_k, sweep, EvalConfig, Grid, Run,
};
use poirec::index::Bm25Params;
use poirec::recommend::{recommend, Model, RecommendConfig, Resources};
use poirec::rlm::{factored_rlm, FeedbackConfig};
use poirec::tripctx::{Psi, PsiMode, PsiOovPolicy};

use common::checks::{self, compare, TOL};
use common::oracle::{self, Corpus};

#[test]
fn estimators_match_brute_force_on_toy_fixtures() {
    for name in common::TOYS {
        let fx = common::load(name);
        let n = checks::oracle_equivalence(&fx).unwrap_or_else(|e| panic!("{e}"));
        assert!(n > 100, "{name}: only {n} weights compared");
    }
}

#[test]
fn factored_rlm_three_docs_one_city() {
    // toy_b: three docs in paris over a six-term vocabulary.
    let fx = common::load("toy_b");
    assert_eq!(fx.index.docs_in("paris").len(), 3);
    assert_eq!(fx.index.vocabulary().count(), 6);
    let c = Corpus::new(&fx.docs);
    let theta_o: oracle::Dist = [
        ("art".to_string(), 0.5),
        ("garden".to_string(), 0.3),
        ("wine".to_string(), 0.2),
    ]
    .into();
    let theta = poirec::dist::TermDistribution::from_weights(theta_o.iter().map(|(k, v)| (k.as_str(), *v))).unwrap();
    let cfg = FeedbackConfig::default();
    let top = c.kl_top(&theta_o, "paris", cfg.mu, cfg.feedback_docs);
    let want = oracle::factored_rlm(&c, &theta_o, &top, &|_| 1.0, cfg.zero_floor);
    let got = factored_rlm(&theta, "paris", &Psi::constant(), &fx.index, &cfg).unwrap();
    compare("factored", &got, &want, TOL).unwrap();
    // Frozen from the oracle.
    let frozen = [
        ("art", 0.5685129783599946),
        ("food", 0.015741500016384042),
        ("garden", 0.1842705648053279),
        ("museum", 0.2157234027838162),
        ("park", 2.0108036186538976e-5),
        ("wine", 0.01573144599829077),
    ];
    for (t, w) in frozen {
        assert!((got.get(t) - w).abs() < TOL, "{t}: {}", got.get(t));
    }
}

#[test]
fn tag_query_under_single_context_matches_cosine_oracle() {
    let fx = common::load("toy_a");
    let vec = checks::vectors();
    let po = checks::psi_oracle();
    let u = &fx.profiles[0];
    let ctx = u.context.unwrap();
    let psi = Psi::for_context(PsiMode::Single, Some(ctx), &fx.kb, &fx.store, PsiOovPolicy::Neutral).unwrap();
    let rel = relevant_subset(u, 0.8).unwrap();
    let got = tag_query(&rel, &psi).unwrap();
    let want = oracle::tag_query(&oracle::relevant(u, 0.8), &|w| po.single(&vec, &ctx, w));
    compare("tag query", &got, &want, 1e-12).unwrap();
    let frozen = [
        ("beer", 0.36805877594990927),
        ("music", 0.26577763520940473),
        ("pub", 0.36616358884068606),
    ];
    for (t, w) in frozen {
        assert!((got.get(t) - w).abs() < TOL);
    }
}

/// BM25 weight of each term of the concatenated relevant profile documents.
fn bm25_term_oracle(c: &Corpus, u: &UserProfile) -> BTreeMap<String, f64> {
    let (k1, b) = (1.2, 0.75);
    let n = c.docs.len() as f64;
    let avgdl = c.docs.values().map(|d| d.1.len()).sum::<usize>() as f64 / n;
    let pseudo: Vec<String> = oracle::relevant(u, 0.8)
        .iter()
        .flat_map(|r| c.terms(&r.0).to_vec())
        .collect();
    let len = pseudo.len() as f64;
    pseudo
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|w| {
            let tf = pseudo.iter().filter(|x| *x == w).count() as f64;
            let df = c.docs.values().filter(|d| d.1.contains(w)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            (
                w.clone(),
                idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl)),
            )
        })
        .collect()
}

#[test]
fn term_selection_matches_bm25_term_weight_oracle() {
    for name in common::TOYS {
        let fx = common::load(name);
        let c = Corpus::new(&fx.docs);
        for u in &fx.profiles {
            let rel = relevant_subset(u, 0.8).unwrap();
            let want = bm25_term_oracle(&c, u);
            let got = profile_term_weights(&rel, &fx.index, Bm25Params::default()).unwrap();
            assert_eq!(got.len(), want.len());
            for (t, w) in &got {
                assert!((w - want[*t]).abs() < TOL, "{name} {t}");
            }
            let mut ranked: Vec<(&String, &f64)> = want.iter().collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap().then(a.0.cmp(b.0)));
            let top3: BTreeSet<&str> = ranked.iter().take(3).map(|x| x.0.as_str()).collect();
            let sel = term_selection(&rel, 3, &Psi::constant(), &fx.index, Bm25Params::default()).unwrap();
            assert_eq!(sel.terms().collect::<BTreeSet<_>>(), top3, "{name}/{}", u.user_id);
            let one = term_selection(&rel, 1, &Psi::constant(), &fx.index, Bm25Params::default()).unwrap();
            assert_eq!(one.terms().collect::<Vec<_>>(), vec![ranked[0].0.as_str()]);
            let all = term_selection(&rel, 1000, &Psi::constant(), &fx.index, Bm25Params::default()).unwrap();
            assert_eq!(all.len(), want.len());
        }
    }
    // Frozen: toy_a / ua.
    let fx = common::load("toy_a");
    let w = bm25_term_oracle(&Corpus::new(&fx.docs), &fx.profiles[0]);
    assert!((w["beer"] - 1.2996835266057243).abs() < TOL);
    assert!((w["music"] - 0.5577233102538693).abs() < TOL);
}

fn popular_oracle<'a>(profiles: impl IntoIterator<Item = &'a UserProfile>, threshold: f64) -> BTreeSet<String> {
    let mut by_tag: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for u in profiles {
        for p in &u.preferences {
            for t in p.tag_terms.iter().collect::<BTreeSet<_>>() {
                by_tag.entry(t.clone()).or_default().push(p.rating);
            }
        }
    }
    by_tag
        .into_iter()
        .filter(|(_, r)| r.iter().sum::<f64>() / r.len() as f64 >= threshold)
        .map(|(t, _)| t)
        .collect()
}

#[test]
fn popular_tags_match_brute_force_means() {
    for name in common::TOYS {
        let fx = common::load(name);
        let all = most_popular_k(&fx.profiles, 0.8).unwrap();
        assert_eq!(
            all.terms().map(str::to_string).collect::<BTreeSet<_>>(),
            popular_oracle(&fx.profiles, 0.8)
        );
        assert!(all.iter().all(|(_, w)| (w - 1.0 / all.len() as f64).abs() < 1e-15));
        for u in &fx.profiles {
            let mine = profile_popular_k(u, 0.8).unwrap();
            assert_eq!(
                mine.terms().map(str::to_string).collect::<BTreeSet<_>>(),
                popular_oracle([u], 0.8)
            );
            assert_eq!(most_popular_k(std::slice::from_ref(u), 0.8).unwrap(), mine);
        }
    }
    let fx = common::load("toy_c");
    let want: BTreeSet<String> = ["beer", "food", "garden", "jazz", "museum", "music", "pub", "wine"]
        .map(String::from)
        .into();
    assert_eq!(popular_oracle(&fx.profiles, 0.8), want);
}

#[test]
fn content_tag_match_three_candidates() {
    // toy_a / ua: candidates a1, a2, a3 in dublin.
    let fx = common::load("toy_a");
    let c = Corpus::new(&fx.docs);
    let u = &fx.profiles[0];
    let rel = oracle::relevant(u, 0.8);
    let (k1, b) = (1.2, 0.75);
    let n = c.docs.len() as f64;
    let avgdl = c.docs.values().map(|d| d.1.len()).sum::<usize>() as f64 / n;
    let pseudo: Vec<String> = rel.iter().flat_map(|r| c.terms(&r.0).to_vec()).collect();
    let q = |w: &str| pseudo.iter().filter(|x| *x == w).count() as f64 / pseudo.len() as f64;
    let tags: BTreeSet<String> = oracle::tag_union(&rel).into_iter().collect();
    let cands = ["a1", "a2", "a3"];
    let mut content = vec![];
    let mut tag = vec![];
    for d in cands {
        let terms = c.terms(d);
        let mut s = 0.0;
        for w in terms.iter().collect::<BTreeSet<_>>() {
            let tf = terms.iter().filter(|x| *x == w).count() as f64;
            let df = c.docs.values().filter(|x| x.1.contains(w)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            s += q(w) * idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * terms.len() as f64 / avgdl));
        }
        content.push(s);
        let dt: BTreeSet<String> = fx
            .docs
            .iter()
            .find(|x| x.id == d)
            .unwrap()
            .tag_terms
            .iter()
            .cloned()
            .collect();
        tag.push(tags.intersection(&dt).count() as f64 / tags.union(&dt).count() as f64);
    }
    let mm = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
        v.iter().map(|x| (x - lo) / (hi - lo)).collect::<Vec<_>>()
    };
    let (cn, tn) = (mm(&content), mm(&tag));
    let got = content_tag_match(
        &relevant_subset(u, 0.8).unwrap(),
        &Psi::constant(),
        &fx.index,
        "dublin",
        Bm25Params::default(),
        50,
    )
    .unwrap();
    for (i, d) in cands.iter().enumerate() {
        let e = got.entries.iter().find(|e| e.doc_id == *d).unwrap();
        assert!((e.score - (cn[i] + tn[i])).abs() < TOL, "{d}");
    }
    let frozen = [("a1", 2.0), ("a3", 0.4927453084286497), ("a2", 0.0)];
    for (e, (d, s)) in got.entries.iter().zip(frozen) {
        assert_eq!(e.doc_id, d);
        assert!((e.score - s).abs() < TOL);
    }
}

#[test]
fn ndcg_example_and_binary_metrics() {
    let g = [3, 2, 3, 0, 1, 2];
    let want = oracle::ndcg(&g, &g, 6);
    assert!((ndcg_at_k(&g, &g, Some(6)) - want).abs() < TOL);
    assert!((want - 0.9608081943360617).abs() < TOL);
    let rel = [true, false, true, false];
    assert!((average_precision(&rel, 2) - oracle::ap(&rel, 2)).abs() < 1e-15);
    assert!((average_precision(&rel, 2) - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(mrr(&rel), oracle::rr(&rel));
    assert_eq!(precision_at_k(&rel, 5), oracle::p_at(&rel, 5));
}

pub const T_FIXTURE: ([f64; 10], [f64; 10]) = (
    [0.31, 0.42, 0.28, 0.55, 0.47, 0.39, 0.61, 0.33, 0.45, 0.50],
    [0.29, 0.35, 0.30, 0.49, 0.41, 0.36, 0.52, 0.34, 0.40, 0.44],
);

#[test]
fn paired_t_test_matches_reference() {
    let (a, b) = T_FIXTURE;
    let (t, p) = oracle::paired_t(&a, &b);
    let r = paired_t_test(&a, &b).unwrap();
    assert!(!r.degenerate);
    assert_eq!(r.df, 9);
    assert!((r.t - t).abs() < 1e-6 && (r.p - p).abs() < 1e-6, "{r:?} vs ({t}, {p})");
    assert!((t - 3.6606494363482875).abs() < 1e-6);
    assert!((p - 0.005230240292491702).abs() < 1e-6);
}

#[test]
fn sweep_argmax_matches_exhaustive_recomputation() {
    let fx = common::load("toy_c");
    let res = Resources {
        index: &fx.index,
        store: &fx.store,
        kb: &fx.kb,
        profiles: &fx.profiles,
    };
    let run_for = |gamma: f64, m: usize| {
        let mut cfg = RecommendConfig::for_model(Model::Frlm, PsiMode::Location);
        cfg.feedback.gamma_h = gamma;
        cfg.feedback.feedback_docs = m;
        let mut run = Run::default();
        for u in &fx.profiles {
            run.insert(&u.user_id, &recommend(u, &res, &cfg)?, "t");
        }
        Ok::<_, poirec::Error>(evaluate(&run, &fx.qrels, &EvalConfig::default()))
    };
    let gammas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let grid = Grid::new().axis("gamma_h", gammas).axis("m", [1, 2]);
    let table = sweep(&grid, |p| run_for(p[0].1.parse().unwrap(), p[1].1.parse().unwrap()));
    assert_eq!(table.cells.len(), 12);
    let mut best = (f64::MIN, String::new(), String::new());
    for g in gammas {
        for m in [1, 2] {
            let v = run_for(g, m).unwrap().mean.ndcg5;
            if v > best.0 {
                best = (v, g.to_string(), m.to_string());
            }
        }
    }
    let cell = table.best().unwrap();
    assert_eq!((cell.params[0].1.clone(), cell.params[1].1.clone()), (best.1, best.2));
    let single = sweep(&Grid::new().axis("gamma_h", [0.8]).axis("m", [5]), |p| {
        run_for(p[0].1.parse().unwrap(), p[1].1.parse().unwrap())
    });
    assert_eq!(single.cells[0].outcome.as_ref().unwrap(), &run_for(0.8, 5).unwrap());
}
