//! Brute-force reference implementations. Everything here works from raw
//! token lists and the raw fixture files, in linear space, with no use of
//! the inverted index or the estimators under test.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use poirec::corpus::{PoiDocument, TripContext, UserProfile};

pub type Dist = BTreeMap<String, f64>;

pub struct Corpus {
    pub docs: BTreeMap<String, (String, Vec<String>)>,
}

impl Corpus {
    pub fn new(docs: &[PoiDocument]) -> Self {
        Self {
            docs: docs
                .iter()
                .map(|d| (d.id.clone(), (d.city.clone(), d.terms().map(str::to_string).collect())))
                .collect(),
        }
    }

    pub fn terms(&self, id: &str) -> &[String] {
        &self.docs[id].1
    }

    pub fn p(&self, w: &str, id: &str) -> f64 {
        let t = self.terms(id);
        t.iter().filter(|x| *x == w).count() as f64 / t.len() as f64
    }

    fn coll_p(&self, w: &str) -> f64 {
        let (mut c, mut n) = (0usize, 0usize);
        for (_, t) in self.docs.values() {
            c += t.iter().filter(|x| *x == w).count();
            n += t.len();
        }
        c as f64 / n as f64
    }

    /// Dirichlet-smoothed query-likelihood ranking within a city.
    pub fn kl_top(&self, theta: &Dist, city: &str, mu: f64, m: usize) -> Vec<String> {
        let mut scored: Vec<(String, f64)> = self
            .docs
            .iter()
            .filter(|(_, (c, _))| c == city)
            .map(|(id, (_, t))| {
                let len = t.len() as f64;
                let s: f64 = theta
                    .iter()
                    .map(|(w, th)| {
                        let tf = t.iter().filter(|x| *x == w).count() as f64;
                        let p = (tf + mu * self.coll_p(w)) / (len + mu);
                        if p > 0.0 {
                            th * p.ln()
                        } else {
                            0.0
                        }
                    })
                    .sum();
                (id.clone(), s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.into_iter().take(m).map(|x| x.0).collect()
    }
}

pub fn normalize(d: Dist) -> Dist {
    let s: f64 = d.values().sum();
    assert!(s > 0.0, "oracle: all-zero distribution");
    d.into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(k, v)| (k, v / s))
        .collect()
}

/// Keeps the `tau` heaviest terms (ties by term) and renormalizes.
pub fn truncate(d: &Dist, tau: usize) -> Dist {
    let mut v: Vec<(&String, &f64)> = d.iter().collect();
    v.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    normalize(v.into_iter().take(tau).map(|(k, w)| (k.clone(), *w)).collect())
}

pub fn mix(a: &Dist, b: &Dist, alpha: f64) -> Dist {
    let mut out = Dist::new();
    for (k, v) in a {
        *out.entry(k.clone()).or_default() += alpha * v;
    }
    for (k, v) in b {
        *out.entry(k.clone()).or_default() += (1.0 - alpha) * v;
    }
    normalize(out)
}

fn vocab<'a>(c: &'a Corpus, ids: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    ids.into_iter().flat_map(|d| c.terms(d).iter().cloned()).collect()
}

pub fn rm1(c: &Corpus, query: &[String], docs: &[String], psi: &dyn Fn(&str) -> f64, floor: f64) -> Dist {
    let mut out = Dist::new();
    for w in vocab(c, docs.iter().map(String::as_str)) {
        let mut s = 0.0;
        for d in docs {
            let mut prod = 1.0;
            for q in query {
                prod *= c.p(q, d).max(floor);
            }
            s += c.p(&w, d) * prod;
        }
        out.insert(w.clone(), s * psi(&w));
    }
    normalize(out)
}

pub fn relevant(u: &UserProfile, threshold: f64) -> Vec<(String, Vec<String>, f64)> {
    u.preferences
        .iter()
        .filter(|p| p.rating >= threshold)
        .map(|p| (p.doc_id.clone(), p.tag_terms.clone(), p.rating))
        .collect()
}

pub fn tag_union(rel: &[(String, Vec<String>, f64)]) -> Vec<String> {
    let set: BTreeSet<String> = rel.iter().flat_map(|r| r.1.iter().cloned()).collect();
    set.into_iter().collect()
}

pub fn tag_query(rel: &[(String, Vec<String>, f64)], psi: &dyn Fn(&str) -> f64) -> Dist {
    normalize(
        tag_union(rel)
            .into_iter()
            .map(|t| {
                let v = psi(&t);
                (t, v)
            })
            .collect(),
    )
}

pub fn profile_rlm(c: &Corpus, rel: &[(String, Vec<String>, f64)], psi: &dyn Fn(&str) -> f64, floor: f64) -> Dist {
    let tags = tag_union(rel);
    let mut out = Dist::new();
    for w in vocab(c, rel.iter().map(|r| r.0.as_str())) {
        let mut s = 0.0;
        for (d, _, r) in rel {
            let prod: f64 = tags.iter().map(|t| c.p(t, d).max(floor)).product();
            s += r * c.p(&w, d) * prod;
        }
        out.insert(w.clone(), s * psi(&w));
    }
    normalize(out)
}

pub fn factored_rlm(c: &Corpus, theta: &Dist, top: &[String], psi: &dyn Fn(&str) -> f64, floor: f64) -> Dist {
    let mut out = Dist::new();
    for w in vocab(c, top.iter().map(String::as_str)) {
        let mut s = 0.0;
        for d in top {
            let prod: f64 = theta.iter().map(|(t, th)| c.p(t, d).max(floor).powf(*th)).product();
            s += c.p(&w, d) * prod;
        }
        out.insert(w.clone(), s * psi(&w));
    }
    normalize(out)
}

pub struct Vectors {
    pub v: BTreeMap<String, Vec<f64>>,
}

impl Vectors {
    /// Parses a word2vec text file and scales every vector to unit length.
    pub fn load(path: &Path) -> Self {
        let text = fs::read_to_string(path).unwrap();
        let v = text
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let mut it = l.split_whitespace();
                let w = it.next().unwrap().to_string();
                let x: Vec<f64> = it.map(|s| s.parse().unwrap()).collect();
                let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                (w, x.into_iter().map(|a| a / n).collect())
            })
            .collect();
        Self { v }
    }

    pub fn kernel(&self, w: &str, t: &str, h: f64, sigma: f64) -> Option<f64> {
        let (a, b) = (self.v.get(w)?, self.v.get(t)?);
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        Some((-d2 / (2.0 * sigma * sigma * h * h)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
    }

    pub fn cos(&self, w: &str, t: &str) -> Option<f64> {
        let (a, b) = (self.v.get(w)?, self.v.get(t)?);
        Some(a.iter().zip(b).map(|(x, y)| x * y).sum())
    }
}

pub fn kde_profile(
    c: &Corpus,
    rel: &[(String, Vec<String>, f64)],
    psi: &dyn Fn(&str) -> f64,
    vec: &Vectors,
    h: f64,
    sigma: f64,
) -> Dist {
    let tags = tag_union(rel);
    let all: Vec<String> = rel.iter().flat_map(|r| c.terms(&r.0).iter().cloned()).collect();
    let p_m = |t: &str| all.iter().filter(|x| *x == t).count() as f64 / all.len() as f64;
    let mut out = Dist::new();
    for w in vocab(c, rel.iter().map(|r| r.0.as_str())) {
        let rated: f64 = rel.iter().map(|(d, _, r)| r * c.p(&w, d)).sum();
        let spread: f64 = tags
            .iter()
            .filter_map(|t| vec.kernel(&w, t, h, sigma).map(|k| p_m(t) * k))
            .sum();
        out.insert(w.clone(), rated * psi(&w) * spread);
    }
    normalize(out)
}

#[allow(clippy::too_many_arguments)]
pub fn kde_factored(
    c: &Corpus,
    theta: &Dist,
    top: &[String],
    psi: &dyn Fn(&str) -> f64,
    vec: &Vectors,
    h: f64,
    sigma: f64,
    floor: f64,
) -> Dist {
    let mut out = Dist::new();
    for w in vocab(c, top.iter().map(String::as_str)) {
        let mut s = 0.0;
        for d in top {
            let prod: f64 = theta.iter().map(|(t, th)| c.p(t, d).max(floor).powf(*th)).product();
            s += c.p(&w, d) * prod;
        }
        let spread: f64 = theta.keys().filter_map(|t| vec.kernel(&w, t, h, sigma)).sum();
        out.insert(w.clone(), s * psi(&w) * spread);
    }
    normalize(out)
}

/// KDE relevance model over feedback documents with the tags as pivots.
pub fn kde_rlm(
    c: &Corpus,
    query: &[String],
    top: &[String],
    psi: &dyn Fn(&str) -> f64,
    vec: &Vectors,
    h: f64,
    sigma: f64,
) -> Dist {
    let all: Vec<String> = top.iter().flat_map(|d| c.terms(d).iter().cloned()).collect();
    let p_m = |t: &str| all.iter().filter(|x| *x == t).count() as f64 / all.len() as f64;
    let mut out = Dist::new();
    for w in vocab(c, top.iter().map(String::as_str)) {
        let spread: f64 = query
            .iter()
            .filter_map(|q| vec.kernel(&w, q, h, sigma).map(|k| p_m(q) * k))
            .sum();
        out.insert(w.clone(), p_m(&w) * psi(&w) * spread);
    }
    normalize(out)
}

/// Context weighting read straight from the knowledge-base TSVs.
pub struct PsiOracle {
    single: Vec<(String, String, f64)>,
    joint: Vec<(String, [String; 3], i32)>,
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#') && !l.starts_with("assessors"))
        .map(|l| l.split('\t').map(|s| s.trim().to_string()).collect())
        .collect()
}

impl PsiOracle {
    /// Only valid for KBs whose terms are single lowercase words.
    pub fn load(single: &Path, joint: &Path) -> Self {
        Self {
            single: rows(single)
                .into_iter()
                .map(|r| (r[2].to_lowercase(), r[3].clone(), r[1].parse().unwrap()))
                .collect(),
            joint: rows(joint)
                .into_iter()
                .map(|r| {
                    (
                        r[2].to_lowercase(),
                        [r[3].clone(), r[4].clone(), r[5].clone()],
                        r[1].parse::<f64>().unwrap() as i32,
                    )
                })
                .collect(),
        }
    }

    fn max_sim(vec: &Vectors, w: &str, seeds: &[&str]) -> f64 {
        if seeds.is_empty() || !vec.v.contains_key(w) {
            return 1.0;
        }
        let sims: Vec<f64> = seeds
            .iter()
            .filter_map(|s| vec.cos(w, s))
            .map(|c| c.clamp(0.0, 1.0))
            .collect();
        if sims.is_empty() {
            1.0
        } else {
            sims.into_iter().fold(0.0, f64::max)
        }
    }

    pub fn single(&self, vec: &Vectors, ctx: &TripContext, w: &str) -> f64 {
        let cats = [
            format!("trip-type={}", ctx.trip_type.as_str()),
            format!("trip-duration={}", ctx.trip_duration.as_str()),
            format!("accompanied-by={}", ctx.accompanied_by.as_str()),
        ];
        cats.iter()
            .map(|c| {
                let seeds: Vec<&str> = self
                    .single
                    .iter()
                    .filter(|(_, cat, s)| cat == c && (s + 1.0) / 2.0 > 0.0)
                    .map(|(t, _, _)| t.as_str())
                    .collect();
                Self::max_sim(vec, w, &seeds)
            })
            .sum::<f64>()
            / 3.0
    }

    pub fn joint(&self, vec: &Vectors, ctx: &TripContext, w: &str) -> f64 {
        let key = [
            ctx.trip_type.as_str(),
            ctx.trip_duration.as_str(),
            ctx.accompanied_by.as_str(),
        ];
        let seeds: Vec<&str> = self
            .joint
            .iter()
            .filter(|(_, c, l)| *l == 1 && c.iter().zip(key).all(|(a, b)| a == b))
            .map(|(t, _, _)| t.as_str())
            .collect();
        Self::max_sim(vec, w, &seeds)
    }
}

/// Linear-gain nDCG straight from the definition.
pub fn ndcg(grades: &[u32], judged: &[u32], k: usize) -> f64 {
    let dcg = |g: &[u32]| -> f64 {
        let mut s = 0.0;
        for (i, &x) in g.iter().enumerate().take(k) {
            s += x as f64 / ((i as f64) + 2.0).log2();
        }
        s
    };
    let mut ideal = judged.to_vec();
    ideal.sort_by(|a, b| b.cmp(a));
    let i = dcg(&ideal);
    if i == 0.0 {
        0.0
    } else {
        dcg(grades) / i
    }
}

pub fn ap(rel: &[bool], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..rel.len() {
        if rel[i] {
            let hits = rel[..=i].iter().filter(|&&r| r).count();
            s += hits as f64 / (i + 1) as f64;
        }
    }
    s / total as f64
}

pub fn p_at(rel: &[bool], k: usize) -> f64 {
    (0..k).filter(|&i| i < rel.len() && rel[i]).count() as f64 / k as f64
}

pub fn rr(rel: &[bool]) -> f64 {
    for (i, &r) in rel.iter().enumerate() {
        if r {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Gamma at positive integers and half-integers.
fn gamma_half(x2: u32) -> f64 {
    // x = x2 / 2
    match x2 {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        n => (n as f64 / 2.0 - 1.0) * gamma_half(n - 2),
    }
}

/// Two-sided p-value of a t statistic: integrates the Student-t density
/// from 0 to |t| with composite Simpson's rule.
pub fn t_two_sided(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    let f = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let n = 200_000;
    let a = t.abs();
    let h = a / n as f64;
    let mut s = f(0.0) + f(a);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = s * h / 3.0;
    1.0 - 2.0 * half
}

pub fn paired_t(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = m / (sd / n.sqrt());
    (t, t_two_sided(t, a.len() as u32 - 1))
}
