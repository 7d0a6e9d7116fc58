//! Ranking metrics over a single query.

/// nDCG with linear gain and `1/log2(i+1)` discount.
///
/// `ranking` holds the grades of the retrieved documents in rank order,
/// `judged` the grades of every judged document of the query (the ideal
/// ordering is taken over this multiset). `k = None` evaluates the full
/// ranking. A query with no positive grade scores 0.
pub fn ndcg_at_k(ranking: &[u32], judged: &[u32], k: Option<usize>) -> f64 {
    let k = k.unwrap_or(usize::MAX);
    let mut ideal: Vec<u32> = judged.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.iter().copied().take(k));
    if idcg <= 0.0 {
        return 0.0;
    }
    (dcg(ranking.iter().copied().take(k)) / idcg).min(1.0)
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// Fraction of the top `k` positions holding a relevant document.
pub fn precision_at_k(rel: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    rel.iter().take(k).filter(|&&r| r).count() as f64 / k as f64
}

/// Mean of the precision values at each relevant rank, over `total_relevant`.
pub fn average_precision(rel: &[bool], total_relevant: usize) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in rel.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

/// Reciprocal rank of the first relevant document, 0 if none.
pub fn mrr(rel: &[bool]) -> f64 {
    rel.iter().position(|&r| r).map_or(0.0, |i| 1.0 / (i + 1) as f64)
}
