//! Agreement statistics, judgment distributions and change scores.
//!
//! Score 0 ("cannot decide") is never treated as a value: it is dropped
//! before any correlation, reliability or disagreement computation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::graph::{Judgment, Node, Pair, Period, Wug};

/// Spearman correlation of one annotator pair over the edges both judged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotators: (String, String),
    pub rho: f64,
    pub n_shared: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// `None` for all rounds together.
    pub round: Option<u32>,
    pub pairwise_spearman: Vec<PairAgreement>,
    /// Mean of the pairwise correlations weighted by `n_shared`.
    pub weighted_mean_spearman: Option<f64>,
    pub krippendorff_alpha: Option<f64>,
}

/// Latest non-zero score of every annotator on every edge.
fn scores_by_edge(judgments: &[Judgment]) -> BTreeMap<&Pair, BTreeMap<&str, (u32, u8)>> {
    let mut out: BTreeMap<&Pair, BTreeMap<&str, (u32, u8)>> = BTreeMap::new();
    for j in judgments.iter().filter(|j| j.score != 0) {
        let slot = out.entry(&j.pair).or_default();
        match slot.get(j.annotator.as_str()) {
            Some(&(round, _)) if round > j.round => {}
            _ => {
                slot.insert(&j.annotator, (j.round, j.score));
            }
        }
    }
    out
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman's rho with average ranks for ties. `None` for fewer than two
/// observations or a constant side.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "paired samples");
    if x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Rho for every annotator pair with at least two shared non-zero edges.
/// Pairs whose correlation is undefined (a constant side) are left out.
pub fn pairwise_spearman(judgments: &[Judgment]) -> Vec<PairAgreement> {
    let by_edge = scores_by_edge(judgments);
    let annotators: BTreeSet<&str> = by_edge.values().flat_map(|m| m.keys().copied()).collect();
    let annotators: Vec<&str> = annotators.into_iter().collect();
    let mut out = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let (x, y): (Vec<f64>, Vec<f64>) = by_edge
                .values()
                .filter_map(|m| Some((f64::from(m.get(a)?.1), f64::from(m.get(b)?.1))))
                .unzip();
            if x.len() < 2 {
                continue;
            }
            if let Some(rho) = spearman(&x, &y) {
                out.push(PairAgreement {
                    annotators: ((*a).to_owned(), (*b).to_owned()),
                    rho,
                    n_shared: x.len(),
                });
            }
        }
    }
    out
}

pub fn weighted_mean_spearman(pairs: &[PairAgreement]) -> Option<f64> {
    let weight: usize = pairs.iter().map(|p| p.n_shared).sum();
    if weight == 0 {
        return None;
    }
    Some(pairs.iter().map(|p| p.rho * p.n_shared as f64).sum::<f64>() / weight as f64)
}

/// Krippendorff's alpha with the interval metric over units of pairable
/// values, via the coincidence matrix. Units with fewer than two values are
/// ignored. `None` when no unit has two values.
pub fn interval_alpha<U>(units: U) -> Option<f64>
where
    U: IntoIterator,
    U::Item: AsRef<[f64]>,
{
    let units: Vec<Vec<f64>> = units
        .into_iter()
        .map(|u| u.as_ref().to_vec())
        .filter(|u| u.len() >= 2)
        .collect();
    if units.is_empty() {
        return None;
    }
    let mut values: Vec<f64> = units.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let index = |v: f64| values.binary_search_by(|x| x.total_cmp(&v)).expect("known value");
    let k = values.len();
    let mut coincidence = vec![vec![0.0; k]; k];
    for unit in &units {
        let m = unit.len() as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[index(a)][index(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let (mut observed, mut expected) = (0.0, 0.0);
    for c in 0..k {
        for d in 0..k {
            let delta = (values[c] - values[d]).powi(2);
            observed += coincidence[c][d] * delta;
            expected += marginals[c] * marginals[d] * delta;
        }
    }
    if expected == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - (n - 1.0) * observed / expected)
}

/// Alpha over edges as units and non-zero scores as values.
pub fn krippendorff_alpha(judgments: &[Judgment]) -> Option<f64> {
    interval_alpha(
        scores_by_edge(judgments)
            .values()
            .map(|m| m.values().map(|&(_, s)| f64::from(s)).collect::<Vec<_>>()),
    )
}

/// Agreement over the judgments of `round`, or all of them.
pub fn agreement_report(judgments: &[Judgment], round: Option<u32>) -> AgreementReport {
    let selected: Vec<Judgment> = judgments
        .iter()
        .filter(|j| round.is_none_or(|r| j.round == r))
        .cloned()
        .collect();
    let pairs = pairwise_spearman(&selected);
    AgreementReport {
        round,
        weighted_mean_spearman: weighted_mean_spearman(&pairs),
        pairwise_spearman: pairs,
        krippendorff_alpha: krippendorff_alpha(&selected),
    }
}

/// Share of doubly judged edges per absolute score difference 0..=3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementHistogram {
    pub edges: usize,
    pub counts: [usize; 4],
    pub proportions: [f64; 4],
}

/// Over edges with exactly two non-zero judgments.
pub fn disagreement_histogram(judgments: &[Judgment]) -> DisagreementHistogram {
    let mut per_edge: BTreeMap<&Pair, Vec<u8>> = BTreeMap::new();
    for j in judgments.iter().filter(|j| j.score != 0) {
        per_edge.entry(&j.pair).or_default().push(j.score);
    }
    let mut counts = [0usize; 4];
    for scores in per_edge.values().filter(|s| s.len() == 2) {
        counts[usize::from(scores[0].abs_diff(scores[1]))] += 1;
    }
    let edges: usize = counts.iter().sum();
    let proportions = counts.map(|c| if edges == 0 { 0.0 } else { c as f64 / edges as f64 });
    DisagreementHistogram {
        edges,
        counts,
        proportions,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgmentFrequencies {
    pub total: usize,
    /// Indexed by score 0..=4.
    pub counts: [usize; 5],
    pub proportions: [f64; 5],
}

pub fn judgment_frequencies(judgments: &[Judgment]) -> JudgmentFrequencies {
    let mut counts = [0usize; 5];
    for j in judgments {
        counts[usize::from(j.score)] += 1;
    }
    let total = judgments.len();
    JudgmentFrequencies {
        total,
        counts,
        proportions: counts.map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 }),
    }
}

/// Number of clustered usages of `period` in each cluster of the full graph.
pub fn cluster_frequency_dist(graph: &Wug, clustering: &Clustering, period: Period) -> Result<Vec<usize>> {
    if !graph.periods().contains(&period) {
        return Err(Error::UnknownPeriod(period));
    }
    let mut freq = vec![0usize; clustering.cluster_count()];
    for node in graph.nodes() {
        if let Node::Usage(u) = node {
            if u.grouping == period {
                if let Some(c) = clustering.cluster_of(&u.identifier) {
                    freq[c] += 1;
                }
            }
        }
    }
    Ok(freq)
}

/// Jensen–Shannon distance (base 2) between two frequency vectors after
/// normalization. `None` if either is all zero.
pub fn jensen_shannon_distance(p: &[usize], q: &[usize]) -> Option<f64> {
    let len = p.len().max(q.len());
    let (sp, sq): (usize, usize) = (p.iter().sum(), q.iter().sum());
    if sp == 0 || sq == 0 {
        return None;
    }
    let at = |v: &[usize], s: usize, i: usize| v.get(i).map_or(0.0, |&c| c as f64 / s as f64);
    let (mut kl_p, mut kl_q) = (0.0, 0.0);
    for i in 0..len {
        let (a, b) = (at(p, sp, i), at(q, sq, i));
        let m = (a + b) / 2.0;
        if a > 0.0 {
            kl_p += a * (a / m).log2();
        }
        if b > 0.0 {
            kl_q += b * (b / m).log2();
        }
    }
    let divergence = ((kl_p + kl_q) / 2.0).clamp(0.0, 1.0);
    Some(divergence.sqrt())
}

/// Per-period cluster frequencies and the change scores derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeScores {
    pub periods: (Period, Period),
    pub freq_dist: (Vec<usize>, Vec<usize>),
    pub graded: f64,
    pub binary: bool,
    /// A sense counts as present with at least `k` usages ...
    pub k: usize,
    /// ... and as absent with at most `n`.
    pub n: usize,
}

fn first_two_periods(graph: &Wug) -> Result<(Period, Period)> {
    let mut it = graph.periods().iter().copied();
    match (it.next(), it.next()) {
        (Some(a), Some(b)) => Ok((a, b)),
        (Some(a), None) => Err(Error::UnknownPeriod(a + 1)),
        _ => Err(Error::UnknownPeriod(1)),
    }
}

/// Distance between the cluster distributions of the first two periods.
/// `Ok(None)` if one period has no clustered usage.
pub fn graded_change(graph: &Wug, clustering: &Clustering) -> Result<Option<f64>> {
    let (a, b) = first_two_periods(graph)?;
    let p = cluster_frequency_dist(graph, clustering, a)?;
    let q = cluster_frequency_dist(graph, clustering, b)?;
    Ok(jensen_shannon_distance(&p, &q))
}

/// True iff some cluster has at least `k` usages in one period and at most
/// `n` in the other.
pub fn binary_change_from(p: &[usize], q: &[usize], k: usize, n: usize) -> bool {
    p.iter()
        .zip(q)
        .any(|(&a, &b)| (a >= k && b <= n) || (b >= k && a <= n))
}

pub fn binary_change(graph: &Wug, clustering: &Clustering, k: usize, n: usize) -> Result<Option<bool>> {
    let (a, b) = first_two_periods(graph)?;
    let p = cluster_frequency_dist(graph, clustering, a)?;
    let q = cluster_frequency_dist(graph, clustering, b)?;
    if p.iter().sum::<usize>() == 0 || q.iter().sum::<usize>() == 0 {
        return Ok(None);
    }
    Ok(Some(binary_change_from(&p, &q, k, n)))
}

/// Both scores at once; `Ok(None)` when a period is empty.
pub fn change_scores(
    graph: &Wug,
    clustering: &Clustering,
    k: usize,
    n: usize,
) -> Result<Option<ChangeScores>> {
    let periods = first_two_periods(graph)?;
    let p = cluster_frequency_dist(graph, clustering, periods.0)?;
    let q = cluster_frequency_dist(graph, clustering, periods.1)?;
    let Some(graded) = jensen_shannon_distance(&p, &q) else {
        return Ok(None);
    };
    Ok(Some(ChangeScores {
        periods,
        binary: binary_change_from(&p, &q, k, n),
        freq_dist: (p, q),
        graded,
        k,
        n,
    }))
}
