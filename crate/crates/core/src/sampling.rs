//! Round-based selection of the usage pairs humans annotate next.
//!
//! Round 1 samples a small share of the usages and a random walk over a
//! share of the edges among them. Round 2 compares every usage outside a
//! multi-cluster (a cluster with at least two usages) with one random member
//! of each multi-cluster. From round 3 on, an exploration walk over the
//! non-assignable usages and three quality heuristics are added:
//! corroboration, disagreement redistribution and conflict resampling.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::clustering::{conflicts, Clustering};
use crate::error::{Error, Result};
use crate::graph::{NodeId, Pair, Wug};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exploration,
    Combination,
    Corroboration,
    Disagreement,
    Conflict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub node_fraction_round1: f64,
    pub edge_fraction: f64,
    pub corroboration_count: usize,
    pub multi_annotation_fraction: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            node_fraction_round1: 0.10,
            edge_fraction: 0.30,
            corroboration_count: 5,
            multi_annotation_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("node_fraction_round1", self.node_fraction_round1),
            ("edge_fraction", self.edge_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.multi_annotation_fraction) {
            return Err(Error::InvalidConfig(
                "multi_annotation_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn rng(&self, round: u32, stream: u64) -> seed::Rng {
        seed::rng(self.seed, &[u64::from(round), stream])
    }
}

/// Pairs scheduled for one round, with the annotators assigned to each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBatch {
    pub round: u32,
    pub pairs: Vec<(Pair, Provenance)>,
    #[serde(with = "crate::graph::pair_map")]
    pub assignments: BTreeMap<Pair, Vec<String>>,
}

impl AnnotationBatch {
    pub fn new(round: u32) -> Self {
        AnnotationBatch {
            round,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn provenance(&self, pair: &Pair) -> Option<Provenance> {
        self.pairs.iter().find(|(p, _)| p == pair).map(|(_, t)| *t)
    }

    pub fn count(&self, kind: Provenance) -> usize {
        self.pairs.iter().filter(|(_, t)| *t == kind).count()
    }

    /// `(pair, annotator)` tasks in batch order.
    pub fn tasks(&self) -> impl Iterator<Item = (&Pair, &str)> {
        self.pairs.iter().flat_map(move |(p, _)| {
            self.assignments
                .get(p)
                .into_iter()
                .flatten()
                .map(move |a| (p, a.as_str()))
        })
    }

    /// Adds pairs not yet in the batch. Returns how many were added.
    pub fn extend(&mut self, pairs: impl IntoIterator<Item = Pair>, kind: Provenance) -> usize {
        let mut seen: HashSet<Pair> = self.pairs.iter().map(|(p, _)| p.clone()).collect();
        let before = self.pairs.len();
        for p in pairs {
            if seen.insert(p.clone()) {
                self.pairs.push((p, kind));
            }
        }
        self.pairs.len() - before
    }

    /// Assigns every pair to one annotator, and a `multi_annotation_fraction`
    /// share of the pairs to two. Annotators who already judged a pair in
    /// `graph` are never chosen for it; pairs nobody is left for are dropped
    /// with a warning.
    pub fn assign(&mut self, annotators: &[String], graph: &Wug, cfg: &SamplingConfig) {
        let mut rng = cfg.rng(self.round, 0xA551);
        let doubles = (self.pairs.len() as f64 * cfg.multi_annotation_fraction).round() as usize;
        let double: HashSet<usize> = index::sample(&mut rng, self.pairs.len(), doubles.min(self.pairs.len()))
            .into_iter()
            .collect();
        let mut kept = Vec::with_capacity(self.pairs.len());
        self.assignments.clear();
        for (i, (pair, kind)) in std::mem::take(&mut self.pairs).into_iter().enumerate() {
            let judged: BTreeSet<&str> = graph
                .edge(&pair)
                .map(|e| e.judgments.iter().map(|j| j.annotator.as_str()).collect())
                .unwrap_or_default();
            let mut eligible: Vec<&String> = annotators
                .iter()
                .filter(|a| !judged.contains(a.as_str()))
                .collect();
            if eligible.is_empty() {
                log::warn!("no annotator left for {pair} ({kind:?}); skipped");
                continue;
            }
            eligible.shuffle(&mut rng);
            let take = if double.contains(&i) { 2 } else { 1 };
            let chosen: Vec<String> = eligible.into_iter().take(take).cloned().collect();
            self.assignments.insert(pair.clone(), chosen);
            kept.push((pair, kind));
        }
        self.pairs = kept;
    }
}

fn edge_budget(nodes: usize, fraction: f64) -> usize {
    let possible = nodes * nodes.saturating_sub(1) / 2;
    let target = ((fraction * possible as f64) - 1e-9).ceil().max(0.0) as usize;
    target.max(nodes.saturating_sub(1)).min(possible)
}

/// Random walk over the complete graph on `nodes` emitting
/// `⌈fraction · n(n−1)/2⌉` distinct edges (never fewer than `n − 1`). The
/// walk first visits every node, so the edges always span `nodes`.
pub fn random_walk(nodes: &[NodeId], fraction: f64, rng: &mut seed::Rng) -> Vec<Pair> {
    let n = nodes.len();
    if n < 2 {
        return Vec::new();
    }
    let budget = edge_budget(n, fraction);
    let mut emitted: HashSet<(usize, usize)> = HashSet::with_capacity(budget);
    let mut degree = vec![0usize; n];
    let mut out = Vec::with_capacity(budget);
    let mut unvisited: Vec<usize> = (0..n).collect();
    let mut current = unvisited.swap_remove(rng.random_range(0..n));
    while out.len() < budget {
        let next = if !unvisited.is_empty() {
            Some(unvisited.swap_remove(rng.random_range(0..unvisited.len())))
        } else {
            let open: Vec<usize> = (0..n)
                .filter(|&v| v != current && !emitted.contains(&(current.min(v), current.max(v))))
                .collect();
            open.choose(rng).copied()
        };
        match next {
            Some(v) => {
                emitted.insert((current.min(v), current.max(v)));
                degree[current] += 1;
                degree[v] += 1;
                out.push(Pair::new(nodes[current].clone(), nodes[v].clone()).expect("distinct nodes"));
                current = v;
            }
            None => {
                // every edge at `current` is used; jump to a node with spare edges
                let open: Vec<usize> = (0..n).filter(|&v| degree[v] < n - 1).collect();
                current = *open.choose(rng).expect("budget below edge count");
            }
        }
    }
    out
}

/// Round-1 batch: `⌈node_fraction · n⌉` usages (at least 2) and a spanning
/// random walk over `edge_fraction` of the edges among them.
pub fn round1_sample(usages: &[NodeId], cfg: &SamplingConfig) -> Result<AnnotationBatch> {
    cfg.validate()?;
    let n = usages.len();
    if n < 2 {
        return Err(Error::TooFewUsages { needed: 2, found: n });
    }
    let mut rng = cfg.rng(1, 0);
    let k = ((cfg.node_fraction_round1 * n as f64 - 1e-9).ceil() as usize).clamp(2, n);
    let mut sorted = usages.to_vec();
    sorted.sort();
    let chosen: Vec<NodeId> = index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| sorted[i].clone())
        .collect();
    let mut batch = AnnotationBatch::new(1);
    batch.extend(
        random_walk(&chosen, cfg.edge_fraction, &mut rng),
        Provenance::Exploration,
    );
    Ok(batch)
}

/// Graph, clustering and the derived sets that drive sampling after a round.
#[derive(Clone, Debug)]
pub struct RoundState {
    /// The last completed round.
    pub round: u32,
    pub graph: Wug,
    pub clustering: Clustering,
    /// Cluster ids with at least two usages.
    pub multi_clusters: Vec<usize>,
    /// Usages outside every multi-cluster.
    pub unassigned: Vec<NodeId>,
    /// Unassigned usages already compared to every multi-cluster.
    pub non_assignable: Vec<NodeId>,
    members: BTreeMap<usize, Vec<NodeId>>,
    neighbours: HashMap<NodeId, HashSet<NodeId>>,
}

impl RoundState {
    pub fn new(round: u32, graph: Wug, clustering: Clustering) -> Self {
        let usage_ids: BTreeSet<NodeId> = graph.usages().map(|u| u.identifier.clone()).collect();
        let mut neighbours: HashMap<NodeId, HashSet<NodeId>> = HashMap::new();
        for (pair, _) in graph.edges() {
            neighbours
                .entry(pair.first().to_owned())
                .or_default()
                .insert(pair.second().to_owned());
            neighbours
                .entry(pair.second().to_owned())
                .or_default()
                .insert(pair.first().to_owned());
        }
        let mut members: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for (id, &c) in clustering.assignment() {
            if usage_ids.contains(id) {
                members.entry(c).or_default().push(id.clone());
            }
        }
        let multi_clusters: Vec<usize> = members
            .iter()
            .filter(|(_, m)| m.len() >= 2)
            .map(|(&c, _)| c)
            .collect();
        let in_multi: HashSet<&NodeId> = multi_clusters.iter().flat_map(|c| members[c].iter()).collect();
        let unassigned: Vec<NodeId> = usage_ids
            .iter()
            .filter(|u| !in_multi.contains(u))
            .cloned()
            .collect();
        let mut state = RoundState {
            round,
            graph,
            clustering,
            multi_clusters,
            unassigned,
            non_assignable: Vec::new(),
            members,
            neighbours,
        };
        state.non_assignable = if state.multi_clusters.is_empty() {
            Vec::new()
        } else {
            state
                .unassigned
                .iter()
                .filter(|u| state.multi_clusters.iter().all(|&c| state.compared(u, c)))
                .cloned()
                .collect()
        };
        state
    }

    /// Usage members of cluster `c`.
    pub fn members(&self, c: usize) -> &[NodeId] {
        self.members.get(&c).map_or(&[], Vec::as_slice)
    }

    /// Whether `usage` has an annotated edge to some member of cluster `c`.
    pub fn compared(&self, usage: &str, c: usize) -> bool {
        let Some(adj) = self.neighbours.get(usage) else {
            return false;
        };
        self.members(c).iter().any(|m| adj.contains(m))
    }

    fn annotated(&self, a: &str, b: &str) -> bool {
        self.neighbours.get(a).is_some_and(|adj| adj.contains(b))
    }

    fn usage_pool(&self) -> Vec<NodeId> {
        self.graph.usages().map(|u| u.identifier.clone()).collect()
    }

    /// Sampling is done for this lemma once every usage has been compared to
    /// every multi-cluster, every pair of clusters shares an annotated edge
    /// and the clustering has no conflicting edge.
    pub fn is_complete(&self) -> bool {
        if self.multi_clusters.is_empty() || !conflicts(&self.graph, &self.clustering).is_empty() {
            return false;
        }
        let pending = self
            .unassigned
            .iter()
            .any(|u| self.multi_clusters.iter().any(|&c| !self.compared(u, c)));
        if pending {
            return false;
        }
        let clusters: Vec<usize> = self.members.keys().copied().collect();
        let mut linked: HashSet<(usize, usize)> = HashSet::new();
        for (pair, _) in self.graph.edges() {
            if let (Some(a), Some(b)) = (
                self.clustering.cluster_of(pair.first()),
                self.clustering.cluster_of(pair.second()),
            ) {
                linked.insert((a.min(b), a.max(b)));
            }
        }
        clusters.iter().enumerate().all(|(i, &a)| {
            clusters[i + 1..]
                .iter()
                .all(|&b| linked.contains(&(a.min(b), a.max(b))))
        })
    }
}

/// One pair per unassigned usage and multi-cluster it has not been compared
/// to, against a random member of that cluster.
pub fn combination_step(state: &RoundState, cfg: &SamplingConfig) -> Vec<Pair> {
    let mut rng = cfg.rng(state.round + 1, 1);
    let mut out = Vec::new();
    for u in &state.unassigned {
        for &c in &state.multi_clusters {
            if state.compared(u, c) {
                continue;
            }
            let partner = state
                .members(c)
                .choose(&mut rng)
                .expect("multi-cluster has members");
            out.push(Pair::new(u.clone(), partner.clone()).expect("usage is outside the cluster"));
        }
    }
    out
}

/// Random walk over the non-assignable usages.
pub fn exploration_step(state: &RoundState, cfg: &SamplingConfig) -> Vec<Pair> {
    let mut rng = cfg.rng(state.round + 1, 2);
    random_walk(&state.non_assignable, cfg.edge_fraction, &mut rng)
}

/// `corroboration_count` random unannotated pairs among clustered usages,
/// plus one random unannotated pair between every two multi-clusters.
pub fn corroboration_sample(state: &RoundState, cfg: &SamplingConfig) -> Vec<Pair> {
    let mut rng = cfg.rng(state.round + 1, 3);
    let clustered: Vec<&NodeId> = state.members.values().flatten().collect();
    let mut open = Vec::new();
    for (i, a) in clustered.iter().enumerate() {
        for b in &clustered[i + 1..] {
            if !state.annotated(a, b) {
                open.push(((*a).clone(), (*b).clone()));
            }
        }
    }
    let mut out: Vec<Pair> = open
        .choose_multiple(&mut rng, cfg.corroboration_count)
        .map(|(a, b)| Pair::new(a.clone(), b.clone()).expect("distinct"))
        .collect();
    for (i, &x) in state.multi_clusters.iter().enumerate() {
        for &y in &state.multi_clusters[i + 1..] {
            let across: Vec<(&NodeId, &NodeId)> = state
                .members(x)
                .iter()
                .flat_map(|a| state.members(y).iter().map(move |b| (a, b)))
                .filter(|(a, b)| !state.annotated(a, b))
                .collect();
            if let Some((a, b)) = across.choose(&mut rng) {
                out.push(Pair::new((*a).clone(), (*b).clone()).expect("distinct"));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Tolerance around 2.5 for an edge median to count as undecided.
pub const UNDECIDED_MEDIAN_TOLERANCE: f64 = 0.25;

/// Edges whose non-zero scores differ by two or more, or whose median is
/// about 2.5.
pub fn disagreement_edges(graph: &Wug) -> Vec<Pair> {
    graph
        .edges()
        .filter(|(_, e)| {
            let (lo, hi) = e
                .nonzero_scores()
                .fold((u8::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
            let spread = lo <= hi && hi - lo >= 2;
            let undecided = e
                .weight
                .is_some_and(|w| (w - 2.5).abs() <= UNDECIDED_MEDIAN_TOLERANCE);
            spread || undecided
        })
        .map(|(p, _)| p.clone())
        .collect()
}

/// For every node on a conflicting edge, one new unannotated pair to a
/// uniformly chosen usage.
pub fn conflict_resample(state: &RoundState, cfg: &SamplingConfig) -> Vec<Pair> {
    let mut rng = cfg.rng(state.round + 1, 4);
    let found = conflicts(&state.graph, &state.clustering);
    let endpoints: BTreeSet<&str> = found.iter().flat_map(|p| [p.first(), p.second()]).collect();
    let pool = state.usage_pool();
    let mut out = BTreeSet::new();
    for node in endpoints {
        let candidates: Vec<&NodeId> = pool
            .iter()
            .filter(|v| v.as_str() != node && !state.annotated(node, v))
            .collect();
        if let Some(v) = candidates.choose(&mut rng) {
            out.insert(Pair::new(node, (*v).clone()).expect("distinct"));
        }
    }
    out.into_iter().collect()
}

/// Batch for round `state.round + 1`, assigned to `annotators`.
///
/// Round 2 is combination only. Later rounds add exploration over the
/// non-assignable usages, corroboration, redistribution of disagreements and
/// conflict resampling. Without any multi-cluster, a fresh round-1 style walk
/// over the unassigned usages is sampled instead.
pub fn next_round(
    state: &RoundState,
    annotators: &[String],
    cfg: &SamplingConfig,
) -> Result<AnnotationBatch> {
    cfg.validate()?;
    if state.round < 1 {
        return Err(Error::InvalidConfig(
            "next_round needs a completed round; use round1_sample first".into(),
        ));
    }
    let round = state.round + 1;
    let mut batch = AnnotationBatch::new(round);
    let fresh = |pairs: Vec<Pair>| -> Vec<Pair> {
        pairs
            .into_iter()
            .filter(|p| !state.annotated(p.first(), p.second()))
            .collect()
    };

    if state.multi_clusters.is_empty() {
        let mut rng = cfg.rng(round, 5);
        let pool: Vec<NodeId> = state
            .unassigned
            .iter()
            .filter(|u| !state.neighbours.contains_key(*u))
            .cloned()
            .collect();
        let pool = if pool.len() >= 2 {
            pool
        } else {
            state.unassigned.clone()
        };
        let k = ((cfg.node_fraction_round1 * pool.len() as f64 - 1e-9).ceil() as usize)
            .clamp(2.min(pool.len()), pool.len());
        let chosen: Vec<NodeId> = index::sample(&mut rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        batch.extend(
            fresh(random_walk(&chosen, cfg.edge_fraction, &mut rng)),
            Provenance::Exploration,
        );
    } else if round == 2 {
        batch.extend(combination_step(state, cfg), Provenance::Combination);
    } else {
        batch.extend(disagreement_edges(&state.graph), Provenance::Disagreement);
        batch.extend(combination_step(state, cfg), Provenance::Combination);
        batch.extend(fresh(exploration_step(state, cfg)), Provenance::Exploration);
        batch.extend(corroboration_sample(state, cfg), Provenance::Corroboration);
        batch.extend(conflict_resample(state, cfg), Provenance::Conflict);
    }
    batch.assign(annotators, &state.graph, cfg);
    Ok(batch)
}

/// Thresholds for flagging a whole word for removal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordFlagConfig {
    /// Flag when more than this share of all judgments is 0.
    pub max_zero_share: f64,
    /// Flag when a round would need more pairs than this.
    pub max_pending_pairs: Option<usize>,
}

impl Default for WordFlagConfig {
    fn default() -> Self {
        WordFlagConfig {
            max_zero_share: 0.2,
            max_pending_pairs: None,
        }
    }
}

/// Reason to consider dropping the word, if any. Never deletes anything.
pub fn flag_word(graph: &Wug, pending_pairs: usize, cfg: &WordFlagConfig) -> Option<String> {
    let (zeros, total) = graph.judgments().fold((0usize, 0usize), |(z, t), j| {
        (z + usize::from(j.score == 0), t + 1)
    });
    if total > 0 && zeros as f64 > cfg.max_zero_share * total as f64 {
        return Some(format!("{zeros} of {total} judgments are 0"));
    }
    match cfg.max_pending_pairs {
        Some(limit) if pending_pairs > limit => {
            Some(format!("{pending_pairs} pairs pending, budget {limit}"))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_wug, tests::usage, Judgment};

    fn ids(n: usize) -> Vec<NodeId> {
        (0..n).map(|i| format!("u{i:03}")).collect()
    }

    fn spans(nodes: &[NodeId], pairs: &[Pair]) -> bool {
        let mut reached: BTreeSet<&str> = BTreeSet::from([nodes[0].as_str()]);
        loop {
            let before = reached.len();
            for p in pairs {
                if reached.contains(p.first()) || reached.contains(p.second()) {
                    reached.insert(p.first());
                    reached.insert(p.second());
                }
            }
            if reached.len() == before {
                return reached.len() == nodes.len();
            }
        }
    }

    #[test]
    fn budget_arithmetic() {
        assert_eq!(edge_budget(20, 0.3), 57);
        assert_eq!(edge_budget(10, 0.3), 14);
        assert_eq!(edge_budget(2, 0.3), 1);
        assert_eq!(edge_budget(3, 0.3), 2);
        assert_eq!(edge_budget(5, 1.0), 10);
    }

    #[test]
    fn round1_on_two_hundred_usages() {
        let usages = ids(200);
        let batch = round1_sample(&usages, &SamplingConfig::default()).unwrap();
        let nodes: BTreeSet<&str> = batch
            .pairs
            .iter()
            .flat_map(|(p, _)| [p.first(), p.second()])
            .collect();
        assert_eq!(nodes.len(), 20);
        assert_eq!(batch.len(), 57);
        let nodes: Vec<NodeId> = nodes.into_iter().map(String::from).collect();
        let pairs: Vec<Pair> = batch.pairs.iter().map(|(p, _)| p.clone()).collect();
        assert!(spans(&nodes, &pairs));
    }

    #[test]
    fn round1_minimum() {
        let batch = round1_sample(&ids(2), &SamplingConfig::default()).unwrap();
        assert_eq!(batch.len(), 1);
        assert!(matches!(
            round1_sample(&ids(1), &SamplingConfig::default()),
            Err(Error::TooFewUsages { .. })
        ));
    }

    #[test]
    fn walks_are_distinct_and_cover_everything_at_full_budget() {
        let nodes = ids(6);
        let mut rng = seed::rng(1, &[]);
        let pairs = random_walk(&nodes, 1.0, &mut rng);
        let set: BTreeSet<_> = pairs.iter().collect();
        assert_eq!(set.len(), 15);
        assert_eq!(pairs.len(), 15);
    }

    fn judged(usages: &[&str], edges: &[(&str, &str, i64)]) -> Wug {
        let us: Vec<_> = usages.iter().map(|id| usage(id, 1)).collect();
        let js: Vec<_> = edges
            .iter()
            .map(|(a, b, s)| Judgment::new(*a, *b, "x", *s, 1).unwrap())
            .collect();
        build_wug(&us, &js).unwrap()
    }

    #[test]
    fn combination_counts() {
        // three multi-clusters {a,b} {c,d} {e,f}; one fresh usage z
        let g = judged(
            &["a", "b", "c", "d", "e", "f", "z"],
            &[
                ("a", "b", 4),
                ("c", "d", 4),
                ("e", "f", 4),
                ("a", "c", 1),
                ("c", "e", 1),
            ],
        );
        let c = Clustering::from_groups([vec!["a", "b"], vec!["c", "d"], vec!["e", "f"]]);
        let state = RoundState::new(1, g, c);
        assert_eq!(state.unassigned, vec!["z".to_string()]);
        let pairs = combination_step(&state, &SamplingConfig::default());
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.contains("z")));
    }

    #[test]
    fn compared_usages_are_not_recombined() {
        // five singletons v..z; x is already compared to {a,b}, y to {c,d}
        let g = judged(
            &["a", "b", "c", "d", "v", "w", "x", "y", "z"],
            &[
                ("a", "b", 4),
                ("c", "d", 4),
                ("a", "c", 1),
                ("x", "a", 1),
                ("y", "d", 2),
            ],
        );
        let c = Clustering::from_groups([vec!["a", "b"], vec!["c", "d"], vec!["x"], vec!["y"]]);
        let state = RoundState::new(1, g, c);
        // by enumeration: v,w,z need 2 each, x and y need 1 each -> 8
        assert_eq!(combination_step(&state, &SamplingConfig::default()).len(), 8);

        // 5 unassigned, 2 clusters, one prior comparison each
        let g = judged(
            &["a", "b", "c", "d", "p", "q", "r", "s", "t"],
            &[
                ("a", "b", 4),
                ("c", "d", 4),
                ("p", "a", 1),
                ("q", "a", 1),
                ("r", "c", 1),
                ("s", "d", 1),
                ("t", "b", 1),
            ],
        );
        let c = Clustering::from_groups(
            [vec!["a", "b"], vec!["c", "d"], vec!["p", "q", "r", "s", "t"]]
                .into_iter()
                .take(2),
        )
        .with_isolates(["p", "q", "r", "s", "t"].map(String::from));
        let state = RoundState::new(1, g, c);
        assert_eq!(state.unassigned.len(), 5);
        assert_eq!(combination_step(&state, &SamplingConfig::default()).len(), 5);
    }

    #[test]
    fn fully_compared_usage_is_non_assignable() {
        let g = judged(&["a", "b", "c"], &[("a", "b", 4), ("c", "a", 1)]);
        let c = Clustering::from_groups([vec!["a", "b"], vec!["c"]]);
        let state = RoundState::new(2, g, c);
        assert!(combination_step(&state, &SamplingConfig::default()).is_empty());
        assert_eq!(state.non_assignable, vec!["c".to_string()]);
        assert!(exploration_step(&state, &SamplingConfig::default()).is_empty());
    }

    #[test]
    fn exploration_stays_inside_non_assignable() {
        let mut usages = vec!["a", "b"];
        let singles: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        usages.extend(singles.iter().map(String::as_str));
        let mut edges = vec![("a", "b", 4)];
        edges.extend(singles.iter().map(|s| (s.as_str(), "a", 1)));
        let g = judged(&usages, &edges);
        let mut groups = vec![vec!["a".to_string(), "b".to_string()]];
        groups.extend(singles.iter().map(|s| vec![s.clone()]));
        let state = RoundState::new(2, g, Clustering::from_groups(groups));
        assert_eq!(state.non_assignable.len(), 10);
        let pairs = exploration_step(&state, &SamplingConfig::default());
        assert_eq!(pairs.len(), 14);
        assert!(pairs
            .iter()
            .all(|p| p.first().starts_with('s') && p.second().starts_with('s')));
        assert!(spans(&state.non_assignable, &pairs));
    }

    #[test]
    fn disagreement_rules() {
        let g = judged(&["a", "b", "c", "d"], &[]);
        let mk = |scores: &[i64]| {
            let js: Vec<_> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| Judgment::new("a", "b", format!("x{i}"), *s, 1).unwrap())
                .collect();
            g.with_judgments(&js).unwrap()
        };
        assert_eq!(disagreement_edges(&mk(&[1, 3])).len(), 1);
        assert_eq!(disagreement_edges(&mk(&[2, 3])).len(), 1);
        assert!(disagreement_edges(&mk(&[4, 4])).is_empty());
        assert!(disagreement_edges(&mk(&[3, 4])).is_empty());
        assert!(disagreement_edges(&mk(&[0, 0])).is_empty());
    }

    #[test]
    fn corroboration_between_clusters() {
        let g = judged(&["a", "b", "c", "d"], &[("a", "b", 4), ("c", "d", 4)]);
        let c = Clustering::from_groups([["a", "b"], ["c", "d"]]);
        let state = RoundState::new(2, g, c);
        let cfg = SamplingConfig {
            corroboration_count: 0,
            ..Default::default()
        };
        assert_eq!(corroboration_sample(&state, &cfg).len(), 1);

        let full = judged(&["a", "b", "c"], &[("a", "b", 4), ("b", "c", 4), ("a", "c", 4)]);
        let state = RoundState::new(2, full, Clustering::from_groups([["a", "b", "c"]]));
        assert!(corroboration_sample(&state, &SamplingConfig::default()).is_empty());
    }

    #[test]
    fn conflict_resampling_is_bounded() {
        let g = judged(&["a", "b", "c", "d", "e"], &[("a", "b", 1), ("c", "d", 4)]);
        let c = Clustering::from_groups([vec!["a", "b"], vec!["c", "d"]]);
        let state = RoundState::new(3, g.clone(), c.clone());
        let pairs = conflict_resample(&state, &SamplingConfig::default());
        assert!(!pairs.is_empty() && pairs.len() <= 2);
        assert!(pairs.iter().all(|p| !g.is_annotated(p)));

        let clean = Clustering::from_groups([vec!["a"], vec!["b"], vec!["c", "d"]]);
        let state = RoundState::new(3, g, clean);
        assert!(conflict_resample(&state, &SamplingConfig::default()).is_empty());
    }

    #[test]
    fn assignment_doubles_half_and_skips_exhausted_pairs() {
        let usages = ids(30);
        let g = Wug::builder()
            .usages(usages.iter().map(|id| usage(id, 1)))
            .build()
            .unwrap();
        let mut batch = AnnotationBatch::new(3);
        let pairs: Vec<Pair> = (1..=20)
            .flat_map(|i| [Pair::new(usages[0].clone(), usages[i].clone()).unwrap()])
            .chain((2..=21).map(|i| Pair::new(usages[1].clone(), usages[i + 5].clone()).unwrap()))
            .collect();
        batch.extend(pairs, Provenance::Combination);
        assert_eq!(batch.len(), 40);
        let annotators: Vec<String> = ["a1", "a2", "a3"].map(String::from).to_vec();
        batch.assign(&annotators, &g, &SamplingConfig::default());
        let doubles = batch.assignments.values().filter(|v| v.len() == 2).count();
        assert_eq!(doubles, 20);

        let judged = judged(&["a", "b"], &[("a", "b", 1)]);
        let mut batch = AnnotationBatch::new(3);
        batch.extend(
            disagreement_edges(
                &judged
                    .with_judgments(&[
                        Judgment::new("a", "b", "a1", 1, 1).unwrap(),
                        Judgment::new("a", "b", "a2", 4, 1).unwrap(),
                    ])
                    .unwrap(),
            ),
            Provenance::Disagreement,
        );
        let g2 = judged
            .with_judgments(&[
                Judgment::new("a", "b", "a1", 1, 1).unwrap(),
                Judgment::new("a", "b", "a2", 4, 1).unwrap(),
            ])
            .unwrap();
        let mut copy = batch.clone();
        copy.assign(&annotators, &g2, &SamplingConfig::default());
        assert_eq!(copy.assignments.values().next().unwrap(), &vec!["a3".to_string()]);
        batch.assign(&annotators[..2], &g2, &SamplingConfig::default());
        assert!(batch.is_empty());
    }

    #[test]
    fn word_flags() {
        let g = judged(&["a", "b", "c"], &[("a", "b", 0), ("b", "c", 4), ("a", "c", 4)]);
        assert!(flag_word(&g, 0, &WordFlagConfig::default()).is_some());
        let g = judged(&["a", "b"], &[("a", "b", 4)]);
        assert!(flag_word(&g, 0, &WordFlagConfig::default()).is_none());
        let cfg = WordFlagConfig {
            max_pending_pairs: Some(10),
            ..Default::default()
        };
        assert!(flag_word(&g, 11, &cfg).is_some());
    }
}
