//! Correlation clustering of usage graphs.
//!
//! Edge weights are shifted by −2.5 so that judgments of 3 and 4 pull
//! usages together and judgments of 1 and 2 push them apart. The loss of a
//! clustering is the sum of positive shifted weights cut between clusters
//! plus the absolute negative shifted weights kept inside clusters:
//!
//! ```text
//! L(C) = Σ_{e positive, across} W'(e) + Σ_{e negative, within} |W'(e)|
//! ```
//!
//! [`cluster`] minimizes it with simulated annealing, sweeping the maximum
//! number of clusters and restarting from random and heuristic states.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, Pair, Wug};
use crate::seed;

/// A hard partition of the non-isolated nodes of a graph.
///
/// Cluster ids are dense, `0..cluster_count()`, and numbered by first
/// appearance in node-id order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    assignment: BTreeMap<NodeId, usize>,
    isolates: Vec<NodeId>,
    loss: f64,
    normalized_loss: f64,
}

impl Clustering {
    /// Builds a clustering from arbitrary labels. Loss fields are zero until
    /// [`Clustering::evaluated`] is called.
    pub fn from_assignment<I, S, L>(labels: I) -> Self
    where
        I: IntoIterator<Item = (S, L)>,
        S: Into<NodeId>,
        L: Ord,
    {
        let raw: BTreeMap<NodeId, L> = labels.into_iter().map(|(s, l)| (s.into(), l)).collect();
        let mut relabel: BTreeMap<&L, usize> = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for (id, label) in &raw {
            let next = relabel.len();
            let dense = *relabel.entry(label).or_insert(next);
            assignment.insert(id.clone(), dense);
        }
        Clustering {
            assignment,
            ..Default::default()
        }
    }

    /// `[["a", "b"], ["c"]]` style construction.
    pub fn from_groups<G, S>(groups: impl IntoIterator<Item = G>) -> Self
    where
        G: IntoIterator<Item = S>,
        S: Into<NodeId>,
    {
        Self::from_assignment(
            groups
                .into_iter()
                .enumerate()
                .flat_map(|(i, g)| g.into_iter().map(move |s| (s, i))),
        )
    }

    pub fn with_isolates(mut self, isolates: impl IntoIterator<Item = NodeId>) -> Self {
        let mut iso: Vec<NodeId> = isolates
            .into_iter()
            .filter(|id| !self.assignment.contains_key(id))
            .collect();
        iso.sort();
        iso.dedup();
        self.isolates = iso;
        self
    }

    /// Fills in `loss` and `normalized_loss` for `graph`.
    pub fn evaluated(mut self, graph: &Wug) -> Result<Self> {
        let (loss, total) = loss_and_bound(graph, &self)?;
        self.loss = loss;
        self.normalized_loss = if total > 0.0 { loss / total } else { 0.0 };
        Ok(self)
    }

    pub fn assignment(&self) -> &BTreeMap<NodeId, usize> {
        &self.assignment
    }

    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn isolates(&self) -> &[NodeId] {
        &self.isolates
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn normalized_loss(&self) -> f64 {
        self.normalized_loss
    }

    pub fn cluster_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    /// Members of every cluster, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (id, &c) in &self.assignment {
            out[c].push(id.clone());
        }
        out
    }

    /// Isolates become singleton clusters.
    pub fn with_isolates_as_singletons(&self) -> Self {
        let first = self.cluster_count();
        let mut labels: Vec<(NodeId, usize)> = self.assignment.iter().map(|(k, &v)| (k.clone(), v)).collect();
        for (i, id) in self.isolates.iter().enumerate() {
            labels.push((id.clone(), first + i));
        }
        let mut c = Self::from_assignment(labels);
        c.loss = self.loss;
        c.normalized_loss = self.normalized_loss;
        c
    }

    /// The clustering over exactly `nodes`: others are dropped, missing ones
    /// become singletons.
    pub fn aligned_to<'a>(&self, nodes: impl IntoIterator<Item = &'a NodeId>) -> Self {
        let mut next = self.cluster_count();
        let labels: Vec<(NodeId, usize)> = nodes
            .into_iter()
            .map(|id| {
                let label = self.cluster_of(id).unwrap_or_else(|| {
                    next += 1;
                    next - 1
                });
                (id.clone(), label)
            })
            .collect();
        Self::from_assignment(labels)
    }
}

/// Parameters of the annealing search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    /// Values tried for the maximum number of clusters; capped at the node
    /// count.
    pub max_clusters: RangeInclusive<usize>,
    /// Random initial states per value of the maximum.
    pub restarts_per_k: usize,
    /// Whether to add one heuristic initial state per value of the maximum.
    pub heuristic_start: bool,
    pub initial_temperature: f64,
    /// Geometric decay applied to the temperature after every iteration.
    pub cooling_factor: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            max_clusters: 1..=10,
            restarts_per_k: 5,
            heuristic_start: true,
            initial_temperature: 1.0,
            cooling_factor: 0.99,
            max_iterations: 10_000,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if *self.max_clusters.start() == 0 || self.max_clusters.is_empty() {
            return bad("max_clusters must be a nonempty range of positive integers");
        }
        if self.restarts_per_k == 0 && !self.heuristic_start {
            return bad("at least one initial state per k is required");
        }
        if !(self.initial_temperature > 0.0) {
            return bad("initial_temperature must be positive");
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return bad("cooling_factor must lie in (0, 1)");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }
}

/// Dense view of the weighted part of a graph. Weights are stored in half
/// units (`2 * W'`), so every loss is an exact integer.
pub(crate) struct Problem {
    pub(crate) ids: Vec<NodeId>,
    adjacency: Vec<Vec<(usize, i64)>>,
    edges: Vec<(usize, usize, i64)>,
}

impl Problem {
    pub(crate) fn new(graph: &Wug) -> Self {
        let weighted: Vec<(&Pair, i64)> = graph
            .weighted_edges()
            .map(|(p, w)| (p, (2.0 * w.value()).round() as i64))
            .collect();
        let ids: Vec<NodeId> = weighted
            .iter()
            .flat_map(|(p, _)| [p.first().to_owned(), p.second().to_owned()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        let mut edges = Vec::with_capacity(weighted.len());
        for (pair, w) in weighted {
            let (a, b) = (index[pair.first()], index[pair.second()]);
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
            edges.push((a, b, w));
        }
        Problem {
            ids,
            adjacency,
            edges,
        }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn loss(&self, labels: &[usize]) -> i64 {
        self.edges
            .iter()
            .map(|&(a, b, w)| match (labels[a] == labels[b], w >= 0) {
                (false, true) => w,
                (true, false) => -w,
                _ => 0,
            })
            .sum()
    }

    /// Loss change when node `v` moves from cluster `from` to `to`.
    fn move_delta(&self, labels: &[usize], v: usize, from: usize, to: usize) -> i64 {
        self.adjacency[v]
            .iter()
            .map(|&(u, w)| {
                if labels[u] == from {
                    w
                } else if labels[u] == to {
                    -w
                } else {
                    0
                }
            })
            .sum()
    }

    /// Connected components over positive edges, merged greedily down to `k`
    /// groups by the largest net shifted weight between groups.
    fn heuristic_state(&self, k: usize) -> Vec<usize> {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b, w) in &self.edges {
            if w >= 0 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut root_label = HashMap::new();
        let mut labels: Vec<usize> = (0..n)
            .map(|v| {
                let r = find(&mut parent, v);
                let next = root_label.len();
                *root_label.entry(r).or_insert(next)
            })
            .collect();

        let mut groups = root_label.len();
        let mut size = vec![0usize; groups];
        for &l in &labels {
            size[l] += 1;
        }
        let mut net = vec![vec![0i64; groups]; groups];
        for &(a, b, w) in &self.edges {
            let (la, lb) = (labels[a], labels[b]);
            if la != lb {
                net[la][lb] += w;
                net[lb][la] += w;
            }
        }
        let mut alive: Vec<bool> = vec![true; groups];
        while groups > k {
            let mut best: Option<(i64, usize, usize, usize)> = None;
            for i in 0..alive.len() {
                if !alive[i] {
                    continue;
                }
                for j in (i + 1)..alive.len() {
                    if !alive[j] {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bw, bs, _, _)) => net[i][j] > bw || (net[i][j] == bw && size[i] + size[j] < bs),
                    };
                    if better {
                        best = Some((net[i][j], size[i] + size[j], i, j));
                    }
                }
            }
            let (_, _, keep, gone) = best.expect("more than k groups alive");
            for x in 0..alive.len() {
                net[keep][x] += net[gone][x];
                net[x][keep] = net[keep][x];
            }
            net[keep][keep] = 0;
            size[keep] += size[gone];
            alive[gone] = false;
            for l in labels.iter_mut() {
                if *l == gone {
                    *l = keep;
                }
            }
            groups -= 1;
        }
        labels
    }

    fn anneal(
        &self,
        mut labels: Vec<usize>,
        k: usize,
        cfg: &AnnealConfig,
        rng: &mut seed::Rng,
    ) -> (Vec<usize>, i64) {
        let mut current = self.loss(&labels);
        let mut best = (labels.clone(), current);
        if k < 2 || self.len() < 2 {
            return best;
        }
        let n = self.len();
        let mut temperature = cfg.initial_temperature;
        for _ in 0..cfg.max_iterations {
            let v = rng.random_range(0..n);
            let from = labels[v];
            let mut to = rng.random_range(0..k - 1);
            if to >= from {
                to += 1;
            }
            let delta = self.move_delta(&labels, v, from, to);
            let accept = delta <= 0 || {
                let p = (-(delta as f64) / 2.0 / temperature).exp();
                p > 0.0 && rng.random::<f64>() < p
            };
            if accept {
                labels[v] = to;
                current += delta;
                if current < best.1 {
                    best.0.clone_from(&labels);
                    best.1 = current;
                }
            }
            temperature *= cfg.cooling_factor;
        }
        debug_assert_eq!(self.loss(&best.0), best.1);
        best
    }
}

/// Relabels by first appearance so equal partitions compare equal.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Clusters the non-isolated nodes of `graph` by minimizing the correlation
/// clustering loss. Deterministic in `(graph, cfg)`.
///
/// Nodes without any weighted edge are listed as isolates. A graph without
/// weighted edges yields an empty assignment.
pub fn cluster(graph: &Wug, cfg: &AnnealConfig) -> Result<Clustering> {
    cfg.validate()?;
    let problem = Problem::new(graph);
    let in_problem: BTreeSet<&NodeId> = problem.ids.iter().collect();
    let isolates: Vec<NodeId> = graph
        .node_ids()
        .filter(|id| !in_problem.contains(id))
        .cloned()
        .collect();
    let n = problem.len();
    if n == 0 {
        return Clustering::default().with_isolates(isolates).evaluated(graph);
    }

    let lo = (*cfg.max_clusters.start()).min(n);
    let hi = (*cfg.max_clusters.end()).min(n);
    let jobs: Vec<(usize, usize)> = (lo..=hi)
        .flat_map(|k| {
            let starts = cfg.restarts_per_k + usize::from(cfg.heuristic_start);
            (0..starts).map(move |r| (k, r))
        })
        .collect();

    let results: Vec<(Vec<usize>, i64)> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let mut rng = seed::rng(cfg.seed, &[k as u64, r as u64]);
            let init = if r < cfg.restarts_per_k {
                (0..n).map(|_| rng.random_range(0..k)).collect()
            } else {
                problem.heuristic_state(k)
            };
            let (labels, loss) = problem.anneal(init, k, cfg, &mut rng);
            (canonical(&labels), loss)
        })
        .collect();

    let (labels, _) = results
        .into_iter()
        .min_by(|a, b| {
            let ka = (a.1, a.0.iter().max());
            let kb = (b.1, b.0.iter().max());
            ka.cmp(&kb).then_with(|| a.0.cmp(&b.0))
        })
        .expect("at least one job");

    Clustering::from_assignment(problem.ids.iter().cloned().zip(labels))
        .with_isolates(isolates)
        .evaluated(graph)
}

fn loss_and_bound(graph: &Wug, clustering: &Clustering) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut bound = 0.0;
    for (pair, w) in graph.weighted_edges() {
        let a = clustering
            .cluster_of(pair.first())
            .ok_or_else(|| Error::Unassigned(pair.first().to_owned()))?;
        let b = clustering
            .cluster_of(pair.second())
            .ok_or_else(|| Error::Unassigned(pair.second().to_owned()))?;
        let w = w.value();
        bound += w.abs();
        if (a != b && w > 0.0) || (a == b && w < 0.0) {
            loss += w.abs();
        }
    }
    Ok((loss, bound))
}

/// Correlation clustering loss of `clustering` on `graph`.
pub fn loss(graph: &Wug, clustering: &Clustering) -> Result<f64> {
    loss_and_bound(graph, clustering).map(|(l, _)| l)
}

/// Loss divided by `Σ |W'(e)|`, the loss of cutting every positive edge and
/// joining every negative one. Zero when the graph has no weight.
pub fn normalized_loss(graph: &Wug, clustering: &Clustering) -> Result<f64> {
    let (l, bound) = loss_and_bound(graph, clustering)?;
    Ok(if bound > 0.0 { l / bound } else { 0.0 })
}

/// Edges that contribute to the loss.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictSet {
    pub positive_across: Vec<Pair>,
    pub negative_within: Vec<Pair>,
}

impl ConflictSet {
    pub fn is_empty(&self) -> bool {
        self.positive_across.is_empty() && self.negative_within.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positive_across.len() + self.negative_within.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.positive_across.iter().chain(&self.negative_within)
    }
}

/// Positive edges between clusters and negative edges inside clusters.
/// Edges with `W' = 0` are never conflicts. Edges touching unclustered nodes
/// are skipped.
pub fn conflicts(graph: &Wug, clustering: &Clustering) -> ConflictSet {
    let mut out = ConflictSet::default();
    for (pair, w) in graph.weighted_edges() {
        let (Some(a), Some(b)) = (
            clustering.cluster_of(pair.first()),
            clustering.cluster_of(pair.second()),
        ) else {
            continue;
        };
        if a != b && w.value() > 0.0 {
            out.positive_across.push(pair.clone());
        } else if a == b && w.value() < 0.0 {
            out.negative_within.push(pair.clone());
        }
    }
    out
}

/// Share of nodes that agree under the best one-to-one matching of cluster
/// labels.
pub fn cluster_accuracy(reference: &Clustering, hypothesis: &Clustering) -> Result<f64> {
    if !reference.assignment.keys().eq(hypothesis.assignment.keys()) {
        return Err(Error::NodeSetMismatch);
    }
    let n = reference.node_count();
    if n == 0 {
        return Ok(1.0);
    }
    let (r, h) = (reference.cluster_count(), hypothesis.cluster_count());
    let mut table = vec![vec![0i64; h]; r];
    for (id, &a) in &reference.assignment {
        table[a][hypothesis.assignment[id]] += 1;
    }
    if r > h {
        table = (0..h).map(|j| (0..r).map(|i| table[i][j]).collect()).collect();
    }
    Ok(max_weight_matching(&table) as f64 / n as f64)
}

/// Maximum total weight of a one-to-one row-to-column matching, for
/// `rows <= columns`. Hungarian method with potentials, O(rows² · columns).
fn max_weight_matching(weights: &[Vec<i64>]) -> i64 {
    let rows = weights.len();
    if rows == 0 {
        return 0;
    }
    let cols = weights[0].len();
    debug_assert!(rows <= cols);
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    // 1-based; column 0 is a virtual start
    let mut u = vec![0i64; rows + 1];
    let mut v = vec![0i64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![i64::MAX; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=cols)
        .filter(|&j| owner[j] != 0)
        .map(|j| weights[owner[j] - 1][j - 1])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_wug, tests::usage, Judgment};

    fn weighted(edges: &[(&str, &str, i64)]) -> Wug {
        let ids: BTreeSet<&str> = edges.iter().flat_map(|(a, b, _)| [*a, *b]).collect();
        let usages: Vec<_> = ids.iter().map(|id| usage(id, 1)).collect();
        let js: Vec<_> = edges
            .iter()
            .map(|(a, b, s)| Judgment::new(*a, *b, "x", *s, 1).unwrap())
            .collect();
        build_wug(&usages, &js).unwrap()
    }

    #[test]
    fn single_cluster_of_positive_edges_has_no_loss() {
        let g = weighted(&[("a", "b", 4), ("b", "c", 4), ("a", "c", 4)]);
        let c = Clustering::from_groups([["a", "b", "c"]]);
        assert_eq!(loss(&g, &c).unwrap(), 0.0);
        assert!(conflicts(&g, &c).is_empty());
    }

    #[test]
    fn cut_identical_edge_costs_one_and_a_half() {
        let g = weighted(&[("a", "b", 4)]);
        let c = Clustering::from_groups([["a"], ["b"]]);
        assert_eq!(loss(&g, &c).unwrap(), 1.5);
        assert_eq!(normalized_loss(&g, &c).unwrap(), 1.0);
        assert_eq!(
            conflicts(&g, &c).positive_across,
            vec![Pair::new("a", "b").unwrap()]
        );
    }

    #[test]
    fn unrelated_edge_inside_a_cluster_is_a_conflict() {
        let g = weighted(&[("a", "b", 1)]);
        let c = Clustering::from_groups([["a", "b"]]);
        assert_eq!(loss(&g, &c).unwrap(), 1.5);
        assert_eq!(conflicts(&g, &c).negative_within.len(), 1);
    }

    #[test]
    fn zero_shifted_edges_never_conflict() {
        let g = weighted(&[("a", "b", 2), ("a", "b", 3)]);
        let c = Clustering::from_groups([["a"], ["b"]]);
        assert_eq!(loss(&g, &c).unwrap(), 0.0);
        assert!(conflicts(&g, &c).is_empty());
    }

    #[test]
    fn unassigned_node_is_an_error() {
        let g = weighted(&[("a", "b", 4)]);
        let c = Clustering::from_groups([["a"]]);
        assert!(matches!(loss(&g, &c), Err(Error::Unassigned(id)) if id == "b"));
    }

    #[test]
    fn labels_are_dense_and_canonical() {
        let c = Clustering::from_assignment([("b", 7), ("a", 3), ("c", 7)]);
        assert_eq!(c.cluster_of("a"), Some(0));
        assert_eq!(c.cluster_of("b"), Some(1));
        assert_eq!(c.cluster_of("c"), Some(1));
        assert_eq!(c.cluster_count(), 2);
    }

    #[test]
    fn two_cliques_with_a_weak_bridge() {
        let left = ["a0", "a1", "a2", "a3", "a4"];
        let right = ["b0", "b1", "b2", "b3", "b4"];
        let mut edges = Vec::new();
        for side in [&left, &right] {
            for i in 0..5 {
                for j in (i + 1)..5 {
                    edges.push((side[i], side[j], 4));
                }
            }
        }
        edges.push(("a0", "b0", 1));
        let g = weighted(&edges);
        let c = cluster(&g, &AnnealConfig::default().with_seed(3)).unwrap();
        assert_eq!(c.loss(), 0.0);
        assert_eq!(c.cluster_count(), 2);
        let expected = Clustering::from_groups([left, right]);
        assert_eq!(c.assignment(), expected.assignment());
    }

    #[test]
    fn graph_without_weight_is_all_isolates() {
        let usages = [usage("a", 1), usage("b", 1)];
        let g = build_wug(&usages, &[Judgment::new("a", "b", "x", 0, 1).unwrap()]).unwrap();
        let c = cluster(&g, &AnnealConfig::default()).unwrap();
        assert_eq!(c.node_count(), 0);
        assert_eq!(c.isolates(), ["a".to_string(), "b".to_string()]);
        assert_eq!(c.with_isolates_as_singletons().cluster_count(), 2);
    }

    #[test]
    fn heuristic_state_merges_down_to_k() {
        let g = weighted(&[("a", "b", 4), ("c", "d", 4), ("b", "c", 2), ("a", "e", 1)]);
        let p = Problem::new(&g);
        let labels = p.heuristic_state(2);
        let distinct: BTreeSet<_> = labels.iter().collect();
        assert_eq!(distinct.len(), 2);
        // {c,d} and {e} share no edge (net 0), cheaper than the 2-edge to {a,b}
        assert_eq!(labels[2], labels[4]);
        assert_ne!(labels[0], labels[2]);
        assert_eq!(labels[0], labels[1]);
    }

    #[test]
    fn accuracy_examples() {
        let r = Clustering::from_groups([["a", "b"], ["c", "d"]]);
        let h = Clustering::from_groups([vec!["a"], vec!["b", "c", "d"]]);
        assert_eq!(cluster_accuracy(&r, &h).unwrap(), 0.75);
        assert_eq!(cluster_accuracy(&h, &r).unwrap(), 0.75);
        let swapped = Clustering::from_groups([["c", "d"], ["a", "b"]]);
        assert_eq!(cluster_accuracy(&r, &swapped).unwrap(), 1.0);
        let other = Clustering::from_groups([["a", "b", "x"]]);
        assert!(matches!(
            cluster_accuracy(&r, &other),
            Err(Error::NodeSetMismatch)
        ));
    }

    #[test]
    fn matching_beats_greedy() {
        // greedy on the 5 would score 5 + 0; optimal is 4 + 4
        let w = vec![vec![5, 4], vec![4, 0]];
        assert_eq!(max_weight_matching(&w), 8);
        let w = vec![vec![1, 0, 3]];
        assert_eq!(max_weight_matching(&w), 3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = AnnealConfig::default();
        cfg.cooling_factor = 1.0;
        assert!(cfg.validate().is_err());
        let cfg = AnnealConfig {
            max_clusters: 0..=3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
