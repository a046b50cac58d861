//! Word Usage Graphs.
//!
//! A [`Wug`] is an undirected graph whose nodes are usages of one target word
//! (and, for usage-sense graphs, dictionary sense descriptions). Every
//! annotated pair of nodes carries the list of human [`Judgment`]s made on it;
//! the edge weight is the median of the non-zero scores.
//!
//! Graphs are immutable once built. Filtering and period extraction return new
//! graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = String;

/// Time period (subcorpus) a usage was sampled from.
pub type Period = u32;

/// Prefix that distinguishes sense-description node ids from usage ids.
pub const SENSE_PREFIX: &str = "sense:";

/// Labels of the relatedness scale, indexed by score.
pub const SCALE_LABELS: [&str; 5] = [
    "Cannot decide",
    "Unrelated",
    "Distantly Related",
    "Closely Related",
    "Identical",
];

/// Decision boundary between same-sense and different-sense edges.
pub const WEIGHT_THRESHOLD: f64 = 2.5;

/// One occurrence of a target word in context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub identifier: NodeId,
    pub lemma: String,
    pub pos: String,
    pub grouping: Period,
    pub context: String,
    /// Character offsets `[start, end)` of the target word in `context`.
    pub target_span: (usize, usize),
    pub date: Option<i32>,
}

impl Usage {
    /// Checks the span and the period against `periods`.
    pub fn validate(&self, periods: &BTreeSet<Period>) -> Result<()> {
        let (start, end) = self.target_span;
        let len = self.context.chars().count();
        if start >= end || end > len {
            return Err(Error::InvalidUsage {
                id: self.identifier.clone(),
                reason: format!("target span [{start}, {end}) outside context of {len} characters"),
            });
        }
        if self.identifier.starts_with(SENSE_PREFIX) {
            return Err(Error::InvalidUsage {
                id: self.identifier.clone(),
                reason: format!("usage ids may not start with `{SENSE_PREFIX}`"),
            });
        }
        if !periods.contains(&self.grouping) {
            return Err(Error::UnknownPeriod(self.grouping));
        }
        Ok(())
    }

    /// The target word as it appears in the context.
    pub fn target(&self) -> String {
        let (start, end) = self.target_span;
        self.context.chars().skip(start).take(end - start).collect()
    }
}

/// A dictionary sense description, used as a node in usage-sense graphs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseDescription {
    pub sense_id: String,
    pub lemma: String,
    pub definition: String,
}

impl SenseDescription {
    /// Graph node id: the sense id with [`SENSE_PREFIX`].
    pub fn node_id(&self) -> NodeId {
        format!("{SENSE_PREFIX}{}", self.sense_id)
    }
}

/// Unordered node pair stored in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(NodeId, NodeId);

impl Pair {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Pair(a, b)),
            std::cmp::Ordering::Greater => Ok(Pair(b, a)),
            std::cmp::Ordering::Equal => Err(Error::SelfPair(a)),
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0 == id || self.1 == id
    }

    /// The endpoint that is not `id`.
    pub fn other(&self, id: &str) -> Option<&str> {
        if self.0 == id {
            Some(&self.1)
        } else if self.1 == id {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// One annotator's relatedness score on a node pair.
///
/// Scores follow the DURel scale: 4 identical, 3 closely related,
/// 2 distantly related, 1 unrelated, and 0 for "cannot decide".
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub pair: Pair,
    pub annotator: String,
    pub score: u8,
    pub comment: Option<String>,
    pub round: u32,
}

impl Judgment {
    pub fn new(
        node1: impl Into<NodeId>,
        node2: impl Into<NodeId>,
        annotator: impl Into<String>,
        score: i64,
        round: u32,
    ) -> Result<Self> {
        Ok(Judgment {
            pair: Pair::new(node1, node2)?,
            annotator: annotator.into(),
            score: checked_score(score)?,
            comment: None,
            round: round.max(1),
        })
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = Some(comment.into());
        self
    }
}

pub(crate) fn checked_score(score: i64) -> Result<u8> {
    if (0..=4).contains(&score) {
        Ok(score as u8)
    } else {
        Err(Error::InvalidScore(score))
    }
}

/// Median of the non-zero scores, midpoint for even counts.
pub fn median_nonzero(scores: impl IntoIterator<Item = u8>) -> Option<f64> {
    let mut nonzero: Vec<u8> = scores.into_iter().filter(|&s| s != 0).collect();
    if nonzero.is_empty() {
        return None;
    }
    nonzero.sort_unstable();
    let mid = nonzero.len() / 2;
    Some(if nonzero.len() % 2 == 1 {
        f64::from(nonzero[mid])
    } else {
        (f64::from(nonzero[mid - 1]) + f64::from(nonzero[mid])) / 2.0
    })
}

/// Edge weight moved onto a scale centred at the 2.5 decision boundary.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ShiftedWeight(pub f64);

impl ShiftedWeight {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Zero-valued edges count as positive.
    pub fn is_positive(self) -> bool {
        self.0 >= 0.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0.0
    }
}

/// `w - 2.5`; a weight of 4 becomes 1.5.
pub fn shift(weight: f64) -> ShiftedWeight {
    debug_assert!((1.0..=4.0).contains(&weight), "weight {weight} outside [1, 4]");
    ShiftedWeight(weight - WEIGHT_THRESHOLD)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Usage(Usage),
    Sense(SenseDescription),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::Usage(u) => u.identifier.clone(),
            Node::Sense(s) => s.node_id(),
        }
    }

    pub fn lemma(&self) -> &str {
        match self {
            Node::Usage(u) => &u.lemma,
            Node::Sense(s) => &s.lemma,
        }
    }

    pub fn as_usage(&self) -> Option<&Usage> {
        match self {
            Node::Usage(u) => Some(u),
            Node::Sense(_) => None,
        }
    }

    pub fn is_sense(&self) -> bool {
        matches!(self, Node::Sense(_))
    }
}

/// All judgments made on one pair, and their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub judgments: Vec<Judgment>,
    /// Median of the non-zero scores; `None` when every judgment is 0.
    pub weight: Option<f64>,
}

impl Edge {
    fn from_judgments(judgments: Vec<Judgment>) -> Self {
        let weight = median_nonzero(judgments.iter().map(|j| j.score));
        Edge { judgments, weight }
    }

    pub fn shifted(&self) -> Option<ShiftedWeight> {
        self.weight.map(shift)
    }

    pub fn nonzero_scores(&self) -> impl Iterator<Item = u8> + '_ {
        self.judgments.iter().map(|j| j.score).filter(|&s| s != 0)
    }
}

/// A weighted undirected graph over usages (and sense descriptions).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wug {
    periods: BTreeSet<Period>,
    nodes: BTreeMap<NodeId, Node>,
    #[serde(with = "pair_map")]
    edges: BTreeMap<Pair, Edge>,
}

/// Serializes a map keyed by [`Pair`] as a list of entries, since JSON
/// object keys must be strings.
pub(crate) mod pair_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Pair;

    pub fn serialize<S: Serializer, V: Serialize>(map: &BTreeMap<Pair, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D, V>(d: D) -> Result<BTreeMap<Pair, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        Ok(Vec::<(Pair, V)>::deserialize(d)?.into_iter().collect())
    }
}

impl Wug {
    pub fn builder() -> WugBuilder {
        WugBuilder::default()
    }

    pub fn periods(&self) -> &BTreeSet<Period> {
        &self.periods
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn usages(&self) -> impl Iterator<Item = &Usage> {
        self.nodes.values().filter_map(Node::as_usage)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Pair, &Edge)> {
        self.edges.iter()
    }

    pub fn edge(&self, pair: &Pair) -> Option<&Edge> {
        self.edges.get(pair)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_annotated(&self, pair: &Pair) -> bool {
        self.edges.contains_key(pair)
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        let pair = Pair::new(a, b).ok()?;
        self.edges.get(&pair)?.weight
    }

    /// Edges that carry a weight, with their shifted value.
    pub fn weighted_edges(&self) -> impl Iterator<Item = (&Pair, ShiftedWeight)> {
        self.edges.iter().filter_map(|(p, e)| e.shifted().map(|w| (p, w)))
    }

    pub fn judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.edges.values().flat_map(|e| e.judgments.iter())
    }

    pub fn is_usg(&self) -> bool {
        self.nodes.values().any(Node::is_sense)
    }

    /// Removes, until none is left, every node whose 0-judgments are more than
    /// half of all judgments on its edges. Incident edges go with it.
    pub fn filter_zero_nodes(&self) -> (Wug, Vec<NodeId>) {
        let mut graph = self.clone();
        let mut removed = Vec::new();
        loop {
            let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for (pair, edge) in &graph.edges {
                for j in &edge.judgments {
                    for id in [pair.first(), pair.second()] {
                        let c = counts.entry(id).or_default();
                        c.1 += 1;
                        if j.score == 0 {
                            c.0 += 1;
                        }
                    }
                }
            }
            let batch: Vec<NodeId> = counts
                .into_iter()
                .filter(|&(_, (zeros, total))| 2 * zeros > total)
                .map(|(id, _)| id.to_owned())
                .collect();
            if batch.is_empty() {
                break;
            }
            let gone: BTreeSet<&NodeId> = batch.iter().collect();
            graph.nodes.retain(|id, _| !gone.contains(id));
            graph
                .edges
                .retain(|p, _| !gone.contains(&p.0) && !gone.contains(&p.1));
            removed.extend(batch);
        }
        removed.sort();
        (graph, removed)
    }

    /// Usages of one period with the edges among them. Sense nodes are kept in
    /// every period.
    pub fn subgraph_by_period(&self, period: Period) -> Result<Wug> {
        if !self.periods.contains(&period) {
            return Err(Error::UnknownPeriod(period));
        }
        let nodes: BTreeMap<NodeId, Node> = self
            .nodes
            .iter()
            .filter(|(_, n)| match n {
                Node::Usage(u) => u.grouping == period,
                Node::Sense(_) => true,
            })
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|(p, _)| nodes.contains_key(&p.0) && nodes.contains_key(&p.1))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(Wug {
            periods: self.periods.clone(),
            nodes,
            edges,
        })
    }

    /// A copy of the graph whose edges carry `judgments` instead, keeping
    /// the node set.
    pub fn with_judgments(&self, judgments: &[Judgment]) -> Result<Wug> {
        let mut builder = Wug::builder().periods(self.periods.iter().copied());
        for node in self.nodes.values() {
            builder = match node {
                Node::Usage(u) => builder.usage(u.clone()),
                Node::Sense(s) => builder.sense(s.clone()),
            };
        }
        builder.judgments(judgments.iter().cloned()).build()
    }
}

/// Collects nodes and judgments and validates them into a [`Wug`].
#[derive(Default)]
pub struct WugBuilder {
    periods: Option<BTreeSet<Period>>,
    usages: Vec<Usage>,
    senses: Vec<SenseDescription>,
    judgments: Vec<Judgment>,
}

impl WugBuilder {
    /// Declares the allowed periods. Without this, the periods seen on the
    /// usages are taken as declared.
    pub fn periods(mut self, periods: impl IntoIterator<Item = Period>) -> Self {
        self.periods = Some(periods.into_iter().collect());
        self
    }

    pub fn usage(mut self, usage: Usage) -> Self {
        self.usages.push(usage);
        self
    }

    pub fn usages(mut self, usages: impl IntoIterator<Item = Usage>) -> Self {
        self.usages.extend(usages);
        self
    }

    pub fn sense(mut self, sense: SenseDescription) -> Self {
        self.senses.push(sense);
        self
    }

    pub fn senses(mut self, senses: impl IntoIterator<Item = SenseDescription>) -> Self {
        self.senses.extend(senses);
        self
    }

    pub fn judgments(mut self, judgments: impl IntoIterator<Item = Judgment>) -> Self {
        self.judgments.extend(judgments);
        self
    }

    pub fn build(self) -> Result<Wug> {
        let periods = self
            .periods
            .unwrap_or_else(|| self.usages.iter().map(|u| u.grouping).collect());
        let mut nodes = BTreeMap::new();
        for usage in self.usages {
            usage.validate(&periods)?;
            let id = usage.identifier.clone();
            if nodes.insert(id.clone(), Node::Usage(usage)).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        let bipartite = !self.senses.is_empty();
        for sense in self.senses {
            let id = sense.node_id();
            if nodes.insert(id.clone(), Node::Sense(sense)).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }

        let mut grouped: BTreeMap<Pair, Vec<Judgment>> = BTreeMap::new();
        for j in self.judgments {
            checked_score(i64::from(j.score))?;
            let (a, b) = match (nodes.get(j.pair.first()), nodes.get(j.pair.second())) {
                (Some(a), Some(b)) => (a, b),
                (None, _) => return Err(Error::UnknownNode(j.pair.first().to_owned())),
                (_, None) => return Err(Error::UnknownNode(j.pair.second().to_owned())),
            };
            if a.lemma() != b.lemma() {
                return Err(Error::MixedLemmas {
                    pair: j.pair.clone(),
                    first: a.lemma().to_owned(),
                    second: b.lemma().to_owned(),
                });
            }
            if bipartite && a.is_sense() == b.is_sense() {
                return Err(Error::NotBipartite(j.pair.clone()));
            }
            grouped.entry(j.pair.clone()).or_default().push(j);
        }
        let edges = grouped
            .into_iter()
            .map(|(p, js)| (p, Edge::from_judgments(js)))
            .collect();
        Ok(Wug {
            periods,
            nodes,
            edges,
        })
    }
}

/// Usage-usage graph from usages and judgments.
pub fn build_wug(usages: &[Usage], judgments: &[Judgment]) -> Result<Wug> {
    Wug::builder()
        .usages(usages.iter().cloned())
        .judgments(judgments.iter().cloned())
        .build()
}

/// Usage-sense graph; every judgment must relate a usage to a sense.
pub fn build_usg(usages: &[Usage], senses: &[SenseDescription], judgments: &[Judgment]) -> Result<Wug> {
    Wug::builder()
        .usages(usages.iter().cloned())
        .senses(senses.iter().cloned())
        .judgments(judgments.iter().cloned())
        .build()
}

/// Every usage-sense pair, `usages.len() * senses.len()` of them.
pub fn build_usg_pairs(usages: &[Usage], senses: &[SenseDescription]) -> Result<Vec<Pair>> {
    if senses.is_empty() {
        return Err(Error::EmptySenses);
    }
    let pairs: BTreeSet<Pair> = usages
        .iter()
        .flat_map(|u| {
            senses
                .iter()
                .map(move |s| Pair::new(u.identifier.clone(), s.node_id()))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().collect())
}
