//! Shared fixtures for the integration tests: random small graphs and an
//! exhaustive correlation-clustering oracle that shares no code with the
//! library's loss.

#![allow(dead_code)]

use rand::Rng;
use wugs::{Judgment, Usage, Wug};

pub fn usage(id: &str, grouping: u32) -> Usage {
    Usage {
        identifier: id.into(),
        lemma: "w".into(),
        pos: "nn".into(),
        grouping,
        context: "a w here".into(),
        target_span: (2, 3),
        date: None,
    }
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

/// Random graph on `n` nodes; every pair is annotated with probability
/// `density` by one judgment in 1..=4. Returns the graph and the
/// `(i, j, score)` edge list.
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> (Wug, Vec<(usize, usize, u8)>) {
    let names = ids(n);
    let usages: Vec<Usage> = names
        .iter()
        .enumerate()
        .map(|(i, id)| usage(id, 1 + (i % 2) as u32))
        .collect();
    let mut edges = Vec::new();
    let mut judgments = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let s: u8 = rng.random_range(1..=4);
                edges.push((i, j, s));
                judgments
                    .push(Judgment::new(names[i].as_str(), names[j].as_str(), "a", i64::from(s), 1).unwrap());
            }
        }
    }
    (wugs::build_wug(&usages, &judgments).unwrap(), edges)
}

/// Twice the loss of `labels` on an edge list with integer weights: a cut
/// edge costs `2w - 5` when positive, a kept edge costs `5 - 2w` when
/// negative.
pub fn doubled_loss(edges: &[(usize, usize, u8)], labels: &[usize]) -> i64 {
    edges
        .iter()
        .map(|&(i, j, w)| {
            let d = 2 * i64::from(w) - 5;
            match (labels[i] == labels[j], d > 0) {
                (false, true) => d,
                (true, false) => -d,
                _ => 0,
            }
        })
        .sum()
}

/// Minimum doubled loss over every set partition of `n` nodes, enumerated as
/// restricted growth strings.
pub fn brute_force_min(n: usize, edges: &[(usize, usize, u8)]) -> i64 {
    fn go(i: usize, labels: &mut Vec<usize>, max: usize, edges: &[(usize, usize, u8)], best: &mut i64) {
        if i == labels.len() {
            *best = (*best).min(doubled_loss(edges, labels));
            return;
        }
        for l in 0..=max + 1 {
            labels[i] = l;
            go(i + 1, labels, max.max(l), edges, best);
        }
    }
    if n == 0 {
        return 0;
    }
    let mut labels = vec![0; n];
    let mut best = i64::MAX;
    go(1, &mut labels, 0, edges, &mut best);
    best
}
