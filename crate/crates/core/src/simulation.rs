//! Synthetic ground truth and the experiments run on it.
//!
//! A [`PlantedGraph`] fixes a true sense for every usage and a true
//! proximity for every pair: 3 or 4 within a sense, 1 or 2 across senses.
//! Simulated annotators report the true proximity, sometimes off by one or
//! replaced by 0. On top of that this module runs the full multi-round
//! annotation pipeline and the judgment-perturbation robustness experiment.

use std::collections::{BTreeMap, HashMap};

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, cluster_accuracy, AnnealConfig, Clustering};
use crate::error::{Error, Result};
use crate::graph::{Judgment, NodeId, Pair, Usage, Wug};
use crate::sampling::{next_round, round1_sample, RoundState, SamplingConfig};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedGraph {
    pub usages: Vec<Usage>,
    pub true_clusters: BTreeMap<NodeId, usize>,
    index: HashMap<NodeId, usize>,
    /// Row-major upper triangle, `i < j`.
    proximity: Vec<u8>,
}

impl PlantedGraph {
    /// `n_usages` usages over `n_senses` nonempty senses. The first
    /// `round(period_split · n)` usages (in id order) belong to period 1, the
    /// rest to period 2.
    pub fn generate(n_usages: usize, n_senses: usize, period_split: f64, seed: u64) -> Result<Self> {
        if n_senses == 0 || n_usages < n_senses {
            return Err(Error::InvalidConfig(format!(
                "cannot plant {n_senses} senses in {n_usages} usages"
            )));
        }
        if !(0.0..=1.0).contains(&period_split) {
            return Err(Error::InvalidConfig("period_split must lie in [0, 1]".into()));
        }
        let mut rng = seed::rng(seed, &[0x91A7]);
        let mut senses: Vec<usize> = (0..n_usages)
            .map(|i| {
                if i < n_senses {
                    i
                } else {
                    rng.random_range(0..n_senses)
                }
            })
            .collect();
        senses.shuffle(&mut rng);

        let first_period = (period_split * n_usages as f64).round() as usize;
        let width = n_usages.to_string().len().max(4);
        let usages: Vec<Usage> = (0..n_usages)
            .map(|i| Usage {
                identifier: format!("u{i:0width$}"),
                lemma: "planted".into(),
                pos: "nn".into(),
                grouping: if i < first_period { 1 } else { 2 },
                context: format!("synthetic usage {i} of the target word"),
                target_span: (0, 9),
                date: None,
            })
            .collect();

        let mut proximity = Vec::with_capacity(n_usages * n_usages.saturating_sub(1) / 2);
        for i in 0..n_usages {
            for j in (i + 1)..n_usages {
                let same = senses[i] == senses[j];
                let low: u8 = if same { 3 } else { 1 };
                proximity.push(low + u8::from(rng.random_bool(0.5)));
            }
        }
        let index = usages
            .iter()
            .enumerate()
            .map(|(i, u)| (u.identifier.clone(), i))
            .collect();
        let true_clusters = usages
            .iter()
            .zip(&senses)
            .map(|(u, &s)| (u.identifier.clone(), s))
            .collect();
        Ok(PlantedGraph {
            usages,
            true_clusters,
            index,
            proximity,
        })
    }

    pub fn len(&self) -> usize {
        self.usages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.usages.is_empty()
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.usages.iter().map(|u| u.identifier.clone()).collect()
    }

    /// True proximity of a pair, symmetric; `None` for unknown ids or a
    /// self-pair.
    pub fn proximity(&self, a: &str, b: &str) -> Option<u8> {
        let (i, j) = (*self.index.get(a)?, *self.index.get(b)?);
        let (i, j) = match i.cmp(&j) {
            std::cmp::Ordering::Less => (i, j),
            std::cmp::Ordering::Greater => (j, i),
            std::cmp::Ordering::Equal => return None,
        };
        let n = self.len();
        Some(self.proximity[i * (2 * n - i - 1) / 2 + (j - i - 1)])
    }

    pub fn truth(&self) -> Clustering {
        Clustering::from_assignment(self.true_clusters.iter().map(|(k, &v)| (k.clone(), v)))
    }

    pub fn graph(&self, judgments: &[Judgment]) -> Result<Wug> {
        Wug::builder()
            .periods([1, 2])
            .usages(self.usages.iter().cloned())
            .judgments(judgments.iter().cloned())
            .build()
    }

    /// Every pair judged once with its true proximity.
    pub fn complete_judgments(&self, annotator: &str) -> Vec<Judgment> {
        let ids = self.ids();
        let mut out = Vec::with_capacity(self.proximity.len());
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let score = self.proximity(a, b).expect("known pair");
                out.push(Judgment::new(a.clone(), b.clone(), annotator, i64::from(score), 1).expect("valid"));
            }
        }
        out
    }

    /// Noise-free judgments on a uniform `edge_fraction` share of all pairs.
    /// A `double_fraction` share of those pairs is judged by a second
    /// annotator.
    pub fn sampled_judgments(&self, edge_fraction: f64, double_fraction: f64, seed: u64) -> Vec<Judgment> {
        let ids = self.ids();
        let n = ids.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let mut rng = seed::rng(seed, &[0x5A3B]);
        let take = ((edge_fraction * pairs.len() as f64).round() as usize).min(pairs.len());
        let mut chosen: Vec<usize> = index::sample(&mut rng, pairs.len(), take).into_vec();
        chosen.sort_unstable();
        let mut out = Vec::new();
        for k in chosen {
            let (i, j) = pairs[k];
            let score = i64::from(self.proximity(&ids[i], &ids[j]).expect("known pair"));
            out.push(Judgment::new(ids[i].clone(), ids[j].clone(), "ann1", score, 1).expect("valid"));
            if rng.random_bool(double_fraction) {
                out.push(Judgment::new(ids[i].clone(), ids[j].clone(), "ann2", score, 1).expect("valid"));
            }
        }
        out
    }
}

/// Error model of a simulated annotator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Probability of reporting the true score ±1, clipped to 1..=4.
    pub p_deviate: f64,
    /// Probability of answering 0.
    pub p_zero: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noise_free(seed: u64) -> Self {
        NoiseModel {
            p_deviate: 0.0,
            p_zero: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p_deviate) || !ok(self.p_zero) || self.p_deviate + self.p_zero > 1.0 {
            return Err(Error::InvalidConfig(
                "noise probabilities must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        Ok(())
    }
}

/// One simulated score for `pair`.
pub fn simulate_annotator(
    pair: &Pair,
    planted: &PlantedGraph,
    noise: &NoiseModel,
    rng: &mut seed::Rng,
) -> Result<u8> {
    let truth = planted
        .proximity(pair.first(), pair.second())
        .ok_or_else(|| Error::UnknownNode(pair.to_string()))?;
    let draw: f64 = rng.random();
    Ok(if draw < noise.p_zero {
        0
    } else if draw < noise.p_zero + noise.p_deviate {
        let up = rng.random_bool(0.5);
        if up {
            (truth + 1).min(4)
        } else {
            (truth - 1).max(1)
        }
    } else {
        truth
    })
}

/// A simulated judgment. The draw depends only on the noise seed, the
/// annotator, the round and the pair.
pub fn simulate_judgment(
    pair: &Pair,
    annotator: &str,
    round: u32,
    planted: &PlantedGraph,
    noise: &NoiseModel,
) -> Result<Judgment> {
    let mut rng = seed::rng(
        noise.seed,
        &[
            seed::key(annotator),
            u64::from(round),
            seed::key(pair.first()),
            seed::key(pair.second()),
        ],
    );
    let score = simulate_annotator(pair, planted, noise, &mut rng)?;
    Ok(Judgment {
        pair: pair.clone(),
        annotator: annotator.to_owned(),
        score,
        comment: None,
        round,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sampling: SamplingConfig,
    pub anneal: AnnealConfig,
    pub noise: NoiseModel,
    pub annotators: usize,
    pub max_rounds: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sampling: SamplingConfig::default(),
            anneal: AnnealConfig::default(),
            noise: NoiseModel::noise_free(0),
            annotators: 4,
            max_rounds: 6,
        }
    }
}

impl PipelineConfig {
    /// Re-seeds sampling, annealing and noise from one seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampling.seed = seed::derive(seed, &[1]);
        self.anneal.seed = seed::derive(seed, &[2]);
        self.noise.seed = seed::derive(seed, &[3]);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub batch_pairs: usize,
    pub judgments: usize,
    /// Distinct pairs annotated so far.
    pub edges_annotated: usize,
    pub clusters: usize,
    pub multi_clusters: usize,
    pub accuracy: f64,
    pub loss: f64,
    pub normalized_loss: f64,
    pub removed_nodes: usize,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub usages: usize,
    pub senses: usize,
    pub rounds: Vec<RoundRecord>,
}

impl SimReport {
    pub fn final_accuracy(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.accuracy)
    }

    /// First round reaching `accuracy`, if any.
    pub fn first_round_reaching(&self, accuracy: f64) -> Option<u32> {
        self.rounds
            .iter()
            .find(|r| r.accuracy >= accuracy)
            .map(|r| r.round)
    }
}

/// Accuracy of `clustering` against the plant over the usages of `graph`;
/// isolates count as singletons.
fn accuracy_against(planted: &PlantedGraph, graph: &Wug, clustering: &Clustering) -> Result<f64> {
    let ids: Vec<NodeId> = graph.usages().map(|u| u.identifier.clone()).collect();
    let truth = planted.truth().aligned_to(&ids);
    let found = clustering.with_isolates_as_singletons().aligned_to(&ids);
    cluster_accuracy(&truth, &found)
}

/// Round-by-round annotation of a planted graph by simulated annotators.
///
/// Stops after `max_rounds`, when sampling is complete for the word, or when
/// a round has nothing left to sample.
pub fn run_pipeline_sim(planted: &PlantedGraph, cfg: &PipelineConfig) -> Result<SimReport> {
    cfg.noise.validate()?;
    if cfg.annotators == 0 || cfg.max_rounds == 0 {
        return Err(Error::InvalidConfig(
            "need at least one annotator and one round".into(),
        ));
    }
    let annotators: Vec<String> = (1..=cfg.annotators).map(|i| format!("ann{i}")).collect();
    let mut batch = round1_sample(&planted.ids(), &cfg.sampling)?;
    batch.assign(&annotators, &planted.graph(&[])?, &cfg.sampling);

    let senses = planted.true_clusters.values().max().map_or(0, |m| m + 1);
    let mut judgments: Vec<Judgment> = Vec::new();
    let mut rounds = Vec::new();
    for round in 1..=cfg.max_rounds {
        for (pair, annotator) in batch.tasks() {
            judgments.push(simulate_judgment(pair, annotator, round, planted, &cfg.noise)?);
        }
        let full = planted.graph(&judgments)?;
        let (graph, removed) = full.filter_zero_nodes();
        let clustering = cluster(&graph, &cfg.anneal)?;
        let accuracy = accuracy_against(planted, &graph, &clustering)?;
        let state = RoundState::new(round, graph, clustering);
        let complete = state.is_complete();
        rounds.push(RoundRecord {
            round,
            batch_pairs: batch.len(),
            judgments: judgments.len(),
            edges_annotated: full.edge_count(),
            clusters: state.clustering.cluster_count(),
            multi_clusters: state.multi_clusters.len(),
            accuracy,
            loss: state.clustering.loss(),
            normalized_loss: state.clustering.normalized_loss(),
            removed_nodes: removed.len(),
            complete,
        });
        log::debug!(
            "round {round}: accuracy {accuracy:.3}, {} edges",
            full.edge_count()
        );
        if complete || round == cfg.max_rounds {
            break;
        }
        batch = next_round(&state, &annotators, &cfg.sampling)?;
        if batch.is_empty() {
            break;
        }
    }
    Ok(SimReport {
        usages: planted.len(),
        senses,
        rounds,
    })
}

/// Replaces a uniform `fraction` share of the judgments with uniform scores
/// 1..=4. Pairs, annotators and rounds are untouched.
pub fn perturb_judgments(judgments: &[Judgment], fraction: f64, rng: &mut seed::Rng) -> Vec<Judgment> {
    let mut out = judgments.to_vec();
    let count = ((fraction.clamp(0.0, 1.0) * out.len() as f64).round() as usize).min(out.len());
    for i in index::sample(rng, out.len(), count) {
        out[i].score = rng.random_range(1..=4);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub fractions: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub trials: usize,
    /// Per fraction, the accuracy of every trial.
    pub accuracies: Vec<Vec<f64>>,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// 95% percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], resamples: usize, rng: &mut seed::Rng) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(0.025), at(0.975))
}

/// For every fraction and trial: perturb the judgments of `graph`, rebuild
/// medians, recluster and compare with `reference`.
pub fn robustness_experiment(
    graph: &Wug,
    reference: &Clustering,
    fractions: &[f64],
    trials: usize,
    anneal: &AnnealConfig,
    seed: u64,
) -> Result<RobustnessCurve> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidConfig("fractions must lie in [0, 1]".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let judgments: Vec<Judgment> = graph.judgments().cloned().collect();
    let nodes: Vec<NodeId> = reference.assignment().keys().cloned().collect();

    let jobs: Vec<(usize, usize)> = (0..fractions.len())
        .flat_map(|f| (0..trials).map(move |t| (f, t)))
        .collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(f, t)| {
            let mut rng = seed::rng(seed, &[f as u64, t as u64]);
            let perturbed = perturb_judgments(&judgments, fractions[f], &mut rng);
            let g = graph.with_judgments(&perturbed)?;
            let found = cluster(&g, anneal)?;
            cluster_accuracy(reference, &found.with_isolates_as_singletons().aligned_to(&nodes))
        })
        .collect::<Result<_>>()?;

    let accuracies: Vec<Vec<f64>> = results.chunks(trials).map(<[f64]>::to_vec).collect();
    let mut curve = RobustnessCurve {
        fractions: fractions.to_vec(),
        mean_accuracy: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        trials,
        accuracies: Vec::new(),
    };
    for (f, acc) in accuracies.iter().enumerate() {
        let mut rng = seed::rng(seed, &[f as u64, u64::MAX]);
        let (lo, hi) = bootstrap_ci(acc, BOOTSTRAP_RESAMPLES, &mut rng);
        curve
            .mean_accuracy
            .push(acc.iter().sum::<f64>() / acc.len() as f64);
        curve.ci_low.push(lo);
        curve.ci_high.push(hi);
    }
    curve.accuracies = accuracies;
    Ok(curve)
}

/// Concatenates the trials of curves over the same fractions and
/// recomputes mean and interval.
pub fn pool_curves(curves: &[RobustnessCurve], seed: u64) -> Result<RobustnessCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidConfig("nothing to pool".into()))?;
    if curves.iter().any(|c| c.fractions != first.fractions) {
        return Err(Error::InvalidConfig("curves use different fractions".into()));
    }
    let mut pooled = RobustnessCurve {
        fractions: first.fractions.clone(),
        mean_accuracy: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        trials: curves.iter().map(|c| c.trials).sum(),
        accuracies: Vec::new(),
    };
    for f in 0..first.fractions.len() {
        let acc: Vec<f64> = curves
            .iter()
            .flat_map(|c| c.accuracies[f].iter().copied())
            .collect();
        let mut rng = seed::rng(seed, &[f as u64, u64::MAX - 1]);
        let (lo, hi) = bootstrap_ci(&acc, BOOTSTRAP_RESAMPLES, &mut rng);
        pooled
            .mean_accuracy
            .push(acc.iter().sum::<f64>() / acc.len() as f64);
        pooled.ci_low.push(lo);
        pooled.ci_high.push(hi);
        pooled.accuracies.push(acc);
    }
    Ok(pooled)
}

/// Robustness on synthetic graphs: noise-free judgments on a random
/// `edge_fraction` share of the pairs of each planted graph, half of them
/// judged twice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedRobustness {
    pub graphs: usize,
    pub usages: usize,
    pub senses: usize,
    pub edge_fraction: f64,
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub anneal: AnnealConfig,
    pub seed: u64,
}

impl Default for PlantedRobustness {
    fn default() -> Self {
        PlantedRobustness {
            graphs: 10,
            usages: 150,
            senses: 3,
            edge_fraction: 0.1,
            fractions: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.75, 1.0],
            trials: 50,
            anneal: AnnealConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedRobustnessReport {
    /// Accuracy of each unperturbed clustering against its plant.
    pub reference_accuracy: Vec<f64>,
    pub curves: Vec<RobustnessCurve>,
    pub pooled: RobustnessCurve,
}

/// Each perturbed clustering is compared with the clustering of its
/// unperturbed graph.
pub fn planted_robustness(cfg: &PlantedRobustness) -> Result<PlantedRobustnessReport> {
    let mut reference_accuracy = Vec::new();
    let mut curves = Vec::new();
    for g in 0..cfg.graphs {
        let graph_seed = seed::derive(cfg.seed, &[g as u64]);
        let planted = PlantedGraph::generate(cfg.usages, cfg.senses, 0.5, graph_seed)?;
        let graph = planted.graph(&planted.sampled_judgments(cfg.edge_fraction, 0.5, graph_seed))?;
        let reference = cluster(&graph, &cfg.anneal)?.with_isolates_as_singletons();
        reference_accuracy.push(cluster_accuracy(
            &planted.truth(),
            &reference.aligned_to(&planted.ids()),
        )?);
        curves.push(robustness_experiment(
            &graph,
            &reference,
            &cfg.fractions,
            cfg.trials,
            &cfg.anneal,
            seed::derive(graph_seed, &[0xC0FE]),
        )?);
    }
    let pooled = pool_curves(&curves, cfg.seed)?;
    Ok(PlantedRobustnessReport {
        reference_accuracy,
        curves,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn planted_shapes() {
        let p = PlantedGraph::generate(100, 1, 0.5, 3).unwrap();
        let ids = p.ids();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let s = p.proximity(a, b).unwrap();
                assert!(s == 3 || s == 4);
                assert_eq!(p.proximity(b, a), Some(s));
            }
        }
        assert_eq!(p.usages.iter().filter(|u| u.grouping == 1).count(), 50);

        let p = PlantedGraph::generate(100, 4, 0.6, 3).unwrap();
        let used: BTreeSet<usize> = p.true_clusters.values().copied().collect();
        assert_eq!(used.len(), 4);
        assert_eq!(p.usages.iter().filter(|u| u.grouping == 1).count(), 60);
        assert!(PlantedGraph::generate(2, 3, 0.5, 0).is_err());
        assert!(PlantedGraph::generate(5, 0, 0.5, 0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            PlantedGraph::generate(30, 3, 0.5, 11).unwrap(),
            PlantedGraph::generate(30, 3, 0.5, 11).unwrap()
        );
    }

    #[test]
    fn noise_extremes() {
        let p = PlantedGraph::generate(10, 2, 0.5, 1).unwrap();
        let pair = Pair::new("u0000", "u0001").unwrap();
        let truth = p.proximity("u0000", "u0001").unwrap();
        let mut rng = seed::rng(0, &[]);
        let clean = NoiseModel::noise_free(0);
        let zero = NoiseModel {
            p_zero: 1.0,
            ..clean.clone()
        };
        for _ in 0..100 {
            assert_eq!(simulate_annotator(&pair, &p, &clean, &mut rng).unwrap(), truth);
            assert_eq!(simulate_annotator(&pair, &p, &zero, &mut rng).unwrap(), 0);
        }
        let bad = NoiseModel {
            p_deviate: 0.7,
            p_zero: 0.5,
            seed: 0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deviation_rate_matches_the_model() {
        // pairs with true value 2 or 3 are never clipped
        let p = PlantedGraph::generate(60, 2, 0.5, 5).unwrap();
        let ids = p.ids();
        let pairs: Vec<Pair> = ids
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                ids[i + 1..]
                    .iter()
                    .map(move |b| Pair::new(a.clone(), b.clone()).unwrap())
            })
            .filter(|pr| matches!(p.proximity(pr.first(), pr.second()), Some(2 | 3)))
            .collect();
        let noise = NoiseModel {
            p_deviate: 0.3,
            p_zero: 0.0,
            seed: 0,
        };
        let mut rng = seed::rng(77, &[]);
        let draws = 10_000;
        let deviated = (0..draws)
            .filter(|i| {
                let pair = &pairs[i % pairs.len()];
                let truth = p.proximity(pair.first(), pair.second()).unwrap();
                simulate_annotator(pair, &p, &noise, &mut rng).unwrap() != truth
            })
            .count();
        let rate = deviated as f64 / draws as f64;
        assert!((rate - 0.3).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn perturbation_keeps_the_edge_set() {
        let p = PlantedGraph::generate(40, 2, 0.5, 2).unwrap();
        let js = p.sampled_judgments(0.2, 0.5, 2);
        let mut rng = seed::rng(1, &[]);
        let perturbed = perturb_judgments(&js, 0.5, &mut rng);
        let before: BTreeSet<_> = js.iter().map(|j| (&j.pair, &j.annotator)).collect();
        let after: BTreeSet<_> = perturbed.iter().map(|j| (&j.pair, &j.annotator)).collect();
        assert_eq!(before, after);
        assert!(perturbed.iter().all(|j| (1..=4).contains(&j.score)));
        let changed = js
            .iter()
            .zip(&perturbed)
            .filter(|(a, b)| a.score != b.score)
            .count();
        assert!(changed > 0 && changed <= js.len() / 2);
    }

    #[test]
    fn single_round_pipeline_annotates_only_round_one() {
        let p = PlantedGraph::generate(50, 2, 0.5, 4).unwrap();
        let cfg = PipelineConfig {
            max_rounds: 1,
            ..Default::default()
        };
        let report = run_pipeline_sim(&p, &cfg).unwrap();
        assert_eq!(report.rounds.len(), 1);
        // 5 usages, 10 possible edges, 30% -> 3 but at least 4 to span
        assert_eq!(report.rounds[0].edges_annotated, 4);
    }

    #[test]
    fn bootstrap_brackets_the_mean() {
        let values: Vec<f64> = (0..50).map(|i| f64::from(i % 5) / 4.0).collect();
        let mut rng = seed::rng(3, &[]);
        let (lo, hi) = bootstrap_ci(&values, BOOTSTRAP_RESAMPLES, &mut rng);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.3);
    }
}
