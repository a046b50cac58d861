use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wugs::metrics::{agreement_report, change_scores};
use wugs::simulation::{planted_robustness, PlantedRobustness};
use wugs::store::{read_judgment_rows, write_batch, IngestOptions, Project, ProjectConfig, ProjectDir};
use wugs::{cluster, conflicts, robustness_experiment, seed, Clustering, PipelineConfig, PlantedGraph, Wug};
use wugs_service::{DirStore, Service, Tokens};

use crate::settings::Settings;
use crate::{Cli, Command, Failure};

/// Files written by one command, and the manifest that lists them.
struct Out {
    dir: PathBuf,
    files: Vec<String>,
    inputs: BTreeMap<String, String>,
    results: Value,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        Ok(Out {
            dir: dir.to_owned(),
            files: Vec::new(),
            inputs: BTreeMap::new(),
            results: json!({}),
        })
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_owned(), path.display().to_string());
    }

    fn text(&mut self, name: &str, content: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(internal)?;
        }
        fs::write(&path, content).map_err(internal)?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(internal)?;
        text.push('\n');
        self.text(name, &text)
    }

    fn manifest(mut self, command: &str, settings: &Settings) -> Result<(), Failure> {
        let config = settings.flat();
        let canonical = serde_json::to_string(&config).map_err(internal)?;
        let hash = Sha256::digest(canonical.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            });
        self.files.sort();
        let manifest = json!({
            "tool": "wugs",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": settings.seed,
            "config": config,
            "config_hash": hash,
            "inputs": self.inputs,
            "outputs": self.files,
            "results": self.results,
        });
        let mut text = serde_json::to_string_pretty(&manifest).map_err(internal)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text).map_err(internal)
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn open(path: &Path) -> Result<(ProjectDir, Project), Failure> {
    let dir = ProjectDir::new(path);
    if !dir.exists() {
        return Err(Failure::Usage(format!(
            "{} is not a project directory",
            path.display()
        )));
    }
    let project = dir.load()?;
    Ok((dir, project))
}

fn lemmas_of(project: &Project, only: Option<&String>) -> Result<Vec<String>, Failure> {
    match only {
        Some(l) if project.lemmas.contains_key(l) => Ok(vec![l.clone()]),
        Some(l) => Err(wugs::Error::UnknownLemma(l.clone()).into()),
        None => Ok(project.lemma_names().map(str::to_owned).collect()),
    }
}

/// Filtered graph of `lemma` and its clustering under the run seed.
fn clustered(
    project: &Project,
    lemma: &str,
    settings: &Settings,
) -> Result<(Wug, Vec<String>, Clustering), Failure> {
    let (_, anneal, _) = settings.seeded();
    let anneal = anneal
        .clone()
        .with_seed(seed::derive(anneal.seed, &[seed::key(lemma)]));
    let (graph, removed) = project.graph(lemma)?.filter_zero_nodes();
    let clustering = cluster(&graph, &anneal)?;
    Ok((graph, removed, clustering))
}

fn project_config(settings: &Settings) -> ProjectConfig {
    let (sampling, anneal, _) = settings.seeded();
    ProjectConfig {
        sampling,
        anneal,
        flags: settings.flags.clone(),
        allow_ad_hoc: settings.allow_ad_hoc,
        change_k: settings.change_k,
        change_n: settings.change_n,
    }
}

pub fn dispatch(cli: &Cli, command: &Command, settings: &Settings) -> Result<(), Failure> {
    let mut out = Out::new(&cli.out)?;
    let name = match command {
        Command::Ingest {
            project,
            usages,
            senses,
            judgments,
            periods,
            annotators,
            id,
        } => {
            let dir = ProjectDir::new(project);
            out.input("project", project);
            let summary = if dir.exists() {
                if usages.is_some() || senses.is_some() {
                    return Err(Failure::Usage(
                        "project exists; only --judgments can be added to it".into(),
                    ));
                }
                let path = judgments
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("nothing to ingest".into()))?;
                out.input("judgments", path);
                let mut p = dir.load()?;
                let rows = read_judgment_rows(path)?;
                let report = p.append_judgments(&rows.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>());
                dir.append_judgments(&report.accepted)?;
                let rejected: Vec<Value> = report
                    .rejected
                    .iter()
                    .map(|r| json!({ "line": rows[r.index].0, "reason": r.reason }))
                    .collect();
                for r in &rejected {
                    log::warn!("rejected {r}");
                }
                json!({ "accepted": report.accepted.len(), "rejected": rejected, "log_length": p.judgments().len() })
            } else {
                let usages = usages
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("a new project needs --usages".into()))?;
                out.input("usages", usages);
                for (k, v) in [("senses", senses), ("judgments", judgments)] {
                    if let Some(v) = v {
                        out.input(k, v);
                    }
                }
                let id = id.clone().unwrap_or_else(|| {
                    project
                        .file_name()
                        .map_or("project".into(), |n| n.to_string_lossy().into_owned())
                });
                let p = wugs::ingest(
                    usages,
                    senses.as_deref(),
                    judgments.as_deref(),
                    IngestOptions {
                        project_id: id,
                        periods: (!periods.is_empty()).then(|| periods.clone()),
                        annotators: (!annotators.is_empty()).then(|| annotators.clone()),
                        config: project_config(settings),
                    },
                )?;
                fs::create_dir_all(project).map_err(|e| Failure::Data(e.to_string()))?;
                dir.save(&p)?;
                let lemmas: BTreeMap<&str, Value> = p
                    .lemma_names()
                    .map(|l| {
                        let g = p.graph(l)?;
                        Ok((
                            l,
                            json!({
                                "usages": g.usages().count(),
                                "senses": g.node_count() - g.usages().count(),
                                "edges": g.edge_count(),
                                "judgments": g.judgments().count(),
                            }),
                        ))
                    })
                    .collect::<wugs::Result<_>>()?;
                json!({ "project": p.id, "annotators": p.annotators, "periods": p.periods, "lemmas": lemmas })
            };
            out.json("ingest.json", &summary)?;
            out.results = summary;
            "ingest"
        }
        Command::Sample { project, expire } => {
            out.input("project", project);
            let (dir, mut p) = open(project)?;
            if *expire {
                let n = p.expire_open_tasks();
                log::info!("expired {n} open tasks");
            }
            let (next, report) = p.advance_round()?;
            dir.save_state(&next)?;
            for (lemma, state) in &next.lemmas {
                if let Some(batch) = &state.batch {
                    let path = out.dir.join("batches").join(format!("{lemma}.tsv"));
                    fs::create_dir_all(path.parent().expect("parent")).map_err(internal)?;
                    write_batch(&path, batch)?;
                    out.files.push(format!("batches/{lemma}.tsv"));
                }
            }
            out.json("round_report.json", &report)?;
            out.results = json!({
                "round": report.round,
                "batch_pairs": report.lemmas.iter().map(|l| (l.lemma.clone(), l.batch_pairs)).collect::<BTreeMap<_, _>>(),
                "complete": report.lemmas.iter().filter(|l| l.complete).map(|l| l.lemma.clone()).collect::<Vec<_>>(),
            });
            "sample"
        }
        Command::Cluster { project, lemma } => {
            out.input("project", project);
            let (_, p) = open(project)?;
            let mut summary = BTreeMap::new();
            for l in lemmas_of(&p, lemma.as_ref())? {
                let (graph, removed, c) = clustered(&p, &l, settings)?;
                let doc = json!({
                    "lemma": l,
                    "clusters": c.clusters(),
                    "isolates": c.isolates(),
                    "removed": removed,
                    "loss": c.loss(),
                    "normalized_loss": c.normalized_loss(),
                    "conflicts": conflicts(&graph, &c).len(),
                });
                out.json(&format!("clusters/{l}.json"), &doc)?;
                summary.insert(l, json!({ "clusters": c.cluster_count(), "loss": c.loss() }));
            }
            out.results = json!(summary);
            "cluster"
        }
        Command::Stats { project } => {
            out.input("project", project);
            let (_, p) = open(project)?;
            let stats = wugs_service::stats(&p)?;
            let rounds: Vec<u32> = {
                let mut r: Vec<u32> = p.judgments().iter().map(|j| j.round).collect();
                r.sort_unstable();
                r.dedup();
                r
            };
            let by_round: Vec<_> = rounds
                .iter()
                .map(|&r| agreement_report(p.judgments(), Some(r)))
                .collect();
            out.json(
                "stats.json",
                &json!({ "stats": stats, "agreement_by_round": by_round }),
            )?;
            out.results = json!({
                "judgments": stats.judgments,
                "krippendorff_alpha": stats.agreement.krippendorff_alpha,
                "weighted_mean_spearman": stats.agreement.weighted_mean_spearman,
            });
            "stats"
        }
        Command::Change { project } => {
            out.input("project", project);
            let (_, p) = open(project)?;
            let mut rows = String::from("lemma\tgraded\tbinary\tfreq_first\tfreq_second\n");
            let mut docs = BTreeMap::new();
            for l in lemmas_of(&p, None)? {
                let (graph, _, c) = clustered(&p, &l, settings)?;
                let scores = if graph.periods().len() >= 2 {
                    change_scores(&graph, &c, settings.change_k, settings.change_n)?
                } else {
                    None
                };
                let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
                match &scores {
                    Some(s) => {
                        let _ = writeln!(
                            rows,
                            "{l}\t{}\t{}\t{}\t{}",
                            s.graded,
                            s.binary,
                            join(&s.freq_dist.0),
                            join(&s.freq_dist.1)
                        );
                    }
                    None => {
                        let _ = writeln!(rows, "{l}\t\t\t\t");
                    }
                }
                docs.insert(l, scores);
            }
            out.text("change.tsv", &rows)?;
            out.json("change.json", &docs)?;
            out.results = json!(docs
                .iter()
                .map(|(l, s)| (l.clone(), s.as_ref().map(|s| s.graded)))
                .collect::<BTreeMap<_, _>>());
            "change"
        }
        Command::Robustness {
            project,
            lemma,
            fractions,
            trials,
            graphs,
            usages,
            senses,
            density,
        } => {
            let (_, anneal, _) = settings.seeded();
            let curve = if let Some(path) = project {
                out.input("project", path);
                let (_, p) = open(path)?;
                let lemma = lemma.as_ref().expect("clap requires --lemma");
                lemmas_of(&p, Some(lemma))?;
                let (graph, _, reference) = clustered(&p, lemma, settings)?;
                let anneal = anneal
                    .clone()
                    .with_seed(seed::derive(anneal.seed, &[seed::key(lemma)]));
                let curve = robustness_experiment(
                    &graph,
                    &reference.with_isolates_as_singletons(),
                    fractions,
                    *trials,
                    &anneal,
                    seed::derive(settings.seed, &[5]),
                )?;
                out.json("robustness.json", &curve)?;
                curve
            } else {
                let report = planted_robustness(&PlantedRobustness {
                    graphs: *graphs,
                    usages: *usages,
                    senses: *senses,
                    edge_fraction: *density,
                    fractions: fractions.clone(),
                    trials: *trials,
                    anneal,
                    seed: seed::derive(settings.seed, &[5]),
                })?;
                out.json("robustness.json", &report)?;
                report.pooled
            };
            let mut rows = String::from("fraction\tmean_accuracy\tci_low\tci_high\ttrials\n");
            for i in 0..curve.fractions.len() {
                let _ = writeln!(
                    rows,
                    "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
                    curve.fractions[i],
                    curve.mean_accuracy[i],
                    curve.ci_low[i],
                    curve.ci_high[i],
                    curve.trials
                );
            }
            out.text("robustness.tsv", &rows)?;
            out.results = json!({ "fractions": curve.fractions, "mean_accuracy": curve.mean_accuracy });
            "robustness"
        }
        Command::Simulate {
            usages,
            senses,
            split,
            noise,
            p_zero,
            rounds,
            annotators,
        } => {
            let (sampling, anneal, mut noise_model) = settings.seeded();
            if let Some(p) = noise {
                noise_model.p_deviate = *p;
            }
            if let Some(p) = p_zero {
                noise_model.p_zero = *p;
            }
            let planted =
                PlantedGraph::generate(*usages, *senses, *split, seed::derive(settings.seed, &[4]))?;
            let cfg = PipelineConfig {
                sampling,
                anneal,
                noise: noise_model,
                annotators: *annotators,
                max_rounds: *rounds,
            };
            let report = wugs::run_pipeline_sim(&planted, &cfg)?;
            let mut rows = String::from(
                "round\tbatch_pairs\tjudgments\tedges_annotated\tclusters\tmulti_clusters\taccuracy\tloss\tnormalized_loss\tremoved_nodes\tcomplete\n",
            );
            for r in &report.rounds {
                let _ = writeln!(
                    rows,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{}",
                    r.round,
                    r.batch_pairs,
                    r.judgments,
                    r.edges_annotated,
                    r.clusters,
                    r.multi_clusters,
                    r.accuracy,
                    r.loss,
                    r.normalized_loss,
                    r.removed_nodes,
                    r.complete
                );
            }
            out.text("rounds.tsv", &rows)?;
            out.json("simulate.json", &report)?;
            let edges = report.rounds.last().map_or(0, |r| r.edges_annotated);
            let possible = usages * usages.saturating_sub(1) / 2;
            out.results = json!({
                "final_accuracy": report.final_accuracy(),
                "rounds": report.rounds.len(),
                "edges_annotated": edges,
                "edge_share": edges as f64 / possible.max(1) as f64,
            });
            "simulate"
        }
        Command::Serve { project, addr } => {
            out.input("project", project);
            let (_, p) = open(project)?;
            if settings.admin_tokens.is_empty() && settings.annotator_tokens.is_empty() {
                return Err(Failure::Usage(
                    "no tokens configured; set auth.admin and auth.annotator.<name>".into(),
                ));
            }
            let mut tokens = Tokens::new();
            for t in &settings.admin_tokens {
                tokens = tokens.admin(t.clone());
            }
            for (name, t) in &settings.annotator_tokens {
                tokens = tokens.annotator(t.clone(), name.clone());
            }
            let id = p.id.clone();
            let store = DirStore::new([(id, ProjectDir::new(project))]);
            let service = Arc::new(Service::new([p], tokens, Box::new(store)));
            out.results = json!({ "addr": addr.to_string() });
            out.manifest("serve", settings)?;
            let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
            return runtime
                .block_on(wugs_service::serve(service, *addr))
                .map_err(|e| Failure::Usage(format!("{addr}: {e}")));
        }
        Command::Export { project, lemma } => {
            out.input("project", project);
            let (_, p) = open(project)?;
            for l in lemmas_of(&p, lemma.as_ref())? {
                out.text(&format!("graphs/{l}.json"), &(p.export_graph_json(&l)? + "\n"))?;
            }
            p.export_tsv(&out.dir.join("tsv"))?;
            out.files
                .extend(["tsv/usages.tsv", "tsv/senses.tsv", "tsv/judgments.tsv"].map(String::from));
            "export"
        }
    };
    out.manifest(name, settings)
}
