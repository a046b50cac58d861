//! Projects and their files.
//!
//! A project keeps usages, sense descriptions and an append-only judgment log
//! for any number of lemmas, plus the per-lemma sampling state. On disk a
//! project is a directory:
//!
//! ```text
//! usages.tsv     lemma pos grouping identifier context target_start target_end date
//! senses.tsv     lemma sense_id definition
//! judgments.tsv  identifier1 identifier2 annotator judgment comment round
//! project.json   everything else
//! ```
//!
//! TSV files are tab separated with a header row and no quoting, so fields
//! may not contain tabs or line breaks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, AnnealConfig, Clustering};
use crate::error::{Error, Result};
use crate::graph::{
    build_usg_pairs, Judgment, Node, NodeId, Pair, Period, SenseDescription, Usage, Wug, SENSE_PREFIX,
};
use crate::sampling::{
    flag_word, next_round, round1_sample, AnnotationBatch, Provenance, RoundState, SamplingConfig,
    WordFlagConfig,
};
use crate::seed;

pub const USAGE_COLUMNS: [&str; 8] = [
    "lemma",
    "pos",
    "grouping",
    "identifier",
    "context",
    "target_start",
    "target_end",
    "date",
];
pub const JUDGMENT_COLUMNS: [&str; 6] = [
    "identifier1",
    "identifier2",
    "annotator",
    "judgment",
    "comment",
    "round",
];
pub const SENSE_COLUMNS: [&str; 3] = ["lemma", "sense_id", "definition"];

#[derive(Debug, Serialize, Deserialize)]
struct UsageRow {
    lemma: String,
    pos: String,
    grouping: Period,
    identifier: String,
    context: String,
    target_start: usize,
    target_end: usize,
    date: Option<i32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JudgmentRow {
    identifier1: String,
    identifier2: String,
    annotator: String,
    judgment: i64,
    comment: Option<String>,
    round: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SenseRow {
    lemma: String,
    sense_id: String,
    definition: String,
}

fn parse_error(file: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_owned(),
        line,
        column,
        message: message.into(),
    }
}

fn csv_error(file: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, csv::Position::line);
    match err.kind() {
        csv::ErrorKind::Deserialize { err: de, .. } => parse_error(
            file,
            line,
            de.field().map_or(0, |f| f as usize + 1),
            de.kind().to_string(),
        ),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => parse_error(
            file,
            line,
            0,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Io(_) => Error::Csv(err),
        _ => parse_error(file, line, 0, err.to_string()),
    }
}

/// Rows of a TSV file with exactly the `columns` header, with their line
/// numbers.
fn read_table<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<(u64, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for (i, expected) in columns.iter().enumerate() {
        if headers.get(i) != Some(expected) {
            return Err(parse_error(
                path,
                1,
                i + 1,
                format!("expected column `{expected}`"),
            ));
        }
    }
    if headers.len() != columns.len() {
        return Err(parse_error(path, 1, columns.len() + 1, "unexpected extra column"));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, csv::Position::line);
        let row = record
            .deserialize(Some(&headers))
            .map_err(|e| csv_error(path, e))?;
        out.push((line, row));
    }
    Ok(out)
}

fn check_field(value: &str, what: &str) -> Result<()> {
    if value.contains(['\t', '\n', '\r']) {
        return Err(Error::Rejected(format!("{what} contains a tab or line break")));
    }
    Ok(())
}

fn write_table<T: Serialize>(path: &Path, columns: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut writer = csv::WriterBuilder::new()
            .delimiter(b'\t')
            .quote_style(csv::QuoteStyle::Never)
            .has_headers(false)
            .from_path(&tmp)?;
        writer.write_record(columns)?;
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn usage_row(u: &Usage) -> UsageRow {
    UsageRow {
        lemma: u.lemma.clone(),
        pos: u.pos.clone(),
        grouping: u.grouping,
        identifier: u.identifier.clone(),
        context: u.context.clone(),
        target_start: u.target_span.0,
        target_end: u.target_span.1,
        date: u.date,
    }
}

/// Sense nodes always go in the second column.
fn judgment_row(j: &Judgment) -> JudgmentRow {
    let (a, b) = if j.pair.first().starts_with(SENSE_PREFIX) {
        (j.pair.second(), j.pair.first())
    } else {
        (j.pair.first(), j.pair.second())
    };
    JudgmentRow {
        identifier1: a.to_owned(),
        identifier2: b.to_owned(),
        annotator: j.annotator.clone(),
        judgment: i64::from(j.score),
        comment: j.comment.clone(),
        round: j.round,
    }
}

/// Settings that travel with a project.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub sampling: SamplingConfig,
    pub anneal: AnnealConfig,
    pub flags: WordFlagConfig,
    /// Accept judgments on pairs outside the open batch.
    pub allow_ad_hoc: bool,
    /// Binary change: a sense is gained or lost when it has at least
    /// `change_k` usages in one period and at most `change_n` in the other.
    pub change_k: usize,
    pub change_n: usize,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            sampling: SamplingConfig::default(),
            anneal: AnnealConfig::default(),
            flags: WordFlagConfig::default(),
            allow_ad_hoc: true,
            change_k: 2,
            change_n: 0,
        }
    }
}

/// Sampling state of one lemma.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaState {
    /// Batch of the open round, if this lemma takes part in it.
    pub batch: Option<AnnotationBatch>,
    pub clustering: Option<Clustering>,
    /// Nodes dropped by the zero-judgment filter at the last clustering.
    pub removed: Vec<NodeId>,
    pub complete: bool,
    pub flag: Option<String>,
    /// `(pair, annotator)` tasks of the open batch given up by an admin.
    pub expired: Vec<(Pair, String)>,
}

/// A judgment to be appended. Without a round it goes into the open round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewJudgment {
    pub identifier1: String,
    pub identifier2: String,
    pub annotator: String,
    pub score: i64,
    pub comment: Option<String>,
    pub round: Option<u32>,
}

impl NewJudgment {
    pub fn new(a: impl Into<String>, b: impl Into<String>, annotator: impl Into<String>, score: i64) -> Self {
        NewJudgment {
            identifier1: a.into(),
            identifier2: b.into(),
            annotator: annotator.into(),
            score,
            comment: None,
            round: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position of the row in the submitted list.
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppendReport {
    pub accepted: Vec<Judgment>,
    pub rejected: Vec<Rejection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRoundReport {
    pub lemma: String,
    pub loss: Option<f64>,
    pub normalized_loss: Option<f64>,
    pub clusters: Option<usize>,
    pub removed_nodes: Vec<NodeId>,
    pub flagged: Option<String>,
    pub complete: bool,
    pub batch_pairs: usize,
    pub provenance: BTreeMap<Provenance, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// The round opened by the advance.
    pub round: u32,
    pub lemmas: Vec<LemmaRoundReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub periods: BTreeSet<Period>,
    pub annotators: Vec<String>,
    /// The open round; 0 before the first batch.
    pub round: u32,
    pub config: ProjectConfig,
    pub lemmas: BTreeMap<String, LemmaState>,
    #[serde(skip)]
    usages: Vec<Usage>,
    #[serde(skip)]
    senses: Vec<SenseDescription>,
    #[serde(skip)]
    judgments: Vec<Judgment>,
    #[serde(skip)]
    node_lemma: HashMap<NodeId, String>,
    #[serde(skip)]
    judged: HashSet<(Pair, String, u32)>,
}

impl Project {
    pub fn new(
        id: impl Into<String>,
        periods: impl IntoIterator<Item = Period>,
        annotators: impl IntoIterator<Item = String>,
        config: ProjectConfig,
    ) -> Self {
        let mut annotators: Vec<String> = annotators.into_iter().collect();
        annotators.sort();
        annotators.dedup();
        Project {
            id: id.into(),
            periods: periods.into_iter().collect(),
            annotators,
            config,
            ..Default::default()
        }
    }

    pub fn add_usage(&mut self, usage: Usage) -> Result<()> {
        usage.validate(&self.periods)?;
        check_field(&usage.context, "context")?;
        for f in [&usage.identifier, &usage.lemma, &usage.pos] {
            check_field(f, "field")?;
        }
        if self.node_lemma.contains_key(&usage.identifier) {
            return Err(Error::DuplicateId(usage.identifier));
        }
        self.node_lemma
            .insert(usage.identifier.clone(), usage.lemma.clone());
        self.lemmas.entry(usage.lemma.clone()).or_default();
        self.usages.push(usage);
        Ok(())
    }

    /// Sense ids are unique within a project.
    pub fn add_sense(&mut self, sense: SenseDescription) -> Result<()> {
        for f in [&sense.sense_id, &sense.lemma, &sense.definition] {
            check_field(f, "field")?;
        }
        let id = sense.node_id();
        if self.node_lemma.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.node_lemma.insert(id, sense.lemma.clone());
        self.lemmas.entry(sense.lemma.clone()).or_default();
        self.senses.push(sense);
        Ok(())
    }

    pub fn lemma_names(&self) -> impl Iterator<Item = &str> {
        self.lemmas.keys().map(String::as_str)
    }

    pub fn usages(&self) -> &[Usage] {
        &self.usages
    }

    pub fn senses(&self) -> &[SenseDescription] {
        &self.senses
    }

    /// The judgment log in arrival order.
    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn usage(&self, id: &str) -> Option<&Usage> {
        self.usages.iter().find(|u| u.identifier == id)
    }

    /// Sense description by node id (`sense:<id>`).
    pub fn sense(&self, node: &str) -> Option<&SenseDescription> {
        let id = node.strip_prefix(SENSE_PREFIX)?;
        self.senses.iter().find(|s| s.sense_id == id)
    }

    pub fn lemma_of(&self, node: &str) -> Option<&str> {
        self.node_lemma.get(node).map(String::as_str)
    }

    fn lemma_state(&self, lemma: &str) -> Result<&LemmaState> {
        self.lemmas
            .get(lemma)
            .ok_or_else(|| Error::UnknownLemma(lemma.to_owned()))
    }

    /// Judgments on pairs of `lemma`, in log order.
    pub fn lemma_judgments(&self, lemma: &str) -> Vec<Judgment> {
        self.judgments
            .iter()
            .filter(|j| self.lemma_of(j.pair.first()) == Some(lemma))
            .cloned()
            .collect()
    }

    /// The graph of `lemma` over all judgments so far.
    pub fn graph(&self, lemma: &str) -> Result<Wug> {
        self.lemma_state(lemma)?;
        Wug::builder()
            .periods(self.periods.iter().copied())
            .usages(self.usages.iter().filter(|u| u.lemma == lemma).cloned())
            .senses(self.senses.iter().filter(|s| s.lemma == lemma).cloned())
            .judgments(self.lemma_judgments(lemma))
            .build()
    }

    fn has_senses(&self, lemma: &str) -> bool {
        self.senses.iter().any(|s| s.lemma == lemma)
    }

    /// Validates one row against the project and the rows accepted so far.
    fn check(&self, row: &NewJudgment) -> std::result::Result<Judgment, String> {
        let pair = Pair::new(row.identifier1.clone(), row.identifier2.clone()).map_err(|e| e.to_string())?;
        let lemma = self
            .lemma_of(pair.first())
            .ok_or_else(|| format!("unknown node id `{}`", pair.first()))?;
        let other = self
            .lemma_of(pair.second())
            .ok_or_else(|| format!("unknown node id `{}`", pair.second()))?;
        if lemma != other {
            return Err(format!("pair mixes lemmas `{lemma}` and `{other}`"));
        }
        let senses = [pair.first(), pair.second()]
            .iter()
            .filter(|id| id.starts_with(SENSE_PREFIX))
            .count();
        if senses == 2 || (senses == 0 && self.has_senses(lemma)) {
            return Err(format!("{pair} is not a usage-sense pair"));
        }
        if !(0..=4).contains(&row.score) {
            return Err(format!("score {} is outside 0..=4", row.score));
        }
        if !self.annotators.contains(&row.annotator) {
            return Err(format!("annotator `{}` is not on the roster", row.annotator));
        }
        if let Some(c) = &row.comment {
            check_field(c, "comment").map_err(|e| e.to_string())?;
        }
        let round = row.round.unwrap_or(self.round).max(1);
        if self
            .judged
            .contains(&(pair.clone(), row.annotator.clone(), round))
        {
            return Err(format!(
                "{} already judged {pair} in round {round}",
                row.annotator
            ));
        }
        if !self.config.allow_ad_hoc {
            let assigned = self.lemmas[lemma]
                .batch
                .as_ref()
                .and_then(|b| b.assignments.get(&pair))
                .is_some_and(|who| who.contains(&row.annotator));
            if !assigned || round != self.round {
                return Err(format!("{pair} is not an open task of {}", row.annotator));
            }
        }
        let mut j = Judgment::new(
            pair.first(),
            pair.second(),
            row.annotator.clone(),
            row.score,
            round,
        )
        .map_err(|e| e.to_string())?;
        j.comment = row.comment.clone().filter(|c| !c.is_empty());
        Ok(j)
    }

    fn push_judgment(&mut self, j: Judgment) {
        self.judged.insert((j.pair.clone(), j.annotator.clone(), j.round));
        self.judgments.push(j);
    }

    /// Appends the valid rows to the log and reports the others.
    pub fn append_judgments(&mut self, rows: &[NewJudgment]) -> AppendReport {
        let mut report = AppendReport::default();
        for (index, row) in rows.iter().enumerate() {
            match self.check(row) {
                Ok(j) => {
                    self.push_judgment(j.clone());
                    report.accepted.push(j);
                }
                Err(reason) => report.rejected.push(Rejection { index, reason }),
            }
        }
        report
    }

    /// Open `(lemma, pair)` tasks of `annotator`, in batch order.
    pub fn open_tasks(&self, annotator: &str) -> Vec<(String, Pair)> {
        let mut out = Vec::new();
        for (lemma, state) in &self.lemmas {
            let Some(batch) = &state.batch else { continue };
            for (pair, who) in batch.tasks() {
                if who == annotator
                    && !self.judged.contains(&(pair.clone(), who.to_owned(), self.round))
                    && !state.expired.iter().any(|(p, a)| p == pair && a == who)
                {
                    out.push((lemma.clone(), pair.clone()));
                }
            }
        }
        out
    }

    pub fn open_task_count(&self) -> usize {
        self.annotators.iter().map(|a| self.open_tasks(a).len()).sum()
    }

    /// Gives up every open task so the round can be advanced.
    pub fn expire_open_tasks(&mut self) -> usize {
        let mut expired = 0;
        for annotator in self.annotators.clone() {
            for (lemma, pair) in self.open_tasks(&annotator) {
                if let Some(state) = self.lemmas.get_mut(&lemma) {
                    state.expired.push((pair, annotator.clone()));
                    expired += 1;
                }
            }
        }
        expired
    }

    /// Closes the open round and opens the next one.
    ///
    /// Every open lemma is rebuilt from the log, filtered, clustered and
    /// sampled; on the first advance, lemmas without judgments get a round-1
    /// sample instead. A lemma whose sampling is done is marked complete. The
    /// receiver is left untouched; the caller swaps in the returned project.
    pub fn advance_round(&self) -> Result<(Project, RoundReport)> {
        let open = self.open_task_count();
        if open > 0 {
            return Err(Error::Rejected(format!("{open} tasks are still open")));
        }
        let mut next = self.clone();
        next.round = self.round + 1;
        let mut reports = Vec::new();
        for lemma in self.lemmas.keys() {
            let state = next.lemmas.get_mut(lemma).expect("known lemma");
            state.expired.clear();
            state.batch = None;
            if state.complete {
                continue;
            }
            let sampling = self
                .config
                .sampling
                .clone()
                .with_seed(seed::derive(self.config.sampling.seed, &[seed::key(lemma)]));
            let anneal = self.config.anneal.clone().with_seed(seed::derive(
                self.config.anneal.seed,
                &[seed::key(lemma), u64::from(self.round)],
            ));
            let graph = self.graph(lemma)?;
            let usg = graph.is_usg();
            let mut report = LemmaRoundReport {
                lemma: lemma.clone(),
                loss: None,
                normalized_loss: None,
                clusters: None,
                removed_nodes: Vec::new(),
                flagged: None,
                complete: false,
                batch_pairs: 0,
                provenance: BTreeMap::new(),
            };
            // a lemma with imported judgments starts from a closed round
            let fresh = self.round == 0 && graph.edge_count() == 0;
            let mut batch = if fresh {
                if usg {
                    let usages: Vec<Usage> = graph.usages().cloned().collect();
                    let senses: Vec<SenseDescription> = graph
                        .nodes()
                        .filter_map(|n| match n {
                            Node::Sense(s) => Some(s.clone()),
                            Node::Usage(_) => None,
                        })
                        .collect();
                    let mut b = AnnotationBatch::new(1);
                    b.extend(build_usg_pairs(&usages, &senses)?, Provenance::Exploration);
                    Some(b)
                } else {
                    let ids: Vec<NodeId> = graph.usages().map(|u| u.identifier.clone()).collect();
                    if ids.len() < 2 {
                        None
                    } else {
                        Some(round1_sample(&ids, &sampling)?)
                    }
                }
            } else {
                let (filtered, removed) = graph.filter_zero_nodes();
                let clustering = cluster(&filtered, &anneal)?;
                report.loss = Some(clustering.loss());
                report.normalized_loss = Some(clustering.normalized_loss());
                report.clusters = Some(clustering.cluster_count());
                report.removed_nodes = removed.clone();
                state.removed = removed;
                state.clustering = Some(clustering.clone());
                if usg {
                    None
                } else {
                    let round_state = RoundState::new(self.round.max(1), filtered, clustering);
                    if round_state.is_complete() {
                        None
                    } else {
                        Some(next_round(&round_state, &self.annotators, &sampling)?)
                    }
                }
            };
            if let Some(b) = &mut batch {
                b.round = next.round;
                if b.assignments.is_empty() {
                    b.assign(&self.annotators, &graph, &sampling);
                }
            }
            let batch = batch.filter(|b| !b.is_empty());
            report.batch_pairs = batch.as_ref().map_or(0, AnnotationBatch::len);
            report.flagged = flag_word(&graph, report.batch_pairs, &self.config.flags);
            if let Some(b) = &batch {
                for (_, kind) in &b.pairs {
                    *report.provenance.entry(*kind).or_default() += 1;
                }
            }
            state.flag = report.flagged.clone();
            state.complete = batch.is_none();
            report.complete = state.complete;
            state.batch = batch;
            reports.push(report);
        }
        let report = RoundReport {
            round: next.round,
            lemmas: reports,
        };
        Ok((next, report))
    }

    /// JSON document of the graph of `lemma` with its latest clustering.
    pub fn export_graph(&self, lemma: &str) -> Result<GraphExport> {
        let state = self.lemma_state(lemma)?;
        Ok(graph_export(
            lemma,
            self.round,
            &self.graph(lemma)?,
            state.clustering.as_ref(),
            &state.removed,
        ))
    }

    pub fn export_graph_json(&self, lemma: &str) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export_graph(lemma)?)?)
    }

    /// Writes the three TSV files into `dir`.
    pub fn export_tsv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_table(
            &dir.join("usages.tsv"),
            &USAGE_COLUMNS,
            self.usages.iter().map(usage_row),
        )?;
        write_table(
            &dir.join("senses.tsv"),
            &SENSE_COLUMNS,
            self.senses.iter().map(|s| SenseRow {
                lemma: s.lemma.clone(),
                sense_id: s.sense_id.clone(),
                definition: s.definition.clone(),
            }),
        )?;
        write_table(
            &dir.join("judgments.tsv"),
            &JUDGMENT_COLUMNS,
            self.judgments.iter().map(judgment_row),
        )?;
        Ok(())
    }
}

/// Judgment rows of a filled-in batch file with their line numbers. Rows
/// whose score is still empty are skipped.
pub fn read_judgment_rows(path: &Path) -> Result<Vec<(u64, NewJudgment)>> {
    #[derive(Deserialize)]
    struct Row {
        identifier1: String,
        identifier2: String,
        annotator: String,
        judgment: Option<i64>,
        comment: Option<String>,
        round: u32,
    }
    Ok(read_table::<Row>(path, &JUDGMENT_COLUMNS)?
        .into_iter()
        .filter_map(|(line, r)| {
            let score = r.judgment?;
            Some((
                line,
                NewJudgment {
                    identifier1: r.identifier1,
                    identifier2: r.identifier2,
                    annotator: r.annotator,
                    score,
                    comment: r.comment,
                    round: Some(r.round),
                },
            ))
        })
        .collect())
}

/// Writes the tasks of `batch` in the judgments schema with empty score and
/// comment fields, one row per assigned annotator.
pub fn write_batch(path: &Path, batch: &AnnotationBatch) -> Result<()> {
    #[derive(Serialize)]
    struct TaskRow<'a> {
        identifier1: &'a str,
        identifier2: &'a str,
        annotator: &'a str,
        judgment: &'a str,
        comment: &'a str,
        round: u32,
    }
    let rows = batch.tasks().map(|(pair, annotator)| {
        let (a, b) = if pair.first().starts_with(SENSE_PREFIX) {
            (pair.second(), pair.first())
        } else {
            (pair.first(), pair.second())
        };
        TaskRow {
            identifier1: a,
            identifier2: b,
            annotator,
            judgment: "",
            comment: "",
            round: batch.round,
        }
    });
    write_table(path, &JUDGMENT_COLUMNS, rows)
}

/// Inputs and roster for [`ingest`].
#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    pub project_id: String,
    /// Allowed periods; by default the groupings found in the usages.
    pub periods: Option<Vec<Period>>,
    /// Annotator roster; by default everyone found in the judgments.
    pub annotators: Option<Vec<String>>,
    pub config: ProjectConfig,
}

/// Reads and validates a file set into a new project.
pub fn ingest(
    usages: &Path,
    senses: Option<&Path>,
    judgments: Option<&Path>,
    opts: IngestOptions,
) -> Result<Project> {
    let usage_rows: Vec<(u64, UsageRow)> = read_table(usages, &USAGE_COLUMNS)?;
    let sense_rows: Vec<(u64, SenseRow)> = match senses {
        Some(p) => read_table(p, &SENSE_COLUMNS)?,
        None => Vec::new(),
    };
    let judgment_rows: Vec<(u64, JudgmentRow)> = match judgments {
        Some(p) => read_table(p, &JUDGMENT_COLUMNS)?,
        None => Vec::new(),
    };
    let periods: Vec<Period> = opts
        .periods
        .clone()
        .unwrap_or_else(|| usage_rows.iter().map(|(_, r)| r.grouping).collect());
    let annotators: Vec<String> = opts
        .annotators
        .clone()
        .unwrap_or_else(|| judgment_rows.iter().map(|(_, r)| r.annotator.clone()).collect());
    let mut project = Project::new(opts.project_id, periods, annotators, opts.config);

    for (line, row) in usage_rows {
        let column = |name: &str| USAGE_COLUMNS.iter().position(|c| *c == name).expect("column") + 1;
        let usage = Usage {
            identifier: row.identifier,
            lemma: row.lemma,
            pos: row.pos,
            grouping: row.grouping,
            context: row.context,
            target_span: (row.target_start, row.target_end),
            date: row.date,
        };
        project.add_usage(usage).map_err(|e| {
            let col = match &e {
                Error::UnknownPeriod(_) => column("grouping"),
                Error::DuplicateId(_) => column("identifier"),
                Error::InvalidUsage { reason, .. } if reason.contains("span") => column("target_start"),
                _ => column("identifier"),
            };
            parse_error(usages, line, col, e.to_string())
        })?;
    }
    if let Some(path) = senses {
        for (line, row) in sense_rows {
            let sense = SenseDescription {
                sense_id: row.sense_id,
                lemma: row.lemma,
                definition: row.definition,
            };
            project
                .add_sense(sense)
                .map_err(|e| parse_error(path, line, 2, e.to_string()))?;
        }
    }
    if let Some(path) = judgments {
        for (line, row) in judgment_rows {
            let new = NewJudgment {
                identifier1: row.identifier1,
                identifier2: row.identifier2,
                annotator: row.annotator,
                score: row.judgment,
                comment: row.comment,
                round: Some(row.round),
            };
            match project.check(&new) {
                Ok(j) => project.push_judgment(j),
                Err(reason) => return Err(parse_error(path, line, 0, reason)),
            }
        }
    }
    Ok(project)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportedJudgment {
    pub annotator: String,
    pub score: u8,
    pub round: u32,
    pub comment: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    /// `usage` or `sense`.
    pub kind: String,
    pub grouping: Option<Period>,
    pub cluster: Option<usize>,
    pub isolate: bool,
    pub removed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub judgments: Vec<ExportedJudgment>,
    pub median: Option<f64>,
    pub shifted_weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub lemma: String,
    pub round: u32,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub clusters: usize,
    pub loss: Option<f64>,
    pub normalized_loss: Option<f64>,
}

/// Nodes sorted by id and edges by pair. Without a clustering, a node is an
/// isolate when it touches no weighted edge.
pub fn graph_export(
    lemma: &str,
    round: u32,
    graph: &Wug,
    clustering: Option<&Clustering>,
    removed: &[NodeId],
) -> GraphExport {
    let weighted: BTreeSet<&str> = graph
        .weighted_edges()
        .flat_map(|(p, _)| [p.first(), p.second()])
        .collect();
    let nodes = graph
        .nodes()
        .map(|n| {
            let id = n.id();
            let gone = removed.contains(&id);
            let cluster = clustering.and_then(|c| c.cluster_of(&id));
            let isolate = !gone
                && match clustering {
                    Some(c) => cluster.is_none() || c.isolates().contains(&id),
                    None => !weighted.contains(id.as_str()),
                };
            GraphNode {
                kind: if n.is_sense() { "sense" } else { "usage" }.into(),
                grouping: n.as_usage().map(|u| u.grouping),
                cluster,
                isolate,
                removed: gone,
                id,
            }
        })
        .collect();
    let edges = graph
        .edges()
        .map(|(p, e)| GraphEdge {
            source: p.first().to_owned(),
            target: p.second().to_owned(),
            judgments: e
                .judgments
                .iter()
                .map(|j| ExportedJudgment {
                    annotator: j.annotator.clone(),
                    score: j.score,
                    round: j.round,
                    comment: j.comment.clone(),
                })
                .collect(),
            median: e.weight,
            shifted_weight: e.shifted().map(|w| w.value()),
        })
        .collect();
    GraphExport {
        lemma: lemma.to_owned(),
        round,
        nodes,
        edges,
        clusters: clustering.map_or(0, Clustering::cluster_count),
        loss: clustering.map(Clustering::loss),
        normalized_loss: clustering.map(Clustering::normalized_loss),
    }
}

/// A project directory.
#[derive(Debug)]
pub struct ProjectDir {
    root: PathBuf,
    log: Mutex<()>,
}

impl ProjectDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ProjectDir {
            root: root.into(),
            log: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn exists(&self) -> bool {
        self.root.join("project.json").is_file()
    }

    /// Writes every file of `project`.
    pub fn save(&self, project: &Project) -> Result<()> {
        let _guard = self.log.lock().unwrap_or_else(|e| e.into_inner());
        project.export_tsv(&self.root)?;
        self.write_state(project)
    }

    /// Rewrites `project.json` only, atomically.
    pub fn save_state(&self, project: &Project) -> Result<()> {
        let _guard = self.log.lock().unwrap_or_else(|e| e.into_inner());
        self.write_state(project)
    }

    fn write_state(&self, project: &Project) -> Result<()> {
        let path = self.root.join("project.json");
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(project)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    /// Appends judgments to the log file. Concurrent callers are serialized;
    /// each call's rows stay contiguous.
    pub fn append_judgments(&self, judgments: &[Judgment]) -> Result<()> {
        let _guard = self.log.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.root.join("judgments.tsv");
        let fresh = !path.exists();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut writer = csv::WriterBuilder::new()
            .delimiter(b'\t')
            .quote_style(csv::QuoteStyle::Never)
            .has_headers(false)
            .from_writer(file);
        if fresh {
            writer.write_record(JUDGMENT_COLUMNS)?;
        }
        for j in judgments {
            writer.serialize(judgment_row(j))?;
        }
        let mut file = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.flush()?;
        file.sync_data()?;
        Ok(())
    }

    pub fn load(&self) -> Result<Project> {
        let _guard = self.log.lock().unwrap_or_else(|e| e.into_inner());
        let state: Project = serde_json::from_reader(File::open(self.root.join("project.json"))?)?;
        let senses = self.root.join("senses.tsv");
        let judgments = self.root.join("judgments.tsv");
        let mut project = ingest(
            &self.root.join("usages.tsv"),
            senses.exists().then_some(senses.as_path()),
            None,
            IngestOptions {
                project_id: state.id.clone(),
                periods: Some(state.periods.iter().copied().collect()),
                annotators: Some(state.annotators.clone()),
                config: state.config.clone(),
            },
        )?;
        if judgments.exists() {
            for (line, row) in read_table::<JudgmentRow>(&judgments, &JUDGMENT_COLUMNS)? {
                let j = Judgment::new(
                    row.identifier1,
                    row.identifier2,
                    row.annotator,
                    row.judgment,
                    row.round,
                )
                .map_err(|e| parse_error(&judgments, line, 0, e.to_string()))?;
                let j = Judgment {
                    comment: row.comment.filter(|c| !c.is_empty()),
                    ..j
                };
                project.push_judgment(j);
            }
        }
        project.round = state.round;
        project.lemmas = state.lemmas;
        Ok(project)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::usage;

    fn project() -> Project {
        let mut p = Project::new(
            "t",
            [1, 2],
            ["ann1".to_owned(), "ann2".to_owned()],
            ProjectConfig::default(),
        );
        for (id, g) in [("a", 1), ("b", 1), ("c", 2), ("d", 2)] {
            p.add_usage(usage(id, g)).unwrap();
        }
        p
    }

    #[test]
    fn append_rejects_bad_rows() {
        let mut p = project();
        let report = p.append_judgments(&[
            NewJudgment::new("a", "b", "ann1", 3),
            NewJudgment::new("a", "b", "ann1", 4),
            NewJudgment::new("a", "c", "ann1", 7),
            NewJudgment::new("a", "c", "ann9", 2),
            NewJudgment::new("a", "zz", "ann1", 2),
            NewJudgment::new("a", "a", "ann1", 2),
            NewJudgment::new("b", "a", "ann2", 1),
        ]);
        assert_eq!(report.accepted.len(), 2);
        assert_eq!(
            report.rejected.iter().map(|r| r.index).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
        assert_eq!(p.judgments().len(), 2);
        assert_eq!(p.graph("plane").unwrap().weight("a", "b"), Some(2.0));
    }

    #[test]
    fn duplicate_usage_is_rejected() {
        let mut p = project();
        assert!(matches!(p.add_usage(usage("a", 1)), Err(Error::DuplicateId(id)) if id == "a"));
        assert!(matches!(p.add_usage(usage("e", 3)), Err(Error::UnknownPeriod(3))));
    }

    #[test]
    fn first_advance_opens_round_one() {
        let p = project();
        let (next, report) = p.advance_round().unwrap();
        assert_eq!(p.round, 0);
        assert_eq!(next.round, 1);
        assert_eq!(report.lemmas.len(), 1);
        let batch = next.lemmas["plane"].batch.as_ref().unwrap();
        assert_eq!(batch.round, 1);
        assert!(!batch.is_empty());
        assert!(next.open_task_count() > 0);
        assert!(next.advance_round().is_err());
    }

    #[test]
    fn expired_tasks_unblock_the_round() {
        let (mut p, _) = project().advance_round().unwrap();
        let open = p.open_task_count();
        assert_eq!(p.expire_open_tasks(), open);
        assert_eq!(p.open_task_count(), 0);
        assert!(p.advance_round().is_ok());
    }

    #[test]
    fn closed_projects_take_only_batch_pairs() {
        let mut p = project();
        p.config.allow_ad_hoc = false;
        let (mut p, _) = p.advance_round().unwrap();
        let (lemma, pair) = p
            .open_tasks("ann1")
            .into_iter()
            .chain(p.open_tasks("ann2"))
            .next()
            .unwrap();
        assert_eq!(lemma, "plane");
        let owner = p.lemmas["plane"].batch.as_ref().unwrap().assignments[&pair][0].clone();
        let ok = NewJudgment::new(pair.first(), pair.second(), owner.clone(), 3);
        assert_eq!(p.append_judgments(&[ok]).accepted.len(), 1);
        let all_pairs: BTreeSet<Pair> = p.lemmas["plane"]
            .batch
            .as_ref()
            .unwrap()
            .assignments
            .keys()
            .cloned()
            .collect();
        let outside = ["a", "b", "c", "d"]
            .iter()
            .flat_map(|x| ["a", "b", "c", "d"].map(move |y| (*x, y)))
            .filter_map(|(x, y)| Pair::new(x, y).ok())
            .find(|p| !all_pairs.contains(p));
        if let Some(q) = outside {
            let bad = NewJudgment::new(q.first(), q.second(), owner, 3);
            assert_eq!(p.append_judgments(&[bad]).rejected.len(), 1);
        }
    }

    #[test]
    fn empty_graph_exports_empty_arrays() {
        let doc = graph_export("x", 0, &Wug::default(), None, &[]);
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(json["nodes"], serde_json::json!([]));
        assert_eq!(json["edges"], serde_json::json!([]));
    }

    #[test]
    fn sense_ids_go_second() {
        let j = Judgment::new("u1", "sense:s1", "a", 3, 1).unwrap();
        let row = judgment_row(&j);
        assert_eq!(
            (row.identifier1.as_str(), row.identifier2.as_str()),
            ("u1", "sense:s1")
        );
    }
}
