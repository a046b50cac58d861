//! JSON-over-HTTP annotation service.
//!
//! Annotators fetch their next pair and post judgments; an admin advances
//! rounds and reads graph and statistics snapshots. Every request carries a
//! static bearer token that maps to one annotator or to the admin role.
//!
//! | method | path | role |
//! |---|---|---|
//! | GET | `/projects/{p}/tasks/next?annotator=a` | annotator `a` |
//! | POST | `/projects/{p}/judgments` | annotator |
//! | POST | `/projects/{p}/rounds/advance` | admin |
//! | GET | `/projects/{p}/lemmas/{l}/graph` | admin |
//! | GET | `/projects/{p}/stats` | admin |

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use wugs::graph::{Pair, SCALE_LABELS};
use wugs::metrics::{
    agreement_report, change_scores, disagreement_histogram, judgment_frequencies, AgreementReport,
    ChangeScores, DisagreementHistogram, JudgmentFrequencies,
};
use wugs::store::{NewJudgment, Project, ProjectDir, RoundReport};
use wugs::{conflicts, seed, Judgment};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    Admin,
    Annotator(String),
}

/// Static token table.
#[derive(Clone, Debug, Default)]
pub struct Tokens(HashMap<String, Role>);

impl Tokens {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admin(mut self, token: impl Into<String>) -> Self {
        self.0.insert(token.into(), Role::Admin);
        self
    }

    pub fn annotator(mut self, token: impl Into<String>, name: impl Into<String>) -> Self {
        self.0.insert(token.into(), Role::Annotator(name.into()));
        self
    }

    pub fn role(&self, token: &str) -> Option<&Role> {
        self.0.get(token)
    }
}

/// Where accepted judgments and new round states are written before they
/// become visible.
pub trait Persistence: Send + Sync {
    fn append_judgments(&self, project: &Project, judgments: &[Judgment]) -> wugs::Result<()>;
    fn save_state(&self, project: &Project) -> wugs::Result<()>;
}

/// Keeps nothing; for tests and throwaway sessions.
pub struct InMemory;

impl Persistence for InMemory {
    fn append_judgments(&self, _: &Project, _: &[Judgment]) -> wugs::Result<()> {
        Ok(())
    }

    fn save_state(&self, _: &Project) -> wugs::Result<()> {
        Ok(())
    }
}

/// One project directory per project id.
pub struct DirStore(HashMap<String, ProjectDir>);

impl DirStore {
    pub fn new(dirs: impl IntoIterator<Item = (String, ProjectDir)>) -> Self {
        DirStore(dirs.into_iter().collect())
    }

    fn dir(&self, project: &Project) -> wugs::Result<&ProjectDir> {
        self.0
            .get(&project.id)
            .ok_or_else(|| wugs::Error::InvalidConfig(format!("no directory for project `{}`", project.id)))
    }
}

impl Persistence for DirStore {
    fn append_judgments(&self, project: &Project, judgments: &[Judgment]) -> wugs::Result<()> {
        self.dir(project)?.append_judgments(judgments)
    }

    fn save_state(&self, project: &Project) -> wugs::Result<()> {
        self.dir(project)?.save_state(project)
    }
}

pub struct Service {
    projects: BTreeMap<String, Mutex<Project>>,
    tokens: Tokens,
    persistence: Box<dyn Persistence>,
}

impl Service {
    pub fn new(
        projects: impl IntoIterator<Item = Project>,
        tokens: Tokens,
        persistence: Box<dyn Persistence>,
    ) -> Self {
        Service {
            projects: projects
                .into_iter()
                .map(|p| (p.id.clone(), Mutex::new(p)))
                .collect(),
            tokens,
            persistence,
        }
    }

    /// Copy of the current state of a project.
    pub fn snapshot(&self, id: &str) -> Option<Project> {
        self.projects.get(id).map(|m| lock(m).clone())
    }
}

fn lock(m: &Mutex<Project>) -> MutexGuard<'_, Project> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.body[key] = json!(value);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<wugs::Error> for ApiError {
    fn from(e: wugs::Error) -> Self {
        let status = match e {
            wugs::Error::UnknownLemma(_) | wugs::Error::UnknownNode(_) => StatusCode::NOT_FOUND,
            wugs::Error::Rejected(_) => StatusCode::CONFLICT,
            wugs::Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn role<'a>(svc: &'a Service, headers: &HeaderMap) -> ApiResult<&'a Role> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "missing bearer token"))?;
    svc.tokens
        .role(token.trim())
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unknown token"))
}

fn require_admin(svc: &Service, headers: &HeaderMap) -> ApiResult<()> {
    match role(svc, headers)? {
        Role::Admin => Ok(()),
        Role::Annotator(_) => Err(ApiError::new(StatusCode::FORBIDDEN, "admin token required")),
    }
}

fn require_annotator(svc: &Service, headers: &HeaderMap, annotator: &str) -> ApiResult<()> {
    match role(svc, headers)? {
        Role::Annotator(name) if name == annotator => Ok(()),
        _ => Err(ApiError::new(
            StatusCode::FORBIDDEN,
            format!("token does not belong to `{annotator}`"),
        )),
    }
}

fn project<'a>(svc: &'a Service, id: &str) -> ApiResult<&'a Mutex<Project>> {
    svc.projects
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown project `{id}`")))
}

/// One side of a pair as shown to an annotator: no id, period or date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ItemView {
    Usage {
        context: String,
        target_start: usize,
        target_end: usize,
    },
    Sense {
        definition: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLabel {
    pub score: u8,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTask {
    pub task_id: String,
    pub lemma: String,
    pub first: ItemView,
    pub second: ItemView,
    pub scale: Vec<ScaleLabel>,
}

fn task_id(round: u32, lemma: &str, pair: &Pair, annotator: &str) -> String {
    let h = seed::derive(
        seed::key(lemma),
        &[
            seed::key(pair.first()),
            seed::key(pair.second()),
            seed::key(annotator),
        ],
    );
    format!("{round}-{h:016x}")
}

fn item_view(project: &Project, id: &str) -> ApiResult<ItemView> {
    if let Some(u) = project.usage(id) {
        return Ok(ItemView::Usage {
            context: u.context.clone(),
            target_start: u.target_span.0,
            target_end: u.target_span.1,
        });
    }
    project
        .sense(id)
        .map(|s| ItemView::Sense {
            definition: s.definition.clone(),
        })
        .ok_or_else(|| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("node `{id}` vanished")))
}

pub fn pair_task(project: &Project, lemma: &str, pair: &Pair, annotator: &str) -> ApiResult<PairTask> {
    let id = task_id(project.round, lemma, pair, annotator);
    let (mut a, mut b) = (
        item_view(project, pair.first())?,
        item_view(project, pair.second())?,
    );
    let flip = seed::derive(project.config.sampling.seed, &[seed::key(&id)]) & 1 == 1;
    if flip {
        std::mem::swap(&mut a, &mut b);
    }
    Ok(PairTask {
        task_id: id,
        lemma: lemma.to_owned(),
        first: a,
        second: b,
        scale: SCALE_LABELS
            .iter()
            .enumerate()
            .map(|(score, label)| ScaleLabel {
                score: score as u8,
                label: (*label).to_owned(),
            })
            .collect(),
    })
}

#[derive(Debug, Deserialize)]
pub struct NextTaskQuery {
    pub annotator: String,
}

async fn next_task(
    State(svc): State<Arc<Service>>,
    Path(p): Path<String>,
    Query(q): Query<NextTaskQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    require_annotator(&svc, &headers, &q.annotator)?;
    let project = lock(project(&svc, &p)?);
    if !project.annotators.contains(&q.annotator) {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("unknown annotator `{}`", q.annotator),
        ));
    }
    if project.round == 0 || project.lemmas.values().all(|l| l.batch.is_none()) {
        return Err(ApiError::new(StatusCode::CONFLICT, "no round is open"));
    }
    match project.open_tasks(&q.annotator).first() {
        Some((lemma, pair)) => Ok(Json(pair_task(&project, lemma, pair, &q.annotator)?).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Submission {
    pub annotator: String,
    pub task_id: String,
    pub score: i64,
    #[serde(default)]
    pub comment: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub log_length: usize,
}

async fn submit(
    State(svc): State<Arc<Service>>,
    Path(p): Path<String>,
    headers: HeaderMap,
    Json(sub): Json<Submission>,
) -> ApiResult<Json<Ack>> {
    require_annotator(&svc, &headers, &sub.annotator)?;
    if !(0..=4).contains(&sub.score) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("score {} is outside 0..=4", sub.score),
        ));
    }
    let mut project = lock(project(&svc, &p)?);
    let task = project
        .open_tasks(&sub.annotator)
        .into_iter()
        .find(|(lemma, pair)| task_id(project.round, lemma, pair, &sub.annotator) == sub.task_id);
    let Some((_, pair)) = task else {
        let done = project.judgments().iter().any(|j| {
            j.annotator == sub.annotator
                && j.round == project.round
                && project
                    .lemma_of(j.pair.first())
                    .is_some_and(|l| task_id(project.round, l, &j.pair, &sub.annotator) == sub.task_id)
        });
        return Err(if done {
            ApiError::new(StatusCode::CONFLICT, "task already judged")
        } else {
            ApiError::new(StatusCode::NOT_FOUND, format!("no open task `{}`", sub.task_id))
        });
    };
    let mut next = project.clone();
    let report = next.append_judgments(&[NewJudgment {
        identifier1: pair.first().to_owned(),
        identifier2: pair.second().to_owned(),
        annotator: sub.annotator.clone(),
        score: sub.score,
        comment: sub.comment.clone(),
        round: None,
    }]);
    if let Some(r) = report.rejected.first() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, r.reason.clone()));
    }
    svc.persistence.append_judgments(&next, &report.accepted)?;
    *project = next;
    Ok(Json(Ack {
        task_id: sub.task_id,
        log_length: project.judgments().len(),
    }))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AdvanceRequest {
    /// Give up the remaining open tasks instead of refusing to advance.
    #[serde(default)]
    pub expire_open: bool,
}

async fn advance(
    State(svc): State<Arc<Service>>,
    Path(p): Path<String>,
    headers: HeaderMap,
    body: Option<Json<AdvanceRequest>>,
) -> ApiResult<Json<RoundReport>> {
    require_admin(&svc, &headers)?;
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let mut project = lock(project(&svc, &p)?);
    let mut base = project.clone();
    if req.expire_open {
        base.expire_open_tasks();
    }
    let open = base.open_task_count();
    if open > 0 {
        return Err(
            ApiError::new(StatusCode::CONFLICT, format!("{open} tasks are still open"))
                .with("open_tasks", open),
        );
    }
    let (next, report) = base.advance_round()?;
    svc.persistence.save_state(&next)?;
    *project = next;
    log::info!("project {p}: round {} opened", report.round);
    Ok(Json(report))
}

async fn graph(
    State(svc): State<Arc<Service>>,
    Path((p, lemma)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<wugs::store::GraphExport>> {
    require_admin(&svc, &headers)?;
    let project = lock(project(&svc, &p)?);
    Ok(Json(project.export_graph(&lemma)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaStats {
    pub complete: bool,
    pub clusters: Option<usize>,
    pub loss: Option<f64>,
    pub normalized_loss: Option<f64>,
    pub conflicts: Option<usize>,
    pub removed_nodes: usize,
    pub flag: Option<String>,
    pub judgments: usize,
    pub change: Option<ChangeScores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub round: u32,
    pub judgments: usize,
    pub open_tasks: usize,
    pub agreement: AgreementReport,
    pub frequencies: JudgmentFrequencies,
    pub disagreement: DisagreementHistogram,
    pub lemmas: BTreeMap<String, LemmaStats>,
}

pub fn stats(project: &Project) -> wugs::Result<Stats> {
    let mut lemmas = BTreeMap::new();
    for (lemma, state) in &project.lemmas {
        let graph = project.graph(lemma)?;
        let clustering = state.clustering.as_ref();
        let (filtered, _) = graph.filter_zero_nodes();
        let change = match clustering {
            Some(c) if filtered.periods().len() >= 2 => {
                change_scores(&filtered, c, project.config.change_k, project.config.change_n)?
            }
            _ => None,
        };
        lemmas.insert(
            lemma.clone(),
            LemmaStats {
                complete: state.complete,
                clusters: clustering.map(|c| c.cluster_count()),
                loss: clustering.map(|c| c.loss()),
                normalized_loss: clustering.map(|c| c.normalized_loss()),
                conflicts: clustering.map(|c| conflicts(&filtered, c).len()),
                removed_nodes: state.removed.len(),
                flag: state.flag.clone(),
                judgments: graph.judgments().count(),
                change,
            },
        );
    }
    Ok(Stats {
        round: project.round,
        judgments: project.judgments().len(),
        open_tasks: project.open_task_count(),
        agreement: agreement_report(project.judgments(), None),
        frequencies: judgment_frequencies(project.judgments()),
        disagreement: disagreement_histogram(project.judgments()),
        lemmas,
    })
}

async fn stats_handler(
    State(svc): State<Arc<Service>>,
    Path(p): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Stats>> {
    require_admin(&svc, &headers)?;
    let snapshot = lock(project(&svc, &p)?).clone();
    Ok(Json(stats(&snapshot)?))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/projects/{p}/tasks/next", get(next_task))
        .route("/projects/{p}/judgments", post(submit))
        .route("/projects/{p}/rounds/advance", post(advance))
        .route("/projects/{p}/lemmas/{l}/graph", get(graph))
        .route("/projects/{p}/stats", get(stats_handler))
        .with_state(service)
}

/// Serves until ctrl-c.
pub async fn serve(service: Arc<Service>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
