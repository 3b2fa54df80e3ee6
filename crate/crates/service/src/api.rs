use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use claimgram_core::corpus::Sentence;
use claimgram_core::eval::{model_names, report_name, run_experiment, stratified_split, write_trial_log, LabeledCorpus, Report, Task};
use claimgram_core::features::pool_embeddings;
use claimgram_core::labeler::{cluster_candidates, LabelRecord, Lexicon};
use claimgram_core::models::{Family, Strategy};
use claimgram_core::taxonomy::{ClaimType, LabelCounts};

use crate::error::ApiError;
use crate::state::{AppState, TrainingSummary, VersionSummary};

const MAX_PHRASE_CHARS: usize = 200;
const CANDIDATE_PHRASES: usize = 5;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sentences", get(sentences))
        .route("/lexicons", get(lexicons))
        .route("/lexicons/{name}/entries", post(add_entry).delete(remove_entry))
        .route("/grammar", get(grammar).put(put_grammar))
        .route("/versions", get(versions))
        .route("/versions/{version}", get(version))
        .route("/relabel", post(relabel))
        .route("/clusters", get(clusters))
        .route("/comments/{id}", get(comment))
        .route("/jobs/{id}", get(job))
        .route("/metrics/latest", get(metrics_latest))
        .route("/train", post(train))
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

fn parse_num<T: std::str::FromStr>(q: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ApiError::BadRequest(format!("{key} must be a non-negative integer, got {v:?}"))),
    }
}

fn parse_label(s: &str) -> Result<ClaimType, ApiError> {
    s.parse().map_err(|_| {
        let allowed: Vec<&str> = ClaimType::ALL.iter().map(|c| c.name()).collect();
        ApiError::BadRequest(format!("unknown label {s:?}; expected one of {}", allowed.join(", ")))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sentence_id: u64,
    pub comment_id: String,
    pub docket_id: Option<String>,
    pub index_in_comment: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: ClaimType,
    pub rule_id: Option<usize>,
    pub span: Option<(usize, usize)>,
}

fn record(state: &AppState, s: &Sentence, label: Option<&LabelRecord>) -> SentenceRecord {
    SentenceRecord {
        sentence_id: s.sentence_id,
        comment_id: s.comment_id.clone(),
        docket_id: state.0.corpus.docket_of.get(&s.comment_id).cloned(),
        index_in_comment: s.index_in_comment,
        text: s.text.clone(),
        tokens: s.tokens.clone(),
        label: label.map_or(ClaimType::Neutral, |l| l.claim),
        rule_id: label.and_then(|l| l.rule_id),
        span: label.and_then(|l| l.span),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePage {
    pub label_version: u64,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub items: Vec<SentenceRecord>,
}

/// `?label=&docket=&page=&page_size=`; pages are 0-based.
async fn sentences(
    State(state): State<AppState>,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Json<SentencePage>, ApiError> {
    let label = q.get("label").map(|l| parse_label(l)).transpose()?;
    let docket = q.get("docket");
    let page = parse_num(&q, "page", 0usize)?;
    let page_size = parse_num(&q, "page_size", state.0.cfg.default_page_size)?;
    if page_size == 0 || page_size > state.0.cfg.max_page_size {
        return Err(ApiError::BadRequest(format!("page_size must be in 1..={}", state.0.cfg.max_page_size)));
    }
    let snap = state.snapshot();
    let matching: Vec<&Sentence> = state
        .0
        .corpus
        .sentences
        .iter()
        .filter(|s| label.is_none_or(|l| snap.labels.get(&s.sentence_id).map_or(ClaimType::Neutral, |r| r.claim) == l))
        .filter(|s| docket.is_none_or(|d| state.0.corpus.docket_of.get(&s.comment_id) == Some(d)))
        .collect();
    let items = matching
        .iter()
        .skip(page.saturating_mul(page_size))
        .take(page_size)
        .map(|s| record(&state, s, snap.labels.get(&s.sentence_id)))
        .collect();
    Ok(Json(SentencePage { label_version: snap.version, page, page_size, total: matching.len(), items }))
}

async fn lexicons(State(state): State<AppState>) -> Json<Value> {
    let latest = state.latest_version().meta;
    Json(json!({ "version": latest.version, "lexicons": latest.lexicons }))
}

async fn grammar(State(state): State<AppState>) -> Json<Value> {
    let latest = state.latest_version().meta;
    Json(json!({ "version": latest.version, "grammar": latest.grammar }))
}

#[derive(Deserialize)]
struct EntryRequest {
    phrase: String,
    #[serde(default)]
    note: Option<String>,
}

fn checked_phrase(phrase: &str) -> Result<String, ApiError> {
    if phrase.chars().count() > MAX_PHRASE_CHARS {
        return Err(ApiError::BadRequest(format!("phrase longer than {MAX_PHRASE_CHARS} characters")));
    }
    Lexicon::normalize_phrase(phrase).map_err(|e| ApiError::BadRequest(e.to_string()))
}

fn created(v: VersionSummary) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

async fn add_entry(State(state): State<AppState>, Path(name): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: EntryRequest = parse_body(&body)?;
    let phrase = checked_phrase(&req.phrase)?;
    let v = state.create_version(|_, lexicons| {
        let lex = lexicons.get_mut(&name).ok_or_else(|| ApiError::NotFound(format!("no lexicon named {name:?}")))?;
        if !lex.insert(&phrase).map_err(|e| ApiError::BadRequest(e.to_string()))? {
            return Err(ApiError::Conflict(format!("{phrase:?} is already in {name}")));
        }
        Ok(req.note.unwrap_or_else(|| format!("add {phrase:?} to {name}")))
    })?;
    Ok(created(v.summary()))
}

async fn remove_entry(State(state): State<AppState>, Path(name): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: EntryRequest = parse_body(&body)?;
    let phrase = checked_phrase(&req.phrase)?;
    let v = state.create_version(|_, lexicons| {
        let lex = lexicons.get_mut(&name).ok_or_else(|| ApiError::NotFound(format!("no lexicon named {name:?}")))?;
        if !lex.remove(&phrase).map_err(|e| ApiError::BadRequest(e.to_string()))? {
            return Err(ApiError::NotFound(format!("{phrase:?} is not in {name}")));
        }
        Ok(req.note.unwrap_or_else(|| format!("remove {phrase:?} from {name}")))
    })?;
    Ok(created(v.summary()))
}

#[derive(Deserialize)]
struct GrammarRequest {
    grammar: String,
    #[serde(default)]
    note: Option<String>,
}

async fn put_grammar(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: GrammarRequest = parse_body(&body)?;
    let v = state.create_version(|grammar, _| {
        *grammar = req.grammar;
        Ok(req.note.unwrap_or_else(|| "edit grammar".into()))
    })?;
    Ok(created(v.summary()))
}

async fn versions(State(state): State<AppState>) -> Json<Vec<VersionSummary>> {
    Json(state.versions())
}

/// Serves the stored bytes so a version reads identically forever.
async fn version(State(state): State<AppState>, Path(v): Path<String>) -> Result<Response, ApiError> {
    let n: u64 = v.parse().map_err(|_| ApiError::BadRequest(format!("invalid version {v:?}")))?;
    let stored = state.version(n).ok_or_else(|| ApiError::NotFound(format!("no grammar version {n}")))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], stored.json).into_response())
}

#[derive(Deserialize)]
struct RelabelRequest {
    version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangedLabel {
    pub sentence_id: u64,
    pub before: ClaimType,
    pub after: ClaimType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelResponse {
    pub job_id: u64,
    pub version: u64,
    pub changed: Vec<ChangedLabel>,
    pub deltas: BTreeMap<ClaimType, i64>,
    pub before: LabelCounts,
    pub after: LabelCounts,
}

async fn relabel(State(state): State<AppState>, body: Bytes) -> Result<Json<RelabelResponse>, ApiError> {
    let req: RelabelRequest = parse_body(&body)?;
    let stored = state.version(req.version).ok_or_else(|| ApiError::NotFound(format!("no grammar version {}", req.version)))?;
    let slot = state.begin_job()?;
    let job_id = state.new_job("relabel");
    let worker = state.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let _slot = slot;
        worker.relabel(&stored.meta)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))
    .and_then(|r| r);
    let diff = match outcome {
        Ok(d) => d,
        Err(e) => {
            state.finish_job(job_id, Err(e.to_string()));
            return Err(e);
        }
    };
    let response = RelabelResponse {
        job_id,
        version: req.version,
        changed: diff.changed.iter().map(|&(sentence_id, before, after)| ChangedLabel { sentence_id, before, after }).collect(),
        deltas: diff.deltas(),
        before: diff.before,
        after: diff.after,
    };
    state.finish_job(job_id, Ok(json!({ "version": req.version, "changed": response.changed.len() })));
    Ok(Json(response))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub id: usize,
    pub size: usize,
    pub dominant_label: ClaimType,
    pub exemplars: Vec<SentenceRecord>,
    /// Bigrams shared by the most members, ties in lexicographic order.
    pub candidate_phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResponse {
    pub k: usize,
    pub pool: String,
    pub pool_size: usize,
    /// "sif" with pretrained vectors, otherwise "hashed".
    pub embedding: String,
    pub clusters: Vec<ClusterView>,
}

/// `?k=&pool=&exemplars=`; `pool` is a label name or `all` (default Neutral).
async fn clusters(
    State(state): State<AppState>,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Json<ClusterResponse>, ApiError> {
    let k = parse_num(&q, "k", 8usize)?;
    let exemplars = parse_num(&q, "exemplars", 5usize)?;
    let pool = q.get("pool").cloned().unwrap_or_else(|| ClaimType::Neutral.name().to_string());
    let filter = if pool == "all" { None } else { Some(parse_label(&pool)?) };
    let snap = state.snapshot();
    let label_of = |s: &Sentence| snap.labels.get(&s.sentence_id).map_or(ClaimType::Neutral, |r| r.claim);
    let members: Vec<Sentence> = state
        .0
        .corpus
        .sentences
        .iter()
        .filter(|s| filter.is_none_or(|c| label_of(s) == c))
        .cloned()
        .collect();
    if members.is_empty() {
        return Err(ApiError::BadRequest(format!("pool {pool:?} is empty")));
    }
    if k == 0 || k > members.len() {
        return Err(ApiError::BadRequest(format!("k must be in 1..={} for pool {pool:?}", members.len())));
    }
    let worker = state.clone();
    let (clustering, kind) = tokio::task::spawn_blocking(move || {
        let tokens: Vec<Vec<String>> = members.iter().map(|s| s.tokens.clone()).collect();
        let table = worker.0.embedding.as_ref();
        let vectors = pool_embeddings(&tokens, table, worker.0.cfg.seed);
        let kind = if table.is_some() { "sif" } else { "hashed" };
        let ids: Vec<u64> = members.iter().map(|s| s.sentence_id).collect();
        cluster_candidates(&ids, &vectors, k, exemplars, worker.0.cfg.seed).map(|c| (c, kind))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::BadRequest(e.to_string()))?;

    let by_id: BTreeMap<u64, &Sentence> = state.0.corpus.sentences.iter().map(|s| (s.sentence_id, s)).collect();
    let views = clustering
        .clusters
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let counts = LabelCounts::from_labels(
                c.members.iter().map(|id| snap.labels.get(id).map_or(&ClaimType::Neutral, |r| &r.claim)),
            );
            // ties go to the earlier class in canonical order
            let dominant = ClaimType::ALL.iter().copied().max_by_key(|&l| (counts.get(l), std::cmp::Reverse(l))).unwrap_or(ClaimType::Neutral);
            ClusterView {
                id,
                size: c.members.len(),
                dominant_label: dominant,
                exemplars: c.exemplars.iter().map(|id| record(&state, by_id[id], snap.labels.get(id))).collect(),
                candidate_phrases: shared_bigrams(c.members.iter().map(|id| &by_id[id].tokens)),
            }
        })
        .collect();
    let pool_size = clustering.assignment.len();
    Ok(Json(ClusterResponse { k, pool, pool_size, embedding: kind.into(), clusters: views }))
}

fn shared_bigrams<'a>(members: impl Iterator<Item = &'a Vec<String>>) -> Vec<String> {
    let mut support: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in members {
        let grams: std::collections::BTreeSet<String> = tokens.windows(2).map(|w| w.join(" ")).collect();
        for g in grams {
            *support.entry(g).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = support.into_iter().filter(|&(_, n)| n >= 2).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(CANDIDATE_PHRASES).map(|(g, _)| g).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentContext {
    pub comment_id: String,
    pub docket_id: Option<String>,
    /// Every retained sentence of the comment, in comment order.
    pub sentences: Vec<SentenceRecord>,
}

async fn comment(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<CommentContext>, ApiError> {
    let snap = state.snapshot();
    let mut sentences: Vec<SentenceRecord> = state
        .0
        .corpus
        .sentences
        .iter()
        .filter(|s| s.comment_id == id)
        .map(|s| record(&state, s, snap.labels.get(&s.sentence_id)))
        .collect();
    if sentences.is_empty() {
        return Err(ApiError::NotFound(format!("no comment {id:?}")));
    }
    sentences.sort_by_key(|s| s.index_in_comment);
    Ok(Json(CommentContext { docket_id: state.0.corpus.docket_of.get(&id).cloned(), comment_id: id, sentences }))
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let n: u64 = id.parse().map_err(|_| ApiError::BadRequest(format!("invalid job id {id:?}")))?;
    state.job(n).map(|j| Json(j).into_response()).ok_or_else(|| ApiError::NotFound(format!("no job {n}")))
}

#[derive(Debug, Clone, Serialize)]
struct MetricsView {
    label_version: u64,
    total: usize,
    counts: LabelCounts,
    training: Option<TrainingSummary>,
}

async fn metrics_latest(State(state): State<AppState>) -> Json<Value> {
    let snap = state.snapshot();
    let counts = LabelCounts::from_labels(snap.labels.values().map(|r| &r.claim));
    let view = MetricsView {
        label_version: snap.version,
        total: counts.total(),
        counts,
        training: state.0.training.read().expect("training lock").clone(),
    };
    Json(serde_json::to_value(view).expect("metrics serialize"))
}

#[derive(Deserialize)]
struct TrainRequest {
    task: String,
    strategy: Strategy,
    #[serde(default = "default_family")]
    family: Family,
}

fn default_family() -> Family {
    Family::LogReg
}

async fn train(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: TrainRequest = parse_body(&body)?;
    let task: Task = req.task.parse().map_err(|e: claimgram_core::eval::EvalError| ApiError::BadRequest(e.to_string()))?;
    if !task.supports(req.strategy, req.family) {
        return Err(ApiError::BadRequest(format!(
            "task {task} does not support strategy {:?} with family {:?}",
            req.strategy, req.family
        )));
    }
    let slot = state.begin_job()?;
    let job_id = state.new_job("train");
    let worker = state.clone();
    tokio::spawn(async move {
        let inner = worker.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let _slot = slot;
            run_training(&inner, task, req.strategy, req.family)
        })
        .await
        .map_err(|e| e.to_string())
        .and_then(|r| r);
        worker.finish_job(job_id, outcome);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

fn run_training(state: &AppState, task: Task, strategy: Strategy, family: Family) -> Result<Value, String> {
    let snap = state.snapshot();
    let sentences = &state.0.corpus.sentences;
    let corpus = LabeledCorpus {
        ids: sentences.iter().map(|s| s.sentence_id).collect(),
        tokens: sentences.iter().map(|s| s.tokens.clone()).collect(),
        labels: sentences.iter().map(|s| snap.labels.get(&s.sentence_id).map_or(ClaimType::Neutral, |r| r.claim)).collect(),
    };
    let cfg = &state.0.cfg;
    let split = stratified_split(&corpus.labels, &cfg.split).map_err(|e| e.to_string())?;
    let outcome = run_experiment(
        &corpus,
        &split,
        task,
        strategy,
        family,
        &state.0.taxonomy,
        state.0.embedding.as_ref(),
        &cfg.experiment,
    )
    .map_err(|e| e.to_string())?;

    let ws = &state.0.ws;
    let stem = report_name(task, strategy, family);
    let mut macro_f1 = BTreeMap::new();
    for (s, name) in outcome.sections.iter().zip(model_names(task, strategy, family, &state.0.taxonomy)) {
        s.bundle.save(&ws.model(&name)).map_err(|e| e.to_string())?;
        write_trial_log(&ws.trial_log(&name), &s.search.trials).map_err(|e| e.to_string())?;
        macro_f1.insert(s.section.clone(), s.metrics.macro_f1);
    }
    let report = Report { rows: outcome.rows() };
    report.save(&ws.report(&stem)).map_err(|e| e.to_string())?;
    *state.0.training.write().expect("training lock") = Some(TrainingSummary { task, strategy, family, report });
    Ok(json!({ "label_version": snap.version, "report": stem, "macro_f1": macro_f1 }))
}
