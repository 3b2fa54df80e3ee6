use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use claimgram_core::corpus::{read_comments, read_sentences, Sentence};
use claimgram_core::eval::{ExperimentConfig, Report, SplitConfig, Task};
use claimgram_core::features::EmbeddingTable;
use claimgram_core::labeler::{
    label_corpus, read_labels, write_labels, CompiledGrammar, GrammarPack, LabelMap, Lexicon, Lexicons, Resolver,
    RuleGrammar,
};
use claimgram_core::models::{Family, Strategy};
use claimgram_core::taxonomy::Taxonomy;
use claimgram_core::Workspace;

use crate::error::{ApiError, ServiceError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_page_size: usize,
    pub default_page_size: usize,
    pub split: SplitConfig,
    pub experiment: ExperimentConfig,
    /// Seeds clustering and the hashed fallback embeddings.
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_page_size: 500,
            default_page_size: 50,
            split: SplitConfig::default(),
            experiment: ExperimentConfig::default(),
            seed: 0,
        }
    }
}

impl ServiceConfig {
    pub fn seeded(seed: u64) -> Self {
        let mut cfg = ServiceConfig { seed, ..ServiceConfig::default() };
        cfg.split.seed = seed;
        cfg.experiment.seed = seed;
        cfg.experiment.search.seed = seed;
        cfg.experiment.bundle.linear.seed = seed;
        cfg.experiment.bundle.fasttext.train.seed = seed;
        cfg
    }
}

/// An immutable grammar and lexicon snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarVersion {
    pub version: u64,
    pub grammar: String,
    pub lexicons: BTreeMap<String, Vec<String>>,
    pub note: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionSummary {
    pub version: u64,
    pub note: String,
    pub created_at: u64,
}

impl GrammarVersion {
    pub fn summary(&self) -> VersionSummary {
        VersionSummary { version: self.version, note: self.note.clone(), created_at: self.created_at }
    }

    pub fn lexicon_set(&self) -> Lexicons {
        self.lexicons
            .iter()
            .map(|(name, entries)| {
                let mut lex = Lexicon::new(name.clone());
                lex.entries = entries.iter().cloned().collect();
                (name.clone(), lex)
            })
            .collect()
    }

    pub fn compile(&self) -> Result<(RuleGrammar, CompiledGrammar), ApiError> {
        let rules = RuleGrammar::parse(&self.grammar).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let compiled = CompiledGrammar::compile(&rules, &self.lexicon_set()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        Ok((rules, compiled))
    }
}

fn lexicon_map(lexicons: &Lexicons) -> BTreeMap<String, Vec<String>> {
    lexicons.iter().map(|(k, v)| (k.clone(), v.entries.iter().cloned().collect())).collect()
}

/// A version together with the exact bytes served for it.
#[derive(Debug, Clone)]
pub(crate) struct StoredVersion {
    pub meta: GrammarVersion,
    pub json: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: u64,
    pub kind: String,
    pub status: JobStatus,
    pub created_at: u64,
    pub finished_at: Option<u64>,
    pub result: Option<Value>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingSummary {
    pub task: Task,
    pub strategy: Strategy,
    pub family: Family,
    pub report: Report,
}

/// Current labels and the version that produced them.
#[derive(Debug, Clone)]
pub(crate) struct LabelSnapshot {
    pub version: u64,
    pub labels: Arc<LabelMap>,
}

pub(crate) struct Corpus {
    pub sentences: Vec<Sentence>,
    pub docket_of: HashMap<String, String>,
}

pub(crate) struct Inner {
    pub ws: Workspace,
    pub cfg: ServiceConfig,
    pub corpus: Corpus,
    pub embedding: Option<EmbeddingTable>,
    pub taxonomy: Taxonomy,
    pub labels: RwLock<LabelSnapshot>,
    pub versions: RwLock<Vec<StoredVersion>>,
    pub jobs: Mutex<BTreeMap<u64, Job>>,
    pub next_job: AtomicU64,
    pub busy: AtomicBool,
    pub training: RwLock<Option<TrainingSummary>>,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

pub(crate) fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io { path: path.display().to_string(), source }
}

fn write_version(ws: &Workspace, v: &GrammarVersion) -> Result<String, std::io::Error> {
    let json = serde_json::to_string_pretty(v).expect("version serializes") + "\n";
    std::fs::create_dir_all(ws.versions_dir())?;
    std::fs::write(ws.version(v.version), &json)?;
    Ok(json)
}

/// Holds the single mutating-job slot until dropped.
pub(crate) struct JobSlot(AppState);

impl Drop for JobSlot {
    fn drop(&mut self) {
        self.0 .0.busy.store(false, Ordering::SeqCst);
    }
}

impl AppState {
    /// Loads the workspace corpus, grammar versions and labels. The first
    /// version is created from `grammar/` or the built-in seed pack, and the
    /// corpus is labeled with the newest version.
    pub fn open(ws: Workspace, cfg: ServiceConfig) -> Result<Self, ServiceError> {
        let sentences = read_sentences(&ws.sentences())?.records;
        let mut docket_of = HashMap::new();
        if ws.comments().exists() {
            for c in read_comments(&ws.comments())?.records {
                docket_of.insert(c.comment_id, c.docket_id);
            }
        }
        let embedding = if ws.vectors().exists() { Some(EmbeddingTable::load(&ws.vectors())?) } else { None };

        let mut versions = Vec::new();
        let dir = ws.versions_dir();
        if dir.is_dir() {
            let mut paths: Vec<_> = std::fs::read_dir(&dir)
                .map_err(io_err(&dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for path in paths {
                let json = std::fs::read_to_string(&path).map_err(io_err(&path))?;
                let meta: GrammarVersion =
                    serde_json::from_str(&json).map_err(|e| ServiceError::Invalid(format!("{}: {e}", path.display())))?;
                versions.push(StoredVersion { meta, json });
            }
        }
        versions.sort_by_key(|v| v.meta.version);
        if versions.is_empty() {
            let pack = if ws.grammar_dir().join("grammar.cfg").exists() {
                GrammarPack::load_dir(&ws.grammar_dir())?
            } else {
                GrammarPack::seed()
            };
            let meta = GrammarVersion {
                version: 1,
                grammar: pack.grammar.to_text(),
                lexicons: lexicon_map(&pack.lexicons),
                note: "initial".into(),
                created_at: now(),
            };
            let json = write_version(&ws, &meta).map_err(io_err(&ws.versions_dir()))?;
            versions.push(StoredVersion { meta, json });
        }

        let taxonomy = Taxonomy::default();
        let latest = versions.last().expect("at least one version").meta.clone();
        let (rules, compiled) = latest.compile().map_err(|e| ServiceError::Invalid(format!("version {}: {e}", latest.version)))?;
        let labels = label_corpus(&sentences, &compiled, &Resolver::new(taxonomy.clone(), rules.priorities()));
        let stale = !ws.labels().exists() || read_labels(&ws.labels())?.records.len() != labels.len()
            || read_labels(&ws.labels())?.records.iter().any(|r| labels.get(&r.sentence_id) != Some(r));
        if stale {
            write_labels(&ws.labels(), &labels)?;
        }

        Ok(AppState(Arc::new(Inner {
            ws,
            cfg,
            corpus: Corpus { sentences, docket_of },
            embedding,
            taxonomy,
            labels: RwLock::new(LabelSnapshot { version: latest.version, labels: Arc::new(labels) }),
            versions: RwLock::new(versions),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
            busy: AtomicBool::new(false),
            training: RwLock::new(None),
        })))
    }

    pub(crate) fn snapshot(&self) -> LabelSnapshot {
        self.0.labels.read().expect("labels lock").clone()
    }

    pub(crate) fn version(&self, v: u64) -> Option<StoredVersion> {
        self.0.versions.read().expect("versions lock").iter().find(|s| s.meta.version == v).cloned()
    }

    pub(crate) fn latest_version(&self) -> StoredVersion {
        self.0.versions.read().expect("versions lock").last().cloned().expect("at least one version")
    }

    pub(crate) fn versions(&self) -> Vec<VersionSummary> {
        self.0.versions.read().expect("versions lock").iter().map(|v| v.meta.summary()).collect()
    }

    /// Derives a new version from the newest one. `edit` returns the note.
    pub(crate) fn create_version(
        &self,
        edit: impl FnOnce(&mut String, &mut Lexicons) -> Result<String, ApiError>,
    ) -> Result<GrammarVersion, ApiError> {
        let mut versions = self.0.versions.write().expect("versions lock");
        let base = &versions.last().expect("at least one version").meta;
        let mut grammar = base.grammar.clone();
        let mut lexicons = base.lexicon_set();
        let note = edit(&mut grammar, &mut lexicons)?;
        let meta = GrammarVersion {
            version: base.version + 1,
            grammar,
            lexicons: lexicon_map(&lexicons),
            note,
            created_at: now(),
        };
        meta.compile()?;
        let json = write_version(&self.0.ws, &meta).map_err(|e| ApiError::Internal(e.to_string()))?;
        versions.push(StoredVersion { meta: meta.clone(), json });
        Ok(meta)
    }

    /// Claims the mutating-job slot, or 409 when a job is in flight.
    pub(crate) fn begin_job(&self) -> Result<JobSlot, ApiError> {
        if self.0.busy.swap(true, Ordering::SeqCst) {
            return Err(ApiError::Conflict("another relabel or training job is running".into()));
        }
        Ok(JobSlot(self.clone()))
    }

    pub(crate) fn new_job(&self, kind: &str) -> u64 {
        let id = self.0.next_job.fetch_add(1, Ordering::SeqCst);
        let job = Job {
            id,
            kind: kind.to_string(),
            status: JobStatus::Running,
            created_at: now(),
            finished_at: None,
            result: None,
            error: None,
        };
        self.0.jobs.lock().expect("jobs lock").insert(id, job);
        id
    }

    pub(crate) fn finish_job(&self, id: u64, outcome: Result<Value, String>) {
        let mut jobs = self.0.jobs.lock().expect("jobs lock");
        if let Some(job) = jobs.get_mut(&id) {
            job.finished_at = Some(now());
            match outcome {
                Ok(v) => {
                    job.status = JobStatus::Succeeded;
                    job.result = Some(v);
                }
                Err(e) => {
                    job.status = JobStatus::Failed;
                    job.error = Some(e);
                }
            }
        }
    }

    pub(crate) fn job(&self, id: u64) -> Option<Job> {
        self.0.jobs.lock().expect("jobs lock").get(&id).cloned()
    }

    /// Labels the corpus under `version` and swaps the result in as one unit.
    pub(crate) fn relabel(&self, version: &GrammarVersion) -> Result<claimgram_core::RelabelDiff, ApiError> {
        let (rules, compiled) = version.compile()?;
        let resolver = Resolver::new(self.0.taxonomy.clone(), rules.priorities());
        let after = label_corpus(&self.0.corpus.sentences, &compiled, &resolver);
        let before = self.snapshot();
        let diff = claimgram_core::RelabelDiff::between(&before.labels, &after);
        write_labels(&self.0.ws.labels(), &after).map_err(|e| ApiError::Internal(e.to_string()))?;
        *self.0.labels.write().expect("labels lock") = LabelSnapshot { version: version.version, labels: Arc::new(after) };
        Ok(diff)
    }
}
