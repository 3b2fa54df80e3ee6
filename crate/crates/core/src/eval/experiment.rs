use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metrics, search, EvalError, MetricsReport, SearchResult, SearchSpace, Split};
use crate::features::{EmbeddingTable, NgramVocab};
use crate::models::{BundleConfig, Family, LinearModel, ModelBundle, Strategy, TrainConfig, ARGUMENT};
use crate::taxonomy::{ClaimType, Stance, Taxonomy};

/// Label of the macro-average row in reports.
pub const MACRO_ROW: &str = "Macro-Ave";

/// Sentences with their weak labels, aligned by position.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub ids: Vec<u64>,
    pub tokens: Vec<Vec<String>>,
    pub labels: Vec<ClaimType>,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Argument vs. Neutral with Neutral downsampled in training.
    #[serde(rename = "claim-id-balanced")]
    ClaimIdBalanced,
    #[serde(rename = "claim-id-imbalanced")]
    ClaimIdImbalanced,
    /// Support vs. Opposition over argumentative sentences.
    #[serde(rename = "stance")]
    Stance,
    /// The 16 claim types over argumentative sentences.
    #[serde(rename = "claim-neutral")]
    ClaimNeutral,
    /// Claim types within each stance, one section per stance.
    #[serde(rename = "supp-v-opp")]
    SuppVOpp,
    /// All 17 labels over every sentence.
    #[serde(rename = "claim+neutral")]
    ClaimPlusNeutral,
    /// All 17 labels with sub-model probabilities as extra features.
    #[serde(rename = "claim+ensemble")]
    ClaimPlusEnsemble,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::ClaimIdBalanced,
        Task::ClaimIdImbalanced,
        Task::Stance,
        Task::ClaimNeutral,
        Task::SuppVOpp,
        Task::ClaimPlusNeutral,
        Task::ClaimPlusEnsemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::ClaimIdBalanced => "claim-id-balanced",
            Task::ClaimIdImbalanced => "claim-id-imbalanced",
            Task::Stance => "stance",
            Task::ClaimNeutral => "claim-neutral",
            Task::SuppVOpp => "supp-v-opp",
            Task::ClaimPlusNeutral => "claim+neutral",
            Task::ClaimPlusEnsemble => "claim+ensemble",
        }
    }

    pub fn supports(self, strategy: Strategy, family: Family) -> bool {
        match self {
            Task::ClaimPlusNeutral => strategy != Strategy::Ensemble,
            Task::ClaimPlusEnsemble => strategy == Strategy::Ensemble && family == Family::LogReg,
            _ => strategy == Strategy::Flat,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| EvalError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub bundle: BundleConfig,
    pub search: SearchSpace,
    /// Seeds Neutral downsampling for the balanced task.
    pub seed: u64,
}

/// One cell group of the result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: Task,
    pub strategy: Strategy,
    pub family: Family,
    pub section: String,
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn macro_f1(&self, task: Task, strategy: Strategy, family: Family, section: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.task == task && r.strategy == strategy && r.family == family && r.section == section && r.class == MACRO_ROW)
            .map(|r| r.f1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json()).map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })
    }
}

#[derive(Debug, Clone)]
pub struct SectionOutcome {
    pub section: String,
    pub classes: Vec<String>,
    pub metrics: MetricsReport,
    pub search: SearchResult,
    pub bundle: ModelBundle,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub task: Task,
    pub strategy: Strategy,
    pub family: Family,
    pub sections: Vec<SectionOutcome>,
}

impl ExperimentOutcome {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for s in &self.sections {
            let row = |class: &str, precision, recall, f1| ReportRow {
                task: self.task,
                strategy: self.strategy,
                family: self.family,
                section: s.section.clone(),
                class: class.to_string(),
                precision,
                recall,
                f1,
            };
            for c in &s.metrics.per_class {
                rows.push(row(&c.class, c.precision, c.recall, c.f1));
            }
            rows.push(row(MACRO_ROW, s.metrics.macro_precision, s.metrics.macro_recall, s.metrics.macro_f1));
        }
        rows
    }
}

struct Section {
    name: String,
    /// Rows eligible for this section.
    keep: Box<dyn Fn(ClaimType) -> bool + Send + Sync>,
    /// Label the model predicts.
    target: Box<dyn Fn(ClaimType) -> String + Send + Sync>,
    classes: Vec<String>,
}

fn claim_names<I: IntoIterator<Item = ClaimType>>(claims: I) -> Vec<String> {
    claims.into_iter().map(|c| c.name().to_string()).collect()
}

fn sections(task: Task, taxonomy: &Taxonomy) -> Vec<Section> {
    let is_arg = |c: ClaimType| c.is_argument();
    let claim_name = |c: ClaimType| c.name().to_string();
    match task {
        Task::ClaimIdBalanced | Task::ClaimIdImbalanced => vec![Section {
            name: "all".into(),
            keep: Box::new(|_| true),
            target: Box::new(|c| if c.is_argument() { ARGUMENT } else { "Neutral" }.to_string()),
            classes: vec![ARGUMENT.to_string(), "Neutral".to_string()],
        }],
        Task::Stance => {
            let t = taxonomy.clone();
            vec![Section {
                name: "all".into(),
                keep: Box::new(is_arg),
                target: Box::new(move |c| t.stance_of(c).name().to_string()),
                classes: vec![Stance::Opposition.name().to_string(), Stance::Support.name().to_string()],
            }]
        }
        Task::ClaimNeutral => vec![Section {
            name: "all".into(),
            keep: Box::new(is_arg),
            target: Box::new(claim_name),
            classes: claim_names(ClaimType::arguments()),
        }],
        Task::SuppVOpp => [Stance::Support, Stance::Opposition]
            .into_iter()
            .map(|stance| {
                let t = taxonomy.clone();
                Section {
                    name: stance.name().to_lowercase(),
                    keep: Box::new(move |c| c.is_argument() && t.stance_of(c) == stance),
                    target: Box::new(claim_name),
                    classes: claim_names(taxonomy.members(stance).unwrap_or_default()),
                }
            })
            .collect(),
        Task::ClaimPlusNeutral | Task::ClaimPlusEnsemble => vec![Section {
            name: "all".into(),
            keep: Box::new(|_| true),
            target: Box::new(claim_name),
            classes: claim_names(ClaimType::ALL),
        }],
    }
}

fn with_train_config(base: &BundleConfig, family: Family, t: &TrainConfig) -> BundleConfig {
    let mut cfg = base.clone();
    match family {
        Family::LogReg => cfg.linear = t.clone(),
        Family::FastText => cfg.fasttext.train = t.clone(),
    }
    cfg
}

/// Trains on the train split, selects hyperparameters by dev macro-F1 and
/// reports test metrics for every section of the task.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    corpus: &LabeledCorpus,
    split: &Split,
    task: Task,
    strategy: Strategy,
    family: Family,
    taxonomy: &Taxonomy,
    embedding: Option<&EmbeddingTable>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome, EvalError> {
    if !task.supports(strategy, family) {
        return Err(EvalError::Mismatch { task, strategy, family });
    }
    let mut outcomes = Vec::new();
    for section in sections(task, taxonomy) {
        let pick = |rows: &[usize]| -> Vec<usize> { rows.iter().copied().filter(|&i| (section.keep)(corpus.labels[i])).collect() };
        let mut train = pick(&split.train);
        let dev = pick(&split.dev);
        let test = pick(&split.test);
        if task == Task::ClaimIdBalanced {
            train = downsample_neutral(&train, &corpus.labels, cfg.seed);
        }
        let fit = |t: &TrainConfig| -> Result<ModelBundle, EvalError> {
            let bcfg = with_train_config(&cfg.bundle, family, t);
            let tokens: Vec<Vec<String>> = train.iter().map(|&i| corpus.tokens[i].clone()).collect();
            let bundle = if strategy == Strategy::Flat {
                let y: Vec<String> = train.iter().map(|&i| (section.target)(corpus.labels[i])).collect();
                ModelBundle::train_flat(family, &tokens, &y, taxonomy, embedding, &bcfg)?
            } else {
                let y: Vec<ClaimType> = train.iter().map(|&i| corpus.labels[i]).collect();
                ModelBundle::train(strategy, family, &tokens, &y, taxonomy, embedding, &bcfg)?
            };
            Ok(bundle)
        };
        let evaluate = |bundle: &ModelBundle, rows: &[usize]| section_metrics(corpus, rows, &section, bundle);
        let base = match family {
            Family::LogReg => &cfg.bundle.linear,
            Family::FastText => &cfg.bundle.fasttext.train,
        };
        let result = search(&cfg.search, base, |t| {
            let bundle = fit(t).map_err(|e| e.to_string())?;
            evaluate(&bundle, &dev).map(|m| m.macro_f1).map_err(|e| e.to_string())
        })?;
        let bundle = fit(&result.best)?;
        let m = evaluate(&bundle, &test)?;
        outcomes.push(SectionOutcome {
            section: section.name.clone(),
            classes: section.classes.clone(),
            metrics: m,
            search: result,
            bundle,
        });
    }
    Ok(ExperimentOutcome { task, strategy, family, sections: outcomes })
}

fn section_metrics(corpus: &LabeledCorpus, rows: &[usize], section: &Section, bundle: &ModelBundle) -> Result<MetricsReport, EvalError> {
    let predicted: Vec<String> = rows
        .par_iter()
        .map(|&i| bundle.predict(&corpus.tokens[i]).map(|p| p.label))
        .collect::<Result<_, _>>()?;
    let gold: Vec<String> = rows.iter().map(|&i| (section.target)(corpus.labels[i])).collect();
    metrics(&gold, &predicted, &section.classes)
}

/// Report name of an experiment cell, e.g. `stance-flat-log_reg`.
pub fn report_name(task: Task, strategy: Strategy, family: Family) -> String {
    let snake = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
    format!(
        "{}-{}-{}",
        task.name(),
        snake(serde_json::to_value(strategy).expect("strategy serializes")),
        snake(serde_json::to_value(family).expect("family serializes"))
    )
}

/// Bundle names of an experiment cell, one per section. Single-section tasks
/// share the report name.
pub fn model_names(task: Task, strategy: Strategy, family: Family, taxonomy: &Taxonomy) -> Vec<String> {
    let stem = report_name(task, strategy, family);
    let sections = sections(task, taxonomy);
    if sections.len() == 1 {
        return vec![stem];
    }
    sections.iter().map(|s| format!("{stem}-{}", s.name)).collect()
}

/// Test-split metrics of already trained bundles, given one bundle per
/// section of the task in section order.
pub fn evaluate_bundles(
    corpus: &LabeledCorpus,
    split: &Split,
    task: Task,
    taxonomy: &Taxonomy,
    bundles: &[ModelBundle],
) -> Result<Report, EvalError> {
    let sections = sections(task, taxonomy);
    if bundles.len() != sections.len() {
        return Err(EvalError::SectionCount { task, expected: sections.len(), got: bundles.len() });
    }
    let mut rows = Vec::new();
    for (section, bundle) in sections.iter().zip(bundles) {
        if !task.supports(bundle.strategy, bundle.family) {
            return Err(EvalError::Mismatch { task, strategy: bundle.strategy, family: bundle.family });
        }
        let test: Vec<usize> = split.test.iter().copied().filter(|&i| (section.keep)(corpus.labels[i])).collect();
        let m = section_metrics(corpus, &test, section, bundle)?;
        let row = |class: &str, precision, recall, f1| ReportRow {
            task,
            strategy: bundle.strategy,
            family: bundle.family,
            section: section.name.clone(),
            class: class.to_string(),
            precision,
            recall,
            f1,
        };
        for c in &m.per_class {
            rows.push(row(&c.class, c.precision, c.recall, c.f1));
        }
        rows.push(row(MACRO_ROW, m.macro_precision, m.macro_recall, m.macro_f1));
    }
    Ok(Report { rows })
}

/// Keeps every argumentative row and as many Neutral rows, drawn uniformly.
fn downsample_neutral(rows: &[usize], labels: &[ClaimType], seed: u64) -> Vec<usize> {
    let (mut neutral, args): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| !labels[i].is_argument());
    if neutral.len() > args.len() {
        neutral.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        neutral.truncate(args.len());
    }
    let mut out = args;
    out.extend(neutral);
    out.sort_unstable();
    out
}

/// The `k` n-grams with the largest weight for `class`, ties broken
/// lexicographically. Dense columns are skipped.
pub fn top_ngrams(model: &LinearModel, vocab: &NgramVocab, class: &str, k: usize) -> Vec<(String, f64)> {
    let Some(c) = model.classes.iter().position(|x| x == class) else {
        return Vec::new();
    };
    let mut scored: Vec<(String, f64)> = vocab
        .iter()
        .filter(|(i, _, _)| (*i as usize) < model.layout.sparse_width)
        .map(|(i, g, _)| (g.to_string(), model.weight(c, i as usize)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}
