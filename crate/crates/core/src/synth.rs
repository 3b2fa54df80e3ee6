//! Seeded synthetic corpus with planted claim cues, and the full pipeline
//! over it: segment, dedup, label, split, experiment grid.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{dedup, segment_corpus, Comment, CorpusError, DedupConfig, Sentence};
use crate::eval::{
    run_experiment, stratified_split, EvalError, ExperimentConfig, ExperimentOutcome, LabeledCorpus, Report, Split,
    SplitConfig, Task,
};
use crate::features::{EmbeddingTable, FeatureError};
use crate::labeler::{label_corpus, CompiledGrammar, GrammarError, LabelMap, Lexicons, Resolver, RuleGrammar};
use crate::models::{Family, Strategy};
use crate::taxonomy::{ClaimType, Taxonomy};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid synthetic config: {0}")]
    Config(String),
}

/// The cue bigram planted in every sentence of a claim type.
pub const PLANTED_CUES: [(ClaimType, &str); 16] = [
    (ClaimType::ExplicitSupport, "please pass"),
    (ClaimType::LikelySupport, "economic benefit"),
    (ClaimType::ExplicitOpposition, "not pass"),
    (ClaimType::LikelyOpposition, "please reconsider"),
    (ClaimType::Burdensome, "time consuming"),
    (ClaimType::LacksFlexibility, "artificially inflated"),
    (ClaimType::NotSufficientTime, "more time"),
    (ClaimType::ConflictingInterests, "anti competitive"),
    (ClaimType::DisputedInformation, "unintended consequences"),
    (ClaimType::LegalChallenge, "to court"),
    (ClaimType::Overreach, "too far"),
    (ClaimType::RequestsClarification, "please change"),
    (ClaimType::LacksClarity, "ambiguous wording"),
    (ClaimType::SeeksExclusion, "grant exemptions"),
    (ClaimType::TooBroad, "overly broad"),
    (ClaimType::TooNarrow, "be expanded"),
];

pub fn planted_cue(claim: ClaimType) -> Option<&'static str> {
    PLANTED_CUES.iter().find(|(c, _)| *c == claim).map(|(_, cue)| *cue)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Distinct sentences generated, before duplicates are injected.
    pub sentences: usize,
    pub neutral_fraction: f64,
    /// Size of the filler vocabulary.
    pub fillers: usize,
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Chance that a Neutral sentence carries one cue word on its own.
    pub decoy_rate: f64,
    /// Chance that a comment repeats an earlier sentence, exactly or with
    /// different final punctuation.
    pub duplicate_rate: f64,
    pub max_sentences_per_comment: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 20_000,
            neutral_fraction: 0.85,
            fillers: 400,
            min_fillers: 5,
            max_fillers: 12,
            decoy_rate: 0.3,
            duplicate_rate: 0.05,
            max_sentences_per_comment: 6,
            embedding_dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub comments: Vec<Comment>,
    /// Intended claim per generated sentence text.
    pub planted: BTreeMap<String, ClaimType>,
    pub grammar: String,
    pub lexicons: Lexicons,
    pub embedding: EmbeddingTable,
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.neutral_fraction) {
            return bad("neutral_fraction must be in [0, 1)");
        }
        if self.min_fillers == 0 || self.min_fillers > self.max_fillers {
            return bad("filler range is empty");
        }
        if self.fillers < 2 || self.embedding_dim == 0 || self.max_sentences_per_comment == 0 {
            return bad("fillers, embedding_dim and max_sentences_per_comment must be positive");
        }
        if !(0.0..=1.0).contains(&self.decoy_rate) || !(0.0..=1.0).contains(&self.duplicate_rate) {
            return bad("rates must be in [0, 1]");
        }
        Ok(())
    }
}

/// Grammar with one claim rule per planted cue.
pub fn planted_grammar() -> String {
    let mut g = String::from("# one cue bigram per claim type\n");
    for (claim, cue) in PLANTED_CUES {
        g.push_str(&format!("claim {} -> \"{cue}\"\n", claim.symbol()));
    }
    g
}

fn filler_words(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let mut seen = std::collections::BTreeSet::new();
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let w: String = (0..3)
            .flat_map(|_| [*CONSONANTS.choose(rng).unwrap() as char, *VOWELS.choose(rng).unwrap() as char])
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn render(tokens: &[String], end: char) -> String {
    let mut text = tokens.join(" ");
    if let Some(first) = text.get(0..1) {
        let upper = first.to_uppercase();
        text.replace_range(0..1, &upper);
    }
    text.push(end);
    text
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fillers = filler_words(cfg.fillers, &mut rng);
    // Zipf-like filler frequencies
    let zipf = WeightedIndex::new((0..fillers.len()).map(|r| 1.0 / (r + 1) as f64)).expect("positive weights");
    let cue_words: Vec<&str> = PLANTED_CUES.iter().flat_map(|(_, cue)| cue.split(' ')).collect();

    let neutral = (cfg.sentences as f64 * cfg.neutral_fraction).round() as usize;
    let mut claims: Vec<ClaimType> = vec![ClaimType::Neutral; neutral];
    claims.extend((0..cfg.sentences - neutral).map(|i| PLANTED_CUES[i % PLANTED_CUES.len()].0));
    claims.shuffle(&mut rng);

    let mut planted = BTreeMap::new();
    let mut texts = Vec::with_capacity(claims.len());
    for &claim in &claims {
        loop {
            let len = rng.gen_range(cfg.min_fillers..=cfg.max_fillers);
            let mut tokens: Vec<String> = (0..len).map(|_| fillers[zipf.sample(&mut rng)].clone()).collect();
            match planted_cue(claim) {
                Some(cue) => {
                    let at = rng.gen_range(0..=tokens.len());
                    tokens.splice(at..at, cue.split(' ').map(String::from));
                }
                None if rng.gen_bool(cfg.decoy_rate) => {
                    let at = rng.gen_range(0..=tokens.len());
                    tokens.insert(at, cue_words.choose(&mut rng).unwrap().to_string());
                }
                None => {}
            }
            let text = render(&tokens, '.');
            if !planted.contains_key(&text) {
                planted.insert(text.clone(), claim);
                texts.push(text);
                break;
            }
        }
    }

    let mut comments = Vec::new();
    let mut next = 0;
    while next < texts.len() {
        let take = rng.gen_range(1..=cfg.max_sentences_per_comment).min(texts.len() - next);
        let mut parts: Vec<String> = texts[next..next + take].to_vec();
        if next > 0 && rng.gen_bool(cfg.duplicate_rate) {
            let earlier = &texts[rng.gen_range(0..next)];
            let copy = if rng.gen_bool(0.5) {
                earlier.clone()
            } else {
                format!("{}!", &earlier[..earlier.len() - 1])
            };
            parts.push(copy);
        }
        comments.push(Comment {
            comment_id: format!("SYN-{:06}", comments.len()),
            docket_id: format!("SYN-DOCKET-{}", comments.len() % 7),
            agency: "SYN".into(),
            text: parts.join(" "),
            received_at: None,
        });
        next += take;
    }

    let common: Vec<f64> = (0..cfg.embedding_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut words: Vec<String> = fillers;
    words.extend(cue_words.iter().map(|w| w.to_string()));
    let entries = words
        .into_iter()
        .map(|w| {
            let v: Vec<f64> = common.iter().map(|c| 2.0 * c + rng.gen_range(-1.0..1.0)).collect();
            (w, v)
        })
        .collect();
    Ok(SynthData {
        comments,
        planted,
        grammar: planted_grammar(),
        lexicons: Lexicons::new(),
        embedding: EmbeddingTable::new(entries)?,
    })
}

/// Every (task, strategy, family) cell of the experiment grid. The ensemble
/// is only defined over logistic regression.
pub fn experiment_grid() -> Vec<(Task, Strategy, Family)> {
    let mut grid = Vec::new();
    for task in Task::ALL {
        for family in [Family::LogReg, Family::FastText] {
            let strategies: &[Strategy] = match task {
                Task::ClaimPlusNeutral => &[Strategy::Flat, Strategy::TwoStage, Strategy::Hierarchical],
                Task::ClaimPlusEnsemble => &[Strategy::Ensemble],
                _ => &[Strategy::Flat],
            };
            for &s in strategies {
                if task.supports(s, family) {
                    grid.push((task, s, family));
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dedup: DedupConfig,
    pub split: SplitConfig,
    pub experiment: ExperimentConfig,
    pub grid: Vec<(Task, Strategy, Family)>,
}

impl PipelineConfig {
    /// Defaults with every stage seeded from `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut experiment = ExperimentConfig { seed, ..ExperimentConfig::default() };
        experiment.search.seed = seed;
        experiment.bundle.linear.seed = seed;
        experiment.bundle.fasttext.train.seed = seed;
        PipelineConfig {
            dedup: DedupConfig::default(),
            split: SplitConfig { seed, ..SplitConfig::default() },
            experiment,
            grid: experiment_grid(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub sentences: Vec<Sentence>,
    pub labels: LabelMap,
    pub corpus: LabeledCorpus,
    pub split: Split,
    pub outcomes: Vec<ExperimentOutcome>,
    pub report: Report,
}

impl PipelineOutput {
    pub fn outcome(&self, task: Task, strategy: Strategy, family: Family) -> Option<&ExperimentOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.task == task && o.strategy == strategy && o.family == family)
    }
}

/// Runs segment, dedup, label, split and every experiment in `cfg.grid`.
pub fn run_pipeline(
    comments: &[Comment],
    grammar: &str,
    lexicons: &Lexicons,
    embedding: Option<&EmbeddingTable>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, SynthError> {
    let sentences = dedup(&segment_corpus(comments, 0), &cfg.dedup);
    let rules = RuleGrammar::parse(grammar)?;
    let compiled = CompiledGrammar::compile(&rules, lexicons)?;
    let taxonomy = Taxonomy::default();
    let resolver = Resolver::new(taxonomy.clone(), rules.priorities());
    let labels = label_corpus(&sentences, &compiled, &resolver);
    let corpus = LabeledCorpus {
        ids: sentences.iter().map(|s| s.sentence_id).collect(),
        tokens: sentences.iter().map(|s| s.tokens.clone()).collect(),
        labels: sentences.iter().map(|s| labels[&s.sentence_id].claim).collect(),
    };
    let split = stratified_split(&corpus.labels, &cfg.split)?;
    let mut outcomes = Vec::new();
    let mut report = Report::default();
    for &(task, strategy, family) in &cfg.grid {
        log::info!("experiment {task} {strategy:?} {family:?}");
        let outcome = run_experiment(&corpus, &split, task, strategy, family, &taxonomy, embedding, &cfg.experiment)?;
        report.rows.extend(outcome.rows());
        outcomes.push(outcome);
    }
    Ok(PipelineOutput { sentences, labels, corpus, split, outcomes, report })
}
