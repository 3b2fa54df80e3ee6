use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, FastTextConfig, FastTextModel, Layout, LinearModel, ModelError, TrainConfig};
use crate::features::{build_vocab, featurize, fnv1a64, EmbeddingTable, FeatureVector, NgramVocab, DEFAULT_VOCAB_CAP};
use crate::taxonomy::{ClaimType, Stance, Taxonomy};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
/// Positive class of the claim-identification gate.
pub const ARGUMENT: &str = "Argument";
/// Width of the sub-model probability block fed to the ensemble.
pub const ENSEMBLE_PROBABILITIES: usize = 20;
const NEUTRAL: &str = "Neutral";

const CLAIM_ID: &str = "claim_id";
const STANCE: &str = "stance";
const SUPPORT_TYPE: &str = "support_type";
const OPPOSE_TYPE: &str = "oppose_type";
const CLAIM_TYPE: &str = "claim_type";
const FLAT: &str = "flat";
const ENSEMBLE: &str = "ensemble";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One multiclass model over every label.
    Flat,
    /// Claim-identification gate, then a claim-type model.
    TwoStage,
    /// Gate, stance router, then a per-stance claim-type model.
    Hierarchical,
    /// Flat model over n-grams plus the probabilities of the hierarchical
    /// sub-models.
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Logistic regression over n-grams and SIF embeddings.
    LogReg,
    /// Averaged hashed n-gram embeddings.
    FastText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    Linear(LinearModel),
    FastText(FastTextModel),
}

impl Component {
    pub fn classes(&self) -> &[String] {
        match self {
            Component::Linear(m) => &m.classes,
            Component::FastText(m) => &m.classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub vocab_cap: usize,
    pub linear: TrainConfig,
    pub fasttext: FastTextConfig,
    /// Cross-fitting folds for the ensemble's training probabilities.
    pub folds: usize,
}

impl Default for BundleConfig {
    fn default() -> Self {
        BundleConfig {
            vocab_cap: DEFAULT_VOCAB_CAP,
            linear: TrainConfig::default(),
            fasttext: FastTextConfig::default(),
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Predicted class name; a claim type name except for flat models
    /// trained on other label sets.
    pub label: String,
    /// Class probabilities. Gated strategies report the product of the
    /// probabilities along each path.
    pub probabilities: BTreeMap<String, f64>,
    /// Stance chosen by the hierarchical router, when one ran.
    pub routed: Option<Stance>,
}

impl Prediction {
    pub fn claim(&self) -> Option<ClaimType> {
        self.label.parse().ok()
    }
}

/// A trained strategy with everything needed to featurize raw tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub strategy: Strategy,
    pub family: Family,
    pub taxonomy: Taxonomy,
    pub vocab: NgramVocab,
    pub embedding: Option<EmbeddingTable>,
    /// Multiplier of the dense block relative to the binary n-gram block.
    pub dense_scale: f64,
    /// Hash of the vocabulary and embedding table shared by all components.
    pub fingerprint: String,
    pub config: BundleConfig,
    pub components: BTreeMap<String, Component>,
}

fn fingerprint(vocab: &NgramVocab, embedding: Option<&EmbeddingTable>) -> String {
    let mut text = vocab.to_tsv();
    if let Some(e) = embedding {
        text.push_str(&e.to_text());
        text.push_str(&format!("{:?}{:?}", e.a, e.u));
    }
    format!("{:016x}", fnv1a64(&text))
}

fn names<I: IntoIterator<Item = ClaimType>>(claims: I) -> Vec<String> {
    let mut v: Vec<String> = claims.into_iter().map(|c| c.name().to_string()).collect();
    v.sort();
    v
}

/// Shared training inputs.
struct Data<'a> {
    family: Family,
    tokens: &'a [Vec<String>],
    features: Vec<FeatureVector>,
    layout: Layout,
    cfg: &'a BundleConfig,
}

impl Data<'_> {
    fn fit(&self, rows: &[usize], labels: &[String], classes: &[String]) -> Result<Component, ModelError> {
        match self.family {
            Family::LogReg => {
                let x: Vec<FeatureVector> = rows.iter().map(|&i| self.features[i].clone()).collect();
                Ok(Component::Linear(LinearModel::train(&x, labels, classes, self.layout, &self.cfg.linear)?))
            }
            Family::FastText => {
                let x: Vec<Vec<String>> = rows.iter().map(|&i| self.tokens[i].clone()).collect();
                Ok(Component::FastText(FastTextModel::train(&x, labels, classes, &self.cfg.fasttext)?))
            }
        }
    }
}

struct SubModels {
    claim_id: Component,
    stance: Component,
    support: Component,
    oppose: Component,
}

impl ModelBundle {
    /// Trains every component the strategy needs. The embedding table, when
    /// given, is refitted on the training sentences.
    pub fn train(
        strategy: Strategy,
        family: Family,
        tokens: &[Vec<String>],
        labels: &[ClaimType],
        taxonomy: &Taxonomy,
        embedding: Option<&EmbeddingTable>,
        cfg: &BundleConfig,
    ) -> Result<Self, ModelError> {
        if tokens.len() != labels.len() {
            return Err(ModelError::LengthMismatch { features: tokens.len(), labels: labels.len() });
        }
        if tokens.is_empty() {
            return Err(ModelError::Empty);
        }
        if strategy == Strategy::Ensemble && family != Family::LogReg {
            return Err(ModelError::Unsupported(strategy, family));
        }
        let (vocab, embedding, features, layout) = prepare(family, tokens, embedding, cfg);
        let data = Data { family, tokens, features, layout, cfg };
        let all: Vec<usize> = (0..tokens.len()).collect();
        let mut components = BTreeMap::new();
        match strategy {
            Strategy::Flat => {
                let y: Vec<String> = labels.iter().map(|c| c.name().to_string()).collect();
                components.insert(FLAT.to_string(), data.fit(&all, &y, &present_classes(labels))?);
            }
            Strategy::TwoStage => {
                components.insert(CLAIM_ID.to_string(), fit_claim_id(&data, &all, labels)?);
                let args: Vec<usize> = all.iter().copied().filter(|&i| labels[i].is_argument()).collect();
                let y: Vec<String> = args.iter().map(|&i| labels[i].name().to_string()).collect();
                components.insert(CLAIM_TYPE.to_string(), data.fit(&args, &y, &names(ClaimType::arguments()))?);
            }
            Strategy::Hierarchical => {
                let sub = fit_sub_models(&data, &all, labels, taxonomy)?;
                insert_sub_models(&mut components, sub);
            }
            Strategy::Ensemble => {
                let sub_probs = cross_fit(&data, labels, taxonomy)?;
                let x: Vec<FeatureVector> = data
                    .features
                    .iter()
                    .zip(&sub_probs)
                    .map(|(f, p)| augment(f, p))
                    .collect();
                let layout = Layout {
                    sparse_width: layout.sparse_width,
                    dense_width: layout.dense_width + ENSEMBLE_PROBABILITIES,
                };
                let y: Vec<String> = labels.iter().map(|c| c.name().to_string()).collect();
                let ensemble = LinearModel::train(&x, &y, &present_classes(labels), layout, &cfg.linear)?;
                components.insert(ENSEMBLE.to_string(), Component::Linear(ensemble));
                let sub = fit_sub_models(&data, &all, labels, taxonomy)?;
                insert_sub_models(&mut components, sub);
            }
        }
        Ok(assemble(strategy, family, taxonomy, vocab, embedding, cfg, components))
    }

    /// A flat bundle over arbitrary string labels, such as the binary
    /// claim-identification and stance tasks. Classes are the distinct
    /// labels in sorted order.
    pub fn train_flat<S: AsRef<str>>(
        family: Family,
        tokens: &[Vec<String>],
        labels: &[S],
        taxonomy: &Taxonomy,
        embedding: Option<&EmbeddingTable>,
        cfg: &BundleConfig,
    ) -> Result<Self, ModelError> {
        if tokens.len() != labels.len() {
            return Err(ModelError::LengthMismatch { features: tokens.len(), labels: labels.len() });
        }
        if tokens.is_empty() {
            return Err(ModelError::Empty);
        }
        let y: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        let mut classes = y.clone();
        classes.sort();
        classes.dedup();
        let (vocab, embedding, features, layout) = prepare(family, tokens, embedding, cfg);
        let data = Data { family, tokens, features, layout, cfg };
        let all: Vec<usize> = (0..tokens.len()).collect();
        let mut components = BTreeMap::new();
        components.insert(FLAT.to_string(), data.fit(&all, &y, &classes)?);
        Ok(assemble(Strategy::Flat, family, taxonomy, vocab, embedding, cfg, components))
    }

    /// The linear model of a flat bundle, for weight inspection.
    pub fn flat_linear(&self) -> Result<&LinearModel, ModelError> {
        self.expect(Strategy::Flat)?;
        match self.component(FLAT)? {
            Component::Linear(m) => Ok(m),
            Component::FastText(_) => Err(ModelError::Unsupported(Strategy::Flat, Family::FastText)),
        }
    }

    pub fn component(&self, name: &str) -> Result<&Component, ModelError> {
        self.components.get(name).ok_or_else(|| ModelError::MissingComponent(name.to_string()))
    }

    /// Base features of a sentence for the linear components.
    pub fn features(&self, tokens: &[String]) -> FeatureVector {
        featurize(tokens, &self.vocab, self.embedding.as_ref())
    }

    fn proba(&self, name: &str, tokens: &[String], base: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        match self.component(name)? {
            Component::Linear(m) => m.predict_proba(base),
            Component::FastText(m) => Ok(m.predict_proba(tokens)),
        }
    }

    fn expect(&self, strategy: Strategy) -> Result<(), ModelError> {
        if self.strategy == strategy {
            Ok(())
        } else {
            Err(ModelError::WrongStrategy { expected: strategy, actual: self.strategy })
        }
    }

    pub fn predict(&self, tokens: &[String]) -> Result<Prediction, ModelError> {
        match self.strategy {
            Strategy::Flat => self.predict_flat(tokens),
            Strategy::TwoStage => self.predict_two_stage(tokens),
            Strategy::Hierarchical => self.predict_hierarchical(tokens),
            Strategy::Ensemble => self.predict_ensemble(tokens),
        }
    }

    pub fn predict_flat(&self, tokens: &[String]) -> Result<Prediction, ModelError> {
        self.expect(Strategy::Flat)?;
        let base = self.features(tokens);
        self.argmax_prediction(FLAT, &self.proba(FLAT, tokens, &base)?)
    }

    pub fn predict_two_stage(&self, tokens: &[String]) -> Result<Prediction, ModelError> {
        self.expect(Strategy::TwoStage)?;
        let base = self.features(tokens);
        let p_arg = self.positive(CLAIM_ID, ARGUMENT, tokens, &base)?;
        let types = self.proba(CLAIM_TYPE, tokens, &base)?;
        let classes = self.component(CLAIM_TYPE)?.classes();
        let mut probabilities: BTreeMap<String, f64> = classes.iter().cloned().zip(types.iter().map(|p| p * p_arg)).collect();
        probabilities.insert(NEUTRAL.to_string(), 1.0 - p_arg);
        let label = if gate(p_arg) { classes[argmax(&types)].clone() } else { NEUTRAL.to_string() };
        Ok(Prediction { label, probabilities, routed: None })
    }

    pub fn predict_hierarchical(&self, tokens: &[String]) -> Result<Prediction, ModelError> {
        self.expect(Strategy::Hierarchical)?;
        let base = self.features(tokens);
        let p_arg = self.positive(CLAIM_ID, ARGUMENT, tokens, &base)?;
        let p_sup = self.positive(STANCE, Stance::Support.name(), tokens, &base)?;
        let sup = self.proba(SUPPORT_TYPE, tokens, &base)?;
        let opp = self.proba(OPPOSE_TYPE, tokens, &base)?;
        let sup_classes = self.component(SUPPORT_TYPE)?.classes();
        let opp_classes = self.component(OPPOSE_TYPE)?.classes();
        let mut probabilities = BTreeMap::new();
        probabilities.insert(NEUTRAL.to_string(), 1.0 - p_arg);
        for (c, p) in sup_classes.iter().zip(&sup) {
            probabilities.insert(c.clone(), p_arg * p_sup * p);
        }
        for (c, p) in opp_classes.iter().zip(&opp) {
            probabilities.insert(c.clone(), p_arg * (1.0 - p_sup) * p);
        }
        if !gate(p_arg) {
            return Ok(Prediction { label: NEUTRAL.to_string(), probabilities, routed: None });
        }
        let (stance, label) = if gate(p_sup) {
            (Stance::Support, sup_classes[argmax(&sup)].clone())
        } else {
            (Stance::Opposition, opp_classes[argmax(&opp)].clone())
        };
        Ok(Prediction { label, probabilities, routed: Some(stance) })
    }

    pub fn predict_ensemble(&self, tokens: &[String]) -> Result<Prediction, ModelError> {
        self.expect(Strategy::Ensemble)?;
        let base = self.features(tokens);
        let sub = self.sub_probabilities(tokens, &base)?;
        let Component::Linear(m) = self.component(ENSEMBLE)? else {
            return Err(ModelError::Format("ensemble component must be linear".into()));
        };
        self.argmax_prediction(ENSEMBLE, &m.predict_proba(&augment(&base, &sub))?)
    }

    /// The 20 sub-model probabilities: claim identification (2), stance (2),
    /// support types (2), opposition types (14), each in sorted class order.
    pub fn sub_probabilities(&self, tokens: &[String], base: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::with_capacity(ENSEMBLE_PROBABILITIES);
        for name in [CLAIM_ID, STANCE, SUPPORT_TYPE, OPPOSE_TYPE] {
            out.extend(self.proba(name, tokens, base)?);
        }
        Ok(out)
    }

    fn positive(&self, name: &str, class: &str, tokens: &[String], base: &FeatureVector) -> Result<f64, ModelError> {
        let p = self.proba(name, tokens, base)?;
        let idx = self
            .component(name)?
            .classes()
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| ModelError::Format(format!("{name} has no class {class}")))?;
        Ok(p[idx])
    }

    fn argmax_prediction(&self, name: &str, p: &[f64]) -> Result<Prediction, ModelError> {
        let classes = self.component(name)?.classes();
        Ok(Prediction {
            label: classes[argmax(p)].clone(),
            probabilities: classes.iter().cloned().zip(p.iter().copied()).collect(),
            routed: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let mut bundle: ModelBundle = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if bundle.format_version != BUNDLE_FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported format version {}", bundle.format_version)));
        }
        if let Some(e) = bundle.embedding.as_mut() {
            e.reindex();
        }
        if fingerprint(&bundle.vocab, bundle.embedding.as_ref()) != bundle.fingerprint {
            return Err(ModelError::Format("vocabulary fingerprint mismatch".into()));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
        ModelBundle::from_json(&text)
    }
}

/// Binary gate: probability 0.5 counts as positive.
fn gate(p: f64) -> bool {
    p >= 0.5
}

type Prepared = (NgramVocab, Option<EmbeddingTable>, Vec<FeatureVector>, Layout);

fn prepare(family: Family, tokens: &[Vec<String>], embedding: Option<&EmbeddingTable>, cfg: &BundleConfig) -> Prepared {
    match family {
        Family::LogReg => {
            let embedding = embedding.map(|e| {
                let mut e = e.clone();
                e.fit(tokens);
                e
            });
            let vocab = build_vocab(tokens, cfg.vocab_cap);
            let features = tokens.par_iter().map(|t| featurize(t, &vocab, embedding.as_ref())).collect();
            let layout = Layout {
                sparse_width: vocab.len(),
                dense_width: embedding.as_ref().map_or(0, |e| e.dim),
            };
            (vocab, embedding, features, layout)
        }
        Family::FastText => (NgramVocab::default(), None, Vec::new(), Layout { sparse_width: 0, dense_width: 0 }),
    }
}

fn assemble(
    strategy: Strategy,
    family: Family,
    taxonomy: &Taxonomy,
    vocab: NgramVocab,
    embedding: Option<EmbeddingTable>,
    cfg: &BundleConfig,
    components: BTreeMap<String, Component>,
) -> ModelBundle {
    ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        strategy,
        family,
        fingerprint: fingerprint(&vocab, embedding.as_ref()),
        taxonomy: taxonomy.clone(),
        vocab,
        embedding,
        dense_scale: 1.0,
        config: cfg.clone(),
        components,
    }
}

/// Distinct labels in taxonomy order.
fn present_classes(labels: &[ClaimType]) -> Vec<String> {
    ClaimType::ALL
        .iter()
        .filter(|c| labels.contains(c))
        .map(|c| c.name().to_string())
        .collect()
}

fn augment(base: &FeatureVector, probs: &[f64]) -> FeatureVector {
    let mut dense = base.dense.clone().unwrap_or_default();
    dense.extend_from_slice(probs);
    FeatureVector { sparse: base.sparse.clone(), dense: Some(dense) }
}

fn fit_claim_id(data: &Data, rows: &[usize], labels: &[ClaimType]) -> Result<Component, ModelError> {
    let y: Vec<String> = rows
        .iter()
        .map(|&i| if labels[i].is_argument() { ARGUMENT } else { NEUTRAL }.to_string())
        .collect();
    data.fit(rows, &y, &[ARGUMENT.to_string(), NEUTRAL.to_string()])
}

fn fit_sub_models(data: &Data, rows: &[usize], labels: &[ClaimType], taxonomy: &Taxonomy) -> Result<SubModels, ModelError> {
    let claim_id = fit_claim_id(data, rows, labels)?;
    let args: Vec<usize> = rows.iter().copied().filter(|&i| labels[i].is_argument()).collect();
    let stances: Vec<String> = args.iter().map(|&i| taxonomy.stance_of(labels[i]).name().to_string()).collect();
    let stance_classes = vec![Stance::Opposition.name().to_string(), Stance::Support.name().to_string()];
    let stance = data.fit(&args, &stances, &stance_classes)?;
    let by_stance = |s: Stance| -> Result<Component, ModelError> {
        let members = taxonomy.members(s).map_err(|e| ModelError::Format(e.to_string()))?;
        let rows: Vec<usize> = args.iter().copied().filter(|&i| taxonomy.stance_of(labels[i]) == s).collect();
        let y: Vec<String> = rows.iter().map(|&i| labels[i].name().to_string()).collect();
        data.fit(&rows, &y, &names(members))
    };
    Ok(SubModels { claim_id, stance, support: by_stance(Stance::Support)?, oppose: by_stance(Stance::Opposition)? })
}

fn insert_sub_models(components: &mut BTreeMap<String, Component>, sub: SubModels) {
    components.insert(CLAIM_ID.to_string(), sub.claim_id);
    components.insert(STANCE.to_string(), sub.stance);
    components.insert(SUPPORT_TYPE.to_string(), sub.support);
    components.insert(OPPOSE_TYPE.to_string(), sub.oppose);
}

/// Out-of-fold sub-model probabilities for every training example.
fn cross_fit(data: &Data, labels: &[ClaimType], taxonomy: &Taxonomy) -> Result<Vec<Vec<f64>>, ModelError> {
    let n = labels.len();
    let folds = data.cfg.folds.max(2).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(data.cfg.linear.seed ^ 0x5eed_f01d));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let per_fold: Vec<Vec<(usize, Vec<f64>)>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
            let sub = fit_sub_models(data, &rows, labels, taxonomy)?;
            let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
            held.iter()
                .map(|&i| {
                    let f = &data.features[i];
                    let mut probs = Vec::with_capacity(ENSEMBLE_PROBABILITIES);
                    for c in [&sub.claim_id, &sub.stance, &sub.support, &sub.oppose] {
                        let Component::Linear(m) = c else {
                            return Err(ModelError::Unsupported(Strategy::Ensemble, Family::FastText));
                        };
                        probs.extend(m.predict_proba(f)?);
                    }
                    Ok((i, probs))
                })
                .collect()
        })
        .collect::<Result<_, ModelError>>()?;
    let mut out = vec![Vec::new(); n];
    for (i, p) in per_fold.into_iter().flatten() {
        out[i] = p;
    }
    Ok(out)
}
