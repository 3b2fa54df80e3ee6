use claimgram_core::corpus::{segment_corpus, tokenize};
use claimgram_core::eval::{evaluate_bundles, model_names, report_name, run_experiment, stratified_split, EvalError, ExperimentConfig, LabeledCorpus, SearchSpace, SplitConfig, Task};
use claimgram_core::labeler::{label_corpus, CompiledGrammar, Resolver, RuleGrammar};
use claimgram_core::models::{
    BundleConfig, Component, Family, FastTextConfig, ModelBundle, ModelError, Strategy, TrainConfig, ENSEMBLE_PROBABILITIES,
};
use claimgram_core::synth::{generate, SynthConfig, SynthData, PLANTED_CUES};
use claimgram_core::taxonomy::{ClaimType, Stance, Taxonomy};

fn data() -> (SynthData, LabeledCorpus) {
    let data = generate(&SynthConfig { sentences: 1600, neutral_fraction: 0.6, duplicate_rate: 0.0, seed: 7, ..SynthConfig::default() }).unwrap();
    let rules = RuleGrammar::parse(&data.grammar).unwrap();
    let compiled = CompiledGrammar::compile(&rules, &data.lexicons).unwrap();
    let sentences = segment_corpus(&data.comments, 0);
    let labels = label_corpus(&sentences, &compiled, &Resolver::new(Taxonomy::default(), rules.priorities()));
    let corpus = LabeledCorpus {
        ids: sentences.iter().map(|s| s.sentence_id).collect(),
        tokens: sentences.iter().map(|s| s.tokens.clone()).collect(),
        labels: sentences.iter().map(|s| labels[&s.sentence_id].claim).collect(),
    };
    (data, corpus)
}

fn quick() -> BundleConfig {
    BundleConfig {
        linear: TrainConfig { epochs: 8, ..TrainConfig::default() },
        fasttext: FastTextConfig { dim: 16, buckets: 50_000, train: TrainConfig { epochs: 8, ..TrainConfig::default() } },
        ..BundleConfig::default()
    }
}

fn train(strategy: Strategy, family: Family) -> (ModelBundle, LabeledCorpus) {
    let (data, corpus) = data();
    let bundle = ModelBundle::train(strategy, family, &corpus.tokens, &corpus.labels, &Taxonomy::default(), Some(&data.embedding), &quick()).unwrap();
    (bundle, corpus)
}

#[test]
fn save_load_predict_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (strategy, family) in [
        (Strategy::Flat, Family::LogReg),
        (Strategy::TwoStage, Family::FastText),
        (Strategy::Hierarchical, Family::LogReg),
        (Strategy::Ensemble, Family::LogReg),
    ] {
        let (bundle, corpus) = train(strategy, family);
        let path = dir.path().join(format!("{strategy:?}-{family:?}.json"));
        bundle.save(&path).unwrap();
        let loaded = ModelBundle::load(&path).unwrap();
        for tokens in corpus.tokens.iter().take(200) {
            assert_eq!(bundle.predict(tokens).unwrap(), loaded.predict(tokens).unwrap());
        }
        assert_eq!(loaded.to_json(), bundle.to_json());
    }
}

#[test]
fn tampered_bundle_is_rejected() {
    let (bundle, _) = train(Strategy::Flat, Family::LogReg);
    let text = bundle.to_json().replacen("\"fingerprint\":\"", "\"fingerprint\":\"0", 1);
    assert!(matches!(ModelBundle::from_json(&text), Err(ModelError::Format(_))));
}

#[test]
fn hierarchical_claim_matches_routed_stance() {
    let (bundle, corpus) = train(Strategy::Hierarchical, Family::LogReg);
    let taxonomy = Taxonomy::default();
    let mut routed = 0;
    for tokens in &corpus.tokens {
        let p = bundle.predict(tokens).unwrap();
        let claim = p.claim().unwrap();
        match p.routed {
            Some(stance) => {
                routed += 1;
                assert_eq!(taxonomy.stance_of(claim), stance);
            }
            None => assert_eq!(claim, ClaimType::Neutral),
        }
        assert!((p.probabilities.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(routed > 0);
}

#[test]
fn ensemble_appends_twenty_probabilities() {
    let (data, corpus) = data();
    let (bundle, _) = train(Strategy::Ensemble, Family::LogReg);
    let base = bundle.features(&corpus.tokens[0]);
    let sub = bundle.sub_probabilities(&corpus.tokens[0], &base).unwrap();
    assert_eq!(sub.len(), ENSEMBLE_PROBABILITIES);
    let Component::Linear(m) = bundle.component("ensemble").unwrap() else { panic!("linear ensemble") };
    assert_eq!(m.layout.dense_width, data.embedding.dim + ENSEMBLE_PROBABILITIES);
    assert_eq!(m.classes.len(), 17);
    let err = ModelBundle::train(Strategy::Ensemble, Family::FastText, &corpus.tokens, &corpus.labels, &Taxonomy::default(), None, &quick());
    assert!(matches!(err, Err(ModelError::Unsupported(..))));
}

#[test]
fn cue_only_sentences_get_their_class() {
    for strategy in [Strategy::Flat, Strategy::TwoStage, Strategy::Hierarchical, Strategy::Ensemble] {
        let (bundle, _) = train(strategy, Family::LogReg);
        for (claim, cue) in PLANTED_CUES {
            assert_eq!(bundle.predict(&tokenize(cue)).unwrap().claim(), Some(claim), "{strategy:?} {cue}");
        }
    }
}

fn experiment_cfg() -> ExperimentConfig {
    ExperimentConfig { bundle: quick(), search: SearchSpace { budget: 2, ..SearchSpace::default() }, seed: 1 }
}

#[test]
fn task_class_sets() {
    let (data, corpus) = data();
    let split = stratified_split(&corpus.labels, &SplitConfig::default()).unwrap();
    let run = |task, strategy| {
        run_experiment(&corpus, &split, task, strategy, Family::LogReg, &Taxonomy::default(), Some(&data.embedding), &experiment_cfg()).unwrap()
    };
    let stance = run(Task::Stance, Strategy::Flat);
    assert_eq!(stance.sections[0].classes, vec![Stance::Opposition.name(), Stance::Support.name()]);
    let with_neutral = run(Task::ClaimPlusNeutral, Strategy::Hierarchical);
    assert_eq!(with_neutral.sections[0].classes.len(), 17);
    assert_eq!(with_neutral.rows().len(), 18);
    let without = run(Task::ClaimNeutral, Strategy::Flat);
    assert!(!without.sections[0].classes.iter().any(|c| c == "Neutral"));
    let by_stance = run(Task::SuppVOpp, Strategy::Flat);
    let names: Vec<&str> = by_stance.sections.iter().map(|s| s.section.as_str()).collect();
    assert_eq!(names, ["support", "opposition"]);
    assert_eq!(by_stance.sections[0].classes.len() + by_stance.sections[1].classes.len(), 16);

    // re-evaluating the trained bundles reproduces the experiment rows
    for outcome in [&stance, &with_neutral, &by_stance] {
        let bundles: Vec<ModelBundle> = outcome.sections.iter().map(|s| s.bundle.clone()).collect();
        let report = evaluate_bundles(&corpus, &split, outcome.task, &Taxonomy::default(), &bundles).unwrap();
        assert_eq!(report.rows, outcome.rows());
    }
    let one = [by_stance.sections[0].bundle.clone()];
    assert!(matches!(
        evaluate_bundles(&corpus, &split, Task::SuppVOpp, &Taxonomy::default(), &one),
        Err(EvalError::SectionCount { expected: 2, got: 1, .. })
    ));
    assert_eq!(
        model_names(Task::SuppVOpp, Strategy::Flat, Family::LogReg, &Taxonomy::default()),
        ["supp-v-opp-flat-log_reg-support", "supp-v-opp-flat-log_reg-opposition"]
    );
    assert_eq!(report_name(Task::ClaimPlusNeutral, Strategy::TwoStage, Family::FastText), "claim+neutral-two_stage-fast_text");
}

#[test]
fn mismatched_strategy_is_rejected() {
    let (data, corpus) = data();
    let split = stratified_split(&corpus.labels, &SplitConfig::default()).unwrap();
    for (task, strategy, family) in [
        (Task::Stance, Strategy::Hierarchical, Family::LogReg),
        (Task::ClaimPlusNeutral, Strategy::Ensemble, Family::LogReg),
        (Task::ClaimPlusEnsemble, Strategy::Ensemble, Family::FastText),
    ] {
        let err = run_experiment(&corpus, &split, task, strategy, family, &Taxonomy::default(), Some(&data.embedding), &experiment_cfg());
        assert!(matches!(err, Err(EvalError::Mismatch { .. })), "{task} {strategy:?} {family:?}");
    }
}
