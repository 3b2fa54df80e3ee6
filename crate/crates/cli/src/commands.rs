use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use claimgram_core::corpus::{
    dedup, fetch_comments, read_comments, read_sentences, segment_corpus, tokenize, write_comments, write_sentences,
    ApiSource, DedupConfig, DocketFilter, Sentence, Source,
};
use claimgram_core::eval::{
    evaluate_bundles, model_names, report_name, run_experiment, stratified_split, top_ngrams, write_trial_log,
    EvalError, ExperimentConfig, LabeledCorpus, Report, Split, SplitConfig, Task,
};
use claimgram_core::features::{pool_embeddings, EmbeddingTable};
use claimgram_core::labeler::{
    cluster_candidates, label_corpus, read_labels, write_labels, CompiledGrammar, GrammarPack, LabelMap, Resolver,
    RuleGrammar,
};
use claimgram_core::models::{Component, Family, ModelBundle, Strategy};
use claimgram_core::synth::{generate, SynthConfig};
use claimgram_core::taxonomy::{ClaimType, LabelCounts, Taxonomy};
use claimgram_core::Workspace;
use claimgram_service::{AppState, ServiceConfig};

use crate::{Cli, ClusterArgs, Command, DedupArgs, Failure, IngestArgs, InspectArgs, PredictArgs, SplitArgs, SynthArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let ws = Workspace::create(&cli.workspace).with_context(|| format!("creating workspace {}", cli.workspace.display()))?;
    let ctx = Ctx { cli, ws };
    match &cli.command {
        Command::Ingest(a) => ctx.ingest(a),
        Command::Segment => ctx.segment(),
        Command::Dedup(a) => ctx.dedup(a),
        Command::Label => ctx.label(),
        Command::Cluster(a) => ctx.cluster(a),
        Command::Split(a) => ctx.split(a),
        Command::Train(a) => ctx.train(a),
        Command::Evaluate(a) => ctx.evaluate(a),
        Command::Predict(a) => ctx.predict(a),
        Command::InspectWeights(a) => ctx.inspect(a),
        Command::Serve(a) => ctx.serve(a.addr),
        Command::Synth(a) => ctx.synth(a),
    }
}

fn need(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::MissingInput(path.to_path_buf()).into())
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Failure::Invalid(msg.into()).into()
}

fn emit(v: Value) {
    println!("{v}");
}

/// Split membership by sentence id, so the file stays valid if the sentence
/// store is rewritten in another order.
#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    train: Vec<u64>,
    dev: Vec<u64>,
    test: Vec<u64>,
}

struct Ctx<'a> {
    cli: &'a Cli,
    ws: Workspace,
}

impl Ctx<'_> {
    fn grammar_pack(&self) -> Result<GrammarPack> {
        let dir = self.cli.grammar.clone().unwrap_or_else(|| self.ws.grammar_dir());
        if self.cli.grammar.is_some() {
            need(&dir)?;
        }
        if dir.join("grammar.cfg").exists() {
            Ok(GrammarPack::load_dir(&dir)?)
        } else if self.cli.grammar.is_some() {
            Err(Failure::MissingInput(dir.join("grammar.cfg")).into())
        } else {
            Ok(GrammarPack::seed())
        }
    }

    fn vectors(&self) -> Result<Option<EmbeddingTable>> {
        match &self.cli.vectors {
            Some(p) => Ok(Some(EmbeddingTable::load(need(p)?)?)),
            None if self.ws.vectors().exists() => Ok(Some(EmbeddingTable::load(&self.ws.vectors())?)),
            None => Ok(None),
        }
    }

    fn sentences(&self) -> Result<Vec<Sentence>> {
        Ok(read_sentences(need(&self.ws.sentences())?)?.records)
    }

    fn labels(&self) -> Result<LabelMap> {
        let parsed = read_labels(need(&self.ws.labels())?)?;
        Ok(parsed.records.into_iter().map(|r| (r.sentence_id, r)).collect())
    }

    fn labeled_corpus(&self) -> Result<LabeledCorpus> {
        let sentences = self.sentences()?;
        let labels = self.labels()?;
        let mut corpus = LabeledCorpus::default();
        for s in sentences {
            let label = labels
                .get(&s.sentence_id)
                .ok_or_else(|| invalid(format!("sentence {} has no label; rerun label", s.sentence_id)))?;
            corpus.ids.push(s.sentence_id);
            corpus.labels.push(label.claim);
            corpus.tokens.push(s.tokens);
        }
        Ok(corpus)
    }

    fn load_split(&self, corpus: &LabeledCorpus) -> Result<Split> {
        let path = self.ws.split();
        need(&path)?;
        let file: SplitFile = serde_json::from_str(&fs::read_to_string(&path)?).with_context(|| format!("parsing {}", path.display()))?;
        let position: BTreeMap<u64, usize> = corpus.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let map = |ids: &[u64]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| position.get(id).copied().ok_or_else(|| invalid(format!("split names unknown sentence {id}; rerun split"))))
                .collect()
        };
        Ok(Split { train: map(&file.train)?, dev: map(&file.dev)?, test: map(&file.test)? })
    }

    fn cell(&self, a: &crate::CellArgs) -> Result<(Task, Strategy, Family)> {
        let task: Task = a.task.parse().map_err(|e: EvalError| invalid(e.to_string()))?;
        let strategy: Strategy = serde_json::from_value(json!(a.strategy)).map_err(|_| invalid(format!("unknown strategy {:?}", a.strategy)))?;
        let family: Family = serde_json::from_value(json!(a.family)).map_err(|_| invalid(format!("unknown family {:?}", a.family)))?;
        if !task.supports(strategy, family) {
            return Err(EvalError::Mismatch { task, strategy, family }.into());
        }
        Ok((task, strategy, family))
    }

    fn load_model(&self, name: &str) -> Result<ModelBundle> {
        Ok(ModelBundle::load(need(&self.ws.model(name))?)?)
    }

    fn ingest(&self, a: &IngestArgs) -> Result<()> {
        let source = match (&a.input, &a.api_base) {
            (Some(p), _) => Source::File(need(p)?.to_path_buf()),
            (None, Some(base)) => {
                if a.dockets.is_empty() {
                    return Err(invalid("--api-base needs at least one --docket"));
                }
                let mut api = ApiSource::new(base.clone(), a.dockets.clone());
                api.api_key_env = Some(a.api_key_env.clone());
                api.api_key_header = a.api_key_header.clone();
                api.requests_per_second = a.requests_per_second;
                Source::Api(api)
            }
            (None, None) => return Err(invalid("one of --input or --api-base is required")),
        };
        let filter = DocketFilter { more_than: a.min_comments, fewer_than: a.max_comments };
        let report = fetch_comments(&source, &filter)?;
        write_comments(&self.ws.comments(), &report.comments)?;
        emit(json!({
            "comments": report.comments.len(),
            "skipped": report.skipped,
            "filtered_dockets": report.filtered_dockets,
            "output": self.ws.comments(),
        }));
        Ok(())
    }

    fn segment(&self) -> Result<()> {
        let parsed = read_comments(need(&self.ws.comments())?)?;
        let sentences = segment_corpus(&parsed.records, 0);
        write_sentences(&self.ws.segmented(), &sentences)?;
        emit(json!({ "comments": parsed.records.len(), "skipped": parsed.skipped.len(), "sentences": sentences.len(), "output": self.ws.segmented() }));
        Ok(())
    }

    fn dedup(&self, a: &DedupArgs) -> Result<()> {
        if !(a.threshold > 0.0 && a.threshold <= 1.0) {
            return Err(invalid(format!("threshold {} must be in (0, 1]", a.threshold)));
        }
        let input = read_sentences(need(&self.ws.segmented())?)?.records;
        let kept = dedup(&input, &DedupConfig { similarity_threshold: a.threshold });
        write_sentences(&self.ws.sentences(), &kept)?;
        emit(json!({ "input": input.len(), "output": kept.len(), "removed": input.len() - kept.len(), "path": self.ws.sentences() }));
        Ok(())
    }

    fn label(&self) -> Result<()> {
        let sentences = self.sentences()?;
        let pack = self.grammar_pack()?;
        let compiled = CompiledGrammar::compile(&pack.grammar, &pack.lexicons)?;
        let resolver = Resolver::new(Taxonomy::default(), pack.grammar.priorities());
        let labels = label_corpus(&sentences, &compiled, &resolver);
        write_labels(&self.ws.labels(), &labels)?;
        if self.cli.grammar.is_none() && !self.ws.grammar_dir().join("grammar.cfg").exists() {
            // later stages and the service read the grammar from the workspace
            pack.save_dir(&self.ws.grammar_dir())?;
        }
        let counts = LabelCounts::from_labels(labels.values().map(|r| &r.claim));
        emit(json!({ "sentences": labels.len(), "counts": counts, "output": self.ws.labels() }));
        Ok(())
    }

    fn cluster(&self, a: &ClusterArgs) -> Result<()> {
        let sentences = self.sentences()?;
        let labels = self.labels()?;
        let label_of = |s: &Sentence| labels.get(&s.sentence_id).map_or(ClaimType::Neutral, |r| r.claim);
        let filter = if a.pool == "all" {
            None
        } else {
            Some(a.pool.parse::<ClaimType>().map_err(|_| invalid(format!("unknown pool {:?}", a.pool)))?)
        };
        let pool: Vec<&Sentence> = sentences.iter().filter(|s| filter.is_none_or(|c| label_of(s) == c)).collect();
        if pool.is_empty() {
            return Err(invalid(format!("pool {:?} is empty", a.pool)));
        }
        let tokens: Vec<Vec<String>> = pool.iter().map(|s| s.tokens.clone()).collect();
        let vectors = pool_embeddings(&tokens, self.vectors()?.as_ref(), self.cli.seed);
        let ids: Vec<u64> = pool.iter().map(|s| s.sentence_id).collect();
        let clustering = cluster_candidates(&ids, &vectors, a.k, a.exemplars, self.cli.seed)?;
        let text: BTreeMap<u64, &str> = pool.iter().map(|s| (s.sentence_id, s.text.as_str())).collect();
        let clusters: Vec<Value> = clustering
            .clusters
            .iter()
            .enumerate()
            .map(|(id, c)| {
                json!({
                    "id": id,
                    "size": c.members.len(),
                    "members": c.members,
                    "exemplars": c.exemplars.iter().map(|e| json!({ "sentence_id": e, "text": text[e] })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let out = json!({ "k": a.k, "pool": a.pool, "pool_size": pool.len(), "clusters": clusters });
        let path = self.ws.report("clusters");
        fs::write(&path, serde_json::to_string_pretty(&out)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        emit(json!({ "k": a.k, "pool_size": pool.len(), "sizes": clustering.clusters.iter().map(|c| c.members.len()).collect::<Vec<_>>(), "output": path }));
        Ok(())
    }

    fn split(&self, a: &SplitArgs) -> Result<()> {
        let corpus = self.labeled_corpus()?;
        let cfg = SplitConfig { train: a.train, dev: a.dev, test: a.test, seed: self.cli.seed };
        let split = stratified_split(&corpus.labels, &cfg)?;
        let ids = |rows: &[usize]| -> Vec<u64> { rows.iter().map(|&i| corpus.ids[i]).collect() };
        let file = SplitFile { train: ids(&split.train), dev: ids(&split.dev), test: ids(&split.test) };
        fs::write(self.ws.split(), serde_json::to_string(&file)? + "\n")?;
        emit(json!({ "train": file.train.len(), "dev": file.dev.len(), "test": file.test.len(), "output": self.ws.split() }));
        Ok(())
    }

    fn experiment_config(&self, budget: usize) -> ExperimentConfig {
        let seed = self.cli.seed;
        let mut cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
        cfg.search.seed = seed;
        cfg.search.budget = budget;
        cfg.bundle.linear.seed = seed;
        cfg.bundle.fasttext.train.seed = seed;
        cfg
    }

    fn train(&self, a: &TrainArgs) -> Result<()> {
        let (task, strategy, family) = self.cell(&a.cell)?;
        let corpus = self.labeled_corpus()?;
        let split = self.load_split(&corpus)?;
        let embedding = self.vectors()?;
        let taxonomy = Taxonomy::default();
        let outcome = run_experiment(&corpus, &split, task, strategy, family, &taxonomy, embedding.as_ref(), &self.experiment_config(a.budget))?;
        let mut sections = Vec::new();
        for (s, name) in outcome.sections.iter().zip(model_names(task, strategy, family, &taxonomy)) {
            s.bundle.save(&self.ws.model(&name))?;
            write_trial_log(&self.ws.trial_log(&name), &s.search.trials)?;
            sections.push(json!({ "section": s.section, "model": self.ws.model(&name), "best_trial": s.search.best_trial, "dev_macro_f1": s.search.best_score, "test_macro_f1": s.metrics.macro_f1 }));
        }
        let report = Report { rows: outcome.rows() };
        let path = self.ws.report(&report_name(task, strategy, family));
        report.save(&path)?;
        emit(json!({ "task": task, "strategy": strategy, "family": family, "sections": sections, "report": path }));
        Ok(())
    }

    fn evaluate(&self, a: &crate::CellArgs) -> Result<()> {
        let (task, strategy, family) = self.cell(a)?;
        let taxonomy = Taxonomy::default();
        let bundles = model_names(task, strategy, family, &taxonomy)
            .iter()
            .map(|n| self.load_model(n))
            .collect::<Result<Vec<_>>>()?;
        let corpus = self.labeled_corpus()?;
        let split = self.load_split(&corpus)?;
        let report = evaluate_bundles(&corpus, &split, task, &taxonomy, &bundles)?;
        report.save(&self.ws.report(&report_name(task, strategy, family)))?;
        print!("{}", report.to_json());
        Ok(())
    }

    fn predict(&self, a: &PredictArgs) -> Result<()> {
        let bundle = self.load_model(&a.model)?;
        let inputs: Vec<(Option<u64>, String, Vec<String>)> = match &a.input {
            Some(p) => read_sentences(need(p)?)?.records.into_iter().map(|s| (Some(s.sentence_id), s.text, s.tokens)).collect(),
            None => a.text.iter().map(|t| (None, t.clone(), tokenize(t))).collect(),
        };
        let mut out: Box<dyn Write> = match &a.output {
            Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(std::io::stdout().lock()),
        };
        for (id, text, tokens) in inputs {
            let p = bundle.predict(&tokens)?;
            let line = json!({ "sentence_id": id, "text": text, "label": p.label, "probabilities": p.probabilities, "routed": p.routed });
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    fn inspect(&self, a: &InspectArgs) -> Result<()> {
        let bundle = self.load_model(&a.model)?;
        let model = match &a.component {
            Some(name) => match bundle.component(name)? {
                Component::Linear(m) => m,
                Component::FastText(_) => return Err(invalid(format!("component {name:?} is a fastText model without n-gram weights"))),
            },
            None => bundle.flat_linear()?,
        };
        if !model.classes.iter().any(|c| c == &a.class) {
            return Err(invalid(format!("class {:?} is not one of {}", a.class, model.classes.join(", "))));
        }
        let top: Vec<Value> = top_ngrams(model, &bundle.vocab, &a.class, a.k)
            .into_iter()
            .map(|(ngram, weight)| json!({ "ngram": ngram, "weight": weight }))
            .collect();
        emit(json!({ "model": a.model, "class": a.class, "top": top }));
        Ok(())
    }

    fn serve(&self, addr: std::net::SocketAddr) -> Result<()> {
        need(&self.ws.sentences())?;
        let state = AppState::open(self.ws.clone(), ServiceConfig::seeded(self.cli.seed))?;
        let runtime = tokio::runtime::Runtime::new()?;
        runtime.block_on(claimgram_service::serve(state, addr))?;
        Ok(())
    }

    fn synth(&self, a: &SynthArgs) -> Result<()> {
        let cfg = SynthConfig {
            sentences: a.sentences,
            neutral_fraction: a.neutral_fraction,
            duplicate_rate: a.duplicate_rate,
            seed: self.cli.seed,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).map_err(|e| invalid(e.to_string()))?;
        write_comments(&self.ws.comments(), &data.comments)?;
        let pack = GrammarPack { grammar: RuleGrammar::parse(&data.grammar)?, lexicons: data.lexicons };
        let grammar_dir: PathBuf = self.cli.grammar.clone().unwrap_or_else(|| self.ws.grammar_dir());
        pack.save_dir(&grammar_dir)?;
        fs::write(self.ws.vectors(), data.embedding.to_text())?;
        emit(json!({ "comments": data.comments.len(), "sentences": a.sentences, "grammar": grammar_dir, "vectors": self.ws.vectors() }));
        Ok(())
    }
}
