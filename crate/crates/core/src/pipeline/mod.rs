//! End-to-end orchestration: configuration, the staged run, and the files
//! each stage emits into the output directory.
//!
//! Stages run in a fixed order: ingest, prep, volume, decompose, topics,
//! dtm, classify, sentiment, geo, report. Every stage after prep can be
//! skipped. A failing stage halts the run with an error naming the stage;
//! files already written stay in place and are listed in the manifest.

mod config;
pub mod svg;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{key_spec, KeySpec, RunConfig, KEYS};

use crate::corpus::{
    load_corpus, split_dataset, Corpus, CorpusFormat, Gazetteer, LabelField, NewsClass, Sentiment, SplitRatios,
};
use crate::dtm::{fit_dtm, slice_documents, write_prevalence_csv, write_top_words_csv, DtmConfig, DtmModel};
use crate::error::{Error, Result};
use crate::geo::{
    self, aggregate_volume, sentiment_grid, shares, topic_by_region, topic_mass_grid, volume_grid, RegionLevel,
    TopicAssign,
};
use crate::metrics::{evaluate, EvalReport};
use crate::neural::{
    load_word2vec, predict, train_from, write_training_log, Checkpoint, EpochLog, Example, NetSpec, Network, TokenMap,
};
use crate::rng::derive_seed;
use crate::textprep::{prepare_corpus, to_hex, PrepConfig, PreparedCorpus};
use crate::topics::{fit_lda, sweep_k, top_words, Coherence, Estimate, LdaConfig, SavedTopicModel, SelectionReport, TopicModel};
use crate::tsdecomp::{build_volume_series, decompose, DecompModel, DecomposeOptions, Decomposition};

use svg::{Panel, Series};

/// Stages `run.skip` may name.
pub const SKIPPABLE: &[&str] = &["volume", "decompose", "topics", "dtm", "classify", "sentiment", "geo"];

/// Files that change between identical runs and are kept out of the
/// content manifest.
const VOLATILE: &[&str] = &["run_manifest.json", "manifest.tsv"];

/// Supervised task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classify,
    Sentiment,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Sentiment => "sentiment",
        }
    }

    /// File-name prefix of the task's outputs.
    pub fn prefix(self) -> &'static str {
        match self {
            Task::Classify => "classifier",
            Task::Sentiment => "sentiment",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "classify" | "classifier" => Ok(Task::Classify),
            "sentiment" => Ok(Task::Sentiment),
            other => Err(Error::config(format!("unknown task {other:?}"))),
        }
    }
}

/// Classifier layout from the `classify.*` keys. `vocab_size` is the cap;
/// the trained network uses the actual token-map size.
pub fn classifier_spec(cfg: &RunConfig, n_classes: usize) -> Result<NetSpec> {
    let mut spec = NetSpec::classifier(n_classes);
    spec.vocab_size = cfg.get("classify.vocab_size")?;
    spec.embed_dim = cfg.get("classify.embed_dim")?;
    spec.max_len = cfg.get("classify.max_len")?;
    spec.recurrent[0].hidden = cfg.get("classify.hidden")?;
    spec.epochs = cfg.get("classify.epochs")?;
    spec.batch_size = cfg.get("classify.batch_size")?;
    spec.adam.lr = cfg.get("classify.lr")?;
    spec.l2 = cfg.get("classify.l2")?;
    spec.seed = derive_seed(cfg.seed()?, 1);
    Ok(spec)
}

/// Sentiment layout from the `sentiment.*` keys.
pub fn sentiment_spec(cfg: &RunConfig) -> Result<NetSpec> {
    let mut spec = NetSpec::sentiment();
    spec.vocab_size = cfg.get("sentiment.vocab_size")?;
    spec.embed_dim = cfg.get("sentiment.embed_dim")?;
    spec.max_len = cfg.get("sentiment.max_len")?;
    let conv = spec.conv.as_mut().expect("sentiment preset has a convolution");
    conv.filters = cfg.get("sentiment.filters")?;
    conv.width = cfg.get("sentiment.width")?;
    conv.pool = cfg.get("sentiment.pool")?;
    let hidden = cfg.get("sentiment.hidden")?;
    let dropout = cfg.get("sentiment.dropout")?;
    for r in &mut spec.recurrent {
        r.hidden = hidden;
        r.dropout = dropout;
    }
    spec.dense_hidden = vec![cfg.get("sentiment.dense")?];
    spec.epochs = cfg.get("sentiment.epochs")?;
    spec.batch_size = cfg.get("sentiment.batch_size")?;
    spec.adam.lr = cfg.get("sentiment.lr")?;
    spec.l2 = cfg.get("sentiment.l2")?;
    spec.seed = derive_seed(cfg.seed()?, 2);
    Ok(spec)
}

fn lda_template(cfg: &RunConfig, k: usize) -> Result<LdaConfig> {
    Ok(LdaConfig {
        k,
        alpha: cfg.opt("topics.alpha")?,
        beta: cfg.get("topics.beta")?,
        iterations: cfg.get("topics.iterations")?,
        burn_in: cfg.get("topics.burn_in")?,
        seed: cfg.seed()?,
        estimate: match cfg.raw("topics.estimate").trim() {
            "averaged" => Estimate::Averaged,
            _ => Estimate::FinalCounts,
        },
    })
}

pub type Timestamp = chrono::DateTime<chrono::Utc>;

pub fn now() -> Timestamp {
    chrono::Utc::now()
}

/// Timing of one executed stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub out_dir: PathBuf,
    /// Content files in the output directory, sorted.
    pub files: Vec<String>,
    pub notices: Vec<String>,
    pub chosen_k: Option<usize>,
    pub stages: Vec<StageTiming>,
}

/// Loaded inputs plus everything stages hand to later stages.
pub struct Workspace {
    pub config: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub corpus: Corpus,
    pub gazetteer: Gazetteer,
    pub prep: PrepConfig,
    pub prepared: PreparedCorpus,
    pub notices: Vec<String>,
    pub stages: Vec<StageTiming>,
    pub selection: Option<SelectionReport>,
    pub topic_model: Option<TopicModel>,
    pub dtm: Option<DtmModel>,
    pub sentiment_predictions: Option<HashMap<String, Sentiment>>,
    pub evals: BTreeMap<&'static str, EvalReport>,
    written: Vec<String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io("<csv buffer>", e))?;
    }
    Ok(buf)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Workspace {
    /// Validates the configuration and loads corpus, gazetteer and word
    /// lists. Configuration problems come back untagged; load failures are
    /// tagged `ingest`.
    pub fn open(config: RunConfig) -> Result<Workspace> {
        config.validate()?;
        let seed = config.seed()?;
        let out = config.output_dir();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let ingest = || -> Result<(Corpus, Gazetteer, PrepConfig)> {
            let path = config.path("paths.corpus").expect("validated");
            let format = match config.raw("paths.format").trim() {
                "auto" => CorpusFormat::from_path(&path),
                other => other.parse()?,
            };
            let corpus = load_corpus(&path, format)?;
            let gazetteer = match config.path("paths.gazetteer") {
                Some(p) => Gazetteer::load(&p)?,
                None => Gazetteer::bangladesh(),
            };
            let mut prep = match config.path("paths.resources") {
                Some(dir) => PrepConfig::from_dir(&dir)?,
                None => PrepConfig::default(),
            };
            prep.min_letters = config.get("prep.min_letters")?;
            prep.max_vocab = config.opt("prep.max_vocab")?;
            prep.max_doc_len = config.opt("prep.max_doc_len")?;
            prep.text_source = config.raw("prep.text_source").parse()?;
            Ok((corpus, gazetteer, prep))
        };
        let (corpus, gazetteer, prep) = ingest().map_err(|e| Error::in_stage("ingest", e))?;
        let prepared = prepare_corpus(&corpus, &prep, Some(&gazetteer)).map_err(|e| Error::in_stage("prep", e))?;
        Ok(Workspace {
            config,
            out,
            seed,
            corpus,
            gazetteer,
            prep,
            prepared,
            notices: Vec::new(),
            stages: Vec::new(),
            selection: None,
            topic_model: None,
            dtm: None,
            sentiment_predictions: None,
            evals: BTreeMap::new(),
            written: Vec::new(),
        })
    }

    pub fn notice(&mut self, msg: impl Into<String>) {
        self.notices.push(msg.into());
    }

    /// Writes `name` into the output directory.
    pub fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.out.join(name), bytes)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.emit(name, &bytes)
    }

    /// Runs `f` as stage `name`, recording its time and tagging failures.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Workspace) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let r = f(self).map_err(|e| Error::in_stage(name, e));
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        r
    }

    pub fn is_skipped(&self, stage: &str) -> bool {
        self.config.skipped().iter().any(|s| s == stage)
    }

    /// Corpus counts, class totals, rejected records and the config
    /// snapshot.
    pub fn write_ingest(&mut self) -> Result<()> {
        let mut class_counts: Vec<(String, usize)> =
            NewsClass::ALL.iter().map(|c| (c.slug().to_string(), 0)).collect();
        let mut unlabeled = 0;
        for a in self.corpus.articles() {
            match a.class_label {
                Some(c) => class_counts[c.index()].1 += 1,
                None => unlabeled += 1,
            }
        }
        let bytes = csv_bytes(|w| {
            w.write_record(["class", "count"])?;
            for (c, n) in &class_counts {
                w.write_record([c.clone(), n.to_string()])?;
            }
            w.write_record(["unlabeled".to_string(), unlabeled.to_string()])?;
            w.write_record(["total".to_string(), self.corpus.len().to_string()])?;
            Ok(())
        })?;
        self.emit("class_counts.csv", &bytes)?;
        let (first, last) = self.corpus.date_range();
        #[derive(Serialize)]
        struct Summary<'a> {
            articles: usize,
            rejected: usize,
            first_date: String,
            last_date: String,
            days: usize,
            weeks: usize,
            by_source: BTreeMap<String, usize>,
            by_language: BTreeMap<String, usize>,
            classes: &'a [(String, usize)],
            unlabeled: usize,
        }
        let summary = Summary {
            articles: self.corpus.len(),
            rejected: self.corpus.rejected().len(),
            first_date: first.to_string(),
            last_date: last.to_string(),
            days: self.corpus.n_days(),
            weeks: self.corpus.n_weeks(),
            by_source: self.corpus.counts_by_source(),
            by_language: self
                .corpus
                .counts_by_language()
                .into_iter()
                .map(|(l, n)| (serde_json::to_value(l).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), n))
                .collect(),
            classes: &class_counts,
            unlabeled,
        };
        self.emit_json("ingest_summary.json", &summary)?;
        let rejected = self.corpus.rejected().to_vec();
        let bytes = csv_bytes(|w| {
            w.write_record(["line", "reason"])?;
            for r in &rejected {
                w.write_record([r.line.to_string(), r.reason.clone()])?;
            }
            Ok(())
        })?;
        self.emit("rejected.csv", &bytes)?;
        let text = self.config.to_text();
        self.emit("config_snapshot.txt", text.as_bytes())
    }

    /// Vocabulary and encoded documents.
    pub fn write_prep(&mut self) -> Result<()> {
        let vocab = &self.prepared.vocab;
        let mut tsv = String::from("id\tword\tdoc_freq\tterm_freq\n");
        for (id, w) in vocab.words().iter().enumerate() {
            tsv.push_str(&format!("{id}\t{w}\t{}\t{}\n", vocab.doc_freq(id as u32), vocab.term_freq(id as u32)));
        }
        self.emit("vocab.tsv", tsv.as_bytes())?;
        let mut lines = Vec::new();
        for d in &self.prepared.docs {
            serde_json::to_writer(&mut lines, d)?;
            lines.push(b'\n');
        }
        self.emit("tokens.jsonl", &lines)?;
        #[derive(Serialize)]
        struct PrepSummary {
            vocab_size: usize,
            vocab_hash: String,
            tokens: usize,
            empty_docs: usize,
        }
        let s = PrepSummary {
            vocab_size: self.prepared.vocab.len(),
            vocab_hash: self.prepared.vocab.hash(),
            tokens: self.prepared.n_tokens(),
            empty_docs: self.prepared.docs.iter().filter(|d| d.tokens.is_empty()).count(),
        };
        self.emit_json("prep_summary.json", &s)
    }

    /// Daily series, district and division totals, and the division × week
    /// grid.
    pub fn volume(&mut self) -> Result<()> {
        let series = build_volume_series(&self.corpus, |_| true)?;
        let bytes = csv_bytes(|w| {
            w.write_record(["date", "count"])?;
            for (i, v) in series.values.iter().enumerate() {
                w.write_record([series.date(i).to_string(), v.to_string()])?;
            }
            Ok(())
        })?;
        self.emit("volume_daily.csv", &bytes)?;
        let labels: Vec<String> = (0..series.values.len()).map(|i| series.date(i).to_string()).collect();
        let chart = svg::line_chart("Daily article volume", &labels, vec![Series::dense("articles", &series.values)]);
        self.emit("volume_daily.svg", chart.as_bytes())?;
        for level in [RegionLevel::District, RegionLevel::Division] {
            let counts = aggregate_volume(&self.corpus, &self.gazetteer, level);
            let share = shares(&counts);
            let bytes = csv_bytes(|w| {
                w.write_record(["region", "count", "share"])?;
                for ((r, n), (_, s)) in counts.iter().zip(&share) {
                    w.write_record([r.clone(), n.to_string(), s.to_string()])?;
                }
                Ok(())
            })?;
            let tag = match level {
                RegionLevel::District => "district",
                RegionLevel::Division => "division",
            };
            self.emit(&format!("volume_{tag}.csv"), &bytes)?;
            if level == RegionLevel::Division {
                let bars: Vec<(String, f64)> = counts.iter().map(|(r, n)| (r.clone(), *n as f64)).collect();
                let chart = svg::bar_chart("Articles per division", &bars);
                self.emit("volume_division.svg", chart.as_bytes())?;
            }
        }
        let grid = volume_grid(&self.corpus, &self.gazetteer)?;
        let mut buf = Vec::new();
        grid.write_csv(&mut buf)?;
        self.emit("volume_region_week.csv", &buf)
    }

    pub fn decompose(&mut self) -> Result<Decomposition> {
        let series = build_volume_series(&self.corpus, |_| true)?;
        let model: DecompModel = self.config.raw("decompose.model").parse()?;
        let opts = DecomposeOptions {
            period: self.config.get("decompose.period")?,
            offset: self.config.get("decompose.offset")?,
            refine: self.config.get("decompose.refine")?,
        };
        let d = decompose(&series, model, opts)?;
        let bytes = csv_bytes(|w| {
            w.write_record(["date", "observed", "trend", "seasonal", "residual"])?;
            for i in 0..d.observed.len() {
                w.write_record([
                    series.date(i).to_string(),
                    d.observed[i].to_string(),
                    opt_cell(d.trend[i]),
                    d.seasonal[i].to_string(),
                    opt_cell(d.residual[i]),
                ])?;
            }
            Ok(())
        })?;
        self.emit("decomposition.csv", &bytes)?;
        #[derive(Serialize)]
        struct Summary<'a> {
            model: DecompModel,
            period: usize,
            start: String,
            level: f64,
            offset: f64,
            seasonal_indices: &'a [f64],
        }
        let s = Summary {
            model: d.model,
            period: d.period,
            start: d.start.to_string(),
            level: d.level,
            offset: d.offset,
            seasonal_indices: &d.seasonal_indices,
        };
        self.emit_json("decomposition.json", &s)?;
        let labels: Vec<String> = (0..d.observed.len()).map(|i| series.date(i).to_string()).collect();
        let panels = [
            Panel {
                title: "observed".into(),
                series: vec![Series::dense("observed", &d.observed)],
            },
            Panel {
                title: "trend".into(),
                series: vec![Series::new("trend", d.trend.clone())],
            },
            Panel {
                title: "seasonal".into(),
                series: vec![Series::dense("seasonal", &d.seasonal)],
            },
            Panel {
                title: "residual".into(),
                series: vec![Series::new("residual", d.residual.clone())],
            },
        ];
        let title = format!("{} decomposition, period {}", self.config.raw("decompose.model"), d.period);
        self.emit("decomposition.svg", svg::line_panels(&title, &labels, &panels).as_bytes())?;
        Ok(d)
    }

    fn docs(&self) -> Vec<Vec<u32>> {
        self.prepared.token_lists()
    }

    pub fn topics_sweep(&mut self) -> Result<SelectionReport> {
        let (lo, hi): (usize, usize) = (self.config.get("topics.k_min")?, self.config.get("topics.k_max")?);
        let ks: Vec<usize> = (lo..=hi).collect();
        let coherence = match self.config.raw("topics.coherence").trim() {
            "npmi" => Coherence::Npmi {
                window: self.config.get("topics.npmi_window")?,
            },
            _ => Coherence::UMass,
        };
        let template = lda_template(&self.config, lo)?;
        let report = sweep_k(
            &self.docs(),
            self.prepared.vocab.len(),
            &ks,
            &template,
            coherence,
            self.config.get("topics.top_m")?,
            self.config.get("topics.fold_in_sweeps")?,
        )?;
        let bytes = csv_bytes(|w| {
            w.write_record(["k", "coherence", "log_perplexity"])?;
            for s in &report.scores {
                w.write_record([s.k.to_string(), s.coherence.to_string(), s.log_perplexity.to_string()])?;
            }
            Ok(())
        })?;
        self.emit("k_sweep.csv", &bytes)?;
        self.emit_json("selection.json", &report)?;
        let labels: Vec<String> = report.scores.iter().map(|s| s.k.to_string()).collect();
        let panels = [
            Panel {
                title: "coherence".into(),
                series: vec![Series::new("coherence", report.scores.iter().map(|s| Some(s.coherence)).collect())],
            },
            Panel {
                title: "log perplexity (per word)".into(),
                series: vec![Series::new(
                    "log_perplexity",
                    report.scores.iter().map(|s| Some(s.log_perplexity)).collect(),
                )],
            },
        ];
        let chart = svg::line_panels(&format!("Topic count sweep, chosen K = {}", report.chosen_k), &labels, &panels);
        self.emit("k_sweep.svg", chart.as_bytes())?;
        self.selection = Some(report.clone());
        Ok(report)
    }

    /// K for the static fit: `topics.k`, then this run's sweep, then a
    /// `selection.json` left by an earlier run, else a fresh sweep.
    pub fn resolve_k(&mut self) -> Result<usize> {
        if let Some(k) = self.config.opt("topics.k")? {
            return Ok(k);
        }
        if let Some(s) = &self.selection {
            return Ok(s.chosen_k);
        }
        let path = self.out.join("selection.json");
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(k) = v.get("chosen_k").and_then(|k| k.as_u64()) {
                return Ok(k as usize);
            }
        }
        Ok(self.topics_sweep()?.chosen_k)
    }

    pub fn topics_fit(&mut self, k: usize) -> Result<TopicModel> {
        let cfg = lda_template(&self.config, k)?;
        let model = fit_lda(&self.docs(), self.prepared.vocab.len(), &cfg)?;
        let ids: Vec<String> = self.corpus.articles().iter().map(|a| a.id.clone()).collect();
        let saved = SavedTopicModel::new(&model, &cfg, self.prepared.vocab.hash(), ids.clone());
        let bytes = serde_json::to_vec(&saved)?;
        self.emit("topic_model.json", &bytes)?;
        self.write_top_words(&model)?;
        let bytes = csv_bytes(|w| {
            let mut header = vec!["article_id".to_string()];
            header.extend((0..model.k).map(|t| format!("topic_{t}")));
            w.write_record(&header)?;
            for (d, id) in ids.iter().enumerate() {
                let mut row = vec![id.clone()];
                row.extend(model.theta_row(d).iter().map(|p| p.to_string()));
                w.write_record(&row)?;
            }
            Ok(())
        })?;
        self.emit("doc_topics.csv", &bytes)?;
        self.topic_model = Some(model.clone());
        Ok(model)
    }

    pub fn write_top_words(&mut self, model: &TopicModel) -> Result<()> {
        let m = self.config.get("topics.top_m")?;
        let vocab = &self.prepared.vocab;
        let bytes = csv_bytes(|w| {
            w.write_record(["topic", "rank", "word", "phi"])?;
            for (k, words) in top_words(model, m).iter().enumerate() {
                for (rank, (id, p)) in words.iter().enumerate() {
                    w.write_record([k.to_string(), (rank + 1).to_string(), vocab.word(*id).to_string(), p.to_string()])?;
                }
            }
            Ok(())
        })?;
        self.emit("top_words.csv", &bytes)
    }

    /// Topic model from this run or from `topic_model.json`, checked against
    /// the current vocabulary and corpus.
    pub fn load_topic_model(&mut self) -> Result<Option<TopicModel>> {
        if let Some(m) = &self.topic_model {
            return Ok(Some(m.clone()));
        }
        let path = self.out.join("topic_model.json");
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let saved: SavedTopicModel = serde_json::from_str(&text)?;
        if saved.vocab_hash != self.prepared.vocab.hash() {
            return Err(Error::data(format!(
                "{} was fitted on a different vocabulary",
                path.display()
            )));
        }
        let ids: Vec<&str> = self.corpus.articles().iter().map(|a| a.id.as_str()).collect();
        if saved.doc_ids.iter().map(String::as_str).ne(ids.iter().copied()) {
            return Err(Error::data(format!("{} was fitted on a different corpus", path.display())));
        }
        let model = saved.into_model()?;
        self.topic_model = Some(model.clone());
        Ok(Some(model))
    }

    pub fn dtm_fit(&mut self, k: usize) -> Result<DtmModel> {
        let cfg = DtmConfig {
            k,
            alpha: self.config.opt("dtm.alpha")?,
            beta: self.config.get("dtm.beta")?,
            kappa: self.config.get("dtm.kappa")?,
            iterations: self.config.get("dtm.iterations")?,
            burn_in: self.config.get("dtm.burn_in")?,
            seed: self.seed,
            estimate: Estimate::FinalCounts,
        };
        let slices = slice_documents(&self.prepared.docs, self.corpus.n_weeks())?;
        let model = fit_dtm(&slices, self.prepared.vocab.len(), &cfg)?;
        let bytes = serde_json::to_vec(&model)?;
        self.emit("dtm_model.json", &bytes)?;
        self.dtm_export(&model)?;
        self.dtm = Some(model.clone());
        Ok(model)
    }

    pub fn load_dtm(&self) -> Result<DtmModel> {
        let path = self.out.join("dtm_model.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let model: DtmModel = serde_json::from_str(&text)?;
        if model.v != self.prepared.vocab.len() {
            return Err(Error::data(format!("{} does not match the vocabulary", path.display())));
        }
        Ok(model)
    }

    pub fn dtm_export(&mut self, model: &DtmModel) -> Result<()> {
        let mut buf = Vec::new();
        write_prevalence_csv(model, &mut buf)?;
        self.emit("dtm_prevalence.csv", &buf)?;
        let mut buf = Vec::new();
        write_top_words_csv(model, &self.prepared.vocab, self.config.get("dtm.top_words")?, &mut buf)?;
        self.emit("dtm_top_words.csv", &buf)?;
        let labels: Vec<String> = model.weeks.iter().map(|w| format!("week {w}")).collect();
        let series: Vec<Series> = (0..model.k)
            .map(|k| Series::new(format!("topic {k}"), crate::dtm::topic_trajectory(model, k)))
            .collect();
        let chart = svg::line_chart("Weekly topic prevalence", &labels, series);
        self.emit("dtm_prevalence.svg", chart.as_bytes())
    }

    fn label_field(&self, task: Task) -> LabelField {
        match task {
            Task::Sentiment => LabelField::Sentiment,
            Task::Classify if self.config.raw("classify.label").trim() == "subclass" => LabelField::Subclass,
            Task::Classify => LabelField::Class,
        }
    }

    fn gold(&self, task: Task, i: usize) -> Option<String> {
        let a = &self.corpus.articles()[i];
        match self.label_field(task) {
            LabelField::Class => a.class_label.map(|c| c.slug().to_string()),
            LabelField::Subclass => a.subclass_label.map(|s| s.number().to_string()),
            LabelField::Sentiment => a.sentiment_label.map(|s| sentiment_name(s).to_string()),
            _ => None,
        }
    }

    /// Label names present in the corpus, in canonical order.
    fn label_set(&self, task: Task) -> Vec<String> {
        let present: std::collections::BTreeSet<String> =
            (0..self.corpus.len()).filter_map(|i| self.gold(task, i)).collect();
        let canonical: Vec<String> = match self.label_field(task) {
            LabelField::Class => NewsClass::ALL.iter().map(|c| c.slug().to_string()).collect(),
            LabelField::Subclass => (1..=19).map(|n| n.to_string()).collect(),
            _ => vec!["positive".into(), "negative".into()],
        };
        canonical.into_iter().filter(|l| present.contains(l)).collect()
    }

    fn network_ids(&self, map: &TokenMap, i: usize) -> Vec<u32> {
        map.encode(&self.prepared.docs[i].tokens)
    }

    /// Trains the task's network on the train split, scores the test split
    /// and predicts every article. Returns `None` (with a notice) when the
    /// corpus lacks two distinct labels.
    pub fn train(&mut self, task: Task) -> Result<Option<Checkpoint>> {
        let labels = self.label_set(task);
        if labels.len() < 2 {
            self.notice(format!(
                "{}: corpus has {} distinct labels; training skipped",
                task.name(),
                labels.len()
            ));
            return Ok(None);
        }
        let ratios = SplitRatios::new(
            self.config.get("split.train")?,
            self.config.get("split.validation")?,
            self.config.get("split.test")?,
        )?;
        let split = split_dataset(&self.corpus, ratios, self.seed, self.label_field(task))?;
        self.emit_json(&format!("{}_splits.json", task.prefix()), &split)?;
        let mut spec = match task {
            Task::Classify => classifier_spec(&self.config, labels.len())?,
            Task::Sentiment => sentiment_spec(&self.config)?,
        };
        let map = TokenMap::from_vocab(&self.prepared.vocab, spec.vocab_size);
        spec.vocab_size = map.len().max(2);
        let index: HashMap<&str, usize> =
            self.corpus.articles().iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
        let label_index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let examples = |ids: &[String]| -> Vec<Example> {
            ids.iter()
                .map(|id| {
                    let i = index[id.as_str()];
                    let gold = self.gold(task, i).expect("split holds labeled articles");
                    Example::new(self.network_ids(&map, i), label_index[gold.as_str()])
                })
                .collect()
        };
        let (train_set, val_set) = (examples(&split.train), examples(&split.validation));
        let mut net = Network::new(&spec)?;
        if let Some(path) = self.config.path("paths.embeddings") {
            let f = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let (table, hits) = load_word2vec(std::io::BufReader::new(f), &map.words, spec.embed_dim, spec.seed)?;
            net.embedding.table.value = table;
            self.notice(format!(
                "{}: {} of {} words found in {}",
                task.name(),
                hits,
                map.len() - 1,
                path.display()
            ));
        }
        let (net, log) = train_from(net, &train_set, &val_set)?;
        let ckpt = Checkpoint::new(net, map, labels);
        let bytes = {
            let mut b = Vec::new();
            ckpt.write(&mut b)?;
            b
        };
        self.emit(&format!("{}_model.json", task.prefix()), &bytes)?;
        self.write_training_log(task, &log)?;
        self.evaluate(task, &ckpt)?;
        self.predict_all(task, &ckpt)?;
        Ok(Some(ckpt))
    }

    fn write_training_log(&mut self, task: Task, log: &[EpochLog]) -> Result<()> {
        let mut buf = Vec::new();
        write_training_log(log, &mut buf)?;
        self.emit(&format!("{}_log.csv", task.prefix()), &buf)?;
        let epochs: Vec<usize> = {
            let mut e: Vec<usize> = log.iter().map(|l| l.epoch).collect();
            e.dedup();
            e
        };
        let labels: Vec<String> = epochs.iter().map(|e| format!("epoch {e}")).collect();
        let pick = |split: &str, f: fn(&EpochLog) -> f64| -> Series {
            Series::new(
                split,
                epochs
                    .iter()
                    .map(|e| log.iter().find(|l| l.epoch == *e && l.split == split).map(f))
                    .collect(),
            )
        };
        let panels = [
            Panel {
                title: "loss".into(),
                series: vec![pick("train", |l| l.loss), pick("validation", |l| l.loss)],
            },
            Panel {
                title: "accuracy".into(),
                series: vec![pick("train", |l| l.accuracy), pick("validation", |l| l.accuracy)],
            },
        ];
        let chart = svg::line_panels(&format!("{} training", task.prefix()), &labels, &panels);
        self.emit(&format!("{}_training.svg", task.prefix()), chart.as_bytes())
    }

    /// Loads `<task>_model.json` from the output directory.
    pub fn load_checkpoint(&self, task: Task) -> Result<Checkpoint> {
        let ckpt = Checkpoint::load(&self.out.join(format!("{}_model.json", task.prefix())))?;
        if ckpt.token_map.vocab_hash != self.prepared.vocab.hash() {
            return Err(Error::data(format!(
                "{} model was trained on a different vocabulary",
                task.name()
            )));
        }
        Ok(ckpt)
    }

    /// Scores the checkpoint on the test split (validation split when the
    /// test split is empty).
    pub fn evaluate(&mut self, task: Task, ckpt: &Checkpoint) -> Result<EvalReport> {
        let ratios = SplitRatios::new(
            self.config.get("split.train")?,
            self.config.get("split.validation")?,
            self.config.get("split.test")?,
        )?;
        let split = split_dataset(&self.corpus, ratios, self.seed, self.label_field(task))?;
        let ids = if split.test.is_empty() { &split.validation } else { &split.test };
        if ids.is_empty() {
            return Err(Error::data(format!("{}: no held-out articles to evaluate", task.name())));
        }
        let index: HashMap<&str, usize> =
            self.corpus.articles().iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for id in ids {
            let i = index[id.as_str()];
            gold.push(self.gold(task, i).expect("split holds labeled articles"));
            let (c, _) = predict(&ckpt.network, &self.network_ids(&ckpt.token_map, i))?;
            pred.push(ckpt.labels[c].clone());
        }
        let report = evaluate(&gold, &pred, &ckpt.labels)?;
        let mut buf = Vec::new();
        report.write_json(&mut buf)?;
        self.emit(&format!("{}_eval.json", task.prefix()), &buf)?;
        let mut buf = Vec::new();
        report.confusion.write_csv(&mut buf)?;
        self.emit(&format!("{}_confusion.csv", task.prefix()), &buf)?;
        self.evals.insert(task.prefix(), report.clone());
        Ok(report)
    }

    /// Predicts every article of the corpus.
    pub fn predict_all(&mut self, task: Task, ckpt: &Checkpoint) -> Result<()> {
        let mut preds = HashMap::new();
        let mut rows = Vec::new();
        for (i, a) in self.corpus.articles().iter().enumerate() {
            let (c, p) = predict(&ckpt.network, &self.network_ids(&ckpt.token_map, i))?;
            if task == Task::Sentiment {
                preds.insert(a.id.clone(), if c == 0 { Sentiment::Positive } else { Sentiment::Negative });
            }
            rows.push((a.id.clone(), self.gold(task, i).unwrap_or_default(), ckpt.labels[c].clone(), p));
        }
        let bytes = csv_bytes(|w| {
            let mut header = vec!["article_id".to_string(), "gold".into(), "predicted".into()];
            header.extend(ckpt.labels.iter().map(|l| format!("p_{l}")));
            w.write_record(&header)?;
            for (id, gold, pred, p) in &rows {
                let mut r = vec![id.clone(), gold.clone(), pred.clone()];
                r.extend(p.iter().map(|x| x.to_string()));
                w.write_record(&r)?;
            }
            Ok(())
        })?;
        self.emit(&format!("{}_predictions.csv", task.prefix()), &bytes)?;
        if task == Task::Sentiment {
            // Sentiment label order is fixed: positive = 0, negative = 1.
            if ckpt.labels != ["positive", "negative"] {
                return Err(Error::data("sentiment model labels must be [positive, negative]"));
            }
            self.sentiment_predictions = Some(preds);
        }
        Ok(())
    }

    /// Predicts the articles of another corpus with a saved checkpoint,
    /// using this run's text preparation. Rows are `(id, label, probs)`.
    pub fn predict_corpus(&self, ckpt: &Checkpoint, corpus: &Corpus) -> Result<Vec<(String, String, Vec<f64>)>> {
        let ids: HashMap<&str, u32> = ckpt
            .token_map
            .words
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect();
        corpus
            .articles()
            .iter()
            .map(|a| {
                let mut terms = self.prep.terms(&self.prep.text_source.text_of(a));
                if let Some(cap) = self.prep.max_doc_len {
                    terms.truncate(cap);
                }
                let net_ids: Vec<u32> = terms.iter().map(|t| ids.get(t.as_str()).copied().unwrap_or(0)).collect();
                let (c, p) = predict(&ckpt.network, &net_ids)?;
                Ok((a.id.clone(), ckpt.labels[c].clone(), p))
            })
            .collect()
    }

    /// Regional topic distributions, per-topic division × week grids and
    /// sentiment grids. Parts whose inputs are missing are skipped with a
    /// notice.
    pub fn geo(&mut self) -> Result<()> {
        let level: RegionLevel = self.config.raw("geo.level").parse()?;
        let mode = match self.config.raw("geo.topic_assign").trim() {
            "argmax" => TopicAssign::Argmax,
            _ => TopicAssign::Mass,
        };
        let tag = self.config.raw("geo.level").trim().to_string();
        match self.load_topic_model()? {
            Some(model) => {
                let thetas: Vec<Vec<f64>> = (0..model.n_docs()).map(|d| model.theta_row(d).to_vec()).collect();
                let regions: Vec<_> = self.prepared.docs.iter().map(|d| d.region.clone()).collect();
                let by_region = topic_by_region(&regions, &thetas, &self.gazetteer, level, mode)?;
                let bytes = csv_bytes(|w| {
                    let mut header = vec!["region".to_string()];
                    header.extend((0..model.k).map(|k| format!("topic_{k}")));
                    w.write_record(&header)?;
                    for (r, dist) in &by_region {
                        let mut row = vec![r.clone()];
                        row.extend(dist.iter().map(|p| p.to_string()));
                        w.write_record(&row)?;
                    }
                    Ok(())
                })?;
                self.emit(&format!("geo_topics_{tag}.csv"), &bytes)?;
                for k in 0..model.k {
                    let grid = topic_mass_grid(&self.corpus, &self.gazetteer, &thetas, k, mode)?;
                    let mut buf = Vec::new();
                    grid.write_csv(&mut buf)?;
                    self.emit(&format!("geo_topic_{k}_week.csv"), &buf)?;
                }
            }
            None => self.notice("geo: no topic model; regional topic tables skipped"),
        }
        let preds = match &self.sentiment_predictions {
            Some(p) => p.clone(),
            None => match self.load_checkpoint(Task::Sentiment) {
                Ok(ckpt) => {
                    self.predict_all(Task::Sentiment, &ckpt)?;
                    self.sentiment_predictions.clone().unwrap_or_default()
                }
                Err(_) => HashMap::new(),
            },
        };
        match sentiment_grid(&self.corpus, &self.gazetteer, &preds) {
            Ok((pos, neg)) => {
                for (name, grid) in [("positive", &pos), ("negative", &neg)] {
                    let mut buf = Vec::new();
                    grid.write_csv(&mut buf)?;
                    self.emit(&format!("geo_sentiment_{name}_week.csv"), &buf)?;
                }
                let p = pos.row_totals();
                let n = neg.row_totals();
                let bytes = csv_bytes(|w| {
                    w.write_record(["region", "positive", "negative"])?;
                    for ((r, a), (_, b)) in p.iter().zip(&n) {
                        w.write_record([r.clone(), a.to_string(), b.to_string()])?;
                    }
                    Ok(())
                })?;
                self.emit("geo_sentiment_division.csv", &bytes)?;
            }
            Err(e) if e.is_data_error() => {
                self.notice("geo: articles without gold or predicted sentiment; sentiment grids skipped")
            }
            Err(e) => return Err(e),
        }
        let counts = aggregate_volume(&self.corpus, &self.gazetteer, level);
        let rows: Vec<(String, f64)> = shares(&counts);
        let mut buf = Vec::new();
        geo::write_choropleth_csv(&rows, &mut buf)?;
        self.emit(&format!("geo_share_{tag}.csv"), &buf)
    }

    /// Human-readable summary of whatever this run produced.
    pub fn write_report(&mut self) -> Result<()> {
        let mut md = String::new();
        let (first, last) = self.corpus.date_range();
        md.push_str("# Monitoring report\n\n");
        md.push_str(&format!(
            "{} articles from {first} to {last} ({} weeks), seed {}.\n\n",
            self.corpus.len(),
            self.corpus.n_weeks(),
            self.seed
        ));
        md.push_str(&format!(
            "Vocabulary: {} words, {} tokens.\n\n",
            self.prepared.vocab.len(),
            self.prepared.n_tokens()
        ));
        md.push_str("## Volume by division\n\n| division | articles | share |\n|---|---|---|\n");
        let counts = aggregate_volume(&self.corpus, &self.gazetteer, RegionLevel::Division);
        for ((r, n), (_, s)) in counts.iter().zip(shares(&counts)) {
            md.push_str(&format!("| {r} | {n} | {:.1}% |\n", 100.0 * s));
        }
        if let Some(sel) = &self.selection {
            md.push_str(&format!("\n## Topics\n\nChosen K = {} (highest mean coherence).\n\n", sel.chosen_k));
            md.push_str("| K | coherence | log perplexity |\n|---|---|---|\n");
            for s in &sel.scores {
                md.push_str(&format!("| {} | {:.4} | {:.4} |\n", s.k, s.coherence, s.log_perplexity));
            }
        }
        if let Some(model) = &self.topic_model {
            md.push_str("\nTop words:\n\n");
            for (k, words) in top_words(model, 5).iter().enumerate() {
                let ws: Vec<&str> = words.iter().map(|(id, _)| self.prepared.vocab.word(*id)).collect();
                md.push_str(&format!("- topic {k}: {}\n", ws.join(", ")));
            }
        }
        if let Some(dtm) = &self.dtm {
            md.push_str(&format!(
                "\n## Dynamic topics\n\n{} topics over {} weekly slices.\n",
                dtm.k,
                dtm.n_slices()
            ));
        }
        for (name, r) in &self.evals {
            md.push_str(&format!(
                "\n## {name}\n\nTest accuracy {:.4}, macro precision {:.4}, recall {:.4}, F1 {:.4} (n = {}).\n",
                r.accuracy, r.macro_avg.precision, r.macro_avg.recall, r.macro_avg.f1, r.n
            ));
        }
        if !self.notices.is_empty() {
            md.push_str("\n## Notices\n\n");
            for n in &self.notices {
                md.push_str(&format!("- {n}\n"));
            }
        }
        self.emit("report.md", md.as_bytes())
    }

    /// Rewrites `manifest.tsv` (every content file with its SHA-256) and
    /// `run_manifest.json` (timestamps, config, stage timings, outcome).
    pub fn finish(&mut self, command: &str, started: Timestamp, error: Option<&Error>) -> Result<Vec<String>> {
        let files = manifest(&self.out)?;
        let mut tsv = String::from("path\tbytes\tsha256\n");
        for (p, n, h) in &files {
            tsv.push_str(&format!("{p}\t{n}\t{h}\n"));
        }
        write_file(&self.out.join("manifest.tsv"), tsv.as_bytes())?;
        #[derive(Serialize)]
        struct RunRecord<'a> {
            command: &'a str,
            started_at: String,
            finished_at: String,
            seed: u64,
            status: &'a str,
            error: Option<String>,
            config: &'a BTreeMap<String, String>,
            stages: &'a [StageTiming],
            written: &'a [String],
            notices: &'a [String],
        }
        let rec = RunRecord {
            command,
            started_at: started.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            seed: self.seed,
            status: if error.is_some() { "failed" } else { "ok" },
            error: error.map(|e| e.to_string()),
            config: self.config.snapshot(),
            stages: &self.stages,
            written: &self.written,
            notices: &self.notices,
        };
        let mut bytes = serde_json::to_vec_pretty(&rec)?;
        bytes.push(b'\n');
        write_file(&self.out.join("run_manifest.json"), &bytes)?;
        Ok(files.into_iter().map(|f| f.0).collect())
    }
}

fn sentiment_name(s: Sentiment) -> &'static str {
    match s {
        Sentiment::Positive => "positive",
        Sentiment::Negative => "negative",
    }
}

/// Prediction rows as `article_id,predicted,p_<label>...`.
pub fn write_predictions_csv<W: Write>(rows: &[(String, String, Vec<f64>)], labels: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["article_id".to_string(), "predicted".into()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    w.write_record(&header)?;
    for (id, l, p) in rows {
        let mut r = vec![id.clone(), l.clone()];
        r.extend(p.iter().map(|x| x.to_string()));
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

/// `(relative path, bytes, sha256)` for every content file under `dir`,
/// sorted by path.
pub fn manifest(dir: &Path) -> Result<Vec<(String, u64, String)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let entry = entry.map_err(|e| Error::io(&d, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path
                .strip_prefix(dir)
                .expect("walk stays under dir")
                .to_string_lossy()
                .replace('\\', "/");
            if VOLATILE.contains(&rel.as_str()) {
                continue;
            }
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            out.push((rel, bytes.len() as u64, to_hex(&Sha256::digest(&bytes))));
        }
    }
    out.sort();
    Ok(out)
}

/// Full run: every stage not listed in `run.skip`, then the report and the
/// manifests. On a stage failure the manifests are still written and the
/// stage-tagged error is returned.
pub fn run_pipeline(config: RunConfig) -> Result<PipelineReport> {
    let started = now();
    let mut ws = Workspace::open(config)?;
    let result = run_stages(&mut ws);
    let files = ws.finish("report", started, result.as_ref().err())?;
    result?;
    Ok(PipelineReport {
        out_dir: ws.out.clone(),
        files,
        notices: ws.notices.clone(),
        chosen_k: ws.selection.as_ref().map(|s| s.chosen_k),
        stages: ws.stages.clone(),
    })
}

fn run_stages(ws: &mut Workspace) -> Result<()> {
    ws.stage("ingest", |ws| ws.write_ingest())?;
    ws.stage("prep", |ws| ws.write_prep())?;
    if !ws.is_skipped("volume") {
        ws.stage("volume", |ws| ws.volume())?;
    }
    if !ws.is_skipped("decompose") {
        ws.stage("decompose", |ws| ws.decompose().map(|_| ()))?;
    }
    let mut k = None;
    if !ws.is_skipped("topics") {
        k = Some(ws.stage("topics", |ws| {
            let k = match ws.config.opt("topics.k")? {
                Some(k) => k,
                None => ws.topics_sweep()?.chosen_k,
            };
            ws.topics_fit(k)?;
            Ok(k)
        })?);
    }
    if !ws.is_skipped("dtm") {
        ws.stage("dtm", |ws| {
            let k = match (ws.config.opt("dtm.k")?, k) {
                (Some(k), _) | (None, Some(k)) => k,
                (None, None) => ws.resolve_k()?,
            };
            ws.dtm_fit(k).map(|_| ())
        })?;
    }
    for task in [Task::Classify, Task::Sentiment] {
        if !ws.is_skipped(task.name()) {
            ws.stage(task.name(), |ws| ws.train(task).map(|_| ()))?;
        }
    }
    if !ws.is_skipped("geo") {
        ws.stage("geo", |ws| ws.geo())?;
    }
    ws.stage("report", |ws| ws.write_report())
}

/// Writes the bundled mini corpus and its resources into `dir`.
pub fn write_mini_bundle(dir: &Path, n_docs: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let corpus = Corpus::from_articles(crate::synth::mini_corpus(n_docs, seed))?;
    let path = dir.join("corpus.jsonl");
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(f);
    corpus.write_jsonl(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    let res = crate::synth::mini_resources();
    write_file(&dir.join("stopwords.txt"), res.stopwords.as_bytes())?;
    write_file(&dir.join("suffixes.txt"), res.suffixes.as_bytes())?;
    write_file(&dir.join("lemma_overrides.tsv"), res.lemma_overrides.as_bytes())?;
    write_file(&dir.join("config.txt"), MINI_CONFIG.as_bytes())
}

/// Run configuration shipped with the mini corpus: defaults except
/// where the 200-article scale calls for smaller settings.
pub const MINI_CONFIG: &str = "\
# Mini-corpus run. Unlisted keys keep their defaults.
seed = 42

[paths]
corpus = corpus.jsonl
resources = .
output = out

[decompose]
# some days have no articles
offset = true

[topics]
k_min = 2
k_max = 10
iterations = 300
burn_in = 100
fold_in_sweeps = 20

[dtm]
iterations = 200
burn_in = 50

[classify]
embed_dim = 32
hidden = 32
max_len = 100
epochs = 10
batch_size = 8
lr = 0.01

[sentiment]
embed_dim = 32
filters = 32
hidden = 16
dense = 16
epochs = 10
batch_size = 16
lr = 0.005
";
