use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// One recognised configuration key.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    /// Empty means "unset".
    pub default: &'static str,
    pub help: &'static str,
}

macro_rules! keys {
    ($($key:literal = $default:literal : $help:literal;)*) => {
        &[$(KeySpec { key: $key, default: $default, help: $help }),*]
    };
}

/// Every key a run configuration accepts, with its default.
pub const KEYS: &[KeySpec] = keys! {
    "seed" = "42" : "global seed (MONITOR_SEED overrides)";
    "paths.corpus" = "" : "corpus file (.jsonl or .csv)";
    "paths.format" = "auto" : "corpus format: auto, jsonl or csv";
    "paths.resources" = "" : "directory with stopwords.txt, suffixes.txt, lemma_overrides.tsv";
    "paths.gazetteer" = "" : "district,division CSV; empty uses the bundled one";
    "paths.embeddings" = "" : "word2vec text vectors for the neural models";
    "paths.output" = "out" : "output directory";
    "run.skip" = "" : "comma-separated stages to skip (volume, decompose, topics, dtm, classify, sentiment, geo)";
    "prep.min_letters" = "6" : "minimum letters per token";
    "prep.max_vocab" = "" : "keep only the most frequent words";
    "prep.max_doc_len" = "" : "truncate documents to this many tokens";
    "prep.text_source" = "body" : "body, or all (title, body and summary)";
    "split.train" = "0.8" : "train fraction";
    "split.validation" = "0.1" : "validation fraction";
    "split.test" = "0.1" : "test fraction";
    "decompose.model" = "multiplicative" : "additive or multiplicative";
    "decompose.period" = "7" : "seasonal period in days";
    "decompose.offset" = "false" : "add 1 before a multiplicative fit";
    "decompose.refine" = "50" : "trend refinement rounds (0 = single pass)";
    "topics.k_min" = "2" : "smallest K in the sweep";
    "topics.k_max" = "10" : "largest K in the sweep";
    "topics.k" = "" : "fixed K; empty uses the sweep's choice";
    "topics.alpha" = "" : "document-topic prior; empty means 50/K";
    "topics.beta" = "0.01" : "topic-word prior";
    "topics.iterations" = "1000" : "Gibbs sweeps";
    "topics.burn_in" = "200" : "sweeps before averaging";
    "topics.estimate" = "final" : "final or averaged";
    "topics.coherence" = "umass" : "umass or npmi";
    "topics.npmi_window" = "10" : "sliding window for npmi";
    "topics.top_m" = "10" : "top words per topic";
    "topics.fold_in_sweeps" = "50" : "fold-in sweeps for perplexity";
    "dtm.k" = "" : "topic count; empty reuses the static K";
    "dtm.alpha" = "" : "document-topic prior; empty means 50/K";
    "dtm.beta" = "0.01" : "topic-word prior";
    "dtm.kappa" = "50" : "coupling mass to the previous slice";
    "dtm.iterations" = "300" : "Gibbs sweeps per slice";
    "dtm.burn_in" = "100" : "sweeps before averaging";
    "dtm.top_words" = "10" : "top words per topic and week";
    "classify.label" = "class" : "class or subclass";
    "classify.vocab_size" = "50000" : "embedding rows including the pad";
    "classify.embed_dim" = "300" : "embedding width";
    "classify.max_len" = "1000" : "tokens kept per document";
    "classify.hidden" = "100" : "LSTM units";
    "classify.epochs" = "5" : "training epochs";
    "classify.batch_size" = "32" : "mini-batch size";
    "classify.lr" = "0.001" : "Adam learning rate";
    "classify.l2" = "0.0001" : "L2 strength on kernels";
    "sentiment.vocab_size" = "60000" : "embedding rows including the pad";
    "sentiment.embed_dim" = "300" : "embedding width";
    "sentiment.max_len" = "200" : "tokens kept per document";
    "sentiment.filters" = "200" : "convolution filters";
    "sentiment.width" = "3" : "convolution width";
    "sentiment.pool" = "2" : "max-pool window";
    "sentiment.hidden" = "100" : "BiLSTM units per direction";
    "sentiment.dropout" = "0.5" : "dropout after each BiLSTM layer";
    "sentiment.dense" = "64" : "hidden dense units";
    "sentiment.epochs" = "5" : "training epochs";
    "sentiment.batch_size" = "256" : "mini-batch size";
    "sentiment.lr" = "0.001" : "Adam learning rate";
    "sentiment.l2" = "0.0001" : "L2 strength on kernels";
    "geo.level" = "division" : "district or division for region tables";
    "geo.topic_assign" = "mass" : "mass or argmax";
};

pub fn key_spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

/// Flat `section.key = value` configuration. Relative paths resolve against
/// the directory of the file they were read from.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|k| (k.key.to_string(), k.default.to_string())).collect(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.base_dir.as_os_str().is_empty() {
            cfg.base_dir = PathBuf::from(".");
        }
        Ok(cfg)
    }

    /// Parses `key = value` lines. `[section]` headers prefix the keys that
    /// follow; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            cfg.set(&key, v.trim())
                .map_err(|e| Error::config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Directory relative paths resolve against.
    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key_spec(key).is_none() {
            return Err(Error::config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `MONITOR_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(seed) = std::env::var("MONITOR_SEED") {
            seed.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(format!("MONITOR_SEED={seed:?} is not an integer")))?;
            self.values.insert("seed".into(), seed.trim().to_string());
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    /// Parsed value; an empty value is an error.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?
            .ok_or_else(|| Error::config(format!("{key} must be set")))
    }

    /// Parsed value, `None` when empty.
    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let v = self.raw(key).trim();
        if v.is_empty() {
            return Ok(None);
        }
        v.parse()
            .map(Some)
            .map_err(|_| Error::config(format!("{key} = {v:?} is not valid")))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    /// Resolved path, `None` when unset.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key).trim();
        if v.is_empty() {
            return None;
        }
        let p = Path::new(v);
        Some(if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.path("paths.output").unwrap_or_else(|| self.base_dir.join("out"))
    }

    pub fn skipped(&self) -> Vec<String> {
        self.raw("run.skip")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    /// Every key with its effective value, for run records.
    pub fn snapshot(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// The snapshot in config-file form.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks that typed keys parse and referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let corpus = self
            .path("paths.corpus")
            .ok_or_else(|| Error::config("paths.corpus must be set"))?;
        for (key, p) in [
            ("paths.corpus", Some(corpus)),
            ("paths.resources", self.path("paths.resources")),
            ("paths.gazetteer", self.path("paths.gazetteer")),
            ("paths.embeddings", self.path("paths.embeddings")),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::config(format!("{key}: {} does not exist", p.display())));
                }
            }
        }
        for stage in self.skipped() {
            if !super::SKIPPABLE.contains(&stage.as_str()) {
                return Err(Error::config(format!("run.skip: unknown stage {stage:?}")));
            }
        }
        let usize_keys = [
            "prep.min_letters",
            "decompose.period",
            "decompose.refine",
            "topics.k_min",
            "topics.k_max",
            "topics.iterations",
            "topics.burn_in",
            "topics.npmi_window",
            "topics.top_m",
            "topics.fold_in_sweeps",
            "dtm.iterations",
            "dtm.burn_in",
            "dtm.top_words",
        ];
        for k in usize_keys {
            self.get::<usize>(k)?;
        }
        for k in ["prep.max_vocab", "prep.max_doc_len", "topics.k", "dtm.k"] {
            self.opt::<usize>(k)?;
        }
        for k in ["split.train", "split.validation", "split.test", "topics.beta", "dtm.beta", "dtm.kappa"] {
            self.get::<f64>(k)?;
        }
        for k in ["topics.alpha", "dtm.alpha"] {
            self.opt::<f64>(k)?;
        }
        self.get::<bool>("decompose.offset")?;
        if self.get::<usize>("topics.k_min")? > self.get::<usize>("topics.k_max")? {
            return Err(Error::config("topics.k_min exceeds topics.k_max"));
        }
        for (key, allowed) in [
            ("paths.format", &["auto", "jsonl", "csv"][..]),
            ("prep.text_source", &["body", "all", "title_body_summary"][..]),
            ("decompose.model", &["additive", "multiplicative"][..]),
            ("topics.estimate", &["final", "averaged"][..]),
            ("topics.coherence", &["umass", "npmi"][..]),
            ("classify.label", &["class", "subclass"][..]),
            ("geo.level", &["district", "division"][..]),
            ("geo.topic_assign", &["mass", "argmax"][..]),
        ] {
            let v = self.raw(key).trim();
            if !allowed.contains(&v) {
                return Err(Error::config(format!("{key} = {v:?}; expected one of {}", allowed.join(", "))));
            }
        }
        super::classifier_spec(self, 2)?.validate()?;
        super::sentiment_spec(self)?.validate()?;
        Ok(())
    }
}
