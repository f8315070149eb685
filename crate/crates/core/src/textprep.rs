//! Text preparation: normalization, tokenization, lemma overrides, suffix
//! stripping, stopword and length filtering, and vocabulary encoding.
//!
//! The per-token chain is fixed:
//! normalize -> tokenize -> lemma override -> suffix strip -> stopword filter
//! -> minimum-length filter -> encode.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_general_category::get_general_category;

use crate::corpus::{resolve_region, Article, Corpus, Gazetteer, Region};
use crate::error::{Error, Result};

fn is_letter(c: char) -> bool {
    get_general_category(c).abbreviation().starts_with('L')
}

fn is_mark(c: char) -> bool {
    get_general_category(c).abbreviation().starts_with('M')
}

/// Number of Unicode letters (general category L*) in `word`. Combining marks
/// such as Bengali vowel signs do not count.
pub fn letter_count(word: &str) -> usize {
    word.chars().filter(|&c| is_letter(c)).count()
}

fn markup_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^>]*>|&#?[A-Za-z0-9]+;").unwrap())
}

/// Strips markup, digits (any script), punctuation and symbols, lowercases,
/// and collapses whitespace. Letters and combining marks of every script are
/// kept, as are the zero-width joiners used inside Bengali conjuncts.
pub fn normalize(text: &str) -> String {
    let without_tags = markup_re().replace_all(text, " ");
    let mut out = String::with_capacity(without_tags.len());
    let mut pending_space = false;
    for c in without_tags.chars() {
        let keep = is_letter(c) || is_mark(c) || c == '\u{200c}' || c == '\u{200d}';
        if keep {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Whitespace split, order preserved.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Removes the first (longest) listed suffix `word` ends with, provided the
/// remaining stem keeps at least two letters. At most one suffix is removed.
/// `suffixes` must be ordered longest-first.
pub fn strip_suffix<'w, S: AsRef<str>>(word: &'w str, suffixes: &[S]) -> &'w str {
    for suffix in suffixes {
        if let Some(stem) = word.strip_suffix(suffix.as_ref()) {
            return if letter_count(stem) >= 2 { stem } else { word };
        }
    }
    word
}

/// Which article fields feed the text pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    Body,
    TitleBodySummary,
}

impl std::str::FromStr for TextSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "body" => Ok(TextSource::Body),
            "all" | "title_body_summary" => Ok(TextSource::TitleBodySummary),
            other => Err(Error::config(format!("unknown text source {other:?}"))),
        }
    }
}

impl TextSource {
    pub fn text_of(self, a: &Article) -> String {
        match self {
            TextSource::Body => a.pipeline_body().to_string(),
            TextSource::TitleBodySummary => {
                format!("{}\n{}\n{}", a.title, a.pipeline_body(), a.summary)
            }
        }
    }
}

/// Text preparation settings and word lists.
#[derive(Debug, Clone)]
pub struct PrepConfig {
    stopwords: HashSet<String>,
    suffixes: Vec<String>,
    lemma_overrides: HashMap<String, String>,
    lemma_targets: HashSet<String>,
    pub min_letters: usize,
    pub max_vocab: Option<usize>,
    pub max_doc_len: Option<usize>,
    pub text_source: TextSource,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            stopwords: HashSet::new(),
            suffixes: Vec::new(),
            lemma_overrides: HashMap::new(),
            lemma_targets: HashSet::new(),
            min_letters: 6,
            max_vocab: None,
            max_doc_len: None,
            text_source: TextSource::Body,
        }
    }
}

/// Non-empty, non-comment lines of a resource file.
fn resource_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl PrepConfig {
    pub fn new<S, X, L>(stopwords: S, suffixes: X, lemma_overrides: L) -> Result<Self>
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
        X: IntoIterator,
        X::Item: AsRef<str>,
        L: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = PrepConfig::default();
        cfg.set_stopwords(stopwords);
        cfg.set_suffixes(suffixes);
        cfg.set_lemma_overrides(lemma_overrides)?;
        Ok(cfg)
    }

    /// Reads `stopwords.txt`, `suffixes.txt` and `lemma_overrides.tsv` from a
    /// resource directory. Missing files mean empty lists.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let p = dir.join(name);
            match std::fs::read_to_string(&p) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
                Err(e) => Err(Error::io(p, e)),
            }
        };
        Self::from_texts(
            &read("stopwords.txt")?,
            &read("suffixes.txt")?,
            &read("lemma_overrides.tsv")?,
        )
    }

    pub fn from_texts(stopwords: &str, suffixes: &str, lemmas: &str) -> Result<Self> {
        let mut overrides = Vec::new();
        for (i, line) in resource_lines(lemmas).enumerate() {
            let (raw, lemma) = line
                .split_once('\t')
                .ok_or_else(|| Error::data(format!("lemma override entry {} lacks a TAB", i + 1)))?;
            overrides.push((raw.trim().to_string(), lemma.trim().to_string()));
        }
        Self::new(resource_lines(stopwords), resource_lines(suffixes), overrides)
    }

    pub fn set_stopwords<S>(&mut self, words: S)
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
    {
        self.stopwords = words.into_iter().map(|w| normalize(w.as_ref())).collect();
    }

    /// Stores suffixes longest-first (by character count; equal lengths keep
    /// their given order).
    pub fn set_suffixes<X>(&mut self, suffixes: X)
    where
        X: IntoIterator,
        X::Item: AsRef<str>,
    {
        let mut list: Vec<String> = Vec::new();
        for s in suffixes {
            let s = s.as_ref().trim().to_lowercase();
            if !s.is_empty() && !list.contains(&s) {
                list.push(s);
            }
        }
        list.sort_by_key(|s| std::cmp::Reverse(s.chars().count()));
        self.suffixes = list;
    }

    /// Installs raw -> lemma overrides. Chains (a -> b, b -> c) are collapsed
    /// to their final form; cycles are rejected. A self-mapping entry marks a
    /// curated word that must not be suffix-stripped.
    pub fn set_lemma_overrides<L>(&mut self, overrides: L) -> Result<()>
    where
        L: IntoIterator<Item = (String, String)>,
    {
        let raw: HashMap<String, String> = overrides
            .into_iter()
            .map(|(k, v)| (normalize(&k), normalize(&v)))
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .collect();
        let mut resolved = HashMap::with_capacity(raw.len());
        for key in raw.keys() {
            let mut cur = key;
            let mut hops = 0;
            while let Some(next) = raw.get(cur).filter(|n| *n != cur) {
                cur = next;
                hops += 1;
                if hops > raw.len() {
                    return Err(Error::data(format!("lemma override cycle through {key:?}")));
                }
            }
            resolved.insert(key.clone(), cur.clone());
        }
        self.lemma_targets = resolved.values().cloned().collect();
        self.lemma_overrides = resolved;
        Ok(())
    }

    pub fn suffixes(&self) -> &[String] {
        &self.suffixes
    }

    pub fn is_stopword(&self, w: &str) -> bool {
        self.stopwords.contains(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_letters == 0 {
            return Err(Error::config("min_letters must be at least 1"));
        }
        Ok(())
    }

    /// Lemma override, or suffix strip when no override applies. Curated
    /// forms (override targets) are never stripped.
    fn canonical_form<'w>(&'w self, word: &'w str) -> &'w str {
        if let Some(lemma) = self.lemma_overrides.get(word) {
            return lemma;
        }
        if self.lemma_targets.contains(word) {
            return word;
        }
        strip_suffix(word, &self.suffixes)
    }

    /// Runs the chain up to (not including) encoding.
    pub fn terms(&self, text: &str) -> Vec<String> {
        let norm = normalize(text);
        tokenize(&norm)
            .into_iter()
            .map(|t| self.canonical_form(t))
            .filter(|w| !self.is_stopword(w))
            .filter(|w| letter_count(w) >= self.min_letters)
            .map(str::to_string)
            .collect()
    }
}

/// Dense word ids with document frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    doc_freq: Vec<u32>,
    term_freq: Vec<u64>,
    n_docs: usize,
}

impl Vocabulary {
    /// Canonical vocabulary over term lists: ids assigned in lexicographic
    /// word order. With `max_vocab`, only the most frequent words survive
    /// (ties broken lexicographically) before id assignment.
    pub fn build<'a, I>(docs: I, max_vocab: Option<usize>) -> Vocabulary
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut tf: BTreeMap<&str, (u64, u32)> = BTreeMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            let mut seen = HashSet::new();
            for w in doc {
                let e = tf.entry(w.as_str()).or_insert((0, 0));
                e.0 += 1;
                if seen.insert(w.as_str()) {
                    e.1 += 1;
                }
            }
        }
        let mut entries: Vec<(&str, (u64, u32))> = tf.into_iter().collect();
        if let Some(cap) = max_vocab {
            if entries.len() > cap {
                entries.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(b.0)));
                entries.truncate(cap);
                entries.sort_by(|a, b| a.0.cmp(b.0));
            }
        }
        let mut v = Vocabulary {
            n_docs,
            ..Default::default()
        };
        for (w, (t, d)) in entries {
            v.push_word(w.to_string(), t, d);
        }
        v
    }

    fn push_word(&mut self, w: String, tf: u64, df: u32) -> u32 {
        let id = self.words.len() as u32;
        self.index.insert(w.clone(), id);
        self.words.push(w);
        self.term_freq.push(tf);
        self.doc_freq.push(df);
        id
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    /// Re-assigns ids lexicographically. Returns `old id -> new id`.
    pub fn canonicalize(&mut self) -> Vec<u32> {
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| self.words[a].cmp(&self.words[b]));
        let mut remap = vec![0u32; self.words.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new as u32;
        }
        let words = order.iter().map(|&i| self.words[i].clone()).collect();
        let df = order.iter().map(|&i| self.doc_freq[i]).collect();
        let tf = order.iter().map(|&i| self.term_freq[i]).collect();
        self.words = words;
        self.doc_freq = df;
        self.term_freq = tf;
        self.reindex();
        remap
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, w: &str) -> Option<u32> {
        self.index.get(w).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn doc_freq(&self, id: u32) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn term_freq(&self, id: u32) -> u64 {
        self.term_freq[id as usize]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn total_tokens(&self) -> u64 {
        self.term_freq.iter().sum()
    }

    /// SHA-256 over the id-ordered word list; ties saved models to the
    /// vocabulary they were trained against.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update([0u8]);
        }
        to_hex(&h.finalize())
    }

    /// Encodes terms, dropping out-of-vocabulary words.
    pub fn encode(&self, terms: &[String]) -> Vec<u32> {
        terms.iter().filter_map(|w| self.id(w)).collect()
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Encoded article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub article_id: String,
    pub tokens: Vec<u32>,
    /// Weeks since the corpus start date.
    pub week: usize,
    pub region: Region,
}

/// How [`Preprocessor::preprocess`] treats unseen words.
pub enum VocabMode<'a> {
    /// Unseen words get the next free id.
    Build(&'a mut Vocabulary),
    /// Unseen words are dropped.
    Frozen(&'a Vocabulary),
}

/// Article-level preprocessing bound to a corpus start date and gazetteer.
pub struct Preprocessor<'a> {
    pub config: &'a PrepConfig,
    pub start: NaiveDate,
    pub gazetteer: Option<&'a Gazetteer>,
}

impl Preprocessor<'_> {
    pub fn preprocess(&self, article: &Article, mode: VocabMode<'_>) -> Result<TokenizedDoc> {
        self.config.validate()?;
        let mut terms = self.config.terms(&self.config.text_source.text_of(article));
        if let Some(cap) = self.config.max_doc_len {
            terms.truncate(cap);
        }
        let tokens = match mode {
            VocabMode::Frozen(v) => {
                if v.is_empty() {
                    return Err(Error::data("frozen vocabulary is empty"));
                }
                v.encode(&terms)
            }
            VocabMode::Build(v) => {
                v.n_docs += 1;
                let mut seen = HashSet::new();
                terms
                    .iter()
                    .map(|w| {
                        let id = match v.id(w) {
                            Some(id) => id,
                            None => v.push_word(w.clone(), 0, 0),
                        };
                        v.term_freq[id as usize] += 1;
                        if seen.insert(id) {
                            v.doc_freq[id as usize] += 1;
                        }
                        id
                    })
                    .collect()
            }
        };
        let region = match self.gazetteer {
            Some(g) => resolve_region(article, g),
            None => Region::Unresolved,
        };
        Ok(TokenizedDoc {
            article_id: article.id.clone(),
            tokens,
            week: ((article.published_date - self.start).num_days().max(0) / 7) as usize,
            region,
        })
    }
}

/// Vocabulary plus encoded documents in corpus order.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub vocab: Vocabulary,
    pub docs: Vec<TokenizedDoc>,
}

impl PreparedCorpus {
    pub fn token_lists(&self) -> Vec<Vec<u32>> {
        self.docs.iter().map(|d| d.tokens.clone()).collect()
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }
}

/// Builds the canonical vocabulary over the whole corpus and encodes every
/// article. Documents whose every token is filtered stay in place with no
/// tokens.
pub fn prepare_corpus(
    corpus: &Corpus,
    config: &PrepConfig,
    gazetteer: Option<&Gazetteer>,
) -> Result<PreparedCorpus> {
    config.validate()?;
    let term_lists: Vec<Vec<String>> = corpus
        .articles()
        .iter()
        .map(|a| {
            let mut t = config.terms(&config.text_source.text_of(a));
            if let Some(cap) = config.max_doc_len {
                t.truncate(cap);
            }
            t
        })
        .collect();
    let vocab = Vocabulary::build(term_lists.iter().map(Vec::as_slice), config.max_vocab);
    let start = corpus.date_range().0;
    let docs = corpus
        .articles()
        .iter()
        .zip(&term_lists)
        .map(|(a, terms)| TokenizedDoc {
            article_id: a.id.clone(),
            tokens: vocab.encode(terms),
            week: ((a.published_date - start).num_days() / 7) as usize,
            region: gazetteer
                .map(|g| resolve_region(a, g))
                .unwrap_or(Region::Unresolved),
        })
        .collect();
    Ok(PreparedCorpus { vocab, docs })
}

/// Distinct words in a set of term lists; handy for diagnostics.
pub fn distinct_terms(lists: &[Vec<String>]) -> BTreeSet<&str> {
    lists.iter().flatten().map(String::as_str).collect()
}
