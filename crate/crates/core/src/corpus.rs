//! News article collection: loading, validation, dataset splits, and the
//! district/division gazetteer.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    Bn,
    En,
}

/// The eight manually curated article classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NewsClass {
    Statistics,
    SocialInformation,
    Covid19Effects,
    Covid19ResponsesAndPreventiveMeasures,
    GovernmentAnnouncementAndResponses,
    SolidarityAndCooperation,
    InternationalInformation,
    HealthOrganizationResponses,
}

impl NewsClass {
    pub const ALL: [NewsClass; 8] = [
        NewsClass::Statistics,
        NewsClass::SocialInformation,
        NewsClass::Covid19Effects,
        NewsClass::Covid19ResponsesAndPreventiveMeasures,
        NewsClass::GovernmentAnnouncementAndResponses,
        NewsClass::SolidarityAndCooperation,
        NewsClass::InternationalInformation,
        NewsClass::HealthOrganizationResponses,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            NewsClass::Statistics => "statistics",
            NewsClass::SocialInformation => "social_information",
            NewsClass::Covid19Effects => "covid19_effects",
            NewsClass::Covid19ResponsesAndPreventiveMeasures => {
                "covid19_responses_and_preventive_measures"
            }
            NewsClass::GovernmentAnnouncementAndResponses => {
                "government_announcement_and_responses"
            }
            NewsClass::SolidarityAndCooperation => "solidarity_and_cooperation",
            NewsClass::InternationalInformation => "international_information",
            NewsClass::HealthOrganizationResponses => "health_organization_responses",
        }
    }

    /// Zero-based position in [`NewsClass::ALL`].
    pub fn index(self) -> usize {
        NewsClass::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<NewsClass> {
        NewsClass::ALL.get(i).copied()
    }
}

fn alnum_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for NewsClass {
    type Err = Error;

    /// Accepts the slug, the display name in any case/punctuation, or the
    /// 1-based class number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return n
                .checked_sub(1)
                .and_then(NewsClass::from_index)
                .ok_or_else(|| Error::data(format!("class number {n} outside 1..=8")));
        }
        let key = alnum_key(s);
        NewsClass::ALL
            .iter()
            .copied()
            .find(|c| {
                let slug = alnum_key(c.slug());
                slug == key || slug.strip_suffix('s') == Some(key.as_str())
            })
            .ok_or_else(|| Error::data(format!("unknown class label {s:?}")))
    }
}

impl fmt::Display for NewsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// One of the 19 sub-classes, numbered 1..=19.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubClass(u8);

impl SubClass {
    pub const COUNT: usize = 19;

    pub fn new(n: u8) -> Result<Self> {
        if (1..=Self::COUNT as u8).contains(&n) {
            Ok(SubClass(n))
        } else {
            Err(Error::data(format!("subclass {n} outside 1..=19")))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl FromStr for SubClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.trim_start_matches(|c: char| c.is_alphabetic() || c == '_' || c == '-');
        let n: u8 = digits
            .parse()
            .map_err(|_| Error::data(format!("unknown subclass label {s:?}")))?;
        SubClass::new(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
}

impl Sentiment {
    pub fn index(self) -> usize {
        match self {
            Sentiment::Positive => 0,
            Sentiment::Negative => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Sentiment> {
        match i {
            0 => Some(Sentiment::Positive),
            1 => Some(Sentiment::Negative),
            _ => None,
        }
    }
}

/// Accepts either a JSON string or a JSON integer for a label field.
fn de_label<'de, D, T>(de: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr<Err = Error>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Str(String),
    }
    match Option::<Raw>::deserialize(de)? {
        None => Ok(None),
        Some(Raw::Str(s)) if s.trim().is_empty() => Ok(None),
        Some(Raw::Str(s)) => s.parse().map(Some).map_err(de::Error::custom),
        Some(Raw::Int(n)) => n.to_string().parse().map(Some).map_err(de::Error::custom),
    }
}

fn de_topic<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Option<u32>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u32),
        Str(String),
    }
    match Option::<Raw>::deserialize(de)? {
        None => Ok(None),
        Some(Raw::Int(n)) => Ok(Some(n)),
        Some(Raw::Str(s)) if s.trim().is_empty() => Ok(None),
        Some(Raw::Str(s)) => s.trim().parse().map(Some).map_err(de::Error::custom),
    }
}

fn ser_class<S: Serializer>(c: &Option<NewsClass>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.serialize_str(c.slug()),
        None => s.serialize_none(),
    }
}

fn ser_subclass<S: Serializer>(c: &Option<SubClass>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.serialize_u8(c.0),
        None => s.serialize_none(),
    }
}

/// A single news item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub language: Language,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub summary: String,
    pub published_date: NaiveDate,
    #[serde(default)]
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub district: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub division: Option<String>,
    #[serde(
        rename = "class",
        default,
        deserialize_with = "de_label",
        serialize_with = "ser_class",
        skip_serializing_if = "Option::is_none"
    )]
    pub class_label: Option<NewsClass>,
    #[serde(
        rename = "subclass",
        default,
        deserialize_with = "de_label",
        serialize_with = "ser_subclass",
        skip_serializing_if = "Option::is_none"
    )]
    pub subclass_label: Option<SubClass>,
    #[serde(rename = "sentiment", default, skip_serializing_if = "Option::is_none")]
    pub sentiment_label: Option<Sentiment>,
    #[serde(
        rename = "topic",
        default,
        deserialize_with = "de_topic",
        skip_serializing_if = "Option::is_none"
    )]
    pub topic_label: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translated_body: Option<String>,
}

impl Article {
    /// Minimal article, mostly for tests and synthetic corpora.
    pub fn new(id: impl Into<String>, body: impl Into<String>, date: NaiveDate) -> Self {
        Article {
            id: id.into(),
            source: String::new(),
            language: Language::Bn,
            title: String::new(),
            body: body.into(),
            summary: String::new(),
            published_date: date,
            location: String::new(),
            district: None,
            division: None,
            class_label: None,
            subclass_label: None,
            sentiment_label: None,
            topic_label: None,
            translated_body: None,
        }
    }

    /// Body used by the Bengali text pipeline: the supplied translation when
    /// present, the original body otherwise.
    pub fn pipeline_body(&self) -> &str {
        self.translated_body.as_deref().unwrap_or(&self.body)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        Ok(())
    }
}

/// A record that failed validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// 1-based line (JSONL) or record line (CSV).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::config(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Validated, immutable article collection.
#[derive(Debug, Clone)]
pub struct Corpus {
    articles: Vec<Article>,
    rejected: Vec<Rejection>,
    start: NaiveDate,
    end: NaiveDate,
}

impl Corpus {
    /// Builds a corpus from already-constructed articles. Duplicate ids and
    /// empty ids are errors here since there is no line to report.
    pub fn from_articles(articles: Vec<Article>) -> Result<Corpus> {
        let mut seen = HashSet::new();
        for a in &articles {
            a.validate().map_err(Error::data)?;
            if !seen.insert(a.id.as_str()) {
                return Err(Error::data(format!("duplicate article id {:?}", a.id)));
            }
        }
        Self::assemble(articles, Vec::new())
    }

    fn assemble(articles: Vec<Article>, rejected: Vec<Rejection>) -> Result<Corpus> {
        let start = articles
            .iter()
            .map(|a| a.published_date)
            .min()
            .ok_or_else(|| Error::data("corpus contains no valid articles"))?;
        let end = articles.iter().map(|a| a.published_date).max().unwrap();
        Ok(Corpus {
            articles,
            rejected,
            start,
            end,
        })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn rejected(&self) -> &[Rejection] {
        &self.rejected
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.articles.iter().find(|a| a.id == id)
    }

    /// First and last publication day.
    pub fn date_range(&self) -> (NaiveDate, NaiveDate) {
        (self.start, self.end)
    }

    /// Calendar days covered, inclusive.
    pub fn n_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    /// Week index of a date; week 0 starts on the corpus minimum date.
    pub fn week_of(&self, date: NaiveDate) -> usize {
        ((date - self.start).num_days().max(0) / 7) as usize
    }

    pub fn n_weeks(&self) -> usize {
        self.week_of(self.end) + 1
    }

    /// Article counts per source, sorted by source name.
    pub fn counts_by_source(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for a in &self.articles {
            *out.entry(a.source.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn counts_by_language(&self) -> BTreeMap<Language, usize> {
        let mut out = BTreeMap::new();
        for a in &self.articles {
            *out.entry(a.language).or_insert(0) += 1;
        }
        out
    }

    /// Writes the canonical JSON-lines form.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for a in &self.articles {
            serde_json::to_writer(&mut w, a)?;
            w.write_all(b"\n").map_err(|e| Error::io("<jsonl writer>", e))?;
        }
        Ok(())
    }
}

/// Loads a corpus file. Malformed records are collected in
/// [`Corpus::rejected`]; an empty file or a file with no valid record is an
/// error.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        CorpusFormat::Jsonl => read_jsonl_records(BufReader::new(file), path)?,
        CorpusFormat::Csv => read_csv_records(file)?,
    };
    if records.is_empty() {
        return Err(Error::data(format!("{} is empty", path.display())));
    }
    let mut seen = HashSet::new();
    let mut articles = Vec::new();
    let mut rejected = Vec::new();
    for (line, value) in records {
        let parsed = serde_json::from_value::<Article>(value)
            .map_err(|e| e.to_string())
            .and_then(|a| a.validate().map(|_| a));
        match parsed {
            Ok(a) if !seen.insert(a.id.clone()) => rejected.push(Rejection {
                line,
                reason: format!("duplicate id {:?}", a.id),
            }),
            Ok(a) => articles.push(a),
            Err(reason) => rejected.push(Rejection { line, reason }),
        }
    }
    if articles.is_empty() {
        return Err(Error::data(format!(
            "{}: all {} records rejected (first: line {}: {})",
            path.display(),
            rejected.len(),
            rejected[0].line,
            rejected[0].reason
        )));
    }
    Corpus::assemble(articles, rejected)
}

/// Parses a corpus from JSON-lines text held in memory.
pub fn parse_jsonl(text: &str) -> Result<Corpus> {
    let records = read_jsonl_records(text.as_bytes(), Path::new("<memory>"))?;
    if records.is_empty() {
        return Err(Error::data("empty corpus text"));
    }
    let mut seen = HashSet::new();
    let mut articles = Vec::new();
    let mut rejected = Vec::new();
    for (line, value) in records {
        match serde_json::from_value::<Article>(value) {
            Ok(a) if a.validate().is_ok() && seen.insert(a.id.clone()) => articles.push(a),
            Ok(a) => rejected.push(Rejection {
                line,
                reason: format!("invalid or duplicate id {:?}", a.id),
            }),
            Err(e) => rejected.push(Rejection {
                line,
                reason: e.to_string(),
            }),
        }
    }
    Corpus::assemble(articles, rejected)
}

fn read_jsonl_records<R: BufRead>(reader: R, path: &Path) -> Result<Vec<(u64, serde_json::Value)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).unwrap_or_else(|e| {
            // Keep the record so the loader reports it with its line number.
            serde_json::Value::String(format!("unparseable JSON: {e}"))
        });
        out.push((i as u64 + 1, value));
    }
    Ok(out)
}

/// CSV rows become JSON objects keyed by header name; empty cells are absent.
fn read_csv_records<R: std::io::Read>(reader: R) -> Result<Vec<(u64, serde_json::Value)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut obj = serde_json::Map::new();
        for (h, v) in headers.iter().zip(rec.iter()) {
            if !v.is_empty() {
                obj.insert(h.trim().to_string(), serde_json::Value::String(v.to_string()));
            }
        }
        out.push((line, serde_json::Value::Object(obj)));
    }
    Ok(out)
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config(format!("split ratios must be non-negative: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items. Leftover items go to the
    /// parts with the largest fractional quota; ties favour the earlier part
    /// (train, then validation, then test).
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.validation, self.test].map(|r| r * n as f64);
        let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
        let mut left = n - sizes.iter().sum::<usize>().min(n);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - sizes[a] as f64;
            let fb = quotas[b] - sizes[b] as f64;
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

/// Which label makes an article part of the labeled subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelField {
    Class,
    Subclass,
    Sentiment,
    Topic,
    Any,
}

impl LabelField {
    pub fn is_labeled(self, a: &Article) -> bool {
        match self {
            LabelField::Class => a.class_label.is_some(),
            LabelField::Subclass => a.subclass_label.is_some(),
            LabelField::Sentiment => a.sentiment_label.is_some(),
            LabelField::Topic => a.topic_label.is_some(),
            LabelField::Any => {
                a.class_label.is_some()
                    || a.subclass_label.is_some()
                    || a.sentiment_label.is_some()
                    || a.topic_label.is_some()
            }
        }
    }
}

/// Disjoint id sets partitioning a labeled subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Seeded split of the articles carrying `label`.
pub fn split_dataset(
    corpus: &Corpus,
    ratios: SplitRatios,
    seed: u64,
    label: LabelField,
) -> Result<DatasetSplit> {
    let ids: Vec<&str> = corpus
        .articles()
        .iter()
        .filter(|a| label.is_labeled(a))
        .map(|a| a.id.as_str())
        .collect();
    split_ids(&ids, ratios, seed)
}

/// Splits ids deterministically: sort, seeded shuffle, then cut by
/// largest-remainder sizes.
pub fn split_ids(ids: &[&str], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    if ids.is_empty() {
        return Err(Error::data("labeled subset is empty"));
    }
    let mut ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut rng_for(seed, stream::SPLIT));
    let [n_train, n_val, _] = ratios.apportion(ids.len());
    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(DatasetSplit {
        train: ids,
        validation,
        test,
    })
}

/// Division name reserved for locations outside the country.
pub const INTERNATIONAL: &str = "INTERNATIONAL";
/// Region bucket for locations the gazetteer cannot resolve.
pub const UNRESOLVED: &str = "UNRESOLVED";
/// Number of administrative divisions a gazetteer must define.
pub const DIVISION_COUNT: usize = 8;

/// District to division lookup.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    /// normalized district -> (display district, division)
    districts: BTreeMap<String, (String, String)>,
    divisions: Vec<String>,
}

/// Normalizes place text for lookup: lowercase, letters/digits only, single
/// spaces.
pub fn normalize_place(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else if c == '\'' { '\0' } else { ' ' })
        .filter(|c| *c != '\0')
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Gazetteer {
    /// Builds from `(district, division)` pairs. Each district must map to one
    /// division and exactly eight domestic divisions must appear; the
    /// [`INTERNATIONAL`] division is extra.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Gazetteer>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut districts = BTreeMap::new();
        let mut divisions = Vec::new();
        for (district, division) in pairs {
            let (district, division) = (district.as_ref().trim(), division.as_ref().trim());
            if district.is_empty() || division.is_empty() {
                return Err(Error::data("gazetteer row with empty district or division"));
            }
            let key = normalize_place(district);
            match districts.get(&key) {
                Some((_, d)) if d != division => {
                    return Err(Error::data(format!(
                        "district {district:?} mapped to both {d:?} and {division:?}"
                    )))
                }
                Some(_) => continue,
                None => {
                    districts.insert(key, (district.to_string(), division.to_string()));
                }
            }
            if !divisions.iter().any(|d| d == division) {
                divisions.push(division.to_string());
            }
        }
        let domestic = divisions.iter().filter(|d| *d != INTERNATIONAL).count();
        if domestic != DIVISION_COUNT {
            return Err(Error::data(format!(
                "gazetteer defines {domestic} divisions, expected {DIVISION_COUNT}"
            )));
        }
        Ok(Gazetteer {
            districts,
            divisions,
        })
    }

    /// Reads a `district,division` CSV; a header row is optional, `#` lines
    /// are comments.
    pub fn load(path: &Path) -> Result<Gazetteer> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Gazetteer> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::data(format!("gazetteer row {} has {} fields", i + 1, rec.len())));
            }
            if i == 0 && rec[0].eq_ignore_ascii_case("district") {
                continue;
            }
            pairs.push((rec[0].to_string(), rec[1].to_string()));
        }
        Self::from_pairs(pairs)
    }

    /// The bundled gazetteer: 64 districts of Bangladesh in 8 divisions plus a
    /// handful of international place names.
    pub fn bangladesh() -> Gazetteer {
        Self::parse(BANGLADESH_GAZETTEER).expect("bundled gazetteer is valid")
    }

    /// Divisions in first-appearance order, [`INTERNATIONAL`] included when
    /// present.
    pub fn divisions(&self) -> &[String] {
        &self.divisions
    }

    pub fn districts(&self) -> impl Iterator<Item = (&str, &str)> {
        self.districts.values().map(|(d, v)| (d.as_str(), v.as_str()))
    }

    pub fn division_of(&self, district: &str) -> Option<&str> {
        self.districts
            .get(&normalize_place(district))
            .map(|(_, v)| v.as_str())
    }

    /// Region rows for aggregation grids: every division, then UNRESOLVED.
    pub fn region_rows(&self) -> Vec<String> {
        let mut rows = self.divisions.clone();
        rows.push(UNRESOLVED.to_string());
        rows
    }
}

/// Outcome of resolving an article's location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Resolved { district: String, division: String },
    Unresolved,
}

impl Region {
    pub fn district(&self) -> &str {
        match self {
            Region::Resolved { district, .. } => district,
            Region::Unresolved => UNRESOLVED,
        }
    }

    pub fn division(&self) -> &str {
        match self {
            Region::Resolved { division, .. } => division,
            Region::Unresolved => UNRESOLVED,
        }
    }

    pub fn is_resolved(&self) -> bool {
        matches!(self, Region::Resolved { .. })
    }
}

/// Exact match of the normalized location text against the gazetteer.
pub fn resolve_region(article: &Article, gazetteer: &Gazetteer) -> Region {
    resolve_location(&article.location, gazetteer)
}

pub fn resolve_location(location: &str, gazetteer: &Gazetteer) -> Region {
    match gazetteer.districts.get(&normalize_place(location)) {
        Some((district, division)) => Region::Resolved {
            district: district.clone(),
            division: division.clone(),
        },
        None => Region::Unresolved,
    }
}

/// Regions of every article, in corpus order.
pub fn resolve_all(corpus: &Corpus, gazetteer: &Gazetteer) -> Vec<Region> {
    corpus
        .articles()
        .iter()
        .map(|a| resolve_region(a, gazetteer))
        .collect()
}

/// Distinct class labels present among the given articles.
pub fn classes_present(articles: &[Article]) -> BTreeSet<NewsClass> {
    articles.iter().filter_map(|a| a.class_label).collect()
}

pub const BANGLADESH_GAZETTEER: &str = include_str!("../data/gazetteer_bd.csv");
