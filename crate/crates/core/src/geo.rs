//! Spatio-temporal aggregation: article volume, topic mass and sentiment
//! counts per district, division and region-week cell.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{resolve_all, Corpus, Gazetteer, Region, Sentiment, UNRESOLVED};
use crate::error::{Error, Result};
use crate::topics::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLevel {
    District,
    Division,
}

impl std::str::FromStr for RegionLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "district" => Ok(RegionLevel::District),
            "division" => Ok(RegionLevel::Division),
            other => Err(Error::config(format!("unknown region level {other:?}"))),
        }
    }
}

fn region_name(r: &Region, level: RegionLevel) -> &str {
    match level {
        RegionLevel::District => r.district(),
        RegionLevel::Division => r.division(),
    }
}

/// Row labels for a level: every gazetteer district (sorted) or division
/// (gazetteer order), then UNRESOLVED.
pub fn region_rows(gazetteer: &Gazetteer, level: RegionLevel) -> Vec<String> {
    match level {
        RegionLevel::Division => gazetteer.region_rows(),
        RegionLevel::District => {
            let mut rows: Vec<String> = gazetteer.districts().map(|(d, _)| d.to_string()).collect();
            rows.sort();
            rows.push(UNRESOLVED.to_string());
            rows
        }
    }
}

/// Article count per region, zero rows included.
pub fn aggregate_volume(corpus: &Corpus, gazetteer: &Gazetteer, level: RegionLevel) -> Vec<(String, u64)> {
    count_regions(&resolve_all(corpus, gazetteer), gazetteer, level)
}

pub fn count_regions(regions: &[Region], gazetteer: &Gazetteer, level: RegionLevel) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in regions {
        *counts.entry(region_name(r, level)).or_default() += 1;
    }
    region_rows(gazetteer, level)
        .into_iter()
        .map(|row| {
            let n = counts.get(row.as_str()).copied().unwrap_or(0);
            (row, n)
        })
        .collect()
}

/// Sums district counts into their divisions; UNRESOLVED stays UNRESOLVED.
pub fn rollup_to_divisions(districts: &[(String, u64)], gazetteer: &Gazetteer) -> Result<Vec<(String, u64)>> {
    let mut by_div: HashMap<String, u64> = HashMap::new();
    for (d, n) in districts {
        let div = if d == UNRESOLVED {
            UNRESOLVED
        } else {
            gazetteer
                .division_of(d)
                .ok_or_else(|| Error::data(format!("district {d:?} is not in the gazetteer")))?
        };
        *by_div.entry(div.to_string()).or_default() += n;
    }
    Ok(gazetteer
        .region_rows()
        .into_iter()
        .map(|row| {
            let n = by_div.get(&row).copied().unwrap_or(0);
            (row, n)
        })
        .collect())
}

/// Share of each region in a count table.
pub fn shares(counts: &[(String, u64)]) -> Vec<(String, f64)> {
    let total: u64 = counts.iter().map(|(_, n)| n).sum();
    counts
        .iter()
        .map(|(r, n)| (r.clone(), if total == 0 { 0.0 } else { *n as f64 / total as f64 }))
        .collect()
}

/// How an article contributes to its region's topic distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicAssign {
    /// The article's whole θ row.
    #[default]
    Mass,
    /// One unit on the article's most probable topic.
    Argmax,
}

fn contribution(theta: &[f64], mode: TopicAssign) -> Vec<f64> {
    match mode {
        TopicAssign::Mass => theta.to_vec(),
        TopicAssign::Argmax => {
            let mut v = vec![0.0; theta.len()];
            v[argmax(theta)] = 1.0;
            v
        }
    }
}

/// Normalized topic distribution per region from per-article θ rows
/// (`thetas[i]` belongs to `regions[i]`). Regions without articles are
/// omitted.
pub fn topic_by_region(
    regions: &[Region],
    thetas: &[Vec<f64>],
    gazetteer: &Gazetteer,
    level: RegionLevel,
    mode: TopicAssign,
) -> Result<Vec<(String, Vec<f64>)>> {
    if regions.len() != thetas.len() {
        return Err(Error::shape(format!("{} regions but {} θ rows", regions.len(), thetas.len())));
    }
    let k = thetas.first().map_or(0, Vec::len);
    let mut sums: HashMap<&str, Vec<f64>> = HashMap::new();
    for (r, th) in regions.iter().zip(thetas) {
        if th.len() != k {
            return Err(Error::shape("θ rows differ in length"));
        }
        let acc = sums.entry(region_name(r, level)).or_insert_with(|| vec![0.0; k]);
        for (a, c) in acc.iter_mut().zip(contribution(th, mode)) {
            *a += c;
        }
    }
    Ok(region_rows(gazetteer, level)
        .into_iter()
        .filter_map(|row| {
            let s = sums.remove(row.as_str())?;
            let total: f64 = s.iter().sum();
            Some((row, s.into_iter().map(|x| x / total).collect()))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Volume,
    TopicMass(usize),
    SentimentPos,
    SentimentNeg,
}

impl Measure {
    pub fn tag(&self) -> String {
        match self {
            Measure::Volume => "volume".into(),
            Measure::TopicMass(k) => format!("topic_mass_{k}"),
            Measure::SentimentPos => "sentiment_pos".into(),
            Measure::SentimentNeg => "sentiment_neg".into(),
        }
    }
}

/// Region × week matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionWeekGrid {
    pub measure: Measure,
    pub rows: Vec<String>,
    pub n_weeks: usize,
    pub cells: Vec<Vec<f64>>,
}

impl RegionWeekGrid {
    fn empty(measure: Measure, rows: Vec<String>, n_weeks: usize) -> Self {
        let cells = vec![vec![0.0; n_weeks]; rows.len()];
        RegionWeekGrid {
            measure,
            rows,
            n_weeks,
            cells,
        }
    }

    fn add(&mut self, region: &str, week: usize, x: f64) -> Result<()> {
        let r = self
            .rows
            .iter()
            .position(|row| row == region)
            .ok_or_else(|| Error::data(format!("region {region:?} has no grid row")))?;
        let cell = self.cells[r]
            .get_mut(week)
            .ok_or_else(|| Error::data(format!("week {week} outside grid of {} weeks", self.n_weeks)))?;
        *cell += x;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    pub fn row_totals(&self) -> Vec<(String, f64)> {
        self.rows
            .iter()
            .zip(&self.cells)
            .map(|(r, c)| (r.clone(), c.iter().sum()))
            .collect()
    }

    pub fn week_totals(&self) -> Vec<f64> {
        (0..self.n_weeks).map(|w| self.cells.iter().map(|r| r[w]).sum()).collect()
    }

    /// `region,week_0,…,week_{n−1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["region".to_string()];
        header.extend((0..self.n_weeks).map(|i| format!("week_{i}")));
        w.write_record(&header)?;
        for (r, cells) in self.rows.iter().zip(&self.cells) {
            let mut rec = vec![r.clone()];
            rec.extend(cells.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::data(format!("writing grid csv: {e}")))?;
        Ok(())
    }
}

/// `region,value` rows for external mapping tools.
pub fn write_choropleth_csv<W: Write>(rows: &[(String, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "value"])?;
    for (r, v) in rows {
        w.write_record([r.clone(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::data(format!("writing choropleth csv: {e}")))?;
    Ok(())
}

/// Division × week article counts.
pub fn volume_grid(corpus: &Corpus, gazetteer: &Gazetteer) -> Result<RegionWeekGrid> {
    let mut g = RegionWeekGrid::empty(Measure::Volume, gazetteer.region_rows(), corpus.n_weeks());
    for (a, r) in corpus.articles().iter().zip(resolve_all(corpus, gazetteer)) {
        g.add(r.division(), corpus.week_of(a.published_date), 1.0)?;
    }
    Ok(g)
}

/// Division × week mass of topic `k`. `thetas[i]` belongs to article `i`.
pub fn topic_mass_grid(
    corpus: &Corpus,
    gazetteer: &Gazetteer,
    thetas: &[Vec<f64>],
    k: usize,
    mode: TopicAssign,
) -> Result<RegionWeekGrid> {
    if thetas.len() != corpus.len() {
        return Err(Error::shape(format!("{} θ rows for {} articles", thetas.len(), corpus.len())));
    }
    let mut g = RegionWeekGrid::empty(Measure::TopicMass(k), gazetteer.region_rows(), corpus.n_weeks());
    for ((a, r), th) in corpus.articles().iter().zip(resolve_all(corpus, gazetteer)).zip(thetas) {
        let x = *contribution(th, mode)
            .get(k)
            .ok_or_else(|| Error::shape(format!("topic {k} out of range")))?;
        g.add(r.division(), corpus.week_of(a.published_date), x)?;
    }
    Ok(g)
}

/// Positive and negative division × week counts. Each article uses its
/// entry in `predictions` when present and its gold label otherwise;
/// articles with neither are reported together in one error.
pub fn sentiment_grid(
    corpus: &Corpus,
    gazetteer: &Gazetteer,
    predictions: &HashMap<String, Sentiment>,
) -> Result<(RegionWeekGrid, RegionWeekGrid)> {
    let missing: Vec<&str> = corpus
        .articles()
        .iter()
        .filter(|a| !predictions.contains_key(&a.id) && a.sentiment_label.is_none())
        .map(|a| a.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::data(format!(
            "{} articles have no sentiment: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let rows = gazetteer.region_rows();
    let mut pos = RegionWeekGrid::empty(Measure::SentimentPos, rows.clone(), corpus.n_weeks());
    let mut neg = RegionWeekGrid::empty(Measure::SentimentNeg, rows, corpus.n_weeks());
    for (a, r) in corpus.articles().iter().zip(resolve_all(corpus, gazetteer)) {
        let s = predictions.get(&a.id).copied().or(a.sentiment_label).expect("checked above");
        let grid = match s {
            Sentiment::Positive => &mut pos,
            Sentiment::Negative => &mut neg,
        };
        grid.add(r.division(), corpus.week_of(a.published_date), 1.0)?;
    }
    Ok((pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;
    use chrono::{Duration, NaiveDate};

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 21).unwrap() + Duration::days(i)
    }

    fn article(id: usize, place: &str, d: i64, s: Option<Sentiment>) -> Article {
        let mut a = Article::new(format!("a{id}"), "x", day(d));
        a.location = place.into();
        a.sentiment_label = s;
        a
    }

    #[test]
    fn dhaka_share_arithmetic() {
        let places = ["Dhaka", "Gazipur", "Narayanganj", "Tangail", "Faridpur", "Dhaka", "Sylhet", "Khulna", "Bogra", "nowhere"];
        let c = Corpus::from_articles(places.iter().enumerate().map(|(i, p)| article(i, p, 0, None)).collect()).unwrap();
        let g = Gazetteer::bangladesh();
        let div = aggregate_volume(&c, &g, RegionLevel::Division);
        let share: HashMap<String, f64> = shares(&div).into_iter().collect();
        assert!((share["Dhaka"] - 0.6).abs() < 1e-12);
        assert!((share[UNRESOLVED] - 0.1).abs() < 1e-12);
        let dist = aggregate_volume(&c, &g, RegionLevel::District);
        assert_eq!(rollup_to_divisions(&dist, &g).unwrap(), div);
        assert_eq!(div.iter().map(|r| r.1).sum::<u64>(), 10);
    }

    #[test]
    fn all_unresolved() {
        let c = Corpus::from_articles((0..4).map(|i| article(i, "Atlantis", 0, None)).collect()).unwrap();
        let div = aggregate_volume(&c, &Gazetteer::bangladesh(), RegionLevel::Division);
        let share: HashMap<String, f64> = shares(&div).into_iter().collect();
        assert_eq!(share[UNRESOLVED], 1.0);
    }

    #[test]
    fn topic_distributions() {
        let g = Gazetteer::bangladesh();
        let dhaka = Region::Resolved {
            district: "Dhaka".into(),
            division: "Dhaka".into(),
        };
        let sylhet = Region::Resolved {
            district: "Sylhet".into(),
            division: "Sylhet".into(),
        };
        let regions = vec![dhaka.clone(), dhaka, sylhet];
        let thetas = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.7]];
        let t = topic_by_region(&regions, &thetas, &g, RegionLevel::Division, TopicAssign::Mass).unwrap();
        assert_eq!(t, vec![("Dhaka".to_string(), vec![0.5, 0.5]), ("Sylhet".to_string(), vec![0.3, 0.7])]);
        let t = topic_by_region(&regions, &thetas, &g, RegionLevel::Division, TopicAssign::Argmax).unwrap();
        assert_eq!(t[1].1, vec![0.0, 1.0]);
    }

    #[test]
    fn sentiment_grid_tally() {
        // 20 labelled articles over three weeks, tallied by hand below
        let spec: [(&str, i64, Sentiment); 20] = [
            ("Dhaka", 0, Sentiment::Negative),
            ("Dhaka", 1, Sentiment::Negative),
            ("Dhaka", 2, Sentiment::Positive),
            ("Gazipur", 8, Sentiment::Negative),
            ("Gazipur", 9, Sentiment::Positive),
            ("Chittagong", 3, Sentiment::Negative),
            ("Comilla", 10, Sentiment::Negative),
            ("Cox's Bazar", 15, Sentiment::Positive),
            ("Sylhet", 4, Sentiment::Positive),
            ("Sylhet", 16, Sentiment::Negative),
            ("Khulna", 5, Sentiment::Negative),
            ("Jessore", 12, Sentiment::Negative),
            ("Rajshahi", 6, Sentiment::Positive),
            ("Bogra", 13, Sentiment::Negative),
            ("Rangpur", 14, Sentiment::Positive),
            ("Barisal", 20, Sentiment::Negative),
            ("Mymensingh", 18, Sentiment::Negative),
            ("Wuhan", 0, Sentiment::Negative),
            ("unknown place", 7, Sentiment::Positive),
            ("unknown place", 19, Sentiment::Negative),
        ];
        let c = Corpus::from_articles(spec.iter().enumerate().map(|(i, (p, d, s))| article(i, p, *d, Some(*s))).collect()).unwrap();
        let g = Gazetteer::bangladesh();
        let (pos, neg) = sentiment_grid(&c, &g, &HashMap::new()).unwrap();
        let row = |grid: &RegionWeekGrid, r: &str| grid.cells[grid.rows.iter().position(|x| x == r).unwrap()].clone();
        assert_eq!(row(&neg, "Dhaka"), vec![2.0, 1.0, 0.0]);
        assert_eq!(row(&pos, "Dhaka"), vec![1.0, 1.0, 0.0]);
        assert_eq!(row(&neg, "Chittagong"), vec![1.0, 1.0, 0.0]);
        assert_eq!(row(&pos, "Chittagong"), vec![0.0, 0.0, 1.0]);
        assert_eq!(row(&neg, "Sylhet"), vec![0.0, 0.0, 1.0]);
        assert_eq!(row(&neg, "Rajshahi"), vec![0.0, 1.0, 0.0]);
        assert_eq!(row(&pos, "Rangpur"), vec![0.0, 0.0, 1.0]);
        assert_eq!(row(&neg, "Barisal"), vec![0.0, 0.0, 1.0]);
        assert_eq!(row(&neg, "Mymensingh"), vec![0.0, 0.0, 1.0]);
        assert_eq!(row(&neg, "INTERNATIONAL"), vec![1.0, 0.0, 0.0]);
        assert_eq!(row(&pos, UNRESOLVED), vec![0.0, 1.0, 0.0]);
        assert_eq!(row(&neg, UNRESOLVED), vec![0.0, 0.0, 1.0]);
        assert_eq!((pos.total(), neg.total()), (7.0, 13.0));
        let vol = volume_grid(&c, &g).unwrap();
        for r in 0..vol.rows.len() {
            for w in 0..3 {
                assert_eq!(pos.cells[r][w] + neg.cells[r][w], vol.cells[r][w]);
            }
        }
        let mut buf = Vec::new();
        vol.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("region,week_0,week_1,week_2\nDhaka,"));
    }

    #[test]
    fn missing_sentiment_lists_ids() {
        let c = Corpus::from_articles(vec![
            article(0, "Dhaka", 0, None),
            article(1, "Dhaka", 0, Some(Sentiment::Positive)),
            article(2, "Dhaka", 0, None),
        ])
        .unwrap();
        let g = Gazetteer::bangladesh();
        let e = sentiment_grid(&c, &g, &HashMap::new()).unwrap_err().to_string();
        assert!(e.contains("a0") && e.contains("a2") && !e.contains("a1"));
        let preds: HashMap<String, Sentiment> =
            [("a0".to_string(), Sentiment::Positive), ("a2".to_string(), Sentiment::Positive)].into();
        let (pos, neg) = sentiment_grid(&c, &g, &preds).unwrap();
        assert_eq!((pos.total(), neg.total()), (3.0, 0.0));
    }
}
