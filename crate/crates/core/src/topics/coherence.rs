use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lda::{top_words, TopicModel};

/// Coherence measure used for scoring and K selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coherence {
    /// Document co-occurrence UMass score.
    #[default]
    UMass,
    /// Normalized PMI over sliding token windows.
    Npmi { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<f64>,
    pub mean: f64,
    pub warnings: Vec<String>,
}

/// Per-word sorted document lists for co-document frequencies.
#[derive(Debug, Clone)]
pub struct CoDocIndex {
    postings: Vec<Vec<u32>>,
}

impl CoDocIndex {
    pub fn new(docs: &[Vec<u32>], v: usize) -> Self {
        let mut postings = vec![Vec::new(); v];
        for (d, doc) in docs.iter().enumerate() {
            for &w in doc {
                if let Some(p) = postings.get_mut(w as usize) {
                    if p.last() != Some(&(d as u32)) {
                        p.push(d as u32);
                    }
                }
            }
        }
        CoDocIndex { postings }
    }

    /// Number of documents containing `w`.
    pub fn df(&self, w: u32) -> usize {
        self.postings.get(w as usize).map_or(0, Vec::len)
    }

    /// Number of documents containing both words.
    pub fn co_df(&self, a: u32, b: u32) -> usize {
        let (Some(pa), Some(pb)) = (self.postings.get(a as usize), self.postings.get(b as usize)) else {
            return 0;
        };
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// `ln((D(wi, wj) + 1) / D(wj))`; `None` when `wj` occurs in no document.
pub fn umass_pair(index: &CoDocIndex, wi: u32, wj: u32) -> Option<f64> {
    let dj = index.df(wj);
    (dj > 0).then(|| ((index.co_df(wi, wj) as f64 + 1.0) / dj as f64).ln())
}

/// Mean UMass pair score over `words` (ranked), pairs `i < j` conditioned on
/// the lower-ranked word. `None` when fewer than two words or no scorable
/// pair.
pub fn umass_words(index: &CoDocIndex, words: &[u32]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            if let Some(s) = umass_pair(index, words[i], words[j]) {
                sum += s;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn ranked_nonzero(model: &TopicModel, top_m: usize) -> Vec<Vec<u32>> {
    top_words(model, top_m)
        .into_iter()
        .map(|ws| ws.into_iter().filter(|(_, p)| *p > 0.0).map(|(w, _)| w).collect())
        .collect()
}

fn report(scores: Vec<Option<f64>>) -> CoherenceReport {
    let mut warnings = Vec::new();
    let per_topic: Vec<f64> = scores
        .into_iter()
        .enumerate()
        .map(|(t, s)| {
            s.unwrap_or_else(|| {
                warnings.push(format!("topic {t}: fewer than two scorable top words, scored 0"));
                0.0
            })
        })
        .collect();
    let mean = if per_topic.is_empty() {
        0.0
    } else {
        per_topic.iter().sum::<f64>() / per_topic.len() as f64
    };
    CoherenceReport {
        per_topic,
        mean,
        warnings,
    }
}

/// UMass coherence of each topic's top-`top_m` words against `docs`.
pub fn umass_coherence(model: &TopicModel, top_m: usize, docs: &[Vec<u32>]) -> CoherenceReport {
    let index = CoDocIndex::new(docs, model.v);
    report(
        ranked_nonzero(model, top_m)
            .iter()
            .map(|ws| umass_words(&index, ws))
            .collect(),
    )
}

/// NPMI coherence with sliding windows of `window` tokens (documents shorter
/// than the window count as one window). Pair score
/// `ln(p(a,b) / (p(a) p(b))) / -ln p(a,b)`, with `-1` for pairs that never
/// share a window.
pub fn npmi_coherence(model: &TopicModel, top_m: usize, docs: &[Vec<u32>], window: usize) -> CoherenceReport {
    let window = window.max(1);
    let topics = ranked_nonzero(model, top_m);
    let mut wanted: HashMap<u32, usize> = HashMap::new();
    for w in topics.iter().flatten() {
        let n = wanted.len();
        wanted.entry(*w).or_insert(n);
    }
    let m = wanted.len();
    let mut single = vec![0u64; m];
    let mut joint = vec![0u64; m * m];
    let mut n_windows = 0u64;
    let mut present = Vec::new();
    for doc in docs {
        if doc.is_empty() {
            continue;
        }
        let starts = if doc.len() <= window { 1 } else { doc.len() - window + 1 };
        for s in 0..starts {
            n_windows += 1;
            present.clear();
            for w in &doc[s..(s + window).min(doc.len())] {
                if let Some(&i) = wanted.get(w) {
                    if !present.contains(&i) {
                        present.push(i);
                    }
                }
            }
            for (a, &i) in present.iter().enumerate() {
                single[i] += 1;
                for &j in &present[a + 1..] {
                    joint[i * m + j] += 1;
                    joint[j * m + i] += 1;
                }
            }
        }
    }
    let nw = n_windows.max(1) as f64;
    let scores = topics
        .iter()
        .map(|ws| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for a in 0..ws.len() {
                for b in a + 1..ws.len() {
                    let (i, j) = (wanted[&ws[a]], wanted[&ws[b]]);
                    if single[i] == 0 || single[j] == 0 {
                        continue;
                    }
                    let pij = joint[i * m + j] as f64 / nw;
                    let score = if pij == 0.0 {
                        -1.0
                    } else if pij == 1.0 {
                        1.0
                    } else {
                        let pi = single[i] as f64 / nw;
                        let pj = single[j] as f64 / nw;
                        (pij / (pi * pj)).ln() / -pij.ln()
                    };
                    sum += score;
                    n += 1;
                }
            }
            (n > 0).then(|| sum / n as f64)
        })
        .collect();
    report(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_co_occurring_pair_is_just_above_zero() {
        let docs: Vec<Vec<u32>> = (0..5).map(|_| vec![0, 1]).collect();
        let idx = CoDocIndex::new(&docs, 2);
        let s = umass_pair(&idx, 0, 1).unwrap();
        assert!((s - (6.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!(s > 0.0);
    }

    #[test]
    fn never_co_occurring_pair() {
        let mut docs: Vec<Vec<u32>> = (0..10).map(|_| vec![1]).collect();
        docs.push(vec![0]);
        let idx = CoDocIndex::new(&docs, 2);
        let s = umass_pair(&idx, 0, 1).unwrap();
        assert!((s + std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn delta_topic_scores_zero_with_warning() {
        let m = TopicModel::from_phi(vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0]], 1.0).unwrap();
        let docs = vec![vec![0, 1], vec![1, 2]];
        let r = umass_coherence(&m, 10, &docs);
        assert_eq!(r.per_topic[0], 0.0);
        assert_eq!(r.warnings.len(), 1);
        // topic 1 ranks 0 then 1: ln((D(0,1)+1)/D(1)) = ln(2/2) = 0
        assert!(r.per_topic[1].abs() < 1e-15);
    }

    #[test]
    fn permuting_topics_keeps_mean() {
        let m = TopicModel::from_phi(
            vec![vec![0.5, 0.3, 0.1, 0.1], vec![0.1, 0.1, 0.4, 0.4], vec![0.25; 4]],
            1.0,
        )
        .unwrap();
        let docs = vec![vec![0, 1], vec![2, 3, 0], vec![1, 2], vec![3]];
        let a = umass_coherence(&m, 3, &docs);
        let b = umass_coherence(&m.permuted(&[2, 0, 1]), 3, &docs);
        assert!((a.mean - b.mean).abs() < 1e-12);
        let a = npmi_coherence(&m, 3, &docs, 2);
        let b = npmi_coherence(&m.permuted(&[1, 2, 0]), 3, &docs, 2);
        assert!((a.mean - b.mean).abs() < 1e-12);
    }

    #[test]
    fn npmi_bounds() {
        let m = TopicModel::from_phi(vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5]], 1.0).unwrap();
        // words 0 and 1 always together; 0 and 2 never within a window of 2
        let docs = vec![vec![0, 1, 2, 2, 2], vec![1, 0]];
        let r = npmi_coherence(&m, 2, &docs, 2);
        assert!(r.per_topic[0] > 0.0 && r.per_topic[0] <= 1.0);
        assert!(r.per_topic[1] < 0.0 && r.per_topic[1] >= -1.0);
    }
}
