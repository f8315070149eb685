//! Dynamic topic model over weekly slices.
//!
//! Slices are fitted in chronological order. The first slice with tokens is
//! a plain LDA fit; every later slice runs collapsed Gibbs with the word
//! prior `β + κ·φ_{t−1}`, so topic `k` in slice `t` continues topic `k` of
//! slice `t − 1` without re-matching. Coupling is forward only.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::textprep::{TokenizedDoc, Vocabulary};
use crate::topics::{fit_with_prior, top_words, Estimate, LdaConfig, TopicModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtmConfig {
    pub k: usize,
    /// `None` means 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Pseudo-count weight of the previous slice's φ.
    pub kappa: f64,
    /// Gibbs sweeps per slice.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub estimate: Estimate,
}

impl DtmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        DtmConfig {
            k,
            alpha: None,
            beta: 0.01,
            kappa: 50.0,
            iterations: 300,
            burn_in: 100,
            seed,
            estimate: Estimate::FinalCounts,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config(format!("coupling mass must be finite and >= 0, got {}", self.kappa)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config("beta must be positive"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::config("alpha must be positive"));
            }
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        Ok(())
    }

    /// Static LDA configuration used for slice `t`.
    pub fn slice_config(&self, t: usize) -> LdaConfig {
        LdaConfig {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            burn_in: self.burn_in.min(self.iterations.saturating_sub(1)),
            seed: derive_seed(self.seed, t as u64),
            estimate: self.estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtmModel {
    pub k: usize,
    pub v: usize,
    /// Week index of each slice.
    pub weeks: Vec<usize>,
    /// Per slice, K×V topic-major.
    pub phi: Vec<Vec<f64>>,
    /// Per slice, fraction of the slice's tokens assigned to each topic;
    /// `None` for slices without tokens.
    pub prevalence: Vec<Option<Vec<f64>>>,
    pub docs_per_slice: Vec<usize>,
    pub tokens_per_slice: Vec<usize>,
}

impl DtmModel {
    pub fn n_slices(&self) -> usize {
        self.phi.len()
    }

    pub fn phi_row(&self, t: usize, k: usize) -> &[f64] {
        &self.phi[t][k * self.v..(k + 1) * self.v]
    }

    /// Static model view of slice `t` (φ only; θ is empty).
    pub fn slice_model(&self, t: usize, alpha: f64, beta: f64) -> TopicModel {
        TopicModel {
            k: self.k,
            v: self.v,
            alpha,
            beta,
            phi: self.phi[t].clone(),
            theta: Vec::new(),
            z: Vec::new(),
            n_wk: Vec::new(),
            n_dk: Vec::new(),
            n_k: Vec::new(),
        }
    }
}

/// Article indices grouped by week, week 0 starting at the earliest date.
/// Interior weeks without articles are kept as empty groups.
pub fn slice_by_week(corpus: &Corpus) -> Vec<Vec<usize>> {
    let mut slices = vec![Vec::new(); corpus.n_weeks()];
    for (i, a) in corpus.articles().iter().enumerate() {
        slices[corpus.week_of(a.published_date)].push(i);
    }
    slices
}

/// Token lists of prepared documents grouped into `n_weeks` slices by their
/// week index.
pub fn slice_documents(docs: &[TokenizedDoc], n_weeks: usize) -> Result<Vec<Vec<Vec<u32>>>> {
    let mut slices = vec![Vec::new(); n_weeks];
    for d in docs {
        let slot = slices
            .get_mut(d.week)
            .ok_or_else(|| Error::data(format!("document {} has week {} beyond {n_weeks}", d.article_id, d.week)))?;
        slot.push(d.tokens.clone());
    }
    Ok(slices)
}

/// Fits the slice-coupled model. Slice `t` samples with seed
/// `derive_seed(config.seed, t)`; with κ = 0 each slice is exactly the
/// static fit under that seed. Slices without tokens carry φ forward and get
/// no prevalence; slices before the first non-empty one get uniform φ.
pub fn fit_dtm(slices: &[Vec<Vec<u32>>], v: usize, config: &DtmConfig) -> Result<DtmModel> {
    config.validate()?;
    let k = config.k;
    if v == 0 {
        return Err(Error::data("vocabulary is empty"));
    }
    let tokens: Vec<usize> = slices.iter().map(|s| s.iter().map(Vec::len).sum()).collect();
    let first = tokens
        .iter()
        .position(|&n| n > 0)
        .ok_or_else(|| Error::data("no slice contains any tokens"))?;
    let distinct: BTreeSet<u32> = slices[first].iter().flatten().copied().collect();
    if k > distinct.len() {
        return Err(Error::config(format!(
            "K = {k} exceeds the {} distinct words of the first slice",
            distinct.len()
        )));
    }

    let mut phi: Vec<Vec<f64>> = Vec::with_capacity(slices.len());
    let mut prevalence = Vec::with_capacity(slices.len());
    let mut prev_phi: Option<Vec<f64>> = None;
    for (t, docs) in slices.iter().enumerate() {
        if tokens[t] == 0 {
            let carried = prev_phi.clone().unwrap_or_else(|| vec![1.0 / v as f64; k * v]);
            phi.push(carried);
            prevalence.push(None);
            continue;
        }
        let prior: Option<Vec<f64>> = match (&prev_phi, config.kappa > 0.0) {
            (Some(p), true) => Some(p.iter().map(|x| config.kappa * x).collect()),
            _ => None,
        };
        let model = fit_with_prior(docs, v, &config.slice_config(t), prior.as_deref())?;
        let total = tokens[t] as f64;
        prevalence.push(Some(model.n_k.iter().map(|&n| n as f64 / total).collect()));
        prev_phi = Some(model.phi.clone());
        phi.push(model.phi);
    }
    Ok(DtmModel {
        k,
        v,
        weeks: (0..slices.len()).collect(),
        phi,
        prevalence,
        docs_per_slice: slices.iter().map(Vec::len).collect(),
        tokens_per_slice: tokens,
    })
}

/// Prevalence of topic `k` per slice; `None` marks slices without tokens.
pub fn topic_trajectory(model: &DtmModel, k: usize) -> Vec<Option<f64>> {
    model.prevalence.iter().map(|p| p.as_ref().map(|p| p[k])).collect()
}

/// `topic,week,prevalence` with an empty cell for slices without tokens.
pub fn write_prevalence_csv<W: Write>(model: &DtmModel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["topic", "week", "prevalence"])?;
    for k in 0..model.k {
        for (t, p) in topic_trajectory(model, k).iter().enumerate() {
            let cell = p.map(|p| p.to_string()).unwrap_or_default();
            w.write_record([k.to_string(), model.weeks[t].to_string(), cell])?;
        }
    }
    w.flush().map_err(|e| Error::data(format!("writing prevalence csv: {e}")))?;
    Ok(())
}

/// `topic,week,rank,word,phi` for the top `m` words of every topic in every
/// slice.
pub fn write_top_words_csv<W: Write>(model: &DtmModel, vocab: &Vocabulary, m: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["topic", "week", "rank", "word", "phi"])?;
    for t in 0..model.n_slices() {
        let tm = model.slice_model(t, 1.0, 0.01);
        for (k, words) in top_words(&tm, m).iter().enumerate() {
            for (rank, (id, p)) in words.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    model.weeks[t].to_string(),
                    (rank + 1).to_string(),
                    vocab.word(*id).to_string(),
                    p.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::data(format!("writing top-words csv: {e}")))?;
    Ok(())
}
