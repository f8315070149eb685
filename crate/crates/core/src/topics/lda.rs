use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream, Rng};

/// How φ and θ are read off the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    /// Smoothed counts of the final sweep.
    FinalCounts,
    /// Mean of the smoothed estimates over every post-burn-in sweep.
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic concentration; `None` means 50 / K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub estimate: Estimate,
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        LdaConfig {
            k,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            seed,
            estimate: Estimate::FinalCounts,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::config(format!("K must be at least 2, got {}", self.k)));
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("alpha and beta must be positive"));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler over token topic assignments.
///
/// The conditional for token `i` of document `d` carrying word `w` is
///
/// ```text
/// p(z = k) ∝ (n_dk + α) · (n_wk + β + π_kw) / (n_k + Vβ + Σ_w π_kw)
/// ```
///
/// where `π` is an optional extra pseudo-count matrix (used by slice-coupled
/// models; absent for plain LDA). Draws use inverse-CDF over the cumulative
/// weights in topic order.
pub struct GibbsSampler<'a> {
    docs: &'a [Vec<u32>],
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    prior: Option<&'a [f64]>,
    prior_row: Vec<f64>,
    z: Vec<Vec<u32>>,
    /// word-major: `n_wk[w * K + k]`
    n_wk: Vec<u32>,
    n_dk: Vec<u32>,
    n_k: Vec<u32>,
    cum: Vec<f64>,
    rng: Rng,
}

impl<'a> GibbsSampler<'a> {
    /// Random initial assignments drawn from `rng`. `prior`, when given, is a
    /// K×V topic-major pseudo-count matrix.
    pub fn new(
        docs: &'a [Vec<u32>],
        v: usize,
        k: usize,
        alpha: f64,
        beta: f64,
        prior: Option<&'a [f64]>,
        mut rng: Rng,
    ) -> Result<Self> {
        if let Some(p) = prior {
            if p.len() != k * v {
                return Err(Error::shape(format!("prior has {} entries, expected {}", p.len(), k * v)));
            }
        }
        let prior_row = match prior {
            Some(p) => p.chunks(v).map(|r| r.iter().sum()).collect(),
            None => vec![0.0; k],
        };
        let mut n_wk = vec![0u32; v * k];
        let mut n_dk = vec![0u32; docs.len() * k];
        let mut n_k = vec![0u32; k];
        let mut z = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let mut zd = Vec::with_capacity(doc.len());
            for &w in doc {
                if w as usize >= v {
                    return Err(Error::data(format!("token id {w} outside vocabulary of {v}")));
                }
                let t = rng.random_range(0..k as u32);
                n_wk[w as usize * k + t as usize] += 1;
                n_dk[d * k + t as usize] += 1;
                n_k[t as usize] += 1;
                zd.push(t);
            }
            z.push(zd);
        }
        Ok(GibbsSampler {
            docs,
            k,
            v,
            alpha,
            beta,
            prior,
            prior_row,
            z,
            n_wk,
            n_dk,
            n_k,
            cum: vec![0.0; k],
            rng,
        })
    }

    /// One full pass over every token in document order.
    pub fn sweep(&mut self) {
        let k = self.k;
        let vbeta = self.v as f64 * self.beta;
        for d in 0..self.docs.len() {
            let doc = &self.docs[d];
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                self.n_wk[w * k + old] -= 1;
                self.n_dk[d * k + old] -= 1;
                self.n_k[old] -= 1;

                let nwk = &self.n_wk[w * k..(w + 1) * k];
                let ndk = &self.n_dk[d * k..(d + 1) * k];
                let mut total = 0.0;
                match self.prior {
                    None => {
                        for t in 0..k {
                            total += (ndk[t] as f64 + self.alpha) * (nwk[t] as f64 + self.beta)
                                / (self.n_k[t] as f64 + vbeta);
                            self.cum[t] = total;
                        }
                    }
                    Some(p) => {
                        for t in 0..k {
                            total += (ndk[t] as f64 + self.alpha)
                                * (nwk[t] as f64 + self.beta + p[t * self.v + w])
                                / (self.n_k[t] as f64 + vbeta + self.prior_row[t]);
                            self.cum[t] = total;
                        }
                    }
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.cum.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.n_wk[w * k + new] += 1;
                self.n_dk[d * k + new] += 1;
                self.n_k[new] += 1;
                self.z[d][i] = new as u32;
            }
        }
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.z
    }

    /// Topic-major K×V estimate (n_kw + β + π_kw) / (n_k + Vβ + Σπ_k).
    pub fn phi(&self) -> Vec<f64> {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        let mut phi = vec![0.0; k * v];
        for t in 0..k {
            let denom = self.n_k[t] as f64 + vbeta + self.prior_row[t];
            for w in 0..v {
                let extra = self.prior.map_or(0.0, |p| p[t * v + w]);
                phi[t * v + w] = (self.n_wk[w * k + t] as f64 + self.beta + extra) / denom;
            }
        }
        phi
    }

    /// D×K estimate (n_dk + α) / (N_d + Kα); empty documents come out
    /// uniform.
    pub fn theta(&self) -> Vec<f64> {
        let k = self.k;
        let kalpha = k as f64 * self.alpha;
        let mut theta = vec![0.0; self.docs.len() * k];
        for (d, doc) in self.docs.iter().enumerate() {
            let denom = doc.len() as f64 + kalpha;
            for t in 0..k {
                theta[d * k + t] = (self.n_dk[d * k + t] as f64 + self.alpha) / denom;
            }
        }
        theta
    }

    /// Tokens per topic.
    pub fn topic_counts(&self) -> &[u32] {
        &self.n_k
    }

    /// Recomputes every count table from `z` and compares; also checks the
    /// marginal identities.
    pub fn counts_consistent(&self) -> bool {
        let k = self.k;
        let mut n_wk = vec![0u32; self.v * k];
        let mut n_dk = vec![0u32; self.docs.len() * k];
        let mut n_k = vec![0u32; k];
        for (d, (doc, zd)) in self.docs.iter().zip(&self.z).enumerate() {
            for (&w, &t) in doc.iter().zip(zd) {
                n_wk[w as usize * k + t as usize] += 1;
                n_dk[d * k + t as usize] += 1;
                n_k[t as usize] += 1;
            }
            if n_dk[d * k..(d + 1) * k].iter().map(|&c| c as usize).sum::<usize>() != doc.len() {
                return false;
            }
        }
        let row_sums_ok = (0..k).all(|t| {
            (0..self.v).map(|w| n_wk[w * k + t] as u64).sum::<u64>() == n_k[t] as u64
        });
        row_sums_ok && n_wk == self.n_wk && n_dk == self.n_dk && n_k == self.n_k
    }

    pub(crate) fn into_parts(self) -> (Vec<Vec<u32>>, Vec<u32>, Vec<u32>, Vec<u32>) {
        (self.z, self.n_wk, self.n_dk, self.n_k)
    }
}

/// Fitted static topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub k: usize,
    pub v: usize,
    pub alpha: f64,
    pub beta: f64,
    /// K×V topic-major.
    pub phi: Vec<f64>,
    /// D×K document-major.
    pub theta: Vec<f64>,
    /// Final token assignments of the training documents.
    pub z: Vec<Vec<u32>>,
    /// Word-major `n_wk[w * K + k]`.
    pub n_wk: Vec<u32>,
    pub n_dk: Vec<u32>,
    pub n_k: Vec<u32>,
}

impl TopicModel {
    /// Model with given topic-word rows and no training state.
    pub fn from_phi(rows: Vec<Vec<f64>>, alpha: f64) -> Result<TopicModel> {
        let k = rows.len();
        let v = rows.first().map_or(0, Vec::len);
        if k == 0 || v == 0 || rows.iter().any(|r| r.len() != v) {
            return Err(Error::shape("phi rows must be non-empty and equally long"));
        }
        Ok(TopicModel {
            k,
            v,
            alpha,
            beta: 0.0,
            phi: rows.concat(),
            theta: Vec::new(),
            z: Vec::new(),
            n_wk: Vec::new(),
            n_dk: Vec::new(),
            n_k: Vec::new(),
        })
    }

    /// Single-topic model: the smoothed unigram distribution of `docs`.
    pub fn unigram(docs: &[Vec<u32>], v: usize, beta: f64) -> Result<TopicModel> {
        let mut counts = vec![beta; v];
        for &w in docs.iter().flatten() {
            *counts
                .get_mut(w as usize)
                .ok_or_else(|| Error::data(format!("token id {w} outside vocabulary of {v}")))? += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Self::from_phi(vec![counts.into_iter().map(|c| c / total).collect()], 1.0)
    }

    pub fn phi_row(&self, k: usize) -> &[f64] {
        &self.phi[k * self.v..(k + 1) * self.v]
    }

    pub fn theta_row(&self, d: usize) -> &[f64] {
        &self.theta[d * self.k..(d + 1) * self.k]
    }

    pub fn n_docs(&self) -> usize {
        self.theta.len() / self.k.max(1)
    }

    /// Model with topic indices reordered: new topic `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> TopicModel {
        assert_eq!(perm.len(), self.k);
        let phi = perm.iter().flat_map(|&t| self.phi_row(t).to_vec()).collect();
        let theta = (0..self.n_docs())
            .flat_map(|d| perm.iter().map(move |&t| (d, t)))
            .map(|(d, t)| self.theta[d * self.k + t])
            .collect();
        TopicModel {
            phi,
            theta,
            z: Vec::new(),
            n_wk: Vec::new(),
            n_dk: Vec::new(),
            n_k: Vec::new(),
            ..self.clone()
        }
    }

    /// Hard topic label per training document (argmax θ, lowest index on
    /// ties).
    pub fn dominant_topics(&self) -> Vec<usize> {
        (0..self.n_docs())
            .map(|d| argmax(self.theta_row(d)))
            .collect()
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Fits LDA by collapsed Gibbs sampling. The chain draws from the stream
/// `(config.seed, LDA + K)`, so identical inputs give identical assignment
/// histories.
pub fn fit_lda(docs: &[Vec<u32>], v: usize, config: &LdaConfig) -> Result<TopicModel> {
    config.validate()?;
    fit_with_prior(docs, v, config, None)
}

pub(crate) fn fit_with_prior(
    docs: &[Vec<u32>],
    v: usize,
    config: &LdaConfig,
    prior: Option<&[f64]>,
) -> Result<TopicModel> {
    if docs.is_empty() {
        return Err(Error::data("cannot fit a topic model on an empty corpus"));
    }
    if v == 0 {
        return Err(Error::data("vocabulary is empty"));
    }
    let (k, alpha) = (config.k, config.alpha());
    let rng = rng_for(config.seed, stream::LDA + k as u64);
    let mut sampler = GibbsSampler::new(docs, v, k, alpha, config.beta, prior, rng)?;
    let mut phi_acc = vec![0.0; k * v];
    let mut theta_acc = vec![0.0; docs.len() * k];
    let mut n_avg = 0usize;
    for it in 0..config.iterations {
        sampler.sweep();
        if config.estimate == Estimate::Averaged && it >= config.burn_in {
            add_assign(&mut phi_acc, &sampler.phi());
            add_assign(&mut theta_acc, &sampler.theta());
            n_avg += 1;
        }
    }
    let (phi, theta) = if n_avg > 0 {
        let s = 1.0 / n_avg as f64;
        (
            phi_acc.into_iter().map(|x| x * s).collect(),
            theta_acc.into_iter().map(|x| x * s).collect(),
        )
    } else {
        (sampler.phi(), sampler.theta())
    };
    let (z, n_wk, n_dk, n_k) = sampler.into_parts();
    Ok(TopicModel {
        k,
        v,
        alpha,
        beta: config.beta,
        phi,
        theta,
        z,
        n_wk,
        n_dk,
        n_k,
    })
}

fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// θ for an unseen document against frozen φ, drawing from
/// `(seed, FOLD_IN)`. See [`fold_in_with_rng`].
pub fn fold_in(doc: &[u32], model: &TopicModel, sweeps: usize, seed: u64) -> Vec<f64> {
    fold_in_with_rng(doc, model, sweeps, &mut rng_for(seed, stream::FOLD_IN))
}

/// Gibbs over the new document's assignments only, with
/// `p(z = k) ∝ (n_dk + α) φ_kw`. The returned θ averages the smoothed
/// estimate over the second half of the sweeps. Ids outside the model's
/// vocabulary are ignored; an empty document yields the uniform row.
pub fn fold_in_with_rng(doc: &[u32], model: &TopicModel, sweeps: usize, rng: &mut Rng) -> Vec<f64> {
    let k = model.k;
    let doc: Vec<usize> = doc
        .iter()
        .map(|&w| w as usize)
        .filter(|&w| w < model.v)
        .collect();
    if doc.is_empty() {
        return vec![1.0 / k as f64; k];
    }
    let mut n_dk = vec![0u32; k];
    let mut z: Vec<usize> = doc
        .iter()
        .map(|_| {
            let t = rng.random_range(0..k as u32) as usize;
            n_dk[t] += 1;
            t
        })
        .collect();
    let sweeps = sweeps.max(1);
    let keep_from = sweeps / 2;
    let denom = doc.len() as f64 + k as f64 * model.alpha;
    let mut theta = vec![0.0; k];
    let mut kept = 0usize;
    let mut cum = vec![0.0; k];
    for s in 0..sweeps {
        for (i, &w) in doc.iter().enumerate() {
            n_dk[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (n_dk[t] as f64 + model.alpha) * model.phi[t * model.v + w];
                cum[t] = total;
            }
            let u = rng.random::<f64>() * total;
            let new = cum.iter().position(|&c| u < c).unwrap_or(k - 1);
            n_dk[new] += 1;
            z[i] = new;
        }
        if s >= keep_from {
            for t in 0..k {
                theta[t] += (n_dk[t] as f64 + model.alpha) / denom;
            }
            kept += 1;
        }
    }
    theta.iter_mut().for_each(|x| *x /= kept as f64);
    theta
}

/// Held-out per-word log-likelihood (natural log),
/// `Σ_d Σ_i ln Σ_k θ_dk φ_k,w_di / N`, with θ from fold-in. Document `d`
/// folds in on stream `(seed, FOLD_IN + d)`.
pub fn log_perplexity(model: &TopicModel, heldout: &[Vec<u32>], sweeps: usize, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (d, doc) in heldout.iter().enumerate() {
        let doc: Vec<u32> = doc.iter().copied().filter(|&w| (w as usize) < model.v).collect();
        if doc.is_empty() {
            continue;
        }
        let theta = fold_in_with_rng(&doc, model, sweeps, &mut rng_for(seed, stream::FOLD_IN + d as u64));
        for &w in &doc {
            let p: f64 = (0..model.k)
                .map(|t| theta[t] * model.phi[t * model.v + w as usize])
                .sum();
            total += p.ln();
        }
        n += doc.len();
    }
    if n == 0 {
        return Err(Error::data("no in-vocabulary held-out tokens"));
    }
    Ok(total / n as f64)
}

/// Per-topic words ranked by descending φ; equal probabilities rank the lower
/// word id first.
pub fn top_words(model: &TopicModel, m: usize) -> Vec<Vec<(u32, f64)>> {
    (0..model.k)
        .map(|t| {
            let row = model.phi_row(t);
            let mut ids: Vec<u32> = (0..model.v as u32).collect();
            ids.sort_by(|&a, &b| {
                row[b as usize]
                    .partial_cmp(&row[a as usize])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            ids.truncate(m);
            ids.into_iter().map(|w| (w, row[w as usize])).collect()
        })
        .collect()
}

/// On-disk topic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedTopicModel {
    pub format_version: u32,
    pub config: LdaConfig,
    pub vocab_hash: String,
    pub k: usize,
    pub v: usize,
    pub alpha: f64,
    pub beta: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub doc_ids: Vec<String>,
}

impl SavedTopicModel {
    pub const VERSION: u32 = 1;

    pub fn new(model: &TopicModel, config: &LdaConfig, vocab_hash: String, doc_ids: Vec<String>) -> Self {
        SavedTopicModel {
            format_version: Self::VERSION,
            config: config.clone(),
            vocab_hash,
            k: model.k,
            v: model.v,
            alpha: model.alpha,
            beta: model.beta,
            phi: model.phi.clone(),
            theta: model.theta.clone(),
            doc_ids,
        }
    }

    pub fn into_model(self) -> Result<TopicModel> {
        if self.format_version != Self::VERSION {
            return Err(Error::data(format!("unsupported topic model version {}", self.format_version)));
        }
        if self.phi.len() != self.k * self.v || !self.theta.len().is_multiple_of(self.k.max(1)) {
            return Err(Error::data("topic model matrices have inconsistent sizes"));
        }
        Ok(TopicModel {
            k: self.k,
            v: self.v,
            alpha: self.alpha,
            beta: self.beta,
            phi: self.phi,
            theta: self.theta,
            z: Vec::new(),
            n_wk: Vec::new(),
            n_dk: Vec::new(),
            n_k: Vec::new(),
        })
    }
}
