use serde::Serialize;

use super::coherence::{npmi_coherence, umass_coherence, Coherence};
use super::lda::{fit_lda, log_perplexity, LdaConfig, TopicModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KScore {
    pub k: usize,
    pub coherence: f64,
    pub log_perplexity: f64,
}

/// Scores per swept K and the chosen K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub scores: Vec<KScore>,
    pub chosen_k: usize,
    /// Always `max_coherence`: highest coherence, smallest K on ties.
    pub rule: String,
    pub coherence: Coherence,
}

impl SelectionReport {
    /// K with the best held-out log-likelihood, reported for comparison.
    pub fn perplexity_optimum(&self) -> Option<usize> {
        self.scores
            .iter()
            .fold(None::<&KScore>, |best, s| match best {
                Some(b) if b.log_perplexity >= s.log_perplexity => Some(b),
                _ => Some(s),
            })
            .map(|s| s.k)
    }
}

/// Fits one model per K (each with the template's seed, so each K draws
/// from its own stream) and picks the K of maximal mean coherence. Per-K
/// fits run on separate threads; results do not depend on scheduling.
/// Log-perplexity is the fold-in per-word log-likelihood of `docs` itself.
#[allow(clippy::too_many_arguments)]
pub fn sweep_k(
    docs: &[Vec<u32>],
    v: usize,
    ks: &[usize],
    template: &LdaConfig,
    coherence: Coherence,
    top_m: usize,
    fold_in_sweeps: usize,
) -> Result<SelectionReport> {
    if ks.is_empty() {
        return Err(Error::config("K range is empty"));
    }
    let score_one = |k: usize| -> Result<(KScore, TopicModel)> {
        let cfg = LdaConfig {
            k,
            ..template.clone()
        };
        let model = fit_lda(docs, v, &cfg)?;
        let c = match coherence {
            Coherence::UMass => umass_coherence(&model, top_m, docs),
            Coherence::Npmi { window } => npmi_coherence(&model, top_m, docs, window),
        };
        let lp = log_perplexity(&model, docs, fold_in_sweeps, template.seed)?;
        Ok((
            KScore {
                k,
                coherence: c.mean,
                log_perplexity: lp,
            },
            model,
        ))
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(ks.len());
    let mut results: Vec<Option<Result<KScore>>> = (0..ks.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let score_one = &score_one;
                s.spawn(move || {
                    (w..ks.len())
                        .step_by(workers)
                        .map(|i| (i, score_one(ks[i]).map(|r| r.0)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let scores = results
        .into_iter()
        .map(|r| r.expect("every K scored"))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = &scores[0];
    for s in &scores[1..] {
        if s.coherence > chosen.coherence || (s.coherence == chosen.coherence && s.k < chosen.k) {
            chosen = s;
        }
    }
    Ok(SelectionReport {
        chosen_k: chosen.k,
        scores,
        rule: "max_coherence".into(),
        coherence,
    })
}
