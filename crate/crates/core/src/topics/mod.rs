//! Static topic modeling: collapsed Gibbs LDA, fold-in inference, coherence
//! and held-out likelihood scoring, and K selection.

mod coherence;
mod lda;
mod select;

pub use coherence::{
    npmi_coherence, umass_coherence, umass_pair, umass_words, CoDocIndex, Coherence,
    CoherenceReport,
};
pub use lda::{
    fit_lda, fold_in, fold_in_with_rng, log_perplexity, top_words, Estimate, GibbsSampler,
    LdaConfig, SavedTopicModel, TopicModel,
};
pub(crate) use lda::{argmax, fit_with_prior};
pub use select::{sweep_k, KScore, SelectionReport};
