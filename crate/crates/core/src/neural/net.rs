use serde::{Deserialize, Serialize};

use super::layers::{
    cross_entropy, dropout_mask, max_pool_backward, max_pool_forward, softmax, BiLstm, BiLstmCache, Conv1d,
    ConvCache, Dense, Embedding, Lstm, LstmCache, Param,
};
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub width: usize,
    /// Max-pool window after the convolution; 1 disables pooling.
    pub pool: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrentSpec {
    pub hidden: usize,
    pub bidirectional: bool,
    /// Dropout on this layer's output sequence during training.
    pub dropout: f64,
}

/// Network layout and training hyperparameters. The layer order is fixed:
/// embedding, optional convolution and pooling, recurrent stack, hidden
/// dense layers (ReLU), softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub name: String,
    /// Rows of the embedding table, pad id 0 included.
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Longer documents keep their first `max_len` tokens.
    pub max_len: usize,
    pub conv: Option<ConvSpec>,
    pub recurrent: Vec<RecurrentSpec>,
    pub dense_hidden: Vec<usize>,
    pub n_classes: usize,
    pub adam: AdamConfig,
    /// L2 strength on kernels (embedding table and biases excluded).
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl NetSpec {
    /// News classifier: embedding 300, LSTM 100, softmax over
    /// `n_classes` (8 classes, 19 subclasses or the topic count).
    pub fn classifier(n_classes: usize) -> NetSpec {
        NetSpec {
            name: "classifier".into(),
            vocab_size: 50_000,
            embed_dim: 300,
            max_len: 1000,
            conv: None,
            recurrent: vec![RecurrentSpec {
                hidden: 100,
                bidirectional: false,
                dropout: 0.0,
            }],
            dense_hidden: vec![],
            n_classes,
            adam: AdamConfig::default(),
            l2: 1e-4,
            batch_size: 32,
            epochs: 5,
            seed: 0,
        }
    }

    /// Sentiment net: embedding 300, conv 200×3 with max-pool 2, two BiLSTM
    /// layers (100 units each way, dropout 0.5), dense 64, two classes.
    pub fn sentiment() -> NetSpec {
        let bi = RecurrentSpec {
            hidden: 100,
            bidirectional: true,
            dropout: 0.5,
        };
        NetSpec {
            name: "sentiment".into(),
            vocab_size: 60_000,
            embed_dim: 300,
            max_len: 200,
            conv: Some(ConvSpec {
                filters: 200,
                width: 3,
                pool: 2,
            }),
            recurrent: vec![bi, bi],
            dense_hidden: vec![64],
            n_classes: 2,
            adam: AdamConfig::default(),
            l2: 1e-4,
            batch_size: 256,
            epochs: 5,
            seed: 0,
        }
    }

    /// Same layout with every width replaced: embedding `embed`, conv
    /// filters `filters`, recurrent `hidden`, hidden dense layers `dense`.
    pub fn with_dims(mut self, embed: usize, filters: usize, hidden: usize, dense: usize) -> NetSpec {
        self.embed_dim = embed;
        if let Some(c) = &mut self.conv {
            c.filters = filters;
        }
        self.recurrent.iter_mut().for_each(|r| r.hidden = hidden);
        self.dense_hidden.iter_mut().for_each(|d| *d = dense);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("{}: {m}", self.name)));
        if self.vocab_size < 2 || self.embed_dim == 0 || self.max_len == 0 {
            return bad("vocabulary, embedding and sequence sizes must be positive");
        }
        if self.recurrent.is_empty() {
            return bad("at least one recurrent layer is required");
        }
        if self.recurrent.iter().any(|r| r.hidden == 0 || !(0.0..1.0).contains(&r.dropout)) {
            return bad("recurrent layers need hidden > 0 and dropout in [0, 1)");
        }
        if let Some(c) = &self.conv {
            if c.filters == 0 || c.width == 0 || c.pool == 0 {
                return bad("convolution sizes must be positive");
            }
        }
        if self.dense_hidden.contains(&0) {
            return bad("dense layers must be non-empty");
        }
        if self.n_classes < 2 {
            return bad("at least two classes are required");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.l2 >= 0.0) || !(self.adam.lr >= 0.0) {
            return bad("L2 strength and learning rate must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Recurrent {
    Uni(Lstm),
    Bi(BiLstm),
}

impl Recurrent {
    fn out_dim(&self) -> usize {
        match self {
            Recurrent::Uni(l) => l.hidden,
            Recurrent::Bi(b) => 2 * b.fwd.hidden,
        }
    }
}

enum RecCache {
    Uni(LstmCache),
    Bi(BiLstmCache),
}

/// Everything the backward pass needs from one forward pass.
pub struct Trace {
    ids: Vec<u32>,
    emb: Vec<f64>,
    conv: Option<(Vec<f64>, ConvCache)>,
    pool_arg: Option<Vec<usize>>,
    /// Sequence length entering each recurrent layer and that layer's input.
    rec_in: Vec<(usize, Vec<f64>)>,
    rec: Vec<RecCache>,
    drop: Vec<Option<Vec<f64>>>,
    summary: Vec<f64>,
    dense: Vec<(Vec<f64>, Vec<f64>)>,
    pub logits: Vec<f64>,
}

/// A network built from a [`NetSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetSpec,
    pub embedding: Embedding,
    pub conv: Option<Conv1d>,
    pub recurrent: Vec<Recurrent>,
    pub dense: Vec<Dense>,
    pub output: Dense,
}

impl Network {
    /// Seeded initialization from `(spec.seed, INIT)`.
    pub fn new(spec: &NetSpec) -> Result<Network> {
        spec.validate()?;
        let mut rng = rng_for(spec.seed, stream::INIT);
        let embedding = Embedding::init(spec.vocab_size, spec.embed_dim, &mut rng);
        let mut width = spec.embed_dim;
        let conv = spec.conv.map(|c| {
            let layer = Conv1d::init(c.filters, c.width, width, &mut rng);
            width = c.filters;
            layer
        });
        let mut recurrent = Vec::new();
        for r in &spec.recurrent {
            let layer = if r.bidirectional {
                Recurrent::Bi(BiLstm::init(width, r.hidden, &mut rng))
            } else {
                Recurrent::Uni(Lstm::init(width, r.hidden, &mut rng))
            };
            width = layer.out_dim();
            recurrent.push(layer);
        }
        let mut dense = Vec::new();
        for &d in &spec.dense_hidden {
            dense.push(Dense::init(width, d, true, &mut rng));
            width = d;
        }
        let output = Dense::init(width, spec.n_classes, false, &mut rng);
        Ok(Network {
            spec: spec.clone(),
            embedding,
            conv,
            recurrent,
            dense,
            output,
        })
    }

    /// Visits every parameter in a fixed order with its name.
    pub fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("embedding.table", &mut self.embedding.table);
        if let Some(c) = &mut self.conv {
            f("conv.kernel", &mut c.kernel);
            f("conv.bias", &mut c.bias);
        }
        for (i, r) in self.recurrent.iter_mut().enumerate() {
            let lstm = |f: &mut dyn FnMut(&str, &mut Param), prefix: String, l: &mut Lstm| {
                f(&format!("{prefix}.wx"), &mut l.wx);
                f(&format!("{prefix}.wh"), &mut l.wh);
                f(&format!("{prefix}.b"), &mut l.b);
            };
            match r {
                Recurrent::Uni(l) => lstm(f, format!("rnn{i}"), l),
                Recurrent::Bi(b) => {
                    lstm(f, format!("rnn{i}.fwd"), &mut b.fwd);
                    lstm(f, format!("rnn{i}.bwd"), &mut b.bwd);
                }
            }
        }
        for (i, d) in self.dense.iter_mut().enumerate() {
            f(&format!("dense{i}.w"), &mut d.w);
            f(&format!("dense{i}.b"), &mut d.b);
        }
        f("output.w", &mut self.output.w);
        f("output.b", &mut self.output.b);
    }

    pub fn zero_grad(&mut self) {
        self.visit(&mut |_, p| p.zero_grad());
    }

    pub fn n_params(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, p| n += p.value.len());
        n
    }

    /// Pads removed, truncated to `max_len`, then right-padded with pad ids
    /// up to the convolution width when there is one.
    pub fn prepare_ids(&self, ids: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = ids
            .iter()
            .copied()
            .filter(|&i| i != Embedding::PAD)
            .take(self.spec.max_len)
            .collect();
        if let Some(c) = &self.conv {
            while out.len() < c.width {
                out.push(Embedding::PAD);
            }
        }
        out
    }

    /// Forward pass over already prepared ids. `dropout` supplies the
    /// generator for training-mode dropout; `None` is inference.
    pub fn forward(&self, ids: &[u32], mut dropout: Option<&mut Rng>) -> Result<Trace> {
        let emb = self.embedding.forward(ids)?;
        let mut t = ids.len();
        let mut seq = emb.clone();
        let mut conv_cache = None;
        let mut pool_arg = None;
        if let Some(c) = &self.conv {
            let (post, cache) = c.forward(&seq, t)?;
            t = c.out_len(t);
            let pool = self.spec.conv.map_or(1, |s| s.pool);
            seq = if pool > 1 {
                let (p, arg) = max_pool_forward(&post, t, c.filters(), pool);
                pool_arg = Some(arg);
                t = t.div_ceil(pool);
                p
            } else {
                post
            };
            conv_cache = Some((emb.clone(), cache));
        }
        let mask = vec![true; t];
        let mut rec_in = Vec::new();
        let mut rec = Vec::new();
        let mut drop = Vec::new();
        for (layer, spec) in self.recurrent.iter().zip(&self.spec.recurrent) {
            rec_in.push((t, seq.clone()));
            let (mut out, cache) = match layer {
                Recurrent::Uni(l) => {
                    let (o, c) = l.forward(&seq, &mask, false);
                    (o, RecCache::Uni(c))
                }
                Recurrent::Bi(b) => {
                    let (o, c) = b.forward(&seq, &mask);
                    (o, RecCache::Bi(c))
                }
            };
            let m = match dropout.as_deref_mut() {
                Some(rng) if spec.dropout > 0.0 => {
                    let m = dropout_mask(out.len(), spec.dropout, rng);
                    out.iter_mut().zip(&m).for_each(|(x, k)| *x *= k);
                    Some(m)
                }
                _ => None,
            };
            rec.push(cache);
            drop.push(m);
            seq = out;
        }
        let last = self.recurrent.last().expect("validated");
        let summary = summarize(last, &seq, t);
        let mut x = summary.clone();
        let mut dense = Vec::new();
        for d in &self.dense {
            let (z, y) = d.forward(&x);
            dense.push((x, z));
            x = y;
        }
        let (logits, _) = self.output.forward(&x);
        dense.push((x, Vec::new()));
        Ok(Trace {
            ids: ids.to_vec(),
            emb,
            conv: conv_cache,
            pool_arg,
            rec_in,
            rec,
            drop,
            summary,
            dense,
            logits,
        })
    }

    /// Accumulates `scale · ∂CE/∂θ` for one example into the parameter
    /// gradients.
    pub fn backward(&mut self, trace: &Trace, label: usize, scale: f64) {
        let mut d: Vec<f64> = softmax(&trace.logits).iter().map(|p| p * scale).collect();
        d[label] -= scale;
        let (out_in, _) = trace.dense.last().expect("output input");
        let mut dx = self.output.backward(out_in, &[], &d);
        for (i, layer) in self.dense.iter_mut().enumerate().rev() {
            let (x, z) = &trace.dense[i];
            dx = layer.backward(x, z, &dx);
        }
        let n_rec = self.recurrent.len();
        let (t_last, _) = trace.rec_in[n_rec - 1];
        let last_width = self.recurrent[n_rec - 1].out_dim();
        let mut dseq = unsummarize(&self.recurrent[n_rec - 1], &dx, t_last, last_width);
        debug_assert_eq!(trace.summary.len(), dx.len());
        for i in (0..n_rec).rev() {
            if let Some(m) = &trace.drop[i] {
                dseq.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
            }
            dseq = match (&mut self.recurrent[i], &trace.rec[i]) {
                (Recurrent::Uni(l), RecCache::Uni(c)) => l.backward(c, &dseq),
                (Recurrent::Bi(b), RecCache::Bi(c)) => b.backward(c, &dseq),
                _ => unreachable!("cache kind matches layer kind"),
            };
        }
        if let Some(conv) = &mut self.conv {
            let (x, cache) = trace.conv.as_ref().expect("conv cache");
            let t_conv = conv.out_len(trace.ids.len());
            if let Some(arg) = &trace.pool_arg {
                dseq = max_pool_backward(arg, t_conv, conv.filters(), &dseq);
            }
            dseq = conv.backward(x, cache, &dseq);
        }
        debug_assert_eq!(dseq.len(), trace.emb.len());
        self.embedding.backward(&trace.ids, &dseq);
    }

    /// Class probabilities for raw ids (inference mode).
    pub fn probabilities(&self, ids: &[u32]) -> Result<Vec<f64>> {
        let prepared = self.prepare_ids(ids);
        Ok(softmax(&self.forward(&prepared, None)?.logits))
    }

    /// Mean data cross-entropy over examples, inference mode.
    pub fn loss(&self, batch: &[(Vec<u32>, usize)]) -> Result<f64> {
        let mut total = 0.0;
        for (ids, label) in batch {
            let tr = self.forward(&self.prepare_ids(ids), None)?;
            total += cross_entropy(&tr.logits, *label);
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// `(λ / 2) Σ ‖kernel‖²`.
    pub fn l2_penalty(&mut self) -> f64 {
        let l2 = self.spec.l2;
        let mut s = 0.0;
        self.visit(&mut |_, p| {
            if p.kernel {
                s += p.value.data().iter().map(|x| x * x).sum::<f64>();
            }
        });
        0.5 * l2 * s
    }

    /// Mean data loss plus L2 penalty, with its gradient accumulated into the
    /// parameters (dropout off).
    pub fn objective_and_grad(&mut self, batch: &[(Vec<u32>, usize)]) -> Result<f64> {
        self.zero_grad();
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for (ids, label) in batch {
            let tr = self.forward(&self.prepare_ids(ids), None)?;
            loss += cross_entropy(&tr.logits, *label) * scale;
            self.backward(&tr, *label, scale);
        }
        loss += self.l2_penalty();
        self.add_l2_grad();
        Ok(loss)
    }

    pub(crate) fn add_l2_grad(&mut self) {
        let l2 = self.spec.l2;
        if l2 == 0.0 {
            return;
        }
        self.visit(&mut |_, p| {
            if p.kernel {
                for (g, w) in p.grad.iter_mut().zip(p.value.data()) {
                    *g += l2 * w;
                }
            }
        });
    }
}

fn summarize(layer: &Recurrent, seq: &[f64], t: usize) -> Vec<f64> {
    match layer {
        Recurrent::Uni(l) => {
            if t == 0 {
                vec![0.0; l.hidden]
            } else {
                seq[(t - 1) * l.hidden..t * l.hidden].to_vec()
            }
        }
        Recurrent::Bi(b) => {
            let h = b.fwd.hidden;
            if t == 0 {
                return vec![0.0; 2 * h];
            }
            let mut s = seq[(t - 1) * 2 * h..(t - 1) * 2 * h + h].to_vec();
            s.extend_from_slice(&seq[h..2 * h]);
            s
        }
    }
}

fn unsummarize(layer: &Recurrent, d: &[f64], t: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; t * width];
    if t == 0 {
        return out;
    }
    match layer {
        Recurrent::Uni(l) => out[(t - 1) * l.hidden..t * l.hidden].copy_from_slice(d),
        Recurrent::Bi(b) => {
            let h = b.fwd.hidden;
            for j in 0..h {
                out[(t - 1) * 2 * h + j] += d[j];
                out[h + j] += d[h + j];
            }
        }
    }
    out
}

/// Result of a finite-difference check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Worst relative error per parameter group.
    pub groups: Vec<(String, f64)>,
    pub checked: usize,
}

/// |a − n| / max(|a|, |n|, 1e-8).
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Central differences of the batch objective (mean CE plus L2, dropout
/// off) against backprop for every parameter entry. `max_per_group` limits
/// the entries checked per group (evenly strided) for large networks.
pub fn grad_check(
    net: &mut Network,
    batch: &[(Vec<u32>, usize)],
    eps: f64,
    max_per_group: Option<usize>,
) -> Result<GradCheck> {
    net.objective_and_grad(batch)?;
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    net.visit(&mut |name, p| analytic.push((name.to_string(), p.grad.clone())));
    let mut groups = Vec::new();
    let mut checked = 0;
    for (gi, (name, grad)) in analytic.iter().enumerate() {
        let n = grad.len();
        let step = max_per_group.map_or(1, |m| n.div_ceil(m.max(1)).max(1));
        let mut worst: f64 = 0.0;
        for idx in (0..n).step_by(step) {
            let eval = |net: &mut Network, delta: f64| -> Result<f64> {
                let old = set_entry(net, gi, idx, None);
                set_entry(net, gi, idx, Some(old + delta));
                let v = net.loss(batch)? + net.l2_penalty();
                set_entry(net, gi, idx, Some(old));
                Ok(v)
            };
            let plus = eval(net, eps)?;
            let minus = eval(net, -eps)?;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(grad[idx], numeric));
            checked += 1;
        }
        groups.push((name.clone(), worst));
    }
    Ok(GradCheck {
        max_rel_error: groups.iter().map(|g| g.1).fold(0.0, f64::max),
        groups,
        checked,
    })
}

/// Reads one parameter entry, optionally overwriting it; returns the value
/// before the write.
fn set_entry(net: &mut Network, group: usize, idx: usize, value: Option<f64>) -> f64 {
    let mut i = 0;
    let mut old = 0.0;
    net.visit(&mut |_, p| {
        if i == group {
            old = p.value.data()[idx];
            if let Some(v) = value {
                p.value.data_mut()[idx] = v;
            }
        }
        i += 1;
    });
    old
}
