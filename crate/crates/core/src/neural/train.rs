use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::{cross_entropy, softmax};
use super::net::{AdamConfig, NetSpec, Network};
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::topics::argmax;

/// Token ids (pad = 0) with a class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub ids: Vec<u32>,
    pub label: usize,
}

impl Example {
    pub fn new(ids: Vec<u32>, label: usize) -> Example {
        Example { ids, label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
}

/// `epoch,split,loss,accuracy`.
pub fn write_training_log<W: Write>(log: &[EpochLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "split", "loss", "accuracy"])?;
    for e in log {
        w.write_record([e.epoch.to_string(), e.split.clone(), e.loss.to_string(), e.accuracy.to_string()])?;
    }
    w.flush().map_err(|e| Error::data(format!("writing training log: {e}")))?;
    Ok(())
}

/// Adam with bias correction; moments kept per parameter entry in visit
/// order.
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, net: &mut Network) -> Adam {
        let mut m = Vec::new();
        net.visit(&mut |_, p| m.push(vec![0.0; p.value.len()]));
        let v = m.clone();
        Adam { cfg, m, v, t: 0 }
    }

    pub fn step(&mut self, net: &mut Network) {
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        let mut i = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        net.visit(&mut |_, p| {
            let (m, v) = (&mut ms[i], &mut vs[i]);
            for ((w, g), (mj, vj)) in p.value.data_mut().iter_mut().zip(&p.grad).zip(m.iter_mut().zip(v.iter_mut())) {
                *mj = c.beta1 * *mj + (1.0 - c.beta1) * g;
                *vj = c.beta2 * *vj + (1.0 - c.beta2) * g * g;
                let update = c.lr * (*mj / bc1) / ((*vj / bc2).sqrt() + c.eps);
                *w -= update;
            }
            i += 1;
        });
    }
}

fn as_pairs(xs: &[Example]) -> Vec<(Vec<u32>, usize)> {
    xs.iter().map(|e| (e.ids.clone(), e.label)).collect()
}

/// Mean cross-entropy and accuracy in inference mode.
pub fn evaluate_split(net: &Network, xs: &[Example]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for e in xs {
        let tr = net.forward(&net.prepare_ids(&e.ids), None)?;
        loss += cross_entropy(&tr.logits, e.label);
        if argmax(&tr.logits) == e.label {
            correct += 1;
        }
    }
    Ok((loss / xs.len() as f64, correct as f64 / xs.len() as f64))
}

/// Mini-batch Adam training. Batches are reshuffled every epoch from
/// `(seed, SHUFFLE + epoch)`; dropout draws from `(seed, DROPOUT)`. After
/// every epoch the train and validation splits are scored in inference
/// mode. Single-threaded and deterministic.
pub fn train(spec: &NetSpec, train_set: &[Example], validation: &[Example]) -> Result<(Network, Vec<EpochLog>)> {
    let net = Network::new(spec)?;
    train_from(net, train_set, validation)
}

/// [`train`] starting from an existing network (for pretrained
/// embeddings).
pub fn train_from(mut net: Network, train_set: &[Example], validation: &[Example]) -> Result<(Network, Vec<EpochLog>)> {
    let spec = net.spec.clone();
    if train_set.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    let mut seen = vec![false; spec.n_classes];
    for e in train_set.iter().chain(validation) {
        if e.label >= spec.n_classes {
            return Err(Error::data(format!("label {} outside {} classes", e.label, spec.n_classes)));
        }
    }
    for e in train_set {
        seen[e.label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::data(format!("class {missing} has no training examples")));
    }
    let mut adam = Adam::new(spec.adam, &mut net);
    let mut drop_rng = rng_for(spec.seed, stream::DROPOUT);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::new();
    for epoch in 1..=spec.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(spec.seed, stream::SHUFFLE + epoch as u64));
        for batch in order.chunks(spec.batch_size) {
            net.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let e = &train_set[i];
                let tr = net.forward(&net.prepare_ids(&e.ids), Some(&mut drop_rng))?;
                net.backward(&tr, e.label, scale);
            }
            net.add_l2_grad();
            adam.step(&mut net);
        }
        let (loss, acc) = evaluate_split(&net, train_set)?;
        log.push(EpochLog {
            epoch,
            split: "train".into(),
            loss,
            accuracy: acc,
        });
        if !validation.is_empty() {
            let (loss, acc) = evaluate_split(&net, validation)?;
            log.push(EpochLog {
                epoch,
                split: "validation".into(),
                loss,
                accuracy: acc,
            });
        }
    }
    Ok((net, log))
}

/// Most probable class and the full probability vector.
pub fn predict(net: &Network, ids: &[u32]) -> Result<(usize, Vec<f64>)> {
    let tr = net.forward(&net.prepare_ids(ids), None)?;
    let p = softmax(&tr.logits);
    Ok((argmax(&p), p))
}

/// Mean cross-entropy of `xs` (inference mode), for oracle comparisons.
pub fn batch_loss(net: &Network, xs: &[Example]) -> Result<f64> {
    net.loss(&as_pairs(xs))
}
