use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::net::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::textprep::Vocabulary;

/// Maps prepared-vocabulary ids to network ids. Network id 0 is the pad;
/// ids `1..cap` go to the most frequent words (ties by word order), every
/// other word maps to the pad and is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMap {
    pub vocab_hash: String,
    /// Word of each network id; entry 0 is `<pad>`.
    pub words: Vec<String>,
    /// Vocabulary id of each network id (entry 0 unused).
    pub source_ids: Vec<u32>,
    #[serde(skip)]
    index: HashMap<u32, u32>,
}

impl TokenMap {
    pub fn from_vocab(vocab: &Vocabulary, cap: usize) -> TokenMap {
        let mut ids: Vec<u32> = (0..vocab.len() as u32).collect();
        ids.sort_by(|a, b| vocab.term_freq(*b).cmp(&vocab.term_freq(*a)).then(a.cmp(b)));
        ids.truncate(cap.saturating_sub(1));
        let mut words = vec!["<pad>".to_string()];
        let mut source_ids = vec![0];
        for id in ids {
            words.push(vocab.word(id).to_string());
            source_ids.push(id);
        }
        let mut m = TokenMap {
            vocab_hash: vocab.hash(),
            words,
            source_ids,
            index: HashMap::new(),
        };
        m.reindex();
        m
    }

    pub fn reindex(&mut self) {
        self.index = self
            .source_ids
            .iter()
            .enumerate()
            .skip(1)
            .map(|(net, &src)| (src, net as u32))
            .collect();
    }

    /// Rows needed in the embedding table.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }

    /// Network ids for vocabulary ids; words outside the map become pads.
    pub fn encode(&self, tokens: &[u32]) -> Vec<u32> {
        tokens.iter().map(|t| self.index.get(t).copied().unwrap_or(0)).collect()
    }
}

/// Reads word2vec text vectors (`word v1 … vD` per line, optional `N D`
/// header) into a table whose row `i` belongs to `words[i]`. Rows of words
/// absent from the file are drawn from U(−0.05, 0.05) under
/// `(seed, EMBEDDING)`; row 0 (pad) is zero. Returns the table and the number
/// of rows found in the file.
pub fn load_word2vec<R: BufRead>(reader: R, words: &[String], dim: usize, seed: u64) -> Result<(Tensor, usize)> {
    let index: HashMap<&str, usize> = words.iter().enumerate().skip(1).map(|(i, w)| (w.as_str(), i)).collect();
    let mut rng = rng_for(seed, stream::EMBEDDING);
    let mut data: Vec<f64> = (0..words.len() * dim).map(|_| rng.random_range(-0.05..0.05)).collect();
    let head = dim.min(data.len());
    data[..head].iter_mut().for_each(|x| *x = 0.0);
    let mut found = vec![false; words.len()];
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::data(format!("embedding file line {}: {e}", n + 1)))?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        if n == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let Some(&row) = index.get(word) else { continue };
        if rest.len() != dim {
            return Err(Error::data(format!(
                "embedding file line {}: {} values for {word:?}, expected {dim}",
                n + 1,
                rest.len()
            )));
        }
        for (j, v) in rest.iter().enumerate() {
            data[row * dim + j] = v
                .parse()
                .map_err(|_| Error::data(format!("embedding file line {}: bad number {v:?}", n + 1)))?;
        }
        found[row] = true;
    }
    let hits = found.iter().filter(|f| **f).count();
    Ok((Tensor::new(vec![words.len(), dim], data)?, hits))
}

/// Saved network with everything needed to predict on new documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub labels: Vec<String>,
    pub token_map: TokenMap,
    pub network: Network,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn new(network: Network, token_map: TokenMap, labels: Vec<String>) -> Checkpoint {
        Checkpoint {
            version: Self::VERSION,
            labels,
            token_map,
            network,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut c: Checkpoint = serde_json::from_reader(std::io::BufReader::new(f))?;
        if c.version != Self::VERSION {
            return Err(Error::data(format!(
                "checkpoint version {} is not supported (expected {})",
                c.version,
                Self::VERSION
            )));
        }
        c.token_map.reindex();
        c.network.zero_grad();
        Ok(c)
    }
}
