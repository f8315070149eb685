//! Layers with explicit forward and backward passes over one sequence.
//! Activations are flat row-major `T × width` buffers.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::{matvec_acc, matvec_t_acc, outer_acc, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Trainable array with its gradient accumulator. `kernel` marks weights
/// that receive L2 regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Tensor,
    #[serde(skip)]
    pub grad: Vec<f64>,
    pub kernel: bool,
}

impl Param {
    pub fn new(value: Tensor, kernel: bool) -> Param {
        let grad = vec![0.0; value.len()];
        Param { value, grad, kernel }
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
        self.grad.resize(self.value.len(), 0.0);
    }

    fn w(&self) -> &[f64] {
        self.value.data()
    }
}

fn uniform(rng: &mut Rng, n: usize, limit: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Glorot-uniform: U(±√(6 / (fan_in + fan_out))).
pub fn glorot(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::new(vec![rows, cols], uniform(rng, rows * cols, limit)).expect("shape")
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row lookup; id `pad` yields a zero row whatever the table holds.
pub fn embed(ids: &[u32], table: &Tensor, pad: u32) -> Result<Tensor> {
    let (v, d) = (table.rows(), table.cols());
    let mut out = vec![0.0; ids.len() * d];
    for (t, &id) in ids.iter().enumerate() {
        if id as usize >= v {
            return Err(Error::data(format!("token id {id} outside embedding of {v} rows")));
        }
        if id != pad {
            out[t * d..(t + 1) * d].copy_from_slice(table.row(id as usize));
        }
    }
    Tensor::new(vec![ids.len(), d], out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub table: Param,
}

impl Embedding {
    pub const PAD: u32 = 0;

    /// U(−0.05, 0.05) rows, pad row zero.
    pub fn init(vocab: usize, dim: usize, rng: &mut Rng) -> Embedding {
        let mut data = uniform(rng, vocab * dim, 0.05);
        data[..dim].iter_mut().for_each(|x| *x = 0.0);
        Embedding {
            table: Param::new(Tensor::new(vec![vocab, dim], data).expect("shape"), false),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    pub fn forward(&self, ids: &[u32]) -> Result<Vec<f64>> {
        Ok(embed(ids, &self.table.value, Self::PAD)?.into_data())
    }

    pub fn backward(&mut self, ids: &[u32], d_out: &[f64]) {
        let d = self.dim();
        for (t, &id) in ids.iter().enumerate() {
            if id == Self::PAD {
                continue;
            }
            let row = &mut self.table.grad[id as usize * d..(id as usize + 1) * d];
            for (g, x) in row.iter_mut().zip(&d_out[t * d..(t + 1) * d]) {
                *g += x;
            }
        }
    }
}

/// Valid cross-correlation along time followed by ReLU. Kernel layout is
/// `filters × (width · in_dim)`, offset-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub kernel: Param,
    pub bias: Param,
    pub width: usize,
    pub in_dim: usize,
}

pub struct ConvCache {
    pre: Vec<f64>,
}

impl Conv1d {
    pub fn init(filters: usize, width: usize, in_dim: usize, rng: &mut Rng) -> Conv1d {
        let fan_in = width * in_dim;
        Conv1d {
            kernel: Param::new(glorot(rng, filters, fan_in, fan_in, filters * width), true),
            bias: Param::new(Tensor::zeros(vec![filters]), false),
            width,
            in_dim,
        }
    }

    pub fn filters(&self) -> usize {
        self.bias.value.len()
    }

    pub fn out_len(&self, t: usize) -> usize {
        t + 1 - self.width
    }

    /// Pre-activations and ReLU outputs, each `(T − width + 1) × filters`.
    pub fn forward(&self, x: &[f64], t: usize) -> Result<(Vec<f64>, ConvCache)> {
        if t < self.width {
            return Err(Error::shape(format!(
                "sequence of length {t} is shorter than the kernel width {}",
                self.width
            )));
        }
        let (f, span) = (self.filters(), self.width * self.in_dim);
        let n = self.out_len(t);
        let mut pre = vec![0.0; n * f];
        for s in 0..n {
            let out = &mut pre[s * f..(s + 1) * f];
            out.copy_from_slice(self.bias.w());
            matvec_acc(self.kernel.w(), f, span, &x[s * self.in_dim..s * self.in_dim + span], out);
        }
        let post = pre.iter().map(|&z| z.max(0.0)).collect();
        Ok((post, ConvCache { pre }))
    }

    pub fn backward(&mut self, x: &[f64], cache: &ConvCache, d_out: &[f64]) -> Vec<f64> {
        let (f, span) = (self.filters(), self.width * self.in_dim);
        let n = cache.pre.len() / f;
        let mut dx = vec![0.0; x.len()];
        let mut dz = vec![0.0; f];
        for s in 0..n {
            for j in 0..f {
                dz[j] = if cache.pre[s * f + j] > 0.0 { d_out[s * f + j] } else { 0.0 };
            }
            let xs = &x[s * self.in_dim..s * self.in_dim + span];
            outer_acc(&mut self.kernel.grad, &dz, xs);
            for (g, d) in self.bias.grad.iter_mut().zip(&dz) {
                *g += d;
            }
            matvec_t_acc(
                self.kernel.w(),
                f,
                span,
                &dz,
                &mut dx[s * self.in_dim..s * self.in_dim + span],
            );
        }
        dx
    }
}

/// `conv1d_forward` over a `T × D` tensor with a `F × width × D` kernel;
/// returns the ReLU output.
pub fn conv1d_forward(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [f, width, d] = kernel.shape() else {
        return Err(Error::shape("kernel must be filters × width × dim"));
    };
    if input.cols() != *d || bias.len() != *f {
        return Err(Error::shape("kernel does not match input or bias"));
    }
    let conv = Conv1d {
        kernel: Param::new(Tensor::new(vec![*f, width * d], kernel.data().to_vec())?, true),
        bias: Param::new(bias.clone(), false),
        width: *width,
        in_dim: *d,
    };
    let (out, _) = conv.forward(input.data(), input.rows())?;
    Tensor::new(vec![conv.out_len(input.rows()), *f], out)
}

/// Max over non-overlapping windows along time; a short final window is
/// kept (ceil mode).
pub fn max_pool_forward(x: &[f64], t: usize, width: usize, window: usize) -> (Vec<f64>, Vec<usize>) {
    let n = t.div_ceil(window);
    let mut out = vec![0.0; n * width];
    let mut arg = vec![0; n * width];
    for s in 0..n {
        for j in 0..width {
            let mut best = s * window;
            for i in s * window..((s + 1) * window).min(t) {
                if x[i * width + j] > x[best * width + j] {
                    best = i;
                }
            }
            out[s * width + j] = x[best * width + j];
            arg[s * width + j] = best;
        }
    }
    (out, arg)
}

pub fn max_pool_backward(arg: &[usize], t: usize, width: usize, d_out: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; t * width];
    for (k, (&src, &g)) in arg.iter().zip(d_out).enumerate() {
        dx[src * width + k % width] += g;
    }
    dx
}

/// Single-direction LSTM; gate blocks ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    /// `4H × D`
    pub wx: Param,
    /// `4H × H`
    pub wh: Param,
    /// `4H`
    pub b: Param,
    pub input: usize,
    pub hidden: usize,
}

pub struct LstmCache {
    x: Vec<f64>,
    mask: Vec<bool>,
    /// Activated gates per step, `T × 4H`.
    gates: Vec<f64>,
    /// States `(T + 1) × H`, row 0 initial.
    c: Vec<f64>,
    h: Vec<f64>,
    reverse: bool,
}

fn reverse_rows(x: &[f64], width: usize) -> Vec<f64> {
    x.chunks(width.max(1)).rev().flatten().copied().collect()
}

impl Lstm {
    /// Glorot input kernel, U(±1/√H) recurrent kernel, zero bias except a
    /// forget-gate bias of 1.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Lstm {
        let wx = glorot(rng, 4 * hidden, input, input, 4 * hidden);
        let limit = 1.0 / (hidden as f64).sqrt();
        let wh = Tensor::new(vec![4 * hidden, hidden], uniform(rng, 4 * hidden * hidden, limit)).expect("shape");
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        Lstm {
            wx: Param::new(wx, true),
            wh: Param::new(wh, true),
            b: Param::new(Tensor::new(vec![4 * hidden], b).expect("shape"), false),
            input,
            hidden,
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (h, d) = (self.hidden, self.input);
        if self.wx.value.shape() != [4 * h, d] || self.wh.value.shape() != [4 * h, h] || self.b.value.len() != 4 * h {
            return Err(Error::shape(format!("LSTM parameters do not match input {d}, hidden {h}")));
        }
        Ok(())
    }

    /// Hidden states `T × H` in input order. Steps with `mask[t] == false`
    /// carry the previous state through unchanged. `reverse` runs from the
    /// last step to the first.
    pub fn forward(&self, x: &[f64], mask: &[bool], reverse: bool) -> (Vec<f64>, LstmCache) {
        let (d, h) = (self.input, self.hidden);
        let t_len = mask.len();
        let (x, mask) = if reverse {
            (reverse_rows(x, d), mask.iter().rev().copied().collect())
        } else {
            (x.to_vec(), mask.to_vec())
        };
        let mut gates = vec![0.0; t_len * 4 * h];
        let mut c = vec![0.0; (t_len + 1) * h];
        let mut hs = vec![0.0; (t_len + 1) * h];
        let mut z = vec![0.0; 4 * h];
        for t in 0..t_len {
            let (prev, next) = ((t) * h, (t + 1) * h);
            if !mask[t] {
                c.copy_within(prev..next, next);
                hs.copy_within(prev..next, next);
                continue;
            }
            z.copy_from_slice(self.b.w());
            matvec_acc(self.wx.w(), 4 * h, d, &x[t * d..(t + 1) * d], &mut z);
            matvec_acc(self.wh.w(), 4 * h, h, &hs[prev..next], &mut z);
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let (i, f, gg, o) = (
                    sigmoid(z[j]),
                    sigmoid(z[h + j]),
                    z[2 * h + j].tanh(),
                    sigmoid(z[3 * h + j]),
                );
                g[j] = i;
                g[h + j] = f;
                g[2 * h + j] = gg;
                g[3 * h + j] = o;
                let cn = f * c[prev + j] + i * gg;
                c[next + j] = cn;
                hs[next + j] = o * cn.tanh();
            }
        }
        let mut out = hs[h..].to_vec();
        if reverse {
            out = reverse_rows(&out, h);
        }
        (
            out,
            LstmCache {
                x,
                mask,
                gates,
                c,
                h: hs,
                reverse,
            },
        )
    }

    /// Backpropagation through time; `d_out` is `T × H` in input order.
    /// Returns the input gradient in input order.
    pub fn backward(&mut self, cache: &LstmCache, d_out: &[f64]) -> Vec<f64> {
        let (d, h) = (self.input, self.hidden);
        let t_len = cache.mask.len();
        let d_out = if cache.reverse { reverse_rows(d_out, h) } else { d_out.to_vec() };
        let mut dx = vec![0.0; t_len * d];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..t_len).rev() {
            let mut dh: Vec<f64> = d_out[t * h..(t + 1) * h].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            if !cache.mask[t] {
                dh_next.copy_from_slice(&dh);
                continue;
            }
            let (prev, next) = (t * h, (t + 1) * h);
            let g = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = cache.c[next + j].tanh();
                let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
                dz[j] = dc * gg * i * (1.0 - i);
                dz[h + j] = dc * cache.c[prev + j] * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - gg * gg);
                dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            outer_acc(&mut self.wx.grad, &dz, &cache.x[t * d..(t + 1) * d]);
            outer_acc(&mut self.wh.grad, &dz, &cache.h[prev..next]);
            for (gb, v) in self.b.grad.iter_mut().zip(&dz) {
                *gb += v;
            }
            matvec_t_acc(self.wx.w(), 4 * h, d, &dz, &mut dx[t * d..(t + 1) * d]);
            dh.iter_mut().for_each(|x| *x = 0.0);
            matvec_t_acc(self.wh.w(), 4 * h, h, &dz, &mut dh);
            dh_next.copy_from_slice(&dh);
        }
        if cache.reverse {
            reverse_rows(&dx, d)
        } else {
            dx
        }
    }
}

/// Hidden-state sequence of one LSTM over a `T × D` tensor.
pub fn lstm_forward(input: &Tensor, lstm: &Lstm, mask: Option<&[bool]>, reverse: bool) -> Result<Tensor> {
    lstm.check_shapes()?;
    if input.cols() != lstm.input && !input.is_empty() {
        return Err(Error::shape(format!("input width {} but LSTM expects {}", input.cols(), lstm.input)));
    }
    let t = input.rows();
    let all = vec![true; t];
    let mask = mask.unwrap_or(&all);
    if mask.len() != t {
        return Err(Error::shape("mask length differs from sequence length"));
    }
    Tensor::new(vec![t, lstm.hidden], lstm.forward(input.data(), mask, reverse).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

impl BiLstm {
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> BiLstm {
        let fwd = Lstm::init(input, hidden, rng);
        let bwd = Lstm::init(input, hidden, rng);
        BiLstm { fwd, bwd }
    }

    /// `T × 2H`, forward state then backward state at each step.
    pub fn forward(&self, x: &[f64], mask: &[bool]) -> (Vec<f64>, BiLstmCache) {
        let h = self.fwd.hidden;
        let (a, ca) = self.fwd.forward(x, mask, false);
        let (b, cb) = self.bwd.forward(x, mask, true);
        let mut out = Vec::with_capacity(a.len() * 2);
        for (ra, rb) in a.chunks(h).zip(b.chunks(h)) {
            out.extend_from_slice(ra);
            out.extend_from_slice(rb);
        }
        (out, BiLstmCache { fwd: ca, bwd: cb })
    }

    pub fn backward(&mut self, cache: &BiLstmCache, d_out: &[f64]) -> Vec<f64> {
        let h = self.fwd.hidden;
        let mut da = Vec::with_capacity(d_out.len() / 2);
        let mut db = Vec::with_capacity(d_out.len() / 2);
        for row in d_out.chunks(2 * h) {
            da.extend_from_slice(&row[..h]);
            db.extend_from_slice(&row[h..]);
        }
        let mut dx = self.fwd.backward(&cache.fwd, &da);
        for (x, y) in dx.iter_mut().zip(self.bwd.backward(&cache.bwd, &db)) {
            *x += y;
        }
        dx
    }
}

pub fn bilstm_forward(input: &Tensor, fwd: &Lstm, bwd: &Lstm) -> Result<Tensor> {
    let a = lstm_forward(input, fwd, None, false)?;
    let b = lstm_forward(input, bwd, None, true)?;
    if fwd.hidden != bwd.hidden {
        return Err(Error::shape("forward and backward hidden sizes differ"));
    }
    let h = fwd.hidden;
    let mut out = Vec::with_capacity(a.len() * 2);
    for t in 0..input.rows() {
        out.extend_from_slice(&a.data()[t * h..(t + 1) * h]);
        out.extend_from_slice(&b.data()[t * h..(t + 1) * h]);
    }
    Tensor::new(vec![input.rows(), 2 * h], out)
}

/// Affine layer with optional ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
    pub relu: bool,
}

impl Dense {
    pub fn init(input: usize, output: usize, relu: bool, rng: &mut Rng) -> Dense {
        Dense {
            w: Param::new(glorot(rng, output, input, input, output), true),
            b: Param::new(Tensor::zeros(vec![output]), false),
            relu,
        }
    }

    pub fn output(&self) -> usize {
        self.b.value.len()
    }

    pub fn input(&self) -> usize {
        self.w.value.cols()
    }

    /// Returns (pre-activation, output).
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = self.b.w().to_vec();
        matvec_acc(self.w.w(), self.output(), self.input(), x, &mut z);
        let y = if self.relu { z.iter().map(|v| v.max(0.0)).collect() } else { z.clone() };
        (z, y)
    }

    pub fn backward(&mut self, x: &[f64], z: &[f64], d_out: &[f64]) -> Vec<f64> {
        let dz: Vec<f64> = if self.relu {
            d_out.iter().zip(z).map(|(d, v)| if *v > 0.0 { *d } else { 0.0 }).collect()
        } else {
            d_out.to_vec()
        };
        outer_acc(&mut self.w.grad, &dz, x);
        for (g, d) in self.b.grad.iter_mut().zip(&dz) {
            *g += d;
        }
        let mut dx = vec![0.0; x.len()];
        matvec_t_acc(self.w.w(), self.output(), self.input(), &dz, &mut dx);
        dx
    }
}

/// Inverted dropout mask: kept units are scaled by `1 / (1 − rate)`.
pub fn dropout_mask(n: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `−log p[label]`, computed from logits through log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn embedding_lookup() {
        let table = Tensor::from_rows(&[vec![9.0, 9.0], vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(embed(&[0, 0], &table, 0).unwrap().data(), &[0.0; 4]);
        assert_eq!(embed(&[2, 1, 2], &table, 0).unwrap().data(), &[3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(embed(&[3], &table, 0).is_err());
        let eye = Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(embed(&[1, 2], &eye, 99).unwrap().data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn conv_by_hand() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        // one filter of width 2: [[1, 0], [0, -1]] → x[t][0] − x[t+1][1]
        let k = Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![5.0]).unwrap();
        let y = conv1d_forward(&x, &k, &b).unwrap();
        assert_eq!(y.shape(), &[3, 1]);
        // 5 + 1 − 4 = 2; 5 + 3 − 6 = 2; 5 + 5 − 8 = 2
        assert_eq!(y.data(), &[2.0, 2.0, 2.0]);
        let zero = conv1d_forward(&x, &Tensor::zeros(vec![3, 2, 2]), &Tensor::zeros(vec![3])).unwrap();
        assert!(zero.data().iter().all(|v| *v == 0.0));
        // width 1 picking channel 1, scaled by 2
        let k = Tensor::new(vec![1, 1, 2], vec![0.0, 2.0]).unwrap();
        let y = conv1d_forward(&x, &k, &Tensor::zeros(vec![1])).unwrap();
        assert_eq!(y.data(), &[4.0, 8.0, 12.0, 16.0]);
        assert!(conv1d_forward(&x, &Tensor::zeros(vec![1, 5, 2]), &Tensor::zeros(vec![1])).is_err());
    }

    #[test]
    fn pool_ceil_mode() {
        let (y, arg) = max_pool_forward(&[1.0, 5.0, 3.0, 2.0, 4.0], 5, 1, 2);
        assert_eq!(y, vec![5.0, 3.0, 4.0]);
        assert_eq!(max_pool_backward(&arg, 5, 1, &[1.0, 1.0, 1.0]), vec![0.0, 1.0, 1.0, 0.0, 1.0]);
    }

    fn scalar_lstm(wx: [f64; 4], wh: [f64; 4], b: [f64; 4]) -> Lstm {
        Lstm {
            wx: Param::new(Tensor::new(vec![4, 1], wx.to_vec()).unwrap(), true),
            wh: Param::new(Tensor::new(vec![4, 1], wh.to_vec()).unwrap(), true),
            b: Param::new(Tensor::new(vec![4], b.to_vec()).unwrap(), false),
            input: 1,
            hidden: 1,
        }
    }

    #[test]
    fn lstm_single_step_by_hand() {
        let l = scalar_lstm([0.5, -0.5, 1.0, 2.0], [0.0; 4], [0.0, 1.0, 0.0, -1.0]);
        let x = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let h = lstm_forward(&x, &l, None, false).unwrap();
        // i = σ(0.5), g = tanh(1), o = σ(1), c = i·g, h = o·tanh(c)
        let i = 1.0 / (1.0 + (-0.5f64).exp());
        let g = 1.0f64.tanh();
        let o = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((h.data()[0] - o * (i * g).tanh()).abs() < 1e-15);
        let zero = scalar_lstm([0.0; 4], [0.0; 4], [0.0; 4]);
        let xs = Tensor::new(vec![3, 1], vec![1.0, -2.0, 3.0]).unwrap();
        assert!(lstm_forward(&xs, &zero, None, false).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lstm_reverse_and_mask() {
        let mut rng = rng_for(1, 0);
        let l = Lstm::init(3, 4, &mut rng);
        let rows: Vec<Vec<f64>> = (0..5).map(|t| (0..3).map(|j| ((t * 3 + j) as f64).sin()).collect()).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let xr = Tensor::from_rows(&rev).unwrap();
        let back = lstm_forward(&x, &l, None, true).unwrap();
        let fwd_rev = lstm_forward(&xr, &l, None, false).unwrap();
        for t in 0..5 {
            assert_eq!(back.row(t), fwd_rev.row(4 - t));
        }
        let mask = [true, true, false, true, false];
        let masked = lstm_forward(&x, &l, Some(&mask), false).unwrap();
        assert_eq!(masked.row(2), masked.row(1));
        assert_eq!(masked.row(4), masked.row(3));
        let kept = Tensor::from_rows(&[rows[0].clone(), rows[1].clone(), rows[3].clone()]).unwrap();
        let plain = lstm_forward(&kept, &l, None, false).unwrap();
        assert_eq!(plain.row(2), masked.row(4));
    }

    #[test]
    fn bilstm_palindrome_symmetry() {
        let mut rng = rng_for(2, 0);
        let l = Lstm::init(2, 3, &mut rng);
        let rows = vec![vec![0.1, 0.2], vec![-0.3, 0.4], vec![0.5, 0.5], vec![-0.3, 0.4], vec![0.1, 0.2]];
        let x = Tensor::from_rows(&rows).unwrap();
        let y = bilstm_forward(&x, &l, &l).unwrap();
        assert_eq!(y.shape(), &[5, 6]);
        for t in 0..5 {
            let (a, b) = (y.row(t), y.row(4 - t));
            assert!(a[..3].iter().zip(&b[3..]).all(|(p, q)| (p - q).abs() < 1e-15));
        }
        let zero = Lstm {
            wx: Param::new(Tensor::zeros(vec![12, 2]), true),
            wh: Param::new(Tensor::zeros(vec![12, 3]), true),
            b: Param::new(Tensor::zeros(vec![12]), false),
            input: 2,
            hidden: 3,
        };
        assert!(bilstm_forward(&x, &zero, &zero).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn softmax_and_ce() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(cross_entropy(&[0.0, 800.0], 1).abs() < 1e-12);
        assert!((cross_entropy(&[0.0, 0.0], 0) - 2f64.ln()).abs() < 1e-15);
    }
}
