#![allow(dead_code)]

use newsmon_core::rng::rng_for;
use newsmon_core::topics::GibbsSampler;

pub const TINY_DOCS: [[u32; 3]; 2] = [[0, 1, 2], [0, 0, 2]];
pub const TINY_V: usize = 3;
pub const TINY_K: usize = 2;
pub const TINY_ALPHA: f64 = 0.5;
pub const TINY_BETA: f64 = 0.1;

fn rising(a: f64, n: u32) -> f64 {
    (0..n).map(|i| a + i as f64).product()
}

fn state_index(z: &[Vec<u32>]) -> usize {
    z.iter().flatten().fold(0, |acc, &t| acc * TINY_K + t as usize)
}

/// Exact collapsed posterior over all K^6 joint assignments of the tiny
/// instance, from the Dirichlet-multinomial closed form (Gamma ratios of
/// integer counts written as rising factorials).
pub fn tiny_exact_posterior() -> Vec<f64> {
    let n_tokens = TINY_DOCS.len() * 3;
    let n_states = TINY_K.pow(n_tokens as u32);
    let mut p = vec![0.0; n_states];
    for (s, slot) in p.iter_mut().enumerate() {
        let mut z = vec![0usize; n_tokens];
        let mut rest = s;
        for i in (0..n_tokens).rev() {
            z[i] = rest % TINY_K;
            rest /= TINY_K;
        }
        let mut n_dk = [[0u32; TINY_K]; 2];
        let mut n_wk = [[0u32; TINY_K]; TINY_V];
        let mut n_k = [0u32; TINY_K];
        for (d, doc) in TINY_DOCS.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let t = z[d * 3 + i];
                n_dk[d][t] += 1;
                n_wk[w as usize][t] += 1;
                n_k[t] += 1;
            }
        }
        let mut weight = 1.0;
        for row in &n_dk {
            for &c in row {
                weight *= rising(TINY_ALPHA, c);
            }
        }
        for t in 0..TINY_K {
            for row in &n_wk {
                weight *= rising(TINY_BETA, row[t]);
            }
            weight /= rising(TINY_V as f64 * TINY_BETA, n_k[t]);
        }
        *slot = weight;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Empirical state frequencies of the sampler on the tiny instance.
pub fn tiny_empirical(samples: usize, burn_in: usize, seed: u64) -> Vec<f64> {
    let docs: Vec<Vec<u32>> = TINY_DOCS.iter().map(|d| d.to_vec()).collect();
    let mut g = GibbsSampler::new(&docs, TINY_V, TINY_K, TINY_ALPHA, TINY_BETA, None, rng_for(seed, 77)).unwrap();
    for _ in 0..burn_in {
        g.sweep();
    }
    let mut freq = vec![0.0; TINY_K.pow(6)];
    for _ in 0..samples {
        g.sweep();
        freq[state_index(g.assignments())] += 1.0;
    }
    freq.iter_mut().for_each(|x| *x /= samples as f64);
    freq
}

use newsmon_core::neural::{cross_entropy, grad_check, relative_error, BiLstm, Conv1d, Dense, Lstm, NetSpec, Network};
use newsmon_core::rng::Rng;

/// Fixed projection weights so layer outputs reduce to a scalar objective.
pub fn projection(n: usize) -> Vec<f64> {
    (0..n).map(|i| (1.3 * i as f64 + 0.7).sin()).collect()
}

pub fn inputs(n: usize, salt: f64) -> Vec<f64> {
    (0..n).map(|i| (0.37 * i as f64 + salt).cos() * 0.8).collect()
}

/// Worst relative error between analytic gradients and central
/// differences of `objective`, over every parameter group of the layer and
/// over the input.
pub fn fd_check<L: Clone>(
    layer: &L,
    x: &[f64],
    groups: usize,
    data: fn(&mut L, usize) -> &mut [f64],
    objective: &dyn Fn(&L, &[f64]) -> f64,
    analytic: &[Vec<f64>],
    analytic_x: &[f64],
    eps: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for g in 0..groups {
        let n = data(&mut layer.clone(), g).len();
        for i in 0..n {
            let mut plus = layer.clone();
            data(&mut plus, g)[i] += eps;
            let mut minus = layer.clone();
            data(&mut minus, g)[i] -= eps;
            let num = (objective(&plus, x) - objective(&minus, x)) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[g][i], num));
        }
    }
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i] += eps;
        let mut xm = x.to_vec();
        xm[i] -= eps;
        let num = (objective(layer, &xp) - objective(layer, &xm)) / (2.0 * eps);
        worst = worst.max(relative_error(analytic_x[i], num));
    }
    worst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn check_dense_softmax_ce(rng: &mut Rng) -> f64 {
    let mut layer = Dense::init(6, 4, false, rng);
    layer.b.value.data_mut().copy_from_slice(&[0.1, -0.2, 0.3, 0.05]);
    let x = inputs(6, 0.4);
    let label = 2;
    let (z, logits) = layer.forward(&x);
    let mut d: Vec<f64> = newsmon_core::neural::softmax(&logits);
    d[label] -= 1.0;
    layer.w.zero_grad();
    layer.b.zero_grad();
    let dx = layer.backward(&x, &z, &d);
    let obj = |l: &Dense, x: &[f64]| cross_entropy(&l.forward(x).1, label);
    fn data(l: &mut Dense, g: usize) -> &mut [f64] {
        if g == 0 { l.w.value.data_mut() } else { l.b.value.data_mut() }
    }
    fd_check(&layer, &x, 2, data, &obj, &[layer.w.grad.clone(), layer.b.grad.clone()], &dx, 1e-5)
}

pub fn check_conv(rng: &mut Rng) -> f64 {
    let (t, d) = (7, 3);
    let mut layer = Conv1d::init(4, 3, d, rng);
    layer.bias.value.data_mut().copy_from_slice(&[0.05, -0.02, 0.1, 0.0]);
    let x = inputs(t * d, 0.1);
    let (out, cache) = layer.forward(&x, t).unwrap();
    let r = projection(out.len());
    layer.kernel.zero_grad();
    layer.bias.zero_grad();
    let dx = layer.backward(&x, &cache, &r);
    let obj = move |l: &Conv1d, x: &[f64]| dot(&l.forward(x, t).unwrap().0, &projection(out.len()));
    fn data(l: &mut Conv1d, g: usize) -> &mut [f64] {
        if g == 0 { l.kernel.value.data_mut() } else { l.bias.value.data_mut() }
    }
    fd_check(&layer, &x, 2, data, &obj, &[layer.kernel.grad.clone(), layer.bias.grad.clone()], &dx, 1e-5)
}

fn lstm_data(l: &mut Lstm, g: usize) -> &mut [f64] {
    match g {
        0 => l.wx.value.data_mut(),
        1 => l.wh.value.data_mut(),
        _ => l.b.value.data_mut(),
    }
}

pub fn check_lstm(rng: &mut Rng, reverse: bool, mask: &[bool]) -> f64 {
    let (d, h) = (3, 4);
    let t = mask.len();
    let mut layer = Lstm::init(d, h, rng);
    let x = inputs(t * d, 0.9);
    let (out, cache) = layer.forward(&x, mask, reverse);
    let r = projection(out.len());
    layer.wx.zero_grad();
    layer.wh.zero_grad();
    layer.b.zero_grad();
    let dx = layer.backward(&cache, &r);
    let m = mask.to_vec();
    let obj = move |l: &Lstm, x: &[f64]| dot(&l.forward(x, &m, reverse).0, &r);
    let grads = [layer.wx.grad.clone(), layer.wh.grad.clone(), layer.b.grad.clone()];
    fd_check(&layer, &x, 3, lstm_data, &obj, &grads, &dx, 1e-5)
}

pub fn check_bilstm(rng: &mut Rng) -> f64 {
    let (t, d, h) = (5, 3, 3);
    let mut layer = BiLstm::init(d, h, rng);
    let mask = vec![true; t];
    let x = inputs(t * d, 1.7);
    let (out, cache) = layer.forward(&x, &mask);
    let r = projection(out.len());
    for l in [&mut layer.fwd, &mut layer.bwd] {
        l.wx.zero_grad();
        l.wh.zero_grad();
        l.b.zero_grad();
    }
    let dx = layer.backward(&cache, &r);
    let obj = move |l: &BiLstm, x: &[f64]| dot(&l.forward(x, &mask).0, &r);
    fn data(l: &mut BiLstm, g: usize) -> &mut [f64] {
        if g < 3 { lstm_data(&mut l.fwd, g) } else { lstm_data(&mut l.bwd, g - 3) }
    }
    let grads = [
        layer.fwd.wx.grad.clone(),
        layer.fwd.wh.grad.clone(),
        layer.fwd.b.grad.clone(),
        layer.bwd.wx.grad.clone(),
        layer.bwd.wh.grad.clone(),
        layer.bwd.b.grad.clone(),
    ];
    fd_check(&layer, &x, 6, data, &obj, &grads, &dx, 1e-5)
}

/// Sentiment layout at tiny widths over a 12-word vocabulary.
pub fn tiny_sentiment_spec() -> NetSpec {
    let mut spec = NetSpec::sentiment().with_dims(4, 3, 3, 4);
    spec.vocab_size = 12;
    spec.max_len = 9;
    spec.seed = 0;
    spec
}

pub fn tiny_batch() -> Vec<(Vec<u32>, usize)> {
    vec![
        (vec![1, 4, 7, 2, 9, 11, 3], 0),
        (vec![5, 6, 0, 8, 10], 1),
        (vec![2, 2, 3, 9, 1, 4, 4, 7, 6, 5, 10], 1),
        (vec![3, 3, 8, 1], 0),
        (vec![11, 10, 9, 8, 7, 6], 0),
        (vec![4, 6, 2, 5, 1, 1, 9], 1),
    ]
}

/// Gradient check of a freshly initialized network. The embedding rows are
/// scaled to unit size first: at the default ±0.05 init every activation
/// downstream is tiny and many gradient entries fall below what a central
/// difference at ε = 1e-5 can resolve in double precision.
pub fn check_network(spec: &NetSpec, batch: &[(Vec<u32>, usize)]) -> f64 {
    let mut net = Network::new(spec).unwrap();
    net.embedding.table.value.data_mut().iter_mut().for_each(|x| *x *= 20.0);
    grad_check(&mut net, batch, 1e-5, None).unwrap().max_rel_error
}
