mod common;

use std::io::Cursor;

use newsmon_core::neural::*;
use newsmon_core::rng::rng_for;
use newsmon_core::synth::keyword_toy;
use newsmon_core::textprep::Vocabulary;
use proptest::prelude::*;

#[test]
fn layer_gradients_match_finite_differences() {
    let mut rng = rng_for(3, 0);
    assert!(common::check_dense_softmax_ce(&mut rng) < 1e-6);
    assert!(common::check_conv(&mut rng) < 1e-4);
    assert!(common::check_lstm(&mut rng, false, &[true; 6]) < 1e-4);
    assert!(common::check_lstm(&mut rng, true, &[true; 6]) < 1e-4);
    assert!(common::check_lstm(&mut rng, false, &[true, false, true, true, false, true]) < 1e-4);
    assert!(common::check_bilstm(&mut rng) < 1e-4);
}

#[test]
fn network_gradients_match_finite_differences() {
    let e = common::check_network(&common::tiny_sentiment_spec(), &common::tiny_batch());
    assert!(e < 1e-4, "sentiment {e}");
    let mut spec = NetSpec::classifier(3).with_dims(4, 0, 3, 0);
    spec.vocab_size = 12;
    spec.max_len = 6;
    let batch = vec![(vec![1, 2, 3, 4, 5, 6, 7], 0), (vec![8, 9], 2), (vec![], 1)];
    let e = common::check_network(&spec, &batch);
    assert!(e < 1e-4, "classifier {e}");
}

fn toy(n: usize, seed: u64) -> Vec<Example> {
    keyword_toy(n, 10, 12, seed).into_iter().map(|(i, l)| Example::new(i, l)).collect()
}

fn toy_classifier_spec(seed: u64) -> NetSpec {
    let mut spec = NetSpec::classifier(2).with_dims(8, 0, 8, 0);
    spec.vocab_size = 13;
    spec.batch_size = 1;
    spec.adam.lr = 0.01;
    spec.seed = seed;
    spec
}

#[test]
fn separable_toy_set_is_learned() {
    let data = toy(50, 1);
    let (net, log) = train(&toy_classifier_spec(1), &data, &[]).unwrap();
    assert!(log.last().unwrap().accuracy >= 0.95, "{log:?}");
    // a document holding only filler plus the class-1 keyword
    let (label, p) = predict(&net, &[5, 6, 2, 7, 8]).unwrap();
    assert_eq!(label, 1);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let data = toy(40, 2);
    let mut spec = common::tiny_sentiment_spec();
    spec.vocab_size = 13;
    spec.adam.lr = 0.0;
    spec.batch_size = 8;
    let (net, _) = train(&spec, &data, &[]).unwrap();
    let fresh = Network::new(&spec).unwrap();
    assert_eq!(net.embedding.table.value, fresh.embedding.table.value);
    assert_eq!(serde_json::to_string(&net).unwrap(), serde_json::to_string(&fresh).unwrap());
}

#[test]
fn seeded_training_is_reproducible() {
    let data = toy(40, 3);
    let mut spec = common::tiny_sentiment_spec();
    spec.vocab_size = 13;
    spec.batch_size = 8;
    spec.epochs = 2;
    let (a, la) = train(&spec, &data, &data[..10]).unwrap();
    let (b, lb) = train(&spec, &data, &data[..10]).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_eq!(la.len(), 4);
    let mut buf = Vec::new();
    write_training_log(&la, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("epoch,split,loss,accuracy\n1,train,"));
    assert!(text.contains("\n2,validation,"));
}

#[test]
fn missing_class_is_an_error() {
    let data: Vec<Example> = toy(20, 4).into_iter().filter(|e| e.label == 0).collect();
    assert!(train(&toy_classifier_spec(0), &data, &[]).is_err());
}

/// Independent scalar forward pass of the classifier layout (embedding,
/// LSTM, softmax output).
fn reference_loss(net: &Network, ids: &[u32], label: usize) -> f64 {
    let Recurrent::Uni(l) = &net.recurrent[0] else { panic!() };
    let (d, h) = (l.input, l.hidden);
    let table = net.embedding.table.value.data();
    let (wx, wh, b) = (l.wx.value.data(), l.wh.value.data(), l.b.value.data());
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    for &id in ids.iter().filter(|&&i| i != 0) {
        let x = &table[id as usize * d..(id as usize + 1) * d];
        let mut z = vec![0.0; 4 * h];
        for r in 0..4 * h {
            z[r] = b[r];
            for c in 0..d {
                z[r] += wx[r * d + c] * x[c];
            }
            for c in 0..h {
                z[r] += wh[r * h + c] * hs[c];
            }
        }
        for j in 0..h {
            cs[j] = sig(z[h + j]) * cs[j] + sig(z[j]) * z[2 * h + j].tanh();
            hs[j] = sig(z[3 * h + j]) * cs[j].tanh();
        }
    }
    let (w, ob) = (net.output.w.value.data(), net.output.b.value.data());
    let logits: Vec<f64> = (0..ob.len()).map(|k| ob[k] + (0..h).map(|j| w[k * h + j] * hs[j]).sum::<f64>()).collect();
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[test]
fn first_batch_loss_matches_reference() {
    let data = toy(8, 5);
    let net = Network::new(&toy_classifier_spec(5)).unwrap();
    let want: f64 = data.iter().map(|e| reference_loss(&net, &e.ids, e.label)).sum::<f64>() / 8.0;
    let got = batch_loss(&net, &data).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn inference_is_pure_and_pad_invariant() {
    let data = toy(30, 6);
    let mut spec = common::tiny_sentiment_spec();
    spec.vocab_size = 13;
    spec.batch_size = 4;
    spec.epochs = 1;
    let (net, _) = train(&spec, &data, &[]).unwrap();
    let doc = vec![3, 1, 4, 5];
    let a = predict(&net, &doc).unwrap();
    assert_eq!(a, predict(&net, &doc).unwrap());
    let mut padded = doc.clone();
    padded.extend([0, 0, 0]);
    assert_eq!(a, predict(&net, &padded).unwrap());
    let empty = predict(&net, &[0, 0]).unwrap();
    assert_eq!(empty, predict(&net, &[]).unwrap());
    assert!((empty.1.iter().sum::<f64>() - 1.0).abs() < 1e-6);
}

#[test]
fn checkpoint_round_trip() {
    let vocab = Vocabulary::build([vec!["alpha", "beta", "beta", "gamma"]].iter().map(|d| d.iter().map(|s| s.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>().iter().map(|d| d.as_slice()), None);
    let map = TokenMap::from_vocab(&vocab, 3);
    assert_eq!(map.words, vec!["<pad>", "beta", "alpha"]);
    assert_eq!(map.encode(&[0, 1, 2]), vec![2, 1, 0]);
    let spec = toy_classifier_spec(0);
    let net = Network::new(&spec).unwrap();
    let ck = Checkpoint::new(net.clone(), map, vec!["neg".into(), "pos".into()]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.network.embedding.table.value, net.embedding.table.value);
    assert_eq!(predict(&back.network, &[1, 2, 3]).unwrap(), predict(&net, &[1, 2, 3]).unwrap());
    assert_eq!(back.token_map.encode(&[1]), vec![1]);
}

#[test]
fn word2vec_loading() {
    let words: Vec<String> = ["<pad>", "rice", "flood", "unseen"].iter().map(|s| s.to_string()).collect();
    let text = "3 2\nrice 0.5 -0.5\nother 1 1\nflood 0.25 0.75\n";
    let (t, hits) = load_word2vec(Cursor::new(text), &words, 2, 9).unwrap();
    assert_eq!(hits, 2);
    assert_eq!(t.row(0), &[0.0, 0.0]);
    assert_eq!(t.row(1), &[0.5, -0.5]);
    assert_eq!(t.row(2), &[0.25, 0.75]);
    assert!(t.row(3).iter().all(|v| v.abs() < 0.05));
    let (t2, _) = load_word2vec(Cursor::new(text), &words, 2, 9).unwrap();
    assert_eq!(t, t2);
    assert!(load_word2vec(Cursor::new("rice 1 2 3\n"), &words, 2, 9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn probabilities_form_a_simplex(ids in proptest::collection::vec(0u32..12, 0..15), pads in 0usize..5) {
        let net = Network::new(&common::tiny_sentiment_spec()).unwrap();
        let (label, p) = predict(&net, &ids).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        let mut padded = ids.clone();
        padded.extend(std::iter::repeat(0).take(pads));
        prop_assert_eq!((label, p), predict(&net, &padded).unwrap());
    }
}
