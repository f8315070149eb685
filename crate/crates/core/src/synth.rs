//! Synthetic fixtures with known ground truth: planted topic corpora, drifting
//! topic streams, keyword-separable classification sets, and the bundled
//! mini news corpus. Used by tests, benchmarks and the acceptance suite.

use chrono::NaiveDate;
use rand::Rng as _;

use crate::corpus::{Article, Language, NewsClass, Sentiment, SubClass};
use crate::rng::{rng_for, stream, Rng};

/// Corpus generated from known topics.
#[derive(Debug, Clone)]
pub struct Planted {
    pub docs: Vec<Vec<u32>>,
    pub v: usize,
    /// K×V topic-major.
    pub phi: Vec<f64>,
    pub k: usize,
    /// Dominant topic of every document.
    pub main_topic: Vec<usize>,
}

fn draw_index(rng: &mut Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Topics with disjoint, equally sized supports over `v` words; inside its
/// support topic `t` weighs word `j` proportionally to `1 / (1 + j/4)` so
/// the ranking is well defined. Each document has one main topic (uniformly
/// chosen, cycling through topics) holding `main_mass` of its θ, the rest
/// spread evenly over the other topics.
pub fn planted_topics(n_docs: usize, v: usize, k: usize, doc_len: usize, main_mass: f64, seed: u64) -> Planted {
    assert!(k >= 1 && v >= k);
    let mut rng = rng_for(seed, stream::SYNTH);
    let width = v / k;
    let mut phi = vec![0.0; k * v];
    for t in 0..k {
        let lo = t * width;
        let hi = if t + 1 == k { v } else { lo + width };
        let weights: Vec<f64> = (lo..hi).map(|w| 1.0 / (1.0 + (w - lo) as f64 / 4.0)).collect();
        let total: f64 = weights.iter().sum();
        for (w, x) in (lo..hi).zip(weights) {
            phi[t * v + w] = x / total;
        }
    }
    let mut docs = Vec::with_capacity(n_docs);
    let mut main_topic = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let main = d % k;
        let theta: Vec<f64> = (0..k)
            .map(|t| {
                if k == 1 {
                    1.0
                } else if t == main {
                    main_mass
                } else {
                    (1.0 - main_mass) / (k - 1) as f64
                }
            })
            .collect();
        let doc = (0..doc_len)
            .map(|_| {
                let t = draw_index(&mut rng, &theta);
                draw_index(&mut rng, &phi[t * v..(t + 1) * v]) as u32
            })
            .collect();
        docs.push(doc);
        main_topic.push(main);
    }
    Planted {
        docs,
        v,
        phi,
        k,
        main_topic,
    }
}

/// Total-variation distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Assignment of estimated topics to true topics minimizing the summed TV
/// distance (exhaustive over permutations; meant for small K). Returns
/// `perm` with estimated topic `perm[t]` matched to true topic `t`.
pub fn match_topics(est: &[f64], truth: &[f64], k: usize, v: usize) -> Vec<usize> {
    let cost = |e: usize, t: usize| total_variation(&est[e * v..(e + 1) * v], &truth[t * v..(t + 1) * v]);
    let mut best = (f64::INFINITY, Vec::new());
    let mut perm: Vec<usize> = (0..k).collect();
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(t, &e)| cost(e, t)).sum();
        if c < best.0 {
            best = (c, p.to_vec());
        }
    });
    best.1
}

fn permute(xs: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
    if i == xs.len() {
        f(xs);
        return;
    }
    for j in i..xs.len() {
        xs.swap(i, j);
        permute(xs, i + 1, f);
        xs.swap(i, j);
    }
}

/// Documents for a sequence of time slices. Slice `t` draws from the K×V
/// topic matrix `phis[t]`; each document picks a single topic with
/// probability `prevalence[t][k]` and draws all its tokens from it.
pub fn sliced_corpus(
    phis: &[Vec<f64>],
    prevalence: &[Vec<f64>],
    v: usize,
    docs_per_slice: usize,
    doc_len: usize,
    seed: u64,
) -> Vec<Vec<Vec<u32>>> {
    assert_eq!(phis.len(), prevalence.len());
    let mut rng = rng_for(seed, stream::SYNTH + 1);
    phis.iter()
        .zip(prevalence)
        .map(|(phi, prev)| {
            (0..docs_per_slice)
                .map(|_| {
                    let t = draw_index(&mut rng, prev);
                    let row = &phi[t * v..(t + 1) * v];
                    (0..doc_len).map(|_| draw_index(&mut rng, row) as u32).collect()
                })
                .collect()
        })
        .collect()
}

/// Topic matrices whose supports slide one word per slice: topic `k` in
/// slice `t` is uniform over words `k * v / K + t .. + width`. `v` must leave
/// room for the slide.
pub fn drifting_topics(k: usize, v: usize, width: usize, n_slices: usize) -> Vec<Vec<f64>> {
    let block = v / k;
    assert!(width + n_slices - 1 <= block, "vocabulary too small for the drift");
    (0..n_slices)
        .map(|t| {
            let mut phi = vec![0.0; k * v];
            for topic in 0..k {
                let lo = topic * block + t;
                for w in lo..lo + width {
                    phi[topic * v + w] = 1.0 / width as f64;
                }
            }
            phi
        })
        .collect()
}

/// Two-class documents over network ids (0 = pad): class `c = d % 2`
/// contains keyword id `1 + c` once at a random position among `doc_len − 1`
/// filler ids drawn from `3 .. 3 + n_filler`.
pub fn keyword_toy(n_docs: usize, n_filler: usize, doc_len: usize, seed: u64) -> Vec<(Vec<u32>, usize)> {
    let mut rng = rng_for(seed, stream::SYNTH + 2);
    (0..n_docs)
        .map(|d| {
            let class = d % 2;
            let mut ids: Vec<u32> = (0..doc_len - 1).map(|_| rng.random_range(3..3 + n_filler as u32)).collect();
            let at = rng.random_range(0..doc_len);
            ids.insert(at, 1 + class as u32);
            (ids, class)
        })
        .collect()
}

/// Topic words per class, in [`NewsClass::ALL`] order.
const CLASS_WORDS: [&[&str]; 8] = [
    &["করোনাভাইরাস", "পরিসংখ্যান", "শনাক্তকরণ", "পরীক্ষাগার", "আক্রান্তসংখ্যা", "নমুনাপরীক্ষা", "সুস্থতারহার", "সংক্রমণহার", "দৈনিকপ্রতিবেদন"],
    &["সামাজিকদূরত্ব", "পরিবারপরিজন", "শিক্ষাপ্রতিষ্ঠান", "অনলাইনক্লাস", "গণপরিবহন", "উৎসবআয়োজন"],
    &["দারিদ্র্যসীমা", "ক্ষতিগ্রস্ত", "রপ্তানিআয়", "পোশাকশিল্প", "প্রবাসীআয়", "কর্মসংস্থান", "খাদ্যসংকট"],
    &["কোয়ারেন্টাইন", "আইসোলেশন", "স্বাস্থ্যবিধি", "জীবাণুনাশক", "মাস্কপরিধান", "সুরক্ষাসামগ্রী"],
    &["প্রধানমন্ত্রী", "মন্ত্রণালয়", "প্রজ্ঞাপন", "প্রণোদনাপ্যাকেজ", "জেলাপ্রশাসক", "সরকারিসিদ্ধান্ত"],
    &["ত্রাণবিতরণ", "স্বেচ্ছাসেবক", "অনুদানতহবিল", "খাদ্যসহায়তা", "মানবিকসহায়তা"],
    &["যুক্তরাষ্ট্র", "আন্তর্জাতিক", "সীমান্তবন্ধ", "ফ্লাইটবাতিল", "বিদেশফেরত", "চীনেরউহান"],
    &["বিশ্বস্বাস্থ্যসংস্থা", "আইইডিসিআর", "স্বাস্থ্যঅধিদপ্তর", "চিকিৎসকসমাজ", "ভেন্টিলেটর", "আইসিইউশয্যা", "হটলাইননম্বর"],
];

const POSITIVE_WORDS: &[&str] = &["সুস্থতালাভ", "সাফল্যজনক", "উন্নতিলাভ", "স্বস্তিদায়ক", "প্রশংসনীয়", "নিয়ন্ত্রণাধীন"];
const NEGATIVE_WORDS: &[&str] = &["আতঙ্কগ্রস্ত", "দুর্ভোগপোহানো", "উদ্বেগজনক", "সংকটাপন্ন", "বিপর্যয়কর", "মৃত্যুবরণ"];
/// Short function words; all fall below the six-letter minimum or are
/// listed stopwords.
const FILLER_WORDS: &[&str] = &["এবং", "করা", "হয়", "জন্য", "থেকে", "তবে", "এই", "সেই", "আজ", "গতকাল", "বলেন", "জানান", "অনুযায়ী", "পর্যন্ত"];
/// Plural and case endings attached to some topic words.
const SUFFIXES: &[&str] = &["গুলো", "দের", "কে"];
/// Misspellings corrected by the bundled lemma table.
const MISSPELLINGS: &[(&str, &str)] = &[
    ("করোণাভাইরাস", "করোনাভাইরাস"),
    ("কোয়ারেন্টিন", "কোয়ারেন্টাইন"),
    ("স্বাস্থ্যবীধি", "স্বাস্থ্যবিধি"),
];

const DOMESTIC_PLACES: &[&str] = &[
    "Chittagong", "Comilla", "Sylhet", "Khulna", "Jessore", "Rajshahi", "Bogra", "Barisal", "Rangpur", "Mymensingh",
];
const FOREIGN_PLACES: &[&str] = &["China", "Italy", "USA", "India"];
const SOURCES: &[&str] = &["prothomalo", "bdnews24", "jugantor", "kalerkantho"];

/// Resource files bundled with the mini corpus.
pub struct MiniResources {
    pub stopwords: String,
    pub suffixes: String,
    pub lemma_overrides: String,
}

pub fn mini_resources() -> MiniResources {
    let stopwords = ["# function words", "অনুযায়ী", "পর্যন্ত", "গতকাল"].join("\n") + "\n";
    let suffixes = std::iter::once("# longest first".to_string())
        .chain(SUFFIXES.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    let mut lemma = String::from("# variant\tcanonical\n");
    for (from, to) in MISSPELLINGS {
        lemma.push_str(&format!("{from}\t{to}\n"));
    }
    MiniResources {
        stopwords,
        suffixes,
        lemma_overrides: lemma,
    }
}

/// Every topic and sentiment word of the mini corpus, canonical form.
pub fn mini_content_words() -> Vec<&'static str> {
    CLASS_WORDS
        .iter()
        .flat_map(|ws| ws.iter().copied())
        .chain(POSITIVE_WORDS.iter().copied())
        .chain(NEGATIVE_WORDS.iter().copied())
        .collect()
}

fn pick<'a>(rng: &mut Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn render(words: &[String]) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push_str(if i % 9 == 0 { "। " } else { " " });
        }
        out.push_str(w);
    }
    out.push('।');
    out
}

/// Labeled synthetic news collection in the shape of the real one: Bengali
/// bodies built from class-specific and sentiment-specific words plus
/// function words, a daily volume with rising trend and weekday pattern
/// over ten weeks from 2020-03-08, about half the articles located in
/// Dhaka, and a few English articles carrying a Bengali translation.
pub fn mini_corpus(n_docs: usize, seed: u64) -> Vec<Article> {
    let mut rng = rng_for(seed, stream::SYNTH + 3);
    let start = NaiveDate::from_ymd_opt(2020, 3, 8).expect("valid date");
    const N_DAYS: usize = 70;
    let weekday = [1.3, 1.1, 1.0, 1.0, 0.9, 0.6, 0.8];
    let day_weights: Vec<f64> = (0..N_DAYS)
        .map(|t| (1.0 + t as f64 / 35.0) * weekday[t % 7])
        .collect();
    let mut days: Vec<usize> = (0..n_docs).map(|_| draw_index(&mut rng, &day_weights)).collect();
    days.sort_unstable();

    (0..n_docs)
        .map(|d| {
            let class = NewsClass::ALL[d % 8];
            let ci = class.index();
            // Economic effects and statistics skew negative, solidarity positive.
            let p_neg = match ci {
                0 | 2 => 0.7,
                5 => 0.2,
                _ => 0.45,
            };
            let sentiment = if rng.random::<f64>() < p_neg {
                Sentiment::Negative
            } else {
                Sentiment::Positive
            };
            let senti_words = match sentiment {
                Sentiment::Positive => POSITIVE_WORDS,
                Sentiment::Negative => NEGATIVE_WORDS,
            };
            let len = rng.random_range(30..50);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let u = rng.random::<f64>();
                    let w = if u < 0.45 {
                        pick(&mut rng, CLASS_WORDS[ci])
                    } else if u < 0.6 {
                        pick(&mut rng, senti_words)
                    } else if u < 0.7 {
                        let other = rng.random_range(0..8);
                        pick(&mut rng, CLASS_WORDS[other])
                    } else {
                        pick(&mut rng, FILLER_WORDS)
                    };
                    let v = rng.random::<f64>();
                    if let Some((bad, _)) = MISSPELLINGS.iter().find(|(_, good)| *good == w) {
                        if v < 0.2 {
                            return bad.to_string();
                        }
                    }
                    if v > 0.9 && !FILLER_WORDS.contains(&w) {
                        format!("{w}{}", pick(&mut rng, SUFFIXES))
                    } else {
                        w.to_string()
                    }
                })
                .collect();
            let location = if class == NewsClass::InternationalInformation {
                pick(&mut rng, FOREIGN_PLACES).to_string()
            } else {
                let u = rng.random::<f64>();
                if u < 0.55 {
                    "Dhaka".to_string()
                } else if u < 0.65 {
                    pick(&mut rng, &["Gazipur", "Narayanganj"]).to_string()
                } else if u < 0.97 {
                    pick(&mut rng, DOMESTIC_PLACES).to_string()
                } else {
                    String::new()
                }
            };
            let title: Vec<String> = (0..4).map(|_| pick(&mut rng, CLASS_WORDS[ci]).to_string()).collect();
            let summary: Vec<String> = words.iter().take(8).cloned().collect();
            let mut a = Article::new(
                format!("mini-{:04}", d + 1),
                render(&words),
                start + chrono::Days::new(days[d] as u64),
            );
            a.source = pick(&mut rng, SOURCES).to_string();
            a.title = render(&title);
            a.summary = render(&summary);
            a.location = location;
            a.class_label = Some(class);
            a.subclass_label = Some(SubClass::new((2 * ci + 1 + d % 2) as u8).expect("subclass in 1..=16"));
            a.sentiment_label = Some(sentiment);
            if d % 20 == 7 {
                a.language = Language::En;
                a.translated_body = Some(std::mem::take(&mut a.body));
                a.body = "Officials reported new developments in the outbreak response.".to_string();
            }
            a
        })
        .collect()
}
