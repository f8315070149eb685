//! Classification metrics: confusion matrix, per-class precision, recall
//! and F1, macro and micro averages, accuracy.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// `gold,<class…>` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["gold".to_string()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header)?;
        for (c, row) in self.classes.iter().zip(&self.counts) {
            let mut rec = vec![c.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::data(format!("writing confusion csv: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: u64,
    /// Set when a zero denominator forced one of the scores to 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub accuracy: f64,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    #[serde(rename = "micro")]
    pub micro_avg: Averages,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.class == name)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn f1(p: f64, r: f64) -> (f64, bool) {
    if p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    }
}

/// Scores `predicted` against `gold` over `classes` (which fixes the row and
/// column order). Labels outside `classes` are an error.
pub fn evaluate<S: AsRef<str>>(gold: &[S], predicted: &[S], classes: &[S]) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::shape(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let names: Vec<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    if index.len() != names.len() {
        return Err(Error::config("class list contains duplicates"));
    }
    let c = names.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (g, p) in gold.iter().zip(predicted) {
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::data(format!("label {s:?} is not one of the classes {names:?}")))
        };
        counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    let confusion = ConfusionMatrix { classes: names, counts };
    let n = confusion.total();

    let mut per_class = Vec::with_capacity(c);
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for i in 0..c {
        let tp = confusion.counts[i][i];
        let pred_i: u64 = (0..c).map(|g| confusion.counts[g][i]).sum();
        let gold_i: u64 = confusion.counts[i].iter().sum();
        let (precision, zp) = ratio(tp, pred_i);
        let (recall, zr) = ratio(tp, gold_i);
        let (f, zf) = f1(precision, recall);
        tp_all += tp;
        fp_all += pred_i - tp;
        fn_all += gold_i - tp;
        per_class.push(ClassMetrics {
            class: confusion.classes[i].clone(),
            precision,
            recall,
            f1: f,
            support: gold_i,
            zero_division: zp || zr || zf,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if c == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / c as f64
        }
    };
    let macro_avg = Averages {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    };
    let (mp, _) = ratio(tp_all, tp_all + fp_all);
    let (mr, _) = ratio(tp_all, tp_all + fn_all);
    let micro_avg = Averages {
        precision: mp,
        recall: mr,
        f1: f1(mp, mr).0,
    };
    Ok(EvalReport {
        n,
        accuracy: ratio(confusion.trace(), n).0,
        macro_avg,
        micro_avg,
        per_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary_fixture() -> (Vec<&'static str>, Vec<&'static str>) {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for (g, p, n) in [("pos", "pos", 3), ("neg", "pos", 1), ("pos", "neg", 2), ("neg", "neg", 4)] {
            for _ in 0..n {
                gold.push(g);
                pred.push(p);
            }
        }
        (gold, pred)
    }

    #[test]
    fn binary_fixture_values() {
        let (g, p) = binary_fixture();
        let r = evaluate(&g, &p, &["pos", "neg"]).unwrap();
        let pos = r.class("pos").unwrap();
        assert_eq!(pos.precision, 0.75);
        assert_eq!(pos.recall, 0.6);
        assert!((pos.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.7);
        assert_eq!(r.confusion.counts, vec![vec![3, 2], vec![1, 4]]);
    }

    #[test]
    fn perfect_and_zero_division() {
        let r = evaluate(&["a", "b", "c"], &["a", "b", "c"], &["a", "b", "c"]).unwrap();
        assert_eq!((r.accuracy, r.macro_avg.f1, r.micro_avg.f1), (1.0, 1.0, 1.0));
        let r = evaluate(&["a", "a"], &["a", "a"], &["a", "b"]).unwrap();
        let b = r.class("b").unwrap();
        assert!(b.zero_division && b.precision == 0.0 && b.f1 == 0.0);
        assert!(evaluate(&["a"], &["z"], &["a"]).is_err());
        assert!(evaluate(&["a"], &[], &["a"]).is_err());
    }

    #[test]
    fn csv_and_json() {
        let (g, p) = binary_fixture();
        let r = evaluate(&g, &p, &["pos", "neg"]).unwrap();
        let mut buf = Vec::new();
        r.confusion.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "gold,pos,neg\npos,3,2\nneg,1,4\n");
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        let back: EvalReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn metric_properties(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60), rot in 0usize..60) {
            let names = ["a", "b", "c", "d"];
            let gold: Vec<&str> = pairs.iter().map(|p| names[p.0]).collect();
            let pred: Vec<&str> = pairs.iter().map(|p| names[p.1]).collect();
            let r = evaluate(&gold, &pred, &names).unwrap();
            prop_assert!((r.accuracy - r.micro_avg.precision).abs() < 1e-12);
            prop_assert!((r.accuracy - r.micro_avg.recall).abs() < 1e-12);
            for m in &r.per_class {
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            }
            let k = rot % pairs.len();
            let mut g2 = gold.clone();
            let mut p2 = pred.clone();
            g2.rotate_left(k);
            p2.rotate_left(k);
            let r2 = evaluate(&g2, &p2, &names).unwrap();
            prop_assert_eq!(r, r2);
        }
    }
}
