//! Classical decomposition of daily volume series into trend, seasonal and
//! residual components under an additive or multiplicative model.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};

/// Dense daily counts starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeSeries {
    pub start: NaiveDate,
    pub values: Vec<f64>,
}

impl VolumeSeries {
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::data("volume series is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::data("volume series values must be finite and non-negative"));
        }
        Ok(VolumeSeries { start, values })
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.start + Duration::days(i as i64)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Daily article counts over the corpus date range for the articles that
/// pass `filter`. Days without articles are zero.
pub fn build_volume_series<F>(corpus: &Corpus, filter: F) -> Result<VolumeSeries>
where
    F: Fn(&Article) -> bool,
{
    if corpus.is_empty() {
        return Err(Error::data("cannot build a volume series from an empty corpus"));
    }
    let (start, _) = corpus.date_range();
    let mut values = vec![0.0; corpus.n_days()];
    for a in corpus.articles().iter().filter(|a| filter(a)) {
        values[(a.published_date - start).num_days() as usize] += 1.0;
    }
    VolumeSeries::new(start, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompModel {
    Additive,
    Multiplicative,
}

impl std::str::FromStr for DecompModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additive" | "add" => Ok(DecompModel::Additive),
            "multiplicative" | "mult" => Ok(DecompModel::Multiplicative),
            other => Err(Error::config(format!("unknown decomposition model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub period: usize,
    /// Adds 1 to every observation before decomposing (and removes it again
    /// on reconstruction) so zero-count days are admissible under the
    /// multiplicative model.
    pub offset: bool,
    /// Re-estimation rounds: the trend is recomputed as the moving average of
    /// the seasonally adjusted series and the indices re-derived, until the
    /// indices stop changing or the rounds run out. Zero gives the single
    /// pass.
    pub refine: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            period: 7,
            offset: false,
            refine: 50,
        }
    }
}

/// Components of a decomposed series. `trend` and `residual` are `None` at
/// the edges where the centered moving average is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub model: DecompModel,
    pub period: usize,
    pub start: NaiveDate,
    /// Mean of the observed series; descriptive only, already contained in
    /// the trend.
    pub level: f64,
    pub offset: f64,
    pub observed: Vec<f64>,
    pub trend: Vec<Option<f64>>,
    /// Seasonal component per day (`seasonal_indices[i % period]`).
    pub seasonal: Vec<f64>,
    /// One index per phase, phase 0 being the first day of the series.
    pub seasonal_indices: Vec<f64>,
    pub residual: Vec<Option<f64>>,
}

/// Centered moving average over one period. Odd periods use a plain window
/// of `period` points; even periods use the 2×period average (window
/// `period + 1`, half weight on both ends).
pub fn centered_moving_average(y: &[f64], period: usize) -> Vec<Option<f64>> {
    let n = y.len();
    let half = period / 2;
    let mut out = vec![None; n];
    if n < 2 * half + 1 {
        return out;
    }
    for (i, slot) in out.iter_mut().enumerate().take(n - half).skip(half) {
        let window = &y[i - half..=i + half];
        let sum = if period % 2 == 1 {
            window.iter().sum::<f64>()
        } else {
            window[1..period].iter().sum::<f64>() + 0.5 * (window[0] + window[period])
        };
        *slot = Some(sum / period as f64);
    }
    out
}

fn seasonal_indices(y: &[f64], trend: &[Option<f64>], period: usize, model: DecompModel) -> Vec<f64> {
    let mut sum = vec![0.0; period];
    let mut count = vec![0usize; period];
    for (i, (yi, ti)) in y.iter().zip(trend).enumerate() {
        if let Some(t) = ti {
            sum[i % period] += match model {
                DecompModel::Additive => yi - t,
                DecompModel::Multiplicative => yi / t,
            };
            count[i % period] += 1;
        }
    }
    let mut idx: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mean = idx.iter().sum::<f64>() / period as f64;
    match model {
        DecompModel::Additive => idx.iter_mut().for_each(|x| *x -= mean),
        DecompModel::Multiplicative => idx.iter_mut().for_each(|x| *x /= mean),
    }
    idx
}

/// Classical decomposition of `series`.
///
/// Errors when the series is shorter than two periods, or when the
/// multiplicative model meets a non-positive value and `offset` is off.
pub fn decompose(series: &VolumeSeries, model: DecompModel, opts: DecomposeOptions) -> Result<Decomposition> {
    let period = opts.period;
    if period < 2 {
        return Err(Error::config("period must be at least 2"));
    }
    let n = series.values.len();
    if n < 2 * period {
        return Err(Error::data(format!(
            "series of length {n} is shorter than two periods ({})",
            2 * period
        )));
    }
    let offset = if opts.offset { 1.0 } else { 0.0 };
    let y: Vec<f64> = series.values.iter().map(|v| v + offset).collect();
    if model == DecompModel::Multiplicative {
        if let Some(i) = y.iter().position(|v| *v <= 0.0) {
            return Err(Error::data(format!(
                "multiplicative decomposition needs positive values; day {} ({}) is {}; \
                 enable the +1 offset option to decompose zero-count series",
                i,
                series.date(i),
                series.values[i]
            )));
        }
    }

    let mut trend = centered_moving_average(&y, period);
    let mut idx = seasonal_indices(&y, &trend, period, model);
    for _ in 0..opts.refine {
        let adjusted: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, v)| match model {
                DecompModel::Additive => v - idx[i % period],
                DecompModel::Multiplicative => v / idx[i % period],
            })
            .collect();
        trend = centered_moving_average(&adjusted, period);
        let next = seasonal_indices(&y, &trend, period, model);
        let change = next.iter().zip(&idx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        idx = next;
        if change < 1e-15 {
            break;
        }
    }

    let seasonal: Vec<f64> = (0..n).map(|i| idx[i % period]).collect();
    let residual = (0..n)
        .map(|i| {
            trend[i].map(|t| match model {
                DecompModel::Additive => y[i] - t - seasonal[i],
                DecompModel::Multiplicative => y[i] / (t * seasonal[i]),
            })
        })
        .collect();
    Ok(Decomposition {
        model,
        period,
        start: series.start,
        level: series.values.iter().sum::<f64>() / n as f64,
        offset,
        observed: series.values.clone(),
        trend,
        seasonal,
        seasonal_indices: idx,
        residual,
    })
}

/// Recombines trend, seasonal and residual (and removes the offset); edge
/// gaps stay `None`.
pub fn reconstruct(d: &Decomposition) -> Vec<Option<f64>> {
    d.trend
        .iter()
        .zip(&d.seasonal)
        .zip(&d.residual)
        .map(|((t, s), r)| match (t, r) {
            (Some(t), Some(r)) => Some(
                match d.model {
                    DecompModel::Additive => t + s + r,
                    DecompModel::Multiplicative => t * s * r,
                } - d.offset,
            ),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> NaiveDate {
        "2020-01-21".parse().unwrap()
    }

    const SEASON_MULT: [f64; 7] = [1.3, 0.8, 0.9, 1.1, 1.2, 0.7, 1.0];
    const SEASON_ADD: [f64; 7] = [5.0, -3.0, -1.0, 2.0, 4.0, -6.0, -1.0];

    fn mult_fixture() -> VolumeSeries {
        let values = (0..70).map(|t| (20.0 + 1.5 * t as f64) * SEASON_MULT[t % 7]).collect();
        VolumeSeries::new(start(), values).unwrap()
    }

    fn add_fixture() -> VolumeSeries {
        let values = (0..70).map(|t| 30.0 + 0.8 * t as f64 + SEASON_ADD[t % 7]).collect();
        VolumeSeries::new(start(), values).unwrap()
    }

    #[test]
    fn constant_series_multiplicative() {
        let s = VolumeSeries::new(start(), vec![4.0; 21]).unwrap();
        let d = decompose(&s, DecompModel::Multiplicative, DecomposeOptions::default()).unwrap();
        assert_eq!(d.level, 4.0);
        for i in 3..18 {
            assert!((d.trend[i].unwrap() - 4.0).abs() < 1e-12);
            assert!((d.residual[i].unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(d.seasonal.iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(d.trend[..3].iter().all(Option::is_none));
        assert!(d.trend[18..].iter().all(Option::is_none));
    }

    #[test]
    fn multiplicative_fixture_recovers_seasonality() {
        let d = decompose(&mult_fixture(), DecompModel::Multiplicative, DecomposeOptions::default()).unwrap();
        for (got, want) in d.seasonal_indices.iter().zip(SEASON_MULT) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        let mean = d.seasonal_indices.iter().sum::<f64>() / 7.0;
        assert!((mean - 1.0).abs() < 1e-9);
        let rec = reconstruct(&d);
        for (r, y) in rec.iter().zip(&d.observed) {
            if let Some(r) = r {
                assert!((r - y).abs() < 1e-12);
            }
        }
        assert!(rec[0].is_none() && rec[69].is_none());
    }

    #[test]
    fn single_pass_is_biased_on_multiplicative_trend() {
        let opts = DecomposeOptions { refine: 0, ..Default::default() };
        let d = decompose(&mult_fixture(), DecompModel::Multiplicative, opts).unwrap();
        let err = d
            .seasonal_indices
            .iter()
            .zip(SEASON_MULT)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err > 1e-4);
    }

    #[test]
    fn additive_fixture_recovers_seasonality() {
        for refine in [0, 50] {
            let opts = DecomposeOptions { refine, ..Default::default() };
            let d = decompose(&add_fixture(), DecompModel::Additive, opts).unwrap();
            for (got, want) in d.seasonal_indices.iter().zip(SEASON_ADD) {
                assert!((got - want).abs() < 1e-6);
            }
            assert!(d.seasonal_indices.iter().sum::<f64>().abs() < 1e-9);
            for (r, y) in reconstruct(&d).iter().zip(&d.observed) {
                if let Some(r) = r {
                    assert!((r - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn even_period_uses_two_by_ma() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ma = centered_moving_average(&y, 4);
        // (0.5*1 + 2 + 3 + 4 + 0.5*5) / 4 = 3
        assert_eq!(ma, vec![None, None, Some(3.0), Some(4.0), None, None]);
    }

    #[test]
    fn errors() {
        let short = VolumeSeries::new(start(), vec![1.0; 13]).unwrap();
        assert!(decompose(&short, DecompModel::Additive, DecomposeOptions::default()).is_err());
        let mut v = vec![3.0; 20];
        v[5] = 0.0;
        let zero = VolumeSeries::new(start(), v).unwrap();
        let e = decompose(&zero, DecompModel::Multiplicative, DecomposeOptions::default()).unwrap_err();
        assert!(e.to_string().contains("offset"));
        let opts = DecomposeOptions { offset: true, ..Default::default() };
        let d = decompose(&zero, DecompModel::Multiplicative, opts).unwrap();
        for (r, y) in reconstruct(&d).iter().zip(&d.observed) {
            if let Some(r) = r {
                assert!((r - y).abs() < 1e-12);
            }
        }
        assert!(VolumeSeries::new(start(), vec![]).is_err());
        assert!(VolumeSeries::new(start(), vec![-1.0]).is_err());
    }

    #[test]
    fn volume_series_fills_gaps() {
        let d = |s: &str| -> NaiveDate { s.parse().unwrap() };
        let c = Corpus::from_articles(vec![
            Article::new("a", "x", d("2020-01-01")),
            Article::new("b", "x", d("2020-01-03")),
        ])
        .unwrap();
        assert_eq!(build_volume_series(&c, |_| true).unwrap().values, vec![1.0, 0.0, 1.0]);
        let c = Corpus::from_articles(
            (0..3).map(|i| Article::new(format!("a{i}"), "x", d("2020-01-01"))).collect(),
        )
        .unwrap();
        assert_eq!(build_volume_series(&c, |_| true).unwrap().values, vec![3.0]);
    }

    proptest! {
        #[test]
        fn reconstruction_and_normalization_hold(
            values in proptest::collection::vec(1.0f64..500.0, 14..90),
            mult in proptest::bool::ANY,
        ) {
            let model = if mult { DecompModel::Multiplicative } else { DecompModel::Additive };
            let s = VolumeSeries::new(start(), values).unwrap();
            let d = decompose(&s, model, DecomposeOptions::default()).unwrap();
            match model {
                DecompModel::Additive => prop_assert!(d.seasonal_indices.iter().sum::<f64>().abs() < 1e-9),
                DecompModel::Multiplicative => {
                    prop_assert!((d.seasonal_indices.iter().sum::<f64>() / 7.0 - 1.0).abs() < 1e-9)
                }
            }
            for (r, y) in reconstruct(&d).iter().zip(&s.values) {
                if let Some(r) = r {
                    prop_assert!((r - y).abs() < 1e-12 * y.abs().max(1.0) * 10.0);
                }
            }
        }

        #[test]
        fn dropping_a_full_period_keeps_indices(
            season in proptest::collection::vec(0.5f64..1.5, 7),
            level in 10.0f64..100.0,
            slope in -0.1f64..2.0,
            weeks in 3usize..10,
        ) {
            let values: Vec<f64> = (0..weeks * 7)
                .map(|t| (level + slope * t as f64) * season[t % 7])
                .collect();
            let full = VolumeSeries::new(start(), values.clone()).unwrap();
            let shifted = VolumeSeries::new(start(), values[7..].to_vec()).unwrap();
            let a = decompose(&full, DecompModel::Multiplicative, DecomposeOptions::default()).unwrap();
            let b = decompose(&shifted, DecompModel::Multiplicative, DecomposeOptions::default()).unwrap();
            for (x, y) in a.seasonal_indices.iter().zip(&b.seasonal_indices) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
