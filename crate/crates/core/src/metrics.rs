//! Cross-chain ratio series from daily metric tables, plus window means
//! around event dates.
//!
//! Input CSV headers are `date,chain,metric,value` for metrics and
//! `date,label` for events. Dates are ISO-8601 days.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metrics CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: value {value} must be finite and non-negative")]
    BadValue { row: usize, value: f64 },
    #[error("row {row}: duplicate entry for ({date}, {chain}, {metric})")]
    Duplicate {
        row: usize,
        date: NaiveDate,
        chain: String,
        metric: String,
    },
    #[error("no `{metric}` rows for chain `{chain}`")]
    MissingSeries { chain: String, metric: String },
    #[error("{window} window around {event} has no data")]
    InsufficientData {
        event: NaiveDate,
        window: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub date: NaiveDate,
    pub chain: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub date: NaiveDate,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub rows: Vec<MetricRow>,
}

impl MetricsSeries {
    /// Parse and check a metrics CSV.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, record) in csv::Reader::from_reader(reader).deserialize().enumerate() {
            let row: MetricRow = record?;
            let line = i + 2;
            if !(row.value.is_finite() && row.value >= 0.0) {
                return Err(MetricsError::BadValue {
                    row: line,
                    value: row.value,
                });
            }
            if !seen.insert((row.date, row.chain.clone(), row.metric.clone())) {
                return Err(MetricsError::Duplicate {
                    row: line,
                    date: row.date,
                    chain: row.chain,
                    metric: row.metric,
                });
            }
            rows.push(row);
        }
        Ok(MetricsSeries { rows })
    }

    fn series(&self, chain: &str, metric: &str) -> Result<BTreeMap<NaiveDate, f64>, MetricsError> {
        let s: BTreeMap<_, _> = self
            .rows
            .iter()
            .filter(|r| r.chain == chain && r.metric == metric)
            .map(|r| (r.date, r.value))
            .collect();
        if s.is_empty() {
            return Err(MetricsError::MissingSeries {
                chain: chain.into(),
                metric: metric.into(),
            });
        }
        Ok(s)
    }
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<EventMarker>, MetricsError> {
    let mut events: Vec<EventMarker> = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()?;
    events.sort_by_key(|e| e.date);
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub date: NaiveDate,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSeries {
    pub points: Vec<RatioPoint>,
    /// Shared dates dropped because the denominator was zero.
    pub skipped_rows: usize,
    /// Dates present for only one of the two chains.
    pub unmatched_dates: usize,
}

/// Numerator over denominator on every shared date, ascending.
pub fn compute_ratio_series(
    series: &MetricsSeries,
    numerator_chain: &str,
    denominator_chain: &str,
    metric: &str,
    percent: bool,
) -> Result<RatioSeries, MetricsError> {
    let num = series.series(numerator_chain, metric)?;
    let den = series.series(denominator_chain, metric)?;
    let scale = if percent { 100.0 } else { 1.0 };
    let mut points = Vec::new();
    let mut skipped_rows = 0;
    for (date, n) in &num {
        match den.get(date) {
            Some(&d) if d > 0.0 => points.push(RatioPoint {
                date: *date,
                ratio: scale * n / d,
            }),
            Some(_) => skipped_rows += 1,
            None => {}
        }
    }
    let shared = points.len() + skipped_rows;
    Ok(RatioSeries {
        points,
        skipped_rows,
        unmatched_dates: num.len() + den.len() - 2 * shared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowStats {
    pub event: NaiveDate,
    pub pre_mean: f64,
    pub post_mean: f64,
    pub delta: f64,
    pub pre_count: usize,
    pub post_count: usize,
    /// Positive delta with every post-window value above the pre-window mean.
    pub sustained: bool,
}

/// Means over `[event - pre_days, event)` and `(event, event + post_days]`.
pub fn window_stats(
    points: &[RatioPoint],
    event: NaiveDate,
    pre_days: u32,
    post_days: u32,
) -> Result<WindowStats, MetricsError> {
    let pre_start = event - Duration::days(pre_days.into());
    let post_end = event + Duration::days(post_days.into());
    let pre: Vec<f64> = points
        .iter()
        .filter(|p| p.date >= pre_start && p.date < event)
        .map(|p| p.ratio)
        .collect();
    let post: Vec<f64> = points
        .iter()
        .filter(|p| p.date > event && p.date <= post_end)
        .map(|p| p.ratio)
        .collect();
    if pre.is_empty() {
        return Err(MetricsError::InsufficientData {
            event,
            window: "pre",
        });
    }
    if post.is_empty() {
        return Err(MetricsError::InsufficientData {
            event,
            window: "post",
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let pre_mean = mean(&pre);
    let post_mean = mean(&post);
    let delta = post_mean - pre_mean;
    Ok(WindowStats {
        event,
        pre_mean,
        post_mean,
        delta,
        pre_count: pre.len(),
        post_count: post.len(),
        sustained: delta > 0.0 && post.iter().all(|&v| v > pre_mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 3, d).unwrap()
    }

    fn load(text: &str) -> MetricsSeries {
        MetricsSeries::from_reader(text.as_bytes()).unwrap()
    }

    #[test]
    fn identical_series_give_unit_ratio() {
        let s = load("date,chain,metric,value\n2023-03-01,a,tvl,3\n2023-03-01,b,tvl,3\n2023-03-02,a,tvl,5\n2023-03-02,b,tvl,5\n");
        let r = compute_ratio_series(&s, "a", "b", "tvl", false).unwrap();
        assert!(r.points.iter().all(|p| p.ratio == 1.0));
        assert_eq!(r.points.len(), 2);
    }

    #[test]
    fn known_values() {
        let s = load("date,chain,metric,value\n2023-03-01,a,tvl,10\n2023-03-01,b,tvl,4\n");
        let r = compute_ratio_series(&s, "a", "b", "tvl", false).unwrap();
        assert_eq!(
            r.points,
            vec![RatioPoint {
                date: day(1),
                ratio: 2.5
            }]
        );
        let r = compute_ratio_series(&s, "a", "b", "tvl", true).unwrap();
        assert_eq!(r.points[0].ratio, 250.0);
    }

    #[test]
    fn zero_denominators_and_gaps_are_counted() {
        let s = load(
            "date,chain,metric,value\n2023-03-03,a,tvl,1\n2023-03-03,b,tvl,0\n2023-03-01,a,tvl,2\n2023-03-01,b,tvl,1\n2023-03-02,b,tvl,1\n",
        );
        let r = compute_ratio_series(&s, "a", "b", "tvl", false).unwrap();
        assert_eq!(
            r.points,
            vec![RatioPoint {
                date: day(1),
                ratio: 2.0
            }]
        );
        assert_eq!(r.skipped_rows, 1);
        assert_eq!(r.unmatched_dates, 1);
    }

    #[test]
    fn bad_input_is_rejected() {
        let dup = "date,chain,metric,value\n2023-03-01,a,tvl,1\n2023-03-01,a,tvl,2\n";
        assert!(matches!(
            MetricsSeries::from_reader(dup.as_bytes()),
            Err(MetricsError::Duplicate { row: 3, .. })
        ));
        let neg = "date,chain,metric,value\n2023-03-01,a,tvl,-1\n";
        assert!(matches!(
            MetricsSeries::from_reader(neg.as_bytes()),
            Err(MetricsError::BadValue { .. })
        ));
        let date = "date,chain,metric,value\n2023-13-01,a,tvl,1\n";
        assert!(MetricsSeries::from_reader(date.as_bytes()).is_err());
        let s = load("date,chain,metric,value\n2023-03-01,a,tvl,1\n");
        assert!(matches!(
            compute_ratio_series(&s, "a", "b", "tvl", false),
            Err(MetricsError::MissingSeries { .. })
        ));
    }

    #[test]
    fn step_change_window() {
        let points: Vec<RatioPoint> = (1..=9)
            .map(|d| RatioPoint {
                date: day(d),
                ratio: if d <= 5 { 1.0 } else { 1.5 },
            })
            .collect();
        let w = window_stats(&points, day(5), 3, 3).unwrap();
        assert_eq!(w.pre_mean, 1.0);
        assert_eq!(w.post_mean, 1.5);
        assert_eq!(w.delta, 0.5);
        assert!(w.sustained);
        let flat: Vec<RatioPoint> = points
            .iter()
            .map(|p| RatioPoint { ratio: 2.0, ..*p })
            .collect();
        let w = window_stats(&flat, day(5), 3, 3).unwrap();
        assert_eq!(w.delta, 0.0);
        assert!(!w.sustained);
        assert!(matches!(
            window_stats(&points, day(1), 3, 3),
            Err(MetricsError::InsufficientData { window: "pre", .. })
        ));
    }
}
