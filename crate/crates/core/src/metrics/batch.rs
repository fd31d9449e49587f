//! Batch evaluation over files, producing per-image records and means.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brisque::brisque_features;
use super::loe::{loe, DEFAULT_LOE_GRID};
use super::niqe::{niqe, NiqeModel};
use crate::error::{Error, Result};
use crate::png_io::read_png;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Loe,
    Niqe,
    BrisqueFeatures,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Loe => "loe",
            Metric::Niqe => "niqe",
            Metric::BrisqueFeatures => "brisque-features",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loe" => Ok(Metric::Loe),
            "niqe" => Ok(Metric::Niqe),
            "brisque-features" | "brisque" => Ok(Metric::BrisqueFeatures),
            other => Err(Error::arg(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalItem {
    /// Original/enhanced pair; no-reference metrics use the enhanced image.
    Pair {
        original: PathBuf,
        enhanced: PathBuf,
    },
    Single(PathBuf),
    /// An input that could not be matched up; reported as an error record.
    Unmatched {
        path: PathBuf,
        reason: String,
    },
}

impl EvalItem {
    fn label(&self) -> String {
        match self {
            EvalItem::Pair { enhanced, .. } => enhanced.display().to_string(),
            EvalItem::Single(p) | EvalItem::Unmatched { path: p, .. } => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub loe_grid: usize,
    pub niqe_model: NiqeModel,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            loe_grid: DEFAULT_LOE_GRID,
            niqe_model: NiqeModel::bundled(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub path: String,
    pub metric: String,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl MetricReport {
    /// Builds a report, aggregating successful records per metric in order of
    /// first appearance.
    pub fn from_records(records: Vec<MetricRecord>) -> Self {
        let mut aggregates: Vec<(String, f64, usize)> = Vec::new();
        for r in &records {
            let Some(v) = r.value else { continue };
            match aggregates.iter_mut().find(|a| a.0 == r.metric) {
                Some(a) => {
                    a.1 += v;
                    a.2 += 1;
                }
                None => aggregates.push((r.metric.clone(), v, 1)),
            }
        }
        MetricReport {
            records,
            aggregates: aggregates
                .into_iter()
                .map(|(metric, sum, count)| Aggregate {
                    metric,
                    mean: sum / count as f64,
                    count,
                })
                .collect(),
        }
    }

    pub fn aggregate(&self, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.metric == metric)
            .map(|a| a.mean)
    }

    pub fn error_count(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with a `path,metric,value,error` header; aggregate rows use the
    /// path `mean`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let rows = self
            .records
            .iter()
            .map(|r| {
                [
                    r.path.clone(),
                    r.metric.clone(),
                    r.value.map(|v| v.to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .chain(self.aggregates.iter().map(|a| {
                [
                    "mean".into(),
                    a.metric.clone(),
                    a.mean.to_string(),
                    String::new(),
                ]
            }));
        // writing into a Vec cannot fail
        w.write_record(["path", "metric", "value", "error"])
            .expect("in-memory csv");
        for row in rows {
            w.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv of utf-8 fields")
    }
}

fn ok(path: &str, metric: &str, value: f64) -> MetricRecord {
    MetricRecord {
        path: path.to_string(),
        metric: metric.to_string(),
        value: Some(value),
        error: None,
    }
}

fn failed(path: &str, metric: &str, err: impl ToString) -> MetricRecord {
    MetricRecord {
        path: path.to_string(),
        metric: metric.to_string(),
        value: None,
        error: Some(err.to_string()),
    }
}

fn evaluate_item(item: &EvalItem, metrics: &[Metric], opts: &EvalOptions) -> Vec<MetricRecord> {
    let label = item.label();
    let (original, subject) = match item {
        EvalItem::Unmatched { reason, .. } => {
            return metrics
                .iter()
                .map(|m| failed(&label, m.name(), reason))
                .collect();
        }
        EvalItem::Pair { original, enhanced } => (Some(read_png(original)), read_png(enhanced)),
        EvalItem::Single(p) => (None, read_png(p)),
    };
    let mut out = Vec::new();
    for &metric in metrics {
        let subject = match &subject {
            Ok(img) => img,
            Err(e) => {
                out.push(failed(&label, metric.name(), e));
                continue;
            }
        };
        match metric {
            Metric::Loe => match &original {
                Some(Ok(orig)) => match loe(orig, subject, opts.loe_grid) {
                    Ok(v) => out.push(ok(&label, "loe", v)),
                    Err(e) => out.push(failed(&label, "loe", e)),
                },
                Some(Err(e)) => out.push(failed(&label, "loe", e)),
                None => out.push(failed(
                    &label,
                    "loe",
                    "LOE requires an original/enhanced pair",
                )),
            },
            Metric::Niqe => match niqe(subject, &opts.niqe_model) {
                Ok(v) => out.push(ok(&label, "niqe", v)),
                Err(e) => out.push(failed(&label, "niqe", e)),
            },
            Metric::BrisqueFeatures => match brisque_features(subject) {
                Ok(f) => out.extend(
                    f.iter()
                        .enumerate()
                        .map(|(i, &v)| ok(&label, &format!("brisque_f{i:02}"), v)),
                ),
                Err(e) => out.push(failed(&label, "brisque-features", e)),
            },
        }
    }
    out
}

/// Evaluates every item independently (in parallel); record order follows
/// input order.
pub fn evaluate_batch(items: &[EvalItem], metrics: &[Metric], opts: &EvalOptions) -> MetricReport {
    let records: Vec<MetricRecord> = items
        .par_iter()
        .map(|item| evaluate_item(item, metrics, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    MetricReport::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Image, Raster};
    use crate::png_io::{write_png, BitDepth};

    #[test]
    fn empty_batch() {
        let r = evaluate_batch(&[], &[Metric::Loe], &EvalOptions::default());
        assert!(r.records.is_empty() && r.aggregates.is_empty());
    }

    #[test]
    fn pairs_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        let img = Image::from_fn(20, 20, 3, |r, c, ch| {
            ((r * 20 + c + ch) % 256) as f64 / 255.0
        })
        .unwrap();
        let inv = Image::from_fn(20, 20, 3, |r, c, ch| 1.0 - img.at(r, c, ch)).unwrap();
        write_png(&img, BitDepth::Eight, &a).unwrap();
        write_png(&inv, BitDepth::Eight, &b).unwrap();

        let pair = EvalItem::Pair {
            original: a.clone(),
            enhanced: b.clone(),
        };
        let single = evaluate_batch(
            std::slice::from_ref(&pair),
            &[Metric::Loe],
            &EvalOptions::default(),
        );
        let v = single.records[0].value.unwrap();
        assert!(v > 0.0);
        assert_eq!(single.aggregate("loe"), Some(v));

        let many = evaluate_batch(
            &vec![pair.clone(); 4],
            &[Metric::Loe],
            &EvalOptions::default(),
        );
        assert_eq!(many.aggregate("loe"), Some(v));

        let items = vec![
            pair,
            EvalItem::Single(a.clone()),
            EvalItem::Pair {
                original: a,
                enhanced: dir.path().join("missing.png"),
            },
            EvalItem::Unmatched {
                path: b,
                reason: "no original".into(),
            },
        ];
        let r = evaluate_batch(&items, &[Metric::Loe], &EvalOptions::default());
        assert_eq!(r.records.len(), 4);
        assert_eq!(r.error_count(), 3);
        assert_eq!(r.aggregates.len(), 1);
        assert_eq!(r.aggregates[0].count, 1);
        let csv = r.to_csv();
        assert!(csv.starts_with("path,metric,value,error\n"));
        assert_eq!(csv.lines().count(), 1 + 4 + 1);
    }
}
