//! Correlation, signed-rank testing, replicate variance and linguistic
//! features, plus CSV exports in the layout of the published result tables.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::evaluation::{ConfusionMatrix, RunResult};
use crate::triage::TriageTag;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("paired inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("{model} at n={n}: {count} replicate(s), need at least 2")]
    InsufficientReplicates { model: String, n: usize, count: usize },
    #[error("model sets differ: {0}")]
    ModelSetMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatMethod {
    Pearson,
    WilcoxonSignedRank,
    Stddev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub method: StatMethod,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub n: usize,
    pub two_sided: bool,
    /// Signed-rank only: whether the p-value is exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    /// Signed-rank only: zero differences dropped before ranking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_differences_dropped: Option<usize>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (denominator n - 1).
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn stddev(values: &[f64]) -> Result<StatResult, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::DegenerateInput("standard deviation needs at least 2 values".into()));
    }
    Ok(StatResult {
        method: StatMethod::Stddev,
        statistic: sample_std(values),
        p_value: None,
        n: values.len(),
        two_sided: false,
        exact: None,
        zero_differences_dropped: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        MeanStd { mean: mean(values), std: sample_std(values), n: values.len() }
    }
}

/// Pearson correlation with a two-sided p-value from the t distribution
/// on n - 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!("pearson needs n >= 3, got {n}")));
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(StatResult {
        method: StatMethod::Pearson,
        statistic: r,
        p_value: Some(p),
        n,
        two_sided: true,
        exact: None,
        zero_differences_dropped: None,
    })
}

/// Largest effective sample size for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Relative tolerance under which two |differences| count as tied and a
/// difference counts as zero.
const TIE_TOLERANCE: f64 = 1e-9;

/// Average ranks of `values` (all positive), with near-equal values tied.
fn tied_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let base = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] - base <= TIE_TOLERANCE * base.max(1.0) {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on `a - b`. Zero differences are
/// dropped; the reported statistic is the positive-rank sum W+.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::DegenerateInput("no pairs".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .zip(a.iter().zip(b))
        .filter(|(d, (x, y))| d.abs() > TIE_TOLERANCE * x.abs().max(y.abs()).max(1.0))
        .map(|(d, _)| d)
        .collect();
    let dropped = a.len() - diffs.len();
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::AllZeroDifferences);
    }
    let ranks = tied_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let (p, exact) = if n <= WILCOXON_EXACT_MAX_N {
        (exact_signed_rank_p(&ranks, w_plus), true)
    } else {
        let nf = n as f64;
        let mut ties: BTreeMap<u64, usize> = BTreeMap::new();
        for r in &ranks {
            *ties.entry((r * 2.0).round() as u64).or_default() += 1;
        }
        let tie_term: f64 = ties.values().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / 48.0;
        let mu = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if var <= 0.0 {
            return Err(StatsError::DegenerateInput("zero variance under the null".into()));
        }
        let z = (w_plus - mu) / var.sqrt();
        let normal = Normal::standard();
        ((2.0 * normal.sf(z.abs())).min(1.0), false)
    };
    Ok(StatResult {
        method: StatMethod::WilcoxonSignedRank,
        statistic: w_plus,
        p_value: Some(p),
        n,
        two_sided: true,
        exact: Some(exact),
        zero_differences_dropped: Some(dropped),
    })
}

/// Exact null distribution of W+ given (possibly tied) ranks, via a
/// subset-sum count over doubled ranks, which are integers.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (w_plus * 2.0).round() as usize;
    let lower: f64 = counts[..=w].iter().sum();
    let upper: f64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub model_id: String,
    pub n: usize,
    pub accuracy: MeanStd,
    pub per_tag: BTreeMap<TriageTag, MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCurve {
    pub points: Vec<ScalePoint>,
}

impl ScaleCurve {
    pub fn point(&self, model_id: &str, n: usize) -> Option<&ScalePoint> {
        self.points.iter().find(|p| p.model_id == model_id && p.n == n)
    }

    pub fn models(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.points.iter().map(|p| p.model_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn scales(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.points.iter().map(|p| p.n).collect();
        set.into_iter().collect()
    }
}

/// Mean and sample standard deviation of accuracy per (model, scale),
/// overall and per tag.
pub fn scale_variance(results: &[RunResult]) -> Result<ScaleCurve, StatsError> {
    let mut groups: BTreeMap<(String, usize), Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.model_id.clone(), r.n)).or_default().push(r);
    }
    let mut points = Vec::with_capacity(groups.len());
    for ((model_id, n), runs) in groups {
        if runs.len() < 2 {
            return Err(StatsError::InsufficientReplicates { model: model_id, n, count: runs.len() });
        }
        let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let mut per_tag = BTreeMap::new();
        for tag in TriageTag::ALL {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.per_tag_accuracy.get(&tag).copied()).collect();
            if vals.len() == runs.len() {
                per_tag.insert(tag, MeanStd::of(&vals));
            }
        }
        points.push(ScalePoint { model_id, n, accuracy: MeanStd::of(&acc), per_tag });
    }
    Ok(ScaleCurve { points })
}

/// Version tag of the tokenizer used for linguistic features.
pub const TOKENIZER_VERSION: &str = "lowercase-alnum-runs/1";

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticFeatures {
    pub n: usize,
    pub avg_narrative_length: f64,
    pub vocabulary_size: usize,
    pub total_tokens: usize,
    /// Narrative length (tokens) -> number of descriptions.
    pub length_histogram: BTreeMap<usize, usize>,
}

pub fn linguistic_features<S: AsRef<str>>(descriptions: &[S]) -> LinguisticFeatures {
    assert!(!descriptions.is_empty(), "dataset must be non-empty");
    let mut vocab = HashSet::new();
    let mut histogram = BTreeMap::new();
    let mut total = 0;
    for d in descriptions {
        let tokens = tokenize(d.as_ref());
        total += tokens.len();
        *histogram.entry(tokens.len()).or_insert(0) += 1;
        vocab.extend(tokens);
    }
    LinguisticFeatures {
        n: descriptions.len(),
        avg_narrative_length: total as f64 / descriptions.len() as f64,
        vocabulary_size: vocab.len(),
        total_tokens: total,
        length_histogram: histogram,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticSummary {
    pub tokenizer: String,
    pub datasets: Vec<LinguisticFeatures>,
    pub avg_narrative_length: MeanStd,
    pub vocabulary_size: MeanStd,
}

/// Per-dataset features and their mean and spread across datasets.
pub fn linguistic_summary(datasets: &[Vec<String>]) -> LinguisticSummary {
    let features: Vec<LinguisticFeatures> = datasets.iter().map(|d| linguistic_features(d)).collect();
    let lengths: Vec<f64> = features.iter().map(|f| f.avg_narrative_length).collect();
    let vocab: Vec<f64> = features.iter().map(|f| f.vocabulary_size as f64).collect();
    LinguisticSummary {
        tokenizer: TOKENIZER_VERSION.to_string(),
        avg_narrative_length: MeanStd::of(&lengths),
        vocabulary_size: MeanStd::of(&vocab),
        datasets: features,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub model_id: String,
    pub external_accuracy: f64,
    pub synthetic: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub rows: Vec<FidelityRow>,
    pub pearson: StatResult,
}

fn by_model(runs: &[RunResult]) -> BTreeMap<&str, Vec<f64>> {
    let mut out: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in runs {
        out.entry(r.model_id.as_str()).or_default().push(r.accuracy);
    }
    out
}

/// Correlate each model's external accuracy with its mean synthetic accuracy.
pub fn fidelity_report(external: &[RunResult], synthetic: &[RunResult]) -> Result<FidelityReport, StatsError> {
    let ext = by_model(external);
    let syn = by_model(synthetic);
    let ext_models: BTreeSet<&str> = ext.keys().copied().collect();
    let syn_models: BTreeSet<&str> = syn.keys().copied().collect();
    if ext_models != syn_models {
        let only_ext: Vec<_> = ext_models.difference(&syn_models).collect();
        let only_syn: Vec<_> = syn_models.difference(&ext_models).collect();
        return Err(StatsError::ModelSetMismatch(format!("external only {only_ext:?}, synthetic only {only_syn:?}")));
    }
    if let Some((m, v)) = ext.iter().find(|(_, v)| v.len() != 1) {
        return Err(StatsError::ModelSetMismatch(format!("{m} has {} external runs, expected 1", v.len())));
    }
    if ext_models.len() < 3 {
        return Err(StatsError::ModelSetMismatch(format!("{} shared model(s), need at least 3", ext_models.len())));
    }
    let rows: Vec<FidelityRow> = ext_models
        .iter()
        .map(|m| FidelityRow {
            model_id: m.to_string(),
            external_accuracy: ext[m][0],
            synthetic: MeanStd::of(&syn[m]),
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.external_accuracy).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.synthetic.mean).collect();
    Ok(FidelityReport { pearson: pearson(&x, &y)?, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub model_id: String,
    pub a: MeanStd,
    pub b: MeanStd,
    pub test: Option<StatResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Per-model comparison of two configurations, pairing replicates by index
/// (runs are ordered by manifest id).
pub fn distribution_report(a: &[RunResult], b: &[RunResult]) -> Result<Vec<DistributionRow>, StatsError> {
    let group = |runs: &[RunResult]| {
        let mut out: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for r in runs {
            out.entry(r.model_id.clone()).or_default().push((r.manifest_id.clone(), r.accuracy));
        }
        for v in out.values_mut() {
            v.sort_by(|x, y| x.0.cmp(&y.0));
        }
        out
    };
    let (ga, gb) = (group(a), group(b));
    if ga.keys().ne(gb.keys()) {
        return Err(StatsError::ModelSetMismatch("configurations were run on different models".into()));
    }
    ga.iter()
        .map(|(model, runs_a)| {
            let xa: Vec<f64> = runs_a.iter().map(|r| r.1).collect();
            let xb: Vec<f64> = gb[model].iter().map(|r| r.1).collect();
            let (test, note) = match wilcoxon_signed_rank(&xa, &xb) {
                Ok(t) => (Some(t), None),
                Err(StatsError::AllZeroDifferences) => (None, Some("all paired differences are zero".to_string())),
                Err(e) => return Err(e),
            };
            Ok(DistributionRow { model_id: model.clone(), a: MeanStd::of(&xa), b: MeanStd::of(&xb), test, note })
        })
        .collect()
}

/// `0.21 ± 0.03` style (two decimals on both).
pub fn fmt_pm(ms: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", ms.mean, ms.std)
}

/// `0.22 ± 0.0193` style (four decimals on the spread).
pub fn fmt_pm4(ms: &MeanStd) -> String {
    format!("{:.2} ± {:.4}", ms.mean, ms.std)
}

pub fn fmt_p(p: f64) -> String {
    format!("{p:.2}")
}

fn to_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn fidelity_csv(report: &FidelityReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.model_id.clone(), format!("{:.2}", r.external_accuracy), fmt_pm(&r.synthetic)])
        .collect();
    to_csv(&["Model".into(), "(A)".into(), "(B)".into()], &rows)
}

/// Scatter points behind the fidelity plot.
pub fn fidelity_scatter_csv(report: &FidelityReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.model_id.clone(),
                r.external_accuracy.to_string(),
                r.synthetic.mean.to_string(),
                r.synthetic.std.to_string(),
            ]
        })
        .collect();
    to_csv(&["model".into(), "external".into(), "synthetic_mean".into(), "synthetic_std".into()], &rows)
}

pub fn distribution_csv(rows: &[DistributionRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model_id.clone(),
                fmt_pm(&r.a),
                fmt_pm(&r.b),
                r.test.as_ref().and_then(|t| t.p_value).map(fmt_p).unwrap_or_else(|| "NA".into()),
            ]
        })
        .collect();
    to_csv(&["Model".into(), "(A)".into(), "(B)".into(), "p-value".into()], &body)
}

pub fn scale_csv(curve: &ScaleCurve) -> String {
    let scales = curve.scales();
    let mut header = vec!["Model".to_string()];
    header.extend(scales.iter().map(|n| format!("n={n}")));
    let rows: Vec<Vec<String>> = curve
        .models()
        .into_iter()
        .map(|m| {
            let mut row = vec![m.clone()];
            row.extend(scales.iter().map(|&n| curve.point(&m, n).map(|p| fmt_pm4(&p.accuracy)).unwrap_or_default()));
            row
        })
        .collect();
    to_csv(&header, &rows)
}

/// Long-format per-tag spread, one row per (model, n, tag).
pub fn scale_per_tag_csv(curve: &ScaleCurve) -> String {
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .flat_map(|p| {
            p.per_tag.iter().map(move |(tag, ms)| {
                vec![p.model_id.clone(), p.n.to_string(), tag.to_string(), ms.mean.to_string(), ms.std.to_string()]
            })
        })
        .collect();
    to_csv(&["model".into(), "n".into(), "tag".into(), "mean".into(), "std".into()], &rows)
}

pub fn histogram_csv(features: &LinguisticFeatures) -> String {
    let rows: Vec<Vec<String>> =
        features.length_histogram.iter().map(|(len, count)| vec![len.to_string(), count.to_string()]).collect();
    to_csv(&["length".into(), "count".into()], &rows)
}

/// Confusion grid with truth rows and prediction columns.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut header = vec!["truth".to_string()];
    header.extend(TriageTag::ALL.iter().map(|t| t.to_string()));
    header.push("Unparsed".into());
    let rows: Vec<Vec<String>> = TriageTag::ALL
        .iter()
        .map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(m.cells[t.index()].iter().map(|v| v.to_string()));
            row
        })
        .collect();
    to_csv(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: [f64; 6] = [0.29, 0.64, 0.57, 0.66, 0.57, 0.72];
    const B: [f64; 6] = [0.21, 0.86, 0.58, 0.92, 0.85, 0.85];

    #[test]
    fn pearson_on_fidelity_columns() {
        let r = pearson(&A, &B).unwrap();
        assert!((r.statistic - 0.9245).abs() < 1e-3, "{}", r.statistic);
        assert!((r.p_value.unwrap() - 0.00834).abs() < 5e-4, "{:?}", r.p_value);
    }

    #[test]
    fn pearson_identity_and_degeneracy() {
        assert!((pearson(&A, &A).unwrap().statistic - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = A.iter().map(|v| -v).collect();
        assert!((pearson(&A, &neg).unwrap().statistic + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::DegenerateInput(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::DegenerateInput(_))));
    }

    #[test]
    fn wilcoxon_five_positive() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!(r.statistic, 15.0);
        assert!((r.p_value.unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(r.exact, Some(true));
    }

    #[test]
    fn wilcoxon_zero_handling() {
        assert_eq!(wilcoxon_signed_rank(&[0.5, 0.6], &[0.5, 0.6]), Err(StatsError::AllZeroDifferences));
        let r = wilcoxon_signed_rank(&[0.85, 0.9, 0.5], &[0.85, 0.8, 0.4]).unwrap();
        assert_eq!(r.n, 2);
        assert_eq!(r.zero_differences_dropped, Some(1));
    }

    #[test]
    fn wilcoxon_normal_branch_is_close_to_exact() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let b = vec![0.0; 30];
        let approx = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(approx.exact, Some(false));
        let ranks = tied_ranks(&a.iter().map(|v: &f64| v.abs()).collect::<Vec<_>>());
        let exact = exact_signed_rank_p(&ranks, approx.statistic);
        assert!((approx.p_value.unwrap() - exact).abs() < 0.01);
    }

    #[test]
    fn tokenizer_and_features() {
        assert_eq!(tokenize("44-year-old male"), vec!["44", "year", "old", "male"]);
        let f = linguistic_features(&["44-year-old male"]);
        assert_eq!((f.avg_narrative_length, f.vocabulary_size), (4.0, 4));
        let doubled = linguistic_features(&["a b c", "c d", "a b c", "c d"]);
        let single = linguistic_features(&["a b c", "c d"]);
        assert_eq!(doubled.avg_narrative_length, single.avg_narrative_length);
        assert_eq!(doubled.vocabulary_size, single.vocabulary_size);
    }

    #[test]
    fn table_formatting() {
        let ms = MeanStd { mean: 0.2234, std: 0.01934, n: 10 };
        assert_eq!(fmt_pm4(&ms), "0.22 ± 0.0193");
        assert_eq!(fmt_pm(&MeanStd { mean: 0.21, std: 0.0312, n: 10 }), "0.21 ± 0.03");
        assert_eq!(fmt_p(0.0049), "0.00");
    }
}
