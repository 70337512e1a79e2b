//! Evaluation: clean-class precision and recall, Wilcoxon signed-rank test,
//! Cohen's d, Scott-Knott ESD grouping and repeated stratified k-fold
//! cross-validation.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::corpus::{Instance, Label};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("pooled standard deviation is zero but the means differ")]
    ZeroVariance,
    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),
    #[error("repeat {repeat}, fold {fold}: {message}")]
    Fold { repeat: usize, fold: usize, message: String },
}

/// Counts indexed actual → predicted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_bb: usize,
    pub n_bc: usize,
    pub n_cb: usize,
    pub n_cc: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.n_bb + self.n_bc + self.n_cb + self.n_cc
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix, StatsError> {
    if predictions.len() != labels.len() {
        return Err(StatsError::LengthMismatch(predictions.len(), labels.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, l) in predictions.iter().zip(labels) {
        match (l, p) {
            (Label::Buggy, Label::Buggy) => cm.n_bb += 1,
            (Label::Buggy, Label::Clean) => cm.n_bc += 1,
            (Label::Clean, Label::Buggy) => cm.n_cb += 1,
            (Label::Clean, Label::Clean) => cm.n_cc += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Share of clean predictions that are clean; 0 when nothing is predicted
/// clean.
pub fn precision(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.n_cc, cm.n_cc + cm.n_bc)
}

/// Share of clean instances predicted clean; 0 without clean instances.
pub fn recall(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.n_cc, cm.n_cc + cm.n_cb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub matrix: ConfusionMatrix,
}

impl MetricReport {
    pub fn new(matrix: ConfusionMatrix) -> Self {
        Self {
            precision: precision(&matrix),
            recall: recall(&matrix),
            matrix,
        }
    }
}

/// Sample size up to which the Wilcoxon p-value is computed exactly.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p-value of the Wilcoxon signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::TooFewSamples { need: 1, got: 0 });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let p = if diffs.len() <= WILCOXON_EXACT_MAX {
        exact_p(&ranks, w_plus)
    } else {
        normal_p(&abs, &ranks, w_plus)
    };
    Ok(p.min(1.0))
}

/// Exact two-sided p over all 2ⁿ sign assignments. Ranks are multiples of
/// one half, so doubled ranks index a subset-sum count table.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (w_plus * 2.0).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    2.0 * lower.min(upper)
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
fn normal_p(abs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Cohen's d with the pooled unbiased standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples { need: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0)).sqrt();
    let diff = mean(a) - mean(b);
    if pooled == 0.0 {
        return if diff == 0.0 { Ok(0.0) } else { Err(StatsError::ZeroVariance) };
    }
    Ok(diff / pooled)
}

/// Effect-size magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EffectCategory {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectCategory {
    /// `|d| ≤ 0.2` N, `≤ 0.5` S, `≤ 0.8` M, otherwise L.
    pub fn from_d(d: f64) -> Self {
        let d = d.abs();
        if d <= 0.2 {
            EffectCategory::Negligible
        } else if d <= 0.5 {
            EffectCategory::Small
        } else if d <= 0.8 {
            EffectCategory::Medium
        } else {
            EffectCategory::Large
        }
    }

    pub fn letter(self) -> char {
        match self {
            EffectCategory::Negligible => 'N',
            EffectCategory::Small => 'S',
            EffectCategory::Medium => 'M',
            EffectCategory::Large => 'L',
        }
    }
}

impl fmt::Display for EffectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Paired comparison of two methods on one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub p_value: f64,
    pub d: f64,
    pub category: EffectCategory,
}

pub fn compare(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let p_value = wilcoxon_signed_rank(a, b)?;
    let d = cohens_d(a, b)?;
    Ok(TestResult {
        p_value,
        d,
        category: EffectCategory::from_d(d),
    })
}

/// Effect size at or below which Scott-Knott ESD merges two groups.
pub const SK_NEGLIGIBLE_D: f64 = 0.2;

/// Groups of method names, best mean first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkEsdRanking {
    pub groups: Vec<Vec<String>>,
}

impl SkEsdRanking {
    /// 1-based group of `method`.
    pub fn rank_of(&self, method: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.iter().any(|m| m == method)).map(|i| i + 1)
    }
}

pub fn scott_knott_esd(methods: &[(String, Vec<f64>)]) -> SkEsdRanking {
    scott_knott_esd_with(methods, SK_NEGLIGIBLE_D)
}

/// Recursive best-split partition of the mean-sorted methods; a split stands
/// only when the halves differ by more than `threshold` in Cohen's d.
pub fn scott_knott_esd_with(methods: &[(String, Vec<f64>)], threshold: f64) -> SkEsdRanking {
    let mut sorted: Vec<&(String, Vec<f64>)> = methods.iter().collect();
    sorted.sort_by(|a, b| match mean(&b.1).total_cmp(&mean(&a.1)) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    let mut groups = Vec::new();
    split(&sorted, threshold, &mut groups);
    SkEsdRanking { groups }
}

fn split(methods: &[&(String, Vec<f64>)], threshold: f64, out: &mut Vec<Vec<String>>) {
    let whole = || methods.iter().map(|m| m.0.clone()).collect::<Vec<_>>();
    if methods.len() < 2 {
        if !methods.is_empty() {
            out.push(whole());
        }
        return;
    }
    let concat = |ms: &[&(String, Vec<f64>)]| ms.iter().flat_map(|m| m.1.iter().copied()).collect::<Vec<f64>>();
    let all = concat(methods);
    let grand = mean(&all);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..methods.len() {
        let (l, r) = (concat(&methods[..k]), concat(&methods[k..]));
        let ss = l.len() as f64 * (mean(&l) - grand).powi(2) + r.len() as f64 * (mean(&r) - grand).powi(2);
        if best.is_none_or(|(_, b)| ss > b) {
            best = Some((k, ss));
        }
    }
    let (k, _) = best.expect("at least one split point");
    let (l, r) = (concat(&methods[..k]), concat(&methods[k..]));
    let distinct = match cohens_d(&l, &r) {
        Ok(d) => d.abs() > threshold,
        Err(StatsError::ZeroVariance) => true,
        // Too few values to judge an effect.
        Err(_) => false,
    };
    if distinct {
        split(&methods[..k], threshold, out);
        split(&methods[k..], threshold, out);
    } else {
        out.push(whole());
    }
}

/// Splits indices into `folds` parts with per-class counts within one of
/// each other.
pub fn stratified_folds(labels: &[Label], folds: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut clean: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Clean).collect();
    let mut buggy: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Buggy).collect();
    clean.shuffle(rng);
    buggy.shuffle(rng);
    let mut out = vec![Vec::new(); folds];
    for (k, i) in clean.into_iter().chain(buggy).enumerate() {
        out[k % folds].push(i);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub repeat: usize,
    pub fold: usize,
    pub report: MetricReport,
}

/// Cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 2,
            repeats: 10,
            seed: 0,
        }
    }
}

/// Repeated stratified k-fold evaluation. For every fold, `fit_predict`
/// receives the training part, the held-out part and a seed derived from the
/// master seed, and returns one predicted label per held-out instance.
/// Reports come back ordered by (repeat, fold).
pub fn cross_validate<F>(corpus: &[Instance], config: &CvConfig, exec: Exec, fit_predict: F) -> Result<Vec<FoldReport>, StatsError>
where
    F: Fn(&[Instance], &[Instance], u64) -> Result<Vec<Label>, String> + Sync + Send,
{
    if config.folds < 2 {
        return Err(StatsError::DegenerateCorpus("need at least two folds".into()));
    }
    let mut labels = Vec::with_capacity(corpus.len());
    for inst in corpus {
        labels.push(inst.label.ok_or_else(|| StatsError::DegenerateCorpus(format!("instance `{}` is unlabeled", inst.id)))?);
    }
    for class in [Label::Clean, Label::Buggy] {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < config.folds {
            return Err(StatsError::DegenerateCorpus(format!(
                "{n} instances of class {class}, need one per fold"
            )));
        }
    }

    let mut tasks = Vec::new();
    for repeat in 0..config.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(repeat as u64);
        let parts = stratified_folds(&labels, config.folds, &mut rng);
        for fold in 0..config.folds {
            tasks.push((repeat, fold, rng.gen::<u64>(), parts.clone()));
        }
    }

    let results = exec.map(&tasks, |(repeat, fold, fold_seed, parts)| {
        let test: Vec<Instance> = parts[*fold].iter().map(|&i| corpus[i].clone()).collect();
        let train: Vec<Instance> = parts
            .iter()
            .enumerate()
            .filter(|(k, _)| k != fold)
            .flat_map(|(_, p)| p.iter().map(|&i| corpus[i].clone()))
            .collect();
        let err = |message: String| StatsError::Fold {
            repeat: *repeat,
            fold: *fold,
            message,
        };
        let predicted = fit_predict(&train, &test, *fold_seed).map_err(err)?;
        let truth: Vec<Label> = parts[*fold].iter().map(|&i| labels[i]).collect();
        let matrix = confusion(&predicted, &truth).map_err(|e| err(e.to_string()))?;
        Ok(FoldReport {
            repeat: *repeat,
            fold: *fold,
            report: MetricReport::new(matrix),
        })
    });
    results.into_iter().collect()
}
