//! Cross-validation harness and classification metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::induction::{fold_rm, TrainConfig};
use crate::inference::predict;
use crate::program::Program;

/// Scores are weighted by gold-class support.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub rule_count: f64,
    pub train_ms: f64,
}

impl Metrics {
    fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&Metrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Metrics {
            accuracy: sum(|m| m.accuracy),
            weighted_precision: sum(|m| m.weighted_precision),
            weighted_recall: sum(|m| m.weighted_recall),
            weighted_f1: sum(|m| m.weighted_f1),
            rule_count: sum(|m| m.rule_count),
            train_ms: sum(|m| m.train_ms),
        }
    }
}

/// Fold of every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Row indices of fold `fold` and of all other folds.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != fold)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::Config(format!(
            "fold count must lie in [2, {n}], got {k}"
        )));
    }
    Ok(())
}

/// Shuffled partition of `n` rows into `k` folds whose sizes differ by at
/// most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Like [`kfold_split`], but deals each class round-robin over the folds so
/// class proportions are kept.
pub fn stratified_kfold_split<S: AsRef<str>>(labels: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    check_k(labels.len(), k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        let g = *index.entry(l.as_ref()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mut assignments = vec![0; labels.len()];
    let mut pos = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for row in g {
            assignments[row] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Accuracy and support-weighted precision, recall and F1. A `None`
/// prediction is wrong for every class. `rule_count` and `train_ms` are
/// left at zero.
pub fn compute_metrics<S: AsRef<str>>(predictions: &[Option<S>], gold: &[S]) -> Result<Metrics> {
    if predictions.len() != gold.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Input("no examples to score".into()));
    }
    let n = gold.len() as f64;
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
    let mut hits: BTreeMap<&str, usize> = BTreeMap::new();
    let mut correct = 0;
    for (p, g) in predictions.iter().zip(gold) {
        let g = g.as_ref();
        *support.entry(g).or_default() += 1;
        if let Some(p) = p {
            let p = p.as_ref();
            *predicted.entry(p).or_default() += 1;
            if p == g {
                *hits.entry(g).or_default() += 1;
                correct += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for (&class, &s) in &support {
        let tp = hits.get(class).copied().unwrap_or(0);
        let p = ratio(tp, predicted.get(class).copied().unwrap_or(0));
        let r = ratio(tp, s);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = s as f64 / n;
        wp += w * p;
        wr += w * r;
        wf += w * f;
    }
    Ok(Metrics {
        accuracy: correct as f64 / n,
        weighted_precision: wp,
        weighted_recall: wr,
        weighted_f1: wf,
        rule_count: 0.0,
        train_ms: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// k-fold cross-validation.
    KFold,
    /// Train on a random two thirds, test on the rest.
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub train: TrainConfig,
    pub folds: usize,
    pub seed: u64,
    /// Each repetition `r` uses seed `seed + r`.
    pub repeats: usize,
    pub stratified: bool,
    pub protocol: Protocol,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            train: TrainConfig::default(),
            folds: 10,
            seed: 42,
            repeats: 1,
            stratified: false,
            protocol: Protocol::KFold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub repeat: usize,
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Mean over all folds of all repetitions.
    pub mean: Metrics,
    pub folds: Vec<FoldReport>,
}

/// Trains on `train`, scores on `test`.
pub fn train_and_score(
    data: &Dataset,
    train: &[usize],
    test: &[usize],
    cfg: &TrainConfig,
) -> Result<Metrics> {
    let train_set = data.subset(train);
    let start = Instant::now();
    let model = fold_rm(&train_set, cfg);
    let program = Program::from_model(
        &model.rules,
        data.schema().to_vec(),
        data.label_name(),
        train_set.label_values(),
        cfg.ratio,
    );
    let train_ms = start.elapsed().as_secs_f64() * 1000.0;
    let mut preds = Vec::with_capacity(test.len());
    for &i in test {
        preds.push(predict(&program, data.row(i))?.label);
    }
    let gold: Vec<String> = test.iter().map(|&i| data.label(i).to_string()).collect();
    let mut m = compute_metrics(&preds, &gold)?;
    m.rule_count = program.rules.len() as f64;
    m.train_ms = train_ms;
    Ok(m)
}

/// Repeated cross-validation (or hold-out) with folds trained in parallel.
pub fn run_cv(data: &Dataset, cfg: &CvConfig) -> Result<CvReport> {
    cfg.train.validate()?;
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut jobs: Vec<(usize, usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for r in 0..cfg.repeats {
        let seed = cfg.seed.wrapping_add(r as u64);
        match cfg.protocol {
            Protocol::KFold => {
                let plan = if cfg.stratified {
                    stratified_kfold_split(data.labels(), cfg.folds, seed)?
                } else {
                    kfold_split(data.len(), cfg.folds, seed)?
                };
                for f in 0..cfg.folds {
                    let (train, test) = plan.split(f);
                    jobs.push((r, f, train, test));
                }
            }
            Protocol::Holdout => {
                if data.len() < 3 {
                    return Err(Error::Config("hold-out needs at least 3 rows".into()));
                }
                let mut order: Vec<usize> = (0..data.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let cut = (2 * data.len()).div_ceil(3);
                let test = order.split_off(cut);
                jobs.push((r, 0, order, test));
            }
        }
    }
    let folds: Vec<FoldReport> = jobs
        .par_iter()
        .map(|(r, f, train, test)| {
            Ok(FoldReport {
                repeat: *r,
                fold: *f,
                train_rows: train.len(),
                test_rows: test.len(),
                metrics: train_and_score(data, train, test, &cfg.train)?,
            })
        })
        .collect::<Result<_>>()?;
    let all: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    Ok(CvReport {
        mean: Metrics::mean(&all),
        folds,
    })
}

/// Aligned text table, one line per dataset.
pub fn format_table(rows: &[(String, Metrics)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>10}\n",
        "dataset", "acc", "p", "r", "f1", "rules", "train_ms"
    );
    for (name, m) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.1}  {:>10.1}",
            name, m.accuracy, m.weighted_precision, m.weighted_recall, m.weighted_f1, m.rule_count, m.train_ms
        );
    }
    out
}

/// CSV with columns dataset, acc, p, r, f1, rules, train_ms.
pub fn format_csv(rows: &[(String, Metrics)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["dataset", "acc", "p", "r", "f1", "rules", "train_ms"]);
    for (name, m) in rows {
        let _ = w.write_record([
            name.clone(),
            format!("{:.4}", m.accuracy),
            format!("{:.4}", m.weighted_precision),
            format!("{:.4}", m.weighted_recall),
            format!("{:.4}", m.weighted_f1),
            format!("{:.1}", m.rule_count),
            format!("{:.1}", m.train_ms),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
