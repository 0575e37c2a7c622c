use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::baselines::theta_mle_pairs;
use crate::data::{sigmoid, ResponseMatrix};
use crate::error::{Error, Result};
use crate::estimator::{spectral_estimate, EstimatorConfig};

/// Area under the ROC curve via the Mann-Whitney statistic; ties count 1/2.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based, tie-averaged) ranks of positives
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        pos_rank_sum += mid_rank * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Held-out predictions: each user's assigned responses (in item order) are
/// split alternately, even positions fit the user's ability, odd positions
/// are scored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeldOut {
    /// Predicted probability of a positive response.
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub logliks: Vec<f64>,
    /// Users with fewer than two responses.
    pub skipped_users: usize,
}

pub fn held_out_predictions(x: &ResponseMatrix, beta: &[f64]) -> Result<HeldOut> {
    if beta.len() != x.n_items() {
        return Err(Error::InvalidInput(format!("beta has {} items, data has {}", beta.len(), x.n_items())));
    }
    let mut out = HeldOut::default();
    let mut fit = Vec::new();
    for row in x.rows() {
        let assigned: Vec<(bool, f64)> = row.iter().zip(beta).filter_map(|(c, &b)| c.response().map(|r| (r, b))).collect();
        if assigned.len() < 2 {
            out.skipped_users += 1;
            continue;
        }
        fit.clear();
        fit.extend(assigned.iter().step_by(2).copied());
        let theta = theta_mle_pairs(&fit)?.theta;
        for &(x, b) in assigned.iter().skip(1).step_by(2) {
            let p = sigmoid(theta - b);
            out.scores.push(p);
            out.labels.push(x);
            out.logliks.push(if x { p.ln() } else { (1.0 - p).ln() });
        }
    }
    Ok(out)
}

/// Mean log-probability of held-out responses (see [`held_out_predictions`]).
pub fn log_likelihood(x: &ResponseMatrix, beta: &[f64]) -> Result<f64> {
    let held = held_out_predictions(x, beta)?;
    mean_loglik(&held)
}

fn mean_loglik(held: &HeldOut) -> Result<f64> {
    if held.logliks.is_empty() {
        return Err(Error::UndefinedMetric("no user has two or more responses to score".into()));
    }
    Ok(held.logliks.iter().sum::<f64>() / held.logliks.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankOrder {
    /// Largest value first (hardest items first for beta).
    #[default]
    Descending,
    Ascending,
}

/// Item indices sorted by value, ties broken by index.
pub fn rank_items(values: &[f64], order: RankOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        let c = if order == RankOrder::Descending { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
    idx
}

/// `|topK(beta) ∩ topK(reference)| / K` for every requested `K`.
pub fn topk_accuracy(beta: &[f64], reference: &[usize], ks: &[usize], order: RankOrder) -> Result<BTreeMap<usize, f64>> {
    let m = beta.len();
    let mut seen = vec![false; m];
    for &r in reference {
        if r >= m || std::mem::replace(&mut seen[r], true) {
            return Err(Error::InvalidInput("reference must be a permutation of the items".into()));
        }
    }
    if reference.len() != m {
        return Err(Error::InvalidInput("reference must cover every item".into()));
    }
    let ranked = rank_items(beta, order);
    ks.iter()
        .map(|&k| {
            if k == 0 || k > m {
                return Err(Error::InvalidInput(format!("K = {k} outside 1..={m}")));
            }
            let mut top = vec![false; m];
            ranked[..k].iter().for_each(|&i| top[i] = true);
            let hits = reference[..k].iter().filter(|&&i| top[i]).count();
            Ok((k, hits as f64 / k as f64))
        })
        .collect()
}

/// Items ordered hardest first by mean response, keeping only items with at
/// least `min_count` responses and mean at most `max_mean`.
pub fn reference_ranking_by_mean(x: &ResponseMatrix, min_count: usize, max_mean: f64) -> Vec<usize> {
    let m = x.n_items();
    let mut counts = vec![0usize; m];
    let mut ones = vec![0usize; m];
    for row in x.rows() {
        for (i, c) in row.iter().enumerate() {
            if let Some(r) = c.response() {
                counts[i] += 1;
                ones[i] += r as usize;
            }
        }
    }
    let means: Vec<f64> = (0..m).map(|i| if counts[i] > 0 { ones[i] as f64 / counts[i] as f64 } else { f64::NAN }).collect();
    rank_items(&means, RankOrder::Ascending)
        .into_iter()
        .filter(|&i| counts[i] >= min_count.max(1) && means[i] <= max_mean)
        .collect()
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

/// l2 distance after centering both vectors.
pub fn l2_error(beta: &[f64], beta_star: &[f64]) -> f64 {
    assert_eq!(beta.len(), beta_star.len(), "l2_error: length mismatch");
    centered(beta).iter().zip(centered(beta_star)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// `||pi - pi_star||_inf / ||pi_star||_inf`.
pub fn linf_rel_error(pi: &[f64], pi_star: &[f64]) -> f64 {
    assert_eq!(pi.len(), pi_star.len(), "linf_rel_error: length mismatch");
    let num = pi.iter().zip(pi_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    num / pi_star.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub auc: f64,
    pub avg_loglik: f64,
    pub topk: BTreeMap<usize, f64>,
    pub n_scored: usize,
    pub skipped_users: usize,
}

impl MetricReport {
    /// `metric,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,value")?;
        writeln!(w, "auc,{}", self.auc)?;
        writeln!(w, "avg_loglik,{}", self.avg_loglik)?;
        for (k, v) in &self.topk {
            writeln!(w, "top{k},{v}")?;
        }
        writeln!(w, "n_scored,{}", self.n_scored)?;
        writeln!(w, "skipped_users,{}", self.skipped_users)?;
        Ok(())
    }
}

/// Options for [`evaluate`] beyond the estimator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub topk: Vec<usize>,
    pub min_count: usize,
    pub max_mean: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { topk: Vec::new(), min_count: 1, max_mean: 1.0 }
    }
}

/// Fits item parameters on `train` and scores `test`: AUC and mean
/// log-likelihood on held-out responses, top-K agreement with the test
/// set's mean-response ranking.
pub fn evaluate(train: &ResponseMatrix, test: &ResponseMatrix, cfg: &EstimatorConfig, opts: &EvalOptions) -> Result<MetricReport> {
    if train.item_ids() != test.item_ids() {
        return Err(Error::InvalidInput("train and test files have different item columns".into()));
    }
    let est = spectral_estimate(train, cfg)?;
    let held = held_out_predictions(test, &est.beta)?;
    let avg_loglik = mean_loglik(&held)?;
    let auc = auc(&held.scores, &held.labels)?;

    let reference = reference_ranking_by_mean(test, opts.min_count, opts.max_mean);
    let kept: Vec<f64> = reference.iter().map(|&i| est.beta[i]).collect();
    // reference positions within the kept subset are 0..len in order
    let local_ref: Vec<usize> = (0..reference.len()).collect();
    let topk = if opts.topk.is_empty() {
        BTreeMap::new()
    } else {
        topk_accuracy(&kept, &local_ref, &opts.topk, RankOrder::Descending)?
    };
    Ok(MetricReport { auc, avg_loglik, topk, n_scored: held.scores.len(), skipped_users: held.skipped_users })
}
