//! Desk-scale distributed gradient descent with simulated stragglers.
//!
//! Logistic regression on synthetic data: features are standard normal,
//! labels come from a ground-truth logistic model. Samples are divided
//! evenly into one partition per worker; each iteration a uniform random
//! `s`-subset of workers is erased, the configured scheme's decoder
//! combines whatever arrived, and the parameter vector takes a plain
//! (unregularized) gradient step with fixed step size. Decoding failures
//! can optionally restart the iteration with freshly sampled stragglers,
//! up to a retry cap, after which the partial aggregate is used as-is.
//!
//! Per-sample gradient of the log-likelihood: `(y - sigma(beta^T x)) x`;
//! any per-sample weight is absorbed into the step size.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode;
use crate::error::{Error, Result};
use crate::matrix::{ReceivedSet, SchemeTag};
use crate::montecarlo::SchemeSpec;
use crate::rng::RngSpec;

/// Synthetic classification dataset, pre-partitioned across workers.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    n_samples: usize,
    dim: usize,
    /// Row-major `n_samples x dim`.
    features: Vec<f64>,
    /// 0.0 or 1.0.
    labels: Vec<f64>,
    /// Sample -> partition; partitions are contiguous, equal size (+-1).
    partition_of: Vec<usize>,
    n_partitions: usize,
}

impl SyntheticDataset {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_partitions(&self) -> usize {
        self.n_partitions
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn partition_of(&self) -> &[usize] {
        &self.partition_of
    }

    /// Sample range of partition `k`.
    pub fn partition_samples(&self, k: usize) -> std::ops::Range<usize> {
        (k * self.n_samples) / self.n_partitions..((k + 1) * self.n_samples) / self.n_partitions
    }

    /// Assemble a dataset from explicit features (row-major) and 0/1
    /// labels, partitioned contiguously.
    pub fn from_parts(
        features: Vec<f64>,
        labels: Vec<f64>,
        dim: usize,
        n_partitions: usize,
    ) -> Result<Self> {
        let n_samples = labels.len();
        if dim == 0 || features.len() != n_samples * dim {
            return Err(Error::invalid("feature matrix shape mismatch"));
        }
        if n_partitions == 0 || n_samples < n_partitions {
            return Err(Error::invalid(format!(
                "need n_samples >= n_partitions >= 1, got {n_samples} and {n_partitions}"
            )));
        }
        let mut ds = SyntheticDataset {
            n_samples,
            dim,
            features,
            labels,
            partition_of: vec![0; n_samples],
            n_partitions,
        };
        let mut of = vec![0usize; n_samples];
        for k in 0..n_partitions {
            for i in ds.partition_samples(k) {
                of[i] = k;
            }
        }
        ds.partition_of = of;
        Ok(ds)
    }
}

/// Generate features from a standard spherical normal and labels from a
/// known logistic ground truth, split evenly into `n_partitions`
/// contiguous partitions. Fully reproducible from `rng`.
pub fn gen_synthetic(
    n_samples: usize,
    dim: usize,
    n_partitions: usize,
    rng: &RngSpec,
) -> Result<SyntheticDataset> {
    if dim == 0 {
        return Err(Error::invalid("need dim >= 1"));
    }
    if n_partitions == 0 || n_samples < n_partitions {
        return Err(Error::invalid(format!(
            "need n_samples >= n_partitions >= 1, got {n_samples} and {n_partitions}"
        )));
    }
    let mut rng = rng.rng();
    // Ground-truth weights scaled so scores have spread ~2 regardless of
    // dimension; labels stay balanced by symmetry.
    let scale = 2.0 / (dim as f64).sqrt();
    let truth: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let mut features = Vec::with_capacity(n_samples * dim);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let start = features.len();
        for _ in 0..dim {
            features.push(rng.sample::<f64, _>(StandardNormal));
        }
        let z: f64 = truth
            .iter()
            .zip(&features[start..])
            .map(|(t, x)| t * x)
            .sum();
        let y = if rng.gen::<f64>() < sigmoid(z) {
            1.0
        } else {
            0.0
        };
        labels.push(y);
    }
    SyntheticDataset::from_parts(features, labels, dim, n_partitions)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Partial gradient of the log-likelihood over partition `k`:
/// `sum_{i in D_k} (y_i - sigma(beta^T x_i)) x_i`.
pub fn partial_gradient(ds: &SyntheticDataset, k: usize, beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; ds.dim()];
    for i in ds.partition_samples(k) {
        let x = ds.feature_row(i);
        let z: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
        let w = ds.label(i) - sigmoid(z);
        for (gd, xd) in g.iter_mut().zip(x) {
            *gd += w * xd;
        }
    }
    g
}

/// All partition gradients, computed in parallel but returned (and
/// therefore reduced by callers) in fixed partition order.
pub fn partial_gradients(ds: &SyntheticDataset, beta: &[f64]) -> Vec<Vec<f64>> {
    (0..ds.n_partitions())
        .into_par_iter()
        .map(|k| partial_gradient(ds, k, beta))
        .collect()
}

/// Negative log-likelihood `sum_i ln(1 + e^{z_i}) - y_i z_i`, evaluated
/// stably.
pub fn log_loss(ds: &SyntheticDataset, beta: &[f64]) -> f64 {
    (0..ds.n_partitions())
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0;
            for i in ds.partition_samples(k) {
                let x = ds.feature_row(i);
                let z: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
                acc += if z > 0.0 {
                    (1.0 - ds.label(i)) * z + (-z).exp().ln_1p()
                } else {
                    -ds.label(i) * z + z.exp().ln_1p()
                };
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Raw scores `beta^T x_i` for every sample (AUC is rank-based, so the
/// logistic link is unnecessary).
pub fn scores(ds: &SyntheticDataset, beta: &[f64]) -> Vec<f64> {
    (0..ds.n_samples())
        .map(|i| ds.feature_row(i).iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect()
}

/// Probability that a uniformly random positive outranks a uniformly
/// random negative, ties counted half (rank-sum statistic). Labels above
/// 0.5 count as positive; errors if only one class is present.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y > 0.5).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks over tied score groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0; // 1-based
        for &idx in &order[i..=j] {
            if labels[idx] > 0.5 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Training-run configuration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub scheme: SchemeSpec,
    pub n_workers: usize,
    /// Stragglers erased per iteration (resampled every iteration).
    pub s: usize,
    /// Decode-failure threshold: residual > `epsilon * n` fails.
    pub epsilon: f64,
    pub step_size: f64,
    pub iterations: usize,
    /// Resample stragglers and retry a failed iteration.
    pub restart_on_failure: bool,
    /// After this many retries the partial aggregate is applied as-is.
    pub max_retries: usize,
    pub rng: RngSpec,
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub auc: f64,
    pub decode_residual: f64,
    pub retries: usize,
}

/// Run distributed gradient descent and return the per-iteration log.
///
/// The coding matrix is built once from `cfg.rng.substream(0)`;
/// straggler draws come sequentially from `cfg.rng.substream(1)`. Decoding
/// follows the scheme: FRC uses the combinatorial decoder, BRC peels to
/// exhaustion, Bernoulli solves least squares, and forget-s simply sums
/// the arrivals (no decode step and no restarts — dropped partitions are
/// the scheme's defining behavior, reported via `decode_residual = s`).
pub fn train(ds: &SyntheticDataset, cfg: &TrainConfig) -> Result<Vec<IterationRecord>> {
    let n = cfg.n_workers;
    if ds.n_partitions() != n {
        return Err(Error::invalid(format!(
            "dataset has {} partitions, config expects {n} workers",
            ds.n_partitions()
        )));
    }
    if cfg.s >= n {
        return Err(Error::invalid(format!("need s < n, got s = {}", cfg.s)));
    }
    if !cfg.step_size.is_finite() || cfg.step_size <= 0.0 {
        return Err(Error::invalid("step size must be positive"));
    }
    if cfg.iterations == 0 {
        return Err(Error::invalid("need at least one iteration"));
    }

    let a = cfg.scheme.build(n, &cfg.rng.substream(0))?;
    let mut straggler_rng = cfg.rng.substream(1).rng();
    let mut beta = vec![0.0; ds.dim()];
    let mut records = Vec::with_capacity(cfg.iterations);

    for iteration in 1..=cfg.iterations {
        let partials = partial_gradients(ds, &beta);
        let threshold = cfg.epsilon * n as f64;
        let mut retries = 0usize;
        let (received, outcome) = loop {
            let received = ReceivedSet::sample_with(n, cfg.s, &mut straggler_rng)?;
            let outcome = match cfg.scheme.tag() {
                SchemeTag::Frc => decode::decode_frc(&a, &received)?,
                SchemeTag::Brc => decode::peel_decode(&a.restrict(&received)?, 1.0),
                SchemeTag::ForgetS => forget_s_outcome(&received, n),
                SchemeTag::Bernoulli => {
                    let a_s = a.restrict(&received)?;
                    let (residual, u) = decode::recovery_error_ls(&a_s)?;
                    decode::DecodeOutcome {
                        recovered_partitions: Vec::new(),
                        coefficients: u,
                        residual_error: residual,
                        success: residual <= threshold,
                        recovery_order: Vec::new(),
                    }
                }
            };
            let failed = outcome.residual_error > threshold;
            let can_retry = cfg.restart_on_failure
                && cfg.scheme.tag() != SchemeTag::ForgetS
                && retries < cfg.max_retries;
            if failed && can_retry {
                retries += 1;
                continue;
            }
            break (received, outcome);
        };

        // Aggregate u^T g~_S, accumulated in received order.
        let mut aggregate = vec![0.0; ds.dim()];
        for (pos, &worker) in received.indices().iter().enumerate() {
            let u = outcome.coefficients[pos];
            if u == 0.0 {
                continue;
            }
            for &(j, c) in a.row(worker) {
                let w = u * c;
                for (agg, g) in aggregate.iter_mut().zip(&partials[j]) {
                    *agg += w * g;
                }
            }
        }
        for (b, g) in beta.iter_mut().zip(&aggregate) {
            *b += cfg.step_size * g;
        }

        records.push(IterationRecord {
            iteration,
            loss: log_loss(ds, &beta),
            auc: auc(&scores(ds, &beta), ds.labels())?,
            decode_residual: outcome.residual_error,
            retries,
        });
    }
    Ok(records)
}

fn forget_s_outcome(received: &ReceivedSet, n: usize) -> decode::DecodeOutcome {
    decode::DecodeOutcome {
        recovered_partitions: received.indices().to_vec(),
        coefficients: vec![1.0; received.len()],
        residual_error: (n - received.len()) as f64,
        success: received.len() == n,
        recovery_order: Vec::new(),
    }
}
