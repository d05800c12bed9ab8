//! Coding-matrix constructions.
//!
//! Two coded schemes and two baselines:
//!
//! - [`build_frc`]: the d-fractional repetition code. Workers are split
//!   into `d` groups; within a group the `n` partitions are divided
//!   disjointly into consecutive ranges, and groups replicate each other.
//! - [`build_brc`]: the batch raptor code. Partitions are grouped into
//!   batches of size `b`; each worker stores a uniformly random set of
//!   `d` batches with `d` drawn from the soliton-style distribution of
//!   [`DegreeDistribution`].
//! - [`build_forget_s`]: the uncoded identity assignment (worker `i`
//!   stores partition `i`); with stragglers this degrades to stochastic
//!   gradient descent on whatever arrives.
//! - [`build_bernoulli`]: each (worker, partition) pair is included
//!   independently with probability `d/n` — a generic random baseline.
//!
//! All builders are pure functions of their [`RngSpec`], so matrices can
//! be rebuilt bit-identically from a seed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CodingMatrix, SchemeTag};
use crate::rng::RngSpec;

/// Worker-degree distribution for the batch raptor code.
///
/// For `eps` in (0, 0.25), with `D = floor(1/eps)` and
/// `u = 2*eps*(1 - 2*eps) / (1 - 4*eps)^2`:
///
/// ```text
/// p_1     = u / (u + 1)
/// p_k     = 1 / (k * (k-1) * (u + 1))     for 2 <= k <= D
/// p_{D+1} = 1 / (D * (u + 1))
/// ```
///
/// The interior terms telescope to `1 - 1/D`, so the pmf sums to one
/// exactly in exact arithmetic. `u` diverges at `eps = 1/4`, hence the
/// hard domain bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeDistribution {
    epsilon: f64,
    /// `D = floor(1/eps)`; the support is `{1, ..., D+1}`.
    cap: usize,
    u: f64,
    /// `(degree, probability)` pairs for degrees `1..=D+1`.
    pmf: Vec<(usize, f64)>,
    /// Cumulative sums of `pmf`, for inverse-CDF sampling.
    cdf: Vec<f64>,
}

impl DegreeDistribution {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.25) {
            return Err(Error::domain(format!(
                "degree distribution requires 0 < eps < 0.25, got {epsilon}"
            )));
        }
        let cap = (1.0 / epsilon).floor() as usize;
        let u = 2.0 * epsilon * (1.0 - 2.0 * epsilon) / (1.0 - 4.0 * epsilon).powi(2);
        let norm = u + 1.0;
        let mut pmf = Vec::with_capacity(cap + 1);
        pmf.push((1, u / norm));
        for k in 2..=cap {
            pmf.push((k, 1.0 / (k as f64 * (k as f64 - 1.0) * norm)));
        }
        pmf.push((cap + 1, 1.0 / (cap as f64 * norm)));

        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &(_, p) in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(DegreeDistribution {
            epsilon,
            cap,
            u,
            pmf,
            cdf,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `D`: the largest regular degree; the spike sits at `D + 1`.
    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn pmf(&self) -> &[(usize, f64)] {
        &self.pmf
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().map(|&(_, p)| p).sum()
    }

    /// Mean degree `sum k * p_k`.
    pub fn mean(&self) -> f64 {
        self.pmf.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    /// Inverse-CDF draw of a degree in `{1, ..., D+1}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.gen();
        match self.cdf.iter().position(|&c| x < c) {
            Some(i) => self.pmf[i].0,
            // x landed in the floating-point slack above the last cdf entry.
            None => self.pmf[self.pmf.len() - 1].0,
        }
    }
}

/// Parameters of a batch raptor code instance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BrcConfig {
    pub n: usize,
    /// Straggler fraction `s/n`.
    pub delta: f64,
    pub epsilon: f64,
    /// `b = ceil(1 / ln(1/delta)) + 1` (natural log).
    pub batch_size: usize,
    /// `ceil(n / b)`; the last batch may be smaller than `b`.
    pub n_batches: usize,
}

impl BrcConfig {
    pub fn new(n: usize, delta: f64, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need n >= 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!(
                "straggler fraction must lie in (0, 1), got {delta}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 0.25) {
            return Err(Error::domain(format!(
                "BRC requires 0 < eps < 0.25, got {epsilon}"
            )));
        }
        let batch_size = (1.0 / (1.0 / delta).ln()).ceil() as usize + 1;
        let n_batches = n.div_ceil(batch_size);
        Ok(BrcConfig {
            n,
            delta,
            epsilon,
            batch_size,
            n_batches,
        })
    }

    /// Partitions of batch `b` (contiguous; the last batch absorbs the
    /// remainder when `batch_size` does not divide `n`).
    pub fn batch_partitions(&self, batch: usize) -> std::ops::Range<usize> {
        let start = batch * self.batch_size;
        start..((batch + 1) * self.batch_size).min(self.n)
    }
}

/// d-fractional repetition code.
///
/// `d` groups of workers; group sizes are `floor(n/d)`, with `n mod d`
/// randomly chosen groups enlarged by one. Within each group the `n`
/// partitions are split into disjoint consecutive ranges, one per worker,
/// largest ranges first, so per-worker load is at most
/// `ceil(n / group_size)`. When `d | n` every group is an exact replica
/// of the block pattern and both row and column supports equal `d`.
pub fn build_frc(n: usize, d: usize, rng: &RngSpec) -> Result<CodingMatrix> {
    if d < 1 || d > n {
        return Err(Error::invalid(format!(
            "need 1 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    let base = n / d;
    let remainder = n % d;
    let mut sizes = vec![base; d];
    if remainder > 0 {
        let chosen = rand::seq::index::sample(&mut rng.rng(), d, remainder);
        for g in chosen.iter() {
            sizes[g] += 1;
        }
    }

    let mut rows = Vec::with_capacity(n);
    for &group_size in &sizes {
        let big = n.div_ceil(group_size);
        let small = n / group_size;
        let n_big = n - small * group_size; // ranges of size `big` come first
        let mut start = 0;
        for w in 0..group_size {
            let len = if w < n_big { big } else { small };
            rows.push((start..start + len).map(|j| (j, 1.0)).collect());
            start += len;
        }
        debug_assert_eq!(start, n);
    }
    CodingMatrix::from_rows(SchemeTag::Frc, n, rows, None)
}

/// Batch raptor code: per worker, draw a degree from the distribution,
/// pick that many distinct batches uniformly, and store their union.
/// Degrees above `n_batches` are clamped (the construction assumes many
/// more batches than the maximum degree).
pub fn build_brc(cfg: &BrcConfig, rng: &RngSpec) -> Result<CodingMatrix> {
    let dist = DegreeDistribution::new(cfg.epsilon)?;
    let mut rng = rng.rng();
    let mut rows = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let degree = dist.sample(&mut rng).min(cfg.n_batches);
        let mut picks = rand::seq::index::sample(&mut rng, cfg.n_batches, degree).into_vec();
        picks.sort_unstable();
        let mut row = Vec::new();
        for b in picks {
            row.extend(cfg.batch_partitions(b).map(|j| (j, 1.0)));
        }
        rows.push(row);
    }
    let batch_map = (0..cfg.n).map(|j| j / cfg.batch_size).collect();
    CodingMatrix::from_rows(SchemeTag::Brc, cfg.n, rows, Some(batch_map))
}

/// Batch code with an explicit batch layout and explicit per-worker batch
/// choices (no randomness). Used to reproduce fixed instances exactly.
pub fn brc_from_batches(
    n_partitions: usize,
    batches: &[Vec<usize>],
    worker_batches: &[Vec<usize>],
) -> Result<CodingMatrix> {
    let mut batch_map = vec![usize::MAX; n_partitions];
    for (b, parts) in batches.iter().enumerate() {
        for &j in parts {
            if j >= n_partitions {
                return Err(Error::invalid(format!(
                    "batch {b} references partition {j} out of range"
                )));
            }
            if batch_map[j] != usize::MAX {
                return Err(Error::invalid(format!(
                    "partition {j} assigned to two batches"
                )));
            }
            batch_map[j] = b;
        }
    }
    if batch_map.contains(&usize::MAX) {
        return Err(Error::invalid("batches must cover every partition"));
    }
    let rows = worker_batches
        .iter()
        .map(|bs| {
            let mut row: Vec<(usize, f64)> = bs
                .iter()
                .flat_map(|&b| batches[b].iter().map(|&j| (j, 1.0)))
                .collect();
            row.sort_by_key(|&(j, _)| j);
            row
        })
        .collect();
    CodingMatrix::from_rows(SchemeTag::Brc, n_partitions, rows, Some(batch_map))
}

/// Identity assignment: worker `i` stores exactly partition `i`.
pub fn build_forget_s(n: usize) -> Result<CodingMatrix> {
    if n == 0 {
        return Err(Error::invalid("need n >= 1"));
    }
    let rows = (0..n).map(|i| vec![(i, 1.0)]).collect();
    CodingMatrix::from_rows(SchemeTag::ForgetS, n, rows, None)
}

/// Bernoulli baseline: each (worker, partition) pair included with
/// probability `d/n`; empty rows are re-drawn so every worker computes
/// something.
pub fn build_bernoulli(n: usize, d: usize, rng: &RngSpec) -> Result<CodingMatrix> {
    if d < 1 || d > n {
        return Err(Error::invalid(format!(
            "need 1 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    let p = d as f64 / n as f64;
    let mut rng = rng.rng();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let row = loop {
            let row: Vec<(usize, f64)> = (0..n)
                .filter(|_| rng.gen::<f64>() < p)
                .map(|j| (j, 1.0))
                .collect();
            if !row.is_empty() {
                break row;
            }
        };
        rows.push(row);
    }
    CodingMatrix::from_rows(SchemeTag::Bernoulli, n, rows, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_distribution_eps_01_matches_closed_form() {
        let dist = DegreeDistribution::new(0.1).unwrap();
        assert_eq!(dist.cap(), 10);
        assert!((dist.u() - 4.0 / 9.0).abs() < 1e-15);
        let pmf = dist.pmf();
        assert_eq!(pmf.len(), 11);
        assert!((pmf[0].1 - 4.0 / 13.0).abs() < 1e-15);
        assert!((pmf[10].1 - 9.0 / 130.0).abs() < 1e-15);
        // mean = (u + H_9 + 1.1) / (u + 1)
        let h9: f64 = (1..10).map(|j| 1.0 / j as f64).sum();
        let expect = (dist.u() + h9 + 1.1) / (dist.u() + 1.0);
        assert!((dist.mean() - expect).abs() < 1e-12);
        assert!((dist.mean() - 3.0277).abs() < 1e-3);
    }

    #[test]
    fn degree_distribution_mass_is_one() {
        for eps in [0.01, 0.02, 0.05, 0.1, 0.2, 0.24] {
            let dist = DegreeDistribution::new(eps).unwrap();
            assert!((dist.total_mass() - 1.0).abs() <= 1e-12, "eps = {eps}");
            assert!(dist.pmf().iter().all(|&(_, p)| p > 0.0));
        }
    }

    #[test]
    fn degree_distribution_tail_is_decreasing() {
        let dist = DegreeDistribution::new(0.05).unwrap();
        let pmf = dist.pmf();
        for w in pmf[1..pmf.len() - 1].windows(2) {
            assert!(w[0].1 > w[1].1, "p_k not decreasing at {:?}", w);
        }
    }

    #[test]
    fn degree_distribution_rejects_out_of_domain() {
        assert!(DegreeDistribution::new(0.0).is_err());
        assert!(DegreeDistribution::new(0.25).is_err());
        assert!(DegreeDistribution::new(-0.1).is_err());
        assert!(DegreeDistribution::new(0.3).is_err());
    }

    #[test]
    fn frc_6_2_matches_block_layout() {
        let m = build_frc(6, 2, &RngSpec::new(0)).unwrap();
        let expect: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![2, 3],
            vec![4, 5],
            vec![0, 1],
            vec![2, 3],
            vec![4, 5],
        ];
        for (i, cols) in expect.iter().enumerate() {
            let row: Vec<usize> = m.row(i).iter().map(|&(j, _)| j).collect();
            assert_eq!(&row, cols, "worker {i}");
        }
        assert_eq!(m.computation_load(), 2);
        // every column has exactly d = 2 nonzeros
        assert!(m.column_supports().iter().all(|c| c.len() == 2));
    }

    #[test]
    fn frc_d1_is_identity_pattern() {
        let m = build_frc(5, 1, &RngSpec::new(0)).unwrap();
        for i in 0..5 {
            assert_eq!(m.row(i), &[(i, 1.0)]);
        }
    }

    #[test]
    fn frc_groups_are_replicas_when_divisible() {
        let m = build_frc(12, 3, &RngSpec::new(7)).unwrap();
        let per_group = 12 / 3;
        for i in 0..per_group {
            for g in 1..3 {
                assert_eq!(m.row(i), m.row(i + g * per_group));
            }
        }
    }

    #[test]
    fn frc_non_divisible_covers_everything_per_group() {
        let m = build_frc(10, 3, &RngSpec::new(5)).unwrap();
        assert_eq!(m.n_workers(), 10);
        // Each group must cover all 10 partitions disjointly.
        let mut start = 0;
        let mut sizes = Vec::new();
        let mut group = Vec::new();
        let mut covered = 0usize;
        for i in 0..10 {
            group.push(i);
            covered += m.row_support(i);
            if covered == 10 {
                sizes.push(group.len());
                group.clear();
                covered = 0;
                start = i + 1;
            }
        }
        let _ = start;
        assert!(group.is_empty(), "trailing workers do not complete a group");
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        // Load within ceil(n / group_size) for the smallest group.
        assert!(m.computation_load() <= 10usize.div_ceil(3));
    }

    #[test]
    fn frc_rejects_bad_d() {
        assert!(build_frc(4, 0, &RngSpec::new(0)).is_err());
        assert!(build_frc(4, 5, &RngSpec::new(0)).is_err());
    }

    #[test]
    fn brc_config_batch_size() {
        let cfg = BrcConfig::new(1000, 0.1, 0.1).unwrap();
        assert_eq!(cfg.batch_size, 2);
        assert_eq!(cfg.n_batches, 500);
        // delta = 1/3 (Example-1 scale) also yields b = 2.
        let cfg = BrcConfig::new(6, 1.0 / 3.0, 0.1).unwrap();
        assert_eq!(cfg.batch_size, 2);
        assert_eq!(cfg.n_batches, 3);
    }

    #[test]
    fn brc_rows_are_whole_batches() {
        let cfg = BrcConfig::new(100, 0.1, 0.1).unwrap();
        let m = build_brc(&cfg, &RngSpec::new(11)).unwrap();
        // from_rows already validates batch completeness; spot-check a row.
        let row: Vec<usize> = m.row(0).iter().map(|&(j, _)| j).collect();
        assert_eq!(row.len() % cfg.batch_size, 0);
        assert!(m.batch_map().is_some());
    }

    #[test]
    fn brc_mean_row_support_tracks_analytic_mean() {
        let cfg = BrcConfig::new(1000, 0.1, 0.1).unwrap();
        let dist = DegreeDistribution::new(0.1).unwrap();
        let analytic = cfg.batch_size as f64 * dist.mean();
        let mut sum = 0.0;
        let mut workers = 0usize;
        for seed in 0..100u64 {
            let m = build_brc(&cfg, &RngSpec::new(seed)).unwrap();
            sum += m.rows().map(|r| r.len()).sum::<usize>() as f64;
            workers += m.n_workers();
        }
        let mean = sum / workers as f64;
        assert!(
            (mean - analytic).abs() / analytic < 0.05,
            "empirical {mean} vs analytic {analytic}"
        );
    }

    #[test]
    fn brc_degrees_clamp_to_available_batches() {
        // n = 4, delta = 0.25 gives b = 2 and only 2 batches, far fewer
        // than the maximum degree D + 1 = 11.
        let cfg = BrcConfig::new(4, 0.25, 0.1).unwrap();
        assert_eq!(cfg.n_batches, 2);
        for seed in 0..50u64 {
            let m = build_brc(&cfg, &RngSpec::new(seed)).unwrap();
            assert!(m.rows().all(|r| !r.is_empty() && r.len() <= 4));
        }
    }

    #[test]
    fn brc_builder_is_deterministic() {
        let cfg = BrcConfig::new(60, 0.1, 0.05).unwrap();
        let spec = RngSpec::with_stream(5, 2);
        assert_eq!(
            build_brc(&cfg, &spec).unwrap(),
            build_brc(&cfg, &spec).unwrap()
        );
    }

    #[test]
    fn forget_s_is_identity() {
        let m = build_forget_s(3).unwrap();
        for i in 0..3 {
            assert_eq!(m.row(i), &[(i, 1.0)]);
        }
        assert_eq!(m.computation_load(), 1);
        assert!(build_forget_s(0).is_err());
    }

    #[test]
    fn bernoulli_full_when_d_equals_n() {
        let m = build_bernoulli(5, 5, &RngSpec::new(3)).unwrap();
        assert!(m.rows().all(|r| r.len() == 5));
    }

    #[test]
    fn bernoulli_never_leaves_empty_rows_and_hits_mean() {
        let n = 40;
        let d = 4;
        let mut total = 0usize;
        let trials = 200u64;
        for seed in 0..trials {
            let m = build_bernoulli(n, d, &RngSpec::new(seed)).unwrap();
            assert!(m.rows().all(|r| !r.is_empty()));
            total += m.rows().map(|r| r.len()).sum::<usize>();
        }
        let mean = total as f64 / (trials as f64 * n as f64);
        // Conditioning on non-empty rows nudges the mean up by
        // n*p*(...) ~ d * P(empty), negligible at these sizes.
        let sigma = (d as f64 * (1.0 - d as f64 / n as f64) / (trials as f64 * n as f64)).sqrt();
        assert!(
            (mean - d as f64).abs() < 3.0 * sigma + 0.05,
            "mean {mean} vs d = {d}"
        );
    }
}
