//! Monte Carlo estimation of decoding-failure probability.
//!
//! Each trial builds (or reuses) a coding matrix, samples which workers
//! straggle, decodes, and counts a failure when the residual exceeds
//! `eps * n`. Randomized schemes (BRC, Bernoulli) are re-drawn every
//! trial so the estimate covers the code ensemble; `fix_code` freezes a
//! single draw to measure one realized code instead. FRC and the
//! identity baseline are deterministic (up to the FRC group choice when
//! `d` does not divide `n`) and are always built once.
//!
//! Stream layout: with base spec `r`, the (possibly fixed) code uses
//! `r.substream(0)`; trial `t` draws its code from `r.substream(1 + 2t)`
//! and its straggler set from `r.substream(2 + 2t)`. Trials are therefore
//! independent of how they are scheduled onto threads, and results are
//! merged in trial order — output is identical at any thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::decode;
use crate::error::{Error, Result};
use crate::matrix::{CodingMatrix, ReceivedSet, SchemeTag};
use crate::rng::RngSpec;
use crate::schemes::{self, BrcConfig};

/// Which decoder a harness runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoderKind {
    /// Least-squares optimum (reference decoder, any scheme).
    #[serde(rename = "LS")]
    Ls,
    /// Batch peeling, run to exhaustion (target fraction 1).
    Peel,
    /// FRC range-tiling decoder; only valid on FRC matrices.
    FrcCombinatorial,
}

impl DecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Ls => "LS",
            DecoderKind::Peel => "Peel",
            DecoderKind::FrcCombinatorial => "FrcCombinatorial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Some(DecoderKind::Ls),
            "peel" => Some(DecoderKind::Peel),
            "frc" | "frccombinatorial" => Some(DecoderKind::FrcCombinatorial),
            _ => None,
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scheme plus its construction parameters, instantiable at any `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchemeSpec {
    Frc { d: usize },
    Brc { delta: f64, epsilon: f64 },
    ForgetS,
    Bernoulli { d: usize },
}

impl SchemeSpec {
    pub fn tag(&self) -> SchemeTag {
        match self {
            SchemeSpec::Frc { .. } => SchemeTag::Frc,
            SchemeSpec::Brc { .. } => SchemeTag::Brc,
            SchemeSpec::ForgetS => SchemeTag::ForgetS,
            SchemeSpec::Bernoulli { .. } => SchemeTag::Bernoulli,
        }
    }

    /// Does construction consume randomness that should be re-drawn per
    /// trial?
    pub fn randomized(&self) -> bool {
        matches!(self, SchemeSpec::Brc { .. } | SchemeSpec::Bernoulli { .. })
    }

    pub fn build(&self, n: usize, rng: &RngSpec) -> Result<CodingMatrix> {
        match *self {
            SchemeSpec::Frc { d } => schemes::build_frc(n, d, rng),
            SchemeSpec::Brc { delta, epsilon } => {
                let cfg = BrcConfig::new(n, delta, epsilon)?;
                schemes::build_brc(&cfg, rng)
            }
            SchemeSpec::ForgetS => schemes::build_forget_s(n),
            SchemeSpec::Bernoulli { d } => schemes::build_bernoulli(n, d, rng),
        }
    }
}

/// One harness run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McConfig {
    pub scheme: SchemeSpec,
    pub decoder: DecoderKind,
    pub n: usize,
    pub s: usize,
    /// Failure threshold: a trial fails when residual > `epsilon * n`.
    pub epsilon: f64,
    pub trials: usize,
    /// Freeze a single code draw instead of re-drawing per trial.
    pub fix_code: bool,
}

/// Aggregated trial statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialStats {
    pub scheme: SchemeTag,
    pub decoder: DecoderKind,
    pub n: usize,
    pub s: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub failures: usize,
    /// `failures / trials`.
    pub p_hat: f64,
    /// `3 * sqrt(p_hat (1 - p_hat) / trials)`.
    pub ci_halfwidth_3sigma: f64,
    pub mean_error: f64,
    /// Residuals rounded to the nearest integer, bucket -> count.
    pub error_histogram: BTreeMap<i64, u64>,
    pub seed: RngSpec,
}

/// Estimate `P(residual > eps * n)` over `cfg.trials` independent trials.
pub fn estimate_failure(cfg: &McConfig, rng: &RngSpec) -> Result<TrialStats> {
    if cfg.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if cfg.s >= cfg.n {
        return Err(Error::invalid(format!(
            "need s < n, got s = {}, n = {}",
            cfg.s, cfg.n
        )));
    }
    if cfg.decoder == DecoderKind::FrcCombinatorial && cfg.scheme.tag() != SchemeTag::Frc {
        return Err(Error::invalid(format!(
            "FrcCombinatorial decoder cannot run on a {} scheme",
            cfg.scheme.tag()
        )));
    }

    let fixed: Option<CodingMatrix> = if !cfg.scheme.randomized() || cfg.fix_code {
        Some(cfg.scheme.build(cfg.n, &rng.substream(0))?)
    } else {
        None
    };

    let residuals: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let t = t as u64;
            let drawn;
            let a = match &fixed {
                Some(a) => a,
                None => {
                    drawn = cfg.scheme.build(cfg.n, &rng.substream(1 + 2 * t))?;
                    &drawn
                }
            };
            let s_set = ReceivedSet::sample(cfg.n, cfg.s, &rng.substream(2 + 2 * t))?;
            trial_residual(a, &s_set, cfg.decoder)
        })
        .collect::<Result<Vec<f64>>>()?;

    // Sequential merge in trial order keeps the float sums independent of
    // the parallel partitioning.
    let threshold = cfg.epsilon * cfg.n as f64;
    let mut failures = 0usize;
    let mut sum = 0.0;
    let mut histogram = BTreeMap::new();
    for &r in &residuals {
        if r > threshold {
            failures += 1;
        }
        sum += r;
        *histogram.entry(r.round() as i64).or_insert(0u64) += 1;
    }
    let p_hat = failures as f64 / cfg.trials as f64;
    Ok(TrialStats {
        scheme: cfg.scheme.tag(),
        decoder: cfg.decoder,
        n: cfg.n,
        s: cfg.s,
        epsilon: cfg.epsilon,
        trials: cfg.trials,
        failures,
        p_hat,
        ci_halfwidth_3sigma: 3.0 * (p_hat * (1.0 - p_hat) / cfg.trials as f64).sqrt(),
        mean_error: sum / cfg.trials as f64,
        error_histogram: histogram,
        seed: *rng,
    })
}

fn trial_residual(a: &CodingMatrix, s_set: &ReceivedSet, decoder: DecoderKind) -> Result<f64> {
    match decoder {
        DecoderKind::Ls => Ok(decode::recovery_error_ls(&a.restrict(s_set)?)?.0),
        DecoderKind::Peel => Ok(decode::peel_residual(&a.restrict(s_set)?, 1.0)),
        DecoderKind::FrcCombinatorial => Ok(decode::decode_frc(a, s_set)?.residual_error),
    }
}

/// Sweep parameters for [`failure_curve`]: everything but the worker
/// counts and the rng.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurveConfig {
    pub scheme: SchemeTag,
    pub decoder: DecoderKind,
    /// Straggler fraction; each point runs `s = round(delta * n)`.
    pub delta: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub fix_code: bool,
}

/// Failure probability across a list of worker counts at a fixed
/// straggler fraction, with the per-`n` construction parameter chosen
/// automatically: FRC and Bernoulli use the sufficient load
/// [`bounds::frc_load`], BRC derives its batch size from `delta`.
///
/// Point `i` runs on `rng.substream(i * (2 * trials + 16))`, so points
/// never share streams with each other or with their trials.
pub fn failure_curve(
    cfg: &CurveConfig,
    n_list: &[usize],
    rng: &RngSpec,
) -> Result<Vec<TrialStats>> {
    if n_list.is_empty() {
        return Err(Error::invalid("need a non-empty n list"));
    }
    if !(0.0..1.0).contains(&cfg.delta) {
        return Err(Error::invalid(format!(
            "straggler fraction must lie in [0, 1), got {}",
            cfg.delta
        )));
    }
    let stride = 2 * cfg.trials as u64 + 16;
    let mut out = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let s = (cfg.delta * n as f64).round() as usize;
        let scheme = match cfg.scheme {
            SchemeTag::Frc => SchemeSpec::Frc {
                d: bounds::frc_load(n, s)?,
            },
            SchemeTag::Brc => SchemeSpec::Brc {
                delta: cfg.delta,
                epsilon: cfg.epsilon,
            },
            SchemeTag::ForgetS => SchemeSpec::ForgetS,
            SchemeTag::Bernoulli => SchemeSpec::Bernoulli {
                d: bounds::frc_load(n, s)?,
            },
        };
        let point = McConfig {
            scheme,
            decoder: cfg.decoder,
            n,
            s,
            epsilon: cfg.epsilon,
            trials: cfg.trials,
            fix_code: cfg.fix_code,
        };
        out.push(estimate_failure(&point, &rng.substream(i as u64 * stride))?);
    }
    Ok(out)
}
