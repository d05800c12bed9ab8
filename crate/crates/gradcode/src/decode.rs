//! Decoders for received submatrices.
//!
//! Given the received rows `A_S`, the master wants weights `u` with
//! `A_S^T u` as close to the all-ones vector as possible: the recovered
//! aggregate is then `u^T g~_S`. Three routes are provided:
//!
//! - [`recovery_error_ls`]: the least-squares optimum
//!   `min_u ||A_S^T u - 1_n||^2` via a pivoted QR solve — the reference
//!   decoder every other route is measured against.
//! - [`decode_frc`]: the combinatorial decoder for fractional repetition
//!   codes — pick surviving workers whose partition ranges tile `[0, n)`
//!   and sum them with weight one.
//! - [`peel_decode`]: iterative peeling over batches for raptor-style
//!   codes. Ripple rows (exactly one unresolved batch) resolve that batch,
//!   which is then cleared from every other row (0/1 arithmetic).
//!
//! [`exact_decodable`] tests `err(A_S) = 0` independently of the LS solve,
//! by comparing the rank of `A_S^T` against the rank of `[A_S^T | 1_n]`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CodingMatrix, ReceivedSet, SchemeTag};

/// Residuals below this are reported as exactly zero, and pivot
/// magnitudes below this fraction of the largest are treated as
/// rank-deficient. The matrices are 0/1, so conditioning is benign.
const RANK_TOL: f64 = 1e-9;

/// What a decoder recovered and how.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecodeOutcome {
    /// Partitions whose partial gradients are contained in the aggregate.
    pub recovered_partitions: Vec<usize>,
    /// Per-received-row weights `u`: the aggregate is `u^T g~_S`.
    pub coefficients: Vec<f64>,
    /// `||A_S^T u - 1_n||^2` for the produced `u`. For the combinatorial
    /// decoders this equals the number of unrecovered partitions.
    pub residual_error: f64,
    /// Whether the decoder hit its own completion criterion (full tiling
    /// for FRC, target fraction for peeling).
    pub success: bool,
    /// Peeling only: batch ids in the order they were resolved.
    pub recovery_order: Vec<usize>,
}

/// Least-squares recovery error and a minimizing weight vector.
///
/// Solves `min_u ||A_S^T u - 1_n||^2` through a column-pivoted Householder
/// QR of the transposed (`n x |S|`) system. Replicated workers make the
/// system rank deficient; the pivoted factorization exposes the numerical
/// rank and a basic minimizer. Errors below `1e-9` are clipped to zero.
pub fn recovery_error_ls(a_s: &CodingMatrix) -> Result<(f64, Vec<f64>)> {
    if a_s.n_workers() == 0 {
        return Err(Error::invalid(
            "least-squares decode needs at least one row",
        ));
    }
    let m = transposed_dense(a_s);
    let ones = DVector::from_element(a_s.n_partitions(), 1.0);
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let rank = rank_from_diagonal(&r);
    // Solve R[..rank, ..rank] z = (Q^T b)[..rank], zeros elsewhere, then
    // undo the column permutation: M P = Q R, so u = P z.
    let c = qr.q().transpose() * &ones;
    let mut u = DVector::zeros(m.ncols());
    for i in (0..rank).rev() {
        let mut acc = c[i];
        for j in i + 1..rank {
            acc -= r[(i, j)] * u[j];
        }
        u[i] = acc / r[(i, i)];
    }
    qr.p().inv_permute_rows(&mut u);
    let residual = (&m * &u - &ones).norm_squared();
    let residual = if residual < RANK_TOL { 0.0 } else { residual };
    Ok((residual, u.iter().cloned().collect()))
}

/// Is the all-ones vector in the row space of `A_S`?
///
/// Tested by rank comparison of `A_S^T` and `[A_S^T | 1_n]`, each rank
/// read off a column-pivoted QR with pivots below `1e-9` of the largest
/// treated as zero. This is the zero-error condition checked
/// independently of the LS residual.
pub fn exact_decodable(a_s: &CodingMatrix) -> bool {
    let m = a_s.n_workers();
    let base = transposed_dense(a_s);
    let augmented = base.clone().insert_column(m, 1.0);
    rank_of(base) == rank_of(augmented)
}

fn rank_of(m: DMatrix<f64>) -> usize {
    rank_from_diagonal(&m.col_piv_qr().r())
}

/// Numerical rank from the pivoted R factor: pivoting orders the
/// diagonal by decreasing magnitude, so count leading entries above the
/// relative tolerance.
fn rank_from_diagonal(r: &DMatrix<f64>) -> usize {
    let k = r.nrows().min(r.ncols());
    if k == 0 {
        return 0;
    }
    let largest = r[(0, 0)].abs();
    if largest == 0.0 {
        return 0;
    }
    (0..k)
        .take_while(|&i| r[(i, i)].abs() > RANK_TOL * largest)
        .count()
}

fn transposed_dense(a_s: &CodingMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a_s.n_partitions(), a_s.n_workers());
    for (i, row) in a_s.rows().enumerate() {
        for &(j, c) in row {
            m[(j, i)] = c;
        }
    }
    m
}

/// Combinatorial decoder for fractional repetition codes.
///
/// Selects surviving workers whose partition ranges exactly tile the
/// partition axis, preferring the lowest-indexed surviving replica of
/// every block; the aggregate is the plain sum of the selected rows. On
/// failure the selection maximizes disjoint coverage, `residual_error` is
/// the number of uncovered partitions, and `recovered_partitions` lists
/// the covered ones.
pub fn decode_frc(a: &CodingMatrix, received: &ReceivedSet) -> Result<DecodeOutcome> {
    if a.scheme() != SchemeTag::Frc {
        return Err(Error::invalid(format!(
            "combinatorial FRC decode applied to a {} matrix",
            a.scheme()
        )));
    }
    if let Some(&max) = received.indices().last() {
        if max >= a.n_workers() {
            return Err(Error::invalid(format!(
                "received set contains worker {max}, matrix has {} workers",
                a.n_workers()
            )));
        }
    }
    let n = a.n_partitions();

    // Surviving rows as contiguous [start, end) ranges with unit weight.
    let mut starts: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // start -> (end, row-in-S)
    for (pos, &w) in received.indices().iter().enumerate() {
        let row = a.row(w);
        if row.is_empty() {
            continue;
        }
        let start = row[0].0;
        for (offset, &(j, c)) in row.iter().enumerate() {
            if j != start + offset || c != 1.0 {
                return Err(Error::invalid(format!(
                    "worker {w}: row is not a unit-coefficient contiguous range"
                )));
            }
        }
        starts[start].push((start + row.len(), pos));
    }

    // Max-coverage tiling by disjoint ranges, scanning right to left.
    // `cover[q]` = best number of covered partitions in [q, n). Received
    // rows were inserted in ascending worker order, so on ties the
    // lowest-indexed surviving replica wins.
    #[derive(Clone, Copy)]
    enum Choice {
        Skip,
        Take { pos: usize, end: usize },
    }
    let mut cover = vec![0usize; n + 1];
    let mut choice = vec![Choice::Skip; n + 1];
    for q in (0..n).rev() {
        let mut best = cover[q + 1];
        let mut ch = Choice::Skip;
        for &(end, pos) in &starts[q] {
            let cand = (end - q) + cover[end];
            let take_on_tie = cand == best && matches!(ch, Choice::Skip);
            if cand > best || take_on_tie {
                best = cand;
                ch = Choice::Take { pos, end };
            }
        }
        cover[q] = best;
        choice[q] = ch;
    }

    let mut coefficients = vec![0.0; received.len()];
    let mut recovered = Vec::with_capacity(cover[0]);
    let mut q = 0;
    while q < n {
        match choice[q] {
            Choice::Skip => q += 1,
            Choice::Take { pos, end } => {
                coefficients[pos] = 1.0;
                recovered.extend(q..end);
                q = end;
            }
        }
    }
    debug_assert_eq!(recovered.len(), cover[0]);

    let covered = cover[0];
    Ok(DecodeOutcome {
        recovered_partitions: recovered,
        coefficients,
        residual_error: (n - covered) as f64,
        success: covered == n,
        recovery_order: Vec::new(),
    })
}

/// Peeling decoder over batches.
///
/// Rows are interpreted in batch space (via the matrix's batch map, or
/// one batch per partition when absent). Repeatedly: take the
/// lowest-indexed ripple row — a row with exactly one unresolved batch —
/// mark that batch resolved, and clear it from every other row that
/// contains it. Stops once the recovered partition count reaches
/// `target_fraction * n` or no ripple remains; running with target `1.0`
/// peels as far as the received rows allow.
///
/// `coefficients` accumulates, per resolved batch, the implied +-1
/// combination of received rows, so `u^T g~_S` equals the sum of the
/// recovered batch gradients without re-running the decoder.
pub fn peel_decode(a_s: &CodingMatrix, target_fraction: f64) -> DecodeOutcome {
    peel_core(a_s, target_fraction, true, None)
}

/// Residual-only peeling (no coefficient tracking) for tight Monte Carlo
/// loops.
pub(crate) fn peel_residual(a_s: &CodingMatrix, target_fraction: f64) -> f64 {
    peel_core(a_s, target_fraction, false, None).residual_error
}

/// `shuffle_seed` randomizes ripple selection; outcome-equality with the
/// default rule is asserted by the confluence tests.
pub(crate) fn peel_core(
    a_s: &CodingMatrix,
    target_fraction: f64,
    track_coefficients: bool,
    shuffle_seed: Option<u64>,
) -> DecodeOutcome {
    use rand::prelude::*;

    let n = a_s.n_partitions();
    let n_rows = a_s.n_workers();

    // Batch layout: explicit map, or every partition its own batch.
    let (n_batches, batch_of): (usize, Box<dyn Fn(usize) -> usize>) = match a_s.batch_map() {
        Some(map) => {
            let map = map.to_vec();
            let nb = a_s.n_batches().unwrap_or(0);
            (nb, Box::new(move |j| map[j]))
        }
        None => (n, Box::new(|j| j)),
    };
    let mut batch_partitions: Vec<Vec<usize>> = vec![Vec::new(); n_batches];
    for j in 0..n {
        batch_partitions[batch_of(j)].push(j);
    }

    let mut row_batches: Vec<Vec<usize>> = Vec::with_capacity(n_rows);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_batches];
    for (i, row) in a_s.rows().enumerate() {
        let mut bs: Vec<usize> = row.iter().map(|&(j, _)| batch_of(j)).collect();
        bs.sort_unstable();
        bs.dedup();
        for &b in &bs {
            adjacency[b].push(i);
        }
        row_batches.push(bs);
    }

    let mut remaining: Vec<usize> = row_batches.iter().map(Vec::len).collect();
    let mut ripples: BTreeSet<usize> = (0..n_rows).filter(|&i| remaining[i] == 1).collect();
    let mut resolved = vec![false; n_batches];
    let mut combos: Vec<Option<Vec<f64>>> = vec![None; n_batches];
    let mut order = Vec::new();
    let mut recovered_count = 0usize;
    let needed = target_fraction * n as f64 - 1e-9;
    let mut shuffle_rng = shuffle_seed.map(rand_chacha::ChaCha12Rng::seed_from_u64);

    while (recovered_count as f64) < needed {
        let row = match &mut shuffle_rng {
            None => match ripples.iter().next() {
                Some(&r) => r,
                None => break,
            },
            Some(rng) => {
                if ripples.is_empty() {
                    break;
                }
                let k = rng.gen_range(0..ripples.len());
                *ripples.iter().nth(k).expect("index in range")
            }
        };
        ripples.remove(&row);
        let batch = *row_batches[row]
            .iter()
            .find(|&&b| !resolved[b])
            .expect("ripple row has one unresolved batch");

        if track_coefficients {
            let mut combo = vec![0.0; n_rows];
            combo[row] = 1.0;
            for &b in &row_batches[row] {
                if b != batch {
                    let prior = combos[b].as_ref().expect("previously resolved batch");
                    for (c, p) in combo.iter_mut().zip(prior) {
                        *c -= p;
                    }
                }
            }
            combos[batch] = Some(combo);
        }
        resolved[batch] = true;
        order.push(batch);
        recovered_count += batch_partitions[batch].len();

        for &k in &adjacency[batch] {
            remaining[k] -= 1;
            match remaining[k] {
                1 => {
                    ripples.insert(k);
                }
                0 => {
                    ripples.remove(&k);
                }
                _ => {}
            }
        }
    }

    let mut coefficients = vec![0.0; n_rows];
    if track_coefficients {
        for combo in combos.iter().flatten() {
            for (u, c) in coefficients.iter_mut().zip(combo) {
                *u += c;
            }
        }
    }
    let mut recovered_partitions: Vec<usize> = order
        .iter()
        .flat_map(|&b| batch_partitions[b].iter().copied())
        .collect();
    recovered_partitions.sort_unstable();

    DecodeOutcome {
        recovered_partitions,
        coefficients,
        residual_error: (n - recovered_count) as f64,
        success: recovered_count as f64 >= needed,
        recovery_order: order,
    }
}
