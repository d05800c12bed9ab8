//! Sparse coding matrices and received (non-straggler) index sets.
//!
//! A [`CodingMatrix`] is the n-workers-by-n-partitions assignment matrix
//! `A`: row `i` lists the partitions worker `i` stores, with real
//! coefficients (every construction in this crate emits exactly 1.0).
//! Matrices are immutable after construction and are stored as per-row
//! sorted index lists — the decoders iterate rows, and density is `d/n`.
//! Column views are built on demand.
//!
//! Worker and partition indices are 0-based throughout the library. The
//! plain-text triplet serialization and the CLI use 1-based indices.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSpec;

/// Which construction produced a matrix. Decoders use this to reject
/// pairings that make no sense (e.g. the FRC combinatorial decoder on a
/// raptor code).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeTag {
    #[serde(rename = "FRC")]
    Frc,
    #[serde(rename = "BRC")]
    Brc,
    ForgetS,
    Bernoulli,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Frc => "FRC",
            SchemeTag::Brc => "BRC",
            SchemeTag::ForgetS => "ForgetS",
            SchemeTag::Bernoulli => "Bernoulli",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FRC" => Some(SchemeTag::Frc),
            "BRC" => Some(SchemeTag::Brc),
            "ForgetS" => Some(SchemeTag::ForgetS),
            "Bernoulli" => Some(SchemeTag::Bernoulli),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sparse worker-by-partition coding matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CodingMatrix {
    n_workers: usize,
    n_partitions: usize,
    /// Per worker: sorted `(partition, coefficient)` pairs, no zeros stored.
    rows: Vec<Vec<(usize, f64)>>,
    scheme: SchemeTag,
    /// For batch codes: partition -> batch id (dense ids `0..n_batches`).
    batch_map: Option<Vec<usize>>,
}

impl CodingMatrix {
    /// Build a matrix from per-worker rows, validating the storage
    /// invariants: indices in range and strictly increasing, no explicit
    /// zeros, and — when a batch map is present — every row the union of
    /// complete batches.
    pub fn from_rows(
        scheme: SchemeTag,
        n_partitions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        batch_map: Option<Vec<usize>>,
    ) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(j, c) in row {
                if j >= n_partitions {
                    return Err(Error::invalid(format!(
                        "row {i}: partition index {j} out of range (n_partitions = {n_partitions})"
                    )));
                }
                if c == 0.0 {
                    return Err(Error::invalid(format!(
                        "row {i}: explicit zero coefficient at partition {j}"
                    )));
                }
                if let Some(p) = prev {
                    if j <= p {
                        return Err(Error::invalid(format!(
                            "row {i}: partition indices not strictly increasing at {j}"
                        )));
                    }
                }
                prev = Some(j);
            }
        }

        if let Some(map) = &batch_map {
            validate_batch_map(map, n_partitions, &rows)?;
        }

        Ok(CodingMatrix {
            n_workers: rows.len(),
            n_partitions,
            rows,
            scheme,
            batch_map,
        })
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn n_partitions(&self) -> usize {
        self.n_partitions
    }

    pub fn scheme(&self) -> SchemeTag {
        self.scheme
    }

    /// Partition -> batch id assignment, if this is a batch code.
    pub fn batch_map(&self) -> Option<&[usize]> {
        self.batch_map.as_deref()
    }

    pub fn n_batches(&self) -> Option<usize> {
        self.batch_map
            .as_ref()
            .map(|m| m.iter().copied().max().map_or(0, |b| b + 1))
    }

    pub fn row(&self, worker: usize) -> &[(usize, f64)] {
        &self.rows[worker]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    /// Support size of a worker's row (how many partitions it stores).
    pub fn row_support(&self, worker: usize) -> usize {
        self.rows[worker].len()
    }

    /// Computation load: the maximum number of partitions stored by any
    /// worker (maximum row support).
    pub fn computation_load(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Row submatrix `A_S`: the rows of the received workers, in the order
    /// of `S` (ascending). Column dimension is unchanged, and the scheme
    /// tag and batch map carry over.
    pub fn restrict(&self, received: &ReceivedSet) -> Result<CodingMatrix> {
        if let Some(&max) = received.indices().last() {
            if max >= self.n_workers {
                return Err(Error::invalid(format!(
                    "received set contains worker {max}, matrix has {} workers",
                    self.n_workers
                )));
            }
        }
        let rows = received
            .indices()
            .iter()
            .map(|&i| self.rows[i].clone())
            .collect();
        Ok(CodingMatrix {
            n_workers: received.len(),
            n_partitions: self.n_partitions,
            rows,
            scheme: self.scheme,
            batch_map: self.batch_map.clone(),
        })
    }

    /// Partitions whose column of this matrix has empty support — the
    /// coordinates no received row can reach.
    pub fn lost_partitions(&self) -> Vec<usize> {
        let mut covered = vec![false; self.n_partitions];
        for row in &self.rows {
            for &(j, _) in row {
                covered[j] = true;
            }
        }
        (0..self.n_partitions).filter(|&j| !covered[j]).collect()
    }

    /// Column views: for every partition, the workers whose rows store it.
    pub fn column_supports(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n_partitions];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                cols[j].push(i);
            }
        }
        cols
    }

    /// Serialize in the plain-text triplet format:
    ///
    /// ```text
    /// n_workers n_partitions nnz scheme_tag
    /// row col coeff            (one line per nonzero, 1-based indices)
    /// batch col batch_id       (one line per partition, batch codes only)
    /// ```
    pub fn write_triplet<W: Write>(&self, mut w: W) -> Result<()> {
        let nnz: usize = self.rows.iter().map(Vec::len).sum();
        writeln!(
            w,
            "{} {} {} {}",
            self.n_workers, self.n_partitions, nnz, self.scheme
        )?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                writeln!(w, "{} {} {}", i + 1, j + 1, c)?;
            }
        }
        if let Some(map) = &self.batch_map {
            for (j, &b) in map.iter().enumerate() {
                writeln!(w, "batch {} {}", j + 1, b + 1)?;
            }
        }
        Ok(())
    }

    pub fn to_triplet_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_triplet(&mut buf)
            .expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("triplet output is ASCII")
    }

    /// Parse the triplet format produced by [`CodingMatrix::write_triplet`].
    pub fn read_triplet<R: BufRead>(r: R) -> Result<CodingMatrix> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "header must be `n_workers n_partitions nnz scheme_tag`, got {header:?}"
            )));
        }
        let n_workers: usize = parse_field(fields[0], "n_workers")?;
        let n_partitions: usize = parse_field(fields[1], "n_partitions")?;
        let nnz: usize = parse_field(fields[2], "nnz")?;
        let scheme = SchemeTag::parse(fields[3])
            .ok_or_else(|| Error::Parse(format!("unknown scheme tag {:?}", fields[3])))?;

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_workers];
        let mut batch_map: Option<Vec<usize>> = None;
        let mut seen_nnz = 0usize;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "batch" {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad batch line {line:?}")));
                }
                let col: usize = parse_field(fields[1], "batch col")?;
                let batch: usize = parse_field(fields[2], "batch id")?;
                if col == 0 || col > n_partitions || batch == 0 {
                    return Err(Error::Parse(format!("batch line out of range: {line:?}")));
                }
                batch_map.get_or_insert_with(|| vec![usize::MAX; n_partitions])[col - 1] =
                    batch - 1;
            } else {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad triplet line {line:?}")));
                }
                let row: usize = parse_field(fields[0], "row")?;
                let col: usize = parse_field(fields[1], "col")?;
                let coeff: f64 = fields[2]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad coefficient in {line:?}")))?;
                if row == 0 || row > n_workers || col == 0 || col > n_partitions {
                    return Err(Error::Parse(format!("triplet out of range: {line:?}")));
                }
                rows[row - 1].push((col - 1, coeff));
                seen_nnz += 1;
            }
        }
        if seen_nnz != nnz {
            return Err(Error::Parse(format!(
                "header promises {nnz} nonzeros, file has {seen_nnz}"
            )));
        }
        if let Some(map) = &batch_map {
            if map.contains(&usize::MAX) {
                return Err(Error::Parse(
                    "batch map present but does not cover every partition".into(),
                ));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        CodingMatrix::from_rows(scheme, n_partitions, rows, batch_map)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what}: {s:?}")))
}

fn validate_batch_map(
    map: &[usize],
    n_partitions: usize,
    rows: &[Vec<(usize, f64)>],
) -> Result<()> {
    if map.len() != n_partitions {
        return Err(Error::invalid(format!(
            "batch map covers {} partitions, matrix has {n_partitions}",
            map.len()
        )));
    }
    let n_batches = map.iter().copied().max().map_or(0, |b| b + 1);
    let mut batch_size = vec![0usize; n_batches];
    for &b in map {
        batch_size[b] += 1;
    }
    if batch_size.contains(&0) {
        return Err(Error::invalid("batch ids must be dense (no empty batch)"));
    }
    // Each row must contain either all partitions of a batch or none.
    for (i, row) in rows.iter().enumerate() {
        let mut per_batch = vec![0usize; n_batches];
        for &(j, _) in row {
            per_batch[map[j]] += 1;
        }
        for (b, &count) in per_batch.iter().enumerate() {
            if count != 0 && count != batch_size[b] {
                return Err(Error::invalid(format!(
                    "row {i} covers batch {b} partially ({count} of {})",
                    batch_size[b]
                )));
            }
        }
    }
    Ok(())
}

/// The sorted index set `S` of workers whose results arrived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceivedSet {
    indices: Vec<usize>,
}

impl ReceivedSet {
    /// Wrap an index set; duplicates are rejected, order is normalized.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("received set contains duplicate workers"));
        }
        Ok(ReceivedSet { indices })
    }

    /// Uniformly sample which `n - s` of `n` workers respond.
    ///
    /// Every (n-s)-subset is equally likely; the draw is a pure function
    /// of `rng`.
    pub fn sample(n: usize, s: usize, rng: &RngSpec) -> Result<Self> {
        Self::sample_with(n, s, &mut rng.rng())
    }

    /// As [`ReceivedSet::sample`], drawing from a caller-managed generator.
    pub fn sample_with<R: rand::Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<Self> {
        if s >= n {
            return Err(Error::invalid(format!("need s < n, got s = {s}, n = {n}")));
        }
        let mut indices = rand::seq::index::sample(rng, n, n - s).into_vec();
        indices.sort_unstable();
        Ok(ReceivedSet { indices })
    }

    /// The received set whose stragglers are exactly `stragglers`.
    pub fn from_stragglers(n: usize, stragglers: &[usize]) -> Result<Self> {
        let stragglers: BTreeSet<usize> = stragglers.iter().copied().collect();
        if let Some(&max) = stragglers.iter().next_back() {
            if max >= n {
                return Err(Error::invalid(format!(
                    "straggler index {max} out of range for n = {n}"
                )));
            }
        }
        Ok(ReceivedSet {
            indices: (0..n).filter(|i| !stragglers.contains(i)).collect(),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, worker: usize) -> bool {
        self.indices.binary_search(&worker).is_ok()
    }
}
