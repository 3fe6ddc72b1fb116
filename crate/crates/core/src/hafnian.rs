//! Exact combinatorial kernels: pair partitions, Hafnians, loop Hafnians,
//! matching counts, matching/GBS polynomials and Gaussian moments.
//!
//! Everything here is exact enumeration. Hafnians recurse by matching the
//! lowest unmatched index against each remaining partner in ascending order
//! (the singleton branch first for loop Hafnians), with terms fed into a
//! compensated accumulator. The enumeration order is fixed and sequential,
//! so results are bitwise reproducible.

use crate::graph::Graph;
use crate::linalg::{self, KahanSum};
use ndarray::Array2;
use thiserror::Error;

/// Largest matrix size accepted by [`hafnian`] and [`pair_partitions`].
pub const MAX_PAIR_SIZE: usize = 20;
/// Largest matrix size accepted by [`loop_hafnian`] and
/// [`partitions_up_to_two`].
pub const MAX_LOOP_SIZE: usize = 16;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HafnianError {
    #[error("index set size {size} is odd")]
    OddSize { size: usize },
    #[error("size {size} exceeds the enumeration bound {bound}")]
    TooLarge { size: usize, bound: usize },
    #[error("matrix is not symmetric: |m[{row},{col}] - m[{col},{row}]| = {delta:.3e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },
    #[error("covariance matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
}

fn check_symmetric(m: &Array2<f64>) -> Result<(), HafnianError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hafnian input must be square");
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = (m[(i, j)] - m[(j, i)]).abs();
            if delta > SYMMETRY_TOLERANCE {
                return Err(HafnianError::NotSymmetric {
                    row: i,
                    col: j,
                    delta,
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Partition enumeration
// ---------------------------------------------------------------------------

/// One block of a partition into subsets of size one or two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionBlock {
    Singleton(usize),
    Pair(usize, usize),
}

struct Frame {
    mask: u64,
    /// Next branch to try: 0 = singleton (when allowed), `v + offset`
    /// otherwise, where `v` is the partner index.
    branch: usize,
    pushed: bool,
}

/// Lazy depth-first enumeration of partitions of `{0, .., n-1}` into blocks,
/// shared by the pair-only and the size-up-to-two variants.
pub struct PartitionIter {
    n: usize,
    allow_singletons: bool,
    stack: Vec<Frame>,
    blocks: Vec<PartitionBlock>,
    done: bool,
}

impl PartitionIter {
    fn new(n: usize, allow_singletons: bool) -> Self {
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self {
            n,
            allow_singletons,
            stack: vec![Frame {
                mask: full,
                branch: 0,
                pushed: false,
            }],
            blocks: Vec::new(),
            done: false,
        }
    }
}

impl Iterator for PartitionIter {
    type Item = Vec<PartitionBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let Some(top) = self.stack.len().checked_sub(1) else {
                self.done = true;
                return None;
            };
            if self.stack[top].pushed {
                self.blocks.pop();
                self.stack[top].pushed = false;
            }
            let mask = self.stack[top].mask;
            if mask == 0 {
                self.stack.pop();
                return Some(self.blocks.clone());
            }
            let u = mask.trailing_zeros() as usize;
            let rest = mask & !(1u64 << u);

            // Branch 0 is the singleton {u} when singletons are allowed;
            // branches after that pair u with each remaining index.
            let singleton_branch = if self.allow_singletons { 1 } else { 0 };
            let branch = self.stack[top].branch;
            if self.allow_singletons && branch == 0 {
                self.stack[top].branch = 1;
                self.stack[top].pushed = true;
                self.blocks.push(PartitionBlock::Singleton(u));
                self.stack.push(Frame {
                    mask: rest,
                    branch: 0,
                    pushed: false,
                });
                continue;
            }
            let mut v = branch - singleton_branch;
            while v < self.n && (rest & (1u64 << v)) == 0 {
                v += 1;
            }
            if v >= self.n {
                self.stack.pop();
                continue;
            }
            self.stack[top].branch = v + 1 + singleton_branch;
            self.stack[top].pushed = true;
            self.blocks.push(PartitionBlock::Pair(u, v));
            self.stack.push(Frame {
                mask: rest & !(1u64 << v),
                branch: 0,
                pushed: false,
            });
        }
    }
}

/// All partitions of `{0, .., n-1}` into unordered pairs.
///
/// Yields exactly `n! / ((n/2)! 2^(n/2))` partitions.
pub fn pair_partitions(n: usize) -> Result<PartitionIter, HafnianError> {
    if n % 2 != 0 {
        return Err(HafnianError::OddSize { size: n });
    }
    if n > MAX_PAIR_SIZE {
        return Err(HafnianError::TooLarge {
            size: n,
            bound: MAX_PAIR_SIZE,
        });
    }
    Ok(PartitionIter::new(n, false))
}

/// All partitions of `{0, .., n-1}` into subsets of size one or two.
///
/// The number of such partitions is the n-th involution number.
pub fn partitions_up_to_two(n: usize) -> Result<PartitionIter, HafnianError> {
    if n > MAX_LOOP_SIZE {
        return Err(HafnianError::TooLarge {
            size: n,
            bound: MAX_LOOP_SIZE,
        });
    }
    Ok(PartitionIter::new(n, true))
}

// ---------------------------------------------------------------------------
// Hafnians
// ---------------------------------------------------------------------------

fn hafnian_recurse(m: &Array2<f64>, mask: u64, partial: f64, acc: &mut KahanSum) {
    if mask == 0 {
        acc.add(partial);
        return;
    }
    let u = mask.trailing_zeros() as usize;
    let rest = mask & !(1u64 << u);
    let mut bits = rest;
    while bits != 0 {
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let w = m[(u, v)];
        if w != 0.0 {
            hafnian_recurse(m, rest & !(1u64 << v), partial * w, acc);
        }
    }
}

fn loop_hafnian_recurse(m: &Array2<f64>, mask: u64, partial: f64, acc: &mut KahanSum) {
    if mask == 0 {
        acc.add(partial);
        return;
    }
    let u = mask.trailing_zeros() as usize;
    let rest = mask & !(1u64 << u);
    let loop_weight = m[(u, u)];
    if loop_weight != 0.0 {
        loop_hafnian_recurse(m, rest, partial * loop_weight, acc);
    }
    let mut bits = rest;
    while bits != 0 {
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let w = m[(u, v)];
        if w != 0.0 {
            loop_hafnian_recurse(m, rest & !(1u64 << v), partial * w, acc);
        }
    }
}

pub(crate) fn hafnian_unchecked(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n % 2 != 0 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    let full = (1u64 << n) - 1;
    let mut acc = KahanSum::new();
    hafnian_recurse(m, full, 1.0, &mut acc);
    acc.value()
}

/// Hafnian of a symmetric matrix: the sum over all pair partitions of the
/// products of paired entries. Zero for odd sizes, one for the empty matrix.
pub fn hafnian(m: &Array2<f64>) -> Result<f64, HafnianError> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n > MAX_PAIR_SIZE {
        return Err(HafnianError::TooLarge {
            size: n,
            bound: MAX_PAIR_SIZE,
        });
    }
    Ok(hafnian_unchecked(m))
}

pub(crate) fn loop_hafnian_unchecked(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    let full = (1u64 << n) - 1;
    let mut acc = KahanSum::new();
    loop_hafnian_recurse(m, full, 1.0, &mut acc);
    acc.value()
}

/// Loop Hafnian: sums over partitions into pairs and singletons, where a
/// pair `(u, v)` contributes `m[u, v]` and a singleton `u` contributes the
/// diagonal entry `m[u, u]`. Equal to the plain Hafnian when the diagonal is
/// zero.
pub fn loop_hafnian(m: &Array2<f64>) -> Result<f64, HafnianError> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n > MAX_LOOP_SIZE {
        return Err(HafnianError::TooLarge {
            size: n,
            bound: MAX_LOOP_SIZE,
        });
    }
    Ok(loop_hafnian_unchecked(m))
}

// ---------------------------------------------------------------------------
// Matchings and polynomials
// ---------------------------------------------------------------------------

/// Weighted count of r-matchings (sets of `r` pairwise vertex-disjoint
/// edges), by direct backtracking over the edge list.
///
/// For unweighted graphs this is the integer number of independent edge sets
/// of size `r`; for weighted graphs each set contributes the product of its
/// edge weights. This enumerator is deliberately independent of the Hafnian
/// code path and serves as its oracle.
pub fn count_r_matchings(g: &Graph, r: usize) -> f64 {
    let n = g.num_nodes();
    if r > n / 2 {
        return 0.0;
    }
    if r == 0 {
        return 1.0;
    }
    let a = g.adjacency();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if a[(u, v)] != 0.0 {
                edges.push((u, v, a[(u, v)]));
            }
        }
    }

    fn recurse(
        edges: &[(usize, usize, f64)],
        start: usize,
        used: u64,
        remaining: usize,
        partial: f64,
        acc: &mut KahanSum,
    ) {
        if remaining == 0 {
            acc.add(partial);
            return;
        }
        // Not enough edges left to finish the matching.
        if start + remaining > edges.len() {
            return;
        }
        for e in start..edges.len() {
            let (u, v, w) = edges[e];
            if used & (1u64 << u) != 0 || used & (1u64 << v) != 0 {
                continue;
            }
            recurse(
                edges,
                e + 1,
                used | (1u64 << u) | (1u64 << v),
                remaining - 1,
                partial * w,
                acc,
            );
        }
    }

    let mut acc = KahanSum::new();
    recurse(&edges, 0, 0, r, 1.0, &mut acc);
    acc.value()
}

/// Coefficients `m(G, r)` of the matching polynomial
/// `sum_r (-1)^r m(G, r) x^(M - 2r)`, for `r = 0 ..= ceil(M/2)`.
///
/// Coefficients beyond `floor(M/2)` are structurally zero and kept so the
/// vector length depends only on the node count.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingPolynomial {
    pub num_nodes: usize,
    pub coefficients: Vec<f64>,
}

impl MatchingPolynomial {
    /// Evaluates `sum_r (-1)^r m(G, r) x^(M - 2r)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        signed_evaluate(self.num_nodes, &self.coefficients, x)
    }
}

/// Coefficients `g(G, r)`: sums of squared Hafnians over single-photon
/// events with `2r` detections. Substituting `g` for `m` in the matching
/// polynomial yields this polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct GbsPolynomial {
    pub num_nodes: usize,
    pub coefficients: Vec<f64>,
}

impl GbsPolynomial {
    pub fn evaluate(&self, x: f64) -> f64 {
        signed_evaluate(self.num_nodes, &self.coefficients, x)
    }
}

fn signed_evaluate(num_nodes: usize, coefficients: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (r, &c) in coefficients.iter().enumerate() {
        if 2 * r > num_nodes {
            break;
        }
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c * x.powi((num_nodes - 2 * r) as i32);
    }
    acc
}

fn check_polynomial_size(n: usize) -> Result<(), HafnianError> {
    if n > MAX_PAIR_SIZE {
        return Err(HafnianError::TooLarge {
            size: n,
            bound: MAX_PAIR_SIZE,
        });
    }
    Ok(())
}

/// Matching polynomial coefficients via the backtracking enumerator.
pub fn matching_polynomial(g: &Graph) -> Result<MatchingPolynomial, HafnianError> {
    let n = g.num_nodes();
    check_polynomial_size(n)?;
    let coefficients = (0..=n.div_ceil(2)).map(|r| count_r_matchings(g, r)).collect();
    Ok(MatchingPolynomial {
        num_nodes: n,
        coefficients,
    })
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn recurse(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if chosen.len() == k {
            f(chosen);
            return;
        }
        let needed = k - chosen.len();
        for i in start..=(n - needed) {
            chosen.push(i);
            recurse(n, k, i + 1, chosen, f);
            chosen.pop();
        }
    }
    if k > n {
        return;
    }
    let mut chosen = Vec::with_capacity(k);
    recurse(n, k, 0, &mut chosen, f);
}

fn principal_submatrix(m: &Array2<f64>, nodes: &[usize]) -> Array2<f64> {
    let k = nodes.len();
    let mut out = Array2::zeros((k, k));
    for (i, &ni) in nodes.iter().enumerate() {
        for (j, &nj) in nodes.iter().enumerate() {
            out[(i, j)] = m[(ni, nj)];
        }
    }
    out
}

/// GBS polynomial coefficients: `g(G, r)` sums `haf^2` over all induced
/// subgraphs on `2r` nodes.
pub fn gbs_polynomial(g: &Graph) -> Result<GbsPolynomial, HafnianError> {
    let n = g.num_nodes();
    check_polynomial_size(n)?;
    let a = g.adjacency();
    let mut coefficients = Vec::with_capacity(n.div_ceil(2) + 1);
    for r in 0..=n.div_ceil(2) {
        if 2 * r > n {
            coefficients.push(0.0);
            continue;
        }
        let mut acc = KahanSum::new();
        for_each_subset(n, 2 * r, &mut |nodes| {
            let sub = principal_submatrix(a, nodes);
            let h = hafnian_unchecked(&sub);
            acc.add(h * h);
        });
        coefficients.push(acc.value());
    }
    Ok(GbsPolynomial {
        num_nodes: n,
        coefficients,
    })
}

// ---------------------------------------------------------------------------
// Gaussian moments
// ---------------------------------------------------------------------------

/// Higher-order moment `E[x_{i1} x_{i2} ...]` of a zero-mean multivariate
/// normal with covariance `cov`, for the multiset of variable indices given
/// in `indices`. Zero for odd multiset sizes.
///
/// By Wick/Isserlis expansion this is the Hafnian of the covariance with
/// rows and columns repeated per index multiplicity.
pub fn isserlis_moment(cov: &Array2<f64>, indices: &[usize]) -> Result<f64, HafnianError> {
    check_symmetric(cov)?;
    let (w, _) = linalg::jacobi_eigh(cov).map_err(|_| HafnianError::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })?;
    let min_eigenvalue = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eigenvalue <= 0.0 {
        return Err(HafnianError::NotPositiveDefinite { min_eigenvalue });
    }
    if indices.len() % 2 != 0 {
        return Ok(0.0);
    }
    if indices.len() > MAX_PAIR_SIZE {
        return Err(HafnianError::TooLarge {
            size: indices.len(),
            bound: MAX_PAIR_SIZE,
        });
    }
    let k = indices.len();
    let mut repeated = Array2::zeros((k, k));
    for (u, &iu) in indices.iter().enumerate() {
        for (v, &iv) in indices.iter().enumerate() {
            assert!(iu < cov.nrows() && iv < cov.nrows(), "index out of range");
            repeated[(u, v)] = cov[(iu, iv)];
        }
    }
    Ok(hafnian_unchecked(&repeated))
}
