//! Order-fixed floating point reductions.
//!
//! Every sum in the crate that feeds a reported number goes through these
//! helpers. The reduction tree depends only on the number of terms, never on
//! the thread count, so results are bit-identical under any rayon pool.

use rayon::prelude::*;

const LEAF: usize = 64;

/// Pairwise (balanced tree) sum of `term(i)` for `i in 0..len`.
pub fn pairwise<F: Fn(usize) -> f64>(len: usize, term: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= LEAF {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += term(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    if len == 0 {
        0.0
    } else {
        rec(0, len, &term)
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_slice(values: &[f64]) -> f64 {
    pairwise(values.len(), |i| values[i])
}

/// Parallel evaluation of `term(i)` followed by a pairwise reduction.
///
/// Terms are computed in parallel and stored, then reduced sequentially in
/// index order; the result does not depend on the pool size.
pub fn par_pairwise<F: Fn(usize) -> f64 + Sync>(len: usize, term: F) -> f64 {
    let values: Vec<f64> = (0..len).into_par_iter().map(&term).collect();
    pairwise_slice(&values)
}
