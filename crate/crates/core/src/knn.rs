//! Exact brute-force top-k search under (penalized) dot-product scores.
//!
//! Scores are computed block by block with dense matrix products. The block
//! grid is fixed and independent of the thread count, so results are
//! bitwise reproducible.

use ndarray::{s, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

const QUERY_BLOCK: usize = 64;
const POOL_BLOCK: usize = 8192;

/// Ranked `(pool index, score)` lists, one per query.
pub type Neighbors = Vec<Vec<(usize, f64)>>;

struct TopK {
    k: usize,
    items: Vec<(usize, f64)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    // Candidates arrive in increasing index order, so a strict comparison
    // keeps the lower index on ties.
    fn offer(&mut self, idx: usize, score: f64) {
        if self.items.len() == self.k {
            if !(score > self.items[self.k - 1].1) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&(_, s)| s >= score);
        self.items.insert(pos, (idx, score));
    }
}

/// Top-`k` pool rows for each query under `scale * <q, p_j> - penalty[j]`.
///
/// Ties are broken by lower pool index.
pub fn top_k_scored(
    queries: ArrayView2<'_, f64>,
    pool: ArrayView2<'_, f64>,
    k: usize,
    scale: f64,
    pool_penalty: Option<&[f64]>,
) -> Result<Neighbors> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > pool.nrows() {
        return Err(Error::KTooLarge {
            k,
            pool: pool.nrows(),
        });
    }
    if queries.ncols() != pool.ncols() {
        return Err(Error::DimensionMismatch {
            expected: pool.ncols(),
            actual: queries.ncols(),
        });
    }
    if let Some(p) = pool_penalty {
        assert_eq!(p.len(), pool.nrows(), "one penalty per pool row");
    }
    let starts: Vec<usize> = (0..queries.nrows()).step_by(QUERY_BLOCK).collect();
    let blocks: Vec<Neighbors> = starts
        .par_iter()
        .map(|&qs| {
            let qe = (qs + QUERY_BLOCK).min(queries.nrows());
            let qblock = queries.slice(s![qs..qe, ..]);
            let mut tops: Vec<TopK> = (qs..qe).map(|_| TopK::new(k)).collect();
            for ps in (0..pool.nrows()).step_by(POOL_BLOCK) {
                let pe = (ps + POOL_BLOCK).min(pool.nrows());
                let scores = qblock.dot(&pool.slice(s![ps..pe, ..]).t());
                for (top, row) in tops.iter_mut().zip(scores.axis_iter(Axis(0))) {
                    for (j, &dot) in row.iter().enumerate() {
                        let idx = ps + j;
                        let pen = pool_penalty.map_or(0.0, |p| p[idx]);
                        top.offer(idx, scale * dot - pen);
                    }
                }
            }
            tops.into_iter().map(|t| t.items).collect()
        })
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

/// Exact `k` nearest pool rows by dot product.
pub fn nearest(queries: ArrayView2<'_, f64>, pool: ArrayView2<'_, f64>, k: usize) -> Result<Neighbors> {
    top_k_scored(queries, pool, k, 1.0, None)
}

/// Mean dot product of each query with its `k` nearest pool rows.
pub fn mean_top_k_similarity(queries: ArrayView2<'_, f64>, pool: ArrayView2<'_, f64>, k: usize) -> Result<Vec<f64>> {
    Ok(nearest(queries, pool, k)?
        .into_iter()
        .map(|nb| nb.iter().map(|&(_, s)| s).sum::<f64>() / k as f64)
        .collect())
}
