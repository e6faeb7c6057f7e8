//! Word translation by nearest-neighbor and CSLS retrieval.
//!
//! CSLS scores a query `q` against a candidate `t` as
//!
//! ```text
//! csls(q, t) = 2 <q, t> - r_pool(q) - r_rev(t)
//! ```
//!
//! where `r_pool(q)` is the mean similarity of `q` to its `k` nearest pool
//! rows and `r_rev(t)` the mean similarity of `t` to its `k` nearest rows
//! of the reverse pool (the query-side space). Candidates that are close to
//! everything (hubs) carry a large `r_rev` and get pushed down.

use std::fmt;
use std::str::FromStr;

use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::knn::{mean_top_k_similarity, nearest, top_k_scored, Neighbors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Nn,
    Csls,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Nn => "nn",
            Criterion::Csls => "csls",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nn" => Ok(Criterion::Nn),
            "csls" => Ok(Criterion::Csls),
            _ => Err(Error::InvalidArgument(format!("unknown criterion {s:?}"))),
        }
    }
}

/// Ranked candidates for one query word, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub query: String,
    pub candidates: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub rankings: Vec<Ranking>,
}

impl RetrievalResult {
    /// Number of candidates per query.
    pub fn depth(&self) -> usize {
        self.rankings.iter().map(|r| r.candidates.len()).min().unwrap_or(0)
    }

    fn build(queries: &EmbeddingSpace, pool: &EmbeddingSpace, nb: Neighbors, offset: Option<&[f64]>) -> Self {
        let rankings = nb
            .into_iter()
            .enumerate()
            .map(|(i, row)| Ranking {
                query: queries.words()[i].clone(),
                candidates: row
                    .into_iter()
                    .map(|(j, s)| (pool.words()[j].clone(), s - offset.map_or(0.0, |o| o[i])))
                    .collect(),
            })
            .collect();
        RetrievalResult { rankings }
    }
}

fn check_normalized(space: &EmbeddingSpace, what: &str) {
    if !space.is_l2_normalized() {
        log::debug!("{what} space is not flagged as l2-normalized");
    }
}

/// Exact top-`k` pool words for each query by dot product. Ties go to the
/// lower pool index.
pub fn nn_retrieve(queries: &EmbeddingSpace, pool: &EmbeddingSpace, k: usize) -> Result<RetrievalResult> {
    check_normalized(queries, "query");
    check_normalized(pool, "pool");
    let nb = nearest(queries.matrix().view(), pool.matrix().view(), k)?;
    Ok(RetrievalResult::build(queries, pool, nb, None))
}

/// CSLS penalty terms `(r_pool per query, r_rev per pool row)`.
pub fn csls_penalties(
    queries: &EmbeddingSpace,
    pool: &EmbeddingSpace,
    reverse_pool: &EmbeddingSpace,
    k_neighbors: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let r_pool = mean_top_k_similarity(queries.matrix().view(), pool.matrix().view(), k_neighbors)?;
    let r_rev = mean_top_k_similarity(pool.matrix().view(), reverse_pool.matrix().view(), k_neighbors)?;
    Ok((r_pool, r_rev))
}

/// Exact top-`k_rank` pool words for each query by CSLS score.
pub fn csls_retrieve(
    queries: &EmbeddingSpace,
    pool: &EmbeddingSpace,
    reverse_pool: &EmbeddingSpace,
    k_rank: usize,
    k_neighbors: usize,
) -> Result<RetrievalResult> {
    check_normalized(queries, "query");
    check_normalized(pool, "pool");
    let (r_pool, r_rev) = csls_penalties(queries, pool, reverse_pool, k_neighbors)?;
    let nb = top_k_scored(queries.matrix().view(), pool.matrix().view(), k_rank, 2.0, Some(&r_rev))?;
    Ok(RetrievalResult::build(queries, pool, nb, Some(&r_pool)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(prefix: &str, m: Array2<f64>) -> EmbeddingSpace {
        let words = (0..m.nrows()).map(|i| format!("{prefix}{i}")).collect();
        EmbeddingSpace::new(words, m).unwrap()
    }

    #[test]
    fn nn_examples() {
        let pool = space("p", array![[1.0, 0.0], [0.0, 1.0]]);
        let q = space("q", array![[0.8, 0.6]]);
        let r = nn_retrieve(&q, &pool, 2).unwrap();
        assert_eq!(r.rankings[0].candidates, vec![("p0".to_string(), 0.8), ("p1".to_string(), 0.6)]);

        let q = space("q", array![[0.0, 1.0]]);
        let r = nn_retrieve(&q, &pool, 1).unwrap();
        assert_eq!(r.rankings[0].candidates, vec![("p1".to_string(), 1.0)]);
        assert!(matches!(nn_retrieve(&q, &pool, 3), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn csls_single_pair() {
        let q = space("q", array![[1.0, 0.0]]);
        let p = space("p", array![[1.0, 0.0]]);
        let r = csls_retrieve(&q, &p, &q, 1, 1).unwrap();
        assert_eq!(r.rankings[0].candidates, vec![("p0".to_string(), 0.0)]);
    }

    #[test]
    fn csls_three_by_three_by_hand() {
        // unit vectors at angles 0, 60 and 90 degrees
        let h = 3f64.sqrt() / 2.0;
        let q = space("q", array![[1.0, 0.0], [0.5, h], [0.0, 1.0]]);
        let p = space("p", array![[0.0, 1.0], [h, 0.5], [1.0, 0.0]]);
        let k = 2;
        let r = csls_retrieve(&q, &p, &q, 3, k).unwrap();
        // exhaustive scoring with explicit loops
        let dot = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| a[0] * b[0] + a[1] * b[1];
        let mean_top = |v: &ndarray::ArrayView1<f64>, others: &Array2<f64>| {
            let mut s: Vec<f64> = others.rows().into_iter().map(|o| dot(*v, o)).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            s[..k].iter().sum::<f64>() / k as f64
        };
        for (i, ranking) in r.rankings.iter().enumerate() {
            let qi = q.matrix().row(i);
            let rq = mean_top(&qi, p.matrix());
            let mut all: Vec<(String, f64)> = (0..3)
                .map(|j| {
                    let pj = p.matrix().row(j);
                    (format!("p{j}"), 2.0 * dot(qi, pj) - rq - mean_top(&pj, q.matrix()))
                })
                .collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            for (got, want) in ranking.candidates.iter().zip(&all) {
                assert_eq!(got.0, want.0);
                assert!((got.1 - want.1).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn criterion_parse() {
        assert_eq!("CSLS".parse::<Criterion>().unwrap(), Criterion::Csls);
        assert_eq!(Criterion::Nn.to_string(), "nn");
        assert!("knn".parse::<Criterion>().is_err());
    }

    #[test]
    fn rankings_are_exact_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut unit = |n: usize| {
            let m = Array2::from_shape_fn((n, 6), |_| rng.random::<f64>() - 0.5);
            crate::embed::normalize_rows(m)
        };
        let q = space("q", unit(10));
        let p = space("p", unit(50));
        let rev = space("r", unit(40));
        for r in [nn_retrieve(&q, &p, 50).unwrap(), csls_retrieve(&q, &p, &rev, 50, 5).unwrap()] {
            for ranking in &r.rankings {
                assert!(ranking.candidates.windows(2).all(|w| w[0].1 >= w[1].1));
                let mut names: Vec<&String> = ranking.candidates.iter().map(|c| &c.0).collect();
                names.sort();
                names.dedup();
                assert_eq!(names.len(), 50);
            }
        }
    }
}
