//! Iterative refinement: induce a dictionary of mutual nearest neighbors
//! among frequent words, refit Procrustes on it, repeat.

use ndarray::{s, Array2};

use super::{align_procrustes, AnchorSet, LinearMap, Method};
use crate::embed::{normalize_rows, EmbeddingSpace};
use crate::error::Result;
use crate::knn::{mean_top_k_similarity, top_k_scored};
use crate::retrieval::Criterion;

#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub iterations: usize,
    /// How many of the most frequent words on each side take part.
    pub top_n: usize,
    pub criterion: Criterion,
    pub k_neighbors: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iterations: 5,
            top_n: 10_000,
            criterion: Criterion::Csls,
            k_neighbors: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub map: LinearMap,
    pub iterations_run: usize,
    /// Size of the induced dictionary at each iteration.
    pub dictionary_sizes: Vec<usize>,
    /// Stopped because the induced dictionary repeated itself.
    pub converged: bool,
    /// Stopped because an iteration induced no pairs; `map` is the last
    /// valid one.
    pub empty_dictionary: bool,
}

/// Index pairs `(i, j)` such that `j` is the best candidate for source `i`
/// and `i` the best for target `j`, sorted by `i`.
pub fn mutual_nearest_pairs(
    mapped: &Array2<f64>,
    target: &Array2<f64>,
    criterion: Criterion,
    k_neighbors: usize,
) -> Result<Vec<(usize, usize)>> {
    if mapped.nrows() == 0 || target.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (fwd, bwd) = match criterion {
        Criterion::Nn => (
            top_k_scored(mapped.view(), target.view(), 1, 1.0, None)?,
            top_k_scored(target.view(), mapped.view(), 1, 1.0, None)?,
        ),
        Criterion::Csls => {
            let k = k_neighbors.min(mapped.nrows()).min(target.nrows()).max(1);
            let r_src = mean_top_k_similarity(mapped.view(), target.view(), k)?;
            let r_tgt = mean_top_k_similarity(target.view(), mapped.view(), k)?;
            // the query's own penalty is constant along its row
            (
                top_k_scored(mapped.view(), target.view(), 1, 2.0, Some(&r_tgt))?,
                top_k_scored(target.view(), mapped.view(), 1, 2.0, Some(&r_src))?,
            )
        }
    };
    Ok(fwd
        .iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let j = row[0].0;
            (bwd[j][0].0 == i).then_some((i, j))
        })
        .collect())
}

/// Refines an (orthogonal) map by repeated mutual-NN dictionary induction
/// and Procrustes refits. Both spaces should be unit-normalized.
pub fn refine(init: &LinearMap, src: &EmbeddingSpace, tgt: &EmbeddingSpace, cfg: &RefineConfig) -> Result<RefineOutcome> {
    if !init.is_orthogonal() {
        log::warn!("refinement started from a non-orthogonal map");
    }
    let ns = cfg.top_n.min(src.len());
    let nt = cfg.top_n.min(tgt.len());
    let src_top = src.matrix().slice(s![..ns, ..]).to_owned();
    let tgt_top = tgt.matrix().slice(s![..nt, ..]).to_owned();

    let mut map = init.clone();
    let mut previous: Option<Vec<(usize, usize)>> = None;
    let mut sizes = Vec::new();
    let mut converged = false;
    let mut empty = false;
    let mut run = 0;

    for _ in 0..cfg.iterations {
        let mapped = normalize_rows(src_top.dot(&map.matrix().t()));
        let pairs = mutual_nearest_pairs(&mapped, &tgt_top, cfg.criterion, cfg.k_neighbors)?;
        run += 1;
        sizes.push(pairs.len());
        if pairs.is_empty() {
            log::warn!("refinement induced an empty dictionary; keeping the previous map");
            empty = true;
            break;
        }
        if previous.as_ref() == Some(&pairs) {
            converged = true;
            break;
        }
        let (si, ti): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let anchors = AnchorSet {
            x: src_top.select(ndarray::Axis(0), &si),
            y: tgt_top.select(ndarray::Axis(0), &ti),
            pairs: pairs
                .iter()
                .map(|&(i, j)| (src.words()[i].clone(), tgt.words()[j].clone()))
                .collect(),
            skipped: 0,
            normalized: src.is_l2_normalized() && tgt.is_l2_normalized(),
        };
        let fitted = align_procrustes(&anchors)?;
        let mut next = LinearMap::new(fitted.matrix().clone(), Method::Refined)?;
        for (k, v) in init.params() {
            next.set_param(format!("init.{k}"), v);
        }
        next.set_param("init", init.method());
        next.set_param("refine_criterion", cfg.criterion);
        next.set_param("refine_top_n", cfg.top_n);
        next.set_param("refine_dictionary", pairs.len());
        map = next;
        previous = Some(pairs);
    }
    map.set_param("refine_iterations", run);
    Ok(RefineOutcome {
        map,
        iterations_run: run,
        dictionary_sizes: sizes,
        converged,
        empty_dictionary: empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{SynthConfig, SyntheticFixture};
    use ndarray::array;

    #[test]
    fn mutual_pairs_small() {
        let m = array![[1.0, 0.0], [0.0, 1.0], [0.9, 0.1]];
        let t = array![[0.0, 1.0], [1.0, 0.0]];
        let p = mutual_nearest_pairs(&m, &t, Criterion::Nn, 1).unwrap();
        assert_eq!(p, [(0, 1), (1, 0)]);
    }

    #[test]
    fn exact_rotation_is_a_fixed_point() {
        let fx = SyntheticFixture::generate(&SynthConfig {
            n: 300,
            d: 20,
            noise: 0.0,
            seed: 3,
            n_train: 100,
            n_test: 50,
        })
        .unwrap();
        let init = LinearMap::new(fx.rotation.clone(), Method::Procrustes).unwrap();
        let cfg = RefineConfig { top_n: 300, ..Default::default() };
        let out = refine(&init, &fx.source, &fx.target, &cfg).unwrap();
        assert_eq!(out.dictionary_sizes[0], 300);
        assert!(out.converged);
        assert!(crate::linalg::frobenius(&(out.map.matrix() - &fx.rotation)) < 1e-9);
        assert_eq!(out.map.method(), Method::Refined);
    }
}
