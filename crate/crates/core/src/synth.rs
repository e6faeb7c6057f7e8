//! Seeded synthetic fixtures: rotated embedding spaces with known ground
//! truth, and parallel corpora generated from a known word bijection.

use std::collections::{HashMap, HashSet};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dictionary::BilingualDictionary;
use crate::embed::{normalize_rows, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::induction::{split_train_test, ParallelCorpus};
use crate::linalg::qr_orthogonal;

/// A Haar-random orthogonal matrix from the QR factorization of a Gaussian
/// matrix, with column signs fixed so that `R` has a positive diagonal.
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Array2<f64> {
    let g = Array2::from_shape_fn((d, d), |_| StandardNormal.sample(rng));
    qr_orthogonal(&g)
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    /// Standard deviation of the per-component Gaussian noise on targets.
    pub noise: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 1000,
            d: 50,
            noise: 0.0,
            seed: 42,
            n_train: 500,
            n_test: 200,
        }
    }
}

/// Source rows are unit Gaussian directions; target row `i` is source row
/// `i` rotated by `rotation` plus noise. Word `s{i}` translates to `t{i}`.
#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub source: EmbeddingSpace,
    pub target: EmbeddingSpace,
    /// Ground truth `Q`: `target ~ source Q^T`.
    pub rotation: Array2<f64>,
    pub train: BilingualDictionary,
    pub test: BilingualDictionary,
}

impl SyntheticFixture {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        if cfg.n == 0 || cfg.d == 0 {
            return Err(Error::InvalidArgument("n and d must be positive".into()));
        }
        if !(cfg.noise >= 0.0) {
            return Err(Error::InvalidArgument("noise must be >= 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let src = normalize_rows(Array2::from_shape_fn((cfg.n, cfg.d), |_| StandardNormal.sample(&mut rng)));
        let q = random_orthogonal(cfg.d, &mut rng);
        let mut tgt = src.dot(&q.t());
        if cfg.noise > 0.0 {
            tgt.mapv_inplace(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + cfg.noise * e
            });
        }
        let src_words: Vec<String> = (0..cfg.n).map(|i| format!("s{i}")).collect();
        let tgt_words: Vec<String> = (0..cfg.n).map(|i| format!("t{i}")).collect();
        let dict = BilingualDictionary::from_pairs(src_words.iter().cloned().zip(tgt_words.iter().cloned()));
        let rank: HashMap<String, usize> = src_words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let (train, test) = split_train_test(&dict, &rank, cfg.n_train, cfg.n_test, cfg.seed)?;
        Ok(SyntheticFixture {
            source: EmbeddingSpace::new(src_words, src)?.with_lang("src"),
            target: EmbeddingSpace::new(tgt_words, tgt)?.with_lang("tgt"),
            rotation: q,
            train,
            test,
        })
    }
}

/// A parallel corpus where source word `w{i}` always appears together with
/// its translation `v{i}`.
#[derive(Debug, Clone)]
pub struct BijectiveCorpus {
    pub corpus: ParallelCorpus,
    pub bijection: Vec<(String, String)>,
}

/// Generates `n_types` word pairs, each present in at least `min_segments`
/// segment pairs of `segment_len` words. Target-side word order is shuffled
/// independently of the source side.
pub fn bijective_corpus(n_types: usize, min_segments: usize, segment_len: usize, seed: u64) -> Result<BijectiveCorpus> {
    if n_types == 0 || min_segments == 0 || segment_len == 0 {
        return Err(Error::InvalidArgument("corpus parameters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tokens: Vec<usize> = Vec::new();
    for t in 0..n_types {
        let extra = rng.random_range(0..=min_segments);
        tokens.extend(std::iter::repeat_n(t, min_segments + extra));
    }
    tokens.shuffle(&mut rng);

    // a type repeated within one segment loses an occurrence; top it up
    let mut segments: Vec<Vec<usize>> = tokens.chunks(segment_len).map(|c| c.to_vec()).collect();
    let mut present = vec![0usize; n_types];
    for seg in &segments {
        for &t in seg.iter().collect::<HashSet<_>>() {
            present[t] += 1;
        }
    }
    for (t, &p) in present.iter().enumerate() {
        for _ in p..min_segments {
            segments.push(vec![t]);
        }
    }
    segments.shuffle(&mut rng);

    let mut corpus = ParallelCorpus::default();
    for seg in segments {
        let src: Vec<String> = seg.iter().map(|t| format!("w{t}")).collect();
        let mut tgt: Vec<String> = seg.iter().map(|t| format!("v{t}")).collect();
        tgt.shuffle(&mut rng);
        corpus.pairs.push((src, tgt));
    }
    let bijection = (0..n_types).map(|t| (format!("w{t}"), format!("v{t}"))).collect();
    Ok(BijectiveCorpus { corpus, bijection })
}
