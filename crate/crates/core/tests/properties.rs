use std::collections::{BTreeSet, HashMap, HashSet};

use lexalign::alignment::{align_procrustes, apply_map, build_anchors, refine, AnchorSet, RefineConfig};
use lexalign::eval::{first_hit_ranks, precision_with_buckets, AlignedPair, Direction, RankBuckets};
use lexalign::induction::CooccurrenceTable;
use lexalign::retrieval::{csls_retrieve, nn_retrieve, Ranking, RetrievalResult};
use lexalign::synth::{bijective_corpus, random_orthogonal, SynthConfig, SyntheticFixture};
use lexalign::{BilingualDictionary, Criterion, EmbeddingSpace, LinearMap, Method};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

fn space(prefix: &str, m: Array2<f64>) -> EmbeddingSpace {
    let words = (0..m.nrows()).map(|i| format!("{prefix}{i}")).collect();
    EmbeddingSpace::new(words, m).unwrap().normalize(false).unwrap()
}

fn objective(w: &Array2<f64>, a: &AnchorSet) -> f64 {
    (a.x.dot(&w.t()) * &a.y).sum()
}

/// Exhaustive scores of every pool row for query `i`, best first, ties by
/// lower index.
fn brute_force(scores: impl Fn(usize, usize) -> f64, i: usize, n_pool: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..n_pool).map(|j| (j, scores(i, j))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

fn mean_top(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v[..k].iter().sum::<f64>() / k as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn procrustes_beats_random_rotations(seed: u64, d in 1usize..=3, m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = AnchorSet::from_matrices(gaussian(&mut rng, m, d), gaussian(&mut rng, m, d)).unwrap();
        let w = align_procrustes(&a).unwrap();
        let best = objective(w.matrix(), &a);
        for _ in 0..10_000 {
            let q = random_orthogonal(d, &mut rng);
            prop_assert!(objective(&q, &a) <= best + 1e-9);
        }
    }

    #[test]
    fn orthogonal_maps_preserve_cosine(seed: u64, n in 2usize..30, d in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = space("s", gaussian(&mut rng, n, d));
        let map = LinearMap::new(random_orthogonal(d, &mut rng), Method::External).unwrap();
        let mapped = apply_map(&map, &src).unwrap();
        let before = src.matrix().dot(&src.matrix().t());
        let after = mapped.matrix().dot(&mapped.matrix().t());
        for (a, b) in before.iter().zip(after.iter()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn retrieval_matches_exhaustive_sort(seed: u64, nq in 1usize..8, np in 1usize..=50, nr in 1usize..20, d in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = space("q", gaussian(&mut rng, nq, d));
        let p = space("p", gaussian(&mut rng, np, d));
        let r = space("r", gaussian(&mut rng, nr, d));
        let k = rng.random_range(1..=np.min(nr));
        let dot = |a: &EmbeddingSpace, i: usize, b: &EmbeddingSpace, j: usize| a.matrix().row(i).dot(&b.matrix().row(j));

        let nn = nn_retrieve(&q, &p, np).unwrap();
        for i in 0..nq {
            let want = brute_force(|i, j| dot(&q, i, &p, j), i, np);
            for ((w, s), (_, t)) in nn.rankings[i].candidates.iter().zip(&want) {
                prop_assert!((s - t).abs() < 1e-12);
                let j = p.index_of(w).unwrap();
                prop_assert!((dot(&q, i, &p, j) - s).abs() < 1e-12);
            }
        }

        let csls = csls_retrieve(&q, &p, &r, np, k).unwrap();
        let r_pool: Vec<f64> = (0..nq).map(|i| mean_top((0..np).map(|j| dot(&q, i, &p, j)), k)).collect();
        let r_rev: Vec<f64> = (0..np).map(|j| mean_top((0..nr).map(|l| dot(&p, j, &r, l)), k)).collect();
        for i in 0..nq {
            let want = brute_force(|i, j| 2.0 * dot(&q, i, &p, j) - r_pool[i] - r_rev[j], i, np);
            for ((_, s), (_, t)) in csls.rankings[i].candidates.iter().zip(&want) {
                prop_assert!((s - t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_extra_candidate_keeps_order(seed: u64, nq in 1usize..6, np in 2usize..30, d in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = |n: usize| {
            let mut m = gaussian(&mut rng, n, d + 1);
            m.column_mut(d).fill(0.0);
            m
        };
        let q = space("q", flat(nq));
        let base = flat(np);
        let mut extended = base.clone();
        let mut extra = Array2::zeros((1, d + 1));
        extra[[0, d]] = 1.0;
        extended.append(Axis(0), extra.view()).unwrap();
        let a = nn_retrieve(&q, &space("p", base), np).unwrap();
        let b = nn_retrieve(&q, &space("p", extended), np + 1).unwrap();
        for (ra, rb) in a.rankings.iter().zip(&b.rankings) {
            let kept: Vec<&String> = rb.candidates.iter().map(|c| &c.0).filter(|w| *w != &format!("p{np}")).collect();
            let orig: Vec<&String> = ra.candidates.iter().map(|c| &c.0).collect();
            prop_assert_eq!(kept, orig);
        }
    }

    #[test]
    fn nn_equals_csls_on_symmetric_pool(seed: u64, nq in 1usize..10, d in 2usize..6, k in 1usize..4) {
        // the cross-polytope {+-e_i} is its own reverse pool, so every
        // candidate carries the same penalty
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = Array2::zeros((2 * d, d));
        for i in 0..d {
            pool[[2 * i, i]] = 1.0;
            pool[[2 * i + 1, i]] = -1.0;
        }
        let p = space("p", pool);
        let q = space("q", gaussian(&mut rng, nq, d));
        let nn = nn_retrieve(&q, &p, 2 * d).unwrap();
        let csls = csls_retrieve(&q, &p, &p, 2 * d, k.min(2 * d)).unwrap();
        for (a, b) in nn.rankings.iter().zip(&csls.rankings) {
            let wa: Vec<&String> = a.candidates.iter().map(|c| &c.0).collect();
            let wb: Vec<&String> = b.candidates.iter().map(|c| &c.0).collect();
            prop_assert_eq!(wa, wb);
        }
    }

    #[test]
    fn reports_are_monotone_and_sum(seed: u64, nq in 1usize..40, depth in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab: Vec<String> = (0..20).map(|i| format!("t{i}")).collect();
        let mut gold = BilingualDictionary::new();
        let mut rankings = Vec::new();
        for i in 0..nq {
            let q = format!("q{i}");
            for _ in 0..rng.random_range(1..=3) {
                gold.push(q.clone(), vocab[rng.random_range(0..20)].clone(), None);
            }
            let mut cands: Vec<(String, f64)> = (0..depth)
                .map(|r| (vocab[rng.random_range(0..20)].clone(), -(r as f64)))
                .collect();
            cands.dedup_by(|a, b| a.0 == b.0);
            rankings.push(Ranking { query: q, candidates: cands });
        }
        let result = RetrievalResult { rankings };
        let buckets = RankBuckets::default();
        let r = precision_with_buckets(&result, &gold, &[1, 5, 10], &buckets, Criterion::Nn, "x").unwrap();
        prop_assert!(r.precisions.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(r.distribution.iter().sum::<usize>(), nq);

        // recount buckets from first-hit ranks
        let ranks = first_hit_ranks(&result, &gold);
        let mut recount = vec![0usize; 4];
        for rank in ranks.values() {
            let b = match rank {
                Some(1) => 0,
                Some(2..=5) => 1,
                Some(6..=10) => 2,
                _ => 3,
            };
            recount[b] += 1;
        }
        prop_assert_eq!(&r.distribution, &recount);
        let p1 = 100.0 * recount[0] as f64 / nq as f64;
        prop_assert!((r.precisions[0] - p1).abs() < 1e-9);
    }

    #[test]
    fn condprob_recovers_identifiable_bijection(seed: u64, n_types in 5usize..80, min_segments in 2usize..4, len in 2usize..6) {
        let bc = bijective_corpus(n_types, min_segments, len, seed).unwrap();
        // two types that share every segment cannot be told apart
        let mut segments: HashMap<&str, BTreeSet<usize>> = HashMap::new();
        for (i, (src, _)) in bc.corpus.pairs.iter().enumerate() {
            for w in src {
                segments.entry(w.as_str()).or_default().insert(i);
            }
        }
        let distinct: HashSet<&BTreeSet<usize>> = segments.values().collect();
        prop_assume!(distinct.len() == segments.len());

        let table = CooccurrenceTable::count(&bc.corpus, &HashSet::new(), &HashSet::new());
        let dict = table.induce_condprob(min_segments as u64, 1).unwrap();
        prop_assert_eq!(dict.len(), n_types);
        for (s, t) in &bc.bijection {
            prop_assert!(dict.contains(s, t));
        }
    }
}

#[test]
fn refine_does_not_hurt_a_weak_seed() {
    let fx = SyntheticFixture::generate(&SynthConfig {
        noise: 0.05,
        n_train: 100,
        ..Default::default()
    })
    .unwrap();
    let src = fx.source.normalize(false).unwrap();
    let tgt = fx.target.normalize(false).unwrap();
    let anchors = build_anchors(&fx.train, &src, &tgt).unwrap();
    let init = align_procrustes(&anchors).unwrap();
    let out = refine(&init, &src, &tgt, &RefineConfig::default()).unwrap();
    let p1 = |m: &LinearMap| {
        let pair = AlignedPair::new(m, &src, &tgt).unwrap();
        let (_, r) = pair
            .evaluate(&fx.test, Criterion::Csls, Direction::Forward, 10, &RankBuckets::default())
            .unwrap();
        r.precision(1).unwrap()
    };
    let (before, after) = (p1(&init), p1(&out.map));
    assert!(after >= before, "P@1 {before} -> {after}");
    assert!(!out.empty_dictionary);
    assert_eq!(out.map.method(), Method::Refined);
}

#[test]
fn noisy_fixture_is_seed_deterministic() {
    let cfg = SynthConfig {
        noise: 0.5,
        n: 200,
        d: 10,
        n_train: 50,
        n_test: 50,
        seed: 7,
    };
    let a = SyntheticFixture::generate(&cfg).unwrap();
    let b = SyntheticFixture::generate(&cfg).unwrap();
    assert_eq!(a.target.matrix(), b.target.matrix());
    assert_eq!(a.test.entries(), b.test.entries());
}
