//! Relaxed CSLS (RCSLS) objective and its gradient-descent solver.
//!
//! For anchors `(x_i, y_i)`, `i = 1..m`, and a map `W` the objective is
//!
//! ```text
//! L(W) = 1/m sum_i [ -2 <x_i W^T, y_i>
//!                    + 1/k sum_{t in N_T(x_i W^T)} <x_i W^T, t>
//!                    + 1/k sum_{s in N_S(y_i)}      <s W^T, y_i> ]
//! ```
//!
//! where `N_T(q)` are the `k` target-pool rows with the largest dot product
//! with `q` and `N_S(y)` the `k` source-pool rows whose mapped vectors have
//! the largest dot product with `y`. Since `<s W^T, y> = <s, y W>`, the
//! second neighborhood is searched with queries `y W` against the unmapped
//! source pool.
//!
//! With neighborhoods frozen the objective is linear in `W` and its gradient
//! is `1/m (-2 Y^T X + T^T X + Y^T S)`, where row `i` of `T` (`S`) is the
//! mean of the target (source) neighbors of anchor `i`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::closed_form::spectral_project;
use super::{AnchorSet, LinearMap, Method};
use crate::dictionary::BilingualDictionary;
use crate::embed::{normalize_rows, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::eval::precision_at_k;
use crate::knn::nearest;
use crate::retrieval::{csls_retrieve, Criterion};

/// When neighborhoods are recomputed from the current map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refresh {
    EveryEpoch,
    /// After this many parameter updates within an epoch, and at every
    /// epoch start.
    EverySteps(usize),
}

#[derive(Debug, Clone)]
pub struct RcslsConfig {
    pub k_neighbors: usize,
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    /// Anchors per update; `None` means full batch.
    pub batch_size: Option<usize>,
    pub spectral: bool,
    pub refresh: Refresh,
    pub seed: u64,
}

impl Default for RcslsConfig {
    fn default() -> Self {
        RcslsConfig {
            k_neighbors: 10,
            learning_rates: vec![1.0, 10.0, 25.0, 50.0],
            epochs: vec![10, 20],
            batch_size: None,
            spectral: false,
            refresh: Refresh::EveryEpoch,
            seed: 42,
        }
    }
}

/// Frozen neighborhoods: for each anchor, `k` target-pool indices near the
/// mapped source and `k` source-pool indices whose images are near the
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    pub k: usize,
    pub target: Vec<Vec<usize>>,
    pub source: Vec<Vec<usize>>,
}

/// The objective bound to a set of anchors and retrieval pools.
pub struct RcslsObjective<'a> {
    anchors: &'a AnchorSet,
    src_pool: ArrayView2<'a, f64>,
    tgt_pool: ArrayView2<'a, f64>,
    k: usize,
}

impl<'a> RcslsObjective<'a> {
    pub fn new(
        anchors: &'a AnchorSet,
        src_pool: ArrayView2<'a, f64>,
        tgt_pool: ArrayView2<'a, f64>,
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let pool = src_pool.nrows().min(tgt_pool.nrows());
        if k > pool {
            return Err(Error::KTooLarge { k, pool });
        }
        let d = anchors.dim();
        for c in [src_pool.ncols(), tgt_pool.ncols()] {
            if c != d {
                return Err(Error::DimensionMismatch { expected: d, actual: c });
            }
        }
        Ok(RcslsObjective {
            anchors,
            src_pool,
            tgt_pool,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Loss with neighborhoods searched from `w`.
    pub fn loss(&self, w: &Array2<f64>) -> Result<f64> {
        let a = self.anchors;
        let mapped = a.x.dot(&w.t());
        let back = a.y.dot(w);
        let nt = nearest(mapped.view(), self.tgt_pool, self.k)?;
        let ns = nearest(back.view(), self.src_pool, self.k)?;
        let k = self.k as f64;
        let mut total = 0.0;
        for i in 0..a.len() {
            let own = mapped.row(i).dot(&a.y.row(i));
            let t: f64 = nt[i].iter().map(|&(_, s)| s).sum();
            let s: f64 = ns[i].iter().map(|&(_, s)| s).sum();
            total += -2.0 * own + t / k + s / k;
        }
        Ok(total / a.len() as f64)
    }

    pub fn neighborhoods(&self, w: &Array2<f64>) -> Result<Neighborhoods> {
        let a = self.anchors;
        let ids = |nb: Vec<Vec<(usize, f64)>>| nb.into_iter().map(|r| r.into_iter().map(|(j, _)| j).collect()).collect();
        Ok(Neighborhoods {
            k: self.k,
            target: ids(nearest(a.x.dot(&w.t()).view(), self.tgt_pool, self.k)?),
            source: ids(nearest(a.y.dot(w).view(), self.src_pool, self.k)?),
        })
    }

    /// Loss with the given neighborhoods held fixed.
    pub fn loss_fixed(&self, w: &Array2<f64>, nb: &Neighborhoods) -> f64 {
        let a = self.anchors;
        let rows: Vec<usize> = (0..a.len()).collect();
        let (tbar, sbar) = self.neighbor_means(nb, &rows);
        let mapped = a.x.dot(&w.t());
        let back = a.y.dot(w);
        let mut total = 0.0;
        for i in 0..a.len() {
            let m = mapped.row(i);
            total += -2.0 * m.dot(&a.y.row(i)) + m.dot(&tbar.row(i)) + back.row(i).dot(&sbar.row(i));
        }
        total / a.len() as f64
    }

    /// Gradient of `loss_fixed` restricted to the anchor rows in `batch`.
    /// It does not depend on `W`.
    pub fn gradient(&self, nb: &Neighborhoods, batch: &[usize]) -> Array2<f64> {
        let a = self.anchors;
        let x = a.x.select(Axis(0), batch);
        let y = a.y.select(Axis(0), batch);
        let (tbar, sbar) = self.neighbor_means(nb, batch);
        let g = y.t().dot(&x) * -2.0 + tbar.t().dot(&x) + y.t().dot(&sbar);
        g / batch.len() as f64
    }

    fn neighbor_means(&self, nb: &Neighborhoods, rows: &[usize]) -> (Array2<f64>, Array2<f64>) {
        let d = self.anchors.dim();
        let mut tbar = Array2::zeros((rows.len(), d));
        let mut sbar = Array2::zeros((rows.len(), d));
        let k = nb.k as f64;
        for (r, &i) in rows.iter().enumerate() {
            let mut trow = tbar.row_mut(r);
            for &j in &nb.target[i] {
                trow += &self.tgt_pool.row(j);
            }
            trow /= k;
            let mut srow = sbar.row_mut(r);
            for &j in &nb.source[i] {
                srow += &self.src_pool.row(j);
            }
            srow /= k;
        }
        (tbar, sbar)
    }
}

/// `rcsls_loss` as a free function over embedding pools.
pub fn rcsls_loss(
    map: &LinearMap,
    anchors: &AnchorSet,
    tgt_pool: &EmbeddingSpace,
    src_pool: &EmbeddingSpace,
    k: usize,
) -> Result<f64> {
    RcslsObjective::new(anchors, src_pool.matrix().view(), tgt_pool.matrix().view(), k)?.loss(map.matrix())
}

/// One `(learning rate, epochs)` grid point.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Learning rate after the halvings.
    pub final_learning_rate: f64,
    /// Loss at the initial map followed by the loss after each epoch.
    pub losses: Vec<f64>,
    /// Training-dictionary CSLS P@1, in percent.
    pub train_p1: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct RcslsOutcome {
    pub map: LinearMap,
    pub runs: Vec<GridRun>,
    /// Index of the selected run in `runs`.
    pub best: usize,
}

/// Runs the solver once for a fixed learning rate and epoch count.
///
/// Every epoch sweeps the anchors in (seeded) random batches, then the full
/// objective is evaluated with fresh neighborhoods. An epoch that does not
/// lower the loss is rolled back and the learning rate halved, so the
/// recorded loss sequence never increases.
pub fn descend(
    objective: &RcslsObjective<'_>,
    init: &Array2<f64>,
    learning_rate: f64,
    epochs: usize,
    cfg: &RcslsConfig,
) -> Result<(Array2<f64>, Vec<f64>, f64)> {
    let m = objective.anchors.len();
    let batch = cfg.batch_size.unwrap_or(m).clamp(1, m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..m).collect();
    let mut w = init.clone();
    let mut lr = learning_rate;
    let mut loss = objective.loss(&w)?;
    if !loss.is_finite() {
        return Err(Error::InvalidArgument("initial loss is not finite".into()));
    }
    let mut losses = vec![loss];

    for _ in 0..epochs {
        let start = w.clone();
        if batch < m {
            order.shuffle(&mut rng);
        }
        let mut nb = objective.neighborhoods(&w)?;
        for (b, rows) in order.chunks(batch).enumerate() {
            if let Refresh::EverySteps(n) = cfg.refresh {
                if b > 0 && b % n.max(1) == 0 {
                    nb = objective.neighborhoods(&w)?;
                }
            }
            let g = objective.gradient(&nb, rows);
            w.scaled_add(-lr, &g);
            if cfg.spectral {
                w = spectral_project(&w)?;
            }
        }
        let next = objective.loss(&w)?;
        if !next.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("loss diverged at learning rate {lr}")));
        }
        if next < loss {
            loss = next;
        } else {
            w = start;
            lr /= 2.0;
        }
        losses.push(loss);
    }
    Ok((w, losses, lr))
}

/// CSLS P@1 of a map on its own training anchors.
fn train_precision(map: &Array2<f64>, anchors: &AnchorSet, src_pool: &EmbeddingSpace, tgt_pool: &EmbeddingSpace, k: usize) -> Result<f64> {
    let mut seen = std::collections::HashSet::new();
    let mut words = Vec::new();
    let mut rows = Vec::new();
    for (i, (s, _)) in anchors.pairs.iter().enumerate() {
        if seen.insert(s.as_str()) {
            words.push(s.clone());
            rows.push(i);
        }
    }
    let queries = normalize_rows(anchors.x.select(Axis(0), &rows).dot(&map.t()));
    let queries = EmbeddingSpace::new(words, queries)?;
    let reverse = normalize_rows(src_pool.matrix().dot(&map.t()));
    let reverse = src_pool.with_matrix(reverse);
    let gold = BilingualDictionary::from_pairs(anchors.pairs.iter().cloned());
    let result = csls_retrieve(&queries, tgt_pool, &reverse, 1, k)?;
    let report = precision_at_k(&result, &gold, &[1], Criterion::Csls, "train")?;
    Ok(report.precision(1).unwrap_or(0.0))
}

/// Minimizes the RCSLS objective from `init`, trying every grid point and
/// keeping the one with the best training-dictionary CSLS P@1 (earliest grid
/// point on ties). Grid points whose loss diverges are skipped.
pub fn align_rcsls(
    anchors: &AnchorSet,
    src_pool: &EmbeddingSpace,
    tgt_pool: &EmbeddingSpace,
    cfg: &RcslsConfig,
    init: &LinearMap,
) -> Result<RcslsOutcome> {
    if cfg.learning_rates.is_empty() || cfg.epochs.is_empty() {
        return Err(Error::InvalidArgument("empty learning-rate or epoch grid".into()));
    }
    if cfg.learning_rates.iter().any(|&lr| !(lr > 0.0)) {
        return Err(Error::InvalidArgument("learning rates must be positive".into()));
    }
    let objective = RcslsObjective::new(
        anchors,
        src_pool.matrix().view(),
        tgt_pool.matrix().view(),
        cfg.k_neighbors,
    )?;
    let mut runs: Vec<GridRun> = Vec::new();
    let mut best: Option<(usize, Array2<f64>)> = None;
    for &lr in &cfg.learning_rates {
        for &epochs in &cfg.epochs {
            match descend(&objective, init.matrix(), lr, epochs, cfg) {
                Ok((w, losses, final_lr)) => {
                    let p1 = train_precision(&w, anchors, src_pool, tgt_pool, cfg.k_neighbors)?;
                    log::info!("rcsls lr={lr} epochs={epochs}: loss {:.6} -> {:.6}, train P@1 {p1:.2}", losses[0], losses[losses.len() - 1]);
                    let better = best.as_ref().is_none_or(|(b, _)| p1 > runs[*b].train_p1);
                    runs.push(GridRun {
                        learning_rate: lr,
                        epochs,
                        final_learning_rate: final_lr,
                        losses,
                        train_p1: p1,
                        diverged: false,
                    });
                    if better {
                        best = Some((runs.len() - 1, w));
                    }
                }
                Err(e) => {
                    log::warn!("rcsls lr={lr} epochs={epochs} aborted: {e}");
                    runs.push(GridRun {
                        learning_rate: lr,
                        epochs,
                        final_learning_rate: lr,
                        losses: Vec::new(),
                        train_p1: 0.0,
                        diverged: true,
                    });
                }
            }
        }
    }
    let (best, w) = best.ok_or_else(|| Error::InvalidArgument("every grid point diverged".into()))?;
    let run = &runs[best];
    let method = if cfg.spectral { Method::RcslsSpectral } else { Method::Rcsls };
    let map = LinearMap::new(w, method)?
        .with_param("k_neighbors", cfg.k_neighbors)
        .with_param("lr", run.learning_rate)
        .with_param("epochs", run.epochs)
        .with_param("final_lr", run.final_learning_rate)
        .with_param("final_loss", run.losses.last().copied().unwrap_or(f64::NAN))
        .with_param("train_p1", run.train_p1)
        .with_param("spectral", cfg.spectral)
        .with_param("batch_size", cfg.batch_size.map_or("full".to_string(), |b| b.to_string()))
        .with_param("seed", cfg.seed)
        .with_param("init", init.method());
    Ok(RcslsOutcome { map, runs, best })
}
