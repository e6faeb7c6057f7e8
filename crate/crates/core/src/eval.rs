//! Precision@k scoring, rank-bucket distributions and the evaluation
//! pipeline over an aligned pair of spaces.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use crate::alignment::LinearMap;
use crate::dictionary::BilingualDictionary;
use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::retrieval::{csls_retrieve, nn_retrieve, Criterion, RetrievalResult};

/// Default P@k cut-offs.
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// Rank buckets given by increasing inclusive upper bounds. With bounds
/// `[1, 5, 10]` the buckets are `1`, `2-5`, `6-10` and `miss` (no hit
/// within rank 10).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankBuckets {
    bounds: Vec<usize>,
}

impl Default for RankBuckets {
    fn default() -> Self {
        RankBuckets {
            bounds: DEFAULT_KS.to_vec(),
        }
    }
}

impl RankBuckets {
    pub fn new(mut bounds: Vec<usize>) -> Result<Self> {
        bounds.sort_unstable();
        bounds.dedup();
        if bounds.is_empty() || bounds[0] == 0 {
            return Err(Error::InvalidArgument("bucket bounds must be positive".into()));
        }
        Ok(RankBuckets { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_rank(&self) -> usize {
        *self.bounds.last().expect("non-empty")
    }

    /// Bucket of a 1-based first-hit rank; `None` is a miss.
    pub fn bucket(&self, rank: Option<usize>) -> usize {
        match rank {
            Some(r) => self.bounds.iter().position(|&b| r <= b).unwrap_or(self.bounds.len()),
            None => self.bounds.len(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        let mut lo = 1;
        for &b in &self.bounds {
            out.push(if lo == b { b.to_string() } else { format!("{lo}-{b}") });
            lo = b + 1;
        }
        out.push("miss".into());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub direction: String,
    pub criterion: String,
    pub ks: Vec<usize>,
    /// P@k in percent, aligned with `ks`.
    pub precisions: Vec<f64>,
    pub n_queries: usize,
    pub buckets: RankBuckets,
    /// Queries per bucket of their first correct rank.
    pub distribution: Vec<usize>,
}

impl EvaluationReport {
    pub fn precision(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.precisions[i])
    }
}

/// Scores rankings against a gold dictionary with the default buckets.
///
/// A query is a hit at `k` if any of its gold targets is among its top `k`
/// candidates. Every query word must be a source in `gold`.
pub fn precision_at_k(
    result: &RetrievalResult,
    gold: &BilingualDictionary,
    ks: &[usize],
    criterion: Criterion,
    direction: &str,
) -> Result<EvaluationReport> {
    precision_with_buckets(result, gold, ks, &RankBuckets::default(), criterion, direction)
}

pub fn precision_with_buckets(
    result: &RetrievalResult,
    gold: &BilingualDictionary,
    ks: &[usize],
    buckets: &RankBuckets,
    criterion: Criterion,
    direction: &str,
) -> Result<EvaluationReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument("ks must be non-empty and positive".into()));
    }
    let translations = gold.translations();
    let mut hits = vec![0usize; ks.len()];
    let mut distribution = vec![0usize; buckets.len()];
    for r in &result.rankings {
        let targets: HashSet<&str> = translations
            .get(r.query.as_str())
            .ok_or_else(|| Error::QueryNotInGold(r.query.clone()))?
            .iter()
            .copied()
            .collect();
        let first = r
            .candidates
            .iter()
            .position(|(w, _)| targets.contains(w.as_str()))
            .map(|p| p + 1);
        for (h, &k) in hits.iter_mut().zip(ks) {
            if first.is_some_and(|f| f <= k) {
                *h += 1;
            }
        }
        let b = match first {
            Some(f) if f <= buckets.max_rank() => buckets.bucket(Some(f)),
            _ => buckets.bucket(None),
        };
        distribution[b] += 1;
    }
    let n = result.rankings.len();
    let precisions = hits
        .iter()
        .map(|&h| if n == 0 { 0.0 } else { 100.0 * h as f64 / n as f64 })
        .collect();
    Ok(EvaluationReport {
        direction: direction.to_string(),
        criterion: criterion.to_string(),
        ks: ks.to_vec(),
        precisions,
        n_queries: n,
        buckets: buckets.clone(),
        distribution,
    })
}

/// Direction-by-bucket count grid, ready for a heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionGrid {
    pub labels: Vec<String>,
    pub rows: Vec<(String, Vec<usize>)>,
}

/// Stacks the rank distributions of two reports (one per direction).
pub fn retrieval_distribution(forward: &EvaluationReport, backward: &EvaluationReport) -> Result<DistributionGrid> {
    distribution_grid(&[forward, backward])
}

pub fn distribution_grid(reports: &[&EvaluationReport]) -> Result<DistributionGrid> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports".into()))?;
    if reports.iter().any(|r| r.buckets != first.buckets) {
        return Err(Error::InvalidArgument("reports use different rank buckets".into()));
    }
    Ok(DistributionGrid {
        labels: first.buckets.labels(),
        rows: reports
            .iter()
            .map(|r| (format!("{} {}", r.direction, r.criterion), r.distribution.clone()))
            .collect(),
    })
}

impl DistributionGrid {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "direction,{}", self.labels.join(","))?;
        for (name, counts) in &self.rows {
            let c: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{}", name, c.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `direction,criterion,p1,p5,p10,n_queries` (one `p<k>` column per cut-off
/// of the first report).
pub fn write_reports_csv<W: Write>(reports: &[EvaluationReport], mut w: W) -> Result<()> {
    let ks = reports.first().map(|r| r.ks.clone()).unwrap_or_else(|| DEFAULT_KS.to_vec());
    let cols: Vec<String> = ks.iter().map(|k| format!("p{k}")).collect();
    writeln!(w, "direction,criterion,{},n_queries", cols.join(","))?;
    for r in reports {
        let ps: Vec<String> = ks
            .iter()
            .map(|&k| r.precision(k).map_or_else(|| "NA".into(), |p| format!("{p:.2}")))
            .collect();
        writeln!(w, "{},{},{},{}", r.direction, r.criterion, ps.join(","), r.n_queries)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Source queries against target candidates.
    Forward,
    /// Target queries against mapped-source candidates.
    Backward,
}

/// A source space mapped into the target space, both unit-normalized.
pub struct AlignedPair {
    mapped: EmbeddingSpace,
    target: EmbeddingSpace,
}

impl AlignedPair {
    /// Maps `src` with `map` and re-normalizes the result. `tgt` is
    /// normalized if it is not already.
    pub fn new(map: &LinearMap, src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<Self> {
        let mapped = map.apply(src)?.normalize(false)?;
        let target = if tgt.is_l2_normalized() { tgt.clone() } else { tgt.normalize(false)? };
        Ok(AlignedPair { mapped, target })
    }

    pub fn mapped_source(&self) -> &EmbeddingSpace {
        &self.mapped
    }

    pub fn target(&self) -> &EmbeddingSpace {
        &self.target
    }

    fn label(&self, direction: Direction) -> String {
        let name = |s: &EmbeddingSpace, fallback: &str| {
            if s.lang().is_empty() { fallback.to_string() } else { s.lang().to_string() }
        };
        let (a, b) = (name(&self.mapped, "src"), name(&self.target, "tgt"));
        match direction {
            Direction::Forward => format!("{a}->{b}"),
            Direction::Backward => format!("{b}->{a}"),
        }
    }

    /// Retrieves translations for the test dictionary's source words and
    /// scores them.
    ///
    /// Entries with a word outside the query or candidate vocabulary are
    /// dropped first; each remaining unique source word is one query.
    pub fn evaluate(
        &self,
        test: &BilingualDictionary,
        criterion: Criterion,
        direction: Direction,
        k_neighbors: usize,
        buckets: &RankBuckets,
    ) -> Result<(RetrievalResult, EvaluationReport)> {
        let (queries_space, pool, gold) = match direction {
            Direction::Forward => (&self.mapped, &self.target, test.clone()),
            Direction::Backward => (&self.target, &self.mapped, test.reversed()),
        };
        let mut usable = BilingualDictionary::new();
        for e in &gold {
            if queries_space.contains(&e.source) && pool.contains(&e.target) {
                usable.push(e.source.clone(), e.target.clone(), e.score);
            }
        }
        let words = usable.sources();
        if words.is_empty() {
            return Err(Error::NoQueries);
        }
        let dropped = gold.sources().len() - words.len();
        if dropped > 0 {
            log::info!("{dropped} query words dropped as out of vocabulary");
        }
        let queries = queries_space.subset(&words)?;
        let depth = buckets.max_rank().min(pool.len());
        let result = match criterion {
            Criterion::Nn => nn_retrieve(&queries, pool, depth)?,
            Criterion::Csls => csls_retrieve(&queries, pool, queries_space, depth, k_neighbors)?,
        };
        let ks: Vec<usize> = DEFAULT_KS.iter().copied().filter(|&k| k <= buckets.max_rank()).collect();
        let ks = if ks.is_empty() { vec![buckets.max_rank()] } else { ks };
        let report = precision_with_buckets(&result, &usable, &ks, buckets, criterion, &self.label(direction))?;
        Ok((result, report))
    }
}

/// First-hit rank (1-based) of each query, by query word.
pub fn first_hit_ranks(result: &RetrievalResult, gold: &BilingualDictionary) -> HashMap<String, Option<usize>> {
    let translations = gold.translations();
    result
        .rankings
        .iter()
        .map(|r| {
            let targets = translations.get(r.query.as_str());
            let rank = targets.and_then(|t| {
                r.candidates
                    .iter()
                    .position(|(w, _)| t.contains(&w.as_str()))
                    .map(|p| p + 1)
            });
            (r.query.clone(), rank)
        })
        .collect()
}
