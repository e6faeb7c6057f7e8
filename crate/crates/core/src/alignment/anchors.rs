use ndarray::Array2;

use crate::dictionary::BilingualDictionary;
use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result};

/// Paired anchor vectors: row `i` of `x` translates to row `i` of `y`.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub pairs: Vec<(String, String)>,
    /// Dictionary entries dropped because a word was out of vocabulary.
    pub skipped: usize,
    /// Both spaces were unit-normalized.
    pub normalized: bool,
}

impl AnchorSet {
    /// Anchors straight from matrices, with synthetic pair labels.
    pub fn from_matrices(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: y.nrows(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::NoAnchors { skipped: 0 });
        }
        let pairs = (0..x.nrows()).map(|i| (i.to_string(), i.to_string())).collect();
        Ok(AnchorSet {
            x,
            y,
            pairs,
            skipped: 0,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// One anchor row per dictionary entry with both words in vocabulary, in
/// dictionary order. Repeated sources are kept as repeated rows.
pub fn build_anchors(dict: &BilingualDictionary, src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<AnchorSet> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            actual: tgt.dim(),
        });
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for e in dict {
        match (src.index_of(&e.source), tgt.index_of(&e.target)) {
            (Some(i), Some(j)) => rows.push((i, j, e)),
            _ => skipped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoAnchors { skipped });
    }
    let d = src.dim();
    let mut x = Array2::zeros((rows.len(), d));
    let mut y = Array2::zeros((rows.len(), d));
    let mut pairs = Vec::with_capacity(rows.len());
    for (r, (i, j, e)) in rows.into_iter().enumerate() {
        x.row_mut(r).assign(&src.matrix().row(i));
        y.row_mut(r).assign(&tgt.matrix().row(j));
        pairs.push((e.source.clone(), e.target.clone()));
    }
    if skipped > 0 {
        log::info!("{skipped} dictionary entries skipped as out of vocabulary");
    }
    Ok(AnchorSet {
        x,
        y,
        pairs,
        skipped,
        normalized: src.is_l2_normalized() && tgt.is_l2_normalized(),
    })
}
