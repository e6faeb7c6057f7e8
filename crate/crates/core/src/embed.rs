//! Word-embedding spaces and the FastText `.vec` text format.
//!
//! A `.vec` file starts with a header line holding the number of rows and
//! the dimensionality, followed by one line per word:
//!
//! ```text
//! 2 3
//! cat 1 0 0
//! dog 0 1 0
//! ```
//!
//! FastText releases list words by decreasing corpus frequency, so the row
//! order doubles as a frequency ranking.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use log::warn;
use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Rows whose Euclidean norm falls below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// A vocabulary together with an `n x d` matrix of word vectors.
///
/// Row `i` of the matrix is the vector of `words()[i]`. Spaces are immutable
/// once built; every transformation returns a new space.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
    lang: String,
    l2_normalized: bool,
    centered: bool,
}

/// Diagnostics collected while reading a `.vec` stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Row count announced by the header.
    pub declared_rows: usize,
    /// Duplicate words that were skipped (first occurrence wins).
    pub duplicates: usize,
}

impl EmbeddingSpace {
    /// Builds a space from words and a matching matrix.
    ///
    /// Fails if the row count differs from the vocabulary size or a word
    /// occurs twice.
    pub fn new(words: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if words.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: words.len(),
                actual: matrix.nrows(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate word {w:?}")));
            }
        }
        Ok(EmbeddingSpace {
            words,
            index,
            matrix,
            lang: String::new(),
            l2_normalized: false,
            centered: false,
        })
    }

    pub fn with_lang(mut self, lang: impl Into<String>) -> Self {
        self.lang = lang.into();
        self
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_l2_normalized(&self) -> bool {
        self.l2_normalized
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.index_of(word).map(|i| self.matrix.row(i))
    }

    /// Reads a FastText `.vec` stream, keeping at most `limit` rows.
    ///
    /// Duplicate words keep their first occurrence. A header whose row count
    /// disagrees with the actual number of rows is reported and otherwise
    /// ignored.
    pub fn read_vec<R: BufRead>(reader: R, limit: Option<usize>) -> Result<(Self, LoadReport)> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(Error::EmptyInput),
        };
        let (declared_rows, dim) = parse_header(&header)?;
        let limit = limit.unwrap_or(usize::MAX);

        let mut words = Vec::new();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        let mut report = LoadReport {
            declared_rows,
            duplicates: 0,
        };
        let mut rows_seen = 0;

        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let lineno = lineno + 2;
            let line = line.trim_end_matches(['\r', ' ']);
            if line.is_empty() {
                continue;
            }
            if words.len() >= limit {
                break;
            }
            rows_seen += 1;
            let mut parts = line.split(' ').filter(|p| !p.is_empty());
            let word = parts.next().expect("non-empty line has a first field");
            let start = data.len();
            for p in parts {
                let v: f64 = p.parse().map_err(|_| Error::Format {
                    line: lineno,
                    msg: format!("cannot parse component {p:?}"),
                })?;
                if !v.is_finite() {
                    data.truncate(start);
                    return Err(Error::Format {
                        line: lineno,
                        msg: format!("non-finite component {p:?}"),
                    });
                }
                data.push(v);
            }
            let found = data.len() - start;
            if found != dim {
                return Err(Error::Format {
                    line: lineno,
                    msg: format!("expected {dim} components, found {found}"),
                });
            }
            if index.contains_key(word) {
                warn!("line {lineno}: duplicate word {word:?} skipped");
                data.truncate(start);
                report.duplicates += 1;
                continue;
            }
            index.insert(word.to_string(), words.len());
            words.push(word.to_string());
        }

        if limit == usize::MAX && rows_seen != declared_rows {
            warn!("header declares {declared_rows} rows, found {rows_seen}");
        }

        let matrix = Array2::from_shape_vec((words.len(), dim), data)
            .expect("row length checked while parsing");
        Ok((
            EmbeddingSpace {
                words,
                index,
                matrix,
                lang: String::new(),
                l2_normalized: false,
                centered: false,
            },
            report,
        ))
    }

    /// Writes the space in `.vec` format with LF line endings.
    ///
    /// Components use the shortest decimal form that parses back to the
    /// same `f64`, so a write/read cycle is lossless.
    pub fn write_vec<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim())?;
        for (word, row) in self.words.iter().zip(self.matrix.rows()) {
            write!(writer, "{word}")?;
            for v in row {
                write!(writer, " {v}")?;
            }
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Optionally centers the columns, then scales every row to unit length.
    pub fn normalize(&self, center: bool) -> Result<Self> {
        let mut m = self.matrix.clone();
        if center && m.nrows() > 0 {
            let mean = m.mean_axis(Axis(0)).expect("non-empty matrix");
            m -= &mean;
        }
        for (i, mut row) in m.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm < ZERO_NORM {
                return Err(Error::ZeroNorm {
                    row: i,
                    word: self.words[i].clone(),
                });
            }
            row /= norm;
        }
        Ok(EmbeddingSpace {
            words: self.words.clone(),
            index: self.index.clone(),
            matrix: m,
            lang: self.lang.clone(),
            l2_normalized: true,
            centered: self.centered || center,
        })
    }

    /// Keeps the first `n` rows. The second value is how many rows short of
    /// `n` the space was (0 when it had enough).
    pub fn restrict_top_n(&self, n: usize) -> Result<(Self, usize)> {
        if n == 0 {
            return Err(Error::InvalidArgument("top-n must be positive".into()));
        }
        if n >= self.len() {
            let shortfall = n - self.len();
            if shortfall > 0 {
                log::info!("requested {n} rows, space only has {}", self.len());
            }
            return Ok((self.clone(), shortfall));
        }
        let words = self.words[..n].to_vec();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok((
            EmbeddingSpace {
                words,
                index,
                matrix: self.matrix.slice(ndarray::s![..n, ..]).to_owned(),
                lang: self.lang.clone(),
                l2_normalized: self.l2_normalized,
                centered: self.centered,
            },
            0,
        ))
    }

    /// Returns a space with the same vocabulary and a new matrix. Flags are
    /// reset.
    pub(crate) fn with_matrix(&self, matrix: Array2<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), self.len());
        EmbeddingSpace {
            words: self.words.clone(),
            index: self.index.clone(),
            matrix,
            lang: self.lang.clone(),
            l2_normalized: false,
            centered: false,
        }
    }

    /// The rows of `words`, in that order, as a new space with the same
    /// flags.
    pub fn subset(&self, words: &[&str]) -> Result<Self> {
        let matrix = self
            .gather(words)
            .ok_or_else(|| Error::InvalidArgument("subset word not in vocabulary".into()))?;
        let mut out = EmbeddingSpace::new(words.iter().map(|w| w.to_string()).collect(), matrix)?;
        out.lang = self.lang.clone();
        out.l2_normalized = self.l2_normalized;
        out.centered = self.centered;
        Ok(out)
    }

    /// Stacks the rows for `words` into a matrix. Every word must be present.
    pub fn gather(&self, words: &[&str]) -> Option<Array2<f64>> {
        let mut out = Array2::zeros((words.len(), self.dim()));
        for (mut dst, w) in out.rows_mut().into_iter().zip(words) {
            dst.assign(&self.vector(w)?);
        }
        Some(out)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format {
        line: 1,
        msg: format!("malformed header {line:?}, expected \"<rows> <dim>\""),
    };
    let mut parts = line.split_whitespace();
    let n = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let d = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((n, d))
}

pub(crate) fn row_norm(row: ArrayView1<'_, f64>) -> f64 {
    row.dot(&row).sqrt()
}

/// Scales each row of `m` to unit length, leaving zero rows untouched.
pub(crate) fn normalize_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let n = row_norm(row.view());
        if n >= ZERO_NORM {
            row /= n;
        }
    }
    m
}

#[cfg(test)]
fn column_mean(m: &Array2<f64>) -> ndarray::Array1<f64> {
    m.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(m.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn load(s: &str, limit: Option<usize>) -> Result<(EmbeddingSpace, LoadReport)> {
        EmbeddingSpace::read_vec(s.as_bytes(), limit)
    }

    fn space(rows: Array2<f64>) -> EmbeddingSpace {
        let words = (0..rows.nrows()).map(|i| format!("w{i}")).collect();
        EmbeddingSpace::new(words, rows).unwrap()
    }

    #[test]
    fn minimal_file() {
        let (s, r) = load("2 3\ncat 1 0 0\ndog 0 1 0\n", None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 3);
        assert_eq!(s.words(), ["cat", "dog"]);
        assert_eq!(r.duplicates, 0);
        assert!(!s.is_l2_normalized() && !s.is_centered());
    }

    #[test]
    fn limit_truncates() {
        let (s, _) = load("2 3\ncat 1 0 0\ndog 0 1 0\n", Some(1)).unwrap();
        assert_eq!(s.words(), ["cat"]);
    }

    #[test]
    fn duplicate_keeps_first() {
        let (s, r) = load("2 2\na 1 0\na 0 1\n", None).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.matrix().row(0), array![1.0, 0.0]);
        assert_eq!(r.duplicates, 1);
    }

    #[test]
    fn trailing_space_and_crlf_accepted() {
        let (s, _) = load("1 2\r\nx 0.5 0.25 \r\n", None).unwrap();
        assert_eq!(s.matrix().row(0), array![0.5, 0.25]);
    }

    #[test]
    fn header_mismatch_trusts_rows() {
        let (s, r) = load("5 2\na 1 0\nb 0 1\n", None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(r.declared_rows, 5);
    }

    #[test]
    fn errors() {
        assert!(matches!(load("", None), Err(Error::EmptyInput)));
        assert!(matches!(load("two 3\n", None), Err(Error::Format { line: 1, .. })));
        assert!(matches!(load("1\n", None), Err(Error::Format { line: 1, .. })));
        assert!(matches!(load("1 3\na 1 2\n", None), Err(Error::Format { line: 2, .. })));
        assert!(matches!(load("1 2\na 1 NaN\n", None), Err(Error::Format { line: 2, .. })));
        assert!(matches!(load("1 2\na 1 inf\n", None), Err(Error::Format { .. })));
        assert!(matches!(load("1 2\na 1 x\n", None), Err(Error::Format { .. })));
    }

    #[test]
    fn normalize_examples() {
        let s = space(array![[3.0, 4.0]]).normalize(false).unwrap();
        assert_abs_diff_eq!(s.matrix()[[0, 0]], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.matrix()[[0, 1]], 0.8, epsilon = 1e-15);
        assert!(s.is_l2_normalized() && !s.is_centered());

        let s = space(array![[1.0, 0.0], [-1.0, 0.0]]).normalize(true).unwrap();
        assert_eq!(s.matrix(), &array![[1.0, 0.0], [-1.0, 0.0]]);
        assert!(s.is_centered());

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = space(array![[2.0, 0.0], [0.0, 2.0]]).normalize(true).unwrap();
        assert_abs_diff_eq!(s.matrix(), &array![[h, -h], [-h, h]], epsilon = 1e-15);
    }

    #[test]
    fn normalize_zero_row_fails() {
        assert!(matches!(
            space(array![[0.0, 0.0]]).normalize(false),
            Err(Error::ZeroNorm { row: 0, .. })
        ));
        // identical rows vanish after centering
        assert!(matches!(
            space(array![[1.0, 2.0], [1.0, 2.0]]).normalize(true),
            Err(Error::ZeroNorm { .. })
        ));
    }

    #[test]
    fn restrict() {
        let s = space(Array2::from_shape_fn((5, 2), |(i, j)| (i + j) as f64 + 1.0));
        let (r, short) = s.restrict_top_n(3).unwrap();
        assert_eq!(r.words(), ["w0", "w1", "w2"]);
        assert_eq!(short, 0);
        assert_eq!(r.index_of("w2"), Some(2));
        assert_eq!(r.index_of("w3"), None);
        let (r, short) = s.restrict_top_n(10).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(short, 5);
        assert!(s.restrict_top_n(0).is_err());
    }

    #[test]
    fn restrict_small_vocabulary_keeps_everything() {
        // a 79,030-word model asked for 200k rows
        let s = space(Array2::zeros((79_030, 1)));
        let (r, short) = s.restrict_top_n(200_000).unwrap();
        assert_eq!(r.len(), 79_030);
        assert_eq!(short, 200_000 - 79_030);
    }

    #[test]
    fn save_format() {
        let (s, _) = load("2 3\ncat 1 0 0\ndog 0 1 0\n", None).unwrap();
        let mut out = Vec::new();
        s.write_vec(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("2 3\ncat "));
        assert!(!text.contains('\r'));

        let empty = space(Array2::zeros((0, 4)));
        let mut out = Vec::new();
        empty.write_vec(&mut out).unwrap();
        assert_eq!(out, b"0 4\n");
        let (back, _) = load("0 4\n", None).unwrap();
        assert_eq!(back.dim(), 4);
        assert!(back.is_empty());
    }

    #[test]
    fn gather_rows() {
        let s = space(array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(s.gather(&["w1", "w0"]).unwrap(), array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(s.gather(&["nope"]).is_none());
    }

    fn arb_matrix() -> impl Strategy<Value = Array2<f64>> {
        (1usize..8, 1usize..6).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-10.0f64..10.0, n * d)
                .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn vec_round_trip(m in arb_matrix()) {
            let s = space(m);
            let mut out = Vec::new();
            s.write_vec(&mut out).unwrap();
            let (back, _) = load(std::str::from_utf8(&out).unwrap(), None).unwrap();
            prop_assert_eq!(back.words(), s.words());
            let delta = (back.matrix() - s.matrix()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            prop_assert!(delta < 1e-6);
        }

        #[test]
        fn normalize_idempotent_and_cosine(m in arb_matrix(), center: bool) {
            let s = space(m.clone());
            let Ok(n1) = s.normalize(center) else { return Ok(()) };
            let n2 = n1.normalize(false).unwrap();
            let delta = (n2.matrix() - n1.matrix()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            prop_assert!(delta < 1e-9);

            // dot products of stored rows are cosines of the pre-scaling rows
            let base = if center { &m - &column_mean(&m) } else { m };
            for i in 0..base.nrows() {
                for j in 0..base.nrows() {
                    let (u, v) = (base.row(i), base.row(j));
                    let cos = u.dot(&v) / (row_norm(u) * row_norm(v));
                    prop_assert!((cos - n1.matrix().row(i).dot(&n1.matrix().row(j))).abs() < 1e-9);
                }
            }
        }
    }
}
