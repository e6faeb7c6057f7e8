use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;

use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::linalg::orthogonality_error;

/// Tolerance on `max |W^T W - I|` for a map to count as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LeastSquares,
    Procrustes,
    Rcsls,
    RcslsSpectral,
    Refined,
    /// Loaded from a file without provenance.
    External,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LeastSquares => "lstsq",
            Method::Procrustes => "procrustes",
            Method::Rcsls => "rcsls",
            Method::RcslsSpectral => "rcsls+spectral",
            Method::Refined => "refined",
            Method::External => "external",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lstsq" => Method::LeastSquares,
            "procrustes" => Method::Procrustes,
            "rcsls" => Method::Rcsls,
            "rcsls+spectral" => Method::RcslsSpectral,
            "refined" => Method::Refined,
            "external" => Method::External,
            _ => return Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        })
    }
}

/// A `d x d` linear map between embedding spaces.
///
/// Vectors are rows: a source vector `x` maps to `x W^T`. This is the
/// transpose of the column convention `W x` and stores the same `W`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    w: Array2<f64>,
    orthogonal: bool,
    method: Method,
    params: BTreeMap<String, String>,
}

impl LinearMap {
    /// Wraps `W`. Only Procrustes-type and externally loaded maps are
    /// flagged orthogonal, and only if `W^T W` is within tolerance of `I`.
    pub fn new(w: Array2<f64>, method: Method) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::DimensionMismatch {
                expected: w.nrows(),
                actual: w.ncols(),
            });
        }
        let orthogonal = match method {
            Method::Procrustes | Method::Refined | Method::External => {
                orthogonality_error(&w) <= ORTHOGONALITY_TOL
            }
            Method::LeastSquares | Method::Rcsls | Method::RcslsSpectral => false,
        };
        Ok(LinearMap {
            w,
            orthogonal,
            method,
            params: BTreeMap::new(),
        })
    }

    pub fn identity(d: usize) -> Self {
        LinearMap::new(Array2::eye(d), Method::External).expect("square")
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &BTreeMap<String, String> {
        &self.params
    }

    pub fn set_param(&mut self, key: impl Into<String>, value: impl ToString) {
        self.params.insert(key.into(), value.to_string());
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.set_param(key, value);
        self
    }


    /// Maps every row `x` of the space to `x W^T`. Normalization flags are
    /// cleared on the result.
    pub fn apply(&self, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
        if space.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: space.dim(),
            });
        }
        Ok(space.with_matrix(space.matrix().dot(&self.w.t())))
    }

    /// Writes `"d d"` followed by the rows of `W`.
    pub fn write_matrix<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        writeln!(out, "{d} {d}")?;
        for row in self.w.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_matrix<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::EmptyInput)??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format {
                line: 1,
                msg: format!("malformed header {header:?}"),
            })?;
        let d = match dims[..] {
            [a, b] if a == b => a,
            _ => {
                return Err(Error::Format {
                    line: 1,
                    msg: format!("expected \"d d\", got {header:?}"),
                })
            }
        };
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            let line = lines.next().ok_or(Error::Format {
                line: i + 2,
                msg: "missing matrix row".into(),
            })??;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Format {
                    line: i + 2,
                    msg: format!("cannot parse {tok:?}"),
                })?;
                data.push(v);
            }
            if data.len() - before != d {
                return Err(Error::Format {
                    line: i + 2,
                    msg: format!("expected {d} values"),
                });
            }
        }
        LinearMap::new(Array2::from_shape_vec((d, d), data).expect("d*d values"), Method::External)
    }

    /// `key=value` provenance lines, sorted by key.
    pub fn write_provenance<W: Write>(&self, mut out: W) -> Result<()> {
        let mut all = self.params.clone();
        all.insert("method".into(), self.method.to_string());
        all.insert("orthogonal".into(), self.orthogonal.to_string());
        all.insert("dim".into(), self.dim().to_string());
        for (k, v) in &all {
            writeln!(out, "{k}={v}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parses a `key=value` provenance file.
pub fn read_provenance<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Format {
            line: i + 1,
            msg: "expected key=value".into(),
        })?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}
