//! Supervised alignment of two monolingual word-embedding spaces.
//!
//! The crate covers the whole pipeline:
//!
//! * [`induction`]: seed dictionaries from parallel corpora (PPMI or the
//!   conditional-probability product) and dictionary statistics;
//! * [`embed`]: FastText `.vec` I/O, centering and unit normalization;
//! * [`alignment`]: least squares, orthogonal Procrustes, RCSLS with an
//!   optional spectral projection, and mutual-NN refinement;
//! * [`retrieval`] and [`eval`]: NN and CSLS word translation, P@k and
//!   rank distributions.
//!
//! Vectors are stored as rows and a map `W` sends `x` to `x W^T`.

pub mod alignment;
pub mod dictionary;
pub mod embed;
pub mod error;
pub mod eval;
pub mod induction;
pub mod knn;
pub mod linalg;
pub mod retrieval;
pub mod synth;

pub use alignment::{LinearMap, Method};
pub use dictionary::BilingualDictionary;
pub use embed::EmbeddingSpace;
pub use error::{Error, Result};
pub use retrieval::Criterion;
