//! Seed-dictionary induction from segment-aligned parallel corpora.
//!
//! Counting is presence based: a word contributes at most once per segment
//! pair, and `N` is the number of segment pairs. Two association scores are
//! offered on top of the counts:
//!
//! * positive PMI, `max(log2(N c(x,y) / (c(x) c(y))), 0)`;
//! * the product of both conditional probabilities,
//!   `P(x|y) P(y|x) = c(x,y)^2 / (c(x) c(y))`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unicode_normalization::UnicodeNormalization;

use crate::dictionary::BilingualDictionary;
use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result};

/// Aligned segment pairs, already tokenized.
#[derive(Debug, Clone, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
}

/// Lowercases after NFC normalization, then splits on whitespace.
pub fn tokenize_source(line: &str) -> Vec<String> {
    let norm: String = line.nfc().collect::<String>().to_lowercase();
    norm.split_whitespace().map(str::to_string).collect()
}

/// NFC normalization and whitespace splitting, case untouched.
pub fn tokenize_target(line: &str) -> Vec<String> {
    let norm: String = line.nfc().collect();
    norm.split_whitespace().map(str::to_string).collect()
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push_raw(&mut self, src: &str, tgt: &str) {
        self.pairs.push((tokenize_source(src), tokenize_target(tgt)));
    }

    /// Reads two line-aligned files (OPUS style). Line `i` of each is one
    /// segment pair.
    pub fn read_parallel<A: BufRead, B: BufRead>(src: A, tgt: B) -> Result<Self> {
        let mut corpus = ParallelCorpus::default();
        let mut src_lines = src.lines();
        let mut tgt_lines = tgt.lines();
        let mut lineno = 0;
        loop {
            lineno += 1;
            match (src_lines.next(), tgt_lines.next()) {
                (None, None) => break,
                (Some(s), Some(t)) => corpus.push_raw(&s?, &t?),
                _ => {
                    return Err(Error::Format {
                        line: lineno,
                        msg: "parallel files have different line counts".into(),
                    })
                }
            }
        }
        Ok(corpus)
    }

    /// Reads a two-column TSV, source first.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut corpus = ParallelCorpus::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            let Some((s, t)) = line.split_once('\t') else {
                return Err(Error::Format {
                    line: i + 1,
                    msg: "expected two tab-separated columns".into(),
                });
            };
            if t.contains('\t') {
                return Err(Error::Format {
                    line: i + 1,
                    msg: "more than two columns".into(),
                });
            }
            corpus.push_raw(s, t);
        }
        Ok(corpus)
    }
}

#[derive(Debug, Clone, Default)]
struct Interner {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_string());
        self.ids.insert(w.to_string(), id);
        id
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.ids.get(w).copied()
    }
}

/// Marginal and joint presence counts over a parallel corpus.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceTable {
    n_pairs: u64,
    src: Interner,
    tgt: Interner,
    src_count: Vec<u64>,
    tgt_count: Vec<u64>,
    joint: HashMap<(u32, u32), u64>,
}

impl CooccurrenceTable {
    /// Counts presence of words and word pairs, after dropping stop-words.
    pub fn count(
        corpus: &ParallelCorpus,
        src_stopwords: &HashSet<String>,
        tgt_stopwords: &HashSet<String>,
    ) -> Self {
        let mut table = CooccurrenceTable::default();
        let mut src_ids = Vec::new();
        let mut tgt_ids = Vec::new();
        for (s, t) in &corpus.pairs {
            src_ids.clear();
            tgt_ids.clear();
            for w in s.iter().filter(|w| !src_stopwords.contains(*w)) {
                src_ids.push(table.src.intern(w));
            }
            for w in t.iter().filter(|w| !tgt_stopwords.contains(*w)) {
                tgt_ids.push(table.tgt.intern(w));
            }
            src_ids.sort_unstable();
            src_ids.dedup();
            tgt_ids.sort_unstable();
            tgt_ids.dedup();
            table.add_segment(&src_ids, &tgt_ids);
        }
        table
    }

    fn add_segment(&mut self, src_ids: &[u32], tgt_ids: &[u32]) {
        self.n_pairs += 1;
        self.src_count.resize(self.src.words.len(), 0);
        self.tgt_count.resize(self.tgt.words.len(), 0);
        for &x in src_ids {
            self.src_count[x as usize] += 1;
        }
        for &y in tgt_ids {
            self.tgt_count[y as usize] += 1;
        }
        for &x in src_ids {
            for &y in tgt_ids {
                *self.joint.entry((x, y)).or_insert(0) += 1;
            }
        }
    }

    /// Adds the counts of `other` (e.g. another shard of the same corpus).
    pub fn merge(&mut self, other: &CooccurrenceTable) {
        self.n_pairs += other.n_pairs;
        let src_map: Vec<u32> = other.src.words.iter().map(|w| self.src.intern(w)).collect();
        let tgt_map: Vec<u32> = other.tgt.words.iter().map(|w| self.tgt.intern(w)).collect();
        self.src_count.resize(self.src.words.len(), 0);
        self.tgt_count.resize(self.tgt.words.len(), 0);
        for (i, c) in other.src_count.iter().enumerate() {
            self.src_count[src_map[i] as usize] += c;
        }
        for (i, c) in other.tgt_count.iter().enumerate() {
            self.tgt_count[tgt_map[i] as usize] += c;
        }
        for (&(x, y), c) in &other.joint {
            *self
                .joint
                .entry((src_map[x as usize], tgt_map[y as usize]))
                .or_insert(0) += c;
        }
    }

    /// The same counts with source and target roles exchanged.
    pub fn transposed(&self) -> Self {
        CooccurrenceTable {
            n_pairs: self.n_pairs,
            src: self.tgt.clone(),
            tgt: self.src.clone(),
            src_count: self.tgt_count.clone(),
            tgt_count: self.src_count.clone(),
            joint: self.joint.iter().map(|(&(x, y), &c)| ((y, x), c)).collect(),
        }
    }

    pub fn n_pairs(&self) -> u64 {
        self.n_pairs
    }

    pub fn src_count(&self, x: &str) -> u64 {
        self.src.get(x).map_or(0, |i| self.src_count[i as usize])
    }

    pub fn tgt_count(&self, y: &str) -> u64 {
        self.tgt.get(y).map_or(0, |i| self.tgt_count[i as usize])
    }

    pub fn joint_count(&self, x: &str, y: &str) -> u64 {
        match (self.src.get(x), self.tgt.get(y)) {
            (Some(a), Some(b)) => self.joint.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Source words with a non-zero count.
    pub fn src_words(&self) -> impl Iterator<Item = &str> {
        self.src
            .words
            .iter()
            .zip(&self.src_count)
            .filter(|(_, &c)| c > 0)
            .map(|(w, _)| w.as_str())
    }

    /// Positive PMI of a source/target pair; 0 when they never co-occur.
    pub fn ppmi(&self, x: &str, y: &str) -> f64 {
        ppmi_from_counts(
            self.n_pairs,
            self.src_count(x),
            self.tgt_count(y),
            self.joint_count(x, y),
        )
    }

    /// `c(x,y)^2 / (c(x) c(y))`; 0 when they never co-occur.
    pub fn condprob_score(&self, x: &str, y: &str) -> f64 {
        condprob_from_counts(self.src_count(x), self.tgt_count(y), self.joint_count(x, y))
    }

    /// Joint counts grouped by source id.
    fn by_source(&self) -> Vec<Vec<(u32, u64)>> {
        let mut adj = vec![Vec::new(); self.src.words.len()];
        for (&(x, y), &c) in &self.joint {
            adj[x as usize].push((y, c));
        }
        adj
    }

    /// Source ids ordered by decreasing count, then word.
    fn sources_by_frequency(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.src.words.len() as u32)
            .filter(|&i| self.src_count[i as usize] > 0)
            .collect();
        ids.sort_by(|&a, &b| {
            self.src_count[b as usize]
                .cmp(&self.src_count[a as usize])
                .then_with(|| self.src.words[a as usize].cmp(&self.src.words[b as usize]))
        });
        ids
    }

    fn induce(&self, min_joint: u64, top_k: usize, score: impl Fn(u64, u64, u64) -> Option<f64>) -> BilingualDictionary {
        let adj = self.by_source();
        let mut dict = BilingualDictionary::new();
        for x in self.sources_by_frequency() {
            let cx = self.src_count[x as usize];
            let mut cands: Vec<(u32, u64, f64)> = adj[x as usize]
                .iter()
                .filter(|&&(_, c)| c >= min_joint)
                .filter_map(|&(y, c)| score(cx, self.tgt_count[y as usize], c).map(|s| (y, c, s)))
                .collect();
            cands.sort_by(|a, b| {
                b.2.partial_cmp(&a.2)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| b.1.cmp(&a.1))
                    .then_with(|| self.tgt.words[a.0 as usize].cmp(&self.tgt.words[b.0 as usize]))
            });
            for (y, _, s) in cands.into_iter().take(top_k) {
                dict.push(
                    self.src.words[x as usize].clone(),
                    self.tgt.words[y as usize].clone(),
                    Some(s),
                );
            }
        }
        dict
    }

    /// Every target with `c(x,y) >= min_joint` and PPMI at least `threshold`,
    /// best first for each source word.
    pub fn induce_ppmi(&self, threshold: f64, min_joint: u64) -> Result<BilingualDictionary> {
        if !(threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {threshold}")));
        }
        let n = self.n_pairs;
        Ok(self.induce(min_joint, usize::MAX, |cx, cy, cxy| {
            let s = ppmi_from_counts(n, cx, cy, cxy);
            (s >= threshold).then_some(s)
        }))
    }

    /// The `top_k` targets maximizing `c(x,y)^2 / (c(x) c(y))` for each
    /// source word, subject to `c(x,y) >= min_joint`.
    pub fn induce_condprob(&self, min_joint: u64, top_k: usize) -> Result<BilingualDictionary> {
        if top_k == 0 {
            return Err(Error::InvalidArgument("top-k must be positive".into()));
        }
        Ok(self.induce(min_joint, top_k, |cx, cy, cxy| Some(condprob_from_counts(cx, cy, cxy))))
    }
}

pub fn ppmi_from_counts(n: u64, cx: u64, cy: u64, cxy: u64) -> f64 {
    if cxy == 0 || cx == 0 || cy == 0 {
        return 0.0;
    }
    let pmi = ((n as f64) * (cxy as f64) / ((cx as f64) * (cy as f64))).log2();
    pmi.max(0.0)
}

pub fn condprob_from_counts(cx: u64, cy: u64, cxy: u64) -> f64 {
    if cxy == 0 {
        return 0.0;
    }
    let c = cxy as f64;
    c * c / ((cx as f64) * (cy as f64))
}

/// Anything that can answer vocabulary membership.
pub trait Vocabulary {
    fn has(&self, word: &str) -> bool;
}

impl Vocabulary for HashSet<String> {
    fn has(&self, word: &str) -> bool {
        self.contains(word)
    }
}

impl Vocabulary for EmbeddingSpace {
    fn has(&self, word: &str) -> bool {
        self.contains(word)
    }
}

/// Per-language dictionary statistics. Percentages are in `[0, 100]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideStats {
    pub unique: usize,
    pub total: usize,
    pub unique_pct: f64,
    pub unique_pct_without_stopwords: f64,
    /// Share of unique dictionary words present in the embedding vocabulary.
    pub lookup_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryStats {
    pub source: SideStats,
    pub target: SideStats,
    /// Share of entries whose both words are in their vocabularies.
    pub joint_lookup_pct: Option<f64>,
    /// Set when the dictionary had no entries and every ratio is 0.
    pub empty: bool,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn side_stats<'a>(
    words: impl Iterator<Item = &'a str> + Clone,
    vocab: Option<&dyn Vocabulary>,
    stopwords: &HashSet<String>,
) -> SideStats {
    let total = words.clone().count();
    let uniq: HashSet<&str> = words.clone().collect();
    let total_ns = words.clone().filter(|w| !stopwords.contains(*w)).count();
    let uniq_ns = uniq.iter().filter(|w| !stopwords.contains(**w)).count();
    SideStats {
        unique: uniq.len(),
        total,
        unique_pct: pct(uniq.len(), total),
        unique_pct_without_stopwords: pct(uniq_ns, total_ns),
        lookup_pct: vocab.map(|v| pct(uniq.iter().filter(|w| v.has(w)).count(), uniq.len())),
    }
}

/// Summary statistics for a dictionary against two vocabularies.
///
/// Unique percentages divide unique words by the number of entries on that
/// side; the stop-word-free variant drops entries whose word on that side
/// is a stop-word before counting.
pub fn compute_stats(
    dict: &BilingualDictionary,
    src_vocab: Option<&dyn Vocabulary>,
    tgt_vocab: Option<&dyn Vocabulary>,
    src_stopwords: &HashSet<String>,
    tgt_stopwords: &HashSet<String>,
) -> DictionaryStats {
    let entries = dict.entries();
    let source = side_stats(entries.iter().map(|e| e.source.as_str()), src_vocab, src_stopwords);
    let target = side_stats(entries.iter().map(|e| e.target.as_str()), tgt_vocab, tgt_stopwords);
    let joint_lookup_pct = match (src_vocab, tgt_vocab) {
        (Some(sv), Some(tv)) => Some(pct(
            entries.iter().filter(|e| sv.has(&e.source) && tv.has(&e.target)).count(),
            entries.len(),
        )),
        _ => None,
    };
    DictionaryStats {
        source,
        target,
        joint_lookup_pct,
        empty: entries.is_empty(),
    }
}

impl DictionaryStats {
    /// CSV with one row per language.
    pub fn write_csv<W: Write>(&self, mut w: W, src_lang: &str, tgt_lang: &str) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        writeln!(
            w,
            "language,unique,total,unique_pct_with_stopwords,unique_pct_without_stopwords,lookup_pct,joint_lookup_pct"
        )?;
        for (lang, s) in [(src_lang, &self.source), (tgt_lang, &self.target)] {
            writeln!(
                w,
                "{},{},{},{:.2},{:.2},{},{}",
                lang,
                s.unique,
                s.total,
                s.unique_pct,
                s.unique_pct_without_stopwords,
                opt(s.lookup_pct),
                opt(self.joint_lookup_pct)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Splits a dictionary by source word into a frequency-biased training set
/// and a random disjoint test set.
///
/// The training set takes the `n_train` best-ranked unique source words
/// (lower rank = more frequent; unranked words come last, alphabetically).
/// The test set draws `n_test` of the remaining source words uniformly with
/// the given seed. Each selected word brings all of its targets.
pub fn split_train_test(
    dict: &BilingualDictionary,
    src_rank: &HashMap<String, usize>,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(BilingualDictionary, BilingualDictionary)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument("split sizes must be positive".into()));
    }
    let mut sources = dict.sources();
    if sources.len() < n_train + n_test {
        return Err(Error::InsufficientWords {
            needed: n_train + n_test,
            available: sources.len(),
        });
    }
    sources.sort_by(|a, b| {
        let ra = src_rank.get(*a).copied().unwrap_or(usize::MAX);
        let rb = src_rank.get(*b).copied().unwrap_or(usize::MAX);
        ra.cmp(&rb).then_with(|| a.cmp(b))
    });
    let train_words: HashSet<&str> = sources[..n_train].iter().copied().collect();
    let rest = &sources[n_train..];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test_words: HashSet<&str> = sample(&mut rng, rest.len(), n_test)
        .into_iter()
        .map(|i| rest[i])
        .collect();
    Ok((
        dict.filter_sources(|w| train_words.contains(w)),
        dict.filter_sources(|w| test_words.contains(w)),
    ))
}
