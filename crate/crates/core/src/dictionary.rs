//! Bilingual dictionaries of (source, target) anchor pairs.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub source: String,
    pub target: String,
    pub score: Option<f64>,
}

/// An ordered list of translation pairs without exact duplicates.
///
/// A source word may map to several targets.
#[derive(Debug, Clone, Default)]
pub struct BilingualDictionary {
    entries: Vec<Entry>,
    seen: HashSet<(String, String)>,
}

impl BilingualDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dictionary from pairs, dropping exact repeats.
    pub fn from_pairs<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut d = Self::new();
        for (s, t) in pairs {
            d.push(s, t, None);
        }
        d
    }

    /// Appends a pair; returns false if it was already present.
    pub fn push(&mut self, source: impl Into<String>, target: impl Into<String>, score: Option<f64>) -> bool {
        let (source, target) = (source.into(), target.into());
        if !self.seen.insert((source.clone(), target.clone())) {
            return false;
        }
        self.entries.push(Entry {
            source,
            target,
            score,
        });
        true
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, source: &str, target: &str) -> bool {
        self.seen.contains(&(source.to_string(), target.to_string()))
    }

    /// Unique source words in order of first appearance.
    pub fn sources(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.source.as_str()))
            .map(|e| e.source.as_str())
            .collect()
    }

    /// Unique target words in order of first appearance.
    pub fn targets(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.target.as_str()))
            .map(|e| e.target.as_str())
            .collect()
    }

    /// Source word to all of its targets, in entry order.
    pub fn translations(&self) -> HashMap<&str, Vec<&str>> {
        let mut map: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.entries {
            map.entry(&e.source).or_default().push(&e.target);
        }
        map
    }

    /// Swaps the roles of source and target.
    pub fn reversed(&self) -> Self {
        let mut d = Self::new();
        for e in &self.entries {
            d.push(e.target.clone(), e.source.clone(), e.score);
        }
        d
    }

    /// Keeps entries whose source satisfies `keep`.
    pub fn filter_sources(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let mut d = Self::new();
        for e in self.entries.iter().filter(|e| keep(&e.source)) {
            d.push(e.source.clone(), e.target.clone(), e.score);
        }
        d
    }

    /// Reads `source<TAB>target` lines. A single space also works as the
    /// separator, which covers MUSE dictionaries. An optional third column is
    /// read as a score.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut d = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').collect()
            } else {
                line.split_whitespace().collect()
            };
            let bad = |msg: &str| Error::Format {
                line: i + 1,
                msg: msg.to_string(),
            };
            if fields.len() < 2 || fields.len() > 3 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(bad("expected \"source<TAB>target\""));
            }
            let score = match fields.get(2) {
                Some(s) => Some(s.trim().parse::<f64>().map_err(|_| bad("unparsable score"))?),
                None => None,
            };
            d.push(fields[0].trim(), fields[1].trim(), score);
        }
        Ok(d)
    }

    /// Writes one `source<TAB>target` line per entry, with the score as a
    /// third column when `with_scores` is set and the entry has one.
    pub fn write<W: Write>(&self, mut writer: W, with_scores: bool) -> Result<()> {
        for e in &self.entries {
            match (with_scores, e.score) {
                (true, Some(s)) => writeln!(writer, "{}\t{}\t{}", e.source, e.target, s)?,
                _ => writeln!(writer, "{}\t{}", e.source, e.target)?,
            }
        }
        writer.flush()?;
        Ok(())
    }
}

impl<'a> IntoIterator for &'a BilingualDictionary {
    type Item = &'a Entry;
    type IntoIter = std::slice::Iter<'a, Entry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Reads a word list, one word per line; blank lines are ignored.
pub fn read_word_list<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() {
            out.insert(w.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_exact_duplicates_but_multi_target() {
        let d = BilingualDictionary::from_pairs([("a", "x"), ("a", "x"), ("a", "y")]);
        assert_eq!(d.len(), 2);
        assert_eq!(d.sources(), ["a"]);
        assert_eq!(d.translations()["a"], ["x", "y"]);
    }

    #[test]
    fn read_tab_and_space() {
        let d = BilingualDictionary::read("cat\tබළලා\ndog බල්ලා\n\nbig\tලොකු\t0.5\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.entries()[1].target, "බල්ලා");
        assert_eq!(d.entries()[2].score, Some(0.5));
        assert!(BilingualDictionary::read("lonely\n".as_bytes()).is_err());
    }

    #[test]
    fn write_then_read() {
        let mut d = BilingualDictionary::new();
        d.push("a", "x", Some(1.0));
        d.push("b", "y", None);
        let mut out = Vec::new();
        d.write(&mut out, false).unwrap();
        assert_eq!(out, b"a\tx\nb\ty\n");
        let back = BilingualDictionary::read(&out[..]).unwrap();
        assert!(back.contains("a", "x") && back.contains("b", "y"));
    }

    #[test]
    fn reversed_swaps() {
        let d = BilingualDictionary::from_pairs([("a", "x"), ("b", "x")]).reversed();
        assert_eq!(d.sources(), ["x"]);
        assert_eq!(d.translations()["x"], ["a", "b"]);
    }
}
