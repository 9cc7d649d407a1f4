//! Word translation table built from symmetrized alignments.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::align::{AlignmentSet, Direction};
use crate::corpus::{read_lines, ParallelCorpus, TokenSeq};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub target: String,
    pub count: u64,
    pub prob: f64,
}

/// Best single translation for each source word.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTable {
    pub entries: BTreeMap<String, TableEntry>,
    pub direction: Direction,
}

impl TranslationTable {
    pub fn new(direction: Direction) -> Self {
        TranslationTable {
            entries: BTreeMap::new(),
            direction,
        }
    }

    /// Inserts an entry with count 1 and probability 1.
    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>) {
        self.entries.insert(
            source.into(),
            TableEntry {
                target: target.into(),
                count: 1,
                prob: 1.0,
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact-match lookup. Corpus text is normalized before it reaches
    /// the table, so un-normalized words (e.g. capitalized) miss.
    pub fn translate_word(&self, word: &str) -> Option<&str> {
        self.entries.get(word).map(|e| e.target.as_str())
    }

    /// Word-by-word translation; untranslatable words pass through.
    pub fn translate_passthrough(&self, words: &[String]) -> TokenSeq {
        let mut out = TokenSeq::new();
        for w in words {
            out.push(self.translate_word(w).unwrap_or(w));
        }
        out
    }

    /// Word-by-word translation, or `None` if any word is missing.
    pub fn translate_all(&self, words: &[String]) -> Option<TokenSeq> {
        let mut out = TokenSeq::new();
        for w in words {
            out.push(self.translate_word(w)?);
        }
        Some(out)
    }

    /// TSV: `src \t tgt \t count \t prob`, sorted by source word, six
    /// decimals for probabilities.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for (src, e) in &self.entries {
                writeln!(w, "{src}\t{}\t{}\t{:.6}", e.target, e.count, e.prob)?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TranslationTable> {
        let path = path.as_ref();
        let mut table = TranslationTable::new(Direction::SrcToTgt);
        for (i, line) in read_lines(path)?.iter().enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::parse(path, i + 1, m);
            let (src, tgt) = match cols.as_slice() {
                [s, t, ..] if !s.is_empty() && !t.is_empty() => (*s, *t),
                _ => return Err(bad("expected src, tgt, count, prob columns")),
            };
            let count = match cols.get(2) {
                Some(c) => c.parse().map_err(|_| bad("bad count"))?,
                None => 1,
            };
            let prob = match cols.get(3) {
                Some(p) => p.parse().map_err(|_| bad("bad probability"))?,
                None => 1.0,
            };
            table.entries.insert(
                src.to_owned(),
                TableEntry {
                    target: tgt.to_owned(),
                    count,
                    prob,
                },
            );
        }
        Ok(table)
    }
}

/// Counts linked word pairs and keeps the most frequent target per source
/// word. Ties go to the target word that is more frequent in the target
/// side of the corpus, then to the lexicographically smaller one.
pub fn build_translation_table(
    corpus: &ParallelCorpus,
    alignments: &[AlignmentSet],
    min_count: u64,
) -> Result<TranslationTable> {
    if corpus.len() != alignments.len() {
        return Err(Error::LengthMismatch(format!(
            "{} sentence pairs but {} alignments",
            corpus.len(),
            alignments.len()
        )));
    }
    let mut links: HashMap<&str, HashMap<&str, u64>> = HashMap::new();
    let mut tgt_freq: HashMap<&str, u64> = HashMap::new();
    for (pair, set) in corpus.iter().zip(alignments) {
        set.check_bounds(pair.src.len(), pair.tgt.len())?;
        for t in &pair.tgt {
            *tgt_freq.entry(t).or_default() += 1;
        }
        for (s, t) in set.iter() {
            *links
                .entry(&pair.src[s])
                .or_default()
                .entry(&pair.tgt[t])
                .or_default() += 1;
        }
    }
    let mut table = TranslationTable::new(Direction::SrcToTgt);
    for (src, candidates) in links {
        let total: u64 = candidates.values().sum();
        let (target, count) = candidates
            .into_iter()
            .max_by(|(a, ca), (b, cb)| {
                ca.cmp(cb)
                    .then_with(|| tgt_freq[a].cmp(&tgt_freq[b]))
                    .then_with(|| b.cmp(a))
            })
            .expect("non-empty candidate set");
        if count < min_count {
            continue;
        }
        table.entries.insert(
            src.to_owned(),
            TableEntry {
                target: target.to_owned(),
                count,
                prob: count as f64 / total as f64,
            },
        );
    }
    Ok(table)
}
