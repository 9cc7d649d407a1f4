//! Parallel corpora: reading, normalization and hold-out splits.
//!
//! Text is expected to be tokenized upstream. Normalization here only
//! splits on whitespace, lowercases, and strips accents. Accent stripping
//! is canonical decomposition (NFD), removal of every combining mark, then
//! canonical recomposition (NFC), which makes it a fixed point on its own
//! output.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Normalization applied to every token read from a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeProfile {
    pub lowercase: bool,
    pub strip_accents: bool,
}

impl Default for NormalizeProfile {
    fn default() -> Self {
        NormalizeProfile {
            lowercase: true,
            strip_accents: true,
        }
    }
}

impl NormalizeProfile {
    pub const NONE: NormalizeProfile = NormalizeProfile {
        lowercase: false,
        strip_accents: false,
    };

    pub fn normalize_token(&self, token: &str) -> String {
        let lowered = if self.lowercase {
            token.to_lowercase()
        } else {
            token.to_owned()
        };
        if self.strip_accents {
            lowered
                .nfd()
                .filter(|c| !is_combining_mark(*c))
                .nfc()
                .collect()
        } else {
            lowered
        }
    }
}

/// An ordered sequence of non-empty, whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new() -> Self {
        TokenSeq(Vec::new())
    }

    /// Builds a sequence, rejecting empty tokens and tokens containing whitespace.
    pub fn from_tokens<I, S>(tokens: I) -> std::result::Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for t in &tokens {
            if !is_valid_token(t) {
                return Err(format!("invalid token {t:?}"));
            }
        }
        Ok(TokenSeq(tokens))
    }

    /// Whitespace split with no normalization.
    pub fn from_line(line: &str) -> Self {
        TokenSeq(line.split_whitespace().map(str::to_owned).collect())
    }

    pub fn push(&mut self, token: impl Into<String>) {
        let token = token.into();
        assert!(is_valid_token(&token), "invalid token {token:?}");
        self.0.push(token);
    }

    pub fn extend_from_slice(&mut self, tokens: &[String]) {
        for t in tokens {
            self.push(t.clone());
        }
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }

    /// Copy of the tokens in `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> TokenSeq {
        TokenSeq(self.0[start..end].to_vec())
    }

    /// Replaces `[start, end)` with `replacement`.
    pub fn splice(&self, start: usize, end: usize, replacement: &[String]) -> TokenSeq {
        let mut out = Vec::with_capacity(self.0.len() - (end - start) + replacement.len());
        out.extend_from_slice(&self.0[..start]);
        out.extend_from_slice(replacement);
        out.extend_from_slice(&self.0[end..]);
        TokenSeq(out)
    }

    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

fn is_valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = String;

    fn try_from(v: Vec<String>) -> std::result::Result<Self, String> {
        TokenSeq::from_tokens(v)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(s: TokenSeq) -> Vec<String> {
        s.0
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Splits on whitespace and normalizes each token. Tokens that normalize to
/// nothing (a lone combining mark, say) are dropped.
pub fn tokenize_normalize(raw_line: &str, profile: NormalizeProfile) -> TokenSeq {
    TokenSeq(
        raw_line
            .split_whitespace()
            .map(|t| profile.normalize_token(t))
            .filter(|t| is_valid_token(t))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub src: TokenSeq,
    pub tgt: TokenSeq,
    /// 0-based line index in the files the pair was read from.
    pub line_no: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    pub src_lang: String,
    pub tgt_lang: String,
    pub dropped_count: usize,
}

impl ParallelCorpus {
    /// Builds a corpus from in-memory pairs, numbering lines from 0 and
    /// dropping pairs with an empty side.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (TokenSeq, TokenSeq)>,
    {
        let mut corpus = ParallelCorpus::default();
        for (line_no, (src, tgt)) in pairs.into_iter().enumerate() {
            if src.is_empty() || tgt.is_empty() {
                corpus.dropped_count += 1;
            } else {
                corpus.pairs.push(SentencePair { src, tgt, line_no });
            }
        }
        corpus
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SentencePair> {
        self.pairs.iter()
    }

    /// Corpus with source and target swapped.
    pub fn reversed(&self) -> ParallelCorpus {
        ParallelCorpus {
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair {
                    src: p.tgt.clone(),
                    tgt: p.src.clone(),
                    line_no: p.line_no,
                })
                .collect(),
            src_lang: self.tgt_lang.clone(),
            tgt_lang: self.src_lang.clone(),
            dropped_count: self.dropped_count,
        }
    }

    fn subset(&self, mut indices: Vec<usize>) -> ParallelCorpus {
        indices.sort_unstable();
        ParallelCorpus {
            pairs: indices.into_iter().map(|i| self.pairs[i].clone()).collect(),
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
            dropped_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Src,
    Tgt,
}

pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

fn lang_of(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_owned()
}

/// Reads a sentence-aligned corpus from two files, one sentence per line.
pub fn read_parallel(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    profile: NormalizeProfile,
) -> Result<ParallelCorpus> {
    let (src_path, tgt_path) = (src_path.as_ref(), tgt_path.as_ref());
    let src_lines = read_lines(src_path)?;
    let tgt_lines = read_lines(tgt_path)?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::LineCountMismatch {
            src_path: src_path.to_owned(),
            tgt_path: tgt_path.to_owned(),
            src_lines: src_lines.len(),
            tgt_lines: tgt_lines.len(),
        });
    }
    let mut corpus = ParallelCorpus::from_pairs(src_lines.iter().zip(&tgt_lines).map(|(s, t)| {
        (
            tokenize_normalize(s, profile),
            tokenize_normalize(t, profile),
        )
    }));
    corpus.src_lang = lang_of(src_path);
    corpus.tgt_lang = lang_of(tgt_path);
    Ok(corpus)
}

/// Writes token sequences one per line, space-joined, LF-terminated.
pub fn write_lines<'a, I>(path: impl AsRef<Path>, lines: I) -> Result<()>
where
    I: IntoIterator<Item = &'a TokenSeq>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_side(corpus: &ParallelCorpus, side: Side, path: impl AsRef<Path>) -> Result<()> {
    write_lines(
        path,
        corpus.pairs.iter().map(|p| match side {
            Side::Src => &p.src,
            Side::Tgt => &p.tgt,
        }),
    )
}

/// Reads a file of whitespace-tokenized lines without normalization.
pub fn read_token_lines(path: impl AsRef<Path>) -> Result<Vec<TokenSeq>> {
    Ok(read_lines(path.as_ref())?
        .iter()
        .map(|l| TokenSeq::from_line(l))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Holdout {
    pub train: ParallelCorpus,
    pub valid: ParallelCorpus,
    pub test: ParallelCorpus,
}

/// Random hold-out split.
///
/// Pair indices are shuffled with `rand`'s Fisher-Yates shuffle driven by
/// ChaCha8 seeded from `seed`; the first `n_valid` shuffled indices form
/// the validation set, the next `n_test` the test set, the rest training.
/// Each part keeps the original file order.
pub fn split_holdout(
    corpus: &ParallelCorpus,
    n_valid: usize,
    n_test: usize,
    seed: u64,
) -> Result<Holdout> {
    let requested = n_valid + n_test;
    if requested > corpus.len() {
        return Err(Error::InsufficientData {
            requested,
            available: corpus.len(),
        });
    }
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_idx = indices.split_off(n_valid + n_test);
    let test_idx = indices.split_off(n_valid);
    let valid_idx = indices;
    Ok(Holdout {
        train: corpus.subset(train_idx),
        valid: corpus.subset(valid_idx),
        test: corpus.subset(test_idx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_owned).collect()
    }

    #[test]
    fn lowercases_pre_tokenized_line() {
        let seq = tokenize_normalize(
            "Myanmar was a HIGHLY civilized country .",
            NormalizeProfile::default(),
        );
        assert_eq!(
            seq.as_slice(),
            toks("myanmar was a highly civilized country .")
        );
        let seq = tokenize_normalize(
            "Myanmar was a HIGHLY civilized country.",
            NormalizeProfile::default(),
        );
        assert_eq!(seq.as_slice(), toks("myanmar was a highly civilized country."));
    }

    #[test]
    fn strips_accents() {
        let seq = tokenize_normalize("Café", NormalizeProfile::default());
        assert_eq!(seq.as_slice(), ["cafe"]);
        // precomposed and decomposed input agree
        let seq = tokenize_normalize("Cafe\u{301}", NormalizeProfile::default());
        assert_eq!(seq.as_slice(), ["cafe"]);
    }

    #[test]
    fn profile_flags_are_independent() {
        let only_lower = NormalizeProfile {
            lowercase: true,
            strip_accents: false,
        };
        assert_eq!(tokenize_normalize("Café", only_lower).as_slice(), ["café"]);
        let only_strip = NormalizeProfile {
            lowercase: false,
            strip_accents: true,
        };
        assert_eq!(tokenize_normalize("Café", only_strip).as_slice(), ["Cafe"]);
        assert_eq!(
            tokenize_normalize("Café", NormalizeProfile::NONE).as_slice(),
            ["Café"]
        );
    }

    #[test]
    fn cjk_is_untouched() {
        assert_eq!(
            tokenize_normalize("缅甸 是 一个", NormalizeProfile::default()).as_slice(),
            ["缅甸", "是", "一个"]
        );
    }

    #[test]
    fn empty_line() {
        assert!(tokenize_normalize("", NormalizeProfile::default()).is_empty());
        assert!(tokenize_normalize("  \t ", NormalizeProfile::default()).is_empty());
    }

    #[test]
    fn lone_combining_mark_is_dropped() {
        let seq = tokenize_normalize("a \u{301} b", NormalizeProfile::default());
        assert_eq!(seq.as_slice(), ["a", "b"]);
    }

    #[test]
    fn token_seq_rejects_bad_tokens() {
        assert!(TokenSeq::from_tokens(["a", ""]).is_err());
        assert!(TokenSeq::from_tokens(["a b"]).is_err());
        assert!(TokenSeq::from_tokens(["a", "b"]).is_ok());
    }

    #[test]
    fn split_sizes() {
        let corpus = ParallelCorpus::from_pairs((0..10).map(|i| {
            (
                TokenSeq::from_line(&format!("s{i}")),
                TokenSeq::from_line(&format!("t{i}")),
            )
        }));
        let h = split_holdout(&corpus, 2, 2, 7).unwrap();
        assert_eq!((h.train.len(), h.valid.len(), h.test.len()), (6, 2, 2));
        let again = split_holdout(&corpus, 2, 2, 7).unwrap();
        assert_eq!(h, again);

        let all = split_holdout(&corpus, 5, 5, 1).unwrap();
        assert!(all.train.is_empty());

        assert!(matches!(
            split_holdout(&corpus, 6, 5, 1),
            Err(Error::InsufficientData {
                requested: 11,
                available: 10
            })
        ));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let p = NormalizeProfile::default();
            let once = tokenize_normalize(&s, p);
            let twice = tokenize_normalize(&once.joined(), p);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn joined_resplit_roundtrip(s in "[a-zé缅 ]{0,30}") {
            let seq = tokenize_normalize(&s, NormalizeProfile::default());
            prop_assert_eq!(TokenSeq::from_line(&seq.joined()), seq);
        }

        #[test]
        fn split_is_a_partition(n in 0usize..60, frac_v in 0.0f64..0.5, frac_t in 0.0f64..0.5, seed in any::<u64>()) {
            let corpus = ParallelCorpus::from_pairs((0..n).map(|i| {
                (TokenSeq::from_line(&format!("s{i}")), TokenSeq::from_line(&format!("t{i}")))
            }));
            let nv = (n as f64 * frac_v) as usize;
            let nt = (n as f64 * frac_t) as usize;
            let h = split_holdout(&corpus, nv, nt, seed).unwrap();
            let mut all: Vec<usize> = h.train.iter().chain(h.valid.iter()).chain(h.test.iter())
                .map(|p| p.line_no).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(h.valid.len(), nv);
            prop_assert_eq!(h.test.len(), nt);
        }
    }
}
