//! Tagging templates, corpus tagging and post-translation detagging.
//!
//! Rendered regions, with `E` the entity, `T` its target-side translation
//! and `H` its source-language hypernym:
//!
//! | method   | region                                  |
//! |----------|-----------------------------------------|
//! | Tag      | `start E end`                           |
//! | Add      | `start E mid1 H end`                    |
//! | Trans    | `start E mid1 T end`                    |
//! | TransA   | `start E mid1 T mid2 H end`             |
//! | TransR   | `start H mid1 T end`                    |
//! | HypA     | `E H` (no delimiters)                   |
//!
//! The target side carries the same region in place of the entity's
//! translation, except HypA, which keeps the translation and appends the
//! translated hypernym.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::AlignmentSet;
use crate::corpus::{ParallelCorpus, SentencePair, TokenSeq};
use crate::error::{Error, Result};
use crate::lexicon::TranslationTable;
use crate::link::{EntityMention, MentionBundle, SentenceAnnotations, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateMethod {
    Baseline,
    Tag,
    Add,
    Trans,
    TransA,
    TransR,
    HypA,
}

/// Which parts of a bundle a method's template carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Components {
    pub entity: bool,
    pub translation: bool,
    pub hypernym: bool,
}

impl TemplateMethod {
    pub const ALL: [TemplateMethod; 7] = [
        TemplateMethod::Baseline,
        TemplateMethod::Tag,
        TemplateMethod::Add,
        TemplateMethod::Trans,
        TemplateMethod::TransA,
        TemplateMethod::TransR,
        TemplateMethod::HypA,
    ];

    /// The six tagging methods, without Baseline.
    pub const TAGGING: [TemplateMethod; 6] = [
        TemplateMethod::Tag,
        TemplateMethod::Add,
        TemplateMethod::Trans,
        TemplateMethod::TransA,
        TemplateMethod::TransR,
        TemplateMethod::HypA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateMethod::Baseline => "baseline",
            TemplateMethod::Tag => "tag",
            TemplateMethod::Add => "add",
            TemplateMethod::Trans => "trans",
            TemplateMethod::TransA => "transa",
            TemplateMethod::TransR => "transr",
            TemplateMethod::HypA => "hypa",
        }
    }

    /// Whether the method wraps entities in delimiter tokens.
    pub fn has_delimiters(self) -> bool {
        !matches!(self, TemplateMethod::Baseline | TemplateMethod::HypA)
    }

    /// Components scored by copy accuracy. Baseline is scored on whether
    /// the reference translation appears at all.
    pub fn components(self) -> Components {
        let (entity, translation, hypernym) = match self {
            TemplateMethod::Baseline => (false, true, false),
            TemplateMethod::Tag => (true, false, false),
            TemplateMethod::Add => (true, false, true),
            TemplateMethod::Trans => (true, true, false),
            TemplateMethod::TransA => (true, true, true),
            TemplateMethod::TransR => (false, true, true),
            TemplateMethod::HypA => (false, true, true),
        };
        Components {
            entity,
            translation,
            hypernym,
        }
    }

    fn separators(self) -> &'static [Separator] {
        match self {
            TemplateMethod::Tag => &[],
            TemplateMethod::Add | TemplateMethod::Trans | TemplateMethod::TransR => {
                &[Separator::Mid1]
            }
            TemplateMethod::TransA => &[Separator::Mid1, Separator::Mid2],
            TemplateMethod::Baseline | TemplateMethod::HypA => &[],
        }
    }
}

impl fmt::Display for TemplateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        TemplateMethod::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| format!("unknown template method {s:?}"))
    }
}

/// The four reserved delimiter tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagVocabulary {
    pub start: String,
    pub mid1: String,
    pub mid2: String,
    pub end: String,
}

impl Default for TagVocabulary {
    /// Reserved tokens already present in the XLM-R vocabulary.
    fn default() -> Self {
        TagVocabulary::xlm()
    }
}

impl TagVocabulary {
    pub fn xlm() -> Self {
        TagVocabulary {
            start: "<special2>".into(),
            mid1: "<special3>".into(),
            mid2: "<special4>".into(),
            end: "<special5>".into(),
        }
    }

    pub fn plain() -> Self {
        TagVocabulary {
            start: "<start>".into(),
            mid1: "<mid1>".into(),
            mid2: "<mid2>".into(),
            end: "<end>".into(),
        }
    }

    pub fn tokens(&self) -> [&str; 4] {
        [&self.start, &self.mid1, &self.mid2, &self.end]
    }

    pub fn is_reserved(&self, token: &str) -> bool {
        self.tokens().contains(&token)
    }

    pub fn validate(&self) -> Result<()> {
        let toks = self.tokens();
        for (i, t) in toks.iter().enumerate() {
            if TokenSeq::from_tokens([*t]).is_err() {
                return Err(Error::InvalidParams(format!("invalid tag token {t:?}")));
            }
            if toks[..i].contains(t) {
                return Err(Error::InvalidParams(format!("tag token {t:?} used twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separator {
    Mid1,
    Mid2,
}

fn required<'a>(
    method: TemplateMethod,
    component: &'static str,
    value: Option<&'a TokenSeq>,
) -> Result<&'a TokenSeq> {
    value.filter(|v| !v.is_empty()).ok_or(Error::MissingComponent {
        method: method.name(),
        component,
    })
}

/// Tokens that replace the entity span on the source side. For delimited
/// methods the target side uses the same tokens.
pub fn region_tokens(
    method: TemplateMethod,
    bundle: &MentionBundle,
    vocab: &TagVocabulary,
) -> Result<Vec<String>> {
    let entity = &bundle.mention.surface;
    let hypernym = || required(method, "hypernym", bundle.mention.hypernym.as_ref());
    let translation = || required(method, "translation", Some(&bundle.translation));
    let mut out: Vec<String> = Vec::new();
    let open = |out: &mut Vec<String>| out.push(vocab.start.clone());
    match method {
        TemplateMethod::Baseline => out.extend_from_slice(entity),
        TemplateMethod::HypA => {
            out.extend_from_slice(entity);
            out.extend_from_slice(hypernym()?);
        }
        TemplateMethod::Tag => {
            open(&mut out);
            out.extend_from_slice(entity);
        }
        TemplateMethod::Add => {
            let h = hypernym()?;
            open(&mut out);
            out.extend_from_slice(entity);
            out.push(vocab.mid1.clone());
            out.extend_from_slice(h);
        }
        TemplateMethod::Trans => {
            let t = translation()?;
            open(&mut out);
            out.extend_from_slice(entity);
            out.push(vocab.mid1.clone());
            out.extend_from_slice(t);
        }
        TemplateMethod::TransA => {
            let (t, h) = (translation()?, hypernym()?);
            open(&mut out);
            out.extend_from_slice(entity);
            out.push(vocab.mid1.clone());
            out.extend_from_slice(t);
            out.push(vocab.mid2.clone());
            out.extend_from_slice(h);
        }
        TemplateMethod::TransR => {
            let (h, t) = (hypernym()?, translation()?);
            open(&mut out);
            out.extend_from_slice(h);
            out.push(vocab.mid1.clone());
            out.extend_from_slice(t);
        }
    }
    if method.has_delimiters() {
        out.push(vocab.end.clone());
    }
    Ok(out)
}

fn check_span(span: Span, len: usize, what: &str) -> Result<()> {
    if span.0 < span.1 && span.1 <= len {
        Ok(())
    } else {
        Err(Error::LengthMismatch(format!(
            "{what} span [{}, {}) outside a sentence of {len} tokens",
            span.0, span.1
        )))
    }
}

/// Replaces the bundle's entity span in `sentence` with the method's template.
pub fn render_source_template(
    method: TemplateMethod,
    bundle: &MentionBundle,
    sentence: &TokenSeq,
    vocab: &TagVocabulary,
) -> Result<TokenSeq> {
    let (start, end) = bundle.mention.span();
    check_span((start, end), sentence.len(), "entity")?;
    if method == TemplateMethod::Baseline {
        return Ok(sentence.clone());
    }
    let region = region_tokens(method, bundle, vocab)?;
    Ok(sentence.splice(start, end, &region))
}

/// Target-side counterpart of [`render_source_template`], acting on the
/// bundle's projected span.
pub fn render_target_template(
    method: TemplateMethod,
    bundle: &MentionBundle,
    tgt_sentence: &TokenSeq,
    vocab: &TagVocabulary,
) -> Result<TokenSeq> {
    let (start, end) = bundle.tgt_span;
    check_span((start, end), tgt_sentence.len(), "target")?;
    match method {
        TemplateMethod::Baseline => Ok(tgt_sentence.clone()),
        TemplateMethod::HypA => {
            required(method, "hypernym", Some(&bundle.hypernym_tgt))?;
            let mut region = tgt_sentence[start..end].to_vec();
            region.extend_from_slice(&bundle.hypernym_tgt);
            Ok(tgt_sentence.splice(start, end, &region))
        }
        _ => {
            let region = region_tokens(method, bundle, vocab)?;
            Ok(tgt_sentence.splice(start, end, &region))
        }
    }
}

/// One sentence pair after tagging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedPair {
    pub src: TokenSeq,
    pub tgt: TokenSeq,
    pub line_no: usize,
    pub method: TemplateMethod,
    /// Tagged bundles in source order.
    pub bundles: Vec<MentionBundle>,
    pub tagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagStats {
    pub total_pairs: usize,
    pub tagged_pairs: usize,
    pub tag_fraction: f64,
}

impl TagStats {
    pub fn new(total_pairs: usize, tagged_pairs: usize) -> Self {
        TagStats {
            total_pairs,
            tagged_pairs,
            tag_fraction: if total_pairs == 0 {
                0.0
            } else {
                tagged_pairs as f64 / total_pairs as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedCorpus {
    pub method: TemplateMethod,
    pub vocab: TagVocabulary,
    pub pairs: Vec<TaggedPair>,
}

/// Mentions that can be tagged in this pair: a URI, a hypernym, and an
/// accepted target projection. The criterion ignores the method, so every
/// method tags the same entities.
pub fn eligible_bundles(
    pair: &SentencePair,
    mentions: &[EntityMention],
    alignment: &AlignmentSet,
    table: &TranslationTable,
) -> Result<Vec<MentionBundle>> {
    alignment.check_bounds(pair.src.len(), pair.tgt.len())?;
    let mut sorted: Vec<&EntityMention> = mentions.iter().collect();
    sorted.sort_by_key(|m| m.span());
    let mut out: Vec<MentionBundle> = Vec::new();
    for m in sorted {
        check_span(m.span(), pair.src.len(), "entity")?;
        if m.surface.as_slice() != &pair.src[m.start..m.end] {
            return Err(Error::LengthMismatch(format!(
                "mention {:?} does not match source tokens at line {}",
                m.surface.joined(),
                pair.line_no
            )));
        }
        if out.last().is_some_and(|b| b.mention.end > m.start) {
            continue;
        }
        if let Some(b) = MentionBundle::build(m, alignment, &pair.tgt, table) {
            if out
                .iter()
                .any(|o| o.tgt_span.0 < b.tgt_span.1 && b.tgt_span.0 < o.tgt_span.1)
            {
                continue;
            }
            out.push(b);
        }
    }
    Ok(out)
}

fn render_pair(
    pair: &SentencePair,
    bundles: Vec<MentionBundle>,
    method: TemplateMethod,
    vocab: &TagVocabulary,
) -> Result<TaggedPair> {
    let mut src = pair.src.clone();
    let mut by_src: Vec<&MentionBundle> = bundles.iter().collect();
    by_src.sort_by_key(|b| std::cmp::Reverse(b.mention.start));
    for b in by_src {
        src = render_source_template(method, b, &src, vocab)?;
    }
    let mut tgt = pair.tgt.clone();
    let mut by_tgt: Vec<&MentionBundle> = bundles.iter().collect();
    by_tgt.sort_by_key(|b| std::cmp::Reverse(b.tgt_span.0));
    for b in by_tgt {
        tgt = render_target_template(method, b, &tgt, vocab)?;
    }
    Ok(TaggedPair {
        src,
        tgt,
        line_no: pair.line_no,
        method,
        tagged: !bundles.is_empty(),
        bundles,
    })
}

/// Tags every eligible mention of every pair with `method`.
///
/// `annotations` and `alignments` are parallel to `corpus.pairs`.
pub fn tag_corpus(
    corpus: &ParallelCorpus,
    annotations: &[SentenceAnnotations],
    alignments: &[AlignmentSet],
    table: &TranslationTable,
    method: TemplateMethod,
    vocab: &TagVocabulary,
) -> Result<(TaggedCorpus, TagStats)> {
    vocab.validate()?;
    if annotations.len() != corpus.len() || alignments.len() != corpus.len() {
        return Err(Error::LengthMismatch(format!(
            "{} pairs, {} annotation records, {} alignments",
            corpus.len(),
            annotations.len(),
            alignments.len()
        )));
    }
    let pairs: Vec<TaggedPair> = corpus
        .pairs
        .par_iter()
        .zip(annotations)
        .zip(alignments)
        .map(|((pair, ann), alignment)| {
            if ann.line_no != pair.line_no {
                return Err(Error::LengthMismatch(format!(
                    "annotation for line {} paired with corpus line {}",
                    ann.line_no, pair.line_no
                )));
            }
            for tok in pair.src.iter().chain(pair.tgt.iter()) {
                if vocab.is_reserved(tok) {
                    return Err(Error::TagTokenCollision {
                        token: tok.clone(),
                        line_no: pair.line_no,
                    });
                }
            }
            let bundles = eligible_bundles(pair, &ann.mentions, alignment, table)?;
            render_pair(pair, bundles, method, vocab)
        })
        .collect::<Result<_>>()?;
    let tagged = pairs.iter().filter(|p| p.tagged).count();
    let stats = TagStats::new(pairs.len(), tagged);
    Ok((
        TaggedCorpus {
            method,
            vocab: vocab.clone(),
            pairs,
        },
        stats,
    ))
}

// ---------------------------------------------------------------------------
// Parsing model output

/// A delimited region found in model output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub segments: Vec<Vec<String>>,
    pub separators: Vec<Separator>,
}

impl Region {
    pub fn matches_layout(&self, method: TemplateMethod) -> bool {
        method.has_delimiters() && self.separators == method.separators()
    }

    fn inner_tokens(&self) -> impl Iterator<Item = &String> {
        self.segments.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    Word(String),
    Region(Region),
}

/// Model output split into plain words and balanced regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedOutput {
    pub pieces: Vec<Piece>,
    /// Delimiters that could not be matched (stripped from `pieces`).
    pub stray_delimiters: usize,
}

impl ParsedOutput {
    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Region(r) => Some(r),
            Piece::Word(_) => None,
        })
    }
}

/// Splits output into words and `start … end` regions. A start without a
/// matching end before the next start, and any end or separator outside a
/// region, is stripped and counted as stray.
pub fn parse_output(tokens: &[String], vocab: &TagVocabulary) -> ParsedOutput {
    let mut pieces = Vec::new();
    let mut stray = 0;
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if *tok == vocab.start {
            let close = tokens[i + 1..]
                .iter()
                .position(|t| *t == vocab.end || *t == vocab.start)
                .map(|k| i + 1 + k)
                .filter(|&j| tokens[j] == vocab.end);
            match close {
                Some(j) => {
                    let mut segments = vec![Vec::new()];
                    let mut separators = Vec::new();
                    for t in &tokens[i + 1..j] {
                        if *t == vocab.mid1 || *t == vocab.mid2 {
                            separators.push(if *t == vocab.mid1 {
                                Separator::Mid1
                            } else {
                                Separator::Mid2
                            });
                            segments.push(Vec::new());
                        } else {
                            segments.last_mut().expect("non-empty").push(t.clone());
                        }
                    }
                    pieces.push(Piece::Region(Region {
                        segments,
                        separators,
                    }));
                    i = j + 1;
                }
                None => {
                    stray += 1;
                    i += 1;
                }
            }
        } else if vocab.is_reserved(tok) {
            stray += 1;
            i += 1;
        } else {
            pieces.push(Piece::Word(tok.clone()));
            i += 1;
        }
    }
    ParsedOutput {
        pieces,
        stray_delimiters: stray,
    }
}

/// Detagged sentence plus the number of malformed regions and stray
/// delimiters encountered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detagged {
    pub tokens: TokenSeq,
    pub malformed: usize,
}

/// Removes tags from model output.
///
/// Tag and Add regions become the word-by-word translation of their entity
/// segment (unknown words kept). Trans, TransA and TransR regions become
/// their translation segment. HypA and Baseline output is returned as is.
/// Regions whose separators do not fit the method lose their delimiters and
/// keep their content verbatim.
pub fn detag(
    output: &[String],
    method: TemplateMethod,
    table: &TranslationTable,
    vocab: &TagVocabulary,
) -> Detagged {
    if !method.has_delimiters() {
        return Detagged {
            tokens: TokenSeq::from_tokens(output.iter().cloned()).unwrap_or_default(),
            malformed: 0,
        };
    }
    let parsed = parse_output(output, vocab);
    let mut malformed = parsed.stray_delimiters;
    let mut out = TokenSeq::new();
    for piece in &parsed.pieces {
        match piece {
            Piece::Word(w) => out.push(w.clone()),
            Piece::Region(r) if r.matches_layout(method) => match method {
                TemplateMethod::Tag | TemplateMethod::Add => {
                    out.extend_from_slice(&table.translate_passthrough(&r.segments[0]))
                }
                _ => out.extend_from_slice(&r.segments[1]),
            },
            Piece::Region(r) => {
                malformed += 1;
                for t in r.inner_tokens() {
                    out.push(t.clone());
                }
            }
        }
    }
    Detagged {
        tokens: out,
        malformed,
    }
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub src_span: Span,
    pub tgt_span: Span,
    pub uri: String,
    pub entity: Vec<String>,
    pub translation: Vec<String>,
    pub hypernym: Vec<String>,
    pub hypernym_tgt: Vec<String>,
}

impl From<&MentionBundle> for BundleRecord {
    fn from(b: &MentionBundle) -> Self {
        BundleRecord {
            src_span: b.mention.span(),
            tgt_span: b.tgt_span,
            uri: b.mention.uri.clone(),
            entity: b.mention.surface.to_vec(),
            translation: b.translation.to_vec(),
            hypernym: b.mention.hypernym.as_ref().map(|h| h.to_vec()).unwrap_or_default(),
            hypernym_tgt: b.hypernym_tgt.to_vec(),
        }
    }
}

/// One tagged line of a tagged corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Position of the line in the written tagged files.
    pub index: usize,
    /// Line number in the original corpus files.
    pub line_no: usize,
    pub method: TemplateMethod,
    pub tag_vocab: TagVocabulary,
    /// Bundles in source order.
    pub bundles: Vec<BundleRecord>,
}

impl TaggedCorpus {
    pub fn manifest(&self) -> Vec<ManifestRecord> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.tagged)
            .map(|(index, p)| ManifestRecord {
                index,
                line_no: p.line_no,
                method: self.method,
                tag_vocab: self.vocab.clone(),
                bundles: p.bundles.iter().map(BundleRecord::from).collect(),
            })
            .collect()
    }

    /// Writes the tagged source and target files and the JSON Lines manifest.
    pub fn write(&self, src_path: &Path, tgt_path: &Path, manifest_path: &Path) -> Result<()> {
        crate::corpus::write_lines(src_path, self.pairs.iter().map(|p| &p.src))?;
        crate::corpus::write_lines(tgt_path, self.pairs.iter().map(|p| &p.tgt))?;
        write_manifest(manifest_path, &self.manifest())
    }
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("serializable");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}
