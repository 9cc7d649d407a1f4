//! Corpus BLEU, copy accuracy, per-POS translation accuracy and a paired
//! significance test.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::align::AlignmentSet;
use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::link::Span;
use crate::template::{parse_output, BundleRecord, ManifestRecord, TemplateMethod};

fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// BLEU

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    /// 0 to 100.
    pub score: f64,
    pub precisions: Vec<f64>,
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl fmt::Display for BleuScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self
            .precisions
            .iter()
            .map(|p| format!("{:.1}", p * 100.0))
            .collect();
        let ratio = if self.ref_len == 0 {
            0.0
        } else {
            self.hyp_len as f64 / self.ref_len as f64
        };
        write!(
            f,
            "BLEU = {:.2}, {} (BP={:.3}, ratio={ratio:.3}, hyp_len={}, ref_len={})",
            self.score,
            ps.join("/"),
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len
        )
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_default() += 1;
        }
    }
    counts
}

/// Corpus-level BLEU with one reference per hypothesis. `subset` keeps only
/// the listed sentence indices.
pub fn bleu(
    hypotheses: &[TokenSeq],
    references: &[TokenSeq],
    max_n: usize,
    subset: Option<&BTreeSet<usize>>,
) -> Result<BleuScore> {
    if hypotheses.len() != references.len() {
        return Err(Error::CountMismatch(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::InvalidParams("max_n must be at least 1".into()));
    }
    let selected: Vec<usize> = (0..hypotheses.len())
        .filter(|i| subset.is_none_or(|s| s.contains(i)))
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let zero = || (vec![0u64; max_n], vec![0u64; max_n], 0u64, 0u64);
    let (matches, totals, hyp_len, ref_len) = selected
        .par_iter()
        .map(|&i| {
            let (h, r) = (&hypotheses[i], &references[i]);
            let (mut m, mut t, _, _) = zero();
            for n in 1..=max_n {
                let rc = ngram_counts(r, n);
                for (g, c) in ngram_counts(h, n) {
                    m[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
                }
                t[n - 1] = h.len().saturating_sub(n - 1) as u64;
            }
            (m, t, h.len() as u64, r.len() as u64)
        })
        .reduce(zero, |mut a, b| {
            for n in 0..max_n {
                a.0[n] += b.0[n];
                a.1[n] += b.1[n];
            }
            (a.0, a.1, a.2 + b.2, a.3 + b.3)
        });
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0)
    };
    let score = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    Ok(BleuScore {
        score,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

// ---------------------------------------------------------------------------
// Copy accuracy

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ComponentScore {
    pub matched: usize,
    pub total: usize,
}

impl ComponentScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }

    fn record(&mut self, hit: bool) {
        self.total += 1;
        self.matched += usize::from(hit);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CopyBreakdown {
    pub correct: usize,
    pub no_tag: usize,
    pub wrong_tag: usize,
}

/// Copy accuracy of one system. Components the method does not define
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopyReport {
    pub method: TemplateMethod,
    pub entity: Option<ComponentScore>,
    pub translation: Option<ComponentScore>,
    pub hypernym: Option<ComponentScore>,
    pub breakdown: CopyBreakdown,
    pub total: usize,
}

impl CopyReport {
    fn new(method: TemplateMethod) -> Self {
        let c = method.components();
        let slot = |on: bool| on.then(ComponentScore::default);
        CopyReport {
            method,
            entity: slot(c.entity),
            translation: slot(c.translation),
            hypernym: slot(c.hypernym),
            breakdown: CopyBreakdown::default(),
            total: 0,
        }
    }

    pub fn components(&self) -> [(&'static str, Option<ComponentScore>); 3] {
        [
            ("entity", self.entity),
            ("translation", self.translation),
            ("hypernym", self.hypernym),
        ]
    }

    /// Records one bundle. `hits` holds a result for each defined
    /// component, or `None` when no region or occurrence was found.
    fn add(&mut self, hits: Option<[bool; 3]>) {
        self.total += 1;
        let found = hits.unwrap_or([false; 3]);
        let slots = [&mut self.entity, &mut self.translation, &mut self.hypernym];
        let mut all = true;
        let mut any = false;
        for (slot, hit) in slots.into_iter().zip(found) {
            if let Some(s) = slot {
                s.record(hit);
                all &= hit;
                any |= hit;
            }
        }
        match hits {
            Some(_) if all => self.breakdown.correct += 1,
            Some(_) if any || self.method.has_delimiters() => self.breakdown.wrong_tag += 1,
            _ => self.breakdown.no_tag += 1,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("measure\tvalue\tmatched\ttotal\n");
        for (name, c) in self.components() {
            if let Some(c) = c {
                s += &format!(
                    "{name}\t{:.2}\t{}\t{}\n",
                    100.0 * c.accuracy(),
                    c.matched,
                    c.total
                );
            }
        }
        let b = self.breakdown;
        for (name, n) in [("correct", b.correct), ("no_tag", b.no_tag), ("wrong_tag", b.wrong_tag)] {
            s += &format!("{name}\t{:.2}\t{n}\t{}\n", percent(n, self.total), self.total);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("copy accuracy ({}, {} tagged entities)\n", self.method, self.total);
        for (name, c) in self.components() {
            if let Some(c) = c {
                s += &format!("  {name:<12}{:>7.2}%\n", 100.0 * c.accuracy());
            }
        }
        s += &format!("{:<12}{:>8}{:>8}{:>10}\n", "", "correct", "no tag", "wrong tag");
        let b = self.breakdown;
        s += &format!(
            "{:<12}{:>8}{:>8}{:>10}\n",
            "count", b.correct, b.no_tag, b.wrong_tag
        );
        s += &format!(
            "{:<12}{:>8.2}{:>8.2}{:>10.2}\n",
            "percent",
            percent(b.correct, self.total),
            percent(b.no_tag, self.total),
            percent(b.wrong_tag, self.total)
        );
        s
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_tsv())
    }
}

fn percent(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

/// Marks and returns the first unused contiguous occurrence of `needle`.
fn consume(haystack: &[String], used: &mut [bool], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    for start in 0..=haystack.len() - needle.len() {
        let range = start..start + needle.len();
        if haystack[range.clone()] == *needle && !used[range.clone()].iter().any(|&u| u) {
            used[range].iter_mut().for_each(|u| *u = true);
            return true;
        }
    }
    false
}

fn region_hits(
    method: TemplateMethod,
    segments: &[Vec<String>],
    b: &BundleRecord,
) -> [bool; 3] {
    let eq = |k: usize, want: &[String]| segments[k] == want;
    match method {
        TemplateMethod::Tag => [eq(0, &b.entity), false, false],
        TemplateMethod::Add => [eq(0, &b.entity), false, eq(1, &b.hypernym)],
        TemplateMethod::Trans => [eq(0, &b.entity), eq(1, &b.translation), false],
        TemplateMethod::TransA => [eq(0, &b.entity), eq(1, &b.translation), eq(2, &b.hypernym)],
        TemplateMethod::TransR => [false, eq(1, &b.translation), eq(0, &b.hypernym)],
        TemplateMethod::Baseline | TemplateMethod::HypA => [false; 3],
    }
}

/// Scores raw (not detagged) model output against the manifest.
///
/// `outputs` is parallel to the tagged corpus; each record picks its line
/// by `index`. Delimited methods match the k-th region of a line to its
/// k-th bundle in target order; a missing region is `no_tag`, a region with
/// any mismatched component is `wrong_tag`. Baseline and HypA look for the
/// bundle's translation (and for HypA the target-side hypernym) as unused
/// contiguous runs of output tokens; nothing found is `no_tag`, a partial
/// match is `wrong_tag`.
pub fn copy_accuracy(
    manifest: &[ManifestRecord],
    outputs: &[TokenSeq],
    method: TemplateMethod,
) -> Result<CopyReport> {
    if let Some(r) = manifest.iter().find(|r| r.index >= outputs.len()) {
        return Err(Error::CountMismatch(format!(
            "manifest refers to line {} but only {} outputs were given",
            r.index,
            outputs.len()
        )));
    }
    let per_line: Vec<Vec<Option<[bool; 3]>>> = manifest
        .par_iter()
        .map(|rec| {
            let out = &outputs[rec.index];
            let mut bundles: Vec<&BundleRecord> = rec.bundles.iter().collect();
            bundles.sort_by_key(|b| b.tgt_span);
            if method.has_delimiters() {
                let parsed = parse_output(out, &rec.tag_vocab);
                let mut regions = parsed.regions();
                bundles
                    .iter()
                    .map(|b| {
                        regions.next().map(|r| {
                            if r.matches_layout(method) {
                                region_hits(method, &r.segments, b)
                            } else {
                                [false; 3]
                            }
                        })
                    })
                    .collect()
            } else {
                let mut used = vec![false; out.len()];
                bundles
                    .iter()
                    .map(|b| {
                        let t = consume(out, &mut used, &b.translation);
                        let h = method == TemplateMethod::HypA
                            && consume(out, &mut used, &b.hypernym_tgt);
                        (t || h).then_some([false, t, h])
                    })
                    .collect()
            }
        })
        .collect();
    let mut report = CopyReport::new(method);
    for hits in per_line.into_iter().flatten() {
        report.add(hits);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// POS projection and accuracy

pub const UNALIGNED_TAG: &str = "X";

/// Carries source POS tags to target positions through an alignment.
pub fn pos_project(
    src_pos: &[String],
    alignment: &AlignmentSet,
    tgt_len: usize,
) -> Result<Vec<String>> {
    alignment.check_bounds(src_pos.len(), tgt_len)?;
    let mut best: Vec<Option<usize>> = vec![None; tgt_len];
    for (s, t) in alignment.iter() {
        let slot = &mut best[t];
        *slot = Some(slot.map_or(s, |b| b.min(s)));
    }
    Ok(best
        .into_iter()
        .map(|s| s.map_or_else(|| UNALIGNED_TAG.to_string(), |s| src_pos[s].clone()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Pre,
    Post,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Pre => "pre",
            Position::Post => "post",
        })
    }
}

fn pool(out: &TokenSeq) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for w in out.iter() {
        *m.entry(w.as_str()).or_default() += 1;
    }
    m
}

/// Uses up one output occurrence of the first linked reference word found.
fn take(pool: &mut HashMap<&str, usize>, reference: &[String], targets: &[usize]) -> bool {
    for &t in targets {
        if let Some(c) = pool.get_mut(reference[t].as_str()).filter(|c| **c > 0) {
            *c -= 1;
            return true;
        }
    }
    false
}

/// One tagged test sentence with everything POS accuracy needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PosSentence {
    /// One tag per source token.
    pub pos: Vec<String>,
    pub reference: TokenSeq,
    /// Source to reference links.
    pub alignment: AlignmentSet,
    /// Tagged entity spans on the source side.
    pub tag_spans: Vec<Span>,
    /// Detagged system output.
    pub system: TokenSeq,
    pub baseline: TokenSeq,
}

impl PosSentence {
    /// Per-token outcomes for system and baseline, keyed by POS and
    /// position. Tokens inside a tag span or linked to nothing are skipped.
    fn flags(&self) -> Vec<(String, Position, bool, bool)> {
        let Some(first) = self.tag_spans.iter().map(|s| s.0).min() else {
            return Vec::new();
        };
        let mut linked: Vec<Vec<usize>> = vec![Vec::new(); self.pos.len()];
        for (s, t) in self.alignment.iter() {
            linked[s].push(t);
        }
        let mut sys = pool(&self.system);
        let mut base = pool(&self.baseline);
        let reference = &self.reference;
        let mut out = Vec::new();
        for (i, pos) in self.pos.iter().enumerate() {
            if linked[i].is_empty() || self.tag_spans.iter().any(|&(s, e)| (s..e).contains(&i)) {
                continue;
            }
            let position = if i < first { Position::Pre } else { Position::Post };
            let s = take(&mut sys, reference, &linked[i]);
            let b = take(&mut base, reference, &linked[i]);
            out.push((pos.clone(), position, s, b));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosRow {
    pub pos: String,
    pub position: Position,
    pub sys_acc: f64,
    pub base_acc: f64,
    pub diff: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosReport {
    /// Sorted by POS tag, then position.
    pub rows: Vec<PosRow>,
}

impl PosReport {
    /// Columns `pos position sys_acc base_acc diff p n`; accuracies and
    /// their difference as percentages.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("pos\tposition\tsys_acc\tbase_acc\tdiff\tp\tn\n");
        for r in &self.rows {
            s += &format!(
                "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.4}\t{}\n",
                r.pos,
                r.position,
                100.0 * r.sys_acc,
                100.0 * r.base_acc,
                100.0 * r.diff,
                r.p,
                r.n
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<12}{:>9}{:>9}{:>8}{:>8}{:>6}\n",
            "pos", "system", "baseline", "diff", "p", "n"
        );
        for r in &self.rows {
            let mark = if r.p < 0.05 { "*" } else { " " };
            s += &format!(
                "{:<12}{:>9.2}{:>9.2}{:>+8.2}{:>8.4}{:>6}{mark}\n",
                format!("{}_{}", r.pos, r.position),
                100.0 * r.sys_acc,
                100.0 * r.base_acc,
                100.0 * r.diff,
                r.p,
                r.n
            );
        }
        s
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_tsv())
    }
}

/// Per-(POS, position) word translation accuracy of a system against a
/// baseline, around tagged entities.
pub fn pos_accuracy(sentences: &[PosSentence], resamples: usize, seed: u64) -> Result<PosReport> {
    for (k, s) in sentences.iter().enumerate() {
        s.alignment
            .check_bounds(s.pos.len(), s.reference.len())
            .map_err(|e| Error::CountMismatch(format!("sentence {k}: {e}")))?;
    }
    let flags: Vec<_> = sentences.par_iter().map(PosSentence::flags).collect();
    let mut groups: BTreeMap<(String, Position), (Vec<bool>, Vec<bool>)> = BTreeMap::new();
    for (pos, position, s, b) in flags.into_iter().flatten() {
        let g = groups.entry((pos, position)).or_default();
        g.0.push(s);
        g.1.push(b);
    }
    let rows = groups
        .into_par_iter()
        .map(|((pos, position), (sys, base))| {
            let n = sys.len();
            let acc = |f: &[bool]| f.iter().filter(|&&x| x).count() as f64 / n as f64;
            let (sys_acc, base_acc) = (acc(&sys), acc(&base));
            Ok(PosRow {
                pos,
                position,
                sys_acc,
                base_acc,
                diff: sys_acc - base_acc,
                p: significance(&sys, &base, resamples, seed)?,
                n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosReport { rows })
}

/// Builds [`PosSentence`]s for every manifest record. All slices are
/// parallel to the tagged corpus and indexed by each record's `index`.
pub fn pos_sentences(
    manifest: &[ManifestRecord],
    pos: &[Vec<String>],
    references: &[TokenSeq],
    alignments: &[AlignmentSet],
    system: &[TokenSeq],
    baseline: &[TokenSeq],
) -> Result<Vec<PosSentence>> {
    let n = pos.len();
    if [references.len(), alignments.len(), system.len(), baseline.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::CountMismatch(format!(
            "{} POS lines, {} references, {} alignments, {} system and {} baseline outputs",
            n,
            references.len(),
            alignments.len(),
            system.len(),
            baseline.len()
        )));
    }
    manifest
        .iter()
        .map(|r| {
            if r.index >= n {
                return Err(Error::CountMismatch(format!(
                    "manifest refers to line {} of {n}",
                    r.index
                )));
            }
            Ok(PosSentence {
                pos: pos[r.index].clone(),
                reference: references[r.index].clone(),
                alignment: alignments[r.index].clone(),
                tag_spans: r.bundles.iter().map(|b| b.src_span).collect(),
                system: system[r.index].clone(),
                baseline: baseline[r.index].clone(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Significance

/// Paired approximate randomization. Each resample swaps every pair's
/// labels with probability one half; the p-value is the smoothed share of
/// resamples whose absolute accuracy difference reaches the observed one.
pub fn significance(
    system_flags: &[bool],
    baseline_flags: &[bool],
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if system_flags.is_empty() {
        return Err(Error::EmptyInput);
    }
    if system_flags.len() != baseline_flags.len() {
        return Err(Error::CountMismatch(format!(
            "{} system flags but {} baseline flags",
            system_flags.len(),
            baseline_flags.len()
        )));
    }
    let diffs: Vec<i64> = system_flags
        .iter()
        .zip(baseline_flags)
        .map(|(&s, &b)| i64::from(s) - i64::from(b))
        .collect();
    let observed = diffs.iter().sum::<i64>().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..resamples {
        let sum: i64 = diffs
            .iter()
            .map(|&d| if rng.random::<bool>() { -d } else { d })
            .sum();
        if sum.abs() >= observed {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (resamples + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_line(s)
    }

    fn tags(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bleu_identity_and_zero() {
        let c = vec![seq("the cat sat on the mat"), seq("a b c d e")];
        let s = bleu(&c, &c, 4, None).unwrap();
        assert!((s.score - 100.0).abs() < 1e-9);
        assert_eq!(s.brevity_penalty, 1.0);
        let h = vec![seq("the cat sat"), seq("a b x d e")];
        assert_eq!(bleu(&h, &c, 4, None).unwrap().score, 0.0);
    }

    #[test]
    fn bleu_errors() {
        let c = vec![seq("a b")];
        assert!(matches!(bleu(&c, &[], 4, None), Err(Error::CountMismatch(_))));
        assert!(matches!(
            bleu(&c, &c, 4, Some(&BTreeSet::new())),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn bleu_subset_and_clipping() {
        let refs = vec![seq("a b c d"), seq("w x y z")];
        let hyps = vec![seq("a b c d"), seq("q q q q")];
        let only0 = BTreeSet::from([0]);
        assert!((bleu(&hyps, &refs, 4, Some(&only0)).unwrap().score - 100.0).abs() < 1e-9);
        let s = bleu(&[seq("the the the")], &[seq("the cat")], 1, None).unwrap();
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 3);
    }

    #[test]
    fn projection_rules() {
        let p = pos_project(&tags("NOUN VERB"), &AlignmentSet::from_links([(0, 1), (1, 0)]), 2).unwrap();
        assert_eq!(p, tags("VERB NOUN"));
        let p = pos_project(&tags("NOUN VERB"), &AlignmentSet::from_links([(0, 1), (0, 2)]), 4).unwrap();
        assert_eq!(p, tags("X NOUN NOUN X"));
        let p = pos_project(&tags("NOUN VERB"), &AlignmentSet::from_links([(1, 0), (0, 0)]), 1).unwrap();
        assert_eq!(p, tags("NOUN"));
        assert!(pos_project(&tags("NOUN"), &AlignmentSet::from_links([(1, 0)]), 1).is_err());
    }

    #[test]
    fn significance_basics() {
        let a = [true, false, true, true, false];
        assert_eq!(significance(&a, &a, 500, 1).unwrap(), 1.0);
        assert!(matches!(significance(&[], &[], 10, 1), Err(Error::EmptyInput)));
        assert!(matches!(
            significance(&[true], &[true, false], 10, 1),
            Err(Error::CountMismatch(_))
        ));
        let b = [false, false, true, false, true];
        assert_eq!(
            significance(&a, &b, 1000, 7).unwrap(),
            significance(&b, &a, 1000, 7).unwrap()
        );
        assert_eq!(
            significance(&a, &b, 1000, 7).unwrap(),
            significance(&a, &b, 1000, 7).unwrap()
        );
    }

    #[test]
    fn pos_single_sentence() {
        // src: a b [E] c ; pre tokens a, b; post token c
        let s = PosSentence {
            pos: tags("DET NOUN PROPN VERB"),
            reference: seq("ra rb re rc"),
            alignment: AlignmentSet::from_links([(0, 0), (1, 1), (2, 2), (3, 3)]),
            tag_spans: vec![(2, 3)],
            system: seq("ra rb re"),
            baseline: seq("ra zz re rc"),
        };
        let r = pos_accuracy(&[s], 100, 3).unwrap();
        let got: Vec<_> = r
            .rows
            .iter()
            .map(|r| (r.pos.as_str(), r.position, r.sys_acc, r.base_acc, r.n))
            .collect();
        assert_eq!(
            got,
            [
                ("DET", Position::Pre, 1.0, 1.0, 1),
                ("NOUN", Position::Pre, 1.0, 0.0, 1),
                ("VERB", Position::Post, 0.0, 1.0, 1),
            ]
        );
    }

    #[test]
    fn pos_occurrences_are_consumed_once() {
        let s = PosSentence {
            pos: tags("A A B"),
            reference: seq("x x e"),
            alignment: AlignmentSet::from_links([(0, 0), (1, 1), (2, 2)]),
            tag_spans: vec![(2, 3)],
            system: seq("x"),
            baseline: seq("x x"),
        };
        let r = pos_accuracy(&[s], 10, 3).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!((r.rows[0].sys_acc, r.rows[0].base_acc, r.rows[0].n), (0.5, 1.0, 2));
    }

    #[test]
    fn untagged_sentence_is_ignored() {
        let s = PosSentence {
            pos: tags("A"),
            reference: seq("x"),
            alignment: AlignmentSet::from_links([(0, 0)]),
            tag_spans: vec![],
            system: seq("x"),
            baseline: seq("x"),
        };
        assert!(pos_accuracy(&[s], 10, 3).unwrap().rows.is_empty());
    }
}
