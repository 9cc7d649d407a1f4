//! IBM Model 2 word alignment with a diagonal prior, in the style of
//! fast_align.
//!
//! The model emits each word `f_j` of one side from either a position `i`
//! of the other (conditioning) side or from NULL:
//!
//! ```text
//! p(f, a | e) = Π_j prior(a_j | j, m, n) · θ(f_j | e_{a_j})
//! prior(NULL) = p0
//! prior(i)    = (1 − p0) · exp(λ·h(i, j, m, n)) / Z
//! h(i,j,m,n)  = −| (i+1)/n − (j+1)/m |
//! ```
//!
//! θ is stored sparsely: a row per conditioning word (row 0 is NULL) holding
//! only emitted words that co-occur with it in the training corpus. The NULL
//! row holds every emitted word.
//!
//! Expected counts are accumulated per fixed-size chunk of sentence pairs
//! and merged in chunk order, so a trained model is bit-identical whatever
//! the size of the rayon pool.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::corpus::{read_lines, ParallelCorpus, SentencePair};
use crate::error::{Error, Result};

const CHUNK: usize = 512;

/// Which side of a [`SentencePair`] conditions the emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Source words condition, target words are emitted.
    #[serde(rename = "src-tgt")]
    SrcToTgt,
    /// Target words condition, source words are emitted.
    #[serde(rename = "tgt-src")]
    TgtToSrc,
}

impl Direction {
    fn sides<'a>(&self, pair: &'a SentencePair) -> (&'a [String], &'a [String]) {
        match self {
            Direction::SrcToTgt => (&pair.src, &pair.tgt),
            Direction::TgtToSrc => (&pair.tgt, &pair.src),
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::SrcToTgt => Direction::TgtToSrc,
            Direction::TgtToSrc => Direction::SrcToTgt,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::SrcToTgt => "src-tgt",
            Direction::TgtToSrc => "tgt-src",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "src-tgt" => Ok(Direction::SrcToTgt),
            "tgt-src" => Ok(Direction::TgtToSrc),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub iterations: usize,
    pub lambda: f64,
    pub p0: f64,
    pub vb: bool,
    pub alpha: f64,
    pub direction: Direction,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            iterations: 5,
            lambda: 4.0,
            p0: 0.08,
            vb: false,
            alpha: 0.01,
            direction: Direction::SrcToTgt,
        }
    }
}

impl AlignParams {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParams("iterations must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.p0) {
            return Err(Error::InvalidParams(format!(
                "p0 must be in [0, 1), got {}",
                self.p0
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if self.vb && !(self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.index.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_owned());
        self.index.insert(w.to_owned(), id);
        id
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.index.get(w).copied()
    }

    fn len(&self) -> usize {
        self.words.len()
    }
}

/// Diagonal prior over conditioning positions for emitted position `j`.
/// Writes `n` values into `out` and returns them; they sum to `1 − p0`.
fn position_prior(j: usize, m: usize, n: usize, lambda: f64, p0: f64, out: &mut Vec<f64>) {
    out.clear();
    let jr = (j + 1) as f64 / m as f64;
    let mut z = 0.0;
    for i in 0..n {
        let h = -(((i + 1) as f64 / n as f64) - jr).abs();
        let w = (lambda * h).exp();
        z += w;
        out.push(w);
    }
    let scale = (1.0 - p0) / z;
    for w in out.iter_mut() {
        *w *= scale;
    }
}

/// Trained lexical translation model. Immutable once trained.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignModel {
    direction: Direction,
    lambda: f64,
    p0: f64,
    // cond id 0 is NULL; real conditioning words start at 1
    cond: Vocab,
    emit: Vocab,
    row_offsets: Vec<usize>,
    cols: Vec<u32>,
    probs: Vec<f64>,
}

impl AlignModel {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    fn row_range(&self, row: u32) -> std::ops::Range<usize> {
        self.row_offsets[row as usize]..self.row_offsets[row as usize + 1]
    }

    fn slot(&self, row: u32, f: u32) -> Option<usize> {
        let range = self.row_range(row);
        let start = range.start;
        self.cols[range].binary_search(&f).ok().map(|k| start + k)
    }

    fn prob_ids(&self, row: Option<u32>, f: Option<u32>) -> f64 {
        match (row, f) {
            (Some(row), Some(f)) => self.slot(row, f).map_or(0.0, |s| self.probs[s]),
            _ => 0.0,
        }
    }

    fn cond_row(&self, word: &str) -> Option<u32> {
        // tokens are never empty, so only NULL maps to row 0
        self.cond.get(word).filter(|&id| id != 0)
    }

    /// θ(f | e); `cond = None` is the NULL word. Unseen pairs are 0.
    pub fn theta(&self, cond: Option<&str>, emitted: &str) -> f64 {
        let row = match cond {
            None => Some(0),
            Some(w) => self.cond_row(w),
        };
        self.prob_ids(row, self.emit.get(emitted))
    }

    /// Iterates `(cond, emitted, θ)` for every stored entry; `cond = None`
    /// is the NULL row.
    pub fn entries(&self) -> impl Iterator<Item = (Option<&str>, &str, f64)> + '_ {
        (0..self.cond.len() as u32).flat_map(move |row| {
            let cond = (row != 0).then(|| self.cond.words[row as usize].as_str());
            self.row_range(row)
                .map(move |s| (cond, self.emit.words[self.cols[s] as usize].as_str(), self.probs[s]))
        })
    }

    /// Sum of each θ row, NULL row first.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.cond.len() as u32)
            .map(|row| self.probs[self.row_range(row)].iter().sum())
            .collect()
    }

    pub fn num_entries(&self) -> usize {
        self.probs.len()
    }

    fn pair_ids(&self, pair: &SentencePair) -> (Vec<Option<u32>>, Vec<Option<u32>>) {
        let (cond, emit) = self.direction.sides(pair);
        (
            cond.iter().map(|w| self.cond_row(w)).collect(),
            emit.iter().map(|w| self.emit.get(w)).collect(),
        )
    }

    fn sentence_log_prob(&self, pair: &SentencePair, prior: &mut Vec<f64>) -> f64 {
        let (cond, emit) = self.pair_ids(pair);
        let (n, m) = (cond.len(), emit.len());
        let mut lp = 0.0;
        for (j, &f) in emit.iter().enumerate() {
            position_prior(j, m, n, self.lambda, self.p0, prior);
            let mut total = self.p0 * self.prob_ids(Some(0), f);
            for (i, &e) in cond.iter().enumerate() {
                total += prior[i] * self.prob_ids(e, f);
            }
            lp += total.ln();
        }
        lp
    }

    /// Writes the model as a line-oriented text dump. Floats are printed in
    /// shortest round-trip form, so [`AlignModel::load`] restores the model
    /// exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "#align-model\tv1")?;
        writeln!(w, "direction\t{}", self.direction)?;
        writeln!(w, "lambda\t{:?}", self.lambda)?;
        writeln!(w, "p0\t{:?}", self.p0)?;
        for f in &self.emit.words {
            writeln!(w, "emit\t{f}")?;
        }
        for row in 0..self.cond.len() as u32 {
            if row != 0 {
                writeln!(w, "cond\t{}", self.cond.words[row as usize])?;
            }
            for s in self.row_range(row) {
                writeln!(w, "theta\t{}\t{:?}", self.cols[s], self.probs[s])?;
            }
        }
        w.flush()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AlignModel> {
        let path = path.as_ref();
        let lines = read_lines(path)?;
        let err = |line: usize, msg: &str| Error::parse(path, line + 1, msg);
        let mut it = lines.iter().enumerate();
        match it.next() {
            Some((_, l)) if l == "#align-model\tv1" => {}
            _ => return Err(err(0, "missing model header")),
        }
        let mut direction = None;
        let mut lambda = None;
        let mut p0 = None;
        let mut cond = Vocab::default();
        cond.intern("");
        let mut emit = Vocab::default();
        let mut row_offsets = vec![0];
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        for (ln, line) in it {
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default();
            let a = fields.next().ok_or_else(|| err(ln, "missing field"))?;
            match key {
                "direction" => direction = Some(a.parse().map_err(|e: String| err(ln, &e))?),
                "lambda" => lambda = Some(a.parse::<f64>().map_err(|_| err(ln, "bad lambda"))?),
                "p0" => p0 = Some(a.parse::<f64>().map_err(|_| err(ln, "bad p0"))?),
                "emit" => {
                    emit.intern(a);
                }
                "cond" => {
                    row_offsets.push(cols.len());
                    cond.intern(a);
                }
                "theta" => {
                    let f: u32 = a.parse().map_err(|_| err(ln, "bad emitted id"))?;
                    if f as usize >= emit.len() {
                        return Err(err(ln, "emitted id out of range"));
                    }
                    let p = fields
                        .next()
                        .and_then(|p| p.parse::<f64>().ok())
                        .ok_or_else(|| err(ln, "bad probability"))?;
                    cols.push(f);
                    probs.push(p);
                }
                _ => return Err(err(ln, "unknown record")),
            }
        }
        row_offsets.push(cols.len());
        Ok(AlignModel {
            direction: direction.ok_or_else(|| err(0, "missing direction"))?,
            lambda: lambda.ok_or_else(|| err(0, "missing lambda"))?,
            p0: p0.ok_or_else(|| err(0, "missing p0"))?,
            cond,
            emit,
            row_offsets,
            cols,
            probs,
        })
    }
}

/// Per-iteration diagnostics from [`Trainer::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    /// Training perplexity under the parameters the E-step started from.
    pub perplexity: f64,
    pub log_likelihood: f64,
    pub emitted_tokens: usize,
}

struct ChunkCounts {
    counts: Vec<(usize, f64)>,
    log_likelihood: f64,
    tokens: usize,
}

/// Step-wise EM trainer. [`train_alignment`] drives it to completion.
pub struct Trainer {
    params: AlignParams,
    model: AlignModel,
    pairs: Vec<EncodedPair>,
    iteration: usize,
}

struct EncodedPair {
    n: usize,
    m: usize,
    // for each emitted position j: slot of (NULL, f_j) then slots of (e_i, f_j)
    slots: Vec<usize>,
}

impl Trainer {
    pub fn new(corpus: &ParallelCorpus, params: AlignParams) -> Result<Self> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut cond = Vocab::default();
        cond.intern("");
        let mut emit = Vocab::default();
        let mut rows: Vec<BTreeSet<u32>> = vec![BTreeSet::new()];
        let mut encoded_ids = Vec::with_capacity(corpus.len());
        for pair in corpus.iter() {
            let (c, e) = params.direction.sides(pair);
            if c.is_empty() || e.is_empty() {
                return Err(Error::EmptyPair);
            }
            let c_ids: Vec<u32> = c.iter().map(|w| cond.intern(w)).collect();
            let e_ids: Vec<u32> = e.iter().map(|w| emit.intern(w)).collect();
            rows.resize_with(cond.len(), BTreeSet::new);
            for &f in &e_ids {
                rows[0].insert(f);
                for &ci in &c_ids {
                    rows[ci as usize].insert(f);
                }
            }
            encoded_ids.push((c_ids, e_ids));
        }

        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        for row in &rows {
            row_offsets.push(cols.len());
            let u = 1.0 / row.len() as f64;
            for &f in row {
                cols.push(f);
                probs.push(u);
            }
        }
        row_offsets.push(cols.len());
        let model = AlignModel {
            direction: params.direction,
            lambda: params.lambda,
            p0: params.p0,
            cond,
            emit,
            row_offsets,
            cols,
            probs,
        };

        let pairs = encoded_ids
            .into_par_iter()
            .map(|(c_ids, e_ids)| {
                let mut slots = Vec::with_capacity(e_ids.len() * (c_ids.len() + 1));
                for &f in &e_ids {
                    slots.push(model.slot(0, f).expect("NULL row covers every emitted word"));
                    for &e in &c_ids {
                        slots.push(model.slot(e, f).expect("co-occurring pair in support"));
                    }
                }
                EncodedPair {
                    n: c_ids.len(),
                    m: e_ids.len(),
                    slots,
                }
            })
            .collect();

        Ok(Trainer {
            params,
            model,
            pairs,
            iteration: 0,
        })
    }

    pub fn model(&self) -> &AlignModel {
        &self.model
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn e_step_chunk(&self, chunk: &[EncodedPair]) -> ChunkCounts {
        let (lambda, p0) = (self.model.lambda, self.model.p0);
        let probs = &self.model.probs;
        let mut acc: HashMap<usize, f64> = HashMap::new();
        let mut prior = Vec::new();
        let mut post = Vec::new();
        let mut ll = 0.0;
        let mut tokens = 0;
        for pair in chunk {
            let stride = pair.n + 1;
            for j in 0..pair.m {
                position_prior(j, pair.m, pair.n, lambda, p0, &mut prior);
                let slots = &pair.slots[j * stride..(j + 1) * stride];
                post.clear();
                post.push(p0 * probs[slots[0]]);
                for i in 0..pair.n {
                    post.push(prior[i] * probs[slots[i + 1]]);
                }
                let total: f64 = post.iter().sum();
                tokens += 1;
                ll += total.ln();
                if total > 0.0 {
                    for (k, &s) in slots.iter().enumerate() {
                        if post[k] > 0.0 {
                            *acc.entry(s).or_insert(0.0) += post[k] / total;
                        }
                    }
                }
            }
        }
        let mut counts: Vec<(usize, f64)> = acc.into_iter().collect();
        counts.sort_unstable_by_key(|&(s, _)| s);
        ChunkCounts {
            counts,
            log_likelihood: ll,
            tokens,
        }
    }

    /// Runs one EM iteration and returns the statistics of its E-step.
    pub fn step(&mut self) -> IterationStats {
        let chunks: Vec<ChunkCounts> = self
            .pairs
            .par_chunks(CHUNK)
            .map(|c| self.e_step_chunk(c))
            .collect();
        let mut counts = vec![0.0; self.model.probs.len()];
        let mut ll = 0.0;
        let mut tokens = 0;
        for chunk in &chunks {
            for &(s, c) in &chunk.counts {
                counts[s] += c;
            }
            ll += chunk.log_likelihood;
            tokens += chunk.tokens;
        }

        let vb = self.params.vb;
        let alpha = self.params.alpha;
        let offsets = &self.model.row_offsets;
        let probs = &mut self.model.probs;
        for r in 0..offsets.len() - 1 {
            let range = offsets[r]..offsets[r + 1];
            let row_counts = &counts[range.clone()];
            let row_probs = &mut probs[range];
            if vb {
                let tot: f64 = row_counts.iter().map(|c| c + alpha).sum();
                let dg_tot = digamma(tot);
                for (p, &c) in row_probs.iter_mut().zip(row_counts) {
                    *p = (digamma(c + alpha) - dg_tot).exp();
                }
                let z: f64 = row_probs.iter().sum();
                for p in row_probs.iter_mut() {
                    *p /= z;
                }
            } else {
                let tot: f64 = row_counts.iter().sum();
                // rows that received no mass keep their previous distribution
                if tot > 0.0 {
                    for (p, &c) in row_probs.iter_mut().zip(row_counts) {
                        *p = c / tot;
                    }
                }
            }
        }

        self.iteration += 1;
        IterationStats {
            iteration: self.iteration,
            perplexity: (-ll / tokens as f64).exp(),
            log_likelihood: ll,
            emitted_tokens: tokens,
        }
    }

    pub fn into_model(self) -> AlignModel {
        self.model
    }
}

/// Trains an alignment model with `params.iterations` rounds of EM.
pub fn train_alignment(corpus: &ParallelCorpus, params: AlignParams) -> Result<AlignModel> {
    let mut trainer = Trainer::new(corpus, params)?;
    for _ in 0..params.iterations {
        let stats = trainer.step();
        log::info!(
            "align {} iteration {}: perplexity {:.4}",
            params.direction,
            stats.iteration,
            stats.perplexity
        );
    }
    Ok(trainer.into_model())
}

/// For each emitted position, the conditioning position it is linked to,
/// or `None` for NULL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentVector {
    pub links: Vec<Option<usize>>,
    pub cond_len: usize,
}

impl AlignmentVector {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Inverse of [`AlignmentSet::from_vector`]. Fails if an emitted
    /// position carries more than one link.
    pub fn from_set(
        set: &AlignmentSet,
        direction: Direction,
        src_len: usize,
        tgt_len: usize,
    ) -> Result<AlignmentVector> {
        set.check_bounds(src_len, tgt_len)?;
        let (emit_len, cond_len) = match direction {
            Direction::SrcToTgt => (tgt_len, src_len),
            Direction::TgtToSrc => (src_len, tgt_len),
        };
        let mut links = vec![None; emit_len];
        for (s, t) in set.iter() {
            let (j, i) = match direction {
                Direction::SrcToTgt => (t, s),
                Direction::TgtToSrc => (s, t),
            };
            if links[j].replace(i).is_some() {
                return Err(Error::LengthMismatch(format!(
                    "position {j} has several {direction} links"
                )));
            }
        }
        Ok(AlignmentVector { links, cond_len })
    }
}

/// Most probable alignment, decided independently per emitted position.
///
/// Ties go to the smaller conditioning position; NULL wins only when
/// strictly better than every real position, or when every option scores 0.
pub fn viterbi_align(model: &AlignModel, pair: &SentencePair) -> Result<AlignmentVector> {
    if pair.src.is_empty() || pair.tgt.is_empty() {
        return Err(Error::EmptyPair);
    }
    let (cond, emit) = model.pair_ids(pair);
    let (n, m) = (cond.len(), emit.len());
    let mut prior = Vec::with_capacity(n);
    let links = emit
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            position_prior(j, m, n, model.lambda, model.p0, &mut prior);
            let mut best: Option<(usize, f64)> = None;
            for (i, &e) in cond.iter().enumerate() {
                let score = prior[i] * model.prob_ids(e, f);
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((i, score));
                }
            }
            let null_score = model.p0 * model.prob_ids(Some(0), f);
            match best {
                Some((i, b)) if b > 0.0 && b >= null_score => Some(i),
                _ => None,
            }
        })
        .collect();
    Ok(AlignmentVector { links, cond_len: n })
}

/// Viterbi alignments for every pair, in corpus order.
pub fn viterbi_corpus(model: &AlignModel, corpus: &ParallelCorpus) -> Result<Vec<AlignmentVector>> {
    corpus
        .pairs
        .par_iter()
        .map(|p| viterbi_align(model, p))
        .collect()
}

/// One pair's links as `(src_index, tgt_index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlignmentSet {
    pub links: BTreeSet<(usize, usize)>,
}

impl AlignmentSet {
    pub fn new() -> Self {
        AlignmentSet::default()
    }

    pub fn from_links<I: IntoIterator<Item = (usize, usize)>>(links: I) -> Self {
        AlignmentSet {
            links: links.into_iter().collect(),
        }
    }

    pub fn contains(&self, src: usize, tgt: usize) -> bool {
        self.links.contains(&(src, tgt))
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    pub fn check_bounds(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        match self.links.iter().find(|&&(s, t)| s >= src_len || t >= tgt_len) {
            Some((s, t)) => Err(Error::LengthMismatch(format!(
                "link {s}-{t} outside a {src_len}x{tgt_len} sentence pair"
            ))),
            None => Ok(()),
        }
    }

    /// Links induced by a directional alignment vector.
    pub fn from_vector(v: &AlignmentVector, direction: Direction) -> Self {
        AlignmentSet::from_links(v.links.iter().enumerate().filter_map(|(j, a)| {
            a.map(|i| match direction {
                Direction::SrcToTgt => (i, j),
                Direction::TgtToSrc => (j, i),
            })
        }))
    }

    /// Pharaoh line: space-separated `src-tgt` pairs.
    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(s, t)| format!("{s}-{t}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_pharaoh(line: &str) -> std::result::Result<Self, String> {
        line.split_whitespace()
            .map(|tok| {
                let (s, t) = tok
                    .split_once('-')
                    .ok_or_else(|| format!("bad link {tok:?}"))?;
                Ok((
                    s.parse().map_err(|_| format!("bad link {tok:?}"))?,
                    t.parse().map_err(|_| format!("bad link {tok:?}"))?,
                ))
            })
            .collect::<std::result::Result<BTreeSet<_>, String>>()
            .map(|links| AlignmentSet { links })
    }
}

pub fn read_pharaoh(path: impl AsRef<Path>) -> Result<Vec<AlignmentSet>> {
    let path = path.as_ref();
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| AlignmentSet::parse_pharaoh(l).map_err(|m| Error::parse(path, i + 1, m)))
        .collect()
}

pub fn write_pharaoh<'a, I>(path: impl AsRef<Path>, sets: I) -> Result<()>
where
    I: IntoIterator<Item = &'a AlignmentSet>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in sets {
        writeln!(w, "{}", s.to_pharaoh()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    Intersection,
    Union,
    GrowDiagFinalAnd,
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "intersection" => Ok(Heuristic::Intersection),
            "union" => Ok(Heuristic::Union),
            "grow-diag-final-and" => Ok(Heuristic::GrowDiagFinalAnd),
            other => Err(format!("unknown symmetrization heuristic {other:?}")),
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, 0),
    (0, -1),
    (1, 0),
    (0, 1),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

/// Combines a src→tgt and a tgt→src alignment of the same pair.
pub fn symmetrize(
    fwd: &AlignmentVector,
    rev: &AlignmentVector,
    heuristic: Heuristic,
) -> Result<AlignmentSet> {
    let (src_len, tgt_len) = (rev.len(), fwd.len());
    if fwd.cond_len != src_len || rev.cond_len != tgt_len {
        return Err(Error::LengthMismatch(format!(
            "forward alignment is {}x{}, reverse is {}x{}",
            fwd.cond_len, tgt_len, src_len, rev.cond_len
        )));
    }
    let f = AlignmentSet::from_vector(fwd, Direction::SrcToTgt);
    let r = AlignmentSet::from_vector(rev, Direction::TgtToSrc);
    let inter = || f.links.intersection(&r.links).copied();
    let union: BTreeSet<(usize, usize)> = f.links.union(&r.links).copied().collect();
    Ok(match heuristic {
        Heuristic::Intersection => AlignmentSet::from_links(inter()),
        Heuristic::Union => AlignmentSet { links: union },
        Heuristic::GrowDiagFinalAnd => {
            grow_diag_final_and(inter().collect(), &union, &f, &r, src_len, tgt_len)
        }
    })
}

fn grow_diag_final_and(
    mut links: BTreeSet<(usize, usize)>,
    union: &BTreeSet<(usize, usize)>,
    fwd: &AlignmentSet,
    rev: &AlignmentSet,
    src_len: usize,
    tgt_len: usize,
) -> AlignmentSet {
    let mut src_aligned = vec![false; src_len];
    let mut tgt_aligned = vec![false; tgt_len];
    for &(s, t) in &links {
        src_aligned[s] = true;
        tgt_aligned[t] = true;
    }

    loop {
        let mut added = false;
        for s in 0..src_len {
            for t in 0..tgt_len {
                if !links.contains(&(s, t)) {
                    continue;
                }
                for (ds, dt) in NEIGHBORS {
                    let (ns, nt) = (s as isize + ds, t as isize + dt);
                    if ns < 0 || nt < 0 || ns as usize >= src_len || nt as usize >= tgt_len {
                        continue;
                    }
                    let (ns, nt) = (ns as usize, nt as usize);
                    if (!src_aligned[ns] || !tgt_aligned[nt])
                        && union.contains(&(ns, nt))
                        && links.insert((ns, nt))
                    {
                        src_aligned[ns] = true;
                        tgt_aligned[nt] = true;
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    for directional in [fwd, rev] {
        for &(s, t) in &directional.links {
            if !src_aligned[s] && !tgt_aligned[t] {
                links.insert((s, t));
                src_aligned[s] = true;
                tgt_aligned[t] = true;
            }
        }
    }
    AlignmentSet { links }
}

/// Perplexity of `corpus` under `model`, natural log, NULL included in the
/// per-token mixture.
pub fn corpus_perplexity(model: &AlignModel, corpus: &ParallelCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per_pair: Vec<(f64, usize, usize)> = corpus
        .pairs
        .par_iter()
        .map_init(Vec::new, |prior, p| {
            let (_, emit) = model.direction.sides(p);
            (model.sentence_log_prob(p, prior), emit.len(), p.line_no)
        })
        .collect();
    let mut ll = 0.0;
    let mut tokens = 0;
    for (lp, m, line_no) in per_pair {
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return Err(Error::ZeroProbability { line_no });
        }
        ll += lp;
        tokens += m;
    }
    Ok((-ll / tokens as f64).exp())
}
