//! Synthetic parallel corpora with known word alignments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::AlignmentSet;
use crate::corpus::{ParallelCorpus, TokenSeq};

#[derive(Debug, Clone, Copy)]
pub struct BijectiveSpec {
    pub pairs: usize,
    pub vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for BijectiveSpec {
    fn default() -> Self {
        BijectiveSpec {
            pairs: 500,
            vocab: 50,
            min_len: 3,
            max_len: 12,
            seed: 2021,
        }
    }
}

/// Source word `k` always translates to target word `k`, in the same
/// position. Returns the corpus and the generator's links per pair.
pub fn bijective_corpus(spec: BijectiveSpec) -> (ParallelCorpus, Vec<AlignmentSet>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs = Vec::with_capacity(spec.pairs);
    let mut gold = Vec::with_capacity(spec.pairs);
    for _ in 0..spec.pairs {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let words: Vec<usize> = (0..len).map(|_| rng.random_range(0..spec.vocab)).collect();
        let src = TokenSeq::from_tokens(words.iter().map(|w| format!("s{w}"))).expect("valid");
        let tgt = TokenSeq::from_tokens(words.iter().map(|w| format!("t{w}"))).expect("valid");
        pairs.push((src, tgt));
        gold.push(AlignmentSet::from_links((0..len).map(|i| (i, i))));
    }
    (ParallelCorpus::from_pairs(pairs), gold)
}
