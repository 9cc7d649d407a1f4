use netag::align::{
    corpus_perplexity, symmetrize, train_alignment, viterbi_align, viterbi_corpus, AlignParams,
    AlignmentVector, Direction, Heuristic, Trainer,
};
use netag::synth::{bijective_corpus, BijectiveSpec};
use proptest::prelude::*;

#[test]
fn recovers_bijective_dictionary_links() {
    let (corpus, gold) = bijective_corpus(BijectiveSpec::default());
    let fwd = train_alignment(&corpus, AlignParams::default()).unwrap();
    let rev = train_alignment(
        &corpus,
        AlignParams {
            direction: Direction::TgtToSrc,
            ..AlignParams::default()
        },
    )
    .unwrap();
    let mut hit = 0;
    let mut total = 0;
    for (pair, gold) in corpus.iter().zip(&gold) {
        let f = viterbi_align(&fwd, pair).unwrap();
        let r = viterbi_align(&rev, pair).unwrap();
        let inter = symmetrize(&f, &r, Heuristic::Intersection).unwrap();
        hit += gold.iter().filter(|&(s, t)| inter.contains(s, t)).count();
        total += gold.len();
    }
    let recall = hit as f64 / total as f64;
    assert!(recall >= 0.99, "recall {recall}");
}

#[test]
fn em_perplexity_is_non_increasing() {
    let (corpus, _) = bijective_corpus(BijectiveSpec {
        pairs: 120,
        vocab: 30,
        seed: 5,
        ..BijectiveSpec::default()
    });
    let mut trainer = Trainer::new(&corpus, AlignParams::default()).unwrap();
    let mut prev_estep = f64::INFINITY;
    let mut prev_model = corpus_perplexity(trainer.model(), &corpus).unwrap();
    for _ in 0..10 {
        let stats = trainer.step();
        assert!(stats.perplexity <= prev_estep * (1.0 + 1e-9));
        prev_estep = stats.perplexity;
        let now = corpus_perplexity(trainer.model(), &corpus).unwrap();
        assert!(now <= prev_model * (1.0 + 1e-9), "{now} > {prev_model}");
        prev_model = now;
        for s in trainer.model().row_sums() {
            assert!((s - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn training_is_independent_of_thread_count() {
    let (corpus, _) = bijective_corpus(BijectiveSpec {
        pairs: 3000,
        ..BijectiveSpec::default()
    });
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let m = train_alignment(&corpus, AlignParams::default()).unwrap();
                let v = viterbi_corpus(&m, &corpus).unwrap();
                (m, v)
            })
    };
    let (m1, v1) = run(1);
    let (m4, v4) = run(4);
    assert_eq!(m1, m4);
    assert_eq!(v1, v4);
}

fn vector_strategy(emit_len: usize, cond_len: usize) -> impl Strategy<Value = AlignmentVector> {
    proptest::collection::vec(proptest::option::of(0..cond_len), emit_len)
        .prop_map(move |links| AlignmentVector { links, cond_len })
}

proptest! {
    #[test]
    fn symmetrization_is_sandwiched(
        (fwd, rev) in (1usize..8, 1usize..8).prop_flat_map(|(s, t)| (vector_strategy(t, s), vector_strategy(s, t)))
    ) {
        let inter = symmetrize(&fwd, &rev, Heuristic::Intersection).unwrap();
        let gdfa = symmetrize(&fwd, &rev, Heuristic::GrowDiagFinalAnd).unwrap();
        let union = symmetrize(&fwd, &rev, Heuristic::Union).unwrap();
        prop_assert!(inter.links.is_subset(&gdfa.links));
        prop_assert!(gdfa.links.is_subset(&union.links));
        gdfa.check_bounds(rev.len(), fwd.len()).unwrap();
    }
}
