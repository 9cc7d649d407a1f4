use netag::align::Direction;
use netag::corpus::TokenSeq;
use netag::lexicon::TranslationTable;
use netag::link::{EntityMention, MentionBundle};
use netag::template::{
    detag, parse_output, render_source_template, render_target_template, Piece, TagVocabulary,
    TemplateMethod,
};
use proptest::prelude::*;

fn words(prefix: &'static str, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0..8u8).prop_map(move |k| format!("{prefix}{k}")), len)
}

#[derive(Debug, Clone)]
struct Case {
    sentence: TokenSeq,
    bundle: MentionBundle,
}

fn case() -> impl Strategy<Value = Case> {
    (words("w", 1..12), words("t", 1..4), words("h", 1..3))
        .prop_flat_map(|(sent, t, h)| {
            let n = sent.len();
            (Just(sent), Just(t), Just(h), 0..n, 1..=3usize)
        })
        .prop_map(|(sent, t, h, start, len)| {
            let end = (start + len).min(sent.len());
            let sentence = TokenSeq::from_tokens(sent).unwrap();
            let bundle = MentionBundle {
                mention: EntityMention {
                    start,
                    end,
                    surface: sentence.slice(start, end),
                    uri: "http://dbpedia.org/resource/X".into(),
                    hypernym: Some(TokenSeq::from_tokens(h.clone()).unwrap()),
                },
                tgt_span: (start, end),
                translation: TokenSeq::from_tokens(t).unwrap(),
                hypernym_tgt: TokenSeq::from_tokens(h).unwrap(),
            };
            Case { sentence, bundle }
        })
}

fn identity_table(words: &[String]) -> TranslationTable {
    let mut table = TranslationTable::new(Direction::SrcToTgt);
    for w in words {
        table.insert(w.clone(), w.clone());
    }
    table
}

proptest! {
    #[test]
    fn detag_inverts_rendering(c in case()) {
        let vocab = TagVocabulary::xlm();
        let table = identity_table(&c.sentence);
        let (s, e) = c.bundle.mention.span();
        let substituted = c.sentence.splice(s, e, &c.bundle.translation);
        for method in TemplateMethod::ALL {
            let rendered = render_source_template(method, &c.bundle, &c.sentence, &vocab).unwrap();
            let out = detag(&rendered, method, &table, &vocab);
            prop_assert_eq!(out.malformed, 0);
            let expected = match method {
                TemplateMethod::Tag | TemplateMethod::Add | TemplateMethod::Baseline => &c.sentence,
                TemplateMethod::Trans | TemplateMethod::TransA | TemplateMethod::TransR => &substituted,
                TemplateMethod::HypA => &rendered,
            };
            prop_assert_eq!(&out.tokens, expected, "{}", method);
        }
    }

    #[test]
    fn rendering_only_touches_the_span(c in case()) {
        let vocab = TagVocabulary::plain();
        let (s, e) = c.bundle.mention.span();
        for method in TemplateMethod::ALL {
            for out in [
                render_source_template(method, &c.bundle, &c.sentence, &vocab).unwrap(),
                render_target_template(method, &c.bundle, &c.sentence, &vocab).unwrap(),
            ] {
                let tail = c.sentence.len() - e;
                prop_assert_eq!(&out[..s], &c.sentence[..s]);
                prop_assert_eq!(&out[out.len() - tail..], &c.sentence[e..]);
            }
        }
    }

    #[test]
    fn regions_are_balanced(c in case()) {
        let vocab = TagVocabulary::plain();
        for method in TemplateMethod::ALL {
            let out = render_source_template(method, &c.bundle, &c.sentence, &vocab).unwrap();
            let parsed = parse_output(&out, &vocab);
            prop_assert_eq!(parsed.stray_delimiters, 0);
            let regions: Vec<_> = parsed.regions().collect();
            let expected = usize::from(method.has_delimiters());
            prop_assert_eq!(regions.len(), expected);
            for r in regions {
                prop_assert!(r.matches_layout(method));
            }
            let clean = parsed.pieces.iter().all(|p| match p {
                Piece::Word(w) => !vocab.is_reserved(w),
                Piece::Region(_) => true,
            });
            prop_assert!(clean);
        }
    }

    #[test]
    fn detag_never_emits_delimiters(tokens in prop::collection::vec(
        prop_oneof![
            Just("<start>".to_string()),
            Just("<mid1>".to_string()),
            Just("<mid2>".to_string()),
            Just("<end>".to_string()),
            "[a-c]",
        ],
        0..20,
    )) {
        let vocab = TagVocabulary::plain();
        let table = TranslationTable::new(Direction::SrcToTgt);
        for method in TemplateMethod::TAGGING.into_iter().filter(|m| m.has_delimiters()) {
            let out = detag(&tokens, method, &table, &vocab);
            prop_assert!(out.tokens.iter().all(|t| !vocab.is_reserved(t)));
        }
    }
}
