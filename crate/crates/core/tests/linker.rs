mod common;

use std::path::PathBuf;
use std::time::Duration;

use common::MockServer;
use netag::corpus::TokenSeq;
use netag::link::{
    attach_hypernyms, parse_spotlight_response, HypernymResolver, RemoteConfig, SparqlHypernyms,
    SpotlightClient,
};
use netag::Error;
use serde_json::Value;

fn fixtures() -> Vec<(String, Value)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/spotlight");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), v)
        })
        .collect()
}

fn expected(v: &Value) -> Vec<(usize, usize, String)> {
    v["expected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["start"].as_u64().unwrap() as usize,
                e["end"].as_u64().unwrap() as usize,
                e["uri"].as_str().unwrap().to_owned(),
            )
        })
        .collect()
}

fn fast(url: &str) -> RemoteConfig {
    RemoteConfig {
        backoff: Duration::from_millis(1),
        ..RemoteConfig::new(url)
    }
}

#[test]
fn recorded_responses_parse_to_expected_spans() {
    let all = fixtures();
    assert_eq!(all.len(), 5);
    for (name, v) in all {
        let sentence = TokenSeq::from_line(v["sentence"].as_str().unwrap());
        let body = v["response"].to_string();
        let mentions = parse_spotlight_response(&body, &sentence).unwrap();
        let got: Vec<_> = mentions
            .iter()
            .map(|m| (m.start, m.end, m.uri.clone()))
            .collect();
        assert_eq!(got, expected(&v), "{name}");
        for m in &mentions {
            assert_eq!(m.surface.as_slice(), &sentence[m.start..m.end]);
        }
    }
}

#[test]
fn malformed_response_is_an_error() {
    let s = TokenSeq::from_line("a b");
    assert!(matches!(
        parse_spotlight_response("not json", &s),
        Err(Error::MalformedResponse(_))
    ));
    let bad_offset = r#"{"Resources":[{"@URI":"u","@surfaceForm":"a","@offset":"x"}]}"#;
    assert!(matches!(
        parse_spotlight_response(bad_offset, &s),
        Err(Error::MalformedResponse(_))
    ));
}

#[test]
fn client_posts_text_and_confidence_and_caches() {
    let (_, v) = fixtures().remove(0);
    let server = MockServer::start(vec![(200, v["response"].to_string())]);
    let client = SpotlightClient::new(RemoteConfig {
        confidence: 0.35,
        ..fast(&server.url)
    });
    let sentence = TokenSeq::from_line(v["sentence"].as_str().unwrap());
    let first = client.annotate(&sentence).unwrap();
    let second = client.annotate(&sentence).unwrap();
    assert_eq!(first, second);
    assert_eq!(first[0].uri, "http://dbpedia.org/resource/Myanmar");
    assert_eq!(server.request_count(), 1);
    let req = server.requests.lock().unwrap()[0].clone();
    assert!(req.starts_with("POST /annotate "));
    assert!(req.contains("text=myanmar+was+a+highly+civilized+country+."));
    assert!(req.contains("confidence=0.35"));
    assert!(req.to_ascii_lowercase().contains("accept: application/json"));
}

#[test]
fn client_retries_server_errors() {
    let (_, v) = fixtures().remove(0);
    let server = MockServer::start(vec![
        (503, "{}".into()),
        (500, "{}".into()),
        (200, v["response"].to_string()),
    ]);
    let client = SpotlightClient::new(fast(&server.url));
    let sentence = TokenSeq::from_line(v["sentence"].as_str().unwrap());
    assert_eq!(client.annotate(&sentence).unwrap().len(), 1);
    assert_eq!(server.request_count(), 3);
}

#[test]
fn client_gives_up_after_bounded_retries() {
    let server = MockServer::start(vec![(503, "{}".into())]);
    let client = SpotlightClient::new(RemoteConfig {
        max_retries: 2,
        ..fast(&server.url)
    });
    let err = client.annotate(&TokenSeq::from_line("a b")).unwrap_err();
    assert!(matches!(err, Error::Http(_)));
    assert_eq!(server.request_count(), 3);

    let server = MockServer::start(vec![(400, "{}".into())]);
    let client = SpotlightClient::new(fast(&server.url));
    assert!(matches!(
        client.annotate(&TokenSeq::from_line("a")),
        Err(Error::Http(_))
    ));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn annotate_all_keeps_input_order() {
    let empty = r#"{"@text":"x"}"#.to_string();
    let server = MockServer::start(vec![(200, empty)]);
    let client = SpotlightClient::new(fast(&server.url));
    let sentences: Vec<_> = (0..12)
        .map(|i| TokenSeq::from_line(&format!("sentence {i}")))
        .collect();
    let out = client.annotate_all(&sentences).unwrap();
    assert_eq!(out.len(), 12);
    assert!(out.iter().all(Vec::is_empty));
    assert_eq!(server.request_count(), 12);
}

fn sparql(var: &str, value: Option<&str>) -> String {
    match value {
        Some(v) => format!(
            r#"{{"head":{{"vars":["{var}"]}},"results":{{"bindings":[{{"{var}":{{"type":"uri","value":"{v}"}}}}]}}}}"#
        ),
        None => format!(r#"{{"head":{{"vars":["{var}"]}},"results":{{"bindings":[]}}}}"#),
    }
}

#[test]
fn sparql_resolver_prefers_explicit_hypernym() {
    let server = MockServer::start(vec![(
        200,
        sparql("h", Some("http://dbpedia.org/resource/State")),
    )]);
    let r = SparqlHypernyms::new(format!("{}/sparql", server.url))
        .with_backoff(1, Duration::from_millis(1));
    let h = r.resolve("http://dbpedia.org/resource/Myanmar").unwrap();
    assert_eq!(h, Some(TokenSeq::from_line("state")));
    assert_eq!(server.request_count(), 1);
    let req = server.requests.lock().unwrap()[0].clone();
    assert!(req.starts_with("GET /sparql?query="));
    // cached
    r.resolve("http://dbpedia.org/resource/Myanmar").unwrap();
    assert_eq!(server.request_count(), 1);
}

#[test]
fn sparql_resolver_falls_back_to_ontology_type() {
    let server = MockServer::start(vec![
        (200, sparql("h", None)),
        (200, sparql("t", Some("http://dbpedia.org/ontology/PopulatedPlace"))),
    ]);
    let r = SparqlHypernyms::new(format!("{}/sparql", server.url));
    let h = r.resolve("http://dbpedia.org/resource/Kano").unwrap();
    assert_eq!(h, Some(TokenSeq::from_line("populated place")));
    assert_eq!(server.request_count(), 2);
}

#[test]
fn sparql_resolver_absent() {
    let server = MockServer::start(vec![(200, sparql("h", None)), (200, sparql("t", None))]);
    let r = SparqlHypernyms::new(format!("{}/sparql", server.url));
    let mut mentions = vec![netag::link::EntityMention {
        start: 0,
        end: 1,
        surface: TokenSeq::from_line("x"),
        uri: "http://dbpedia.org/resource/X".into(),
        hypernym: None,
    }];
    attach_hypernyms(&mut mentions, &r).unwrap();
    assert_eq!(mentions[0].hypernym, None);
}
