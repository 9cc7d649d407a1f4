//! Entity mentions: finding them, attaching hypernyms, and projecting them
//! onto the target side of a sentence pair.
//!
//! Two annotators produce the same [`EntityMention`] lists: a client for
//! the DBpedia Spotlight `annotate` API and an offline longest-match
//! [`Gazetteer`]. Everything downstream only sees the mention lists.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::AlignmentSet;
use crate::corpus::{read_lines, tokenize_normalize, NormalizeProfile, TokenSeq};
use crate::error::{Error, Result};
use crate::lexicon::TranslationTable;

/// Half-open token interval `[start, end)`.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    pub surface: TokenSeq,
    pub uri: String,
    pub hypernym: Option<TokenSeq>,
}

impl EntityMention {
    pub fn span(&self) -> Span {
        (self.start, self.end)
    }
}

/// A mention together with everything the templates need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionBundle {
    pub mention: EntityMention,
    pub tgt_span: Span,
    /// Target tokens inside `tgt_span`.
    pub translation: TokenSeq,
    /// The hypernym translated word by word, or the source hypernym when
    /// some word is missing from the table.
    pub hypernym_tgt: TokenSeq,
}

impl MentionBundle {
    /// Bundles `mention` if it has a URI, a hypernym and a target projection.
    pub fn build(
        mention: &EntityMention,
        alignment: &AlignmentSet,
        tgt: &TokenSeq,
        table: &TranslationTable,
    ) -> Option<MentionBundle> {
        if mention.uri.is_empty() {
            return None;
        }
        let hypernym = mention.hypernym.as_ref().filter(|h| !h.is_empty())?;
        let tgt_span = project_entity_span(mention, alignment, tgt.len())?;
        let hypernym_tgt = table
            .translate_all(hypernym)
            .unwrap_or_else(|| hypernym.clone());
        Some(MentionBundle {
            mention: mention.clone(),
            tgt_span,
            translation: tgt.slice(tgt_span.0, tgt_span.1),
            hypernym_tgt,
        })
    }
}

/// Offline surface-form dictionary: token sequence to (URI, hypernym).
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<Vec<String>, (String, Option<TokenSeq>)>,
    max_len: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Gazetteer::default()
    }

    /// Adds an entry. Empty keys are ignored.
    pub fn insert(&mut self, key: TokenSeq, uri: impl Into<String>, hypernym: Option<TokenSeq>) {
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries
            .insert(key.into_vec(), (uri.into(), hypernym.filter(|h| !h.is_empty())));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// TSV with columns `surface \t uri [\t hypernym]`. Surface forms and
    /// hypernyms are normalized with `profile`.
    pub fn load(path: impl AsRef<Path>, profile: NormalizeProfile) -> Result<Gazetteer> {
        let path = path.as_ref();
        let mut g = Gazetteer::new();
        for (i, line) in read_lines(path)?.iter().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols[1].is_empty() {
                return Err(Error::parse(path, i + 1, "expected surface and uri columns"));
            }
            let key = tokenize_normalize(cols[0], profile);
            if key.is_empty() {
                return Err(Error::parse(path, i + 1, "empty surface form"));
            }
            let hypernym = cols.get(2).map(|h| tokenize_normalize(h, profile));
            g.insert(key, cols[1], hypernym);
        }
        Ok(g)
    }
}

/// Greedy longest match, left to right, non-overlapping.
pub fn annotate_gazetteer(sentence: &TokenSeq, gazetteer: &Gazetteer) -> Vec<EntityMention> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sentence.len() {
        let longest = (1..=gazetteer.max_len.min(sentence.len() - i))
            .rev()
            .find_map(|len| gazetteer.entries.get(&sentence[i..i + len]).map(|e| (len, e)));
        match longest {
            Some((len, (uri, hypernym))) => {
                out.push(EntityMention {
                    start: i,
                    end: i + len,
                    surface: sentence.slice(i, i + len),
                    uri: uri.clone(),
                    hypernym: hypernym.clone(),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Target interval covering every target token linked to the mention.
///
/// `None` when nothing is linked or when a token inside the interval is
/// linked to a source token outside the mention.
pub fn project_entity_span(
    mention: &EntityMention,
    alignment: &AlignmentSet,
    tgt_len: usize,
) -> Option<Span> {
    let inside = |s: usize| (mention.start..mention.end).contains(&s);
    let targets = alignment.iter().filter(|&(s, _)| inside(s)).map(|(_, t)| t);
    let (lo, hi) = targets.fold(None, |acc: Option<(usize, usize)>, t| match acc {
        None => Some((t, t)),
        Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
    })?;
    if hi >= tgt_len {
        return None;
    }
    let leaks = alignment
        .iter()
        .any(|(s, t)| (lo..=hi).contains(&t) && !inside(s));
    (!leaks).then_some((lo, hi + 1))
}

// ---------------------------------------------------------------------------
// Remote annotation

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub confidence: f64,
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            confidence: 0.5,
            max_retries: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Deserialize)]
struct SpotlightResponse {
    #[serde(rename = "Resources", default)]
    resources: Option<Vec<SpotlightResource>>,
}

#[derive(Debug, Deserialize)]
struct SpotlightResource {
    #[serde(rename = "@URI")]
    uri: String,
    #[serde(rename = "@surfaceForm")]
    surface_form: serde_json::Value,
    #[serde(rename = "@offset")]
    offset: serde_json::Value,
}

fn json_scalar_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn utf16_len(s: &str) -> usize {
    s.encode_utf16().count()
}

/// Converts an annotate response for `sentence` (sent space-joined) into
/// mentions.
///
/// Offsets are UTF-16 code units, as the service reports them. Mentions
/// whose character range does not start and end on token boundaries are
/// dropped with a warning, as are mentions overlapping an earlier one.
pub fn parse_spotlight_response(body: &str, sentence: &TokenSeq) -> Result<Vec<EntityMention>> {
    let response: SpotlightResponse =
        serde_json::from_str(body).map_err(|e| Error::MalformedResponse(e.to_string()))?;
    let mut starts = HashMap::new();
    let mut ends = HashMap::new();
    let mut pos = 0;
    for (k, tok) in sentence.iter().enumerate() {
        starts.insert(pos, k);
        pos += utf16_len(tok);
        ends.insert(pos, k + 1);
        pos += 1;
    }
    let mut mentions: Vec<EntityMention> = Vec::new();
    for r in response.resources.unwrap_or_default() {
        let surface = json_scalar_string(&r.surface_form)
            .ok_or_else(|| Error::MalformedResponse("@surfaceForm is not a string".into()))?;
        let offset: usize = json_scalar_string(&r.offset)
            .and_then(|o| o.parse().ok())
            .ok_or_else(|| Error::MalformedResponse(format!("bad @offset {:?}", r.offset)))?;
        let end_offset = offset + utf16_len(&surface);
        match (starts.get(&offset), ends.get(&end_offset)) {
            (Some(&start), Some(&end)) if start < end => {
                if mentions.iter().any(|m| start < m.end && m.start < end) {
                    log::warn!("dropping overlapping mention {surface:?} at offset {offset}");
                    continue;
                }
                mentions.push(EntityMention {
                    start,
                    end,
                    surface: sentence.slice(start, end),
                    uri: r.uri,
                    hypernym: None,
                });
            }
            _ => log::warn!(
                "dropping mention {surface:?} at offset {offset}: not on token boundaries"
            ),
        }
    }
    mentions.sort_by_key(|m| m.start);
    Ok(mentions)
}

fn http_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// Runs `request` up to `1 + max_retries` times with exponential backoff.
/// Transport errors, 429 and 5xx are retried; other statuses fail at once.
fn with_retries(
    max_retries: u32,
    backoff: Duration,
    mut request: impl FnMut() -> std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
) -> Result<String> {
    let mut attempt = 0;
    loop {
        let failure = match request() {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if status == 200 {
                    return resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| Error::Http(e.to_string()));
                }
                if status != 429 && status < 500 {
                    return Err(Error::Http(format!("status {status}")));
                }
                format!("status {status}")
            }
            Err(e) => e.to_string(),
        };
        if attempt >= max_retries {
            return Err(Error::Http(format!(
                "{failure} (gave up after {} attempts)",
                attempt + 1
            )));
        }
        log::warn!("request failed ({failure}), retrying");
        thread::sleep(backoff * 2u32.saturating_pow(attempt));
        attempt += 1;
    }
}

/// Client for the Spotlight `annotate` endpoint with an in-memory cache
/// keyed by the SHA-256 of the request text.
pub struct SpotlightClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    cache: Mutex<HashMap<[u8; 32], Vec<EntityMention>>>,
}

impl SpotlightClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = http_agent(config.timeout);
        SpotlightClient {
            config,
            agent,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn annotate_url(&self) -> String {
        let base = self.config.endpoint.trim_end_matches('/');
        if base.ends_with("/annotate") {
            base.to_owned()
        } else {
            format!("{base}/annotate")
        }
    }

    pub fn annotate(&self, sentence: &TokenSeq) -> Result<Vec<EntityMention>> {
        if sentence.is_empty() {
            return Ok(Vec::new());
        }
        let text = sentence.joined();
        let key: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let url = self.annotate_url();
        let confidence = self.config.confidence.to_string();
        let body = with_retries(self.config.max_retries, self.config.backoff, || {
            self.agent
                .post(&url)
                .header("Accept", "application/json")
                .send_form([("text", text.as_str()), ("confidence", confidence.as_str())])
        })?;
        let mentions = parse_spotlight_response(&body, sentence)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, mentions.clone());
        Ok(mentions)
    }

    /// Annotates every sentence with at most `max_in_flight` concurrent
    /// requests. Results are in input order.
    pub fn annotate_all(&self, sentences: &[TokenSeq]) -> Result<Vec<Vec<EntityMention>>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.max_in_flight.max(1))
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;
        pool.install(|| sentences.par_iter().map(|s| self.annotate(s)).collect())
    }
}

// ---------------------------------------------------------------------------
// Hypernyms

pub trait HypernymResolver: Sync {
    fn resolve(&self, uri: &str) -> Result<Option<TokenSeq>>;
}

/// URI to hypernym label, loaded from a TSV of `uri \t label`.
#[derive(Debug, Clone, Default)]
pub struct HypernymMap {
    map: HashMap<String, TokenSeq>,
}

impl HypernymMap {
    pub fn new() -> Self {
        HypernymMap::default()
    }

    /// Labels are lowercased and tokenized; empty labels are ignored.
    pub fn insert(&mut self, uri: impl Into<String>, label: &str) {
        let tokens = tokenize_normalize(label, NormalizeProfile::default());
        if !tokens.is_empty() {
            self.map.insert(uri.into(), tokens);
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<HypernymMap> {
        let path = path.as_ref();
        let mut m = HypernymMap::new();
        for (i, line) in read_lines(path)?.iter().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (uri, label) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected uri and label columns"))?;
            m.insert(uri, label);
        }
        Ok(m)
    }
}

impl HypernymResolver for HypernymMap {
    fn resolve(&self, uri: &str) -> Result<Option<TokenSeq>> {
        Ok(self.map.get(uri).cloned())
    }
}

const GOLD_HYPERNYM: &str = "http://purl.org/linguistics/gold/hypernym";
const DBPEDIA_ONTOLOGY: &str = "http://dbpedia.org/ontology/";

/// Looks hypernyms up through a SPARQL endpoint.
///
/// An explicit `gold:hypernym` fact is preferred. Otherwise the
/// `dbo:` type with the longest `rdfs:subClassOf` chain is used, i.e. the
/// most specific ontology class.
pub struct SparqlHypernyms {
    endpoint: String,
    agent: ureq::Agent,
    max_retries: u32,
    backoff: Duration,
    cache: Mutex<HashMap<String, Option<TokenSeq>>>,
}

impl SparqlHypernyms {
    pub fn new(endpoint: impl Into<String>) -> Self {
        SparqlHypernyms {
            endpoint: endpoint.into(),
            agent: http_agent(Duration::from_secs(30)),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_backoff(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    fn select_first(&self, query: &str, var: &str) -> Result<Option<String>> {
        let body = with_retries(self.max_retries, self.backoff, || {
            self.agent
                .get(&self.endpoint)
                .query("query", query)
                .query("format", "application/sparql-results+json")
                .header("Accept", "application/sparql-results+json")
                .call()
        })?;
        let v: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| Error::MalformedResponse(e.to_string()))?;
        let bindings = v
            .pointer("/results/bindings")
            .and_then(|b| b.as_array())
            .ok_or_else(|| Error::MalformedResponse("missing results.bindings".into()))?;
        Ok(bindings
            .first()
            .and_then(|b| b.pointer(&format!("/{var}/value")))
            .and_then(|v| v.as_str())
            .map(str::to_owned))
    }
}

fn hypernym_query(uri: &str) -> String {
    format!("SELECT ?h WHERE {{ <{uri}> <{GOLD_HYPERNYM}> ?h }} LIMIT 1")
}

fn type_query(uri: &str) -> String {
    format!(
        "SELECT ?t (COUNT(?super) AS ?depth) WHERE {{ \
         <{uri}> a ?t . FILTER(STRSTARTS(STR(?t), \"{DBPEDIA_ONTOLOGY}\")) \
         ?t <http://www.w3.org/2000/01/rdf-schema#subClassOf>* ?super }} \
         GROUP BY ?t ORDER BY DESC(?depth) ?t LIMIT 1"
    )
}

impl HypernymResolver for SparqlHypernyms {
    fn resolve(&self, uri: &str) -> Result<Option<TokenSeq>> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(uri) {
            return Ok(hit.clone());
        }
        let found = match self.select_first(&hypernym_query(uri), "h")? {
            Some(h) => Some(h),
            None => self.select_first(&type_query(uri), "t")?,
        };
        let label = found.map(|u| label_from_uri(&u)).filter(|l| !l.is_empty());
        self.cache
            .lock()
            .expect("cache lock")
            .insert(uri.to_owned(), label.clone());
        Ok(label)
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).ok();
            if let Some(b) = hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Readable label from a resource or class URI: `.../Sovereign_state` →
/// `[sovereign, state]`, `.../PopulatedPlace` → `[populated, place]`.
pub fn label_from_uri(uri: &str) -> TokenSeq {
    let local = uri.rsplit(['/', '#']).next().unwrap_or(uri);
    let local = percent_decode(local);
    let mut spaced = String::with_capacity(local.len() + 4);
    let mut prev_lower = false;
    for c in local.chars() {
        if c == '_' {
            spaced.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            spaced.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        spaced.push(c);
    }
    tokenize_normalize(&spaced, NormalizeProfile::default())
}

/// Fills in missing hypernyms. Mentions that already carry one keep it.
pub fn attach_hypernyms(
    mentions: &mut [EntityMention],
    resolver: &dyn HypernymResolver,
) -> Result<()> {
    for m in mentions.iter_mut() {
        if m.hypernym.is_none() {
            m.hypernym = resolver.resolve(&m.uri)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Annotation files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MentionRecord {
    start: usize,
    end: usize,
    surface: String,
    uri: String,
    hypernym: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnnotationRecord {
    line_no: usize,
    mentions: Vec<MentionRecord>,
}

/// Mentions for one sentence, keyed by its corpus line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceAnnotations {
    pub line_no: usize,
    pub mentions: Vec<EntityMention>,
}

/// JSON Lines: `{line_no, mentions: [{start, end, surface, uri, hypernym}]}`.
pub fn write_annotations(path: impl AsRef<Path>, annotations: &[SentenceAnnotations]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in annotations {
        let record = AnnotationRecord {
            line_no: a.line_no,
            mentions: a
                .mentions
                .iter()
                .map(|m| MentionRecord {
                    start: m.start,
                    end: m.end,
                    surface: m.surface.joined(),
                    uri: m.uri.clone(),
                    hypernym: m.hypernym.as_ref().map(TokenSeq::joined),
                })
                .collect(),
        };
        let line = serde_json::to_string(&record).expect("serializable");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<SentenceAnnotations>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::parse(path, i + 1, m);
        let record: AnnotationRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let mut mentions = Vec::with_capacity(record.mentions.len());
        for m in record.mentions {
            let surface = TokenSeq::from_line(&m.surface);
            if m.start >= m.end || surface.len() != m.end - m.start {
                return Err(bad(format!("span [{}, {}) does not match surface", m.start, m.end)));
            }
            mentions.push(EntityMention {
                start: m.start,
                end: m.end,
                surface,
                uri: m.uri,
                hypernym: m.hypernym.map(|h| TokenSeq::from_line(&h)).filter(|h| !h.is_empty()),
            });
        }
        out.push(SentenceAnnotations {
            line_no: record.line_no,
            mentions,
        });
    }
    Ok(out)
}
