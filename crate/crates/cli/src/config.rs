//! Pipeline configuration file (TOML).
//!
//! ```toml
//! methods = ["tag", "add", "trans", "transa", "transr", "hypa"]
//! seed = 2021
//!
//! [paths]
//! src = "corpus.en"          # required
//! tgt = "corpus.zh"          # required
//! out_dir = "out"            # required
//! table = "out/table.tsv"    # required unless every method is baseline
//! gazetteer = "gazetteer.tsv"
//! hypernyms = "hypernyms.tsv"
//! annotations = "annotations.jsonl"
//!
//! [aligner]
//! iterations = 5
//! lambda = 4.0
//! p0 = 0.08
//! vb = false
//! alpha = 0.01
//! heuristic = "grow-diag-final-and"
//!
//! [normalize]
//! lowercase = true
//! strip_accents = true
//!
//! [lexicon]
//! min_count = 1
//!
//! [linker]
//! endpoint = "http://localhost:2222/rest"   # LINKER_ENDPOINT overrides
//! sparql_endpoint = "https://dbpedia.org/sparql"
//! confidence = 0.5
//!
//! [tag_vocab]
//! preset = "xlm"             # or "plain", or start/mid1/mid2/end tokens
//!
//! [split]
//! valid = 5000
//! test = 5000
//!
//! [eval]
//! subset = "tag-only"
//! resamples = 10000
//! seed = 2021
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use netag::align::{AlignParams, Heuristic};
use netag::corpus::NormalizeProfile;
use netag::template::{TagVocabulary, TemplateMethod};
use serde::Deserialize;

pub const LINKER_ENV: &str = "LINKER_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("missing required config field `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("`{field}` points to {path}, which does not exist")]
    NotFound { field: &'static str, path: PathBuf },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    paths: Option<RawPaths>,
    method: Option<String>,
    methods: Option<Vec<String>>,
    seed: Option<u64>,
    aligner: Option<RawAligner>,
    normalize: Option<NormalizeProfile>,
    lexicon: Option<RawLexicon>,
    linker: Option<RawLinker>,
    tag_vocab: Option<RawTagVocab>,
    split: Option<SplitSizes>,
    eval: Option<RawEval>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    src: Option<PathBuf>,
    tgt: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    table: Option<PathBuf>,
    gazetteer: Option<PathBuf>,
    hypernyms: Option<PathBuf>,
    annotations: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAligner {
    iterations: Option<usize>,
    lambda: Option<f64>,
    p0: Option<f64>,
    vb: Option<bool>,
    alpha: Option<f64>,
    heuristic: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLexicon {
    min_count: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinker {
    endpoint: Option<String>,
    sparql_endpoint: Option<String>,
    confidence: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTagVocab {
    preset: Option<String>,
    start: Option<String>,
    mid1: Option<String>,
    mid2: Option<String>,
    end: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    subset: Option<String>,
    resamples: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    TagOnly,
    All,
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tag-only" => Ok(Subset::TagOnly),
            "all" => Ok(Subset::All),
            _ => Err(format!("expected `tag-only` or `all`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkerSettings {
    pub endpoint: Option<String>,
    pub sparql_endpoint: Option<String>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub subset: Subset,
    pub resamples: usize,
    pub seed: u64,
}

/// Validated configuration with absolute paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub src: PathBuf,
    pub tgt: PathBuf,
    pub out_dir: PathBuf,
    pub table: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub hypernyms: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub methods: Vec<TemplateMethod>,
    pub seed: u64,
    pub aligner: AlignParams,
    pub heuristic: Heuristic,
    pub normalize: NormalizeProfile,
    pub min_count: u64,
    pub linker: LinkerSettings,
    pub tag_vocab: TagVocabulary,
    pub split: Option<SplitSizes>,
    pub eval: EvalSettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<TemplateMethod>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub confidence: Option<f64>,
    pub subset: Option<Subset>,
}

impl PipelineConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let env = std::env::var(LINKER_ENV).ok().filter(|v| !v.is_empty());
        Self::from_toml(&text, base, overrides, env).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            e => e,
        })
    }

    /// Parses and validates config text. `linker_env` replaces the
    /// configured linker endpoint when set.
    pub fn from_toml(
        text: &str,
        base: &Path,
        overrides: &Overrides,
        linker_env: Option<String>,
    ) -> Result<PipelineConfig, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        let paths = raw.paths.ok_or(ConfigError::Missing("paths"))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let existing = |field: &'static str, p: Option<PathBuf>| -> Result<Option<PathBuf>, ConfigError> {
            match p.map(resolve) {
                Some(p) if !p.exists() => Err(ConfigError::NotFound { field, path: p }),
                p => Ok(p),
            }
        };
        let src = existing("paths.src", paths.src)?.ok_or(ConfigError::Missing("paths.src"))?;
        let tgt = existing("paths.tgt", paths.tgt)?.ok_or(ConfigError::Missing("paths.tgt"))?;
        let out_dir = paths
            .out_dir
            .map(resolve)
            .ok_or(ConfigError::Missing("paths.out_dir"))?;
        let gazetteer = existing("paths.gazetteer", paths.gazetteer)?;
        let hypernyms = existing("paths.hypernyms", paths.hypernyms)?;
        let annotations = existing("paths.annotations", paths.annotations)?;

        let parse_method = |field: &'static str, s: &str| {
            s.parse::<TemplateMethod>()
                .map_err(|message| ConfigError::Invalid { field, message })
        };
        let methods = match (overrides.method, raw.method, raw.methods) {
            (Some(m), _, _) => vec![m],
            (None, Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    field: "method",
                    message: "set either `method` or `methods`, not both".into(),
                })
            }
            (None, Some(m), None) => vec![parse_method("method", &m)?],
            (None, None, Some(ms)) => ms
                .iter()
                .map(|m| parse_method("methods", m))
                .collect::<Result<_, _>>()?,
            (None, None, None) => return Err(ConfigError::Missing("method")),
        };
        if methods.is_empty() {
            return Err(ConfigError::Invalid {
                field: "methods",
                message: "at least one method is required".into(),
            });
        }
        let table = paths.table.map(resolve);
        if table.is_none() && methods.iter().any(|&m| m != TemplateMethod::Baseline) {
            return Err(ConfigError::Missing("paths.table"));
        }

        let seed = overrides.seed.or(raw.seed).unwrap_or(2021);
        let a = raw.aligner.unwrap_or_default();
        let defaults = AlignParams::default();
        let aligner = AlignParams {
            iterations: overrides.iterations.or(a.iterations).unwrap_or(defaults.iterations),
            lambda: a.lambda.unwrap_or(defaults.lambda),
            p0: a.p0.unwrap_or(defaults.p0),
            vb: a.vb.unwrap_or(defaults.vb),
            alpha: a.alpha.unwrap_or(defaults.alpha),
            direction: defaults.direction,
        };
        if aligner.iterations == 0 {
            return Err(ConfigError::Invalid {
                field: "aligner.iterations",
                message: "must be at least 1".into(),
            });
        }
        if !(0.0..1.0).contains(&aligner.p0) {
            return Err(ConfigError::Invalid {
                field: "aligner.p0",
                message: format!("must be in [0, 1), got {}", aligner.p0),
            });
        }
        let heuristic = match a.heuristic {
            Some(h) => h.parse().map_err(|message| ConfigError::Invalid {
                field: "aligner.heuristic",
                message,
            })?,
            None => Heuristic::GrowDiagFinalAnd,
        };

        let l = raw.linker.unwrap_or_default();
        let confidence = overrides.confidence.or(l.confidence).unwrap_or(0.5);
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ConfigError::Invalid {
                field: "linker.confidence",
                message: format!("must be in [0, 1], got {confidence}"),
            });
        }
        let linker = LinkerSettings {
            endpoint: linker_env.or(l.endpoint),
            sparql_endpoint: l.sparql_endpoint,
            confidence,
        };
        let needs_linking = methods.iter().any(|&m| m != TemplateMethod::Baseline);
        if needs_linking && annotations.is_none() && gazetteer.is_none() && linker.endpoint.is_none() {
            return Err(ConfigError::Missing("paths.gazetteer"));
        }

        let tag_vocab = tag_vocabulary(raw.tag_vocab.unwrap_or_default())?;

        let e = raw.eval.unwrap_or_default();
        let subset = match (overrides.subset, e.subset) {
            (Some(s), _) => s,
            (None, Some(s)) => s.parse().map_err(|message| ConfigError::Invalid {
                field: "eval.subset",
                message,
            })?,
            (None, None) => Subset::TagOnly,
        };
        let eval = EvalSettings {
            subset,
            resamples: e.resamples.unwrap_or(10_000),
            seed: e.seed.unwrap_or(seed),
        };

        Ok(PipelineConfig {
            src,
            tgt,
            out_dir,
            table,
            gazetteer,
            hypernyms,
            annotations,
            methods,
            seed,
            aligner,
            heuristic,
            normalize: raw.normalize.unwrap_or_default(),
            min_count: raw.lexicon.and_then(|l| l.min_count).unwrap_or(1),
            linker,
            tag_vocab,
            split: raw.split,
            eval,
        })
    }
}

fn tag_vocabulary(raw: RawTagVocab) -> Result<TagVocabulary, ConfigError> {
    let mut vocab = match raw.preset.as_deref() {
        None | Some("xlm") => TagVocabulary::xlm(),
        Some("plain") => TagVocabulary::plain(),
        Some(other) => {
            return Err(ConfigError::Invalid {
                field: "tag_vocab.preset",
                message: format!("expected `xlm` or `plain`, got {other:?}"),
            })
        }
    };
    for (slot, value) in [
        (&mut vocab.start, raw.start),
        (&mut vocab.mid1, raw.mid1),
        (&mut vocab.mid2, raw.mid2),
        (&mut vocab.end, raw.end),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    vocab.validate().map_err(|e| ConfigError::Invalid {
        field: "tag_vocab",
        message: e.to_string(),
    })?;
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for f in ["c.en", "c.zh", "gaz.tsv"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        dir
    }

    const BASE: &str = r#"
method = "trans"
[paths]
src = "c.en"
tgt = "c.zh"
out_dir = "out"
gazetteer = "gaz.tsv"
"#;

    fn load(text: &str, dir: &Path) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::from_toml(text, dir, &Overrides::default(), None)
    }

    #[test]
    fn missing_table_is_named() {
        let dir = setup();
        let err = load(BASE, dir.path()).unwrap_err();
        assert!(matches!(err, ConfigError::Missing("paths.table")));
        assert!(err.to_string().contains("paths.table"));
    }

    #[test]
    fn full_config_resolves() {
        let dir = setup();
        let text = format!("{BASE}table = \"out/table.tsv\"\n[aligner]\niterations = 7\n");
        let cfg = load(&text, dir.path()).unwrap();
        assert_eq!(cfg.methods, [TemplateMethod::Trans]);
        assert_eq!(cfg.src, dir.path().join("c.en"));
        assert_eq!(cfg.aligner.iterations, 7);
        assert_eq!(cfg.tag_vocab, TagVocabulary::xlm());
        assert_eq!(cfg.heuristic, Heuristic::GrowDiagFinalAnd);
        assert_eq!(cfg.eval.subset, Subset::TagOnly);
    }

    #[test]
    fn overrides_and_env() {
        let dir = setup();
        let text = format!("{BASE}table = \"t.tsv\"\n[linker]\nendpoint = \"http://a\"\n");
        let o = Overrides {
            method: Some(TemplateMethod::HypA),
            iterations: Some(2),
            confidence: Some(0.7),
            ..Overrides::default()
        };
        let cfg = PipelineConfig::from_toml(&text, dir.path(), &o, Some("http://b".into())).unwrap();
        assert_eq!(cfg.methods, [TemplateMethod::HypA]);
        assert_eq!(cfg.aligner.iterations, 2);
        assert_eq!(cfg.linker.confidence, 0.7);
        assert_eq!(cfg.linker.endpoint.as_deref(), Some("http://b"));
    }

    #[test]
    fn invalid_values_are_named() {
        let dir = setup();
        let text = BASE.replace("\"trans\"", "\"transq\"");
        assert!(matches!(
            load(&text, dir.path()),
            Err(ConfigError::Invalid { field: "method", .. })
        ));
        let text = BASE.replace("c.en", "nope.en");
        assert!(matches!(
            load(&text, dir.path()),
            Err(ConfigError::NotFound { field: "paths.src", .. })
        ));
        let text = format!("{BASE}bogus = 1\n");
        assert!(matches!(load(&text, dir.path()), Err(ConfigError::Parse { .. })));
        let text = BASE.replace("out_dir = \"out\"\n", "");
        assert!(matches!(
            load(&text, dir.path()),
            Err(ConfigError::Missing("paths.out_dir"))
        ));
    }
}
