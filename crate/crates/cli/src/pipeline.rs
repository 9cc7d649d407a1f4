//! End-to-end pipeline: align, lexicon, link, tag.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use netag::align::{
    symmetrize, write_pharaoh, AlignModel, AlignParams, AlignmentSet, Direction, Heuristic,
    Trainer,
};
use netag::corpus::{read_parallel, split_holdout, write_side, NormalizeProfile, ParallelCorpus, Side};
use netag::lexicon::{build_translation_table, TranslationTable};
use netag::link::{
    annotate_gazetteer, attach_hypernyms, read_annotations, write_annotations, Gazetteer,
    HypernymMap, HypernymResolver, RemoteConfig, SentenceAnnotations, SparqlHypernyms,
    SpotlightClient,
};
use netag::template::{tag_corpus, TagStats, TemplateMethod};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{LinkerSettings, PipelineConfig};

/// Both directional models, their training curves and the symmetrized links.
pub struct Aligned {
    pub forward: AlignModel,
    pub reverse: AlignModel,
    pub perplexities: Vec<(Direction, usize, f64)>,
    pub links: Vec<AlignmentSet>,
}

pub fn train(corpus: &ParallelCorpus, params: AlignParams) -> Result<(AlignModel, Vec<f64>)> {
    let mut trainer = Trainer::new(corpus, params)?;
    let mut curve = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let stats = trainer.step();
        log::info!(
            "align {} iteration {}: perplexity {:.4}",
            params.direction,
            stats.iteration,
            stats.perplexity
        );
        curve.push(stats.perplexity);
    }
    Ok((trainer.into_model(), curve))
}

/// Viterbi in both directions, combined with `heuristic`.
pub fn symmetrized_links(
    forward: &AlignModel,
    reverse: &AlignModel,
    corpus: &ParallelCorpus,
    heuristic: Heuristic,
) -> Result<Vec<AlignmentSet>> {
    let fwd = netag::align::viterbi_corpus(forward, corpus)?;
    let rev = netag::align::viterbi_corpus(reverse, corpus)?;
    fwd.iter()
        .zip(&rev)
        .map(|(f, r)| Ok(symmetrize(f, r, heuristic)?))
        .collect()
}

pub fn align(corpus: &ParallelCorpus, params: AlignParams, heuristic: Heuristic) -> Result<Aligned> {
    let mut perplexities = Vec::new();
    let mut models = Vec::new();
    for direction in [Direction::SrcToTgt, Direction::TgtToSrc] {
        let (model, curve) = train(corpus, AlignParams { direction, ..params })?;
        perplexities.extend(curve.into_iter().enumerate().map(|(i, p)| (direction, i + 1, p)));
        models.push(model);
    }
    let reverse = models.pop().expect("two models");
    let forward = models.pop().expect("two models");
    let links = symmetrized_links(&forward, &reverse, corpus, heuristic)?;
    Ok(Aligned {
        forward,
        reverse,
        perplexities,
        links,
    })
}

pub fn perplexity_tsv(rows: &[(Direction, usize, f64)]) -> String {
    let mut s = String::from("direction\titeration\tperplexity\n");
    for (d, i, p) in rows {
        let _ = writeln!(s, "{d}\t{i}\t{p:.6}");
    }
    s
}

/// Annotations from the offline gazetteer or the remote linker, with
/// hypernyms attached from a map file or a SPARQL endpoint.
pub fn link(
    corpus: &ParallelCorpus,
    gazetteer: Option<&Path>,
    hypernyms: Option<&Path>,
    linker: &LinkerSettings,
    normalize: NormalizeProfile,
) -> Result<Vec<SentenceAnnotations>> {
    let sentences: Vec<_> = corpus.pairs.iter().map(|p| p.src.clone()).collect();
    let mut mentions = if let Some(g) = gazetteer {
        let gaz = Gazetteer::load(g, normalize)?;
        sentences.iter().map(|s| annotate_gazetteer(s, &gaz)).collect()
    } else if let Some(endpoint) = &linker.endpoint {
        let mut cfg = RemoteConfig::new(endpoint.clone());
        cfg.confidence = linker.confidence;
        SpotlightClient::new(cfg).annotate_all(&sentences)?
    } else {
        anyhow::bail!("no gazetteer or linker endpoint configured");
    };
    let resolver: Option<Box<dyn HypernymResolver>> = match (hypernyms, &linker.sparql_endpoint) {
        (Some(p), _) => Some(Box::new(HypernymMap::load(p)?)),
        (None, Some(url)) => Some(Box::new(SparqlHypernyms::new(url.clone()))),
        (None, None) => None,
    };
    if let Some(r) = resolver {
        for m in &mut mentions {
            attach_hypernyms(m, r.as_ref())?;
        }
    }
    Ok(corpus
        .pairs
        .iter()
        .zip(mentions)
        .map(|(p, mentions)| SentenceAnnotations {
            line_no: p.line_no,
            mentions,
        })
        .collect())
}

/// Restricts line-keyed inputs to the pairs of `part`.
pub fn select<'a, T: Clone>(
    full: &'a ParallelCorpus,
    values: &'a [T],
    part: &ParallelCorpus,
) -> Vec<T> {
    let pos: HashMap<usize, usize> = full
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.line_no, i))
        .collect();
    part.pairs
        .iter()
        .map(|p| values[pos[&p.line_no]].clone())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageManifest {
    pub seed: u64,
    pub methods: Vec<TemplateMethod>,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

struct Recorder<'a> {
    root: &'a Path,
    stages: Vec<StageRecord>,
}

impl Recorder<'_> {
    fn stage(&mut self, name: &str, files: &[PathBuf]) -> Result<()> {
        let mut artifacts = Vec::with_capacity(files.len());
        for f in files {
            let rel = f.strip_prefix(self.root).unwrap_or(f);
            artifacts.push(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(f)?,
                bytes: fs::metadata(f)?.len(),
            });
        }
        self.stages.push(StageRecord {
            stage: name.to_owned(),
            artifacts,
        });
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub stats: Vec<(TemplateMethod, String, TagStats)>,
    pub manifest_path: PathBuf,
}

pub fn tag_stats_tsv(stats: &[(TemplateMethod, String, TagStats)]) -> String {
    let mut s = String::from("method\tpart\ttotal_pairs\ttagged_pairs\ttag_fraction\n");
    for (m, part, st) in stats {
        let _ = writeln!(
            s,
            "{m}\t{part}\t{}\t{}\t{:.4}",
            st.total_pairs, st.tagged_pairs, st.tag_fraction
        );
    }
    s
}

pub fn run(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    let out = &cfg.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rec = Recorder {
        root: out,
        stages: Vec::new(),
    };

    let corpus = read_parallel(&cfg.src, &cfg.tgt, cfg.normalize).context("stage read")?;
    ensure!(!corpus.is_empty(), "stage read: corpus is empty");
    if corpus.dropped_count > 0 {
        log::warn!("dropped {} pairs with an empty side", corpus.dropped_count);
    }

    let parts: Vec<(String, ParallelCorpus)> = match cfg.split {
        Some(sizes) => {
            let h = split_holdout(&corpus, sizes.valid, sizes.test, cfg.seed).context("stage split")?;
            let dir = out.join("split");
            fs::create_dir_all(&dir)?;
            let mut files = Vec::new();
            for (name, part) in [("train", &h.train), ("valid", &h.valid), ("test", &h.test)] {
                for (side, ext) in [(Side::Src, "src"), (Side::Tgt, "tgt")] {
                    let p = dir.join(format!("{name}.{ext}"));
                    write_side(part, side, &p)?;
                    files.push(p);
                }
            }
            rec.stage("split", &files)?;
            vec![
                ("train".into(), h.train),
                ("valid".into(), h.valid),
                ("test".into(), h.test),
            ]
        }
        None => vec![("all".into(), corpus.clone())],
    };

    let aligned = align(&corpus, cfg.aligner, cfg.heuristic).context("stage align")?;
    let align_dir = out.join("align");
    fs::create_dir_all(&align_dir)?;
    let files = [
        align_dir.join("src-tgt.model"),
        align_dir.join("tgt-src.model"),
        align_dir.join("perplexity.tsv"),
        align_dir.join("symmetrized.pharaoh"),
    ];
    aligned.forward.save(&files[0])?;
    aligned.reverse.save(&files[1])?;
    fs::write(&files[2], perplexity_tsv(&aligned.perplexities))?;
    write_pharaoh(&files[3], &aligned.links)?;
    rec.stage("align", &files)?;

    let table = build_translation_table(&corpus, &aligned.links, cfg.min_count).context("stage lexicon")?;
    let table_path = cfg.table.clone().unwrap_or_else(|| out.join("table.tsv"));
    if let Some(dir) = table_path.parent() {
        fs::create_dir_all(dir)?;
    }
    table.save(&table_path)?;
    rec.stage("lexicon", std::slice::from_ref(&table_path))?;

    let annotations = match &cfg.annotations {
        Some(p) => {
            let a = read_annotations(p).context("stage link")?;
            ensure!(
                a.len() == corpus.len(),
                "stage link: {} annotation records for {} pairs",
                a.len(),
                corpus.len()
            );
            a
        }
        None if cfg.methods.iter().all(|&m| m == TemplateMethod::Baseline) => corpus
            .pairs
            .iter()
            .map(|p| SentenceAnnotations {
                line_no: p.line_no,
                mentions: Vec::new(),
            })
            .collect(),
        None => link(
            &corpus,
            cfg.gazetteer.as_deref(),
            cfg.hypernyms.as_deref(),
            &cfg.linker,
            cfg.normalize,
        )
        .context("stage link")?,
    };
    let ann_path = out.join("annotations.jsonl");
    write_annotations(&ann_path, &annotations)?;
    rec.stage("link", &[ann_path])?;

    let mut stats = Vec::new();
    let mut files = Vec::new();
    for &method in &cfg.methods {
        let dir = out.join(method.name());
        fs::create_dir_all(&dir)?;
        for (name, part) in &parts {
            let (tagged, st) = tag_corpus(
                part,
                &select(&corpus, &annotations, part),
                &select(&corpus, &aligned.links, part),
                &table,
                method,
                &cfg.tag_vocab,
            )
            .with_context(|| format!("stage tag ({method}, {name})"))?;
            let paths = [
                dir.join(format!("{name}.src")),
                dir.join(format!("{name}.tgt")),
                dir.join(format!("{name}.manifest.jsonl")),
            ];
            tagged.write(&paths[0], &paths[1], &paths[2])?;
            files.extend(paths);
            stats.push((method, name.clone(), st));
        }
    }
    let stats_path = out.join("tag_stats.tsv");
    fs::write(&stats_path, tag_stats_tsv(&stats))?;
    files.push(stats_path);
    rec.stage("tag", &files)?;

    let manifest = StageManifest {
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        stages: rec.stages,
    };
    let manifest_path = out.join("stage_manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(PipelineSummary {
        stats,
        manifest_path,
    })
}

/// Loads a translation table, or an empty one when none is needed.
pub fn load_table(path: Option<&Path>) -> Result<TranslationTable> {
    match path {
        Some(p) => Ok(TranslationTable::load(p)?),
        None => Ok(TranslationTable::new(Direction::SrcToTgt)),
    }
}
