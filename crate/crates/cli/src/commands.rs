use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use netag::align::{
    read_pharaoh, symmetrize, viterbi_corpus, write_pharaoh, AlignModel, AlignParams,
    AlignmentSet, AlignmentVector, Direction, Heuristic,
};
use netag::corpus::{
    read_parallel, read_token_lines, split_holdout, write_lines, write_side, NormalizeProfile,
    ParallelCorpus, Side, TokenSeq,
};
use netag::lexicon::build_translation_table;
use netag::link::{read_annotations, write_annotations, HypernymMap, HypernymResolver, SparqlHypernyms};
use netag::metrics::{bleu, copy_accuracy, pos_accuracy, pos_sentences};
use netag::template::{detag, read_manifest, tag_corpus, TagVocabulary, TemplateMethod};

use crate::config::{LinkerSettings, Overrides, PipelineConfig, Subset, LINKER_ENV};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "netag", version, about = "Named-entity tagging for tag-and-copy machine translation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a directional alignment model
    AlignTrain(AlignTrainArgs),
    /// Write Viterbi alignments of a trained model
    AlignApply(AlignApplyArgs),
    /// Combine forward and reverse alignments
    Symmetrize(SymmetrizeArgs),
    /// Build the word translation table
    LexiconBuild(LexiconArgs),
    /// Find entity mentions in the source side
    LinkAnnotate(LinkAnnotateArgs),
    /// Attach hypernyms to annotated mentions
    LinkHypernyms(LinkHypernymsArgs),
    /// Render tagging templates over a parallel corpus
    TagApply(TagApplyArgs),
    /// Remove tags from model output
    Detag(DetagArgs),
    /// Corpus BLEU, optionally on tagged sentences only
    EvalBleu(EvalBleuArgs),
    /// Copy accuracy with error breakdown
    EvalCopy(EvalCopyArgs),
    /// Per-POS accuracy around tagged entities
    EvalPos(EvalPosArgs),
    /// Random valid/test hold-out split
    Split(SplitArgs),
    /// Run align, lexicon, link and tag from a config file
    PipelineRun(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    /// Keep case
    #[arg(long)]
    pub no_lowercase: bool,
    /// Keep diacritics
    #[arg(long)]
    pub keep_accents: bool,
}

impl CorpusArgs {
    pub fn profile(&self) -> NormalizeProfile {
        NormalizeProfile {
            lowercase: !self.no_lowercase,
            strip_accents: !self.keep_accents,
        }
    }

    pub fn read(&self) -> Result<ParallelCorpus> {
        let c = read_parallel(&self.src, &self.tgt, self.profile())?;
        if c.dropped_count > 0 {
            log::warn!("dropped {} pairs with an empty side", c.dropped_count);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VocabPreset {
    Xlm,
    Plain,
}

impl VocabPreset {
    fn vocab(self) -> TagVocabulary {
        match self {
            VocabPreset::Xlm => TagVocabulary::xlm(),
            VocabPreset::Plain => TagVocabulary::plain(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AlignTrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "src-tgt")]
    pub direction: Direction,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    #[arg(long, default_value_t = 4.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.08)]
    pub p0: f64,
    /// Variational Bayes updates instead of maximum likelihood
    #[arg(long)]
    pub vb: bool,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long)]
    pub model: PathBuf,
    /// Per-iteration perplexity TSV
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignApplyArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SymmetrizeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Links from the src-tgt model
    #[arg(long)]
    pub fwd: PathBuf,
    /// Links from the tgt-src model
    #[arg(long)]
    pub rev: PathBuf,
    #[arg(long, default_value = "grow-diag-final-and")]
    pub heuristic: Heuristic,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub alignments: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LinkAnnotateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Offline surface-form dictionary
    #[arg(long, conflicts_with = "endpoint")]
    pub gazetteer: Option<PathBuf>,
    /// Spotlight REST base URL
    #[arg(long, env = LINKER_ENV)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub confidence: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LinkHypernymsArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// TSV of uri and hypernym label
    #[arg(long, conflicts_with = "sparql")]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub sparql: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagApplyArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub alignments: PathBuf,
    /// Required for every method except baseline
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub method: TemplateMethod,
    #[arg(long, value_enum, default_value = "xlm")]
    pub tag_vocab: VocabPreset,
    #[arg(long)]
    pub out_src: PathBuf,
    #[arg(long)]
    pub out_tgt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetagArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub method: TemplateMethod,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "xlm")]
    pub tag_vocab: VocabPreset,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalBleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Tag manifest; needed for --subset tag-only
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    pub subset: Subset,
    #[arg(long, default_value_t = 4)]
    pub max_n: usize,
}

#[derive(Debug, Args)]
pub struct EvalCopyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Raw model output, before detagging
    #[arg(long)]
    pub output: PathBuf,
    /// Defaults to the method recorded in the manifest
    #[arg(long)]
    pub method: Option<TemplateMethod>,
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalPosArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// One tag per source token
    #[arg(long)]
    pub pos: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Source-reference links; computed from the two models when absent
    #[arg(long)]
    pub alignments: Option<PathBuf>,
    #[arg(long, requires = "rev_model")]
    pub fwd_model: Option<PathBuf>,
    #[arg(long)]
    pub rev_model: Option<PathBuf>,
    /// Detagged system output
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 2021)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub valid: usize,
    #[arg(long)]
    pub test: usize,
    #[arg(long, default_value_t = 2021)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub method: Option<TemplateMethod>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub subset: Option<Subset>,
}

fn read_lines(path: &Path) -> Result<Vec<TokenSeq>> {
    read_token_lines(path).with_context(|| format!("reading {}", path.display()))
}

fn require_table(method: TemplateMethod, table: Option<&Path>) -> Result<()> {
    if table.is_none() && method != TemplateMethod::Baseline {
        bail!("--table is required for method {method}");
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::AlignTrain(a) => {
            let corpus = a.corpus.read()?;
            let params = AlignParams {
                iterations: a.iterations,
                lambda: a.lambda,
                p0: a.p0,
                vb: a.vb,
                alpha: a.alpha,
                direction: a.direction,
            };
            let (model, curve) = pipeline::train(&corpus, params)?;
            model.save(&a.model)?;
            if let Some(p) = a.stats {
                let rows: Vec<_> = curve
                    .into_iter()
                    .enumerate()
                    .map(|(i, x)| (a.direction, i + 1, x))
                    .collect();
                fs::write(p, pipeline::perplexity_tsv(&rows))?;
            }
        }
        Command::AlignApply(a) => {
            let corpus = a.corpus.read()?;
            let model = AlignModel::load(&a.model)?;
            let sets: Vec<AlignmentSet> = viterbi_corpus(&model, &corpus)?
                .iter()
                .map(|v| AlignmentSet::from_vector(v, model.direction()))
                .collect();
            write_pharaoh(&a.out, &sets)?;
        }
        Command::Symmetrize(a) => {
            let corpus = a.corpus.read()?;
            let fwd = read_pharaoh(&a.fwd)?;
            let rev = read_pharaoh(&a.rev)?;
            ensure!(
                fwd.len() == corpus.len() && rev.len() == corpus.len(),
                "{} pairs but {} forward and {} reverse alignment lines",
                corpus.len(),
                fwd.len(),
                rev.len()
            );
            let mut out = Vec::with_capacity(corpus.len());
            for ((p, f), r) in corpus.iter().zip(&fwd).zip(&rev) {
                let (s, t) = (p.src.len(), p.tgt.len());
                let f = AlignmentVector::from_set(f, Direction::SrcToTgt, s, t)?;
                let r = AlignmentVector::from_set(r, Direction::TgtToSrc, s, t)?;
                out.push(symmetrize(&f, &r, a.heuristic)?);
            }
            write_pharaoh(&a.out, &out)?;
        }
        Command::LexiconBuild(a) => {
            let corpus = a.corpus.read()?;
            let links = read_pharaoh(&a.alignments)?;
            build_translation_table(&corpus, &links, a.min_count)?.save(&a.out)?;
        }
        Command::LinkAnnotate(a) => {
            let corpus = a.corpus.read()?;
            let settings = LinkerSettings {
                endpoint: a.endpoint.clone(),
                sparql_endpoint: None,
                confidence: a.confidence,
            };
            if a.gazetteer.is_none() && a.endpoint.is_none() {
                bail!("give --gazetteer or --endpoint (or set {LINKER_ENV})");
            }
            let ann = pipeline::link(&corpus, a.gazetteer.as_deref(), None, &settings, a.corpus.profile())?;
            write_annotations(&a.out, &ann)?;
        }
        Command::LinkHypernyms(a) => {
            let mut ann = read_annotations(&a.annotations)?;
            let resolver: Box<dyn HypernymResolver> = match (a.map, a.sparql) {
                (Some(p), _) => Box::new(HypernymMap::load(p)?),
                (None, Some(url)) => Box::new(SparqlHypernyms::new(url)),
                (None, None) => bail!("give --map or --sparql"),
            };
            for s in &mut ann {
                netag::link::attach_hypernyms(&mut s.mentions, resolver.as_ref())?;
            }
            write_annotations(&a.out, &ann)?;
        }
        Command::TagApply(a) => {
            require_table(a.method, a.table.as_deref())?;
            let corpus = a.corpus.read()?;
            let ann = read_annotations(&a.annotations)?;
            let links = read_pharaoh(&a.alignments)?;
            let table = pipeline::load_table(a.table.as_deref())?;
            let (tagged, stats) =
                tag_corpus(&corpus, &ann, &links, &table, a.method, &a.tag_vocab.vocab())?;
            tagged.write(&a.out_src, &a.out_tgt, &a.manifest)?;
            println!(
                "{}: tagged {} of {} pairs ({:.2}%)",
                a.method,
                stats.tagged_pairs,
                stats.total_pairs,
                100.0 * stats.tag_fraction
            );
        }
        Command::Detag(a) => {
            require_table(a.method, a.table.as_deref())?;
            let table = pipeline::load_table(a.table.as_deref())?;
            let vocab = a.tag_vocab.vocab();
            let mut malformed = 0;
            let out: Vec<TokenSeq> = read_lines(&a.input)?
                .iter()
                .map(|l| {
                    let d = detag(l, a.method, &table, &vocab);
                    malformed += d.malformed;
                    d.tokens
                })
                .collect();
            write_lines(&a.out, &out)?;
            if malformed > 0 {
                log::warn!("{malformed} malformed tag regions");
            }
        }
        Command::EvalBleu(a) => {
            let hyp = read_lines(&a.hyp)?;
            let reference = read_lines(&a.reference)?;
            let subset = match a.subset {
                Subset::All => None,
                Subset::TagOnly => {
                    let Some(m) = &a.manifest else {
                        bail!("--subset tag-only needs --manifest");
                    };
                    Some(read_manifest(m)?.iter().map(|r| r.index).collect::<BTreeSet<_>>())
                }
            };
            println!("{}", bleu(&hyp, &reference, a.max_n, subset.as_ref())?);
        }
        Command::EvalCopy(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let method = match (a.method, manifest.first()) {
                (Some(m), _) => m,
                (None, Some(r)) => r.method,
                (None, None) => bail!("manifest {} is empty", a.manifest.display()),
            };
            let report = copy_accuracy(&manifest, &read_lines(&a.output)?, method)?;
            print!("{}", report.to_text());
            if let Some(p) = a.tsv {
                report.write_tsv(p)?;
            }
        }
        Command::EvalPos(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let corpus = a.corpus.read()?;
            let links = match (&a.alignments, &a.fwd_model, &a.rev_model) {
                (Some(p), _, _) => read_pharaoh(p)?,
                (None, Some(f), Some(r)) => pipeline::symmetrized_links(
                    &AlignModel::load(f)?,
                    &AlignModel::load(r)?,
                    &corpus,
                    Heuristic::GrowDiagFinalAnd,
                )?,
                _ => bail!("give --alignments or both --fwd-model and --rev-model"),
            };
            let pos: Vec<Vec<String>> = read_lines(&a.pos)?.into_iter().map(TokenSeq::into_vec).collect();
            let refs: Vec<TokenSeq> = corpus.pairs.iter().map(|p| p.tgt.clone()).collect();
            let sentences = pos_sentences(
                &manifest,
                &pos,
                &refs,
                &links,
                &read_lines(&a.system)?,
                &read_lines(&a.baseline)?,
            )?;
            let report = pos_accuracy(&sentences, a.resamples, a.seed)?;
            report.write_tsv(&a.out)?;
            print!("{}", report.to_text());
        }
        Command::Split(a) => {
            let corpus = a.corpus.read()?;
            let h = split_holdout(&corpus, a.valid, a.test, a.seed)?;
            fs::create_dir_all(&a.out_dir)?;
            for (name, part) in [("train", &h.train), ("valid", &h.valid), ("test", &h.test)] {
                write_side(part, Side::Src, a.out_dir.join(format!("{name}.src")))?;
                write_side(part, Side::Tgt, a.out_dir.join(format!("{name}.tgt")))?;
            }
        }
        Command::PipelineRun(a) => {
            let overrides = Overrides {
                method: a.method,
                seed: a.seed,
                iterations: a.iterations,
                confidence: a.confidence,
                subset: a.subset,
            };
            let cfg = PipelineConfig::load(&a.config, &overrides)?;
            let summary = pipeline::run(&cfg)?;
            print!("{}", pipeline::tag_stats_tsv(&summary.stats));
            println!("stage manifest: {}", summary.manifest_path.display());
        }
    }
    Ok(())
}
