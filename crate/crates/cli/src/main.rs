use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use cgt_core::data::{read_feature_file, synthesize_corpus, Grammar, Split, SynthOptions};
use cgt_core::extract::io::{read_reports, write_graph_tsv};
use cgt_core::extract::{build_clinical_graph, ReportRef};
use cgt_core::train::{evaluate, prepare, slot_triples, write_evaluation, Corpus, RocScoring, RunConfig, RunDir};
use cgt_core::Vocabulary;

/// Clinical-graph report generation: extraction, training and evaluation.
#[derive(Debug, Parser)]
#[command(name = "cgt", version)]
struct Cli {
    /// Random seed; overrides the seed of a run config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract the clinical graph from the train reports of a JSON-lines file.
    ExtractGraph {
        /// Reports as JSON lines with `id`, optional `split`, and `report`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Graph TSV; statistics go to `<out>.stats.json`.
        #[arg(long)]
        out: PathBuf,
        /// Vocabulary file; built from the train reports when absent.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        min_frequency: usize,
        /// Entity dictionary replacing the built-in one.
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Relation lexicon replacing the built-in one.
        #[arg(long)]
        relations: Option<PathBuf>,
    },
    /// Build a vocabulary from the train reports of a JSON-lines file.
    BuildVocab {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        min_frequency: usize,
    },
    /// Generate a synthetic corpus: dataset, grammar and feature files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0.15)]
        val_fraction: f64,
        /// Grammar as JSON; the built-in grammar when absent.
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// Train a model into a run directory.
    Train {
        /// Dataset as JSON lines.
        #[arg(long)]
        data: PathBuf,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// TOML run config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` config override; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Continue from the state saved in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a run's selected checkpoint on one split.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Output directory; `<run>/eval-<split>` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Triple scoring for the ROC; the run config's choice when absent.
        #[arg(long, value_enum)]
        scoring: Option<ScoringArg>,
    },
    /// Generate the report for one case or one feature file.
    Decode {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Case id from the dataset.
        #[arg(long, conflicts_with = "features", required_unless_present = "features")]
        case: Option<String>,
        /// Feature file to decode instead of a dataset case.
        #[arg(long)]
        features: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoringArg {
    Energy,
    Probability,
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_config(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::from_toml(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => RunConfig::default(),
    };
    for o in overrides {
        config.apply_override(o)?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

/// The run's config and its data, prepared the way training prepared it.
fn load_run(run: &Path, data: &Path) -> Result<(RunDir, RunConfig, cgt_core::train::Prepared)> {
    let dir = RunDir { path: run.to_path_buf() };
    let manifest = dir.read_manifest().with_context(|| format!("reading the manifest of {}", run.display()))?;
    let config = manifest.config;
    let corpus = Corpus::load(data)?;
    let prepared = prepare(&corpus, config.extractor()?, config.min_frequency, config.max_report_len)?;
    Ok((dir, config, prepared))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ExtractGraph { input, out, vocab, min_frequency, dictionary, relations } => {
            let records = read_reports(BufReader::new(File::open(&input).with_context(|| format!("opening {}", input.display()))?))?;
            let train: Vec<_> = records.iter().filter(|r| r.split.is_none_or(|s| s == Split::Train)).collect();
            if train.len() < records.len() {
                info!("using {} of {} reports; the others are outside the train split", train.len(), records.len());
            }
            let vocab = match vocab {
                Some(p) => Vocabulary::read(BufReader::new(File::open(&p)?), min_frequency)?,
                None => Vocabulary::build(train.iter().map(|r| r.report_text.as_str()), min_frequency)?,
            };
            let config = RunConfig { dictionary, relations, ..RunConfig::default() };
            config.validate()?;
            let refs: Vec<ReportRef<'_>> =
                train.iter().map(|r| ReportRef { id: &r.id, split: r.split, text: &r.report_text }).collect();
            let graph = build_clinical_graph(&refs, &config.extractor()?, &vocab)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_graph_tsv(&mut w, &graph, &vocab)?;
            w.flush()?;
            let stats = serde_json::json!({
                "reports": train.len(),
                "vocab_hash": vocab.hash(),
                "vocab_size": vocab.len(),
                "stats": graph.stats(),
            });
            let mut stats_path = out.clone().into_os_string();
            stats_path.push(".stats.json");
            write_json(Path::new(&stats_path), &stats)?;
            println!("{}", serde_json::to_string(&graph.stats())?);
        }
        Command::BuildVocab { input, out, min_frequency } => {
            let records = read_reports(BufReader::new(File::open(&input).with_context(|| format!("opening {}", input.display()))?))?;
            let vocab = Vocabulary::build(
                records.iter().filter(|r| r.split.is_none_or(|s| s == Split::Train)).map(|r| r.report_text.as_str()),
                min_frequency,
            )?;
            let mut w = BufWriter::new(File::create(&out)?);
            vocab.write(&mut w)?;
            w.flush()?;
            println!("{} tokens, hash {}", vocab.len(), vocab.hash());
        }
        Command::Synth { out, cases, train_fraction, val_fraction, grammar } => {
            let grammar: Grammar = match grammar {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => Grammar::default(),
            };
            let opts = SynthOptions { seed: cli.seed.unwrap_or(0), cases, train_fraction, val_fraction };
            let corpus = synthesize_corpus(&opts, &grammar)?;
            corpus.write(&out)?;
            println!("{} cases written to {}", corpus.cases.len(), out.display());
        }
        Command::Train { data, out, config, overrides, resume } => {
            let config = load_config(config.as_deref(), &overrides, cli.seed)?;
            let corpus = Corpus::load(&data).with_context(|| format!("loading {}", data.display()))?;
            let prepared = prepare(&corpus, config.extractor()?, config.min_frequency, config.max_report_len)?;
            let dir = RunDir::create(&out)?;
            let trainer = dir.train(&prepared, config, resume)?;
            if let Some(last) = trainer.history.last() {
                println!("trained {} epochs; final ce {:.6} tr {:.6}", trainer.epoch, last.ce, last.tr);
            }
        }
        Command::Evaluate { run, data, split, out, scoring } => {
            let (dir, config, prepared) = load_run(&run, &data)?;
            let model = dir.load_model(&prepared)?;
            let split: Split = split.into();
            let scoring = match scoring {
                Some(ScoringArg::Energy) => RocScoring::Energy,
                Some(ScoringArg::Probability) => RocScoring::Probability,
                None => config.roc_scoring,
            };
            let eval = evaluate(&model, &prepared, split, scoring)?;
            let out = out.unwrap_or_else(|| dir.file(&format!("eval-{split}")));
            write_evaluation(&out, &eval)?;
            println!("{}", serde_json::to_string(&eval.scores)?);
            match eval.auc {
                Some(a) => println!("auc {a}"),
                None => println!("auc undefined"),
            }
        }
        Command::Decode { run, data, case, features } => {
            let (dir, _config, prepared) = load_run(&run, &data)?;
            let model = dir.load_model(&prepared)?;
            let feats = match (case, features) {
                (Some(id), _) => match prepared.cases.iter().find(|c| c.id == id) {
                    Some(c) => c.features.clone(),
                    None => bail!("no case `{id}` in {}", data.display()),
                },
                (None, Some(p)) => read_feature_file(BufReader::new(File::open(&p)?))?,
                (None, None) => bail!("pass --case or --features"),
            };
            let gen = model.generate_greedy(&feats)?;
            println!("{}", prepared.vocab.decode_text(&gen.report));
            for t in slot_triples(&gen.slot_ids).iter().filter(|t| prepared.graph.contains(t)) {
                let v = &prepared.vocab;
                println!("({}, {}, {})", v.token(t.subject), v.token(t.relation), v.token(t.object));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
