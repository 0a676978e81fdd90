use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tbl::bench::{extended_registry, run_scaling_experiment, ExperimentConfig};
use tbl::corpus::{load_corpus, Tag, TagField};
use tbl::learner::{
    evaluate, evaluate_predictions, tag, train, InitialTagPolicy, TrainConfig, TrainingMode,
};
use tbl::rules::RuleSequence;
use tbl::templates::parse_template_spec;

#[derive(Parser)]
#[command(
    name = "tbl",
    version,
    about = "Transformation-based learning for dialogue act tagging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lazy,
    Exhaustive,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a rule sequence from a tagged corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long, value_enum, default_value = "lazy")]
        mode: Mode,
        /// Rules drawn per mistagged utterance per iteration (lazy mode).
        #[arg(long, default_value_t = 6)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        threshold: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start from this tag instead of the most frequent gold tag.
        #[arg(long)]
        initial_tag: Option<String>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Output prefix; writes <out>.rules.txt, <out>.rules.jsonl and
        /// <out>.metrics.jsonl. Defaults to the corpus path without extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tag a corpus with a learned rule sequence.
    Tag {
        #[arg(long)]
        corpus: PathBuf,
        /// Structured rule file (<prefix>.rules.jsonl).
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        initial_tag: Option<String>,
    },
    /// Print tagging accuracy against a gold corpus.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        /// Tag the gold corpus with these rules, then score it.
        #[arg(long, conflicts_with = "predicted")]
        rules: Option<PathBuf>,
        /// A corpus file written by `tbl tag`.
        #[arg(long)]
        predicted: Option<PathBuf>,
    },
    /// Run template-scaling experiments and write a CSV report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fill the wall_time_ms column (output is then not reproducible).
        #[arg(long)]
        wall_time: bool,
    },
}

fn parse_tag(name: &str) -> Result<Tag> {
    Ok(Tag::new(name)?)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut path = prefix.as_os_str().to_owned();
    path.push(suffix);
    PathBuf::from(path)
}

fn run(cli: Cli) -> Result<()> {
    let registry = extended_registry();
    match cli.command {
        Command::Train {
            corpus,
            templates,
            mode,
            samples,
            threshold,
            seed,
            initial_tag,
            max_iterations,
            out,
        } => {
            let mut data =
                load_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
            let text = fs::read_to_string(&templates)
                .with_context(|| format!("reading {}", templates.display()))?;
            let templates = parse_template_spec(&text, &registry).context("parsing templates")?;
            let config = TrainConfig {
                mode: match mode {
                    Mode::Lazy => TrainingMode::Lazy,
                    Mode::Exhaustive => TrainingMode::Exhaustive,
                },
                samples_per_instance: samples,
                threshold,
                seed,
                max_iterations,
                initial_tag_policy: match initial_tag {
                    Some(name) => InitialTagPolicy::Fixed(parse_tag(&name)?),
                    None => InitialTagPolicy::MostFrequentGold,
                },
            };
            let outcome = train(&mut data, &templates, &config)?;
            let prefix = out.unwrap_or_else(|| corpus.with_extension(""));
            outcome.sequence.write_pair(&prefix)?;
            fs::write(
                with_suffix(&prefix, ".metrics.jsonl"),
                outcome.metrics_jsonl(),
            )?;
            if outcome.hit_max_iterations {
                eprintln!("warning: training stopped at the iteration cap");
            }
            eprintln!("learned {} rules", outcome.sequence.len());
            println!("training accuracy: {:?}", outcome.final_accuracy());
        }
        Command::Tag {
            corpus,
            rules,
            out,
            initial_tag,
        } => {
            let mut data =
                load_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
            let sequence = RuleSequence::load(&rules, &registry)
                .with_context(|| format!("loading {}", rules.display()))?;
            let policy = match initial_tag {
                Some(name) => InitialTagPolicy::Fixed(parse_tag(&name)?),
                None => sequence.metadata().replay_policy(),
            };
            tag(&mut data, &sequence, &policy)?;
            data.write(&out, TagField::Working)?;
        }
        Command::Eval {
            corpus,
            rules,
            predicted,
        } => {
            let mut gold =
                load_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
            let accuracy = match (rules, predicted) {
                (Some(rules), None) => {
                    let sequence = RuleSequence::load(&rules, &registry)
                        .with_context(|| format!("loading {}", rules.display()))?;
                    tag(&mut gold, &sequence, &sequence.metadata().replay_policy())?;
                    evaluate(&gold)?
                }
                (None, Some(predicted)) => {
                    let guess = load_corpus(&predicted)
                        .with_context(|| format!("loading {}", predicted.display()))?;
                    evaluate_predictions(&gold, &guess)?
                }
                _ => bail!("eval needs --rules or --predicted"),
            };
            println!("{accuracy:?}");
        }
        Command::Bench {
            config,
            out,
            wall_time,
        } => {
            let mut experiment = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            experiment.record_wall_time |= wall_time;
            let report = run_scaling_experiment(&experiment, &registry)?;
            report.write_csv(&out)?;
            eprintln!("wrote {} rows to {}", report.runs.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
