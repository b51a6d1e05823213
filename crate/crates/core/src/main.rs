use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ner_selfaug::cli::{self, Predictor};

#[derive(Parser)]
#[command(name = "ner-selfaug", version, about = "Self-augmented BiLSTM-CRF tagging for low-resource NER")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the synonym dictionary (and optionally the entity dictionary).
    BuildDict {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Training file for the entity dictionary.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the pseudo set and write it to the output directory.
    Augment(ConfigArg),
    /// Train a tagger.
    Train(ConfigArg),
    /// Score a checkpoint or a predictions file against gold data.
    Eval {
        #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
        model: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Directory for predictions and scores.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump per-step example weights of a training run as TSV.
    InspectWeights {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

fn run(cli: Cli) -> ner_selfaug::Result<()> {
    match cli.command {
        Command::BuildDict {
            vectors,
            stopwords,
            k,
            train,
            out,
        } => cli::build_dict(&vectors, stopwords.as_deref(), k, train.as_deref(), &out),
        Command::Augment(a) => {
            let counts = cli::augment(&cli::parse_config(&a.config)?)?;
            println!("{} substituted, {} mixed", counts.substituted, counts.mixed);
            Ok(())
        }
        Command::Train(a) => {
            let summary = cli::train(&cli::parse_config(&a.config)?)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Eval {
            model,
            predictions,
            data,
            out,
        } => {
            let predictor = match (&model, &predictions) {
                (Some(m), _) => Predictor::Model(m),
                (None, Some(p)) => Predictor::Predictions(p),
                (None, None) => unreachable!("clap requires one of --model and --predictions"),
            };
            let scores = cli::eval(predictor, &data, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&scores)?);
            Ok(())
        }
        Command::InspectWeights { run } => {
            let rows = cli::inspect_weights(&run)?;
            println!("{rows} rows written to {}", run.join(cli::WEIGHTS_TSV_FILE).display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
