use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use neoxkit_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "neoxkit",
    about = "Tokenizer, transformer, training and evaluation toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a BPE tokenizer on a corpus
    TokTrain {
        /// Corpus file or directory (plain text or .jsonl with a `text` field)
        #[arg(long)]
        corpus: PathBuf,
        /// Target vocabulary size
        #[arg(long, default_value_t = 2048)]
        vocab: usize,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
        /// Reserved special tokens, injected before merges
        #[arg(long)]
        reserved: Vec<String>,
    },
    /// Encode text to token ids
    Encode {
        #[arg(long)]
        tok: PathBuf,
        /// Literal text (otherwise --input or stdin)
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Decode token ids back to text
    Decode {
        #[arg(long)]
        tok: PathBuf,
        /// Whitespace-separated ids (otherwise stdin)
        #[arg(long)]
        ids: Option<String>,
    },
    /// Comparative tokenizer analytics
    Tokscope {
        #[command(subcommand)]
        command: TokscopeCommand,
    },
    /// Train a model on a tokenized corpus
    Train {
        /// Run configuration file (flat `key value` lines)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override train-iters from the config
        #[arg(long)]
        train_iters: Option<u64>,
        /// Override the seed from the config
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        tok: PathBuf,
        /// Directory for checkpoints and the loss log
        #[arg(long)]
        out_dir: PathBuf,
        /// Optional held-out validation text
        #[arg(long)]
        val: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a task file
    Eval {
        #[arg(long)]
        task: PathBuf,
        /// Shot count (0 or 5 in the reference protocol)
        #[arg(long, default_value_t = 0)]
        shots: usize,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tok: PathBuf,
        /// Length-normalize choice log-likelihoods
        #[arg(long)]
        per_token: bool,
        #[arg(long, default_value_t = 32)]
        max_gen_tokens: usize,
    },
    /// Derive a tensor/pipeline/data parallel layout
    Plan {
        #[arg(long)]
        nodes: u64,
        #[arg(long)]
        gpus: u64,
        #[arg(long)]
        tp: u64,
        #[arg(long)]
        pp: u64,
        /// Also report all-reduce counts for this many layers
        #[arg(long)]
        layers: Option<u64>,
    },
    /// Carbon intensity of a generation mix, and optional emissions
    Carbon {
        /// Mix file: `name share intensity` per line
        #[arg(long)]
        mix: PathBuf,
        /// Energy to convert at the mix intensity
        #[arg(long)]
        mwh: Option<f64>,
    },
    /// Parameter counts for a model configuration
    Params {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum TokscopeCommand {
    /// Token-count ratio table between two tokenizers
    Ratio {
        /// Corpus directory, one subdirectory per component
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        tok_a: PathBuf,
        #[arg(long)]
        tok_b: PathBuf,
        /// Exclude tokens that are entirely whitespace
        #[arg(long)]
        no_whitespace: bool,
    },
    /// Longest mostly-letter tokens in a vocabulary
    Longest {
        #[arg(long)]
        tok: PathBuf,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
    /// Words with the largest tokenization discrepancy
    Worstcase {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        tok_a: PathBuf,
        #[arg(long)]
        tok_b: PathBuf,
        #[arg(long, default_value_t = 10)]
        min_count: u64,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::TokTrain {
            corpus,
            vocab,
            out,
            reserved,
        } => commands::tok_train(&corpus, vocab, &out, &reserved),
        Command::Encode { tok, text, input } => {
            commands::encode(&tok, text.as_deref(), input.as_deref())
        }
        Command::Decode { tok, ids } => commands::decode(&tok, ids.as_deref()),
        Command::Tokscope { command } => match command {
            TokscopeCommand::Ratio {
                corpus,
                tok_a,
                tok_b,
                no_whitespace,
            } => commands::tokscope_ratio(&corpus, &tok_a, &tok_b, no_whitespace),
            TokscopeCommand::Longest { tok, k } => commands::tokscope_longest(&tok, k),
            TokscopeCommand::Worstcase {
                corpus,
                tok_a,
                tok_b,
                min_count,
                top,
            } => commands::tokscope_worstcase(&corpus, &tok_a, &tok_b, min_count, top),
        },
        Command::Train {
            config,
            train_iters,
            seed,
            corpus,
            tok,
            out_dir,
            val,
        } => commands::train_cmd(
            config.as_deref(),
            train_iters,
            seed,
            &corpus,
            &tok,
            &out_dir,
            val.as_deref(),
        ),
        Command::Eval {
            task,
            shots,
            model,
            tok,
            per_token,
            max_gen_tokens,
        } => commands::eval_cmd(&task, shots, &model, &tok, per_token, max_gen_tokens),
        Command::Plan {
            nodes,
            gpus,
            tp,
            pp,
            layers,
        } => commands::plan(nodes, gpus, tp, pp, layers),
        Command::Carbon { mix, mwh } => commands::carbon(&mix, mwh),
        Command::Params { config } => commands::params(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("neoxkit: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
