//! Thin command-line front end over the pipeline commands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polylink::config::RunConfig;
use polylink::pipeline;
use polylink::synth::{write_synthetic_dataset, SynthConfig};
use polylink::Error;

#[derive(Parser)]
#[command(
    name = "polylink",
    about = "Typed drug-drug link prediction with embedding and relational-feature experts"
)]
struct Cli {
    /// Run configuration file (TOML); defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Require byte-identical reruns (needs --threads 1).
    #[arg(long, global = true)]
    deterministic: bool,

    /// Print the effective configuration (defaults + file + flags) and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the four source files and report graph statistics.
    Ingest,
    /// Generate positive/negative examples and the stratified split file.
    Split,
    /// Enumerate and prune relational feature templates.
    Featurize,
    /// Train the configured model; write checkpoint and epoch log.
    Train,
    /// Score the test split with the trained checkpoint.
    Eval,
    /// Rank a drug pair for a side effect and attribute the prediction.
    Explain {
        #[arg(long)]
        drug_a: String,
        #[arg(long)]
        drug_b: String,
        #[arg(long)]
        side_effect: String,
    },
    /// Run all three regimes end-to-end and write a summary table.
    Reproduce,
    /// Write a synthetic planted-rule dataset to the configured input paths.
    Synth,
}

fn effective_config(cli: &Cli) -> polylink::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> polylink::Result<()> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.render());
        return Ok(());
    }
    let command = cli.command.as_ref().ok_or_else(|| {
        Error::Config("no subcommand given (try --help or --print-config)".into())
    })?;

    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    match command {
        Command::Ingest => print!("{}", pipeline::cmd_ingest(&cfg)?),
        Command::Split => {
            let path = pipeline::cmd_split(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Featurize => {
            let path = pipeline::cmd_featurize(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let path = pipeline::cmd_train(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Eval => print!("{}", pipeline::cmd_eval(&cfg)?),
        Command::Explain { drug_a, drug_b, side_effect } => {
            print!("{}", pipeline::cmd_explain(&cfg, drug_a, drug_b, side_effect)?)
        }
        Command::Reproduce => print!("{}", pipeline::cmd_reproduce(&cfg)?),
        Command::Synth => {
            let synth = SynthConfig { seed: cfg.seed, ..SynthConfig::default() };
            write_synthetic_dataset(&cfg.ingest_paths(), &synth)?;
            println!(
                "wrote {} {} {} {}",
                cfg.ppi_file.display(),
                cfg.targets_file.display(),
                cfg.combo_file.display(),
                cfg.mono_file.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
