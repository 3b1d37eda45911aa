use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npr_cli::commands::{cmd_eval, cmd_finetune, cmd_render, cmd_train, parse_grid, Overrides};
use npr_cli::config::ArchKind;
use npr_cli::error::{CliError, EXIT_OK};

/// Train, evaluate and fine-tune neural parameter regression models.
#[derive(Parser, Debug)]
#[command(name = "npr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write `model.ckpt` and `progress.csv`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train the DeepONet baseline with soft IC and BC losses.
        #[arg(long)]
        no_hardcode_baseline: bool,
    },
    /// Evaluate a checkpoint against reference solutions.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Unfold a checkpoint for one initial condition and fine-tune it.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Initial condition, e.g. "5*x + 3*sin(4*pi*x)".
        #[arg(long)]
        ic: Option<String>,
    },
    /// Render a field CSV as a grayscale PGM.
    Render {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Accepted for scripting; all reductions are already ordered.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    model: Option<ArchKind>,
}

impl Common {
    fn overrides(self, no_hardcode_baseline: bool) -> Overrides {
        Overrides {
            config: self.config,
            seed: self.seed,
            out: self.out,
            grid: self.grid,
            steps: self.steps,
            model: self.model,
            no_hardcode_baseline,
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NPR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("NPR_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Train {
            common,
            no_hardcode_baseline,
        } => {
            let out = cmd_train(&common.overrides(no_hardcode_baseline))?;
            if let Some(r) = out.last {
                let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
                println!(
                    "step {}: loss_pde {} loss_ic {} loss_bc {} total {:.6e}",
                    r.step,
                    fmt(r.losses[0]),
                    fmt(r.losses[1]),
                    fmt(r.losses[2]),
                    r.total
                );
            }
            println!("checkpoint {}", out.checkpoint.display());
            println!("progress   {}", out.progress.display());
        }
        Command::Eval { common, checkpoint } => {
            let out = cmd_eval(&common.overrides(false), checkpoint.as_deref())?;
            print!("{}", out.report);
            println!("metrics {}", out.metrics.display());
        }
        Command::Finetune { common, checkpoint, ic } => {
            let out = cmd_finetune(&common.overrides(false), checkpoint.as_deref(), ic.as_deref())?;
            println!("{:<8} {:>12} {:>12} {:>12}", "", "L1", "L2", "Linf");
            for (label, m) in [("before", out.before), ("after", out.after)] {
                println!("{label:<8} {:>12.4e} {:>12.4e} {:>12.4e}", m.l1, m.l2, m.linf);
            }
            println!("fine-tuning took {:.2} s", out.seconds);
            println!("checkpoint {}", out.checkpoint.display());
        }
        Command::Render { csv, out } => {
            let path = cmd_render(&csv, out.as_deref())?;
            println!("image {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
