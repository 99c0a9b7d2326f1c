use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use groundcheck::commands::{
    cmd_evaluate, cmd_judge, cmd_sweep, cmd_validate, read_junk_list, Exit, Sources,
};
use groundcheck_core::ReasoningConfig;

/// Grounding-consistency judge for visual question answering.
#[derive(Parser)]
#[command(name = "groundcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide single vs multiple grounding for every dataset instance.
    Judge {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        reasoning: Reasoning,
        /// Trace file (JSONL); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "GROUNDCHECK_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// Score a trace file against gold labels.
    Evaluate {
        #[arg(long, env = "GROUNDCHECK_DATASET")]
        dataset: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// Report file; defaults to `<traces>.report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a grid of (tau_iou, tau_sem) pairs.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        reasoning: Reasoning,
        #[arg(long, value_delimiter = ',', required = true)]
        tau_iou_grid: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        tau_sem_grid: Vec<f64>,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "GROUNDCHECK_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// Report every schema violation in a dataset/fixture/embedding bundle.
    Validate {
        #[arg(long, env = "GROUNDCHECK_DATASET")]
        dataset: PathBuf,
        #[arg(long, env = "GROUNDCHECK_FIXTURES")]
        fixtures: PathBuf,
        #[arg(long, env = "GROUNDCHECK_EMBEDDINGS")]
        embeddings: PathBuf,
        #[command(flatten)]
        reasoning: Reasoning,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long, env = "GROUNDCHECK_DATASET")]
    dataset: PathBuf,
    #[arg(long, env = "GROUNDCHECK_FIXTURES")]
    fixtures: Option<PathBuf>,
    #[arg(long, env = "GROUNDCHECK_EMBEDDINGS")]
    embeddings: Option<PathBuf>,
    /// Base URL of a model service (http only).
    #[arg(long, env = "GROUNDCHECK_REMOTE")]
    remote: Option<String>,
    /// Per-request timeout for --remote, in seconds.
    #[arg(long, env = "GROUNDCHECK_REMOTE_TIMEOUT", default_value_t = 30)]
    remote_timeout: u64,
}

#[derive(Args)]
struct Reasoning {
    #[arg(long, env = "GROUNDCHECK_TAU_IOU", default_value_t = 0.5)]
    tau_iou: f64,
    #[arg(
        long,
        env = "GROUNDCHECK_TAU_SEM",
        default_value_t = 0.7,
        allow_negative_numbers = true
    )]
    tau_sem: f64,
    /// Maximum answers proposed per instance.
    #[arg(long, env = "GROUNDCHECK_K", default_value_t = 3)]
    k: usize,
    /// File with one junk answer per line; replaces the default list.
    #[arg(long, env = "GROUNDCHECK_JUNK_LIST")]
    junk_list: Option<PathBuf>,
    /// Fall back to hashed vectors for answers missing from the table.
    #[arg(long, env = "GROUNDCHECK_LENIENT_EMBEDDINGS")]
    lenient_embeddings: bool,
}

impl Reasoning {
    fn config(&self) -> Result<ReasoningConfig, String> {
        let mut c = ReasoningConfig {
            tau_iou: self.tau_iou,
            tau_sem: self.tau_sem,
            k: self.k,
            lenient_embeddings: self.lenient_embeddings,
            ..ReasoningConfig::default()
        };
        if let Some(p) = &self.junk_list {
            c.junk_list = read_junk_list(p).map_err(|e| format!("{}: {e}", p.display()))?;
        }
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

impl Inputs {
    fn sources(self) -> Sources {
        Sources {
            dataset: self.dataset,
            fixtures: self.fixtures,
            embeddings: self.embeddings,
            remote: self.remote,
            remote_timeout: Duration::from_secs(self.remote_timeout),
        }
    }
}

fn config_or_exit(r: &Reasoning) -> Result<ReasoningConfig, ExitCode> {
    r.config().map_err(|e| {
        eprintln!("error: {e}");
        Exit::Failure.into()
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Failure.into()
            } else {
                Exit::Success.into()
            };
        }
    };
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    let code = match cli.command {
        Command::Judge {
            inputs,
            reasoning,
            out,
            jobs,
        } => {
            let config = match config_or_exit(&reasoning) {
                Ok(c) => c,
                Err(code) => return code,
            };
            cmd_judge(
                &inputs.sources(),
                &config,
                out.as_deref(),
                jobs,
                &mut stdout,
                &mut stderr,
            )
        }
        Command::Evaluate {
            dataset,
            traces,
            out,
        } => cmd_evaluate(&dataset, &traces, out.as_deref(), &mut stdout, &mut stderr),
        Command::Sweep {
            inputs,
            reasoning,
            tau_iou_grid,
            tau_sem_grid,
            out,
            jobs,
        } => {
            let config = match config_or_exit(&reasoning) {
                Ok(c) => c,
                Err(code) => return code,
            };
            cmd_sweep(
                &inputs.sources(),
                &config,
                (&tau_iou_grid, &tau_sem_grid),
                out.as_deref(),
                jobs,
                &mut stdout,
                &mut stderr,
            )
        }
        Command::Validate {
            dataset,
            fixtures,
            embeddings,
            reasoning,
        } => {
            let config = match config_or_exit(&reasoning) {
                Ok(c) => c,
                Err(code) => return code,
            };
            cmd_validate(&dataset, &fixtures, &embeddings, &config, &mut stdout)
        }
    };
    code.into()
}
