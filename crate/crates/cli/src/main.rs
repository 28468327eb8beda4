use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydchain_cli::config::{ProtocolKind, SweepAxis, SweepSection};
use rydchain_cli::{CliError, ExperimentConfig, Result, RunOptions, RunOutput};

#[derive(Parser)]
#[command(
    name = "rydchain",
    version,
    about = "Simulate Rydberg atom chains and record the results"
)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "RYDCHAIN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Repeat the configured OTOC protocol along a parameter axis.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Axis to sweep, overriding the config's sweep block.
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Divide a measured ZZ-OTOC grid by its IZ-OTOC reference.
    Mitigate {
        #[arg(long)]
        zz: PathBuf,
        #[arg(long)]
        iz: PathBuf,
        /// Entries with |IZ| below this are left undefined.
        #[arg(long, default_value_t = 0.05)]
        floor: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed, overriding `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AxisArg {
    VOverOmega,
    DetuningOverVnnn,
    Omega,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            seed: self.seed,
        }
    }
}

fn dispatch(command: Command) -> Result<RunOutput> {
    match command {
        Command::Run(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            rydchain_cli::run(&cfg, &args.options())
        }
        Command::Sweep { run, axis, values } => {
            let mut cfg = ExperimentConfig::load(&run.config)?;
            cfg.protocol.kind = ProtocolKind::Sweep;
            let current = cfg.sweep.clone();
            let axis = axis
                .map(|a| match a {
                    AxisArg::VOverOmega => SweepAxis::VOverOmega,
                    AxisArg::DetuningOverVnnn => SweepAxis::DetuningOverVnnn,
                    AxisArg::Omega => SweepAxis::Omega,
                })
                .or(current.as_ref().map(|s| s.axis));
            let values = values.or(current.map(|s| s.values));
            let (Some(axis), Some(values)) = (axis, values) else {
                return Err(CliError::Validation(vec![
                    "a sweep needs an axis and values, from the config or --axis/--values".into(),
                ]));
            };
            cfg.sweep = Some(SweepSection { axis, values });
            let problems = cfg.violations();
            if !problems.is_empty() {
                return Err(CliError::Validation(problems));
            }
            rydchain_cli::run::sweep_command(&cfg, &run.options())
        }
        Command::Mitigate { zz, iz, floor, out } => {
            rydchain_cli::mitigate_files(&zz, &iz, floor, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = pool
        .build()
        .map_err(|e| CliError::ThreadPool(e.to_string()))
        .and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(out) => {
            println!("{}", out.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let detail = match &e {
                CliError::Validation(list) => serde_json::json!(list),
                _ => serde_json::Value::Null,
            };
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "details": detail,
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
