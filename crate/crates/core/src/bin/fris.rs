use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fris::experiments::{
    cmd_capacity, cmd_dist, cmd_outage, cmd_sweep_m, parse_config, CsvTable, ExperimentConfig, Preset, RunOptions,
};
use fris::montecarlo::write_samples_csv;
use fris::Error;

/// Fluid reconfigurable intelligent surface experiments.
#[derive(Parser)]
#[command(name = "fris", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gain distribution: Gamma fit against the empirical CDF.
    Dist {
        #[command(flatten)]
        common: Common,
        /// Write the raw gain samples to this CSV file.
        #[arg(long)]
        dump_samples: Option<PathBuf>,
    },
    /// Outage probability versus SNR.
    Outage(Common),
    /// Ergodic capacity versus SNR.
    Capacity(Common),
    /// Ergodic capacity versus grid density.
    SweepM(Common),
    /// Parse and validate a configuration, then print it in canonical form.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: fig2, fig3a, fig3b or fig3c.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> fris::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            (None, Some(name)) => name.parse::<Preset>()?.config(),
            (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.display().to_string());
        }
        if self.workers == Some(0) {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self) -> RunOptions {
        RunOptions { workers: self.workers }
    }
}

fn emit(cfg: &ExperimentConfig, table: &CsvTable) -> fris::Result<()> {
    let text = table.render();
    match &cfg.output_path {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> fris::Result<()> {
    match cli.command {
        Command::Dist { common, dump_samples } => {
            let cfg = common.load()?;
            let report = cmd_dist(&cfg, common.options())?;
            if let Some(path) = dump_samples {
                let meta = [
                    ("mode".to_string(), report.mode.to_string()),
                    ("seed".to_string(), cfg.seed.to_string()),
                    ("config_sha256".to_string(), cfg.hash()),
                ];
                let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
                write_samples_csv(&mut f, &report.samples, &meta)?;
                f.flush()?;
            }
            emit(&cfg, &report.table)
        }
        Command::Outage(common) => {
            let cfg = common.load()?;
            emit(&cfg, &cmd_outage(&cfg, common.options())?.table)
        }
        Command::Capacity(common) => {
            let cfg = common.load()?;
            emit(&cfg, &cmd_capacity(&cfg, common.options())?.table)
        }
        Command::SweepM(common) => {
            let cfg = common.load()?;
            emit(&cfg, &cmd_sweep_m(&cfg, common.options())?.table)
        }
        Command::Validate(common) => {
            let cfg = common.load()?;
            let text = serde_json::to_string_pretty(&cfg).map_err(|e| Error::Config(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) | Error::DegenerateSubmatrix | Error::EmptySamples => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fris: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
