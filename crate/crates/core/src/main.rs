use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmaq::dma::equivalent_channel;
use dmaq::error::{Error, Result};
use dmaq::experiment::{
    design_receivers, draw_trial, emit_results, run_experiment, snr_to_noise_power, write_results, ExperimentConfig,
    OutputFormat, ReceiverId, SNR_DEFINITION,
};
use dmaq::quantization::levels_for_budget;
use dmaq::verify::run_invariant_suite;

/// DMA receiver design and MIMO-OFDM Monte Carlo simulation.
#[derive(Parser)]
#[command(name = "dmaq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// MSE and BER versus SNR at one bit budget.
    SweepSnr {
        #[command(flatten)]
        common: Common,
        /// Overall bit budget (default: first budget of the config).
        #[arg(long)]
        budget: Option<u32>,
        /// Comma-separated SNR list in dB (default: from the config).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
    },
    /// MSE and BER versus overall bit budget at one SNR.
    SweepBits {
        #[command(flatten)]
        common: Common,
        /// SNR in dB.
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        snr: f64,
        /// Comma-separated budgets.
        #[arg(long, value_delimiter = ',', default_values_t = [60, 80, 100, 120])]
        budgets: Vec<u32>,
    },
    /// Designs receivers for one channel draw and prints them as JSON.
    DesignDump {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value_t = 80)]
        budget: u32,
        /// Trial index whose channel is used.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Runs the built-in invariant checks.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON or TOML configuration (default: shipped paper.toml).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Comma-separated subset of R1..R5.
    #[arg(long, value_delimiter = ',')]
    receivers: Option<Vec<ReceiverId>>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::shipped(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(r) = &self.receivers {
            cfg.receivers = r.clone();
        }
        Ok(cfg)
    }

    fn emit_json(&self, value: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        match &self.out {
            Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            }),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}

fn sweep(common: &Common, cfg: ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    eprintln!("{SNR_DEFINITION}");
    let records = run_experiment(&cfg)?;
    match &common.out {
        Some(p) => emit_results(&records, common.format, p),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_results(&records, common.format, &mut lock)?;
            writeln!(lock).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SweepSnr { common, budget, snr } => {
            let mut cfg = common.config()?;
            if let Some(b) = budget {
                cfg.budgets = vec![b];
            }
            cfg.budgets.truncate(1);
            if let Some(s) = snr {
                cfg.snr_db = s;
            }
            sweep(&common, cfg)?;
        }
        Command::SweepBits { common, snr, budgets } => {
            let mut cfg = common.config()?;
            cfg.snr_db = vec![snr];
            cfg.budgets = budgets;
            sweep(&common, cfg)?;
        }
        Command::DesignDump {
            common,
            snr,
            budget,
            trial,
        } => {
            let cfg = common.config()?;
            let (grid, prop) = cfg.front_end()?;
            let levels = levels_for_budget(budget as f64, cfg.channel.microstrips)?;
            let draw = draw_trial(&cfg, trial, 0)?;
            let ch = draw.channel.with_noise_power(snr_to_noise_power(snr));
            let eq = equivalent_channel(&ch, &prop)?;
            let designs = design_receivers(&cfg, &ch, &eq, &grid, &prop, levels, &cfg.receivers)?;
            let map: serde_json::Map<String, serde_json::Value> = designs
                .iter()
                .map(|(id, d)| {
                    serde_json::to_value(d.to_record())
                        .map(|v| (id.label().to_string(), v))
                        .map_err(|e| Error::Parse(e.to_string()))
                })
                .collect::<Result<_>>()?;
            common.emit_json(&serde_json::Value::Object(map))?;
        }
        Command::Verify { seed } => {
            let checks = run_invariant_suite(seed);
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
