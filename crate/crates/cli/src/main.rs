use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vfd_cli::commands::{self, AnalyzeArgs};
use vfd_cli::{CliError, Result, RunConfig};
use vfd_core::lut::{DEFAULT_AMPLITUDE, DEFAULT_MIDPOINT, DEFAULT_SIZE};
use vfd_core::{PwmScheme, Radix};

#[derive(Parser)]
#[command(name = "vfd", version, about = "Three-phase PWM drive simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sine table as a memory-init file.
    Lut {
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        size: usize,
        #[arg(long, default_value_t = DEFAULT_MIDPOINT)]
        midpoint: u32,
        #[arg(long, default_value_t = DEFAULT_AMPLITUDE)]
        amplitude: u32,
        #[arg(long, default_value = "decimal")]
        radix: Radix,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate drive and load; write a trace CSV and its metadata sidecar.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Trace CSV; overrides output.trace. Stdout when neither is set.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Steady-state THD for every scheme and modulation index.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated modulation indices; overrides analysis.m_list.
        #[arg(long, value_delimiter = ',')]
        m_list: Vec<f64>,
        /// CSV table; overrides output.table.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Startup and nominal peak-to-peak current per soft-start duration.
    SoftstartSweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ramp durations in seconds; overrides sweep.durations.
        #[arg(long, value_delimiter = ',')]
        durations: Vec<f64>,
        /// CSV table; overrides output.table.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Spectrum and THD of one channel of a trace CSV.
    Analyze {
        trace: PathBuf,
        #[arg(long, default_value = "i_uv")]
        channel: String,
        #[arg(long, default_value_t = 60.0)]
        f_fund: f64,
        /// Highest order; 0 means min(100, Nyquist).
        #[arg(long, default_value_t = 0)]
        harmonics: usize,
        #[arg(long, default_value_t = 6)]
        cycles: u32,
        /// Window start in seconds; searched for steady state when omitted.
        #[arg(long)]
        start: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; built-in defaults when omitted.
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    scheme: Option<PwmScheme>,
    /// Target modulation index.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    f_ref: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    sample_hz: Option<f64>,
}

impl RunArgs {
    fn resolve(&self, extra: Vec<String>) -> Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(s) = self.scheme {
            let name = toml::Value::try_from(s).map_err(|e| CliError::Config(e.to_string()))?;
            overrides.push(format!("drive.scheme={name}"));
        }
        let mut num = |key: &str, v: Option<f64>| {
            if let Some(v) = v {
                overrides.push(format!("{key}={}", toml::Value::Float(v)));
            }
        };
        num("drive.m_target", self.m);
        num("drive.f_ref", self.f_ref);
        num("run.duration", self.duration);
        num("run.sample_hz", self.sample_hz);
        overrides.extend(extra);
        match &self.config {
            Some(path) => RunConfig::load(path, &overrides),
            None => RunConfig::parse("", &overrides),
        }
    }
}

fn float_list(key: &str, values: &[f64]) -> Vec<String> {
    if values.is_empty() {
        return Vec::new();
    }
    let items: Vec<String> = values
        .iter()
        .map(|&v| toml::Value::Float(v).to_string())
        .collect();
    vec![format!("{key}=[{}]", items.join(", "))]
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => commands::write_file(p, text),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(CliError::io("<stdout>")),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lut {
            size,
            midpoint,
            amplitude,
            radix,
            output,
        } => emit(
            output.as_ref(),
            &commands::cmd_lut(size, midpoint, amplitude, radix)?,
        ),
        Command::Simulate { run, output } => {
            let cfg = run.resolve(Vec::new())?;
            let out = commands::cmd_simulate(&cfg)?;
            let path = output.or_else(|| cfg.output.trace.clone());
            if let Some(p) = &path {
                commands::write_file(p, &out.csv)?;
                let meta = serde_json::to_string_pretty(&out.sidecar)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                commands::write_file(&commands::metadata_path(&cfg, p), &(meta + "\n"))?;
                eprintln!("csv_sha256 = {}", out.sidecar.csv_sha256);
            } else {
                emit(None, &out.csv)?;
            }
            Ok(())
        }
        Command::Compare {
            run,
            m_list,
            output,
        } => {
            let cfg = run.resolve(float_list("analysis.m_list", &m_list))?;
            let table = commands::cmd_compare(&cfg)?;
            emit(None, &table.aligned())?;
            match output.or_else(|| cfg.output.table.clone()) {
                Some(p) => commands::write_file(&p, &table.csv()),
                None => Ok(()),
            }
        }
        Command::SoftstartSweep {
            run,
            durations,
            output,
        } => {
            let cfg = run.resolve(float_list("sweep.durations", &durations))?;
            let table = commands::cmd_softstart_sweep(&cfg)?;
            emit(None, &table.aligned())?;
            match output.or_else(|| cfg.output.table.clone()) {
                Some(p) => commands::write_file(&p, &table.csv()),
                None => Ok(()),
            }
        }
        Command::Analyze {
            trace,
            channel,
            f_fund,
            harmonics,
            cycles,
            start,
        } => {
            let text = std::fs::read_to_string(&trace).map_err(|e| CliError::Io {
                path: trace.clone(),
                source: e,
            })?;
            let args = AnalyzeArgs {
                channel,
                f_fund,
                harmonics,
                cycles,
                start,
                ..Default::default()
            };
            let (s, thd) = commands::cmd_analyze(&text, &args)?;
            emit(None, &commands::format_analysis(&args.channel, &s, thd))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
