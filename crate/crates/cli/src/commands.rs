use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use vfd_core::analysis::{self, steady_state_start};
use vfd_core::{LutTable, Radix};

use crate::config::RunConfig;
use crate::csvio::{align_table, fmt_sig9, read_trace, write_table, write_trace};
use crate::error::{CliError, Result};

pub fn cmd_lut(size: usize, midpoint: u32, amplitude: u32, radix: Radix) -> Result<String> {
    Ok(LutTable::build(size, midpoint, amplitude)?.to_mem_init(radix))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelInfo {
    pub name: String,
    pub unit: String,
}

/// Sidecar written next to every trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSidecar {
    pub config: RunConfig,
    pub carrier: &'static str,
    pub sample_period: f64,
    pub samples: usize,
    pub channels: Vec<ChannelInfo>,
    pub csv_sha256: String,
}

pub struct SimulateOutput {
    pub csv: String,
    pub sidecar: TraceSidecar,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    let trace = vfd_core::simulate(
        &cfg.drive,
        &cfg.load,
        &cfg.plant,
        cfg.run.duration,
        cfg.run.sample_hz,
    )?;
    let csv = write_trace(&trace);
    let sidecar = TraceSidecar {
        config: cfg.clone(),
        carrier: "sawtooth",
        sample_period: trace.sample_period,
        samples: trace.len(),
        channels: trace
            .channels
            .iter()
            .map(|c| ChannelInfo {
                name: c.name.clone(),
                unit: c.unit.clone(),
            })
            .collect(),
        csv_sha256: sha256_hex(csv.as_bytes()),
    };
    Ok(SimulateOutput { csv, sidecar })
}

/// `<trace>.meta.json` unless configured otherwise.
pub fn metadata_path(cfg: &RunConfig, trace: &Path) -> PathBuf {
    cfg.output.metadata.clone().unwrap_or_else(|| {
        let mut p = trace.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    })
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn csv(&self) -> String {
        write_table(&self.header, &self.rows)
    }

    pub fn aligned(&self) -> String {
        align_table(&self.header, &self.rows)
    }
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Table> {
    let rows = vfd_core::compare_schemes(
        &cfg.drive,
        &cfg.load,
        &cfg.plant,
        &cfg.analysis_settings(),
        &cfg.analysis.m_list,
        &cfg.analysis.schemes,
    )?;
    Ok(Table {
        header: vec!["scheme", "m", "current_thd", "voltage_thd"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.scheme.to_string(),
                    fmt_sig9(r.m),
                    fmt_sig9(r.current_thd),
                    fmt_sig9(r.voltage_thd),
                ]
            })
            .collect(),
    })
}

pub fn cmd_softstart_sweep(cfg: &RunConfig) -> Result<Table> {
    let rows = vfd_core::soft_start_sweep(&cfg.drive, &cfg.load, &cfg.plant, &cfg.sweep)?;
    Ok(Table {
        header: vec!["soft_start_s", "startup_pkpk", "nominal_pkpk"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    fmt_sig9(r.soft_start_duration),
                    fmt_sig9(r.startup_pk_pk),
                    fmt_sig9(r.nominal_pk_pk),
                ]
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeArgs {
    pub channel: String,
    pub f_fund: f64,
    pub harmonics: usize,
    pub cycles: u32,
    pub max_drift: f64,
    /// Window start, s; `None` searches for steady state.
    pub start: Option<f64>,
}

impl Default for AnalyzeArgs {
    fn default() -> Self {
        let a = analysis::AnalysisSettings::default();
        Self {
            channel: "i_uv".into(),
            f_fund: 60.0,
            harmonics: a.harmonics,
            cycles: a.cycles,
            max_drift: a.max_drift,
            start: None,
        }
    }
}

/// Spectrum and THD of one channel of a trace CSV.
pub fn cmd_analyze(csv: &str, args: &AnalyzeArgs) -> Result<(vfd_core::Spectrum, f64)> {
    let trace = read_trace(csv)?;
    let x = trace.require(&args.channel)?;
    let ts = trace.sample_period;
    let start = match args.start {
        Some(s) => s,
        None => steady_state_start(x, ts, args.f_fund, args.cycles, args.max_drift)?,
    };
    let h = if args.harmonics == 0 {
        analysis::default_harmonics(ts, args.f_fund)
    } else {
        args.harmonics
    };
    let s = vfd_core::spectrum(x, ts, args.f_fund, start, args.cycles, h)?;
    let thd = vfd_core::thd(&s)?;
    Ok((s, thd))
}

pub fn format_analysis(channel: &str, s: &vfd_core::Spectrum, thd: f64) -> String {
    let mut out = format!(
        "channel = {channel}\nwindow_start_s = {}\ncycles = {}\nfundamental_hz = {}\nfundamental = {}\nthd = {}\n",
        fmt_sig9(s.start),
        s.cycles,
        fmt_sig9(s.fundamental_hz),
        fmt_sig9(s.fundamental),
        fmt_sig9(thd),
    );
    let mut top: Vec<(usize, f64)> = (2..=s.max_order())
        .filter_map(|h| Some((h, s.magnitude(h)?)))
        .collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (h, m) in top.into_iter().take(5) {
        out.push_str(&format!("h{h} = {}\n", fmt_sig9(m)));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, contents).map_err(CliError::io(path))
}
