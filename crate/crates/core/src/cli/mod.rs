//! Command-line entry points: `validate`, `ccdf`, `dynamics` and `sweep`.

pub mod config;
pub mod pipeline;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ccdf::CcdfCurve;
use crate::error::{Error, Result};
use crate::mobility::{Mobility, MobilityPolicy};
pub use config::ScenarioConfig;
use pipeline::{run_dynamics, snapshot_series, system_curve, average_curve, DynamicsRun, ScenarioRun, Scenario, WindowRow};

#[derive(Debug, Parser)]
#[command(name = "mscell", version, about = "Moving small cell offloading a macro-cell traffic hotspot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a configuration and print its hash.
    Validate(Common),
    /// Throughput CCDFs at fixed small-cell distances from the hotspot.
    Ccdf {
        #[command(flatten)]
        common: Common,
        /// Small-cell to hotspot distances (Km).
        #[arg(long, value_delimiter = ',', default_value = "0,0.06,0.12")]
        distances: Vec<f64>,
        /// Additional snapshot times along the trajectory (s).
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Load and mean flow throughput over time, with and without the small cell.
    Dynamics(Common),
    /// Repeat the dynamics summary over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Scenario file; the bundled reference scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Monte Carlo samples per snapshot.
    #[arg(long)]
    pub samples: Option<usize>,
}

impl Common {
    pub fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::bundled(),
        };
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.sim.workers = w;
        }
        if let Some(n) = self.samples {
            cfg.sim.samples = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const SWEEP_PARAMS: [&str; 6] = ["kappa", "hotspot_a", "lambda_tot", "k", "small_reach", "route_period"];

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidRoute(_) | Error::OutOfDomain(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

pub fn error_json(e: &Error) -> String {
    let kind = match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidRoute(_) | Error::OutOfDomain(_) => "config",
        e if e.is_numerical() => "numerical",
        Error::Io(_) => "io",
        _ => "runtime",
    };
    serde_json::json!({ "error": kind, "message": e.to_string() }).to_string()
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(dirs) => {
            for d in dirs {
                println!("{}", d.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

fn set_workers(n: usize) {
    if n > 0 {
        // fails harmlessly when a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Validate(c) => {
            let cfg = c.load()?;
            println!("ok {}", cfg.hash());
            Ok(Vec::new())
        }
        Command::Ccdf { common, distances, times } => {
            let cfg = common.load()?;
            set_workers(cfg.sim.workers);
            Ok(vec![cmd_ccdf(&cfg, distances, times, &common.out)?])
        }
        Command::Dynamics(common) => {
            let cfg = common.load()?;
            set_workers(cfg.sim.workers);
            Ok(vec![cmd_dynamics(&cfg, &common.out)?])
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.load()?;
            set_workers(cfg.sim.workers);
            Ok(vec![cmd_sweep(&cfg, param, values, &common.out)?])
        }
    }
}

/// Output directory of a run, named by config hash.
pub fn run_dir(out: &Path, cfg: &ScenarioConfig) -> Result<PathBuf> {
    let dir = out.join(&cfg.hash()[..16]);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn provenance(cfg: &ScenarioConfig) -> String {
    format!(
        "# mscell {} config_hash={} seed={}",
        env!("CARGO_PKG_VERSION"),
        cfg.hash(),
        cfg.sim.seed
    )
}

fn create(dir: &Path, name: &str, cfg: &ScenarioConfig, header: &str) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    writeln!(w, "{}", provenance(cfg))?;
    writeln!(w, "{header}")?;
    Ok(w)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub const CCDF_HEADER: &str = "scenario_id,distance_km,t_s,cell,level_mbps,ccdf,stderr";

fn write_curve<W: Write>(w: &mut W, id: &str, distance: Option<f64>, c: &CcdfCurve) -> Result<()> {
    let distance = opt(distance);
    for i in 0..c.levels.len() {
        writeln!(
            w,
            "{id},{distance},{},{},{},{},{}",
            c.t, c.cell, c.levels[i], c.values[i], c.stderr[i]
        )?;
    }
    Ok(())
}

/// Baseline, per-distance and time-averaged CCDFs.
pub fn cmd_ccdf(cfg: &ScenarioConfig, distances: &[f64], times: &[f64], out: &Path) -> Result<PathBuf> {
    let sc = Scenario::new(cfg.clone())?;
    let dir = run_dir(out, cfg)?;
    let samples = sc.samples(cfg.sim.seed)?;
    let mut w = create(&dir, "ccdf.csv", cfg, CCDF_HEADER)?;
    write_curve(&mut w, "macro_only", None, &sc.baseline_curve()?)?;
    for &d in distances {
        let snap = sc.snapshot_at(0.0, sc.position_at_distance(d)?, &samples)?;
        let id = format!("with_sc@{d}");
        for c in [snap.macro_ccdf.curve(), snap.small_ccdf.curve()].into_iter().flatten() {
            write_curve(&mut w, &id, Some(d), c)?;
        }
        if let Some(c) = system_curve(&snap) {
            write_curve(&mut w, &id, Some(d), &c)?;
        }
    }
    let series = snapshot_series(&sc, &samples)?;
    for &t in times {
        let i = series
            .snapshots
            .iter()
            .position(|s| s.t >= t - 1e-9)
            .ok_or_else(|| Error::InvalidArgument(format!("time {t} is beyond the horizon")))?;
        let s = &series.snapshots[i];
        let id = format!("with_sc#t={}", s.t);
        if let Some(c) = system_curve(s) {
            write_curve(&mut w, &id, Some(series.distances[i]), &c)?;
        }
    }
    let window = observation_window(cfg)?;
    let curves: Vec<CcdfCurve> = series
        .snapshots
        .iter()
        .filter(|s| s.t < window)
        .filter_map(system_curve)
        .collect();
    write_curve(&mut w, "with_sc#time_avg", None, &average_curve(&curves)?)?;
    w.flush()?;
    Ok(dir)
}

/// One route period when the route is periodic, else the horizon.
pub fn observation_window(cfg: &ScenarioConfig) -> Result<f64> {
    Ok(cfg.mobility.period_s.unwrap_or(cfg.sim.horizon_s).min(cfg.sim.horizon_s))
}

pub const DYNAMICS_HEADER: &str =
    "scenario_id,t_window,t_mid_s,sc_hs_distance_km,rho_bar,mean_flow_throughput_mbps,mean_flows,served_rate_mbps";
pub const SUMMARY_HEADER: &str =
    "scenario_id,seed,rho_bar,mean_flow_throughput_mbps,mean_flows,served_rate_mbps,conservation_residual_mbps";

fn write_windows<W: Write>(w: &mut W, id: &str, rows: &[WindowRow]) -> Result<()> {
    for r in rows {
        writeln!(
            w,
            "{id},{}:{},{},{},{},{},{},{}",
            r.start,
            r.end,
            0.5 * (r.start + r.end),
            r.distance,
            r.rho_bar,
            opt(r.throughput),
            r.mean_flows,
            r.served_rate
        )?;
    }
    Ok(())
}

/// Pointwise replication mean of the window rows.
pub fn mean_windows(run: &ScenarioRun) -> Vec<WindowRow> {
    let reps = &run.replications;
    let Some(first) = reps.first() else { return Vec::new() };
    (0..first.windows.len())
        .map(|j| {
            let rows: Vec<&WindowRow> = reps.iter().map(|r| &r.windows[j]).collect();
            let n = rows.len() as f64;
            let tp: Vec<f64> = rows.iter().filter_map(|r| r.throughput).collect();
            WindowRow {
                start: rows[0].start,
                end: rows[0].end,
                distance: rows[0].distance,
                rho_bar: rows.iter().map(|r| r.rho_bar).sum::<f64>() / n,
                throughput: (!tp.is_empty()).then(|| tp.iter().sum::<f64>() / tp.len() as f64),
                mean_flows: rows.iter().map(|r| r.mean_flows).sum::<f64>() / n,
                served_rate: rows.iter().map(|r| r.served_rate).sum::<f64>() / n,
            }
        })
        .collect()
}

fn write_run<W: Write>(dyn_w: &mut W, sum_w: &mut W, name: &str, run: &ScenarioRun, offered: f64) -> Result<()> {
    for (i, r) in run.replications.iter().enumerate() {
        write_windows(dyn_w, &format!("{name}#{i}"), &r.windows)?;
        writeln!(
            sum_w,
            "{name}#{i},{},{},{},{},{},{}",
            r.seed,
            r.rho_bar,
            opt(r.overall.flow_throughput),
            r.overall.mean_flows,
            r.overall.served_rate,
            r.residual
        )?;
    }
    write_windows(dyn_w, &format!("{name}#mean"), &mean_windows(run))?;
    match &run.analytic {
        Ok(a) => {
            write_windows(dyn_w, &format!("{name}#analytic"), &a.windows)?;
            writeln!(
                sum_w,
                "{name}#analytic,,{},{},{},{},{}",
                a.rho_bar,
                opt(a.throughput),
                if a.rho_bar < 1.0 { (a.rho_bar / (1.0 - a.rho_bar)).to_string() } else { String::new() },
                offered.min(a.eta_bar),
                offered - offered.min(a.eta_bar)
            )?;
        }
        Err(msg) => log::warn!("{name}: no closed-form rows ({msg})"),
    }
    Ok(())
}

pub fn cmd_dynamics(cfg: &ScenarioConfig, out: &Path) -> Result<PathBuf> {
    let sc = Scenario::new(cfg.clone())?;
    let dir = run_dir(out, cfg)?;
    let run = run_dynamics(&sc)?;
    write_dynamics(cfg, &dir, &run)?;
    Ok(dir)
}

pub fn write_dynamics(cfg: &ScenarioConfig, dir: &Path, run: &DynamicsRun) -> Result<()> {
    let offered = cfg.traffic.offered();
    let mut dw = create(dir, "dynamics.csv", cfg, DYNAMICS_HEADER)?;
    let mut sw = create(dir, "summary.csv", cfg, SUMMARY_HEADER)?;
    write_run(&mut dw, &mut sw, "with_sc", &run.with_sc, offered)?;
    write_run(&mut dw, &mut sw, "macro_only", &run.macro_only, offered)?;
    dw.flush()?;
    sw.flush()?;
    let mut tw = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    writeln!(tw, "{}", provenance(cfg))?;
    run.series.trajectory.write_csv(&mut tw)?;
    tw.flush()?;
    Ok(())
}

/// A copy of `cfg` with one whitelisted parameter replaced.
pub fn with_param(cfg: &ScenarioConfig, name: &str, value: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match name {
        "kappa" => c.model.kappa = Some(value),
        "hotspot_a" => c.hotspot.a = value,
        "lambda_tot" => c.traffic.lambda_tot = value,
        "k" => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!("K must be a positive integer, got {value}")));
            }
            c.classes.k = value as usize;
        }
        "small_reach" => c.small_cell.reach = value,
        "route_period" => {
            let m = Mobility::new(c.mobility.policy.clone(), c.grid()?)?;
            let len = m
                .route_length()
                .ok_or_else(|| Error::InvalidArgument("route_period needs a fixed route".into()))?;
            if !(value > 0.0) {
                return Err(Error::InvalidArgument(format!("route period must be positive, got {value}")));
            }
            let v = len / value * 3600.0;
            c.mobility.policy = MobilityPolicy {
                v_max: v,
                initial_speed: v,
                ..c.mobility.policy.clone()
            };
            c.mobility.period_s = Some(value);
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown sweep parameter '{other}'; valid names: {}",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    c.validate()?;
    Ok(c)
}

pub const SWEEP_HEADER: &str = "parameter,value,scenario_id,seed,rho_bar,mean_flow_throughput_mbps,conservation_residual_mbps";

pub fn cmd_sweep(cfg: &ScenarioConfig, param: &str, values: &[f64], out: &Path) -> Result<PathBuf> {
    let configs: Vec<ScenarioConfig> = values.iter().map(|v| with_param(cfg, param, *v)).collect::<Result<_>>()?;
    let dir = run_dir(out, cfg)?;
    let mut w = create(&dir, &format!("sweep_{param}.csv"), cfg, SWEEP_HEADER)?;
    for (c, v) in configs.iter().zip(values) {
        let run = run_dynamics(&Scenario::new(c.clone())?)?;
        for (name, r) in [("with_sc", &run.with_sc), ("macro_only", &run.macro_only)] {
            for (i, rep) in r.replications.iter().enumerate() {
                writeln!(
                    w,
                    "{param},{v},{name}#{i},{},{},{},{}",
                    rep.seed,
                    rep.rho_bar,
                    opt(rep.overall.flow_throughput),
                    rep.residual
                )?;
            }
        }
    }
    w.flush()?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Instability("x".into())), 3);
        let j: serde_json::Value = serde_json::from_str(&error_json(&Error::Config("bad".into()))).unwrap();
        assert_eq!(j["error"], "config");
    }

    #[test]
    fn sweep_rejects_unknown_parameter() {
        let cfg = ScenarioConfig::bundled();
        let msg = with_param(&cfg, "gamma", 1.0).unwrap_err().to_string();
        for p in SWEEP_PARAMS {
            assert!(msg.contains(p));
        }
        let c = with_param(&cfg, "route_period", 900.0).unwrap();
        assert!((c.mobility.policy.initial_speed - 12.0).abs() < 1e-9);
    }

    #[test]
    fn validate_command() {
        assert_eq!(main_with_args(["mscell", "validate"]), 0);
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("bad.toml");
        fs::write(&p, "[layout]\ndelta = 1.0\n").unwrap();
        assert_eq!(main_with_args(["mscell", "validate", "--config", p.to_str().unwrap()]), 2);
    }
}
