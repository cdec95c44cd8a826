//! Trajectory, CCDF series, classes and rates, queue replications and the
//! closed-form evaluation, wired end to end.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ScenarioConfig;
use crate::analytic::{
    class_membership, coupled_loads_fixed_point, effective_rate, mean_flow_throughput_mobile, stationary_mobile,
    static_membership, window_effective_rate, CoupledLoads,
};
use crate::ccdf::{
    coverage, extract_classes, macro_only_ccdf, profile_from_snapshot, snapshot, CcdfCurve, CellCcdf, CellKind,
    ClassProfile, LevelGrid, PreparedSamples, Snapshot,
};
use crate::error::{Error, Result};
use crate::flowsim::{
    estimate_transition_rates, simulate, window_metrics, MetricsReport, QueueTrace, SimOptions, TrafficSpec,
    TransitionRates,
};
use crate::geometry::{Point, PolarPoint};
use crate::hotspot::SampleSet;
use crate::mobility::{generate_trajectory, ManhattanGrid, Trajectory};
use crate::radio::RadioModel;

/// A validated configuration with its derived models.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: RadioModel,
    pub grid: ManhattanGrid,
    pub levels: LevelGrid,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = config.radio_model()?;
        let grid = config.grid()?;
        let eta0 = model.params().eta0;
        let levels = LevelGrid::log_spaced(0.05, eta0, config.sim.levels)?;
        Ok(Scenario {
            config,
            model,
            grid,
            levels,
        })
    }

    pub fn traffic(&self) -> TrafficSpec {
        self.config.traffic
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let c = &self.config;
        generate_trajectory(&c.mobility.policy, &self.grid, c.sim.horizon_s, c.sim.dt_s, c.sim.seed)
    }

    /// Hotspot samples shared by every snapshot of a run.
    pub fn samples(&self, seed: u64) -> Result<PreparedSamples> {
        let set = SampleSet::draw(&self.config.hotspot, self.config.sim.samples, seed)?;
        Ok(PreparedSamples::new(&set, &self.model))
    }

    pub fn snapshot_at(&self, t: f64, position: Point, samples: &PreparedSamples) -> Result<Snapshot> {
        let ls = position.to_polar();
        let region = coverage(&self.model, ls, self.config.small_cell.reach)?;
        snapshot(t, ls, &self.levels, &self.model, &region, samples)
    }

    /// Small-cell position at distance `d` from the hotspot center, on the
    /// segment towards the macro site.
    pub fn position_at_distance(&self, d: f64) -> Result<Point> {
        let h = &self.config.hotspot;
        if !(d >= 0.0) || d > h.r_h {
            return Err(Error::InvalidArgument(format!(
                "distance {d} must lie in [0, {}] to stay on the hotspot's radial",
                h.r_h
            )));
        }
        Ok(PolarPoint::new(h.r_h - d, h.theta_h).to_cartesian())
    }

    pub fn baseline_curve(&self) -> Result<CcdfCurve> {
        macro_only_ccdf(&self.levels, &self.config.hotspot, &self.model)
    }
}

/// CCDF snapshots along the trajectory, one per snapshot interval.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    pub trajectory: Trajectory,
    pub snapshots: Vec<Snapshot>,
    /// Small cell to hotspot center (Km) at each snapshot.
    pub distances: Vec<f64>,
}

fn position_key(p: &Point) -> (i64, i64) {
    ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)
}

fn retime(snap: &Snapshot, t: f64) -> Snapshot {
    let fix = |c: &CellCcdf| match c {
        CellCcdf::Curve(curve) => CellCcdf::Curve(CcdfCurve { t, ..curve.clone() }),
        CellCcdf::Empty { cell, .. } => CellCcdf::Empty { cell: *cell, t },
    };
    Snapshot {
        t,
        macro_ccdf: fix(&snap.macro_ccdf),
        small_ccdf: fix(&snap.small_ccdf),
        macro_ccdf_phase0: fix(&snap.macro_ccdf_phase0),
        small_ccdf_phase0: fix(&snap.small_ccdf_phase0),
        ..snap.clone()
    }
}

/// Snapshots at every interval of the horizon. Revisited positions reuse
/// the cached curves.
pub fn snapshot_series(sc: &Scenario, samples: &PreparedSamples) -> Result<SnapshotSeries> {
    let traj = sc.trajectory()?;
    let sim = &sc.config.sim;
    let count = (sim.horizon_s / sim.snapshot_interval_s + 1e-9).floor() as usize + 1;
    let mut times = Vec::with_capacity(count);
    let mut positions = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 * sim.snapshot_interval_s;
        let idx = ((t / traj.dt).round() as usize).min(traj.len() - 1);
        times.push(t);
        positions.push(traj.states[idx].position);
    }
    let mut unique: Vec<Point> = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    for p in &positions {
        index.entry(position_key(p)).or_insert_with(|| {
            unique.push(*p);
            unique.len() - 1
        });
    }
    let computed: Vec<Snapshot> = unique
        .par_iter()
        .map(|p| sc.snapshot_at(0.0, *p, samples))
        .collect::<Result<_>>()?;
    let snapshots = times
        .iter()
        .zip(&positions)
        .map(|(t, p)| retime(&computed[index[&position_key(p)]], *t))
        .collect();
    let c = sc.config.hotspot.center();
    Ok(SnapshotSeries {
        distances: positions.iter().map(|p| p.dist(&c)).collect(),
        trajectory: traj,
        snapshots,
    })
}

/// Class profiles of the series. A cell with no associated users keeps
/// zero arrivals and borrows its rates from the nearest snapshot where it
/// has users, so that handed-over flows still see a sensible rate.
pub fn class_profiles(sc: &Scenario, series: &SnapshotSeries) -> Result<Vec<ClassProfile>> {
    let c = &sc.config;
    let mut profiles: Vec<ClassProfile> = series
        .snapshots
        .iter()
        .map(|s| profile_from_snapshot(s, c.classes.k, c.classes.l, c.traffic.lambda_tot))
        .collect::<Result<_>>()?;
    let macro_ok: Vec<usize> = (0..profiles.len()).filter(|i| !profiles[*i].macro_empty).collect();
    let small_ok: Vec<usize> = (0..profiles.len()).filter(|i| !profiles[*i].small_empty).collect();
    let nearest = |ok: &[usize], i: usize| -> Option<usize> {
        let pos = ok.partition_point(|j| *j < i);
        let after = ok.get(pos).copied();
        let before = pos.checked_sub(1).map(|p| ok[p]);
        match (before, after) {
            (Some(b), Some(a)) => Some(if i - b <= a - i { b } else { a }),
            (x, y) => x.or(y),
        }
    };
    for i in 0..profiles.len() {
        if profiles[i].macro_empty {
            if let Some(j) = nearest(&macro_ok, i) {
                profiles[i].eta_macro = profiles[j].eta_macro.clone();
            }
        }
        if profiles[i].small_empty {
            if let Some(j) = nearest(&small_ok, i) {
                profiles[i].eta_small = profiles[j].eta_small.clone();
            }
        }
    }
    Ok(profiles)
}

/// The time-invariant macro-only profile from the closed-form CCDF.
pub fn baseline_profile(sc: &Scenario) -> Result<ClassProfile> {
    let curve = sc.baseline_curve()?;
    let c = &sc.config;
    let empty = CellCcdf::Empty {
        cell: CellKind::Small,
        t: 0.0,
    };
    let m = CellCcdf::Curve(curve);
    extract_classes(&m, &empty, &m, &empty, c.classes.k, c.classes.l, c.traffic.lambda_tot)
}

/// Both cells' curves merged into the distribution seen by a covered user.
pub fn system_curve(snap: &Snapshot) -> Option<CcdfCurve> {
    let parts: Vec<&CcdfCurve> = [snap.macro_ccdf.curve(), snap.small_ccdf.curve()].into_iter().flatten().collect();
    let first = parts.first()?;
    let total: f64 = parts.iter().map(|c| c.mass).sum();
    let n = snap.s_macro.accepted as f64;
    let values: Vec<f64> = (0..first.levels.len())
        .map(|i| parts.iter().map(|c| c.mass * c.values[i]).sum::<f64>() / total)
        .collect();
    let stderr = values.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    Some(CcdfCurve {
        t: snap.t,
        cell: CellKind::System,
        levels: first.levels.clone(),
        values,
        stderr,
        eta0: first.eta0,
        mass: total,
    })
}

/// Pointwise mean of curves sharing one level grid.
pub fn average_curve(curves: &[CcdfCurve]) -> Result<CcdfCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InsufficientData("no curves to average".into()))?;
    let n = curves.len() as f64;
    let mean = |f: &dyn Fn(&CcdfCurve) -> &Vec<f64>| -> Vec<f64> {
        (0..first.levels.len()).map(|i| curves.iter().map(|c| f(c)[i]).sum::<f64>() / n).collect()
    };
    Ok(CcdfCurve {
        t: first.t,
        cell: first.cell,
        levels: first.levels.clone(),
        values: mean(&|c| &c.values),
        stderr: mean(&|c| &c.stderr),
        eta0: first.eta0,
        mass: curves.iter().map(|c| c.mass).sum::<f64>() / n,
    })
}

/// One observation window of a replication.
#[derive(Debug, Clone, Serialize)]
pub struct WindowRow {
    pub start: f64,
    pub end: f64,
    /// Mean small-cell to hotspot distance over the window (Km).
    pub distance: f64,
    pub rho_bar: f64,
    pub throughput: Option<f64>,
    pub mean_flows: f64,
    pub served_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationResult {
    pub seed: u64,
    pub windows: Vec<WindowRow>,
    pub overall: MetricsReport,
    pub rho_bar: f64,
    pub residual: f64,
}

/// Closed-form window values and the run-level evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticResult {
    pub windows: Vec<WindowRow>,
    pub q: Vec<f64>,
    pub q_tilde: Vec<f64>,
    pub membership_fallback: bool,
    pub eta_bar: f64,
    pub rho_bar: f64,
    /// `None` when the equivalent queue is unstable.
    pub throughput: Option<f64>,
    pub truncation_deficit: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub profiles: Vec<ClassProfile>,
    pub rates: Vec<TransitionRates>,
    pub replications: Vec<ReplicationResult>,
    pub analytic: std::result::Result<AnalyticResult, String>,
}

#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub series: SnapshotSeries,
    pub with_sc: ScenarioRun,
    pub macro_only: ScenarioRun,
}

pub fn window_edges(horizon: f64, width: f64) -> Vec<(f64, f64)> {
    let n = (horizon / width + 1e-9).floor() as usize;
    (0..n).map(|i| (i as f64 * width, (i + 1) as f64 * width)).collect()
}

fn mean_distance(series: Option<&SnapshotSeries>, a: f64, b: f64) -> f64 {
    let Some(s) = series else { return f64::NAN };
    let picked: Vec<f64> = s
        .snapshots
        .iter()
        .zip(&s.distances)
        .filter(|(sn, _)| sn.t >= a && sn.t < b)
        .map(|(_, d)| *d)
        .collect();
    if picked.is_empty() {
        f64::NAN
    } else {
        picked.iter().sum::<f64>() / picked.len() as f64
    }
}

fn profiles_in(profiles: &[ClassProfile], a: f64, b: f64) -> Vec<ClassProfile> {
    let mut out: Vec<ClassProfile> = profiles.iter().filter(|p| p.t >= a && p.t < b).cloned().collect();
    if out.is_empty() {
        let last = profiles.iter().rev().find(|p| p.t < a).unwrap_or(&profiles[0]);
        out.push(last.clone());
    }
    out
}

fn loads_for(profiles: &[ClassProfile], traffic: &TrafficSpec) -> Result<Vec<CoupledLoads>> {
    profiles.iter().map(|p| coupled_loads_fixed_point(p, traffic)).collect()
}

/// Window values of one simulated replication.
pub fn replication_result(
    profiles: &[ClassProfile],
    trace: &QueueTrace,
    traffic: &TrafficSpec,
    window: f64,
    series: Option<&SnapshotSeries>,
    seed: u64,
) -> Result<ReplicationResult> {
    let mut windows = Vec::new();
    for (a, b) in window_edges(trace.horizon, window) {
        let m = window_metrics(trace, a, b)?;
        let eta = if m.mean_flows > 0.0 {
            window_effective_rate(profiles, a, b, &m)
        } else {
            let ps = profiles_in(profiles, a, b);
            let loads = loads_for(&ps, traffic)?;
            let (q, qt) = static_membership(&ps, &loads, traffic);
            effective_rate(&ps, &loads, &q, &qt, traffic).map_or(f64::NAN, |e| e.eta_bar)
        };
        windows.push(WindowRow {
            start: a,
            end: b,
            distance: mean_distance(series, a, b),
            rho_bar: traffic.offered() / eta,
            throughput: m.flow_throughput,
            mean_flows: m.mean_flows,
            served_rate: m.served_rate,
        });
    }
    let overall = window_metrics(trace, 0.0, trace.horizon)?;
    let eta = window_effective_rate(profiles, 0.0, trace.horizon, &overall);
    Ok(ReplicationResult {
        seed,
        windows,
        rho_bar: traffic.offered() / eta,
        residual: traffic.offered() - overall.served_rate,
        overall,
    })
}

/// Closed-form evaluation over the whole run and per window.
pub fn analytic_result(
    sc: &Scenario,
    profiles: &[ClassProfile],
    rates: &[TransitionRates],
    series: Option<&SnapshotSeries>,
) -> Result<AnalyticResult> {
    let traffic = sc.traffic();
    let loads = loads_for(profiles, &traffic)?;
    let (q, qt, fallback) = match class_membership(rates, sc.config.model.membership) {
        Ok((q, qt)) => (q, qt, false),
        Err(e @ Error::UndefinedChain { .. }) => {
            log::warn!("{e}; using load shares for class membership");
            let (q, qt) = static_membership(profiles, &loads, &traffic);
            (q, qt, true)
        }
        Err(e) => return Err(e),
    };
    let eff = effective_rate(profiles, &loads, &q, &qt, &traffic)?;
    let (throughput, deficit) = match stationary_mobile(
        &q,
        &qt,
        &mean_loads(&loads),
        eff.rho_bar,
        sc.config.sim.n_max,
        sc.config.model.distribution,
    ) {
        Ok(d) => (Some(mean_flow_throughput_mobile(&d, eff.eta_bar)?), Some(d.deficit())),
        Err(Error::Instability(m)) => {
            log::warn!("{m}");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let mut windows = Vec::new();
    for (a, b) in window_edges(sc.config.sim.horizon_s, sc.config.sim.window_s) {
        let ps = profiles_in(profiles, a, b);
        let ls = loads_for(&ps, &traffic)?;
        let (wq, wqt) = static_membership(&ps, &ls, &traffic);
        let e = effective_rate(&ps, &ls, &wq, &wqt, &traffic)?;
        windows.push(WindowRow {
            start: a,
            end: b,
            distance: mean_distance(series, a, b),
            rho_bar: e.rho_bar,
            throughput: (e.rho_bar < 1.0).then(|| e.eta_bar * (1.0 - e.rho_bar)),
            mean_flows: if e.rho_bar < 1.0 { e.rho_bar / (1.0 - e.rho_bar) } else { f64::INFINITY },
            served_rate: traffic.offered().min(e.eta_bar),
        });
    }
    Ok(AnalyticResult {
        windows,
        q,
        q_tilde: qt,
        membership_fallback: fallback,
        eta_bar: eff.eta_bar,
        rho_bar: eff.rho_bar,
        throughput,
        truncation_deficit: deficit,
    })
}

fn mean_loads(loads: &[CoupledLoads]) -> CoupledLoads {
    let n = loads.len() as f64;
    let avg = |f: fn(&CoupledLoads) -> f64| loads.iter().map(f).sum::<f64>() / n;
    CoupledLoads {
        rho: avg(|l| l.rho),
        rho_tilde: avg(|l| l.rho_tilde),
        rho_raw: avg(|l| l.rho_raw),
        rho_tilde_raw: avg(|l| l.rho_tilde_raw),
        iterations: 0,
    }
}

pub fn replication_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1)
}

fn run_scenario(
    sc: &Scenario,
    profiles: Vec<ClassProfile>,
    rates: Vec<TransitionRates>,
    series: Option<&SnapshotSeries>,
) -> Result<ScenarioRun> {
    let traffic = sc.traffic();
    let sim = &sc.config.sim;
    let options = SimOptions {
        record_flows: false,
        ..SimOptions::default()
    };
    let replications = (0..sim.replications)
        .into_par_iter()
        .map(|i| {
            let seed = replication_seed(sim.seed, i);
            let trace = simulate(&profiles, &rates, &traffic, sim.horizon_s, seed, options)?;
            replication_result(&profiles, &trace, &traffic, sim.window_s, series, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let analytic = match analytic_result(sc, &profiles, &rates, series) {
        Ok(a) => Ok(a),
        Err(e) if e.is_numerical() => {
            log::warn!("closed-form evaluation failed: {e}");
            Err(e.to_string())
        }
        Err(e) => return Err(e),
    };
    Ok(ScenarioRun {
        profiles,
        rates,
        replications,
        analytic,
    })
}

/// The full dynamics experiment: with the moving small cell and with the
/// macro cell alone, on common replication seeds.
pub fn run_dynamics(sc: &Scenario) -> Result<DynamicsRun> {
    let samples = sc.samples(sc.config.sim.seed)?;
    let series = snapshot_series(sc, &samples)?;
    let profiles = class_profiles(sc, &series)?;
    let rates = estimate_transition_rates(&profiles, sc.config.sim.user_mobility)?;
    let with_sc = run_scenario(sc, profiles, rates, Some(&series))?;
    let base = baseline_profile(sc)?;
    let (k, l) = (base.k, base.l);
    let macro_only = run_scenario(sc, vec![base], vec![TransitionRates::zeros(0.0, k, l)], Some(&series))?;
    Ok(DynamicsRun {
        series,
        with_sc,
        macro_only,
    })
}

/// Lag in `[lo, hi]` maximizing the sample autocorrelation of a series
/// sampled every `step`.
pub fn autocorrelation_peak(series: &[f64], step: f64, lo: f64, hi: f64) -> Option<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if !(var > 0.0) {
        return None;
    }
    let first = (lo / step).ceil() as usize;
    let last = ((hi / step).floor() as usize).min(n.saturating_sub(2));
    (first..=last)
        .map(|lag| {
            let c: f64 = (0..n - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).sum();
            (lag, c / var)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(lag, _)| lag as f64 * step)
}

/// One-sided sign test: probability of at least `successes` heads in `n`
/// fair coin flips.
pub fn sign_test_p(successes: usize, n: usize) -> f64 {
    let mut p = 0.0;
    let mut c = 1.0f64;
    for k in 0..=n {
        if k >= successes {
            p += c;
        }
        c = c * (n - k) as f64 / (k + 1) as f64;
    }
    p / 2f64.powi(n as i32)
}
