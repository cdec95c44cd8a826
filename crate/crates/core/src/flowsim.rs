//! Event-driven simulation of the coupled macro/small multi-class
//! processor-sharing queues with class migration and handovers.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ccdf::{CcdfCurve, ClassProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    /// Total flow arrival intensity (flows/s).
    pub lambda_tot: f64,
    /// Mean flow size (Mbits).
    pub sigma0: f64,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_tot >= 0.0) || !(self.sigma0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "traffic needs lambda_Tot >= 0 and sigma0 > 0, got {} and {}",
                self.lambda_tot, self.sigma0
            )));
        }
        Ok(())
    }

    /// Offered traffic `lambda_Tot * sigma0` (Mbps).
    pub fn offered(&self) -> f64 {
        self.lambda_tot * self.sigma0
    }
}

/// Per-flow transition rates (1/s) valid from `t` to the next snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRates {
    pub t: f64,
    pub nu_up: Vec<f64>,
    pub nu_down: Vec<f64>,
    pub nu_tilde_up: Vec<f64>,
    pub nu_tilde_down: Vec<f64>,
    /// Macro class 1 to small class 1.
    pub nu_m2s: f64,
    /// Small class 1 to macro class 1.
    pub nu_s2m: f64,
}

impl TransitionRates {
    pub fn zeros(t: f64, k: usize, l: usize) -> Self {
        TransitionRates {
            t,
            nu_up: vec![0.0; k],
            nu_down: vec![0.0; k],
            nu_tilde_up: vec![0.0; l],
            nu_tilde_down: vec![0.0; l],
            nu_m2s: 0.0,
            nu_s2m: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .nu_up
            .iter()
            .chain(&self.nu_down)
            .chain(&self.nu_tilde_up)
            .chain(&self.nu_tilde_down)
            .chain([&self.nu_m2s, &self.nu_s2m]);
        if all.into_iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("negative or non-finite rate at t={}", self.t)));
        }
        let edge = |v: &[f64], first: bool| if first { v.first() } else { v.last() }.copied().unwrap_or(0.0);
        if edge(&self.nu_up, false) != 0.0
            || edge(&self.nu_down, true) != 0.0
            || edge(&self.nu_tilde_up, false) != 0.0
            || edge(&self.nu_tilde_down, true) != 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "boundary class rates must be 0 at t={}",
                self.t
            )));
        }
        Ok(())
    }
}

fn migration_rates(
    curr: Option<&CcdfCurve>,
    next: Option<&CcdfCurve>,
    p: &[f64],
    dt: f64,
    user_mobility: f64,
) -> (Vec<f64>, Vec<f64>) {
    let k = p.len();
    let mut up = vec![0.0; k];
    let mut down = vec![0.0; k];
    if let (Some(c), Some(n)) = (curr, next) {
        let mut cum = 0.0;
        for i in 0..k.saturating_sub(1) {
            cum += p[i];
            let boundary = c.survival_crossing(1.0 - cum);
            let flux = n.survival(boundary) - c.survival(boundary);
            if flux > 0.0 {
                up[i] += flux / (dt * p[i]);
            } else if flux < 0.0 {
                down[i + 1] += -flux / (dt * p[i + 1]);
            }
        }
    }
    for i in 0..k.saturating_sub(1) {
        up[i] += user_mobility;
        down[i + 1] += user_mobility;
    }
    (up, down)
}

/// Rates between consecutive snapshots from the motion of class boundaries
/// and of the coverage split. The last snapshot reuses the preceding rates.
pub fn estimate_transition_rates(profiles: &[ClassProfile], user_mobility: f64) -> Result<Vec<TransitionRates>> {
    if profiles.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two class profiles, got {}",
            profiles.len()
        )));
    }
    if !(user_mobility >= 0.0) {
        return Err(Error::InvalidArgument("user mobility rate must be >= 0".into()));
    }
    let mut out = Vec::with_capacity(profiles.len());
    for w in profiles.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "profiles must be strictly increasing in time ({} then {})",
                a.t, b.t
            )));
        }
        let (nu_up, nu_down) = migration_rates(a.macro_curve.as_ref(), b.macro_curve.as_ref(), &a.p_macro, dt, user_mobility);
        let (nu_tilde_up, nu_tilde_down) =
            migration_rates(a.small_curve.as_ref(), b.small_curve.as_ref(), &a.p_small, dt, user_mobility);
        let s = a.small_share();
        let ds = (b.small_share() - s) / dt;
        let nu_m2s = if ds > 0.0 && s < 1.0 { ds / ((1.0 - s) * a.p_macro[0]) } else { 0.0 };
        let nu_s2m = if ds < 0.0 && s > 0.0 { -ds / (s * a.p_small[0]) } else { 0.0 };
        out.push(TransitionRates {
            t: a.t,
            nu_up,
            nu_down,
            nu_tilde_up,
            nu_tilde_down,
            nu_m2s,
            nu_s2m,
        });
    }
    let mut last = out.last().unwrap().clone();
    last.t = profiles.last().unwrap().t;
    out.push(last);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Keep running past the horizon, without arrivals, until empty.
    pub drain: bool,
    pub record_flows: bool,
    /// Abort with an instability error above this many active flows.
    pub max_active: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            drain: false,
            record_flows: true,
            max_active: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassRef {
    pub small: bool,
    pub class: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub arrival: f64,
    pub departure: Option<f64>,
    pub path: Vec<ClassRef>,
    pub size: f64,
    pub served: f64,
}

impl FlowRecord {
    pub fn path_label(&self) -> String {
        self.path
            .iter()
            .map(|c| format!("{}{}", if c.small { 's' } else { 'm' }, c.class))
            .collect::<Vec<_>>()
            .join(">")
    }
}

/// Piecewise-constant record of the queue state. Segment `j` starts at
/// `times[j]` and lasts until `times[j + 1]` (the last until `end`).
#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrace {
    pub k: usize,
    pub l: usize,
    /// Arrival horizon T.
    pub horizon: f64,
    /// Time the simulation stopped (> horizon when drained).
    pub end: f64,
    pub times: Vec<f64>,
    /// Flat per-segment counts, macro classes then small classes.
    pub counts: Vec<u32>,
    pub pieces: Vec<u32>,
    /// Total service rate of each cell during the segment (Mbps).
    pub rate_macro: Vec<f64>,
    pub rate_small: Vec<f64>,
    pub flows: Vec<FlowRecord>,
    pub arrivals: usize,
    pub departures: usize,
}

impl QueueTrace {
    pub fn segments(&self) -> usize {
        self.times.len()
    }

    pub fn segment_counts(&self, j: usize) -> &[u32] {
        let w = self.k + self.l;
        &self.counts[j * w..(j + 1) * w]
    }

    fn segment_end(&self, j: usize) -> f64 {
        if j + 1 < self.times.len() {
            self.times[j + 1]
        } else {
            self.end
        }
    }

    /// Counts at time `t`.
    pub fn counts_at(&self, t: f64) -> &[u32] {
        let j = self.times.partition_point(|x| *x <= t).saturating_sub(1);
        self.segment_counts(j)
    }

    /// Calls `f(duration, segment)` for every segment overlapping `[a, b)`.
    fn overlap<F: FnMut(f64, usize)>(&self, a: f64, b: f64, mut f: F) {
        let start = self.times.partition_point(|x| *x <= a).saturating_sub(1);
        for j in start..self.times.len() {
            let (s, e) = (self.times[j].max(a), self.segment_end(j).min(b));
            if self.times[j] >= b {
                break;
            }
            if e > s {
                f(e - s, j);
            }
        }
    }

    /// Fraction of `[a, b)` spent in each joint state.
    pub fn state_occupancy(&self, a: f64, b: f64) -> HashMap<Vec<u32>, f64> {
        let mut out: HashMap<Vec<u32>, f64> = HashMap::new();
        let span = b - a;
        self.overlap(a, b, |d, j| {
            *out.entry(self.segment_counts(j).to_vec()).or_default() += d / span;
        });
        out
    }

    /// Counts sampled every `dt` seconds on `[0, horizon]`.
    pub fn write_csv<W: Write>(&self, out: &mut W, dt: f64) -> Result<()> {
        writeln!(out, "t_s,cell,class,count")?;
        let steps = (self.horizon / dt + 1e-9).floor() as usize;
        for i in 0..=steps {
            let t = i as f64 * dt;
            let c = self.counts_at(t);
            for (idx, n) in c.iter().enumerate() {
                let (cell, class) = if idx < self.k { ("macro", idx) } else { ("small", idx - self.k) };
                writeln!(out, "{t},{cell},{class},{n}")?;
            }
        }
        Ok(())
    }

    pub fn write_flows_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "arrival_s,departure_s,cell_path,size_mbits")?;
        for f in &self.flows {
            let dep = f.departure.map(|d| d.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", f.arrival, dep, f.path_label(), f.size)?;
        }
        Ok(())
    }
}

struct Flow {
    remaining: f64,
    served: f64,
    record: usize,
}

struct Engine<'a> {
    profiles: &'a [ClassProfile],
    k: usize,
    classes: Vec<Vec<usize>>,
    flows: Vec<Flow>,
    free: Vec<usize>,
    records: Vec<FlowRecord>,
    options: SimOptions,
    active: usize,
}

impl Engine<'_> {
    fn place(&mut self, id: usize, class: usize) {
        self.classes[class].push(id);
        if self.options.record_flows {
            let r = self.flows[id].record;
            let small = class >= self.k;
            self.records[r].path.push(ClassRef {
                small,
                class: (if small { class - self.k } else { class }) as u16,
            });
        }
    }

    fn take_random<R: Rng>(&mut self, class: usize, rng: &mut R) -> usize {
        let list = &mut self.classes[class];
        let pos = rng.gen_range(0..list.len());
        list.swap_remove(pos)
    }

    fn cell_totals(&self) -> (usize, usize) {
        let m = self.classes[..self.k].iter().map(Vec::len).sum();
        let s = self.classes[self.k..].iter().map(Vec::len).sum();
        (m, s)
    }

    /// Per-flow service rate of each class under the current phase.
    fn service_rates(&self, piece: usize) -> Vec<f64> {
        let prof = &self.profiles[piece];
        let (nm, ns) = self.cell_totals();
        (0..self.classes.len())
            .map(|c| {
                if c < self.k {
                    if nm == 0 {
                        0.0
                    } else {
                        prof.eta_macro[c][(ns > 0) as usize] / nm as f64
                    }
                } else if ns == 0 {
                    0.0
                } else {
                    prof.eta_small[c - self.k][(nm > 0) as usize] / ns as f64
                }
            })
            .collect()
    }
}

fn check_inputs(profiles: &[ClassProfile], rates: &[TransitionRates]) -> Result<(usize, usize)> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::InsufficientData("no class profiles".into()))?;
    if profiles.len() != rates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} profiles but {} rate sets",
            profiles.len(),
            rates.len()
        )));
    }
    let (k, l) = (first.eta_macro.len(), first.eta_small.len());
    for (p, r) in profiles.iter().zip(rates) {
        if p.eta_macro.len() != k
            || p.eta_small.len() != l
            || p.lambda_macro.len() != k
            || p.lambda_small.len() != l
            || r.nu_up.len() != k
            || r.nu_down.len() != k
            || r.nu_tilde_up.len() != l
            || r.nu_tilde_down.len() != l
        {
            return Err(Error::InvalidArgument(format!("inconsistent class counts at t={}", p.t)));
        }
        r.validate()?;
        let bad = p
            .eta_macro
            .iter()
            .chain(&p.eta_small)
            .flatten()
            .chain(&p.lambda_macro)
            .chain(&p.lambda_small)
            .any(|v| !(*v >= 0.0) || !v.is_finite());
        if bad {
            return Err(Error::InvalidArgument(format!("negative or non-finite profile entry at t={}", p.t)));
        }
    }
    if profiles.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidArgument("profiles must be strictly increasing in time".into()));
    }
    Ok((k, l))
}

enum Next {
    Departure(usize, usize),
    Event,
    Boundary,
    Horizon,
}

/// Runs the queueing system on piecewise-constant profiles over `[0, T]`.
pub fn simulate(
    profiles: &[ClassProfile],
    rates: &[TransitionRates],
    traffic: &TrafficSpec,
    horizon: f64,
    seed: u64,
    options: SimOptions,
) -> Result<QueueTrace> {
    traffic.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let (k, l) = check_inputs(profiles, rates)?;
    let width = k + l;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size_law = Exp::new(1.0 / traffic.sigma0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut eng = Engine {
        profiles,
        k,
        classes: vec![Vec::new(); width],
        flows: Vec::new(),
        free: Vec::new(),
        records: Vec::new(),
        options,
        active: 0,
    };
    let mut trace = QueueTrace {
        k,
        l,
        horizon,
        end: horizon,
        times: Vec::new(),
        counts: Vec::new(),
        pieces: Vec::new(),
        rate_macro: Vec::new(),
        rate_small: Vec::new(),
        flows: Vec::new(),
        arrivals: 0,
        departures: 0,
    };
    let mut piece = profiles.partition_point(|p| p.t <= 0.0).saturating_sub(1);
    let mut t = 0.0;
    let mut weights: Vec<f64> = Vec::with_capacity(4 * width + 2);

    let record = |trace: &mut QueueTrace, eng: &Engine, t: f64, piece: usize| {
        let svc = eng.service_rates(piece);
        let mut rm = 0.0;
        let mut rs = 0.0;
        for (c, list) in eng.classes.iter().enumerate() {
            let n = list.len();
            if c < eng.k {
                rm += svc[c] * n as f64;
            } else {
                rs += svc[c] * n as f64;
            }
            trace.counts.push(n as u32);
        }
        trace.times.push(t);
        trace.pieces.push(piece as u32);
        trace.rate_macro.push(rm);
        trace.rate_small.push(rs);
    };
    record(&mut trace, &eng, t, piece);

    loop {
        let arriving = t < horizon;
        if !arriving && (!options.drain || eng.active == 0) {
            break;
        }
        let prof = &profiles[piece];
        let rate = &rates[piece];
        let svc = eng.service_rates(piece);

        // earliest departure under the current shares
        let mut dep: Option<(f64, usize, usize)> = None;
        for (c, list) in eng.classes.iter().enumerate() {
            if svc[c] <= 0.0 {
                continue;
            }
            for (pos, &id) in list.iter().enumerate() {
                let d = eng.flows[id].remaining / svc[c];
                if dep.map_or(true, |(best, _, _)| d < best) {
                    dep = Some((d, c, pos));
                }
            }
        }

        weights.clear();
        if arriving {
            weights.extend(prof.lambda_macro.iter().chain(&prof.lambda_small));
        } else {
            weights.extend(std::iter::repeat(0.0).take(width));
        }
        for c in 0..width {
            let n = eng.classes[c].len() as f64;
            let (up, down) = if c < k {
                (rate.nu_up[c], rate.nu_down[c])
            } else {
                (rate.nu_tilde_up[c - k], rate.nu_tilde_down[c - k])
            };
            weights.push(n * up);
            weights.push(n * down);
        }
        weights.push(eng.classes[0].len() as f64 * rate.nu_m2s);
        weights.push(eng.classes[k].len() as f64 * rate.nu_s2m);
        let total: f64 = weights.iter().sum();

        let mut dt = f64::INFINITY;
        let mut next = Next::Event;
        if total > 0.0 {
            dt = Exp::new(total).unwrap().sample(&mut rng);
        }
        if let Some((d, c, pos)) = dep {
            if d < dt {
                dt = d;
                next = Next::Departure(c, pos);
            }
        }
        if piece + 1 < profiles.len() && profiles[piece + 1].t - t <= dt {
            dt = profiles[piece + 1].t - t;
            next = Next::Boundary;
        }
        if arriving && horizon - t <= dt {
            dt = horizon - t;
            next = Next::Horizon;
        }
        if !dt.is_finite() {
            // drained system with nothing left to serve
            break;
        }

        for (c, list) in eng.classes.iter().enumerate() {
            let r = svc[c];
            if r > 0.0 {
                for &id in list {
                    let f = &mut eng.flows[id];
                    f.remaining -= r * dt;
                    f.served += r * dt;
                }
            }
        }

        match next {
            Next::Boundary => {
                t = profiles[piece + 1].t;
                piece += 1;
            }
            Next::Horizon => {
                t = horizon;
            }
            Next::Departure(c, pos) => {
                t += dt;
                let id = eng.classes[c].swap_remove(pos);
                let f = &eng.flows[id];
                if options.record_flows {
                    let rec = &mut eng.records[f.record];
                    rec.departure = Some(t);
                    rec.served = f.served;
                }
                eng.free.push(id);
                eng.active -= 1;
                trace.departures += 1;
            }
            Next::Event => {
                t += dt;
                let mut u = rng.gen::<f64>() * total;
                let mut choice = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        choice = i;
                        break;
                    }
                    u -= w;
                }
                while weights[choice] <= 0.0 {
                    choice -= 1;
                }
                if choice < width {
                    let size = size_law.sample(&mut rng);
                    let rec = eng.records.len();
                    if options.record_flows {
                        eng.records.push(FlowRecord {
                            arrival: t,
                            departure: None,
                            path: Vec::new(),
                            size,
                            served: 0.0,
                        });
                    }
                    let flow = Flow {
                        remaining: size,
                        served: 0.0,
                        record: rec,
                    };
                    let id = match eng.free.pop() {
                        Some(id) => {
                            eng.flows[id] = flow;
                            id
                        }
                        None => {
                            eng.flows.push(flow);
                            eng.flows.len() - 1
                        }
                    };
                    eng.place(id, choice);
                    eng.active += 1;
                    trace.arrivals += 1;
                    if eng.active > options.max_active {
                        return Err(Error::Instability(format!(
                            "more than {} active flows at t={t:.1}s",
                            options.max_active
                        )));
                    }
                } else if choice < 3 * width {
                    let j = choice - width;
                    let c = j / 2;
                    let to = if j % 2 == 0 { c + 1 } else { c - 1 };
                    let id = eng.take_random(c, &mut rng);
                    eng.place(id, to);
                } else if choice == 3 * width {
                    let id = eng.take_random(0, &mut rng);
                    eng.place(id, k);
                } else {
                    let id = eng.take_random(k, &mut rng);
                    eng.place(id, 0);
                }
            }
        }
        record(&mut trace, &eng, t, piece);
    }
    trace.end = t.max(horizon);
    trace.flows = eng.records;
    Ok(trace)
}

/// Time-averaged occupancy and throughput over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub start: f64,
    pub end: f64,
    /// `E_t[n_k]` per macro class.
    pub mean_macro: Vec<f64>,
    pub mean_small: Vec<f64>,
    /// Occupancy shares `P_k`, `P̃_l`.
    pub p_macro: Vec<f64>,
    pub p_small: Vec<f64>,
    /// Fraction of time each cell is nonempty.
    pub busy_macro: f64,
    pub busy_small: f64,
    /// Time-averaged total service rate `sum E_t[eta Phi]` (Mbps).
    pub served_rate: f64,
    pub mean_flows: f64,
    /// Mean flow throughput as `served_rate / mean_flows` (Mbps).
    pub flow_throughput: Option<f64>,
    /// Average of `size / sojourn` over flows arriving and departing in the window.
    pub per_flow_throughput: Option<f64>,
}

/// [`window_metrics`] over `[0, T]`.
pub fn empirical_metrics(trace: &QueueTrace) -> Result<MetricsReport> {
    window_metrics(trace, 0.0, trace.horizon)
}

pub fn window_metrics(trace: &QueueTrace, a: f64, b: f64) -> Result<MetricsReport> {
    if !(b > a) {
        return Err(Error::InvalidArgument(format!("empty observation window [{a}, {b})")));
    }
    if trace.times.is_empty() {
        return Err(Error::InsufficientData("trace has no segments".into()));
    }
    let span = b - a;
    let (k, l) = (trace.k, trace.l);
    let mut mean = vec![0.0; k + l];
    let (mut busy_m, mut busy_s, mut served) = (0.0, 0.0, 0.0);
    trace.overlap(a, b, |d, j| {
        let c = trace.segment_counts(j);
        let w = d / span;
        let (mut nm, mut ns) = (0u32, 0u32);
        for (i, n) in c.iter().enumerate() {
            mean[i] += w * *n as f64;
            if i < k {
                nm += n;
            } else {
                ns += n;
            }
        }
        if nm > 0 {
            busy_m += w;
        }
        if ns > 0 {
            busy_s += w;
        }
        served += w * (trace.rate_macro[j] + trace.rate_small[j]);
    });
    let total: f64 = mean.iter().sum();
    let shares: Vec<f64> = mean.iter().map(|m| if total > 0.0 { m / total } else { 0.0 }).collect();
    let done: Vec<f64> = trace
        .flows
        .iter()
        .filter(|f| f.arrival >= a && f.arrival < b)
        .filter_map(|f| f.departure.map(|d| f.size / (d - f.arrival)))
        .filter(|x| x.is_finite())
        .collect();
    Ok(MetricsReport {
        start: a,
        end: b,
        mean_macro: mean[..k].to_vec(),
        mean_small: mean[k..].to_vec(),
        p_macro: shares[..k].to_vec(),
        p_small: shares[k..].to_vec(),
        busy_macro: busy_m,
        busy_small: busy_s,
        served_rate: served,
        mean_flows: total,
        flow_throughput: (total > 0.0).then(|| served / total),
        per_flow_throughput: (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccdf::CellKind;

    fn single_cell(eta: f64, lambda: f64) -> (Vec<ClassProfile>, Vec<TransitionRates>) {
        let p = ClassProfile::fixed(0.0, vec![[eta, eta]], vec![[1.0, 1.0]], vec![lambda], vec![0.0]);
        (vec![p], vec![TransitionRates::zeros(0.0, 1, 1)])
    }

    #[test]
    fn mm1_ps_mean_occupancy() {
        let (eta, sigma0) = (10.0, 1.0);
        let rho = 0.5;
        let lambda = rho * eta / sigma0;
        let (p, r) = single_cell(eta, lambda);
        let traffic = TrafficSpec { lambda_tot: lambda, sigma0 };
        let horizon = 1e5 / lambda;
        let means: Vec<f64> = (0..20)
            .map(|s| {
                let opts = SimOptions {
                    record_flows: false,
                    ..SimOptions::default()
                };
                let tr = simulate(&p, &r, &traffic, horizon, s, opts).unwrap();
                empirical_metrics(&tr).unwrap().mean_flows
            })
            .collect();
        let m = means.iter().sum::<f64>() / 20.0;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 19.0).sqrt();
        let want = rho / (1.0 - rho);
        assert!((m - want).abs() < 3.0 * sd / 20f64.sqrt(), "mean {m} want {want} sd {sd}");
    }

    #[test]
    fn no_traffic_empty_trace() {
        let (p, r) = single_cell(10.0, 0.0);
        let traffic = TrafficSpec { lambda_tot: 0.0, sigma0: 1.0 };
        let tr = simulate(&p, &r, &traffic, 100.0, 1, SimOptions::default()).unwrap();
        assert_eq!(tr.arrivals, 0);
        assert!(tr.counts.iter().all(|c| *c == 0));
        let m = empirical_metrics(&tr).unwrap();
        assert_eq!(m.mean_flows, 0.0);
        assert_eq!(m.flow_throughput, None);
    }

    fn coupled(seed: u64, drain: bool) -> QueueTrace {
        let p0 = ClassProfile::fixed(
            0.0,
            vec![[12.0, 8.0], [30.0, 20.0]],
            vec![[40.0, 25.0]],
            vec![0.5, 0.5],
            vec![0.8],
        );
        let mut p1 = p0.clone();
        p1.t = 50.0;
        p1.eta_macro = vec![[10.0, 6.0], [28.0, 22.0]];
        let mut r0 = TransitionRates::zeros(0.0, 2, 1);
        r0.nu_up = vec![0.05, 0.0];
        r0.nu_down = vec![0.0, 0.02];
        r0.nu_m2s = 0.03;
        let mut r1 = TransitionRates::zeros(50.0, 2, 1);
        r1.nu_s2m = 0.04;
        let traffic = TrafficSpec { lambda_tot: 1.8, sigma0: 4.0 };
        let opts = SimOptions {
            drain,
            ..SimOptions::default()
        };
        simulate(&[p0, p1], &[r0, r1], &traffic, 200.0, seed, opts).unwrap()
    }

    #[test]
    fn drained_trace_conserves_flows_and_bits() {
        let tr = coupled(3, true);
        assert!(tr.arrivals > 100);
        assert_eq!(tr.arrivals, tr.departures);
        assert!(tr.segment_counts(tr.segments() - 1).iter().all(|c| *c == 0));
        for f in &tr.flows {
            assert!(f.departure.is_some());
            assert!((f.served - f.size).abs() <= 1e-9 * f.size, "{} vs {}", f.served, f.size);
        }
        assert!(tr.flows.iter().any(|f| f.path.len() > 1));
        assert!(tr.flows.iter().any(|f| f.path.iter().any(|c| c.small) && f.path.iter().any(|c| !c.small)));
    }

    #[test]
    fn service_phase_follows_partner_queue() {
        let tr = coupled(5, false);
        let profiles = [(0.0, [[12.0, 8.0], [30.0, 20.0]]), (50.0, [[10.0, 6.0], [28.0, 22.0]])];
        for j in 0..tr.segments() {
            let c = tr.segment_counts(j);
            let (nm, ns) = (c[0] + c[1], c[2]);
            let eta = profiles[tr.pieces[j] as usize].1;
            let phase = (ns > 0) as usize;
            let want = if nm == 0 {
                0.0
            } else {
                (eta[0][phase] * c[0] as f64 + eta[1][phase] * c[1] as f64) / nm as f64
            };
            assert!((tr.rate_macro[j] - want).abs() < 1e-12);
            let want_s = if ns == 0 { 0.0 } else { [40.0, 25.0][(nm > 0) as usize] };
            assert!((tr.rate_small[j] - want_s).abs() < 1e-12);
        }
    }

    #[test]
    fn reproducible() {
        assert_eq!(coupled(9, true), coupled(9, true));
        assert_ne!(coupled(9, true).times, coupled(10, true).times);
    }

    #[test]
    fn occupancy_shares_normalize() {
        let tr = coupled(2, false);
        let m = empirical_metrics(&tr).unwrap();
        let s: f64 = m.p_macro.iter().chain(&m.p_small).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let occ: f64 = tr.state_occupancy(0.0, 200.0).values().sum();
        assert!((occ - 1.0).abs() < 1e-9);
        assert!(window_metrics(&tr, 5.0, 5.0).is_err());
    }

    #[test]
    fn single_permanent_flow() {
        let tr = QueueTrace {
            k: 3,
            l: 2,
            horizon: 10.0,
            end: 10.0,
            times: vec![0.0],
            counts: vec![0, 1, 0, 0, 0],
            pieces: vec![0],
            rate_macro: vec![5.0],
            rate_small: vec![0.0],
            flows: Vec::new(),
            arrivals: 1,
            departures: 0,
        };
        let m = empirical_metrics(&tr).unwrap();
        assert_eq!(m.p_macro, vec![0.0, 1.0, 0.0]);
        assert_eq!(m.p_small, vec![0.0, 0.0]);
        assert_eq!(m.busy_macro, 1.0);
        assert_eq!(m.flow_throughput, Some(5.0));
    }

    fn curve(t: f64, values: Vec<f64>) -> CcdfCurve {
        let n = values.len();
        CcdfCurve {
            t,
            cell: CellKind::Small,
            levels: (1..=n).map(|i| 10.0 * i as f64).collect(),
            values,
            stderr: vec![0.0; n],
            eta0: 98.0,
            mass: 0.5,
        }
    }

    fn profile_with(t: f64, small: CcdfCurve, s_small: f64) -> ClassProfile {
        let mut p = ClassProfile::fixed(t, vec![[1.0, 1.0]; 2], vec![[1.0, 1.0]; 2], vec![0.0; 2], vec![0.0; 2]);
        p.small_curve = Some(small);
        p.s_small = s_small;
        p.s_macro = 1.0 - s_small;
        p
    }

    #[test]
    fn frozen_trajectory_has_no_transitions() {
        let c = curve(0.0, vec![0.9, 0.7, 0.5, 0.3, 0.1]);
        let ps: Vec<ClassProfile> = (0..4).map(|i| profile_with(i as f64 * 10.0, c.clone(), 0.4)).collect();
        for r in estimate_transition_rates(&ps, 0.0).unwrap() {
            r.validate().unwrap();
            assert!(r.nu_tilde_up.iter().chain(&r.nu_tilde_down).all(|v| *v == 0.0));
            assert_eq!((r.nu_m2s, r.nu_s2m), (0.0, 0.0));
        }
        assert!(matches!(estimate_transition_rates(&ps[..1], 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn approach_moves_mass_upward() {
        // survival improves steadily as the cell approaches
        let ps: Vec<ClassProfile> = (0..5)
            .map(|i| {
                let s = 0.05 * i as f64;
                let values = vec![0.9, 0.7 + s, 0.5 + s, 0.3 + s, 0.1];
                profile_with(i as f64 * 10.0, curve(i as f64 * 10.0, values), 0.2 + 0.05 * i as f64)
            })
            .collect();
        let rates = estimate_transition_rates(&ps, 0.0).unwrap();
        for r in &rates[..4] {
            assert!(r.nu_tilde_up[0] > 0.0);
            assert_eq!(r.nu_tilde_down[1], 0.0);
            assert!(r.nu_m2s > 0.0 && r.nu_s2m == 0.0);
        }
        let with_user = estimate_transition_rates(&ps, 0.01).unwrap();
        assert!((with_user[0].nu_tilde_down[1] - 0.01).abs() < 1e-15);
        assert_eq!(with_user[0].nu_tilde_down[0], 0.0);
    }

    #[test]
    fn csv_exports() {
        let tr = coupled(1, true);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 50.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t_s,cell,class,count");
        assert_eq!(text.lines().count(), 1 + 5 * 3);
        let mut buf = Vec::new();
        tr.write_flows_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + tr.flows.len());
    }
}
