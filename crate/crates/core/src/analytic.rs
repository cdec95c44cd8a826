//! Closed-form flow-level evaluation: coupled loads, truncated product-form
//! stationary distributions, class membership, effective rate and the
//! throughput and conservation summaries.

use serde::{Deserialize, Serialize};

use crate::ccdf::ClassProfile;
use crate::error::{Error, Result};
use crate::flowsim::{MetricsReport, TrafficSpec, TransitionRates};
use crate::special::{ln_factorial, ln_gamma};

/// Loads of the two cells, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledLoads {
    pub rho: f64,
    pub rho_tilde: f64,
    /// Values before clamping.
    pub rho_raw: f64,
    pub rho_tilde_raw: f64,
    pub iterations: usize,
}

fn phase_mix(lambda: &[f64], eta: &[[f64; 2]], sigma0: f64, partner: f64) -> Result<f64> {
    let mut total = 0.0;
    for (lam, e) in lambda.iter().zip(eta) {
        if *lam == 0.0 {
            continue;
        }
        if !(e[0] > 0.0 && e[1] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "class with arrivals {lam} has a zero service rate {e:?}"
            )));
        }
        total += lam * sigma0 * (partner / e[1] + (1.0 - partner) / e[0]);
    }
    Ok(total)
}

/// Damped fixed-point iteration for `(rho, rho_tilde)`, each load mixing
/// the phase-0 and phase-1 rates in proportion to the partner's load.
pub fn coupled_loads_fixed_point(profile: &ClassProfile, traffic: &TrafficSpec) -> Result<CoupledLoads> {
    traffic.validate()?;
    let s0 = traffic.sigma0;
    let map = |rho: f64, rt: f64| -> Result<(f64, f64)> {
        Ok((
            phase_mix(&profile.lambda_macro, &profile.eta_macro, s0, rt)?,
            phase_mix(&profile.lambda_small, &profile.eta_small, s0, rho)?,
        ))
    };
    let (mut rho, mut rt) = (0.0, 0.0);
    for it in 1..=10_000 {
        let (fr, ft) = map(rho, rt)?;
        let nr = (0.5 * rho + 0.5 * fr).min(1.0);
        let nt = (0.5 * rt + 0.5 * ft).min(1.0);
        let done = (nr - rho).abs() < 1e-10 && (nt - rt).abs() < 1e-10;
        rho = nr;
        rt = nt;
        if done {
            return Ok(CoupledLoads {
                rho,
                rho_tilde: rt,
                rho_raw: fr,
                rho_tilde_raw: ft,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: 10_000,
        last: (rho, rt),
    })
}

/// Which closed form realizes the stationary distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistributionForm {
    /// Multinomial split of each class's load between its two phases.
    #[default]
    SplitMarginal,
    /// Phase-split factorials taken literally through `Gamma(x + 1)`.
    GammaFactorial,
}

fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_convolve(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; cap + 1];
    for (i, &x) in a.iter().enumerate().take(cap + 1) {
        if x == f64::NEG_INFINITY {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(cap + 1 - i) {
            out[i + j] = lse(out[i + j], x + y);
        }
    }
    out
}

/// Product-form weights `h(|n|) * prod_k c_k(n_k)` over `|n| <= cap`, in
/// log space, with normalization and marginals.
#[derive(Debug, Clone)]
pub struct TruncatedDistribution {
    header: Vec<f64>,
    classes: Vec<Vec<f64>>,
    cap: usize,
    log_total: Vec<f64>,
    raw_mass: f64,
    deficit: f64,
    total_marginal: Vec<f64>,
    cond_means: Vec<Vec<f64>>,
    means: Vec<f64>,
}

impl TruncatedDistribution {
    fn build(header: Vec<f64>, classes: Vec<Vec<f64>>, cap: usize) -> Self {
        let k = classes.len();
        let ident = {
            let mut v = vec![f64::NEG_INFINITY; cap + 1];
            v[0] = 0.0;
            v
        };
        // prefix/suffix convolutions give every leave-one-out product cheaply
        let mut prefix = vec![ident.clone()];
        for c in &classes {
            let next = log_convolve(prefix.last().unwrap(), c, cap);
            prefix.push(next);
        }
        let mut suffix = vec![ident.clone(); k + 1];
        for i in (0..k).rev() {
            suffix[i] = log_convolve(&suffix[i + 1], &classes[i], cap);
        }
        let all = &prefix[k];
        let log_total: Vec<f64> = (0..=cap).map(|n| header[n] + all[n]).collect();
        let raw: Vec<f64> = log_total.iter().map(|x| x.exp()).collect();
        let raw_mass: f64 = raw.iter().sum();
        let tail = if cap >= 1 && raw[cap - 1] > 0.0 {
            let r = raw[cap] / raw[cap - 1];
            if r < 1.0 {
                raw[cap] * r / (1.0 - r)
            } else {
                f64::INFINITY
            }
        } else {
            0.0
        };
        let deficit = if tail.is_finite() { tail / (raw_mass + tail) } else { 1.0 };
        let total_marginal: Vec<f64> = raw.iter().map(|x| x / raw_mass).collect();

        let mut cond_means = vec![vec![0.0; cap + 1]; k];
        for i in 0..k {
            let others = log_convolve(&prefix[i], &suffix[i + 1], cap);
            for n in 1..=cap {
                if all[n] == f64::NEG_INFINITY {
                    continue;
                }
                let mut acc = f64::NEG_INFINITY;
                for m in 1..=n {
                    acc = lse(acc, (m as f64).ln() + classes[i][m] + others[n - m]);
                }
                cond_means[i][n] = (acc - all[n]).exp();
            }
        }
        let means = (0..k)
            .map(|i| (0..=cap).map(|n| total_marginal[n] * cond_means[i][n]).sum())
            .collect();
        TruncatedDistribution {
            header,
            classes,
            cap,
            log_total,
            raw_mass,
            deficit,
            total_marginal,
            cond_means,
            means,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes.len()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Sum of the unnormalized weights over the truncated space.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Estimated probability mass beyond the truncation, from a geometric
    /// extrapolation of the last two total-count terms.
    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// Normalized distribution of the total count.
    pub fn total_marginal(&self) -> &[f64] {
        &self.total_marginal
    }

    pub fn mean(&self, class: usize) -> f64 {
        self.means[class]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean_total(&self) -> f64 {
        self.means.iter().sum()
    }

    /// `E[n_k | |n| = n]`.
    pub fn conditional_mean(&self, class: usize, total: usize) -> f64 {
        self.cond_means[class][total]
    }

    fn log_weight(&self, state: &[u32]) -> f64 {
        let n: usize = state.iter().map(|x| *x as usize).sum();
        if n > self.cap || state.len() != self.classes.len() {
            return f64::NEG_INFINITY;
        }
        self.header[n] + state.iter().zip(&self.classes).map(|(s, c)| c[*s as usize]).sum::<f64>()
    }

    /// Unnormalized weight of a state.
    pub fn raw_prob(&self, state: &[u32]) -> f64 {
        self.log_weight(state).exp()
    }

    /// Probability of a state, normalized over the truncated space.
    pub fn prob(&self, state: &[u32]) -> f64 {
        self.raw_prob(state) / self.raw_mass
    }

    /// Every state of the truncated space with its normalized probability.
    pub fn states(&self) -> Vec<StateProbability> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; self.classes.len()];
        self.enumerate(0, self.cap, &mut cur, &mut out);
        out
    }

    fn enumerate(&self, i: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<StateProbability>) {
        if i == cur.len() {
            out.push(StateProbability {
                state: cur.clone(),
                probability: self.prob(cur),
            });
            return;
        }
        for n in 0..=left {
            cur[i] = n as u32;
            self.enumerate(i + 1, left - n, cur, out);
        }
        cur[i] = 0;
    }

    /// `ln` of the normalizer restricted to each total count.
    pub fn log_total_weights(&self) -> &[f64] {
        &self.log_total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateProbability {
    pub state: Vec<u32>,
    pub probability: f64,
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn split_log_factor(n: usize, partner: f64) -> f64 {
    let x = n as f64;
    ln_gamma(partner * x + 1.0) + ln_gamma((1.0 - partner) * x + 1.0)
}

/// One cell's factor of the coupled static distribution.
fn static_cell(
    lambda: &[f64],
    eta: &[[f64; 2]],
    sigma0: f64,
    load: f64,
    partner: f64,
    cap: usize,
    form: DistributionForm,
) -> TruncatedDistribution {
    let header: Vec<f64> = (0..=cap).map(|n| (1.0 - load).ln() + ln_factorial(n as f64)).collect();
    let classes = lambda
        .iter()
        .zip(eta)
        .map(|(lam, e)| {
            (0..=cap)
                .map(|n| {
                    if n == 0 {
                        return 0.0;
                    }
                    let x = n as f64;
                    match form {
                        DistributionForm::SplitMarginal => {
                            let a = lam * sigma0 * ((1.0 - partner) / e[0] + partner / e[1]);
                            x * ln_or_neg_inf(a) - ln_factorial(x)
                        }
                        DistributionForm::GammaFactorial => {
                            let l0 = ln_or_neg_inf(lam * sigma0 / e[0]);
                            let l1 = ln_or_neg_inf(lam * sigma0 / e[1]);
                            let expo = (1.0 - partner) * x * l0 + partner * x * l1;
                            let expo = if expo.is_nan() { f64::NEG_INFINITY } else { expo };
                            expo - split_log_factor(n, partner)
                        }
                    }
                })
                .collect()
        })
        .collect();
    TruncatedDistribution::build(header, classes, cap)
}

/// The coupled static distribution: independent macro and small factors,
/// each truncated at `cap` active flows.
#[derive(Debug, Clone)]
pub struct StaticDistribution {
    pub macro_cell: TruncatedDistribution,
    pub small_cell: TruncatedDistribution,
    pub loads: CoupledLoads,
}

impl StaticDistribution {
    pub fn prob(&self, n: &[u32], n_tilde: &[u32]) -> f64 {
        self.macro_cell.prob(n) * self.small_cell.prob(n_tilde)
    }

    pub fn raw_prob(&self, n: &[u32], n_tilde: &[u32]) -> f64 {
        self.macro_cell.raw_prob(n) * self.small_cell.raw_prob(n_tilde)
    }

    pub fn raw_mass(&self) -> f64 {
        self.macro_cell.raw_mass() * self.small_cell.raw_mass()
    }

    pub fn deficit(&self) -> f64 {
        1.0 - (1.0 - self.macro_cell.deficit()) * (1.0 - self.small_cell.deficit())
    }

    /// Joint states, macro classes first.
    pub fn states(&self) -> Vec<StateProbability> {
        let small = self.small_cell.states();
        let mut out = Vec::new();
        for m in self.macro_cell.states() {
            for s in &small {
                let mut state = m.state.clone();
                state.extend(&s.state);
                out.push(StateProbability {
                    state,
                    probability: m.probability * s.probability,
                });
            }
        }
        out
    }
}

pub fn stationary_static(
    profile: &ClassProfile,
    traffic: &TrafficSpec,
    loads: &CoupledLoads,
    cap: usize,
    form: DistributionForm,
) -> Result<StaticDistribution> {
    if loads.rho >= 1.0 || loads.rho_tilde >= 1.0 {
        return Err(Error::Instability(format!(
            "static distribution needs rho, rho_tilde < 1, got {} and {}",
            loads.rho, loads.rho_tilde
        )));
    }
    if cap == 0 {
        return Err(Error::InvalidArgument("truncation bound must be >= 1".into()));
    }
    let s0 = traffic.sigma0;
    Ok(StaticDistribution {
        macro_cell: static_cell(&profile.lambda_macro, &profile.eta_macro, s0, loads.rho, loads.rho_tilde, cap, form),
        small_cell: static_cell(&profile.lambda_small, &profile.eta_small, s0, loads.rho_tilde, loads.rho, cap, form),
        loads: *loads,
    })
}

/// Rate-ratio products of the class-membership chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MembershipForm {
    /// Each cell's birth-death products, linked through the handover pair.
    #[default]
    Decoupled,
    /// Every class also carries the other cell's full product and the
    /// handover ratio.
    CrossProduct,
}

fn ratio_products(up: &[f64], down: &[f64], t: f64, offset: usize) -> Result<Vec<f64>> {
    let mut out = vec![1.0];
    for i in 0..up.len().saturating_sub(1) {
        if down[i + 1] <= 0.0 {
            return Err(Error::UndefinedChain {
                rate: format!("down rate of class {}", offset + i + 2),
                class: offset + i + 1,
                t,
            });
        }
        out.push(out[i] * up[i] / down[i + 1]);
    }
    Ok(out)
}

/// Time-averaged class probabilities `(q, q_tilde)`, normalized jointly.
pub fn class_membership(rates: &[TransitionRates], form: MembershipForm) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = rates
        .first()
        .ok_or_else(|| Error::InsufficientData("no transition rates".into()))?;
    let (k, l) = (first.nu_up.len(), first.nu_tilde_up.len());
    let weights = trapezoid_weights(&rates.iter().map(|r| r.t).collect::<Vec<_>>());
    let mut q = vec![0.0; k];
    let mut qt = vec![0.0; l];
    for (r, w) in rates.iter().zip(&weights) {
        let pm = ratio_products(&r.nu_up, &r.nu_down, r.t, 0)?;
        let ps = ratio_products(&r.nu_tilde_up, &r.nu_tilde_down, r.t, k)?;
        match form {
            MembershipForm::Decoupled => {
                for i in 0..k {
                    q[i] += w * r.nu_s2m * pm[i];
                }
                for j in 0..l {
                    qt[j] += w * r.nu_m2s * ps[j];
                }
            }
            MembershipForm::CrossProduct => {
                if r.nu_m2s <= 0.0 {
                    return Err(Error::UndefinedChain {
                        rate: "macro-to-small handover".into(),
                        class: 0,
                        t: r.t,
                    });
                }
                if r.nu_s2m <= 0.0 {
                    return Err(Error::UndefinedChain {
                        rate: "small-to-macro handover".into(),
                        class: k,
                        t: r.t,
                    });
                }
                let (all_m, all_s) = (pm[k - 1], ps[l - 1]);
                for i in 0..k {
                    q[i] += w * r.nu_s2m / r.nu_m2s * pm[i] * all_s;
                }
                for j in 0..l {
                    qt[j] += w * r.nu_m2s / r.nu_s2m * ps[j] * all_m;
                }
            }
        }
    }
    let total: f64 = q.iter().chain(&qt).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::UndefinedChain {
            rate: "handover rates vanish at every snapshot".into(),
            class: 0,
            t: first.t,
        });
    }
    Ok((q.iter().map(|x| x / total).collect(), qt.iter().map(|x| x / total).collect()))
}

/// Fallback class probabilities proportional to each class's offered
/// load at its effective rate, time-averaged over the profiles.
pub fn static_membership(profiles: &[ClassProfile], loads: &[CoupledLoads], traffic: &TrafficSpec) -> (Vec<f64>, Vec<f64>) {
    let weights = trapezoid_weights(&profiles.iter().map(|p| p.t).collect::<Vec<_>>());
    let (k, l) = (profiles[0].k, profiles[0].l);
    let mut q = vec![0.0; k];
    let mut qt = vec![0.0; l];
    for ((p, ld), w) in profiles.iter().zip(loads).zip(&weights) {
        for i in 0..k {
            let eta = ld.rho_tilde * p.eta_macro[i][1] + (1.0 - ld.rho_tilde) * p.eta_macro[i][0];
            if eta > 0.0 {
                q[i] += w * p.lambda_macro[i] * traffic.sigma0 / eta;
            }
        }
        for j in 0..l {
            let eta = ld.rho * p.eta_small[j][1] + (1.0 - ld.rho) * p.eta_small[j][0];
            if eta > 0.0 {
                qt[j] += w * p.lambda_small[j] * traffic.sigma0 / eta;
            }
        }
    }
    let total: f64 = q.iter().chain(&qt).sum();
    let norm = |v: Vec<f64>| v.into_iter().map(|x| if total > 0.0 { x / total } else { 0.0 }).collect();
    (norm(q), norm(qt))
}

/// Trapezoidal weights over sample times, summing to 1.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n == 1 {
        return vec![1.0];
    }
    let span = times[n - 1] - times[0];
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (times[i + 1] - times[i]) / span;
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRate {
    /// `eta_bar` (Mbps).
    pub eta_bar: f64,
    /// `lambda_Tot sigma0 / eta_bar`.
    pub rho_bar: f64,
}

/// Service rate of the equivalent single PS queue.
pub fn effective_rate(
    profiles: &[ClassProfile],
    loads: &[CoupledLoads],
    q: &[f64],
    q_tilde: &[f64],
    traffic: &TrafficSpec,
) -> Result<EffectiveRate> {
    if profiles.is_empty() || profiles.len() != loads.len() {
        return Err(Error::InvalidArgument("need one load pair per profile".into()));
    }
    let weights = trapezoid_weights(&profiles.iter().map(|p| p.t).collect::<Vec<_>>());
    let mut eta_bar = 0.0;
    for ((p, ld), w) in profiles.iter().zip(loads).zip(&weights) {
        let (rho, rt) = (ld.rho.clamp(0.0, 1.0), ld.rho_tilde.clamp(0.0, 1.0));
        for (i, qi) in q.iter().enumerate() {
            eta_bar += w * qi * (rt * p.eta_macro[i][1] + (1.0 - rt) * p.eta_macro[i][0]);
        }
        for (j, qj) in q_tilde.iter().enumerate() {
            eta_bar += w * qj * (rho * p.eta_small[j][1] + (1.0 - rho) * p.eta_small[j][0]);
        }
    }
    if !(eta_bar > 0.0) {
        return Err(Error::Instability(format!("effective rate is not positive: {eta_bar}")));
    }
    Ok(EffectiveRate {
        eta_bar,
        rho_bar: traffic.offered() / eta_bar,
    })
}

/// One window's `eta_bar` with empirical occupancy shares and busy
/// fractions in place of `q` and the loads.
pub fn window_effective_rate(profiles: &[ClassProfile], a: f64, b: f64, m: &MetricsReport) -> f64 {
    let mut eta = 0.0;
    let mut weight = 0.0;
    for (i, p) in profiles.iter().enumerate() {
        let start = p.t.max(a);
        let end = profiles.get(i + 1).map_or(b, |n| n.t).min(b);
        if end <= start {
            continue;
        }
        let d = end - start;
        weight += d;
        for k in 0..p.k {
            eta += d * m.p_macro[k] * (m.busy_small * p.eta_macro[k][1] + (1.0 - m.busy_small) * p.eta_macro[k][0]);
        }
        for l in 0..p.l {
            eta += d * m.p_small[l] * (m.busy_macro * p.eta_small[l][1] + (1.0 - m.busy_macro) * p.eta_small[l][0]);
        }
    }
    if weight > 0.0 {
        eta / weight
    } else {
        0.0
    }
}

/// The mobile stationary distribution over all `K + L` classes, truncated
/// at `cap` flows in the whole system.
pub fn stationary_mobile(
    q: &[f64],
    q_tilde: &[f64],
    loads: &CoupledLoads,
    rho_bar: f64,
    cap: usize,
    form: DistributionForm,
) -> Result<TruncatedDistribution> {
    if !(rho_bar < 1.0) || rho_bar < 0.0 {
        return Err(Error::Instability(format!("mobile distribution needs rho_bar < 1, got {rho_bar}")));
    }
    if cap == 0 {
        return Err(Error::InvalidArgument("truncation bound must be >= 1".into()));
    }
    let header: Vec<f64> = (0..=cap)
        .map(|n| {
            let x = n as f64;
            let pow = if n == 0 { 0.0 } else { x * ln_or_neg_inf(rho_bar) };
            (1.0 - rho_bar).ln() + ln_factorial(x) + pow
        })
        .collect();
    let (rho, rt) = (loads.rho.clamp(0.0, 1.0), loads.rho_tilde.clamp(0.0, 1.0));
    let class = |qk: f64, partner: f64| -> Vec<f64> {
        (0..=cap)
            .map(|n| {
                if n == 0 {
                    return 0.0;
                }
                let x = n as f64;
                let base = x * ln_or_neg_inf(qk);
                match form {
                    DistributionForm::SplitMarginal => base - ln_factorial(x),
                    DistributionForm::GammaFactorial => base - split_log_factor(n, partner),
                }
            })
            .collect()
    };
    let mut classes: Vec<Vec<f64>> = q.iter().map(|x| class(*x, rt)).collect();
    classes.extend(q_tilde.iter().map(|x| class(*x, rho)));
    Ok(TruncatedDistribution::build(header, classes, cap))
}

/// Mean flow throughput of the equivalent queue from its stationary
/// distribution: served rate over mean occupancy.
pub fn mean_flow_throughput_mobile(dist: &TruncatedDistribution, eta_bar: f64) -> Result<f64> {
    let busy = 1.0 - dist.total_marginal()[0];
    let mean = dist.mean_total();
    if !(mean > 0.0) {
        return Err(Error::InsufficientData("distribution has no active flows".into()));
    }
    Ok(eta_bar * busy / mean)
}

/// Mean flow throughput of the static coupled system from its
/// marginals, with each cell's phase set by the partner being empty.
pub fn mean_flow_throughput_static(dist: &StaticDistribution, profile: &ClassProfile) -> Result<f64> {
    let served = |cell: &TruncatedDistribution, eta: &[[f64; 2]], partner_busy: f64| -> f64 {
        let mut s = 0.0;
        for n in 1..=cell.cap() {
            let p = cell.total_marginal()[n];
            for (k, e) in eta.iter().enumerate() {
                let rate = partner_busy * e[1] + (1.0 - partner_busy) * e[0];
                s += p * rate * cell.conditional_mean(k, n) / n as f64;
            }
        }
        s
    };
    let bm = 1.0 - dist.macro_cell.total_marginal()[0];
    let bs = 1.0 - dist.small_cell.total_marginal()[0];
    let rate = served(&dist.macro_cell, &profile.eta_macro, bs) + served(&dist.small_cell, &profile.eta_small, bm);
    let mean = dist.macro_cell.mean_total() + dist.small_cell.mean_total();
    if !(mean > 0.0) {
        return Err(Error::InsufficientData("distribution has no active flows".into()));
    }
    Ok(rate / mean)
}

/// Mean flow throughput from a simulated window.
pub fn mean_flow_throughput(metrics: &MetricsReport) -> Result<f64> {
    metrics
        .flow_throughput
        .ok_or_else(|| Error::InsufficientData("no active flows in the observation window".into()))
}

/// Offered traffic minus time-averaged served traffic (Mbps).
pub fn conservation_residual(traffic: &TrafficSpec, metrics: &MetricsReport) -> f64 {
    traffic.offered() - metrics.served_rate
}
