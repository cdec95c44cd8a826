//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mscell::analytic::{coupled_loads_fixed_point, stationary_static, DistributionForm};
use mscell::ccdf::{
    coverage, macro_only_ccdf, profile_from_snapshot, snapshot, CcdfCurve, ClassProfile, LevelGrid, PreparedSamples,
};
use mscell::cli::pipeline::{
    autocorrelation_peak, average_curve, run_dynamics, sign_test_p, snapshot_series, system_curve, DynamicsRun,
    Scenario, WindowRow,
};
use mscell::cli::{cmd_dynamics, mean_windows, ScenarioConfig};
use mscell::flowsim::{empirical_metrics, simulate, SimOptions, TrafficSpec, TransitionRates};
use mscell::geometry::{CellLayout, PolarPoint};
use mscell::hotspot::{sample_xy, HotspotSpec, SampleSet};
use mscell::radio::{shannon_rate, OmegaForm, RadioModel, RadioParams};
use mscell::special::{bessel_i0, ln_gamma};

const G_REL_TOL: f64 = 0.10;
const G_RUNTIME_S: f64 = 10.0;
const TRIPLE_SAMPLES: usize = 1_000_000;
const TRIPLE_SIGMAS: f64 = 3.0;
const TRIPLE_RUNTIME_S: f64 = 60.0;
const STRUCT_SCENARIOS: usize = 20;
const QUEUE_SIGMAS: f64 = 3.0;
const QUEUE_REPLICATIONS: usize = 20;
const QUEUE_RUNTIME_S: f64 = 120.0;
const COUPLING_TV: f64 = 0.05;
const CONSERVATION_REL: f64 = 0.02;
const DOMINANCE_SIGMAS: f64 = 3.0;
const SIGN_ALPHA: f64 = 0.05;
const NEAR_KM: f64 = 0.06;
const I0_REL_TOL: f64 = 1e-9;
const LNGAMMA_REL_TOL: f64 = 1e-12;
const GINV_ABS_TOL: f64 = 1e-7;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn default_run() -> &'static (Scenario, DynamicsRun) {
    static RUN: OnceLock<(Scenario, DynamicsRun)> = OnceLock::new();
    RUN.get_or_init(|| {
        let sc = Scenario::new(ScenarioConfig::bundled()).unwrap();
        let run = run_dynamics(&sc).unwrap();
        (sc, run)
    })
}

#[test]
fn criterion_01_interference_factor_vs_lattice() {
    let start = Instant::now();
    let layout = CellLayout::new(1.0, 30).unwrap();
    let sites = layout.interferer_positions();
    let radius = layout.radius();
    let mut worst = Vec::new();
    for form in [OmegaForm::Product, OmegaForm::Sum] {
        let params = RadioParams {
            omega_form: form,
            ..RadioParams::reference()
        };
        let model = RadioModel::new(params, layout.clone()).unwrap();
        let mut max_rel: f64 = 0.0;
        for i in 0..18 {
            let r = radius * (0.1 + 0.85 * i as f64 / 17.0);
            let azimuths = 72;
            let oracle: f64 = (0..azimuths)
                .map(|j| {
                    let th = 2.0 * PI * j as f64 / azimuths as f64;
                    model.interference_factor_oracle_at(PolarPoint::new(r, th), &sites).unwrap()
                })
                .sum::<f64>()
                / azimuths as f64;
            let closed = model.interference_factor(r).unwrap();
            max_rel = max_rel.max((closed / oracle - 1.0).abs());
        }
        worst.push((form, max_rel));
    }
    let secs = start.elapsed().as_secs_f64();
    let best = worst.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    report(
        1,
        "g(r) closed form vs 30-ring lattice",
        best <= G_REL_TOL && secs < G_RUNTIME_S,
        &format!(
            "max rel err product {:.4}, sum {:.4} (tol {G_REL_TOL}); {secs:.2}s",
            worst[0].1, worst[1].1
        ),
    );
}

#[test]
fn criterion_02_macro_only_triple_agreement() {
    let start = Instant::now();
    let params = RadioParams {
        kappa: 0.0,
        ..RadioParams::reference()
    };
    let model = RadioModel::new(params, CellLayout::new(1.0, 30).unwrap()).unwrap();
    let spec = HotspotSpec::new(0.5, PI / 3.0, 0.02).unwrap();
    let levels = LevelGrid::standard(model.params().eta0).unwrap();
    let radius = model.layout().radius();

    let quad = macro_only_ccdf(&levels, &spec, &model).unwrap();

    let pts = sample_xy(&spec, TRIPLE_SAMPLES, 11).unwrap();
    let rates: Vec<f64> = pts
        .iter()
        .filter(|p| p.norm() <= radius)
        .map(|p| shannon_rate(1.0 / model.interference_factor(p.norm()).unwrap(), model.params()).unwrap())
        .collect();
    let n_direct = rates.len() as f64;

    let set = SampleSet::draw(&spec, TRIPLE_SAMPLES, 12).unwrap();
    let prepared = PreparedSamples::new(&set, &model);
    let ls = PolarPoint::new(spec.r_h, spec.theta_h);
    let region = coverage(&model, ls, 0.2).unwrap();
    let snap = snapshot(0.0, ls, &levels, &model, &region, &prepared).unwrap();
    let pipe = snap.macro_ccdf.curve().expect("macro cell serves everyone when kappa = 0");
    let n_pipe = snap.s_macro.accepted as f64;

    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for i in (0..levels.len()).step_by(4) {
        let l = levels.levels()[i];
        let direct = rates.iter().filter(|r| **r >= l).count() as f64 / n_direct;
        let p = quad.values[i];
        // standard errors at the reference value; floor of one sample
        let se = |n: f64| (p * (1.0 - p) / n).sqrt().max(1.0 / n);
        let (se_d, se_p) = (se(n_direct), se(n_pipe));
        let z = [
            (direct - p).abs() / se_d,
            (pipe.values[i] - p).abs() / se_p,
            (direct - pipe.values[i]).abs() / (se_d * se_d + se_p * se_p).sqrt(),
        ];
        worst = worst.max(z.iter().cloned().fold(0.0, f64::max));
        compared += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "macro-only CCDF: quadrature vs Monte Carlo vs silent-small-cell pipeline",
        worst <= TRIPLE_SIGMAS && compared == 50 && secs < TRIPLE_RUNTIME_S,
        &format!("{compared} levels, worst pairwise z = {worst:.2} (tol {TRIPLE_SIGMAS}); {secs:.1}s"),
    );
}

fn curve_ge(a: &CcdfCurve, b: &CcdfCurve) -> bool {
    a.values.iter().zip(&b.values).all(|(x, y)| *x >= *y - 1e-15)
}

#[test]
fn criterion_03_ccdf_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let layout = CellLayout::new(1.0, 30).unwrap();
    let radius = layout.radius();
    let levels = LevelGrid::standard(98.0).unwrap();
    let mut passed = 0;
    let mut failures = Vec::new();
    for s in 0..STRUCT_SCENARIOS {
        let kappa = 10f64.powf(rng.gen_range(-3.5..-1.5));
        let model = RadioModel::new(
            RadioParams {
                kappa,
                ..RadioParams::reference()
            },
            layout.clone(),
        )
        .unwrap();
        let spec = HotspotSpec::new(rng.gen_range(0.05..0.45), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.01..0.1))
            .unwrap();
        let ls = PolarPoint::new(radius * rng.gen_range(0.0f64..1.0).sqrt(), rng.gen_range(0.0..2.0 * PI));
        let region = coverage(&model, ls, rng.gen_range(0.1..0.3)).unwrap();
        let prepared = PreparedSamples::new(&SampleSet::draw(&spec, 20_000, s as u64).unwrap(), &model);
        let snap = snapshot(0.0, ls, &levels, &model, &region, &prepared).unwrap();
        let mut ok = true;
        for c in [&snap.macro_ccdf, &snap.small_ccdf, &snap.macro_ccdf_phase0, &snap.small_ccdf_phase0]
            .into_iter()
            .filter_map(|c| c.curve())
        {
            ok &= c.check_structure().is_ok();
            ok &= c.value_at(1e-9) == 1.0 && c.value_at(98.0 + 1e-9) == 0.0;
        }
        for (p0, p1) in [
            (&snap.macro_ccdf_phase0, &snap.macro_ccdf),
            (&snap.small_ccdf_phase0, &snap.small_ccdf),
        ] {
            if let (Some(a), Some(b)) = (p0.curve(), p1.curve()) {
                ok &= curve_ge(a, b);
            }
        }
        let profile = profile_from_snapshot(&snap, 4, 4, 5.0).unwrap();
        ok &= profile.eta_macro.iter().chain(&profile.eta_small).all(|e| e[0] >= e[1]);
        ok &= macro_only_ccdf(&levels, &spec, &model).unwrap().check_structure().is_ok();
        if ok {
            passed += 1;
        } else {
            failures.push(s);
        }
    }
    report(
        3,
        "CCDF structure and phase ordering",
        passed == STRUCT_SCENARIOS,
        &format!("{passed}/{STRUCT_SCENARIOS} scenarios; failing {failures:?}"),
    );
}

#[test]
fn criterion_04_mm1_ps_occupancy() {
    let start = Instant::now();
    let (eta, sigma0) = (10.0, 1.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for rho in [0.3, 0.5, 0.7] {
        let lambda = rho * eta / sigma0;
        let profile = ClassProfile::fixed(0.0, vec![[eta, eta]], vec![[1.0, 1.0]], vec![lambda], vec![0.0]);
        let rates = vec![TransitionRates::zeros(0.0, 1, 1)];
        let traffic = TrafficSpec { lambda_tot: lambda, sigma0 };
        let opts = SimOptions {
            record_flows: false,
            ..SimOptions::default()
        };
        let means: Vec<f64> = (0..QUEUE_REPLICATIONS)
            .map(|i| {
                let tr = simulate(&[profile.clone()], &rates, &traffic, 1e5 / lambda, 100 + i as u64, opts).unwrap();
                empirical_metrics(&tr).unwrap().mean_flows
            })
            .collect();
        let n = means.len() as f64;
        let m = means.iter().sum::<f64>() / n;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        let want = rho / (1.0 - rho);
        let z = (m - want).abs() / se;
        ok &= z <= QUEUE_SIGMAS;
        lines.push(format!("rho {rho}: {m:.4} vs {want:.4} (z {z:.2})"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "M/M/1-PS mean occupancy",
        ok && secs < QUEUE_RUNTIME_S,
        &format!("{}; {secs:.1}s", lines.join(", ")),
    );
}

#[test]
fn criterion_05_coupled_static_distribution() {
    let (eta0, ratio, target) = (10.0, 1.2, 0.4);
    let eta1 = eta0 / ratio;
    let lambda = target / ((1.0 - target) / eta0 + target / eta1);
    let profile = ClassProfile::fixed(0.0, vec![[eta0, eta1]], vec![[eta0, eta1]], vec![lambda], vec![lambda]);
    let traffic = TrafficSpec {
        lambda_tot: 2.0 * lambda,
        sigma0: 1.0,
    };
    let loads = coupled_loads_fixed_point(&profile, &traffic).unwrap();
    assert!((loads.rho - target).abs() < 1e-9 && (loads.rho_tilde - target).abs() < 1e-9);
    let dist = stationary_static(&profile, &traffic, &loads, 40, DistributionForm::SplitMarginal).unwrap();
    assert!(dist.deficit() < 1e-6);
    let horizon = 2e5;
    let opts = SimOptions {
        record_flows: false,
        ..SimOptions::default()
    };
    let tr = simulate(&[profile], &[TransitionRates::zeros(0.0, 1, 1)], &traffic, horizon, 5, opts).unwrap();
    let empirical = tr.state_occupancy(0.0, horizon);
    let model: std::collections::HashMap<Vec<u32>, f64> =
        dist.states().into_iter().map(|s| (s.state, s.probability)).collect();
    let keys: BTreeSet<&Vec<u32>> = empirical.keys().chain(model.keys()).collect();
    let tv = 0.5
        * keys
            .iter()
            .map(|k| (empirical.get(*k).unwrap_or(&0.0) - model.get(*k).unwrap_or(&0.0)).abs())
            .sum::<f64>();
    report(
        5,
        "coupled two-cell queue vs static product form",
        tv < COUPLING_TV,
        &format!("TV distance {tv:.4} at rho = rho_tilde = {target}, eta0/eta1 = {ratio} (tol {COUPLING_TV})"),
    );
}

#[test]
fn criterion_06_conservation() {
    let (sc, run) = default_run();
    let offered = sc.traffic().offered();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for r in run.with_sc.replications.iter().chain(&run.macro_only.replications) {
        if r.rho_bar < 1.0 {
            worst = worst.max(r.residual.abs() / offered);
            runs += 1;
        }
    }
    report(
        6,
        "traffic conservation",
        runs > 0 && worst < CONSERVATION_REL,
        &format!("{runs} stable runs, worst |residual|/offered {worst:.4} (tol {CONSERVATION_REL})"),
    );
}

/// Largest shortfall of `with` below `base` in standard errors, and the
/// largest absolute shortfall with its level.
fn dominance(with: &CcdfCurve, base: &CcdfCurve) -> (f64, f64, f64) {
    let (mut z, mut gap, mut at) = (0.0f64, 0.0f64, 0.0);
    for i in 0..with.levels.len() {
        if with.levels[i] > with.eta0 {
            continue;
        }
        let g = base.values[i] - with.values[i];
        if g <= 0.0 {
            continue;
        }
        let se = with.stderr[i];
        z = z.max(if se > 0.0 { g / se } else { f64::INFINITY });
        if g > gap {
            gap = g;
            at = with.levels[i];
        }
    }
    (z, gap, at)
}

#[test]
fn criterion_07_ccdf_trend() {
    let sc = Scenario::new(ScenarioConfig::bundled()).unwrap();
    let base = sc.baseline_curve().unwrap();
    let samples = sc.samples(sc.config.sim.seed).unwrap();
    let at = |d: f64| {
        let snap = sc.snapshot_at(0.0, sc.position_at_distance(d).unwrap(), &samples).unwrap();
        system_curve(&snap).unwrap()
    };
    let near = at(0.0);
    let (z_near, gap_near, _) = dominance(&near, &base);
    let gain = near.mean() > base.mean();
    let (z_60, gap_60, at_60) = dominance(&at(0.06), &base);

    let series = snapshot_series(&sc, &samples).unwrap();
    let period = sc.config.mobility.period_s.unwrap();
    let curves: Vec<CcdfCurve> = series.snapshots.iter().filter(|s| s.t < period).filter_map(system_curve).collect();
    let avg = average_curve(&curves).unwrap();
    let (z_avg, gap_avg, at_avg) = dominance(&avg, &base);
    report(
        7,
        "CCDF dominance over the macro-only baseline",
        z_near <= DOMINANCE_SIGMAS && gain && z_avg <= DOMINANCE_SIGMAS,
        &format!(
            "worst shortfall at 0 m {z_near:.2} se ({gap_near:.4}), time average {z_avg:.2} se \
             ({gap_avg:.4} at {at_avg:.2} Mbps) (tol {DOMINANCE_SIGMAS} se); mean {:.2} vs {:.2} Mbps; \
             60 m shortfall {z_60:.2} se ({gap_60:.4} at {at_60:.2} Mbps)",
            near.mean(),
            base.mean()
        ),
    );
}

fn window_mean<F: Fn(&WindowRow) -> Option<f64>>(rows: &[WindowRow], pick: &[usize], f: F) -> Option<f64> {
    let v: Vec<f64> = pick.iter().filter_map(|j| f(&rows[*j])).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[test]
fn criterion_08_dynamics_trend() {
    let (sc, run) = default_run();
    let step = sc.config.sim.window_s;
    let period = sc.config.mobility.period_s.unwrap();
    let mean_sc = mean_windows(&run.with_sc);
    let rho: Vec<f64> = mean_sc.iter().map(|w| w.rho_bar).collect();
    let fill = {
        let v: Vec<f64> = mean_sc.iter().filter_map(|w| w.throughput).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let tput: Vec<f64> = mean_sc.iter().map(|w| w.throughput.unwrap_or(fill)).collect();
    let lag_rho = autocorrelation_peak(&rho, step, 0.5 * period, 1.5 * period);
    let lag_r = autocorrelation_peak(&tput, step, 0.5 * period, 1.5 * period);
    let periodic = [lag_rho, lag_r].iter().all(|l| l.is_some_and(|l| (l - period).abs() <= step));

    let dist: Vec<f64> = mean_sc.iter().map(|w| w.distance).collect();
    let far_km = 0.5 * dist.iter().cloned().fold(0.0, f64::max);
    let near: Vec<usize> = (0..dist.len()).filter(|j| dist[*j] <= NEAR_KM).collect();
    let far: Vec<usize> = (0..dist.len()).filter(|j| dist[*j] >= far_km).collect();

    let n = run.with_sc.replications.len();
    // successes per hypothesis: near rho lower, near R higher, far rho higher, far R lower
    let mut wins = [0usize; 4];
    for (a, b) in run.with_sc.replications.iter().zip(&run.macro_only.replications) {
        let (wa, wb) = (&a.windows, &b.windows);
        let d = |pick: &[usize], f: fn(&WindowRow) -> Option<f64>| {
            Some(window_mean(wa, pick, f)? - window_mean(wb, pick, f)?)
        };
        let checks = [
            d(&near, |w| Some(w.rho_bar)).is_some_and(|x| x < 0.0),
            d(&near, |w| w.throughput).is_some_and(|x| x > 0.0),
            d(&far, |w| Some(w.rho_bar)).is_some_and(|x| x > 0.0),
            d(&far, |w| w.throughput).is_some_and(|x| x < 0.0),
        ];
        for (w, c) in wins.iter_mut().zip(checks) {
            *w += c as usize;
        }
    }
    let p: Vec<f64> = wins.iter().map(|w| sign_test_p(*w, n)).collect();
    let signs_ok = n >= 10 && p.iter().all(|x| *x < SIGN_ALPHA);
    report(
        8,
        "load and throughput dynamics vs macro-only",
        periodic && signs_ok,
        &format!(
            "autocorrelation peaks rho_bar {lag_rho:?} s, R {lag_r:?} s (period {period}, step {step}); \
             {n} replications, {} near / {} far windows (far >= {far_km:.2} Km); \
             sign-test p: near rho {:.4}, near R {:.4}, far rho {:.4}, far R {:.4} (alpha {SIGN_ALPHA})",
            near.len(),
            far.len(),
            p[0],
            p[1],
            p[2],
            p[3]
        ),
    );
}

/// Double-double accumulation of the I0 power series.
fn i0_reference(x: f64) -> f64 {
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }
    let q = 0.25 * x * x;
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    let mut term = 1.0f64;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        let (s, e) = two_sum(hi, term);
        hi = s;
        lo += e;
        if term < 1e-25 * hi {
            break;
        }
    }
    hi + lo
}

#[test]
fn criterion_09_numerical_kernels() {
    let frozen_i0 = [
        (0.5, 1.0634833707413235193),
        (1.0, 1.2660658777520083356),
        (2.5, 3.2898391440501230357),
        (3.75, 9.1189458608445666907),
        (5.0, 27.239871823604446895),
        (7.5, 268.16131151518936488),
        (10.0, 2815.7166284662544715),
        (15.0, 339649.37329791387952),
        (20.0, 43558282.559553533272),
    ];
    let mut i0_err: f64 = 0.0;
    for (x, v) in frozen_i0 {
        i0_err = i0_err.max((bessel_i0(x) / v - 1.0).abs());
    }
    for i in 0..=2000 {
        let x = 20.0 * i as f64 / 2000.0;
        i0_err = i0_err.max((bessel_i0(x) / i0_reference(x) - 1.0).abs());
    }
    let frozen_lg = [
        (0.5, 0.5723649429247000870717),
        (0.75, 0.2032809514312953714814),
        (1.5, -0.1207822376352452223455),
        (2.5, 0.2846828704729191596325),
        (3.3, 0.9870985778947344040573),
        (7.25, 7.052185450738539444926),
        (10.5, 13.94062521940376363316),
        (33.3, 82.60372358165494300782),
        (57.0, 172.3527971391628015638),
        (101.7, 366.9689210031550786916),
        (150.25, 601.2615040324997259805),
        (200.0, 857.9336698258574368183),
    ];
    let lg_err = frozen_lg
        .iter()
        .map(|(x, v)| ((ln_gamma(*x) - v) / v).abs())
        .fold(0.0, f64::max);
    let model = RadioModel::new(RadioParams::reference(), CellLayout::new(1.0, 30).unwrap()).unwrap();
    let radius = model.layout().radius();
    let mut inv_err: f64 = 0.0;
    for i in 0..=500 {
        let r = radius * i as f64 / 500.0;
        let g = model.interference_factor(r).unwrap();
        inv_err = inv_err.max((model.inverse_interference_factor(g).unwrap() - r).abs());
    }
    report(
        9,
        "numerical kernels",
        i0_err < I0_REL_TOL && lg_err < LNGAMMA_REL_TOL && inv_err < GINV_ABS_TOL,
        &format!(
            "I0 rel err {i0_err:.2e} (tol {I0_REL_TOL:e}), ln Gamma rel err {lg_err:.2e} (tol {LNGAMMA_REL_TOL:e}), \
             g inverse round trip {inv_err:.2e} Km (tol {GINV_ABS_TOL:e})"
        ),
    );
}

#[test]
fn criterion_10_reproducible_dynamics() {
    let cfg = ScenarioConfig::bundled();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let da = cmd_dynamics(&cfg, a.path()).unwrap();
    let db = cmd_dynamics(&cfg, b.path()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&da)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let identical = !names.is_empty()
        && names
            .iter()
            .all(|n| std::fs::read(da.join(n)).unwrap() == std::fs::read(db.join(n)).unwrap());
    report(
        10,
        "byte-identical dynamics output",
        identical,
        &format!("{} files compared: {}", names.len(), names.join(", ")),
    );
}
