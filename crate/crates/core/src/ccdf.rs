//! Instantaneous throughput CCDFs of the two cells, the macro-only closed
//! form, and extraction of flow classes.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PolarPoint};
use crate::hotspot::{CoverageRegion, HotspotSpec, MassEstimate, SampleSet};
use crate::radio::{psi, shannon_rate, RadioModel};
use crate::special::{bessel_i0_scaled, integrate_adaptive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Macro,
    Small,
    MacroOnly,
    /// Both cells together, conditioned on coverage.
    System,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Macro => "macro",
            CellKind::Small => "small",
            CellKind::MacroOnly => "macro_only",
            CellKind::System => "system",
        })
    }
}

/// Ascending, positive throughput levels (Mbps).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGrid {
    levels: Vec<f64>,
}

impl LevelGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("level grid is empty".into()));
        }
        if levels[0] <= 0.0 || levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "levels must be positive and strictly ascending".into(),
            ));
        }
        Ok(LevelGrid { levels })
    }

    /// `n` log-spaced levels from `lo` to `hi`, both included.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "log grid needs 0 < lo < hi and n >= 2, got lo={lo} hi={hi} n={n}"
            )));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let mut levels: Vec<f64> = (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect();
        levels[0] = lo;
        levels[n - 1] = hi;
        LevelGrid::new(levels)
    }

    /// 200 levels from 0.05 Mbps to `eta0`.
    pub fn standard(eta0: f64) -> Result<Self> {
        LevelGrid::log_spaced(0.05, eta0, 200)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// `P(throughput >= l)` on a level grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    pub t: f64,
    pub cell: CellKind,
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub eta0: f64,
    /// Coverage mass S_t (or S̃_t) normalizing the curve.
    pub mass: f64,
}

impl CcdfCurve {
    /// Step evaluation: exact at grid levels, 1 at `0+`, 0 above `eta0`.
    pub fn value_at(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 1.0;
        }
        if l > self.eta0 {
            return 0.0;
        }
        let i = self.levels.partition_point(|x| *x < l);
        if i == self.levels.len() {
            0.0
        } else {
            self.values[i]
        }
    }

    /// Piecewise-linear survival through `(0, 1)` and the grid points.
    pub fn survival(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 1.0;
        }
        if l > self.eta0 {
            return 0.0;
        }
        let i = self.levels.partition_point(|x| *x < l);
        if i == self.levels.len() {
            return 0.0;
        }
        let (l0, v0) = if i == 0 { (0.0, 1.0) } else { (self.levels[i - 1], self.values[i - 1]) };
        let (l1, v1) = (self.levels[i], self.values[i]);
        v0 + (v1 - v0) * (l - l0) / (l1 - l0)
    }

    /// Smallest level at which [`Self::survival`] drops to `target`.
    pub fn survival_crossing(&self, target: f64) -> f64 {
        let mut prev = (0.0, 1.0);
        for (&l, &v) in self.levels.iter().zip(&self.values) {
            if l > self.eta0 {
                break;
            }
            if v <= target {
                let (l0, v0) = prev;
                if v0 == v {
                    return l0;
                }
                return l0 + (l - l0) * (v0 - target) / (v0 - v);
            }
            prev = (l, v);
        }
        prev.0
    }

    /// Rate distribution implied by the curve, as `(rate, mass)` atoms in
    /// ascending rate order.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms = Vec::with_capacity(self.levels.len() + 1);
        let mut prev_l = 0.0;
        let mut prev_v = 1.0;
        for (&l, &v) in self.levels.iter().zip(&self.values) {
            if l > self.eta0 {
                break;
            }
            let m = prev_v - v;
            let loc = if atoms.is_empty() && prev_l == 0.0 { 0.5 * l } else { 0.5 * (prev_l + l) };
            if m > 0.0 {
                atoms.push((loc, m));
            }
            prev_l = l;
            prev_v = v;
        }
        if prev_v > 0.0 {
            atoms.push((self.eta0, prev_v));
        }
        atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms().iter().map(|(r, m)| r * m).sum()
    }

    /// Checks the structural invariants: values in [0, 1], nonincreasing,
    /// and zero at levels above `eta0`.
    pub fn check_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("{} curve at t={}: {msg}", self.cell, self.t)));
        let mut prev = 1.0;
        for (&l, &v) in self.levels.iter().zip(&self.values) {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("value {v} outside [0,1] at l={l}"));
            }
            if v > prev {
                return bad(format!("increase at l={l}"));
            }
            if l > self.eta0 && v != 0.0 {
                return bad(format!("nonzero value above eta0 at l={l}"));
            }
            prev = v;
        }
        if self.value_at(0.0) != 1.0 || self.value_at(self.eta0 * (1.0 + 1e-12)) != 0.0 {
            return bad("boundary values".into());
        }
        Ok(())
    }

    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> Result<()> {
        for i in 0..self.levels.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.t, self.cell, self.levels[i], self.values[i], self.stderr[i]
            )?;
        }
        Ok(())
    }
}

/// A cell's CCDF, or a marker that no sampled user associates with it.
#[derive(Debug, Clone, PartialEq)]
pub enum CellCcdf {
    Curve(CcdfCurve),
    Empty { cell: CellKind, t: f64 },
}

impl CellCcdf {
    pub fn curve(&self) -> Option<&CcdfCurve> {
        match self {
            CellCcdf::Curve(c) => Some(c),
            CellCcdf::Empty { .. } => None,
        }
    }

    pub fn mass(&self) -> f64 {
        self.curve().map_or(0.0, |c| c.mass)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellCcdf::Empty { .. })
    }
}

pub const CCDF_CSV_HEADER: &str = "t_s,cell,level_mbps,ccdf,stderr";

/// S* for a small cell at `ls`: without a transmitting small cell only the
/// macro disk remains.
pub fn coverage(model: &RadioModel, ls: PolarPoint, small_reach: f64) -> Result<CoverageRegion> {
    let reach = if model.params().kappa == 0.0 { 0.0 } else { small_reach };
    CoverageRegion::new(model.layout().radius(), ls, reach)
}

/// Hotspot samples with the per-point radio quantities that do not depend
/// on the small-cell position.
#[derive(Debug, Clone)]
pub struct PreparedSamples {
    points: Vec<Point>,
    g: Vec<f64>,
    density: Vec<f64>,
    r2b: Vec<f64>,
}

impl PreparedSamples {
    pub fn new(samples: &SampleSet, model: &RadioModel) -> Self {
        let b = model.params().b_macro;
        let points = samples.points().to_vec();
        let mut g = Vec::with_capacity(points.len());
        let mut density = Vec::with_capacity(points.len());
        let mut r2b = Vec::with_capacity(points.len());
        for p in &points {
            let r = p.norm();
            g.push(model.g_unchecked(r));
            density.push(model.interference_density(r));
            r2b.push(p.norm_sq().powf(b));
        }
        PreparedSamples { points, g, density, r2b }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

/// The four curves of one time step plus the coverage masses.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    /// With the partner cell transmitting.
    pub macro_ccdf: CellCcdf,
    pub small_ccdf: CellCcdf,
    /// Partner cell silent.
    pub macro_ccdf_phase0: CellCcdf,
    pub small_ccdf_phase0: CellCcdf,
    pub s_macro: MassEstimate,
    pub s_small: MassEstimate,
    pub region_mass: f64,
}

struct Histogram {
    counts: Vec<usize>,
    total: usize,
}

impl Histogram {
    fn new(levels: usize) -> Self {
        Histogram {
            counts: vec![0; levels + 1],
            total: 0,
        }
    }

    /// Records a user whose inverse SINR is `x`; `psi_desc` is `psi` at
    /// each level, descending.
    fn add(&mut self, x: f64, psi_desc: &[f64]) {
        let c = psi_desc.partition_point(|p| *p >= x);
        self.counts[c] += 1;
        self.total += 1;
    }

    fn into_curve(self, t: f64, cell: CellKind, levels: &[f64], eta0: f64, mass: f64) -> CellCcdf {
        if self.total == 0 {
            return CellCcdf::Empty { cell, t };
        }
        let n = self.total as f64;
        let mut values = vec![0.0; levels.len()];
        let mut stderr = vec![0.0; levels.len()];
        // counts[c]: users achieving exactly the first c levels
        let mut above = self.total;
        for i in 0..levels.len() {
            above -= self.counts[i];
            if levels[i] <= eta0 {
                let p = above as f64 / n;
                values[i] = p;
                stderr[i] = (p * (1.0 - p) / n).sqrt();
            }
        }
        CellCcdf::Curve(CcdfCurve {
            t,
            cell,
            levels: levels.to_vec(),
            values,
            stderr,
            eta0,
            mass,
        })
    }
}

fn psi_table(levels: &LevelGrid, model: &RadioModel) -> Result<Vec<f64>> {
    let eta0 = model.params().eta0;
    levels
        .levels()
        .iter()
        .map(|&l| if l <= eta0 { psi(l, model.params()) } else { Ok(-1.0) })
        .collect()
}

/// All four CCDFs at one small-cell position, from a single pass over the
/// prepared samples.
pub fn snapshot(
    t: f64,
    ls: PolarPoint,
    levels: &LevelGrid,
    model: &RadioModel,
    region: &CoverageRegion,
    samples: &PreparedSamples,
) -> Result<Snapshot> {
    let params = model.params();
    let (kappa, bs) = (params.kappa, params.b_small);
    let psi_desc = psi_table(levels, model)?;
    let nl = levels.len();
    let (mut m1, mut m0, mut s1, mut s0) = (Histogram::new(nl), Histogram::new(nl), Histogram::new(nl), Histogram::new(nl));
    let sc = ls.to_cartesian();
    for i in 0..samples.len() {
        let p = &samples.points[i];
        if !region.contains(p) {
            continue;
        }
        let d2 = p.dist_sq(&sc);
        let r2b = samples.r2b[i];
        let d2bs = d2.powf(bs);
        if kappa * r2b > d2bs {
            if d2 == 0.0 {
                s1.add(0.0, &psi_desc);
                s0.add(0.0, &psi_desc);
                continue;
            }
            let dens = samples.density[i];
            let central = if r2b == 0.0 { f64::INFINITY } else { 1.0 / r2b };
            s1.add((dens + central) * d2bs / kappa, &psi_desc);
            s0.add(dens * d2bs / kappa, &psi_desc);
        } else {
            let g = samples.g[i];
            let x1 = if kappa == 0.0 {
                g
            } else if d2 == 0.0 {
                f64::INFINITY
            } else {
                g + kappa * r2b / d2bs
            };
            m1.add(x1, &psi_desc);
            m0.add(g, &psi_desc);
        }
    }
    let n = samples.len();
    if m1.total + s1.total == 0 {
        return Err(Error::DegenerateRegion { samples: n });
    }
    let mass = |k: usize| {
        let p = k as f64 / n as f64;
        MassEstimate {
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            accepted: m1.total + s1.total,
            samples: n,
        }
    };
    let s_macro = mass(m1.total);
    let s_small = mass(s1.total);
    let eta0 = params.eta0;
    let lv = levels.levels();
    Ok(Snapshot {
        t,
        macro_ccdf: m1.into_curve(t, CellKind::Macro, lv, eta0, s_macro.value),
        small_ccdf: s1.into_curve(t, CellKind::Small, lv, eta0, s_small.value),
        macro_ccdf_phase0: m0.into_curve(t, CellKind::Macro, lv, eta0, s_macro.value),
        small_ccdf_phase0: s0.into_curve(t, CellKind::Small, lv, eta0, s_small.value),
        s_macro,
        s_small,
        region_mass: s_macro.value + s_small.value,
    })
}

/// Macro CCDF at one time step with the small cell at `ls`.
#[allow(clippy::too_many_arguments)]
pub fn macro_ccdf(
    t: f64,
    ls: PolarPoint,
    levels: &LevelGrid,
    spec: &HotspotSpec,
    model: &RadioModel,
    region: &CoverageRegion,
    n: usize,
    seed: u64,
) -> Result<CellCcdf> {
    let prepared = PreparedSamples::new(&SampleSet::draw(spec, n, seed)?, model);
    Ok(snapshot(t, ls, levels, model, region, &prepared)?.macro_ccdf)
}

/// Small-cell CCDF at one time step, optionally without the central macro's
/// interference (the phase-0 curve).
#[allow(clippy::too_many_arguments)]
pub fn small_ccdf(
    t: f64,
    ls: PolarPoint,
    levels: &LevelGrid,
    spec: &HotspotSpec,
    model: &RadioModel,
    region: &CoverageRegion,
    n: usize,
    seed: u64,
    include_central_macro: bool,
) -> Result<CellCcdf> {
    let prepared = PreparedSamples::new(&SampleSet::draw(spec, n, seed)?, model);
    let snap = snapshot(t, ls, levels, model, region, &prepared)?;
    Ok(if include_central_macro { snap.small_ccdf } else { snap.small_ccdf_phase0 })
}

/// Rate-threshold form of the macro CCDF: each sample's SINR is mapped to a
/// throughput and compared with every level directly.
pub fn macro_ccdf_rate_form(
    t: f64,
    ls: PolarPoint,
    levels: &LevelGrid,
    model: &RadioModel,
    region: &CoverageRegion,
    samples: &PreparedSamples,
) -> Result<CellCcdf> {
    let sc = ls.to_cartesian();
    let mut rates = Vec::new();
    for p in samples.points() {
        if region.contains(p) && !model.served_by_small(p, &sc) {
            let inv = model.inverse_sinr_macro(p, &sc, true);
            let gamma = if inv == 0.0 { f64::INFINITY } else { 1.0 / inv };
            rates.push(shannon_rate(gamma, model.params())?);
        }
    }
    if rates.is_empty() {
        return Ok(CellCcdf::Empty { cell: CellKind::Macro, t });
    }
    let n = rates.len() as f64;
    let eta0 = model.params().eta0;
    let mut values = Vec::with_capacity(levels.len());
    let mut stderr = Vec::with_capacity(levels.len());
    for &l in levels.levels() {
        let p = if l > eta0 { 0.0 } else { rates.iter().filter(|r| **r >= l).count() as f64 / n };
        values.push(p);
        stderr.push((p * (1.0 - p) / n).sqrt());
    }
    Ok(CellCcdf::Curve(CcdfCurve {
        t,
        cell: CellKind::Macro,
        levels: levels.levels().to_vec(),
        values,
        stderr,
        eta0,
        mass: n / samples.len() as f64,
    }))
}

/// Closed-form CCDF of a macro-only network by radial quadrature of the
/// hotspot measure over `[0, min(g^{-1}(psi(l)), R)]`.
pub fn macro_only_ccdf(levels: &LevelGrid, spec: &HotspotSpec, model: &RadioModel) -> Result<CcdfCurve> {
    spec.validate_against(model.layout())?;
    let a2 = spec.a * spec.a;
    let rh = spec.r_h;
    let integrand = move |r: f64| r * (-(r - rh) * (r - rh) / (2.0 * a2)).exp() * bessel_i0_scaled(r * rh / a2) / a2;
    let radius = model.layout().radius();
    let eta0 = model.params().eta0;

    let (norm, _) = integrate_adaptive(integrand, 0.0, radius, 1e-13);
    if !(norm > 0.0) {
        return Err(Error::DegenerateRegion { samples: 0 });
    }
    let tol = 1e-11 * norm;
    let mut values = vec![0.0; levels.len()];
    // Lambda decreases with l: accumulate the integral from the top down
    let mut acc = 0.0;
    let mut upper = 0.0;
    for i in (0..levels.len()).rev() {
        let l = levels.levels()[i];
        if l > eta0 {
            continue;
        }
        let lambda = model.inverse_interference_factor(psi(l, model.params())?)?.min(radius);
        if lambda > upper {
            acc += integrate_adaptive(integrand, upper, lambda, tol).0;
            upper = lambda;
        }
        values[i] = (acc / norm).min(1.0);
    }
    Ok(CcdfCurve {
        t: 0.0,
        cell: CellKind::MacroOnly,
        levels: levels.levels().to_vec(),
        values,
        stderr: vec![0.0; levels.len()],
        eta0,
        mass: norm,
    })
}

/// Per-class rates and intensities of both cells at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub t: f64,
    pub k: usize,
    pub l: usize,
    /// `[phase 0, phase 1]` rate per macro class (Mbps), ascending.
    pub eta_macro: Vec<[f64; 2]>,
    pub eta_small: Vec<[f64; 2]>,
    pub p_macro: Vec<f64>,
    pub p_small: Vec<f64>,
    pub lambda_macro: Vec<f64>,
    pub lambda_small: Vec<f64>,
    pub s_macro: f64,
    pub s_small: f64,
    pub macro_empty: bool,
    pub small_empty: bool,
    /// Phase-1 curves, kept for estimating class migration.
    #[serde(skip)]
    pub macro_curve: Option<CcdfCurve>,
    #[serde(skip)]
    pub small_curve: Option<CcdfCurve>,
}

impl ClassProfile {
    /// A profile with fixed per-class rates and intensities, no curves.
    pub fn fixed(
        t: f64,
        eta_macro: Vec<[f64; 2]>,
        eta_small: Vec<[f64; 2]>,
        lambda_macro: Vec<f64>,
        lambda_small: Vec<f64>,
    ) -> Self {
        let (k, l) = (eta_macro.len(), eta_small.len());
        ClassProfile {
            t,
            k,
            l,
            eta_macro,
            eta_small,
            p_macro: vec![1.0 / k.max(1) as f64; k],
            p_small: vec![1.0 / l.max(1) as f64; l],
            s_macro: lambda_macro.iter().sum(),
            s_small: lambda_small.iter().sum(),
            lambda_macro,
            lambda_small,
            macro_empty: false,
            small_empty: false,
            macro_curve: None,
            small_curve: None,
        }
    }

    /// Share of covered users associated with the small cell.
    pub fn small_share(&self) -> f64 {
        let total = self.s_macro + self.s_small;
        if total > 0.0 {
            self.s_small / total
        } else {
            0.0
        }
    }
}

/// Equal-mass binning of a curve's rate atoms. Returns the per-bin mean
/// rate and whether the curve was degenerate.
pub fn bin_rates(curve: &CcdfCurve, bins: usize) -> (Vec<f64>, bool) {
    let atoms = curve.atoms();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let degenerate = atoms.iter().any(|a| a.1 >= total * (1.0 - 1e-12));
    let width = total / bins as f64;
    let mut weighted = vec![0.0; bins];
    let mut mass = vec![0.0; bins];
    let mut bin = 0;
    let mut cum = 0.0;
    for &(loc, m) in &atoms {
        let mut left = m;
        while left > 0.0 {
            let room = if bin + 1 == bins { f64::INFINITY } else { (bin + 1) as f64 * width - cum };
            let take = left.min(room);
            weighted[bin] += take * loc;
            mass[bin] += take;
            cum += take;
            left -= take;
            if bin + 1 < bins && cum >= (bin + 1) as f64 * width * (1.0 - 1e-14) {
                bin += 1;
            }
            if take <= 0.0 && left <= total * 1e-15 {
                break;
            }
        }
    }
    let mut rates: Vec<f64> = (0..bins)
        .map(|i| if mass[i] > 0.0 { weighted[i] / mass[i] } else { f64::NAN })
        .collect();
    // a bin that received no mass (numerical crumbs) inherits its neighbour
    for i in 0..bins {
        if rates[i].is_nan() {
            rates[i] = if i > 0 { rates[i - 1] } else { atoms.first().map_or(0.0, |a| a.0) };
        }
    }
    (rates, degenerate)
}

fn cell_rates(phase1: &CellCcdf, phase0: &CellCcdf, bins: usize) -> Result<(Vec<[f64; 2]>, bool)> {
    match (phase1.curve(), phase0.curve()) {
        (Some(c1), Some(c0)) => {
            let (r1, d1) = bin_rates(c1, bins);
            let (r0, d0) = bin_rates(c0, bins);
            if d1 || d0 {
                log::warn!(
                    "{} curve at t={} is degenerate; its {bins} classes share one rate",
                    c1.cell,
                    c1.t
                );
            }
            Ok((r0.into_iter().zip(r1).map(|(a, b)| [a.max(b), b]).collect(), false))
        }
        (None, None) => Ok((vec![[0.0, 0.0]; bins], true)),
        _ => Err(Error::InvalidArgument(
            "phase-0 and phase-1 curves disagree on emptiness".into(),
        )),
    }
}

/// Splits both cells into K and L equal-mass classes and the arrival
/// intensity into per-class Poisson rates.
pub fn extract_classes(
    macro_curve: &CellCcdf,
    small_curve: &CellCcdf,
    macro_curve_phase0: &CellCcdf,
    small_curve_phase0: &CellCcdf,
    k: usize,
    l: usize,
    lambda_tot: f64,
) -> Result<ClassProfile> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidArgument("class counts K and L must be >= 1".into()));
    }
    if !(lambda_tot >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_Tot must be >= 0, got {lambda_tot}")));
    }
    let t = match macro_curve {
        CellCcdf::Curve(c) => c.t,
        CellCcdf::Empty { t, .. } => *t,
    };
    let (eta_macro, macro_empty) = cell_rates(macro_curve, macro_curve_phase0, k)?;
    let (eta_small, small_empty) = cell_rates(small_curve, small_curve_phase0, l)?;
    let s_macro = macro_curve.mass();
    let s_small = small_curve.mass();
    let total = s_macro + s_small;
    let (share_m, share_s) = if total > 0.0 { (s_macro / total, s_small / total) } else { (0.0, 0.0) };
    let p_macro = vec![1.0 / k as f64; k];
    let p_small = vec![1.0 / l as f64; l];
    Ok(ClassProfile {
        t,
        k,
        l,
        eta_macro,
        eta_small,
        lambda_macro: p_macro.iter().map(|p| lambda_tot * share_m * p).collect(),
        lambda_small: p_small.iter().map(|p| lambda_tot * share_s * p).collect(),
        p_macro,
        p_small,
        s_macro,
        s_small,
        macro_empty,
        small_empty,
        macro_curve: macro_curve.curve().cloned(),
        small_curve: small_curve.curve().cloned(),
    })
}

/// Class profile straight from a snapshot.
pub fn profile_from_snapshot(snap: &Snapshot, k: usize, l: usize, lambda_tot: f64) -> Result<ClassProfile> {
    extract_classes(
        &snap.macro_ccdf,
        &snap.small_ccdf,
        &snap.macro_ccdf_phase0,
        &snap.small_ccdf_phase0,
        k,
        l,
        lambda_tot,
    )
}
