//! Link budget, the macro-network interference factor `g(r)`, SINR fields of
//! the macro and small cell, and the rate map.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellLayout, Point, PolarPoint};
use crate::special::{bisect_increasing, hurwitz_zeta, zeta};

/// Which closed form of the lattice constant omega(b) to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OmegaForm {
    /// `3^{-b} zeta(b) (zeta(b,1/3) - zeta(b,2/3))`
    #[default]
    Product,
    /// `3^{-b} (zeta(b) + zeta(b,1/3) - zeta(b,2/3))`
    Sum,
}

fn omega_uncached(b: f64, form: OmegaForm) -> Result<f64> {
    let z = zeta(b)?;
    let h = hurwitz_zeta(b, 1.0 / 3.0)? - hurwitz_zeta(b, 2.0 / 3.0)?;
    let scale = 3f64.powf(-b);
    Ok(match form {
        OmegaForm::Product => scale * z * h,
        OmegaForm::Sum => scale * (z + h),
    })
}

/// Lattice constant of the hexagonal interference sum, memoized per `(b, form)`.
pub fn omega(b: f64, form: OmegaForm) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, OmegaForm), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (b.to_bits(), form);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = omega_uncached(b, form)?;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// Physical link budget in dB units, folded into [`RadioParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub macro_tx_dbm: f64,
    pub macro_antenna_gain_dbi: f64,
    pub macro_pl_intercept_db: f64,
    pub macro_pl_slope_db: f64,
    pub small_tx_dbm: f64,
    pub small_antenna_gain_dbi: f64,
    pub small_pl_intercept_db: f64,
    pub small_pl_slope_db: f64,
    pub ue_antenna_gain_dbi: f64,
    pub body_loss_db: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_mhz: f64,
    pub alpha: f64,
    pub k1: f64,
    pub k2: f64,
    pub eta0_mbps: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            macro_tx_dbm: 46.0,
            macro_antenna_gain_dbi: 18.0,
            macro_pl_intercept_db: 151.0,
            macro_pl_slope_db: 37.6,
            small_tx_dbm: 30.0,
            small_antenna_gain_dbi: 6.0,
            small_pl_intercept_db: 148.0,
            small_pl_slope_db: 36.7,
            ue_antenna_gain_dbi: 0.0,
            body_loss_db: 2.0,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 0.0,
            bandwidth_mhz: 20.0,
            alpha: 1.0,
            k1: 0.85,
            k2: 1.9,
            eta0_mbps: 98.0,
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Radio parameters in normalized linear units.
///
/// `p_macro` is the received macro power at 1 Km (mW) with antenna gains,
/// losses and the pathloss intercept folded in; the small cell's effective
/// power is `kappa * p_macro`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub p_macro: f64,
    pub kappa: f64,
    pub b_macro: f64,
    pub b_small: f64,
    pub pl_const_macro: f64,
    pub pl_const_small: f64,
    pub noise: f64,
    pub alpha: f64,
    pub bandwidth_mhz: f64,
    pub k1: f64,
    pub k2: f64,
    pub eta0: f64,
    pub omega_form: OmegaForm,
}

impl RadioParams {
    pub fn from_link_budget(lb: &LinkBudget) -> Result<Self> {
        let common = lb.ue_antenna_gain_dbi - lb.body_loss_db;
        let macro_db = lb.macro_tx_dbm + lb.macro_antenna_gain_dbi + common - lb.macro_pl_intercept_db;
        let small_db = lb.small_tx_dbm + lb.small_antenna_gain_dbi + common - lb.small_pl_intercept_db;
        let noise_dbm =
            lb.noise_density_dbm_hz + 10.0 * (lb.bandwidth_mhz * 1e6).log10() + lb.noise_figure_db;
        let params = RadioParams {
            p_macro: db_to_linear(macro_db),
            kappa: db_to_linear(small_db - macro_db),
            b_macro: lb.macro_pl_slope_db / 20.0,
            b_small: lb.small_pl_slope_db / 20.0,
            pl_const_macro: lb.macro_pl_intercept_db,
            pl_const_small: lb.small_pl_intercept_db,
            noise: db_to_linear(noise_dbm),
            alpha: lb.alpha,
            bandwidth_mhz: lb.bandwidth_mhz,
            k1: lb.k1,
            k2: lb.k2,
            eta0: lb.eta0_mbps,
            omega_form: OmegaForm::Product,
        };
        params.validate()?;
        Ok(params)
    }

    /// Default link budget of the reference deployment.
    pub fn reference() -> Self {
        RadioParams::from_link_budget(&LinkBudget::default()).expect("reference budget is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.kappa) {
            problems.push(format!("kappa must lie in [0,1], got {}", self.kappa));
        }
        if !(self.b_macro > 1.0) {
            problems.push(format!("b_macro must exceed 1, got {}", self.b_macro));
        }
        if !(self.b_small > 0.0) {
            problems.push(format!("b_small must be positive, got {}", self.b_small));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            problems.push(format!("alpha must lie in [0,1], got {}", self.alpha));
        }
        if !(self.eta0 > 0.0) {
            problems.push(format!("eta0 must be positive, got {}", self.eta0));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            problems.push("K1 and K2 must be positive".to_string());
        }
        if !(self.bandwidth_mhz > 0.0) {
            problems.push("bandwidth must be positive".to_string());
        }
        if !(self.p_macro > 0.0) || !(self.noise >= 0.0) {
            problems.push("powers must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    pub fn noise_ratio(&self) -> f64 {
        self.noise / self.p_macro
    }
}

/// Which base station serves a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Serving {
    Macro,
    Small,
}

/// An SINR value together with its serving cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub gamma: f64,
    pub serving: Serving,
}

/// Modified Shannon rate map `min(K1 W ln(1 + K2 gamma), eta0)` in Mbps.
pub fn shannon_rate(gamma: f64, params: &RadioParams) -> Result<f64> {
    if gamma < 0.0 || gamma.is_nan() {
        return Err(Error::InvalidArgument(format!("SINR must be >= 0, got {gamma}")));
    }
    if gamma.is_infinite() {
        return Ok(params.eta0);
    }
    Ok((params.k1 * params.bandwidth_mhz * (params.k2 * gamma).ln_1p()).min(params.eta0))
}

/// `psi(l) = K2 / (exp(l / (K1 W)) - 1)`: the largest inverse SINR still
/// achieving throughput `l`.
pub fn psi(level: f64, params: &RadioParams) -> Result<f64> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "throughput level must be positive, got {level}"
        )));
    }
    Ok(params.k2 / (level / (params.k1 * params.bandwidth_mhz)).exp_m1())
}

/// Radio parameters bound to a layout, with the lattice constant resolved.
#[derive(Debug, Clone)]
pub struct RadioModel {
    params: RadioParams,
    layout: CellLayout,
    omega: f64,
    g_at_edge: f64,
}

impl RadioModel {
    pub fn new(params: RadioParams, layout: CellLayout) -> Result<Self> {
        params.validate()?;
        let omega = omega(params.b_macro, params.omega_form)?;
        let mut model = RadioModel {
            params,
            layout,
            omega,
            g_at_edge: 0.0,
        };
        model.g_at_edge = model.g_unchecked(layout.radius());
        Ok(model)
    }

    pub fn params(&self) -> &RadioParams {
        &self.params
    }

    pub fn layout(&self) -> &CellLayout {
        &self.layout
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `g(R)`, the interference factor at the macro edge.
    pub fn g_at_edge(&self) -> f64 {
        self.g_at_edge
    }

    /// Interference-plus-noise power normalized by `P`, i.e. `g(r) / r^{2b}`.
    /// Finite at `r = 0`; infinite from the first interfering site outward.
    pub fn interference_density(&self, r: f64) -> f64 {
        let delta = self.layout.delta();
        if r >= delta {
            return f64::INFINITY;
        }
        let b = self.params.b_macro;
        let x2 = (r / delta).powi(2);
        let bracket = (1.0 + (1.0 - b).powi(2) * x2) / (1.0 - x2).powf(2.0 * b - 1.0) + self.omega - 1.0;
        6.0 * self.params.alpha * delta.powf(-2.0 * b) * bracket + self.params.noise_ratio()
    }

    /// `g(r)` without the `[0, R]` domain check; infinite for `r >= delta`.
    pub fn g_unchecked(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        self.interference_density(r) * r.powf(2.0 * self.params.b_macro)
    }

    /// Interference factor `g(r)` of a macro-only network on `[0, R]`.
    pub fn interference_factor(&self, r: f64) -> Result<f64> {
        let radius = self.layout.radius();
        if !(0.0..=radius).contains(&r) {
            return Err(Error::OutOfDomain(format!(
                "g(r) is defined on [0, {radius}], got r = {r}"
            )));
        }
        Ok(self.g_unchecked(r))
    }

    /// Direct lattice sum over `interferer_positions`, the independent check
    /// of the closed form.
    pub fn interference_factor_oracle(&self, point: PolarPoint) -> Result<f64> {
        self.interference_factor_oracle_at(point, &self.layout.interferer_positions())
    }

    /// [`Self::interference_factor_oracle`] over a precomputed site list.
    pub fn interference_factor_oracle_at(&self, point: PolarPoint, sites: &[Point]) -> Result<f64> {
        let r = point.r();
        if r == 0.0 {
            return Err(Error::OutOfDomain(
                "oracle undefined at r = 0: serving power is infinite".into(),
            ));
        }
        if r > self.layout.radius() {
            return Err(Error::OutOfDomain(format!(
                "oracle point outside macro disk: r = {r}"
            )));
        }
        let m = point.to_cartesian();
        let b = self.params.b_macro;
        let sum: f64 = sites.iter().map(|s| m.dist_sq(s).powf(-b)).sum();
        Ok((self.params.alpha * sum + self.params.noise_ratio()) * r.powf(2.0 * b))
    }

    /// `g^{-1}(y)`, saturating at R when `y >= g(R)`.
    pub fn inverse_interference_factor(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inverse interference factor needs y >= 0, got {y}"
            )));
        }
        let radius = self.layout.radius();
        if y >= self.g_at_edge {
            return Ok(radius);
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        Ok(bisect_increasing(|r| self.g_unchecked(r), y, 0.0, radius, 1e-9))
    }

    /// True when the small cell's received power strictly exceeds the
    /// central macro's; ties stay with the macro cell.
    pub fn served_by_small(&self, m: &Point, small: &Point) -> bool {
        let r2 = m.norm_sq();
        let d2 = m.dist_sq(small);
        // kappa r^{2b} > d^{2 b_small}
        self.params.kappa * r2.powf(self.params.b_macro) > d2.powf(self.params.b_small)
    }

    /// Inverse macro SINR `g(r) + kappa d^{-2 b_small} r^{2b}` at any point,
    /// with `g` extended past R.
    pub fn inverse_sinr_macro(&self, m: &Point, small: &Point, small_active: bool) -> f64 {
        let r = m.norm();
        let g = self.g_unchecked(r);
        if !small_active || self.params.kappa == 0.0 {
            return g;
        }
        let d2 = m.dist_sq(small);
        if d2 == 0.0 {
            return f64::INFINITY;
        }
        g + self.params.kappa * m.norm_sq().powf(self.params.b_macro) / d2.powf(self.params.b_small)
    }

    /// Inverse small-cell SINR; the central macro term is dropped when
    /// `include_central_macro` is false.
    pub fn inverse_sinr_small(&self, m: &Point, small: &Point, include_central_macro: bool) -> f64 {
        let d2 = m.dist_sq(small);
        if d2 == 0.0 {
            return 0.0;
        }
        if self.params.kappa == 0.0 {
            return f64::INFINITY;
        }
        let r = m.norm();
        let mut interference = self.interference_density(r);
        if include_central_macro {
            interference += r.powf(-2.0 * self.params.b_macro);
        }
        interference * d2.powf(self.params.b_small) / self.params.kappa
    }

    fn check_in_disk(&self, m: &PolarPoint) -> Result<()> {
        if m.r() > self.layout.radius() {
            return Err(Error::OutOfDomain(format!(
                "user at r = {} outside macro disk {}",
                m.r(),
                self.layout.radius()
            )));
        }
        Ok(())
    }

    /// Macro SINR with the small cell transmitting.
    pub fn sinr_macro(&self, m: PolarPoint, small: PolarPoint) -> Result<f64> {
        self.check_in_disk(&m)?;
        let inv = self.inverse_sinr_macro(&m.to_cartesian(), &small.to_cartesian(), true);
        Ok(invert(inv))
    }

    /// Small-cell SINR, optionally without the central macro's interference.
    pub fn sinr_small(&self, m: PolarPoint, small: PolarPoint, include_central_macro: bool) -> Result<f64> {
        let inv = self.inverse_sinr_small(&m.to_cartesian(), &small.to_cartesian(), include_central_macro);
        Ok(invert(inv))
    }

    /// SINR from the cell the user associates with.
    pub fn sinr(&self, m: PolarPoint, small: PolarPoint) -> Result<SinrSample> {
        let mc = m.to_cartesian();
        let sc = small.to_cartesian();
        if self.served_by_small(&mc, &sc) {
            Ok(SinrSample {
                gamma: invert(self.inverse_sinr_small(&mc, &sc, true)),
                serving: Serving::Small,
            })
        } else {
            Ok(SinrSample {
                gamma: self.sinr_macro(m, small)?,
                serving: Serving::Macro,
            })
        }
    }
}

fn invert(inv: f64) -> f64 {
    if inv == 0.0 {
        f64::INFINITY
    } else if inv.is_infinite() {
        0.0
    } else {
        1.0 / inv
    }
}
