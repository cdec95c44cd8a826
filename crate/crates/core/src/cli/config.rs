use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{DistributionForm, MembershipForm};
use crate::error::{Error, Result};
use crate::flowsim::TrafficSpec;
use crate::geometry::CellLayout;
use crate::hotspot::HotspotSpec;
use crate::mobility::{Mobility, MobilityPolicy, ManhattanGrid};
use crate::radio::{LinkBudget, OmegaForm, RadioModel, RadioParams};

pub const BUNDLED_SCENARIO: &str = include_str!("../../scenarios/paper_table1.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    /// Inter-site distance (Km).
    pub delta: f64,
    /// Tiers of interferers used by the lattice oracle.
    pub rings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub omega_form: OmegaForm,
    #[serde(default)]
    pub membership: MembershipForm,
    #[serde(default)]
    pub distribution: DistributionForm,
    /// Override of the small-cell power ratio; `None` keeps the link budget's.
    #[serde(default)]
    pub kappa: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            omega_form: OmegaForm::Product,
            membership: MembershipForm::Decoupled,
            distribution: DistributionForm::SplitMarginal,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallCellConfig {
    /// Radius of the small cell's candidacy disk (Km).
    pub reach: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityConfig {
    /// Street spacing of the Manhattan grid (Km).
    pub block: f64,
    /// Half-width of the street grid (Km).
    pub extent: f64,
    /// Expected route period (s); checked against route length and speed
    /// when the speed is constant.
    #[serde(default)]
    pub period_s: Option<f64>,
    pub policy: MobilityPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassesConfig {
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Simulated time T (s).
    pub horizon_s: f64,
    /// Mobility step (s).
    pub dt_s: f64,
    /// Spacing of CCDF snapshots (s).
    pub snapshot_interval_s: f64,
    /// Width of the observation windows of the time series (s).
    pub window_s: f64,
    pub seed: u64,
    pub replications: usize,
    /// Monte Carlo samples of the hotspot measure per snapshot.
    pub samples: usize,
    /// Truncation of the stationary distributions.
    pub n_max: usize,
    /// Number of CCDF levels, log-spaced up to the peak rate.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Per-flow rate of class changes caused by user motion (1/s).
    #[serde(default)]
    pub user_mobility: f64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

fn default_levels() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub layout: LayoutConfig,
    #[serde(default)]
    pub radio: LinkBudget,
    #[serde(default)]
    pub model: ModelConfig,
    pub hotspot: HotspotSpec,
    pub small_cell: SmallCellConfig,
    pub mobility: MobilityConfig,
    pub traffic: TrafficSpec,
    pub classes: ClassesConfig,
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn radio_params(&self) -> Result<RadioParams> {
        let mut p = RadioParams::from_link_budget(&self.radio)?;
        p.omega_form = self.model.omega_form;
        if let Some(k) = self.model.kappa {
            p.kappa = k;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn layout(&self) -> Result<CellLayout> {
        CellLayout::new(self.layout.delta, self.layout.rings)
    }

    pub fn radio_model(&self) -> Result<RadioModel> {
        RadioModel::new(self.radio_params()?, self.layout()?)
    }

    pub fn grid(&self) -> Result<ManhattanGrid> {
        ManhattanGrid::new(self.mobility.block, self.mobility.extent)
    }

    /// Revalidates every section and reports all failures at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let mut check = |what: &str, r: Result<()>| {
            if let Err(e) = r {
                problems.push(format!("{what}: {e}"));
            }
        };
        let layout = self.layout();
        check("layout", layout.as_ref().map(|_| ()).map_err(clone_err));
        check("radio", self.radio_params().map(|_| ()));
        match &layout {
            Ok(l) => check("hotspot", self.hotspot.validate_against(l)),
            Err(_) => check("hotspot", self.hotspot.validate()),
        }
        if !(self.small_cell.reach >= 0.0) {
            problems_push(&mut check, "small_cell", format!("reach must be >= 0, got {}", self.small_cell.reach));
        }
        let grid = self.grid();
        check("mobility", grid.as_ref().map(|_| ()).map_err(clone_err));
        if let Ok(g) = grid {
            match Mobility::new(self.mobility.policy.clone(), g) {
                Ok(m) => check("mobility", self.check_period(&m)),
                Err(e) => check("mobility", Err(e)),
            }
        }
        check("traffic", self.traffic.validate());
        if self.classes.k == 0 || self.classes.l == 0 {
            problems_push(&mut check, "classes", "K and L must be >= 1".into());
        }
        let s = &self.sim;
        let mut sim = Vec::new();
        if !(s.horizon_s > 0.0) {
            sim.push(format!("horizon_s must be positive, got {}", s.horizon_s));
        }
        if !(s.dt_s > 0.0) {
            sim.push(format!("dt_s must be positive, got {}", s.dt_s));
        }
        if !(s.snapshot_interval_s >= s.dt_s) {
            sim.push("snapshot_interval_s must be >= dt_s".into());
        }
        if !(s.window_s > 0.0 && s.window_s <= s.horizon_s) {
            sim.push("window_s must lie in (0, horizon_s]".into());
        }
        if s.replications == 0 {
            sim.push("replications must be >= 1".into());
        }
        if s.samples < 100 {
            sim.push(format!("samples must be >= 100, got {}", s.samples));
        }
        if s.n_max == 0 {
            sim.push("n_max must be >= 1".into());
        }
        if s.levels < 2 {
            sim.push("levels must be >= 2".into());
        }
        if !(s.user_mobility >= 0.0) {
            sim.push("user_mobility must be >= 0".into());
        }
        for m in sim {
            problems_push(&mut check, "sim", m);
        }
        drop(check);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    fn check_period(&self, m: &Mobility) -> Result<()> {
        let (Some(period), Some(len)) = (self.mobility.period_s, m.route_length()) else {
            return Ok(());
        };
        let p = &self.mobility.policy;
        let constant = matches!(p.beta_law, crate::mobility::BetaLaw::Constant { value } if value == 0.0)
            && p.initial_speed > 0.0
            && p.stops.is_empty();
        if constant {
            let actual = len / (p.initial_speed / 3600.0);
            if (actual - period).abs() > 1e-6 * period {
                return Err(Error::InvalidArgument(format!(
                    "route of {len} Km at {} Km/h has period {actual} s, not {period} s",
                    p.initial_speed
                )));
            }
        }
        Ok(())
    }
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidArgument(e.to_string())
}

fn problems_push<F: FnMut(&str, Result<()>)>(check: &mut F, what: &str, msg: String) {
    check(what, Err(Error::InvalidArgument(msg)));
}
