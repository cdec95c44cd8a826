//! Gaussian hotspot measure, sampling, and Monte Carlo integration over the
//! covered region S*.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellLayout, Point, PolarPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotspotSpec {
    /// Center radius (Km).
    pub r_h: f64,
    /// Center azimuth (rad).
    pub theta_h: f64,
    /// Standard deviation (Km).
    pub a: f64,
}

impl HotspotSpec {
    pub fn new(r_h: f64, theta_h: f64, a: f64) -> Result<Self> {
        let spec = HotspotSpec { r_h, theta_h, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "hotspot standard deviation must be positive, got {}",
                self.a
            )));
        }
        if !(self.r_h >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "hotspot radius must be >= 0, got {}",
                self.r_h
            )));
        }
        Ok(())
    }

    /// Checks that the center lies inside the macro disk.
    pub fn validate_against(&self, layout: &CellLayout) -> Result<()> {
        self.validate()?;
        if self.r_h >= layout.radius() {
            return Err(Error::InvalidArgument(format!(
                "hotspot center r = {} is outside the macro disk {}",
                self.r_h,
                layout.radius()
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        Point::from_polar(self.r_h, self.theta_h)
    }
}

/// S*: the macro disk united with the small cell's candidacy disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRegion {
    pub macro_radius: f64,
    pub small_center: PolarPoint,
    pub small_reach: f64,
    small_xy: Point,
}

impl CoverageRegion {
    pub fn new(macro_radius: f64, small_center: PolarPoint, small_reach: f64) -> Result<Self> {
        if !(small_reach >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "small_reach must be >= 0, got {small_reach}"
            )));
        }
        if !(macro_radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "macro radius must be positive, got {macro_radius}"
            )));
        }
        Ok(CoverageRegion {
            macro_radius,
            small_center,
            small_reach,
            small_xy: small_center.to_cartesian(),
        })
    }

    /// The macro disk alone.
    pub fn macro_only(macro_radius: f64) -> Result<Self> {
        CoverageRegion::new(macro_radius, PolarPoint::new(0.0, 0.0), 0.0)
    }

    pub fn small_xy(&self) -> Point {
        self.small_xy
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.norm_sq() <= self.macro_radius * self.macro_radius
            || (self.small_reach > 0.0 && p.dist_sq(&self.small_xy) <= self.small_reach * self.small_reach)
    }
}

/// Gaussian density of the hotspot at `m` (1/Km²).
pub fn density(m: PolarPoint, spec: &HotspotSpec) -> f64 {
    density_xy(&m.to_cartesian(), spec)
}

pub fn density_xy(m: &Point, spec: &HotspotSpec) -> f64 {
    let a2 = spec.a * spec.a;
    (-m.dist_sq(&spec.center()) / (2.0 * a2)).exp() / (2.0 * PI * a2)
}

/// `n` i.i.d. draws from the hotspot Gaussian in Cartesian form.
pub fn sample_xy(spec: &HotspotSpec, n: usize, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.center();
    Ok((0..n)
        .map(|_| {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            c.offset(spec.a * dx, spec.a * dy)
        })
        .collect())
}

pub fn sample(spec: &HotspotSpec, n: usize, seed: u64) -> Result<Vec<PolarPoint>> {
    Ok(sample_xy(spec, n, seed)?.iter().map(Point::to_polar).collect())
}

/// A Monte Carlo mass estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    /// Estimated mass (fraction of the whole-plane measure).
    pub value: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub samples: usize,
}

/// Common-random-number sample set reused across time steps.
#[derive(Debug, Clone)]
pub struct SampleSet {
    points: Vec<Point>,
    seed: u64,
}

impl SampleSet {
    pub fn draw(spec: &HotspotSpec, n: usize, seed: u64) -> Result<Self> {
        Ok(SampleSet {
            points: sample_xy(spec, n, seed)?,
            seed,
        })
    }

    pub fn from_points(points: Vec<Point>, seed: u64) -> Self {
        SampleSet { points, seed }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `∫_{S*} I(f) dm` over this sample set.
    pub fn integrate<F: Fn(&Point) -> bool>(&self, f: F, region: &CoverageRegion) -> Result<MassEstimate> {
        let mut accepted = 0usize;
        let mut hits = 0usize;
        for p in &self.points {
            if region.contains(p) {
                accepted += 1;
                if f(p) {
                    hits += 1;
                }
            }
        }
        if accepted == 0 {
            return Err(Error::DegenerateRegion {
                samples: self.points.len(),
            });
        }
        let n = self.points.len() as f64;
        let p = hits as f64 / n;
        Ok(MassEstimate {
            value: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            accepted,
            samples: self.points.len(),
        })
    }

    /// Mass of S* itself, `m(S*)`.
    pub fn region_mass(&self, region: &CoverageRegion) -> Result<MassEstimate> {
        self.integrate(|_| true, region)
    }
}

/// Monte Carlo estimate of `∫_{S*} I(f) dm` with a fresh sample set.
pub fn integrate_indicator<F: Fn(PolarPoint) -> bool>(
    f: F,
    spec: &HotspotSpec,
    region: &CoverageRegion,
    n: usize,
    seed: u64,
) -> Result<MassEstimate> {
    SampleSet::draw(spec, n, seed)?.integrate(|p| f(p.to_polar()), region)
}
