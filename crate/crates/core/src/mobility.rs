//! Manhattan-grid kinematics of the moving small cell.
//!
//! Speeds are in Km/h and time steps in seconds, so a step moves the vehicle
//! `v * dt / 3600` Km.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PolarPoint};
use crate::hotspot::HotspotSpec;

const ON_STREET_TOL: f64 = 1e-9;
const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManhattanGrid {
    /// Street spacing (Km).
    pub block: f64,
    /// Half-width of the modeled grid (Km).
    pub extent: f64,
}

impl ManhattanGrid {
    pub fn new(block: f64, extent: f64) -> Result<Self> {
        if !(block > 0.0) || !(extent >= block) {
            return Err(Error::InvalidArgument(format!(
                "grid needs block > 0 and extent >= block, got block={block} extent={extent}"
            )));
        }
        Ok(ManhattanGrid { block, extent })
    }

    fn is_street_coord(&self, c: f64) -> bool {
        (c - (c / self.block).round() * self.block).abs() <= ON_STREET_TOL
    }

    fn within(&self, p: &Point) -> bool {
        p.x.abs() <= self.extent + ON_STREET_TOL && p.y.abs() <= self.extent + ON_STREET_TOL
    }

    pub fn on_street(&self, p: &Point) -> bool {
        self.within(p) && (self.is_street_coord(p.x) || self.is_street_coord(p.y))
    }

    pub fn is_intersection(&self, p: &Point) -> bool {
        self.within(p) && self.is_street_coord(p.x) && self.is_street_coord(p.y)
    }

    /// Snaps coordinates that are within tolerance of a street line.
    fn snap(&self, p: Point) -> Point {
        let s = |c: f64| {
            let k = (c / self.block).round() * self.block;
            if (c - k).abs() <= ON_STREET_TOL {
                k
            } else {
                c
            }
        };
        Point::new(s(p.x), s(p.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
}

impl Heading {
    pub fn unit(self) -> (f64, f64) {
        match self {
            Heading::PosX => (1.0, 0.0),
            Heading::NegX => (-1.0, 0.0),
            Heading::PosY => (0.0, 1.0),
            Heading::NegY => (0.0, -1.0),
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::PosX => Heading::PosY,
            Heading::PosY => Heading::NegX,
            Heading::NegX => Heading::NegY,
            Heading::NegY => Heading::PosX,
        }
    }

    pub fn right(self) -> Heading {
        self.left().reverse()
    }

    pub fn reverse(self) -> Heading {
        match self {
            Heading::PosX => Heading::NegX,
            Heading::NegX => Heading::PosX,
            Heading::PosY => Heading::NegY,
            Heading::NegY => Heading::PosY,
        }
    }

    fn from_delta(dx: f64, dy: f64) -> Heading {
        if dx.abs() >= dy.abs() {
            if dx >= 0.0 {
                Heading::PosX
            } else {
                Heading::NegX
            }
        } else if dy >= 0.0 {
            Heading::PosY
        } else {
            Heading::NegY
        }
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Heading::PosX => "+x",
            Heading::NegX => "-x",
            Heading::PosY => "+y",
            Heading::NegY => "-y",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub position: Point,
    /// Speed along `heading` (Km/h).
    pub velocity: f64,
    pub heading: Heading,
    /// Arc length travelled so far (Km).
    pub odometer: f64,
    /// Remaining dwell time at a stop (s).
    pub dwell_remaining: f64,
}

impl TrajectoryState {
    pub fn polar(&self) -> PolarPoint {
        self.position.to_polar()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaLaw {
    /// Independent uniform draw on [-1, 1] each step.
    Uniform,
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stop {
    pub position: Point,
    pub dwell_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityPolicy {
    pub v_max: f64,
    /// Speed increment scale per step (Km/h).
    pub dv: f64,
    pub beta_law: BetaLaw,
    /// Probabilities of (left, straight, right) at an intersection.
    pub turn_probs: [f64; 3],
    /// Closed loop of waypoints; consecutive points share a street.
    #[serde(default)]
    pub route: Option<Vec<Point>>,
    #[serde(default)]
    pub stops: Vec<Stop>,
    pub initial_speed: f64,
    /// Starting point and heading when no route is given.
    #[serde(default)]
    pub start: Point,
    #[serde(default = "default_heading")]
    pub start_heading: Heading,
}

fn default_heading() -> Heading {
    Heading::PosX
}

impl Default for MobilityPolicy {
    fn default() -> Self {
        MobilityPolicy {
            v_max: 50.0,
            dv: 3.6,
            beta_law: BetaLaw::Uniform,
            turn_probs: [0.25, 0.5, 0.25],
            route: None,
            stops: Vec::new(),
            initial_speed: 0.0,
            start: Point::ORIGIN,
            start_heading: Heading::PosX,
        }
    }
}

impl MobilityPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0) || !(self.dv >= 0.0) {
            return Err(Error::InvalidArgument("v_max must be > 0 and dv >= 0".into()));
        }
        if !(0.0..=self.v_max).contains(&self.initial_speed) {
            return Err(Error::InvalidArgument(format!(
                "initial speed {} outside [0, v_max]",
                self.initial_speed
            )));
        }
        let sum: f64 = self.turn_probs.iter().sum();
        if self.turn_probs.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "turn probabilities must be >= 0 and sum to 1, got {:?}",
                self.turn_probs
            )));
        }
        if self.stops.iter().any(|s| !(s.dwell_s >= 0.0)) {
            return Err(Error::InvalidArgument("dwell durations must be >= 0".into()));
        }
        if let BetaLaw::Constant { value } = self.beta_law {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!("beta {value} outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

/// A validated closed route with cumulative arc lengths.
#[derive(Debug, Clone)]
struct Route {
    points: Vec<Point>,
    cumulative: Vec<f64>,
    length: f64,
    /// Arc positions of stops, paired with the stop index.
    stops: Vec<(f64, usize)>,
}

impl Route {
    fn build(waypoints: &[Point], grid: &ManhattanGrid, stops: &[Stop]) -> Result<Route> {
        let mut points: Vec<Point> = Vec::with_capacity(waypoints.len());
        for w in waypoints {
            let w = grid.snap(*w);
            if !grid.on_street(&w) {
                return Err(Error::InvalidRoute(format!("waypoint ({}, {}) is off-street", w.x, w.y)));
            }
            if points.last().map_or(true, |p| p.dist(&w) > ON_STREET_TOL) {
                points.push(w);
            }
        }
        if points.len() > 1 && points[0].dist(points.last().unwrap()) <= ON_STREET_TOL {
            points.pop();
        }
        if points.len() < 2 {
            return Err(Error::InvalidRoute("route needs at least two distinct waypoints".into()));
        }
        let n = points.len();
        let mut cumulative = vec![0.0];
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            let horizontal = (a.y - b.y).abs() <= ON_STREET_TOL && grid.is_street_coord(a.y);
            let vertical = (a.x - b.x).abs() <= ON_STREET_TOL && grid.is_street_coord(a.x);
            if !horizontal && !vertical {
                return Err(Error::InvalidRoute(format!(
                    "segment ({}, {}) -> ({}, {}) does not follow a street",
                    a.x, a.y, b.x, b.y
                )));
            }
            cumulative.push(cumulative[i] + a.dist(&b));
        }
        let length = cumulative[n];
        let mut route = Route {
            points,
            cumulative,
            length,
            stops: Vec::new(),
        };
        for (k, stop) in stops.iter().enumerate() {
            let s = route.project(&stop.position).ok_or_else(|| {
                Error::InvalidRoute(format!(
                    "stop ({}, {}) is not on the route",
                    stop.position.x, stop.position.y
                ))
            })?;
            route.stops.push((s, k));
        }
        route.stops.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(route)
    }

    fn project(&self, p: &Point) -> Option<f64> {
        let n = self.points.len();
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            let len = a.dist(&b);
            let t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
            if (-1e-12..=1.0 + 1e-12).contains(&t) {
                let q = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
                if q.dist(p) <= ON_STREET_TOL {
                    return Some(self.cumulative[i] + t.clamp(0.0, 1.0) * len);
                }
            }
        }
        None
    }

    /// Position and heading at arc length `s` (taken modulo the loop length).
    fn at(&self, s: f64) -> (Point, Heading) {
        let s = s.rem_euclid(self.length);
        let n = self.points.len();
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        let (a, b) = (self.points[i], self.points[(i + 1) % n]);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let t = (s - self.cumulative[i]) / len;
        (
            Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)),
            Heading::from_delta(b.x - a.x, b.y - a.y),
        )
    }

    /// Distance ahead to the next stop strictly beyond arc length `s`.
    fn next_stop(&self, s: f64) -> Option<(f64, usize)> {
        let s = s.rem_euclid(self.length);
        self.stops
            .iter()
            .map(|&(pos, k)| ((pos - s).rem_euclid(self.length), k))
            .filter(|(d, _)| *d > 1e-12)
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Kinematic model of one vehicle: a validated policy bound to a grid.
#[derive(Debug, Clone)]
pub struct Mobility {
    policy: MobilityPolicy,
    grid: ManhattanGrid,
    route: Option<Route>,
}

impl Mobility {
    pub fn new(policy: MobilityPolicy, grid: ManhattanGrid) -> Result<Self> {
        policy.validate()?;
        let route = match &policy.route {
            Some(w) => Some(Route::build(w, &grid, &policy.stops)?),
            None => {
                if !grid.on_street(&policy.start) {
                    return Err(Error::InvalidRoute("start position is off-street".into()));
                }
                for s in &policy.stops {
                    if !grid.on_street(&s.position) {
                        return Err(Error::InvalidRoute(format!(
                            "stop ({}, {}) is off-street",
                            s.position.x, s.position.y
                        )));
                    }
                }
                None
            }
        };
        Ok(Mobility { policy, grid, route })
    }

    pub fn policy(&self) -> &MobilityPolicy {
        &self.policy
    }

    pub fn grid(&self) -> &ManhattanGrid {
        &self.grid
    }

    /// Loop length of the route, if one is set.
    pub fn route_length(&self) -> Option<f64> {
        self.route.as_ref().map(|r| r.length)
    }

    pub fn initial_state(&self) -> TrajectoryState {
        let (position, heading) = match &self.route {
            Some(r) => r.at(0.0),
            None => (self.grid.snap(self.policy.start), self.policy.start_heading),
        };
        TrajectoryState {
            position,
            velocity: self.policy.initial_speed,
            heading,
            odometer: 0.0,
            dwell_remaining: 0.0,
        }
    }

    pub fn draw_beta<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.policy.beta_law {
            BetaLaw::Uniform => rng.gen_range(-1.0..=1.0),
            BetaLaw::Constant { value } => value,
        }
    }

    /// Distance (Km) along the current street to the next stop, when it lies
    /// before the next forced decision point.
    fn stop_ahead(&self, state: &TrajectoryState) -> Option<(f64, usize)> {
        match &self.route {
            Some(r) => r.next_stop(state.odometer),
            None => {
                let (ux, uy) = state.heading.unit();
                let next_int = self.distance_to_intersection(&state.position, state.heading);
                self.policy
                    .stops
                    .iter()
                    .enumerate()
                    .filter_map(|(k, st)| {
                        let dx = st.position.x - state.position.x;
                        let dy = st.position.y - state.position.y;
                        let along = dx * ux + dy * uy;
                        let across = (dx * uy - dy * ux).abs();
                        (across <= ON_STREET_TOL && along > 1e-12 && along <= next_int + 1e-12)
                            .then_some((along, k))
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
            }
        }
    }

    fn distance_to_intersection(&self, p: &Point, h: Heading) -> f64 {
        let b = self.grid.block;
        let (coord, sign) = match h {
            Heading::PosX => (p.x, 1.0),
            Heading::NegX => (p.x, -1.0),
            Heading::PosY => (p.y, 1.0),
            Heading::NegY => (p.y, -1.0),
        };
        let k = sign * coord / b;
        let next = (k + 1e-9).floor() + 1.0;
        (next - k) * b
    }

    fn can_proceed(&self, p: &Point, h: Heading) -> bool {
        let (ux, uy) = h.unit();
        let q = Point::new(p.x + ux * self.grid.block, p.y + uy * self.grid.block);
        self.grid.within(&q)
    }

    fn choose_turn<R: Rng>(&self, p: &Point, h: Heading, rng: &mut R) -> Heading {
        let options = [h.left(), h, h.right()];
        let mut weights = self.policy.turn_probs;
        for (w, o) in weights.iter_mut().zip(options) {
            if !self.can_proceed(p, o) {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return options
                .into_iter()
                .find(|o| self.can_proceed(p, *o))
                .unwrap_or(h.reverse());
        }
        let mut u = rng.gen::<f64>() * total;
        for (w, o) in weights.iter().zip(options) {
            if *w > 0.0 && u < *w {
                return o;
            }
            u -= w;
        }
        options[weights.iter().rposition(|w| *w > 0.0).unwrap()]
    }

    /// One speed and position update, with intersection splitting and stops.
    pub fn step<R: Rng>(&self, state: &TrajectoryState, dt: f64, beta: f64, rng: &mut R) -> Result<TrajectoryState> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta {beta} outside [-1, 1]")));
        }
        let mut next = *state;
        if state.dwell_remaining > 0.0 {
            next.dwell_remaining = (state.dwell_remaining - dt).max(0.0);
            next.velocity = 0.0;
            return Ok(next);
        }

        let mut beta = beta;
        let stop = self.stop_ahead(state);
        if let Some((d, _)) = stop {
            // decelerate once the remaining distance is within braking range
            let v = state.velocity;
            let decel = self.policy.dv / dt;
            let brake = if decel > 0.0 { v * v / (2.0 * decel) / SECONDS_PER_HOUR } else { 0.0 };
            if d <= brake + v * dt / SECONDS_PER_HOUR {
                beta = -1.0;
            }
        }
        next.velocity = (state.velocity + beta * self.policy.dv).min(self.policy.v_max).max(0.0);

        let mut remaining = state.velocity * dt / SECONDS_PER_HOUR;
        if let Some((d, k)) = stop {
            if d <= remaining + 1e-15 {
                remaining = d;
                next.velocity = 0.0;
                next.dwell_remaining = self.policy.stops[k].dwell_s;
            }
        }

        match &self.route {
            Some(r) => {
                next.odometer = state.odometer + remaining;
                let (p, h) = r.at(next.odometer);
                next.position = p;
                next.heading = h;
            }
            None => {
                let mut p = state.position;
                let mut h = state.heading;
                while remaining > 0.0 {
                    let to_int = self.distance_to_intersection(&p, h);
                    let (ux, uy) = h.unit();
                    let d = to_int.min(remaining);
                    p = self.grid.snap(Point::new(p.x + ux * d, p.y + uy * d));
                    remaining -= d;
                    if d == to_int {
                        h = self.choose_turn(&p, h, rng);
                    }
                }
                next.odometer = state.odometer + state.velocity * dt / SECONDS_PER_HOUR;
                next.position = p;
                next.heading = h;
            }
        }
        Ok(next)
    }
}

/// Free-function form of [`Mobility::step`].
pub fn step<R: Rng>(
    state: &TrajectoryState,
    dt: f64,
    beta: f64,
    policy: &MobilityPolicy,
    grid: &ManhattanGrid,
    rng: &mut R,
) -> Result<TrajectoryState> {
    Mobility::new(policy.clone(), *grid)?.step(state, dt, beta, rng)
}

/// A sampled trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<TrajectoryState>,
}

impl Trajectory {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t_s,x_km,y_km,speed_kmh,heading")?;
        for (i, s) in self.states.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.time(i),
                s.position.x,
                s.position.y,
                s.velocity,
                s.heading
            )?;
        }
        Ok(())
    }
}

pub fn generate_trajectory(
    policy: &MobilityPolicy,
    grid: &ManhattanGrid,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration and dt must be positive, got T={duration} dt={dt}"
        )));
    }
    let model = Mobility::new(policy.clone(), *grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (duration / dt - 1e-9).ceil() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = model.initial_state();
    states.push(s);
    for _ in 0..steps {
        let beta = model.draw_beta(&mut rng);
        s = model.step(&s, dt, beta, &mut rng)?;
        states.push(s);
    }
    Ok(Trajectory { dt, states })
}

pub fn distance_to_hotspot(series: &Trajectory, spec: &HotspotSpec) -> Vec<f64> {
    let c = spec.center();
    series.states.iter().map(|s| s.position.dist(&c)).collect()
}

/// Smallest distance from `p` to the closed polyline through `route`.
pub fn route_closest_approach(route: &[Point], p: &Point) -> f64 {
    let n = route.len();
    (0..n)
        .map(|i| {
            let (a, b) = (route[i], route[(i + 1) % n]);
            let len2 = a.dist_sq(&b);
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / len2).clamp(0.0, 1.0)
            };
            Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)).dist(p)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> ManhattanGrid {
        ManhattanGrid::new(0.05, 1.0).unwrap()
    }

    fn rectangle() -> Vec<Point> {
        vec![
            Point::new(0.25, 0.10),
            Point::new(0.25, 0.85),
            Point::new(-0.50, 0.85),
            Point::new(-0.50, 0.10),
        ]
    }

    fn cruise(route: Option<Vec<Point>>, speed: f64) -> MobilityPolicy {
        MobilityPolicy {
            v_max: 50.0,
            beta_law: BetaLaw::Constant { value: 0.0 },
            route,
            initial_speed: speed,
            ..MobilityPolicy::default()
        }
    }

    #[test]
    fn speed_clamps() {
        let m = Mobility::new(cruise(None, 50.0), grid()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = m.initial_state();
        assert_eq!(m.step(&s, 1.0, 1.0, &mut rng).unwrap().velocity, 50.0);
        let mut stopped = s;
        stopped.velocity = 0.0;
        assert_eq!(m.step(&stopped, 1.0, -1.0, &mut rng).unwrap().velocity, 0.0);
        let same = m.step(&s, 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(same.velocity, 50.0);
        assert!((same.position.x - 50.0 / 3600.0).abs() < 1e-12);
        assert!(m.step(&s, 0.0, 0.0, &mut rng).is_err());
        assert!(m.step(&s, -1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn straight_uniform_motion() {
        let mut p = cruise(None, 36.0);
        p.turn_probs = [0.0, 1.0, 0.0];
        let t = generate_trajectory(&p, &grid(), 50.0, 1.0, 3).unwrap();
        assert_eq!(t.len(), 51);
        for w in t.states.windows(2) {
            assert!((w[1].position.x - w[0].position.x - 0.01).abs() < 1e-12);
            assert_eq!(w[1].heading, Heading::PosX);
        }
    }

    #[test]
    fn forced_straight_never_turns() {
        let mut p = MobilityPolicy {
            turn_probs: [0.0, 1.0, 0.0],
            start: Point::new(-0.9, 0.0),
            initial_speed: 30.0,
            ..MobilityPolicy::default()
        };
        p.v_max = 40.0;
        let t = generate_trajectory(&p, &grid(), 120.0, 1.0, 8).unwrap();
        assert!(t.states.iter().all(|s| s.heading == Heading::PosX));
    }

    #[test]
    fn rectangular_loop_is_periodic() {
        let p = cruise(Some(rectangle()), 6.0);
        let m = Mobility::new(p.clone(), grid()).unwrap();
        assert!((m.route_length().unwrap() - 3.0).abs() < 1e-12);
        let t = generate_trajectory(&p, &grid(), 5400.0, 10.0, 1).unwrap();
        let period = 180;
        for i in 0..t.len() - period {
            assert!(t.states[i].position.dist(&t.states[i + period].position) < 1e-9);
        }
        // the position series correlates best with itself one loop later
        let xs: Vec<f64> = t.states.iter().map(|s| s.position.x).collect();
        let best = (90..270)
            .min_by(|a, b| {
                let e = |lag: usize| (0..xs.len() - lag).map(|i| (xs[i] - xs[i + lag]).powi(2)).sum::<f64>();
                e(*a).total_cmp(&e(*b))
            })
            .unwrap();
        assert_eq!(best, period);
    }

    #[test]
    fn distance_series_matches_route_geometry() {
        let p = cruise(Some(rectangle()), 6.0);
        let spec = HotspotSpec::new(0.5, std::f64::consts::FRAC_PI_3, 0.02).unwrap();
        let t = generate_trajectory(&p, &grid(), 1800.0, 1.0, 1).unwrap();
        let d = distance_to_hotspot(&t, &spec);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let closest = route_closest_approach(&rectangle(), &spec.center());
        assert!(min >= closest - 1e-12);
        assert!(min - closest < 6.0 / 3600.0);
        assert!((d[0] - d[1800]).abs() < 1e-9);

        let at_center = HotspotSpec::new(t.states[5].position.norm(), t.states[5].polar().theta(), 0.02).unwrap();
        assert!(distance_to_hotspot(&t, &at_center)[5] < 1e-12);
    }

    #[test]
    fn route_validation() {
        let g = grid();
        let off = vec![Point::new(0.26, 0.1), Point::new(0.26, 0.5)];
        assert!(matches!(Mobility::new(cruise(Some(off), 6.0), g), Err(Error::InvalidRoute(_))));
        let diagonal = vec![Point::new(0.0, 0.0), Point::new(0.1, 0.1)];
        assert!(matches!(
            Mobility::new(cruise(Some(diagonal), 6.0), g),
            Err(Error::InvalidRoute(_))
        ));
        let mut p = cruise(Some(rectangle()), 6.0);
        p.stops = vec![Stop {
            position: Point::new(0.0, 0.0),
            dwell_s: 10.0,
        }];
        assert!(matches!(Mobility::new(p, g), Err(Error::InvalidRoute(_))));
        let mut bad = cruise(None, 6.0);
        bad.turn_probs = [0.5, 0.5, 0.5];
        assert!(Mobility::new(bad, g).is_err());
    }

    #[test]
    fn stops_freeze_position() {
        let mut p = cruise(Some(rectangle()), 20.0);
        p.beta_law = BetaLaw::Constant { value: 1.0 };
        p.v_max = 20.0;
        p.stops = vec![Stop {
            position: Point::new(0.25, 0.40),
            dwell_s: 30.0,
        }];
        let t = generate_trajectory(&p, &grid(), 300.0, 1.0, 2).unwrap();
        let stop = Point::new(0.25, 0.40);
        let at_stop: Vec<usize> = (0..t.len())
            .filter(|&i| t.states[i].position.dist(&stop) < 1e-12)
            .collect();
        assert!(at_stop.len() >= 30, "dwelled {} steps", at_stop.len());
        for w in at_stop.windows(2) {
            assert_eq!(w[1], w[0] + 1);
        }
        for &i in &at_stop[1..at_stop.len() - 1] {
            assert_eq!(t.states[i].velocity, 0.0);
        }
        // braking starts before the stop
        let first = at_stop[0];
        assert!(t.states[first - 1].velocity < 20.0);
    }

    #[test]
    fn csv_export() {
        let p = cruise(Some(rectangle()), 6.0);
        let t = generate_trajectory(&p, &grid(), 20.0, 10.0, 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t_s,x_km,y_km,speed_kmh,heading");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with("+y"));
    }

    proptest! {
        #[test]
        fn random_walk_stays_on_street(seed in 0u64..200, dt in 0.5f64..20.0) {
            let g = grid();
            let p = MobilityPolicy {
                v_max: 60.0,
                dv: 10.0,
                initial_speed: 30.0,
                stops: vec![Stop { position: Point::new(0.1, 0.0), dwell_s: 20.0 }],
                ..MobilityPolicy::default()
            };
            let t = generate_trajectory(&p, &g, 600.0, dt, seed).unwrap();
            for s in &t.states {
                prop_assert!(g.on_street(&s.position), "off street at {:?}", s.position);
                prop_assert!(s.velocity >= 0.0 && s.velocity <= p.v_max);
            }
            prop_assert_eq!(t.clone(), generate_trajectory(&p, &g, 600.0, dt, seed).unwrap());
        }
    }
}
