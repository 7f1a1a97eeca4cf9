//! 2D world model and forward geometric oracle.
//!
//! A [`Scenario`] is the ground truth: one anchor (BS/RSU at a known
//! position), one vehicle, point scatterers, and optional obstacle segments.
//! [`enumerate_paths`] plays the role of an ideal receiver, producing the
//! exact (AoD, AoA, relative delay) tuple for every reflected path. The
//! solvers in [`crate::hvp`] invert those tuples; tests close the loop.
//!
//! Conventions: bearings are radians counter-clockwise from +x, normalized
//! to (-pi, pi]. AoD is measured at the anchor toward the first scatterer;
//! AoA is measured at the vehicle pointing back toward the last scatterer.
//! The vehicle heading is assumed known and already compensated.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SPEED_OF_LIGHT;

/// A point (or displacement) in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_to(&self, other: Point2D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Bearing of `other` as seen from `self`, in (-pi, pi].
    pub fn bearing_to(&self, other: Point2D) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn add(&self, d: Point2D) -> Point2D {
        Point2D::new(self.x + d.x, self.y + d.y)
    }

    pub fn sub(&self, d: Point2D) -> Point2D {
        Point2D::new(self.x - d.x, self.y - d.y)
    }

    pub fn scale(&self, k: f64) -> Point2D {
        Point2D::new(self.x * k, self.y * k)
    }

    pub fn dot(&self, other: Point2D) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, useful for parallelism tests.
    pub fn cross(&self, other: Point2D) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// Unit vector of a bearing.
pub fn unit_vector(bearing_rad: f64) -> Point2D {
    Point2D::new(bearing_rad.cos(), bearing_rad.sin())
}

/// Wrap an angle to (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// An obstacle edge, used only for the optional map check on implied
/// scatterer positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2D,
    pub b: Point2D,
}

impl Segment {
    /// Distance from `p` to the closest point of the segment.
    pub fn distance_to_point(&self, p: Point2D) -> f64 {
        let ab = self.b.sub(self.a);
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return self.a.distance_to(p);
        }
        let t = (p.sub(self.a).dot(ab) / len2).clamp(0.0, 1.0);
        self.a.add(ab.scale(t)).distance_to(p)
    }
}

/// Ground-truth world: anchor, vehicle, scatterers, optional obstacles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub anchor: Point2D,
    pub vehicle: Point2D,
    pub scatterers: Vec<Point2D>,
    #[serde(default)]
    pub obstacles: Vec<Segment>,
    /// Propagation speed, m/s.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid-scenario: {0}")]
    Invalid(String),
    #[error(
        "infeasible-packing: could not place {placed} of {requested} scatterers \
         with min separation {min_separation_m} m after {attempts} attempts"
    )]
    InfeasiblePacking {
        requested: usize,
        placed: usize,
        min_separation_m: f64,
        attempts: usize,
    },
}

impl Scenario {
    /// Builds a scenario with the default propagation speed, validating the
    /// type invariants (finite coordinates, anchor != vehicle, scatterers
    /// pairwise distinct).
    pub fn new(
        anchor: Point2D,
        vehicle: Point2D,
        scatterers: Vec<Point2D>,
    ) -> Result<Self, ScenarioError> {
        let s = Self {
            anchor,
            vehicle,
            scatterers,
            obstacles: Vec::new(),
            c: SPEED_OF_LIGHT,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Segment>) -> Self {
        self.obstacles = obstacles;
        self
    }

    /// Map features for the common-scatterer check: the configured obstacle
    /// segments plus a point feature at every scatterer (reflectors are part
    /// of the mapped environment).
    pub fn scatterer_map(&self) -> Vec<Segment> {
        let mut map = self.obstacles.clone();
        map.extend(self.scatterers.iter().map(|&s| Segment { a: s, b: s }));
        map
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.anchor.is_finite() || !self.vehicle.is_finite() {
            return Err(ScenarioError::Invalid("non-finite coordinates".into()));
        }
        if !self.scatterers.iter().all(Point2D::is_finite) {
            return Err(ScenarioError::Invalid("non-finite scatterer".into()));
        }
        if !(self.c > 0.0) {
            return Err(ScenarioError::Invalid(format!("c must be positive, got {}", self.c)));
        }
        if self.anchor == self.vehicle {
            return Err(ScenarioError::Invalid("anchor coincides with vehicle".into()));
        }
        for i in 0..self.scatterers.len() {
            for j in (i + 1)..self.scatterers.len() {
                if self.scatterers[i] == self.scatterers[j] {
                    return Err(ScenarioError::Invalid(format!(
                        "scatterers {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth annotation carried by oracle-generated paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTruth {
    pub flight_dist_m: f64,
    pub bounce_count: u8,
}

/// One detected path: departure bearing at the anchor, arrival bearing at
/// the vehicle (pointing back toward the last scatterer), and delay relative
/// to the first path of the set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathObservation {
    pub aod_rad: f64,
    pub aoa_rad: f64,
    pub rel_delay_s: f64,
    /// Present only on oracle output; measurement files carry `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathTruth>,
}

impl PathObservation {
    pub fn new(aod_rad: f64, aoa_rad: f64, rel_delay_s: f64) -> Self {
        Self {
            aod_rad: normalize_angle(aod_rad),
            aoa_rad: normalize_angle(aoa_rad),
            rel_delay_s,
            truth: None,
        }
    }
}

/// Paths observed at one instant plus the vehicle displacement accumulated
/// between that instant and "now".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochObservation {
    pub paths: Vec<PathObservation>,
    /// Vehicle displacement since this epoch; zero for the current epoch.
    pub ego_displacement_m: Point2D,
}

impl EpochObservation {
    pub fn current(paths: Vec<PathObservation>) -> Self {
        Self {
            paths,
            ego_displacement_m: Point2D::ORIGIN,
        }
    }
}

/// Exact single-bounce path via scatterer index `i`, or `None` when the
/// geometry is degenerate (scatterer on top of anchor or vehicle).
///
/// `rel_delay_s` is left at zero; [`enumerate_paths`] re-references delays
/// across the whole set.
pub fn single_bounce_path(scenario: &Scenario, i: usize) -> Option<PathObservation> {
    let s = scenario.scatterers[i];
    if s == scenario.anchor || s == scenario.vehicle {
        return None;
    }
    let d = scenario.anchor.distance_to(s) + s.distance_to(scenario.vehicle);
    Some(PathObservation {
        aod_rad: scenario.anchor.bearing_to(s),
        aoa_rad: scenario.vehicle.bearing_to(s),
        rel_delay_s: 0.0,
        truth: Some(PathTruth {
            flight_dist_m: d,
            bounce_count: 1,
        }),
    })
}

/// Exact double-bounce path anchor -> scatterer `i` -> scatterer `j` ->
/// vehicle. Segments are straight; no reflection-law physics is applied
/// because downstream classification only needs geometric inconsistency.
pub fn double_bounce_path(scenario: &Scenario, i: usize, j: usize) -> Option<PathObservation> {
    if i == j {
        return None;
    }
    let si = scenario.scatterers[i];
    let sj = scenario.scatterers[j];
    if si == scenario.anchor || sj == scenario.vehicle {
        return None;
    }
    let d = scenario.anchor.distance_to(si) + si.distance_to(sj) + sj.distance_to(scenario.vehicle);
    Some(PathObservation {
        aod_rad: scenario.anchor.bearing_to(si),
        aoa_rad: scenario.vehicle.bearing_to(sj),
        rel_delay_s: 0.0,
        truth: Some(PathTruth {
            flight_dist_m: d,
            bounce_count: 2,
        }),
    })
}

/// Forward oracle: every single-bounce path (and every ordered-pair
/// double-bounce path when `max_bounces == 2`), sorted by flight distance so
/// that path 1 is the earliest arrival. Relative delays are referenced to
/// that first path. Degenerate geometries are skipped with a diagnostic.
pub fn enumerate_paths(
    scenario: &Scenario,
    max_bounces: u8,
) -> Result<Vec<PathObservation>, ScenarioError> {
    if !(1..=2).contains(&max_bounces) {
        return Err(ScenarioError::Invalid(format!(
            "max_bounces must be 1 or 2, got {max_bounces}"
        )));
    }
    scenario.validate()?;

    let n = scenario.scatterers.len();
    let mut paths = Vec::new();
    for i in 0..n {
        match single_bounce_path(scenario, i) {
            Some(p) => paths.push(p),
            None => log::warn!("skipping degenerate single-bounce path via scatterer {i}"),
        }
    }
    if max_bounces == 2 {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                match double_bounce_path(scenario, i, j) {
                    Some(p) => paths.push(p),
                    None => {
                        log::warn!("skipping degenerate double-bounce path via {i} -> {j}")
                    }
                }
            }
        }
    }
    Ok(reference_delays(paths, scenario.c))
}

/// Sorts oracle paths by flight distance and rewrites `rel_delay_s` against
/// the earliest arrival. Requires truth annotations on every path.
pub fn reference_delays(mut paths: Vec<PathObservation>, c: f64) -> Vec<PathObservation> {
    paths.sort_by(|a, b| {
        let da = a.truth.expect("oracle path").flight_dist_m;
        let db = b.truth.expect("oracle path").flight_dist_m;
        da.total_cmp(&db)
    });
    if let Some(first) = paths.first() {
        let d0 = first.truth.expect("oracle path").flight_dist_m;
        for p in &mut paths {
            p.rel_delay_s = (p.truth.expect("oracle path").flight_dist_m - d0) / c;
        }
    }
    paths
}

/// Rectangular sampling region.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.x_max > self.x_min) || !(self.y_max > self.y_min)
    }

    fn sample(&self, rng: &mut impl Rng) -> Point2D {
        Point2D::new(
            rng.gen_range(self.x_min..self.x_max),
            rng.gen_range(self.y_min..self.y_max),
        )
    }
}

/// Parameters for [`random_scenario`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_scatterers: usize,
    pub region: Region,
    pub min_separation_m: f64,
    /// Fixed anchor position (not sampled).
    #[serde(default = "Point2D::origin_default")]
    pub anchor: Point2D,
}

impl Point2D {
    pub(crate) fn origin_default() -> Point2D {
        Point2D::ORIGIN
    }
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n_scatterers: 4,
            region: Region::new(-200.0, 200.0, -200.0, 200.0),
            min_separation_m: 10.0,
            anchor: Point2D::ORIGIN,
        }
    }
}

/// Deterministic seeded scenario generation. The vehicle and all scatterers
/// are drawn from `params.region`; every pair among {vehicle, scatterers,
/// anchor} is kept at least `min_separation_m` apart, with bounded
/// rejection-sampling retries.
pub fn random_scenario(seed: u64, params: &ScenarioParams) -> Result<Scenario, ScenarioError> {
    if params.region.is_empty() {
        return Err(ScenarioError::Invalid("empty sampling region".into()));
    }
    if !(params.min_separation_m > 0.0) {
        return Err(ScenarioError::Invalid(
            "min separation must be positive".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 1000 * (params.n_scatterers + 1).max(4);
    let mut attempts = 0usize;

    let mut placed: Vec<Point2D> = vec![params.anchor];
    // Vehicle first, then scatterers, so point roles are seed-stable.
    while placed.len() < params.n_scatterers + 2 {
        if attempts >= max_attempts {
            return Err(ScenarioError::InfeasiblePacking {
                requested: params.n_scatterers,
                placed: placed.len().saturating_sub(2),
                min_separation_m: params.min_separation_m,
                attempts,
            });
        }
        attempts += 1;
        let cand = params.region.sample(&mut rng);
        if placed
            .iter()
            .all(|p| p.distance_to(cand) >= params.min_separation_m)
        {
            placed.push(cand);
        }
    }

    let vehicle = placed[1];
    let scatterers = placed[2..].to_vec();
    Scenario::new(params.anchor, vehicle, scatterers)
}

/// Accumulates vehicle motion onto an epoch observation. Path tuples are
/// unchanged: angles and delays were fixed at observation time and are not
/// affected by later vehicle motion.
pub fn ego_translate(obs: &EpochObservation, displacement: Point2D) -> EpochObservation {
    EpochObservation {
        paths: obs.paths.clone(),
        ego_displacement_m: obs.ego_displacement_m.add(displacement),
    }
}
