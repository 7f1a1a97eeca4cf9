//! Hidden-vehicle positioning from single-bounce multipath geometry.
//!
//! A vehicle with no line-of-sight to any anchor still receives the anchor's
//! waveform over reflected paths. Each path contributes a departure bearing
//! at the anchor, an arrival bearing at the vehicle, and a delay relative to
//! the first path — all mutually synchronized because every replica left the
//! same anchor at the same instant. Three such paths pin down the vehicle.
//!
//! Two independent solvers are provided: an algebraic least-squares
//! formulation ([`solve_linear`]) and a geometric scalar search over the
//! first path's flight distance ([`solve_trajectory`]). They must agree;
//! tests and the acceptance suite exploit that redundancy. On top of them
//! sit multi-bounce classification ([`classify_and_solve`]) and fusion of
//! paths collected at different times ([`solve_multi_epoch`]).

mod classify;
mod linear;
mod trajectory;

pub use classify::{classify_and_solve, implied_scatterer, ClassifyConfig, ImpliedScatterer};
pub use linear::{solve_linear, solve_multi_epoch};
pub use trajectory::{locus_line, solve_trajectory, TrajectorySearch};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Point2D;
use crate::SPEED_OF_LIGHT;

/// Per-path classification attached to a fix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLabel {
    SingleBounce,
    MultiBounce,
    Unused,
}

/// An estimated vehicle position with solver evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionFix {
    pub position: Point2D,
    /// Recovered flight distance of the reference path, meters.
    pub d1_m: f64,
    /// Root-mean-square equation residual, meters.
    pub residual_m: f64,
    /// Condition number of the linear system (NaN for the trajectory
    /// method, which solves no linear system).
    pub condition: f64,
    /// False when the solution violates the geometric feasibility bounds
    /// (negative reference distance, or a scatterer distance outside its
    /// path's flight distance).
    pub feasible: bool,
    pub labels: Vec<PathLabel>,
}

/// Shared solver knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Propagation speed used to convert relative delays to meters.
    pub c: f64,
    /// Condition-number threshold above which a system is rejected.
    pub max_condition: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            c: SPEED_OF_LIGHT,
            max_condition: 1e8,
        }
    }
}

/// Vehicle-position locus of one path under an assumed flight distance.
///
/// With flight distance `d`, splitting it as `a` meters anchor-to-scatterer
/// and `d - a` meters scatterer-to-vehicle places the vehicle at
/// `anchor + a u(aod) - (d - a) u(aoa)`; sweeping `a` over [0, d] traces a
/// straight segment. `point_at` evaluates it; `direction` is unit length and
/// `step` converts the path parameter to arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusLine {
    /// Vehicle position at `a = 0` (all flight distance after the bounce).
    pub origin: Point2D,
    /// Unit direction of the locus.
    pub direction: Point2D,
    /// Meters of arc length per meter of path parameter, `|u(aod) + u(aoa)|`.
    pub step: f64,
    /// Upper end of the parameter range, equal to the flight distance.
    pub a_max: f64,
}

impl LocusLine {
    pub fn point_at(&self, a: f64) -> Point2D {
        self.origin.add(self.direction.scale(self.step * a))
    }

    pub fn endpoint(&self) -> Point2D {
        self.point_at(self.a_max)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HvpError {
    #[error("under-determined: {equations} equations cannot resolve {unknowns} unknowns")]
    UnderDetermined { equations: usize, unknowns: usize },
    #[error("ill-conditioned: condition number {condition:.3e} exceeds {threshold:.3e}")]
    IllConditioned { condition: f64, threshold: f64 },
    #[error("degenerate-locus: departure and arrival rays are opposed, the locus is a point")]
    DegenerateLocus,
    #[error("invalid-observations: {0}")]
    InvalidObservations(String),
    #[error("no-bracket: no candidate flight distance in the search bracket yields finite crossings")]
    NoBracket,
    #[error(
        "inconsistent-paths: best crossing separation {separation_m} m exceeds tolerance {tolerance_m} m"
    )]
    InconsistentPaths {
        separation_m: f64,
        tolerance_m: f64,
    },
    #[error("no-intersection: departure and arrival rays are parallel")]
    ParallelRays,
    #[error("infeasible-intersection: rays meet behind an origin (t {t_m} m, s {s_m} m)")]
    InfeasibleIntersection { t_m: f64, s_m: f64 },
    #[error("classification-failure: {0}")]
    ClassificationFailure(String),
    #[error("solve-failed: {0}")]
    SolveFailed(String),
}
