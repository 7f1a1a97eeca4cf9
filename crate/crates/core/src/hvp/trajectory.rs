//! Geometric positioning: locus lines and the crossing-point trajectory.
//!
//! Fixing path 1's flight distance turns every path into a segment of
//! possible vehicle positions. Paths 1 and 2 cross at a point; so do paths 1
//! and 3. Sweeping path 1's distance drags both crossings along their own
//! trajectories, and the true distance is where the two crossings coincide.
//! The sweep is a coarse grid scan followed by golden-section refinement.

use super::{HvpError, LocusLine, PathLabel, PositionFix, SolveOptions};
use crate::scenario::{unit_vector, PathObservation, Point2D};

/// Bracket and stopping rules for [`solve_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySearch {
    pub d1_min_m: f64,
    pub d1_max_m: f64,
    /// Grid cells for the coarse scan of the bracket.
    pub grid: usize,
    /// Crossings farther apart than this at the optimum mean the three
    /// paths do not describe one vehicle.
    pub tolerance_m: f64,
}

impl Default for TrajectorySearch {
    fn default() -> Self {
        Self {
            d1_min_m: 1.0,
            d1_max_m: 5000.0,
            grid: 2048,
            tolerance_m: 1e-3,
        }
    }
}

/// The locus of vehicle positions consistent with one path and an assumed
/// flight distance `d_i`.
pub fn locus_line(
    obs: &PathObservation,
    anchor: Point2D,
    d_i: f64,
) -> Result<LocusLine, HvpError> {
    if !(d_i > 0.0) {
        return Err(HvpError::InvalidObservations(format!(
            "locus requires a positive flight distance, got {d_i}"
        )));
    }
    let u_dep = unit_vector(obs.aod_rad);
    let u_arr = unit_vector(obs.aoa_rad);
    let sum = u_dep.add(u_arr);
    let step = sum.norm();
    if step < 1e-9 {
        return Err(HvpError::DegenerateLocus);
    }
    Ok(LocusLine {
        origin: anchor.sub(u_arr.scale(d_i)),
        direction: sum.scale(1.0 / step),
        step,
        a_max: d_i,
    })
}

/// Intersection of two locus lines; `None` when parallel. Returns the point
/// and the two path parameters (`a` values) at the crossing.
fn crossing(l1: &LocusLine, l2: &LocusLine) -> Option<(Point2D, f64, f64)> {
    let v1 = l1.direction.scale(l1.step);
    let v2 = l2.direction.scale(l2.step);
    let denom = v1.cross(v2);
    if denom.abs() < 1e-12 {
        return None;
    }
    let rhs = l2.origin.sub(l1.origin);
    let a1 = rhs.cross(v2) / denom;
    let a2 = rhs.cross(v1) / denom;
    Some((l1.point_at(a1), a1, a2))
}

struct Candidate {
    separation_sq: f64,
    midpoint: Point2D,
    params: [f64; 3],
}

/// Scores one candidate reference distance. The nominal objective is the
/// squared distance between the (1,2) and (1,3) locus crossings; when one
/// pair is parallel at this distance (a whole scenario family does that,
/// e.g. scatterers mirrored across the anchor-vehicle axis), the two
/// crossings that do exist are compared instead. Fewer than two crossings
/// excludes the distance from the search.
fn evaluate(
    obs: &[PathObservation],
    anchor: Point2D,
    d1: f64,
    c: f64,
) -> Option<Candidate> {
    let mut loci = Vec::with_capacity(3);
    for p in obs {
        let d_i = d1 + c * p.rel_delay_s;
        if !(d_i > 0.0) {
            return None;
        }
        loci.push(locus_line(p, anchor, d_i).ok()?);
    }
    // Pair order matters: (1,2) then (1,3) is the canonical pairing.
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut points: Vec<Point2D> = Vec::with_capacity(2);
    // Path-parameter sums and counts, to average `a` per path.
    let mut a_sum = [0.0f64; 3];
    let mut a_cnt = [0usize; 3];
    for &(i, j) in &pairs {
        if points.len() == 2 {
            break;
        }
        if let Some((x, ai, aj)) = crossing(&loci[i], &loci[j]) {
            points.push(x);
            a_sum[i] += ai;
            a_cnt[i] += 1;
            a_sum[j] += aj;
            a_cnt[j] += 1;
        }
    }
    if points.len() < 2 {
        return None;
    }
    let diff = points[0].sub(points[1]);
    let mut params = [0.0f64; 3];
    for i in 0..3 {
        params[i] = if a_cnt[i] > 0 {
            a_sum[i] / a_cnt[i] as f64
        } else {
            f64::NAN
        };
    }
    Some(Candidate {
        separation_sq: diff.dot(diff),
        midpoint: Point2D::new(
            (points[0].x + points[1].x) / 2.0,
            (points[0].y + points[1].y) / 2.0,
        ),
        params,
    })
}

/// Positions the vehicle from exactly three paths by scalar search over the
/// reference flight distance.
///
/// Candidate distances where some locus is degenerate or a line pair is
/// parallel are excluded from the search. Errors if no candidate in the
/// bracket produces finite crossings, or if the best crossings stay farther
/// apart than `search.tolerance_m` (bracket excludes the true distance, or
/// the paths are mutually inconsistent).
pub fn solve_trajectory(
    obs: &[PathObservation],
    anchor: Point2D,
    search: &TrajectorySearch,
    opts: &SolveOptions,
) -> Result<PositionFix, HvpError> {
    if obs.len() != 3 {
        return Err(HvpError::InvalidObservations(format!(
            "trajectory intersection requires exactly 3 paths, got {}",
            obs.len()
        )));
    }
    if obs[0].rel_delay_s != 0.0 {
        return Err(HvpError::InvalidObservations(
            "first path must be the delay reference (rel_delay 0)".into(),
        ));
    }
    if !(search.d1_max_m > search.d1_min_m) || search.grid < 2 {
        return Err(HvpError::InvalidObservations(
            "invalid trajectory search bracket".into(),
        ));
    }

    let score = |d1: f64| evaluate(obs, anchor, d1, opts.c).map(|c| c.separation_sq);

    // Coarse scan.
    let h = (search.d1_max_m - search.d1_min_m) / search.grid as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=search.grid {
        let d1 = search.d1_min_m + i as f64 * h;
        if let Some(s) = score(d1) {
            if best.is_none_or(|(_, bs)| s < bs) {
                best = Some((d1, s));
            }
        }
    }
    let (coarse_d1, _) = best.ok_or(HvpError::NoBracket)?;

    // Golden-section refinement around the best cell. Parallel-loci points
    // inside the window score as infinite and are stepped over.
    let mut lo = (coarse_d1 - h).max(search.d1_min_m);
    let mut hi = (coarse_d1 + h).min(search.d1_max_m);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let finite_score = |d1: f64| score(d1).unwrap_or(f64::INFINITY);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = finite_score(x1);
    let mut f2 = finite_score(x2);
    for _ in 0..120 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = finite_score(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = finite_score(x2);
        }
    }
    let d1_opt = if f1 <= f2 { x1 } else { x2 };

    let cand = evaluate(obs, anchor, d1_opt, opts.c).ok_or(HvpError::NoBracket)?;
    let separation = cand.separation_sq.sqrt();
    if separation > search.tolerance_m {
        return Err(HvpError::InconsistentPaths {
            separation_m: separation,
            tolerance_m: search.tolerance_m,
        });
    }

    let mut feasible = true;
    for (i, p) in obs.iter().enumerate() {
        let d_i = d1_opt + opts.c * p.rel_delay_s;
        if !(cand.params[i] > 0.0 && cand.params[i] < d_i) {
            feasible = false;
        }
    }

    Ok(PositionFix {
        position: cand.midpoint,
        d1_m: d1_opt,
        residual_m: separation,
        condition: f64::NAN,
        feasible,
        labels: vec![PathLabel::SingleBounce; 3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hvp::solve_linear;
    use crate::scenario::{single_bounce_path, Scenario};
    use approx::assert_abs_diff_eq;

    fn worked_scenario() -> Scenario {
        Scenario::new(
            Point2D::new(0.0, 0.0),
            Point2D::new(100.0, 0.0),
            vec![
                Point2D::new(50.0, 50.0),
                Point2D::new(50.0, -30.0),
                Point2D::new(120.0, 40.0),
            ],
        )
        .unwrap()
    }

    fn paths_in_listed_order(s: &Scenario) -> Vec<PathObservation> {
        let raw: Vec<PathObservation> = (0..s.scatterers.len())
            .map(|i| single_bounce_path(s, i).unwrap())
            .collect();
        let d0 = raw[0].truth.unwrap().flight_dist_m;
        raw.into_iter()
            .map(|mut p| {
                p.rel_delay_s = (p.truth.unwrap().flight_dist_m - d0) / s.c;
                p
            })
            .collect()
    }

    #[test]
    fn locus_endpoints_and_vehicle_parameter() {
        let s = worked_scenario();
        let p = paths_in_listed_order(&s)[0];
        let d = 141.4213562373095;
        let locus = locus_line(&p, s.anchor, d).unwrap();
        assert_abs_diff_eq!(locus.origin.x, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(locus.origin.y, -100.0, epsilon = 1e-9);
        let end = locus.endpoint();
        assert_abs_diff_eq!(end.x, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(end.y, 100.0, epsilon = 1e-9);
        // The true vehicle sits on the segment at a = 100 / sqrt(2).
        let a = 70.71067811865476;
        let v = locus.point_at(a);
        assert_abs_diff_eq!(v.x, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn opposed_rays_are_degenerate() {
        let p = PathObservation::new(0.0, std::f64::consts::PI, 0.0);
        assert_eq!(
            locus_line(&p, Point2D::ORIGIN, 10.0),
            Err(HvpError::DegenerateLocus)
        );
    }

    #[test]
    fn zero_distance_is_rejected() {
        let p = PathObservation::new(0.3, 1.1, 0.0);
        assert!(matches!(
            locus_line(&p, Point2D::ORIGIN, 0.0),
            Err(HvpError::InvalidObservations(_))
        ));
    }

    #[test]
    fn trajectory_agrees_with_linear_on_worked_scenario() {
        let s = worked_scenario();
        let obs = paths_in_listed_order(&s);
        let opts = SolveOptions::default();
        let linear = solve_linear(&obs, s.anchor, &opts).unwrap();
        let search = TrajectorySearch {
            d1_min_m: 10.0,
            d1_max_m: 1000.0,
            ..TrajectorySearch::default()
        };
        let traj = solve_trajectory(&obs, s.anchor, &search, &opts).unwrap();
        assert!(traj.position.distance_to(linear.position) <= 1e-4);
        assert_abs_diff_eq!(traj.d1_m, linear.d1_m, epsilon = 1e-3);
        assert!(traj.feasible);
    }

    #[test]
    fn bracket_excluding_truth_reports_inconsistency() {
        let s = worked_scenario();
        let obs = paths_in_listed_order(&s);
        let search = TrajectorySearch {
            d1_min_m: 400.0,
            d1_max_m: 900.0,
            ..TrajectorySearch::default()
        };
        match solve_trajectory(&obs, s.anchor, &search, &SolveOptions::default()) {
            Err(HvpError::InconsistentPaths { .. }) => {}
            other => panic!("expected inconsistent-paths, got {other:?}"),
        }
    }

    #[test]
    fn wrong_path_count_is_rejected() {
        let s = worked_scenario();
        let obs = paths_in_listed_order(&s);
        assert!(matches!(
            solve_trajectory(
                &obs[..2],
                s.anchor,
                &TrajectorySearch::default(),
                &SolveOptions::default()
            ),
            Err(HvpError::InvalidObservations(_))
        ));
    }
}
