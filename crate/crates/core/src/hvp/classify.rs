//! Multi-bounce classification via the common-scatterer test.
//!
//! A single-bounce path's departure and arrival rays intersect at its
//! scatterer, and the two legs of that intersection sum to the path's flight
//! distance. Multi-bounce paths generically fail both checks. When single-
//! and multi-bounce paths coexist, every 3-subset is solved independently;
//! subsets of pure single-bounce paths agree on the vehicle position while
//! contaminated subsets scatter, so the densest cluster of candidate
//! positions (its centroid) is the fix and cluster membership drives the
//! labeling.
//!
//! A 3-subset is exactly determined, so each candidate is internally
//! consistent no matter how contaminated it is; the evidence against a
//! contaminated candidate is its geometric feasibility, disagreement with
//! other candidates, and — when map information is available — whether its
//! implied scatterers land on mapped reflector surfaces. With only three
//! single-bounce paths in the mix the map check is what breaks the
//! symmetry.

use super::linear::solve_linear;
use super::{HvpError, PathLabel, PositionFix, SolveOptions};
use crate::scenario::{unit_vector, PathObservation, Point2D, Segment};

/// Penalty residual for paths whose rays cannot meet in front of both
/// origins under a hypothesis.
const NO_INTERSECTION_PENALTY_M: f64 = 1e6;

/// Result of intersecting one path's rays under a position hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedScatterer {
    /// Where the departure and arrival rays meet.
    pub point: Point2D,
    /// | |anchor - s| + |s - hypothesis| - d_i |, meters. Near zero for a
    /// true single-bounce path with the true hypothesis.
    pub residual_m: f64,
    /// Distance from the implied scatterer to the nearest obstacle segment,
    /// when map information is available.
    pub map_distance_m: Option<f64>,
}

/// Intersects the departure ray (from the anchor) with the arrival ray (from
/// the hypothesized vehicle position) and measures how well the meeting
/// point explains the path's flight distance `d_i`.
pub fn implied_scatterer(
    obs: &PathObservation,
    anchor: Point2D,
    hypothesis: Point2D,
    d_i: f64,
    map: Option<&[Segment]>,
) -> Result<ImpliedScatterer, HvpError> {
    let u_dep = unit_vector(obs.aod_rad);
    let u_arr = unit_vector(obs.aoa_rad);
    let denom = u_dep.cross(u_arr);
    if denom.abs() < 1e-12 {
        return Err(HvpError::ParallelRays);
    }
    let rhs = hypothesis.sub(anchor);
    // anchor + t u_dep = hypothesis + s u_arr
    let t = rhs.cross(u_arr) / denom;
    let s = rhs.cross(u_dep) / denom;
    if t < 0.0 || s < 0.0 {
        return Err(HvpError::InfeasibleIntersection { t_m: t, s_m: s });
    }
    let point = anchor.add(u_dep.scale(t));
    let residual_m = (t + s - d_i).abs();
    let map_distance_m = map.and_then(|segs| {
        segs.iter()
            .map(|seg| seg.distance_to_point(point))
            .min_by(f64::total_cmp)
    });
    Ok(ImpliedScatterer {
        point,
        residual_m,
        map_distance_m,
    })
}

/// Knobs for [`classify_and_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    /// Candidate positions within this radius of a cluster seed belong to
    /// the cluster.
    pub cluster_radius_m: f64,
    /// Clusters smaller than this are not trusted.
    pub min_cluster_size: usize,
    /// Implied-scatterer residual at or below this labels a path
    /// single-bounce during refinement.
    pub scatterer_residual_m: f64,
    /// With map information, an implied scatterer farther than this from
    /// every mapped surface disqualifies its candidate.
    pub map_tolerance_m: f64,
    pub solve: SolveOptions,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            cluster_radius_m: 0.5,
            min_cluster_size: 1,
            scatterer_residual_m: 0.1,
            map_tolerance_m: 1.0,
            solve: SolveOptions::default(),
        }
    }
}

struct Candidate {
    position: Point2D,
    /// Reference-path flight distance implied for the global path 1.
    d1_global_m: f64,
    residual_m: f64,
    condition: f64,
    subset: [usize; 3],
    /// Mean implied-scatterer residual over all paths (members contribute
    /// zero by construction; the information is in the rest).
    mean_implied_residual_m: f64,
}

fn candidate_from_subset(
    obs: &[PathObservation],
    anchor: Point2D,
    indices: [usize; 3],
    cfg: &ClassifyConfig,
    map: Option<&[Segment]>,
) -> Option<Candidate> {
    let mut subset = [obs[indices[0]], obs[indices[1]], obs[indices[2]]];
    let ref_delay = subset[0].rel_delay_s;
    for p in subset.iter_mut() {
        p.rel_delay_s -= ref_delay;
    }
    let fix = match solve_linear(&subset, anchor, &cfg.solve) {
        Ok(f) if f.feasible => f,
        _ => return None,
    };
    // Distance the global reference path would have flown if this subset's
    // solution were true.
    let d1_global = fix.d1_m - cfg.solve.c * ref_delay;

    // Map vetting: each member's implied scatterer must sit on a mapped
    // surface, otherwise the candidate explains its paths with reflectors
    // that do not exist.
    if let Some(segs) = map {
        for p in subset.iter() {
            let d_p = fix.d1_m + cfg.solve.c * p.rel_delay_s;
            match implied_scatterer(p, anchor, fix.position, d_p, Some(segs)) {
                Ok(isc) if isc.map_distance_m.unwrap_or(f64::INFINITY) <= cfg.map_tolerance_m => {}
                _ => return None,
            }
        }
    }

    let mut implied_sum = 0.0;
    for p in obs.iter() {
        let d_p = d1_global + cfg.solve.c * p.rel_delay_s;
        let r = match implied_scatterer(p, anchor, fix.position, d_p, None) {
            Ok(isc) => isc.residual_m.min(NO_INTERSECTION_PENALTY_M),
            Err(_) => NO_INTERSECTION_PENALTY_M,
        };
        implied_sum += r;
    }

    Some(Candidate {
        position: fix.position,
        d1_global_m: d1_global,
        residual_m: fix.residual_m,
        condition: fix.condition,
        subset: indices,
        mean_implied_residual_m: implied_sum / obs.len() as f64,
    })
}

/// Solves every feasible 3-subset, clusters the candidate positions, and
/// returns the largest cluster's centroid together with per-path
/// single/multi-bounce labels.
///
/// `map` optionally supplies reflector surfaces (obstacle segments);
/// candidates whose implied scatterers are not on the map are discarded,
/// which is what disambiguates scenarios with exactly three single-bounce
/// paths. Ties between equal-size clusters go to the smallest mean
/// implied-scatterer residual. Labels start from cluster-membership majority
/// and are refined by the common-scatterer test against the centroid. Fails
/// when no cluster reaches `min_cluster_size` or fewer than three paths end
/// up labeled single-bounce.
pub fn classify_and_solve(
    obs: &[PathObservation],
    anchor: Point2D,
    cfg: &ClassifyConfig,
    map: Option<&[Segment]>,
) -> Result<PositionFix, HvpError> {
    let n = obs.len();
    if n < 3 {
        return Err(HvpError::UnderDetermined {
            equations: 2 * n,
            unknowns: 3 + n,
        });
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                if let Some(c) = candidate_from_subset(obs, anchor, [i, j, k], cfg, map) {
                    candidates.push(c);
                }
            }
        }
    }

    if candidates.is_empty() {
        return Err(HvpError::ClassificationFailure(
            "no feasible 3-subset produced a credible candidate position".into(),
        ));
    }

    // Greedy clustering: every candidate seeds a cluster of the candidates
    // within the radius; the most populated seed wins, ties broken by the
    // smallest mean implied residual, then by seed order.
    let mut best_members: Vec<usize> = Vec::new();
    let mut best_score = f64::INFINITY;
    for seed in 0..candidates.len() {
        let members: Vec<usize> = (0..candidates.len())
            .filter(|&m| {
                candidates[m]
                    .position
                    .distance_to(candidates[seed].position)
                    <= cfg.cluster_radius_m
            })
            .collect();
        let score = members
            .iter()
            .map(|&m| candidates[m].mean_implied_residual_m)
            .sum::<f64>()
            / members.len() as f64;
        let better = members.len() > best_members.len()
            || (members.len() == best_members.len() && score < best_score);
        if better {
            best_members = members;
            best_score = score;
        }
    }

    if best_members.len() < cfg.min_cluster_size {
        return Err(HvpError::ClassificationFailure(format!(
            "largest cluster has {} candidates, need {}",
            best_members.len(),
            cfg.min_cluster_size
        )));
    }

    let inv = 1.0 / best_members.len() as f64;
    let centroid = best_members.iter().fold(Point2D::ORIGIN, |acc, &m| {
        acc.add(candidates[m].position.scale(inv))
    });
    let d1_global = best_members
        .iter()
        .map(|&m| candidates[m].d1_global_m)
        .sum::<f64>()
        * inv;
    let residual_m = best_members
        .iter()
        .map(|&m| candidates[m].residual_m)
        .sum::<f64>()
        * inv;
    let condition = best_members
        .iter()
        .map(|&m| candidates[m].condition)
        .fold(0.0, f64::max);

    // Majority labels from cluster membership, then refinement through the
    // common-scatterer test (and map, when present) against the centroid.
    let mut appearance = vec![0usize; n];
    for &m in &best_members {
        for &p in &candidates[m].subset {
            appearance[p] += 1;
        }
    }
    let mut labels: Vec<PathLabel> = appearance
        .iter()
        .map(|&cnt| {
            if 2 * cnt > best_members.len() {
                PathLabel::SingleBounce
            } else {
                PathLabel::MultiBounce
            }
        })
        .collect();
    for (idx, p) in obs.iter().enumerate() {
        let d_p = d1_global + cfg.solve.c * p.rel_delay_s;
        labels[idx] = match implied_scatterer(p, anchor, centroid, d_p, map) {
            Ok(isc) => {
                let on_map = match isc.map_distance_m {
                    Some(dist) => dist <= cfg.map_tolerance_m,
                    None => true,
                };
                if isc.residual_m <= cfg.scatterer_residual_m && on_map {
                    PathLabel::SingleBounce
                } else {
                    PathLabel::MultiBounce
                }
            }
            Err(_) => PathLabel::MultiBounce,
        };
    }

    let support = labels
        .iter()
        .filter(|&&l| l == PathLabel::SingleBounce)
        .count();
    if support < 3 {
        return Err(HvpError::ClassificationFailure(format!(
            "only {support} paths are consistent with the winning cluster, need 3"
        )));
    }

    Ok(PositionFix {
        position: centroid,
        d1_m: d1_global,
        residual_m,
        condition,
        feasible: true,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        double_bounce_path, reference_delays, single_bounce_path, Scenario,
    };
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

    #[test]
    fn implied_scatterer_recovers_true_scatterer() {
        let s = worked_scenario();
        let p = single_bounce_path(&s, 0).unwrap();
        let d = p.truth.unwrap().flight_dist_m;
        let isc = implied_scatterer(&p, s.anchor, s.vehicle, d, None).unwrap();
        assert_abs_diff_eq!(isc.point.x, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(isc.point.y, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(isc.residual_m, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn double_bounce_path_has_positive_residual() {
        let s = worked_scenario();
        // Bounce pair whose outer rays still intersect in front of both
        // origins, so the residual (not feasibility) carries the evidence.
        let p = double_bounce_path(&s, 0, 2).unwrap();
        let d = p.truth.unwrap().flight_dist_m;
        let isc = implied_scatterer(&p, s.anchor, s.vehicle, d, None).unwrap();
        assert!(isc.residual_m > 1.0, "residual {}", isc.residual_m);
    }

    #[test]
    fn parallel_rays_error() {
        let p = PathObservation::new(0.0, 0.0, 0.0);
        assert_eq!(
            implied_scatterer(&p, Point2D::ORIGIN, Point2D::new(0.0, 5.0), 10.0, None),
            Err(HvpError::ParallelRays)
        );
    }

    #[test]
    fn intersection_behind_origin_is_infeasible() {
        // Departure ray along +x, arrival ray from a hypothesis placed so
        // the lines meet at negative parameters.
        let p = PathObservation::new(0.0, -std::f64::consts::FRAC_PI_2, 0.0);
        let r = implied_scatterer(&p, Point2D::ORIGIN, Point2D::new(-5.0, 5.0), 10.0, None);
        assert!(matches!(r, Err(HvpError::InfeasibleIntersection { .. })));
    }

    #[test]
    fn map_check_reports_obstacle_distance() {
        let s = worked_scenario();
        let p = single_bounce_path(&s, 0).unwrap();
        let d = p.truth.unwrap().flight_dist_m;
        let wall = [Segment {
            a: Point2D::new(45.0, 50.0),
            b: Point2D::new(55.0, 50.0),
        }];
        let isc = implied_scatterer(&p, s.anchor, s.vehicle, d, Some(&wall)).unwrap();
        assert_abs_diff_eq!(isc.map_distance_m.unwrap(), 0.0, epsilon = 1e-9);
    }

    /// 3 single-bounce + 2 double-bounce paths, delays referenced jointly.
    fn mixed_observations(s: &Scenario) -> (Vec<PathObservation>, Vec<u8>) {
        let mut paths = vec![
            single_bounce_path(s, 0).unwrap(),
            single_bounce_path(s, 1).unwrap(),
            single_bounce_path(s, 2).unwrap(),
            double_bounce_path(s, 0, 2).unwrap(),
            double_bounce_path(s, 1, 0).unwrap(),
        ];
        paths = reference_delays(paths, s.c);
        let bounces = paths
            .iter()
            .map(|p| p.truth.unwrap().bounce_count)
            .collect();
        (paths, bounces)
    }

    #[test]
    fn mixed_bounce_classification_without_map() {
        let s = worked_scenario();
        let (obs, bounces) = mixed_observations(&s);
        let fix = classify_and_solve(&obs, s.anchor, &ClassifyConfig::default(), None).unwrap();
        assert!(fix.position.distance_to(s.vehicle) <= 1e-6);
        for (label, bounce) in fix.labels.iter().zip(bounces.iter()) {
            match bounce {
                1 => assert_eq!(*label, PathLabel::SingleBounce),
                _ => assert_eq!(*label, PathLabel::MultiBounce),
            }
        }
    }

    #[test]
    fn mixed_bounce_classification_with_map() {
        let s = worked_scenario();
        let (obs, bounces) = mixed_observations(&s);
        let map = s.scatterer_map();
        let fix =
            classify_and_solve(&obs, s.anchor, &ClassifyConfig::default(), Some(&map)).unwrap();
        assert!(fix.position.distance_to(s.vehicle) <= 1e-6);
        for (label, bounce) in fix.labels.iter().zip(bounces.iter()) {
            match bounce {
                1 => assert_eq!(*label, PathLabel::SingleBounce),
                _ => assert_eq!(*label, PathLabel::MultiBounce),
            }
        }
    }

    #[test]
    fn all_single_bounce_matches_full_solve() {
        let s = Scenario::new(
            Point2D::new(0.0, 0.0),
            Point2D::new(70.0, 30.0),
            vec![
                Point2D::new(50.0, 50.0),
                Point2D::new(-20.0, 40.0),
                Point2D::new(120.0, -10.0),
                Point2D::new(30.0, -60.0),
            ],
        )
        .unwrap();
        let obs = crate::scenario::enumerate_paths(&s, 1).unwrap();
        let full = solve_linear(&obs, s.anchor, &SolveOptions::default()).unwrap();
        let fix = classify_and_solve(&obs, s.anchor, &ClassifyConfig::default(), None).unwrap();
        assert!(fix.position.distance_to(full.position) <= 1e-6);
        assert!(fix.labels.iter().all(|&l| l == PathLabel::SingleBounce));
    }

    #[test]
    fn two_single_bounce_among_five_fails() {
        let s = Scenario::new(
            Point2D::new(0.0, 0.0),
            Point2D::new(100.0, 0.0),
            vec![
                Point2D::new(50.0, 50.0),
                Point2D::new(50.0, -30.0),
                Point2D::new(120.0, 40.0),
                Point2D::new(-40.0, -70.0),
            ],
        )
        .unwrap();
        let mut paths = vec![
            single_bounce_path(&s, 0).unwrap(),
            single_bounce_path(&s, 1).unwrap(),
            double_bounce_path(&s, 0, 2).unwrap(),
            double_bounce_path(&s, 2, 3).unwrap(),
            double_bounce_path(&s, 3, 1).unwrap(),
        ];
        paths = reference_delays(paths, s.c);
        let map = s.scatterer_map();
        match classify_and_solve(&paths, s.anchor, &ClassifyConfig::default(), Some(&map)) {
            Err(HvpError::ClassificationFailure(_)) => {}
            other => panic!("expected classification failure, got {other:?}"),
        }
    }

    #[test]
    fn fewer_than_three_paths_is_under_determined() {
        let s = worked_scenario();
        let obs = vec![single_bounce_path(&s, 0).unwrap()];
        assert!(matches!(
            classify_and_solve(&obs, s.anchor, &ClassifyConfig::default(), None),
            Err(HvpError::UnderDetermined { .. })
        ));
    }
}
