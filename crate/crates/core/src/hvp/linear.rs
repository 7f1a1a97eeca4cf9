//! Algebraic positioning: one linear system over all observed paths.
//!
//! For path i with departure bearing theta_i, arrival bearing phi_i and
//! flight distance d_i = d_ref + c * rel_delay_i, the vehicle satisfies
//!
//! ```text
//! p = anchor + a_i (u(theta_i) + u(phi_i)) - d_i u(phi_i)
//! ```
//!
//! where a_i is the unknown anchor-to-scatterer distance. Moving unknowns
//! (p, d_ref, a_i) to the left gives two linear equations per path; three
//! paths make the system square and more paths overdetermine it. Paths from
//! older epochs join the same system after shifting the vehicle by the known
//! ego displacement, at the cost of one extra reference-distance unknown per
//! epoch.

use nalgebra::{DMatrix, DVector};

use super::{HvpError, PathLabel, PositionFix, SolveOptions};
use crate::scenario::{unit_vector, EpochObservation, PathObservation, Point2D};

const REL_DELAY_REFERENCE_TOL: f64 = 1e-15;

/// Positions the vehicle from one set of simultaneous paths.
///
/// Requires at least three paths whose first entry is the delay reference
/// (`rel_delay_s == 0`). At exactly three paths the system is square; with
/// more it is solved in the least-squares sense. Solutions whose recovered
/// geometry is impossible (reference distance not positive, or some
/// scatterer distance outside its path) are returned with `feasible: false`.
pub fn solve_linear(
    obs: &[PathObservation],
    anchor: Point2D,
    opts: &SolveOptions,
) -> Result<PositionFix, HvpError> {
    let epoch = EpochObservation::current(obs.to_vec());
    solve_multi_epoch(std::slice::from_ref(&epoch), anchor, opts)
}

/// Positions the vehicle from paths collected across several epochs.
///
/// Each epoch's paths are internally referenced to that epoch's first path
/// and carry the vehicle displacement accumulated since the epoch. Every
/// epoch contributes one unknown reference distance, so solvability demands
/// `2 * paths >= 2 + epochs + paths`. The returned position is the current
/// one; `d1_m` is the recovered reference distance of the first epoch.
pub fn solve_multi_epoch(
    epochs: &[EpochObservation],
    anchor: Point2D,
    opts: &SolveOptions,
) -> Result<PositionFix, HvpError> {
    if epochs.is_empty() {
        return Err(HvpError::InvalidObservations("no epochs".into()));
    }
    let n_epochs = epochs.len();
    let n_paths: usize = epochs.iter().map(|e| e.paths.len()).sum();
    for (e, epoch) in epochs.iter().enumerate() {
        if epoch.paths.is_empty() {
            return Err(HvpError::InvalidObservations(format!("epoch {e} has no paths")));
        }
        if epoch.paths[0].rel_delay_s.abs() > REL_DELAY_REFERENCE_TOL {
            return Err(HvpError::InvalidObservations(format!(
                "epoch {e}: first path must be the delay reference (rel_delay 0), got {}",
                epoch.paths[0].rel_delay_s
            )));
        }
        if !epoch.ego_displacement_m.is_finite() {
            return Err(HvpError::InvalidObservations(format!(
                "epoch {e}: non-finite ego displacement"
            )));
        }
    }

    let unknowns = 2 + n_epochs + n_paths;
    let equations = 2 * n_paths;
    if n_paths < 3 || equations < unknowns {
        return Err(HvpError::UnderDetermined {
            equations,
            unknowns,
        });
    }

    // Columns: [px, py, d_ref(epoch 0..E), a(path 0..P)].
    let mut a = DMatrix::<f64>::zeros(equations, unknowns);
    let mut b = DVector::<f64>::zeros(equations);

    let mut path_idx = 0usize;
    for (e, epoch) in epochs.iter().enumerate() {
        for p in &epoch.paths {
            let u_dep = unit_vector(p.aod_rad);
            let u_arr = unit_vector(p.aoa_rad);
            let excess = opts.c * p.rel_delay_s;
            let row = 2 * path_idx;

            a[(row, 0)] = 1.0;
            a[(row, 2 + e)] = u_arr.x;
            a[(row, 2 + n_epochs + path_idx)] = -(u_dep.x + u_arr.x);
            b[row] = anchor.x + epoch.ego_displacement_m.x - excess * u_arr.x;

            a[(row + 1, 1)] = 1.0;
            a[(row + 1, 2 + e)] = u_arr.y;
            a[(row + 1, 2 + n_epochs + path_idx)] = -(u_dep.y + u_arr.y);
            b[row + 1] = anchor.y + epoch.ego_displacement_m.y - excess * u_arr.y;

            path_idx += 1;
        }
    }

    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    if !condition.is_finite() || condition > opts.max_condition {
        return Err(HvpError::IllConditioned {
            condition,
            threshold: opts.max_condition,
        });
    }

    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| HvpError::SolveFailed(e.to_string()))?;

    let residual_vec = &a * &x - &b;
    let residual_m = (residual_vec.norm_squared() / equations as f64).sqrt();

    let position = Point2D::new(x[0], x[1]);
    let d_refs: Vec<f64> = (0..n_epochs).map(|e| x[2 + e]).collect();

    let mut feasible = d_refs.iter().all(|&d| d > 0.0);
    let mut path_idx = 0usize;
    for (e, epoch) in epochs.iter().enumerate() {
        for p in &epoch.paths {
            let d_i = d_refs[e] + opts.c * p.rel_delay_s;
            let a_i = x[2 + n_epochs + path_idx];
            // Strict open interval; NaN also lands in the infeasible branch.
            #[allow(clippy::manual_range_contains)]
            if !(a_i > 0.0 && a_i < d_i) {
                feasible = false;
            }
            path_idx += 1;
        }
    }

    Ok(PositionFix {
        position,
        d1_m: d_refs[0],
        residual_m,
        condition,
        feasible,
        labels: vec![PathLabel::SingleBounce; n_paths],
    })
}
