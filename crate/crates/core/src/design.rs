//! Amplitude search over single-column lower-triangular dither patterns.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{averaged_j, spectrum, transition_matrix, TransitionMethod};
use crate::certify::{is_hurwitz, robustness, solve_lyapunov};
use crate::error::{Error, Result};
use crate::network::{build_reduction, ClusterPartition, OscillatorNetwork};
use crate::reduction::compute_r;
use crate::vibration::{assemble_j, assemble_p_hat, design_lower_triangular, VibrationSchedule};

/// Objective values within this relative gap count as ties.
pub const TOL_TIE: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub u: f64,
    /// Robustness of each targeted averaged block; `None` if not Hurwitz.
    pub robustness: Vec<Option<f64>>,
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignResult {
    pub schedule: VibrationSchedule,
    pub targets: Vec<usize>,
    pub selected_u: f64,
    pub s0: f64,
    pub robustness_before: Vec<Option<f64>>,
    pub robustness_after: Vec<Option<f64>>,
    pub trace: Vec<ScanPoint>,
    pub improved: bool,
}

fn block_robustness(a: &DMatrix<f64>) -> Option<f64> {
    if !is_hurwitz(a) {
        return None;
    }
    solve_lyapunov(a).and_then(|x| robustness(&x)).ok()
}

/// Schedule placing the lower-triangular pattern with amplitude `u` on
/// every targeted cluster.
pub fn targeted_schedule(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    targets: &[usize],
    u: f64,
    epsilon: f64,
) -> Result<VibrationSchedule> {
    let red = build_reduction(net, part)?;
    let mut s = VibrationSchedule::new(epsilon)?;
    for &k in targets {
        s.extend(&design_lower_triangular(&red, k, u)?.amplitudes);
    }
    Ok(s)
}

/// Scans `u_grid`, maximizing the smallest targeted robustness subject to
/// every targeted averaged block being Hurwitz. Ties go to smaller `|u|`.
pub fn amplitude_scan(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    targets: &[usize],
    u_grid: &[f64],
    s0: f64,
    epsilon: f64,
    quadrature_points: usize,
) -> Result<DesignResult> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no target clusters".into()));
    }
    if let Some(&k) = targets.iter().find(|&&k| k >= part.len()) {
        return Err(Error::InvalidArgument(format!("cluster {k} does not exist")));
    }
    if u_grid.is_empty() || u_grid.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidArgument("amplitude grid must be nonempty and finite".into()));
    }
    let red = build_reduction(net, part)?;
    let r = compute_r(&red)?;
    let j_blocks = assemble_j(&red, &r);
    let before: Vec<Option<f64>> = j_blocks.iter().map(block_robustness).collect();

    let evaluate = |u: f64| -> Result<ScanPoint> {
        let mut sched = VibrationSchedule::new(epsilon)?;
        for &k in targets {
            sched.extend(&design_lower_triangular(&red, k, u)?.amplitudes);
        }
        let p_hat = assemble_p_hat(&red, &r, &sched)?;
        let picked_j: Vec<DMatrix<f64>> = targets.iter().map(|&k| j_blocks[k].clone()).collect();
        let picked_p: Vec<DMatrix<f64>> = targets.iter().map(|&k| p_hat[k].clone()).collect();
        let phi = transition_matrix(&picked_p, s0, TransitionMethod::ClosedForm)?;
        let jbar = averaged_j(&picked_j, &phi, quadrature_points)?;
        let robustness: Vec<Option<f64>> = jbar.iter().map(block_robustness).collect();
        let objective = robustness
            .iter()
            .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)));
        Ok(ScanPoint { u, robustness, objective })
    };
    let trace = u_grid
        .par_iter()
        .map(|&u| evaluate(u))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<&ScanPoint> = None;
    for p in &trace {
        let Some(obj) = p.objective else { continue };
        best = match best {
            None => Some(p),
            Some(b) => {
                let bo = b.objective.expect("feasible");
                let tie = (obj - bo).abs() <= TOL_TIE * bo.abs().max(1.0);
                let better = if tie {
                    (p.u.abs(), p.u) < (b.u.abs(), b.u)
                } else {
                    obj > bo
                };
                Some(if better { p } else { b })
            }
        };
    }
    let best = best.ok_or(Error::NoFeasibleAmplitude)?;
    let selected_u = best.u;
    let mut after = before.clone();
    for (t, &k) in targets.iter().enumerate() {
        after[k] = best.robustness[t];
    }
    let improved = targets.iter().all(|&k| match (before[k], after[k]) {
        (Some(b), Some(a)) => a >= b,
        (None, Some(_)) => true,
        _ => false,
    }) && targets.iter().any(|&k| match (before[k], after[k]) {
        (Some(b), Some(a)) => a > b * (1.0 + TOL_TIE) + TOL_TIE,
        (None, Some(_)) => true,
        _ => false,
    });
    let mut schedule = VibrationSchedule::new(epsilon)?;
    for &k in targets {
        schedule.extend(&design_lower_triangular(&red, k, selected_u)?.amplitudes);
    }
    Ok(DesignResult {
        schedule,
        targets: targets.to_vec(),
        selected_u,
        s0,
        robustness_before: before,
        robustness_after: after,
        trace,
        improved,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontierPoint {
    pub u: f64,
    pub spectrum: Vec<[f64; 2]>,
    pub trace: f64,
    pub determinant: f64,
    pub hurwitz: bool,
}

/// Spectrum of the averaged block with generator `u * pattern` along the grid.
pub fn hurwitz_frontier(
    j: &DMatrix<f64>,
    pattern: &DMatrix<f64>,
    u_grid: &[f64],
    s0: f64,
    quadrature_points: usize,
) -> Result<Vec<FrontierPoint>> {
    u_grid
        .par_iter()
        .map(|&u| {
            let phi = transition_matrix(&[pattern * u], s0, TransitionMethod::ClosedForm)?;
            let jbar = averaged_j(std::slice::from_ref(j), &phi, quadrature_points)?.remove(0);
            Ok(FrontierPoint {
                u,
                spectrum: spectrum(&jbar),
                trace: jbar.trace(),
                determinant: jbar.determinant(),
                hurwitz: is_hurwitz(&jbar),
            })
        })
        .collect()
}
