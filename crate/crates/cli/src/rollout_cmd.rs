//! `rollout`: applies a trained model autoregressively from the opening
//! frames of a stored trajectory and writes the prediction.
//!
//! The operator is discovered as a sidecar next to the init file
//! (`mesh_ops.json` or `graph.json`, as written by `gen-data` and
//! `mesh-prep`), and the window size comes from the checkpoint's first
//! layer, so the four flags fully determine the run.

use std::path::Path;

use serde::Serialize;

use smoothdyn::dynamics::Trajectory;
use smoothdyn::layers::{Model, OperatorSource, WEIGHT_TOL};
use smoothdyn::train::rollout;

use crate::error::{domain, input_err, CliError};
use crate::io::{find_operator, write_resolved_sibling, SidecarOperator};

#[derive(Serialize)]
struct ResolvedRollout<'a> {
    checkpoint: &'a Path,
    init: &'a Path,
    steps: usize,
    out: &'a Path,
    operator_file: String,
    window: usize,
    dt: f64,
    start_time: f64,
    truncated_at: Option<usize>,
}

/// Times must be uniformly spaced so predictions can be stamped onto the
/// continuation of the grid.
fn uniform_dt(times: &[f64]) -> Result<f64, CliError> {
    if times.len() < 2 {
        return Ok(1.0);
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 {
            return Err(CliError::Domain(
                "init trajectory is not uniformly spaced in time".into(),
            ));
        }
    }
    Ok(dt)
}

pub fn run(checkpoint: &Path, init: &Path, steps: usize, out: &Path) -> Result<(), CliError> {
    if steps == 0 {
        return Err(CliError::Config("steps must be >= 1".into()));
    }
    let model = Model::<f64>::load(checkpoint).map_err(|e| {
        CliError::Input(format!("{}: {e}", checkpoint.display()))
    })?;
    let init_traj = Trajectory::read_file(init).map_err(|e| input_err(init, e))?;
    if init_traj.d() != 1 {
        return Err(CliError::Domain(format!(
            "init trajectory holds {}-channel frames; rollout expects single-channel states",
            init_traj.d()
        )));
    }

    let operator = find_operator(init)?.ok_or_else(|| {
        CliError::Domain(format!(
            "no operator sidecar next to {}: expected mesh_ops.json or graph.json in the \
             same directory",
            init.display()
        ))
    })?;
    match (&operator, model.spec().operator_source) {
        (SidecarOperator::Mesh { min_weight, .. }, OperatorSource::MeshWeighted) => {
            if *min_weight < -WEIGHT_TOL {
                return Err(CliError::Domain(format!(
                    "mesh operator has negative cotangent weight {min_weight}; rewire first"
                )));
            }
        }
        (SidecarOperator::Graph { .. }, OperatorSource::GraphNormalized) => {}
        (SidecarOperator::Mesh { .. }, OperatorSource::GraphNormalized) => {
            return Err(CliError::Domain(
                "checkpoint expects a graph operator but the sidecar is mesh_ops.json".into(),
            ));
        }
        (SidecarOperator::Graph { .. }, OperatorSource::MeshWeighted) => {
            return Err(CliError::Domain(
                "checkpoint expects a mesh operator but the sidecar is graph.json".into(),
            ));
        }
    }
    let a_norm = operator.a_norm();
    if a_norm.nrows() != init_traj.n() {
        return Err(CliError::Domain(format!(
            "operator has {} nodes but the init trajectory has {}",
            a_norm.nrows(),
            init_traj.n()
        )));
    }

    let window = model.spec().layers.first().map(|l| l.width_in).unwrap_or(1);
    if init_traj.frames.len() < window {
        return Err(CliError::Domain(format!(
            "model needs a window of {window} frames but the init trajectory has {}",
            init_traj.frames.len()
        )));
    }
    let dt = uniform_dt(&init_traj.times)?;
    let initial = &init_traj.frames[..window];

    let pred = rollout(&model, a_norm, initial, steps).map_err(domain)?;
    let start = init_traj.times[window - 1];
    let times: Vec<f64> = (0..pred.frames.len()).map(|k| start + dt * (k + 1) as f64).collect();
    let truncated_at = pred.truncated_at;
    let stamped = Trajectory::new(times, pred.frames).map_err(domain)?;

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Output(format!("{}: {e}", parent.display())))?;
        }
    }
    stamped.write_file(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    write_resolved_sibling(
        out,
        "rollout",
        &ResolvedRollout {
            checkpoint,
            init,
            steps,
            out,
            operator_file: operator.file().display().to_string(),
            window,
            dt,
            start_time: start,
            truncated_at,
        },
    )
}
