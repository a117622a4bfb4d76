//! `eval`: compares a predicted trajectory against the truth on their
//! common timestamps and writes the selected metrics as CSV and JSON.

use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use smoothdyn::dynamics::Trajectory;
use smoothdyn::metrics::{
    err_smooth, metric_rows_to_csv, mre, nrmse, rayleigh_error, smape, EvalSummary, MetricRow,
    SmoothnessCase,
};

use crate::error::{domain, input_err, CliError};
use crate::io::{ensure_dir, find_operator, find_positions, stem, write_out, write_resolved};

const TIME_TOL: f64 = 1e-9;
const SMOOTH_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Nrmse,
    Smape,
    Re,
    Mre,
    ErrSmooth,
}

impl Metric {
    fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "nrmse" => Ok(Metric::Nrmse),
            "smape" => Ok(Metric::Smape),
            "re" => Ok(Metric::Re),
            "mre" => Ok(Metric::Mre),
            "err_smooth" => Ok(Metric::ErrSmooth),
            other => Err(CliError::Config(format!(
                "unknown metric '{other}'; choose from nrmse, smape, re, mre, err_smooth"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Metric::Nrmse => "nrmse",
            Metric::Smape => "smape",
            Metric::Re => "re",
            Metric::Mre => "mre",
            Metric::ErrSmooth => "err_smooth",
        }
    }
}

#[derive(Serialize)]
struct ResolvedEval<'a> {
    pred: &'a Path,
    truth: &'a Path,
    metrics: Vec<&'static str>,
    out: &'a Path,
    compared_frames: usize,
    operator_file: Option<String>,
    mesh_file: Option<String>,
}

/// Frames whose timestamps agree within [`TIME_TOL`], via a two-pointer
/// sweep over the sorted time axes.
fn align(
    pred: &Trajectory,
    truth: &Trajectory,
) -> Result<(Vec<Array2<f64>>, Vec<Array2<f64>>), CliError> {
    if pred.n() != truth.n() || pred.d() != truth.d() {
        return Err(CliError::Domain(format!(
            "frame shapes differ: prediction is {}x{}, truth is {}x{}",
            pred.n(),
            pred.d(),
            truth.n(),
            truth.d()
        )));
    }
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < pred.times.len() && j < truth.times.len() {
        let (tp, tt) = (pred.times[i], truth.times[j]);
        if (tp - tt).abs() < TIME_TOL {
            preds.push(pred.frames[i].clone());
            truths.push(truth.frames[j].clone());
            i += 1;
            j += 1;
        } else if tp < tt {
            i += 1;
        } else {
            j += 1;
        }
    }
    if preds.is_empty() {
        return Err(CliError::Domain(
            "prediction and truth share no timestamps; nothing to compare".into(),
        ));
    }
    Ok((preds, truths))
}

fn bbox_diagonal(positions: &Array2<f64>) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for row in positions.rows() {
        for k in 0..3 {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    (0..3).map(|k| (hi[k] - lo[k]) * (hi[k] - lo[k])).sum::<f64>().sqrt()
}

pub fn run(pred: &Path, truth: &Path, metrics_arg: &str, out: &Path) -> Result<(), CliError> {
    let selected: Vec<Metric> = metrics_arg
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Metric::parse)
        .collect::<Result<_, _>>()?;
    if selected.is_empty() {
        return Err(CliError::Config("no metrics selected".into()));
    }

    let pred_traj = Trajectory::read_file(pred).map_err(|e| input_err(pred, e))?;
    let truth_traj = Trajectory::read_file(truth).map_err(|e| input_err(truth, e))?;
    let (preds, truths) = align(&pred_traj, &truth_traj)?;

    // Operator and mesh sidecars live next to the truth file; they are
    // only required by the metrics that use them.
    let needs_operator = selected.iter().any(|m| matches!(m, Metric::Re | Metric::Mre));
    let operator = if needs_operator {
        Some(find_operator(truth)?.ok_or_else(|| {
            CliError::Domain(format!(
                "re/mre need the operator: no mesh_ops.json or graph.json next to {}",
                truth.display()
            ))
        })?)
    } else {
        None
    };
    let needs_positions = selected.contains(&Metric::ErrSmooth);
    let positions = if needs_positions {
        Some(find_positions(truth)?.ok_or_else(|| {
            CliError::Domain(format!(
                "err_smooth needs vertex positions: no mesh.off next to {}",
                truth.display()
            ))
        })?)
    } else {
        None
    };

    let run_id = stem(pred);
    let mesh_id = stem(truth);
    let mut summary = EvalSummary::new(&run_id);
    let mut rows = Vec::new();
    for metric in &selected {
        let value = match metric {
            Metric::Nrmse => nrmse(&preds, &truths).map_err(domain)?,
            Metric::Smape => smape(&preds, &truths).map_err(domain)?,
            Metric::Re => {
                let a = operator.as_ref().expect("operator resolved above").a_norm();
                let outcome = rayleigh_error(&preds, &truths, a).map_err(domain)?;
                summary.skipped_frames = outcome.skipped;
                outcome.value
            }
            Metric::Mre => {
                let a = operator.as_ref().expect("operator resolved above").a_norm();
                mre(&preds, &truths, a).map_err(domain)?
            }
            Metric::ErrSmooth => {
                let (pos, _) = positions.as_ref().expect("positions resolved above");
                let diag = bbox_diagonal(pos);
                if diag <= 0.0 {
                    return Err(CliError::Domain(
                        "mesh has zero extent; two-point bins are undefined".into(),
                    ));
                }
                let r_edges: Vec<f64> =
                    (0..=SMOOTH_BINS).map(|k| diag * k as f64 / SMOOTH_BINS as f64).collect();
                let case = SmoothnessCase {
                    positions: pos.clone(),
                    preds: preds.clone(),
                    targets: truths.clone(),
                };
                let outcome = err_smooth(&[case], &r_edges).map_err(domain)?;
                summary.missing_bins = outcome.missing_bins;
                outcome.value
            }
        };
        summary.metrics.insert(metric.name().into(), value);
        rows.push(MetricRow {
            run_id: run_id.clone(),
            mesh_id: mesh_id.clone(),
            metric: metric.name().into(),
            value,
        });
    }

    ensure_dir(out)?;
    write_out(&out.join("metrics.csv"), &metric_rows_to_csv(&rows))?;
    write_out(&out.join("metrics.json"), &summary.to_json())?;
    write_resolved(
        out,
        "eval",
        &ResolvedEval {
            pred,
            truth,
            metrics: selected.iter().map(|m| m.name()).collect(),
            out,
            compared_frames: preds.len(),
            operator_file: operator.as_ref().map(|o| o.file().display().to_string()),
            mesh_file: positions.as_ref().map(|(_, p)| p.display().to_string()),
        },
    )
}
