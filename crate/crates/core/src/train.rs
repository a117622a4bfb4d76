//! Loss, Adam, the training loop with autoregressive backpropagation, and
//! rollout inference.
//!
//! Training works on [`TrainSample`]s: an operator matrix, an input window
//! of frames, and one or more future target frames. Each optimization step
//! stacks the window as feature channels, runs the model, feeds the
//! prediction back as the newest window frame, and repeats for up to
//! `bptt_rollout` steps, summing the per-step mean squared errors. Rollout
//! inference applies the same window mechanics without gradients.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, Tape};
use crate::dynamics::{DynamicsError, HeatSample, Trajectory};
use crate::graph::{normalized_adjacency, rayleigh_quotient, GraphError};
use crate::layers::{LayerError, Model, ParamInfo};
use crate::scalar::{Scalar, ScalarKind};
use crate::util::stream_rng;

/// Adam denominator offset.
pub const ADAM_EPS: f64 = 1e-8;

/// Learning rates swept by the shipped experiment configs.
pub const LR_GRID: [f64; 3] = [1e-2, 1e-3, 3e-4];

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("gradient for parameter {name} is not finite")]
    NanGradient { name: String },
    #[error("training needs at least one sample")]
    EmptyDataset,
    #[error("sample holds {got} window frames but the config expects {expected}")]
    WindowSize { expected: usize, got: usize },
    #[error("model emitted {got} columns where one prediction channel was expected")]
    PredictionWidth { got: usize },
    #[error("rollout produced a non-finite frame at step 0")]
    ImmediateDivergence,
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters. `input_window` is 1 for the grid-heat pairs
/// and 5 for mesh trajectories; `bptt_rollout` counts the autoregressive
/// steps backpropagated per sample (capped by the targets available).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub epochs: usize,
    pub batch_size: usize,
    pub bptt_rollout: usize,
    pub input_window: usize,
    pub seed: u64,
    /// Global-norm clip; on by default because deep exponential stacks can
    /// spike early. `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            betas: (0.9, 0.999),
            epochs: 10,
            batch_size: 32,
            bptt_rollout: 3,
            input_window: 1,
            seed: 0,
            grad_clip: Some(1.0),
        }
    }
}

impl TrainConfig {
    /// `lr` may be zero (a frozen run is a useful control) but not negative.
    pub fn validate(&self) -> Result<(), TrainError> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(TrainError::Config(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        for (i, b) in [self.betas.0, self.betas.1].into_iter().enumerate() {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::Config(format!("beta{} must lie in [0, 1), got {b}", i + 1)));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 || self.bptt_rollout == 0 || self.input_window == 0 {
            return Err(TrainError::Config(
                "epochs, batch_size, bptt_rollout, and input_window must be positive".into(),
            ));
        }
        if let Some(c) = self.grad_clip {
            if !c.is_finite() || c <= 0.0 {
                return Err(TrainError::Config(format!("grad_clip must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Mean squared deviation between two nodes as a 1x1 tape node.
pub fn mse_loss<T: Scalar>(
    tape: &mut Tape<T>,
    pred: NodeId,
    target: NodeId,
) -> Result<NodeId, TrainError> {
    Ok(tape.mse(pred, target)?)
}

/// First and second moment estimates, one pair per parameter slot.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<f64>>,
}

impl<T: Scalar> AdamState<T> {
    /// Moments start at zero with the shapes of `params`.
    pub fn new(params: &[Array2<T>]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
            v: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update in place. `grads` slots of `None` count
/// as zero. A non-finite gradient aborts, naming the parameter. Over the
/// complex field the second moment tracks squared magnitudes, so the
/// update direction stays a complex rescaling of the first moment.
pub fn adam_step<T: Scalar>(
    params: &mut [Array2<T>],
    grads: &[Option<Array2<T>>],
    names: &[ParamInfo],
    state: &mut AdamState<T>,
    lr: f64,
    betas: (f64, f64),
) -> Result<(), TrainError> {
    assert_eq!(params.len(), grads.len(), "one gradient slot per parameter");
    assert_eq!(params.len(), state.m.len(), "state built for a different model");
    let (b1, b2) = betas;
    state.step += 1;
    let corr1 = 1.0 - b1.powi(state.step as i32);
    let corr2 = 1.0 - b2.powi(state.step as i32);
    for (slot, param) in params.iter_mut().enumerate() {
        let zero;
        let g = match &grads[slot] {
            Some(g) => {
                if g.iter().any(|v| !v.is_finite()) {
                    let name = names
                        .get(slot)
                        .map_or_else(|| format!("slot {slot}"), |info| info.name.clone());
                    return Err(TrainError::NanGradient { name });
                }
                g
            }
            None => {
                zero = Array2::zeros(param.dim());
                &zero
            }
        };
        let m = &mut state.m[slot];
        let v = &mut state.v[slot];
        for ((p, m), (v, g)) in
            param.iter_mut().zip(m.iter_mut()).zip(v.iter_mut().zip(g.iter()))
        {
            *m = *m * T::from_f64(b1) + *g * T::from_f64(1.0 - b1);
            *v = *v * b2 + g.abs2() * (1.0 - b2);
            let m_hat = *m * T::from_f64(1.0 / corr1);
            let v_hat = *v / corr2;
            *p = *p - m_hat * T::from_f64(lr / (v_hat.sqrt() + ADAM_EPS));
        }
    }
    Ok(())
}

/// Scales `grads` so their joint Frobenius norm is at most `max_norm`;
/// returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Option<Array2<T>>], max_norm: f64) -> f64 {
    let total: f64 = grads
        .iter()
        .flatten()
        .map(|g| g.iter().map(|v| v.abs2()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if total > max_norm && total > 0.0 {
        let scale = T::from_f64(max_norm / total);
        for g in grads.iter_mut().flatten() {
            g.mapv_inplace(|v| v * scale);
        }
    }
    total
}

/// One training or evaluation unit: the operator the model runs on, the
/// input window (oldest first, single-channel frames), and the future
/// frames to fit, in time order.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub a_norm: Array2<f64>,
    pub window: Vec<Array2<f64>>,
    pub targets: Vec<Array2<f64>>,
}

impl TrainSample {
    /// Grid-heat pairs: window of one frame, one target.
    pub fn from_heat(sample: &HeatSample) -> Result<Self, TrainError> {
        Ok(TrainSample {
            a_norm: normalized_adjacency(&sample.graph)?,
            window: vec![sample.input.clone()],
            targets: vec![sample.target.clone()],
        })
    }
}

/// Slices a trajectory into sliding-window samples: frames
/// `[k, k + window)` as input and the next `horizon` frames as targets,
/// with window starts `stride` apart.
pub fn samples_from_trajectory(
    a_norm: &Array2<f64>,
    traj: &Trajectory,
    input_window: usize,
    horizon: usize,
    stride: usize,
) -> Vec<TrainSample> {
    assert!(input_window >= 1 && horizon >= 1 && stride >= 1, "window, horizon, stride >= 1");
    let mut out = Vec::new();
    let mut start = 0;
    while start + input_window + horizon <= traj.frames.len() {
        out.push(TrainSample {
            a_norm: a_norm.clone(),
            window: traj.frames[start..start + input_window].to_vec(),
            targets: traj.frames[start + input_window..start + input_window + horizon].to_vec(),
        });
        start += stride;
    }
    out
}

/// Per-epoch log row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub mean_pred_rq: f64,
    pub mean_target_rq: f64,
    pub seconds: f64,
}

/// Training log: one row per completed epoch, plus the epoch index at which
/// the loss stopped being finite, if that happened.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub diverged: Option<usize>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse,mean_pred_rq,mean_target_rq,seconds\n");
        for row in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.epoch, row.train_mse, row.val_mse, row.mean_pred_rq, row.mean_target_rq, row.seconds
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn final_val_mse(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.val_mse)
    }
}

/// Places a single-channel frame node into column `col` of an `(n, width)`
/// matrix by right-multiplying with a selector row, so window stacking
/// stays differentiable through fed-back predictions.
fn place_column<T: Scalar>(
    tape: &mut Tape<T>,
    frame: NodeId,
    col: usize,
    width: usize,
) -> Result<NodeId, TrainError> {
    let mut selector = Array2::zeros((1, width));
    selector[(0, col)] = T::one();
    let sel = tape.constant(selector);
    Ok(tape.matmul(frame, sel)?)
}

fn stack_window<T: Scalar>(
    tape: &mut Tape<T>,
    window: &VecDeque<NodeId>,
) -> Result<NodeId, TrainError> {
    let width = window.len();
    let mut acc: Option<NodeId> = None;
    for (col, &frame) in window.iter().enumerate() {
        let placed = place_column(tape, frame, col, width)?;
        acc = Some(match acc {
            None => placed,
            Some(a) => tape.add(a, placed)?,
        });
    }
    Ok(acc.expect("window is non-empty"))
}

/// Records the autoregressive loss of one sample: up to `bptt_rollout`
/// model applications, each fed the window with earlier predictions
/// substituted in, summing per-step MSE. Returns the loss node and the
/// prediction nodes.
fn rollout_loss<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &crate::layers::BoundModel<'_, T>,
    sample: &TrainSample,
    cfg: &TrainConfig,
) -> Result<(NodeId, Vec<NodeId>), TrainError> {
    if sample.window.len() != cfg.input_window {
        return Err(TrainError::WindowSize {
            expected: cfg.input_window,
            got: sample.window.len(),
        });
    }
    let steps = cfg.bptt_rollout.min(sample.targets.len());
    let mut window: VecDeque<NodeId> = sample
        .window
        .iter()
        .map(|f| tape.constant(f.mapv(T::from_f64)))
        .collect();
    let mut loss: Option<NodeId> = None;
    let mut preds = Vec::with_capacity(steps);
    for target in sample.targets.iter().take(steps) {
        let input = if window.len() == 1 {
            window[0]
        } else {
            stack_window(tape, &window)?
        };
        let pred = bound.forward(tape, input)?;
        let width = tape.value(pred).ncols();
        if width != 1 {
            return Err(TrainError::PredictionWidth { got: width });
        }
        preds.push(pred);
        let target_node = tape.constant(target.mapv(T::from_f64));
        let step_loss = tape.mse(pred, target_node)?;
        loss = Some(match loss {
            None => step_loss,
            Some(acc) => tape.add(acc, step_loss)?,
        });
        window.pop_front();
        window.push_back(pred);
    }
    Ok((loss.expect("at least one target per sample"), preds))
}

/// Mean per-sample autoregressive loss and mean Rayleigh quotients of the
/// predicted and target frames, without touching gradients.
fn evaluate<T: Scalar>(
    model: &Model<T>,
    samples: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(f64, f64, f64), TrainError> {
    let mut loss_sum = 0.0;
    let mut pred_rq = (0.0, 0usize);
    let mut target_rq = (0.0, 0usize);
    for sample in samples {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, &sample.a_norm)?;
        let (loss, preds) = rollout_loss(&mut tape, &bound, sample, cfg)?;
        loss_sum += tape.value(loss)[(0, 0)].re();
        // Zero frames carry no Rayleigh quotient and are skipped per side,
        // matching the offline mean-quotient metric exactly.
        for pred in &preds {
            if let Ok(q) = rayleigh_quotient(&sample.a_norm, tape.value(*pred)) {
                pred_rq = (pred_rq.0 + q, pred_rq.1 + 1);
            }
        }
        for target in sample.targets.iter().take(preds.len()) {
            if let Ok(q) = rayleigh_quotient(&sample.a_norm, target) {
                target_rq = (target_rq.0 + q, target_rq.1 + 1);
            }
        }
    }
    let n = samples.len() as f64;
    Ok((
        loss_sum / n,
        pred_rq.0 / pred_rq.1.max(1) as f64,
        target_rq.0 / target_rq.1.max(1) as f64,
    ))
}

/// Trains `model` in place. Per epoch: shuffle, batch, record each batch on
/// one tape (parameters registered once, per-sample operators bound
/// separately), average the per-sample autoregressive losses, backward,
/// optional global-norm clip, Adam step. Returns the per-epoch history; a
/// non-finite batch loss stops the run and is flagged in the history.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<History, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let names = model.spec().param_infos();
    let mut state = AdamState::new(model.params());
    let mut history = History::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = stream_rng(cfg.seed, "epoch-shuffle", epoch as u64);
        shuffle(&mut order, &mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut diverged = false;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let nodes: Vec<NodeId> = model
                .params()
                .iter()
                .enumerate()
                .map(|(slot, p)| tape.param(slot, p.clone()))
                .collect::<Result<_, _>>()?;
            let mut batch_loss: Option<NodeId> = None;
            for &idx in batch {
                let sample = &train_set[idx];
                let bound = model.bind_with_nodes(&mut tape, &sample.a_norm, nodes.clone())?;
                let (loss, _) = rollout_loss(&mut tape, &bound, sample, cfg)?;
                batch_loss = Some(match batch_loss {
                    None => loss,
                    Some(acc) => tape.add(acc, loss)?,
                });
            }
            let sum = batch_loss.expect("batches are non-empty");
            let loss = tape.scale_const(sum, T::from_f64(1.0 / batch.len() as f64));
            let loss_value = tape.value(loss)[(0, 0)].re();
            epoch_loss += loss_value;
            batches += 1;
            if !loss_value.is_finite() {
                diverged = true;
                break;
            }
            let mut grads = tape.backward(loss, model.params().len())?;
            if let Some(max_norm) = cfg.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            adam_step(model.params_mut(), &grads, &names, &mut state, cfg.lr, cfg.betas)?;
        }

        let train_mse = epoch_loss / batches.max(1) as f64;
        let (val_mse, mean_pred_rq, mean_target_rq) = if val_set.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            evaluate(model, val_set, cfg)?
        };
        history.epochs.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
            mean_pred_rq,
            mean_target_rq,
            seconds: started.elapsed().as_secs_f64(),
        });
        if diverged {
            history.diverged = Some(epoch);
            break;
        }
    }
    Ok(history)
}

fn shuffle<R: rand::Rng>(order: &mut [usize], rng: &mut R) {
    use rand::seq::SliceRandom;
    order.shuffle(rng);
}

/// Applies the model autoregressively for `steps` predictions starting from
/// `initial_window` (oldest first), without gradients. Returns a trajectory
/// with unit-spaced times starting at 0; a non-finite prediction truncates
/// the rollout and sets `truncated_at`. Real models only: predictions are
/// stored in the trajectory's real frame format.
pub fn rollout<T: Scalar>(
    model: &Model<T>,
    a_norm: &Array2<f64>,
    initial_window: &[Array2<f64>],
    steps: usize,
) -> Result<Trajectory, TrainError> {
    if T::KIND != ScalarKind::Real64 {
        return Err(TrainError::Config("rollout requires a real-valued model".into()));
    }
    if initial_window.is_empty() || steps == 0 {
        return Err(TrainError::Config("rollout needs a window and at least one step".into()));
    }
    let mut window: VecDeque<Array2<f64>> = initial_window.iter().cloned().collect();
    let mut frames: Vec<Array2<f64>> = Vec::with_capacity(steps);
    let mut truncated_at = None;
    for step in 0..steps {
        let stacked = stack_frames(&window);
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, a_norm, &stacked.mapv(T::from_f64))?;
        let value = tape.value(out);
        if value.ncols() != 1 {
            return Err(TrainError::PredictionWidth { got: value.ncols() });
        }
        let pred = value.mapv(|v| v.re());
        if pred.iter().any(|v| !v.is_finite()) {
            truncated_at = Some(step);
            break;
        }
        window.pop_front();
        window.push_back(pred.clone());
        frames.push(pred);
    }
    if frames.is_empty() {
        return Err(TrainError::ImmediateDivergence);
    }
    let times: Vec<f64> = (0..frames.len()).map(|k| k as f64).collect();
    let mut traj = Trajectory::new(times, frames)?;
    traj.truncated_at = truncated_at;
    Ok(traj)
}

fn stack_frames(window: &VecDeque<Array2<f64>>) -> Array2<f64> {
    let n = window[0].nrows();
    let w = window.len();
    Array2::from_shape_fn((n, w), |(r, c)| window[c][(r, 0)])
}
