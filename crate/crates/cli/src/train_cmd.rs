//! `train`: fits a model to a generated dataset and writes the history,
//! checkpoint, and a summary report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use smoothdyn::dynamics::{load_heat_grid_dataset, Trajectory};
use smoothdyn::layers::{
    gcn_spec, r_uni_graph_spec, r_uni_mesh_spec, DecoderKind, LayerKind, LayerSpec, Model,
    ModelSpec, OperatorSource, FAITHFUL_T_MAX, RELAXED_T_MAX, WEIGHT_TOL,
};
use smoothdyn::mesh::MeshOperators;
use smoothdyn::train::{samples_from_trajectory, train, TrainConfig, TrainSample};
use smoothdyn::util::stream_rng;

use crate::error::{domain, input_err, CliError};
use crate::gen_data::MeshDatasetManifest;
use crate::io::{ensure_dir, load_config, write_out, write_resolved};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Fraction of the data held out for validation.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Caps the dataset: grid datasets keep the first `limit` samples in
    /// file order; mesh datasets keep the first `limit` windows per
    /// trajectory.
    #[serde(default)]
    pub limit: Option<usize>,
    /// Window start spacing when slicing mesh trajectories.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Targets per window for mesh trajectories; defaults to the training
    /// rollout depth.
    #[serde(default)]
    pub horizon: Option<usize>,
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Graph-convolution baseline over the dataset's operator.
    Gcn { widths: Vec<usize>, seed: u64 },
    /// Zero-pad encoder, Taylor-relaxed convolutions, decoder.
    RUniGraph {
        width_in: usize,
        hidden: usize,
        encoder_layers: usize,
        #[serde(default = "default_relaxed_t")]
        t_max: usize,
        decoder: DecoderKind,
        width_out: usize,
        seed: u64,
    },
    /// Same stack with faithful Lie convolutions instead of relaxed ones.
    LieUniGraph {
        width_in: usize,
        hidden: usize,
        encoder_layers: usize,
        #[serde(default = "default_faithful_t")]
        t_max: usize,
        decoder: DecoderKind,
        width_out: usize,
        seed: u64,
    },
    /// Mesh stack: Lie convolutions with pairwise sorting over the rewired
    /// cotangent operator.
    RUniMesh {
        width_in: usize,
        hidden: usize,
        encoder_layers: usize,
        #[serde(default = "default_faithful_t")]
        t_max: usize,
        decoder: DecoderKind,
        width_out: usize,
        seed: u64,
    },
}

fn default_relaxed_t() -> usize {
    RELAXED_T_MAX
}

fn default_faithful_t() -> usize {
    FAITHFUL_T_MAX
}

/// Run summary written next to the history so downstream tooling does not
/// have to parse the CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub dataset_kind: String,
    pub param_count: usize,
    pub n_train_samples: usize,
    pub n_val_samples: usize,
    pub final_train_mse: Option<f64>,
    pub final_val_mse: Option<f64>,
    pub final_mean_pred_rq: Option<f64>,
    pub final_mean_target_rq: Option<f64>,
    pub diverged: Option<usize>,
}

enum Dataset {
    /// Independent (graph, input, target) samples.
    Grid(Vec<TrainSample>),
    /// Sliding windows grouped by source trajectory over one shared
    /// operator.
    Mesh(Vec<Vec<TrainSample>>),
}

fn detect_and_load(data: &Path, cfg: &TrainCmdConfig) -> Result<Dataset, CliError> {
    let manifest_path = data.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| input_err(&manifest_path, e))?;
    let probe: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", manifest_path.display())))?;
    if probe.get("graphs_file").is_some() {
        let mut samples: Vec<TrainSample> = load_heat_grid_dataset(data)
            .map_err(domain)?
            .iter()
            .map(TrainSample::from_heat)
            .collect::<Result<_, _>>()
            .map_err(domain)?;
        if let Some(limit) = cfg.limit {
            samples.truncate(limit);
        }
        if samples.is_empty() {
            return Err(CliError::Domain("dataset slice is empty".into()));
        }
        return Ok(Dataset::Grid(samples));
    }
    if probe.get("ops_file").is_some() {
        let manifest: MeshDatasetManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", manifest_path.display())))?;
        let ops_path = data.join(&manifest.ops_file);
        let ops_text =
            std::fs::read_to_string(&ops_path).map_err(|e| input_err(&ops_path, e))?;
        let ops = MeshOperators::from_json(&ops_text).map_err(domain)?;
        if ops.min_weight() < -WEIGHT_TOL {
            return Err(CliError::Domain(format!(
                "mesh operator has negative cotangent weight {}; rewire the mesh first",
                ops.min_weight()
            )));
        }
        let horizon = cfg.horizon.unwrap_or(cfg.train.bptt_rollout).max(1);
        let mut groups = Vec::with_capacity(manifest.entries.len());
        for entry in &manifest.entries {
            let traj_path = data.join(&entry.trajectory);
            let traj =
                Trajectory::read_file(&traj_path).map_err(|e| input_err(&traj_path, e))?;
            let mut windows = samples_from_trajectory(
                ops.a_norm(),
                &traj,
                cfg.train.input_window,
                horizon,
                cfg.stride,
            );
            if let Some(limit) = cfg.limit {
                windows.truncate(limit);
            }
            if !windows.is_empty() {
                groups.push(windows);
            }
        }
        if groups.is_empty() {
            return Err(CliError::Domain(
                "no training windows: trajectories are shorter than window + horizon".into(),
            ));
        }
        return Ok(Dataset::Mesh(groups));
    }
    Err(CliError::Input(format!(
        "{}: manifest is neither a grid dataset (graphs_file) nor a mesh dataset (ops_file)",
        manifest_path.display()
    )))
}

fn build_spec(model: &ModelConfig, source: OperatorSource) -> Result<ModelSpec, CliError> {
    let spec = match model {
        ModelConfig::Gcn { widths, seed } => gcn_spec(widths, source, *seed).map_err(domain)?,
        ModelConfig::RUniGraph {
            width_in,
            hidden,
            encoder_layers,
            t_max,
            decoder,
            width_out,
            seed,
        } => {
            if source != OperatorSource::GraphNormalized {
                return Err(CliError::Config(
                    "r_uni_graph runs on grid datasets; use r_uni_mesh for mesh data".into(),
                ));
            }
            r_uni_graph_spec(
                *width_in,
                *hidden,
                *encoder_layers,
                *t_max,
                *decoder,
                *width_out,
                *seed,
            )
            .map_err(domain)?
        }
        ModelConfig::LieUniGraph {
            width_in,
            hidden,
            encoder_layers,
            t_max,
            decoder,
            width_out,
            seed,
        } => {
            if source != OperatorSource::GraphNormalized {
                return Err(CliError::Config(
                    "lie_uni_graph runs on grid datasets; use r_uni_mesh for mesh data".into(),
                ));
            }
            let mut layers = vec![LayerSpec::new(LayerKind::ZeroPad, *width_in, *hidden)];
            for _ in 0..*encoder_layers {
                layers.push(
                    LayerSpec::new(LayerKind::LieUni, *hidden, *hidden).with_t_max(*t_max),
                );
            }
            let decoder_layer = match decoder {
                DecoderKind::MlpSin => LayerSpec::new(LayerKind::MlpSin, *hidden, *width_out),
                DecoderKind::GcnDecoder => {
                    LayerSpec::new(LayerKind::GcnDecoder, *hidden, *width_out)
                }
            };
            layers.push(decoder_layer);
            ModelSpec::new(layers, OperatorSource::GraphNormalized, *seed)
        }
        ModelConfig::RUniMesh {
            width_in,
            hidden,
            encoder_layers,
            t_max,
            decoder,
            width_out,
            seed,
        } => {
            if source != OperatorSource::MeshWeighted {
                return Err(CliError::Config(
                    "r_uni_mesh runs on mesh datasets; use r_uni_graph for grid data".into(),
                ));
            }
            r_uni_mesh_spec(
                *width_in,
                *hidden,
                *encoder_layers,
                *t_max,
                *decoder,
                *width_out,
                *seed,
            )
            .map_err(domain)?
        }
    };
    Ok(spec)
}

fn check_widths(spec: &ModelSpec, window: usize) -> Result<(), CliError> {
    let first = spec.layers.first().map(|l| l.width_in).unwrap_or(0);
    let last = spec.layers.last().map(|l| l.width_out).unwrap_or(0);
    if first != window {
        return Err(CliError::Config(format!(
            "model takes {first} input channels but the window provides {window}"
        )));
    }
    if last != 1 {
        return Err(CliError::Config(format!(
            "autoregressive training needs a single output channel, model emits {last}"
        )));
    }
    Ok(())
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, "val-split", 0);
    order.shuffle(&mut rng);
    order
}

/// Validation count for `n` units at the requested fraction: rounded, but
/// at least one (when the fraction is positive and there is a unit to
/// spare) and never all of them.
fn val_count(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 || n < 2 {
        return 0;
    }
    (((n as f64) * fraction).round() as usize).clamp(1, n - 1)
}

fn split(dataset: Dataset, fraction: f64, seed: u64) -> (Vec<TrainSample>, Vec<TrainSample>) {
    match dataset {
        Dataset::Grid(samples) => {
            let order = shuffled_indices(samples.len(), seed);
            let n_val = val_count(samples.len(), fraction);
            let mut samples: Vec<Option<TrainSample>> = samples.into_iter().map(Some).collect();
            let mut val = Vec::with_capacity(n_val);
            let mut train = Vec::with_capacity(samples.len() - n_val);
            for (rank, idx) in order.into_iter().enumerate() {
                let s = samples[idx].take().expect("each index visited once");
                if rank < n_val {
                    val.push(s);
                } else {
                    train.push(s);
                }
            }
            (train, val)
        }
        Dataset::Mesh(groups) => {
            // Held-out whole trajectories, so validation windows never
            // overlap training windows. A single trajectory falls back to
            // a window-level split.
            if groups.len() == 1 {
                return split(
                    Dataset::Grid(groups.into_iter().next().expect("one group")),
                    fraction,
                    seed,
                );
            }
            let order = shuffled_indices(groups.len(), seed);
            let n_val = val_count(groups.len(), fraction);
            let mut groups: Vec<Option<Vec<TrainSample>>> =
                groups.into_iter().map(Some).collect();
            let mut val = Vec::new();
            let mut train = Vec::new();
            for (rank, idx) in order.into_iter().enumerate() {
                let g = groups[idx].take().expect("each index visited once");
                if rank < n_val {
                    val.extend(g);
                } else {
                    train.extend(g);
                }
            }
            (train, val)
        }
    }
}

pub fn run(config_path: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let cfg: TrainCmdConfig = load_config(config_path)?;
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(CliError::Config("val_fraction must lie in [0, 1)".into()));
    }
    if cfg.stride == 0 {
        return Err(CliError::Config("stride must be >= 1".into()));
    }
    cfg.train.validate().map_err(domain)?;

    let dataset = detect_and_load(data, &cfg)?;
    let (source, dataset_kind) = match &dataset {
        Dataset::Grid(_) => (OperatorSource::GraphNormalized, "heat_grid"),
        Dataset::Mesh(_) => (OperatorSource::MeshWeighted, "mesh_pde"),
    };
    if matches!(dataset, Dataset::Grid(_)) && cfg.train.input_window != 1 {
        return Err(CliError::Config(
            "grid datasets are single-pair samples; set train.input_window to 1".into(),
        ));
    }
    let spec = build_spec(&cfg.model, source)?;
    check_widths(&spec, cfg.train.input_window)?;

    let (train_set, val_set) = split(dataset, cfg.val_fraction, cfg.train.seed);
    let mut model = Model::<f64>::build(spec).map_err(domain)?;
    let param_count = model.param_count();
    let history = train(&mut model, &train_set, &val_set, &cfg.train).map_err(domain)?;

    ensure_dir(out)?;
    model.save(&out.join("checkpoint")).map_err(|e| CliError::Output(e.to_string()))?;
    history
        .write_csv(&out.join("history.csv"))
        .map_err(|e| CliError::Output(e.to_string()))?;
    let last = history.epochs.last();
    let report = TrainReport {
        dataset_kind: dataset_kind.into(),
        param_count,
        n_train_samples: train_set.len(),
        n_val_samples: val_set.len(),
        final_train_mse: last.map(|r| r.train_mse),
        final_val_mse: last.map(|r| r.val_mse),
        final_mean_pred_rq: last.map(|r| r.mean_pred_rq),
        final_mean_target_rq: last.map(|r| r.mean_target_rq),
        diverged: history.diverged,
    };
    write_out(
        &out.join("train_report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_resolved(out, "train", &cfg)
}
