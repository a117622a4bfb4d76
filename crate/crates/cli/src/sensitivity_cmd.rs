//! `sensitivity`: sweeps the exponential truncation order of relaxed
//! convolutions at initialization and records how far the layer pushes the
//! Rayleigh-quotient distribution of grid-heat fields.
//!
//! For each truncation order and seed, a freshly initialized zero-pad +
//! relaxed stack maps every dataset input; the row written is the KL
//! divergence from the input quotient distribution to the output one.
//! Larger orders approximate the exact exponential better, so the
//! divergence falls with the truncation order.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use smoothdyn::autodiff::Tape;
use smoothdyn::dynamics::{gen_heat_grid_dataset, HeatGridConfig};
use smoothdyn::graph::{normalized_adjacency, rayleigh_quotient};
use smoothdyn::layers::{LayerKind, LayerSpec, Model, ModelSpec, OperatorSource};
use smoothdyn::metrics::{kl_rq_distributions, RqDistribution, KL_BINS};
use smoothdyn::util::stream_rng;

use crate::error::{domain, CliError};
use crate::io::{ensure_dir, load_config, write_out, write_resolved};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    #[serde(default = "default_t_values")]
    pub t_max_values: Vec<usize>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    /// Hidden width the single input channel is zero-padded into.
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_layers")]
    pub encoder_layers: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub dataset: HeatGridConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_t_values() -> Vec<usize> {
    vec![1, 2, 3, 5, 7, 10]
}

fn default_n_seeds() -> usize {
    10
}

fn default_width() -> usize {
    8
}

fn default_layers() -> usize {
    1
}

fn default_bins() -> usize {
    KL_BINS
}

/// KL of the input quotient distribution from the mapped one for one
/// freshly initialized stack.
pub fn kl_for_model(
    inputs: &[(ndarray::Array2<f64>, ndarray::Array2<f64>)],
    input_dist: &RqDistribution,
    width: usize,
    encoder_layers: usize,
    t_max: usize,
    model_seed: u64,
    bins: usize,
) -> Result<f64, CliError> {
    let mut layers = vec![LayerSpec::new(LayerKind::ZeroPad, 1, width)];
    for _ in 0..encoder_layers {
        layers.push(LayerSpec::new(LayerKind::TaylorRelaxed, width, width).with_t_max(t_max));
    }
    let spec = ModelSpec::new(layers, OperatorSource::GraphNormalized, model_seed);
    let model = Model::<f64>::build(spec).map_err(domain)?;
    let mut outputs = Vec::with_capacity(inputs.len());
    for (a_norm, x) in inputs {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, a_norm, x).map_err(domain)?;
        outputs.push(rayleigh_quotient(a_norm, tape.value(out)).map_err(domain)?);
    }
    let output_dist = RqDistribution::new(outputs).map_err(domain)?;
    kl_rq_distributions(input_dist, &output_dist, bins).map_err(domain)
}

pub fn run(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let cfg: SensitivityConfig = load_config(config_path)?;
    if cfg.t_max_values.is_empty() || cfg.t_max_values.iter().any(|t| *t == 0) {
        return Err(CliError::Config("t_max_values must be nonempty, each >= 1".into()));
    }
    if cfg.n_seeds == 0 || cfg.width == 0 || cfg.encoder_layers == 0 || cfg.bins == 0 {
        return Err(CliError::Config(
            "n_seeds, width, encoder_layers, and bins must be >= 1".into(),
        ));
    }
    cfg.dataset.validate().map_err(domain)?;

    let samples = gen_heat_grid_dataset(&cfg.dataset).map_err(domain)?;
    let mut inputs = Vec::with_capacity(samples.len());
    let mut input_qs = Vec::with_capacity(samples.len());
    for s in &samples {
        let a_norm = normalized_adjacency(&s.graph).map_err(domain)?;
        input_qs.push(rayleigh_quotient(&a_norm, &s.input).map_err(domain)?);
        inputs.push((a_norm, s.input.clone()));
    }
    let input_dist = RqDistribution::new(input_qs).map_err(domain)?;

    let mut csv = String::from("t_max,seed,kl\n");
    let mut summary = String::from("t_max,mean_kl\n");
    for (ti, &t_max) in cfg.t_max_values.iter().enumerate() {
        let mut sum = 0.0;
        for s in 0..cfg.n_seeds {
            let idx = (ti * cfg.n_seeds + s) as u64;
            let model_seed: u64 = stream_rng(cfg.seed, "model-seed", idx).gen();
            let kl = kl_for_model(
                &inputs,
                &input_dist,
                cfg.width,
                cfg.encoder_layers,
                t_max,
                model_seed,
                cfg.bins,
            )?;
            sum += kl;
            csv.push_str(&format!("{t_max},{s},{kl}\n"));
        }
        summary.push_str(&format!("{t_max},{}\n", sum / cfg.n_seeds as f64));
    }

    ensure_dir(out)?;
    write_out(&out.join("sensitivity.csv"), &csv)?;
    write_out(&out.join("sensitivity_summary.csv"), &summary)?;
    write_resolved(out, "sensitivity", &cfg)
}
