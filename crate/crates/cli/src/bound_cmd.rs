//! `bound`: verifies the approximation-error lower bound on the unit-disk
//! instance. Estimates the bound integral by Monte-Carlo orbit variances,
//! fits the one-parameter rotation to sampled (point, target) pairs, and
//! reports whether the trained map's empirical error respects the bound.

use std::path::Path;

use serde::{Deserialize, Serialize};

use smoothdyn::bound::{
    rotation_map, sample_training_pairs, train_rotation, verify_bound, BoundConfig, BoundReport,
    OrbitSampler, VarianceKind,
};

use crate::error::{domain, CliError};
use crate::io::{ensure_dir, load_config, write_out, write_resolved};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundCmdConfig {
    /// Radius grid resolution over [0, 1].
    pub radius_points: usize,
    pub samples_per_radius: usize,
    pub empirical_samples: usize,
    pub kind: VarianceKind,
    pub train_points: usize,
    pub train_steps: usize,
    pub train_lr: f64,
    pub seed: u64,
}

impl Default for BoundCmdConfig {
    fn default() -> Self {
        // 200 radii x 5000 orbit samples: the million-sample headline run.
        BoundCmdConfig {
            radius_points: 200,
            samples_per_radius: 5000,
            empirical_samples: 200_000,
            kind: VarianceKind::Vector,
            train_points: 2000,
            train_steps: 300,
            train_lr: 0.05,
            seed: 0,
        }
    }
}

/// Report written by the command: the bound verification plus the angle the
/// training run converged to.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoundRunReport {
    pub trained_angle: f64,
    #[serde(flatten)]
    pub report: BoundReport,
}

pub fn run(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let cfg: BoundCmdConfig = load_config(config_path)?;
    if cfg.radius_points < 2 {
        return Err(CliError::Config("radius_points must be >= 2".into()));
    }
    if cfg.train_points == 0 || cfg.train_steps == 0 {
        return Err(CliError::Config("train_points and train_steps must be >= 1".into()));
    }
    if !(cfg.train_lr > 0.0 && cfg.train_lr.is_finite()) {
        return Err(CliError::Config("train_lr must be positive and finite".into()));
    }

    let radius_grid: Vec<f64> =
        (0..cfg.radius_points).map(|k| k as f64 / (cfg.radius_points - 1) as f64).collect();
    let sampler = OrbitSampler::unit_disk(cfg.seed);
    let (points, targets) =
        sample_training_pairs(&sampler, &radius_grid, cfg.train_points).map_err(domain)?;
    let angle =
        train_rotation(&points, &targets, cfg.train_steps, cfg.train_lr).map_err(domain)?;

    let bound_cfg = BoundConfig {
        radius_grid,
        samples_per_radius: cfg.samples_per_radius,
        empirical_samples: cfg.empirical_samples,
        kind: cfg.kind,
    };
    let report = verify_bound(&sampler, &rotation_map(angle), &bound_cfg).map_err(domain)?;

    ensure_dir(out)?;
    let run_report = BoundRunReport { trained_angle: angle, report };
    write_out(
        &out.join("report.json"),
        &serde_json::to_string_pretty(&run_report).expect("report serializes"),
    )?;
    write_resolved(out, "bound", &cfg)
}
