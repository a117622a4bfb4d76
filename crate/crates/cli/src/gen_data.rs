//! `gen-data`: dataset generation for the grid-heat supervised pairs and
//! for PDE trajectories on triangle meshes.

use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample as index_sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use smoothdyn::dynamics::{
    simulate_cahn_hilliard, simulate_heat_mesh, simulate_wave_mesh, write_heat_grid_dataset,
    DynamicsError, HeatGridConfig,
};
use smoothdyn::mesh::{
    check_manifold, flat_patch, icosphere, mesh_operators, perturb_positions, torus, TriMesh,
};
use smoothdyn::util::stream_rng;

use crate::error::{domain, input_err, CliError};
use crate::io::{ensure_dir, positions_matrix, write_out, write_resolved};

/// Top-level dataset selector; the config file is a single-key object
/// naming the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenDataConfig {
    HeatGrid(HeatGridConfig),
    MeshPde(MeshPdeConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshPdeConfig {
    pub mesh: MeshShapeConfig,
    pub pde: PdeConfig,
    #[serde(default = "default_one")]
    pub n_trajectories: usize,
    /// Initial-field generator; defaults to Gaussian bumps for heat and
    /// wave, uniform noise for Cahn-Hilliard.
    #[serde(default)]
    pub init: Option<InitConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshShapeConfig {
    Icosphere {
        subdivisions: usize,
        #[serde(default)]
        perturb_sigma: f64,
    },
    FlatPatch {
        rows: usize,
        cols: usize,
        h: f64,
        #[serde(default)]
        perturb_sigma: f64,
    },
    Torus {
        nu: usize,
        nv: usize,
        big_r: f64,
        small_r: f64,
        #[serde(default)]
        perturb_sigma: f64,
    },
    OffFile {
        path: String,
        #[serde(default)]
        perturb_sigma: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PdeConfig {
    Heat { alpha: f64, dt: f64, steps: usize },
    Wave { c: f64, dt: f64, steps: usize },
    CahnHilliard { mobility: f64, lambda: f64, dt: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    /// Sum of signed Gaussian bumps centered on random vertices; `width`
    /// is relative to the mesh bounding-box diagonal.
    Bumps { count: usize, width: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Disk layout of a mesh PDE dataset: the (possibly perturbed) extrinsic
/// mesh, the rewired operators, one trajectory file per run, and this
/// manifest tying them together.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDatasetManifest {
    pub version: u32,
    pub config: MeshPdeConfig,
    pub mesh_file: String,
    pub ops_file: String,
    pub flips: usize,
    pub violations_before: usize,
    pub violations_after: usize,
    pub entries: Vec<MeshDatasetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDatasetEntry {
    pub trajectory: String,
    /// Velocity companion, present only for wave runs.
    pub v_trajectory: Option<String>,
}

pub fn run(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let cfg: GenDataConfig = crate::io::load_config(config_path)?;
    ensure_dir(out)?;
    match &cfg {
        GenDataConfig::HeatGrid(grid) => {
            grid.validate().map_err(domain)?;
            write_heat_grid_dataset(grid, out).map_err(dynamics_to_cli)?;
        }
        GenDataConfig::MeshPde(mesh_cfg) => gen_mesh_pde(mesh_cfg, out)?,
    }
    write_resolved(out, "gen-data", &cfg)
}

/// Write failures inside the generator are output errors; everything else
/// is a failed precondition.
fn dynamics_to_cli(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::Io(io) => CliError::Output(io.to_string()),
        other => domain(other),
    }
}

pub fn build_mesh(cfg: &MeshShapeConfig, seed: u64) -> Result<TriMesh, CliError> {
    let (base, sigma) = match cfg {
        MeshShapeConfig::Icosphere { subdivisions, perturb_sigma } => {
            (icosphere(*subdivisions), *perturb_sigma)
        }
        MeshShapeConfig::FlatPatch { rows, cols, h, perturb_sigma } => {
            if *rows < 2 || *cols < 2 || *h <= 0.0 {
                return Err(CliError::Config(
                    "flat_patch needs rows >= 2, cols >= 2, h > 0".into(),
                ));
            }
            (flat_patch(*rows, *cols, *h), *perturb_sigma)
        }
        MeshShapeConfig::Torus { nu, nv, big_r, small_r, perturb_sigma } => {
            if *nu < 3 || *nv < 3 || *big_r <= *small_r || *small_r <= 0.0 {
                return Err(CliError::Config(
                    "torus needs nu, nv >= 3 and big_r > small_r > 0".into(),
                ));
            }
            (torus(*nu, *nv, *big_r, *small_r), *perturb_sigma)
        }
        MeshShapeConfig::OffFile { path, perturb_sigma } => {
            let p = Path::new(path);
            (TriMesh::load(p).map_err(|e| input_err(p, e))?, *perturb_sigma)
        }
    };
    if sigma < 0.0 {
        return Err(CliError::Config("perturb_sigma must be nonnegative".into()));
    }
    if sigma > 0.0 {
        let mut rng = stream_rng(seed, "mesh-perturb", 0);
        Ok(perturb_positions(&base, sigma, &mut rng))
    } else {
        Ok(base)
    }
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

/// One initial field per trajectory, drawn from a per-index stream so the
/// dataset is independent of generation order.
pub fn initial_field(
    positions: &Array2<f64>,
    init: &InitConfig,
    seed: u64,
    traj_idx: u64,
) -> Result<Array2<f64>, CliError> {
    let n = positions.nrows();
    let mut rng = stream_rng(seed, "mesh-init", traj_idx);
    match init {
        InitConfig::Bumps { count, width } => {
            if *count == 0 || *count > n || *width <= 0.0 {
                return Err(CliError::Config(format!(
                    "bumps needs 1 <= count <= {n} and width > 0"
                )));
            }
            let scale = width * bbox_diagonal(positions);
            let centers = index_sample(&mut rng, n, *count);
            let amps: Vec<f64> = (0..*count)
                .map(|_| {
                    let a = rng.gen_range(0.5..1.5);
                    if rng.gen_bool(0.5) {
                        a
                    } else {
                        -a
                    }
                })
                .collect();
            let mut u0 = Array2::zeros((n, 1));
            for (c, amp) in centers.iter().zip(amps) {
                for i in 0..n {
                    let d2: f64 = (0..3)
                        .map(|k| {
                            let d = positions[(i, k)] - positions[(c, k)];
                            d * d
                        })
                        .sum();
                    u0[(i, 0)] += amp * (-d2 / (2.0 * scale * scale)).exp();
                }
            }
            Ok(u0)
        }
        InitConfig::Uniform { lo, hi } => {
            if !(lo < hi) {
                return Err(CliError::Config("uniform init needs lo < hi".into()));
            }
            let (lo, hi) = (*lo, *hi);
            Ok(Array2::from_shape_fn((n, 1), |_| rng.gen_range(lo..hi)))
        }
    }
}

fn default_init(pde: &PdeConfig) -> InitConfig {
    match pde {
        PdeConfig::Heat { .. } | PdeConfig::Wave { .. } => {
            InitConfig::Bumps { count: 3, width: 0.25 }
        }
        PdeConfig::CahnHilliard { .. } => InitConfig::Uniform { lo: -0.1, hi: 0.1 },
    }
}

fn gen_mesh_pde(cfg: &MeshPdeConfig, out: &Path) -> Result<(), CliError> {
    if cfg.n_trajectories == 0 {
        return Err(CliError::Config("n_trajectories must be >= 1".into()));
    }
    let mesh = build_mesh(&cfg.mesh, cfg.seed)?;
    let report = check_manifold(&mesh);
    if !report.is_manifold {
        return Err(CliError::Domain(format!(
            "mesh is not manifold: {} nonmanifold edges, {} nonmanifold vertices, {} \
             inconsistently wound edges",
            report.nonmanifold_edges.len(),
            report.nonmanifold_vertices.len(),
            report.inconsistent_edges.len()
        )));
    }
    let (ops, flips) = mesh_operators(&mesh, true).map_err(domain)?;
    let positions = positions_matrix(&mesh);
    let init = cfg.init.unwrap_or_else(|| default_init(&cfg.pde));

    let mesh_path = out.join("mesh.off");
    mesh.write_off(&mesh_path).map_err(|e| CliError::Output(e.to_string()))?;
    write_out(&out.join("mesh_ops.json"), &ops.to_json())?;

    let mut entries = Vec::with_capacity(cfg.n_trajectories);
    for k in 0..cfg.n_trajectories {
        let u0 = initial_field(&positions, &init, cfg.seed, k as u64)?;
        let name = format!("traj_{k:03}.bin");
        let mut v_name = None;
        match &cfg.pde {
            PdeConfig::Heat { alpha, dt, steps } => {
                let traj = simulate_heat_mesh(&ops, &u0, *alpha, *dt, *steps).map_err(domain)?;
                traj.write_file(&out.join(&name)).map_err(dynamics_to_cli)?;
            }
            PdeConfig::Wave { c, dt, steps } => {
                let v0 = Array2::zeros((positions.nrows(), 1));
                let wave =
                    simulate_wave_mesh(&ops, &u0, &v0, *c, *dt, *steps).map_err(domain)?;
                wave.u.write_file(&out.join(&name)).map_err(dynamics_to_cli)?;
                let vn = format!("traj_{k:03}_v.bin");
                wave.v.write_file(&out.join(&vn)).map_err(dynamics_to_cli)?;
                v_name = Some(vn);
            }
            PdeConfig::CahnHilliard { mobility, lambda, dt, steps } => {
                let traj = simulate_cahn_hilliard(&ops, &u0, *mobility, *lambda, *dt, *steps)
                    .map_err(domain)?;
                traj.write_file(&out.join(&name)).map_err(dynamics_to_cli)?;
            }
        }
        entries.push(MeshDatasetEntry { trajectory: name, v_trajectory: v_name });
    }

    let manifest = MeshDatasetManifest {
        version: 1,
        config: cfg.clone(),
        mesh_file: "mesh.off".into(),
        ops_file: "mesh_ops.json".into(),
        flips: flips.flips,
        violations_before: flips.violations_before,
        violations_after: flips.violations_after,
        entries,
    };
    write_out(
        &out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}
