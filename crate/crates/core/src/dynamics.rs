//! Ground-truth simulators and dataset generation: heat flow on grid graphs
//! through the matrix exponential, and heat / wave / Cahn-Hilliard
//! time-stepping on meshes, plus the binary trajectory format they share.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::graph::{grid_graph, normalized_adjacency, Graph, GraphError};
use crate::linalg::{lu_factor, mat_exp_reference, LinalgError};
use crate::mesh::MeshOperators;
use crate::util::stream_rng;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("times must be nonnegative, strictly increasing, and nonempty")]
    BadTimes,
    #[error("{0}")]
    BadConfig(String),
    #[error("state has {got} rows, operator expects {expected}")]
    StateRows { expected: usize, got: usize },
    #[error("non-finite value produced during {0}")]
    NonFinite(&'static str),
    #[error("{sources} heat sources cannot occupy distinct nodes of a {n}-node graph")]
    SourcesExceedNodes { sources: usize, n: usize },
    #[error("explicit wave step unstable: dt = {dt}, max admissible dt = {dt_max}")]
    CflViolated { dt: f64, dt_max: f64 },
    #[error("time {t} does not lie on the dt = {dt} grid")]
    OffGrid { t: f64, dt: f64 },
    #[error("trajectory data: {0}")]
    Format(String),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A time series of feature matrices over a fixed node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub frames: Vec<Array2<f64>>,
    /// Set when a rollout was cut short at this frame index because the
    /// model produced non-finite values. Not persisted to disk.
    pub truncated_at: Option<usize>,
}

const TRAJ_MAGIC: &[u8; 4] = b"TRAJ";
const TRAJ_VERSION: u32 = 1;

impl Trajectory {
    pub fn new(times: Vec<f64>, frames: Vec<Array2<f64>>) -> Result<Self, DynamicsError> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(DynamicsError::BadTimes);
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DynamicsError::BadTimes);
        }
        let shape = frames[0].dim();
        if frames.iter().any(|f| f.dim() != shape) {
            return Err(DynamicsError::Format("frames differ in shape".into()));
        }
        Ok(Trajectory { times, frames, truncated_at: None })
    }

    pub fn n(&self) -> usize {
        self.frames[0].nrows()
    }

    pub fn d(&self) -> usize {
        self.frames[0].ncols()
    }

    /// Index of the frame at time `t`, matched within absolute 1e-9.
    pub fn frame_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&x| (x - t).abs() < 1e-9)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), DynamicsError> {
        w.write_all(TRAJ_MAGIC)?;
        w.write_all(&TRAJ_VERSION.to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        w.write_all(&(self.d() as u64).to_le_bytes())?;
        w.write_all(&(self.frames.len() as u64).to_le_bytes())?;
        for &t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for frame in &self.frames {
            for row in frame.rows() {
                for &v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, DynamicsError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TRAJ_MAGIC {
            return Err(DynamicsError::Format("bad magic, not a trajectory".into()));
        }
        let version = read_u32(r)?;
        if version != TRAJ_VERSION {
            return Err(DynamicsError::Format(format!("unsupported version {version}")));
        }
        let n = read_u64(r)? as usize;
        let d = read_u64(r)? as usize;
        let n_frames = read_u64(r)? as usize;
        if n == 0 || d == 0 || n_frames == 0 {
            return Err(DynamicsError::Format("empty dimensions in header".into()));
        }
        if n.saturating_mul(d).saturating_mul(n_frames) > (1 << 32) {
            return Err(DynamicsError::Format("header claims an implausibly large file".into()));
        }
        let mut times = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            times.push(read_f64(r)?);
        }
        let mut frames = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            let mut data = Vec::with_capacity(n * d);
            for _ in 0..n * d {
                data.push(read_f64(r)?);
            }
            frames.push(
                Array2::from_shape_vec((n, d), data)
                    .map_err(|e| DynamicsError::Format(e.to_string()))?,
            );
        }
        Trajectory::new(times, frames)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), DynamicsError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, DynamicsError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DynamicsError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DynamicsError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, DynamicsError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Which graph Laplacian drives the heat semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `I - A_norm`; keeps the dataset's smoothness and the Rayleigh
    /// quotient on the same operator.
    #[default]
    Normalized,
    /// `D - A`, the convention some reference simulators default to.
    Combinatorial,
}

pub fn graph_laplacian(g: &Graph, kind: LaplacianKind) -> Result<Array2<f64>, GraphError> {
    match kind {
        LaplacianKind::Normalized => {
            let mut l = normalized_adjacency(g)?;
            l.mapv_inplace(|x| -x);
            for i in 0..g.n {
                l[(i, i)] += 1.0;
            }
            Ok(l)
        }
        LaplacianKind::Combinatorial => {
            let mut l = Array2::zeros((g.n, g.n));
            for &(u, v) in &g.edges {
                l[(u, v)] = -1.0;
                l[(v, u)] = -1.0;
                l[(u, u)] += 1.0;
                l[(v, v)] += 1.0;
            }
            Ok(l)
        }
    }
}

/// Heat flow on a graph: frame k is `exp(-tau * times[k] * L) h0`, each
/// frame computed from the reference matrix exponential.
pub fn simulate_heat_graph(
    g: &Graph,
    h0: &Array2<f64>,
    tau: f64,
    times: &[f64],
    kind: LaplacianKind,
) -> Result<Trajectory, DynamicsError> {
    if h0.nrows() != g.n {
        return Err(DynamicsError::StateRows { expected: g.n, got: h0.nrows() });
    }
    if tau <= 0.0 {
        return Err(DynamicsError::BadConfig(format!("tau must be positive, got {tau}")));
    }
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DynamicsError::BadTimes);
    }
    crate::linalg::check_finite(h0)?;
    let l = graph_laplacian(g, kind)?;
    let mut frames = Vec::with_capacity(times.len());
    for &t in times {
        let e = mat_exp_reference(&l.mapv(|x| -tau * t * x))?;
        frames.push(e.dot(h0));
    }
    Trajectory::new(times.to_vec(), frames)
}

/// Propagator for one uniform heat step: `exp(-tau * dt * L)`.
pub fn heat_propagator(
    l: &Array2<f64>,
    tau: f64,
    dt: f64,
) -> Result<Array2<f64>, DynamicsError> {
    Ok(mat_exp_reference(&l.mapv(|x| -tau * dt * x))?)
}

fn expect_state(ops: &MeshOperators, u: &Array2<f64>) -> Result<(), DynamicsError> {
    if u.nrows() != ops.n() {
        return Err(DynamicsError::StateRows { expected: ops.n(), got: u.nrows() });
    }
    crate::linalg::check_finite(u)?;
    Ok(())
}

/// Area-normalized Laplacian applied to every column of `u`.
fn laplacian_mat(ops: &MeshOperators, u: &Array2<f64>) -> Array2<f64> {
    let mut out = ops.stiffness().matmat(u);
    for (i, &a) in ops.areas().iter().enumerate() {
        for v in out.row_mut(i) {
            *v /= a;
        }
    }
    out
}

fn uniform_times(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

/// Backward-Euler heat flow on a mesh: `(M - alpha dt C) u_{k+1} = M u_k`
/// with `M = diag(A_i)` and `C` the cotangent stiffness. Unconditionally
/// stable; conserves area-weighted mass to solver precision because `C`
/// annihilates constants on both sides.
pub fn simulate_heat_mesh(
    ops: &MeshOperators,
    u0: &Array2<f64>,
    alpha: f64,
    dt: f64,
    steps: usize,
) -> Result<Trajectory, DynamicsError> {
    expect_state(ops, u0)?;
    if alpha <= 0.0 || dt <= 0.0 || steps == 0 {
        return Err(DynamicsError::BadConfig(
            "heat needs alpha > 0, dt > 0, steps >= 1".into(),
        ));
    }
    let n = ops.n();
    let mut a = ops.stiffness().to_dense();
    a.mapv_inplace(|x| -alpha * dt * x);
    for i in 0..n {
        a[(i, i)] += ops.areas()[i];
    }
    let lu = lu_factor(&a)?;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(u0.clone());
    let mut u = u0.clone();
    for _ in 0..steps {
        let mut rhs = u.clone();
        for (i, &area) in ops.areas().iter().enumerate() {
            for v in rhs.row_mut(i) {
                *v *= area;
            }
        }
        u = lu.solve_mat(&rhs);
        frames.push(u.clone());
    }
    Trajectory::new(uniform_times(dt, steps), frames)
}

/// Largest stable explicit wave step. The spectral bound comes from a
/// Gershgorin row estimate of the area-normalized Laplacian: every
/// eigenvalue magnitude is at most `max_i (sum_j |C_ij|) / A_i`.
pub fn wave_max_dt(ops: &MeshOperators, c: f64) -> f64 {
    let lambda_bound = ops
        .stiffness()
        .row_abs_sums()
        .iter()
        .zip(ops.areas())
        .map(|(s, a)| s / a)
        .fold(0.0, f64::max);
    2.0 / (c * lambda_bound.sqrt())
}

/// Explicit wave trajectory: displacement plus whole-step velocity.
#[derive(Debug, Clone)]
pub struct WaveTrajectory {
    pub u: Trajectory,
    pub v: Trajectory,
}

/// Velocity-Verlet (kick-drift-kick) integration of the mesh wave equation.
/// Exactly time-reversible: negating the final velocity and stepping the
/// same count returns the initial state up to rounding.
pub fn simulate_wave_mesh(
    ops: &MeshOperators,
    u0: &Array2<f64>,
    v0: &Array2<f64>,
    c: f64,
    dt: f64,
    steps: usize,
) -> Result<WaveTrajectory, DynamicsError> {
    expect_state(ops, u0)?;
    expect_state(ops, v0)?;
    if u0.dim() != v0.dim() {
        return Err(DynamicsError::Format("u0 and v0 shapes differ".into()));
    }
    if c <= 0.0 || dt <= 0.0 || steps == 0 {
        return Err(DynamicsError::BadConfig("wave needs c > 0, dt > 0, steps >= 1".into()));
    }
    let dt_max = wave_max_dt(ops, c);
    if dt >= dt_max {
        return Err(DynamicsError::CflViolated { dt, dt_max });
    }
    let cc = c * c;
    let mut u = u0.clone();
    let mut v = v0.clone();
    let mut u_frames = vec![u.clone()];
    let mut v_frames = vec![v.clone()];
    for _ in 0..steps {
        let acc = laplacian_mat(ops, &u);
        v.scaled_add(0.5 * dt * cc, &acc);
        u.scaled_add(dt, &v);
        let acc = laplacian_mat(ops, &u);
        v.scaled_add(0.5 * dt * cc, &acc);
        u_frames.push(u.clone());
        v_frames.push(v.clone());
    }
    let times = uniform_times(dt, steps);
    Ok(WaveTrajectory {
        u: Trajectory::new(times.clone(), u_frames)?,
        v: Trajectory::new(times, v_frames)?,
    })
}

/// Double-well derivative of `f(c) = 100 c^2 (1 - c^2)`.
pub fn double_well_derivative(c: f64) -> f64 {
    200.0 * c - 400.0 * c * c * c
}

/// Semi-implicit Cahn-Hilliard: the stiff biharmonic part is implicit,
/// the nonlinearity explicit, giving one factorization reused every step:
/// `(I + dt M lambda L^2) c_{k+1} = c_k + dt M L f'(c_k)`.
pub fn simulate_cahn_hilliard(
    ops: &MeshOperators,
    c0: &Array2<f64>,
    mobility: f64,
    lambda: f64,
    dt: f64,
    steps: usize,
) -> Result<Trajectory, DynamicsError> {
    expect_state(ops, c0)?;
    if mobility <= 0.0 || lambda <= 0.0 || dt <= 0.0 || steps == 0 {
        return Err(DynamicsError::BadConfig(
            "Cahn-Hilliard needs mobility > 0, lambda > 0, dt > 0, steps >= 1".into(),
        ));
    }
    let n = ops.n();
    let mut l = ops.stiffness().to_dense();
    for (i, &a) in ops.areas().iter().enumerate() {
        for v in l.row_mut(i) {
            *v /= a;
        }
    }
    let mut system = l.dot(&l);
    system.mapv_inplace(|x| dt * mobility * lambda * x);
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    let lu = lu_factor(&system)?;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(c0.clone());
    let mut c = c0.clone();
    for _ in 0..steps {
        let fprime = c.mapv(double_well_derivative);
        let mut rhs = l.dot(&fprime);
        rhs.mapv_inplace(|x| dt * mobility * x);
        rhs += &c;
        c = lu.solve_mat(&rhs);
        if c.iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonFinite("Cahn-Hilliard step"));
        }
        frames.push(c.clone());
    }
    Trajectory::new(uniform_times(dt, steps), frames)
}

/// Configuration for the grid-heat dataset generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatGridConfig {
    pub count: usize,
    pub sources: usize,
    pub tau: f64,
    pub side_mean: f64,
    pub side_std: f64,
    pub min_side: usize,
    pub t_end: f64,
    pub dt: f64,
    pub input_time: f64,
    pub target_time: f64,
    pub laplacian: LaplacianKind,
    pub seed: u64,
}

impl Default for HeatGridConfig {
    fn default() -> Self {
        HeatGridConfig {
            count: 10_000,
            sources: 20,
            tau: 0.5,
            side_mean: 10.0,
            side_std: 2.0,
            min_side: 5,
            t_end: 10.0,
            dt: 0.5,
            input_time: 3.0,
            target_time: 4.0,
            laplacian: LaplacianKind::Normalized,
            seed: 0,
        }
    }
}

fn time_index(t: f64, dt: f64) -> Result<usize, DynamicsError> {
    let k = (t / dt).round();
    if (t - k * dt).abs() > 1e-9 || k < 0.0 {
        return Err(DynamicsError::OffGrid { t, dt });
    }
    Ok(k as usize)
}

impl HeatGridConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.count == 0 || self.sources == 0 {
            return Err(DynamicsError::BadConfig("count and sources must be >= 1".into()));
        }
        if self.tau <= 0.0 || self.dt <= 0.0 || self.side_std < 0.0 || self.side_mean <= 0.0 {
            return Err(DynamicsError::BadConfig(
                "tau, dt, side_mean must be positive; side_std nonnegative".into(),
            ));
        }
        if self.min_side < 2 {
            return Err(DynamicsError::BadConfig("min_side must be at least 2".into()));
        }
        let steps = time_index(self.t_end, self.dt)?;
        let input = time_index(self.input_time, self.dt)?;
        let target = time_index(self.target_time, self.dt)?;
        if input >= target || target > steps {
            return Err(DynamicsError::BadConfig(
                "need input_time < target_time <= t_end on the dt grid".into(),
            ));
        }
        Ok(())
    }
}

/// One supervised pair drawn from a simulated heat trajectory.
#[derive(Debug, Clone)]
pub struct HeatSample {
    pub graph: Graph,
    pub input: Array2<f64>,
    pub target: Array2<f64>,
}

fn draw_side<R: Rng>(rng: &mut R, cfg: &HeatGridConfig) -> usize {
    let dist = rand_distr::Normal::new(cfg.side_mean, cfg.side_std)
        .expect("validated: finite mean, nonnegative std");
    let side = rng.sample(dist).round();
    (side.max(cfg.min_side as f64)) as usize
}

/// Full trajectory for sample `idx`: repeated application of the one-step
/// propagator, equal to the per-frame matrix exponential by the semigroup
/// property (up to rounding) but one exponential per sample instead of one
/// per frame.
pub fn heat_grid_trajectory(
    cfg: &HeatGridConfig,
    idx: u64,
) -> Result<(Graph, Trajectory), DynamicsError> {
    let mut rng = stream_rng(cfg.seed, "sample", idx);
    let rows = draw_side(&mut rng, cfg);
    let cols = draw_side(&mut rng, cfg);
    let graph = grid_graph(rows, cols)?;
    let n = graph.n;
    if cfg.sources > n {
        return Err(DynamicsError::SourcesExceedNodes { sources: cfg.sources, n });
    }
    let mut h0 = Array2::zeros((n, 1));
    for i in rand::seq::index::sample(&mut rng, n, cfg.sources) {
        h0[(i, 0)] = 1.0;
    }
    let l = graph_laplacian(&graph, cfg.laplacian)?;
    let step = heat_propagator(&l, cfg.tau, cfg.dt)?;
    let steps = time_index(cfg.t_end, cfg.dt)?;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(h0.clone());
    let mut h = h0;
    for _ in 0..steps {
        h = step.dot(&h);
        frames.push(h.clone());
    }
    let trajectory = Trajectory::new(uniform_times(cfg.dt, steps), frames)?;
    Ok((graph, trajectory))
}

/// Generate the dataset in memory, keeping only the supervised pair per
/// sample. Samples are generated in parallel; per-sample seeds make the
/// result independent of thread count.
pub fn gen_heat_grid_dataset(cfg: &HeatGridConfig) -> Result<Vec<HeatSample>, DynamicsError> {
    cfg.validate()?;
    let input_idx = time_index(cfg.input_time, cfg.dt)?;
    let target_idx = time_index(cfg.target_time, cfg.dt)?;
    (0..cfg.count as u64)
        .into_par_iter()
        .map(|idx| {
            let (graph, trajectory) = heat_grid_trajectory(cfg, idx)?;
            Ok(HeatSample {
                graph,
                input: trajectory.frames[input_idx].clone(),
                target: trajectory.frames[target_idx].clone(),
            })
        })
        .collect()
}

/// Disk layout of a generated dataset: `manifest.json` describes the run,
/// `graphs.jsonl` holds one graph per line, `frames.bin` holds one
/// trajectory blob per sample at the manifest's offsets.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub count: usize,
    pub config: HeatGridConfig,
    pub graphs_file: String,
    pub frames_file: String,
    pub entries: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub offset: u64,
    pub len: u64,
    pub n: usize,
}

const WRITE_CHUNK: usize = 256;

/// Stream the dataset to `dir` with full trajectories, bounding memory by
/// generating in chunks. Returns the manifest that was written.
pub fn write_heat_grid_dataset(
    cfg: &HeatGridConfig,
    dir: &Path,
) -> Result<DatasetManifest, DynamicsError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let graphs_path = dir.join("graphs.jsonl");
    let frames_path = dir.join("frames.bin");
    let mut graphs = std::io::BufWriter::new(std::fs::File::create(&graphs_path)?);
    let mut frames = std::io::BufWriter::new(std::fs::File::create(&frames_path)?);
    let mut entries = Vec::with_capacity(cfg.count);
    let mut offset = 0u64;
    let mut start = 0u64;
    while (start as usize) < cfg.count {
        let end = (start + WRITE_CHUNK as u64).min(cfg.count as u64);
        let chunk: Vec<(Graph, Trajectory)> = (start..end)
            .into_par_iter()
            .map(|idx| heat_grid_trajectory(cfg, idx))
            .collect::<Result<_, _>>()?;
        for (graph, trajectory) in chunk {
            graphs.write_all(graph.to_json().as_bytes())?;
            graphs.write_all(b"\n")?;
            let mut blob = Vec::new();
            trajectory.write_to(&mut blob)?;
            frames.write_all(&blob)?;
            entries.push(DatasetEntry {
                offset,
                len: blob.len() as u64,
                n: graph.n,
            });
            offset += blob.len() as u64;
        }
        start = end;
    }
    graphs.flush()?;
    frames.flush()?;
    let manifest = DatasetManifest {
        version: 1,
        count: cfg.count,
        config: cfg.clone(),
        graphs_file: "graphs.jsonl".into(),
        frames_file: "frames.bin".into(),
        entries,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Load a dataset written by [`write_heat_grid_dataset`], reducing each
/// trajectory back to its supervised pair.
pub fn load_heat_grid_dataset(dir: &Path) -> Result<Vec<HeatSample>, DynamicsError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let graphs_text = std::fs::read_to_string(dir.join(&manifest.graphs_file))?;
    let blob = std::fs::read(dir.join(&manifest.frames_file))?;
    let graphs: Vec<Graph> = graphs_text
        .lines()
        .map(Graph::from_json)
        .collect::<Result<_, _>>()?;
    if graphs.len() != manifest.count || manifest.entries.len() != manifest.count {
        return Err(DynamicsError::Format(
            "manifest count disagrees with graphs or entries".into(),
        ));
    }
    let mut samples = Vec::with_capacity(manifest.count);
    for (graph, entry) in graphs.into_iter().zip(&manifest.entries) {
        let lo = entry.offset as usize;
        let hi = lo + entry.len as usize;
        if hi > blob.len() {
            return Err(DynamicsError::Format("entry extends past frames file".into()));
        }
        let trajectory = Trajectory::read_from(&mut &blob[lo..hi])?;
        let input_idx = trajectory
            .frame_index(manifest.config.input_time)
            .ok_or_else(|| DynamicsError::Format("input time missing from trajectory".into()))?;
        let target_idx = trajectory
            .frame_index(manifest.config.target_time)
            .ok_or_else(|| DynamicsError::Format("target time missing from trajectory".into()))?;
        samples.push(HeatSample {
            graph,
            input: trajectory.frames[input_idx].clone(),
            target: trajectory.frames[target_idx].clone(),
        });
    }
    Ok(samples)
}
