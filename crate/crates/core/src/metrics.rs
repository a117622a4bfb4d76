//! Evaluation metrics: mean Rayleigh-quotient error, rollout Rayleigh
//! error, NRMSE, SMAPE, KL divergence between Rayleigh-quotient
//! distributions, the two-point-correlation smoothness error, and
//! latitude-weighted RMSE/ACC, plus CSV/JSON emission.
//!
//! All trajectory metrics take frames as `(n, d)` matrices in time order.
//! Frames whose Rayleigh quotient is undefined (all-zero features) are
//! skipped and counted rather than poisoning the aggregate.

use std::collections::BTreeMap;

use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{rayleigh_quotient, GraphError};

/// Bin count used for Rayleigh-quotient histograms and their KL
/// divergence.
pub const KL_BINS: usize = 50;

/// Denominator guard in SMAPE. A constant guard means SMAPE is only
/// asymptotically scale-invariant: rescaling both inputs by c shifts the
/// result by about 2ε|c−1|/(c·(|y|+|f|)) per entry, which sits below
/// 1e−12 once entries reach magnitude ~1e4.
pub const SMAPE_EPS: f64 = 1e-8;

/// Rayleigh quotients lie in [0, 2]; roundoff may overshoot by this much.
const RQ_RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric needs at least one frame")]
    Empty,
    #[error("trajectory lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("Rayleigh-quotient sample {value} lies outside [0, 2]")]
    SampleOutOfRange { value: f64 },
    #[error("bad binning: {0}")]
    BadBins(String),
    #[error("target frame {frame} has zero energy; NRMSE is undefined there")]
    ZeroEnergyFrame { frame: usize },
    #[error("every frame was skipped; no Rayleigh quotient is defined")]
    AllFramesSkipped,
    #[error("climatology covers {got} steps but verification needs {needed}")]
    ClimatologyTooShort { needed: usize, got: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn check_lengths(left: usize, right: usize) -> Result<(), MetricsError> {
    if left == 0 {
        return Err(MetricsError::Empty);
    }
    if left != right {
        return Err(MetricsError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Mean Rayleigh quotient over the frames that have one; zero-feature
/// frames are skipped. Errors only if no frame has a quotient.
fn mean_rq(a_norm: &Array2<f64>, frames: &[Array2<f64>]) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for frame in frames {
        match rayleigh_quotient(a_norm, frame) {
            Ok(q) => {
                sum += q;
                count += 1;
            }
            Err(GraphError::ZeroFeatures) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if count == 0 {
        return Err(MetricsError::AllFramesSkipped);
    }
    Ok(sum / count as f64)
}

/// Absolute difference between the mean Rayleigh quotients of the
/// predicted and target frames.
pub fn mre(
    preds: &[Array2<f64>],
    targets: &[Array2<f64>],
    a_norm: &Array2<f64>,
) -> Result<f64, MetricsError> {
    check_lengths(preds.len(), targets.len())?;
    Ok((mean_rq(a_norm, preds)? - mean_rq(a_norm, targets)?).abs())
}

/// Rollout Rayleigh error plus the number of timestep pairs that had to
/// be skipped because one side had no Rayleigh quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReOutcome {
    pub value: f64,
    pub skipped: usize,
}

/// Per-timestep absolute Rayleigh-quotient difference, summed over the
/// steps where both frames have a quotient and normalized by the full
/// step count.
pub fn rayleigh_error(
    preds: &[Array2<f64>],
    targets: &[Array2<f64>],
    a_norm: &Array2<f64>,
) -> Result<ReOutcome, MetricsError> {
    check_lengths(preds.len(), targets.len())?;
    let mut sum = 0.0;
    let mut skipped = 0usize;
    for (pred, target) in preds.iter().zip(targets) {
        let pair = (rayleigh_quotient(a_norm, pred), rayleigh_quotient(a_norm, target));
        match pair {
            (Ok(p), Ok(t)) => sum += (t - p).abs(),
            (Err(GraphError::ZeroFeatures), _) | (_, Err(GraphError::ZeroFeatures)) => {
                skipped += 1;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }
    if skipped == preds.len() {
        return Err(MetricsError::AllFramesSkipped);
    }
    Ok(ReOutcome { value: sum / preds.len() as f64, skipped })
}

fn check_frame_shapes(
    preds: &[Array2<f64>],
    targets: &[Array2<f64>],
) -> Result<(), MetricsError> {
    check_lengths(preds.len(), targets.len())?;
    for (t, (p, y)) in preds.iter().zip(targets).enumerate() {
        if p.dim() != y.dim() {
            return Err(MetricsError::ShapeMismatch(format!(
                "frame {t}: prediction is {:?}, target is {:?}",
                p.dim(),
                y.dim()
            )));
        }
    }
    Ok(())
}

/// Per-frame root of mean squared error over mean squared target,
/// averaged across frames. Errors on a zero-energy target frame.
pub fn nrmse(preds: &[Array2<f64>], targets: &[Array2<f64>]) -> Result<f64, MetricsError> {
    check_frame_shapes(preds, targets)?;
    let mut sum = 0.0;
    for (t, (pred, target)) in preds.iter().zip(targets).enumerate() {
        let err: f64 = pred.iter().zip(target.iter()).map(|(p, y)| (p - y) * (p - y)).sum();
        let energy: f64 = target.iter().map(|y| y * y).sum();
        if energy == 0.0 {
            return Err(MetricsError::ZeroEnergyFrame { frame: t });
        }
        sum += (err / energy).sqrt();
    }
    Ok(sum / preds.len() as f64)
}

/// Symmetric mean absolute percentage error averaged across frames, with
/// the [`SMAPE_EPS`] denominator guard.
pub fn smape(preds: &[Array2<f64>], targets: &[Array2<f64>]) -> Result<f64, MetricsError> {
    check_frame_shapes(preds, targets)?;
    let mut sum = 0.0;
    for (pred, target) in preds.iter().zip(targets) {
        let frame: f64 = pred
            .iter()
            .zip(target.iter())
            .map(|(p, y)| 2.0 * (y - p).abs() / (y.abs() + p.abs() + SMAPE_EPS))
            .sum();
        sum += frame / pred.len() as f64;
    }
    Ok(sum / preds.len() as f64)
}

/// A sample set of Rayleigh quotients with its histogram over [0, 2].
#[derive(Debug, Clone, PartialEq)]
pub struct RqDistribution {
    samples: Vec<f64>,
}

/// Histogram over uniform bins of [0, 2].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RqDistribution {
    /// Samples must lie in [0, 2]; values overshooting by roundoff are
    /// clamped, anything further out is rejected.
    pub fn new(samples: Vec<f64>) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut clamped = samples;
        for v in &mut clamped {
            if !v.is_finite() || *v < -RQ_RANGE_TOL || *v > 2.0 + RQ_RANGE_TOL {
                return Err(MetricsError::SampleOutOfRange { value: *v });
            }
            *v = v.clamp(0.0, 2.0);
        }
        Ok(RqDistribution { samples: clamped })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Uniform-bin histogram over [0, 2]; the top edge falls in the last
    /// bin.
    pub fn histogram(&self, bins: usize) -> Result<Histogram, MetricsError> {
        if bins == 0 {
            return Err(MetricsError::BadBins("need at least one bin".into()));
        }
        let mut counts = vec![0usize; bins];
        for &s in &self.samples {
            let k = ((s / 2.0 * bins as f64) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let bin_edges = (0..=bins).map(|k| 2.0 * k as f64 / bins as f64).collect();
        Ok(Histogram { bin_edges, counts })
    }
}

/// KL divergence between two Rayleigh-quotient sample sets, estimated on
/// shared uniform bins over [0, 2] with one pseudo-count added per bin.
pub fn kl_rq_distributions(
    p: &RqDistribution,
    q: &RqDistribution,
    bins: usize,
) -> Result<f64, MetricsError> {
    let hp = p.histogram(bins)?;
    let hq = q.histogram(bins)?;
    let np = (p.samples.len() + bins) as f64;
    let nq = (q.samples.len() + bins) as f64;
    let mut kl = 0.0;
    for (cp, cq) in hp.counts.iter().zip(&hq.counts) {
        let pp = (cp + 1) as f64 / np;
        let pq = (cq + 1) as f64 / nq;
        kl += pp * (pp / pq).ln();
    }
    Ok(kl)
}

/// Binned two-point correlation: per radial bin, the mean of value
/// products over point pairs whose separation falls in the bin. Bins with
/// no pairs carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub r_edges: Vec<f64>,
    pub xi: Vec<Option<f64>>,
    pub pair_counts: Vec<usize>,
}

fn check_r_edges(r_edges: &[f64]) -> Result<(), MetricsError> {
    if r_edges.len() < 2 {
        return Err(MetricsError::BadBins("need at least one radial bin".into()));
    }
    if r_edges.windows(2).any(|w| w[0] >= w[1]) || r_edges.iter().any(|e| !e.is_finite()) {
        return Err(MetricsError::BadBins("radial bin edges must strictly increase".into()));
    }
    Ok(())
}

/// All-pairs correlation estimate with Euclidean separations binned by
/// binary search; the final edge is inclusive. Pairs outside the edges
/// are ignored.
pub fn two_point_correlation(
    positions: &Array2<f64>,
    values: &[f64],
    r_edges: &[f64],
) -> Result<CorrelationEstimate, MetricsError> {
    let n = positions.nrows();
    if n < 2 {
        return Err(MetricsError::ShapeMismatch("need at least two points".into()));
    }
    if values.len() != n {
        return Err(MetricsError::ShapeMismatch(format!(
            "{n} positions but {} values",
            values.len()
        )));
    }
    check_r_edges(r_edges)?;
    let bins = r_edges.len() - 1;
    let mut sums = vec![0.0f64; bins];
    let mut pair_counts = vec![0usize; bins];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pair_distance(positions, i, j);
            let k = if d == r_edges[bins] {
                bins - 1
            } else {
                let part = r_edges.partition_point(|e| *e <= d);
                if part == 0 || part > bins {
                    continue;
                }
                part - 1
            };
            sums[k] += values[i] * values[j];
            pair_counts[k] += 1;
        }
    }
    let xi = sums
        .iter()
        .zip(&pair_counts)
        .map(|(s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    Ok(CorrelationEstimate { r_edges: r_edges.to_vec(), xi, pair_counts })
}

fn pair_distance(positions: &Array2<f64>, i: usize, j: usize) -> f64 {
    let (ri, rj) = (positions.row(i), positions.row(j));
    ri.iter().zip(rj.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// One mesh's rollout for the smoothness error: point positions plus
/// predicted and target scalar fields per timestep, single-column frames.
#[derive(Debug, Clone)]
pub struct SmoothnessCase {
    pub positions: Array2<f64>,
    pub preds: Vec<Array2<f64>>,
    pub targets: Vec<Array2<f64>>,
}

/// Smoothness error plus the number of (case, timestep, bin) terms that
/// were dropped because the bin was empty on either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrSmoothOutcome {
    pub value: f64,
    pub missing_bins: usize,
}

/// Mean absolute two-point-correlation difference, averaged over cases,
/// timesteps, and radial bins; empty bins are excluded and counted.
pub fn err_smooth(
    cases: &[SmoothnessCase],
    r_edges: &[f64],
) -> Result<ErrSmoothOutcome, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_r_edges(r_edges)?;
    let bins = (r_edges.len() - 1) as f64;
    let mut total = 0.0;
    let mut missing = 0usize;
    for case in cases {
        check_lengths(case.preds.len(), case.targets.len())?;
        let mut case_sum = 0.0;
        for (pred, target) in case.preds.iter().zip(&case.targets) {
            let xi_p = two_point_correlation(&case.positions, column_field(pred)?, r_edges)?;
            let xi_t = two_point_correlation(&case.positions, column_field(target)?, r_edges)?;
            for (p, t) in xi_p.xi.iter().zip(&xi_t.xi) {
                match (p, t) {
                    (Some(p), Some(t)) => case_sum += (t - p).abs(),
                    _ => missing += 1,
                }
            }
        }
        total += case_sum / (case.preds.len() as f64 * bins);
    }
    Ok(ErrSmoothOutcome { value: total / cases.len() as f64, missing_bins: missing })
}

fn column_field(frame: &Array2<f64>) -> Result<&[f64], MetricsError> {
    if frame.ncols() != 1 {
        return Err(MetricsError::ShapeMismatch(format!(
            "smoothness fields are scalar; got {} columns",
            frame.ncols()
        )));
    }
    frame
        .as_slice()
        .ok_or_else(|| MetricsError::ShapeMismatch("non-contiguous frame".into()))
}

/// Area weights for latitude bands: normalized differences of sines of
/// the band edges (radians, ascending). Weights average to one, so they
/// sum to the band count.
pub fn lat_weights(lat_edges: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if lat_edges.len() < 2 {
        return Err(MetricsError::BadBins("need at least one latitude band".into()));
    }
    if lat_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::BadBins("latitude edges must strictly increase".into()));
    }
    let diffs: Vec<f64> = lat_edges.windows(2).map(|w| w[1].sin() - w[0].sin()).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok(diffs.iter().map(|d| d / mean).collect())
}

fn check_grid(
    f: &Array4<f64>,
    o: &Array3<f64>,
    w: &[f64],
) -> Result<(usize, usize, usize, usize), MetricsError> {
    let (t, l, i, j) = f.dim();
    if o.dim() != (t, i, j) {
        return Err(MetricsError::ShapeMismatch(format!(
            "forecast is {:?} but observation is {:?}",
            f.dim(),
            o.dim()
        )));
    }
    if w.len() != i {
        return Err(MetricsError::ShapeMismatch(format!(
            "{i} latitude rows but {} weights",
            w.len()
        )));
    }
    if t == 0 || l == 0 || i == 0 || j == 0 {
        return Err(MetricsError::Empty);
    }
    Ok((t, l, i, j))
}

/// Latitude-weighted RMSE per lead time: forecasts indexed
/// (time, lead, lat, lon) against observations (time, lat, lon).
pub fn rmse_lat(
    f: &Array4<f64>,
    o: &Array3<f64>,
    w: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    let (t_len, l_len, i_len, j_len) = check_grid(f, o, w)?;
    let mut out = Vec::with_capacity(l_len);
    for l in 0..l_len {
        let mut sum = 0.0;
        for t in 0..t_len {
            for i in 0..i_len {
                for j in 0..j_len {
                    let d = f[(t, l, i, j)] - o[(t, i, j)];
                    sum += w[i] * d * d;
                }
            }
        }
        out.push((sum / (t_len * i_len * j_len) as f64).sqrt());
    }
    Ok(out)
}

/// Latitude-weighted anomaly correlation per lead time. The climatology
/// is indexed by absolute time and must extend to step t + l, since the
/// forecast anomaly at lead l is taken against the valid-time climatology.
pub fn acc_lat(
    f: &Array4<f64>,
    o: &Array3<f64>,
    c: &Array3<f64>,
    w: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    let (t_len, l_len, i_len, j_len) = check_grid(f, o, w)?;
    let needed = t_len + l_len - 1;
    if c.dim().1 != i_len || c.dim().2 != j_len {
        return Err(MetricsError::ShapeMismatch(format!(
            "climatology grid is {:?}, expected (_, {i_len}, {j_len})",
            c.dim()
        )));
    }
    if c.dim().0 < needed {
        return Err(MetricsError::ClimatologyTooShort { needed, got: c.dim().0 });
    }
    let mut out = Vec::with_capacity(l_len);
    for l in 0..l_len {
        let mut acc = 0.0;
        for t in 0..t_len {
            let mut cross = 0.0;
            let mut f_energy = 0.0;
            let mut o_energy = 0.0;
            for i in 0..i_len {
                for j in 0..j_len {
                    let fp = f[(t, l, i, j)] - c[(t + l, i, j)];
                    let op = o[(t, i, j)] - c[(t, i, j)];
                    cross += w[i] * fp * op;
                    f_energy += w[i] * fp * fp;
                    o_energy += w[i] * op * op;
                }
            }
            acc += cross / (f_energy * o_energy).sqrt();
        }
        out.push(acc / t_len as f64);
    }
    Ok(out)
}

/// One metric value in the shared CSV row schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub mesh_id: String,
    pub metric: String,
    pub value: f64,
}

/// CSV with the header `run_id,mesh_id,metric,value`.
pub fn metric_rows_to_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("run_id,mesh_id,metric,value\n");
    for row in rows {
        s.push_str(&format!("{},{},{},{}\n", row.run_id, row.mesh_id, row.metric, row.value));
    }
    s
}

/// JSON summary of one evaluation run. Values are stored unscaled; any
/// presentation scaling (e.g. by rollout length) is recorded in
/// `scale_factor` instead of baked into the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub run_id: String,
    pub scale_factor: f64,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub skipped_frames: usize,
    #[serde(default)]
    pub missing_bins: usize,
}

impl EvalSummary {
    pub fn new(run_id: &str) -> Self {
        EvalSummary {
            run_id: run_id.to_string(),
            scale_factor: 1.0,
            metrics: BTreeMap::new(),
            skipped_frames: 0,
            missing_bins: 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
