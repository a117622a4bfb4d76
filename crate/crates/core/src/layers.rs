//! Convolution layers recorded on the autodiff tape and the model
//! assemblies built from them.
//!
//! Three layer families exist. Plain graph convolution `A_n X W` smooths its
//! input and is the trainable baseline. Unitary convolutions (separable
//! `exp(i A_n t) X U` and Lie `exp_L(X)` with `L(X) = A_n X W`, `W` skew)
//! preserve both the Frobenius norm and the Rayleigh quotient when the
//! exponential series is truncated deep enough. The Taylor-relaxed layer is
//! the Lie layer truncated at low order: cheaper, no longer exactly unitary,
//! and the building block of the relaxed models.
//!
//! [`Model`] turns a declarative [`ModelSpec`] into parameter tensors plus a
//! forward pass. The same spec drives both graph and mesh operators; the
//! operator matrix is supplied at bind time.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, Tape};
use crate::dynamics::{DynamicsError, Trajectory};
use crate::linalg::{unitary_from_free, LinalgError};
use crate::mesh::MeshOperators;
use crate::scalar::{Scalar, ScalarKind};
use crate::util::stream_rng;

/// Truncation order at which the exponential layers behave as unitary maps
/// to well below 1e-6 for the operator norms reached by the default
/// initialization scales.
pub const FAITHFUL_T_MAX: usize = 10;

/// Truncation order of the relaxed layers.
pub const RELAXED_T_MAX: usize = 3;

/// Most negative off-diagonal weight a mesh operator may carry before the
/// unitary mesh convolutions reject it.
pub const WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("{layer} cannot change the channel dimension: width_in {width_in} != width_out {width_out}")]
    WidthChange { layer: &'static str, width_in: usize, width_out: usize },
    #[error("{0} requires the complex scalar kind")]
    ComplexRequired(&'static str),
    #[error("mesh operator carries an off-diagonal weight {min:.3e} below -{WEIGHT_TOL:.0e}; rewire the mesh first")]
    NegativeWeight { min: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tensor(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Activation applied after the affine part of a graph convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// Graph convolution `A_n X W` followed by the chosen activation.
pub fn gcn_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    a_norm: NodeId,
    w: NodeId,
    activation: Activation,
) -> Result<NodeId, LayerError> {
    let ax = tape.matmul(a_norm, x)?;
    let axw = tape.matmul(ax, w)?;
    Ok(match activation {
        Activation::Identity => axw,
        Activation::Relu => tape.relu(axw)?,
    })
}

/// Separable unitary convolution `exp(i A_n t) X U`.
///
/// `t` is a trainable 1x1 real-valued node; `u` must hold a unitary matrix
/// (see [`unitary_from_free`]). The left exponential is the truncated series
/// of order `t_max` on `i A_n t`. Only the complex instantiation exists:
/// the real field has no imaginary unit to place in the exponent.
pub fn sep_uni_conv<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    a_norm: NodeId,
    t: NodeId,
    u: NodeId,
    t_max: usize,
) -> Result<NodeId, LayerError> {
    let i = T::imaginary_unit().ok_or(LayerError::ComplexRequired("sep_uni_conv"))?;
    let it = tape.scale_const(t, i);
    let ex = tape.truncated_exp_scaled(it, a_norm, x, t_max)?;
    Ok(tape.matmul(ex, u)?)
}

/// Lie unitary convolution: the truncated exponential of the conjugation
/// operator `L(X) = A_n X W` applied to `X`, with `W = S - S^H` built on the
/// tape from the free matrix `S`.
///
/// Over the reals the skew parameterization makes the channel mixing
/// orthogonal; over the complex field it is unitary. At `t_max` = 1 the
/// output is exactly `X + A_n X W`.
pub fn lie_uni_conv<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    a_norm: NodeId,
    s: NodeId,
    t_max: usize,
) -> Result<NodeId, LayerError> {
    let sh = tape.transpose_conj(s);
    let w = tape.sub(s, sh)?;
    Ok(tape.truncated_exp_operator(a_norm, x, w, t_max)?)
}

/// Taylor-relaxed unitary convolution: [`lie_uni_conv`] truncated at low
/// order. Exposed under its own name so model configs state the intent; at
/// `t_max` = [`RELAXED_T_MAX`] this is the degree-3 operator polynomial.
pub fn taylor_relaxed_conv<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    a_norm: NodeId,
    s: NodeId,
    t_max: usize,
) -> Result<NodeId, LayerError> {
    lie_uni_conv(tape, x, a_norm, s, t_max)
}

/// Appends `d_out - d_in` zero columns. Norm and Rayleigh quotient are
/// unchanged bitwise; the backward pass drops the padded columns.
pub fn zero_pad<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    d_out: usize,
) -> Result<NodeId, LayerError> {
    Ok(tape.zero_pad(x, d_out)?)
}

/// Parameters of one unitary mesh convolution.
#[derive(Debug, Clone, Copy)]
pub enum MeshConvParams {
    /// Separable variant: trainable time and a fixed unitary mixing node.
    Sep { time: NodeId, unitary: NodeId },
    /// Lie variant: free matrix node, made skew on the tape.
    Lie { free: NodeId },
}

/// Unitary convolution driven by the weighted normalized adjacency of a
/// mesh. Rejects operators whose off-diagonal weights dip below
/// -[`WEIGHT_TOL`]: norm and Rayleigh-quotient preservation hold only for
/// nonnegative weights, which intrinsic Delaunay rewiring guarantees.
pub fn uni_mesh_conv<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    ops: &MeshOperators,
    params: MeshConvParams,
    t_max: usize,
) -> Result<NodeId, LayerError> {
    let min = ops.min_weight();
    if min < -WEIGHT_TOL {
        return Err(LayerError::NegativeWeight { min });
    }
    let a_norm = tape.constant(ops.a_norm().mapv(T::from_f64));
    match params {
        MeshConvParams::Sep { time, unitary } => sep_uni_conv(tape, x, a_norm, time, unitary, t_max),
        MeshConvParams::Lie { free } => lie_uni_conv(tape, x, a_norm, free, t_max),
    }
}

/// Layer kinds assemblable through [`ModelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Gcn,
    SepUni,
    LieUni,
    TaylorRelaxed,
    ZeroPad,
    GroupSort,
    MlpSin,
    GcnDecoder,
}

impl LayerKind {
    fn is_unitary_family(self) -> bool {
        matches!(self, LayerKind::SepUni | LayerKind::LieUni | LayerKind::TaylorRelaxed)
    }
}

/// One layer of a model: kind, widths, and the exponential truncation order
/// where applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub width_in: usize,
    pub width_out: usize,
    /// Exponential truncation order; ignored by non-exponential kinds.
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_scalar_kind")]
    pub scalar_kind: ScalarKind,
}

fn default_t_max() -> usize {
    FAITHFUL_T_MAX
}

fn default_scalar_kind() -> ScalarKind {
    ScalarKind::Real64
}

impl LayerSpec {
    /// Real-valued layer with the conventional truncation order for its
    /// kind: [`RELAXED_T_MAX`] for the relaxed layer, [`FAITHFUL_T_MAX`]
    /// otherwise.
    pub fn new(kind: LayerKind, width_in: usize, width_out: usize) -> Self {
        let t_max = match kind {
            LayerKind::TaylorRelaxed => RELAXED_T_MAX,
            _ => FAITHFUL_T_MAX,
        };
        LayerSpec { kind, width_in, width_out, t_max, scalar_kind: ScalarKind::Real64 }
    }

    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn complex(mut self) -> Self {
        self.scalar_kind = ScalarKind::Complex128;
        self
    }

    fn validate(&self) -> Result<(), LayerError> {
        if self.width_in == 0 || self.width_out == 0 {
            return Err(LayerError::Spec("layer widths must be positive".into()));
        }
        if self.kind.is_unitary_family() && self.width_in != self.width_out {
            return Err(LayerError::WidthChange {
                layer: "unitary convolution",
                width_in: self.width_in,
                width_out: self.width_out,
            });
        }
        match self.kind {
            LayerKind::ZeroPad if self.width_out < self.width_in => {
                return Err(LayerError::Spec(format!(
                    "zero_pad cannot narrow {} columns to {}",
                    self.width_in, self.width_out
                )));
            }
            LayerKind::GroupSort => {
                if self.width_in != self.width_out {
                    return Err(LayerError::WidthChange {
                        layer: "group_sort",
                        width_in: self.width_in,
                        width_out: self.width_out,
                    });
                }
                if !self.width_in.is_multiple_of(2) {
                    return Err(LayerError::Spec(format!(
                        "group_sort needs an even width, got {}",
                        self.width_in
                    )));
                }
            }
            _ => {}
        }
        if self.kind.is_unitary_family() && self.t_max == 0 {
            return Err(LayerError::Spec("exponential layers need t_max >= 1".into()));
        }
        Ok(())
    }

    /// Parameter tensors owned by this layer, in registration order.
    fn param_defs(&self, index: usize) -> Vec<ParamDef> {
        let named = |suffix: &str, rows: usize, cols: usize, init: Init| ParamDef {
            info: ParamInfo { name: format!("layer{index}.{suffix}"), rows, cols },
            init,
        };
        let fan_in = self.width_in;
        let std = 1.0 / (fan_in as f64).sqrt();
        match self.kind {
            LayerKind::Gcn | LayerKind::GcnDecoder => {
                vec![named("w", self.width_in, self.width_out, Init::Normal { std })]
            }
            LayerKind::SepUni => vec![
                named("time", 1, 1, Init::One),
                named("free", self.width_in, self.width_in, Init::Normal { std }),
            ],
            LayerKind::LieUni | LayerKind::TaylorRelaxed => {
                vec![named("free", self.width_in, self.width_in, Init::Normal { std })]
            }
            LayerKind::ZeroPad | LayerKind::GroupSort => vec![],
            LayerKind::MlpSin => vec![
                named("w1", self.width_in, self.width_in, Init::Normal { std }),
                named("b1", 1, self.width_in, Init::Zero),
                named("w2", self.width_in, self.width_out, Init::Normal { std }),
                named("b2", 1, self.width_out, Init::Zero),
            ],
        }
    }
}

/// Which operator feeds the convolutions: the degree-normalized adjacency of
/// a graph, or the weighted normalized adjacency of a rewired mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSource {
    GraphNormalized,
    MeshWeighted,
}

/// Shape manifest entry for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    One,
    Zero,
    Normal { std: f64 },
}

struct ParamDef {
    info: ParamInfo,
    init: Init,
}

/// Declarative model description: an ordered layer list plus the operator
/// family it runs on. The parameter manifest is derived from the layers and
/// kept only as a cross-check for serialized specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub operator_source: OperatorSource,
    #[serde(default)]
    pub params: Vec<ParamInfo>,
    pub seed: u64,
}

impl ModelSpec {
    /// Builds a spec with the parameter manifest filled in.
    pub fn new(layers: Vec<LayerSpec>, operator_source: OperatorSource, seed: u64) -> Self {
        let params = param_layout(&layers).into_iter().map(|d| d.info).collect();
        ModelSpec { layers, operator_source, params, seed }
    }

    /// Number of stored scalar components: complex tensors count two per
    /// entry.
    pub fn param_count(&self) -> usize {
        let components = match self.scalar_kind() {
            ScalarKind::Real64 => 1,
            ScalarKind::Complex128 => 2,
        };
        param_layout(&self.layers)
            .iter()
            .map(|d| d.info.rows * d.info.cols * components)
            .sum()
    }

    /// Scalar kind shared by every layer (validated at build time); an empty
    /// model defaults to real.
    pub fn scalar_kind(&self) -> ScalarKind {
        self.layers.first().map_or(ScalarKind::Real64, |l| l.scalar_kind)
    }

    /// Parameter manifest derived from the layer list, one entry per slot.
    pub fn param_infos(&self) -> Vec<ParamInfo> {
        param_layout(&self.layers).into_iter().map(|d| d.info).collect()
    }

    fn validate(&self, kind: ScalarKind) -> Result<(), LayerError> {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if layer.scalar_kind != kind {
                return Err(LayerError::Spec(format!(
                    "layer {i} is declared {} but the model is built over {kind}",
                    layer.scalar_kind
                )));
            }
            if layer.kind == LayerKind::SepUni && kind != ScalarKind::Complex128 {
                return Err(LayerError::ComplexRequired("sep_uni"));
            }
            if kind == ScalarKind::Complex128 {
                let real_only = matches!(layer.kind, LayerKind::GroupSort | LayerKind::MlpSin)
                    || (layer.kind == LayerKind::Gcn && i + 1 != self.layers.len());
                if real_only {
                    return Err(LayerError::Spec(format!(
                        "layer {i} ({:?}) needs the real field",
                        layer.kind
                    )));
                }
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].width_out != pair[1].width_in {
                return Err(LayerError::Spec(format!(
                    "layer {i} emits {} columns but layer {} expects {}",
                    pair[0].width_out,
                    i + 1,
                    pair[1].width_in
                )));
            }
        }
        if !self.params.is_empty() {
            let expected: Vec<ParamInfo> =
                param_layout(&self.layers).into_iter().map(|d| d.info).collect();
            if self.params != expected {
                return Err(LayerError::Spec(
                    "parameter manifest disagrees with the layer list".into(),
                ));
            }
        }
        Ok(())
    }
}

fn param_layout(layers: &[LayerSpec]) -> Vec<ParamDef> {
    layers.iter().enumerate().flat_map(|(i, l)| l.param_defs(i)).collect()
}

/// A built model: spec plus one tensor per parameter slot.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    spec: ModelSpec,
    params: Vec<Array2<T>>,
}

impl<T: Scalar> Model<T> {
    /// Validates the spec and initializes parameters from the spec seed:
    /// free and weight matrices i.i.d. normal with standard deviation
    /// 1/sqrt(width_in), biases zero, separable times one. Each slot draws
    /// from its own derived stream, so the layout, not the sampling order,
    /// fixes the values.
    pub fn build(spec: ModelSpec) -> Result<Self, LayerError> {
        spec.validate(T::KIND)?;
        let params = param_layout(&spec.layers)
            .iter()
            .enumerate()
            .map(|(slot, def)| {
                let shape = (def.info.rows, def.info.cols);
                match def.init {
                    Init::One => Array2::from_elem(shape, T::one()),
                    Init::Zero => Array2::zeros(shape),
                    Init::Normal { std } => {
                        let mut rng = stream_rng(spec.seed, "param", slot as u64);
                        let scale = T::from_f64(std);
                        Array2::from_shape_fn(shape, |_| T::standard_normal(&mut rng) * scale)
                    }
                }
            })
            .collect();
        Ok(Model { spec, params })
    }

    /// Wraps existing tensors, checking them against the spec layout.
    pub fn from_params(spec: ModelSpec, params: Vec<Array2<T>>) -> Result<Self, LayerError> {
        spec.validate(T::KIND)?;
        let layout = param_layout(&spec.layers);
        if layout.len() != params.len() {
            return Err(LayerError::Spec(format!(
                "expected {} parameter tensors, got {}",
                layout.len(),
                params.len()
            )));
        }
        for (def, p) in layout.iter().zip(&params) {
            if p.dim() != (def.info.rows, def.info.cols) {
                return Err(LayerError::Spec(format!(
                    "{} must be {}x{}, got {}x{}",
                    def.info.name,
                    def.info.rows,
                    def.info.cols,
                    p.nrows(),
                    p.ncols()
                )));
            }
        }
        Ok(Model { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Array2<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.params
    }

    /// Stored scalar components across all tensors.
    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Registers the operator and every parameter on the tape once,
    /// returning a handle whose `forward` can be applied repeatedly (e.g.
    /// across rollout steps) while sharing parameter nodes.
    pub fn bind<'m>(
        &'m self,
        tape: &mut Tape<T>,
        a_norm: &Array2<f64>,
    ) -> Result<BoundModel<'m, T>, LayerError> {
        if self.spec.operator_source == OperatorSource::MeshWeighted {
            let min = off_diagonal_min(a_norm);
            if min < -WEIGHT_TOL {
                return Err(LayerError::NegativeWeight { min });
            }
        }
        let nodes = self
            .params
            .iter()
            .enumerate()
            .map(|(slot, p)| tape.param(slot, p.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        self.bind_with_nodes(tape, a_norm, nodes)
    }

    /// [`Model::bind`] with caller-registered parameter nodes, in slot
    /// order. Used by the gradient checker, which owns registration.
    pub fn bind_with_nodes<'m>(
        &'m self,
        tape: &mut Tape<T>,
        a_norm: &Array2<f64>,
        param_nodes: Vec<NodeId>,
    ) -> Result<BoundModel<'m, T>, LayerError> {
        if param_nodes.len() != self.params.len() {
            return Err(LayerError::Spec(format!(
                "expected {} parameter nodes, got {}",
                self.params.len(),
                param_nodes.len()
            )));
        }
        let a_node = tape.constant(a_norm.mapv(T::from_f64));
        Ok(BoundModel { model: self, a_node, param_nodes })
    }

    /// One-shot forward pass on a fresh input.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        a_norm: &Array2<f64>,
        x: &Array2<T>,
    ) -> Result<NodeId, LayerError> {
        let bound = self.bind(tape, a_norm)?;
        let x_node = tape.constant(x.clone());
        bound.forward(tape, x_node)
    }

    /// Forward pass against a mesh operator, checking the raw weight
    /// precondition rather than the normalized entries.
    pub fn forward_mesh(
        &self,
        tape: &mut Tape<T>,
        ops: &MeshOperators,
        x: &Array2<T>,
    ) -> Result<NodeId, LayerError> {
        let min = ops.min_weight();
        if min < -WEIGHT_TOL {
            return Err(LayerError::NegativeWeight { min });
        }
        self.forward(tape, ops.a_norm(), x)
    }

    /// Writes `model.json` (spec, scalar kind, tensor index) and
    /// `params.bin` (one single- or two-frame trajectory record per tensor;
    /// complex tensors store real and imaginary planes) under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), LayerError> {
        fs::create_dir_all(dir)?;
        let mut blob = Vec::new();
        let mut tensors = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let record = tensor_trajectory(p)?;
            let offset = blob.len() as u64;
            record.write_to(&mut blob)?;
            tensors.push(TensorEntry { offset, len: blob.len() as u64 - offset });
        }
        let header = CheckpointHeader {
            version: CHECKPOINT_VERSION,
            scalar: T::KIND,
            spec: self.spec.clone(),
            tensors,
        };
        fs::write(dir.join("params.bin"), &blob)?;
        fs::write(dir.join("model.json"), serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }

    /// Loads a checkpoint written by [`Model::save`]; the stored scalar kind
    /// must match `T`.
    pub fn load(dir: &Path) -> Result<Self, LayerError> {
        let header: CheckpointHeader =
            serde_json::from_str(&fs::read_to_string(dir.join("model.json"))?)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(LayerError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                header.version
            )));
        }
        if header.scalar != T::KIND {
            return Err(LayerError::Checkpoint(format!(
                "checkpoint holds {} tensors but the model is built over {}",
                header.scalar,
                T::KIND
            )));
        }
        let blob = fs::read(dir.join("params.bin"))?;
        let mut params = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let start = entry.offset as usize;
            let end = start + entry.len as usize;
            if end > blob.len() {
                return Err(LayerError::Checkpoint("tensor entry past end of params.bin".into()));
            }
            let record = Trajectory::read_from(&mut &blob[start..end])?;
            params.push(tensor_from_trajectory::<T>(&record)?);
        }
        Model::from_params(header.spec, params)
    }
}

fn off_diagonal_min(a: &Array2<f64>) -> f64 {
    let mut min = f64::INFINITY;
    for ((r, c), v) in a.indexed_iter() {
        if r != c && *v < min {
            min = *v;
        }
    }
    if min.is_finite() {
        min
    } else {
        0.0
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    version: u32,
    scalar: ScalarKind,
    spec: ModelSpec,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    offset: u64,
    len: u64,
}

fn tensor_trajectory<T: Scalar>(m: &Array2<T>) -> Result<Trajectory, DynamicsError> {
    let re = m.mapv(|z| z.re());
    match T::KIND {
        ScalarKind::Real64 => Trajectory::new(vec![0.0], vec![re]),
        ScalarKind::Complex128 => {
            Trajectory::new(vec![0.0, 1.0], vec![re, m.mapv(|z| z.im())])
        }
    }
}

fn tensor_from_trajectory<T: Scalar>(record: &Trajectory) -> Result<Array2<T>, LayerError> {
    match (T::KIND, record.frames.len()) {
        (ScalarKind::Real64, 1) => Ok(record.frames[0].mapv(T::from_f64)),
        (ScalarKind::Complex128, 2) => {
            let i = T::imaginary_unit().expect("complex kind has an imaginary unit");
            let re = record.frames[0].mapv(T::from_f64);
            let im = record.frames[1].mapv(|v| T::from_f64(v) * i);
            Ok(re + im)
        }
        (kind, frames) => Err(LayerError::Checkpoint(format!(
            "tensor record holds {frames} plane(s), which does not encode a {kind} tensor"
        ))),
    }
}

/// A model bound to one tape: operator and parameters registered, forward
/// appliable any number of times.
pub struct BoundModel<'m, T: Scalar> {
    model: &'m Model<T>,
    a_node: NodeId,
    param_nodes: Vec<NodeId>,
}

impl<T: Scalar> BoundModel<'_, T> {
    pub fn a_node(&self) -> NodeId {
        self.a_node
    }

    pub fn param_nodes(&self) -> &[NodeId] {
        &self.param_nodes
    }

    /// Records one forward pass from `x`. Graph convolutions apply ReLU
    /// except in final position; separable layers treat the unitary mixing
    /// as a constant derived from the stored free matrix, so only their
    /// time parameter trains.
    pub fn forward(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId, LayerError> {
        let layers = &self.model.spec.layers;
        let mut h = x;
        let mut slot = 0;
        for (i, layer) in layers.iter().enumerate() {
            let last = i + 1 == layers.len();
            match layer.kind {
                LayerKind::Gcn => {
                    let act = if last { Activation::Identity } else { Activation::Relu };
                    h = gcn_layer(tape, h, self.a_node, self.param_nodes[slot], act)?;
                    slot += 1;
                }
                LayerKind::GcnDecoder => {
                    h = gcn_layer(
                        tape,
                        h,
                        self.a_node,
                        self.param_nodes[slot],
                        Activation::Identity,
                    )?;
                    slot += 1;
                }
                LayerKind::SepUni => {
                    let time = self.param_nodes[slot];
                    let u = tape.constant(unitary_from_free(&self.model.params[slot + 1])?);
                    h = sep_uni_conv(tape, h, self.a_node, time, u, layer.t_max)?;
                    slot += 2;
                }
                LayerKind::LieUni | LayerKind::TaylorRelaxed => {
                    h = lie_uni_conv(tape, h, self.a_node, self.param_nodes[slot], layer.t_max)?;
                    slot += 1;
                }
                LayerKind::ZeroPad => {
                    h = tape.zero_pad(h, layer.width_out)?;
                }
                LayerKind::GroupSort => {
                    h = tape.group_sort(h)?;
                }
                LayerKind::MlpSin => {
                    let (w1, b1) = (self.param_nodes[slot], self.param_nodes[slot + 1]);
                    let (w2, b2) = (self.param_nodes[slot + 2], self.param_nodes[slot + 3]);
                    slot += 4;
                    let n = tape.value(h).nrows();
                    let ones = tape.constant(Array2::from_elem((n, 1), T::one()));
                    let lin1 = tape.matmul(h, w1)?;
                    let bias1 = tape.matmul(ones, b1)?;
                    let pre = tape.add(lin1, bias1)?;
                    let hidden = tape.sin(pre)?;
                    let lin2 = tape.matmul(hidden, w2)?;
                    let bias2 = tape.matmul(ones, b2)?;
                    h = tape.add(lin2, bias2)?;
                }
            }
        }
        Ok(h)
    }
}

/// Decoder family for the assembled models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    MlpSin,
    GcnDecoder,
}

fn decoder_layer(decoder: DecoderKind, hidden: usize, width_out: usize) -> LayerSpec {
    match decoder {
        DecoderKind::MlpSin => LayerSpec::new(LayerKind::MlpSin, hidden, width_out),
        DecoderKind::GcnDecoder => LayerSpec::new(LayerKind::GcnDecoder, hidden, width_out),
    }
}

/// Plain graph-convolution baseline: one layer per adjacent width pair,
/// ReLU between layers, linear output.
pub fn gcn_spec(
    widths: &[usize],
    operator_source: OperatorSource,
    seed: u64,
) -> Result<ModelSpec, LayerError> {
    if widths.len() < 2 {
        return Err(LayerError::Spec("a convolution stack needs at least two widths".into()));
    }
    let layers = widths
        .windows(2)
        .map(|w| LayerSpec::new(LayerKind::Gcn, w[0], w[1]))
        .collect();
    Ok(ModelSpec::new(layers, operator_source, seed))
}

/// Relaxed unitary graph model: zero-pad encoder into `hidden` channels,
/// `encoder_layers` Taylor-relaxed convolutions, then the chosen decoder.
pub fn r_uni_graph_spec(
    width_in: usize,
    hidden: usize,
    encoder_layers: usize,
    t_max: usize,
    decoder: DecoderKind,
    width_out: usize,
    seed: u64,
) -> Result<ModelSpec, LayerError> {
    let mut layers = vec![LayerSpec::new(LayerKind::ZeroPad, width_in, hidden)];
    for _ in 0..encoder_layers {
        layers.push(LayerSpec::new(LayerKind::TaylorRelaxed, hidden, hidden).with_t_max(t_max));
    }
    layers.push(decoder_layer(decoder, hidden, width_out));
    let spec = ModelSpec::new(layers, OperatorSource::GraphNormalized, seed);
    spec.validate(ScalarKind::Real64)?;
    Ok(spec)
}

/// Relaxed unitary mesh model: zero-pad, then `encoder_layers` blocks of
/// Lie convolution over the weighted mesh operator followed by GroupSort,
/// then the chosen decoder. `hidden` must be even for the pairwise sort.
pub fn r_uni_mesh_spec(
    width_in: usize,
    hidden: usize,
    encoder_layers: usize,
    t_max: usize,
    decoder: DecoderKind,
    width_out: usize,
    seed: u64,
) -> Result<ModelSpec, LayerError> {
    let mut layers = vec![LayerSpec::new(LayerKind::ZeroPad, width_in, hidden)];
    for _ in 0..encoder_layers {
        layers.push(LayerSpec::new(LayerKind::LieUni, hidden, hidden).with_t_max(t_max));
        layers.push(LayerSpec::new(LayerKind::GroupSort, hidden, hidden));
    }
    layers.push(decoder_layer(decoder, hidden, width_out));
    let spec = ModelSpec::new(layers, OperatorSource::MeshWeighted, seed);
    spec.validate(ScalarKind::Real64)?;
    Ok(spec)
}
