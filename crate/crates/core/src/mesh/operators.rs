//! Discrete operators over an intrinsic triangulation: cotangent stiffness,
//! barycentric vertex areas, and the weighted degree-normalized adjacency.
//!
//! Two different normalizations coexist on purpose. The Rayleigh quotient
//! uses the degree normalization `D^{-1/2} W D^{-1/2}` and never touches
//! vertex areas; the PDE simulators use the area normalization `1/(2 A_i)`.
//! Mixing them up changes the spectrum and breaks both use cases.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{IntrinsicMesh, MeshError};
use crate::graph::GraphError;
use crate::linalg::SparseSym;
use crate::scalar::Scalar;

/// Cotangent stiffness in the zero-row-sum convention:
/// off-diagonal `W_ij = (cot a + cot b) / 2` (one term on the boundary),
/// diagonal `-sum_j W_ij`, so `(C u)_i = sum_j W_ij (u_j - u_i)`.
pub fn cotangent_weights(mesh: &IntrinsicMesh) -> SparseSym {
    let n = mesh.n_vertices();
    let mut off = Vec::with_capacity(mesh.n_edges());
    let mut diag = vec![0.0; n];
    for (u, v, _) in mesh.edges() {
        let w = 0.5 * mesh.opposite_cotangent_sum(u, v);
        off.push((u, v, w));
        diag[u] -= w;
        diag[v] -= w;
    }
    SparseSym::new(n, diag, off)
}

/// One third of the incident face areas per vertex.
pub fn barycentric_areas(mesh: &IntrinsicMesh) -> Vec<f64> {
    let mut areas = vec![0.0; mesh.n_vertices()];
    for fi in 0..mesh.faces().len() {
        let a = mesh.face_area(fi) / 3.0;
        for &v in &mesh.faces()[fi] {
            areas[v] += a;
        }
    }
    areas
}

/// Everything the layers and simulators need from a mesh.
#[derive(Debug, Clone)]
pub struct MeshOperators {
    n: usize,
    stiffness: SparseSym,
    areas: Vec<f64>,
    weighted_degrees: Vec<f64>,
    a_norm: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorsJson {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    areas: Vec<f64>,
}

impl MeshOperators {
    /// Assemble from a (rewired) intrinsic mesh. Every weighted degree must
    /// be positive, which holds after Delaunay rewiring on any connected
    /// mesh; fail otherwise rather than normalize by a nonpositive degree.
    pub fn assemble(mesh: &IntrinsicMesh) -> Result<Self, MeshError> {
        let stiffness = cotangent_weights(mesh);
        let areas = barycentric_areas(mesh);
        Self::from_parts(mesh.n_vertices(), stiffness, areas)
    }

    fn from_parts(n: usize, stiffness: SparseSym, areas: Vec<f64>) -> Result<Self, MeshError> {
        let mut weighted_degrees = vec![0.0; n];
        for &(i, j, w) in stiffness.off_triplets() {
            weighted_degrees[i] += w;
            weighted_degrees[j] += w;
        }
        if let Some(v) = weighted_degrees.iter().position(|&d| d <= 0.0) {
            return Err(MeshError::NonPositiveDegree(v));
        }
        let inv_sqrt: Vec<f64> = weighted_degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut a_norm = Array2::zeros((n, n));
        for &(i, j, w) in stiffness.off_triplets() {
            let val = w * inv_sqrt[i] * inv_sqrt[j];
            a_norm[(i, j)] = val;
            a_norm[(j, i)] = val;
        }
        Ok(MeshOperators { n, stiffness, areas, weighted_degrees, a_norm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stiffness(&self) -> &SparseSym {
        &self.stiffness
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn weighted_degrees(&self) -> &[f64] {
        &self.weighted_degrees
    }

    /// Weighted degree-normalized adjacency `D^{-1/2} W D^{-1/2}`.
    pub fn a_norm(&self) -> &Array2<f64> {
        &self.a_norm
    }

    /// Area-normalized Laplacian `(1/A_i) (C u)_i`, the operator the PDE
    /// simulators step with. Nonpositive spectrum when all weights are
    /// nonnegative: diffusion decays. The Rayleigh quotient never uses this;
    /// the area factor would break the symmetry the quotient relies on.
    pub fn laplacian_times(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.stiffness.matvec(u);
        for (o, a) in out.iter_mut().zip(&self.areas) {
            *o /= a;
        }
        out
    }

    /// Minimum off-diagonal cotangent weight; nonnegative after rewiring.
    pub fn min_weight(&self) -> f64 {
        self.stiffness
            .off_triplets()
            .iter()
            .map(|&(_, _, w)| w)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        let doc = OperatorsJson {
            n: self.n,
            edges: self.stiffness.off_triplets().to_vec(),
            areas: self.areas.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("operator serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let doc: OperatorsJson = serde_json::from_str(text)?;
        if doc.areas.len() != doc.n {
            return Err(MeshError::OperatorFormat(format!(
                "areas length {} does not match n = {}",
                doc.areas.len(),
                doc.n
            )));
        }
        if let Some(a) = doc.areas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(MeshError::OperatorFormat(format!("nonpositive vertex area {a}")));
        }
        let mut diag = vec![0.0; doc.n];
        let mut off = Vec::with_capacity(doc.edges.len());
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j, w) in &doc.edges {
            if i >= j || j >= doc.n {
                return Err(MeshError::OperatorFormat(format!(
                    "edge ({i}, {j}) must satisfy i < j < n"
                )));
            }
            if !w.is_finite() {
                return Err(MeshError::OperatorFormat(format!("non-finite weight on edge ({i}, {j})")));
            }
            if !seen.insert((i, j)) {
                return Err(MeshError::OperatorFormat(format!("duplicate edge ({i}, {j})")));
            }
            off.push((i, j, w));
            diag[i] -= w;
            diag[j] -= w;
        }
        Self::from_parts(doc.n, SparseSym::new(doc.n, diag, off), doc.areas)
    }
}

/// Rayleigh quotient of mesh features under the weighted degree-normalized
/// adjacency (trace form; area-free by construction).
pub fn mesh_rayleigh_quotient<T: Scalar>(
    ops: &MeshOperators,
    x: &Array2<T>,
) -> Result<f64, GraphError> {
    crate::graph::rayleigh_quotient(ops.a_norm(), x)
}

/// Same quantity re-derived from weighted per-edge differences; kept as an
/// independent route for cross-checking, as with the graph forms.
pub fn mesh_rayleigh_quotient_edge_form<T: Scalar>(
    ops: &MeshOperators,
    x: &Array2<T>,
) -> Result<f64, GraphError> {
    if ops.n() != x.nrows() {
        return Err(GraphError::FeatureRows { expected: ops.n(), got: x.nrows() });
    }
    let denom: f64 = x.iter().map(|v| v.abs2()).sum();
    if denom == 0.0 {
        return Err(GraphError::ZeroFeatures);
    }
    let inv_sqrt: Vec<f64> = ops.weighted_degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut num = 0.0;
    for &(u, v, w) in ops.stiffness().off_triplets() {
        let su = T::from_f64(inv_sqrt[u]);
        let sv = T::from_f64(inv_sqrt[v]);
        for c in 0..x.ncols() {
            let diff = x[(u, c)] * su - x[(v, c)] * sv;
            num += w * diff.abs2();
        }
    }
    Ok(num / denom)
}
