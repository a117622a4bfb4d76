//! Triangle meshes: loading, manifold validation, intrinsic Delaunay
//! rewiring, and the discrete operators built on top.
//!
//! The pipeline is: load or generate a [`TriMesh`], validate it with
//! [`check_manifold`], drop to intrinsic edge lengths ([`IntrinsicMesh`]),
//! flip to an intrinsic Delaunay triangulation, then assemble cotangent
//! stiffness, vertex areas, and the weighted normalized adjacency
//! ([`MeshOperators`]). Rewiring first is what guarantees nonnegative
//! cotangent weights, which in turn keeps the Rayleigh quotient in [0, 2].

mod intrinsic;
mod operators;
mod shapes;
mod trimesh;

pub use intrinsic::{FlipReport, IntrinsicMesh, DELAUNAY_TOL};
pub use operators::{
    barycentric_areas, cotangent_weights, mesh_rayleigh_quotient,
    mesh_rayleigh_quotient_edge_form, MeshOperators,
};
pub use shapes::{flat_patch, icosphere, perturb_positions, torus};
pub use trimesh::{check_manifold, ManifoldReport, TriMesh};

use thiserror::Error;

/// End-to-end operator assembly. With `rewire` the mesh is first flipped to
/// an intrinsic Delaunay triangulation; without it, a mesh that violates the
/// Delaunay criterion is rejected so the caller never sees negative weights
/// silently.
pub fn mesh_operators(
    mesh: &TriMesh,
    rewire: bool,
) -> Result<(MeshOperators, FlipReport), MeshError> {
    let mut intrinsic = IntrinsicMesh::from_extrinsic(mesh)?;
    let report = if rewire {
        intrinsic.flip_to_delaunay(DELAUNAY_TOL)?
    } else {
        let violations = intrinsic.delaunay_violations(DELAUNAY_TOL);
        if !violations.is_empty() {
            return Err(MeshError::NotDelaunay { edges: violations });
        }
        FlipReport::default()
    };
    Ok((MeshOperators::assemble(&intrinsic)?, report))
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("only triangle faces are supported, face {face} has {verts} vertices")]
    UnsupportedFace { face: usize, verts: usize },
    #[error("face {face} references vertex {vertex}, but the mesh has {n} vertices")]
    IndexOutOfRange { face: usize, vertex: usize, n: usize },
    #[error("face {face} repeats a vertex")]
    RepeatedVertex { face: usize },
    #[error("face {face} is geometrically degenerate (zero area or violated triangle inequality)")]
    DegenerateFace { face: usize },
    #[error("edge ({u}, {v}) borders {count} faces; a manifold edge borders one or two")]
    NonManifoldEdge { u: usize, v: usize, count: usize },
    #[error("edge ({u}, {v}) cannot be flipped: {reason}")]
    UnflippableEdge { u: usize, v: usize, reason: &'static str },
    #[error("Delaunay rewiring did not terminate within {cap} flips")]
    FlipCapExceeded { cap: usize },
    #[error("mesh violates the Delaunay criterion on edges {edges:?}; rewire first")]
    NotDelaunay { edges: Vec<(usize, usize)> },
    #[error("vertex {0} has nonpositive weighted degree; rewire to Delaunay before normalizing")]
    NonPositiveDegree(usize),
    #[error("operator file: {0}")]
    OperatorFormat(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
