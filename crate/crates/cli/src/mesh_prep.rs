//! `mesh-prep`: validates a mesh as manifold, rewires it to the intrinsic
//! Delaunay triangulation, and writes the assembled operators plus a
//! rewiring report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use smoothdyn::mesh::{check_manifold, mesh_operators, TriMesh};

use crate::error::{domain, input_err, CliError};
use crate::io::{ensure_dir, write_out, write_resolved};

#[derive(Debug, Serialize, Deserialize)]
pub struct RewireReport {
    pub n_vertices: usize,
    pub n_faces: usize,
    pub n_edges: usize,
    pub is_closed: bool,
    pub boundary_edges: usize,
    pub flips: usize,
    pub violations_before: usize,
    pub violations_after: usize,
    pub min_weight: f64,
}

#[derive(Serialize)]
struct ResolvedMeshPrep<'a> {
    input: &'a Path,
    out: &'a Path,
}

pub fn run(input: &Path, out: &Path) -> Result<(), CliError> {
    let mesh = TriMesh::load(input).map_err(|e| input_err(input, e))?;
    let manifold = check_manifold(&mesh);
    if !manifold.is_manifold {
        return Err(CliError::Domain(format!(
            "{}: mesh is not manifold ({} nonmanifold edges, {} nonmanifold vertices, {} \
             inconsistently wound edges); repair it before preparing operators",
            input.display(),
            manifold.nonmanifold_edges.len(),
            manifold.nonmanifold_vertices.len(),
            manifold.inconsistent_edges.len()
        )));
    }
    let (ops, flips) = mesh_operators(&mesh, true).map_err(domain)?;

    ensure_dir(out)?;
    write_out(&out.join("mesh_ops.json"), &ops.to_json())?;
    mesh.write_off(&out.join("mesh.off")).map_err(|e| CliError::Output(e.to_string()))?;
    let report = RewireReport {
        n_vertices: mesh.n_vertices(),
        n_faces: mesh.faces.len(),
        n_edges: mesh.edges().len(),
        is_closed: manifold.is_closed,
        boundary_edges: manifold.boundary_edges.len(),
        flips: flips.flips,
        violations_before: flips.violations_before,
        violations_after: flips.violations_after,
        min_weight: ops.min_weight(),
    };
    write_out(
        &out.join("rewire_report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_resolved(out, "mesh-prep", &ResolvedMeshPrep { input, out })
}
