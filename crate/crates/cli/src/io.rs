//! Shared plumbing: strict config loading, resolved-config copies, and
//! sidecar discovery for operators stored next to trajectory files.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use smoothdyn::graph::{normalized_adjacency, Graph};
use smoothdyn::mesh::{MeshOperators, TriMesh};

use crate::error::{domain, input_err, output_err, CliError};

/// Parses a JSON config file; unknown keys are rejected by the target
/// type's schema.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes the fully-resolved config (defaults materialized) into the output
/// directory, making every run self-describing.
pub fn write_resolved<T: Serialize>(dir: &Path, command: &str, cfg: &T) -> Result<(), CliError> {
    let body = serde_json::json!({ "command": command, "config": cfg });
    let path = dir.join("resolved_config.json");
    let text = serde_json::to_string_pretty(&body).expect("config serializes");
    std::fs::write(&path, text).map_err(|e| output_err(&path, e))
}

/// Resolved-config copy for commands whose output is a single file: written
/// next to it as `<out>.resolved.json`.
pub fn write_resolved_sibling<T: Serialize>(
    out_file: &Path,
    command: &str,
    cfg: &T,
) -> Result<(), CliError> {
    let body = serde_json::json!({ "command": command, "config": cfg });
    let mut name = out_file.as_os_str().to_owned();
    name.push(".resolved.json");
    let path = PathBuf::from(name);
    let text = serde_json::to_string_pretty(&body).expect("config serializes");
    std::fs::write(&path, text).map_err(|e| output_err(&path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| output_err(dir, e))
}

pub fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| output_err(path, e))
}

/// The operator found next to a data file, with the path it came from.
pub enum SidecarOperator {
    Mesh { a_norm: Array2<f64>, min_weight: f64, file: PathBuf },
    Graph { a_norm: Array2<f64>, file: PathBuf },
}

impl SidecarOperator {
    pub fn a_norm(&self) -> &Array2<f64> {
        match self {
            SidecarOperator::Mesh { a_norm, .. } | SidecarOperator::Graph { a_norm, .. } => a_norm,
        }
    }

    pub fn file(&self) -> &Path {
        match self {
            SidecarOperator::Mesh { file, .. } | SidecarOperator::Graph { file, .. } => file,
        }
    }
}

/// Looks for `mesh_ops.json` (preferred) or `graph.json` in the directory
/// holding `data_file`; these sidecars are how generated datasets carry the
/// operator alongside bare trajectory files.
pub fn find_operator(data_file: &Path) -> Result<Option<SidecarOperator>, CliError> {
    let dir = data_file.parent().unwrap_or_else(|| Path::new("."));
    let mesh_path = dir.join("mesh_ops.json");
    if mesh_path.is_file() {
        let text = std::fs::read_to_string(&mesh_path).map_err(|e| input_err(&mesh_path, e))?;
        let ops = MeshOperators::from_json(&text).map_err(domain)?;
        return Ok(Some(SidecarOperator::Mesh {
            a_norm: ops.a_norm().clone(),
            min_weight: ops.min_weight(),
            file: mesh_path,
        }));
    }
    let graph_path = dir.join("graph.json");
    if graph_path.is_file() {
        let text = std::fs::read_to_string(&graph_path).map_err(|e| input_err(&graph_path, e))?;
        let graph = Graph::from_json(&text).map_err(domain)?;
        let a_norm = normalized_adjacency(&graph).map_err(domain)?;
        return Ok(Some(SidecarOperator::Graph { a_norm, file: graph_path }));
    }
    Ok(None)
}

/// Vertex positions of the `mesh.off` sidecar next to `data_file`, as an
/// `(n, 3)` matrix, or None when no mesh is stored there.
pub fn find_positions(data_file: &Path) -> Result<Option<(Array2<f64>, PathBuf)>, CliError> {
    let dir = data_file.parent().unwrap_or_else(|| Path::new("."));
    let path = dir.join("mesh.off");
    if !path.is_file() {
        return Ok(None);
    }
    let mesh = TriMesh::load(&path).map_err(|e| input_err(&path, e))?;
    Ok(Some((positions_matrix(&mesh), path)))
}

pub fn positions_matrix(mesh: &TriMesh) -> Array2<f64> {
    Array2::from_shape_fn((mesh.n_vertices(), 3), |(i, j)| mesh.positions[i][j])
}

/// File stem used as an identifier in metric rows.
pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "unnamed".into(), |s| s.to_string_lossy().into_owned())
}
