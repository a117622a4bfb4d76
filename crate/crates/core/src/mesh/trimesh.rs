//! Extrinsic triangle meshes and their file formats.

use std::collections::BTreeMap;
use std::path::Path;

use super::MeshError;

/// Vertex positions plus triangle faces. Faces keep their stored winding;
/// consistency of the winding is part of the manifold report, not of
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = positions.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n {
                    return Err(MeshError::IndexOutOfRange { face: f, vertex: v, n });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(MeshError::RepeatedVertex { face: f });
            }
        }
        Ok(TriMesh { positions, faces })
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_length(&self, u: usize, v: usize) -> f64 {
        let a = self.positions[u];
        let b = self.positions[v];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Undirected edges, each once, ordered `(min, max)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = std::collections::BTreeSet::new();
        for face in &self.faces {
            for k in 0..3 {
                let (u, v) = (face[k], face[(k + 1) % 3]);
                set.insert((u.min(v), u.max(v)));
            }
        }
        set.into_iter().collect()
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("off") | Some("OFF") => parse_off(&text),
            Some("obj") | Some("OBJ") => parse_obj(&text),
            other => Err(MeshError::Parse {
                line: 0,
                msg: format!("unsupported mesh extension {:?}; expected .off or .obj", other),
            }),
        }
    }

    pub fn write_off(&self, path: &Path) -> Result<(), MeshError> {
        let mut out = String::from("OFF\n");
        out.push_str(&format!("{} {} 0\n", self.positions.len(), self.faces.len()));
        for p in &self.positions {
            out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        for f in &self.faces {
            out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn parse_off(text: &str) -> Result<TriMesh, MeshError> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines
        .next()
        .ok_or(MeshError::Parse { line: 0, msg: "empty file".into() })?;
    if header != "OFF" {
        return Err(MeshError::Parse { line: line_no, msg: format!("expected OFF header, got {header:?}") });
    }
    let (line_no, counts) = lines
        .next()
        .ok_or(MeshError::Parse { line: line_no, msg: "missing count line".into() })?;
    let nums: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| MeshError::Parse { line: line_no, msg: format!("bad count {t:?}") }))
        .collect::<Result<_, _>>()?;
    if nums.len() != 3 {
        return Err(MeshError::Parse { line: line_no, msg: "count line must hold nv nf ne".into() });
    }
    let (nv, nf) = (nums[0], nums[1]);

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line_no, line) = lines
            .next()
            .ok_or(MeshError::Parse { line: 0, msg: "unexpected end of vertex list".into() })?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| MeshError::Parse { line: line_no, msg: format!("bad coordinate {t:?}") }))
            .collect::<Result<_, _>>()?;
        if coords.len() != 3 {
            return Err(MeshError::Parse { line: line_no, msg: "vertex line must hold x y z".into() });
        }
        positions.push([coords[0], coords[1], coords[2]]);
    }

    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let (line_no, line) = lines
            .next()
            .ok_or(MeshError::Parse { line: 0, msg: "unexpected end of face list".into() })?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let count: usize = toks[0]
            .parse()
            .map_err(|_| MeshError::Parse { line: line_no, msg: format!("bad face arity {:?}", toks[0]) })?;
        if count != 3 {
            return Err(MeshError::UnsupportedFace { face: f, verts: count });
        }
        if toks.len() != 4 {
            return Err(MeshError::Parse { line: line_no, msg: "face line must hold 3 i j k".into() });
        }
        let mut idx = [0usize; 3];
        for (slot, t) in idx.iter_mut().zip(&toks[1..]) {
            *slot = t
                .parse()
                .map_err(|_| MeshError::Parse { line: line_no, msg: format!("bad index {t:?}") })?;
        }
        faces.push(idx);
    }
    TriMesh::new(positions, faces)
}

fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<f64> = toks
                    .map(|t| t.parse().map_err(|_| MeshError::Parse { line: line_no, msg: format!("bad coordinate {t:?}") }))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(MeshError::Parse { line: line_no, msg: "v line must hold x y z".into() });
                }
                positions.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(MeshError::UnsupportedFace { face: faces.len(), verts: refs.len() });
                }
                let mut idx = [0usize; 3];
                for (slot, r) in idx.iter_mut().zip(&refs) {
                    let first = r.split('/').next().unwrap_or("");
                    let one_based: i64 = first
                        .parse()
                        .map_err(|_| MeshError::Parse { line: line_no, msg: format!("bad face index {r:?}") })?;
                    if one_based < 1 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            msg: format!("face index {one_based} must be positive"),
                        });
                    }
                    *slot = (one_based - 1) as usize;
                }
                faces.push(idx);
            }
            // Normals, texture coords, groups, and material lines are ignored.
            _ => {}
        }
    }
    TriMesh::new(positions, faces)
}

/// Outcome of the manifold inspection. `is_manifold` requires every edge to
/// border one or two faces, every vertex fan to be a single cycle or path,
/// and consistent winding across each interior edge.
#[derive(Debug, Clone)]
pub struct ManifoldReport {
    pub is_manifold: bool,
    pub is_closed: bool,
    pub boundary_edges: Vec<(usize, usize)>,
    pub nonmanifold_edges: Vec<(usize, usize)>,
    pub nonmanifold_vertices: Vec<usize>,
    pub inconsistent_edges: Vec<(usize, usize)>,
}

pub fn check_manifold(mesh: &TriMesh) -> ManifoldReport {
    let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (fi, face) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (face[k], face[(k + 1) % 3]);
            edge_faces.entry((u.min(v), u.max(v))).or_default().push(fi);
            *directed.entry((u, v)).or_insert(0) += 1;
        }
    }

    let mut boundary_edges = Vec::new();
    let mut nonmanifold_edges = Vec::new();
    let mut inconsistent_edges = Vec::new();
    for (&(u, v), faces) in &edge_faces {
        match faces.len() {
            1 => boundary_edges.push((u, v)),
            2 => {
                // Consistent winding: the edge runs in opposite directions
                // in its two faces, so each direction appears exactly once.
                let fwd = directed.get(&(u, v)).copied().unwrap_or(0);
                let bwd = directed.get(&(v, u)).copied().unwrap_or(0);
                if fwd != 1 || bwd != 1 {
                    inconsistent_edges.push((u, v));
                }
            }
            _ => nonmanifold_edges.push((u, v)),
        }
    }

    // Vertex fans: the faces around a vertex must form one connected strip.
    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for (fi, face) in mesh.faces.iter().enumerate() {
        for &v in face {
            vertex_faces[v].push(fi);
        }
    }
    let mut nonmanifold_vertices = Vec::new();
    for (v, incident) in vertex_faces.iter().enumerate() {
        if incident.is_empty() {
            nonmanifold_vertices.push(v);
            continue;
        }
        // Union faces that share an edge through v.
        let mut parent: Vec<usize> = (0..incident.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let root = find(parent, parent[i]);
                parent[i] = root;
            }
            parent[i]
        }
        let mut local_edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (li, &fi) in incident.iter().enumerate() {
            let face = mesh.faces[fi];
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                if a == v || b == v {
                    let key = (a.min(b), a.max(b));
                    local_edges.entry(key).or_default().push(li);
                }
            }
        }
        for members in local_edges.values() {
            for w in members.windows(2) {
                let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        let root = find(&mut parent, 0);
        let connected = (0..incident.len()).all(|i| find(&mut parent, i) == root);
        if !connected {
            nonmanifold_vertices.push(v);
        }
    }

    let is_manifold = nonmanifold_edges.is_empty()
        && nonmanifold_vertices.is_empty()
        && inconsistent_edges.is_empty();
    ManifoldReport {
        is_manifold,
        is_closed: boundary_edges.is_empty(),
        boundary_edges,
        nonmanifold_edges,
        nonmanifold_vertices,
        inconsistent_edges,
    }
}
