//! Procedural test meshes: icospheres, tori, and flat patches.

use std::collections::BTreeMap;

use rand::Rng;

use super::TriMesh;

const GOLDEN: f64 = 1.618033988749895;

/// Unit icosahedron: 12 vertices, 20 faces, consistently outward-wound.
fn icosahedron() -> TriMesh {
    let t = GOLDEN;
    let raw: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let positions: Vec<[f64; 3]> = raw.iter().map(|p| normalize(*p)).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh::new(positions, faces).expect("icosahedron table is valid")
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Unit sphere by repeated 4-to-1 subdivision of the icosahedron, with every
/// new midpoint projected back onto the sphere. Subdivision level `s` gives
/// `10 * 4^s + 2` vertices (12, 42, 162, 642, ...).
pub fn icosphere(subdivisions: usize) -> TriMesh {
    let mut mesh = icosahedron();
    for _ in 0..subdivisions {
        let mut positions = mesh.positions.clone();
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, positions: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let pa = positions[a];
                let pb = positions[b];
                let m = normalize([
                    0.5 * (pa[0] + pb[0]),
                    0.5 * (pa[1] + pb[1]),
                    0.5 * (pa[2] + pb[2]),
                ]);
                positions.push(m);
                positions.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
        for &[a, b, c] in &mesh.faces {
            let ab = mid(a, b, &mut positions);
            let bc = mid(b, c, &mut positions);
            let ca = mid(c, a, &mut positions);
            faces.push([a, ab, ca]);
            faces.push([b, bc, ab]);
            faces.push([c, ca, bc]);
            faces.push([ab, bc, ca]);
        }
        mesh = TriMesh::new(positions, faces).expect("subdivision preserves validity");
    }
    mesh
}

/// Torus with major radius `big_r` and tube radius `small_r`, sampled on an
/// `nu x nv` grid of quads, each split into two triangles. Requires at least
/// 3 samples per direction so no edge is shared by a face with itself.
pub fn torus(nu: usize, nv: usize, big_r: f64, small_r: f64) -> TriMesh {
    assert!(nu >= 3 && nv >= 3, "torus needs at least 3 samples per direction");
    let tau = std::f64::consts::TAU;
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = tau * i as f64 / nu as f64;
        for j in 0..nv {
            let v = tau * j as f64 / nv as f64;
            let ring = big_r + small_r * v.cos();
            positions.push([ring * u.cos(), ring * u.sin(), small_r * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let p00 = idx(i, j);
            let p10 = idx(i + 1, j);
            let p01 = idx(i, j + 1);
            let p11 = idx(i + 1, j + 1);
            faces.push([p00, p10, p11]);
            faces.push([p00, p11, p01]);
        }
    }
    TriMesh::new(positions, faces).expect("torus grid is valid")
}

/// Flat triangulated `rows x cols` patch in the z = 0 plane with spacing
/// `h`, split along alternating diagonals so interior vertices see six
/// triangles. Open boundary; useful for planarity and consistency tests.
pub fn flat_patch(rows: usize, cols: usize, h: f64) -> TriMesh {
    assert!(rows >= 2 && cols >= 2, "patch needs at least 2 samples per direction");
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            positions.push([c as f64 * h, r as f64 * h, 0.0]);
        }
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut faces = Vec::with_capacity(2 * (rows - 1) * (cols - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let p00 = idx(r, c);
            let p01 = idx(r, c + 1);
            let p10 = idx(r + 1, c);
            let p11 = idx(r + 1, c + 1);
            if (r + c) % 2 == 0 {
                faces.push([p00, p01, p11]);
                faces.push([p00, p11, p10]);
            } else {
                faces.push([p00, p01, p10]);
                faces.push([p01, p11, p10]);
            }
        }
    }
    TriMesh::new(positions, faces).expect("patch grid is valid")
}

/// Jitter every vertex by isotropic Gaussian noise of the given standard
/// deviation. Used to manufacture irregular triangulations that violate the
/// Delaunay condition.
pub fn perturb_positions<R: Rng + ?Sized>(mesh: &TriMesh, sigma: f64, rng: &mut R) -> TriMesh {
    let dist = rand_distr::Normal::new(0.0, sigma).expect("sigma must be finite");
    let positions: Vec<[f64; 3]> = mesh
        .positions
        .iter()
        .map(|p| {
            [
                p[0] + rng.sample(dist),
                p[1] + rng.sample(dist),
                p[2] + rng.sample(dist),
            ]
        })
        .collect();
    TriMesh::new(positions, mesh.faces.clone()).expect("jitter preserves combinatorics")
}
