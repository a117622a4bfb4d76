//! Intrinsic triangulations: faces plus edge lengths, no positions.
//!
//! Working intrinsically means edge flips only need the law of cosines and
//! a planar unfolding of two triangles; the surface geometry never changes,
//! only the triangulation laid over it. The Delaunay criterion for an
//! interior edge is `cot(alpha) + cot(beta) >= 0` for the two angles
//! opposite the edge, which is exactly what makes the cotangent weight of
//! the edge nonnegative.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{MeshError, TriMesh};

/// Tolerance below which `cot + cot < -tol` counts as a violation.
pub const DELAUNAY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct IntrinsicMesh {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    lengths: BTreeMap<(usize, usize), f64>,
    /// Face indices bordering each undirected edge.
    edge_faces: BTreeMap<(usize, usize), Vec<usize>>,
}

/// Summary of a Delaunay rewiring run.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlipReport {
    pub flips: usize,
    pub violations_before: usize,
    pub violations_after: usize,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Triangle area from side lengths, Heron stabilized by sorting.
fn heron_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let [a, b, c] = s;
    let term = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if term <= 0.0 {
        return 0.0;
    }
    0.25 * term.sqrt()
}

impl IntrinsicMesh {
    /// Measure edge lengths off an extrinsic mesh.
    pub fn from_extrinsic(mesh: &TriMesh) -> Result<Self, MeshError> {
        let mut lengths = BTreeMap::new();
        for face in &mesh.faces {
            for k in 0..3 {
                let (u, v) = (face[k], face[(k + 1) % 3]);
                lengths.entry(key(u, v)).or_insert_with(|| mesh.edge_length(u, v));
            }
        }
        Self::from_lengths(mesh.n_vertices(), mesh.faces.clone(), lengths)
    }

    /// Build from faces and explicit lengths; every face must satisfy the
    /// triangle inequality with positive area, and every edge must border
    /// at most two faces.
    pub fn from_lengths(
        n_vertices: usize,
        faces: Vec<[usize; 3]>,
        lengths: BTreeMap<(usize, usize), f64>,
    ) -> Result<Self, MeshError> {
        let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, face) in faces.iter().enumerate() {
            for k in 0..3 {
                let e = key(face[k], face[(k + 1) % 3]);
                edge_faces.entry(e).or_default().push(fi);
            }
        }
        for (&(u, v), fs) in &edge_faces {
            if fs.len() > 2 {
                return Err(MeshError::NonManifoldEdge { u, v, count: fs.len() });
            }
        }
        let mesh = IntrinsicMesh { n_vertices, faces, lengths, edge_faces };
        for fi in 0..mesh.faces.len() {
            mesh.face_area_checked(fi)?;
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn length(&self, u: usize, v: usize) -> Option<f64> {
        self.lengths.get(&key(u, v)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.lengths.iter().map(|(&(u, v), &l)| (u, v, l))
    }

    pub fn n_edges(&self) -> usize {
        self.lengths.len()
    }

    fn face_lengths(&self, fi: usize) -> [f64; 3] {
        let [a, b, c] = self.faces[fi];
        [
            self.lengths[&key(a, b)],
            self.lengths[&key(b, c)],
            self.lengths[&key(c, a)],
        ]
    }

    fn face_area_checked(&self, fi: usize) -> Result<f64, MeshError> {
        let [lab, lbc, lca] = self.face_lengths(fi);
        if !(lab > 0.0 && lbc > 0.0 && lca > 0.0) {
            return Err(MeshError::DegenerateFace { face: fi });
        }
        let area = heron_area(lab, lbc, lca);
        let scale = lab.max(lbc).max(lca);
        if area <= 1e-14 * scale * scale {
            return Err(MeshError::DegenerateFace { face: fi });
        }
        Ok(area)
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let [lab, lbc, lca] = self.face_lengths(fi);
        heron_area(lab, lbc, lca)
    }

    /// Cotangent of the interior angle at `corner` in face `fi`.
    pub fn corner_cotangent(&self, fi: usize, corner: usize) -> f64 {
        let face = self.faces[fi];
        let pos = face
            .iter()
            .position(|&v| v == corner)
            .expect("corner must belong to the face");
        let opposite = key(face[(pos + 1) % 3], face[(pos + 2) % 3]);
        let adj1 = key(face[pos], face[(pos + 1) % 3]);
        let adj2 = key(face[pos], face[(pos + 2) % 3]);
        let (lo, l1, l2) = (self.lengths[&opposite], self.lengths[&adj1], self.lengths[&adj2]);
        let area = self.face_area(fi);
        (l1 * l1 + l2 * l2 - lo * lo) / (4.0 * area)
    }

    /// Sum of the cotangents of the angles opposite an edge: two terms for
    /// interior edges, one for boundary edges.
    pub fn opposite_cotangent_sum(&self, u: usize, v: usize) -> f64 {
        let mut sum = 0.0;
        for &fi in &self.edge_faces[&key(u, v)] {
            let w = self.faces[fi]
                .iter()
                .copied()
                .find(|&x| x != u && x != v)
                .expect("triangle face has a third vertex");
            sum += self.corner_cotangent(fi, w);
        }
        sum
    }

    /// Interior edges whose opposite-angle cotangent sum is below `-tol`.
    pub fn delaunay_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        self.edge_faces
            .iter()
            .filter(|(_, fs)| fs.len() == 2)
            .filter(|(&(u, v), _)| self.opposite_cotangent_sum(u, v) < -tol)
            .map(|(&e, _)| e)
            .collect()
    }

    /// Flip one interior edge, replacing it with the opposite diagonal of
    /// the quad formed by its two faces. The new length comes from
    /// unfolding both triangles into a common plane.
    pub fn flip_edge(&mut self, u: usize, v: usize) -> Result<(), MeshError> {
        let e = key(u, v);
        let faces = self.edge_faces.get(&e).cloned().unwrap_or_default();
        if faces.len() != 2 {
            return Err(MeshError::UnflippableEdge { u, v, reason: "not an interior edge" });
        }
        let (f0, f1) = (faces[0], faces[1]);

        // Orient the labels so that face f0 traverses i -> j.
        let (i, j) = {
            let face = self.faces[f0];
            let pos = (0..3)
                .find(|&k| key(face[k], face[(k + 1) % 3]) == e)
                .expect("edge belongs to its face");
            (face[pos], face[(pos + 1) % 3])
        };
        let k = self.faces[f0].iter().copied().find(|&x| x != i && x != j).unwrap();
        let l = self.faces[f1].iter().copied().find(|&x| x != i && x != j).unwrap();
        if k == l {
            return Err(MeshError::UnflippableEdge { u, v, reason: "quad corners coincide" });
        }
        if self.lengths.contains_key(&key(k, l)) {
            return Err(MeshError::UnflippableEdge { u, v, reason: "opposite diagonal already exists" });
        }

        // Unfold: i at the origin, j on the positive axis, k above, l below.
        let c = self.lengths[&e];
        let b0 = self.lengths[&key(i, k)];
        let a0 = self.lengths[&key(j, k)];
        let b1 = self.lengths[&key(i, l)];
        let a1 = self.lengths[&key(j, l)];
        let xk = (b0 * b0 + c * c - a0 * a0) / (2.0 * c);
        let yk = (b0 * b0 - xk * xk).max(0.0).sqrt();
        let xl = (b1 * b1 + c * c - a1 * a1) / (2.0 * c);
        let yl = (b1 * b1 - xl * xl).max(0.0).sqrt();
        let new_len = ((xk - xl) * (xk - xl) + (yk + yl) * (yk + yl)).sqrt();

        let new_f0 = [i, l, k];
        let new_f1 = [j, k, l];
        for (lab, lbc, lca) in [
            (self.lengths[&key(i, l)], new_len, self.lengths[&key(k, i)]),
            (self.lengths[&key(j, k)], new_len, self.lengths[&key(l, j)]),
        ] {
            let area = heron_area(lab, lbc, lca);
            let scale = lab.max(lbc).max(lca);
            if area <= 1e-14 * scale * scale {
                return Err(MeshError::UnflippableEdge { u, v, reason: "flip would create a degenerate face" });
            }
        }

        self.faces[f0] = new_f0;
        self.faces[f1] = new_f1;
        self.lengths.remove(&e);
        self.lengths.insert(key(k, l), new_len);
        self.edge_faces.remove(&e);
        self.edge_faces.insert(key(k, l), vec![f0, f1]);
        // Two of the quad's boundary edges change which face they border:
        // (j, k) moves from f0 to f1, and (i, l) from f1 to f0.
        replace_face(self.edge_faces.get_mut(&key(j, k)).unwrap(), f0, f1);
        replace_face(self.edge_faces.get_mut(&key(i, l)).unwrap(), f1, f0);
        Ok(())
    }

    /// Flip until no interior edge violates the Delaunay criterion.
    /// The flip count is capped at `10 * |E|`.
    pub fn flip_to_delaunay(&mut self, tol: f64) -> Result<FlipReport, MeshError> {
        let violations_before = self.delaunay_violations(tol).len();
        let cap = 10 * self.lengths.len();
        let mut queue: VecDeque<(usize, usize)> = self.lengths.keys().copied().collect();
        let mut queued: BTreeSet<(usize, usize)> = queue.iter().copied().collect();
        let mut flips = 0usize;

        while let Some((u, v)) = queue.pop_front() {
            queued.remove(&(u, v));
            let e = key(u, v);
            let Some(faces) = self.edge_faces.get(&e) else { continue };
            if faces.len() != 2 {
                continue;
            }
            if self.opposite_cotangent_sum(u, v) >= -tol {
                continue;
            }
            if flips >= cap {
                return Err(MeshError::FlipCapExceeded { cap });
            }
            let (f0, f1) = (faces[0], faces[1]);
            self.flip_edge(u, v)?;
            flips += 1;
            // Re-examine the quad boundary; those are the only edges whose
            // opposite angles changed.
            for fi in [f0, f1] {
                let face = self.faces[fi];
                for k in 0..3 {
                    let edge = key(face[k], face[(k + 1) % 3]);
                    if queued.insert(edge) {
                        queue.push_back(edge);
                    }
                }
            }
        }

        let violations_after = self.delaunay_violations(tol).len();
        Ok(FlipReport { flips, violations_before, violations_after })
    }
}

fn replace_face(faces: &mut [usize], from: usize, to: usize) {
    for f in faces {
        if *f == from {
            *f = to;
            return;
        }
    }
    unreachable!("edge-face incidence out of sync");
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Planar kite 0=(0,0), 1=(1,-0.2), 2=(2,0), 3=(1,0.2) triangulated
    /// along the long diagonal (0, 2). The two angles opposite that
    /// diagonal sum far past pi, so the edge violates the criterion.
    fn kite() -> IntrinsicMesh {
        let faces = vec![[0, 1, 2], [0, 2, 3]];
        let side = 1.04_f64.sqrt();
        let mut lengths = BTreeMap::new();
        lengths.insert((0, 1), side);
        lengths.insert((1, 2), side);
        lengths.insert((0, 2), 2.0);
        lengths.insert((2, 3), side);
        lengths.insert((0, 3), side);
        IntrinsicMesh::from_lengths(4, faces, lengths).unwrap()
    }

    #[test]
    fn long_kite_diagonal_is_a_violation_and_flips_clean() {
        let mut m = kite();
        let before = m.delaunay_violations(DELAUNAY_TOL);
        assert_eq!(before, vec![(0, 2)]);
        let report = m.flip_to_delaunay(DELAUNAY_TOL).unwrap();
        assert_eq!(report.flips, 1);
        assert_eq!(report.violations_after, 0);
        // The kite is planar, so the unfolded quad is the true layout and
        // the new diagonal is the Euclidean distance |(1,-0.2)-(1,0.2)|.
        let l = m.length(1, 3).unwrap();
        assert!((l - 0.4).abs() < 1e-12, "new diagonal {l}");
        assert!(m.length(0, 2).is_none());
    }

    #[test]
    fn flip_preserves_total_area() {
        let mut m = kite();
        let before: f64 = (0..2).map(|f| m.face_area(f)).sum();
        m.flip_to_delaunay(DELAUNAY_TOL).unwrap();
        let after: f64 = (0..2).map(|f| m.face_area(f)).sum();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn boundary_edges_are_never_flipped() {
        let mut m = kite();
        assert!(matches!(
            m.flip_edge(0, 1),
            Err(MeshError::UnflippableEdge { reason: "not an interior edge", .. })
        ));
    }

    #[test]
    fn equilateral_patch_is_already_delaunay() {
        // Two equilateral triangles sharing an edge.
        let faces = vec![[0, 1, 2], [1, 0, 3]];
        let mut lengths = BTreeMap::new();
        for e in [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3)] {
            lengths.insert(e, 1.0);
        }
        let mut m = IntrinsicMesh::from_lengths(4, faces, lengths).unwrap();
        let report = m.flip_to_delaunay(DELAUNAY_TOL).unwrap();
        assert_eq!(report.flips, 0);
        assert_eq!(report.violations_before, 0);
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let faces = vec![[0, 1, 2]];
        let mut lengths = BTreeMap::new();
        lengths.insert((0, 1), 1.0);
        lengths.insert((1, 2), 1.0);
        lengths.insert((0, 2), 2.0); // collinear
        assert!(matches!(
            IntrinsicMesh::from_lengths(3, faces, lengths),
            Err(MeshError::DegenerateFace { face: 0 })
        ));
    }
}
