//! Structured triangulation of the unit square.
//!
//! Node `(i, j)` sits at `(i h, j h)` with index `i + j (n + 1)`. Cell
//! `(i, j)` with corners `a = (i, j)`, `b = (i+1, j)`, `c = (i+1, j+1)`,
//! `d = (i, j+1)` is split along the diagonal `a c` into `[a, b, c]`
//! (triangle `2 (j n + i)`) and `[a, c, d]` (triangle `2 (j n + i) + 1`),
//! both counter-clockwise.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use super::FemError;
use crate::linalg::{BandCholesky, BandMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    Bottom,
    Right,
    Top,
    Left,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::Bottom, Face::Right, Face::Top, Face::Left];

    pub fn normal(self) -> [f64; 2] {
        match self {
            Face::Bottom => [0.0, -1.0],
            Face::Right => [1.0, 0.0],
            Face::Top => [0.0, 1.0],
            Face::Left => [-1.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::Bottom => "bottom",
            Face::Right => "right",
            Face::Top => "top",
            Face::Left => "left",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Subset of the four faces of the square.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FaceSet(u8);

impl FaceSet {
    pub const fn empty() -> Self {
        FaceSet(0)
    }

    pub const fn all() -> Self {
        FaceSet(0b1111)
    }

    pub fn only(face: Face) -> Self {
        FaceSet(face.bit())
    }

    pub fn with(self, face: Face) -> Self {
        FaceSet(self.0 | face.bit())
    }

    pub fn contains(self, face: Face) -> bool {
        self.0 & face.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Face> {
        Face::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl fmt::Display for FaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Face::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FaceSet {
    type Err = FemError;

    /// Comma separated face names, or `all`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = FaceSet::empty();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            set = match tok.to_ascii_lowercase().as_str() {
                "all" => FaceSet::all(),
                "bottom" => set.with(Face::Bottom),
                "right" => set.with(Face::Right),
                "top" => set.with(Face::Top),
                "left" => set.with(Face::Left),
                _ => return Err(FemError::UnknownFace(tok.to_string())),
            };
        }
        Ok(set)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints, ordered counter-clockwise around the square.
    pub nodes: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
    pub face: Face,
    pub kind: BoundaryKind,
    /// Triangle owning the edge.
    pub element: usize,
}

impl BoundaryEdge {
    pub fn midpoint(&self, mesh: &Mesh) -> [f64; 2] {
        let (p, q) = (mesh.nodes[self.nodes[0]], mesh.nodes[self.nodes[1]]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }
}

/// Edge shared by two triangles; `normal` points from `left` into `right`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorEdge {
    pub nodes: [usize; 2],
    pub left: usize,
    pub right: usize,
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    n: usize,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    /// Gradients of the three barycentric basis functions per triangle.
    pub gradients: Vec<[[f64; 2]; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub interior_edges: Vec<InteriorEdge>,
    dirichlet_faces: FaceSet,
    dirichlet_node: Vec<bool>,
    laplacian: OnceLock<Result<BandCholesky, FemError>>,
}

pub fn build_square_mesh(n: usize, dirichlet_faces: FaceSet) -> Result<Mesh, FemError> {
    Mesh::square(n, dirichlet_faces)
}

impl Mesh {
    pub fn square(n: usize, dirichlet_faces: FaceSet) -> Result<Self, FemError> {
        if n == 0 {
            return Err(FemError::InvalidMeshSize(n));
        }
        if dirichlet_faces.is_empty() {
            return Err(FemError::EmptyDirichlet);
        }
        let h = 1.0 / n as f64;
        let np = n + 1;
        let id = |i: usize, j: usize| i + j * np;
        let mut nodes = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }
        // Exact endpoints so boundary tests never see 0.9999999.
        for j in 0..np {
            nodes[id(n, j)][0] = 1.0;
            nodes[id(j, n)][1] = 1.0;
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut gradients = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let (p0, p1, p2) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            if !(det > 0.0) {
                return Err(FemError::DegenerateElement(areas.len()));
            }
            areas.push(0.5 * det);
            // grad λ_k = rot(p_{k+2} - p_{k+1}) / det
            let g = |q: [f64; 2], r: [f64; 2]| [(q[1] - r[1]) / det, (r[0] - q[0]) / det];
            gradients.push([g(p1, p2), g(p2, p0), g(p0, p1)]);
        }

        let cell = |i: usize, j: usize| 2 * (j * n + i);
        let kind = |f: Face| {
            if dirichlet_faces.contains(f) {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            }
        };
        let mut boundary_edges = Vec::with_capacity(4 * n);
        let mut push = |nodes: [usize; 2], face: Face, element: usize| {
            boundary_edges.push(BoundaryEdge {
                nodes,
                normal: face.normal(),
                length: h,
                face,
                kind: kind(face),
                element,
            });
        };
        for i in 0..n {
            push([id(i, 0), id(i + 1, 0)], Face::Bottom, cell(i, 0));
        }
        for j in 0..n {
            push([id(n, j), id(n, j + 1)], Face::Right, cell(n - 1, j));
        }
        for i in (0..n).rev() {
            push([id(i + 1, n), id(i, n)], Face::Top, cell(i, n - 1) + 1);
        }
        for j in (0..n).rev() {
            push([id(0, j + 1), id(0, j)], Face::Left, cell(0, j) + 1);
        }

        let mut interior_edges = Vec::with_capacity(3 * n * n);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..n {
            for i in 0..n {
                interior_edges.push(InteriorEdge {
                    nodes: [id(i, j), id(i + 1, j + 1)],
                    left: cell(i, j),
                    right: cell(i, j) + 1,
                    normal: [-s, s],
                    length: h * std::f64::consts::SQRT_2,
                });
                if j > 0 {
                    interior_edges.push(InteriorEdge {
                        nodes: [id(i, j), id(i + 1, j)],
                        left: cell(i, j - 1) + 1,
                        right: cell(i, j),
                        normal: [0.0, 1.0],
                        length: h,
                    });
                }
                if i > 0 {
                    interior_edges.push(InteriorEdge {
                        nodes: [id(i, j), id(i, j + 1)],
                        left: cell(i - 1, j),
                        right: cell(i, j) + 1,
                        normal: [1.0, 0.0],
                        length: h,
                    });
                }
            }
        }

        let mut dirichlet_node = vec![false; nodes.len()];
        for e in boundary_edges
            .iter()
            .filter(|e| e.kind == BoundaryKind::Dirichlet)
        {
            dirichlet_node[e.nodes[0]] = true;
            dirichlet_node[e.nodes[1]] = true;
        }

        Ok(Self {
            n,
            nodes,
            triangles,
            areas,
            gradients,
            boundary_edges,
            interior_edges,
            dirichlet_faces,
            dirichlet_node,
            laplacian: OnceLock::new(),
        })
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn dirichlet_faces(&self) -> FaceSet {
        self.dirichlet_faces
    }

    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        self.dirichlet_node[node]
    }

    pub fn dirichlet_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&k| self.dirichlet_node[k])
    }

    pub fn centroid(&self, element: usize) -> [f64; 2] {
        let t = self.triangles[element];
        let mut c = [0.0; 2];
        for &k in &t {
            c[0] += self.nodes[k][0];
            c[1] += self.nodes[k][1];
        }
        [c[0] / 3.0, c[1] / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Faces touching a node.
    pub fn node_faces(&self, node: usize) -> FaceSet {
        let [x, y] = self.nodes[node];
        let mut s = FaceSet::empty();
        if y == 0.0 {
            s = s.with(Face::Bottom);
        }
        if x == 1.0 {
            s = s.with(Face::Right);
        }
        if y == 1.0 {
            s = s.with(Face::Top);
        }
        if x == 0.0 {
            s = s.with(Face::Left);
        }
        s
    }

    /// Half-bandwidth of node couplings under the lexicographic numbering.
    pub fn node_bandwidth(&self) -> usize {
        self.n + 2
    }

    /// Cholesky factor of the scalar P1 stiffness restricted to nodes off
    /// the Dirichlet boundary, in increasing node order. Built on first use.
    pub(crate) fn scalar_laplacian(&self) -> Result<&BandCholesky, FemError> {
        self.laplacian
            .get_or_init(|| {
                let free = self.free_node_map();
                let count = free.iter().flatten().count();
                let mut a = BandMatrix::zeros(count, self.node_bandwidth());
                for (t, tri) in self.triangles.iter().enumerate() {
                    let g = &self.gradients[t];
                    for a_loc in 0..3 {
                        let Some(ia) = free[tri[a_loc]] else { continue };
                        for b_loc in 0..3 {
                            let Some(ib) = free[tri[b_loc]] else { continue };
                            if ib > ia {
                                continue;
                            }
                            let v = self.areas[t]
                                * (g[a_loc][0] * g[b_loc][0] + g[a_loc][1] * g[b_loc][1]);
                            a.add(ia, ib, v)?;
                        }
                    }
                }
                Ok(a.cholesky()?)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Position of each non-Dirichlet node among the free nodes.
    pub(crate) fn free_node_map(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.dirichlet_node
            .iter()
            .map(|&d| {
                if d {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_areas() {
        let m = Mesh::square(2, FaceSet::all()).unwrap();
        assert_eq!((m.num_elements(), m.num_nodes()), (8, 9));
        let m1 = Mesh::square(1, FaceSet::all()).unwrap();
        assert_eq!(m1.areas, vec![0.5, 0.5]);
        for n in [1, 3, 7, 16] {
            let m = Mesh::square(n, FaceSet::only(Face::Bottom)).unwrap();
            assert!((m.total_area() - 1.0).abs() < 1e-14);
            assert_eq!(m.boundary_edges.len(), 4 * n);
            assert_eq!(m.interior_edges.len(), 3 * n * n - 2 * n);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Mesh::square(0, FaceSet::all()),
            Err(FemError::InvalidMeshSize(0))
        ));
        assert!(matches!(
            Mesh::square(2, FaceSet::empty()),
            Err(FemError::EmptyDirichlet)
        ));
    }

    #[test]
    fn boundary_closes_and_edges_match_their_element() {
        let m = Mesh::square(5, FaceSet::only(Face::Left)).unwrap();
        let mut s = [0.0; 2];
        for e in &m.boundary_edges {
            s[0] += e.length * e.normal[0];
            s[1] += e.length * e.normal[1];
            let tri = m.triangles[e.element];
            assert!(e.nodes.iter().all(|k| tri.contains(k)));
            // outward: centroid lies on the inner side
            let c = m.centroid(e.element);
            let p = m.nodes[e.nodes[0]];
            assert!((c[0] - p[0]) * e.normal[0] + (c[1] - p[1]) * e.normal[1] < 0.0);
        }
        assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14);
        for e in &m.interior_edges {
            for t in [e.left, e.right] {
                assert!(e.nodes.iter().all(|k| m.triangles[t].contains(k)));
            }
            let (cl, cr) = (m.centroid(e.left), m.centroid(e.right));
            assert!((cr[0] - cl[0]) * e.normal[0] + (cr[1] - cl[1]) * e.normal[1] > 0.0);
        }
    }

    #[test]
    fn gradients_sum_to_zero_and_reproduce_coordinates() {
        let m = Mesh::square(3, FaceSet::all()).unwrap();
        for (t, tri) in m.triangles.iter().enumerate() {
            let g = m.gradients[t];
            for d in 0..2 {
                let s: f64 = g.iter().map(|v| v[d]).sum();
                assert!(s.abs() < 1e-12);
                // grad of x_d = Σ x_d(node) grad λ
                for e in 0..2 {
                    let v: f64 = (0..3).map(|k| m.nodes[tri[k]][d] * g[k][e]).sum();
                    let expect = if d == e { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dirichlet_nodes_follow_faces() {
        let m = Mesh::square(2, FaceSet::only(Face::Bottom)).unwrap();
        let d: Vec<_> = m.dirichlet_nodes().collect();
        assert_eq!(d, vec![0, 1, 2]);
        assert_eq!(
            "bottom, top".parse::<FaceSet>().unwrap(),
            FaceSet::only(Face::Bottom).with(Face::Top)
        );
        assert!("front".parse::<FaceSet>().is_err());
        assert_eq!(FaceSet::all().to_string(), "bottom,right,top,left");
    }
}
