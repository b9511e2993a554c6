//! P1 displacement / P0 strain finite elements on the structured square.

mod assembly;
mod equilibrium;
mod mesh;
pub mod vtk;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::tensor::{SymTensor, TensorError};

pub use assembly::{solve_elastic, ElasticOperator};
pub(crate) use equilibrium::edge_traction;
pub use equilibrium::{
    boundary_flux_moments, divergence_check, divergence_moments, internal_forces, load_vector,
    EquilibriumResidual,
};
pub use mesh::{build_square_mesh, BoundaryEdge, BoundaryKind, Face, FaceSet, InteriorEdge, Mesh};

/// Nodal displacement-like field.
pub type FieldP1 = Vec<[f64; 2]>;
/// Elementwise constant tensor field.
pub type FieldP0 = Vec<SymTensor>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("mesh needs at least one cell per side, got {0}")]
    InvalidMeshSize(usize),
    #[error("the Dirichlet boundary must contain at least one face")]
    EmptyDirichlet,
    #[error("element {0} has non-positive area")]
    DegenerateElement(usize),
    #[error("unknown face name {0:?}")]
    UnknownFace(String),
    #[error("{what}: expected length {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("plastic strain in element {element} is not deviatoric")]
    NotDeviatoric { element: usize },
    #[error("elastic solve residual {relative:e} exceeds tolerance")]
    SolveResidual { relative: f64 },
    #[error("internal linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Body force per element and traction per boundary edge, both constant.
/// Tractions on Dirichlet edges are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub body: Vec<[f64; 2]>,
    pub traction: Vec<[f64; 2]>,
}

impl Forcing {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            body: vec![[0.0; 2]; mesh.num_elements()],
            traction: vec![[0.0; 2]; mesh.boundary_edges.len()],
        }
    }

    pub fn check(&self, mesh: &Mesh) -> Result<(), FemError> {
        check_len("body force", mesh.num_elements(), self.body.len())?;
        check_len("traction", mesh.boundary_edges.len(), self.traction.len())
    }

    /// `a·self + b·other`, used for affine interpolation in time.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mix = |x: &[[f64; 2]], y: &[[f64; 2]]| {
            x.iter()
                .zip(y)
                .map(|(p, q)| [a * p[0] + b * q[0], a * p[1] + b * q[1]])
                .collect()
        };
        Self {
            body: mix(&self.body, &other.body),
            traction: mix(&self.traction, &other.traction),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), FemError> {
    if expected == got {
        Ok(())
    } else {
        Err(FemError::SizeMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Elementwise `sym(∇u)`.
pub fn strain_of(u: &[[f64; 2]], mesh: &Mesh) -> Result<FieldP0, FemError> {
    check_len("displacement", mesh.num_nodes(), u.len())?;
    Ok((0..mesh.num_elements())
        .map(|t| element_strain(mesh, t, u))
        .collect())
}

#[inline]
pub(crate) fn element_gradient(mesh: &Mesh, t: usize, u: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let tri = mesh.triangles[t];
    let g = &mesh.gradients[t];
    let mut grad = [[0.0; 2]; 2];
    for k in 0..3 {
        let uk = u[tri[k]];
        for i in 0..2 {
            for j in 0..2 {
                grad[i][j] += uk[i] * g[k][j];
            }
        }
    }
    grad
}

pub(crate) fn element_strain(mesh: &Mesh, t: usize, u: &[[f64; 2]]) -> SymTensor {
    let grad = element_gradient(mesh, t, u);
    SymTensor::new2(grad[0][0], 0.5 * (grad[0][1] + grad[1][0]), grad[1][1])
}

/// Elementwise `div u = tr E u`.
pub fn divergence_of(u: &[[f64; 2]], mesh: &Mesh) -> Result<Vec<f64>, FemError> {
    Ok(strain_of(u, mesh)?.iter().map(SymTensor::trace).collect())
}

/// P1 interpolant of a vector function.
pub fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> FieldP1 {
    mesh.nodes.iter().map(|&x| f(x)).collect()
}

/// P0 field sampled at element centroids.
pub fn sample_p0(mesh: &Mesh, f: impl Fn([f64; 2]) -> SymTensor) -> FieldP0 {
    (0..mesh.num_elements())
        .map(|t| f(mesh.centroid(t)))
        .collect()
}

/// `√(Σ area |A_T|²)`.
pub fn l2_norm(mesh: &Mesh, field: &[SymTensor]) -> f64 {
    mesh.areas
        .iter()
        .zip(field)
        .map(|(a, s)| a * s.norm_sq())
        .sum::<f64>()
        .sqrt()
}

/// `Σ area |A_T|`.
pub fn l1_norm(mesh: &Mesh, field: &[SymTensor]) -> f64 {
    mesh.areas
        .iter()
        .zip(field)
        .map(|(a, s)| a * s.norm())
        .sum()
}

pub fn linf_norm(field: &[SymTensor]) -> f64 {
    field.iter().fold(0.0_f64, |m, s| m.max(s.norm()))
}

/// `√(Σ area v_T²)` for scalar P0 data.
pub fn l2_scalar(mesh: &Mesh, v: &[f64]) -> f64 {
    mesh.areas
        .iter()
        .zip(v)
        .map(|(a, x)| a * x * x)
        .sum::<f64>()
        .sqrt()
}
