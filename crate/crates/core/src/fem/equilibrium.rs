//! Discrete equilibrium in weak form against P1 test functions.
//!
//! For elementwise constant `σ` the distributional divergence lives on
//! interior edges as the traction jump `(σ_R - σ_L) ν`. Writing the
//! residual through these jumps (instead of summing element integrals)
//! makes it vanish bit-exactly whenever neighbouring stresses carry equal
//! tractions.

use serde::Serialize;

use super::{BoundaryKind, FemError, Forcing, Mesh};
use crate::tensor::SymTensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EquilibriumResidual {
    /// Dual norm of the weak residual over test functions vanishing on Γ_D.
    pub interior: f64,
    /// `L²(Γ_N)` norm of `σν - g`.
    pub flux: f64,
}

#[inline]
fn traction(s: &SymTensor, nu: [f64; 2]) -> [f64; 2] {
    [
        s.get(0, 0) * nu[0] + s.get(0, 1) * nu[1],
        s.get(1, 0) * nu[0] + s.get(1, 1) * nu[1],
    ]
}

/// `⟨div_h σ, φ_k⟩` for every node `k`, each component.
pub fn divergence_moments(mesh: &Mesh, sigma: &[SymTensor]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; mesh.num_nodes()];
    for e in &mesh.interior_edges {
        let jump = sigma[e.right] - sigma[e.left];
        let t = traction(&jump, e.normal);
        for &k in &e.nodes {
            out[k][0] += 0.5 * e.length * t[0];
            out[k][1] += 0.5 * e.length * t[1];
        }
    }
    out
}

/// `∫_∂Ω σν·φ_k` over all boundary edges.
pub fn boundary_flux_moments(mesh: &Mesh, sigma: &[SymTensor]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; mesh.num_nodes()];
    for e in &mesh.boundary_edges {
        let t = traction(&sigma[e.element], e.normal);
        for &k in &e.nodes {
            out[k][0] += 0.5 * e.length * t[0];
            out[k][1] += 0.5 * e.length * t[1];
        }
    }
    out
}

/// `∫ σ : E(φ_k e_d)` assembled elementwise.
pub fn internal_forces(mesh: &Mesh, sigma: &[SymTensor]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let s = &sigma[t];
        for (k, g) in tri.iter().zip(&mesh.gradients[t]) {
            let f = s.apply(g);
            out[*k][0] += mesh.areas[t] * f[0];
            out[*k][1] += mesh.areas[t] * f[1];
        }
    }
    out
}

/// `∫ f·φ_k + ∫_ΓN g·φ_k`.
pub fn load_vector(mesh: &Mesh, forcing: &Forcing) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let f = forcing.body[t];
        for &k in tri {
            out[k][0] += mesh.areas[t] / 3.0 * f[0];
            out[k][1] += mesh.areas[t] / 3.0 * f[1];
        }
    }
    for (e, g) in mesh.boundary_edges.iter().zip(&forcing.traction) {
        if e.kind == BoundaryKind::Neumann {
            for &k in &e.nodes {
                out[k][0] += 0.5 * e.length * g[0];
                out[k][1] += 0.5 * e.length * g[1];
            }
        }
    }
    out
}

/// Weak residual `⟨div_h σ + f, φ⟩ + ∫_ΓN (g - σν)·φ` at every node;
/// rows of Dirichlet nodes are zeroed.
pub(crate) fn weak_residual(mesh: &Mesh, sigma: &[SymTensor], forcing: &Forcing) -> Vec<[f64; 2]> {
    let mut r = divergence_moments(mesh, sigma);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let f = forcing.body[t];
        for &k in tri {
            r[k][0] += mesh.areas[t] / 3.0 * f[0];
            r[k][1] += mesh.areas[t] / 3.0 * f[1];
        }
    }
    for (e, g) in mesh.boundary_edges.iter().zip(&forcing.traction) {
        if e.kind == BoundaryKind::Neumann {
            let t = traction(&sigma[e.element], e.normal);
            for &k in &e.nodes {
                r[k][0] += 0.5 * e.length * (g[0] - t[0]);
                r[k][1] += 0.5 * e.length * (g[1] - t[1]);
            }
        }
    }
    for (k, rk) in r.iter_mut().enumerate() {
        if mesh.is_dirichlet_node(k) {
            *rk = [0.0; 2];
        }
    }
    r
}

pub fn divergence_check(
    sigma: &[SymTensor],
    mesh: &Mesh,
    forcing: &Forcing,
) -> Result<EquilibriumResidual, FemError> {
    super::check_len("stress", mesh.num_elements(), sigma.len())?;
    forcing.check(mesh)?;
    let r = weak_residual(mesh, sigma, forcing);
    let free = mesh.free_node_map();
    let count = free.iter().flatten().count();
    let mut sq = 0.0;
    if count > 0 && r.iter().any(|v| v[0] != 0.0 || v[1] != 0.0) {
        let lap = mesh.scalar_laplacian()?;
        for d in 0..2 {
            let mut b = vec![0.0; count];
            for (k, slot) in free.iter().enumerate() {
                if let Some(i) = slot {
                    b[*i] = r[k][d];
                }
            }
            let x = lap.solve(&b)?;
            sq += crate::linalg::dot(&x, &b);
        }
    }
    let mut flux = 0.0;
    for (e, g) in mesh.boundary_edges.iter().zip(&forcing.traction) {
        if e.kind == BoundaryKind::Neumann {
            let t = traction(&sigma[e.element], e.normal);
            flux += e.length * ((t[0] - g[0]).powi(2) + (t[1] - g[1]).powi(2));
        }
    }
    Ok(EquilibriumResidual {
        interior: sq.max(0.0).sqrt(),
        flux: flux.sqrt(),
    })
}

pub(crate) fn edge_traction(s: &SymTensor, nu: [f64; 2]) -> [f64; 2] {
    traction(s, nu)
}

#[cfg(test)]
mod tests {
    use super::super::{sample_p0, Face, FaceSet};
    use super::*;

    fn constant_traction_forcing(mesh: &Mesh, s: &SymTensor) -> Forcing {
        let mut f = Forcing::zeros(mesh);
        for (e, g) in mesh.boundary_edges.iter().zip(f.traction.iter_mut()) {
            *g = traction(s, e.normal);
        }
        f
    }

    #[test]
    fn constant_stress_is_equilibrated() {
        let m = Mesh::square(6, FaceSet::only(Face::Bottom)).unwrap();
        let s = SymTensor::new2(0.3, -0.7, 1.1);
        let sigma = vec![s; m.num_elements()];
        let r = divergence_check(&sigma, &m, &constant_traction_forcing(&m, &s)).unwrap();
        assert!(r.interior <= 1e-13 && r.flux <= 1e-13, "{r:?}");
    }

    #[test]
    fn x1_dependent_stress_is_detected() {
        let m = Mesh::square(6, FaceSet::all()).unwrap();
        let sigma = sample_p0(&m, |x| SymTensor::new2(x[0], 0.0, 0.0));
        let r = divergence_check(&sigma, &m, &Forcing::zeros(&m)).unwrap();
        assert!(r.interior > 1e-3);
    }

    #[test]
    fn discrete_divergence_theorem() {
        let m = Mesh::square(4, FaceSet::all()).unwrap();
        let sigma = sample_p0(&m, |x| {
            SymTensor::new2(x[0] * x[1], (3.0 * x[0]).sin(), x[1] - x[0])
        });
        let lhs = internal_forces(&m, &sigma);
        let div = divergence_moments(&m, &sigma);
        let bnd = boundary_flux_moments(&m, &sigma);
        for k in 0..m.num_nodes() {
            for d in 0..2 {
                assert!((lhs[k][d] - (bnd[k][d] - div[k][d])).abs() < 1e-14);
            }
        }
    }
}
