//! Stress / plastic strain pairing by integration by parts.

use super::FEState;
use crate::fem::{divergence_moments, element_strain, BoundaryKind, Mesh};
use crate::tensor::sym_outer;

/// `∫σ:(Ew - e) - ⟨div_h σ, u - w⟩ + ∫_ΓN σν·(u - w)`.
///
/// With the jump divergence this equals `∫σ:p + ∫_ΓD σν·(w - u)` exactly,
/// i.e. the pairing of `σ` with the plastic strain including its boundary
/// part `(w - u) ⊙ ν` on the Dirichlet boundary.
pub fn duality_pairing(
    sigma: &[crate::tensor::SymTensor],
    state: &FEState,
    w: &[[f64; 2]],
    mesh: &Mesh,
) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.num_elements() {
        let ew = element_strain(mesh, t, w);
        total += mesh.areas[t] * sigma[t].ddot(&(ew - state.e[t]));
    }
    let rel: Vec<[f64; 2]> = state
        .u
        .iter()
        .zip(w)
        .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
        .collect();
    let div = divergence_moments(mesh, sigma);
    for (d, r) in div.iter().zip(&rel) {
        total -= d[0] * r[0] + d[1] * r[1];
    }
    for e in mesh
        .boundary_edges
        .iter()
        .filter(|e| e.kind == BoundaryKind::Neumann)
    {
        let t = crate::fem::edge_traction(&sigma[e.element], e.normal);
        for &k in &e.nodes {
            total += 0.5 * e.length * (t[0] * rel[k][0] + t[1] * rel[k][1]);
        }
    }
    total
}

/// Total variation of the plastic strain measure: `∫|p|` plus
/// `∫_ΓD |(w - u) ⊙ ν|` (two-point Gauss per edge).
pub fn plastic_mass(state: &FEState, w: &[[f64; 2]], mesh: &Mesh) -> f64 {
    let mut mass: f64 = mesh
        .areas
        .iter()
        .zip(&state.p)
        .map(|(a, p)| a * p.norm())
        .sum();
    let g = 0.5 / 3f64.sqrt();
    for e in mesh
        .boundary_edges
        .iter()
        .filter(|e| e.kind == BoundaryKind::Dirichlet)
    {
        let gap = |k: usize| [w[k][0] - state.u[k][0], w[k][1] - state.u[k][1]];
        let (a, b) = (gap(e.nodes[0]), gap(e.nodes[1]));
        for s in [0.5 - g, 0.5 + g] {
            let v = [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]];
            let n = sym_outer(&v, &e.normal).map(|t| t.norm()).unwrap_or(0.0);
            mass += 0.5 * e.length * n;
        }
    }
    mass
}
