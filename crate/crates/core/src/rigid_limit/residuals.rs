use serde::Serialize;

use super::{LimitError, LimitField};
use crate::evolution::LoadProgram;
use crate::fem::{
    divergence_check, divergence_of, element_strain, l2_scalar, EquilibriumResidual, Mesh,
};
use crate::tensor::YieldSet;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeResidual {
    pub time: f64,
    pub equilibrium: EquilibriumResidual,
    /// `max(|σ_D| - κ)` over cells.
    pub feasibility: f64,
    pub div_v_l2: f64,
    pub flow_gap: f64,
    /// `max |(ẇ - v)·ν|` over Dirichlet nodes.
    pub normal_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub per_time: Vec<TimeResidual>,
    pub max_equilibrium: f64,
    pub max_flux: f64,
    pub max_feasibility: f64,
    pub max_div_v: f64,
    pub max_flow_gap: f64,
    pub min_cell_flow_gap: f64,
    pub max_normal_gap: f64,
}

/// Residuals of the rigid-plastic system at every grid time after the first
/// (the backward velocity needs two states).
pub fn rigid_residuals(
    limit: &LimitField,
    program: &LoadProgram,
    mesh: &Mesh,
    k: &YieldSet,
) -> Result<ResidualReport, LimitError> {
    limit.check_mesh(mesh)?;
    if program.times != limit.times {
        return Err(LimitError::MismatchedTimes);
    }
    let kappa = k.radius();
    let mut per_time = Vec::with_capacity(limit.times.len().saturating_sub(1));
    let mut min_cell: f64 = 0.0;
    for step in 1..limit.times.len() {
        let sigma = &limit.sigma[step];
        let v = limit.velocity(step);
        let dt = limit.times[step] - limit.times[step - 1];
        let equilibrium = divergence_check(sigma, mesh, &program.forcing[step])?;
        let feasibility = sigma
            .iter()
            .map(|s| s.dev().norm() - kappa)
            .fold(f64::NEG_INFINITY, f64::max);
        let div_v_l2 = l2_scalar(mesh, &divergence_of(&v, mesh)?);
        let mut flow_gap = 0.0;
        for t in 0..mesh.num_elements() {
            let ev = element_strain(mesh, t, &v);
            let term = kappa * ev.norm() - sigma[t].dev().ddot(&ev);
            min_cell = min_cell.min(term);
            flow_gap += mesh.areas[t] * term;
        }
        let (w0, w1) = (&program.boundary[step - 1], &program.boundary[step]);
        let mut normal_gap: f64 = 0.0;
        for node in mesh.dirichlet_nodes() {
            for face in mesh
                .node_faces(node)
                .iter()
                .filter(|f| mesh.dirichlet_faces().contains(*f))
            {
                let nu = face.normal();
                let wdot = [
                    (w1[node][0] - w0[node][0]) / dt,
                    (w1[node][1] - w0[node][1]) / dt,
                ];
                let g = (wdot[0] - v[node][0]) * nu[0] + (wdot[1] - v[node][1]) * nu[1];
                normal_gap = normal_gap.max(g.abs());
            }
        }
        per_time.push(TimeResidual {
            time: limit.times[step],
            equilibrium,
            feasibility,
            div_v_l2,
            flow_gap,
            normal_gap,
        });
    }
    let max = |f: &dyn Fn(&TimeResidual) -> f64| per_time.iter().map(f).fold(0.0_f64, f64::max);
    Ok(ResidualReport {
        max_equilibrium: max(&|r| r.equilibrium.interior),
        max_flux: max(&|r| r.equilibrium.flux),
        max_feasibility: per_time
            .iter()
            .map(|r| r.feasibility)
            .fold(f64::NEG_INFINITY, f64::max),
        max_div_v: max(&|r| r.div_v_l2),
        max_flow_gap: max(&|r| r.flow_gap),
        min_cell_flow_gap: min_cell,
        max_normal_gap: max(&|r| r.normal_gap),
        per_time,
    })
}
