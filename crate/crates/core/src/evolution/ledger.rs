//! Energy bookkeeping along a discrete evolution.
//!
//! External work is integrated with the trapezoidal rule,
//! `ΔW = ∫ ½(σ_k + σ_{k-1}) : E(Δw) + ½(L_k + L_{k-1})·(Δu - Δw)`, where
//! `L` collects body and traction loads. With this choice a purely elastic
//! step balances exactly and every plastic step contributes the
//! non-negative defect `½(σ_k - σ_{k-1}) : Δp`.

use std::io::{self, Write};

use serde::Serialize;

use super::{FEState, LoadProgram};
use crate::fem::{element_strain, load_vector, Forcing, Mesh};
use crate::numfmt::real;
use crate::tensor::YieldSet;

pub const LEDGER_CSV_HEADER: &str = "step,time,Q,D,W,gap,max_sigma_dev,plastic_cell_fraction";

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LedgerRow {
    pub step: usize,
    pub time: f64,
    /// Elastic energy `½∫σ:e`.
    pub q: f64,
    /// Cumulative dissipation.
    pub d: f64,
    /// Cumulative external work.
    pub w: f64,
    /// Signed balance defect `Q + D - W - Q₀`.
    pub gap: f64,
    pub max_sigma_dev: f64,
    pub plastic_cell_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub q0: f64,
    pub rows: Vec<LedgerRow>,
}

pub fn elastic_energy(mesh: &Mesh, state: &FEState) -> f64 {
    mesh.areas
        .iter()
        .zip(state.sigma.iter().zip(&state.e))
        .map(|(a, (s, e))| 0.5 * a * s.ddot(e))
        .sum()
}

/// Trapezoidal external work between two consecutive states.
pub fn work_increment(
    mesh: &Mesh,
    prev: &FEState,
    next: &FEState,
    (f_prev, w_prev): (&Forcing, &[[f64; 2]]),
    (f_next, w_next): (&Forcing, &[[f64; 2]]),
) -> f64 {
    let dw: Vec<[f64; 2]> = w_next
        .iter()
        .zip(w_prev)
        .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
        .collect();
    let mut work = 0.0;
    for t in 0..mesh.num_elements() {
        let edw = element_strain(mesh, t, &dw);
        work += mesh.areas[t] * 0.5 * (prev.sigma[t] + next.sigma[t]).ddot(&edw);
    }
    let (l0, l1) = (load_vector(mesh, f_prev), load_vector(mesh, f_next));
    for k in 0..mesh.num_nodes() {
        for d in 0..2 {
            let rel = (next.u[k][d] - prev.u[k][d]) - dw[k][d];
            work += 0.5 * (l0[k][d] + l1[k][d]) * rel;
        }
    }
    work
}

impl EnergyLedger {
    pub fn start(mesh: &Mesh, init: &FEState) -> Self {
        let q0 = elastic_energy(mesh, init);
        let row = LedgerRow {
            step: 0,
            time: init.time,
            q: q0,
            max_sigma_dev: init.max_sigma_dev(),
            ..Default::default()
        };
        Self {
            q0,
            rows: vec![row],
        }
    }

    pub fn push(
        &mut self,
        mesh: &Mesh,
        state: &FEState,
        dissipation: f64,
        work: f64,
        yielded_cells: usize,
    ) {
        let last = *self.rows.last().expect("ledger starts with a row");
        let q = elastic_energy(mesh, state);
        let d = last.d + dissipation;
        let w = last.w + work;
        self.rows.push(LedgerRow {
            step: last.step + 1,
            time: state.time,
            q,
            d,
            w,
            gap: q + d - w - self.q0,
            max_sigma_dev: state.max_sigma_dev(),
            plastic_cell_fraction: yielded_cells as f64 / mesh.num_elements() as f64,
        });
    }

    pub fn total_dissipation(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.d)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{LEDGER_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step,
                real(r.time),
                real(r.q),
                real(r.d),
                real(r.w),
                real(r.gap),
                real(r.max_sigma_dev),
                real(r.plastic_cell_fraction)
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceReport {
    pub gaps: Vec<f64>,
    pub budget_constant: f64,
    pub max_dt: f64,
    /// `C Δt_max`.
    pub budget: f64,
    pub max_abs_gap: f64,
    pub within_budget: bool,
    /// `Q + D ≤ W + Q₀ + budget` at every grid time.
    pub one_sided: bool,
}

/// `κ sup_k ‖E(Δw_k)‖_L¹ / Δt_k`: the rate at which boundary driving can
/// feed dissipation.
pub fn default_budget_constant(mesh: &Mesh, program: &LoadProgram, k: &YieldSet) -> f64 {
    let mut c: f64 = 0.0;
    for (idx, pair) in program.boundary.windows(2).enumerate() {
        let dt = program.times[idx + 1] - program.times[idx];
        let dw: Vec<[f64; 2]> = pair[1]
            .iter()
            .zip(&pair[0])
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
            .collect();
        let l1: f64 = (0..mesh.num_elements())
            .map(|t| mesh.areas[t] * element_strain(mesh, t, &dw).norm())
            .sum();
        c = c.max(k.radius() * l1 / dt);
    }
    c
}

pub fn energy_report(
    ledger: &EnergyLedger,
    program: &LoadProgram,
    budget_constant: f64,
) -> BalanceReport {
    let gaps: Vec<f64> = ledger.rows.iter().map(|r| r.gap).collect();
    let max_dt = program.max_dt();
    let budget = budget_constant * max_dt;
    let max_abs_gap = gaps.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    // Elastic steps balance up to solver roundoff; allow for that.
    let scale = ledger.rows.iter().fold(0.0_f64, |m, r| {
        m.max(r.w.abs()).max(r.q.abs()).max(r.d.abs())
    });
    let slack = 1e-10 * (1.0 + scale);
    BalanceReport {
        within_budget: max_abs_gap <= budget + slack,
        one_sided: gaps.iter().all(|g| *g <= budget + slack),
        gaps,
        budget_constant,
        max_dt,
        budget,
        max_abs_gap,
    }
}
