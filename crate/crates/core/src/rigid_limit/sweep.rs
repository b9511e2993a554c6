use std::io::{self, Write};

use serde::Serialize;

use super::{LimitError, LimitField};
use crate::bench::{Benchmark, BenchmarkId};
use crate::evolution::{
    graded_times, run_evolution, Evolution, EvolutionOptions, FEState, LoadProgram,
};
use crate::fem::{divergence_of, element_strain, l2_norm, l2_scalar, linf_norm, FieldP0, Mesh};
use crate::numfmt::real;

pub const SWEEP_CSV_HEADER: &str =
    "epsilon,step,time,e_l2,sigma_l2,sigma_dev_linf,div_u_l2,bd_norm,hydrostatic,flow_gap_rate,dissipation";

/// `2⁰, 2⁻², …, 2⁻¹²`.
pub fn default_epsilons() -> Vec<f64> {
    (0..7).map(|k| 2f64.powi(-2 * k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub benchmark: Benchmark,
    pub epsilons: Vec<f64>,
    pub mesh_n: usize,
    pub times: Vec<f64>,
    pub options: EvolutionOptions,
    pub threads: usize,
}

impl SweepConfig {
    /// Defaults: `ε ∈ {2⁰ … 2⁻¹²}`, and a time grid graded as `(k/M)³`
    /// so the early elastic phase of the stiffest runs is resolved.
    pub fn new(benchmark: Benchmark, mesh_n: usize, steps: usize) -> Self {
        Self {
            benchmark,
            epsilons: default_epsilons(),
            mesh_n,
            times: graded_times(benchmark.params.horizon, steps, 3.0),
            options: EvolutionOptions {
                mode: benchmark.default_mode(),
                ..EvolutionOptions::default()
            },
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<(), LimitError> {
        if self.epsilons.is_empty() {
            return Err(LimitError::InvalidConfig("epsilon list is empty".into()));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(LimitError::InvalidConfig(
                "epsilons must be positive and finite".into(),
            ));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(LimitError::InvalidConfig(
                "epsilon list must be strictly decreasing".into(),
            ));
        }
        if self.mesh_n == 0 {
            return Err(LimitError::InvalidConfig(
                "mesh size must be positive".into(),
            ));
        }
        if self.times.len() < 2 {
            return Err(LimitError::InvalidConfig(
                "need at least one time step".into(),
            ));
        }
        if self.threads == 0 {
            return Err(LimitError::InvalidConfig(
                "threads must be at least 1".into(),
            ));
        }
        self.options
            .validate()
            .map_err(|e| LimitError::InvalidConfig(e.to_string()))
    }
}

/// Monitors along one evolution, indexed by grid time.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub e_l2: Vec<f64>,
    pub sigma_l2: Vec<f64>,
    pub sigma_dev_linf: Vec<f64>,
    pub div_u_l2: Vec<f64>,
    /// `∫|u| + ∫|Eu|`, a mesh-level stand-in for the BD norm.
    pub bd_norm: Vec<f64>,
    /// `‖tr σ / 2 - mean‖₂`.
    pub hydrostatic: Vec<f64>,
    /// `Σ area (κ|Ev| - σ_D:Ev)` with the backward velocity; 0 at `t₀`.
    pub flow_gap_rate: Vec<f64>,
    /// Cumulative dissipation.
    pub dissipation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonMetrics {
    pub epsilon: f64,
    pub sup_e_l2: f64,
    /// `∫₀ᵀ ‖σ‖₂² dt`.
    pub int_sigma_l2_sq: f64,
    pub sup_sigma_dev_linf: f64,
    /// `Σ_k ∫|Δp_k|`, boundary slip included.
    pub plastic_variation: f64,
    pub sup_bd_norm: f64,
    pub sup_div_u_l2: f64,
    /// `(∫₀ᵀ ‖tr σ/2 - mean‖₂² dt)^½`.
    pub hydrostatic: f64,
    /// `∫₀ᵀ ∫ κ|Ev| - σ_D:Ev`.
    pub flow_gap: f64,
    pub total_dissipation: f64,
    /// Cells and times where `κ|Ev| - σ_D:Ev < -1e-12 κ|Ev|`.
    pub flow_gap_violations: usize,
    pub inner_iterations: usize,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// `‖σ^ε - σ^{ε/4}‖_{L²(0,T;L²)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CauchyDistance {
    pub epsilon: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub benchmark: BenchmarkId,
    pub mesh_n: usize,
    pub times: Vec<f64>,
    pub metrics: Vec<EpsilonMetrics>,
    /// One entry per `ε` whose quarter `ε/4` is also in the list.
    pub cauchy: Vec<CauchyDistance>,
    #[serde(skip)]
    pub limit: LimitField,
}

impl SweepReport {
    pub fn epsilons(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.epsilon).collect()
    }

    pub fn column(&self, f: impl Fn(&EpsilonMetrics) -> f64) -> Vec<f64> {
        self.metrics.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for m in &self.metrics {
            let tr = &m.trajectory;
            for (k, t) in self.times.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    real(m.epsilon),
                    k,
                    real(*t),
                    real(tr.e_l2[k]),
                    real(tr.sigma_l2[k]),
                    real(tr.sigma_dev_linf[k]),
                    real(tr.div_u_l2[k]),
                    real(tr.bd_norm[k]),
                    real(tr.hydrostatic[k]),
                    real(tr.flow_gap_rate[k]),
                    real(tr.dissipation[k]),
                )?;
            }
        }
        Ok(())
    }
}

/// Trapezoidal `∫ f dt` over the grid.
pub(crate) fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn monitors(
    mesh: &Mesh,
    ev: &Evolution,
    kappa: f64,
    epsilon: f64,
    times: &[f64],
) -> EpsilonMetrics {
    let mut tr = Trajectory::default();
    let mut violations = 0;
    let mut variation = 0.0;
    for (k, s) in ev.states.iter().enumerate() {
        tr.e_l2.push(l2_norm(mesh, &s.e));
        tr.sigma_l2.push(l2_norm(mesh, &s.sigma));
        tr.sigma_dev_linf
            .push(linf_norm(&s.sigma_dev().collect::<Vec<_>>()));
        tr.div_u_l2.push(l2_scalar(
            mesh,
            &divergence_of(&s.u, mesh).expect("sizes checked by the evolution"),
        ));
        let mut bd = 0.0;
        for t in 0..mesh.num_elements() {
            let tri = mesh.triangles[t];
            let c: [f64; 2] =
                std::array::from_fn(|d| (s.u[tri[0]][d] + s.u[tri[1]][d] + s.u[tri[2]][d]) / 3.0);
            bd += mesh.areas[t]
                * ((c[0] * c[0] + c[1] * c[1]).sqrt() + element_strain(mesh, t, &s.u).norm());
        }
        tr.bd_norm.push(bd);
        let half_tr: Vec<f64> = s.sigma.iter().map(|x| 0.5 * x.trace()).collect();
        let mean: f64 = mesh
            .areas
            .iter()
            .zip(&half_tr)
            .map(|(a, v)| a * v)
            .sum::<f64>()
            / mesh.total_area();
        let dev: Vec<f64> = half_tr.iter().map(|v| v - mean).collect();
        tr.hydrostatic.push(l2_scalar(mesh, &dev));
        tr.dissipation.push(ev.ledger.rows[k].d);
        if k == 0 {
            tr.flow_gap_rate.push(0.0);
            continue;
        }
        let prev = &ev.states[k - 1];
        let dt = times[k] - times[k - 1];
        let du: Vec<[f64; 2]> =
            s.u.iter()
                .zip(&prev.u)
                .map(|(a, b)| [(a[0] - b[0]) / dt, (a[1] - b[1]) / dt])
                .collect();
        let mut gap = 0.0;
        for t in 0..mesh.num_elements() {
            let ev_t = element_strain(mesh, t, &du);
            let h = kappa * ev_t.norm();
            let term = h - s.sigma[t].dev().ddot(&ev_t);
            if term < -1e-12 * h {
                violations += 1;
            }
            gap += mesh.areas[t] * term;
            variation += mesh.areas[t] * (s.p[t] - prev.p[t]).norm();
        }
        tr.flow_gap_rate.push(gap);
    }
    // Slip mass enters the dissipation through κ; recover it from the ledger.
    let total_dissipation = ev.ledger.total_dissipation();
    let bulk_dissipation = kappa * variation;
    variation += ((total_dissipation - bulk_dissipation) / kappa).max(0.0);
    let sq: Vec<f64> = tr.sigma_l2.iter().map(|v| v * v).collect();
    let hy: Vec<f64> = tr.hydrostatic.iter().map(|v| v * v).collect();
    let max = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(*x));
    let flow_gap = times
        .windows(2)
        .zip(&tr.flow_gap_rate[1..])
        .map(|(t, g)| (t[1] - t[0]) * g)
        .sum();
    EpsilonMetrics {
        epsilon,
        sup_e_l2: max(&tr.e_l2),
        int_sigma_l2_sq: trapezoid(times, &sq),
        sup_sigma_dev_linf: max(&tr.sigma_dev_linf),
        plastic_variation: variation,
        sup_bd_norm: max(&tr.bd_norm),
        sup_div_u_l2: max(&tr.div_u_l2),
        hydrostatic: trapezoid(times, &hy).max(0.0).sqrt(),
        flow_gap,
        total_dissipation,
        flow_gap_violations: violations,
        inner_iterations: ev.inner_iterations.iter().sum(),
        trajectory: tr,
    }
}

struct EntryResult {
    metrics: EpsilonMetrics,
    sigma: Vec<FieldP0>,
    u: Vec<crate::fem::FieldP1>,
}

fn run_entry(
    config: &SweepConfig,
    mesh: &Mesh,
    program: &LoadProgram,
    epsilon: f64,
) -> Result<EntryResult, LimitError> {
    let material = config.benchmark.material;
    let hooke = material.hooke(epsilon)?;
    let k = material.yield_set()?;
    let init = FEState::zero(mesh, config.times[0]);
    let ev = run_evolution(program, hooke, k, mesh, init, config.options)
        .map_err(|source| LimitError::Evolution { epsilon, source })?;
    let metrics = monitors(mesh, &ev, k.radius(), epsilon, &config.times);
    let (sigma, u) = ev.states.into_iter().map(|s| (s.sigma, s.u)).unzip();
    Ok(EntryResult { metrics, sigma, u })
}

/// `(∫ ‖a - b‖₂² dt)^½` with the trapezoidal rule.
pub fn space_time_distance(mesh: &Mesh, times: &[f64], a: &[FieldP0], b: &[FieldP0]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let diff: FieldP0 = x.iter().zip(y).map(|(p, q)| *p - *q).collect();
            l2_norm(mesh, &diff).powi(2)
        })
        .collect();
    trapezoid(times, &d).max(0.0).sqrt()
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, LimitError> {
    config.validate()?;
    let mesh = config.benchmark.mesh(config.mesh_n)?;
    let program = config.benchmark.program(&mesh, config.times.clone());
    program
        .validate(&mesh)
        .map_err(|e| LimitError::InvalidConfig(e.to_string()))?;

    let n = config.epsilons.len();
    let mut slots: Vec<Option<Result<EntryResult, LimitError>>> = (0..n).map(|_| None).collect();
    let workers = config.threads.min(n).max(1);
    if workers == 1 {
        for (slot, &eps) in slots.iter_mut().zip(&config.epsilons) {
            *slot = Some(run_entry(config, &mesh, &program, eps));
        }
    } else {
        // Round-robin assignment; results land in their ε slot so the
        // reduction below is independent of scheduling.
        let chunks: Vec<Vec<(usize, Result<EntryResult, LimitError>)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let (mesh, program) = (&mesh, &program);
                        scope.spawn(move || {
                            (w..n)
                                .step_by(workers)
                                .map(|i| (i, run_entry(config, mesh, program, config.epsilons[i])))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("sweep worker panicked"))
                    .collect()
            });
        for (i, r) in chunks.into_iter().flatten() {
            slots[i] = Some(r);
        }
    }

    let mut entries = Vec::with_capacity(n);
    for slot in slots {
        entries.push(slot.expect("every epsilon scheduled")?);
    }
    let cauchy = entries
        .iter()
        .filter_map(|a| {
            let quarter = a.metrics.epsilon / 4.0;
            let b = entries
                .iter()
                .find(|b| (b.metrics.epsilon - quarter).abs() <= 1e-12 * quarter)?;
            let distance = space_time_distance(&mesh, &config.times, &a.sigma, &b.sigma);
            Some(CauchyDistance {
                epsilon: a.metrics.epsilon,
                distance,
            })
        })
        .collect();
    let last = entries.pop().expect("non-empty epsilon list");
    let limit = LimitField {
        epsilon: last.metrics.epsilon,
        mesh_n: config.mesh_n,
        times: config.times.clone(),
        sigma: last.sigma,
        u: last.u,
    };
    let mut metrics: Vec<EpsilonMetrics> = entries.into_iter().map(|e| e.metrics).collect();
    metrics.push(last.metrics);
    Ok(SweepReport {
        benchmark: config.benchmark.id,
        mesh_n: config.mesh_n,
        times: config.times.clone(),
        metrics,
        cauchy,
        limit,
    })
}
