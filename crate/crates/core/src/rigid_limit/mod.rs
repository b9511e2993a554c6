//! Sweeps over the compliance scale ε and diagnostics of the rigid-plastic
//! limit.

mod compare;
mod rate;
mod residuals;
mod sweep;

use thiserror::Error;

use crate::evolution::EvolutionError;
use crate::fem::{FemError, FieldP0, FieldP1, Mesh};
use crate::tensor::TensorError;

pub use compare::{compare_limits, SupportComparison, UniquenessReport, DEFAULT_SUPPORT_THRESHOLD};
pub use rate::{fit_rate, fit_rate_above, RateFit};
pub use residuals::{rigid_residuals, ResidualReport, TimeResidual};
pub use sweep::{
    default_epsilons, run_sweep, space_time_distance, CauchyDistance, EpsilonMetrics, SweepConfig,
    SweepReport, Trajectory, SWEEP_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("evolution at epsilon {epsilon:e} failed: {source}")]
    Evolution {
        epsilon: f64,
        source: EvolutionError,
    },
    #[error("rate fit needs at least 3 usable points, got {survivors} ({excluded} excluded)")]
    TooFewPoints { survivors: usize, excluded: usize },
    #[error("fields live on a {found}-element mesh, expected {expected}")]
    MismatchedMesh { expected: usize, found: usize },
    #[error("time grids differ")]
    MismatchedTimes,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Stress and displacement trajectories of one (small-ε) run, used as the
/// proxy for the rigid-plastic limit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LimitField {
    pub epsilon: f64,
    pub mesh_n: usize,
    pub times: Vec<f64>,
    pub sigma: Vec<FieldP0>,
    pub u: Vec<FieldP1>,
}

impl LimitField {
    /// Backward difference `(u_k - u_{k-1}) / Δt_k`, for `k ≥ 1`.
    pub fn velocity(&self, k: usize) -> FieldP1 {
        let dt = self.times[k] - self.times[k - 1];
        self.u[k]
            .iter()
            .zip(&self.u[k - 1])
            .map(|(a, b)| [(a[0] - b[0]) / dt, (a[1] - b[1]) / dt])
            .collect()
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh) -> Result<(), LimitError> {
        let ne = mesh.num_elements();
        if self.mesh_n != mesh.cells_per_side() {
            return Err(LimitError::MismatchedMesh {
                expected: ne,
                found: 2 * self.mesh_n * self.mesh_n,
            });
        }
        if self.sigma.len() != self.times.len() || self.u.len() != self.times.len() {
            return Err(LimitError::MismatchedTimes);
        }
        for s in &self.sigma {
            if s.len() != ne {
                return Err(LimitError::MismatchedMesh {
                    expected: ne,
                    found: s.len(),
                });
            }
        }
        for u in &self.u {
            if u.len() != mesh.num_nodes() {
                return Err(LimitError::MismatchedMesh {
                    expected: ne,
                    found: 2 * self.mesh_n * self.mesh_n,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{benchmark_catalog, BenchmarkId, BenchmarkParams, Material};
    use crate::tensor::YieldSet;

    fn material() -> Material {
        Material {
            shear_modulus: 1.0,
            bulk_modulus: 1.0,
            yield_radius: 1.0,
        }
    }

    fn shear_config(eps: Vec<f64>, threads: usize) -> SweepConfig {
        let b = benchmark_catalog(BenchmarkId::Shear, material(), BenchmarkParams::default());
        let mut c = SweepConfig::new(b, 3, 8);
        c.epsilons = eps;
        c.threads = threads;
        c
    }

    #[test]
    fn rejects_bad_lists() {
        assert!(matches!(
            run_sweep(&shear_config(vec![], 1)),
            Err(LimitError::InvalidConfig(_))
        ));
        assert!(matches!(
            run_sweep(&shear_config(vec![0.5, 1.0], 1)),
            Err(LimitError::InvalidConfig(_))
        ));
        assert!(matches!(
            run_sweep(&shear_config(vec![1.0, -1.0], 1)),
            Err(LimitError::InvalidConfig(_))
        ));
        assert!(matches!(
            run_sweep(&shear_config(vec![1.0], 0)),
            Err(LimitError::InvalidConfig(_))
        ));
    }

    #[test]
    fn threads_do_not_change_results() {
        let eps = vec![1.0, 0.25, 1.0 / 16.0];
        let a = run_sweep(&shear_config(eps.clone(), 1)).unwrap();
        let b = run_sweep(&shear_config(eps, 3)).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.cauchy, b.cauchy);
        assert_eq!(a.limit, b.limit);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(String::from_utf8(ca).unwrap().lines().count(), 1 + 3 * 9);
    }

    #[test]
    fn shear_limit_is_feasible_and_divergence_free() {
        let r = run_sweep(&shear_config(vec![1.0, 1.0 / 64.0], 1)).unwrap();
        let b = benchmark_catalog(BenchmarkId::Shear, material(), BenchmarkParams::default());
        let mesh = b.mesh(3).unwrap();
        let program = b.program(&mesh, r.times.clone());
        let k = YieldSet::von_mises(1.0).unwrap();
        let res = rigid_residuals(&r.limit, &program, &mesh, &k).unwrap();
        assert!(res.max_feasibility <= 1e-10);
        assert!(res.max_div_v < 1e-10);
        assert!(res.max_normal_gap < 1e-10);
        assert!(res.min_cell_flow_gap > -1e-10);
        assert!(res.max_equilibrium < 1e-8);
        for m in &r.metrics {
            assert_eq!(m.flow_gap_violations, 0);
            assert!(m.sup_sigma_dev_linf <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn compare_detects_mismatch_and_identity() {
        let r = run_sweep(&shear_config(vec![1.0, 0.25], 1)).unwrap();
        let b = benchmark_catalog(BenchmarkId::Shear, material(), BenchmarkParams::default());
        let mesh = b.mesh(3).unwrap();
        let same = compare_limits(&r.limit, &r.limit, &mesh, DEFAULT_SUPPORT_THRESHOLD).unwrap();
        assert_eq!(same.weighted_diff, 0.0);
        assert_eq!(same.max_support_diff, 0.0);
        let mut other = r.limit.clone();
        other.times[2] += 1e-3;
        assert!(matches!(
            compare_limits(&r.limit, &other, &mesh, 1e-6),
            Err(LimitError::MismatchedTimes)
        ));
        let coarse = b.mesh(2).unwrap();
        assert!(matches!(
            compare_limits(&r.limit, &r.limit, &coarse, 1e-6),
            Err(LimitError::MismatchedMesh { .. })
        ));
    }
}
