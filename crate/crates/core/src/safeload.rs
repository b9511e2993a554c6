//! Safe-load margins: the largest `c` for which some discretely equilibrated
//! P0 stress `π` has `|π_D| ≤ κ - c` in every cell.
//!
//! Equilibrium is the weak P1 balance `∫ π:Eφ = ∫ f·φ + ∫_ΓN g·φ` for every
//! test function vanishing on Γ_D. The margin is maximized with a primal-dual
//! hybrid gradient (Chambolle–Pock) iteration; the reported certificate is an
//! iterate corrected onto the equilibrium affine space with an exact solve.

use serde::Serialize;
use thiserror::Error;

use crate::fem::{
    divergence_check, load_vector, EquilibriumResidual, FemError, FieldP0, Forcing, Mesh,
};
use crate::linalg::{BandCholesky, BandMatrix, LinalgError};
use crate::tensor::{SymTensor, YieldSet};

const R2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum SafeLoadError {
    #[error("invalid safe-load options: {0}")]
    InvalidOptions(String),
    #[error("the mesh has no free degrees of freedom")]
    NoFreeDofs,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SafeLoadOptions {
    pub max_iters: usize,
    /// Stop once the fixed-point residual falls below `tol` times its first
    /// value.
    pub tol: f64,
    /// Iterations between certificate corrections.
    pub check_every: usize,
}

impl Default for SafeLoadOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-9,
            check_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SafeLoadCheck {
    pub equilibrium: EquilibriumResidual,
    pub max_dev: f64,
    pub margin: f64,
    pub admissible: bool,
}

/// Checks that `pi` is equilibrated (weak residual at most `tol (1 + |F|)`)
/// and that `|π_D| ≤ κ - c + tol κ` in every cell.
pub fn verify_safe_load(
    pi: &[SymTensor],
    forcing: &Forcing,
    mesh: &Mesh,
    k: &YieldSet,
    c: f64,
    tol: f64,
) -> Result<SafeLoadCheck, SafeLoadError> {
    let equilibrium = divergence_check(pi, mesh, forcing)?;
    let max_dev = pi.iter().map(|s| s.dev().norm()).fold(0.0, f64::max);
    let kappa = k.radius();
    let scale = 1.0 + load_scale(mesh, forcing);
    let margin = kappa - max_dev;
    let admissible = equilibrium.interior <= tol * scale && max_dev <= kappa - c + tol * kappa;
    Ok(SafeLoadCheck {
        equilibrium,
        max_dev,
        margin,
        admissible,
    })
}

fn load_scale(mesh: &Mesh, forcing: &Forcing) -> f64 {
    let f = load_vector(mesh, forcing);
    f.iter()
        .enumerate()
        .filter(|(i, _)| !mesh.is_dirichlet_node(*i))
        .map(|(_, v)| v[0] * v[0] + v[1] * v[1])
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SafeLoadCertificate {
    /// `κ - max |π_D|` of the certified stress.
    pub margin: f64,
    #[serde(skip)]
    pub stress: FieldP0,
    pub residual: EquilibriumResidual,
    /// Margin variable of the last primal-dual iterate (not certified).
    pub raw_margin: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖w^{k+1} - w^k‖_M` per iteration, `M` the PDHG metric.
    pub fixed_point_residuals: Vec<f64>,
}

/// Equilibrium operator `B: z ↦ (∫ π(z):Eφ_i)_i` on free dofs, stresses in
/// the orthonormal coordinates `z = (σ₁₁, √2 σ₁₂, σ₂₂)`.
struct Balance<'m> {
    mesh: &'m Mesh,
    free: Vec<Option<usize>>,
    dofs: usize,
    gram: BandCholesky,
    rhs: Vec<f64>,
}

impl<'m> Balance<'m> {
    fn new(mesh: &'m Mesh, forcing: &Forcing) -> Result<Self, SafeLoadError> {
        forcing.check(mesh)?;
        let free = mesh.free_node_map();
        let dofs = 2 * free.iter().flatten().count();
        if dofs == 0 {
            return Err(SafeLoadError::NoFreeDofs);
        }
        let mut gram = BandMatrix::zeros(dofs, 2 * mesh.node_bandwidth() + 1);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let a = mesh.areas[t];
            let rows: Vec<(usize, [f64; 3])> = tri
                .iter()
                .zip(&mesh.gradients[t])
                .filter_map(|(&node, g)| free[node].map(|f| (f, g)))
                .flat_map(|(f, g)| {
                    [
                        (2 * f, [a * g[0], a * g[1] / R2, 0.0]),
                        (2 * f + 1, [0.0, a * g[0] / R2, a * g[1]]),
                    ]
                })
                .collect();
            for (i, ri) in &rows {
                for (j, rj) in &rows {
                    if j <= i {
                        gram.add(*i, *j, ri[0] * rj[0] + ri[1] * rj[1] + ri[2] * rj[2])?;
                    }
                }
            }
        }
        let gram = gram.cholesky()?;
        let load = load_vector(mesh, forcing);
        let mut rhs = vec![0.0; dofs];
        for (node, slot) in free.iter().enumerate() {
            if let Some(f) = slot {
                rhs[2 * f] = load[node][0];
                rhs[2 * f + 1] = load[node][1];
            }
        }
        Ok(Self {
            mesh,
            free,
            dofs,
            gram,
            rhs,
        })
    }

    fn apply(&self, z: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let (a, zt) = (self.mesh.areas[t], z[t]);
            for (&node, g) in tri.iter().zip(&self.mesh.gradients[t]) {
                if let Some(f) = self.free[node] {
                    out[2 * f] += a * (zt[0] * g[0] + zt[1] * g[1] / R2);
                    out[2 * f + 1] += a * (zt[1] * g[0] / R2 + zt[2] * g[1]);
                }
            }
        }
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; self.mesh.num_elements()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let a = self.mesh.areas[t];
            for (&node, g) in tri.iter().zip(&self.mesh.gradients[t]) {
                if let Some(f) = self.free[node] {
                    let (y0, y1) = (y[2 * f], y[2 * f + 1]);
                    out[t][0] += a * y0 * g[0];
                    out[t][1] += a * (y0 * g[1] + y1 * g[0]) / R2;
                    out[t][2] += a * y1 * g[1];
                }
            }
        }
        out
    }

    /// Orthogonal projection onto `{z : Bz = F}`.
    fn correct(&self, z: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, SafeLoadError> {
        let mut r: Vec<f64> = self
            .apply(z)
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| b - a)
            .collect();
        self.gram.solve_in_place(&mut r)?;
        let dz = self.adjoint(&r);
        Ok(z.iter()
            .zip(&dz)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
            .collect())
    }

    fn norm_estimate(&self) -> f64 {
        let mut x = vec![[1.0; 3]; self.mesh.num_elements()];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let y = self.adjoint(&self.apply(&x));
            let n = y
                .iter()
                .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
                .sum::<f64>()
                .sqrt();
            if n == 0.0 {
                break;
            }
            let next = (n / x
                .iter()
                .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
                .sum::<f64>()
                .sqrt())
            .sqrt();
            x = y.iter().map(|v| [v[0] / n, v[1] / n, v[2] / n]).collect();
            if (next - lambda).abs() <= 1e-6 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda
    }
}

fn dev_norm(z: &[f64; 3]) -> f64 {
    (0.5 * (z[0] - z[2]).powi(2) + z[1] * z[1]).sqrt()
}

fn to_tensor(z: &[f64; 3]) -> SymTensor {
    SymTensor::new2(z[0], z[1] / R2, z[2])
}

/// Euclidean projection of `(z, c)` onto `{|dev z_T| ≤ κ - c for all T}`.
fn project(z: &mut [[f64; 3]], c: f64, kappa: f64) -> f64 {
    // c solves c - c̄ + Σ (m_T - κ + c)_+ = 0; the cells with the smallest
    // thresholds κ - m_T activate first.
    let mut thresholds: Vec<f64> = z.iter().map(|v| kappa - dev_norm(v)).collect();
    thresholds.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut c_new = c;
    for j in 0..=thresholds.len() {
        let cand = (c + sum) / (j as f64 + 1.0);
        let lower_ok = j == 0 || thresholds[j - 1] < cand;
        let upper_ok = j == thresholds.len() || cand <= thresholds[j];
        if lower_ok && upper_ok {
            c_new = cand;
            break;
        }
        if j < thresholds.len() {
            sum += thresholds[j];
        }
    }
    let c_new = c_new.min(kappa);
    let r = kappa - c_new;
    for v in z.iter_mut() {
        let m = dev_norm(v);
        if m > r {
            let h = 0.5 * (v[0] + v[2]);
            let s = r / m;
            *v = [h + s * (v[0] - h), s * v[1], h + s * (v[2] - h)];
        }
    }
    c_new
}

/// Maximizes the safe-load margin for `forcing` on `mesh`.
pub fn max_safety_margin(
    forcing: &Forcing,
    mesh: &Mesh,
    k: &YieldSet,
    options: SafeLoadOptions,
) -> Result<SafeLoadCertificate, SafeLoadError> {
    if options.max_iters == 0 || options.check_every == 0 || !(options.tol > 0.0) {
        return Err(SafeLoadError::InvalidOptions(format!("{options:?}")));
    }
    let kappa = k.radius();
    let op = Balance::new(mesh, forcing)?;
    let lip = op.norm_estimate() * 1.01;
    let tau = 0.95 / lip;
    let sigma = 0.95 / lip;

    let mut z = op.correct(&vec![[0.0; 3]; mesh.num_elements()])?;
    let mut c = kappa - z.iter().map(dev_norm).fold(0.0, f64::max);
    let mut best = (c, z.clone());
    let mut y = vec![0.0; op.dofs];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=options.max_iters {
        iterations = it;
        let bty = op.adjoint(&y);
        let mut z_new: Vec<[f64; 3]> = z
            .iter()
            .zip(&bty)
            .map(|(a, b)| [a[0] - tau * b[0], a[1] - tau * b[1], a[2] - tau * b[2]])
            .collect();
        let c_new = project(&mut z_new, c + tau, kappa);
        let z_bar: Vec<[f64; 3]> = z_new
            .iter()
            .zip(&z)
            .map(|(a, b)| [2.0 * a[0] - b[0], 2.0 * a[1] - b[1], 2.0 * a[2] - b[2]])
            .collect();
        let bz = op.apply(&z_bar);
        let y_new: Vec<f64> = y
            .iter()
            .zip(bz.iter().zip(&op.rhs))
            .map(|(yi, (b, f))| yi + sigma * (b - f))
            .collect();

        let dz: Vec<[f64; 3]> = z_new
            .iter()
            .zip(&z)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect();
        let dy: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dc = c_new - c;
        let bdz = op.apply(&dz);
        let sq = (dz
            .iter()
            .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            .sum::<f64>()
            + dc * dc)
            / tau
            + dy.iter().map(|v| v * v).sum::<f64>() / sigma
            - 2.0 * dy.iter().zip(&bdz).map(|(a, b)| a * b).sum::<f64>();
        let res = sq.max(0.0).sqrt();
        history.push(res);

        z = z_new;
        c = c_new;
        y = y_new;

        let done = res <= options.tol * history[0].max(f64::MIN_POSITIVE);
        if done || it % options.check_every == 0 || it == options.max_iters {
            let corrected = op.correct(&z)?;
            let m = kappa - corrected.iter().map(dev_norm).fold(0.0, f64::max);
            if m > best.0 {
                best = (m, corrected);
            }
        }
        if done {
            converged = true;
            break;
        }
    }

    let stress: FieldP0 = best.1.iter().map(to_tensor).collect();
    let residual = divergence_check(&stress, mesh, forcing)?;
    let margin = kappa - stress.iter().map(|s| s.dev().norm()).fold(0.0, f64::max);
    Ok(SafeLoadCertificate {
        margin,
        stress,
        residual,
        raw_margin: c,
        iterations,
        converged,
        fixed_point_residuals: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{
        benchmark_catalog, traction_forcing, BenchmarkId, BenchmarkParams, Material,
    };

    fn traction(n: usize, fraction: f64) -> (Mesh, Forcing, YieldSet) {
        let m = Material {
            shear_modulus: 1.0,
            bulk_modulus: 1.0,
            yield_radius: 1.0,
        };
        let b = benchmark_catalog(BenchmarkId::Traction, m, BenchmarkParams::default());
        let mesh = b.mesh(n).unwrap();
        let f = traction_forcing(&mesh, fraction * b.traction_limit());
        (mesh, f, m.yield_set().unwrap())
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let mut z = vec![[1.0, 2.0, -1.0], [0.1, 0.0, 0.1], [3.0, -0.5, 0.0]];
        let c = project(&mut z, 0.3, 1.0);
        assert!(z.iter().all(|v| dev_norm(v) <= 1.0 - c + 1e-14));
        let before = z.clone();
        let c2 = project(&mut z, c, 1.0);
        assert!((c2 - c).abs() < 1e-14);
        for (a, b) in z.iter().zip(&before) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn operator_adjoint_pair() {
        let (mesh, f, _) = traction(3, 0.5);
        let op = Balance::new(&mesh, &f).unwrap();
        let z: Vec<[f64; 3]> = (0..mesh.num_elements())
            .map(|t| [t as f64 * 0.1, 1.0 - t as f64 * 0.05, 0.3])
            .collect();
        let y: Vec<f64> = (0..op.dofs).map(|i| (i as f64 * 0.7).sin()).collect();
        let lhs: f64 = op.apply(&z).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = op
            .adjoint(&y)
            .iter()
            .zip(&z)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            .sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        let zc = op.correct(&z).unwrap();
        let stress: FieldP0 = zc.iter().map(to_tensor).collect();
        assert!(divergence_check(&stress, &mesh, &f).unwrap().interior < 1e-12);
    }

    #[test]
    fn half_limit_margin() {
        let (mesh, f, k) = traction(4, 0.5);
        let cert = max_safety_margin(&f, &mesh, &k, SafeLoadOptions::default()).unwrap();
        assert!(
            cert.margin > 0.0 && cert.margin <= 0.5 + 1e-9,
            "{}",
            cert.margin
        );
        assert!(cert.margin > 0.45, "{}", cert.margin);
        let check = verify_safe_load(&cert.stress, &f, &mesh, &k, cert.margin, 1e-10).unwrap();
        assert!(check.admissible);
        for w in cert.fixed_point_residuals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn overload_is_not_safe() {
        let (mesh, f, k) = traction(4, 1.5);
        let cert = max_safety_margin(&f, &mesh, &k, SafeLoadOptions::default()).unwrap();
        assert!(cert.margin <= -0.5 + 1e-9, "{}", cert.margin);
        assert!(
            !verify_safe_load(&cert.stress, &f, &mesh, &k, 0.0, 1e-10)
                .unwrap()
                .admissible
        );
    }
}
