//! Benchmark catalog and the rigid-motion non-uniqueness example.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::evolution::{BoundaryMode, LoadProgram};
use crate::fem::{
    divergence_check, divergence_of, interpolate, l2_norm, strain_of, EquilibriumResidual, Face,
    FaceSet, FemError, FieldP0, FieldP1, Forcing, Mesh,
};
use crate::tensor::{HookeTensor, SymTensor, TensorError, YieldSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("unknown benchmark id {0:?} (expected SHEAR, TRACTION or RIGID41)")]
    UnknownBenchmark(String),
    #[error(
        "smallness condition violated: sqrt(2c^2 + |f|^2 + |g|^2) = {value} must be < {bound}"
    )]
    Smallness { value: f64, bound: f64 },
    #[error("stress multiplier {0} outside [-2, 2]")]
    Multiplier(f64),
    #[error("rigid motion matrix is not skew-symmetric")]
    NotSkew,
    #[error("piecewise constant data: {0}")]
    PiecewiseData(String),
    #[error("breakpoint {0} is not a mesh line")]
    Misaligned(f64),
    #[error("the two multipliers must differ and the stress must be non-zero")]
    Degenerate,
    #[error("witness check failed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BenchmarkId {
    #[serde(rename = "SHEAR")]
    Shear,
    #[serde(rename = "TRACTION")]
    Traction,
    #[serde(rename = "RIGID41")]
    Rigid41,
}

impl FromStr for BenchmarkId {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SHEAR" => Ok(Self::Shear),
            "TRACTION" => Ok(Self::Traction),
            "RIGID41" => Ok(Self::Rigid41),
            _ => Err(BenchError::UnknownBenchmark(s.to_string())),
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Shear => "SHEAR",
            Self::Traction => "TRACTION",
            Self::Rigid41 => "RIGID41",
        })
    }
}

/// Base material; the stiffness scaling is applied per run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Material {
    pub shear_modulus: f64,
    pub bulk_modulus: f64,
    pub yield_radius: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            shear_modulus: 1.0,
            bulk_modulus: 1.0,
            yield_radius: 1.0,
        }
    }
}

impl Material {
    pub fn hooke(&self, epsilon: f64) -> Result<HookeTensor, TensorError> {
        HookeTensor::new(self.shear_modulus, self.bulk_modulus, epsilon)
    }

    pub fn yield_set(&self) -> Result<YieldSet, TensorError> {
        YieldSet::von_mises(self.yield_radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchmarkParams {
    /// SHEAR: `w(t, x) = t γ (x₂, 0)`.
    pub shear_rate: f64,
    /// TRACTION: peak load as a fraction of the constant-stress limit.
    pub traction_factor: f64,
    /// RIGID41: angular velocity `ω` of `A = [[0, -ω], [ω, 0]]`.
    pub rigid_rotation: f64,
    pub rigid_translation: [f64; 2],
    pub horizon: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            shear_rate: 2.0,
            traction_factor: 0.9,
            rigid_rotation: 0.5,
            rigid_translation: [0.1, -0.2],
            horizon: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Benchmark {
    pub id: BenchmarkId,
    pub material: Material,
    pub params: BenchmarkParams,
}

pub fn benchmark_catalog(
    id: BenchmarkId,
    material: Material,
    params: BenchmarkParams,
) -> Benchmark {
    Benchmark {
        id,
        material,
        params,
    }
}

impl Benchmark {
    pub fn dirichlet_faces(&self) -> FaceSet {
        match self.id {
            BenchmarkId::Shear | BenchmarkId::Rigid41 => FaceSet::all(),
            BenchmarkId::Traction => FaceSet::only(Face::Bottom),
        }
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh, FemError> {
        Mesh::square(n, self.dirichlet_faces())
    }

    /// Load level of TRACTION at which the constant shear stress
    /// `s [[0, 1], [1, 0]]` reaches the yield surface: `s = κ/√2`.
    pub fn traction_limit(&self) -> f64 {
        self.material.yield_radius * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Forcing and boundary displacement at time `t`.
    pub fn data(&self, mesh: &Mesh, t: f64) -> (Forcing, FieldP1) {
        let p = &self.params;
        match self.id {
            BenchmarkId::Shear => {
                let g = p.shear_rate;
                (
                    Forcing::zeros(mesh),
                    interpolate(mesh, |x| [t * g * x[1], 0.0]),
                )
            }
            BenchmarkId::Traction => {
                let s = t / p.horizon * p.traction_factor * self.traction_limit();
                (traction_forcing(mesh, s), vec![[0.0; 2]; mesh.num_nodes()])
            }
            BenchmarkId::Rigid41 => {
                let (om, b) = (p.rigid_rotation, p.rigid_translation);
                (
                    Forcing::zeros(mesh),
                    interpolate(mesh, |x| [t * (-om * x[1] + b[0]), t * (om * x[0] + b[1])]),
                )
            }
        }
    }

    pub fn program(&self, mesh: &Mesh, times: Vec<f64>) -> LoadProgram {
        LoadProgram::sample(times, |t| self.data(mesh, t))
    }

    pub fn default_mode(&self) -> BoundaryMode {
        BoundaryMode::Strong
    }
}

/// Tangential tractions `G ν` of the constant stress `G = s [[0,1],[1,0]]`
/// on the faces that are not clamped.
pub fn traction_forcing(mesh: &Mesh, s: f64) -> Forcing {
    let g = SymTensor::new2(0.0, s, 0.0);
    let mut f = Forcing::zeros(mesh);
    for (e, t) in mesh.boundary_edges.iter().zip(f.traction.iter_mut()) {
        let v = g.apply(&e.normal);
        *t = [v[0], v[1]];
    }
    f
}

/// Scalar step function on `[0, 1]`: `values[i]` on
/// `[breaks[i-1], breaks[i])`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseConstant {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(v: f64) -> Self {
        Self {
            breaks: vec![],
            values: vec![v],
        }
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, BenchError> {
        if values.len() != breaks.len() + 1 {
            return Err(BenchError::PiecewiseData(
                "need one more value than breakpoints".into(),
            ));
        }
        if breaks.iter().any(|b| !(*b > 0.0 && *b < 1.0)) || breaks.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(BenchError::PiecewiseData(
                "breakpoints must increase strictly inside (0, 1)".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::PiecewiseData("values must be finite".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.breaks.partition_point(|b| *b <= x)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_aligned(&self, n: usize) -> Result<(), BenchError> {
        for &b in &self.breaks {
            let k = b * n as f64;
            if (k - k.round()).abs() > 1e-12 {
                return Err(BenchError::Misaligned(b));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Example41Params {
    pub c: f64,
    /// Depends on `x₂`, enters `σ₁₁`.
    pub f: PiecewiseConstant,
    /// Depends on `x₁`, enters `σ₂₂`.
    pub g: PiecewiseConstant,
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub lambda: f64,
}

impl Example41Params {
    pub fn new(
        c: f64,
        f: PiecewiseConstant,
        g: PiecewiseConstant,
        rotation: f64,
        b: [f64; 2],
        lambda: f64,
    ) -> Self {
        Self {
            c,
            f,
            g,
            a: [[0.0, -rotation], [rotation, 0.0]],
            b,
            lambda,
        }
    }

    /// `√(2c² + ‖f‖∞² + ‖g‖∞²)`.
    pub fn smallness(&self) -> f64 {
        (2.0 * self.c * self.c + self.f.sup_norm().powi(2) + self.g.sup_norm().powi(2)).sqrt()
    }

    /// Checks the admissibility guard for yield radius `kappa`.
    pub fn validate(&self, kappa: f64) -> Result<(), BenchError> {
        let value = self.smallness();
        let bound = 0.5 * kappa;
        if !(value < bound) {
            return Err(BenchError::Smallness { value, bound });
        }
        if !(self.lambda.abs() <= 2.0) {
            return Err(BenchError::Multiplier(self.lambda));
        }
        if self.a[0][0] != 0.0 || self.a[1][1] != 0.0 || self.a[0][1] != -self.a[1][0] {
            return Err(BenchError::NotSkew);
        }
        if !self.c.is_finite() || self.b.iter().any(|v| !v.is_finite()) || self.a[1][0].is_nan() {
            return Err(BenchError::PiecewiseData("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Pointwise `λ [[f(x₂), c], [c, g(x₁)]]`, without the admissibility guard.
    pub fn stress_at(&self, x: [f64; 2]) -> SymTensor {
        let l = self.lambda;
        SymTensor::new2(l * self.f.eval(x[1]), l * self.c, l * self.g.eval(x[0]))
    }

    pub fn velocity(&self, mesh: &Mesh) -> FieldP1 {
        let (a, b) = (self.a, self.b);
        interpolate(mesh, |x| {
            [
                a[0][0] * x[0] + a[0][1] * x[1] + b[0],
                a[1][0] * x[0] + a[1][1] * x[1] + b[1],
            ]
        })
    }
}

/// `λ [[f(x₂), c], [c, g(x₁)]]` at element centroids.
pub fn example41_stress(
    params: &Example41Params,
    mesh: &Mesh,
    kappa: f64,
) -> Result<FieldP0, BenchError> {
    params.validate(kappa)?;
    params.f.check_aligned(mesh.cells_per_side())?;
    params.g.check_aligned(mesh.cells_per_side())?;
    Ok((0..mesh.num_elements())
        .map(|t| params.stress_at(mesh.centroid(t)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StressCheck {
    pub lambda: f64,
    pub residual: EquilibriumResidual,
    pub max_sigma_dev: f64,
    /// `Σ area κ|Ev|` and `Σ area σ_D:Ev`.
    pub dissipation: f64,
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonUniquenessWitness {
    pub max_strain_rate: f64,
    pub max_div_v: f64,
    pub stresses: [StressCheck; 2],
    /// `‖σ¹ - σ²‖_L²`.
    pub stress_gap: f64,
    pub witness: bool,
}

/// Verifies that two members of the stress family both solve the rigid
/// problem with the same rigid velocity.
pub fn example41_verify(
    params: &Example41Params,
    lambdas: [f64; 2],
    mesh: &Mesh,
    k: &YieldSet,
) -> Result<NonUniquenessWitness, BenchError> {
    let kappa = k.radius();
    for l in lambdas {
        params.with_lambda(l).validate(kappa)?;
    }
    if lambdas[0] == lambdas[1] {
        return Err(BenchError::Degenerate);
    }
    let v = params.velocity(mesh);
    let ev = strain_of(&v, mesh)?;
    let scale = params
        .a
        .iter()
        .flatten()
        .chain(params.b.iter())
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    let max_strain_rate = ev.iter().fold(0.0_f64, |m, e| m.max(e.norm()));
    let max_div_v = divergence_of(&v, mesh)?
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()));
    if max_strain_rate > tol {
        return Err(BenchError::CheckFailed(format!(
            "strain rate {max_strain_rate:e} of the rigid motion"
        )));
    }
    if max_div_v > tol {
        return Err(BenchError::CheckFailed(format!(
            "divergence {max_div_v:e} of the rigid motion"
        )));
    }
    let forcing = Forcing::zeros(mesh);
    let mut fields = Vec::with_capacity(2);
    let mut checks = Vec::with_capacity(2);
    for &lambda in &lambdas {
        let sigma = example41_stress(&params.with_lambda(lambda), mesh, kappa)?;
        let residual = divergence_check(&sigma, mesh, &forcing)?;
        if residual.interior != 0.0 || residual.flux != 0.0 {
            return Err(BenchError::CheckFailed(format!(
                "equilibrium residual {residual:?} for lambda {lambda}"
            )));
        }
        let max_sigma_dev = sigma.iter().fold(0.0_f64, |m, s| m.max(s.dev().norm()));
        if !(max_sigma_dev < kappa) {
            return Err(BenchError::CheckFailed(format!(
                "not strictly feasible for lambda {lambda}"
            )));
        }
        let (mut dissipation, mut power) = (0.0, 0.0);
        for t in 0..mesh.num_elements() {
            dissipation += mesh.areas[t] * kappa * ev[t].norm();
            power += mesh.areas[t] * sigma[t].dev().ddot(&ev[t]);
        }
        if (dissipation - power).abs() > tol * kappa {
            return Err(BenchError::CheckFailed(format!(
                "flow rule violated for lambda {lambda}"
            )));
        }
        checks.push(StressCheck {
            lambda,
            residual,
            max_sigma_dev,
            dissipation,
            power,
        });
        fields.push(sigma);
    }
    let diff: FieldP0 = fields[0]
        .iter()
        .zip(&fields[1])
        .map(|(a, b)| *a - *b)
        .collect();
    let stress_gap = l2_norm(mesh, &diff);
    if !(stress_gap > 0.0) {
        return Err(BenchError::Degenerate);
    }
    let stresses = [checks[0].clone(), checks[1].clone()];
    Ok(NonUniquenessWitness {
        max_strain_rate,
        max_div_v,
        stresses,
        stress_gap,
        witness: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(c: f64) -> Example41Params {
        Example41Params::new(
            c,
            PiecewiseConstant::constant(0.0),
            PiecewiseConstant::constant(0.0),
            0.3,
            [0.1, 0.2],
            1.0,
        )
    }

    #[test]
    fn catalog_programs_are_divergence_free() {
        for id in [
            BenchmarkId::Shear,
            BenchmarkId::Traction,
            BenchmarkId::Rigid41,
        ] {
            let b = benchmark_catalog(id, Material::default(), BenchmarkParams::default());
            let m = b.mesh(4).unwrap();
            let prog = b.program(&m, vec![0.0, 0.5, 1.0]);
            prog.validate(&m).unwrap();
            assert!(prog.boundary[0].iter().all(|w| w == &[0.0, 0.0]));
            assert_eq!(id.to_string().parse::<BenchmarkId>().unwrap(), id);
        }
        assert!("BEAM".parse::<BenchmarkId>().is_err());
    }

    #[test]
    fn traction_constant_stress_is_equilibrated() {
        let b = benchmark_catalog(
            BenchmarkId::Traction,
            Material::default(),
            BenchmarkParams::default(),
        );
        let m = b.mesh(5).unwrap();
        let s = 0.4;
        let sigma = vec![SymTensor::new2(0.0, s, 0.0); m.num_elements()];
        let r = divergence_check(&sigma, &m, &traction_forcing(&m, s)).unwrap();
        assert_eq!((r.interior, r.flux), (0.0, 0.0));
    }

    #[test]
    fn stress_samples() {
        let m = Mesh::square(4, FaceSet::all()).unwrap();
        let s = example41_stress(&base(0.2).with_lambda(2.0), &m, 1.0).unwrap();
        assert!(s.iter().all(|t| *t == SymTensor::new2(0.0, 0.4, 0.0)));
        assert!((s[0].dev().norm() - 0.4 * 2f64.sqrt()).abs() < 1e-15);
        let z = example41_stress(&base(0.2).with_lambda(0.0), &m, 1.0).unwrap();
        assert!(z.iter().all(|t| t.norm() == 0.0));
        let p = Example41Params::new(
            0.3,
            PiecewiseConstant::constant(0.2),
            PiecewiseConstant::constant(-0.2),
            0.0,
            [0.0; 2],
            1.0,
        );
        // sqrt(0.26) exceeds the smallness bound, so only the formula applies.
        assert!(example41_stress(&p, &m, 1.0).is_err());
        let s = p.stress_at([0.3, 0.6]);
        assert!((s.dev().norm_sq() - 0.26).abs() < 1e-15);
    }

    #[test]
    fn witness_for_simple_pair() {
        let m = Mesh::square(4, FaceSet::all()).unwrap();
        let k = YieldSet::von_mises(1.0).unwrap();
        let w = example41_verify(&base(0.2), [1.0, 2.0], &m, &k).unwrap();
        assert!(w.witness);
        assert!((w.stress_gap - 0.2 * 2f64.sqrt()).abs() < 1e-14);
        let w = example41_verify(&base(0.2), [-2.0, 2.0], &m, &k).unwrap();
        assert!(w.stresses.iter().all(|s| s.max_sigma_dev < 1.0));
        let translation = Example41Params {
            a: [[0.0; 2]; 2],
            b: [3.0, -1.0],
            ..base(0.1)
        };
        assert!(example41_verify(&translation, [0.5, 1.5], &m, &k).is_ok());
    }

    #[test]
    fn guard_rejects_outside_parameters() {
        let m = Mesh::square(4, FaceSet::all()).unwrap();
        let k = YieldSet::von_mises(1.0).unwrap();
        assert!(matches!(
            example41_verify(&base(0.2), [1.0, 3.0], &m, &k),
            Err(BenchError::Multiplier(_))
        ));
        assert!(matches!(
            example41_verify(&base(0.36), [1.0, 2.0], &m, &k),
            Err(BenchError::Smallness { .. })
        ));
        assert!(matches!(
            example41_verify(&base(0.2), [1.0, 1.0], &m, &k),
            Err(BenchError::Degenerate)
        ));
        let skewless = Example41Params {
            a: [[0.0, 1.0], [1.0, 0.0]],
            ..base(0.2)
        };
        assert!(matches!(
            example41_verify(&skewless, [1.0, 2.0], &m, &k),
            Err(BenchError::NotSkew)
        ));
        let off = Example41Params {
            f: PiecewiseConstant::new(vec![0.3], vec![0.1, -0.1]).unwrap(),
            ..base(0.1)
        };
        assert!(matches!(
            example41_verify(&off, [1.0, 2.0], &m, &k),
            Err(BenchError::Misaligned(_))
        ));
    }

    #[test]
    fn piecewise_steps_keep_exact_equilibrium() {
        let m = Mesh::square(4, FaceSet::all()).unwrap();
        let k = YieldSet::von_mises(1.0).unwrap();
        let p = Example41Params::new(
            0.1,
            PiecewiseConstant::new(vec![0.25, 0.75], vec![0.2, -0.1, 0.15]).unwrap(),
            PiecewiseConstant::new(vec![0.5], vec![-0.2, 0.05]).unwrap(),
            1.0,
            [0.0, 1.0],
            1.0,
        );
        let w = example41_verify(&p, [-1.5, 2.0], &m, &k).unwrap();
        assert!(w.stresses.iter().all(|s| s.residual.interior == 0.0));
    }
}
