//! Symmetric tensor algebra and the pointwise constitutive kernel.
//!
//! Everything here is a pure function on small `Copy` values: the
//! symmetric tensor type, the isotropic Hooke law with its stiffness
//! scaling, the von Mises yield set with its support function, and the
//! closed-form radial return that solves the cellwise incremental problem.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

/// Relative slack used to decide whether a tensor is trace free.
pub const DEVIATORIC_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("tensor is not deviatoric: trace {trace:e} exceeds tolerance {tol:e}")]
    NotDeviatoric { trace: f64, tol: f64 },
    #[error("invalid material parameter {name} = {value} (must be finite and > 0)")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Symmetric `dim x dim` matrix stored as its upper triangle, row-major.
///
/// Coefficient order is `[xx, xy, yy]` in 2-D and
/// `[xx, xy, xz, yy, yz, zz]` in 3-D. Unused slots are kept at zero so
/// that derived equality and hashing of coefficients stay meaningful.
#[derive(Clone, Copy, PartialEq)]
pub struct SymTensor {
    dim: u8,
    c: [f64; 6],
}

impl fmt::Debug for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor{}{:?}", self.dim, self.coeffs())
    }
}

#[inline]
fn slot(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    match dim {
        2 => i * 2 + j - i, // (0,0)->0 (0,1)->1 (1,1)->2
        _ => match (i, j) {
            (0, 0) => 0,
            (0, 1) => 1,
            (0, 2) => 2,
            (1, 1) => 3,
            (1, 2) => 4,
            _ => 5,
        },
    }
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            dim == 2 || dim == 3,
            "SymTensor supports dim 2 or 3, got {dim}"
        );
        Self {
            dim: dim as u8,
            c: [0.0; 6],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.set(i, i, 1.0);
        }
        t
    }

    /// 2-D tensor from its three independent coefficients.
    pub const fn new2(xx: f64, xy: f64, yy: f64) -> Self {
        Self {
            dim: 2,
            c: [xx, xy, yy, 0.0, 0.0, 0.0],
        }
    }

    pub fn from_coeffs(dim: usize, coeffs: &[f64]) -> Result<Self, TensorError> {
        if dim != 2 && dim != 3 {
            return Err(TensorError::UnsupportedDimension(dim));
        }
        let len = dim * (dim + 1) / 2;
        if coeffs.len() != len {
            return Err(TensorError::DimensionMismatch {
                left: coeffs.len(),
                right: len,
            });
        }
        let mut t = Self::zeros(dim);
        t.c[..len].copy_from_slice(coeffs);
        Ok(t)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// The `dim*(dim+1)/2` stored coefficients in canonical order.
    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        let d = self.dim();
        &self.c[..d * (d + 1) / 2]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[slot(self.dim(), i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = slot(self.dim(), i, j);
        self.c[s] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `A : B = tr(AB)`; off-diagonal products count twice.
    pub fn ddot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            s += self.get(i, i) * other.get(i, i);
            for j in i + 1..d {
                s += 2.0 * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    /// Frobenius norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Deviatoric part `A - (tr A / dim) I`.
    pub fn dev(&self) -> Self {
        self.dev_decompose().0
    }

    /// Split into the trace-free part and the mean trace `tr A / dim`.
    pub fn dev_decompose(&self) -> (Self, f64) {
        let d = self.dim();
        let mean = self.trace() / d as f64;
        let mut dev = *self;
        for i in 0..d {
            let v = dev.get(i, i) - mean;
            dev.set(i, i, v);
        }
        (dev, mean)
    }

    /// Whether `|tr A| <= DEVIATORIC_TOL * max(1, |A|)`.
    pub fn is_deviatoric(&self) -> bool {
        self.trace().abs() <= deviatoric_tolerance(self)
    }

    pub fn check_deviatoric(&self) -> Result<(), TensorError> {
        let trace = self.trace();
        let tol = deviatoric_tolerance(self);
        if trace.abs() <= tol {
            Ok(())
        } else {
            Err(TensorError::NotDeviatoric { trace, tol })
        }
    }

    /// Matrix-vector product `A v`.
    pub fn apply(&self, v: &[f64]) -> [f64; 3] {
        let d = self.dim();
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..d).map(|j| self.get(i, j) * v[j]).sum();
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|v| v.is_finite())
    }
}

fn deviatoric_tolerance(a: &SymTensor) -> f64 {
    DEVIATORIC_TOL * a.norm().max(1.0)
}

impl Add for SymTensor {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for SymTensor {
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
    }
}

impl Sub for SymTensor {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for SymTensor {
    fn sub_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, mut rhs: SymTensor) -> SymTensor {
        for a in rhs.c.iter_mut() {
            *a *= self;
        }
        rhs
    }
}

impl Neg for SymTensor {
    type Output = Self;
    fn neg(self) -> Self {
        -1.0 * self
    }
}

/// Symmetrized tensor product `(a ⊙ b)_ij = (a_i b_j + a_j b_i) / 2`.
pub fn sym_outer(a: &[f64], b: &[f64]) -> Result<SymTensor, TensorError> {
    if a.len() != b.len() {
        return Err(TensorError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let d = a.len();
    if d != 2 && d != 3 {
        return Err(TensorError::UnsupportedDimension(d));
    }
    let mut t = SymTensor::zeros(d);
    for i in 0..d {
        for j in i..d {
            t.set(i, j, 0.5 * (a[i] * b[j] + a[j] * b[i]));
        }
    }
    Ok(t)
}

/// Isotropic elasticity law scaled by `1/epsilon`:
/// `C ξ = (2μ dev ξ + κ_b (tr ξ) I) / ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HookeTensor {
    shear_modulus: f64,
    bulk_modulus: f64,
    epsilon: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, TensorError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(TensorError::InvalidParameter { name, value })
    }
}

impl HookeTensor {
    pub fn new(shear_modulus: f64, bulk_modulus: f64, epsilon: f64) -> Result<Self, TensorError> {
        Ok(Self {
            shear_modulus: positive("shear_modulus", shear_modulus)?,
            bulk_modulus: positive("bulk_modulus", bulk_modulus)?,
            epsilon: positive("epsilon", epsilon)?,
        })
    }

    /// Same base law with a different stiffness scaling.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, TensorError> {
        Self::new(self.shear_modulus, self.bulk_modulus, epsilon)
    }

    pub fn shear_modulus(&self) -> f64 {
        self.shear_modulus
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.bulk_modulus
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Effective deviatoric stiffness `2μ/ε`.
    #[inline]
    pub fn deviatoric_stiffness(&self) -> f64 {
        2.0 * self.shear_modulus / self.epsilon
    }

    /// Effective bulk stiffness `κ_b/ε`.
    #[inline]
    pub fn volumetric_stiffness(&self) -> f64 {
        self.bulk_modulus / self.epsilon
    }

    pub fn apply(&self, xi: &SymTensor) -> SymTensor {
        let d = xi.dim();
        let (dev, mean) = xi.dev_decompose();
        let tr = mean * d as f64;
        let mut out = self.deviatoric_stiffness() * dev;
        let sph = self.volumetric_stiffness() * tr;
        for i in 0..d {
            let v = out.get(i, i) + sph;
            out.set(i, i, v);
        }
        out
    }

    /// `½ C ξ : ξ`.
    pub fn energy_density(&self, xi: &SymTensor) -> f64 {
        0.5 * self.apply(xi).ddot(xi)
    }

    /// Lower coercivity constant `min(2μ, dim κ_b) / ε`.
    pub fn alpha(&self, dim: usize) -> f64 {
        (2.0 * self.shear_modulus).min(dim as f64 * self.bulk_modulus) / self.epsilon
    }

    /// Upper growth constant `max(2μ, dim κ_b) / ε`.
    pub fn beta(&self, dim: usize) -> f64 {
        (2.0 * self.shear_modulus).max(dim as f64 * self.bulk_modulus) / self.epsilon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YieldKind {
    VonMisesBall,
}

/// Admissible set for the deviatoric stress.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YieldSet {
    kind: YieldKind,
    radius: f64,
}

impl YieldSet {
    pub fn von_mises(radius: f64) -> Result<Self, TensorError> {
        Ok(Self {
            kind: YieldKind::VonMisesBall,
            radius: positive("yield_radius", radius)?,
        })
    }

    pub fn kind(&self) -> YieldKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Largest ball centred at 0 inside the set.
    pub fn inner_radius(&self) -> f64 {
        self.radius
    }

    /// Smallest ball centred at 0 containing the set.
    pub fn outer_radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, tau_dev: &SymTensor) -> bool {
        match self.kind {
            YieldKind::VonMisesBall => tau_dev.norm() <= self.radius,
        }
    }
}

/// Support function `H(p) = sup_{τ ∈ K} τ : p`; undefined off the
/// deviatoric subspace.
pub fn support_h(p: &SymTensor, k: &YieldSet) -> Result<f64, TensorError> {
    p.check_deviatoric()?;
    Ok(support_h_unchecked(p, k))
}

#[inline]
pub(crate) fn support_h_unchecked(p: &SymTensor, k: &YieldSet) -> f64 {
    match k.kind {
        YieldKind::VonMisesBall => k.radius * p.norm(),
    }
}

/// Euclidean projection of a deviatoric tensor onto `K`.
pub fn project_k(tau: &SymTensor, k: &YieldSet) -> Result<SymTensor, TensorError> {
    tau.check_deviatoric()?;
    Ok(project_k_unchecked(tau, k))
}

#[inline]
pub(crate) fn project_k_unchecked(tau: &SymTensor, k: &YieldSet) -> SymTensor {
    match k.kind {
        YieldKind::VonMisesBall => {
            let n = tau.norm();
            if n <= k.radius {
                *tau
            } else {
                (k.radius / n) * *tau
            }
        }
    }
}

/// Result of the cellwise return map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnMap {
    pub plastic_strain: SymTensor,
    pub stress_dev: SymTensor,
}

impl ReturnMap {
    pub fn yielded(&self, p_old: &SymTensor) -> bool {
        self.plastic_strain != *p_old
    }
}

/// Exact minimizer of `p ↦ ½ C(E - p):(E - p) + H(p - p_old)` over
/// deviatoric `p`, given the deviatoric total strain `e_dev`.
///
/// The trial stress `s = (2μ/ε)(e_dev - p_old)` is returned unchanged if
/// it lies in `K`; otherwise it is scaled back to the yield surface and
/// the excess becomes plastic strain along `s/|s|`.
pub fn radial_return(
    e_dev: &SymTensor,
    p_old: &SymTensor,
    hooke: &HookeTensor,
    k: &YieldSet,
) -> ReturnMap {
    debug_assert!(e_dev.is_deviatoric() && p_old.is_deviatoric());
    let stiff = hooke.deviatoric_stiffness();
    let trial = stiff * (*e_dev - *p_old);
    let norm = trial.norm();
    match k.kind {
        YieldKind::VonMisesBall => {
            if norm <= k.radius {
                ReturnMap {
                    plastic_strain: *p_old,
                    stress_dev: trial,
                }
            } else {
                let dir = (1.0 / norm) * trial;
                let increment = (norm - k.radius) / stiff;
                ReturnMap {
                    plastic_strain: *p_old + increment * dir,
                    stress_dev: k.radius * dir,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn identity_decomposes_to_pure_mean() {
        let (dev, mean) = SymTensor::identity(2).dev_decompose();
        assert_eq!(dev, SymTensor::zeros(2));
        assert_eq!(mean, 1.0);
    }

    #[test]
    fn diag_two_zero_decomposes() {
        let (dev, mean) = SymTensor::new2(2.0, 0.0, 0.0).dev_decompose();
        assert_eq!(dev, SymTensor::new2(1.0, 0.0, -1.0));
        assert_eq!(mean, 1.0);
    }

    #[test]
    fn off_diagonal_counts_twice_in_norm() {
        let t = SymTensor::new2(0.0, 1.0, 0.0);
        assert_eq!(t.norm_sq(), 2.0);
        assert_eq!(t.get(1, 0), 1.0);
    }

    #[test]
    fn three_dim_slots_are_canonical() {
        let t = SymTensor::from_coeffs(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.get(0, 2), 3.0);
        assert_eq!(t.get(2, 1), 5.0);
        assert_eq!(t.trace(), 11.0);
        assert!(SymTensor::from_coeffs(3, &[1.0]).is_err());
        assert!(SymTensor::from_coeffs(4, &[1.0]).is_err());
    }

    #[test]
    fn sym_outer_cases() {
        assert_eq!(
            sym_outer(&[1.0, 0.0], &[1.0, 0.0]).unwrap(),
            SymTensor::new2(1.0, 0.0, 0.0)
        );
        let t = sym_outer(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(t, SymTensor::new2(0.0, 0.5, 0.0));
        assert!(close(t.norm(), 1.0 / 2f64.sqrt(), 1e-15));
        assert!(matches!(
            sym_outer(&[1.0, 0.0], &[1.0, 0.0, 0.0]),
            Err(TensorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn support_function_cases() {
        let k = YieldSet::von_mises(1.0).unwrap();
        assert_eq!(support_h(&SymTensor::zeros(2), &k).unwrap(), 0.0);
        let h = support_h(&SymTensor::new2(1.0, 0.0, -1.0), &k).unwrap();
        assert!(close(h, 2f64.sqrt(), 1e-15));
        assert!(matches!(
            support_h(&SymTensor::new2(0.5, 0.0, 0.0), &k),
            Err(TensorError::NotDeviatoric { .. })
        ));
    }

    #[test]
    fn projection_cases() {
        let k = YieldSet::von_mises(1.0).unwrap();
        let inside = SymTensor::new2(0.2, 0.3, -0.2);
        assert!(close(inside.norm_sq(), 0.26, 1e-15));
        assert_eq!(project_k(&inside, &k).unwrap(), inside);
        let out = project_k(&SymTensor::new2(2.0, 0.0, -2.0), &k).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(close(out.get(0, 0), s, 1e-15) && close(out.get(1, 1), -s, 1e-15));
        assert!(project_k(&SymTensor::new2(1.0, 0.0, 0.0), &k).is_err());
    }

    #[test]
    fn hooke_rejects_bad_parameters() {
        assert!(HookeTensor::new(0.0, 1.0, 1.0).is_err());
        assert!(HookeTensor::new(1.0, f64::NAN, 1.0).is_err());
        assert!(HookeTensor::new(1.0, 1.0, -1.0).is_err());
        assert!(YieldSet::von_mises(0.0).is_err());
    }

    #[test]
    fn hooke_constants_scale_with_epsilon() {
        let h = HookeTensor::new(1.0, 3.0, 0.25).unwrap();
        assert_eq!(h.alpha(2), 8.0);
        assert_eq!(h.beta(2), 24.0);
        assert_eq!(h.deviatoric_stiffness(), 8.0);
    }

    #[test]
    fn elastic_return_keeps_plastic_strain() {
        let h = HookeTensor::new(1.0, 1.0, 1.0).unwrap();
        let k = YieldSet::von_mises(1.0).unwrap();
        let e = SymTensor::new2(0.1, 0.1, -0.1);
        let p0 = SymTensor::zeros(2);
        let r = radial_return(&e, &p0, &h, &k);
        assert_eq!(r.plastic_strain, p0);
        assert_eq!(r.stress_dev, 2.0 * e);
        assert!(!r.yielded(&p0));
    }

    #[test]
    fn plastic_return_increment_matches_closed_form() {
        // |s| = 2√2 against κ = 1: increment (2√2 - 1)/2 along diag(1,-1)/√2.
        let h = HookeTensor::new(1.0, 1.0, 1.0).unwrap();
        let k = YieldSet::von_mises(1.0).unwrap();
        let e = SymTensor::new2(1.0, 0.0, -1.0);
        let r = radial_return(&e, &SymTensor::zeros(2), &h, &k);
        let expected = (2.0 * 2f64.sqrt() - 1.0) / 2.0;
        assert!(close(r.plastic_strain.norm(), expected, 1e-15));
        assert!(close(r.stress_dev.norm(), 1.0, 1e-15));
        let hill = r.stress_dev.ddot(&r.plastic_strain);
        assert!(close(
            hill,
            support_h(&r.plastic_strain, &k).unwrap(),
            1e-15
        ));
    }
}
