//! C ABI for `rigidplast`.
//!
//! Every entry point returns an [`RpStatus`]; on failure the message is kept
//! per thread and can be read with [`rp_last_error`]. Objects are returned
//! as opaque handles that the caller releases with the matching `*_free`.
//! Panics never cross the boundary. Pointer arguments are null-checked
//! before use.

#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rigidplast::bench::{
    benchmark_catalog, BenchmarkId, BenchmarkParams, Example41Params, Material, PiecewiseConstant,
};
use rigidplast::evolution::{graded_times, run_evolution, Evolution, EvolutionOptions, FEState};
use rigidplast::fem::{FaceSet, Mesh};
use rigidplast::rigid_limit::{run_sweep, SweepConfig, SweepReport};
use rigidplast::safeload::{max_safety_margin, SafeLoadOptions};
use rigidplast::tensor::{radial_return, HookeTensor, SymTensor, YieldSet};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    OutOfRange = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RpBenchmark {
    Shear = 0,
    Traction = 1,
    Rigid41 = 2,
}

fn benchmark_id(raw: u32) -> Result<BenchmarkId, (RpStatus, String)> {
    match raw {
        x if x == RpBenchmark::Shear as u32 => Ok(BenchmarkId::Shear),
        x if x == RpBenchmark::Traction as u32 => Ok(BenchmarkId::Traction),
        x if x == RpBenchmark::Rigid41 as u32 => Ok(BenchmarkId::Rigid41),
        other => Err(invalid(format!("unknown benchmark {other}"))),
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RpMaterial {
    pub shear_modulus: f64,
    pub bulk_modulus: f64,
    pub yield_radius: f64,
}

impl From<RpMaterial> for Material {
    fn from(m: RpMaterial) -> Self {
        Material {
            shear_modulus: m.shear_modulus,
            bulk_modulus: m.bulk_modulus,
            yield_radius: m.yield_radius,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RpLedgerRow {
    pub step: usize,
    pub time: f64,
    pub q: f64,
    pub d: f64,
    pub w: f64,
    pub gap: f64,
    pub max_sigma_dev: f64,
    pub plastic_cell_fraction: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RpSweepMetrics {
    pub epsilon: f64,
    pub sup_e_l2: f64,
    pub int_sigma_l2_sq: f64,
    pub sup_sigma_dev_linf: f64,
    pub sup_div_u_l2: f64,
    pub hydrostatic: f64,
    pub flow_gap: f64,
    pub total_dissipation: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RpWitness {
    pub stress_gap: f64,
    pub max_strain_rate: f64,
    pub max_div_v: f64,
    pub max_sigma_dev: [f64; 2],
    pub witness: bool,
}

pub struct RpMesh(Mesh);

pub struct RpEvolution {
    evolution: Evolution,
}

pub struct RpSweep(SweepReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("interior NULs removed"));
}

fn guard(f: impl FnOnce() -> Result<(), (RpStatus, String)>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RpStatus::Panic
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> (RpStatus, String) {
    (RpStatus::InvalidArgument, e.to_string())
}

fn solver(e: impl std::fmt::Display) -> (RpStatus, String) {
    (RpStatus::SolverFailure, e.to_string())
}

fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (RpStatus, String)> {
    // SAFETY: non-null checked; the caller guarantees a valid, aligned,
    // writable T.
    unsafe { p.as_mut() }.ok_or_else(|| (RpStatus::NullPointer, format!("{name} is null")))
}

fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (RpStatus, String)> {
    if p.is_null() {
        return Err((RpStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null checked; the caller guarantees `len` readable values.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length.
#[no_mangle]
pub extern "C" fn rp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller provides `len` writable bytes at `buf`.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Unit-square mesh with `n` cells per side. `dirichlet_mask` bits: 1 bottom,
/// 2 right, 4 top, 8 left.
#[no_mangle]
pub extern "C" fn rp_mesh_new(n: usize, dirichlet_mask: u32, mesh: *mut *mut RpMesh) -> RpStatus {
    guard(|| {
        let slot = out(mesh, "mesh")?;
        let faces = rigidplast::fem::Face::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| dirichlet_mask & (1 << i) != 0)
            .fold(FaceSet::empty(), |s, (_, f)| s.with(*f));
        let m = Mesh::square(n, faces).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(RpMesh(m)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rp_mesh_num_nodes(mesh: *const RpMesh) -> usize {
    // SAFETY: null or a handle from rp_mesh_new.
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.num_nodes())
}

#[no_mangle]
pub extern "C" fn rp_mesh_num_elements(mesh: *const RpMesh) -> usize {
    // SAFETY: null or a handle from rp_mesh_new.
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.num_elements())
}

#[no_mangle]
pub extern "C" fn rp_mesh_free(mesh: *mut RpMesh) {
    if !mesh.is_null() {
        // SAFETY: handle from rp_mesh_new, freed once.
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Cellwise return map. Tensors are `dim (dim + 1) / 2` upper-triangle
/// coefficients (`xx, xy, yy` in 2-D; `xx, xy, xz, yy, yz, zz` in 3-D).
#[no_mangle]
pub extern "C" fn rp_radial_return(
    dim: usize,
    e_dev: *const f64,
    p_old: *const f64,
    material: RpMaterial,
    epsilon: f64,
    p_new: *mut f64,
    sigma_dev: *mut f64,
) -> RpStatus {
    guard(|| {
        if dim != 2 && dim != 3 {
            return Err(invalid(format!("dimension {dim}")));
        }
        let len = dim * (dim + 1) / 2;
        let e = SymTensor::from_coeffs(dim, slice(e_dev, len, "e_dev")?).map_err(invalid)?;
        let p = SymTensor::from_coeffs(dim, slice(p_old, len, "p_old")?).map_err(invalid)?;
        e.check_deviatoric().map_err(invalid)?;
        p.check_deviatoric().map_err(invalid)?;
        let hooke = HookeTensor::new(material.shear_modulus, material.bulk_modulus, epsilon)
            .map_err(invalid)?;
        let k = YieldSet::von_mises(material.yield_radius).map_err(invalid)?;
        if p_new.is_null() || sigma_dev.is_null() {
            return Err((RpStatus::NullPointer, "output is null".into()));
        }
        let r = radial_return(&e, &p, &hooke, &k);
        // SAFETY: caller provides `len` writable values for each output.
        unsafe {
            std::ptr::copy_nonoverlapping(r.plastic_strain.coeffs().as_ptr(), p_new, len);
            std::ptr::copy_nonoverlapping(r.stress_dev.coeffs().as_ptr(), sigma_dev, len);
        }
        Ok(())
    })
}

/// Runs a benchmark evolution on a uniform grid of `steps` steps over
/// `[0, 1]`. `benchmark` takes an `RpBenchmark` value.
#[no_mangle]
pub extern "C" fn rp_evolution_run(
    benchmark: u32,
    n: usize,
    steps: usize,
    epsilon: f64,
    material: RpMaterial,
    evolution: *mut *mut RpEvolution,
) -> RpStatus {
    guard(|| {
        let slot = out(evolution, "evolution")?;
        let b = benchmark_catalog(
            benchmark_id(benchmark)?,
            material.into(),
            BenchmarkParams::default(),
        );
        let mesh = b.mesh(n).map_err(invalid)?;
        if steps == 0 {
            return Err(invalid("steps must be positive"));
        }
        let program = b.program(&mesh, graded_times(1.0, steps, 1.0));
        let hooke = b.material.hooke(epsilon).map_err(invalid)?;
        let k = b.material.yield_set().map_err(invalid)?;
        let options = EvolutionOptions {
            mode: b.default_mode(),
            ..EvolutionOptions::default()
        };
        let ev = run_evolution(
            &program,
            hooke,
            k,
            &mesh,
            FEState::zero(&mesh, 0.0),
            options,
        )
        .map_err(solver)?;
        *slot = Box::into_raw(Box::new(RpEvolution { evolution: ev }));
        Ok(())
    })
}

/// Number of ledger rows (grid times including the initial one).
#[no_mangle]
pub extern "C" fn rp_evolution_num_rows(evolution: *const RpEvolution) -> usize {
    // SAFETY: null or a handle from rp_evolution_run.
    unsafe { evolution.as_ref() }.map_or(0, |e| e.evolution.ledger.rows.len())
}

#[no_mangle]
pub extern "C" fn rp_evolution_row(
    evolution: *const RpEvolution,
    index: usize,
    row: *mut RpLedgerRow,
) -> RpStatus {
    guard(|| {
        // SAFETY: null or a handle from rp_evolution_run.
        let e = unsafe { evolution.as_ref() }
            .ok_or((RpStatus::NullPointer, "evolution is null".into()))?;
        let slot = out(row, "row")?;
        let r = e
            .evolution
            .ledger
            .rows
            .get(index)
            .ok_or((RpStatus::OutOfRange, format!("row {index}")))?;
        *slot = RpLedgerRow {
            step: r.step,
            time: r.time,
            q: r.q,
            d: r.d,
            w: r.w,
            gap: r.gap,
            max_sigma_dev: r.max_sigma_dev,
            plastic_cell_fraction: r.plastic_cell_fraction,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rp_evolution_free(evolution: *mut RpEvolution) {
    if !evolution.is_null() {
        // SAFETY: handle from rp_evolution_run, freed once.
        drop(unsafe { Box::from_raw(evolution) });
    }
}

/// ε-sweep of a benchmark; `epsilons` must be strictly decreasing. Uses the
/// cubic time grading of the command-line sweep.
#[no_mangle]
pub extern "C" fn rp_sweep_run(
    benchmark: u32,
    n: usize,
    steps: usize,
    epsilons: *const f64,
    num_epsilons: usize,
    material: RpMaterial,
    threads: usize,
    sweep: *mut *mut RpSweep,
) -> RpStatus {
    guard(|| {
        let slot = out(sweep, "sweep")?;
        let eps = slice(epsilons, num_epsilons, "epsilons")?.to_vec();
        let b = benchmark_catalog(
            benchmark_id(benchmark)?,
            material.into(),
            BenchmarkParams::default(),
        );
        let mut config = SweepConfig::new(b, n, steps);
        config.epsilons = eps;
        config.threads = threads;
        let report = run_sweep(&config).map_err(|e| match e {
            rigidplast::rigid_limit::LimitError::InvalidConfig(_) => invalid(e),
            other => solver(other),
        })?;
        *slot = Box::into_raw(Box::new(RpSweep(report)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rp_sweep_len(sweep: *const RpSweep) -> usize {
    // SAFETY: null or a handle from rp_sweep_run.
    unsafe { sweep.as_ref() }.map_or(0, |s| s.0.metrics.len())
}

#[no_mangle]
pub extern "C" fn rp_sweep_metrics(
    sweep: *const RpSweep,
    index: usize,
    metrics: *mut RpSweepMetrics,
) -> RpStatus {
    guard(|| {
        // SAFETY: null or a handle from rp_sweep_run.
        let s = unsafe { sweep.as_ref() }.ok_or((RpStatus::NullPointer, "sweep is null".into()))?;
        let slot = out(metrics, "metrics")?;
        let m =
            s.0.metrics
                .get(index)
                .ok_or((RpStatus::OutOfRange, format!("entry {index}")))?;
        *slot = RpSweepMetrics {
            epsilon: m.epsilon,
            sup_e_l2: m.sup_e_l2,
            int_sigma_l2_sq: m.int_sigma_l2_sq,
            sup_sigma_dev_linf: m.sup_sigma_dev_linf,
            sup_div_u_l2: m.sup_div_u_l2,
            hydrostatic: m.hydrostatic,
            flow_gap: m.flow_gap,
            total_dissipation: m.total_dissipation,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rp_sweep_free(sweep: *mut RpSweep) {
    if !sweep.is_null() {
        // SAFETY: handle from rp_sweep_run, freed once.
        drop(unsafe { Box::from_raw(sweep) });
    }
}

/// Non-uniqueness witness for constant `f`, `g` and rigid velocity
/// `(-ω x₂ + b₁, ω x₁ + b₂)` on a fully clamped `n × n` mesh.
#[no_mangle]
pub extern "C" fn rp_example41_verify(
    c: f64,
    f: f64,
    g: f64,
    rotation: f64,
    translation: *const f64,
    lambdas: *const f64,
    n: usize,
    yield_radius: f64,
    witness: *mut RpWitness,
) -> RpStatus {
    guard(|| {
        let slot = out(witness, "witness")?;
        let b = slice(translation, 2, "translation")?;
        let l = slice(lambdas, 2, "lambdas")?;
        let params = Example41Params::new(
            c,
            PiecewiseConstant::constant(f),
            PiecewiseConstant::constant(g),
            rotation,
            [b[0], b[1]],
            l[0],
        );
        let mesh = Mesh::square(n, FaceSet::all()).map_err(invalid)?;
        let k = YieldSet::von_mises(yield_radius).map_err(invalid)?;
        let w =
            rigidplast::bench::example41_verify(&params, [l[0], l[1]], &mesh, &k).map_err(|e| {
                match e {
                    rigidplast::bench::BenchError::CheckFailed(_)
                    | rigidplast::bench::BenchError::Fem(_) => solver(e),
                    other => invalid(other),
                }
            })?;
        *slot = RpWitness {
            stress_gap: w.stress_gap,
            max_strain_rate: w.max_strain_rate,
            max_div_v: w.max_div_v,
            max_sigma_dev: [w.stresses[0].max_sigma_dev, w.stresses[1].max_sigma_dev],
            witness: w.witness,
        };
        Ok(())
    })
}

/// Certified safe-load margin of a benchmark's loads at the end of the
/// horizon. For TRACTION the peak load is `load_fraction` times the
/// constant-stress limit.
#[no_mangle]
pub extern "C" fn rp_safe_margin(
    benchmark: u32,
    n: usize,
    load_fraction: f64,
    material: RpMaterial,
    max_iters: usize,
    margin: *mut f64,
) -> RpStatus {
    guard(|| {
        let slot = out(margin, "margin")?;
        let params = BenchmarkParams {
            traction_factor: load_fraction,
            ..BenchmarkParams::default()
        };
        let b = benchmark_catalog(benchmark_id(benchmark)?, material.into(), params);
        let mesh = b.mesh(n).map_err(invalid)?;
        let k = b.material.yield_set().map_err(invalid)?;
        let (forcing, _) = b.data(&mesh, params.horizon);
        let options = SafeLoadOptions {
            max_iters,
            ..SafeLoadOptions::default()
        };
        let cert = max_safety_margin(&forcing, &mesh, &k, options).map_err(|e| match e {
            rigidplast::safeload::SafeLoadError::InvalidOptions(_) => invalid(e),
            other => solver(other),
        })?;
        *slot = cert.margin;
        Ok(())
    })
}
