use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use rigidplast_ffi::*;

const UNIT: RpMaterial = RpMaterial {
    shear_modulus: 1.0,
    bulk_modulus: 1.0,
    yield_radius: 1.0,
};

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = rp_last_error(buf.as_mut_ptr().cast(), buf.len());
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(rp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn mesh_handle_lifecycle() {
    let mut m = ptr::null_mut();
    assert_eq!(rp_mesh_new(4, 0b1111, &mut m), RpStatus::Ok);
    assert_eq!((rp_mesh_num_nodes(m), rp_mesh_num_elements(m)), (25, 32));
    rp_mesh_free(m);
    assert_eq!(rp_mesh_new(0, 1, &mut m), RpStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(rp_mesh_new(4, 0, &mut m), RpStatus::InvalidArgument);
    assert_eq!(rp_mesh_new(4, 1, ptr::null_mut()), RpStatus::NullPointer);
    assert_eq!(rp_mesh_num_nodes(ptr::null()), 0);
    rp_mesh_free(ptr::null_mut());
}

#[test]
fn radial_return_through_the_abi() {
    let e = [0.0, 2.0, 0.0];
    let p = [0.0; 3];
    let (mut pn, mut s) = ([0.0; 3], [0.0; 3]);
    assert_eq!(
        rp_radial_return(
            2,
            e.as_ptr(),
            p.as_ptr(),
            UNIT,
            1.0,
            pn.as_mut_ptr(),
            s.as_mut_ptr()
        ),
        RpStatus::Ok
    );
    // trial 2μ·e has norm 4√2; returned stress sits on the unit sphere.
    let norm = (s[0] * s[0] + 2.0 * s[1] * s[1] + s[2] * s[2]).sqrt();
    assert!((norm - 1.0).abs() < 1e-14);
    assert!((pn[1] - (4.0 * 2f64.sqrt() - 1.0) / 2.0 / 2f64.sqrt()).abs() < 1e-14);
    let bad = [1.0, 0.0, 0.0];
    assert_eq!(
        rp_radial_return(
            2,
            bad.as_ptr(),
            p.as_ptr(),
            UNIT,
            1.0,
            pn.as_mut_ptr(),
            s.as_mut_ptr()
        ),
        RpStatus::InvalidArgument
    );
    assert_eq!(
        rp_radial_return(
            4,
            e.as_ptr(),
            p.as_ptr(),
            UNIT,
            1.0,
            pn.as_mut_ptr(),
            s.as_mut_ptr()
        ),
        RpStatus::InvalidArgument
    );
    assert_eq!(
        rp_radial_return(
            2,
            ptr::null(),
            p.as_ptr(),
            UNIT,
            1.0,
            pn.as_mut_ptr(),
            s.as_mut_ptr()
        ),
        RpStatus::NullPointer
    );
}

#[test]
fn evolution_and_sweep_handles() {
    let mut ev = ptr::null_mut();
    assert_eq!(
        rp_evolution_run(RpBenchmark::Shear as u32, 2, 8, 1.0, UNIT, &mut ev),
        RpStatus::Ok
    );
    assert_eq!(rp_evolution_num_rows(ev), 9);
    let mut row = RpLedgerRow::default();
    assert_eq!(rp_evolution_row(ev, 8, &mut row), RpStatus::Ok);
    assert!((row.time - 1.0).abs() < 1e-15 && row.d > 0.0);
    assert_eq!(rp_evolution_row(ev, 9, &mut row), RpStatus::OutOfRange);
    rp_evolution_free(ev);
    assert_eq!(
        rp_evolution_run(7, 2, 8, 1.0, UNIT, &mut ev),
        RpStatus::InvalidArgument
    );

    let eps = [1.0, 0.25, 0.0625];
    let mut sw = ptr::null_mut();
    assert_eq!(
        rp_sweep_run(
            RpBenchmark::Shear as u32,
            2,
            8,
            eps.as_ptr(),
            3,
            UNIT,
            2,
            &mut sw
        ),
        RpStatus::Ok
    );
    assert_eq!(rp_sweep_len(sw), 3);
    let mut m = RpSweepMetrics::default();
    assert_eq!(rp_sweep_metrics(sw, 2, &mut m), RpStatus::Ok);
    assert_eq!(m.epsilon, 0.0625);
    assert!(m.sup_sigma_dev_linf <= 1.0 + 1e-12);
    rp_sweep_free(sw);
    let up = [0.5, 1.0];
    assert_eq!(
        rp_sweep_run(0, 2, 8, up.as_ptr(), 2, UNIT, 1, &mut sw),
        RpStatus::InvalidArgument
    );
}

#[test]
fn witness_and_safe_margin() {
    let b = [0.1, -0.2];
    let l = [2.0, -2.0];
    let mut w = RpWitness::default();
    assert_eq!(
        rp_example41_verify(0.3, 0.0, 0.0, 0.5, b.as_ptr(), l.as_ptr(), 4, 1.0, &mut w),
        RpStatus::Ok
    );
    assert!(w.witness && w.stress_gap > 0.0);
    let l3 = [3.0, -2.0];
    assert_eq!(
        rp_example41_verify(0.3, 0.0, 0.0, 0.5, b.as_ptr(), l3.as_ptr(), 4, 1.0, &mut w),
        RpStatus::InvalidArgument
    );

    let mut c = 0.0;
    assert_eq!(
        rp_safe_margin(RpBenchmark::Traction as u32, 3, 0.5, UNIT, 5000, &mut c),
        RpStatus::Ok
    );
    assert!(c > 0.0 && c <= 0.5 + 1e-9);
    assert_eq!(
        rp_safe_margin(RpBenchmark::Traction as u32, 3, 1.5, UNIT, 5000, &mut c),
        RpStatus::Ok
    );
    assert!(c <= 0.0);
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rigidplast.h"))
            .unwrap();
    for f in [
        "rp_version",
        "rp_last_error",
        "rp_mesh_new",
        "rp_mesh_free",
        "rp_radial_return",
        "rp_evolution_run",
        "rp_evolution_row",
        "rp_evolution_free",
        "rp_sweep_run",
        "rp_sweep_metrics",
        "rp_sweep_free",
        "rp_example41_verify",
        "rp_safe_margin",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("RP_STATUS_SOLVER_FAILURE = 3"));
}

/// Compiles and runs a C client against the static library when a C
/// compiler is available.
#[test]
fn c_client_links() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let target = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = target.join("librigidplast_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("client.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "rigidplast.h"
int main(void) {
    RpMaterial m = {1.0, 1.0, 1.0};
    double e[3] = {0.0, 2.0, 0.0}, p[3] = {0.0, 0.0, 0.0}, pn[3], s[3];
    if (rp_radial_return(2, e, p, m, 1.0, pn, s) != RP_STATUS_OK) return 1;
    RpMesh *mesh = NULL;
    if (rp_mesh_new(0, 1, &mesh) != RP_STATUS_INVALID_ARGUMENT) return 2;
    char buf[128];
    if (rp_last_error(buf, sizeof buf) == 0) return 3;
    printf("%s %.6f\n", rp_version(), s[1]);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("client");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{run:?}");
    assert!(String::from_utf8(run.stdout)
        .unwrap()
        .starts_with(env!("CARGO_PKG_VERSION")));
}

fn which(name: &str) -> Result<String, ()> {
    std::env::var_os("PATH")
        .and_then(|paths| {
            std::env::split_paths(&paths)
                .map(|p| p.join(name))
                .find(|p| p.is_file())
        })
        .map(|p| p.display().to_string())
        .ok_or(())
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rigidplast-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
