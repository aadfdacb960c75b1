use std::ffi::{c_void, CStr, CString};
use std::process::Command;
use std::ptr;

use feec_sl_ffi::*;

unsafe extern "C" fn rotation(x: f64, y: f64, out: *mut f64, user: *mut c_void) {
    let scale = *(user as *const f64);
    *out = -y * scale;
    *out.add(1) = x * scale;
}

unsafe extern "C" fn taylor_green(x: f64, y: f64, out: *mut f64, _: *mut c_void) {
    use std::f64::consts::PI;
    *out = (PI * x).cos() * (PI * y).sin();
    *out.add(1) = -(PI * x).sin() * (PI * y).cos();
}

fn config(order: u32, conservative: bool) -> FeecConfig {
    FeecConfig {
        order,
        tau: 0.01,
        t_final: 0.05,
        eps: 0.0,
        conservative: conservative as u32,
    }
}

fn last_error() -> String {
    let p = feec_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mesh_lifecycle() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(feec_mesh_structured(4, -0.5, 0.5, -0.5, 0.5, &mut mesh), FeecStatus::Ok);
        let (mut v, mut e, mut t) = (0usize, 0usize, 0usize);
        assert_eq!(feec_mesh_counts(mesh, &mut v, &mut e, &mut t), FeecStatus::Ok);
        assert_eq!((v, t), (25, 32));
        assert_eq!(v + t, e + 1);
        assert_eq!(feec_mesh_counts(mesh, ptr::null_mut(), ptr::null_mut(), &mut t), FeecStatus::Ok);
        feec_mesh_free(mesh);
        feec_mesh_free(ptr::null_mut());
    }
}

#[test]
fn argument_errors() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(feec_mesh_structured(0, 0.0, 1.0, 0.0, 1.0, &mut mesh), FeecStatus::InvalidArgument);
        assert!(mesh.is_null());
        assert_eq!(feec_mesh_disk(2, 1.0, ptr::null_mut()), FeecStatus::NullPointer);
        assert!(last_error().contains("out"));
        assert_eq!(feec_mesh_counts(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), FeecStatus::NullPointer);

        let missing = CString::new("/nonexistent/mesh.txt").unwrap();
        assert_eq!(feec_mesh_load(missing.as_ptr(), &mut mesh), FeecStatus::Io);

        assert_eq!(feec_mesh_disk(2, 1.0, &mut mesh), FeecStatus::Ok);
        let mut sim = ptr::null_mut();
        assert_eq!(
            feec_simulation_new(mesh, config(3, false), Some(taylor_green), ptr::null_mut(), &mut sim),
            FeecStatus::InvalidArgument
        );
        assert!(last_error().contains("order"));
        let mut bad = config(1, false);
        bad.tau = -1.0;
        assert_eq!(
            feec_simulation_new(mesh, bad, Some(taylor_green), ptr::null_mut(), &mut sim),
            FeecStatus::InvalidArgument
        );
        assert_eq!(
            feec_simulation_new(mesh, config(1, false), None, ptr::null_mut(), &mut sim),
            FeecStatus::NullPointer
        );
        assert!(sim.is_null());
        feec_mesh_free(mesh);
    }
}

#[test]
fn conservative_rotation_on_disk() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(feec_mesh_disk(4, 1.0, &mut mesh), FeecStatus::Ok);
        let mut scale = 0.5f64;
        let mut sim = ptr::null_mut();
        let status = feec_simulation_new(
            mesh,
            config(2, true),
            Some(rotation),
            &mut scale as *mut f64 as *mut c_void,
            &mut sim,
        );
        assert_eq!(status, FeecStatus::Ok);
        feec_mesh_free(mesh);

        let (mut t, mut e0) = (f64::NAN, f64::NAN);
        assert_eq!(feec_simulation_state(sim, &mut t, &mut e0), FeecStatus::Ok);
        assert_eq!(t, 0.0);
        assert!(e0 > 0.0);
        let mut info = FeecStepInfo::default();
        for k in 1..=3 {
            assert_eq!(feec_simulation_step(sim, &mut info), FeecStatus::Ok);
            assert_eq!(info.step, k);
            assert!(info.divergence_residual <= 1e-10);
            assert!((info.energy - e0).abs() <= 1e-10 * e0);
        }
        let mut e = 0.0;
        assert_eq!(feec_simulation_state(sim, &mut t, &mut e), FeecStatus::Ok);
        assert!((t - 0.03).abs() < 1e-12);

        let mut u = [0.0f64; 2];
        assert_eq!(feec_simulation_velocity(sim, 0.3, 0.1, u.as_mut_ptr()), FeecStatus::Ok);
        assert!(u[0] < 0.0 && u[1] > 0.0);
        assert_eq!(feec_simulation_velocity(sim, 2.0, 0.0, u.as_mut_ptr()), FeecStatus::OutsideDomain);
        assert_eq!(feec_simulation_velocity(sim, 0.0, 0.0, ptr::null_mut()), FeecStatus::NullPointer);
        feec_simulation_free(sim);
    }
}

#[test]
fn header_matches_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/feec_sl.h")).unwrap();
    for symbol in [
        "feec_last_error_message",
        "feec_mesh_structured",
        "feec_mesh_disk",
        "feec_mesh_load",
        "feec_mesh_counts",
        "feec_mesh_free",
        "feec_simulation_new",
        "feec_simulation_step",
        "feec_simulation_state",
        "feec_simulation_velocity",
        "feec_simulation_free",
        "typedef struct FeecMesh FeecMesh",
        "FEEC_STATUS_OUTSIDE_DOMAIN = 4",
    ] {
        assert!(header.contains(symbol), "missing {symbol}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include/feec_sl.h"))
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
