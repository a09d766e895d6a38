use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use nalgebra::Vector3;
use normalflow::maps::{GridGeometry, TactileFrame};
use normalflow::se3::{so3_exp, transform_distance, RigidTransform};
use normalflow::solver::{register, SolverConfig};
use normalflow::synth::{render_frame, NoiseSpec, SceneSpec};
use normalflow_ffi::*;

fn geom() -> GridGeometry {
    GridGeometry::new(120, 160, 0.0625).unwrap()
}

fn render(pose: &RigidTransform) -> TactileFrame {
    let scene = SceneSpec::textured_sphere(6.0, 0.5, 1.8, 1.0);
    render_frame(&scene, pose, &geom(), &NoiseSpec::default()).unwrap()
}

fn motion() -> RigidTransform {
    RigidTransform::new(
        so3_exp(&Vector3::new(0.02, -0.03, 0.05)),
        Vector3::new(0.1, -0.05, 0.02),
    )
}

/// Hands a frame to the C side through its raw maps.
fn to_handle(f: &TactileFrame, with_heights: bool) -> *mut NfFrame {
    let g: Vec<f64> = f.gradients.data().iter().flat_map(|g| *g).collect();
    let m: Vec<u8> = f.mask.data().iter().map(|&b| b as u8).collect();
    let h = if with_heights {
        f.heights.data().as_ptr()
    } else {
        ptr::null()
    };
    let mut out = ptr::null_mut();
    let status = unsafe {
        nf_frame_from_gradients(
            f.geometry.height_px as u32,
            f.geometry.width_px as u32,
            f.geometry.pixel_pitch,
            g.as_ptr(),
            h,
            m.as_ptr(),
            f.timestamp,
            &mut out,
        )
    };
    assert_eq!(status, NfStatus::Ok, "{}", last_error());
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(nf_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn register_matches_library() {
    let (a, b) = (render(&RigidTransform::identity()), render(&motion()));
    let (ha, hb) = (to_handle(&a, true), to_handle(&b, true));
    let mut out = std::mem::MaybeUninit::<NfRegistration>::uninit();
    let status = unsafe { nf_register(ha, hb, ptr::null(), out.as_mut_ptr()) };
    assert_eq!(status, NfStatus::Ok, "{}", last_error());
    let out = unsafe { out.assume_init() };
    assert_eq!(last_error(), "");

    let lib = register(
        &a,
        &b,
        &RigidTransform::identity(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert_eq!(out.transform, lib.transform.to_homogeneous());
    assert_eq!(out.iterations as usize, lib.iterations);
    assert!(out.converged);
    let (angle, dist) =
        transform_distance(&RigidTransform::from_homogeneous(&out.transform), &motion());
    assert!(angle.to_degrees() < 0.05 && dist < 0.02, "{angle} {dist}");
    assert_eq!(
        unsafe { nf_frame_contact_pixels(ha) },
        a.contact_pixels() as u64
    );
    unsafe {
        nf_frame_free(ha);
        nf_frame_free(hb);
    }
}

#[test]
fn heights_are_integrated_when_omitted() {
    let f = render(&RigidTransform::identity());
    let h = to_handle(&f, false);
    assert!(unsafe { nf_frame_contact_pixels(h) } > 0);
    unsafe { nf_frame_free(h) };
}

#[test]
fn tracker_lifecycle() {
    let poses: Vec<RigidTransform> = (0..6)
        .map(|i| RigidTransform::from_rotation(so3_exp(&(Vector3::y() * 0.01 * i as f64))))
        .collect();
    let frames: Vec<*mut NfFrame> = poses.iter().map(|p| to_handle(&render(p), true)).collect();
    let mut tracker = ptr::null_mut();
    assert_eq!(
        unsafe { nf_tracker_new(frames[0], &mut tracker) },
        NfStatus::Ok
    );
    for (i, &f) in frames.iter().enumerate().skip(1) {
        let mut step = std::mem::MaybeUninit::<NfTrackStep>::uninit();
        let status = unsafe { nf_tracker_push(tracker, f, step.as_mut_ptr()) };
        assert_eq!(status, NfStatus::Ok, "{}", last_error());
        let step = unsafe { step.assume_init() };
        assert_eq!(step.frame_index, i as u64);
        assert!(!step.lost);
        let pose = RigidTransform::from_homogeneous(&step.pose);
        let (angle, _) = transform_distance(&pose, &poses[i]);
        assert!(angle.to_degrees() < 0.05);
    }
    unsafe {
        nf_tracker_free(tracker);
        frames.into_iter().for_each(|f| nf_frame_free(f));
    }
}

#[test]
fn null_arguments_are_reported() {
    let mut out = ptr::null_mut();
    let status = unsafe { nf_frame_load(ptr::null(), &mut out) };
    assert_eq!(status, NfStatus::NullPointer);
    assert_eq!(last_error(), "path is null");
    let status = unsafe { nf_register(ptr::null(), ptr::null(), ptr::null(), ptr::null_mut()) };
    assert_eq!(status, NfStatus::NullPointer);
    let status = unsafe { nf_tracker_new(ptr::null(), ptr::null_mut()) };
    assert_eq!(status, NfStatus::NullPointer);
    unsafe {
        nf_frame_free(ptr::null_mut());
        nf_tracker_free(ptr::null_mut());
    }
    assert_eq!(unsafe { nf_frame_contact_pixels(ptr::null()) }, 0);
}

#[test]
fn load_errors_carry_status_and_message() {
    let path = CString::new("/definitely/not/here.nflw").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { nf_frame_load(path.as_ptr(), &mut out) };
    assert_eq!(status, NfStatus::Io);
    assert!(out.is_null());
    assert!(last_error().contains("not/here.nflw"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.nflw");
    std::fs::write(&junk, b"not a frame").unwrap();
    let path = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { nf_frame_load(path.as_ptr(), &mut out) },
        NfStatus::Format
    );
}

#[test]
fn flat_contact_is_degenerate() {
    let g = vec![0.0; 2 * 32 * 32];
    let m = vec![1u8; 32 * 32];
    let h = vec![0.5; 32 * 32];
    let mut f = ptr::null_mut();
    let status = unsafe {
        nf_frame_from_gradients(32, 32, 0.1, g.as_ptr(), h.as_ptr(), m.as_ptr(), 0.0, &mut f)
    };
    assert_eq!(status, NfStatus::Ok);
    let mut out = std::mem::MaybeUninit::<NfRegistration>::uninit();
    let status = unsafe { nf_register(f, f, ptr::null(), out.as_mut_ptr()) };
    assert_eq!(status, NfStatus::Degenerate);
    assert!(last_error().contains("degenerate"));
    unsafe { nf_frame_free(f) };
}

#[test]
fn bad_geometry_is_invalid_argument() {
    let g = [0.0; 2];
    let m = [1u8];
    let mut f = ptr::null_mut();
    let status = unsafe {
        nf_frame_from_gradients(1, 1, -1.0, g.as_ptr(), ptr::null(), m.as_ptr(), 0.0, &mut f)
    };
    assert_eq!(status, NfStatus::InvalidArgument);
    assert!(f.is_null());
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(nf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/normalflow.h");
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn header_declares_every_export() {
    let h = header();
    for name in [
        "nf_frame_load(",
        "nf_frame_from_gradients(",
        "nf_frame_free(",
        "nf_frame_contact_pixels(",
        "nf_register(",
        "nf_tracker_new(",
        "nf_tracker_push(",
        "nf_tracker_free(",
        "nf_last_error_message(",
        "nf_version(",
        "NF_STATUS_DEGENERATE = 6",
        "typedef struct NfFrame NfFrame;",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(probe) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !probe.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"normalflow.h\"\nint main(void) { NfStatus s = NF_STATUS_OK; return (int)s; }\n",
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
