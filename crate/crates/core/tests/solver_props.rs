use std::time::Instant;

use nalgebra::Vector3;
use normalflow::icp::{frame_to_cloud, icp_point_to_plane, register_icp, IcpConfig};
use normalflow::maps::{GridGeometry, TactileFrame};
use normalflow::se3::{params_to_transform, transform_distance, PoseParams, RigidTransform};
use normalflow::solver::*;
use normalflow::synth::{render_frame, NoiseSpec, SceneSpec};
use proptest::prelude::*;

fn scene() -> SceneSpec {
    SceneSpec::textured_sphere(6.0, 0.5, 1.8, 1.0)
}

fn render(pose: &RigidTransform) -> TactileFrame {
    render_frame(
        &scene(),
        pose,
        &GridGeometry::default(),
        &NoiseSpec::default(),
    )
    .unwrap()
}

fn pose_strategy() -> impl Strategy<Value = PoseParams> {
    let t = || -0.3..0.3f64;
    let r = || (-6.0..6.0f64).prop_map(f64::to_radians);
    (t(), t(), t(), r(), r(), r()).prop_map(|(x, y, z, a, b, c)| PoseParams::new(x, y, z, a, b, c))
}

#[test]
fn recovers_reference_example() {
    let p = PoseParams::new(
        0.3,
        -0.2,
        0.05,
        3f64.to_radians(),
        -2f64.to_radians(),
        10f64.to_radians(),
    );
    let reference = render(&RigidTransform::identity());
    let target = render(&params_to_transform(&p));
    let r = register(
        &reference,
        &target,
        &RigidTransform::identity(),
        &SolverConfig::default(),
    )
    .unwrap();
    let got = r.params.unwrap().as_array();
    for (k, (a, b)) in got.iter().zip(p.as_array()).enumerate() {
        let (err, tol) = if k < 3 {
            ((a - b).abs(), 0.02)
        } else {
            ((a - b).abs().to_degrees(), 0.05)
        };
        assert!(err < tol, "axis {k}: {err}");
    }
}

#[test]
fn z_translation_is_recovered() {
    let truth = RigidTransform::from_translation(Vector3::new(0.1, 0.05, -0.08));
    let reference = render(&RigidTransform::identity());
    let target = render(&truth);
    let r = register(
        &reference,
        &target,
        &RigidTransform::identity(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(
        (r.transform.translation.z + 0.08).abs() < 0.01,
        "{}",
        r.transform.translation.z
    );
}

/// Two equal disks of radius `r` at distance `d` share this fraction of area.
fn disk_overlap(r: f64, d: f64) -> f64 {
    let lens = 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt();
    lens / (std::f64::consts::PI * r * r)
}

#[test]
fn shared_region_matches_disk_intersection() {
    let smooth = SceneSpec::textured_sphere(6.0, 0.0, 1.0, 1.0);
    let geom = GridGeometry::default();
    let radius = (2.0 * 6.0 - 1.0f64).sqrt();
    let d = 0.808 * radius;
    let expected = disk_overlap(radius, d);
    assert!((expected - 0.5).abs() < 0.01);
    let shift = RigidTransform::from_translation(Vector3::new(d, 0.0, 0.0));
    let a = render_frame(
        &smooth,
        &RigidTransform::identity(),
        &geom,
        &NoiseSpec::default(),
    )
    .unwrap();
    let b = render_frame(&smooth, &shift, &geom, &NoiseSpec::default()).unwrap();
    let cfg = SolverConfig::default();
    let shared = shared_contact(&a, &b, &RigidTransform::identity(), &cfg).unwrap();
    let fraction = shared.len() as f64 / cfg.subsample_n as f64;
    assert!(
        (fraction - expected).abs() <= 0.1 * expected,
        "{fraction} vs {expected}"
    );
}

#[test]
fn disjoint_contact_is_insufficient_overlap() {
    let a = render(&RigidTransform::identity());
    let far = RigidTransform::from_translation(Vector3::new(9.0, 0.0, 0.0));
    let r = register(&a, &a, &far, &SolverConfig::default());
    assert!(
        matches!(r, Err(normalflow::Error::InsufficientOverlap { .. })),
        "{r:?}"
    );
}

#[test]
fn flat_plane_is_degenerate() {
    let plane = SceneSpec::flat_plane(0.5);
    let geom = GridGeometry::default();
    let f = render_frame(
        &plane,
        &RigidTransform::identity(),
        &geom,
        &NoiseSpec::default(),
    )
    .unwrap();
    let r = register(
        &f,
        &f,
        &RigidTransform::identity(),
        &SolverConfig::default(),
    );
    assert!(
        matches!(r, Err(normalflow::Error::DegenerateHessian { .. })),
        "{r:?}"
    );
}

#[test]
fn forward_additive_is_slower() {
    let p = PoseParams::new(
        0.1,
        -0.1,
        0.0,
        2f64.to_radians(),
        -1f64.to_radians(),
        4f64.to_radians(),
    );
    let reference = render(&RigidTransform::identity());
    let target = render(&params_to_transform(&p));
    let cfg = SolverConfig::default();
    let init = RigidTransform::identity();
    let median = |f: &dyn Fn()| {
        let mut t: Vec<f64> = (0..50)
            .map(|_| {
                let s = Instant::now();
                f();
                s.elapsed().as_secs_f64()
            })
            .collect();
        t.sort_by(f64::total_cmp);
        t[25]
    };
    let ic = median(&|| {
        register(&reference, &target, &init, &cfg).unwrap();
    });
    let fa = median(&|| {
        register_forward_additive(&reference, &target, &init, &cfg).unwrap();
    });
    assert!(fa > ic, "forward {fa} s, inverse compositional {ic} s");
}

/// Every step of the descent decreases the cost. Once it has bottomed out,
/// interpolation kinks leave only relative jitter far below any overshoot.
#[test]
fn cost_decreases_until_the_floor() {
    let reference = render(&RigidTransform::identity());
    let cfg = SolverConfig::default();
    let (mut steps, mut rises) = (0, 0);
    for k in 0..10 {
        let s = k as f64 - 4.5;
        let p = PoseParams::new(
            0.04 * s,
            -0.03 * s,
            0.01 * s,
            (0.8 * s).to_radians(),
            (-0.6 * s).to_radians(),
            (1.5 * s).to_radians(),
        );
        let target = render(&params_to_transform(&p));
        let r = register(&reference, &target, &RigidTransform::identity(), &cfg).unwrap();
        let floor = r.cost_history.iter().copied().fold(f64::INFINITY, f64::min);
        for w in r.cost_history.windows(2) {
            steps += 1;
            if w[0] > 10.0 * floor {
                rises += (w[1] >= w[0]) as usize;
            } else {
                assert!(w[1] <= w[0] * (1.0 + 1e-5), "{:?}", r.cost_history);
            }
        }
    }
    assert!(
        rises as f64 <= 0.05 * steps as f64,
        "{rises} of {steps} descent steps increased the cost"
    );
    assert_eq!(rises, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn round_trip_registration_is_identity(p in pose_strategy()) {
        let truth = params_to_transform(&p);
        let (a, b) = (render(&RigidTransform::identity()), render(&truth));
        let cfg = SolverConfig::default();
        let forward = register(&a, &b, &RigidTransform::identity(), &cfg).unwrap();
        let backward = register(&b, &a, &RigidTransform::identity(), &cfg).unwrap();
        let (angle, dist) = transform_distance(&forward.transform.compose(&backward.transform), &RigidTransform::identity());
        prop_assert!(angle.to_degrees() < 0.02 && dist < 0.01, "{} deg {} mm", angle.to_degrees(), dist);
    }

    #[test]
    fn registration_is_deterministic(p in pose_strategy(), seed in any::<u64>()) {
        let (a, b) = (render(&RigidTransform::identity()), render(&params_to_transform(&p)));
        let cfg = SolverConfig { rng_seed: seed, ..SolverConfig::default() };
        let first = register(&a, &b, &RigidTransform::identity(), &cfg).unwrap();
        let second = register(&a, &b, &RigidTransform::identity(), &cfg).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn jacobian_z_column_is_zero(p in pose_strategy()) {
        let f = render(&params_to_transform(&p));
        let cfg = SolverConfig::default();
        let pixels = subsample_contact(&f, &cfg);
        let (jacobians, hessian) = build_jacobian(&f, &pixels, &cfg);
        prop_assert!(jacobians.iter().all(|j| j.column(2).iter().all(|&v| v == 0.0)));
        prop_assert!(hessian.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn icp_is_deterministic_and_fixes_identical_clouds(p in pose_strategy()) {
        let f = render(&params_to_transform(&p));
        let cloud = frame_to_cloud(&f).unwrap().subsample(2000, 1);
        let r = icp_point_to_plane(&cloud, &cloud, &RigidTransform::identity(), &IcpConfig::default()).unwrap();
        let (angle, dist) = transform_distance(&r.transform, &RigidTransform::identity());
        prop_assert!(angle < 1e-9 && dist < 1e-9);
        let g = render(&RigidTransform::identity());
        let once = register_icp(&g, &f, &RigidTransform::identity(), 2000, 4, &IcpConfig::default());
        let twice = register_icp(&g, &f, &RigidTransform::identity(), 2000, 4, &IcpConfig::default());
        prop_assert_eq!(format!("{once:?}"), format!("{twice:?}"));
    }
}
