use std::f64::consts::PI;

use nalgebra::Vector3;
use normalflow::maps::container::{read_frame, write_frame};
use normalflow::maps::*;
use normalflow::se3::RigidTransform;
use normalflow::synth::{render_frame, render_sequence, NoiseSpec, SceneSpec, TrajectorySpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rmse(
    a: &HeightMap,
    b: impl Fn(usize, usize) -> f64,
    keep: impl Fn(usize, usize) -> bool,
) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if keep(i, j) {
                sum += (a.get(i, j) - b(i, j)).powi(2);
                n += 1;
            }
        }
    }
    (sum / n as f64).sqrt()
}

/// `A cos(pi u / W) cos(pi v / H)`, zero on the outer ring of pixel centers.
fn dome(geom: &GridGeometry, amplitude: f64) -> (GradientMap, impl Fn(usize, usize) -> f64 + '_) {
    let w = (geom.width_px - 1) as f64 * geom.pixel_pitch;
    let h = (geom.height_px - 1) as f64 * geom.pixel_pitch;
    let (ku, kv) = (PI / w, PI / h);
    let g = Grid::from_fn(geom.height_px, geom.width_px, |i, j| {
        let (u, v) = geom.pixel_to_mm(i, j);
        [
            -amplitude * ku * (ku * u).sin() * (kv * v).cos(),
            -amplitude * kv * (ku * u).cos() * (kv * v).sin(),
        ]
    });
    let z = move |i, j| {
        let (u, v) = geom.pixel_to_mm(i, j);
        amplitude * (ku * u).cos() * (kv * v).cos()
    };
    (g, z)
}

#[test]
fn dome_round_trip() {
    let geom = GridGeometry::default();
    for amplitude in [0.1, 1.0, 3.0] {
        let (g, truth) = dome(&geom, amplitude);
        let z = poisson_integrate(&g, &geom);
        let err = rmse(&z, &truth, |_, _| true);
        assert!(err < 1e-3 * amplitude, "amplitude {amplitude}: rmse {err}");
    }
}

#[test]
fn border_mismatch_distorts_edges() {
    // A tilted plane does not vanish on the border; the zero boundary bends it.
    let geom = GridGeometry::new(96, 128, 0.1).unwrap();
    let g = Grid::filled(96, 128, [0.05, -0.02]);
    let z = poisson_integrate(&g, &geom);
    let truth = |i, j| {
        let (u, v) = geom.pixel_to_mm(i, j);
        0.05 * u - 0.02 * v
    };
    let full = rmse(&z, truth, |_, _| true);
    let offset_free = |i: usize, j: usize| (20..76).contains(&i) && (20..108).contains(&j);
    // Compare shapes up to a constant in the interior.
    let mean: f64 = {
        let (mut s, mut n) = (0.0, 0);
        for i in 20..76 {
            for j in 20..108 {
                s += z.get(i, j) - truth(i, j);
                n += 1;
            }
        }
        s / n as f64
    };
    let interior = rmse(&z, |i, j| truth(i, j) + mean, offset_free);
    assert!(full > interior, "full {full} interior {interior}");
}

fn random_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> GradientMap {
    Grid::from_fn(rows, cols, |_, _| {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    })
}

#[test]
fn poisson_is_linear() {
    let geom = GridGeometry::new(48, 64, 0.0625).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let (g1, g2) = (
            random_field(&mut rng, 48, 64),
            random_field(&mut rng, 48, 64),
        );
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let mix = Grid::from_fn(48, 64, |i, j| {
            let (p, q) = (g1.get(i, j), g2.get(i, j));
            [a * p[0] + b * q[0], a * p[1] + b * q[1]]
        });
        let (z1, z2) = (poisson_integrate(&g1, &geom), poisson_integrate(&g2, &geom));
        let z = poisson_integrate(&mix, &geom);
        for k in 0..z.data().len() {
            let want = a * z1.data()[k] + b * z2.data()[k];
            assert!((z.data()[k] - want).abs() < 1e-9);
        }
    }
}

fn frame_strategy() -> impl Strategy<Value = TactileFrame> {
    (any::<u64>(), 0.0..1.0f64).prop_map(|(seed, fill)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, cols) = (32, 48);
        let g = random_field(&mut rng, rows, cols);
        let h = Grid::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0));
        let m = Grid::from_fn(rows, cols, |_, _| rng.random_bool(fill));
        TactileFrame::new(GridGeometry::new(rows, cols, 0.1).unwrap(), g, h, m, 0.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normals_are_unit_and_face_the_sensor(gu in -50.0..50.0f64, gv in -50.0..50.0f64) {
        let n = gradient_to_normal([gu, gv]);
        prop_assert!((n.norm() - 1.0).abs() < 1e-6);
        prop_assert!(n.z < 0.0);
    }

    #[test]
    fn halving_twice_is_quartering(f in frame_strategy()) {
        let twice = downsample_frame(&downsample_frame(&f, 2).unwrap(), 2).unwrap();
        let once = downsample_frame(&f, 4).unwrap();
        prop_assert_eq!(twice.gradients.data(), once.gradients.data());
        prop_assert_eq!(twice.heights.data(), once.heights.data());
        prop_assert_eq!(twice.mask.data(), once.mask.data());
        prop_assert_eq!(once.geometry.pixel_pitch, 0.4);
    }

    #[test]
    fn sampling_at_nodes_is_exact(f in frame_strategy(), i in 0usize..32, j in 0usize..48) {
        let (u, v) = f.geometry.pixel_to_mm(i, j);
        prop_assert_eq!(f.heights.sample_bilinear(&f.geometry, u, v).unwrap(), *f.heights.get(i, j));
        prop_assert_eq!(f.normals.sample_bilinear(&f.geometry, u, v).unwrap(), *f.normals.get(i, j));
        prop_assert_eq!(f.mask.sample_bilinear(&f.geometry, u, v).unwrap(), *f.mask.get(i, j));
    }

    #[test]
    fn sampled_normals_stay_unit(f in frame_strategy(), u in -2.3..2.3f64, v in -1.5..1.5f64) {
        let n = f.normals.sample_bilinear(&f.geometry, u, v).unwrap();
        prop_assert!((n.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn container_round_trip(f in frame_strategy()) {
        // The container stores f32; values already representable survive exactly.
        let f32_frame = TactileFrame::new(
            f.geometry,
            f.gradients.map(|g| [g[0] as f32 as f64, g[1] as f32 as f64]),
            f.heights.map(|&h| h as f32 as f64),
            f.mask.clone(),
            f.timestamp,
        ).unwrap();
        let mut buf = Vec::new();
        write_frame(&mut buf, &f32_frame).unwrap();
        prop_assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), f32_frame);
    }
}

#[test]
fn contact_covers_analytic_disk() {
    // Untextured sphere of radius R pressed d deep: contact disk radius sqrt(2Rd - d^2).
    let (radius, depth) = (6.0, 1.0);
    let geom = GridGeometry::default();
    let scene = SceneSpec::textured_sphere(radius, 0.0, 1.0, depth);
    let f = render_frame(
        &scene,
        &RigidTransform::identity(),
        &geom,
        &NoiseSpec::default(),
    )
    .unwrap();
    let mask = contact_mask_from_height(&f.heights, 0.05);
    let disk = (2.0 * radius * depth - depth * depth).sqrt();
    let (mut inside, mut covered) = (0usize, 0usize);
    for i in 0..geom.height_px {
        for j in 0..geom.width_px {
            let (u, v) = geom.pixel_to_mm(i, j);
            let in_disk = u.hypot(v) < disk;
            if *mask.get(i, j) {
                assert!(in_disk, "mask pixel ({i}, {j}) outside the disk");
            }
            inside += in_disk as usize;
            covered += (in_disk && *mask.get(i, j)) as usize;
        }
    }
    assert!(
        covered as f64 >= 0.9 * inside as f64,
        "{covered} of {inside}"
    );
}

/// The contact rim is a slope discontinuity, so the discretization error
/// concentrates there: the grid-wide RMSE meets 1e-3 mm at the default pitch,
/// the on-contact RMSE once the pitch is halved.
#[test]
fn analytic_heights_match_integrated_gradients() {
    let scene = SceneSpec::textured_sphere(6.0, 0.5, 1.8, 1.0);
    let coarse = GridGeometry::default();
    let fine = GridGeometry::new(480, 640, 0.03125).unwrap();
    for (geom, on_contact) in [(coarse, false), (fine, true)] {
        let f = render_frame(
            &scene,
            &RigidTransform::identity(),
            &geom,
            &NoiseSpec::default(),
        )
        .unwrap();
        let z = poisson_integrate(&f.gradients, &geom);
        let err = rmse(
            &z,
            |i, j| *f.heights.get(i, j),
            |i, j| !on_contact || *f.mask.get(i, j),
        );
        assert!(err < 1e-3, "pitch {}: rmse {err} mm", geom.pixel_pitch);
    }
}

#[test]
fn sequences_survive_the_container() {
    let scene = SceneSpec::textured_sphere(6.0, 0.5, 1.8, 1.0);
    let geom = GridGeometry::new(120, 160, 0.0625).unwrap();
    let traj = TrajectorySpec::roll(Vector3::y(), 5.0, 5, scene.pivot()).unwrap();
    let noise = NoiseSpec {
        gradient_sigma: 0.01,
        heights_from_noisy_poisson: true,
        rng_seed: 3,
    };
    let seq = render_sequence(&scene, &traj, &geom, &noise).unwrap();
    assert_eq!(seq.frames.len(), 6);
    assert_eq!(seq.ground_truth[0], RigidTransform::identity());
    for f in &seq.frames {
        let mut buf = Vec::new();
        write_frame(&mut buf, f).unwrap();
        assert_eq!(&read_frame(&mut buf.as_slice()).unwrap(), f);
    }
    let again = render_sequence(&scene, &traj, &geom, &noise).unwrap();
    assert_eq!(again.frames, seq.frames);
}

#[test]
fn roll_ground_truth_steps_one_degree() {
    let scene = SceneSpec::textured_sphere(6.0, 0.5, 1.8, 1.0);
    let traj = TrajectorySpec::roll(Vector3::y(), 360.0, 360, scene.pivot()).unwrap();
    assert_eq!(traj.len(), 361);
    for i in 1..traj.len() {
        let step = traj
            .relative_to_first(i)
            .compose(&traj.relative_to_first(i - 1).inverse());
        let (angle, _) = normalflow::se3::transform_distance(&step, &RigidTransform::identity());
        assert!((angle.to_degrees() - 1.0).abs() < 1e-9);
    }
}
