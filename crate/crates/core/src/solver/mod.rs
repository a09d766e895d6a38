//! Normal-map registration by inverse-compositional Gauss-Newton.
//!
//! The reference frame's normals `I` and the target's `I'` are related by a
//! rigid transform `T = (R, t)`: a reference pixel with surface point
//! `q = (u, v, z(u, v))` lands at `W = P (R q + t)` in the target, where its
//! normal reads `R I(u, v)`. The solver minimizes
//! `sum |R^-1 I'(W) - I|^2` over the shared contact region. The Jacobian is
//! taken on the reference side, so it and the Hessian are built once; each
//! iteration only re-warps and re-samples the target. The projection `P`
//! removes any dependence on the z-translation, which is recovered
//! afterwards from the height maps.

mod forward;

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{BilinearSample, GridGeometry, HeightMap, OutOfBounds, Stencil, TactileFrame};
use crate::se3::{so3_exp, transform_to_params, PoseParams, RigidTransform};

pub use forward::{register_forward_additive, ForwardAdditive};

pub type Matrix3x6 = SMatrix<f64, 3, 6>;
type Matrix5 = SMatrix<f64, 5, 5>;
type Vector5 = SVector<f64, 5>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Threshold on the Euclidean norm of the update, radians and
    /// millimeters weighted equally.
    pub step_tolerance: f64,
    pub subsample_n: usize,
    pub rng_seed: u64,
    /// Treat the reference surface as flat (`z = 0`) when warping.
    pub zero_height_mode: bool,
    pub min_shared_pixels: usize,
    pub condition_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 50,
            step_tolerance: 1e-6,
            subsample_n: 5000,
            rng_seed: 0,
            zero_height_mode: false,
            min_shared_pixels: 100,
            condition_limit: 1e8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.subsample_n < self.min_shared_pixels {
            return Err(Error::Config(format!(
                "subsample_n ({}) must be >= min_shared_pixels ({})",
                self.subsample_n, self.min_shared_pixels
            )));
        }
        if !(self.step_tolerance >= 0.0) || !(self.condition_limit > 1.0) {
            return Err(Error::Config(
                "step_tolerance must be >= 0 and condition_limit > 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Reference frame to target frame.
    pub transform: RigidTransform,
    /// `None` only when the rotation sits at z-x-y gimbal lock.
    pub params: Option<PoseParams>,
    pub iterations: usize,
    /// Mean squared residual over the final shared region.
    pub final_cost: f64,
    pub shared_pixels: usize,
    pub hessian_condition: f64,
    pub converged: bool,
    /// Cost at each iterate, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

impl RegistrationResult {
    pub(crate) fn new(
        transform: RigidTransform,
        iterations: usize,
        final_cost: f64,
        shared_pixels: usize,
        hessian_condition: f64,
        converged: bool,
        cost_history: Vec<f64>,
    ) -> Self {
        RegistrationResult {
            params: transform_to_params(&transform).ok(),
            transform,
            iterations,
            final_cost,
            shared_pixels,
            hessian_condition,
            converged,
            cost_history,
        }
    }
}

/// Projects the transformed surface point onto the target's image plane.
#[inline]
fn project(t: &RigidTransform, q: &Vector3<f64>) -> (f64, f64) {
    let p = t.rotation * q + t.translation;
    (p.x, p.y)
}

/// The surface point `q = (u, v, z)` of reference pixel `k`.
#[inline]
fn surface_point(frame: &TactileFrame, k: usize, zero_height: bool) -> Vector3<f64> {
    let cols = frame.geometry.width_px;
    let (u, v) = frame.geometry.pixel_to_mm(k / cols, k % cols);
    let z = if zero_height {
        0.0
    } else {
        frame.heights.data()[k]
    };
    Vector3::new(u, v, z)
}

/// Maps reference pixel `(u, v)` into target coordinates.
pub fn warp(
    u: f64,
    v: f64,
    z_ref: &HeightMap,
    geom: &GridGeometry,
    t: &RigidTransform,
    zero_height: bool,
) -> Result<(f64, f64), OutOfBounds> {
    let z = if zero_height {
        0.0
    } else {
        z_ref.sample_bilinear(geom, u, v)?
    };
    Ok(project(t, &Vector3::new(u, v, z)))
}

/// Seeded draw of up to `subsample_n` reference contact pixels, in
/// row-major order.
pub fn subsample_contact(frame: &TactileFrame, cfg: &SolverConfig) -> Vec<usize> {
    let contact: Vec<usize> = frame
        .mask
        .data()
        .iter()
        .enumerate()
        .filter_map(|(k, &m)| m.then_some(k))
        .collect();
    if contact.len() <= cfg.subsample_n {
        return contact;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, contact.len(), cfg.subsample_n)
        .into_iter()
        .map(|i| contact[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Whether reference point `q` warps onto the target's contact region.
#[inline]
fn target_stencil(tgt: &TactileFrame, t: &RigidTransform, q: &Vector3<f64>) -> Option<Stencil> {
    let (u, v) = project(t, q);
    let s = Stencil::locate(&tgt.geometry, u, v).ok()?;
    tgt.mask.sample_at(&s).then_some(s)
}

/// Once updates shrink below this many step tolerances, shared-region
/// membership is frozen. A pixel straddling the target's mask edge would
/// otherwise toggle in and out and hold the iteration in a two-cycle.
const FREEZE_FACTOR: f64 = 100.0;

/// Which reference points take part in an iteration.
pub(crate) enum Membership {
    /// Recomputed from the target mask at every iterate.
    Live,
    /// Fixed per point; members are sampled wherever they land on the grid.
    Frozen(Vec<bool>),
}

impl Membership {
    #[inline]
    pub(crate) fn stencil(
        &self,
        idx: usize,
        tgt: &TactileFrame,
        t: &RigidTransform,
        q: &Vector3<f64>,
    ) -> Option<Stencil> {
        match self {
            Membership::Live => target_stencil(tgt, t, q),
            Membership::Frozen(m) if m[idx] => {
                let (u, v) = project(t, q);
                Stencil::locate(&tgt.geometry, u, v).ok()
            }
            Membership::Frozen(_) => None,
        }
    }

    /// Freezes the current membership once `step` is small enough.
    pub(crate) fn settle(
        &mut self,
        step: f64,
        cfg: &SolverConfig,
        tgt: &TactileFrame,
        t: &RigidTransform,
        points: &[Vector3<f64>],
    ) {
        if matches!(self, Membership::Live) && step < FREEZE_FACTOR * cfg.step_tolerance {
            *self = Membership::Frozen(
                points
                    .iter()
                    .map(|q| target_stencil(tgt, t, q).is_some())
                    .collect(),
            );
        }
    }
}

/// The shared contact region: subsampled reference contact pixels whose
/// warp lands inside the target's contact region.
pub fn shared_contact(
    reference: &TactileFrame,
    target: &TactileFrame,
    t: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<Vec<usize>> {
    reference.same_geometry(target)?;
    let shared: Vec<usize> = subsample_contact(reference, cfg)
        .into_iter()
        .filter(|&k| {
            let q = surface_point(reference, k, cfg.zero_height_mode);
            target_stencil(target, t, &q).is_some()
        })
        .collect();
    if shared.len() < cfg.min_shared_pixels {
        return Err(Error::InsufficientOverlap {
            shared: shared.len(),
            required: cfg.min_shared_pixels,
        });
    }
    Ok(shared)
}

/// Spatial derivatives of the normal map at pixel `(i, j)` in physical
/// units: central differences, one-sided where a neighbor is off-contact.
pub(crate) fn normal_gradient(
    frame: &TactileFrame,
    i: usize,
    j: usize,
) -> (Vector3<f64>, Vector3<f64>) {
    let (rows, cols) = frame.mask.shape();
    let pitch = frame.geometry.pixel_pitch;
    let n = &frame.normals;
    let inside = |a: usize, b: usize| *frame.mask.get(a, b);
    let diff = |prev: Option<(usize, usize)>, next: Option<(usize, usize)>| {
        let prev = prev.filter(|&(a, b)| inside(a, b));
        let next = next.filter(|&(a, b)| inside(a, b));
        match (prev, next) {
            (Some(p), Some(q)) => (n.get(q.0, q.1) - n.get(p.0, p.1)) / (2.0 * pitch),
            (None, Some(q)) => (n.get(q.0, q.1) - n.get(i, j)) / pitch,
            (Some(p), None) => (n.get(i, j) - n.get(p.0, p.1)) / pitch,
            (None, None) => Vector3::zeros(),
        }
    };
    let du = diff(
        j.checked_sub(1).map(|b| (i, b)),
        (j + 1 < cols).then_some((i, j + 1)),
    );
    let dv = diff(
        i.checked_sub(1).map(|a| (a, j)),
        (i + 1 < rows).then_some((i + 1, j)),
    );
    (du, dv)
}

/// Jacobian of the reference-side residual for one pixel:
/// `grad I * P * [I3 | Jx q | Jy q | Jz q] - [0 | Jx I | Jy I | Jz I]`.
#[inline]
pub(crate) fn pixel_jacobian(
    du: &Vector3<f64>,
    dv: &Vector3<f64>,
    q: &Vector3<f64>,
    normal: &Vector3<f64>,
) -> Matrix3x6 {
    // Rows of P [I3 | J q]: the image-plane motion of q per parameter.
    // Jx q = (0, -qz, qy), Jy q = (qz, 0, -qx), Jz q = (-qy, qx, 0).
    let wu = [1.0, 0.0, 0.0, 0.0, q.z, -q.y];
    let wv = [0.0, 1.0, 0.0, -q.z, 0.0, q.x];
    // Columns J_k n for the rotated-normal term.
    let jn = [
        Vector3::new(0.0, -normal.z, normal.y),
        Vector3::new(normal.z, 0.0, -normal.x),
        Vector3::new(-normal.y, normal.x, 0.0),
    ];
    let mut jac = Matrix3x6::zeros();
    for c in 0..6 {
        let mut col = du * wu[c] + dv * wv[c];
        if c >= 3 {
            col -= jn[c - 3];
        }
        jac.set_column(c, &col);
    }
    jac
}

/// Stacked per-pixel Jacobians and the Hessian `sum J^T J` for the given
/// reference pixels. Independent of the current estimate.
pub fn build_jacobian(
    reference: &TactileFrame,
    pixels: &[usize],
    cfg: &SolverConfig,
) -> (Vec<Matrix3x6>, Matrix6<f64>) {
    let cols = reference.geometry.width_px;
    let mut hessian = Matrix6::zeros();
    let jacobians = pixels
        .iter()
        .map(|&k| {
            let (i, j) = (k / cols, k % cols);
            let (du, dv) = normal_gradient(reference, i, j);
            let q = surface_point(reference, k, cfg.zero_height_mode);
            let jac = pixel_jacobian(&du, &dv, &q, reference.normals.get(i, j));
            hessian += jac.transpose() * jac;
            jac
        })
        .collect();
    (jacobians, hessian)
}

/// Mean of `z'(W) - [R q + t]_z` over the given reference pixels: the
/// z-translation correction that aligns the height maps.
pub fn estimate_z_translation(
    reference: &TactileFrame,
    target: &TactileFrame,
    t: &RigidTransform,
    pixels: &[usize],
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &k in pixels {
        let q = surface_point(reference, k, false);
        let p = t.rotation * q + t.translation;
        if let Ok(z) = target.heights.sample_bilinear(&target.geometry, p.x, p.y) {
            sum += z - p.z;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientOverlap {
            shared: 0,
            required: 1,
        });
    }
    Ok(sum / count as f64)
}

/// Removes the z-translation row and column, which the normals cannot observe.
fn drop_z(m: &Matrix6<f64>) -> Matrix5 {
    const KEEP: [usize; 5] = [0, 1, 3, 4, 5];
    Matrix5::from_fn(|r, c| m[(KEEP[r], KEEP[c])])
}

fn drop_z_vec(v: &Vector6<f64>) -> Vector5 {
    Vector5::new(v[0], v[1], v[3], v[4], v[5])
}

fn insert_z(v: &Vector5) -> Vector6<f64> {
    Vector6::new(v[0], v[1], 0.0, v[2], v[3], v[4])
}

/// Condition number of a symmetric positive semi-definite matrix.
fn spd_condition(m: &Matrix5) -> f64 {
    let eig = m.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the 5x5 system with the z-translation row/column removed,
/// rejecting ill-conditioned Hessians.
pub(crate) fn solve_reduced(
    hessian: &Matrix6<f64>,
    rhs: &Vector6<f64>,
    limit: f64,
) -> Result<(Vector6<f64>, f64)> {
    let h5 = drop_z(hessian);
    let condition = spd_condition(&h5);
    if !(condition <= limit) {
        return Err(Error::DegenerateHessian { condition, limit });
    }
    let step = h5
        .cholesky()
        .map(|c| c.solve(&drop_z_vec(rhs)))
        .ok_or(Error::DegenerateHessian { condition, limit })?;
    Ok((insert_z(&step), condition))
}

/// The small transform for an update `(dx, dy, dz, wx, wy, wz)`.
pub(crate) fn increment(delta: &Vector6<f64>) -> RigidTransform {
    RigidTransform::new(
        so3_exp(&Vector3::new(delta[3], delta[4], delta[5])),
        Vector3::new(delta[0], delta[1], delta[2]),
    )
}

struct Template {
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    jacobians: Vec<Matrix3x6>,
    pixels: Vec<usize>,
    hessian: Matrix6<f64>,
}

struct Evaluation {
    gradient: Vector6<f64>,
    /// `sum J^T J` over template pixels that fell outside the shared region.
    excluded: Matrix6<f64>,
    excluded_count: usize,
    sum_sq: f64,
    shared: usize,
}

impl Template {
    fn new(reference: &TactileFrame, cfg: &SolverConfig) -> Self {
        let pixels = subsample_contact(reference, cfg);
        let (jacobians, hessian) = build_jacobian(reference, &pixels, cfg);
        let points = pixels
            .iter()
            .map(|&k| surface_point(reference, k, cfg.zero_height_mode))
            .collect();
        let normals = pixels
            .iter()
            .map(|&k| reference.normals.data()[k])
            .collect();
        Template {
            points,
            normals,
            jacobians,
            pixels,
            hessian,
        }
    }

    fn len(&self) -> usize {
        self.pixels.len()
    }

    fn evaluate(
        &self,
        target: &TactileFrame,
        t: &RigidTransform,
        members: &Membership,
        want_gradient: bool,
    ) -> Evaluation {
        let rt: Matrix3<f64> = t.rotation.transpose();
        let mut eval = Evaluation {
            gradient: Vector6::zeros(),
            excluded: Matrix6::zeros(),
            excluded_count: 0,
            sum_sq: 0.0,
            shared: 0,
        };
        let mut excluded_idx = Vec::new();
        for (idx, q) in self.points.iter().enumerate() {
            let Some(s) = members.stencil(idx, target, t, q) else {
                excluded_idx.push(idx);
                continue;
            };
            let r = rt * target.normals.sample_at(&s) - self.normals[idx];
            eval.sum_sq += r.norm_squared();
            eval.shared += 1;
            if want_gradient {
                eval.gradient += self.jacobians[idx].tr_mul(&r);
            }
        }
        eval.excluded_count = excluded_idx.len();
        if want_gradient {
            for idx in excluded_idx {
                let j = &self.jacobians[idx];
                eval.excluded += j.tr_mul(j);
            }
        }
        eval
    }

    fn shared_pixels(&self, target: &TactileFrame, t: &RigidTransform) -> Vec<usize> {
        self.points
            .iter()
            .zip(&self.pixels)
            .filter(|(q, _)| target_stencil(target, t, q).is_some())
            .map(|(_, &k)| k)
            .collect()
    }

    /// `sum J^T J` over the template pixels that currently take part.
    fn shared_hessian(
        &self,
        target: &TactileFrame,
        t: &RigidTransform,
        members: &Membership,
    ) -> Matrix6<f64> {
        let mut h = Matrix6::zeros();
        for (idx, (q, j)) in self.points.iter().zip(&self.jacobians).enumerate() {
            if members.stencil(idx, target, t, q).is_some() {
                h += j.tr_mul(j);
            }
        }
        h
    }
}

/// Registers `target` against `reference`, starting from `init`.
pub fn register(
    reference: &TactileFrame,
    target: &TactileFrame,
    init: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    reference.same_geometry(target)?;
    let template = Template::new(reference, cfg);
    if template.len() < cfg.min_shared_pixels {
        return Err(Error::InsufficientOverlap {
            shared: template.len(),
            required: cfg.min_shared_pixels,
        });
    }

    let mut t = *init;
    let mut converged = false;
    let mut iterations = 0;
    let mut condition = f64::NAN;
    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    let mut members = Membership::Live;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let eval = template.evaluate(target, &t, &members, true);
        if eval.shared < cfg.min_shared_pixels {
            return Err(Error::InsufficientOverlap {
                shared: eval.shared,
                required: cfg.min_shared_pixels,
            });
        }
        history.push(eval.sum_sq / eval.shared as f64);

        // Subtracting the excluded rows is cheaper while most pixels are shared.
        let hessian = if eval.excluded_count * 2 <= template.len() {
            template.hessian - eval.excluded
        } else {
            template.shared_hessian(target, &t, &members)
        };
        let (delta, cond) = solve_reduced(&hessian, &eval.gradient, cfg.condition_limit)?;
        condition = cond;
        t = t.compose(&increment(&delta).inverse());
        if delta.norm() < cfg.step_tolerance {
            converged = true;
            break;
        }
        members.settle(delta.norm(), cfg, target, &t, &template.points);
    }

    let shared = template.shared_pixels(target, &t);
    if shared.len() < cfg.min_shared_pixels {
        return Err(Error::InsufficientOverlap {
            shared: shared.len(),
            required: cfg.min_shared_pixels,
        });
    }
    let final_eval = template.evaluate(target, &t, &Membership::Live, false);
    let final_cost = final_eval.sum_sq / final_eval.shared as f64;
    history.push(final_cost);

    let dz = estimate_z_translation(reference, target, &t, &shared)?;
    t.translation.z += dz;

    Ok(RegistrationResult::new(
        t,
        iterations,
        final_cost,
        shared.len(),
        condition,
        converged,
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{Grid, GridGeometry};
    use crate::se3::rotation_generators;

    /// Index of the z-translation parameter, which the normals cannot observe.
    const Z_INDEX: usize = 2;

    fn textured_frame(rows: usize, cols: usize) -> TactileFrame {
        let geometry = GridGeometry::new(rows, cols, 0.1).unwrap();
        let gradients = Grid::from_fn(rows, cols, |i, j| {
            let (u, v) = geometry.pixel_to_mm(i, j);
            [
                0.3 * (1.1 * u + 0.4 * v).sin(),
                0.25 * (0.7 * v - 0.9 * u).cos(),
            ]
        });
        let heights = Grid::from_fn(rows, cols, |i, j| {
            let (u, v) = geometry.pixel_to_mm(i, j);
            0.5 + 0.1 * (u * 0.5).cos() * (v * 0.3).sin()
        });
        let mask = Grid::from_fn(rows, cols, |i, j| {
            i >= 2 && j >= 2 && i + 2 < rows && j + 2 < cols
        });
        TactileFrame::new(geometry, gradients, heights, mask, 0.0).unwrap()
    }

    fn flat_frame() -> TactileFrame {
        let geometry = GridGeometry::new(40, 48, 0.1).unwrap();
        TactileFrame::new(
            geometry,
            Grid::filled(40, 48, [0.0; 2]),
            Grid::filled(40, 48, 0.0),
            Grid::filled(40, 48, true),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn warp_examples() {
        let geom = GridGeometry::new(16, 16, 0.5).unwrap();
        let z = Grid::filled(16, 16, 0.7);
        let (u, v) = geom.pixel_to_mm(3, 9);
        assert_eq!(
            warp(u, v, &z, &geom, &RigidTransform::identity(), false),
            Ok((u, v))
        );

        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 5.0));
        let (wu, wv) = warp(u, v, &z, &geom, &t, false).unwrap();
        assert!((wu - (u + 1.0)).abs() < 1e-15 && (wv - (v + 2.0)).abs() < 1e-15);

        let zero = Grid::filled(16, 16, 0.0);
        let rz =
            RigidTransform::from_rotation(so3_exp(&(Vector3::z() * std::f64::consts::FRAC_PI_2)));
        let (wu, wv) = warp(u, v, &zero, &geom, &rz, false).unwrap();
        assert!((wu + v).abs() < 1e-12 && (wv - u).abs() < 1e-12);
    }

    #[test]
    fn flat_frame_has_zero_jacobian() {
        let f = flat_frame();
        let pixels: Vec<usize> = (0..f.geometry.len()).collect();
        let (jac, h) = build_jacobian(&f, &pixels, &SolverConfig::default());
        // J_k (0,0,-1) is nonzero for x/y rotations, but the rotated-normal
        // term of the flat map is exactly what the x/y generators produce.
        let [jx, jy, _] = rotation_generators();
        let n = Vector3::new(0.0, 0.0, -1.0);
        for j in &jac {
            assert_eq!(j.column(0).norm(), 0.0);
            assert_eq!(j.column(1).norm(), 0.0);
            assert_eq!(j.column(2).norm(), 0.0);
            assert_eq!(j.column(5).norm(), 0.0);
            assert_eq!(j.column(3).into_owned(), -(jx * n));
            assert_eq!(j.column(4).into_owned(), -(jy * n));
        }
        assert_eq!(h.column(2).norm(), 0.0);
        let r = register(
            &f,
            &f,
            &RigidTransform::identity(),
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::DegenerateHessian { .. })));
    }

    #[test]
    fn z_column_is_exactly_zero() {
        let f = textured_frame(40, 50);
        let pixels = subsample_contact(&f, &SolverConfig::default());
        let (jac, h) = build_jacobian(&f, &pixels, &SolverConfig::default());
        assert!(jac
            .iter()
            .all(|j| j.column(Z_INDEX).iter().all(|&v| v == 0.0)));
        assert!(h.column(Z_INDEX).iter().all(|&v| v == 0.0));
        assert!(h.row(Z_INDEX).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_frames_register_to_identity() {
        let f = textured_frame(40, 50);
        let r = register(
            &f,
            &f,
            &RigidTransform::identity(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        let (a, d) = crate::se3::transform_distance(&r.transform, &RigidTransform::identity());
        assert!(a < 1e-9 && d < 1e-9);
        assert_eq!(r.final_cost, 0.0);
    }

    #[test]
    fn shared_contact_examples() {
        let f = textured_frame(40, 50);
        let cfg = SolverConfig::default();
        let shared = shared_contact(&f, &f, &RigidTransform::identity(), &cfg).unwrap();
        assert_eq!(shared, subsample_contact(&f, &cfg));

        let mut g = f.clone();
        for (k, m) in g.mask.data_mut().iter_mut().enumerate() {
            *m = !f.mask.data()[k];
        }
        let r = shared_contact(&f, &g, &RigidTransform::identity(), &cfg);
        assert!(matches!(r, Err(Error::InsufficientOverlap { .. })));
    }

    #[test]
    fn z_translation_examples() {
        let f = textured_frame(40, 50);
        let pixels = subsample_contact(&f, &SolverConfig::default());
        let id = RigidTransform::identity();
        assert_eq!(estimate_z_translation(&f, &f, &id, &pixels).unwrap(), 0.0);
        let mut g = f.clone();
        g.heights.data_mut().iter_mut().for_each(|h| *h += 0.1);
        let dz = estimate_z_translation(&f, &g, &id, &pixels).unwrap();
        assert!((dz - 0.1).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            subsample_n: 50,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
