//! Forward-additive Gauss-Newton over z-x-y Euler parameters.
//!
//! Same objective as the inverse-compositional solver but linearized on the
//! target side, so the Jacobian is rebuilt at every iterate. Slower; kept as
//! a reference implementation to cross-check the main solver.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use super::{
    estimate_z_translation, normal_gradient, solve_reduced, subsample_contact, surface_point,
    target_stencil, Membership, RegistrationResult, SolverConfig,
};
use crate::error::{Error, Result};
use crate::maps::{BilinearSample, Grid, TactileFrame};
use crate::se3::{params_to_transform, rotation_generators, PoseParams, RigidTransform};
use crate::tracker::Registrar;

/// The forward-additive solver as a tracker backend.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardAdditive(pub SolverConfig);

impl Registrar for ForwardAdditive {
    fn register(
        &self,
        reference: &TactileFrame,
        target: &TactileFrame,
        init: &RigidTransform,
    ) -> Result<RegistrationResult> {
        register_forward_additive(reference, target, init, &self.0)
    }

    fn support(&self, reference: &TactileFrame) -> usize {
        self.0.support(reference)
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `dR/d(theta_x, theta_y, theta_z)` for `R = R_y R_x R_z`.
fn euler_derivatives(p: &PoseParams) -> [Matrix3<f64>; 3] {
    let [jx, jy, jz] = rotation_generators();
    let (rx, ry, rz) = (rot_x(p.theta_x), rot_y(p.theta_y), rot_z(p.theta_z));
    let r = ry * rx * rz;
    [ry * jx * rx * rz, jy * r, r * jz]
}

/// Normal-map derivatives of `frame` on its contact region, zero elsewhere.
fn gradient_fields(frame: &TactileFrame) -> (Grid<Vector3<f64>>, Grid<Vector3<f64>>) {
    let (rows, cols) = frame.mask.shape();
    let mut du = Grid::filled(rows, cols, Vector3::zeros());
    let mut dv = Grid::filled(rows, cols, Vector3::zeros());
    for i in 0..rows {
        for j in 0..cols {
            if *frame.mask.get(i, j) {
                let (a, b) = normal_gradient(frame, i, j);
                *du.get_mut(i, j) = a;
                *dv.get_mut(i, j) = b;
            }
        }
    }
    (du, dv)
}

/// Registers `target` against `reference` by forward-additive Gauss-Newton.
pub fn register_forward_additive(
    reference: &TactileFrame,
    target: &TactileFrame,
    init: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    reference.same_geometry(target)?;
    let pixels = subsample_contact(reference, cfg);
    let points: Vec<Vector3<f64>> = pixels
        .iter()
        .map(|&k| surface_point(reference, k, cfg.zero_height_mode))
        .collect();
    let normals: Vec<Vector3<f64>> = pixels
        .iter()
        .map(|&k| reference.normals.data()[k])
        .collect();
    let (grad_u, grad_v) = gradient_fields(target);

    let mut params = init.to_params()?;
    let mut converged = false;
    let mut iterations = 0;
    let mut condition = f64::NAN;
    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    let mut members = Membership::Live;

    let cost_at = |params: &PoseParams| -> (f64, usize) {
        let t = params_to_transform(params);
        let mut sum = 0.0;
        let mut n = 0;
        for (q, nrm) in points.iter().zip(&normals) {
            if let Some(s) = target_stencil(target, &t, q) {
                let r = target.normals.sample_at(&s) - t.rotation * nrm;
                sum += r.norm_squared();
                n += 1;
            }
        }
        (sum, n)
    };

    while iterations < cfg.max_iterations {
        iterations += 1;
        let t = params_to_transform(&params);
        let d_rot = euler_derivatives(&params);
        let mut hessian = Matrix6::zeros();
        let mut gradient = Vector6::zeros();
        let mut sum_sq = 0.0;
        let mut shared = 0;
        for (idx, (q, nrm)) in points.iter().zip(&normals).enumerate() {
            let Some(s) = members.stencil(idx, target, &t, q) else {
                continue;
            };
            let r = target.normals.sample_at(&s) - t.rotation * nrm;
            let (gu, gv) = (s.blend(&grad_u), s.blend(&grad_v));
            let mut a = nalgebra::SMatrix::<f64, 3, 6>::zeros();
            a.set_column(0, &gu);
            a.set_column(1, &gv);
            for (k, dr) in d_rot.iter().enumerate() {
                let dq = dr * q;
                a.set_column(3 + k, &(gu * dq.x + gv * dq.y - dr * nrm));
            }
            hessian += a.tr_mul(&a);
            gradient += a.tr_mul(&r);
            sum_sq += r.norm_squared();
            shared += 1;
        }
        if shared < cfg.min_shared_pixels {
            return Err(Error::InsufficientOverlap {
                shared,
                required: cfg.min_shared_pixels,
            });
        }
        history.push(sum_sq / shared as f64);
        let (step, cond) = solve_reduced(&hessian, &gradient, cfg.condition_limit)?;
        condition = cond;
        let mut a = params.as_array();
        for (p, d) in a.iter_mut().zip(step.iter()) {
            *p -= d;
        }
        params = PoseParams::from_array(a);
        if step.norm() < cfg.step_tolerance {
            converged = true;
            break;
        }
        members.settle(
            step.norm(),
            cfg,
            target,
            &params_to_transform(&params),
            &points,
        );
    }

    let mut t = params_to_transform(&params);
    let shared: Vec<usize> = pixels
        .iter()
        .zip(&points)
        .filter(|(_, q)| target_stencil(target, &t, q).is_some())
        .map(|(&k, _)| k)
        .collect();
    let (sum_sq, n) = cost_at(&params);
    if n < cfg.min_shared_pixels {
        return Err(Error::InsufficientOverlap {
            shared: n,
            required: cfg.min_shared_pixels,
        });
    }
    let final_cost = sum_sq / n as f64;
    history.push(final_cost);
    t.translation.z += estimate_z_translation(reference, target, &t, &shared)?;

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
