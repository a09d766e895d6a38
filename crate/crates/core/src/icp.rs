//! Point-to-plane ICP over point clouds lifted from height maps.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix6, Vector3, Vector6};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::TactileFrame;
use crate::se3::{so3_exp, RigidTransform};
use crate::solver::RegistrationResult;
use crate::tracker::Registrar;

#[derive(Debug, Clone, PartialEq)]
pub struct TactilePointCloud {
    pub points: Vec<Vector3<f64>>,
    /// Unit normals, one per point.
    pub normals: Vec<Vector3<f64>>,
}

impl TactilePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Seeded draw of at most `n` points, kept in their original order.
    pub fn subsample(&self, n: usize, seed: u64) -> TactilePointCloud {
        if self.len() <= n {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, self.len(), n).into_vec();
        picked.sort_unstable();
        TactilePointCloud {
            points: picked.iter().map(|&i| self.points[i]).collect(),
            normals: picked.iter().map(|&i| self.normals[i]).collect(),
        }
    }
}

/// One point `(u, v, z)` per contact pixel, with that pixel's normal.
pub fn frame_to_cloud(f: &TactileFrame) -> Result<TactilePointCloud> {
    let cols = f.geometry.width_px;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (k, _) in f.mask.data().iter().enumerate().filter(|(_, &m)| m) {
        let (u, v) = f.geometry.pixel_to_mm(k / cols, k % cols);
        points.push(Vector3::new(u, v, f.heights.data()[k]));
        normals.push(f.normals.data()[k]);
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(TactilePointCloud { points, normals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Threshold on the norm of the update `(omega, v)`.
    pub tolerance: f64,
    /// Correspondences farther apart than this (mm) are dropped.
    pub correspondence_gate: f64,
    pub condition_limit: f64,
    pub min_correspondences: usize,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iterations: 50,
            tolerance: 1e-6,
            correspondence_gate: 1.0,
            condition_limit: 1e8,
            min_correspondences: 6,
        }
    }
}

struct Normals {
    hessian: Matrix6<f64>,
    rhs: Vector6<f64>,
    sum_sq: f64,
    count: usize,
}

/// Accumulates the linearized system over gated nearest-neighbor pairs.
/// Unknowns are ordered `(omega, v)` for the left update `(exp(omega), v) T`.
fn linearize(
    src: &TactilePointCloud,
    dst: &TactilePointCloud,
    tree: &ImmutableKdTree<f64, 3>,
    t: &RigidTransform,
    gate_sq: f64,
) -> Normals {
    let mut acc = Normals {
        hessian: Matrix6::zeros(),
        rhs: Vector6::zeros(),
        sum_sq: 0.0,
        count: 0,
    };
    for p in &src.points {
        let p = t.apply(p);
        let nn = tree
            .query(&[p.x, p.y, p.z])
            .nearest_one::<SquaredEuclidean<f64>>()
            .execute();
        if nn.distance > gate_sq {
            continue;
        }
        let k = nn.item as usize;
        let n = dst.normals[k];
        let e = (p - dst.points[k]).dot(&n);
        let c = p.cross(&n);
        let row = Vector6::new(c.x, c.y, c.z, n.x, n.y, n.z);
        acc.hessian += row * row.transpose();
        acc.rhs += row * e;
        acc.sum_sq += e * e;
        acc.count += 1;
    }
    acc
}

fn condition_number(h: &Matrix6<f64>) -> f64 {
    let eig = h.symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Aligns `src` onto `dst`; the result maps source coordinates into the
/// destination frame.
pub fn icp_point_to_plane(
    src: &TactilePointCloud,
    dst: &TactilePointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> Result<RegistrationResult> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let coords: Vec<[f64; 3]> = dst.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree = ImmutableKdTree::<f64, 3>::new_from_slice(&coords)
        .map_err(|e| Error::Format(format!("cannot index destination cloud: {e:?}")))?;
    let gate_sq = cfg.correspondence_gate * cfg.correspondence_gate;

    let mut t = *init;
    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    let mut condition = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let sys = linearize(src, dst, &tree, &t, gate_sq);
        if sys.count < cfg.min_correspondences {
            return Err(Error::InsufficientOverlap {
                shared: sys.count,
                required: cfg.min_correspondences,
            });
        }
        history.push(sys.sum_sq / sys.count as f64);
        condition = condition_number(&sys.hessian);
        if !(condition <= cfg.condition_limit) {
            return Err(Error::DegenerateSystem {
                condition,
                limit: cfg.condition_limit,
            });
        }
        let x =
            sys.hessian
                .cholesky()
                .map(|c| -c.solve(&sys.rhs))
                .ok_or(Error::DegenerateSystem {
                    condition,
                    limit: cfg.condition_limit,
                })?;
        let step = RigidTransform::new(
            so3_exp(&Vector3::new(x[0], x[1], x[2])),
            Vector3::new(x[3], x[4], x[5]),
        );
        t = step.compose(&t);
        if x.norm() < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let last = linearize(src, dst, &tree, &t, gate_sq);
    let final_cost = if last.count > 0 {
        last.sum_sq / last.count as f64
    } else {
        f64::NAN
    };
    history.push(final_cost);
    Ok(RegistrationResult::new(
        t, iterations, final_cost, last.count, condition, converged, history,
    ))
}

/// ICP between two frames with the same point budget NormalFlow uses.
pub fn register_icp(
    reference: &TactileFrame,
    target: &TactileFrame,
    init: &RigidTransform,
    subsample_n: usize,
    seed: u64,
    cfg: &IcpConfig,
) -> Result<RegistrationResult> {
    let src = frame_to_cloud(reference)?.subsample(subsample_n, seed);
    let dst = frame_to_cloud(target)?;
    icp_point_to_plane(&src, &dst, init, cfg)
}

/// ICP bound to a point budget and sampling seed, for driving the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpRegistrar {
    pub config: IcpConfig,
    pub subsample_n: usize,
    pub seed: u64,
}

impl Registrar for IcpRegistrar {
    fn register(
        &self,
        reference: &TactileFrame,
        target: &TactileFrame,
        init: &RigidTransform,
    ) -> Result<RegistrationResult> {
        register_icp(
            reference,
            target,
            init,
            self.subsample_n,
            self.seed,
            &self.config,
        )
    }

    fn support(&self, reference: &TactileFrame) -> usize {
        reference.contact_pixels().min(self.subsample_n)
    }
}
