//! Analytic tactile renderer used as ground truth.
//!
//! An object is a solid below its surface; at identity pose its highest
//! point pokes `indentation` millimeters above the gel plane `z = 0`. For a
//! sensor pixel `(u, v)` the renderer casts the line `(u, v, s)` into the
//! object frame and takes the highest surface crossing `s`: the pixel is in
//! contact when `s > 0`, its height is `s` and its gradient is read off the
//! exact surface normal. Heights and gradients are rounded to `f32` so that
//! frames survive the container format unchanged.

mod trajectory;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{poisson_integrate, Grid, GridGeometry, TactileFrame};
use crate::se3::RigidTransform;

pub use trajectory::{MotionSegment, TrajectorySpec, DEFAULT_FRAME_INTERVAL};

/// Sample points per ray when bracketing the top surface crossing.
const BRACKET_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surface {
    /// Sphere whose radius is modulated by a smooth 3D sinusoidal texture.
    TexturedSphere {
        radius: f64,
        texture_amplitude: f64,
        /// Angular wavenumber, radians per millimeter.
        texture_frequency: f64,
    },
    /// Straight ridge along the y-axis: a plateau `width` wide standing
    /// `height` above the base, with raised-cosine shoulders `edge_radius` wide.
    Ridge {
        width: f64,
        height: f64,
        edge_radius: f64,
    },
    /// Plane with a square lattice of cosine bumps.
    BumpyPlane {
        bump_amplitude: f64,
        bump_spacing: f64,
    },
    FlatPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(flatten)]
    pub surface: Surface,
    /// Millimeters.
    pub indentation: f64,
}

impl SceneSpec {
    pub fn textured_sphere(radius: f64, amplitude: f64, frequency: f64, indentation: f64) -> Self {
        SceneSpec {
            surface: Surface::TexturedSphere {
                radius,
                texture_amplitude: amplitude,
                texture_frequency: frequency,
            },
            indentation,
        }
    }

    pub fn flat_plane(indentation: f64) -> Self {
        SceneSpec {
            surface: Surface::FlatPlane,
            indentation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.indentation > 0.0) {
            return bad("indentation must be positive");
        }
        match self.surface {
            Surface::TexturedSphere {
                radius,
                texture_amplitude,
                texture_frequency,
            } => {
                if !(radius > 0.0) {
                    return bad("radius must be positive");
                }
                if !(texture_amplitude >= 0.0 && texture_amplitude < radius) {
                    return bad("texture_amplitude must be in [0, radius)");
                }
                if !(texture_frequency >= 0.0) {
                    return bad("texture_frequency must be >= 0");
                }
            }
            Surface::Ridge {
                width,
                height,
                edge_radius,
            } => {
                if !(width > 0.0 && height >= 0.0 && edge_radius > 0.0) {
                    return bad("ridge needs width > 0, height >= 0, edge_radius > 0");
                }
            }
            Surface::BumpyPlane {
                bump_amplitude,
                bump_spacing,
            } => {
                if !(bump_amplitude >= 0.0 && bump_spacing > 0.0) {
                    return bad("bumpy_plane needs bump_amplitude >= 0, bump_spacing > 0");
                }
            }
            Surface::FlatPlane => {}
        }
        Ok(())
    }

    /// Object-frame point that roll and twist motions pivot about.
    pub fn pivot(&self) -> Vector3<f64> {
        match self.surface {
            Surface::TexturedSphere { radius, .. } => {
                Vector3::new(0.0, 0.0, self.indentation - radius)
            }
            _ => Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Standard deviation of the Gaussian added to each gradient component.
    pub gradient_sigma: f64,
    /// Replace heights by the Poisson integral of the noisy gradients.
    pub heights_from_noisy_poisson: bool,
    pub rng_seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            gradient_sigma: 0.0,
            heights_from_noisy_poisson: false,
            rng_seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_sigma >= 0.0 && self.gradient_sigma.is_finite()) {
            return Err(Error::Config("gradient_sigma must be >= 0".into()));
        }
        Ok(())
    }

    fn is_noiseless(&self) -> bool {
        self.gradient_sigma == 0.0 && !self.heights_from_noisy_poisson
    }
}

/// Wave directions (normalized on use) and phases of the sphere texture.
const TEXTURE_WAVES: [([f64; 3], f64); 3] = [
    ([1.0, 0.3, 0.5], 0.3),
    ([-0.4, 1.0, 0.2], 1.1),
    ([0.2, -0.5, 1.0], 2.0),
];

/// Exact evaluation of an object surface in its own frame.
struct Shape {
    surface: Surface,
    indentation: f64,
}

/// Result of a ray cast: crossing height `s` and the outward normal there.
struct Hit {
    s: f64,
    normal: Vector3<f64>,
}

impl Shape {
    fn sphere_center(&self, radius: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.indentation - radius)
    }

    /// Texture value and gradient at point `p` (object frame, mm).
    fn texture(p: &Vector3<f64>, k: f64) -> (f64, Vector3<f64>) {
        let mut value = 0.0;
        let mut grad = Vector3::zeros();
        for (dir, phase) in TEXTURE_WAVES {
            let w = Vector3::from(dir).normalize() * k;
            let arg = w.dot(p) + phase;
            value += arg.sin();
            grad += w * arg.cos();
        }
        (value / 3.0, grad / 3.0)
    }

    /// Height profile `z = h(x, y)` of the height-field surfaces, with its
    /// gradient.
    fn height_field(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let top = self.indentation;
        match self.surface {
            Surface::Ridge {
                width,
                height,
                edge_radius,
            } => {
                let half = 0.5 * width;
                let ax = x.abs();
                if ax <= half {
                    (top, 0.0, 0.0)
                } else if ax < half + edge_radius {
                    let a = std::f64::consts::PI * (ax - half) / edge_radius;
                    let b = 0.5 * (1.0 + a.cos());
                    let db = -0.5 * a.sin() * std::f64::consts::PI / edge_radius;
                    (top - height * (1.0 - b), height * db * x.signum(), 0.0)
                } else {
                    (top - height, 0.0, 0.0)
                }
            }
            Surface::BumpyPlane {
                bump_amplitude,
                bump_spacing,
            } => {
                let k = std::f64::consts::TAU / bump_spacing;
                let (sx, cx) = (k * x).sin_cos();
                let (sy, cy) = (k * y).sin_cos();
                let a = 0.5 * bump_amplitude;
                (
                    top + a * (cx * cy - 1.0),
                    -a * k * sx * cy,
                    -a * k * cx * sy,
                )
            }
            Surface::FlatPlane => (top, 0.0, 0.0),
            Surface::TexturedSphere { .. } => unreachable!("sphere is not a height field"),
        }
    }

    /// Highest crossing of the line `origin + s * dir` with the surface.
    fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        match self.surface {
            Surface::TexturedSphere {
                radius,
                texture_amplitude,
                texture_frequency,
            } => self.cast_sphere(origin, dir, radius, texture_amplitude, texture_frequency),
            _ => self.cast_height_field(origin, dir),
        }
    }

    fn cast_sphere(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        radius: f64,
        amplitude: f64,
        k: f64,
    ) -> Option<Hit> {
        let c = self.sphere_center(radius);
        let oc = origin - c;
        let b = dir.dot(&oc);
        let cc = oc.norm_squared();
        let outer = radius + amplitude;
        let disc = b * b - (cc - outer * outer);
        if disc < 0.0 {
            return None;
        }
        let s_top = -b + disc.sqrt();
        if s_top <= 0.0 {
            return None;
        }
        // Signed distance-like function, >= 0 outside, <= 0 inside.
        let f = |s: f64| {
            let x = oc + dir * s;
            let d = x.norm();
            d - radius - amplitude * Self::texture(&(x * (radius / d)), k).0
        };
        let inner = radius - amplitude;
        let disc_in = b * b - (cc - inner * inner);
        let s_low = if disc_in >= 0.0 {
            -b + disc_in.sqrt()
        } else {
            -b
        };

        // Walk down from the outer shell to the first inside sample.
        let mut hi = s_top;
        let mut f_hi = f(hi);
        let mut bracket = None;
        for i in 1..=BRACKET_SAMPLES {
            let s = s_top + (s_low - s_top) * i as f64 / BRACKET_SAMPLES as f64;
            let fs = f(s);
            if fs <= 0.0 {
                bracket = Some((s, fs, hi, f_hi));
                break;
            }
            hi = s;
            f_hi = fs;
        }
        let s = if amplitude == 0.0 {
            s_top
        } else {
            let (lo, f_lo, hi, f_hi) = bracket?;
            illinois(f, lo, f_lo, hi, f_hi)
        };
        if s <= 0.0 {
            return None;
        }
        let x = oc + dir * s;
        let d = x.norm();
        let w = x / d;
        let (_, grad_t) = Self::texture(&(w * radius), k);
        // Gradient of |x| - r - a T(r x / |x|).
        let tangential = grad_t - w * w.dot(&grad_t);
        let normal = w - tangential * (amplitude * radius / d);
        Some(Hit { s, normal })
    }

    fn cast_height_field(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        // Newton on g(s) = z(s) - h(x(s), y(s)).
        let mut s = (self.indentation - origin.z) / dir.z;
        for _ in 0..50 {
            let p = origin + dir * s;
            let (h, hx, hy) = self.height_field(p.x, p.y);
            let g = p.z - h;
            let dg = dir.z - hx * dir.x - hy * dir.y;
            if dg.abs() < 1e-12 {
                return None;
            }
            let step = g / dg;
            s -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let p = origin + dir * s;
        let (h, hx, hy) = self.height_field(p.x, p.y);
        if !((p.z - h).abs() < 1e-9) || s <= 0.0 {
            return None;
        }
        Some(Hit {
            s,
            normal: Vector3::new(-hx, -hy, 1.0),
        })
    }
}

/// Root of `f` in `[lo, hi]` given `f(lo) <= 0 < f(hi)`.
fn illinois(f: impl Fn(f64) -> f64, mut lo: f64, mut f_lo: f64, mut hi: f64, mut f_hi: f64) -> f64 {
    if f_lo == 0.0 || f_hi <= 0.0 || (hi - lo).abs() < 1e-13 {
        return lo;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let s = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fs = f(s);
        if fs == 0.0 || (hi - lo).abs() < 1e-13 {
            return s;
        }
        if fs < 0.0 {
            lo = s;
            f_lo = fs;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            f_hi = fs;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

#[inline]
fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

/// Renders the scene with the object at `pose` (object frame to sensor
/// frame).
pub fn render_frame(
    scene: &SceneSpec,
    pose: &RigidTransform,
    geom: &GridGeometry,
    noise: &NoiseSpec,
) -> Result<TactileFrame> {
    render_indexed(scene, pose, geom, noise, 0, 0.0)
}

/// [`render_frame`] for frame `index` of a sequence: the noise stream is
/// keyed by `index`, so frames of one sequence get independent noise.
pub fn render_indexed(
    scene: &SceneSpec,
    pose: &RigidTransform,
    geom: &GridGeometry,
    noise: &NoiseSpec,
    index: u64,
    timestamp: f64,
) -> Result<TactileFrame> {
    scene.validate()?;
    noise.validate()?;
    geom.validate()?;
    let shape = Shape {
        surface: scene.surface,
        indentation: scene.indentation,
    };
    let rt = pose.rotation.transpose();
    let dir = rt * Vector3::z();
    let (rows, cols) = (geom.height_px, geom.width_px);
    let mut gradients = Grid::filled(rows, cols, [0.0; 2]);
    let mut heights = Grid::filled(rows, cols, 0.0);
    let mut mask = Grid::filled(rows, cols, false);
    for i in 0..rows {
        for j in 0..cols {
            let (u, v) = geom.pixel_to_mm(i, j);
            let origin = rt * (Vector3::new(u, v, 0.0) - pose.translation);
            let Some(hit) = shape.cast(&origin, &dir) else {
                continue;
            };
            let n = pose.rotation * hit.normal;
            if n.z <= 1e-9 {
                continue;
            }
            *gradients.get_mut(i, j) = [quantize(-n.x / n.z), quantize(-n.y / n.z)];
            *heights.get_mut(i, j) = quantize(hit.s);
            *mask.get_mut(i, j) = true;
        }
    }
    if !mask.data().contains(&true) {
        return Err(Error::NoContact {
            frame: Some(index as usize),
        });
    }
    if !noise.is_noiseless() {
        apply_noise(geom, noise, index, &mut gradients, &mut heights, &mask);
    }
    TactileFrame::new(*geom, gradients, heights, mask, timestamp)
}

fn apply_noise(
    geom: &GridGeometry,
    noise: &NoiseSpec,
    index: u64,
    gradients: &mut Grid<[f64; 2]>,
    heights: &mut Grid<f64>,
    mask: &Grid<bool>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    rng.set_stream(index);
    if noise.gradient_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.gradient_sigma).expect("sigma validated");
        for g in gradients.data_mut() {
            g[0] = quantize(g[0] + normal.sample(&mut rng));
            g[1] = quantize(g[1] + normal.sample(&mut rng));
        }
    }
    if noise.heights_from_noisy_poisson {
        let z = poisson_integrate(gradients, geom);
        for ((h, &zi), &m) in heights.data_mut().iter_mut().zip(z.data()).zip(mask.data()) {
            *h = if m { quantize(zi) } else { 0.0 };
        }
    }
}

/// Frames rendered along a trajectory, with ground truth relative to frame 0.
#[derive(Debug, Clone)]
pub struct RenderedSequence {
    pub frames: Vec<TactileFrame>,
    pub ground_truth: Vec<RigidTransform>,
}

/// Renders every pose of `traj`. Frame `i` draws its noise from stream `i`
/// of the seeded generator, so frames are independent of each other.
pub fn render_sequence(
    scene: &SceneSpec,
    traj: &TrajectorySpec,
    geom: &GridGeometry,
    noise: &NoiseSpec,
) -> Result<RenderedSequence> {
    let n = traj.len();
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(n);
    let chunk = n.div_ceil(workers);
    let mut frames: Vec<Option<Result<TactileFrame>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (c, slots) in frames.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (k, slot) in slots.iter_mut().enumerate() {
                    let i = c * chunk + k;
                    *slot = Some(render_indexed(
                        scene,
                        &traj.poses()[i],
                        geom,
                        noise,
                        i as u64,
                        traj.timestamps()[i],
                    ));
                }
            });
        }
    });
    let frames = frames
        .into_iter()
        .map(|f| f.expect("every slot rendered"))
        .collect::<Result<Vec<_>>>()?;
    let ground_truth = (0..n).map(|i| traj.relative_to_first(i)).collect();
    Ok(RenderedSequence {
        frames,
        ground_truth,
    })
}
