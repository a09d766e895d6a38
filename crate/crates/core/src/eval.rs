//! Pose CSV logs and per-axis error reports.
//!
//! A pose log has one row per frame: `frame_index, x_mm, y_mm, z_mm,
//! theta_x_deg, theta_y_deg, theta_z_deg`, each pose taken relative to the
//! first frame and its angles in z-x-y Euler degrees. Angles are unwrapped
//! down the log so a full turn reads 360 rather than jumping back to 0.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{params_to_transform, transform_to_params, PoseParams, RigidTransform};

pub const POSE_CSV_HEADER: [&str; 7] = [
    "frame_index",
    "x_mm",
    "y_mm",
    "z_mm",
    "theta_x_deg",
    "theta_y_deg",
    "theta_z_deg",
];

/// One row of a pose log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame_index: usize,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub theta_x_deg: f64,
    pub theta_y_deg: f64,
    pub theta_z_deg: f64,
}

impl PoseRecord {
    fn axes(&self) -> [f64; 6] {
        [
            self.x_mm,
            self.y_mm,
            self.z_mm,
            self.theta_x_deg,
            self.theta_y_deg,
            self.theta_z_deg,
        ]
    }

    pub fn to_transform(&self) -> RigidTransform {
        params_to_transform(&PoseParams::new(
            self.x_mm,
            self.y_mm,
            self.z_mm,
            self.theta_x_deg.to_radians(),
            self.theta_y_deg.to_radians(),
            self.theta_z_deg.to_radians(),
        ))
    }
}

/// Shifts `angle` by whole turns to land within half a turn of `prev`.
fn unwrap_deg(angle: f64, prev: f64) -> f64 {
    angle - 360.0 * ((angle - prev) / 360.0).round()
}

/// Converts a pose sequence to log rows with unwrapped angles.
pub fn pose_records(poses: &[RigidTransform]) -> Result<Vec<PoseRecord>> {
    let mut rows: Vec<PoseRecord> = Vec::with_capacity(poses.len());
    for (i, t) in poses.iter().enumerate() {
        let p = transform_to_params(t)?;
        let mut deg = [p.theta_x, p.theta_y, p.theta_z].map(f64::to_degrees);
        if let Some(prev) = rows.last() {
            let prev = [prev.theta_x_deg, prev.theta_y_deg, prev.theta_z_deg];
            for k in 0..3 {
                deg[k] = unwrap_deg(deg[k], prev[k]);
            }
        }
        rows.push(PoseRecord {
            frame_index: i,
            x_mm: p.x,
            y_mm: p.y,
            z_mm: p.z,
            theta_x_deg: deg[0],
            theta_y_deg: deg[1],
            theta_z_deg: deg[2],
        });
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::Format(format!("pose CSV: {kind:?}")),
    }
}

/// Writes rows with fixed nine-decimal formatting, so identical poses give
/// identical bytes.
pub fn write_pose_csv<W: Write>(w: W, rows: &[PoseRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(POSE_CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        let mut fields = vec![r.frame_index.to_string()];
        // Normalize -0.0 so sign noise never changes the bytes.
        fields.extend(r.axes().iter().map(|v| format!("{:.9}", v + 0.0)));
        out.write_record(&fields).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pose_csv<R: Read>(r: R) -> Result<Vec<PoseRecord>> {
    let mut input = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = input.headers().map_err(csv_error)?.clone();
    if header.iter().ne(POSE_CSV_HEADER) {
        return Err(Error::Format(format!(
            "pose CSV header must be {}",
            POSE_CSV_HEADER.join(",")
        )));
    }
    let rows: Vec<PoseRecord> = input
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Format(format!("pose CSV row {}: {e}", i + 1))))
        .collect::<Result<_>>()?;
    Ok(rows)
}

pub fn save_pose_csv(path: impl AsRef<Path>, poses: &[RigidTransform]) -> Result<()> {
    let path = path.as_ref();
    let rows = pose_records(poses)?;
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    write_pose_csv(BufWriter::new(f), &rows)
}

pub fn load_pose_csv(path: impl AsRef<Path>) -> Result<Vec<PoseRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_pose_csv(f)
}

/// One value per pose axis: millimeters for translation, degrees for angles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisValues {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub theta_z: f64,
}

impl AxisValues {
    fn from_array(a: [f64; 6]) -> Self {
        AxisValues {
            x: a[0],
            y: a[1],
            z: a[2],
            theta_x: a[3],
            theta_y: a[4],
            theta_z: a[5],
        }
    }

    pub fn max_translation(&self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn max_rotation(&self) -> f64 {
        self.theta_x.max(self.theta_y).max(self.theta_z)
    }
}

/// A frame counts as tracked when every axis is within these bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessBound {
    pub rotation_deg: f64,
    pub translation_mm: f64,
}

impl Default for SuccessBound {
    fn default() -> Self {
        SuccessBound {
            rotation_deg: 0.2,
            translation_mm: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub samples: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
}

impl RuntimeStats {
    /// Summarizes wall times in milliseconds; `None` for no samples.
    pub fn from_millis(times: &[f64]) -> Option<Self> {
        if times.is_empty() {
            return None;
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let at = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
        Some(RuntimeStats {
            samples: sorted.len(),
            median_ms: at(0.5),
            p95_ms: at(0.95),
            mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub frames: usize,
    pub mae: AxisValues,
    /// Spread (max - min) of the ground truth on each axis.
    pub motion_range: AxisValues,
    pub success_bound: SuccessBound,
    pub success_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<RuntimeStats>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

/// Angle difference in degrees, folded into [-180, 180).
fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + 180.0).rem_euclid(360.0) - 180.0
}

fn axis_errors(est: &PoseRecord, truth: &PoseRecord) -> [f64; 6] {
    let (e, t) = (est.axes(), truth.axes());
    std::array::from_fn(|k| {
        if k < 3 {
            (e[k] - t[k]).abs()
        } else {
            angle_diff(e[k], t[k]).abs()
        }
    })
}

/// Per-axis mean absolute error of `estimate` against `truth`, row by row.
pub fn evaluate(
    method: &str,
    estimate: &[PoseRecord],
    truth: &[PoseRecord],
    bound: SuccessBound,
) -> Result<EvalReport> {
    if estimate.len() != truth.len() {
        return Err(Error::RowMismatch {
            estimate: estimate.len(),
            truth: truth.len(),
        });
    }
    let n = truth.len();
    let mut sum = [0.0; 6];
    let mut lo = [f64::INFINITY; 6];
    let mut hi = [f64::NEG_INFINITY; 6];
    let mut ok = 0;
    for (e, t) in estimate.iter().zip(truth) {
        let err = axis_errors(e, t);
        for k in 0..6 {
            sum[k] += err[k];
            lo[k] = lo[k].min(t.axes()[k]);
            hi[k] = hi[k].max(t.axes()[k]);
        }
        let within = err[..3].iter().all(|&v| v <= bound.translation_mm)
            && err[3..].iter().all(|&v| v <= bound.rotation_deg);
        ok += within as usize;
    }
    let mean = |k: usize| if n == 0 { 0.0 } else { sum[k] / n as f64 };
    let range = |k: usize| if n == 0 { 0.0 } else { hi[k] - lo[k] };
    Ok(EvalReport {
        method: method.to_owned(),
        frames: n,
        mae: AxisValues::from_array(std::array::from_fn(mean)),
        motion_range: AxisValues::from_array(std::array::from_fn(range)),
        success_bound: bound,
        success_rate: if n == 0 { 0.0 } else { ok as f64 / n as f64 },
        runtime: None,
        config: serde_json::Value::Null,
    })
}
