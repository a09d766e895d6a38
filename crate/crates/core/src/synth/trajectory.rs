//! Object-pose sequences built from roll, twist and slide segments.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::RigidTransform;

/// Default spacing between frame timestamps, seconds.
pub const DEFAULT_FRAME_INTERVAL: f64 = 1.0 / 30.0;

/// One motion primitive. A segment of `steps` steps adds `steps` poses after
/// the pose it starts from; motion is linear in the step index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSegment {
    /// Rotation about a sensor-frame axis through the object's pivot.
    Roll {
        axis: [f64; 3],
        angle_deg: f64,
        steps: usize,
        /// Object-frame pivot; defaults to the scene's natural center.
        #[serde(default)]
        pivot: Option<[f64; 3]>,
    },
    /// Rotation about the sensor z-axis through the object's pivot.
    Twist { angle_deg: f64, steps: usize },
    /// Sensor-frame translation.
    Slide { vector: [f64; 3], steps: usize },
}

impl MotionSegment {
    fn steps(&self) -> usize {
        match *self {
            MotionSegment::Roll { steps, .. }
            | MotionSegment::Twist { steps, .. }
            | MotionSegment::Slide { steps, .. } => steps,
        }
    }

    /// Pose after `k` of this segment's steps, starting from `start`.
    fn pose_at(
        &self,
        start: &RigidTransform,
        default_pivot: &Vector3<f64>,
        k: usize,
    ) -> RigidTransform {
        let s = k as f64 / self.steps() as f64;
        let motion = match self {
            MotionSegment::Roll {
                axis,
                angle_deg,
                pivot,
                ..
            } => {
                let p = pivot.map(Vector3::from).unwrap_or(*default_pivot);
                RigidTransform::rotation_about(
                    Vector3::from(*axis),
                    (angle_deg * s).to_radians(),
                    start.apply(&p),
                )
            }
            MotionSegment::Twist { angle_deg, .. } => RigidTransform::rotation_about(
                Vector3::z(),
                (angle_deg * s).to_radians(),
                start.apply(default_pivot),
            ),
            MotionSegment::Slide { vector, .. } => {
                RigidTransform::from_translation(Vector3::from(*vector) * s)
            }
        };
        motion.compose(start)
    }
}

/// Object poses (object frame to sensor frame) with per-frame timestamps.
/// The first pose is the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    poses: Vec<RigidTransform>,
    timestamps: Vec<f64>,
}

impl TrajectorySpec {
    pub fn new(poses: Vec<RigidTransform>, timestamps: Vec<f64>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::Config("trajectory needs at least one pose".into()));
        }
        if poses.len() != timestamps.len() {
            return Err(Error::Config(format!(
                "{} poses but {} timestamps",
                poses.len(),
                timestamps.len()
            )));
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(TrajectorySpec { poses, timestamps })
    }

    /// A single pose at time zero.
    pub fn stationary(pose: RigidTransform) -> Self {
        TrajectorySpec {
            poses: vec![pose],
            timestamps: vec![0.0],
        }
    }

    /// Chains segments starting from `start`.
    pub fn composite(
        start: RigidTransform,
        segments: &[MotionSegment],
        default_pivot: Vector3<f64>,
        frame_interval: f64,
    ) -> Result<Self> {
        if !(frame_interval > 0.0) {
            return Err(Error::Config("frame_interval must be positive".into()));
        }
        let mut poses = vec![start];
        for seg in segments {
            if seg.steps() == 0 {
                return Err(Error::Config("segment steps must be at least 1".into()));
            }
            let from = *poses.last().unwrap();
            poses.extend((1..=seg.steps()).map(|k| seg.pose_at(&from, &default_pivot, k)));
        }
        let timestamps = (0..poses.len())
            .map(|i| i as f64 * frame_interval)
            .collect();
        TrajectorySpec::new(poses, timestamps)
    }

    pub fn roll(
        axis: Vector3<f64>,
        angle_deg: f64,
        steps: usize,
        pivot: Vector3<f64>,
    ) -> Result<Self> {
        let seg = MotionSegment::Roll {
            axis: axis.into(),
            angle_deg,
            steps,
            pivot: None,
        };
        Self::composite(
            RigidTransform::identity(),
            &[seg],
            pivot,
            DEFAULT_FRAME_INTERVAL,
        )
    }

    pub fn twist(angle_deg: f64, steps: usize, pivot: Vector3<f64>) -> Result<Self> {
        let seg = MotionSegment::Twist { angle_deg, steps };
        Self::composite(
            RigidTransform::identity(),
            &[seg],
            pivot,
            DEFAULT_FRAME_INTERVAL,
        )
    }

    pub fn slide(vector: Vector3<f64>, steps: usize) -> Result<Self> {
        let seg = MotionSegment::Slide {
            vector: vector.into(),
            steps,
        };
        Self::composite(
            RigidTransform::identity(),
            &[seg],
            Vector3::zeros(),
            DEFAULT_FRAME_INTERVAL,
        )
    }

    pub fn poses(&self) -> &[RigidTransform] {
        &self.poses
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Ground-truth motion of frame `i` relative to frame 0, as a map from
    /// frame-0 sensor coordinates to frame-`i` sensor coordinates.
    pub fn relative_to_first(&self, i: usize) -> RigidTransform {
        self.poses[i].compose(&self.poses[0].inverse())
    }
}
