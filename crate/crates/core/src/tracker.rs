//! Keyframe-based long-horizon tracking and single-loop closure.
//!
//! Every frame is registered against the latest keyframe; a pose is the
//! keyframe chain composed with that last leg. The previous frame is
//! promoted to keyframe when the keyframe leg and the frame-to-frame
//! estimate stop agreeing, which signals the keyframe estimate degrading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::TactileFrame;
use crate::se3::{se3_exp, se3_log, transform_distance, RigidTransform};
use crate::solver::{register, RegistrationResult, SolverConfig};

/// A pairwise registration method the tracker can drive.
pub trait Registrar {
    /// Transform from `reference` to `target`, refined from `init`.
    fn register(
        &self,
        reference: &TactileFrame,
        target: &TactileFrame,
        init: &RigidTransform,
    ) -> Result<RegistrationResult>;

    /// How many reference samples `shared_pixels` is counted out of.
    fn support(&self, reference: &TactileFrame) -> usize;
}

impl Registrar for SolverConfig {
    fn register(
        &self,
        reference: &TactileFrame,
        target: &TactileFrame,
        init: &RigidTransform,
    ) -> Result<RegistrationResult> {
        register(reference, target, init, self)
    }

    fn support(&self, reference: &TactileFrame) -> usize {
        reference.contact_pixels().min(self.subsample_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeyframePolicy {
    /// Radians.
    pub rot_threshold: f64,
    /// Millimeters.
    pub trans_threshold: f64,
    /// Fraction of the keyframe's sampled contact that must stay shared with
    /// the current frame; below it the keyframe leg is treated as degraded.
    pub min_overlap: f64,
}

impl Default for KeyframePolicy {
    fn default() -> Self {
        KeyframePolicy {
            rot_threshold: 0.05,
            trans_threshold: 0.3,
            min_overlap: 0.35,
        }
    }
}

impl KeyframePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.rot_threshold > 0.0 && self.trans_threshold > 0.0) {
            return Err(Error::Config("keyframe thresholds must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.min_overlap) {
            return Err(Error::Config("min_overlap must be in [0, 1)".into()));
        }
        Ok(())
    }

    fn within(&self, (angle, dist): (f64, f64)) -> bool {
        angle <= self.rot_threshold && dist <= self.trans_threshold
    }
}

/// Outcome of tracking one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub index: usize,
    /// First frame to this frame.
    pub pose: RigidTransform,
    pub promoted: bool,
    pub lost: bool,
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    keyframe: TactileFrame,
    keyframe_index: usize,
    /// First frame to the latest keyframe.
    chain_transform: RigidTransform,
    prev_frame: TactileFrame,
    prev_index: usize,
    /// Keyframe to previous frame.
    prev_to_key: RigidTransform,
    /// Motion between the two most recent good frames.
    last_motion: RigidTransform,
    keyframe_indices: Vec<usize>,
    poses: Vec<RigidTransform>,
    lost: Vec<bool>,
}

impl TrackerState {
    /// Starts tracking with `first` as frame 0 and the initial keyframe.
    pub fn new(first: TactileFrame) -> Self {
        TrackerState {
            keyframe: first.clone(),
            keyframe_index: 0,
            chain_transform: RigidTransform::identity(),
            prev_frame: first,
            prev_index: 0,
            prev_to_key: RigidTransform::identity(),
            last_motion: RigidTransform::identity(),
            keyframe_indices: vec![0],
            poses: vec![RigidTransform::identity()],
            lost: vec![false],
        }
    }

    pub fn poses(&self) -> &[RigidTransform] {
        &self.poses
    }

    pub fn keyframe_indices(&self) -> &[usize] {
        &self.keyframe_indices
    }

    pub fn lost_flags(&self) -> &[bool] {
        &self.lost
    }

    pub fn chain_transform(&self) -> &RigidTransform {
        &self.chain_transform
    }

    pub fn frames_processed(&self) -> usize {
        self.poses.len()
    }

    /// Poses of the keyframes, in order.
    pub fn keyframe_poses(&self) -> Vec<RigidTransform> {
        self.keyframe_indices
            .iter()
            .map(|&i| self.poses[i])
            .collect()
    }

    fn can_promote_prev(&self) -> bool {
        self.prev_index > self.keyframe_index + 1
    }

    fn promote_prev(&mut self) {
        self.chain_transform = self.prev_to_key.compose(&self.chain_transform);
        self.keyframe = self.prev_frame.clone();
        self.keyframe_index = self.prev_index;
        self.keyframe_indices.push(self.prev_index);
    }
}

/// Tracks one frame, updating `state`. Solver failures do not abort: the
/// frame is flagged lost and its pose frozen at the last good estimate.
pub fn track_step<R: Registrar + ?Sized>(
    state: &mut TrackerState,
    frame: TactileFrame,
    policy: &KeyframePolicy,
    reg: &R,
) -> Result<StepOutcome> {
    state.keyframe.same_geometry(&frame)?;
    let index = state.poses.len();
    let prev_is_key = state.prev_index == state.keyframe_index;

    let init = state.last_motion.compose(&state.prev_to_key);
    let to_key = reg.register(&state.keyframe, &frame, &init);
    let to_prev = if prev_is_key {
        None
    } else {
        Some(reg.register(&state.prev_frame, &frame, &RigidTransform::identity()))
    };

    let support = reg.support(&state.keyframe) as f64;
    let thin = |r: &RegistrationResult| (r.shared_pixels as f64) < policy.min_overlap * support;

    // Promotion replaces the keyframe leg with `cp`, which already registers
    // the current frame against the new keyframe.
    let mut promoted = false;
    let leg = match (to_key, to_prev) {
        (Ok(ck), None) => Some((
            ck.transform,
            ck.transform.compose(&state.prev_to_key.inverse()),
        )),
        (Ok(ck), Some(Ok(cp))) => {
            let implied = cp.transform.inverse().compose(&ck.transform);
            let drifted = !policy.within(transform_distance(&implied, &state.prev_to_key));
            if (drifted || thin(&ck)) && state.can_promote_prev() {
                state.promote_prev();
                promoted = true;
                Some((cp.transform, cp.transform))
            } else {
                Some((ck.transform, cp.transform))
            }
        }
        (Ok(ck), Some(Err(_))) => {
            let motion = ck.transform.compose(&state.prev_to_key.inverse());
            Some((ck.transform, motion))
        }
        (Err(_), Some(Ok(cp))) => {
            if state.can_promote_prev() {
                state.promote_prev();
                promoted = true;
                Some((cp.transform, cp.transform))
            } else {
                Some((cp.transform.compose(&state.prev_to_key), cp.transform))
            }
        }
        (Err(_), None) | (Err(_), Some(Err(_))) => None,
    };

    let Some((leg, motion)) = leg else {
        let pose = *state.poses.last().expect("pose log starts non-empty");
        state.poses.push(pose);
        state.lost.push(true);
        return Ok(StepOutcome {
            index,
            pose,
            promoted: false,
            lost: true,
        });
    };

    let pose = leg.compose(&state.chain_transform);
    state.prev_frame = frame;
    state.prev_index = index;
    state.prev_to_key = leg;
    state.last_motion = motion;
    state.poses.push(pose);
    state.lost.push(false);
    Ok(StepOutcome {
        index,
        pose,
        promoted,
        lost: false,
    })
}

/// Tracks a whole sequence; returns the final state.
pub fn track_sequence<R: Registrar + ?Sized>(
    frames: impl IntoIterator<Item = TactileFrame>,
    policy: &KeyframePolicy,
    reg: &R,
) -> Result<TrackerState> {
    policy.validate()?;
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::Config("cannot track an empty sequence".into()))?;
    let mut state = TrackerState::new(first);
    for f in frames {
        track_step(&mut state, f, policy, reg)?;
    }
    Ok(state)
}

/// Frame-to-frame composition without keyframes, for comparison.
/// Failed registrations repeat the previous pose.
pub fn track_naive<R: Registrar + ?Sized>(
    frames: &[TactileFrame],
    reg: &R,
) -> Result<Vec<RigidTransform>> {
    let mut poses = vec![RigidTransform::identity()];
    let mut motion = RigidTransform::identity();
    let mut last_good = 0;
    for i in 1..frames.len() {
        frames[0].same_geometry(&frames[i])?;
        let pose = *poses.last().unwrap();
        match reg.register(&frames[last_good], &frames[i], &motion) {
            Ok(r) => {
                motion = r.transform;
                last_good = i;
                poses.push(r.transform.compose(&pose));
            }
            Err(_) => poses.push(pose),
        }
    }
    Ok(poses)
}

/// Index 0 when the current pose is back within the policy thresholds of
/// the first frame.
pub fn detect_loop_candidate(state: &TrackerState, policy: &KeyframePolicy) -> Option<usize> {
    let pose = state.poses.last()?;
    policy
        .within(transform_distance(pose, &RigidTransform::identity()))
        .then_some(0)
}

/// The logged frame closest to the first one, searched among frames after
/// the trajectory first leaves the policy region around the start.
pub fn find_loop_frame(poses: &[RigidTransform], policy: &KeyframePolicy) -> Option<usize> {
    let start = RigidTransform::identity();
    let away = poses
        .iter()
        .position(|p| !policy.within(transform_distance(p, &start)))?;
    let score = |p: &RigidTransform| {
        let (angle, dist) = transform_distance(p, &start);
        angle / policy.rot_threshold + dist / policy.trans_threshold
    };
    (away..poses.len())
        .filter(|&i| policy.within(transform_distance(&poses[i], &start)))
        .min_by(|&a, &b| score(&poses[a]).total_cmp(&score(&poses[b])))
}

/// Distributes the loop error evenly along a chain of poses (first frame to
/// node `i`). The loop constraint is the measured first-to-last transform;
/// node `i` of `n` receives `exp((i/n) log E)` with `E = M X_n^-1`, so the
/// last node lands exactly on the constraint.
pub fn close_loop(
    poses: &[RigidTransform],
    constraint: &RegistrationResult,
) -> Result<Vec<RigidTransform>> {
    if !constraint.converged {
        return Err(Error::InvalidLoop(
            "loop constraint registration did not converge".into(),
        ));
    }
    distribute_loop_error(poses, &constraint.transform)
}

/// [`close_loop`] with a bare constraint transform.
pub fn distribute_loop_error(
    poses: &[RigidTransform],
    constraint: &RigidTransform,
) -> Result<Vec<RigidTransform>> {
    if poses.len() < 2 {
        return Err(Error::InvalidLoop(format!(
            "need at least 2 poses, got {}",
            poses.len()
        )));
    }
    let n = poses.len() - 1;
    let log_e = se3_log(&constraint.compose(&poses[n].inverse()));
    let mut out: Vec<RigidTransform> = poses
        .iter()
        .enumerate()
        .map(|(i, x)| se3_exp(&(log_e * (i as f64 / n as f64))).compose(x))
        .collect();
    out[n] = *constraint;
    Ok(out)
}

/// Applies a loop correction to every frame's pose. `nodes` are the frame
/// indices of the loop nodes (first is 0, last is the loop frame); frames
/// between nodes get a correction interpolated by their fractional position,
/// frames past the last node the full correction.
pub fn correct_pose_log(
    poses: &[RigidTransform],
    nodes: &[usize],
    constraint: &RigidTransform,
) -> Result<Vec<RigidTransform>> {
    if nodes.len() < 2 || nodes[0] != 0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidLoop(
            "loop nodes must start at 0 and increase strictly".into(),
        ));
    }
    let last = *nodes.last().unwrap();
    if last >= poses.len() {
        return Err(Error::InvalidLoop(format!(
            "loop frame {last} is beyond the {} logged poses",
            poses.len()
        )));
    }
    let n = (nodes.len() - 1) as f64;
    let log_e = se3_log(&constraint.compose(&poses[last].inverse()));
    let mut seg = 0;
    let corrected = poses
        .iter()
        .enumerate()
        .map(|(f, x)| {
            if f == last {
                return *constraint;
            }
            let s = if f > last {
                1.0
            } else {
                while nodes[seg + 1] < f {
                    seg += 1;
                }
                let (a, b) = (nodes[seg], nodes[seg + 1]);
                (seg as f64 + (f - a) as f64 / (b - a) as f64) / n
            };
            se3_exp(&(log_e * s)).compose(x)
        })
        .collect();
    Ok(corrected)
}
