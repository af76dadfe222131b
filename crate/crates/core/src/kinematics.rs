//! Serial-arm kinematics for a configurable dual-arm robot.
//!
//! Forward kinematics, the geometric Jacobian, a joint-limit-penalized
//! manipulability score, and a damped least-squares inverse kinematics
//! solver with random restarts. The robot description is data, not code:
//! any chain of revolute joints with at least six axes works.

use nalgebra::{DMatrix, DVector, Rotation3, Unit, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::se3::{Capsule, Pose, Segment};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("joint vector has {got} angles but the arm has {expected} joints")]
    JointCountMismatch { got: usize, expected: usize },
}

/// One revolute joint: a fixed translation from the parent frame followed by
/// a rotation about `axis`.
#[derive(Clone, Debug)]
pub struct RevoluteJoint {
    /// Joint origin in the parent joint's frame (mm).
    pub offset: Vector3<f64>,
    pub axis: Unit<Vector3<f64>>,
    pub min_deg: f64,
    pub max_deg: f64,
}

/// Collision capsule for the link rooted at a joint frame (local coordinates).
#[derive(Clone, Debug)]
pub struct LinkCapsule {
    pub axis: Segment,
    pub radius: f64,
}

/// Kinematic description of one serial arm.
#[derive(Clone, Debug)]
pub struct ArmModel {
    /// Mount pose of the arm in the robot frame.
    pub base: Pose,
    pub joints: Vec<RevoluteJoint>,
    /// End-effector point in the last joint's frame (mm).
    pub ee_offset: Vector3<f64>,
    /// One capsule per joint frame; index i lives in joint i's rotated frame.
    pub link_capsules: Vec<LinkCapsule>,
}

impl ArmModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Conservative reach bound from the mount point (mm).
    pub fn max_reach(&self) -> f64 {
        let links: f64 = self.joints.iter().skip(1).map(|j| j.offset.norm()).sum();
        links + self.ee_offset.norm()
    }

    pub fn mount_point(&self) -> Vector3<f64> {
        self.base.translation()
    }

    /// Uniformly random joint vector within limits.
    pub fn random_joints(&self, rng: &mut impl Rng) -> JointVector {
        JointVector::new(
            self.joints
                .iter()
                .map(|j| rng.gen_range(j.min_deg..j.max_deg))
                .collect(),
        )
    }

    /// Midpoint of every joint range.
    pub fn midrange_joints(&self) -> JointVector {
        JointVector::new(
            self.joints
                .iter()
                .map(|j| 0.5 * (j.min_deg + j.max_deg))
                .collect(),
        )
    }

    pub fn within_limits(&self, q: &JointVector) -> bool {
        q.angles
            .iter()
            .zip(&self.joints)
            .all(|(a, j)| *a >= j.min_deg - 1e-9 && *a <= j.max_deg + 1e-9)
    }

    pub fn clamp_to_limits(&self, q: &mut JointVector) {
        for (a, j) in q.angles.iter_mut().zip(&self.joints) {
            *a = a.clamp(j.min_deg, j.max_deg);
        }
    }
}

/// Joint configuration in degrees.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JointVector {
    pub angles: Vec<f64>,
}

impl JointVector {
    pub fn new(angles: Vec<f64>) -> Self {
        Self { angles }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            angles: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Largest per-joint absolute difference in degrees.
    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn lerp(&self, other: &JointVector, t: f64) -> JointVector {
        JointVector::new(
            self.angles
                .iter()
                .zip(&other.angles)
                .map(|(a, b)| a + (b - a) * t)
                .collect(),
        )
    }
}

/// Forward-kinematics result: end-effector pose plus every joint frame.
#[derive(Clone, Debug)]
pub struct FkSolution {
    pub ee: Pose,
    /// Frame of each joint after its rotation, in the robot frame.
    pub joint_frames: Vec<Pose>,
}

/// Forward kinematics: chained fixed offsets and joint rotations.
pub fn forward_kinematics(arm: &ArmModel, q: &JointVector) -> Result<FkSolution, KinematicsError> {
    if q.len() != arm.dof() {
        return Err(KinematicsError::JointCountMismatch {
            got: q.len(),
            expected: arm.dof(),
        });
    }
    let mut frames = Vec::with_capacity(arm.dof());
    let mut current = arm.base;
    for (joint, angle_deg) in arm.joints.iter().zip(&q.angles) {
        let local = Pose::new(
            Rotation3::from_axis_angle(&joint.axis, angle_deg.to_radians()),
            joint.offset,
        );
        current = current.compose(&local);
        frames.push(current);
    }
    let ee = current.compose(&Pose::from_translation(arm.ee_offset));
    Ok(FkSolution {
        ee,
        joint_frames: frames,
    })
}

/// World-frame collision capsules for every link at the given configuration.
pub fn link_capsules_world(arm: &ArmModel, fk: &FkSolution) -> Vec<Capsule> {
    arm.link_capsules
        .iter()
        .enumerate()
        .map(|(i, c)| Capsule::new(fk.joint_frames[i].transform_segment(&c.axis), c.radius))
        .collect()
}

/// Geometric Jacobian at the end-effector, 6 x N.
///
/// Rows 0..3 are linear (mm per radian), rows 3..6 angular (per radian).
/// Column j for a revolute joint is (axis x r, axis) with r from the joint
/// origin to the end-effector point.
pub fn jacobian(arm: &ArmModel, q: &JointVector) -> Result<DMatrix<f64>, KinematicsError> {
    let fk = forward_kinematics(arm, q)?;
    Ok(jacobian_from_fk(arm, &fk))
}

pub fn jacobian_from_fk(arm: &ArmModel, fk: &FkSolution) -> DMatrix<f64> {
    let n = arm.dof();
    let p_ee = fk.ee.translation();
    let mut j = DMatrix::zeros(6, n);
    for (col, (joint, frame)) in arm.joints.iter().zip(&fk.joint_frames).enumerate() {
        let axis_world = frame.transform_vector(joint.axis.as_ref());
        let r = p_ee - frame.translation();
        let linear = axis_world.cross(&r);
        for row in 0..3 {
            j[(row, col)] = linear[row];
            j[(row + 3, col)] = axis_world[row];
        }
    }
    j
}

/// Yoshikawa measure sqrt(det(J J^T)) scaled by a joint-limit penalty.
///
/// The penalty for joint j is 4 (q - min)(max - q) / (max - min)^2, which is
/// 1 at midrange and exactly 0 at either limit, so the score vanishes when
/// any joint sits on a limit.
pub fn manipulability(arm: &ArmModel, q: &JointVector) -> Result<f64, KinematicsError> {
    let j = jacobian(arm, q)?;
    Ok(yoshikawa(&j) * limit_penalty(arm, q))
}

pub(crate) fn yoshikawa(j: &DMatrix<f64>) -> f64 {
    let jjt = j * j.transpose();
    jjt.determinant().max(0.0).sqrt()
}

pub(crate) fn limit_penalty(arm: &ArmModel, q: &JointVector) -> f64 {
    arm.joints
        .iter()
        .zip(&q.angles)
        .map(|(joint, &a)| {
            let span = joint.max_deg - joint.min_deg;
            (4.0 * (a - joint.min_deg) * (joint.max_deg - a) / (span * span)).max(0.0)
        })
        .product()
}

/// IK acceptance tolerance.
#[derive(Clone, Copy, Debug)]
pub struct IkTolerance {
    pub position_mm: f64,
    pub rotation_deg: f64,
}

impl Default for IkTolerance {
    fn default() -> Self {
        Self {
            position_mm: 1.0,
            rotation_deg: 0.5,
        }
    }
}

/// Joint-space distance below which two IK solutions count as duplicates.
const IK_DUPLICATE_DEG: f64 = 2.0;
/// Length scale that converts orientation error to the position scale inside
/// the solver.
const IK_ANGULAR_SCALE_MM: f64 = 250.0;
const IK_MAX_ITERS: usize = 300;

/// Damped least-squares IK with random restarts.
///
/// Returns every distinct within-limit solution found across `restarts`
/// attempts, verified against the tolerance; the list may be empty. The
/// first restart starts from midrange, subsequent ones from seeded random
/// configurations, so results are deterministic in `seed`.
pub fn solve_ik(
    arm: &ArmModel,
    target: &Pose,
    restarts: usize,
    tol: IkTolerance,
    seed: u64,
) -> Vec<JointVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solutions: Vec<JointVector> = Vec::new();
    // Reject targets beyond any possible reach before iterating.
    if (target.translation() - arm.mount_point()).norm() > arm.max_reach() + tol.position_mm {
        return solutions;
    }
    for restart in 0..restarts {
        let start = if restart == 0 {
            arm.midrange_joints()
        } else {
            arm.random_joints(&mut rng)
        };
        if let Some(q) = dls_descend(arm, target, start, tol) {
            if solutions
                .iter()
                .all(|existing| existing.max_abs_diff(&q) >= IK_DUPLICATE_DEG)
            {
                solutions.push(q);
            }
        }
    }
    solutions
}

/// One damped-least-squares descent from an explicit seed configuration.
/// Used for tracking: successive nearby targets stay on the same solution
/// branch.
pub fn solve_ik_seeded(
    arm: &ArmModel,
    target: &Pose,
    seed_config: &JointVector,
    tol: IkTolerance,
) -> Option<JointVector> {
    dls_descend(arm, target, seed_config.clone(), tol)
}

/// Position-only IK for a point carried in the end-effector frame: find q
/// so that the world position of `carried_point` (EE-frame, mm) lands on
/// `target`. Orientation is free; 3 constrained DOF leave the arm room to
/// dodge.
pub fn solve_ik_point_seeded(
    arm: &ArmModel,
    carried_point: &Vector3<f64>,
    target: &Vector3<f64>,
    seed_config: &JointVector,
    tol_mm: f64,
) -> Option<JointVector> {
    dls_point_descend(arm, carried_point, target, seed_config.clone(), tol_mm)
}

/// Restart wrapper around [`solve_ik_point_seeded`].
pub fn solve_ik_point(
    arm: &ArmModel,
    carried_point: &Vector3<f64>,
    target: &Vector3<f64>,
    restarts: usize,
    tol_mm: f64,
    seed: u64,
) -> Vec<JointVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solutions: Vec<JointVector> = Vec::new();
    if (target - arm.mount_point()).norm() > arm.max_reach() + carried_point.norm() + tol_mm {
        return solutions;
    }
    for restart in 0..restarts {
        let start = if restart == 0 {
            arm.midrange_joints()
        } else {
            arm.random_joints(&mut rng)
        };
        if let Some(q) = dls_point_descend(arm, carried_point, target, start, tol_mm) {
            if solutions
                .iter()
                .all(|existing| existing.max_abs_diff(&q) >= IK_DUPLICATE_DEG)
            {
                solutions.push(q);
            }
        }
    }
    solutions
}

fn carried_point_world(arm: &ArmModel, fk: &FkSolution, carried: &Vector3<f64>) -> Vector3<f64> {
    fk.ee.transform_point(carried)
}

fn dls_point_descend(
    arm: &ArmModel,
    carried: &Vector3<f64>,
    target: &Vector3<f64>,
    mut q: JointVector,
    tol_mm: f64,
) -> Option<JointVector> {
    let n = arm.dof();
    let mut lambda = 0.1;
    let mut fk = forward_kinematics(arm, &q).ok()?;
    let mut err = target - carried_point_world(arm, &fk, carried);
    let mut err_norm = err.norm();
    let mut stall = 0usize;

    for _ in 0..IK_MAX_ITERS {
        if err_norm <= tol_mm {
            return Some(q);
        }
        // Linear Jacobian of the carried point: axis x (point - joint).
        let point = carried_point_world(arm, &fk, carried);
        let mut j = DMatrix::zeros(3, n);
        for (col, (joint, frame)) in arm.joints.iter().zip(&fk.joint_frames).enumerate() {
            let axis_world = frame.transform_vector(joint.axis.as_ref());
            let linear = axis_world.cross(&(point - frame.translation()));
            for row in 0..3 {
                j[(row, col)] = linear[row];
            }
        }
        let jjt = &j * j.transpose();
        let damped = jjt + DMatrix::identity(3, 3) * (lambda * lambda);
        let rhs = DVector::from_row_slice(err.as_slice());
        let Some(y) = damped.lu().solve(&rhs) else {
            return None;
        };
        let dq_rad = j.transpose() * y;

        let max_step_deg = 20.0;
        let mut scale = 1.0;
        let largest = dq_rad.amax().to_degrees();
        if largest > max_step_deg {
            scale = max_step_deg / largest;
        }
        let mut candidate = q.clone();
        for (a, d) in candidate.angles.iter_mut().zip(dq_rad.iter()) {
            *a += d.to_degrees() * scale;
        }
        arm.clamp_to_limits(&mut candidate);

        let cand_fk = forward_kinematics(arm, &candidate).ok()?;
        let cand_err = target - carried_point_world(arm, &cand_fk, carried);
        let cand_norm = cand_err.norm();
        if cand_norm < err_norm {
            q = candidate;
            fk = cand_fk;
            err = cand_err;
            if cand_norm < 0.999 * err_norm {
                stall = 0;
            } else {
                stall += 1;
            }
            err_norm = cand_norm;
            lambda = (lambda * 0.5).max(1e-4);
        } else {
            lambda *= 4.0;
            stall += 1;
            if lambda > 1e6 {
                break;
            }
        }
        if stall > 25 {
            break;
        }
    }
    if err_norm <= tol_mm {
        Some(q)
    } else {
        None
    }
}

/// Pose error as a 6-vector: translation residual in mm and rotation residual
/// scaled to mm via `IK_ANGULAR_SCALE_MM`.
fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.translation() - current.translation();
    let rel = *target.rotation() * current.rotation().inverse();
    let scaled = rel.scaled_axis() * IK_ANGULAR_SCALE_MM;
    Vector6::new(dp.x, dp.y, dp.z, scaled.x, scaled.y, scaled.z)
}

fn error_within(current: &Pose, target: &Pose, tol: IkTolerance) -> bool {
    current.translation_distance_to(target) <= tol.position_mm
        && current.rotation_angle_to(target) <= tol.rotation_deg
}

fn dls_descend(
    arm: &ArmModel,
    target: &Pose,
    mut q: JointVector,
    tol: IkTolerance,
) -> Option<JointVector> {
    let n = arm.dof();
    let mut lambda = 0.1;
    let mut fk = forward_kinematics(arm, &q).ok()?;
    let mut err = pose_error(&fk.ee, target);
    let mut err_norm = err.norm();
    let mut stall = 0usize;

    for _ in 0..IK_MAX_ITERS {
        if error_within(&fk.ee, target, tol) {
            return Some(q);
        }
        let j = {
            let mut j = jacobian_from_fk(arm, &fk);
            for col in 0..n {
                for row in 3..6 {
                    j[(row, col)] *= IK_ANGULAR_SCALE_MM;
                }
            }
            j
        };
        let jjt = &j * j.transpose();
        let damped = jjt + DMatrix::identity(6, 6) * (lambda * lambda);
        let rhs = DVector::from_row_slice(err.as_slice());
        let Some(y) = damped.lu().solve(&rhs) else {
            return None;
        };
        let dq_rad = j.transpose() * y;

        // Cap the joint step to keep the linearization honest.
        let max_step_deg = 20.0;
        let mut scale = 1.0;
        let largest = dq_rad.amax().to_degrees();
        if largest > max_step_deg {
            scale = max_step_deg / largest;
        }

        let mut candidate = q.clone();
        for (a, d) in candidate.angles.iter_mut().zip(dq_rad.iter()) {
            *a += d.to_degrees() * scale;
        }
        arm.clamp_to_limits(&mut candidate);

        let cand_fk = forward_kinematics(arm, &candidate).ok()?;
        let cand_err = pose_error(&cand_fk.ee, target);
        let cand_norm = cand_err.norm();
        if cand_norm < err_norm {
            q = candidate;
            fk = cand_fk;
            err = cand_err;
            if cand_norm < 0.999 * err_norm {
                stall = 0;
            } else {
                stall += 1;
            }
            err_norm = cand_norm;
            lambda = (lambda * 0.5).max(1e-4);
        } else {
            lambda *= 4.0;
            stall += 1;
            if lambda > 1e6 {
                break;
            }
        }
        if stall > 25 {
            break;
        }
    }
    if error_within(&fk.ee, target, tol) {
        Some(q)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ArmSide {
    Right,
    Left,
}

impl ArmSide {
    pub fn opposite(self) -> ArmSide {
        match self {
            ArmSide::Right => ArmSide::Left,
            ArmSide::Left => ArmSide::Right,
        }
    }
}

/// Parallel-gripper stroke limits (mm).
#[derive(Clone, Copy, Debug)]
pub struct GripperSpec {
    pub min_width: f64,
    pub max_width: f64,
}

/// The full robot: two arms plus gripper limits and parked configurations.
#[derive(Clone, Debug)]
pub struct DualArmRobot {
    pub right: ArmModel,
    pub left: ArmModel,
    pub gripper: GripperSpec,
    pub home_right: JointVector,
    pub home_left: JointVector,
}

impl DualArmRobot {
    pub fn arm(&self, side: ArmSide) -> &ArmModel {
        match side {
            ArmSide::Right => &self.right,
            ArmSide::Left => &self.left,
        }
    }

    pub fn home(&self, side: ArmSide) -> &JointVector {
        match side {
            ArmSide::Right => &self.home_right,
            ArmSide::Left => &self.home_left,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight chain along +x with the classic 300/250/250/100/100/80 links.
    pub(crate) fn straight_test_arm() -> ArmModel {
        let lengths = [0.0, 300.0, 250.0, 250.0, 100.0, 100.0];
        let axes: [Unit<Vector3<f64>>; 6] = [
            Vector3::z_axis(),
            Vector3::y_axis(),
            Vector3::y_axis(),
            Vector3::x_axis(),
            Vector3::y_axis(),
            Vector3::x_axis(),
        ];
        let joints = lengths
            .iter()
            .zip(axes.iter())
            .enumerate()
            .map(|(i, (len, axis))| RevoluteJoint {
                offset: Vector3::new(*len, 0.0, 0.0),
                axis: *axis,
                min_deg: if i == 2 { 0.0 } else { -170.0 },
                max_deg: if i == 2 { 150.0 } else { 170.0 },
            })
            .collect::<Vec<_>>();
        let link_capsules = joints
            .iter()
            .skip(1)
            .map(|j| LinkCapsule {
                axis: Segment::new(Vector3::zeros(), j.offset),
                radius: 45.0,
            })
            .chain(std::iter::once(LinkCapsule {
                axis: Segment::new(Vector3::zeros(), Vector3::new(80.0, 0.0, 0.0)),
                radius: 35.0,
            }))
            .collect();
        ArmModel {
            base: Pose::identity(),
            joints,
            ee_offset: Vector3::new(80.0, 0.0, 0.0),
            link_capsules,
        }
    }

    /// Independent FK oracle: multiply out plain 3x3/3x1 matrix blocks per
    /// joint without going through `Pose`.
    fn naive_fk(arm: &ArmModel, q: &JointVector) -> Vector3<f64> {
        let mut r = arm.base.rotation_matrix().to_owned();
        let mut t = arm.base.translation();
        for (joint, angle) in arm.joints.iter().zip(&q.angles) {
            t += r * joint.offset;
            let rot: Matrix3<f64> =
                *Rotation3::from_axis_angle(&joint.axis, angle.to_radians()).matrix();
            r *= rot;
        }
        t + r * arm.ee_offset
    }

    #[test]
    fn zero_configuration_reaches_summed_offsets() {
        let arm = straight_test_arm();
        let fk = forward_kinematics(&arm, &JointVector::zeros(6)).unwrap();
        assert_relative_eq!(
            fk.ee.translation(),
            Vector3::new(1080.0, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn wrist_roll_leaves_ee_position_fixed() {
        let arm = straight_test_arm();
        let mut q = JointVector::zeros(6);
        let p0 = forward_kinematics(&arm, &q).unwrap().ee.translation();
        q.angles[5] = 77.0;
        let p1 = forward_kinematics(&arm, &q).unwrap().ee.translation();
        // Final joint axis (+x) passes through the end-effector point.
        assert_relative_eq!(p0, p1, epsilon = 1e-9);
    }

    #[test]
    fn fk_matches_naive_chain_oracle() {
        let arm = straight_test_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q = arm.random_joints(&mut rng);
            let fast = forward_kinematics(&arm, &q).unwrap().ee.translation();
            let oracle = naive_fk(&arm, &q);
            assert!((fast - oracle).norm() < 1e-6, "q = {:?}", q.angles);
        }
    }

    #[test]
    fn joint_count_mismatch_is_reported() {
        let arm = straight_test_arm();
        let err = forward_kinematics(&arm, &JointVector::zeros(4)).unwrap_err();
        assert!(matches!(
            err,
            KinematicsError::JointCountMismatch { got: 4, expected: 6 }
        ));
    }

    #[test]
    fn jacobian_shape_and_axis_rows() {
        let arm = straight_test_arm();
        let q = JointVector::zeros(6);
        let j = jacobian(&arm, &q).unwrap();
        assert_eq!(j.ncols(), 6);
        assert_eq!(j.nrows(), 6);
        // Joint 0 axis is +z at zero configuration: rotational rows = (0,0,1).
        assert_relative_eq!(j[(3, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(j[(4, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(j[(5, 0)], 1.0, epsilon = 1e-12);
        // Joint 5 axis (+x) is parallel to r: linear column is zero.
        for row in 0..3 {
            assert_relative_eq!(j[(row, 5)], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let arm = straight_test_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let delta_deg = 1e-4;
        for _ in 0..100 {
            let q = arm.random_joints(&mut rng);
            let j = jacobian(&arm, &q).unwrap();
            let p0 = forward_kinematics(&arm, &q).unwrap().ee.translation();
            for col in 0..6 {
                let mut qd = q.clone();
                qd.angles[col] += delta_deg;
                let p1 = forward_kinematics(&arm, &qd).unwrap().ee.translation();
                let predicted = Vector3::new(j[(0, col)], j[(1, col)], j[(2, col)])
                    * delta_deg.to_radians();
                assert!(
                    (predicted - (p1 - p0)).norm() <= 1e-3,
                    "column {col} disagrees"
                );
            }
        }
    }

    #[test]
    fn manipulability_zero_at_limit() {
        let arm = straight_test_arm();
        let mut q = arm.midrange_joints();
        q.angles[2] = 150.0; // elbow at its max
        assert_eq!(manipulability(&arm, &q).unwrap(), 0.0);
    }

    #[test]
    fn manipulability_midrange_has_unit_penalty() {
        let arm = straight_test_arm();
        let q = arm.midrange_joints();
        let j = jacobian(&arm, &q).unwrap();
        assert_relative_eq!(
            manipulability(&arm, &q).unwrap(),
            yoshikawa(&j),
            max_relative = 1e-12
        );
        assert_relative_eq!(limit_penalty(&arm, &q), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn limit_penalty_decreases_toward_limit() {
        let arm = straight_test_arm();
        let mut previous = f64::INFINITY;
        for step in 0..10 {
            let mut q = arm.midrange_joints();
            q.angles[1] = q.angles[1] + step as f64 * 16.0;
            let p = limit_penalty(&arm, &q);
            assert!(p < previous, "penalty must strictly decrease");
            previous = p;
        }
    }

    #[test]
    fn ik_roundtrip_from_fk_targets() {
        let arm = straight_test_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let tol = IkTolerance::default();
        let mut hits = 0;
        let total = 40;
        for i in 0..total {
            let q0 = arm.random_joints(&mut rng);
            let target = forward_kinematics(&arm, &q0).unwrap().ee;
            let sols = solve_ik(&arm, &target, 20, tol, 1000 + i);
            if sols.is_empty() {
                continue;
            }
            hits += 1;
            for s in &sols {
                let fk = forward_kinematics(&arm, s).unwrap();
                assert!(fk.ee.translation_distance_to(&target) <= tol.position_mm);
                assert!(fk.ee.rotation_angle_to(&target) <= tol.rotation_deg);
                assert!(arm.within_limits(s));
            }
        }
        assert!(hits * 100 >= total * 95, "solved {hits}/{total}");
    }

    #[test]
    fn ik_unreachable_target_returns_empty() {
        let arm = straight_test_arm();
        let target = Pose::from_translation(Vector3::new(10_000.0, 0.0, 0.0));
        assert!(solve_ik(&arm, &target, 5, IkTolerance::default(), 3).is_empty());
    }

    #[test]
    fn ik_deterministic_in_seed() {
        let arm = straight_test_arm();
        let target = forward_kinematics(&arm, &JointVector::new(vec![
            10.0, 35.0, 70.0, 20.0, 40.0, 15.0,
        ]))
        .unwrap()
        .ee;
        let a = solve_ik(&arm, &target, 10, IkTolerance::default(), 99);
        let b = solve_ik(&arm, &target, 10, IkTolerance::default(), 99);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.angles, y.angles);
        }
    }
}
