//! Object Manipulation Motion Sequence: single-arm pick-and-place of the
//! tool through ordered goal poses, plus the fixed-exchange handover
//! baseline.
//!
//! The tool arm grasps the tool at its start pose with one database grasp
//! and keeps it for the whole task; goal-to-goal connections are planned by
//! RRT-connect in joint space and densified to the interpolation contract.
//! The cable is deliberately ignored while planning: cable metrics are
//! obtained by replaying the finished sequence through the accumulation
//! tracker.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cable::{AccumulationTracker, CableState};
use crate::collision::{robot_collision_free, HeldObject, RobotPosture};
use crate::derive_seed;
use crate::grasp::{grasp_world_pose, GraspCandidate};
use crate::kinematics::{
    forward_kinematics, link_capsules_world, solve_ik, ArmSide, JointVector,
};
use crate::rrt::{plan_joint_path, RrtParams};
use crate::scene::{Scene, CABLE_ARM, TOOL_ARM, TOOL_OBJECT};
use crate::se3::{capsule_capsule_clearance, Pose};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no grasp: no database grasp is IK-feasible and collision-free at every pose")]
    NoGrasp,
    #[error("no path: RRT budget exhausted for segment '{segment}'")]
    NoPath { segment: String },
    #[error("no slider grasp reaches the slider rest position")]
    NoSliderGrasp,
    #[error("replan OMMS: {diagnostics}")]
    ReplanOmms { diagnostics: String },
}

/// Phase tag carried by every step of a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Approach,
    Transfer,
    Place,
    CableFollow,
}

/// One synchronized step: both arms' joints plus derived object and cable
/// quantities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanState {
    pub step: usize,
    pub q_tool: JointVector,
    pub q_cable: JointVector,
    #[serde(with = "crate::se3::pose_serde")]
    pub tool_pose: Pose,
    #[serde(with = "crate::se3::pose_serde_opt")]
    pub slider_pose: Option<Pose>,
    pub cable: CableState,
    /// Accumulation around the end-effector after this step (degrees).
    pub acc_ee: f64,
    /// Accumulation around the tool after this step (degrees).
    pub acc_tool: f64,
}

/// An ordered, densely interpolated motion plan.
#[derive(Clone, Debug)]
pub struct MotionSequence {
    pub states: Vec<PlanState>,
    pub phases: Vec<Phase>,
}

#[derive(Serialize, Deserialize)]
struct TraceLine {
    phase: Phase,
    state: PlanState,
}

impl MotionSequence {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max_acc_ee(&self) -> f64 {
        self.states.iter().map(|s| s.acc_ee).fold(0.0, f64::max)
    }

    pub fn mean_acc_ee(&self) -> f64 {
        if self.states.is_empty() {
            return 0.0;
        }
        self.states.iter().map(|s| s.acc_ee).sum::<f64>() / self.states.len() as f64
    }

    /// Line-delimited trace: one JSON record per state.
    pub fn write_trace<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for (state, phase) in self.states.iter().zip(&self.phases) {
            let line = serde_json::to_string(&TraceLine {
                phase: *phase,
                state: state.clone(),
            })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_trace<R: std::io::BufRead>(r: R) -> std::io::Result<MotionSequence> {
        let mut states = Vec::new();
        let mut phases = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceLine = serde_json::from_str(&line)?;
            states.push(rec.state);
            phases.push(rec.phase);
        }
        Ok(MotionSequence { states, phases })
    }
}

/// Densify a joint path so consecutive configurations differ by at most
/// `max_step_deg` per joint; endpoints are preserved exactly.
pub fn interpolate(path: &[JointVector], max_step_deg: f64) -> Vec<JointVector> {
    assert!(!path.is_empty(), "path must be non-empty");
    let mut out = vec![path[0].clone()];
    for pair in path.windows(2) {
        let span = pair[0].max_abs_diff(&pair[1]);
        let n = (span / max_step_deg).ceil().max(1.0) as usize;
        for i in 1..n {
            out.push(pair[0].lerp(&pair[1], i as f64 / n as f64));
        }
        out.push(pair[1].clone());
    }
    out
}

/// Cartesian density bounds for tool-carrying motion: the cable arm must
/// be able to track the slider goals one synchronized step at a time.
const TRACK_TRANS_MM: f64 = 25.0;
const TRACK_ROT_DEG: f64 = 3.0;
const TRACK_SPLIT_DEPTH: usize = 6;

/// Densify a carrying leg so that consecutive steps keep both the joint
/// contract and the carried object's Cartesian motion small.
pub(crate) fn densify_carry_leg(
    arm: &crate::kinematics::ArmModel,
    hand_local: &Pose,
    path: &[JointVector],
    step_deg: f64,
) -> Vec<JointVector> {
    let base = interpolate(path, step_deg);
    let tool_pose = |q: &JointVector| -> Option<Pose> {
        forward_kinematics(arm, q)
            .ok()
            .map(|fk| fk.ee.compose(&hand_local.inverse()))
    };
    let mut out = vec![base[0].clone()];
    for next in base.into_iter().skip(1) {
        let prev = out.last().unwrap().clone();
        push_refined(arm, &tool_pose, prev, next, TRACK_SPLIT_DEPTH, &mut out);
    }
    out
}

fn push_refined(
    arm: &crate::kinematics::ArmModel,
    tool_pose: &dyn Fn(&JointVector) -> Option<Pose>,
    a: JointVector,
    b: JointVector,
    depth: usize,
    out: &mut Vec<JointVector>,
) {
    if depth > 0 {
        if let (Some(pa), Some(pb)) = (tool_pose(&a), tool_pose(&b)) {
            if pa.translation_distance_to(&pb) > TRACK_TRANS_MM
                || pa.rotation_angle_to(&pb) > TRACK_ROT_DEG
            {
                let mid = a.lerp(&b, 0.5);
                push_refined(arm, tool_pose, a, mid.clone(), depth - 1, out);
                push_refined(arm, tool_pose, mid, b, depth - 1, out);
                return;
            }
        }
    }
    out.push(b);
}

// ---------------------------------------------------------------------------
// raw step assembly (shared with the CMMS planner)
// ---------------------------------------------------------------------------

/// Pre-assembly step description: joints plus attachment bookkeeping.
#[derive(Clone, Debug)]
pub(crate) struct RawStep {
    pub phase: Phase,
    pub q_right: JointVector,
    pub q_left: JointVector,
    /// Tool rigidly attached to an arm through a grasp (hand pose in the
    /// tool frame); `None` leaves the tool parked at its last pose.
    pub tool_attach: Option<(ArmSide, Pose)>,
    /// Slider attached to the cable arm through a grasp.
    pub slider_attach: Option<Pose>,
}

/// Resolve raw steps into plan states: derive tool and slider poses from
/// the attachments, build cable states, and thread the accumulation
/// tracker.
pub(crate) fn assemble_sequence(
    scene: &Scene,
    raw: &[RawStep],
    initial_tool_pose: Pose,
) -> Result<MotionSequence, PlanError> {
    let mut tracker = AccumulationTracker::new(scene.beta_deg());
    let mut tool_pose = initial_tool_pose;
    let mut states = Vec::with_capacity(raw.len());
    let mut phases = Vec::with_capacity(raw.len());

    for (step, rs) in raw.iter().enumerate() {
        if let Some((side, hand_local)) = &rs.tool_attach {
            let arm = scene.robot.arm(*side);
            let q = match side {
                ArmSide::Right => &rs.q_right,
                ArmSide::Left => &rs.q_left,
            };
            let fk = forward_kinematics(arm, q).map_err(|e| PlanError::ReplanOmms {
                diagnostics: format!("fk during assembly: {e}"),
            })?;
            tool_pose = fk.ee.compose(&hand_local.inverse());
        }
        let slider_pose = match &rs.slider_attach {
            Some(hand_local) => {
                let arm = scene.robot.arm(CABLE_ARM);
                let fk = forward_kinematics(arm, &rs.q_left).map_err(|e| {
                    PlanError::ReplanOmms {
                        diagnostics: format!("fk during assembly: {e}"),
                    }
                })?;
                Some(fk.ee.compose(&hand_local.inverse()))
            }
            None => None,
        };
        let cable = scene.cable_state(&tool_pose, slider_pose.map(|p| p.translation()));
        tracker.update(&cable);
        states.push(PlanState {
            step,
            q_tool: rs.q_right.clone(),
            q_cable: rs.q_left.clone(),
            tool_pose,
            slider_pose,
            cable,
            acc_ee: tracker.acc_ee,
            acc_tool: tracker.acc_tool,
        });
        phases.push(rs.phase);
    }
    Ok(MotionSequence { states, phases })
}

// ---------------------------------------------------------------------------
// validity closures
// ---------------------------------------------------------------------------

/// Collision validity for a dual-arm state with optional attachments.
pub(crate) struct ValidityContext<'a> {
    pub scene: &'a Scene,
    /// Tool attachment (arm, hand pose in tool frame); when `None` the tool
    /// is parked at `static_tool_pose` and only coarse link checks apply.
    pub tool_attach: Option<(ArmSide, Pose)>,
    pub static_tool_pose: Pose,
    /// Extra EE allowed to touch the tool (handover exchange).
    pub tool_exempt_ee: Option<ArmSide>,
    pub slider_attach: Option<Pose>,
}

impl ValidityContext<'_> {
    /// Check one dual-arm configuration.
    pub fn check(&self, q_right: &JointVector, q_left: &JointVector) -> bool {
        let scene = self.scene;
        let mut held = Vec::new();
        let tool_pose = match &self.tool_attach {
            Some((side, hand_local)) => {
                let q = match side {
                    ArmSide::Right => q_right,
                    ArmSide::Left => q_left,
                };
                let Ok(fk) = forward_kinematics(scene.robot.arm(*side), q) else {
                    return false;
                };
                let pose = fk.ee.compose(&hand_local.inverse());
                held.push(HeldObject {
                    shape: &scene.tool_shape,
                    pose,
                    held_by: *side,
                    also_exempt_ee: self.tool_exempt_ee,
                });
                Some(pose)
            }
            None => None,
        };
        if let Some(hand_local) = &self.slider_attach {
            let Ok(fk) = forward_kinematics(scene.robot.arm(CABLE_ARM), q_left) else {
                return false;
            };
            held.push(HeldObject::new(
                &scene.slider_shape,
                fk.ee.compose(&hand_local.inverse()),
                CABLE_ARM,
            ));
        }
        let posture = RobotPosture {
            robot: &scene.robot,
            q_right,
            q_left,
            held,
        };
        if robot_collision_free(&posture, &scene.obstacles).is_some() {
            return false;
        }
        // When the tool is parked, keep arm links away from it except the
        // last two links of an arm reaching in for a grasp.
        if tool_pose.is_none() {
            return self.links_clear_of_parked_tool(q_right, q_left);
        }
        true
    }

    fn links_clear_of_parked_tool(&self, q_right: &JointVector, q_left: &JointVector) -> bool {
        let scene = self.scene;
        let tool_capsules: Vec<_> = scene
            .tool_shape
            .enclosing_capsules()
            .into_iter()
            .map(|c| {
                crate::se3::Capsule::new(
                    self.static_tool_pose.transform_segment(&c.axis),
                    c.radius,
                )
            })
            .collect();
        for (side, q) in [(ArmSide::Right, q_right), (ArmSide::Left, q_left)] {
            let arm = scene.robot.arm(side);
            let Ok(fk) = forward_kinematics(arm, q) else {
                return false;
            };
            let capsules = link_capsules_world(arm, &fk);
            let skip_from = capsules.len().saturating_sub(2);
            for (link, capsule) in capsules.iter().enumerate() {
                // The grasping wrist must be able to reach into contact.
                if link >= skip_from {
                    continue;
                }
                for tc in &tool_capsules {
                    if capsule_capsule_clearance(capsule, tc) <= scene.obstacles.margin_mm {
                        return false;
                    }
                }
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// single-arm OMMS
// ---------------------------------------------------------------------------

/// Collision-free IK solutions for grasping the tool at `pose` with the
/// given grasp, holder attached.
fn feasible_grasp_configs(
    scene: &Scene,
    side: ArmSide,
    grasp: &GraspCandidate,
    pose: &Pose,
    other_q: &JointVector,
    tool_exempt_ee: Option<ArmSide>,
    seed: u64,
) -> Vec<JointVector> {
    let arm = scene.robot.arm(side);
    let target = grasp_world_pose(grasp, pose);
    let sols = solve_ik(arm, &target, scene.config.ik.restarts, scene.ik_tol, seed);
    let ctx = ValidityContext {
        scene,
        tool_attach: Some((side, grasp.hand_pose_local)),
        static_tool_pose: *pose,
        tool_exempt_ee,
        slider_attach: None,
    };
    sols.into_iter()
        .filter(|q| match side {
            ArmSide::Right => ctx.check(q, other_q),
            ArmSide::Left => ctx.check(other_q, q),
        })
        .collect()
}

/// Select one tool grasp that is feasible at every pose, returning the
/// grasp and per-pose IK solution sets. Candidates far from the cable
/// tail are tried first: a hand near the tail crowds the cable and the
/// slider goals behind the tool.
fn select_common_grasp(
    scene: &Scene,
    side: ArmSide,
    poses: &[Pose],
    other_q: &JointVector,
    seed: u64,
) -> Result<(GraspCandidate, Vec<Vec<JointVector>>), PlanError> {
    let grasps = scene
        .grasp_db
        .grasps(TOOL_OBJECT)
        .map_err(|_| PlanError::NoGrasp)?;
    let tail: nalgebra::Vector3<f64> = scene.config.tool.tail_local.into();
    let mut order: Vec<usize> = (0..grasps.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (grasps[a].hand_pose_local.translation() - tail).norm();
        let db = (grasps[b].hand_pose_local.translation() - tail).norm();
        db.partial_cmp(&da).unwrap().then(a.cmp(&b))
    });
    'grasps: for gi in order {
        let grasp = &grasps[gi];
        let mut per_pose = Vec::with_capacity(poses.len());
        for (pi, pose) in poses.iter().enumerate() {
            let sols = feasible_grasp_configs(
                scene,
                side,
                grasp,
                pose,
                other_q,
                None,
                derive_seed(seed, (gi as u64) << 16 | pi as u64),
            );
            if sols.is_empty() {
                continue 'grasps;
            }
            per_pose.push(sols);
        }
        return Ok((grasp.clone(), per_pose));
    }
    Err(PlanError::NoGrasp)
}

/// Plan the tool pick-and-place through `goals`, right arm only, cable
/// ignored. The returned sequence starts at the arm home configurations,
/// grasps the tool at `start`, and visits every goal with the same grasp.
pub fn plan_omms(
    scene: &Scene,
    start: &Pose,
    goals: &[Pose],
    seed: u64,
) -> Result<MotionSequence, PlanError> {
    let mut poses = vec![*start];
    poses.extend_from_slice(goals);
    let home_left = scene.robot.home(CABLE_ARM).clone();
    let (grasp, per_pose_sols) =
        select_common_grasp(scene, TOOL_ARM, &poses, &home_left, derive_seed(seed, 1))?;

    let rrt_params = rrt_params(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let arm = scene.robot.arm(TOOL_ARM);

    // Approach: home to the grasp configuration, tool parked at start.
    let approach_ctx = ValidityContext {
        scene,
        tool_attach: None,
        static_tool_pose: *start,
        tool_exempt_ee: None,
        slider_attach: None,
    };
    let mut approach_valid =
        |q: &JointVector| approach_ctx.check(q, &home_left);
    let approach = plan_joint_path(
        arm,
        scene.robot.home(TOOL_ARM),
        &per_pose_sols[0],
        &rrt_params,
        &mut rng,
        &mut approach_valid,
    )
    .ok_or_else(|| PlanError::NoPath {
        segment: "approach".into(),
    })?;
    let approach = interpolate(&approach, rrt_params.step_deg);

    // Transfers: goal to goal with the tool attached.
    let transfer_ctx = ValidityContext {
        scene,
        tool_attach: Some((TOOL_ARM, grasp.hand_pose_local)),
        static_tool_pose: *start,
        tool_exempt_ee: None,
        slider_attach: None,
    };
    let mut legs: Vec<Vec<JointVector>> = Vec::new();
    let mut current = approach.last().unwrap().clone();
    for (k, sols) in per_pose_sols.iter().enumerate().skip(1) {
        let mut transfer_valid =
            |q: &JointVector| transfer_ctx.check(q, &home_left);
        let leg = plan_joint_path(
            arm,
            &current,
            sols,
            &rrt_params,
            &mut rng,
            &mut transfer_valid,
        )
        .ok_or_else(|| PlanError::NoPath {
            segment: format!("transfer to goal {k}"),
        })?;
        let leg = densify_carry_leg(arm, &grasp.hand_pose_local, &leg, rrt_params.step_deg);
        current = leg.last().unwrap().clone();
        legs.push(leg);
    }

    // Raw steps: approach untagged by attachment, transfers attached.
    let mut raw: Vec<RawStep> = Vec::new();
    for q in &approach {
        raw.push(RawStep {
            phase: Phase::Approach,
            q_right: q.clone(),
            q_left: home_left.clone(),
            tool_attach: None,
            slider_attach: None,
        });
    }
    for leg in &legs {
        // Skip the first configuration: it equals the previous leg's end.
        for (i, q) in leg.iter().enumerate().skip(1) {
            raw.push(RawStep {
                phase: if i == leg.len() - 1 {
                    Phase::Place
                } else {
                    Phase::Transfer
                },
                q_right: q.clone(),
                q_left: home_left.clone(),
                tool_attach: Some((TOOL_ARM, grasp.hand_pose_local)),
                slider_attach: None,
            });
        }
        if leg.len() == 1 {
            // Degenerate leg (goal equals current): still record a place.
            raw.push(RawStep {
                phase: Phase::Place,
                q_right: leg[0].clone(),
                q_left: home_left.clone(),
                tool_attach: Some((TOOL_ARM, grasp.hand_pose_local)),
                slider_attach: None,
            });
        }
    }

    let seq = assemble_sequence(scene, &raw, *start)?;
    verify_states(scene, &seq, &raw)?;
    Ok(seq)
}

pub(crate) fn rrt_params(scene: &Scene) -> RrtParams {
    RrtParams {
        step_deg: scene.config.rrt.step_deg,
        goal_bias: scene.config.rrt.goal_bias,
        max_iters: scene.config.rrt.max_iters,
        shortcut_iters: scene.config.rrt.shortcut_iters,
    }
}

/// Every state of a finished sequence must pass the collision query that
/// matches its attachment bookkeeping.
pub(crate) fn verify_states(
    scene: &Scene,
    seq: &MotionSequence,
    raw: &[RawStep],
) -> Result<(), PlanError> {
    for (state, rs) in seq.states.iter().zip(raw) {
        let ctx = ValidityContext {
            scene,
            tool_attach: rs.tool_attach.clone().map(|(s, p)| (s, p)),
            static_tool_pose: state.tool_pose,
            tool_exempt_ee: None,
            slider_attach: rs.slider_attach,
        };
        if !ctx.check(&state.q_tool, &state.q_cable) {
            return Err(PlanError::NoPath {
                segment: format!("post-validation failed at step {}", state.step),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// handover baseline
// ---------------------------------------------------------------------------

use rand::SeedableRng;

/// Fixed-exchange handover baseline: each goal leg carries the tool to the
/// configured exchange pose, passes it to the other gripper, and the
/// receiving arm places the goal. Exists to compare against OMMS and
/// OMMS+CMMS; the cable is ignored during planning and replayed after.
pub fn plan_handover(
    scene: &Scene,
    start: &Pose,
    goals: &[Pose],
    seed: u64,
) -> Result<MotionSequence, PlanError> {
    let exchange = scene.exchange;
    // Alternation: right carries leg 0, the receiver carries the next leg.
    let mut right_poses = vec![*start, exchange];
    let mut left_poses = vec![exchange];
    for (k, g) in goals.iter().enumerate() {
        if k % 2 == 0 {
            left_poses.push(*g);
        } else {
            right_poses.push(*g);
        }
    }
    let (grasp_r, _) = select_common_grasp(
        scene,
        ArmSide::Right,
        &right_poses,
        scene.robot.home(ArmSide::Left),
        derive_seed(seed, 11),
    )?;
    let (grasp_l, _) = select_common_grasp(
        scene,
        ArmSide::Left,
        &left_poses,
        scene.robot.home(ArmSide::Right),
        derive_seed(seed, 12),
    )?;

    let rrt_params = rrt_params(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 13));
    let mut raw: Vec<RawStep> = Vec::new();
    let mut q_right = scene.robot.home(ArmSide::Right).clone();
    let mut q_left = scene.robot.home(ArmSide::Left).clone();
    let mut tool_pose = *start;

    let grasp_for = |side: ArmSide| match side {
        ArmSide::Right => grasp_r.hand_pose_local,
        ArmSide::Left => grasp_l.hand_pose_local,
    };
    let grasp_candidate = |side: ArmSide| match side {
        ArmSide::Right => &grasp_r,
        ArmSide::Left => &grasp_l,
    };

    // Initial approach and grasp at the start pose (right arm).
    {
        let sols = feasible_grasp_configs(
            scene,
            ArmSide::Right,
            &grasp_r,
            start,
            &q_left,
            None,
            derive_seed(seed, 20),
        );
        if sols.is_empty() {
            return Err(PlanError::NoGrasp);
        }
        let ctx = ValidityContext {
            scene,
            tool_attach: None,
            static_tool_pose: *start,
            tool_exempt_ee: None,
            slider_attach: None,
        };
        let q_left_now = q_left.clone();
        let mut valid = |q: &JointVector| ctx.check(q, &q_left_now);
        let path = plan_joint_path(
            scene.robot.arm(ArmSide::Right),
            &q_right,
            &sols,
            &rrt_params,
            &mut rng,
            &mut valid,
        )
        .ok_or(PlanError::NoPath {
            segment: "handover initial approach".into(),
        })?;
        for q in interpolate(&path, rrt_params.step_deg) {
            raw.push(RawStep {
                phase: Phase::Approach,
                q_right: q.clone(),
                q_left: q_left.clone(),
                tool_attach: None,
                slider_attach: None,
            });
            q_right = q;
        }
    }

    let mut holder = ArmSide::Right;
    for (k, goal) in goals.iter().enumerate() {
        let receiver = holder.opposite();
        let salt = 100 + 10 * k as u64;

        // Carrier brings the tool to the exchange pose.
        let carry_sols = feasible_grasp_configs(
            scene,
            holder,
            grasp_candidate(holder),
            &exchange,
            other_config(holder, &q_right, &q_left),
            None,
            derive_seed(seed, salt),
        );
        if carry_sols.is_empty() {
            return Err(PlanError::NoGrasp);
        }
        extend_arm_leg(
            scene,
            &mut raw,
            &mut q_right,
            &mut q_left,
            holder,
            &carry_sols,
            Phase::Transfer,
            ValidityContext {
                scene,
                tool_attach: Some((holder, grasp_for(holder))),
                static_tool_pose: tool_pose,
                tool_exempt_ee: None,
                slider_attach: None,
            },
            Some((holder, grasp_for(holder))),
            &rrt_params,
            &mut rng,
            &format!("handover leg {k}: carry to exchange"),
        )?;
        tool_pose = exchange;

        // Receiver reaches its grasp on the held tool (dual grasp state).
        let recv_sols = feasible_grasp_configs(
            scene,
            receiver,
            grasp_candidate(receiver),
            &exchange,
            other_config(receiver, &q_right, &q_left),
            Some(receiver),
            derive_seed(seed, salt + 1),
        );
        if recv_sols.is_empty() {
            return Err(PlanError::NoGrasp);
        }
        extend_arm_leg(
            scene,
            &mut raw,
            &mut q_right,
            &mut q_left,
            receiver,
            &recv_sols,
            Phase::Approach,
            ValidityContext {
                scene,
                tool_attach: Some((holder, grasp_for(holder))),
                static_tool_pose: tool_pose,
                tool_exempt_ee: Some(receiver),
                slider_attach: None,
            },
            Some((holder, grasp_for(holder))),
            &rrt_params,
            &mut rng,
            &format!("handover leg {k}: receiver approach"),
        )?;

        // Handoff happens here; the old carrier retreats to home while its
        // gripper is still allowed to touch the tool.
        let old = holder;
        holder = receiver;
        extend_arm_leg(
            scene,
            &mut raw,
            &mut q_right,
            &mut q_left,
            old,
            std::slice::from_ref(scene.robot.home(old)),
            Phase::Approach,
            ValidityContext {
                scene,
                tool_attach: Some((holder, grasp_for(holder))),
                static_tool_pose: tool_pose,
                tool_exempt_ee: Some(old),
                slider_attach: None,
            },
            Some((holder, grasp_for(holder))),
            &rrt_params,
            &mut rng,
            &format!("handover leg {k}: retreat"),
        )?;

        // Receiver places the goal.
        let place_sols = feasible_grasp_configs(
            scene,
            holder,
            grasp_candidate(holder),
            goal,
            other_config(holder, &q_right, &q_left),
            None,
            derive_seed(seed, salt + 2),
        );
        if place_sols.is_empty() {
            return Err(PlanError::NoGrasp);
        }
        extend_arm_leg(
            scene,
            &mut raw,
            &mut q_right,
            &mut q_left,
            holder,
            &place_sols,
            Phase::Transfer,
            ValidityContext {
                scene,
                tool_attach: Some((holder, grasp_for(holder))),
                static_tool_pose: tool_pose,
                tool_exempt_ee: None,
                slider_attach: None,
            },
            Some((holder, grasp_for(holder))),
            &rrt_params,
            &mut rng,
            &format!("handover leg {k}: place goal"),
        )?;
        tool_pose = *goal;
        if let Some(last) = raw.last_mut() {
            last.phase = Phase::Place;
        }
    }

    assemble_sequence(scene, &raw, *start)
}

fn other_config<'a>(
    side: ArmSide,
    q_right: &'a JointVector,
    q_left: &'a JointVector,
) -> &'a JointVector {
    match side {
        ArmSide::Right => q_left,
        ArmSide::Left => q_right,
    }
}

/// Plan one arm's leg while the other stays parked, then append the
/// interpolated steps.
#[allow(clippy::too_many_arguments)]
fn extend_arm_leg(
    scene: &Scene,
    raw: &mut Vec<RawStep>,
    q_right: &mut JointVector,
    q_left: &mut JointVector,
    moving: ArmSide,
    goals: &[JointVector],
    phase: Phase,
    ctx: ValidityContext<'_>,
    tool_attach: Option<(ArmSide, Pose)>,
    params: &RrtParams,
    rng: &mut ChaCha8Rng,
    label: &str,
) -> Result<(), PlanError> {
    let (fixed_right, fixed_left) = (q_right.clone(), q_left.clone());
    let mut valid = |q: &JointVector| match moving {
        ArmSide::Right => ctx.check(q, &fixed_left),
        ArmSide::Left => ctx.check(&fixed_right, q),
    };
    let start = match moving {
        ArmSide::Right => q_right.clone(),
        ArmSide::Left => q_left.clone(),
    };
    let path = plan_joint_path(
        scene.robot.arm(moving),
        &start,
        goals,
        params,
        rng,
        &mut valid,
    )
    .ok_or_else(|| PlanError::NoPath {
        segment: label.to_string(),
    })?;
    let dense = match &tool_attach {
        Some((side, hand_local)) if *side == moving => {
            densify_carry_leg(scene.robot.arm(moving), hand_local, &path, params.step_deg)
        }
        _ => interpolate(&path, params.step_deg),
    };
    for q in dense.into_iter().skip(1) {
        match moving {
            ArmSide::Right => *q_right = q,
            ArmSide::Left => *q_left = q,
        }
        raw.push(RawStep {
            phase,
            q_right: q_right.clone(),
            q_left: q_left.clone(),
            tool_attach: tool_attach.clone(),
            slider_attach: None,
        });
    }
    Ok(())
}
