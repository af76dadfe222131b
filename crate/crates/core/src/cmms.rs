//! Cable Manipulation Motion Sequence: slider grasping, per-step slider
//! goal projection, candidate discarding, and the synchronized dual-arm
//! plan that keeps cable bending under the accumulation threshold.
//!
//! For every state of a finished tool plan the slider gets a goal position
//! projected behind the tool tail. Goals that are unreachable, cause cable
//! collisions, or would push angle accumulation past the threshold are
//! discarded; the cable arm bridges the gaps, reconnecting with RRT when a
//! straight joint-space ramp is blocked. If no assignment satisfies the
//! threshold the projection distance is reduced by 20% once, then planning
//! gives up and asks for a fresh tool plan.

use nalgebra::{Unit, Vector3};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::cable::AccumulationTracker;
use crate::collision::cable_clear;
use crate::derive_seed;
use crate::grasp::{grasp_world_pose, GraspCandidate};
use crate::kinematics::{
    forward_kinematics, manipulability, solve_ik, solve_ik_point, solve_ik_point_seeded,
    ArmSide, JointVector,
};
use crate::omms::{
    assemble_sequence, interpolate, rrt_params, verify_states, MotionSequence, Phase, PlanError,
    RawStep, ValidityContext,
};
use crate::rrt::plan_joint_path;
use crate::scene::{Scene, CABLE_ARM, SLIDER_OBJECT, TOOL_ARM};
use crate::se3::Pose;

/// Why a candidate slider goal was dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscardReason {
    /// No collision-free IK for the slider grasp, or no valid approach
    /// ramp through this goal.
    Unreachable,
    /// The cable polyline through this goal hits a link, a box, or the
    /// table.
    CableCollision,
    /// Simulated accumulation past the threshold at or near this step.
    Accumulation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GoalStatus {
    Candidate,
    Selected,
    Discarded(DiscardReason),
}

/// Candidate slider placement tied to one step of the tool plan.
#[derive(Clone, Debug)]
pub struct SliderGoal {
    pub position: Vector3<f64>,
    pub source_step: usize,
    pub alpha_s: f64,
    pub status: GoalStatus,
}

/// Project the slider goal for one tool pose: alpha_s along the rotated
/// tail direction from the tool origin, lifted vertically to the minimum
/// height.
pub fn project_slider_goal(
    tool_pose: &Pose,
    tail_dir_local: &Unit<Vector3<f64>>,
    alpha_s: f64,
    min_height: f64,
    source_step: usize,
) -> SliderGoal {
    let mut p = tool_pose.transform_vector(&(tail_dir_local.into_inner() * alpha_s))
        + tool_pose.translation();
    if p.z < min_height {
        p.z = min_height;
    }
    SliderGoal {
        position: p,
        source_step,
        alpha_s,
        status: GoalStatus::Candidate,
    }
}

/// Per-joint step cap for the synchronized cable arm. The tool arm is
/// bound by the same contract through its own interpolation.
const SYNC_STEP_CAP_DEG: f64 = 5.0;
/// A projection collapsing onto the tool tail cannot carry a cable segment.
const DEGENERATE_PROJECTION_MM: f64 = 40.0;
const MAX_ACC_DISCARD_ROUNDS: usize = 60;

struct CmmsAttempt {
    raw: Vec<RawStep>,
    goals: Vec<SliderGoal>,
    initial_tool_pose: Pose,
}

/// Recover the tool attachment of a finished tool plan: the hand pose in
/// the tool frame is constant over all grasped states.
fn recover_tool_attachment(
    scene: &Scene,
    omms: &MotionSequence,
) -> Result<Option<Pose>, PlanError> {
    for (state, phase) in omms.states.iter().zip(&omms.phases) {
        if matches!(phase, Phase::Transfer | Phase::Place) {
            let fk = forward_kinematics(scene.robot.arm(TOOL_ARM), &state.q_tool).map_err(
                |e| PlanError::ReplanOmms {
                    diagnostics: format!("tool fk: {e}"),
                },
            )?;
            return Ok(Some(state.tool_pose.inverse().compose(&fk.ee)));
        }
    }
    Ok(None)
}

/// Pick the slider grasp: candidates ranked by the manipulability of their
/// best collision-free configuration at the rest pose. The tool is parked
/// at its initial pose while the slider is approached.
fn select_slider_grasp(
    scene: &Scene,
    rest: &Pose,
    q_tool_initial: &JointVector,
    initial_tool_pose: &Pose,
    seed: u64,
) -> Result<(GraspCandidate, JointVector), PlanError> {
    let grasps = scene
        .grasp_db
        .grasps(SLIDER_OBJECT)
        .map_err(|_| PlanError::NoSliderGrasp)?;
    let arm = scene.robot.arm(CABLE_ARM);
    let mut ranked: Vec<(f64, GraspCandidate, JointVector)> = Vec::new();
    for (gi, grasp) in grasps.iter().enumerate() {
        let target = grasp_world_pose(grasp, rest);
        let sols = solve_ik(
            arm,
            &target,
            scene.config.ik.restarts,
            scene.ik_tol,
            derive_seed(seed, 300 + gi as u64),
        );
        let ctx = ValidityContext {
            scene,
            tool_attach: None,
            static_tool_pose: *initial_tool_pose,
            tool_exempt_ee: None,
            slider_attach: Some(grasp.hand_pose_local),
        };
        let mut best: Option<(f64, JointVector)> = None;
        for q in sols {
            if !ctx.check(q_tool_initial, &q) {
                continue;
            }
            let m = manipulability(arm, &q).unwrap_or(0.0);
            if best.as_ref().map_or(true, |(bm, _)| m > *bm) {
                best = Some((m, q));
            }
        }
        if let Some((m, q)) = best {
            ranked.push((m, grasp.clone(), q));
        }
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    ranked
        .into_iter()
        .next()
        .map(|(_, g, q)| (g, q))
        .ok_or(PlanError::NoSliderGrasp)
}

/// Annotate candidate slider goals against a tool plan: static
/// reachability and cable-collision checks, then the accumulation
/// simulation with gap reconnection. The returned list is aligned with
/// `goals`.
pub fn filter_candidates(
    goals: &[SliderGoal],
    omms: &MotionSequence,
    scene: &Scene,
    acc_threshold_deg: f64,
    seed: u64,
) -> Result<Vec<SliderGoal>, PlanError> {
    let attempt = build_attempt(scene, omms, goals.to_vec(), acc_threshold_deg, seed)?;
    Ok(attempt.goals)
}

/// Plan the synchronized dual-arm sequence for a finished tool plan.
///
/// The output is the slider-grasp approach followed by exactly one
/// cable-arm state per tool-plan state; tool-arm joints are copied
/// unchanged. Accumulation stays at or below the threshold in every
/// returned state. When the threshold cannot be met, alpha_s is reduced by
/// 20% for one more attempt before giving up with a replan request.
pub fn plan_cmms(
    omms: &MotionSequence,
    scene: &Scene,
    alpha_s: f64,
    acc_threshold_deg: f64,
    seed: u64,
) -> Result<MotionSequence, PlanError> {
    let mut last_diag = String::new();
    for (attempt_idx, alpha) in [alpha_s, 0.8 * alpha_s].into_iter().enumerate() {
        let goals: Vec<SliderGoal> = omms
            .states
            .iter()
            .map(|s| {
                project_slider_goal(
                    &s.tool_pose,
                    &scene.tail_dir_local(),
                    alpha,
                    scene.min_slider_height_mm(),
                    s.step,
                )
            })
            .collect();
        match build_attempt(
            scene,
            omms,
            goals,
            acc_threshold_deg,
            derive_seed(seed, attempt_idx as u64),
        ) {
            Ok(attempt) => {
                let seq = assemble_sequence(scene, &attempt.raw, attempt.initial_tool_pose)?;
                verify_states(scene, &seq, &attempt.raw)?;
                let max_acc = seq.max_acc_ee();
                if max_acc <= acc_threshold_deg + 1e-9 {
                    return Ok(seq);
                }
                last_diag = format!(
                    "alpha_s {alpha:.1}: accumulation {max_acc:.2} deg exceeds threshold"
                );
            }
            Err(PlanError::NoSliderGrasp) => return Err(PlanError::NoSliderGrasp),
            Err(PlanError::ReplanOmms { diagnostics }) => last_diag = diagnostics,
            Err(e) => last_diag = e.to_string(),
        }
    }
    Err(PlanError::ReplanOmms {
        diagnostics: last_diag,
    })
}

fn build_attempt(
    scene: &Scene,
    omms: &MotionSequence,
    mut goals: Vec<SliderGoal>,
    acc_threshold_deg: f64,
    seed: u64,
) -> Result<CmmsAttempt, PlanError> {
    if goals.len() != omms.len() {
        return Err(PlanError::ReplanOmms {
            diagnostics: "slider goals must align 1:1 with tool-plan steps".into(),
        });
    }
    if omms.is_empty() {
        return Err(PlanError::ReplanOmms {
            diagnostics: "empty tool plan".into(),
        });
    }
    let initial_tool_pose = omms.states[0].tool_pose;
    let tool_attach = recover_tool_attachment(scene, omms)?;
    let rest = scene.slider_rest_pose();
    let q_tool_initial = omms.states[0].q_tool.clone();

    let (slider_grasp, grasp_cfg) =
        select_slider_grasp(scene, &rest, &q_tool_initial, &initial_tool_pose, seed)?;

    // Approach the slider rest position (tool arm frozen at its first
    // configuration, slider not yet held).
    let approach_ctx = ValidityContext {
        scene,
        tool_attach: None,
        static_tool_pose: initial_tool_pose,
        tool_exempt_ee: None,
        slider_attach: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 9000));
    let params = rrt_params(scene);
    let mut approach_valid = |q: &JointVector| approach_ctx.check(&q_tool_initial, q);
    let approach = plan_joint_path(
        scene.robot.arm(CABLE_ARM),
        scene.robot.home(CABLE_ARM),
        std::slice::from_ref(&grasp_cfg),
        &params,
        &mut rng,
        &mut approach_valid,
    )
    .ok_or_else(|| PlanError::NoPath {
        segment: "slider approach".into(),
    })?;
    let approach = interpolate(&approach, params.step_deg);

    // Static discards: degenerate projections, unreachable goals, cable
    // collisions. IK is seeded from the previous accepted configuration so
    // the arm tracks a single solution branch.
    let arm = scene.robot.arm(CABLE_ARM);
    let mut configs: Vec<Option<JointVector>> = vec![None; goals.len()];
    let mut prev_cfg = grasp_cfg.clone();
    for i in 0..goals.len() {
        let tool_state = &omms.states[i];
        let tail = scene.tool_tail_world(&tool_state.tool_pose);
        if (goals[i].position - tail).norm() < DEGENERATE_PROJECTION_MM {
            goals[i].status = GoalStatus::Discarded(DiscardReason::Unreachable);
            continue;
        }
        // The slider center must land on the goal; the carry orientation
        // rides with the gripper. Track the previous branch first; when it
        // is blocked, consider other branches ordered by proximity.
        let carried = slider_grasp.hand_pose_local.inverse().translation();
        let ctx = step_validity(scene, omms, i, tool_attach, Some(slider_grasp.hand_pose_local));
        let mut candidates: Vec<JointVector> = Vec::new();
        if let Some(q) =
            solve_ik_point_seeded(arm, &carried, &goals[i].position, &prev_cfg, scene.ik_tol.position_mm)
        {
            candidates.push(q);
        }
        let mut extra = solve_ik_point(
            arm,
            &carried,
            &goals[i].position,
            6,
            scene.ik_tol.position_mm,
            derive_seed(seed, 5000 + i as u64),
        );
        extra.sort_by(|a, b| {
            a.max_abs_diff(&prev_cfg)
                .partial_cmp(&b.max_abs_diff(&prev_cfg))
                .unwrap()
        });
        candidates.extend(extra);
        if candidates.is_empty() {
            goals[i].status = GoalStatus::Discarded(DiscardReason::Unreachable);
            continue;
        }
        let Some(q) = candidates
            .into_iter()
            .find(|q| ctx.check(&tool_state.q_tool, q))
        else {
            goals[i].status = GoalStatus::Discarded(DiscardReason::Unreachable);
            continue;
        };
        let fk = forward_kinematics(arm, &q).expect("validated config");
        let slider_pose = fk.ee.compose(&slider_grasp.hand_pose_local.inverse());
        let cable = scene.cable_state(&tool_state.tool_pose, Some(goals[i].position));
        let posture = posture_for(omms, i, &q, tool_attach, &slider_pose);
        let exempt = exempt_links(scene);
        let (clear, _) = cable_clear(&cable, &posture.as_posture(scene), &scene.obstacles, &exempt);
        if !clear {
            goals[i].status = GoalStatus::Discarded(DiscardReason::CableCollision);
            continue;
        }
        configs[i] = Some(q.clone());
        prev_cfg = q;
    }

    if std::env::var_os("TETHERPLAN_TRACE").is_some() {
        let mut runs: Vec<(usize, usize, String)> = Vec::new();
        for (i, g) in goals.iter().enumerate() {
            let label = format!("{:?}", g.status);
            match runs.last_mut() {
                Some((_, end, l)) if *l == label && *end == i - 1 => *end = i,
                _ => runs.push((i, i, label)),
            }
        }
        for (a, b, l) in runs {
            eprintln!("[cmms] static {a:>4}..{b:<4} {l}");
        }
    }

    // Accumulation loop: route the cable arm through the kept goals,
    // simulate, and discard the goal responsible for the first violation.
    for round in 0..MAX_ACC_DISCARD_ROUNDS {
        let route = route_cable_arm(
            scene,
            omms,
            &mut goals,
            &mut configs,
            &grasp_cfg,
            &slider_grasp,
            tool_attach,
            seed,
        )?;
        let raw = build_raw_steps(
            omms,
            &approach,
            &route,
            &q_tool_initial,
            tool_attach,
            &slider_grasp,
        );
        let seq = assemble_sequence(scene, &raw, initial_tool_pose)?;
        let offset = approach.len();
        let violation = seq
            .states
            .iter()
            .skip(offset)
            .find(|s| s.acc_ee > acc_threshold_deg + 1e-9)
            .map(|s| s.step - offset);
        if std::env::var_os("TETHERPLAN_TRACE").is_some() {
            let kept = goals
                .iter()
                .filter(|g| matches!(g.status, GoalStatus::Candidate))
                .count();
            eprintln!(
                "[cmms] round {round}: kept {kept}/{} max_acc {:.2} violation {:?}",
                goals.len(),
                seq.max_acc_ee(),
                violation
            );
        }
        match violation {
            None => {
                for g in goals.iter_mut() {
                    if matches!(g.status, GoalStatus::Candidate) {
                        g.status = GoalStatus::Selected;
                    }
                }
                return Ok(CmmsAttempt {
                    raw,
                    goals,
                    initial_tool_pose,
                });
            }
            Some(step) => {
                // A violation at a kept goal indicts that placement;
                // discard it and re-simulate. A violation inside an
                // already-discarded gap cannot be repaired by discarding
                // more (wider gaps only track worse), so give up early and
                // let the caller retry with a smaller alpha_s or a new
                // tool plan.
                if matches!(goals[step].status, GoalStatus::Candidate) {
                    goals[step].status = GoalStatus::Discarded(DiscardReason::Accumulation);
                    configs[step] = None;
                } else {
                    return Err(PlanError::ReplanOmms {
                        diagnostics: format!(
                            "accumulation exceeds threshold at step {step} inside a discarded gap"
                        ),
                    });
                }
            }
        }
    }
    Err(PlanError::ReplanOmms {
        diagnostics: "accumulation discard loop did not converge".into(),
    })
}

/// Links whose cable contact is scored by accumulation instead of treated
/// as a collision: the tool arm's end-effector, and the cable arm's
/// end-effector while it holds the slider.
fn exempt_links(scene: &Scene) -> Vec<(ArmSide, usize)> {
    vec![
        (TOOL_ARM, scene.robot.arm(TOOL_ARM).link_capsules.len() - 1),
        (CABLE_ARM, scene.robot.arm(CABLE_ARM).link_capsules.len() - 1),
    ]
}

fn step_validity<'a>(
    scene: &'a Scene,
    omms: &MotionSequence,
    step: usize,
    tool_attach: Option<Pose>,
    slider_attach: Option<Pose>,
) -> ValidityContext<'a> {
    let attached = tool_attach
        .filter(|_| !matches!(omms.phases[step], Phase::Approach))
        .map(|h| (TOOL_ARM, h));
    ValidityContext {
        scene,
        tool_attach: attached,
        static_tool_pose: omms.states[step].tool_pose,
        tool_exempt_ee: None,
        slider_attach,
    }
}

struct PostureParts {
    q_right: JointVector,
    q_left: JointVector,
    tool_pose: Pose,
    tool_held: bool,
    slider_pose: Pose,
}

impl PostureParts {
    fn as_posture<'a>(&'a self, scene: &'a Scene) -> crate::collision::RobotPosture<'a> {
        let mut held = Vec::new();
        if self.tool_held {
            held.push(crate::collision::HeldObject::new(
                &scene.tool_shape,
                self.tool_pose,
                TOOL_ARM,
            ));
        }
        held.push(crate::collision::HeldObject::new(
            &scene.slider_shape,
            self.slider_pose,
            CABLE_ARM,
        ));
        crate::collision::RobotPosture {
            robot: &scene.robot,
            q_right: &self.q_right,
            q_left: &self.q_left,
            held,
        }
    }
}

fn posture_for(
    omms: &MotionSequence,
    step: usize,
    q_cable: &JointVector,
    tool_attach: Option<Pose>,
    slider_pose: &Pose,
) -> PostureParts {
    let state = &omms.states[step];
    PostureParts {
        q_right: state.q_tool.clone(),
        q_left: q_cable.clone(),
        tool_pose: state.tool_pose,
        tool_held: tool_attach.is_some() && !matches!(omms.phases[step], Phase::Approach),
        slider_pose: *slider_pose,
    }
}

/// One cable-arm configuration per tool-plan step: kept goals take their
/// tracked IK configuration; gaps ramp straight in joint space, falling
/// back to a retimed RRT path. A goal whose gap cannot be bridged in sync
/// is discarded as unreachable and routing restarts with the wider gap.
#[allow(clippy::too_many_arguments)]
fn route_cable_arm(
    scene: &Scene,
    omms: &MotionSequence,
    goals: &mut [SliderGoal],
    configs: &mut [Option<JointVector>],
    grasp_cfg: &JointVector,
    slider_grasp: &GraspCandidate,
    tool_attach: Option<Pose>,
    seed: u64,
) -> Result<Vec<JointVector>, PlanError> {
    let n = omms.len();
    let params = rrt_params(scene);
    let hand_local = slider_grasp.hand_pose_local;

    'routing: loop {
        let kept: Vec<usize> = (0..n)
            .filter(|&i| matches!(goals[i].status, GoalStatus::Candidate) && configs[i].is_some())
            .collect();
        let mut route: Vec<Option<JointVector>> = vec![None; n];
        let mut anchor_step: isize = -1;
        let mut anchor_cfg = grasp_cfg.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7777));

        for &target_step in &kept {
            let target_cfg = configs[target_step].clone().unwrap();
            let gap = (target_step as isize - anchor_step) as usize;
            let check_segment = |seg: &[JointVector]| {
                seg.iter().enumerate().all(|(j, q)| {
                    let step = (anchor_step + 1 + j as isize) as usize;
                    let prev = if j == 0 { &anchor_cfg } else { &seg[j - 1] };
                    prev.max_abs_diff(q) <= SYNC_STEP_CAP_DEG + 1e-9
                        && step_validity(scene, omms, step, tool_attach, Some(hand_local))
                            .check(&omms.states[step].q_tool, q)
                })
            };

            // Straight joint ramp across the gap.
            let ramp: Vec<JointVector> = (1..=gap)
                .map(|j| anchor_cfg.lerp(&target_cfg, j as f64 / gap as f64))
                .collect();
            let segment = if check_segment(&ramp) {
                Some(ramp)
            } else {
                // RRT against the gap's midpoint tool configuration, then
                // retime to the gap length and validate exactly.
                let mid = ((anchor_step + 1 + target_step as isize) / 2) as usize;
                let ctx = step_validity(scene, omms, mid, tool_attach, Some(hand_local));
                let q_tool_mid = omms.states[mid].q_tool.clone();
                let mut valid = |q: &JointVector| ctx.check(&q_tool_mid, q);
                plan_joint_path(
                    scene.robot.arm(CABLE_ARM),
                    &anchor_cfg,
                    std::slice::from_ref(&target_cfg),
                    &params,
                    &mut rng,
                    &mut valid,
                )
                .map(|path| retime(&path, gap))
                .filter(|retimed| check_segment(retimed))
            };
            match segment {
                Some(seg) => {
                    for (j, q) in seg.into_iter().enumerate() {
                        route[(anchor_step + 1 + j as isize) as usize] = Some(q);
                    }
                    anchor_step = target_step as isize;
                    anchor_cfg = target_cfg;
                }
                None => {
                    goals[target_step].status =
                        GoalStatus::Discarded(DiscardReason::Unreachable);
                    configs[target_step] = None;
                    continue 'routing;
                }
            }
        }
        // Tail: hold the last configuration through any trailing gap.
        for slot in route.iter_mut() {
            if slot.is_none() {
                *slot = Some(anchor_cfg.clone());
            }
        }
        return Ok(route.into_iter().map(|q| q.unwrap()).collect());
    }
}

/// Resample a joint path to exactly `steps` configurations (arc-length
/// parameterized in joint space), ending at the path's final point.
fn retime(path: &[JointVector], steps: usize) -> Vec<JointVector> {
    assert!(!path.is_empty());
    if steps == 0 {
        return Vec::new();
    }
    let mut cum = vec![0.0];
    for pair in path.windows(2) {
        let d = pair[0].max_abs_diff(&pair[1]);
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(steps);
    for k in 1..=steps {
        let s = total * k as f64 / steps as f64;
        let mut idx = cum.partition_point(|&c| c < s).min(path.len() - 1);
        if idx == 0 {
            idx = 1;
        }
        let seg = (cum[idx] - cum[idx - 1]).max(1e-12);
        let t = ((s - cum[idx - 1]) / seg).clamp(0.0, 1.0);
        out.push(path[idx - 1].lerp(&path[idx], t));
    }
    if let Some(last) = out.last_mut() {
        *last = path.last().unwrap().clone();
    }
    out
}

/// Weld the approach prefix and the synchronized body into raw steps.
fn build_raw_steps(
    omms: &MotionSequence,
    approach: &[JointVector],
    route: &[JointVector],
    q_tool_initial: &JointVector,
    tool_attach: Option<Pose>,
    slider_grasp: &GraspCandidate,
) -> Vec<RawStep> {
    let mut raw = Vec::with_capacity(approach.len() + omms.len());
    for (i, q) in approach.iter().enumerate() {
        raw.push(RawStep {
            phase: Phase::Approach,
            q_right: q_tool_initial.clone(),
            q_left: q.clone(),
            tool_attach: None,
            // The grasp closes on the last approach state.
            slider_attach: (i == approach.len() - 1).then_some(slider_grasp.hand_pose_local),
        });
    }
    for (i, (state, phase)) in omms.states.iter().zip(&omms.phases).enumerate() {
        let attached = tool_attach
            .filter(|_| !matches!(phase, Phase::Approach))
            .map(|h| (TOOL_ARM, h));
        raw.push(RawStep {
            phase: if matches!(phase, Phase::Place) {
                Phase::Place
            } else {
                Phase::CableFollow
            },
            q_right: state.q_tool.clone(),
            q_left: route[i].clone(),
            tool_attach: attached,
            slider_attach: Some(slider_grasp.hand_pose_local),
        });
    }
    raw
}

/// Replay a tool-only plan through the cable model (slider never held).
/// Used to score OMMS-only and handover baselines.
pub fn replay_without_slider(scene: &Scene, seq: &MotionSequence) -> MotionSequence {
    let mut tracker = AccumulationTracker::new(scene.beta_deg());
    let mut out = seq.clone();
    for state in out.states.iter_mut() {
        let cable = scene.cable_state(&state.tool_pose, None);
        tracker.update(&cable);
        state.cable = cable;
        state.slider_pose = None;
        state.acc_ee = tracker.acc_ee;
        state.acc_tool = tracker.acc_tool;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::omms::plan_omms;
    use crate::scene::Scene;
    use approx::assert_relative_eq;

    #[test]
    fn projection_is_literal_for_identity_pose() {
        let tool = Pose::identity();
        let goal = project_slider_goal(
            &tool,
            &Unit::new_normalize(Vector3::new(-1.0, 0.0, 0.0)),
            200.0,
            -1e6,
            0,
        );
        assert_relative_eq!(goal.position, Vector3::new(-200.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn projection_rotates_with_the_tool() {
        let tool = Pose::rotation_z_deg(90.0);
        let goal = project_slider_goal(
            &tool,
            &Unit::new_normalize(Vector3::new(-1.0, 0.0, 0.0)),
            200.0,
            -1e6,
            0,
        );
        // -x rotated by +90 about z lands on -y.
        assert_relative_eq!(goal.position, Vector3::new(0.0, -200.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn projection_lifts_to_minimum_height() {
        let tool = Pose::from_translation(Vector3::new(0.0, 0.0, 100.0));
        let goal = project_slider_goal(
            &tool,
            &Unit::new_normalize(Vector3::new(0.0, 0.0, -1.0)),
            200.0,
            150.0,
            3,
        );
        // Provisional z = -100, lifted to exactly the minimum height.
        assert_relative_eq!(goal.position.z, 150.0, epsilon = 1e-12);
        assert_eq!(goal.source_step, 3);
    }

    #[test]
    fn translation_only_tool_plan_keeps_accumulation_zero() {
        let scene = Scene::default_scene();
        // Same orientation as the start, moved sideways: the tail direction
        // never changes in the tool frame.
        let goal = Pose::new(*scene.start.rotation(), Vector3::new(480.0, 60.0, 1190.0));
        let omms = plan_omms(&scene, &scene.start, &[goal], 31).expect("omms");
        let cmms = plan_cmms(&omms, &scene, scene.alpha_s_mm(), 30.0, 31).expect("cmms");
        assert!(cmms.max_acc_ee() <= 30.0 + 1e-9);
        // Synchronization: one cable state per tool state.
        let body = cmms.len() - omms.len();
        assert!(body > 0, "approach prefix must exist");
        for (i, state) in cmms.states.iter().skip(body).enumerate() {
            assert_eq!(state.q_tool.angles, omms.states[i].q_tool.angles);
        }
    }

    #[test]
    fn goal_inside_obstacle_is_discarded() {
        let mut scene = Scene::default_scene();
        let omms = plan_omms(&scene, &scene.start, &[scene.goals[0]], 17).expect("omms");
        // Box swallowing the slider goal at the placement pose; kept small
        // and on the right side so the cable arm's home and the slider
        // rest position stay clear.
        let last = omms.states.last().unwrap().tool_pose;
        let goal_probe = project_slider_goal(
            &last,
            &scene.tail_dir_local(),
            scene.alpha_s_mm(),
            scene.min_slider_height_mm(),
            0,
        );
        scene
            .obstacles
            .boxes
            .push(crate::collision::ObstacleBox::axis_aligned(
                goal_probe.position,
                Vector3::new(30.0, 30.0, 30.0),
            ));
        let goals: Vec<SliderGoal> = omms
            .states
            .iter()
            .map(|s| {
                project_slider_goal(
                    &s.tool_pose,
                    &scene.tail_dir_local(),
                    scene.alpha_s_mm(),
                    scene.min_slider_height_mm(),
                    s.step,
                )
            })
            .collect();
        let annotated = filter_candidates(&goals, &omms, &scene, 30.0, 17).expect("filter");
        let discarded = annotated
            .iter()
            .filter(|g| {
                matches!(
                    g.status,
                    GoalStatus::Discarded(
                        DiscardReason::CableCollision | DiscardReason::Unreachable
                    )
                )
            })
            .count();
        assert!(discarded > 0, "the box must force discards");
    }

    #[test]
    fn retime_preserves_endpoints_and_cap() {
        let path = vec![
            JointVector::zeros(6),
            JointVector::new(vec![10.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            JointVector::new(vec![10.0, 20.0, 0.0, 0.0, 0.0, 0.0]),
        ];
        let retimed = retime(&path, 10);
        assert_eq!(retimed.len(), 10);
        assert_eq!(retimed.last().unwrap().angles, path.last().unwrap().angles);
        for pair in retimed.windows(2) {
            assert!(pair[0].max_abs_diff(&pair[1]) <= 5.0 + 1e-9);
        }
    }
}
