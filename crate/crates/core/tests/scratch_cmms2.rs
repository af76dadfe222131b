use tetherplan::collision::{cable_clear, robot_collision_free, HeldObject, RobotPosture};
use tetherplan::grasp::grasp_world_pose;
use tetherplan::kinematics::{
    forward_kinematics, manipulability, solve_ik, solve_ik_seeded, ArmSide,
};
use tetherplan::omms::{plan_omms, Phase};
use tetherplan::scene::{Scene, SLIDER_OBJECT};
use tetherplan::se3::Pose;

#[test]
fn debug_static_discards() {
    let scene = Scene::default_scene();
    let goal_ids = [2usize, 1, 3];
    let goals: Vec<_> = goal_ids.iter().map(|&g| scene.goals[g - 1]).collect();
    let omms = plan_omms(&scene, &scene.start, &goals, 9).expect("omms");
    let arm = scene.robot.arm(ArmSide::Left);

    // Pick the slider grasp like the planner does.
    let rest = scene.slider_rest_pose();
    let grasps = scene.grasp_db.grasps(SLIDER_OBJECT).unwrap();
    let mut best: Option<(f64, usize, tetherplan::kinematics::JointVector)> = None;
    for (gi, grasp) in grasps.iter().enumerate() {
        let target = grasp_world_pose(grasp, &rest);
        for q in solve_ik(arm, &target, 12, scene.ik_tol, 300 + gi as u64) {
            let m = manipulability(arm, &q).unwrap();
            if best.as_ref().map_or(true, |(bm, _, _)| m > *bm) {
                best = Some((m, gi, q));
            }
        }
    }
    let (_, gi, grasp_cfg) = best.expect("slider grasp");
    let grasp = &grasps[gi];
    println!("selected slider grasp {gi}, cfg {:?}", grasp_cfg.angles);

    // Recover tool attachment.
    let mut hand_local = None;
    for (state, phase) in omms.states.iter().zip(&omms.phases) {
        if matches!(phase, Phase::Transfer | Phase::Place) {
            let fk = forward_kinematics(scene.robot.arm(ArmSide::Right), &state.q_tool).unwrap();
            hand_local = Some(state.tool_pose.inverse().compose(&fk.ee));
            break;
        }
    }
    let hand_local = hand_local.unwrap();

    let mut prev = grasp_cfg.clone();
    for i in 40..66.min(omms.len()) {
        let state = &omms.states[i];
        let goal = tetherplan::cmms::project_slider_goal(
            &state.tool_pose,
            &scene.tail_dir_local(),
            scene.alpha_s_mm(),
            scene.min_slider_height_mm(),
            i,
        );
        let slider_pose = Pose::new(scene.slider_orientation, goal.position);
        let target = grasp_world_pose(grasp, &slider_pose);
        let mut cands: Vec<tetherplan::kinematics::JointVector> = Vec::new();
        if let Some(q) = solve_ik_seeded(arm, &target, &prev, scene.ik_tol) {
            cands.push(q);
        }
        cands.extend(solve_ik(arm, &target, 6, scene.ik_tol, 5000 + i as u64));
        if cands.is_empty() {
            println!("step {i}: no IK at all (goal {:?})", goal.position.as_slice());
            continue;
        }
        let q = cands[0].clone();
        let ncand = cands.len();
        let attached = !matches!(omms.phases[i], Phase::Approach);
        let mut held = vec![HeldObject::new(&scene.slider_shape, slider_pose, ArmSide::Left)];
        if attached {
            held.push(HeldObject::new(
                &scene.tool_shape,
                state.tool_pose,
                ArmSide::Right,
            ));
        }
        let posture = RobotPosture {
            robot: &scene.robot,
            q_right: &state.q_tool,
            q_left: &q,
            held,
        };
        if let Some(v) = robot_collision_free(&posture, &scene.obstacles) {
            // try other branches
            let mut clean = None;
            for c in &cands[1..] {
                let mut held2 = vec![HeldObject::new(&scene.slider_shape, slider_pose, ArmSide::Left)];
                if attached {
                    held2.push(HeldObject::new(&scene.tool_shape, state.tool_pose, ArmSide::Right));
                }
                let p2 = RobotPosture { robot: &scene.robot, q_right: &state.q_tool, q_left: c, held: held2 };
                if robot_collision_free(&p2, &scene.obstacles).is_none() {
                    clean = Some(c.clone());
                    break;
                }
            }
            match clean {
                Some(c) => {
                    println!("step {i}: branch-hop cleared ({} cands)", ncand);
                    prev = c;
                }
                None => {
                    println!(
                        "step {i}: ALL {} branches collide; first: {} vs {} ({:.1} mm)",
                        ncand, v.first, v.second, v.clearance_mm
                    );
                    prev = q;
                }
            }
            continue;
        }
        let cable = scene.cable_state(&state.tool_pose, Some(goal.position));
        let exempt = [(ArmSide::Right, 5), (ArmSide::Left, 5)];
        let (clear, min_c) = cable_clear(&cable, &posture, &scene.obstacles, &exempt);
        println!("step {i}: ok, cable clear {clear} (min {min_c:.1})");
        prev = q;
    }
}
