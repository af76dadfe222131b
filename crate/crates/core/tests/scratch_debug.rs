use nalgebra::Vector3;
use tetherplan::collision::{robot_collision_free, HeldObject, RobotPosture};
use tetherplan::grasp::grasp_world_pose;
use tetherplan::kinematics::{forward_kinematics, solve_ik, ArmSide};
use tetherplan::scene::{Scene, TOOL_OBJECT};

#[test]
fn debug_grasp_feasibility() {
    let scene = Scene::default_scene();
    let grasps = scene.grasp_db.grasps(TOOL_OBJECT).unwrap();
    println!("tool grasps: {}", grasps.len());
    let mut poses = vec![("start", scene.start)];
    for (i, g) in scene.goals.iter().enumerate() {
        poses.push((Box::leak(format!("goal{}", i + 1).into_boxed_str()), *g));
    }
    let arm = scene.robot.arm(ArmSide::Right);
    for (name, pose) in &poses {
        let mut ik_ok = 0;
        let mut coll_ok = 0;
        let mut feasible_set: Vec<usize> = Vec::new();
        for (gi, grasp) in grasps.iter().enumerate() {
            let target = grasp_world_pose(grasp, pose);
            let sols = solve_ik(arm, &target, 40, scene.ik_tol, 1000 + gi as u64);
            if sols.is_empty() {
                continue;
            }
            ik_ok += 1;
            let mut any = false;
            for q in &sols {
                let fk = forward_kinematics(arm, q).unwrap();
                let tool_pose = fk.ee.compose(&grasp.hand_pose_local.inverse());
                let posture = RobotPosture {
                    robot: &scene.robot,
                    q_right: q,
                    q_left: &scene.robot.home_left,
                    held: vec![HeldObject::new(&scene.tool_shape, tool_pose, ArmSide::Right)],
                };
                if let Some(v) = robot_collision_free(&posture, &scene.obstacles) {
                    if *name == "goal7" {
                        println!(
                            "  {name} grasp0 sol rejected: {} vs {} ({:.1} mm)",
                            v.first, v.second, v.clearance_mm
                        );
                    }
                } else {
                    any = true;
                }
            }
            if any {
                coll_ok += 1;
                feasible_set.push(gi);
            }
        }
        println!(
            "{name}: pos {:?} | ik-feasible grasps {ik_ok}/{} collision-free {coll_ok}",
            Vector3::from(pose.translation()).as_slice(),
            grasps.len()
        );
        println!("  feasible: {feasible_set:?}");
    }
}
