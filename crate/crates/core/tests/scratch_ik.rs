use tetherplan::grasp::grasp_world_pose;
use tetherplan::kinematics::{forward_kinematics, solve_ik, ArmSide};
use tetherplan::scene::{Scene, TOOL_OBJECT};

#[test]
fn debug_ik_descent() {
    let scene = Scene::default_scene();
    let grasps = scene.grasp_db.grasps(TOOL_OBJECT).unwrap();
    let arm = scene.robot.arm(ArmSide::Right);
    let goal = scene.goals[0];
    for (gi, grasp) in grasps.iter().enumerate().take(8) {
        let target = grasp_world_pose(grasp, &goal);
        let sols = solve_ik(arm, &target, 40, scene.ik_tol, 777 + gi as u64);
        println!(
            "grasp {gi}: target t={:?} sols={}",
            target.translation().as_slice(),
            sols.len()
        );
        if let Some(q) = sols.first() {
            let fk = forward_kinematics(arm, q).unwrap();
            println!(
                "   q={:?} pos_err={:.3} rot_err={:.3}",
                q.angles.iter().map(|a| (a * 10.0).round() / 10.0).collect::<Vec<_>>(),
                fk.ee.translation_distance_to(&target),
                fk.ee.rotation_angle_to(&target)
            );
        }
    }
}
