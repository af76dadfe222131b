use nalgebra::Vector3;
use tetherplan::kinematics::{solve_ik, ArmSide, IkTolerance};
use tetherplan::scene::Scene;
use tetherplan::se3::Pose;
use tetherplan::workspace::canonical_orientations;

#[test]
fn debug_reach() {
    let scene = Scene::default_scene();
    let arm = scene.robot.arm(ArmSide::Right);
    for p in [
        Vector3::new(400.0, -150.0, 1200.0),
        Vector3::new(450.0, 0.0, 1400.0),
        Vector3::new(400.0, 0.0, 1450.0),
    ] {
        for (k, rot) in canonical_orientations().iter().enumerate() {
            let target = Pose::new(*rot, p);
            for restarts in [4usize, 8, 16] {
                let n = solve_ik(arm, &target, restarts, IkTolerance::default(), 42).len();
                print!("{n:2} ");
            }
            println!("  orient {k} point {:?}", p.as_slice());
        }
    }
}
